//! INT4 nearest-centroid classifier whose multiplications run on the
//! multiplier model.
//!
//! Signed operands are mapped onto the unsigned 4-bit multiplier by sign and
//! magnitude: the weight is the stored word, the input drives the word line.
//! Accumulation is exact.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::FittedModels;
use crate::rng::{derived, mix};
use crate::sim::{AdcCalibration, CircuitConfig, Multiplier, MAX_OPERAND};

pub const INT4_MAX: i8 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticTask {
    pub classes: usize,
    pub dim: usize,
    /// Training samples per class, used to estimate the centroids.
    pub train_per_class: usize,
    pub n_test: usize,
    /// Standard deviation of the class means relative to the unit noise.
    pub separation: f64,
    pub seed: u64,
}

impl Default for SyntheticTask {
    fn default() -> Self {
        SyntheticTask {
            classes: 10,
            dim: 64,
            train_per_class: 50,
            n_test: 1000,
            separation: DEFAULT_SEPARATION,
            seed: 7,
        }
    }
}

/// Separation giving a real-valued accuracy near 90 % on the default task.
pub const DEFAULT_SEPARATION: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub spec: SyntheticTask,
    /// Estimated class centroids, one row per class.
    pub weights: Vec<Vec<f64>>,
    pub test_x: Vec<Vec<f64>>,
    pub test_y: Vec<usize>,
    /// Top-1 accuracy of real-valued dot-product scoring.
    pub real_accuracy: f64,
}

fn gaussian_vec(rng: &mut crate::rng::Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Gaussian clusters around `separation · N(0, I)` means with unit noise.
/// The classifier weights are the centroids of the training samples.
pub fn make_task(spec: &SyntheticTask) -> Result<Task> {
    if spec.classes < 2 {
        return Err(Error::usage("a task needs at least 2 classes"));
    }
    if spec.classes > spec.dim {
        return Err(Error::usage(format!(
            "{} classes cannot be placed in {} dimensions",
            spec.classes, spec.dim
        )));
    }
    if spec.train_per_class == 0 || spec.n_test == 0 {
        return Err(Error::usage("task needs training and test samples"));
    }
    if !(spec.separation >= 0.0 && spec.separation.is_finite()) {
        return Err(Error::usage("separation must be finite and non-negative"));
    }
    let mut rng = derived(spec.seed, 0);
    let means: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| gaussian_vec(&mut rng, spec.dim, spec.separation))
        .collect();
    let mut rng = derived(spec.seed, 1);
    let weights: Vec<Vec<f64>> = means
        .iter()
        .map(|mu| {
            let mut c = vec![0.0; spec.dim];
            for _ in 0..spec.train_per_class {
                for (ci, (m, z)) in c
                    .iter_mut()
                    .zip(mu.iter().zip(gaussian_vec(&mut rng, spec.dim, 1.0)))
                {
                    *ci += m + z;
                }
            }
            c.iter().map(|v| v / spec.train_per_class as f64).collect()
        })
        .collect();
    let mut rng = derived(spec.seed, 2);
    let mut test_x = Vec::with_capacity(spec.n_test);
    let mut test_y = Vec::with_capacity(spec.n_test);
    for _ in 0..spec.n_test {
        let y = rng.gen_range(0..spec.classes);
        let x: Vec<f64> = means[y]
            .iter()
            .zip(gaussian_vec(&mut rng, spec.dim, 1.0))
            .map(|(m, z)| m + z)
            .collect();
        test_x.push(x);
        test_y.push(y);
    }
    let correct = test_x
        .iter()
        .zip(&test_y)
        .filter(|(x, y)| {
            let s: Vec<f64> = weights
                .iter()
                .map(|w| w.iter().zip(x.iter()).map(|(a, b)| a * b).sum())
                .collect();
            argmax(&s) == **y
        })
        .count();
    Ok(Task {
        spec: spec.clone(),
        weights,
        test_x,
        test_y,
        real_accuracy: correct as f64 / spec.n_test as f64,
    })
}

fn argmax(s: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in s.iter().enumerate() {
        if *v > s[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Int4Tensor {
    pub codes: Vec<i8>,
    pub scale: f64,
}

impl Int4Tensor {
    pub fn dequantize(&self) -> Vec<f64> {
        self.codes.iter().map(|&c| c as f64 * self.scale).collect()
    }
}

/// Symmetric per-tensor quantization with `scale = max|v| / 7`. An all-zero
/// tensor gets scale 1.
pub fn quantize_int4(values: &[f64]) -> Result<Int4Tensor> {
    if values.is_empty() {
        return Err(Error::usage("cannot quantize an empty tensor"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::usage("cannot quantize non-finite values"));
    }
    let max = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let scale = if max > 0.0 {
        max / INT4_MAX as f64
    } else {
        1.0
    };
    let codes = values
        .iter()
        .map(|v| {
            (v / scale)
                .round()
                .clamp(-(INT4_MAX as f64), INT4_MAX as f64) as i8
        })
        .collect();
    Ok(Int4Tensor { codes, scale })
}

/// Expected output code of the multiplier for every `(a, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lut {
    pub name: String,
    pub codes: [[u32; 16]; 16],
}

impl Lut {
    /// Nominal-mode codes of `mul`.
    pub fn from_multiplier(name: &str, mul: &Multiplier<'_>) -> Result<Self> {
        let mut codes = [[0u32; 16]; 16];
        for a in 0..=MAX_OPERAND {
            for b in 0..=MAX_OPERAND {
                codes[a as usize][b as usize] = mul.nominal(a, b)?.code;
            }
        }
        Ok(Lut {
            name: name.to_string(),
            codes,
        })
    }

    pub fn exact() -> Self {
        let mut codes = [[0u32; 16]; 16];
        for (a, row) in codes.iter_mut().enumerate() {
            for (b, c) in row.iter_mut().enumerate() {
                *c = (a * b) as u32;
            }
        }
        Lut {
            name: "exact".into(),
            codes,
        }
    }
}

/// A multiplier drawing one mismatch sample per call.
#[derive(Debug, Clone, PartialEq)]
pub struct Stochastic {
    pub name: String,
    pub cfg: CircuitConfig,
    pub cal: AdcCalibration,
    pub models: FittedModels,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum MulBackend {
    Exact,
    Lut(Lut),
    Stochastic(Stochastic),
}

impl MulBackend {
    pub fn name(&self) -> &str {
        match self {
            MulBackend::Exact => "exact",
            MulBackend::Lut(l) => &l.name,
            MulBackend::Stochastic(s) => &s.name,
        }
    }
}

fn check_code(param: &'static str, c: i8) -> Result<()> {
    if (-INT4_MAX..=INT4_MAX).contains(&c) {
        Ok(())
    } else {
        Err(Error::Domain {
            param,
            value: c as f64,
            min: -(INT4_MAX as f64),
            max: INT4_MAX as f64,
        })
    }
}

/// `sign(a) · sign(b) · backend(|a|, |b|)` with `sign(0) = 0`, which keeps
/// scores invariant under negating every weight and input. `stream` selects
/// the mismatch draw of a stochastic backend and is ignored otherwise.
pub fn signed_mul(a: i8, b: i8, backend: &MulBackend, stream: u64) -> Result<i64> {
    check_code("a", a)?;
    check_code("b", b)?;
    let sign = (a.signum() * b.signum()) as i64;
    if sign == 0 {
        return Ok(0);
    }
    let (ua, ub) = (a.unsigned_abs(), b.unsigned_abs());
    let mag = match backend {
        MulBackend::Exact => ua as i64 * ub as i64,
        MulBackend::Lut(l) => l.codes[ua as usize][ub as usize] as i64,
        MulBackend::Stochastic(s) => {
            let mul = Multiplier::new(s.cfg, &s.models, s.cal)?;
            mul.sampled(ua, ub, &mut derived(s.seed, stream))?.code as i64
        }
    };
    Ok(sign * mag)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub backend: String,
    pub top1: f64,
    pub top_k: f64,
    pub k: usize,
}

/// Quantized weights and inputs of a task.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTask {
    /// One row per class, sharing one scale.
    pub weights: Vec<Vec<i8>>,
    /// One row per test sample, each with its own scale.
    pub inputs: Vec<Vec<i8>>,
    pub labels: Vec<usize>,
}

pub fn quantize_task(task: &Task) -> Result<QuantizedTask> {
    let dim = task.spec.dim;
    let flat: Vec<f64> = task.weights.iter().flatten().copied().collect();
    let w = quantize_int4(&flat)?;
    let weights = w.codes.chunks(dim).map(|c| c.to_vec()).collect();
    let inputs = task
        .test_x
        .iter()
        .map(|x| quantize_int4(x).map(|q| q.codes))
        .collect::<Result<_>>()?;
    Ok(QuantizedTask {
        weights,
        inputs,
        labels: task.test_y.clone(),
    })
}

/// Integer class scores of one sample.
pub fn scores(q: &QuantizedTask, sample: usize, backend: &MulBackend) -> Result<Vec<i64>> {
    let x = &q.inputs[sample];
    let dim = x.len() as u64;
    q.weights
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let mut s = 0i64;
            for (j, (&wj, &xj)) in w.iter().zip(x).enumerate() {
                let stream = mix(sample as u64, k as u64 * dim + j as u64);
                s += signed_mul(wj, xj, backend, stream)?;
            }
            Ok(s)
        })
        .collect()
}

/// Classes ordered by descending score, lower index first on ties.
fn ranking(s: &[i64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&i, &j| s[j].cmp(&s[i]).then(i.cmp(&j)));
    idx
}

/// Top-1 and top-K accuracy (K = min(5, classes)) of every backend.
pub fn infer_and_score(q: &QuantizedTask, backends: &[MulBackend]) -> Result<Vec<AccuracyRow>> {
    let classes = q.weights.len();
    let k = classes.min(5);
    let n = q.labels.len();
    backends
        .iter()
        .map(|b| {
            let hits = (0..n)
                .into_par_iter()
                .map(|i| {
                    let r = ranking(&scores(q, i, b)?);
                    let y = q.labels[i];
                    Ok(((r[0] == y) as usize, r[..k].contains(&y) as usize))
                })
                .collect::<Result<Vec<_>>>()?;
            let (t1, tk) = hits.iter().fold((0, 0), |a, h| (a.0 + h.0, a.1 + h.1));
            Ok(AccuracyRow {
                backend: b.name().to_string(),
                top1: t1 as f64 / n as f64,
                top_k: tk as f64 / n as f64,
                k,
            })
        })
        .collect()
}
