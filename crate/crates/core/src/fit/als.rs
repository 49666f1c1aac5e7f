//! Least squares for products of polynomial factors.
//!
//! A model `z ≈ p_0(v_0) · p_1(v_1) · … ` is linear in each factor's
//! coefficients once the others are fixed, so it is fitted by cycling exact
//! linear least-squares solves over the factors. Each half-step is an exact
//! minimization over one block, so the objective never increases.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fit::poly::PolyCoeffs;

pub const MAX_ITERATIONS: usize = 20;
pub const REL_TOL: f64 = 1e-12;

/// Ordinary least squares with column equilibration. Columns that are
/// identically zero get a zero coefficient.
pub fn lstsq(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() < a.ncols() {
        return Err(Error::fit(format!(
            "{} observations for {} unknowns",
            a.nrows(),
            a.ncols()
        )));
    }
    let scales: Vec<f64> = (0..a.ncols())
        .map(|j| {
            let n = a.column(j).norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = a.clone();
    for (j, s) in scales.iter().enumerate() {
        scaled.column_mut(j).unscale_mut(*s);
    }
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.max();
    let x = svd
        .solve(y, smax * 1e-13)
        .map_err(|e| Error::fit(e.to_string()))?;
    let out = DVector::from_iterator(x.len(), x.iter().zip(&scales).map(|(v, s)| v / s));
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::fit("least-squares solution is not finite"));
    }
    Ok(out)
}

/// Powers used by one factor: `x^first, …, x^degree`. Coefficients below
/// `first` are pinned to zero.
#[derive(Debug, Clone, Copy)]
pub struct Basis {
    pub degree: usize,
    pub first: usize,
}

impl Basis {
    pub fn full(degree: usize) -> Self {
        Basis { degree, first: 0 }
    }

    fn len(&self) -> usize {
        self.degree + 1 - self.first
    }

    fn row(&self, x: f64, out: &mut [f64]) {
        let mut p = x.powi(self.first as i32);
        for o in out.iter_mut() {
            *o = p;
            p *= x;
        }
    }

    fn to_poly(self, free: &[f64]) -> PolyCoeffs {
        let mut c = vec![0.0; self.degree + 1];
        c[self.first..].copy_from_slice(free);
        PolyCoeffs::from_raw(c)
    }
}

/// One factor: its basis and the variable value at every observation.
pub struct Factor<'a> {
    pub basis: Basis,
    pub values: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct ProductFit {
    pub factors: Vec<PolyCoeffs>,
    /// Sum of squared residuals after each full sweep.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

impl ProductFit {
    pub fn predict(&self, values: &[f64]) -> f64 {
        self.factors
            .iter()
            .zip(values)
            .map(|(p, v)| p.eval(*v))
            .product()
    }
}

/// Fits `target ≈ Π_k p_k(values_k)` by alternating least squares.
///
/// Factor 0 carries the overall scale. Every other factor is normalized
/// to unit coefficient norm with its sign set by `orient[k]`; `orient[0]`
/// is ignored.
pub fn fit_product(
    factors: &[Factor<'_>],
    target: &[f64],
    orient: &[Orientation],
) -> Result<ProductFit> {
    let n = target.len();
    if factors.is_empty() {
        return Err(Error::usage("no factors"));
    }
    if orient.len() != factors.len() {
        return Err(Error::usage("one orientation per factor required"));
    }
    for f in factors {
        if f.values.len() != n {
            return Err(Error::usage("factor length does not match target"));
        }
    }
    let y = DVector::from_column_slice(target);

    // Start every factor but the first at its lowest basis monomial.
    let mut coeffs: Vec<Vec<f64>> = factors
        .iter()
        .map(|f| {
            let mut c = vec![0.0; f.basis.len()];
            c[0] = 1.0;
            c
        })
        .collect();

    let eval_factor = |k: usize, coeffs: &[Vec<f64>], i: usize| -> f64 {
        let b = factors[k].basis;
        let x = factors[k].values[i];
        let mut p = x.powi(b.first as i32);
        let mut acc = 0.0;
        for c in &coeffs[k] {
            acc += c * p;
            p *= x;
        }
        acc
    };

    let mut objective = Vec::new();
    let mut iterations = 0;
    for _ in 0..MAX_ITERATIONS {
        iterations += 1;
        for k in 0..factors.len() {
            let m = factors[k].basis.len();
            let mut a = DMatrix::zeros(n, m);
            let mut row = vec![0.0; m];
            for i in 0..n {
                let others: f64 = (0..factors.len())
                    .filter(|&l| l != k)
                    .map(|l| eval_factor(l, &coeffs, i))
                    .product();
                factors[k].basis.row(factors[k].values[i], &mut row);
                for j in 0..m {
                    a[(i, j)] = row[j] * others;
                }
            }
            let sol = lstsq(&a, &y)?;
            coeffs[k] = sol.iter().copied().collect();
        }
        let sse: f64 = (0..n)
            .map(|i| {
                let pred: f64 = (0..factors.len())
                    .map(|k| eval_factor(k, &coeffs, i))
                    .product();
                (target[i] - pred).powi(2)
            })
            .sum();
        let prev = objective.last().copied();
        objective.push(sse);
        if let Some(prev) = prev {
            if prev - sse <= REL_TOL * prev {
                break;
            }
        }
    }

    // Normalize: unit norm and fixed sign on every factor but the first.
    for k in 1..factors.len() {
        let norm = coeffs[k].iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let poly = factors[k].basis.to_poly(&coeffs[k]);
        let probe = orient[k].probe(&poly);
        let mut s = 1.0 / norm;
        if probe != 0.0 && (probe < 0.0) != orient[k].negative {
            s = -s;
        }
        coeffs[k].iter_mut().for_each(|c| *c *= s);
        coeffs[0].iter_mut().for_each(|c| *c /= s);
    }

    let factors_out = factors
        .iter()
        .zip(&coeffs)
        .map(|(f, c)| f.basis.to_poly(c))
        .collect();
    Ok(ProductFit {
        factors: factors_out,
        objective,
        iterations,
    })
}

/// Sign convention for a normalized factor.
#[derive(Debug, Clone, Copy)]
pub struct Orientation {
    pub rule: SignRule,
    /// Require a non-positive probe instead of a non-negative one.
    pub negative: bool,
}

#[derive(Debug, Clone, Copy)]
pub enum SignRule {
    /// The polynomial's value at this point.
    ValueAt(f64),
    /// The coefficient of this power.
    Coefficient(usize),
}

impl Orientation {
    pub fn positive_at(at: f64) -> Self {
        Orientation {
            rule: SignRule::ValueAt(at),
            negative: false,
        }
    }

    pub fn negative_at(at: f64) -> Self {
        Orientation {
            rule: SignRule::ValueAt(at),
            negative: true,
        }
    }

    pub fn negative_coefficient(index: usize) -> Self {
        Orientation {
            rule: SignRule::Coefficient(index),
            negative: true,
        }
    }

    fn probe(&self, p: &PolyCoeffs) -> f64 {
        match self.rule {
            SignRule::ValueAt(x) => p.eval(x),
            SignRule::Coefficient(i) => p.coeffs().get(i).copied().unwrap_or(0.0),
        }
    }
}
