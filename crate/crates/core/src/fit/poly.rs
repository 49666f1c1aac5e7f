use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial coefficients, lowest order first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyRepr", into = "PolyRepr")]
pub struct PolyCoeffs {
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PolyRepr {
    degree: usize,
    coeffs: Vec<f64>,
}

impl TryFrom<PolyRepr> for PolyCoeffs {
    type Error = Error;

    fn try_from(r: PolyRepr) -> Result<Self> {
        if r.coeffs.len() != r.degree + 1 {
            return Err(Error::usage(format!(
                "polynomial of degree {} needs {} coefficients, got {}",
                r.degree,
                r.degree + 1,
                r.coeffs.len()
            )));
        }
        PolyCoeffs::new(r.coeffs)
    }
}

impl From<PolyCoeffs> for PolyRepr {
    fn from(p: PolyCoeffs) -> Self {
        PolyRepr {
            degree: p.degree(),
            coeffs: p.coeffs,
        }
    }
}

impl PolyCoeffs {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::usage("polynomial needs at least one coefficient"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::fit("non-finite polynomial coefficient"));
        }
        Ok(PolyCoeffs { coeffs })
    }

    pub fn zeros(degree: usize) -> Self {
        PolyCoeffs {
            coeffs: vec![0.0; degree + 1],
        }
    }

    /// `c` as a polynomial of the given degree.
    pub fn constant(c: f64, degree: usize) -> Self {
        let mut p = Self::zeros(degree);
        p.coeffs[0] = c;
        p
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Horner evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn scaled(&self, s: f64) -> Self {
        PolyCoeffs {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub(crate) fn from_raw(coeffs: Vec<f64>) -> Self {
        debug_assert!(!coeffs.is_empty());
        PolyCoeffs { coeffs }
    }
}
