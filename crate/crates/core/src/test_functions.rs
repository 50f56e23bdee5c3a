//! Analytic regression targets on the cube [-1, 1]^d.
//!
//! Four scalar families are provided, selected by name in configs:
//!
//! - `f1`: exp(-(y_1 + ... + y_d) / d)
//! - `f2`: prod_{k > ceil(d/2)} cos(16 y_k / 2^k) / prod_{k <= ceil(d/2)} (1 - y_k / 4^k)
//! - `f3`: (1 + (1/(2d)) sum_i q_i y_i)^{-1} with q_i = 10^{-3(i-1)/(d-1)}
//! - `f4`: (prod_{k <= ceil(d/2)} (1 + 4^k y_k^2) / prod_{k > ceil(d/2)} (100 + 5 y_k))^{1/d}
//!
//! Empty products are 1, and at d = 1 the q coefficients of `f3` collapse to
//! q_1 = 1. All four are smooth and pole-free on the closed cube.

use crate::error::{Error, Result};
use ndarray::{Array2, ArrayView2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    F1,
    F2,
    F3,
    F4,
}

impl TargetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetKind::F1 => "f1",
            TargetKind::F2 => "f2",
            TargetKind::F3 => "f3",
            TargetKind::F4 => "f4",
        }
    }
}

impl std::str::FromStr for TargetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "f1" => Ok(TargetKind::F1),
            "f2" => Ok(TargetKind::F2),
            "f3" => Ok(TargetKind::F3),
            "f4" => Ok(TargetKind::F4),
            other => Err(format!("unknown target {other:?}, expected f1..f4")),
        }
    }
}

/// A scalar target function of fixed input dimension.
#[derive(Debug, Clone)]
pub struct TargetFunction {
    kind: TargetKind,
    dimension: usize,
    /// Linear decay coefficients for `f3`, precomputed at construction.
    q: Vec<f64>,
}

impl TargetFunction {
    pub fn new(kind: TargetKind, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("target dimension must be at least 1".into()));
        }
        let q = if kind == TargetKind::F3 {
            decay_coefficients(dimension)
        } else {
            Vec::new()
        };
        Ok(TargetFunction { kind, dimension, q })
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// All four families are scalar-valued.
    pub fn output_dim(&self) -> usize {
        1
    }

    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, actual: y.len() });
        }
        let d = self.dimension;
        let half = d.div_ceil(2);
        let value = match self.kind {
            TargetKind::F1 => {
                let mean = y.iter().sum::<f64>() / d as f64;
                (-mean).exp()
            }
            TargetKind::F2 => {
                let mut num = 1.0;
                for k in half + 1..=d {
                    num *= (16.0 * y[k - 1] / 2f64.powi(k as i32)).cos();
                }
                let mut den = 1.0;
                for k in 1..=half {
                    den *= 1.0 - y[k - 1] / 4f64.powi(k as i32);
                }
                num / den
            }
            TargetKind::F3 => {
                let dot: f64 = self.q.iter().zip(y).map(|(q, v)| q * v).sum();
                1.0 / (1.0 + dot / (2.0 * d as f64))
            }
            TargetKind::F4 => {
                let mut num = 1.0;
                for k in 1..=half {
                    num *= 1.0 + 4f64.powi(k as i32) * y[k - 1] * y[k - 1];
                }
                let mut den = 1.0;
                for k in half + 1..=d {
                    den *= 100.0 + 5.0 * y[k - 1];
                }
                (num / den).powf(1.0 / d as f64)
            }
        };
        if !value.is_finite() {
            return Err(Error::NonFinite("target function value"));
        }
        Ok(value)
    }

    /// Evaluates the target on every row of `points` (rows are points).
    pub fn eval_rows(&self, points: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((points.nrows(), 1));
        for (i, row) in points.rows().into_iter().enumerate() {
            out[[i, 0]] = self.eval(row.as_slice().expect("contiguous row"))?;
        }
        Ok(out)
    }
}

/// q_i = 10^{-3(i-1)/(d-1)}: strictly decreasing from 1 to 10^{-3}. At d = 1
/// the single coefficient is 1.
fn decay_coefficients(d: usize) -> Vec<f64> {
    if d == 1 {
        return vec![1.0];
    }
    (0..d).map(|i| 10f64.powf(-3.0 * i as f64 / (d as f64 - 1.0))).collect()
}
