//! Shared types for the continuous black-box minimizers.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned search box. Lower strictly below upper in every dimension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl Bounds {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dim("lower vs upper bounds", lower.len(), upper.len()));
        }
        if lower.is_empty() {
            return Err(Error::InvalidConfig("bounds must have at least one dimension".into()));
        }
        for d in 0..lower.len() {
            if !(lower[d] < upper[d]) {
                return Err(Error::InvalidConfig(format!(
                    "bounds must satisfy lower < upper, got [{}, {}] at dimension {d}",
                    lower[d], upper[d]
                )));
            }
        }
        Ok(Bounds { lower, upper })
    }

    /// Uniform box `[lo, hi]^dim`.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Bounds::new(DVector::from_element(dim, lo), DVector::from_element(dim, hi))
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn clamp(&self, x: &mut DVector<f64>) {
        for d in 0..x.len() {
            x[d] = x[d].clamp(self.lower[d], self.upper[d]);
        }
    }

    pub fn range(&self) -> DVector<f64> {
        &self.upper - &self.lower
    }
}

/// Result of one optimizer run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeOutcome {
    pub best_position: DVector<f64>,
    pub best_fitness: f64,
    /// Best-so-far fitness at the end of each iteration; non-increasing.
    pub history: Vec<f64>,
    /// Total objective evaluations performed.
    pub evaluations: usize,
}

/// Non-finite objective values never become the incumbent.
pub fn sanitize_fitness(f: f64) -> f64 {
    if f.is_finite() { f } else { f64::INFINITY }
}
