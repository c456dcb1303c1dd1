//! Standard continuous test functions for optimizer benchmarking.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchFunction {
    Sphere,
    Rastrigin,
    Rosenbrock,
}

impl BenchFunction {
    pub fn name(self) -> &'static str {
        match self {
            BenchFunction::Sphere => "sphere",
            BenchFunction::Rastrigin => "rastrigin",
            BenchFunction::Rosenbrock => "rosenbrock",
        }
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            BenchFunction::Sphere => x.iter().map(|v| v * v).sum(),
            BenchFunction::Rastrigin => {
                10.0 * x.len() as f64
                    + x.iter()
                        .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos())
                        .sum::<f64>()
            }
            BenchFunction::Rosenbrock => x
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum(),
        }
    }

    /// Conventional search box per function.
    pub fn default_bounds(self) -> (f64, f64) {
        match self {
            BenchFunction::Sphere => (-1.0, 1.0),
            BenchFunction::Rastrigin => (-5.12, 5.12),
            BenchFunction::Rosenbrock => (-5.0, 10.0),
        }
    }
}

impl std::str::FromStr for BenchFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sphere" => Ok(BenchFunction::Sphere),
            "rastrigin" => Ok(BenchFunction::Rastrigin),
            "rosenbrock" => Ok(BenchFunction::Rosenbrock),
            other => Err(Error::InvalidConfig(format!("unknown test function '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minima_are_at_known_points() {
        assert_eq!(BenchFunction::Sphere.eval(&[0.0, 0.0]), 0.0);
        assert!(BenchFunction::Rastrigin.eval(&[0.0; 4]).abs() < 1e-12);
        assert_eq!(BenchFunction::Rosenbrock.eval(&[1.0, 1.0, 1.0]), 0.0);
    }

    #[test]
    fn rastrigin_hand_value() {
        // f(0.5) = 10 + 0.25 - 10 cos(pi) = 20.25
        let v = BenchFunction::Rastrigin.eval(&[0.5]);
        assert!((v - 20.25).abs() < 1e-12, "{v}");
    }
}
