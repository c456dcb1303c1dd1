//! Cross-validation folding, metrics, synthetic datasets, and the repeated
//! -runs experiment protocol.

pub mod protocol;

pub use protocol::{
    run_protocol, AggregateRow, CellRecord, MetricsReport, ModelEntry, ModelSpec, ProtocolOptions,
    ProtocolOutput,
};

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::elm::RegressionData;
use crate::error::{Error, Result};

/// Repeated k-fold plan: `run_count` independent reshuffles of a
/// `fold_count`-fold partition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldPlan {
    pub fold_count: usize,
    pub run_count: usize,
    pub master_seed: u64,
}

impl Default for FoldPlan {
    fn default() -> Self {
        FoldPlan {
            fold_count: 5,
            run_count: 20,
            master_seed: 0,
        }
    }
}

pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9e3779b97f4a7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic folds for one run: fold k's test set is shard k of a
/// seeded shuffle, the train set is everything else. Shard sizes differ by
/// at most one.
pub fn make_folds(
    sample_count: usize,
    plan: &FoldPlan,
    run_index: usize,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if plan.fold_count < 2 {
        return Err(Error::InvalidConfig(format!(
            "fold count must be at least 2, got {}",
            plan.fold_count
        )));
    }
    if sample_count < plan.fold_count {
        return Err(Error::InvalidConfig(format!(
            "cannot split {sample_count} samples into {} folds",
            plan.fold_count
        )));
    }
    let mut indices: Vec<usize> = (0..sample_count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(plan.master_seed, run_index as u64));
    for i in (1..sample_count).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }

    let base = sample_count / plan.fold_count;
    let extra = sample_count % plan.fold_count;
    let mut folds = Vec::with_capacity(plan.fold_count);
    let mut offset = 0;
    for k in 0..plan.fold_count {
        let size = base + usize::from(k < extra);
        let mut test: Vec<usize> = indices[offset..offset + size].to_vec();
        let mut train: Vec<usize> = indices[..offset]
            .iter()
            .chain(&indices[offset + size..])
            .copied()
            .collect();
        test.sort_unstable();
        train.sort_unstable();
        folds.push((train, test));
        offset += size;
    }
    Ok(folds)
}

/// Root-mean-square error.
pub fn rmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::dim("predictions vs targets", predictions.len(), targets.len()));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidConfig("RMSE of empty vectors is undefined".into()));
    }
    let mse: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(y, t)| (y - t) * (y - t))
        .sum::<f64>()
        / predictions.len() as f64;
    Ok(mse.sqrt())
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r_squared(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::dim("predictions vs targets", predictions.len(), targets.len()));
    }
    if targets.is_empty() {
        return Err(Error::InvalidConfig("R^2 of empty vectors is undefined".into()));
    }
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let ss_tot: f64 = targets.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let ss_res: f64 = predictions.iter().zip(targets).map(|(y, t)| (t - y) * (t - y)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    Sinc1d,
    Friedman1,
    Linear,
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sinc1d" | "sinc" => Ok(SyntheticKind::Sinc1d),
            "friedman1" | "friedman" => Ok(SyntheticKind::Friedman1),
            "linear" => Ok(SyntheticKind::Linear),
            other => Err(Error::InvalidConfig(format!("unknown synthetic dataset '{other}'"))),
        }
    }
}

impl SyntheticKind {
    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::Sinc1d => "sinc1d",
            SyntheticKind::Friedman1 => "friedman1",
            SyntheticKind::Linear => "linear",
        }
    }
}

/// Deterministic synthetic regression data. Generative forms:
/// - sinc1d: x ~ U[-10, 10], y = sin(x)/x (1 at x = 0) + noise
/// - friedman1: x_1..x_10 ~ U[0, 1],
///   y = 10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5 + noise
/// - linear: x_1..x_3 ~ U[-1, 1], y = 1.5 x1 - 2 x2 + 0.5 x3 + 0.7 + noise
pub fn synthetic_dataset(
    kind: SyntheticKind,
    sample_count: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<RegressionData> {
    if sample_count == 0 {
        return Err(Error::InvalidConfig("sample count must be positive".into()));
    }
    if noise_sigma < 0.0 {
        return Err(Error::InvalidConfig(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_features = match kind {
        SyntheticKind::Sinc1d => 1,
        SyntheticKind::Friedman1 => 10,
        SyntheticKind::Linear => 3,
    };
    let mut inputs = DMatrix::zeros(sample_count, n_features);
    let mut targets = DVector::zeros(sample_count);
    for p in 0..sample_count {
        let clean = match kind {
            SyntheticKind::Sinc1d => {
                let x: f64 = rng.random_range(-10.0..10.0);
                inputs[(p, 0)] = x;
                if x == 0.0 { 1.0 } else { x.sin() / x }
            }
            SyntheticKind::Friedman1 => {
                for d in 0..10 {
                    inputs[(p, d)] = rng.random::<f64>();
                }
                10.0 * (std::f64::consts::PI * inputs[(p, 0)] * inputs[(p, 1)]).sin()
                    + 20.0 * (inputs[(p, 2)] - 0.5).powi(2)
                    + 10.0 * inputs[(p, 3)]
                    + 5.0 * inputs[(p, 4)]
            }
            SyntheticKind::Linear => {
                for d in 0..3 {
                    inputs[(p, d)] = rng.random_range(-1.0..1.0);
                }
                1.5 * inputs[(p, 0)] - 2.0 * inputs[(p, 1)] + 0.5 * inputs[(p, 2)] + 0.7
            }
        };
        let noise: f64 = if noise_sigma > 0.0 {
            noise_sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        } else {
            0.0
        };
        targets[p] = clean + noise;
    }
    RegressionData::new(inputs, targets)
}

/// Min-max scaling to [0, 1] fitted on training statistics only.
/// Constant columns map to zero.
#[derive(Debug, Clone)]
pub struct MinMaxScaler {
    mins: Vec<f64>,
    ranges: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(inputs: &DMatrix<f64>) -> Self {
        let mut mins = vec![f64::INFINITY; inputs.ncols()];
        let mut maxs = vec![f64::NEG_INFINITY; inputs.ncols()];
        for r in 0..inputs.nrows() {
            for c in 0..inputs.ncols() {
                mins[c] = mins[c].min(inputs[(r, c)]);
                maxs[c] = maxs[c].max(inputs[(r, c)]);
            }
        }
        let ranges = mins.iter().zip(&maxs).map(|(lo, hi)| hi - lo).collect();
        MinMaxScaler { mins, ranges }
    }

    pub fn transform(&self, inputs: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(inputs.nrows(), inputs.ncols(), |r, c| {
            if self.ranges[c] > 0.0 {
                (inputs[(r, c)] - self.mins[c]) / self.ranges[c]
            } else {
                0.0
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::collections::BTreeSet;

    #[test]
    fn folds_partition_exactly() {
        let plan = FoldPlan { fold_count: 5, run_count: 1, master_seed: 3 };
        let folds = make_folds(10, &plan, 0).unwrap();
        assert_eq!(folds.len(), 5);
        let mut seen = BTreeSet::new();
        for (train, test) in &folds {
            assert_eq!(test.len(), 2);
            assert_eq!(train.len(), 8);
            for &i in test {
                assert!(seen.insert(i), "index {i} in two test sets");
                assert!(!train.contains(&i));
            }
        }
        assert_eq!(seen.len(), 10);
    }

    #[test]
    fn fold_sizes_differ_by_at_most_one() {
        let plan = FoldPlan { fold_count: 4, run_count: 1, master_seed: 0 };
        let folds = make_folds(11, &plan, 0).unwrap();
        let sizes: Vec<usize> = folds.iter().map(|(_, t)| t.len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 11);
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(hi - lo <= 1);
    }

    #[test]
    fn folds_are_deterministic_per_run() {
        let plan = FoldPlan::default();
        assert_eq!(make_folds(100, &plan, 3).unwrap(), make_folds(100, &plan, 3).unwrap());
    }

    #[test]
    fn different_runs_shuffle_differently() {
        let plan = FoldPlan::default();
        let a = make_folds(100, &plan, 0).unwrap();
        let b = make_folds(100, &plan, 1).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn too_few_samples_rejected() {
        let plan = FoldPlan::default();
        assert!(make_folds(4, &plan, 0).is_err());
    }

    #[test]
    fn rmse_known_values() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_relative_eq!(rmse(&[1.0, 2.0], &[0.0, 2.0]).unwrap(), (0.5_f64).sqrt(), epsilon = 1e-12);
        // Uniform shift c gives RMSE |c|.
        assert_relative_eq!(rmse(&[1.5, 2.5], &[1.0, 2.0]).unwrap(), 0.5, epsilon = 1e-12);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rmse_scale_equivariance() {
        let y = [0.3, -0.7, 1.2];
        let t = [0.1, -0.2, 1.0];
        let a = 3.7;
        let ys: Vec<f64> = y.iter().map(|v| a * v).collect();
        let ts: Vec<f64> = t.iter().map(|v| a * v).collect();
        assert_relative_eq!(rmse(&ys, &ts).unwrap(), a * rmse(&y, &t).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn r_squared_known_values() {
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        // Constant mean prediction scores zero.
        assert_relative_eq!(r_squared(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(r_squared(&[0.0, 1.0, 3.0], &[0.0, 1.0, 2.0]).unwrap(), 0.5, epsilon = 1e-12);
        assert!(matches!(
            r_squared(&[1.0, 2.0], &[5.0, 5.0]).unwrap_err(),
            Error::DegenerateVariance
        ));
    }

    #[test]
    fn noiseless_linear_matches_documented_form() {
        let data = synthetic_dataset(SyntheticKind::Linear, 50, 0.0, 4).unwrap();
        for p in 0..50 {
            let expect = 1.5 * data.inputs[(p, 0)] - 2.0 * data.inputs[(p, 1)]
                + 0.5 * data.inputs[(p, 2)]
                + 0.7;
            assert_eq!(data.targets[p], expect);
        }
    }

    #[test]
    fn synthetic_data_is_seed_deterministic() {
        let a = synthetic_dataset(SyntheticKind::Friedman1, 30, 0.1, 5).unwrap();
        let b = synthetic_dataset(SyntheticKind::Friedman1, 30, 0.1, 5).unwrap();
        assert_eq!(a.inputs, b.inputs);
        assert_eq!(a.targets, b.targets);
    }

    #[test]
    fn sinc_noise_level_matches_parameter() {
        let n = 10_000;
        let data = synthetic_dataset(SyntheticKind::Sinc1d, n, 0.05, 6).unwrap();
        let residuals: Vec<f64> = (0..n)
            .map(|p| {
                let x = data.inputs[(p, 0)];
                let clean = if x == 0.0 { 1.0 } else { x.sin() / x };
                data.targets[p] - clean
            })
            .collect();
        let mean = residuals.iter().sum::<f64>() / n as f64;
        let var = residuals.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        assert!((0.045..=0.055).contains(&sd), "noise sd {sd}");
    }

    #[test]
    fn scaler_maps_train_to_unit_box() {
        let data = synthetic_dataset(SyntheticKind::Linear, 40, 0.0, 7).unwrap();
        let scaler = MinMaxScaler::fit(&data.inputs);
        let scaled = scaler.transform(&data.inputs);
        for v in scaled.iter() {
            assert!((0.0..=1.0).contains(v));
        }
    }
}
