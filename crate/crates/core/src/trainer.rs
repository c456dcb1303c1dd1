//! Evolutionary ELM training: hidden-layer parameters are flattened into
//! swarm agents, each agent's output weights are solved by least squares,
//! and the optimizer minimizes held-out RMSE.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{minimize_with, OptimizerKind, OptimizerSpec};
use crate::elm::{build_hidden_matrix, predict, solve_output_weights, Activation, ElmModel, RegressionData};
use crate::error::{Error, Result};
use crate::harness::rmse;
use crate::optimizer::Bounds;

/// Flat-vector layout of the hidden parameters of one SLFN.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AgentLayout {
    pub inputs: usize,
    pub hidden: usize,
    pub include_biases: bool,
}

impl AgentLayout {
    pub fn dim(&self) -> usize {
        self.hidden * self.inputs + if self.include_biases { self.hidden } else { 0 }
    }

    /// Weights first (row-major by hidden node), then biases when included.
    pub fn encode(&self, model: &ElmModel) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        let mut idx = 0;
        for k in 0..self.hidden {
            for n in 0..self.inputs {
                v[idx] = model.input_weights[(k, n)];
                idx += 1;
            }
        }
        if self.include_biases {
            for k in 0..self.hidden {
                v[idx] = model.hidden_biases[k];
                idx += 1;
            }
        }
        v
    }

    pub fn decode(&self, agent: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let weights = DMatrix::from_fn(self.hidden, self.inputs, |k, n| agent[k * self.inputs + n]);
        let biases = if self.include_biases {
            let offset = self.hidden * self.inputs;
            DVector::from_fn(self.hidden, |k, _| agent[offset + k])
        } else {
            DVector::zeros(self.hidden)
        };
        (weights, biases)
    }
}

/// Validation RMSE of one agent: decode hidden parameters, solve the output
/// weights on `solve_split`, score on `fitness_split`. Any numerical
/// failure disqualifies the agent with `+inf`.
pub fn agent_fitness(
    layout: &AgentLayout,
    activation: Activation,
    agent: &[f64],
    solve_split: &RegressionData,
    fitness_split: &RegressionData,
    penalty: f64,
) -> f64 {
    if agent.len() != layout.dim() {
        return f64::INFINITY;
    }
    let (weights, biases) = layout.decode(agent);
    let model = match ElmModel::new(weights, biases, activation, penalty) {
        Ok(m) => m,
        Err(_) => return f64::INFINITY,
    };
    let hidden = match build_hidden_matrix(&model, &solve_split.inputs) {
        Ok(h) => h,
        Err(_) => return f64::INFINITY,
    };
    let beta = match solve_output_weights(&hidden, &solve_split.targets, penalty) {
        Ok(b) => b,
        Err(_) => return f64::INFINITY,
    };
    let mut scored = model;
    scored.output_weights = beta;
    let predictions = match predict(&scored, &fitness_split.inputs) {
        Ok(p) => p,
        Err(_) => return f64::INFINITY,
    };
    match rmse(predictions.as_slice(), fitness_split.targets.as_slice()) {
        Ok(v) if v.is_finite() => v,
        _ => f64::INFINITY,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingRunConfig {
    pub hidden_nodes: usize,
    pub activation: Activation,
    pub include_biases: bool,
    pub optimizer_kind: OptimizerKind,
    pub population_size: usize,
    pub max_iterations: usize,
    /// Uniform search box for every hidden parameter.
    pub weight_bounds: (f64, f64),
    pub penalty: f64,
    /// When nonempty, the penalty is picked from this grid on the fitness
    /// split after optimization.
    pub penalty_grid: Vec<f64>,
    /// Fraction of the training data held out for the swarm's fitness.
    pub fitness_split_fraction: f64,
    pub seed: u64,
}

impl Default for TrainingRunConfig {
    fn default() -> Self {
        TrainingRunConfig {
            hidden_nodes: 300,
            activation: Activation::Sigmoid,
            include_biases: true,
            optimizer_kind: OptimizerKind::MrfoLevy,
            population_size: 20,
            max_iterations: 50,
            weight_bounds: (-1.0, 1.0),
            penalty: 0.0,
            penalty_grid: Vec::new(),
            fitness_split_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainingRunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_nodes == 0 {
            return Err(Error::InvalidConfig("hidden node count must be positive".into()));
        }
        if !(self.fitness_split_fraction > 0.0 && self.fitness_split_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "fitness split fraction must lie in (0, 1), got {}",
                self.fitness_split_fraction
            )));
        }
        if !(self.weight_bounds.0 < self.weight_bounds.1) {
            return Err(Error::InvalidConfig("weight bounds must satisfy lower < upper".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Reproducibility record of one training run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub optimizer: String,
    /// Best fitness at the end of each optimizer iteration.
    pub history: Vec<f64>,
    pub best_fitness: f64,
    pub penalty: f64,
    pub evaluations: usize,
}

impl RunManifest {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9e3779b97f4a7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn split_for_fitness(data: &RegressionData, fraction: f64, seed: u64) -> (RegressionData, RegressionData) {
    let p = data.samples();
    if p < 2 {
        return (data.clone(), data.clone());
    }
    let mut indices: Vec<usize> = (0..p).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x51ed));
    for i in (1..p).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
    let n_fit = ((p as f64 * fraction).round() as usize).clamp(1, p - 1);
    let (fit_idx, solve_idx) = indices.split_at(n_fit);
    (data.select(solve_idx), data.select(fit_idx))
}

/// Runs the evolutionary training loop and returns the assembled model with
/// its manifest. Output weights are re-solved on the full training data once
/// the hidden parameters are frozen.
pub fn train(data: &RegressionData, config: &TrainingRunConfig) -> Result<(ElmModel, RunManifest)> {
    config.validate()?;
    let layout = AgentLayout {
        inputs: data.features(),
        hidden: config.hidden_nodes,
        include_biases: config.include_biases,
    };
    let (solve_split, fitness_split) =
        split_for_fitness(data, config.fitness_split_fraction, config.seed);

    let bounds = Bounds::uniform(layout.dim(), config.weight_bounds.0, config.weight_bounds.1)?;
    let spec = OptimizerSpec::new(
        config.optimizer_kind,
        config.population_size,
        config.max_iterations,
        bounds,
        config.seed,
    );
    let activation = config.activation;
    let penalty = config.penalty;
    let outcome = minimize_with(&spec, |agent| {
        agent_fitness(&layout, activation, agent, &solve_split, &fitness_split, penalty)
    })?;

    let best = outcome.best_position.as_slice();
    let final_penalty = if config.penalty_grid.is_empty() {
        config.penalty
    } else {
        let mut best_penalty = config.penalty_grid[0];
        let mut best_score = f64::INFINITY;
        for &candidate in &config.penalty_grid {
            let score = agent_fitness(&layout, activation, best, &solve_split, &fitness_split, candidate);
            if score < best_score {
                best_score = score;
                best_penalty = candidate;
            }
        }
        best_penalty
    };

    let (weights, biases) = layout.decode(best);
    let mut model = ElmModel::new(weights, biases, activation, final_penalty)?;
    let hidden = build_hidden_matrix(&model, &data.inputs)?;
    model.output_weights = solve_output_weights(&hidden, &data.targets, final_penalty)?;

    let manifest = RunManifest {
        config_hash: config.hash(),
        seed: config.seed,
        optimizer: config.optimizer_kind.name().to_string(),
        history: outcome.history,
        best_fitness: outcome.best_fitness,
        penalty: final_penalty,
        evaluations: outcome.evaluations,
    };
    Ok((model, manifest))
}

/// The non-evolutionary baseline: one random initialization in [-1, 1] and a
/// single least-squares solve.
pub fn train_plain_elm(
    data: &RegressionData,
    hidden_nodes: usize,
    activation: Activation,
    penalty: f64,
    seed: u64,
) -> Result<ElmModel> {
    if hidden_nodes == 0 {
        return Err(Error::InvalidConfig("hidden node count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = DMatrix::from_fn(hidden_nodes, data.features(), |_, _| rng.random_range(-1.0..1.0));
    let biases = DVector::from_fn(hidden_nodes, |_, _| rng.random_range(-1.0..1.0));
    let mut model = ElmModel::new(weights, biases, activation, penalty)?;
    let hidden = build_hidden_matrix(&model, &data.inputs)?;
    model.output_weights = solve_output_weights(&hidden, &data.targets, penalty)?;
    Ok(model)
}
