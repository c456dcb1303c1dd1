//! Manta ray foraging optimization with an optional Lévy-flight walk.
//!
//! Three movement operators drive the swarm: chain foraging (follow the
//! leader and the incumbent), cyclone foraging (spiral around the incumbent
//! or a random point), and somersault foraging (reflect around the
//! incumbent). The Lévy walk perturbs every agent after the somersault pass
//! with heavy-tailed steps generated by Mantegna's algorithm.

use nalgebra::DVector;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::optimizer::{sanitize_fitness, Bounds, OptimizeOutcome};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MrfoConfig {
    pub population_size: usize,
    pub max_iterations: usize,
    pub bounds: Bounds,
    pub somersault_factor: f64,
    pub levy_enabled: bool,
    pub levy_exponent_beta: f64,
    /// Step scale for the Lévy walk; `None` picks 1% of the mean box width.
    pub levy_scale: Option<f64>,
    pub seed: u64,
}

impl MrfoConfig {
    pub fn new(population_size: usize, max_iterations: usize, bounds: Bounds, seed: u64) -> Self {
        MrfoConfig {
            population_size,
            max_iterations,
            bounds,
            somersault_factor: 2.0,
            levy_enabled: false,
            levy_exponent_beta: 1.5,
            levy_scale: None,
            seed,
        }
    }

    pub fn with_levy(mut self) -> Self {
        self.levy_enabled = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 {
            return Err(Error::InvalidConfig("population size must be positive".into()));
        }
        if !(self.somersault_factor > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "somersault factor must be > 0, got {}",
                self.somersault_factor
            )));
        }
        if !(self.levy_exponent_beta > 0.0 && self.levy_exponent_beta <= 2.0) {
            return Err(Error::InvalidConfig(format!(
                "Levy exponent must lie in (0, 2], got {}",
                self.levy_exponent_beta
            )));
        }
        if let Some(s) = self.levy_scale {
            if !(s > 0.0) {
                return Err(Error::InvalidConfig(format!("Levy scale must be > 0, got {s}")));
            }
        }
        Ok(())
    }

    pub fn effective_levy_scale(&self) -> f64 {
        self.levy_scale.unwrap_or_else(|| 0.01 * self.bounds.range().mean())
    }
}

/// Swarm positions plus incumbent bookkeeping.
#[derive(Debug, Clone)]
pub struct SwarmState {
    pub positions: Vec<DVector<f64>>,
    pub fitnesses: Vec<f64>,
    pub best_position: DVector<f64>,
    pub best_fitness: f64,
    pub iteration: usize,
    pub max_iterations: usize,
}

/// Chain-foraging weight `2 r sqrt(|ln r|)`, continuous at r = 0.
fn chain_coefficient(r: f64) -> f64 {
    if r <= 0.0 { 0.0 } else { 2.0 * r * r.ln().abs().sqrt() }
}

/// Cyclone weight `2 e^{r1 (T - t + 1)/T} sin(2 pi r1)`.
pub fn cyclone_coefficient(r1: f64, iteration: usize, max_iterations: usize) -> f64 {
    let t = iteration as f64;
    let cap_t = max_iterations.max(1) as f64;
    2.0 * (r1 * (cap_t - t + 1.0) / cap_t).exp() * (2.0 * std::f64::consts::PI * r1).sin()
}

/// Chain move with the per-dimension uniforms injected; the weight
/// coefficient is derived from the same draws.
pub fn chain_update(
    x_i: &DVector<f64>,
    x_prev: Option<&DVector<f64>>,
    x_best: &DVector<f64>,
    r: &DVector<f64>,
) -> DVector<f64> {
    let lead = x_prev.unwrap_or(x_i);
    DVector::from_fn(x_i.len(), |d, _| {
        let alpha = chain_coefficient(r[d]);
        match x_prev {
            None => x_i[d] + r[d] * (x_best[d] - x_i[d]) + alpha * (x_best[d] - x_i[d]),
            Some(_) => lead[d] + r[d] * (lead[d] - x_i[d]) + alpha * (x_best[d] - x_i[d]),
        }
    })
}

/// Cyclone move around `reference` with injected uniforms; `r1` feeds the
/// spiral coefficient.
pub fn cyclone_update(
    x_i: &DVector<f64>,
    x_prev: Option<&DVector<f64>>,
    reference: &DVector<f64>,
    r: &DVector<f64>,
    r1: &DVector<f64>,
    iteration: usize,
    max_iterations: usize,
) -> DVector<f64> {
    let lead = x_prev.unwrap_or(x_i);
    DVector::from_fn(x_i.len(), |d, _| {
        let beta = cyclone_coefficient(r1[d], iteration, max_iterations);
        let pull = match x_prev {
            None => reference[d] - x_i[d],
            Some(_) => lead[d] - x_i[d],
        };
        reference[d] + r[d] * pull + beta * (reference[d] - x_i[d])
    })
}

/// Somersault move: reflect around the incumbent scaled by `s_factor`.
pub fn somersault_update(
    x_i: &DVector<f64>,
    x_best: &DVector<f64>,
    s_factor: f64,
    r2: &DVector<f64>,
    r3: &DVector<f64>,
) -> DVector<f64> {
    DVector::from_fn(x_i.len(), |d, _| {
        x_i[d] + s_factor * (r2[d] * x_best[d] - r3[d] * x_i[d])
    })
}

fn uniform_vector(rng: &mut impl Rng, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.random::<f64>())
}

fn random_point(rng: &mut impl Rng, bounds: &Bounds) -> DVector<f64> {
    DVector::from_fn(bounds.dim(), |d, _| {
        bounds.lower[d] + rng.random::<f64>() * (bounds.upper[d] - bounds.lower[d])
    })
}

/// Chain move for agent `agent_index`, clamped to `bounds`.
pub fn chain_foraging_step(
    state: &SwarmState,
    agent_index: usize,
    rng: &mut impl Rng,
    bounds: &Bounds,
) -> DVector<f64> {
    let r = uniform_vector(rng, bounds.dim());
    let prev = (agent_index > 0).then(|| &state.positions[agent_index - 1]);
    let mut x = chain_update(&state.positions[agent_index], prev, &state.best_position, &r);
    bounds.clamp(&mut x);
    x
}

/// Cyclone move for agent `agent_index` around `reference` (the incumbent or
/// a random point, chosen by the caller), clamped to `bounds`.
pub fn cyclone_foraging_step(
    state: &SwarmState,
    agent_index: usize,
    rng: &mut impl Rng,
    reference: &DVector<f64>,
    bounds: &Bounds,
) -> DVector<f64> {
    let r = uniform_vector(rng, bounds.dim());
    let r1 = uniform_vector(rng, bounds.dim());
    let prev = (agent_index > 0).then(|| &state.positions[agent_index - 1]);
    let mut x = cyclone_update(
        &state.positions[agent_index],
        prev,
        reference,
        &r,
        &r1,
        state.iteration,
        state.max_iterations,
    );
    bounds.clamp(&mut x);
    x
}

/// Somersault move for agent `agent_index`, clamped to `bounds`.
pub fn somersault_foraging_step(
    state: &SwarmState,
    agent_index: usize,
    rng: &mut impl Rng,
    s_factor: f64,
    bounds: &Bounds,
) -> DVector<f64> {
    let r2 = uniform_vector(rng, bounds.dim());
    let r3 = uniform_vector(rng, bounds.dim());
    let mut x = somersault_update(&state.positions[agent_index], &state.best_position, s_factor, &r2, &r3);
    bounds.clamp(&mut x);
    x
}

/// Heavy-tailed step generator after Mantegna: `s = mu / |v|^{1/beta}` with
/// `mu ~ N(0, sigma_mu^2)` and `v ~ N(0, 1)`.
#[derive(Debug, Clone)]
pub struct LevyStepSampler {
    pub exponent_beta: f64,
    pub sigma_mu: f64,
    pub scale: f64,
}

/// `sigma_mu` of Mantegna's algorithm for tail exponent `beta`.
pub fn mantegna_sigma(beta: f64) -> f64 {
    let num = gamma(1.0 + beta) * (std::f64::consts::PI * beta / 2.0).sin();
    let den = gamma((1.0 + beta) / 2.0) * beta * 2.0_f64.powf((beta - 1.0) / 2.0);
    (num / den).powf(1.0 / beta)
}

impl LevyStepSampler {
    pub fn new(exponent_beta: f64, scale: f64) -> Result<Self> {
        if !(exponent_beta > 0.0 && exponent_beta <= 2.0) {
            return Err(Error::InvalidConfig(format!(
                "Levy exponent must lie in (0, 2], got {exponent_beta}"
            )));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidConfig(format!("Levy scale must be > 0, got {scale}")));
        }
        Ok(LevyStepSampler {
            exponent_beta,
            sigma_mu: mantegna_sigma(exponent_beta),
            scale,
        })
    }

    /// One step per dimension, already multiplied by `scale`.
    pub fn sample(&self, dim: usize, rng: &mut impl Rng) -> DVector<f64> {
        DVector::from_fn(dim, |_, _| {
            let mu: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng) * self.sigma_mu;
            let mut v: f64 = StandardNormal.sample(rng);
            while v.abs() < 1e-300 {
                v = StandardNormal.sample(rng);
            }
            self.scale * mu / v.abs().powf(1.0 / self.exponent_beta)
        })
    }
}

/// Lévy walk of one agent: `x + mu * sign[rand - 1/2] (.) step`, with the
/// sign drawn per dimension and `mu` once per call.
pub fn apply_levy_walk(
    position: &DVector<f64>,
    sampler: &LevyStepSampler,
    rng: &mut impl Rng,
    bounds: &Bounds,
) -> DVector<f64> {
    let mu: f64 = rng.random();
    let signs = DVector::from_fn(position.len(), |_, _| {
        if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 }
    });
    let step = sampler.sample(position.len(), rng);
    let mut x = DVector::from_fn(position.len(), |d, _| position[d] + mu * signs[d] * step[d]);
    bounds.clamp(&mut x);
    x
}

/// Runs the full MRFO(-LF) loop and returns the incumbent with its history.
///
/// Each iteration moves every agent by chain or cyclone foraging (evaluating
/// and updating the incumbent greedily), then applies a somersault pass over
/// all agents, the Lévy walk when enabled, and a second evaluation sweep.
pub fn minimize<F>(objective: F, config: &MrfoConfig) -> Result<OptimizeOutcome>
where
    F: Fn(&[f64]) -> f64,
{
    config.validate()?;
    let bounds = &config.bounds;
    let dim = bounds.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sampler = if config.levy_enabled {
        Some(LevyStepSampler::new(config.levy_exponent_beta, config.effective_levy_scale())?)
    } else {
        None
    };

    let mut evaluations = 0usize;
    let eval = |x: &DVector<f64>, count: &mut usize| {
        *count += 1;
        sanitize_fitness(objective(x.as_slice()))
    };

    let mut positions: Vec<DVector<f64>> =
        (0..config.population_size).map(|_| random_point(&mut rng, bounds)).collect();
    let mut fitnesses: Vec<f64> = positions.iter().map(|x| eval(x, &mut evaluations)).collect();

    let mut best_index = 0;
    for i in 1..fitnesses.len() {
        if fitnesses[i] < fitnesses[best_index] {
            best_index = i;
        }
    }
    let mut best_position = positions[best_index].clone();
    let mut best_fitness = fitnesses[best_index];

    let mut history = Vec::with_capacity(config.max_iterations);
    let cap_t = config.max_iterations;

    for t in 1..=cap_t {
        let snapshot = positions.clone();
        let state_iter = t;

        // Foraging phase: chain or cyclone per agent, greedy incumbent update.
        for i in 0..config.population_size {
            let prev = (i > 0).then(|| &snapshot[i - 1]);
            let new_pos = if rng.random::<f64>() < 0.5 {
                let explore = (t as f64) / (cap_t as f64) < rng.random::<f64>();
                let reference = if explore { random_point(&mut rng, bounds) } else { best_position.clone() };
                let r = uniform_vector(&mut rng, dim);
                let r1 = uniform_vector(&mut rng, dim);
                cyclone_update(&snapshot[i], prev, &reference, &r, &r1, state_iter, cap_t)
            } else {
                let r = uniform_vector(&mut rng, dim);
                chain_update(&snapshot[i], prev, &best_position, &r)
            };
            let mut new_pos = new_pos;
            bounds.clamp(&mut new_pos);
            let f = eval(&new_pos, &mut evaluations);
            positions[i] = new_pos;
            fitnesses[i] = f;
            if f < best_fitness {
                best_fitness = f;
                best_position = positions[i].clone();
            }
        }

        // Somersault pass (plus Lévy walk) over all agents, then re-evaluate.
        for i in 0..config.population_size {
            let r2 = uniform_vector(&mut rng, dim);
            let r3 = uniform_vector(&mut rng, dim);
            let mut new_pos =
                somersault_update(&positions[i], &best_position, config.somersault_factor, &r2, &r3);
            bounds.clamp(&mut new_pos);
            if let Some(sampler) = &sampler {
                new_pos = apply_levy_walk(&new_pos, sampler, &mut rng, bounds);
            }
            positions[i] = new_pos;
        }
        for i in 0..config.population_size {
            let f = eval(&positions[i], &mut evaluations);
            fitnesses[i] = f;
            if f < best_fitness {
                best_fitness = f;
                best_position = positions[i].clone();
            }
        }

        history.push(best_fitness);
    }

    Ok(OptimizeOutcome {
        best_position,
        best_fitness,
        history,
        evaluations,
    })
}
