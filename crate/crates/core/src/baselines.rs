//! Baseline minimizers (PSO, real-coded GA, WOA, random search) behind the
//! same contract as MRFO: monotone best-so-far history, clamped positions,
//! seed-reproducible runs, exactly `max_iterations` iterations.

use nalgebra::DVector;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mrfo::{self, MrfoConfig};
use crate::optimizer::{sanitize_fitness, Bounds, OptimizeOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Mrfo,
    MrfoLevy,
    Pso,
    Ga,
    Woa,
    RandomSearch,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Mrfo => "mrfo",
            OptimizerKind::MrfoLevy => "mrfo-levy",
            OptimizerKind::Pso => "pso",
            OptimizerKind::Ga => "ga",
            OptimizerKind::Woa => "woa",
            OptimizerKind::RandomSearch => "random-search",
        }
    }

    pub const ALL: [OptimizerKind; 6] = [
        OptimizerKind::Mrfo,
        OptimizerKind::MrfoLevy,
        OptimizerKind::Pso,
        OptimizerKind::Ga,
        OptimizerKind::Woa,
        OptimizerKind::RandomSearch,
    ];
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mrfo" => Ok(OptimizerKind::Mrfo),
            "mrfo-levy" | "mrfolevy" | "mrfo-lf" => Ok(OptimizerKind::MrfoLevy),
            "pso" => Ok(OptimizerKind::Pso),
            "ga" => Ok(OptimizerKind::Ga),
            "woa" => Ok(OptimizerKind::Woa),
            "random-search" | "random" => Ok(OptimizerKind::RandomSearch),
            other => Err(Error::InvalidConfig(format!("unknown optimizer kind '{other}'"))),
        }
    }
}

/// Constriction-style defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsoParams {
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Velocity clamp as a fraction of the box width per dimension.
    pub velocity_clamp: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        PsoParams {
            inertia: 0.729,
            cognitive: 1.49445,
            social: 1.49445,
            velocity_clamp: 0.5,
        }
    }
}

/// Real-coded GA: tournament selection, blend crossover, Gaussian mutation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaParams {
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Mutation sigma as a fraction of the box width.
    pub mutation_scale: f64,
    pub tournament_size: usize,
    pub blend_alpha: f64,
    pub elitism: usize,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            mutation_scale: 0.1,
            tournament_size: 3,
            blend_alpha: 0.5,
            elitism: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WoaParams {
    pub spiral_b: f64,
}

impl Default for WoaParams {
    fn default() -> Self {
        WoaParams { spiral_b: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MrfoParams {
    pub somersault_factor: f64,
    pub levy_exponent_beta: f64,
    pub levy_scale: Option<f64>,
}

impl Default for MrfoParams {
    fn default() -> Self {
        MrfoParams {
            somersault_factor: 2.0,
            levy_exponent_beta: 1.5,
            levy_scale: None,
        }
    }
}

/// Full description of one optimizer run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub population_size: usize,
    pub max_iterations: usize,
    pub bounds: Bounds,
    pub seed: u64,
    pub mrfo: MrfoParams,
    pub pso: PsoParams,
    pub ga: GaParams,
    pub woa: WoaParams,
}

impl OptimizerSpec {
    pub fn new(
        kind: OptimizerKind,
        population_size: usize,
        max_iterations: usize,
        bounds: Bounds,
        seed: u64,
    ) -> Self {
        OptimizerSpec {
            kind,
            population_size,
            max_iterations,
            bounds,
            seed,
            mrfo: MrfoParams::default(),
            pso: PsoParams::default(),
            ga: GaParams::default(),
            woa: WoaParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 {
            return Err(Error::InvalidConfig("population size must be positive".into()));
        }
        for (name, rate) in [
            ("GA crossover rate", self.ga.crossover_rate),
            ("GA mutation rate", self.ga.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {rate}")));
            }
        }
        if self.ga.tournament_size == 0 {
            return Err(Error::InvalidConfig("GA tournament size must be positive".into()));
        }
        if !(self.pso.inertia.is_finite() && self.pso.velocity_clamp > 0.0) {
            return Err(Error::InvalidConfig("invalid PSO parameters".into()));
        }
        Ok(())
    }

    /// Objective evaluations one run of this spec will perform. MRFO
    /// evaluates each agent twice per iteration; the others once.
    pub fn evaluation_budget(&self) -> usize {
        let per_iter = match self.kind {
            OptimizerKind::Mrfo | OptimizerKind::MrfoLevy => 2 * self.population_size,
            _ => self.population_size,
        };
        self.population_size + per_iter * self.max_iterations
    }
}

/// Dispatches to the optimizer named by `spec.kind`.
pub fn minimize_with<F>(spec: &OptimizerSpec, objective: F) -> Result<OptimizeOutcome>
where
    F: Fn(&[f64]) -> f64,
{
    spec.validate()?;
    match spec.kind {
        OptimizerKind::Mrfo | OptimizerKind::MrfoLevy => {
            let config = MrfoConfig {
                population_size: spec.population_size,
                max_iterations: spec.max_iterations,
                bounds: spec.bounds.clone(),
                somersault_factor: spec.mrfo.somersault_factor,
                levy_enabled: spec.kind == OptimizerKind::MrfoLevy,
                levy_exponent_beta: spec.mrfo.levy_exponent_beta,
                levy_scale: spec.mrfo.levy_scale,
                seed: spec.seed,
            };
            mrfo::minimize(objective, &config)
        }
        OptimizerKind::Pso => pso_minimize(spec, objective),
        OptimizerKind::Ga => ga_minimize(spec, objective),
        OptimizerKind::Woa => woa_minimize(spec, objective),
        OptimizerKind::RandomSearch => random_search_minimize(spec, objective),
    }
}

fn random_point(rng: &mut impl Rng, bounds: &Bounds) -> DVector<f64> {
    DVector::from_fn(bounds.dim(), |d, _| {
        bounds.lower[d] + rng.random::<f64>() * (bounds.upper[d] - bounds.lower[d])
    })
}

struct Tracker {
    best_position: DVector<f64>,
    best_fitness: f64,
    history: Vec<f64>,
    evaluations: usize,
}

impl Tracker {
    fn new(dim: usize) -> Self {
        Tracker {
            best_position: DVector::zeros(dim),
            best_fitness: f64::INFINITY,
            history: Vec::new(),
            evaluations: 0,
        }
    }

    fn eval<F: Fn(&[f64]) -> f64>(&mut self, objective: &F, x: &DVector<f64>) -> f64 {
        self.evaluations += 1;
        let f = sanitize_fitness(objective(x.as_slice()));
        if f < self.best_fitness {
            self.best_fitness = f;
            self.best_position = x.clone();
        }
        f
    }

    fn finish(self) -> OptimizeOutcome {
        OptimizeOutcome {
            best_position: self.best_position,
            best_fitness: self.best_fitness,
            history: self.history,
            evaluations: self.evaluations,
        }
    }
}

fn pso_minimize<F: Fn(&[f64]) -> f64>(spec: &OptimizerSpec, objective: F) -> Result<OptimizeOutcome> {
    let bounds = &spec.bounds;
    let dim = bounds.dim();
    let p = &spec.pso;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut tracker = Tracker::new(dim);
    let vmax: DVector<f64> = bounds.range() * p.velocity_clamp;

    let mut positions: Vec<DVector<f64>> =
        (0..spec.population_size).map(|_| random_point(&mut rng, bounds)).collect();
    let mut velocities: Vec<DVector<f64>> = vec![DVector::zeros(dim); spec.population_size];
    let mut pbest = positions.clone();
    let mut pbest_fit: Vec<f64> = positions.iter().map(|x| tracker.eval(&objective, x)).collect();

    for _ in 0..spec.max_iterations {
        let gbest = tracker.best_position.clone();
        for i in 0..spec.population_size {
            for d in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let v = p.inertia * velocities[i][d]
                    + p.cognitive * r1 * (pbest[i][d] - positions[i][d])
                    + p.social * r2 * (gbest[d] - positions[i][d]);
                velocities[i][d] = v.clamp(-vmax[d], vmax[d]);
                positions[i][d] = positions[i][d] + velocities[i][d];
            }
            bounds.clamp(&mut positions[i]);
            let f = tracker.eval(&objective, &positions[i]);
            if f < pbest_fit[i] {
                pbest_fit[i] = f;
                pbest[i] = positions[i].clone();
            }
        }
        tracker.history.push(tracker.best_fitness);
    }
    Ok(tracker.finish())
}

fn ga_minimize<F: Fn(&[f64]) -> f64>(spec: &OptimizerSpec, objective: F) -> Result<OptimizeOutcome> {
    let bounds = &spec.bounds;
    let dim = bounds.dim();
    let g = &spec.ga;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut tracker = Tracker::new(dim);
    let sigma: DVector<f64> = bounds.range() * g.mutation_scale;

    let mut population: Vec<DVector<f64>> =
        (0..spec.population_size).map(|_| random_point(&mut rng, bounds)).collect();
    let mut fitnesses: Vec<f64> = population.iter().map(|x| tracker.eval(&objective, x)).collect();

    let tournament = |rng: &mut ChaCha8Rng, fitnesses: &[f64]| -> usize {
        let mut winner = rng.random_range(0..fitnesses.len());
        for _ in 1..g.tournament_size {
            let c = rng.random_range(0..fitnesses.len());
            if fitnesses[c] < fitnesses[winner] {
                winner = c;
            }
        }
        winner
    };

    for _ in 0..spec.max_iterations {
        // Elites carry over unchanged.
        let mut order: Vec<usize> = (0..spec.population_size).collect();
        order.sort_by(|&a, &b| fitnesses[a].total_cmp(&fitnesses[b]));
        let mut children: Vec<DVector<f64>> = order
            .iter()
            .take(g.elitism.min(spec.population_size))
            .map(|&i| population[i].clone())
            .collect();

        while children.len() < spec.population_size {
            let a = tournament(&mut rng, &fitnesses);
            let b = tournament(&mut rng, &fitnesses);
            let mut child = if rng.random::<f64>() < g.crossover_rate {
                // BLX-alpha: sample inside the expanded parent interval.
                DVector::from_fn(dim, |d, _| {
                    let (lo, hi) = if population[a][d] <= population[b][d] {
                        (population[a][d], population[b][d])
                    } else {
                        (population[b][d], population[a][d])
                    };
                    let spread = hi - lo;
                    let left = lo - g.blend_alpha * spread;
                    let width = spread * (1.0 + 2.0 * g.blend_alpha);
                    left + rng.random::<f64>() * width
                })
            } else {
                population[a].clone()
            };
            for d in 0..dim {
                if rng.random::<f64>() < g.mutation_rate {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    child[d] += noise * sigma[d];
                }
            }
            bounds.clamp(&mut child);
            children.push(child);
        }

        population = children;
        fitnesses = population.iter().map(|x| tracker.eval(&objective, x)).collect();
        tracker.history.push(tracker.best_fitness);
    }
    Ok(tracker.finish())
}

fn woa_minimize<F: Fn(&[f64]) -> f64>(spec: &OptimizerSpec, objective: F) -> Result<OptimizeOutcome> {
    let bounds = &spec.bounds;
    let dim = bounds.dim();
    let b = spec.woa.spiral_b;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut tracker = Tracker::new(dim);

    let mut positions: Vec<DVector<f64>> =
        (0..spec.population_size).map(|_| random_point(&mut rng, bounds)).collect();
    for x in &positions {
        tracker.eval(&objective, x);
    }

    let cap_t = spec.max_iterations.max(1) as f64;
    for t in 0..spec.max_iterations {
        let a = 2.0 - (t as f64) * (2.0 / cap_t);
        let snapshot = positions.clone();
        let best = tracker.best_position.clone();
        for i in 0..spec.population_size {
            let p: f64 = rng.random();
            let new_pos = if p < 0.5 {
                let coeff_a = DVector::from_fn(dim, |_, _| 2.0 * a * rng.random::<f64>() - a);
                let coeff_c = DVector::from_fn(dim, |_, _| 2.0 * rng.random::<f64>());
                let a_mag = coeff_a.amax();
                let target = if a_mag < 1.0 {
                    best.clone()
                } else {
                    snapshot[rng.random_range(0..spec.population_size)].clone()
                };
                DVector::from_fn(dim, |d, _| {
                    let dist = (coeff_c[d] * target[d] - snapshot[i][d]).abs();
                    target[d] - coeff_a[d] * dist
                })
            } else {
                let l: f64 = rng.random::<f64>() * 2.0 - 1.0;
                DVector::from_fn(dim, |d, _| {
                    let dist = (best[d] - snapshot[i][d]).abs();
                    dist * (b * l).exp() * (2.0 * std::f64::consts::PI * l).cos() + best[d]
                })
            };
            let mut new_pos = new_pos;
            bounds.clamp(&mut new_pos);
            tracker.eval(&objective, &new_pos);
            positions[i] = new_pos;
        }
        tracker.history.push(tracker.best_fitness);
    }
    Ok(tracker.finish())
}

fn random_search_minimize<F: Fn(&[f64]) -> f64>(
    spec: &OptimizerSpec,
    objective: F,
) -> Result<OptimizeOutcome> {
    let bounds = &spec.bounds;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut tracker = Tracker::new(bounds.dim());
    for _ in 0..spec.population_size {
        let x = random_point(&mut rng, bounds);
        tracker.eval(&objective, &x);
    }
    for _ in 0..spec.max_iterations {
        for _ in 0..spec.population_size {
            let x = random_point(&mut rng, bounds);
            tracker.eval(&objective, &x);
        }
        tracker.history.push(tracker.best_fitness);
    }
    Ok(tracker.finish())
}
