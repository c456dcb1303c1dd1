//! Acceptance suite. One test per criterion; each prints a single
//! PASS/FAIL line so the whole gate can be read off the test output.
//!
//! Oracles here are implemented independently of the library code paths
//! they check (hand-rolled Gaussian elimination, a Lanczos gamma
//! approximation, brute-force periodic-image enumeration).

use std::collections::BTreeMap;
use std::process::Command;

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use eelm_core::baselines::{minimize_with, OptimizerKind, OptimizerSpec};
use eelm_core::benchfns::BenchFunction;
use eelm_core::elm::{Activation, HiddenMatrix, solve_output_weights};
use eelm_core::harness::{
    run_protocol, synthetic_dataset, FoldPlan, ModelEntry, ModelSpec, ProtocolOptions,
    SyntheticKind,
};
use eelm_core::mrfo::{mantegna_sigma, LevyStepSampler};
use eelm_core::optimizer::Bounds;
use eelm_core::rdf::extxyz::parse_extxyz;
use eelm_core::rdf::{formation_energy_for, partial_rdf, CrystalStructure, RdfConfig};
use eelm_core::trainer::TrainingRunConfig;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/lige_corpus.extxyz");

fn verdict(number: usize, name: &str, ok: bool, detail: &str) {
    println!(
        "acceptance criterion {number} ({name}): {} {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {number} ({name}) failed: {detail}");
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
/// Deliberately independent of nalgebra's factorizations.
fn gauss_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    let mut m = vec![vec![0.0; n + 1]; n];
    for r in 0..n {
        for c in 0..n {
            m[r][c] = a[(r, c)];
        }
        m[r][n] = b[r];
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let diag = m[col][col];
        assert!(diag.abs() > 0.0, "oracle hit a singular pivot");
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = m[r][col] / diag;
            for c in col..=n {
                m[r][c] -= factor * m[col][c];
            }
        }
    }
    DVector::from_fn(n, |r, _| m[r][n] / m[r][r])
}

/// Minimum-norm least squares built on the oracle solver: the primal normal
/// equations for tall systems, the dual form for wide ones.
fn oracle_min_norm(h: &DMatrix<f64>, t: &DVector<f64>) -> DVector<f64> {
    if h.nrows() >= h.ncols() {
        let gram = h.transpose() * h;
        let rhs = h.transpose() * t;
        gauss_solve(&gram, &rhs)
    } else {
        let gram = h * h.transpose();
        h.transpose() * gauss_solve(&gram, t)
    }
}

#[test]
fn criterion_1_pseudoinverse_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let p = rng.random_range(5..=50);
        let m = rng.random_range(1..=20);
        let h = DMatrix::from_fn(p, m, |_, _| rng.random_range(-1.0..1.0f64));
        let t = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0f64));
        let solved = solve_output_weights(&HiddenMatrix::from_matrix(h.clone()), &t, 0.0).unwrap();
        let oracle = oracle_min_norm(&h, &t);
        let rel = (&solved - &oracle).norm() / oracle.norm().max(1e-30);
        worst = worst.max(rel);
    }
    verdict(1, "pseudoinverse oracle", worst <= 1e-8, &format!("worst relative error {worst:.3e}"));
}

/// Lanczos approximation (g = 7, 9 coefficients), good to ~1e-13 on the
/// interval used here. Independent of the statrs implementation.
fn lanczos_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEFFS: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * lanczos_gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

#[test]
fn criterion_2_mantegna_constant() {
    let beta = 1.5;
    let num = lanczos_gamma(1.0 + beta) * (std::f64::consts::PI * beta / 2.0).sin();
    let den = lanczos_gamma((1.0 + beta) / 2.0) * beta * 2.0_f64.powf((beta - 1.0) / 2.0);
    let oracle = (num / den).powf(1.0 / beta);
    let implemented = mantegna_sigma(beta);
    let ok = (oracle - 0.696575).abs() <= 1e-6 && (implemented - oracle).abs() <= 1e-6;
    verdict(
        2,
        "Mantegna constant",
        ok,
        &format!("oracle {oracle:.9}, implemented {implemented:.9}"),
    );
}

#[test]
fn criterion_3_levy_heavy_tail() {
    let sampler = LevyStepSampler::new(1.5, 1.0).unwrap();
    let mut hits = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps = sampler.sample(100_000, &mut rng);
        let n = steps.len() as f64;
        let mean = steps.iter().sum::<f64>() / n;
        let m2 = steps.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        let m4 = steps.iter().map(|s| (s - mean).powi(4)).sum::<f64>() / n;
        let excess_kurtosis = m4 / (m2 * m2) - 3.0;

        let mut magnitudes: Vec<f64> = steps.iter().map(|s| s.abs()).collect();
        magnitudes.sort_by(f64::total_cmp);
        let median = magnitudes[magnitudes.len() / 2];
        let ratio = magnitudes[magnitudes.len() - 1] / median;

        if excess_kurtosis > 10.0 && ratio > 100.0 {
            hits += 1;
        }
    }
    verdict(3, "Levy heavy tail", hits >= 19, &format!("{hits}/20 seeds heavy-tailed"));
}

#[test]
fn criterion_4_mrfo_convergence() {
    let mut sphere_hits = 0;
    for seed in 0..20u64 {
        let spec = OptimizerSpec::new(
            OptimizerKind::MrfoLevy,
            20,
            50,
            Bounds::uniform(2, -1.0, 1.0).unwrap(),
            seed,
        );
        let out = minimize_with(&spec, |x| BenchFunction::Sphere.eval(x)).unwrap();
        if out.best_fitness <= 1e-3 {
            sphere_hits += 1;
        }
    }

    let median_for = |kind: OptimizerKind| -> f64 {
        let mut finals: Vec<f64> = (0..20u64)
            .map(|seed| {
                let spec = OptimizerSpec::new(
                    kind,
                    20,
                    50,
                    Bounds::uniform(10, -1.0, 1.0).unwrap(),
                    seed,
                );
                minimize_with(&spec, |x| BenchFunction::Rastrigin.eval(x))
                    .unwrap()
                    .best_fitness
            })
            .collect();
        finals.sort_by(f64::total_cmp);
        0.5 * (finals[9] + finals[10])
    };
    let levy_median = median_for(OptimizerKind::MrfoLevy);
    let plain_median = median_for(OptimizerKind::Mrfo);

    let ok = sphere_hits >= 18 && levy_median <= plain_median;
    verdict(
        4,
        "MRFO convergence",
        ok,
        &format!(
            "sphere {sphere_hits}/20 seeds at <=1e-3; 10-D Rastrigin medians LF {levy_median:.4} vs plain {plain_median:.4}"
        ),
    );
}

#[test]
fn criterion_5_optimizer_contract_suite() {
    let mut failures = Vec::new();
    for kind in OptimizerKind::ALL {
        let spec = OptimizerSpec::new(kind, 12, 50, Bounds::uniform(3, -2.0, 2.0).unwrap(), 99);
        let a = minimize_with(&spec, |x| BenchFunction::Sphere.eval(x)).unwrap();
        let b = minimize_with(&spec, |x| BenchFunction::Sphere.eval(x)).unwrap();

        if a.history.len() != 50 {
            failures.push(format!("{}: history length {}", kind.name(), a.history.len()));
        }
        if a.history.windows(2).any(|w| w[1] > w[0]) {
            failures.push(format!("{}: non-monotone history", kind.name()));
        }
        if a.best_position.iter().any(|v| !(-2.0..=2.0).contains(v)) {
            failures.push(format!("{}: best position out of bounds", kind.name()));
        }
        let bitwise = a.history.iter().zip(&b.history).all(|(x, y)| x.to_bits() == y.to_bits())
            && a.best_position
                .iter()
                .zip(b.best_position.iter())
                .all(|(x, y)| x.to_bits() == y.to_bits());
        if !bitwise {
            failures.push(format!("{}: seed not bitwise reproducible", kind.name()));
        }
    }
    verdict(
        5,
        "optimizer contract suite",
        failures.is_empty(),
        &if failures.is_empty() { "all kinds conform".to_string() } else { failures.join("; ") },
    );
}

fn eelm_comparison_models(hidden_nodes: usize) -> Vec<ModelEntry> {
    let base = TrainingRunConfig {
        hidden_nodes,
        population_size: 20,
        max_iterations: 50,
        ..TrainingRunConfig::default()
    };
    vec![
        ModelEntry {
            name: "elm".to_string(),
            spec: ModelSpec::PlainElm {
                hidden_nodes,
                activation: Activation::Sigmoid,
                penalty: 0.0,
            },
        },
        ModelEntry {
            name: "eelm-mrfo".to_string(),
            spec: ModelSpec::Evolutionary(TrainingRunConfig {
                optimizer_kind: OptimizerKind::Mrfo,
                ..base.clone()
            }),
        },
        ModelEntry {
            name: "eelm-mrfo-lf".to_string(),
            spec: ModelSpec::Evolutionary(TrainingRunConfig {
                optimizer_kind: OptimizerKind::MrfoLevy,
                ..base
            }),
        },
    ]
}

/// Mean test RMSE per model over 20 cells (5 folds x 4 reshuffles).
fn ordering_study(kind: SyntheticKind, samples: usize, noise: f64, hidden: usize) -> (f64, f64, f64) {
    let data = synthetic_dataset(kind, samples, noise, 0x5EED).unwrap();
    let plan = FoldPlan { fold_count: 5, run_count: 4, master_seed: 0x0DD5 };
    let options = ProtocolOptions { jobs: 0, ..ProtocolOptions::default() };
    let out = run_protocol(&data, &eelm_comparison_models(hidden), &plan, &options).unwrap();
    let mean = |name: &str| out.report.aggregate(name).unwrap().mean_test_rmse;
    (mean("eelm-mrfo-lf"), mean("eelm-mrfo"), mean("elm"))
}

#[test]
fn criterion_6_eelm_ordering() {
    let (sinc_lf, sinc_mrfo, sinc_elm) = ordering_study(SyntheticKind::Sinc1d, 200, 0.05, 20);
    let (fried_lf, fried_mrfo, fried_elm) = ordering_study(SyntheticKind::Friedman1, 500, 1.0, 50);

    let ordered = |lf: f64, mrfo: f64, elm: f64| lf <= mrfo && mrfo <= elm && lf <= 0.95 * elm;
    let ok = ordered(sinc_lf, sinc_mrfo, sinc_elm) && ordered(fried_lf, fried_mrfo, fried_elm);
    verdict(
        6,
        "EELM ordering",
        ok,
        &format!(
            "sinc1d mean test RMSE: LF {sinc_lf:.5} / MRFO {sinc_mrfo:.5} / ELM {sinc_elm:.5}; \
             friedman1: LF {fried_lf:.5} / MRFO {fried_mrfo:.5} / ELM {fried_elm:.5}"
        ),
    );
}

fn fixture_structures() -> Vec<CrystalStructure> {
    let text = std::fs::read_to_string(FIXTURES).expect("fixture corpus readable");
    parse_extxyz(&text).expect("fixture corpus parses")
}

fn brute_force_neighbors(s: &CrystalStructure, a: &str, b: &str, cutoff: f64) -> Vec<f64> {
    let reach = 6i64;
    let mut out = Vec::new();
    for si in s.sites().iter().filter(|x| x.species == a) {
        let origin = s.to_cartesian(&si.frac);
        for sj in s.sites().iter().filter(|x| x.species == b) {
            for ta in -reach..=reach {
                for tb in -reach..=reach {
                    for tc in -reach..=reach {
                        let shifted = sj.frac + Vector3::new(ta as f64, tb as f64, tc as f64);
                        let d = (s.to_cartesian(&shifted) - origin).norm();
                        if d > 1e-10 && d <= cutoff {
                            out.push(d);
                        }
                    }
                }
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

#[test]
fn criterion_7_rdf_correctness() {
    let structures = fixture_structures();
    let mut detail = String::new();
    let mut ok = true;

    // Neighbor enumeration against the wide brute-force image oracle.
    let cutoff = 8.0;
    'outer: for (i, s) in structures.iter().enumerate() {
        for (a, b) in [("Li", "Li"), ("Li", "Ge"), ("Ge", "Li"), ("Ge", "Ge")] {
            let fast = s.enumerate_neighbors(a, b, cutoff).unwrap();
            let slow = brute_force_neighbors(s, a, b, cutoff);
            if fast.len() != slow.len()
                || fast.iter().zip(&slow).any(|(x, y)| x.to_bits() != y.to_bits())
            {
                ok = false;
                detail = format!("structure {i} pair {a}-{b}: enumeration mismatch");
                break 'outer;
            }
        }
    }

    // Analytic spot values on a grid that hits d = 2.0 exactly.
    if ok {
        let mut config = RdfConfig {
            cutoff: 2.2,
            grid_points: 11,
            grid_max: 2.2,
            renorm_exponent: 0.0,
            species_pairs: vec![("A".into(), "B".into())],
            ..RdfConfig::default()
        };
        let lattice = nalgebra::Matrix3::from_diagonal(&Vector3::new(40.0, 40.0, 40.0));
        let s = CrystalStructure::new(
            lattice,
            vec![
                ("A".to_string(), Vector3::new(0.0, 0.0, 0.0)),
                ("B".to_string(), Vector3::new(0.05, 0.0, 0.0)),
            ],
            None,
        )
        .unwrap();
        // Grid point 9 sits at r = 2.0, exactly the A-B distance.
        let g0 = partial_rdf(&s, &config.species_pairs[0].clone(), &config).unwrap();
        if (g0[9] - 1.0).abs() > 1e-10 {
            ok = false;
            detail = format!("p=0 peak value {} != 1.0", g0[9]);
        }
        config.renorm_exponent = 1.0;
        let g1 = partial_rdf(&s, &config.species_pairs[0].clone(), &config).unwrap();
        if (g1[9] - 0.5).abs() > 1e-10 {
            ok = false;
            detail = format!("p=1 peak value {} != 0.5", g1[9]);
        }
    }

    // Invariances on a fixture structure: rigid translation, site
    // permutation, and a 2x1x1 supercell.
    if ok {
        let config = RdfConfig::default();
        let s = &structures[9];
        let pair = ("Li".to_string(), "Ge".to_string());
        let reference = partial_rdf(s, &pair, &config).unwrap();

        let shift = Vector3::new(0.13, 0.27, 0.41);
        let translated = CrystalStructure::new(
            *s.lattice(),
            s.sites().iter().map(|x| (x.species.clone(), x.frac + shift)).collect(),
            s.energy_per_atom,
        )
        .unwrap();
        let mut permuted_sites: Vec<_> =
            s.sites().iter().map(|x| (x.species.clone(), x.frac)).collect();
        permuted_sites.reverse();
        let permuted =
            CrystalStructure::new(*s.lattice(), permuted_sites, s.energy_per_atom).unwrap();

        let mut doubled_lattice = *s.lattice();
        doubled_lattice.set_row(0, &(s.lattice().row(0) * 2.0));
        let mut super_sites = Vec::new();
        for x in s.sites() {
            let f = Vector3::new(x.frac[0] / 2.0, x.frac[1], x.frac[2]);
            super_sites.push((x.species.clone(), f));
            super_sites.push((x.species.clone(), f + Vector3::new(0.5, 0.0, 0.0)));
        }
        let supercell =
            CrystalStructure::new(doubled_lattice, super_sites, s.energy_per_atom).unwrap();

        for (name, other) in [
            ("translation", &translated),
            ("permutation", &permuted),
            ("supercell", &supercell),
        ] {
            let g = partial_rdf(other, &pair, &config).unwrap();
            let max_dev = reference
                .iter()
                .zip(&g)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0_f64, f64::max);
            if max_dev > 1e-8 {
                ok = false;
                detail = format!("{name} invariance broken, max deviation {max_dev:.3e}");
                break;
            }
        }
    }

    if ok {
        detail = "oracle, spot values, and invariances hold".to_string();
    }
    verdict(7, "RDF correctness", ok, &detail);
}

#[test]
fn criterion_8_formation_energy_endpoints() {
    let structures = fixture_structures();
    let energies: BTreeMap<String, f64> =
        [("Li".to_string(), -1.90), ("Ge".to_string(), -4.49)].into();
    let mut pure_count = 0;
    let mut ok = true;
    let mut detail = String::new();
    for (i, s) in structures.iter().enumerate() {
        let composition = s.composition();
        if composition.len() == 1 {
            pure_count += 1;
            let e_f = formation_energy_for(s, &energies).unwrap();
            if e_f != 0.0 {
                ok = false;
                detail = format!("structure {i} pure {:?} has E_f {e_f}", composition.keys());
                break;
            }
        }
    }
    if ok {
        ok = pure_count >= 2;
        detail = format!("{pure_count} pure endpoint structures, all exactly zero");
    }
    verdict(8, "formation-energy endpoints", ok, &detail);
}

#[test]
fn criterion_9_protocol_determinism() {
    let bin = env!("CARGO_BIN_EXE_eelm");
    let base = std::env::temp_dir().join(format!("eelm-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&base).unwrap();
    let config_path = base.join("protocol.conf");
    std::fs::write(
        &config_path,
        "[train]\nhidden_nodes = 15\npopulation = 8\niterations = 8\n[plan]\nfolds = 5\nruns = 3\n",
    )
    .unwrap();

    let run = |out: &str, jobs: &str| {
        let out_dir = base.join(out);
        let status = Command::new(bin)
            .args([
                "--config",
                config_path.to_str().unwrap(),
                "--seed",
                "11",
                "--jobs",
                jobs,
                "--out",
                out_dir.to_str().unwrap(),
                "protocol",
                "--synthetic",
                "sinc1d",
                "--samples",
                "150",
                "--noise",
                "0.05",
            ])
            .status()
            .expect("protocol command runs");
        assert!(status.success(), "protocol exited nonzero");
        std::fs::read_to_string(out_dir.join("metrics.csv")).unwrap()
    };

    let serial_a = run("serial-a", "1");
    let serial_b = run("serial-b", "1");
    let parallel = run("parallel", "4");

    let aggregates = |text: &str| -> Vec<Vec<f64>> {
        text.lines()
            .filter(|l| l.starts_with("aggregate,"))
            .map(|l| {
                l.split(',')
                    .skip(4)
                    .filter(|f| !f.is_empty())
                    .map(|f| f.parse::<f64>().unwrap())
                    .collect()
            })
            .collect()
    };
    let serial_agg = aggregates(&serial_a);
    let parallel_agg = aggregates(&parallel);
    let mut max_dev = 0.0_f64;
    for (a, b) in serial_agg.iter().zip(&parallel_agg) {
        for (x, y) in a.iter().zip(b) {
            max_dev = max_dev.max((x - y).abs());
        }
    }

    let ok = serial_a == serial_b && !serial_agg.is_empty() && max_dev <= 1e-12;
    verdict(
        9,
        "protocol determinism",
        ok,
        &format!(
            "serial byte-identical: {}; parallel aggregate deviation {max_dev:.3e}",
            serial_a == serial_b
        ),
    );
    let _ = std::fs::remove_dir_all(&base);
}
