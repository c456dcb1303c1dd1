//! `eelm`: featurization, training, optimizer benchmarking, and the
//! repeated-runs experiment protocol behind one binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use serde::Serialize;

use eelm_core::baselines::{minimize_with, OptimizerKind, OptimizerSpec};
use eelm_core::benchfns::BenchFunction;
use eelm_core::config::ConfigFile;
use eelm_core::elm::{predict, Activation};
use eelm_core::harness::{
    run_protocol, synthetic_dataset, FoldPlan, ModelEntry, ModelSpec, ProtocolOptions,
    SyntheticKind,
};
use eelm_core::optimizer::Bounds;
use eelm_core::rdf::{extxyz::parse_extxyz, featurize, FeatureDataset, RdfConfig};
use eelm_core::trainer::{train, TrainingRunConfig};
use eelm_core::{Error, Result};

#[derive(Parser)]
#[command(name = "eelm", version, about = "Evolutionary ELM training and experiment harness")]
struct Cli {
    /// Configuration file (line-oriented `key = value` with [sections]).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; identical invocations produce byte-identical outputs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output directory for all artifacts.
    #[arg(long, global = true, default_value = "eelm-out")]
    out: PathBuf,

    /// Worker threads; 1 forces the serial reference path, 0 uses all cores.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse extended-XYZ structures and write an RDF feature CSV.
    Featurize {
        /// Extended-XYZ input file.
        #[arg(long)]
        input: PathBuf,
        /// Output CSV path (default: <out>/features.csv).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Pure-element energy in eV/atom, e.g. `--pure-energy Li=-1.90`.
        /// When at least one is given, a formation-energy target column is
        /// attached; every species present must then have an entry.
        #[arg(long = "pure-energy")]
        pure_energy: Vec<String>,
    },
    /// Train one model on a feature CSV or a synthetic dataset.
    Train {
        /// Feature CSV produced by `featurize`.
        #[arg(long, conflicts_with = "synthetic")]
        dataset: Option<PathBuf>,
        /// Synthetic dataset: sinc1d, friedman1, or linear.
        #[arg(long)]
        synthetic: Option<String>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
    },
    /// Run every optimizer over standard test functions and record
    /// per-seed convergence histories.
    BenchmarkOptimizers {
        /// Comma-separated functions: sphere, rastrigin, rosenbrock.
        #[arg(long, default_value = "sphere,rastrigin,rosenbrock")]
        functions: String,
        /// Comma-separated dimensionalities.
        #[arg(long, default_value = "2")]
        dimensions: String,
        /// Comma-separated optimizer kinds.
        #[arg(long, default_value = "mrfo,mrfo-lf,pso,ga,woa,random-search")]
        optimizers: String,
        #[arg(long, default_value_t = 20)]
        seed_count: usize,
        #[arg(long, default_value_t = 20)]
        population: usize,
        #[arg(long, default_value_t = 50)]
        iterations: usize,
    },
    /// Cross-validated model comparison: metrics, manifests, and
    /// predicted-vs-actual scatter data.
    Protocol {
        #[arg(long, conflicts_with = "synthetic")]
        dataset: Option<PathBuf>,
        #[arg(long)]
        synthetic: Option<String>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        /// Multiplier applied to reported RMSE values.
        #[arg(long)]
        rmse_scale: Option<f64>,
        /// Unit label for the scaled RMSE column.
        #[arg(long)]
        rmse_units: Option<String>,
    },
    /// Summarize a metrics CSV written by `protocol`.
    Report {
        #[arg(long)]
        metrics: PathBuf,
    },
}

/// Written to <out>/cli_manifest.json before every exit, success or not.
#[derive(Serialize)]
struct CliManifest {
    command: String,
    seed: u64,
    jobs: usize,
    status: String,
    outputs: Vec<String>,
}

fn main() {
    let cli = Cli::parse();
    let command_name = match &cli.command {
        Command::Featurize { .. } => "featurize",
        Command::Train { .. } => "train",
        Command::BenchmarkOptimizers { .. } => "benchmark-optimizers",
        Command::Protocol { .. } => "protocol",
        Command::Report { .. } => "report",
    };

    let mut outputs = Vec::new();
    let result = std::fs::create_dir_all(&cli.out)
        .map_err(Error::from)
        .and_then(|_| run(&cli, &mut outputs));

    let manifest = CliManifest {
        command: command_name.to_string(),
        seed: cli.seed,
        jobs: cli.jobs,
        status: match &result {
            Ok(()) => "ok".to_string(),
            Err(e) => format!("error: {e}"),
        },
        outputs,
    };
    if let Ok(json) = serde_json::to_string_pretty(&manifest) {
        let _ = fs::write(cli.out.join("cli_manifest.json"), json + "\n");
    }

    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: &Cli, outputs: &mut Vec<String>) -> Result<()> {
    let config = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    match &cli.command {
        Command::Featurize { input, output, pure_energy } => {
            command_featurize(cli, &config, input, output.as_deref(), pure_energy, outputs)
        }
        Command::Train { dataset, synthetic, samples, noise } => {
            command_train(cli, &config, dataset.as_deref(), synthetic.as_deref(), *samples, *noise, outputs)
        }
        Command::BenchmarkOptimizers {
            functions,
            dimensions,
            optimizers,
            seed_count,
            population,
            iterations,
        } => command_benchmark(
            cli, &config, functions, dimensions, optimizers, *seed_count, *population, *iterations,
            outputs,
        ),
        Command::Protocol {
            dataset,
            synthetic,
            samples,
            noise,
            folds,
            runs,
            rmse_scale,
            rmse_units,
        } => command_protocol(
            cli,
            &config,
            dataset.as_deref(),
            synthetic.as_deref(),
            *samples,
            *noise,
            *folds,
            *runs,
            *rmse_scale,
            rmse_units.as_deref(),
            outputs,
        ),
        Command::Report { metrics } => command_report(metrics),
    }
}

fn write_output(path: &Path, contents: &[u8], outputs: &mut Vec<String>) -> Result<()> {
    fs::write(path, contents)?;
    outputs.push(path.display().to_string());
    Ok(())
}

fn rdf_config_from(config: &ConfigFile) -> Result<RdfConfig> {
    let mut rdf = RdfConfig::default();
    if let Some(v) = config.get_parsed::<f64>("rdf", "cutoff")? {
        rdf.cutoff = v;
    }
    if let Some(v) = config.get_parsed::<f64>("rdf", "gaussian_width")? {
        rdf.gaussian_width = v;
    }
    if let Some(v) = config.get_parsed::<f64>("rdf", "renorm_exponent")? {
        rdf.renorm_exponent = v;
    }
    if let Some(v) = config.get_parsed::<usize>("rdf", "grid_points")? {
        rdf.grid_points = v;
    }
    if let Some(v) = config.get_parsed::<f64>("rdf", "grid_max")? {
        rdf.grid_max = v;
    }
    if let Some(raw) = config.get("rdf", "pairs") {
        rdf.species_pairs = raw
            .split(',')
            .map(|p| {
                p.trim()
                    .split_once('-')
                    .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                    .ok_or_else(|| {
                        Error::InvalidConfig(format!("pair '{p}' is not of the form A-B"))
                    })
            })
            .collect::<Result<_>>()?;
    }
    rdf.validate()?;
    Ok(rdf)
}

fn pure_energies_from(
    config: &ConfigFile,
    flags: &[String],
) -> Result<Option<BTreeMap<String, f64>>> {
    let mut energies: BTreeMap<String, f64> = BTreeMap::new();
    for key in config.section_keys("energies") {
        let value = config.get_parsed::<f64>("energies", key)?.unwrap();
        energies.insert(key.to_string(), value);
    }
    for flag in flags {
        let (species, value) = flag.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("--pure-energy '{flag}' is not of the form Species=eV"))
        })?;
        let value: f64 = value.trim().parse().map_err(|_| {
            Error::InvalidConfig(format!("--pure-energy '{flag}' has a non-numeric energy"))
        })?;
        energies.insert(species.trim().to_string(), value);
    }
    Ok(if energies.is_empty() { None } else { Some(energies) })
}

fn command_featurize(
    cli: &Cli,
    config: &ConfigFile,
    input: &Path,
    output: Option<&Path>,
    pure_energy: &[String],
    outputs: &mut Vec<String>,
) -> Result<()> {
    let text = fs::read_to_string(input)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", input.display())))?;
    let structures = parse_extxyz(&text)?;
    if structures.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no structures found in {}",
            input.display()
        )));
    }
    let rdf = rdf_config_from(config)?;
    let energies = pure_energies_from(config, pure_energy)?;
    let dataset = featurize(&structures, &rdf, energies.as_ref())?;

    let out_path = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cli.out.join("features.csv"));
    let mut buf = Vec::new();
    dataset.write_csv(&mut buf)?;
    write_output(&out_path, &buf, outputs)?;
    println!(
        "featurized {} structures: {} rows x {} columns -> {}",
        structures.len(),
        dataset.features.nrows(),
        dataset.columns.len() + usize::from(dataset.targets.is_some()),
        out_path.display()
    );
    Ok(())
}

fn load_regression_data(
    dataset: Option<&Path>,
    synthetic: Option<&str>,
    samples: usize,
    noise: f64,
    seed: u64,
) -> Result<(eelm_core::elm::RegressionData, bool)> {
    match (dataset, synthetic) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
            Ok((FeatureDataset::read_csv(&text)?.to_regression_data()?, true))
        }
        (None, Some(kind)) => {
            let kind = SyntheticKind::from_str(kind)?;
            Ok((synthetic_dataset(kind, samples, noise, seed)?, false))
        }
        (None, None) => Err(Error::InvalidConfig(
            "either --dataset or --synthetic is required".into(),
        )),
    }
}

fn training_config_from(config: &ConfigFile, seed: u64) -> Result<TrainingRunConfig> {
    let mut tc = TrainingRunConfig { seed, ..TrainingRunConfig::default() };
    if let Some(v) = config.get_parsed::<usize>("train", "hidden_nodes")? {
        tc.hidden_nodes = v;
    }
    if let Some(raw) = config.get("train", "activation") {
        tc.activation = Activation::from_str(raw)?;
    }
    if let Some(v) = config.get_parsed::<bool>("train", "include_biases")? {
        tc.include_biases = v;
    }
    if let Some(raw) = config.get("train", "optimizer") {
        tc.optimizer_kind = OptimizerKind::from_str(raw)?;
    }
    if let Some(v) = config.get_parsed::<usize>("train", "population")? {
        tc.population_size = v;
    }
    if let Some(v) = config.get_parsed::<usize>("train", "iterations")? {
        tc.max_iterations = v;
    }
    if let Some(v) = config.get_parsed::<f64>("train", "weight_lower")? {
        tc.weight_bounds.0 = v;
    }
    if let Some(v) = config.get_parsed::<f64>("train", "weight_upper")? {
        tc.weight_bounds.1 = v;
    }
    if let Some(v) = config.get_parsed::<f64>("train", "penalty")? {
        tc.penalty = v;
    }
    if let Some(raw) = config.get("train", "penalty_grid") {
        tc.penalty_grid = raw
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidConfig(format!("penalty grid entry '{s}' is not a number"))
                })
            })
            .collect::<Result<_>>()?;
    }
    if let Some(v) = config.get_parsed::<f64>("train", "fitness_split")? {
        tc.fitness_split_fraction = v;
    }
    tc.validate()?;
    Ok(tc)
}

fn command_train(
    cli: &Cli,
    config: &ConfigFile,
    dataset: Option<&Path>,
    synthetic: Option<&str>,
    samples: usize,
    noise: f64,
    outputs: &mut Vec<String>,
) -> Result<()> {
    let (data, _) = load_regression_data(dataset, synthetic, samples, noise, cli.seed)?;
    let tc = training_config_from(config, cli.seed)?;
    let (model, manifest) = train(&data, &tc)?;

    let manifest_path = cli.out.join("train_manifest.jsonl");
    write_output(&manifest_path, (manifest.to_json_line() + "\n").as_bytes(), outputs)?;

    let mut history = String::from("iteration,best_fitness\n");
    for (i, h) in manifest.history.iter().enumerate() {
        history.push_str(&format!("{i},{h}\n"));
    }
    write_output(&cli.out.join("convergence.csv"), history.as_bytes(), outputs)?;

    let predictions = predict(&model, &data.inputs)?;
    let train_rmse =
        eelm_core::harness::rmse(predictions.as_slice(), data.targets.as_slice())?;
    println!(
        "trained {} ({} hidden nodes, {} evaluations): held-out fitness {}, training RMSE {}",
        manifest.optimizer,
        tc.hidden_nodes,
        manifest.evaluations,
        manifest.best_fitness,
        train_rmse
    );
    Ok(())
}

fn split_list(raw: &str) -> Vec<&str> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

#[allow(clippy::too_many_arguments)]
fn command_benchmark(
    cli: &Cli,
    config: &ConfigFile,
    functions: &str,
    dimensions: &str,
    optimizers: &str,
    seed_count: usize,
    population: usize,
    iterations: usize,
    outputs: &mut Vec<String>,
) -> Result<()> {
    let functions = config.get("benchmark", "functions").unwrap_or(functions);
    let dimensions = config.get("benchmark", "dimensions").unwrap_or(dimensions);
    let optimizers = config.get("benchmark", "optimizers").unwrap_or(optimizers);
    let seed_count = config
        .get_parsed::<usize>("benchmark", "seed_count")?
        .unwrap_or(seed_count);
    if seed_count == 0 {
        return Err(Error::InvalidConfig("seed count must be positive".into()));
    }

    let functions: Vec<BenchFunction> = split_list(functions)
        .into_iter()
        .map(BenchFunction::from_str)
        .collect::<Result<_>>()?;
    let dims: Vec<usize> = split_list(dimensions)
        .into_iter()
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::InvalidConfig(format!("dimension '{s}' is not an integer")))
        })
        .collect::<Result<_>>()?;
    let kinds: Vec<OptimizerKind> = split_list(optimizers)
        .into_iter()
        .map(OptimizerKind::from_str)
        .collect::<Result<_>>()?;

    let mut convergence = String::from("function,dimension,optimizer,seed,iteration,best_fitness\n");
    let mut summary = String::from("function,dimension,optimizer,median_final,mean_final,best_final\n");
    let mut table = Vec::new();
    for &function in &functions {
        for &dim in &dims {
            let (lower, upper) = function.default_bounds();
            for &kind in &kinds {
                let mut finals = Vec::with_capacity(seed_count);
                for s in 0..seed_count {
                    let seed = cli.seed.wrapping_add(s as u64);
                    let spec = OptimizerSpec::new(
                        kind,
                        population,
                        iterations,
                        Bounds::uniform(dim, lower, upper)?,
                        seed,
                    );
                    let outcome = minimize_with(&spec, |x| function.eval(x))?;
                    for (i, h) in outcome.history.iter().enumerate() {
                        convergence.push_str(&format!(
                            "{},{},{},{},{},{}\n",
                            function.name(),
                            dim,
                            kind.name(),
                            seed,
                            i,
                            h
                        ));
                    }
                    finals.push(outcome.best_fitness);
                }
                finals.sort_by(f64::total_cmp);
                let median = if finals.len() % 2 == 1 {
                    finals[finals.len() / 2]
                } else {
                    0.5 * (finals[finals.len() / 2 - 1] + finals[finals.len() / 2])
                };
                let mean = finals.iter().sum::<f64>() / finals.len() as f64;
                let best = finals[0];
                summary.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    function.name(),
                    dim,
                    kind.name(),
                    median,
                    mean,
                    best
                ));
                table.push(format!(
                    "{:<12} D={:<3} {:<14} median {:.3e}  mean {:.3e}  best {:.3e}",
                    function.name(),
                    dim,
                    kind.name(),
                    median,
                    mean,
                    best
                ));
            }
        }
    }

    write_output(&cli.out.join("convergence.csv"), convergence.as_bytes(), outputs)?;
    write_output(&cli.out.join("summary.csv"), summary.as_bytes(), outputs)?;
    for line in table {
        println!("{line}");
    }
    Ok(())
}

fn models_from(config: &ConfigFile, base: &TrainingRunConfig) -> Result<Vec<ModelEntry>> {
    let names = config.section_keys("models");
    if names.is_empty() {
        // Default comparison set.
        return Ok(vec![
            ModelEntry {
                name: "elm".to_string(),
                spec: ModelSpec::PlainElm {
                    hidden_nodes: base.hidden_nodes,
                    activation: base.activation,
                    penalty: base.penalty,
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
                    ..base.clone()
                }),
            },
        ]);
    }
    names
        .into_iter()
        .map(|name| {
            let raw = config.get("models", name).unwrap();
            let spec = if raw.eq_ignore_ascii_case("plain") || raw.eq_ignore_ascii_case("elm") {
                ModelSpec::PlainElm {
                    hidden_nodes: base.hidden_nodes,
                    activation: base.activation,
                    penalty: base.penalty,
                }
            } else {
                ModelSpec::Evolutionary(TrainingRunConfig {
                    optimizer_kind: OptimizerKind::from_str(raw)?,
                    ..base.clone()
                })
            };
            Ok(ModelEntry { name: name.to_string(), spec })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn command_protocol(
    cli: &Cli,
    config: &ConfigFile,
    dataset: Option<&Path>,
    synthetic: Option<&str>,
    samples: usize,
    noise: f64,
    folds: usize,
    runs: usize,
    rmse_scale: Option<f64>,
    rmse_units: Option<&str>,
    outputs: &mut Vec<String>,
) -> Result<()> {
    let (data, from_file) = load_regression_data(dataset, synthetic, samples, noise, cli.seed)?;
    let base = training_config_from(config, cli.seed)?;
    let models = models_from(config, &base)?;
    let plan = FoldPlan {
        fold_count: config.get_parsed::<usize>("plan", "folds")?.unwrap_or(folds),
        run_count: config.get_parsed::<usize>("plan", "runs")?.unwrap_or(runs),
        master_seed: cli.seed,
    };
    // Energy datasets report meV/atom by convention; synthetic data stays
    // in target units.
    let (default_scale, default_units) = if from_file {
        (1000.0, "meV/atom")
    } else {
        (1.0, "target units")
    };
    let options = ProtocolOptions {
        jobs: cli.jobs,
        rmse_scale: rmse_scale.unwrap_or(default_scale),
        rmse_units: rmse_units.unwrap_or(default_units).to_string(),
    };

    let output = run_protocol(&data, &models, &plan, &options)?;

    let mut metrics = Vec::new();
    output.report.write_csv(&mut metrics)?;
    write_output(&cli.out.join("metrics.csv"), &metrics, outputs)?;

    let mut timings = Vec::new();
    output.report.write_timings_csv(&mut timings)?;
    write_output(&cli.out.join("timings.csv"), &timings, outputs)?;

    let mut manifests = String::new();
    for record in &output.manifests {
        manifests.push_str(&serde_json::to_string(record).expect("manifest serializes"));
        manifests.push('\n');
    }
    write_output(&cli.out.join("manifests.jsonl"), manifests.as_bytes(), outputs)?;

    let mut scatter = String::from("model,predicted,actual\n");
    for (model, points) in &output.scatter {
        for (predicted, actual) in points {
            scatter.push_str(&format!("{model},{predicted},{actual}\n"));
        }
    }
    write_output(&cli.out.join("scatter.csv"), scatter.as_bytes(), outputs)?;

    let total = output.report.cells.len();
    let failed: usize = output.report.aggregates.iter().map(|a| a.cells_failed).sum();
    for a in &output.report.aggregates {
        println!(
            "{:<14} mean test RMSE {:.6} {} (std {:.6}), mean test R2 {:.6} ({} ok / {} failed)",
            a.model,
            a.mean_test_rmse * options.rmse_scale,
            options.rmse_units,
            a.std_test_rmse * options.rmse_scale,
            a.mean_test_r2,
            a.cells_ok,
            a.cells_failed
        );
    }
    if failed == total {
        return Err(Error::SolveFailed("every protocol cell failed".into()));
    }
    Ok(())
}

fn command_report(metrics: &Path) -> Result<()> {
    let text = fs::read_to_string(metrics)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", metrics.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidConfig("metrics file is empty".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 8 || columns[0] != "row" {
        return Err(Error::InvalidConfig("metrics file has an unexpected header".into()));
    }
    let rmse_column = columns[5];

    let mut cell_count = 0usize;
    let mut error_count = 0usize;
    let mut aggregates = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        match fields.first() {
            Some(&"cell") => {
                cell_count += 1;
                if fields.get(7).is_some_and(|e| !e.is_empty()) {
                    error_count += 1;
                }
            }
            Some(&"aggregate") => aggregates.push(fields.iter().map(|s| s.to_string()).collect::<Vec<_>>()),
            _ => {}
        }
    }
    println!("{cell_count} cells ({error_count} failed)");
    println!("{:<16} {:>14} {:>12}", "model", rmse_column, "test_r2");
    for a in &aggregates {
        println!(
            "{:<16} {:>14} {:>12}",
            a.get(1).map(String::as_str).unwrap_or(""),
            a.get(5).map(String::as_str).unwrap_or(""),
            a.get(6).map(String::as_str).unwrap_or("")
        );
    }
    Ok(())
}
