use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use edgecast::allocator::{self, AllocationProblem, AllocationResult, UserLink};
use edgecast::cache::{self, CachePlan, HistoryIndex, PredictionMatrix};
use edgecast::channel::dbm_to_watts;
use edgecast::config::{self, ExperimentConfig};
use edgecast::dataset::{self, DatasetFormat};
use edgecast::delay::DelayConstraint;
use edgecast::experiment::{self, Scenario};
use edgecast::model::{self, WeightsFile};
use edgecast::queue::{self, QueueOptions};
use edgecast::{Error, Result};

#[derive(Parser)]
#[command(name = "edgecast", version, about = "Edge video caching and delivery workbench")]
struct Cli {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (else $EDGECAST_OUT_DIR, else `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a raw dataset and write it in canonical form.
    Ingest {
        /// Dataset directory or canonical file; defaults to the config's path.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        format: Option<DatasetFormat>,
    },
    /// Train the interest model and write weights, schema and the epoch trace.
    Train,
    /// Score (user, video) pairs with persisted weights.
    Predict {
        #[arg(long)]
        weights: PathBuf,
        /// CSV with `user,item` columns. Without it, every user of the
        /// seeded cell is scored against the cell's candidate catalog.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cell size; defaults to `experiment.chr_users`.
        #[arg(long)]
        users: Option<usize>,
        /// Capacity that sizes the candidate sets; defaults to `cache.capacity`.
        #[arg(long)]
        capacity: Option<usize>,
    },
    /// Build cache plans of every scheme from a predictions file.
    Cache {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        capacity: Option<usize>,
    },
    /// Solve a bandwidth allocation problem file.
    Allocate {
        /// JSON problem description.
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
        #[arg(long, value_enum, default_value_t = Scheme::DoubleBisection)]
        scheme: Scheme,
    },
    /// Compare the delay bound with queue simulation over the delay grid.
    Simulate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run every caching and delivery scheme and write the figure tables.
    Experiment {
        /// Reuse trained weights instead of training.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    DoubleBisection,
    IdenticalBandwidth,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.validate()?;
    let out = config::output_dir(cli.out.as_deref());
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let written = match &cli.command {
        Command::Ingest { input, format } => ingest(&cfg, &out, input.as_deref(), *format)?,
        Command::Train => train(&cfg, &out)?,
        Command::Predict {
            weights,
            pairs,
            seed,
            users,
            capacity,
        } => predict(&cfg, &out, weights, pairs.as_deref(), *seed, *users, *capacity)?,
        Command::Cache { predictions, capacity } => cache_plans(&cfg, &out, predictions, *capacity)?,
        Command::Allocate { problem, format, scheme } => allocate(&cfg, &out, problem, *format, *scheme)?,
        Command::Simulate { seed } => simulate(&cfg, &out, *seed)?,
        Command::Experiment { weights } => {
            let file = weights.as_deref().map(WeightsFile::load).transpose()?;
            let report = experiment::run_experiment(&cfg, file.as_ref())?;
            experiment::write_report(&report, &cfg, &out)?
        }
    };
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn f(x: f64) -> String {
    x.to_string()
}

fn ingest(cfg: &ExperimentConfig, out: &Path, input: Option<&Path>, format: Option<DatasetFormat>) -> Result<Vec<PathBuf>> {
    let path = input.unwrap_or(&cfg.data.path);
    let ds = dataset::load_dataset(path, format.unwrap_or(cfg.data.format))?;
    let text = ds.to_canonical();
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let target = out.join("dataset.tsv");
    let body = format!("{first}\n{}{rest}", cfg.header("-"));
    std::fs::write(&target, body).map_err(|e| Error::io(&target, e))?;
    log::info!(
        "{} users, {} items, {} ratings",
        ds.users.len(),
        ds.items.len(),
        ds.ratings.len()
    );
    Ok(vec![target])
}

fn train(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let ds = experiment::load_configured_dataset(cfg)?;
    let prepared = experiment::prepare_configured(cfg, ds)?;
    let fit = prepared.samples(&prepared.fit)?;
    let val = prepared.samples(&prepared.validation)?;
    let test = prepared.samples(&prepared.split.test)?;
    let mut rows = Vec::new();
    let outcome = model::train_observed(&fit, &val, prepared.schema.dim(), &cfg.model, |rec, w| {
        let eval = model::evaluate(w, &test, cfg.cache.delta)?;
        rows.push(vec![
            rec.epoch.to_string(),
            f(rec.train_loss),
            f(rec.val_loss),
            eval.auc.map_or(String::new(), f),
            f(eval.acc),
        ]);
        Ok(())
    })?;
    let header = cfg.header(&cfg.model.seed.to_string());
    let trace = out.join("train_trace.csv");
    experiment::write_csv(&trace, &header, &["epoch", "train_loss", "val_loss", "auc", "acc"], rows)?;
    let schema = out.join("schema.txt");
    prepared.schema.save_with_comment(&schema, &header)?;
    let weights = out.join("weights.json");
    let mut file = outcome.weights.to_file(&prepared.schema.hash(), &cfg.model);
    file.provenance = header.trim_end().to_string();
    file.save(&weights)?;
    log::info!("best epoch {}", outcome.best_epoch);
    Ok(vec![trace, schema, weights])
}

fn read_pairs(path: &Path) -> Result<Vec<(u32, u32)>> {
    #[derive(Deserialize)]
    struct Pair {
        user: u32,
        item: u32,
    }
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    r.deserialize::<Pair>()
        .map(|p| {
            p.map(|p| (p.user, p.item))
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
        })
        .collect()
}

fn predict(
    cfg: &ExperimentConfig,
    out: &Path,
    weights: &Path,
    pairs: Option<&Path>,
    seed: u64,
    users: Option<usize>,
    capacity: Option<usize>,
) -> Result<Vec<PathBuf>> {
    let file = WeightsFile::load(weights)?;
    let ds = experiment::load_configured_dataset(cfg)?;
    let prepared = experiment::prepare_configured(cfg, ds)?;
    file.check_schema(&prepared.schema.hash())?;
    let mut rows = Vec::new();
    if let Some(p) = pairs {
        let pairs = read_pairs(p)?;
        let scores = file.weights.predict_many(&prepared.encode_pairs(&pairs)?)?;
        for ((u, m), s) in pairs.iter().zip(scores) {
            rows.push(vec![u.to_string(), m.to_string(), f(s)]);
        }
    } else {
        let scn = Scenario::new(&prepared, &file.weights, cfg.cache.watched_interest);
        let n = users.unwrap_or(cfg.experiment.chr_users);
        let order = scn.cell_order(seed);
        if n > order.len() {
            return Err(Error::Domain(format!("cell of {n} users exceeds the {} eligible users", order.len())));
        }
        let cell = &order[..n];
        let m = cfg.cache.new_multiplier * capacity.unwrap_or(cfg.cache.capacity);
        let catalog: BTreeSet<u32> = cell.iter().flat_map(|&u| scn.candidates(u, m, seed)).collect();
        let catalog: Vec<u32> = catalog.into_iter().collect();
        let preds = scn.predictions(cell, &catalog)?;
        for (i, u) in preds.users.iter().enumerate() {
            for (j, v) in preds.videos.iter().enumerate() {
                rows.push(vec![u.to_string(), v.to_string(), f(preds.get(i, j))]);
            }
        }
    }
    let target = out.join("predictions.csv");
    experiment::write_csv(&target, &cfg.header(&seed.to_string()), &["user", "item", "score"], rows)?;
    Ok(vec![target])
}

fn read_predictions(path: &Path) -> Result<(PredictionMatrix, Option<String>)> {
    #[derive(Deserialize)]
    struct Row {
        user: u32,
        item: u32,
        score: f64,
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let seed = text
        .lines()
        .next()
        .filter(|l| l.starts_with('#'))
        .and_then(|l| l.split_once("seed="))
        .map(|(_, s)| s.trim().to_string());
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut scores: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for row in r.deserialize::<Row>() {
        let row = row.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        scores.insert((row.user, row.item), row.score);
    }
    let users: Vec<u32> = scores.keys().map(|k| k.0).collect::<BTreeSet<_>>().into_iter().collect();
    let videos: Vec<u32> = scores.keys().map(|k| k.1).collect::<BTreeSet<_>>().into_iter().collect();
    let mut dense = Vec::with_capacity(users.len() * videos.len());
    for &u in &users {
        for &v in &videos {
            let s = scores.get(&(u, v)).ok_or_else(|| {
                Error::Integrity(format!("{}: no prediction for user {u}, item {v}", path.display()))
            })?;
            dense.push(*s);
        }
    }
    Ok((PredictionMatrix::new(users, videos, dense)?, seed))
}

fn cache_plans(cfg: &ExperimentConfig, out: &Path, predictions: &Path, capacity: Option<usize>) -> Result<Vec<PathBuf>> {
    let (preds, seed) = read_predictions(predictions)?;
    let capacity = capacity.unwrap_or(cfg.cache.capacity);
    let ds = experiment::load_configured_dataset(cfg)?;
    let prepared = experiment::prepare_configured(cfg, ds)?;
    let history = HistoryIndex::from_pairs(prepared.split.train.iter().map(|l| (l.user, l.item)));
    let plans: [(&str, CachePlan); 3] = [
        ("proposed", cache::proposed_plan(&history, &preds, cfg.cache.delta, capacity)?),
        ("popularity", cache::baseline_popularity(&history, &preds.videos, capacity)?),
        ("top-k", cache::baseline_topk(&preds, capacity)?),
    ];
    let mut rows = Vec::new();
    for (scheme, plan) in &plans {
        for ((v, s), c) in plan.videos.iter().zip(&plan.scores).zip(&plan.cached) {
            rows.push(vec![scheme.to_string(), v.to_string(), f(*s), u8::from(*c).to_string()]);
        }
    }
    let target = out.join("cache_plan.csv");
    let header = cfg.header(seed.as_deref().unwrap_or("-"));
    experiment::write_csv(&target, &header, &["scheme", "video", "score", "cached"], rows)?;
    Ok(vec![target])
}

/// Allocation problem file. Radio parameters come from the config;
/// omitted fields take the config's values.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    total_bandwidth_hz: Option<f64>,
    rate_tol: Option<f64>,
    band_tol: Option<f64>,
    users: Vec<ProblemUser>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemUser {
    distance_m: f64,
    power_dbm: Option<f64>,
    target_s: Option<f64>,
    violation_prob: Option<f64>,
    cloud_delay_s: Option<f64>,
    cached: bool,
}

#[derive(Serialize)]
struct AllocationOutput<'a> {
    config_hash: String,
    version: &'static str,
    scheme: &'static str,
    result: &'a AllocationResult,
}

fn allocate(cfg: &ExperimentConfig, out: &Path, problem: &Path, format: OutputFormat, scheme: Scheme) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(problem).map_err(|e| Error::io(problem, e))?;
    let file: ProblemFile =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", problem.display())))?;
    let p = AllocationProblem {
        users: file
            .users
            .iter()
            .map(|u| UserLink {
                distance_m: u.distance_m,
                power_w: u.power_dbm.map_or(cfg.channel.power_w(), dbm_to_watts),
                constraint: DelayConstraint::new(
                    u.target_s.unwrap_or(cfg.delay.target_s),
                    u.violation_prob.unwrap_or(cfg.delay.violation_prob),
                    u.cloud_delay_s.unwrap_or(cfg.delay.cloud_delay_s),
                    u.cached,
                ),
            })
            .collect(),
        radio: cfg.channel.radio(),
        total_bandwidth_hz: file.total_bandwidth_hz.unwrap_or(cfg.channel.bandwidth_hz),
        rate_tol: file.rate_tol.unwrap_or(cfg.allocator.rate_tol),
        band_tol: file.band_tol.unwrap_or(cfg.allocator.band_tol),
    };
    let (name, result) = match scheme {
        Scheme::DoubleBisection => ("double-bisection", allocator::double_bisection(&p)?),
        Scheme::IdenticalBandwidth => ("identical-bandwidth", allocator::identical_bandwidth(&p)?),
    };
    match format {
        OutputFormat::Json => {
            let target = out.join("allocation.json");
            let doc = AllocationOutput {
                config_hash: cfg.hash(),
                version: config::VERSION,
                scheme: name,
                result: &result,
            };
            let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Format(e.to_string()))?;
            std::fs::write(&target, text + "\n").map_err(|e| Error::io(&target, e))?;
            Ok(vec![target])
        }
        OutputFormat::Csv => {
            let target = out.join("allocation.csv");
            let rows = p
                .users
                .iter()
                .enumerate()
                .map(|(n, u)| {
                    vec![
                        n.to_string(),
                        f(u.distance_m),
                        u8::from(u.constraint.cached).to_string(),
                        f(result.bandwidths[n]),
                        f(result.sustained_rates[n]),
                        f(result.rate),
                    ]
                })
                .collect();
            experiment::write_csv(
                &target,
                &cfg.header("-"),
                &["user", "distance_m", "cached", "bandwidth_hz", "sustained_rate_bps", "common_rate_bps"],
                rows,
            )?;
            Ok(vec![target])
        }
    }
}

fn simulate(cfg: &ExperimentConfig, out: &Path, seed: u64) -> Result<Vec<PathBuf>> {
    let link = experiment::single_link(cfg)?;
    let s = &cfg.simulation;
    let grid: Vec<DelayConstraint> = s
        .targets_s
        .iter()
        .flat_map(|&d| {
            s.violation_probs
                .iter()
                .map(move |&eps| DelayConstraint::new(d, eps, cfg.delay.cloud_delay_s, true))
        })
        .collect();
    let rows = queue::dvp_sweep(&link, &grid, &QueueOptions::new(s.blocks, s.warmup), seed)?;
    let table = rows
        .iter()
        .map(|r| {
            vec![
                f(r.target_s),
                f(r.violation_prob),
                f(r.bandwidth_hz),
                r.budget_blocks.to_string(),
                f(r.rate),
                f(r.mean_capacity),
                f(r.bound),
                f(r.empirical.probability),
                f(r.empirical.std_error),
                r.empirical.samples.to_string(),
                u8::from(r.unstable).to_string(),
            ]
        })
        .collect();
    let unstable = rows.iter().filter(|r| r.unstable).count();
    if unstable > 0 {
        log::warn!("{unstable} sweep points hit the backlog cap");
    }
    let target = out.join("dvp_sweep.csv");
    experiment::write_csv(
        &target,
        &cfg.header(&seed.to_string()),
        &[
            "target_s",
            "violation_prob",
            "bandwidth_hz",
            "budget_blocks",
            "rate_bps",
            "mean_capacity_bps",
            "bound",
            "empirical",
            "std_error",
            "samples",
            "unstable",
        ],
        table,
    )?;
    Ok(vec![target])
}
