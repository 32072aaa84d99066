//! End-to-end runs: interest model -> cache plans -> requests -> hit rates,
//! and cache hits -> delay budgets -> bandwidth allocation -> coding rates.
//!
//! Cells are nested: for a seed, the `N` users of a cell are the first `N`
//! of one seeded permutation of the eligible users, and their distances,
//! candidate sets and requests depend only on the seed and the user, never
//! on `N` or `E`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::allocator::{self, AllocationProblem, AllocationResult, UserLink};
use crate::cache::{self, CachePlan, HistoryIndex, PredictionMatrix};
use crate::channel::{self, LinkProfile};
use crate::config::{ExperimentConfig, WatchedInterest};
use crate::dataset::{self, RawDataset};
use crate::delay::{self, DelayConstraint};
use crate::error::{Error, Result};
use crate::model::{self, Evaluation, ModelWeights, TrainOutcome, WeightsFile};
use crate::pipeline::{self, Prepared};

/// RNG stream offsets keep per-purpose draws independent under one seed.
const STREAM_CANDIDATES: u64 = 1 << 32;
const STREAM_REQUESTS: u64 = 2 << 32;
const STREAM_CELL: u64 = 3 << 32;

pub const CACHE_SCHEMES: [&str; 3] = ["proposed", "popularity", "top-k"];

/// One requested video per included user.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequestMatrix {
    pub users: Vec<u32>,
    pub videos: Vec<u32>,
    /// Users left out because they had nothing to request.
    pub excluded: Vec<u32>,
}

/// What one user may request.
#[derive(Debug, Clone, PartialEq)]
pub struct UserCandidates {
    pub user: u32,
    /// Held-out videos the user is known to like.
    pub held_out: Vec<u32>,
    /// Candidate videos and their predicted interest, used when no
    /// held-out positive exists.
    pub items: Vec<u32>,
    pub scores: Vec<f64>,
}

/// Draws one request per user: uniformly among the held-out positives when
/// there are any, otherwise proportionally to the predicted interest.
pub fn generate_requests(users: &[UserCandidates], seed: u64) -> Result<RequestMatrix> {
    let mut out = RequestMatrix {
        users: Vec::new(),
        videos: Vec::new(),
        excluded: Vec::new(),
    };
    for c in users {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(STREAM_REQUESTS + u64::from(c.user));
        let pick = if let Some(&v) = c.held_out.choose(&mut rng) {
            Some(v)
        } else if c.items.is_empty() {
            None
        } else {
            if c.items.len() != c.scores.len() {
                return Err(Error::DimensionMismatch {
                    expected: c.items.len(),
                    got: c.scores.len(),
                });
            }
            match WeightedIndex::new(&c.scores) {
                Ok(w) => Some(c.items[w.sample(&mut rng)]),
                // All-zero interest: fall back to a uniform draw.
                Err(_) => c.items.choose(&mut rng).copied(),
            }
        };
        match pick {
            Some(v) => {
                out.users.push(c.user);
                out.videos.push(v);
            }
            None => out.excluded.push(c.user),
        }
    }
    if !out.excluded.is_empty() {
        log::warn!("{} users had no candidate to request", out.excluded.len());
    }
    Ok(out)
}

/// Share of requests served from the cache.
pub fn compute_uhr(requests: &RequestMatrix, plan: &CachePlan) -> Result<f64> {
    if requests.videos.is_empty() {
        return Err(Error::UndefinedMetric("hit rate of zero requests".into()));
    }
    let cached: HashSet<u32> = plan.selected.iter().copied().collect();
    let hits = requests.videos.iter().filter(|v| cached.contains(v)).count();
    Ok(hits as f64 / requests.videos.len() as f64)
}

/// Share of the `capacity` cache slots holding a requested video.
pub fn compute_chr(requests: &RequestMatrix, plan: &CachePlan, capacity: usize) -> Result<f64> {
    if capacity == 0 {
        return Err(Error::UndefinedMetric("content hit rate with zero capacity".into()));
    }
    let requested: HashSet<u32> = requests.videos.iter().copied().collect();
    let used = plan.selected.iter().filter(|v| requested.contains(v)).count();
    Ok(used as f64 / capacity as f64)
}

/// A trained interest model with the data it was trained on.
pub struct InterestModel {
    pub prepared: Prepared,
    pub outcome: TrainOutcome,
    pub test: Evaluation,
    pub popularity_auc: Option<f64>,
}

pub fn load_configured_dataset(cfg: &ExperimentConfig) -> Result<RawDataset> {
    dataset::load_dataset(&cfg.data.path, cfg.data.format)
}

/// Labels, splits and encodes the dataset as the config describes.
pub fn prepare_configured(cfg: &ExperimentConfig, ds: RawDataset) -> Result<Prepared> {
    let max_e = cfg.experiment.capacities.iter().copied().max().unwrap_or(cfg.cache.capacity);
    let opts = cfg
        .data
        .prepare_options(cfg.cache.new_multiplier * max_e.max(cfg.cache.capacity));
    pipeline::prepare(ds, &opts)
}

pub fn fit_interest_model(cfg: &ExperimentConfig, ds: RawDataset) -> Result<InterestModel> {
    let prepared = prepare_configured(cfg, ds)?;
    let fit = prepared.samples(&prepared.fit)?;
    let val = prepared.samples(&prepared.validation)?;
    let outcome = model::train(&fit, &val, prepared.schema.dim(), &cfg.model)?;
    evaluated(cfg, prepared, outcome)
}

/// Wraps already trained weights, checking they match the prepared schema.
pub fn interest_from_weights(cfg: &ExperimentConfig, ds: RawDataset, file: &WeightsFile) -> Result<InterestModel> {
    let prepared = prepare_configured(cfg, ds)?;
    file.check_schema(&prepared.schema.hash())?;
    let outcome = TrainOutcome {
        weights: file.weights.clone(),
        trace: Vec::new(),
        best_epoch: 0,
    };
    evaluated(cfg, prepared, outcome)
}

fn evaluated(cfg: &ExperimentConfig, prepared: Prepared, outcome: TrainOutcome) -> Result<InterestModel> {
    let test = prepared.samples(&prepared.split.test)?;
    let eval = model::evaluate(&outcome.weights, &test, cfg.cache.delta)?;
    let pop = prepared.train_popularity();
    let pop_scores: Vec<f64> = prepared
        .split
        .test
        .iter()
        .map(|l| *pop.get(&l.item).unwrap_or(&0) as f64)
        .collect();
    let labels: Vec<f64> = test.iter().map(|s| s.label).collect();
    let popularity_auc = model::auc(&pop_scores, &labels).ok();
    Ok(InterestModel {
        prepared,
        outcome,
        test: eval,
        popularity_auc,
    })
}

/// Everything the caching and delivery runs share across seeds.
pub struct Scenario<'a> {
    pub prepared: &'a Prepared,
    pub weights: &'a ModelWeights,
    /// Training-split watch history of every user.
    pub history: HistoryIndex,
    pub eligible: Vec<u32>,
    held_out_pos: BTreeMap<u32, Vec<u32>>,
    held_out_all: BTreeMap<u32, Vec<u32>>,
    rated: HashSet<(u32, u32)>,
    items: Vec<u32>,
    watched: WatchedInterest,
    /// Lazily filled rows of predicted interest over `items`.
    rows: std::sync::Mutex<HashMap<u32, std::sync::Arc<Vec<f64>>>>,
}

impl<'a> Scenario<'a> {
    pub fn new(prepared: &'a Prepared, weights: &'a ModelWeights, watched: WatchedInterest) -> Self {
        let p = prepared;
        let history = HistoryIndex::from_pairs(p.split.train.iter().map(|l| (l.user, l.item)));
        let mut held_out_pos: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        let mut held_out_all: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for l in &p.split.test {
            held_out_all.entry(l.user).or_default().push(l.item);
            if l.label == 1 {
                held_out_pos.entry(l.user).or_default().push(l.item);
            }
        }
        for v in held_out_pos.values_mut().chain(held_out_all.values_mut()) {
            v.sort_unstable();
        }
        Scenario {
            prepared,
            weights,
            history,
            eligible: held_out_pos.keys().copied().collect(),
            held_out_pos,
            held_out_all,
            rated: p.ds.ratings.iter().map(|r| (r.user, r.item)).collect(),
            items: p.ds.items.iter().map(|i| i.id).collect(),
            watched,
            rows: Default::default(),
        }
    }

    /// Predicted interest of `user` in every library item.
    fn row(&self, user: u32) -> Result<std::sync::Arc<Vec<f64>>> {
        if let Some(r) = self.rows.lock().unwrap().get(&user) {
            return Ok(r.clone());
        }
        let xs = self.prepared.encode_pairs(&self.items.iter().map(|&m| (user, m)).collect::<Vec<_>>())?;
        let mut scores = self.weights.predict_many(&xs)?;
        for (s, &m) in scores.iter_mut().zip(&self.items) {
            if self.watched == WatchedInterest::Zero && self.history.has_watched(user, m) {
                *s = 0.0;
            }
        }
        let row = std::sync::Arc::new(scores);
        self.rows.lock().unwrap().insert(user, row.clone());
        Ok(row)
    }

    /// The seeded order in which users join the cell.
    pub fn cell_order(&self, seed: u64) -> Vec<u32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(STREAM_CELL);
        let mut users = self.eligible.clone();
        users.shuffle(&mut rng);
        users
    }

    /// Never-rated items in a seeded per-user order; the first `M` form the
    /// user's new set.
    fn unrated_order(&self, user: u32, seed: u64) -> Vec<u32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(STREAM_CANDIDATES + u64::from(user));
        let mut items: Vec<u32> = self
            .items
            .iter()
            .copied()
            .filter(|&m| !self.rated.contains(&(user, m)))
            .collect();
        items.shuffle(&mut rng);
        items
    }

    /// Candidate set of `user`: `m` new items plus its held-out items.
    pub fn candidates(&self, user: u32, m: usize, seed: u64) -> Vec<u32> {
        let mut c: BTreeSet<u32> = self.unrated_order(user, seed).into_iter().take(m).collect();
        c.extend(self.held_out_all.get(&user).into_iter().flatten().copied());
        c.into_iter().collect()
    }

    pub fn requests(&self, users: &[u32], seed: u64) -> Result<RequestMatrix> {
        let cands: Vec<UserCandidates> = users
            .iter()
            .map(|&u| UserCandidates {
                user: u,
                held_out: self.held_out_pos.get(&u).cloned().unwrap_or_default(),
                items: Vec::new(),
                scores: Vec::new(),
            })
            .collect();
        generate_requests(&cands, seed)
    }

    pub fn predictions(&self, users: &[u32], catalog: &[u32]) -> Result<PredictionMatrix> {
        let cols: Vec<usize> = catalog
            .iter()
            .map(|m| {
                self.items
                    .binary_search(m)
                    .map_err(|_| Error::Integrity(format!("unknown item {m}")))
            })
            .collect::<Result<_>>()?;
        let mut scores = Vec::with_capacity(users.len() * catalog.len());
        for &u in users {
            let row = self.row(u)?;
            scores.extend(cols.iter().map(|&j| row[j]));
        }
        PredictionMatrix::new(users.to_vec(), catalog.to_vec(), scores)
    }

    /// Cache plans of all schemes for one cell.
    pub fn plans(&self, users: &[u32], capacity: usize, multiplier: usize, delta: f64, seed: u64) -> Result<CellPlans> {
        let mut catalog = BTreeSet::new();
        for &u in users {
            catalog.extend(self.candidates(u, multiplier * capacity, seed));
        }
        let catalog: Vec<u32> = catalog.into_iter().collect();
        let preds = self.predictions(users, &catalog)?;
        let proposed = cache::proposed_plan(&self.history, &preds, delta, capacity)?;
        let popularity = cache::baseline_popularity(&self.history, &catalog, capacity)?;
        let topk = cache::baseline_topk(&preds, capacity)?;
        Ok(CellPlans {
            catalog,
            plans: vec![proposed, popularity, topk],
        })
    }
}

pub struct CellPlans {
    pub catalog: Vec<u32>,
    /// In [`CACHE_SCHEMES`] order.
    pub plans: Vec<CachePlan>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Uhr,
    Chr,
    MinRate,
    Throughput,
    CommonRate,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Uhr => "uhr",
            Metric::Chr => "chr",
            Metric::MinRate => "min_rate",
            Metric::Throughput => "throughput",
            Metric::CommonRate => "common_rate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replicate {
    pub seed: u64,
    pub users: usize,
    pub capacity: usize,
    pub scheme: String,
    pub metric: Metric,
    pub value: f64,
}

/// Hit rates of every cache scheme over seeds x cell sizes x capacities.
pub fn caching_replicates(scn: &Scenario, cfg: &ExperimentConfig) -> Result<Vec<Replicate>> {
    let e = &cfg.experiment;
    let mut sizes: Vec<usize> = e.users.clone();
    sizes.push(e.chr_users);
    sizes.sort_unstable();
    sizes.dedup();
    let per_seed: Vec<Vec<Replicate>> = e
        .seeds
        .par_iter()
        .map(|&seed| {
            let order = scn.cell_order(seed);
            let mut out = Vec::new();
            for &n in &sizes {
                if n > order.len() {
                    return Err(Error::Domain(format!(
                        "cell of {n} users requested but only {} users have held-out positives",
                        order.len()
                    )));
                }
                let users = &order[..n];
                let requests = scn.requests(users, seed)?;
                for &cap in &e.capacities {
                    let cell = scn.plans(users, cap, cfg.cache.new_multiplier, cfg.cache.delta, seed)?;
                    for (scheme, plan) in CACHE_SCHEMES.iter().zip(&cell.plans) {
                        let rep = |metric, value| Replicate {
                            seed,
                            users: n,
                            capacity: cap,
                            scheme: scheme.to_string(),
                            metric,
                            value,
                        };
                        out.push(rep(Metric::Uhr, compute_uhr(&requests, plan)?));
                        out.push(rep(Metric::Chr, compute_chr(&requests, plan, cap)?));
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

/// The cell's allocation problem given each user's cache-hit flag.
pub fn delivery_problem(cfg: &ExperimentConfig, distances: &[f64], cached: &[bool]) -> AllocationProblem {
    AllocationProblem {
        users: distances
            .iter()
            .zip(cached)
            .map(|(&d, &c)| UserLink {
                distance_m: d,
                power_w: cfg.channel.power_w(),
                constraint: cfg.delay.constraint(c),
            })
            .collect(),
        radio: cfg.channel.radio(),
        total_bandwidth_hz: cfg.channel.bandwidth_hz,
        rate_tol: cfg.allocator.rate_tol,
        band_tol: cfg.allocator.band_tol,
    }
}

fn allocation_replicates(seed: u64, n: usize, cap: usize, scheme: &str, r: &AllocationResult) -> [Replicate; 3] {
    let rep = |metric, value| Replicate {
        seed,
        users: n,
        capacity: cap,
        scheme: scheme.to_string(),
        metric,
        value,
    };
    [
        rep(Metric::MinRate, r.min_rate()),
        rep(Metric::Throughput, r.throughput()),
        rep(Metric::CommonRate, r.rate),
    ]
}

/// Coding rates of every delivery scheme over seeds x cell sizes at the
/// configured cache capacity.
pub fn delivery_replicates(scn: &Scenario, cfg: &ExperimentConfig) -> Result<Vec<Replicate>> {
    let e = &cfg.experiment;
    let cap = cfg.cache.capacity;
    let max_n = e.users.iter().copied().max().unwrap_or(0);
    let range = (cfg.channel.distance_min_m, cfg.channel.distance_max_m);
    let mut out = Vec::new();
    for &seed in &e.seeds {
        let order = scn.cell_order(seed);
        let placed = channel::place_users(max_n, range, seed)?;
        for &n in &e.users {
            if n > order.len() {
                return Err(Error::Domain(format!("cell of {n} users exceeds the eligible users")));
            }
            let users = &order[..n];
            let distances = &placed[..n];
            let requests = scn.requests(users, seed)?;
            let cell = scn.plans(users, cap, cfg.cache.new_multiplier, cfg.cache.delta, seed)?;
            let mut solved: HashMap<Vec<bool>, AllocationResult> = HashMap::new();
            let mut solve = |cached: Vec<bool>| -> Result<AllocationResult> {
                if let Some(r) = solved.get(&cached) {
                    return Ok(r.clone());
                }
                let r = allocator::double_bisection(&delivery_problem(cfg, distances, &cached))?;
                solved.insert(cached, r.clone());
                Ok(r)
            };
            for (scheme, plan) in CACHE_SCHEMES.iter().zip(&cell.plans) {
                let cached: Vec<bool> = users
                    .iter()
                    .map(|u| {
                        requests
                            .users
                            .iter()
                            .position(|x| x == u)
                            .is_some_and(|k| plan.contains(requests.videos[k]))
                    })
                    .collect();
                let db = solve(cached.clone())?;
                out.extend(allocation_replicates(seed, n, cap, &format!("{scheme}-db"), &db));
                let ib = allocator::identical_bandwidth(&delivery_problem(cfg, distances, &cached))?;
                out.extend(allocation_replicates(seed, n, cap, &format!("{scheme}-ib"), &ib));
            }
            let ideal = solve(vec![true; n])?;
            out.extend(allocation_replicates(seed, n, cap, "ideal-db", &ideal));
            let none = solve(vec![false; n])?;
            out.extend(allocation_replicates(seed, n, cap, "no-cache-db", &none));
        }
    }
    Ok(out)
}

/// The single link of the simulation section.
pub fn single_link(cfg: &ExperimentConfig) -> Result<LinkProfile> {
    let radio = cfg.channel.radio();
    Ok(LinkProfile::new(
        cfg.simulation.bandwidth_hz,
        cfg.channel.power_w(),
        cfg.simulation.distance_m,
        radio.noise_psd,
        radio.block_s,
        &radio.path_loss,
    )?
    .with_fading(radio.fading))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub target_s: f64,
    pub violation_prob: f64,
    pub budget_blocks: u32,
    pub rate_bps: f64,
    pub mean_capacity_bps: f64,
}

/// Calibrated rate of the configured single link over the delay grid, with
/// every request served from the edge.
pub fn rate_table(cfg: &ExperimentConfig) -> Result<Vec<RateRow>> {
    let s = &cfg.simulation;
    let block_s = cfg.channel.block_s;
    let link = single_link(cfg)?;
    let mean = link.mean_capacity()?;
    let mut rows = Vec::new();
    for &d in &s.targets_s {
        for &eps in &s.violation_probs {
            let c = DelayConstraint::new(d, eps, cfg.delay.cloud_delay_s, true);
            rows.push(RateRow {
                target_s: d,
                violation_prob: eps,
                budget_blocks: c.effective_budget(block_s)?,
                rate_bps: delay::calibrated_rate(&link, &c)?,
                mean_capacity_bps: mean,
            });
        }
    }
    Ok(rows)
}

pub struct ExperimentReport {
    pub auc: Option<f64>,
    pub acc: f64,
    pub caching: Vec<Replicate>,
    pub delivery: Vec<Replicate>,
    pub rates: Vec<RateRow>,
}

/// Trains the interest model, or uses `weights` when given, then runs every
/// caching and delivery scheme.
pub fn run_experiment(cfg: &ExperimentConfig, weights: Option<&WeightsFile>) -> Result<ExperimentReport> {
    let ds = load_configured_dataset(cfg)?;
    let model = match weights {
        Some(w) => interest_from_weights(cfg, ds, w)?,
        None => fit_interest_model(cfg, ds)?,
    };
    let scn = Scenario::new(&model.prepared, &model.outcome.weights, cfg.cache.watched_interest);
    Ok(ExperimentReport {
        auc: model.test.auc,
        acc: model.test.acc,
        caching: caching_replicates(&scn, cfg)?,
        delivery: delivery_replicates(&scn, cfg)?,
        rates: rate_table(cfg)?,
    })
}

/// Mean and 95% normal half-width over replicates.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// Groups replicates of `metric` by (users, capacity, scheme).
pub fn aggregate(reps: &[Replicate], metric: Metric) -> BTreeMap<(usize, usize, String), Vec<f64>> {
    let mut groups: BTreeMap<(usize, usize, String), Vec<f64>> = BTreeMap::new();
    for r in reps.iter().filter(|r| r.metric == metric) {
        groups
            .entry((r.users, r.capacity, r.scheme.clone()))
            .or_default()
            .push(r.value);
    }
    groups
}

fn csv_text(header: &str, columns: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns).map_err(|e| Error::Format(e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| Error::Format(e.to_string()))?;
    }
    let body = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(format!("{header}{}", String::from_utf8(body).expect("csv is utf-8")))
}

pub fn write_csv(path: &Path, header: &str, columns: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let text = csv_text(header, columns, rows)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn summary_rows(
    reps: &[Replicate],
    metric: Metric,
    keep: impl Fn(usize, usize, &str) -> bool,
) -> Vec<Vec<String>> {
    aggregate(reps, metric)
        .into_iter()
        .filter(|((n, e, s), _)| keep(*n, *e, s))
        .map(|((n, e, s), v)| {
            let (mean, ci) = mean_ci(&v);
            vec![n.to_string(), e.to_string(), s, mean.to_string(), ci.to_string(), v.len().to_string()]
        })
        .collect()
}

/// Writes the figure tables and the replicate file into `dir`.
pub fn write_report(report: &ExperimentReport, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let seeds: Vec<String> = cfg.experiment.seeds.iter().map(|s| s.to_string()).collect();
    let header = cfg.header(&seeds.join(";"));
    let summary = ["users", "capacity", "scheme", "mean", "ci95", "seeds"];
    let e = &cfg.experiment;
    let mut written = Vec::new();
    let mut emit = |name: &str, columns: &[&str], rows: Vec<Vec<String>>| -> Result<()> {
        let path = dir.join(name);
        write_csv(&path, &header, columns, rows)?;
        written.push(path);
        Ok(())
    };
    let cap = cfg.cache.capacity;
    emit(
        "fig4_uhr.csv",
        &summary,
        summary_rows(&report.caching, Metric::Uhr, |n, c, _| c == cap && e.users.contains(&n)),
    )?;
    emit(
        "fig5_uhr.csv",
        &summary,
        summary_rows(&report.caching, Metric::Uhr, |n, _, s| s == "proposed" && e.users.contains(&n)),
    )?;
    emit(
        "fig6_chr.csv",
        &summary,
        summary_rows(&report.caching, Metric::Chr, |n, _, _| n == e.chr_users),
    )?;
    emit(
        "fig7_rate.csv",
        &["target_s", "violation_prob", "budget_blocks", "rate_bps", "mean_capacity_bps"],
        report
            .rates
            .iter()
            .map(|r| {
                vec![
                    r.target_s.to_string(),
                    r.violation_prob.to_string(),
                    r.budget_blocks.to_string(),
                    r.rate_bps.to_string(),
                    r.mean_capacity_bps.to_string(),
                ]
            })
            .collect(),
    )?;
    emit(
        "fig8_minrate.csv",
        &summary,
        summary_rows(&report.delivery, Metric::MinRate, |_, _, _| true),
    )?;
    emit(
        "fig9_throughput.csv",
        &summary,
        summary_rows(&report.delivery, Metric::Throughput, |_, _, _| true),
    )?;
    emit(
        "replicates.csv",
        &["seed", "users", "capacity", "scheme", "metric", "value"],
        report
            .caching
            .iter()
            .chain(&report.delivery)
            .map(|r| {
                vec![
                    r.seed.to_string(),
                    r.users.to_string(),
                    r.capacity.to_string(),
                    r.scheme.clone(),
                    r.metric.name().to_string(),
                    r.value.to_string(),
                ]
            })
            .collect(),
    )?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(selected: &[u32]) -> CachePlan {
        CachePlan {
            videos: selected.to_vec(),
            scores: vec![1.0; selected.len()],
            cached: vec![true; selected.len()],
            selected: selected.to_vec(),
        }
    }

    fn requests(videos: &[u32]) -> RequestMatrix {
        RequestMatrix {
            users: (0..videos.len() as u32).collect(),
            videos: videos.to_vec(),
            excluded: Vec::new(),
        }
    }

    #[test]
    fn request_generation() {
        let single = UserCandidates { user: 1, held_out: vec![], items: vec![7], scores: vec![0.2] };
        let empty = UserCandidates { user: 2, held_out: vec![], items: vec![], scores: vec![] };
        let held = UserCandidates { user: 3, held_out: vec![4, 5], items: vec![9], scores: vec![1.0] };
        let r = generate_requests(&[single, empty, held], 11).unwrap();
        assert_eq!(r.users, vec![1, 3]);
        assert_eq!(r.videos[0], 7);
        assert!([4, 5].contains(&r.videos[1]));
        assert_eq!(r.excluded, vec![2]);
    }

    #[test]
    fn hit_rates() {
        assert_eq!(compute_uhr(&requests(&[1, 2]), &plan(&[1, 2])).unwrap(), 1.0);
        assert_eq!(compute_uhr(&requests(&[1, 2]), &plan(&[3])).unwrap(), 0.0);
        assert_eq!(compute_uhr(&requests(&[1, 2, 3, 4]), &plan(&[1, 2, 3])).unwrap(), 0.75);
        assert!(compute_uhr(&requests(&[]), &plan(&[1])).is_err());
        assert_eq!(compute_chr(&requests(&[1, 1, 2]), &plan(&[1, 2]), 2).unwrap(), 1.0);
        assert_eq!(compute_chr(&requests(&[5]), &plan(&[1, 2]), 2).unwrap(), 0.0);
        assert_eq!(compute_chr(&requests(&[1, 2, 9]), &plan(&[1, 2, 3, 4]), 4).unwrap(), 0.5);
        assert!(compute_chr(&requests(&[1]), &plan(&[1]), 0).is_err());
    }

    #[test]
    fn mean_ci_values() {
        assert_eq!(mean_ci(&[2.0]), (2.0, 0.0));
        let (m, ci) = mean_ci(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((ci - 1.96).abs() < 1e-12);
    }
}
