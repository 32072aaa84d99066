//! Oracles and builders shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use edgecast::allocator::{AllocationProblem, RadioParams, UserLink};
use edgecast::channel::{dbm_to_watts, Fading, PathLoss};
use edgecast::dataset::{Item, Rating, RawDataset, User};
use edgecast::delay::DelayConstraint;
use edgecast::features::FeatureVector;
use edgecast::model::{Merge, ModelWeights, Sample};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `sum_i w_i x_i + sum_{i<j} <y_i, y_j> x_i x_j` by the double loop.
pub fn naive_fm(w: &[f64], y: &[f64], k: usize, x: &[f64]) -> f64 {
    let mut z: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dot: f64 = (0..k).map(|f| y[i * k + f] * y[j * k + f]).sum();
            z += dot * x[i] * x[j];
        }
    }
    z
}

/// A random sparse+dense input: a few one-hot indices below `sparse_dim`
/// and dense values after it.
pub fn random_input(rng: &mut impl Rng, sparse_dim: usize, dense: usize) -> FeatureVector {
    let mut sparse: Vec<u32> = (0..3).map(|_| rng.random_range(0..sparse_dim as u32)).collect();
    sparse.sort_unstable();
    sparse.dedup();
    FeatureVector {
        sparse,
        dense_offset: sparse_dim as u32,
        dense: (0..dense).map(|_| rng.random_range(-2.0..2.0)).collect(),
    }
}

pub fn random_model(dim: usize, k: usize, hidden: &[usize], merge: Merge, seed: u64) -> ModelWeights {
    let mut m = ModelWeights::random(dim, k, hidden, merge, 0.5, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    m.head_bias = rng.random_range(-0.5..0.5);
    m.fm_coef = rng.random_range(0.5..1.5);
    m
}

pub struct GradCheck {
    pub checked: usize,
    pub worst_relative: f64,
}

/// Compares analytic gradients of the mean loss with central differences on
/// `coords` parameter indices.
pub fn gradient_check(model: &ModelWeights, batch: &[Sample], coords: &[usize], h: f64) -> GradCheck {
    let analytic = model.gradients(batch).unwrap().params();
    let base = model.params();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for &c in coords {
        let mut p = base.clone();
        p[c] = base[c] + h;
        probe.set_params(&p);
        let up = probe.mean_loss(batch).unwrap();
        p[c] = base[c] - h;
        probe.set_params(&p);
        let down = probe.mean_loss(batch).unwrap();
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[c];
        let scale = a.abs().max(numeric.abs());
        // Coordinates whose gradient is below the difference's own noise
        // floor carry no relative information.
        let rel = if scale < 1e-7 { 0.0 } else { (a - numeric).abs() / scale };
        worst = worst.max(rel);
    }
    GradCheck {
        checked: coords.len(),
        worst_relative: worst,
    }
}

pub fn radio() -> RadioParams {
    RadioParams {
        noise_psd: dbm_to_watts(-130.0),
        block_s: 0.1,
        path_loss: PathLoss::default(),
        fading: Fading::Rayleigh,
    }
}

/// Users at `distances` with 20 dBm transmit power and the default delay
/// constraint; `cached[n]` selects the edge or cloud budget.
pub fn allocation_problem(distances: &[f64], cached: &[bool], total_hz: f64) -> AllocationProblem {
    AllocationProblem {
        users: distances
            .iter()
            .zip(cached)
            .map(|(&d, &c)| UserLink {
                distance_m: d,
                power_w: dbm_to_watts(20.0),
                constraint: DelayConstraint::new(0.2, 1e-3, 0.1, c),
            })
            .collect(),
        radio: radio(),
        total_bandwidth_hz: total_hz,
        rate_tol: 1e3,
        band_tol: 1e2,
    }
}

/// Max-min rate by exhaustive search: each user's rate is tabulated on a
/// `band_points` bandwidth grid, and the largest of `rate_points` common
/// rates whose per-user minimal grid bandwidths fit in the band wins.
pub fn grid_oracle(p: &AllocationProblem, band_points: usize, rate_points: usize) -> f64 {
    let step = p.total_bandwidth_hz / band_points as f64;
    let tables: Vec<Vec<f64>> = p
        .users
        .iter()
        .map(|u| (1..=band_points).map(|k| p.user_rate(u, step * k as f64).unwrap()).collect())
        .collect();
    let top = tables.iter().map(|t| t[band_points - 1]).fold(f64::INFINITY, f64::min);
    let mut best = 0.0;
    for j in 1..=rate_points {
        let v = top * j as f64 / rate_points as f64;
        let needed: f64 = tables
            .iter()
            .map(|t| (t.partition_point(|&r| r < v) + 1) as f64 * step)
            .sum();
        if needed <= p.total_bandwidth_hz * (1.0 + 1e-12) {
            best = v;
        }
    }
    best
}

pub fn run_cli(bin: &str, args: &[&str]) -> Output {
    Command::new(bin)
        .args(args)
        .env_remove("EDGECAST_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(bin: &str, args: &[&str]) {
    let out = run_cli(bin, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

/// Small synthetic catalog where each user prefers one genre.
pub fn synthetic_dataset(path: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let genres = vec!["Action".to_string(), "Comedy".to_string(), "Drama".to_string()];
    let users: Vec<User> = (1..=40)
        .map(|id| User {
            id,
            age: 18 + id % 40,
            gender: if id % 2 == 0 { "F" } else { "M" }.into(),
            occupation: ["student", "writer", "engineer"][id as usize % 3].into(),
            zip: format!("{:05}", 10000 + id),
        })
        .collect();
    let items: Vec<Item> = (1..=80)
        .map(|id| Item {
            id,
            title: format!("Film {id} ({})", 1980 + id % 20),
            year: Some(1980 + id % 20),
            genres: (0..3).map(|g| id % 3 == g).collect(),
        })
        .collect();
    let mut ratings = Vec::new();
    let mut ids: Vec<u32> = (1..=80).collect();
    for u in &users {
        ids.shuffle(&mut rng);
        for &m in &ids[..20] {
            let liked = m % 3 == u.id % 3;
            let rating = if liked { rng.random_range(4..=5) } else { rng.random_range(1..=3) };
            ratings.push(Rating { user: u.id, item: m, rating, timestamp: rng.random_range(0..1_000_000) });
        }
    }
    let ds = RawDataset { genres, users, items, ratings }.finalize().unwrap();
    ds.write_canonical(path).unwrap();
}

pub struct Workspace {
    _dir: tempfile::TempDir,
    pub root: PathBuf,
    pub config: String,
}

pub fn workspace() -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let data = root.join("ratings.tsv");
    synthetic_dataset(&data);
    let config = root.join("config.toml");
    fs::write(
        &config,
        format!(
            r#"
[data]
path = "{}"
format = "canonical"

[model]
k = 4
hidden = [8]
max_epochs = 3
batch_size = 16

[cache]
capacity = 4

[simulation]
blocks = 5000
warmup = 100
targets_s = [0.5]
violation_probs = [0.1]

[experiment]
seeds = [1, 2]
users = [5]
capacities = [4]
chr_users = 5
"#,
            data.display()
        ),
    )
    .unwrap();
    fs::write(
        root.join("problem.json"),
        r#"{"users": [{"distance_m": 15.0, "cached": true}, {"distance_m": 40.0, "cached": false}, {"distance_m": 25.0, "cached": true}]}"#,
    )
    .unwrap();
    Workspace { _dir: dir, config: config.display().to_string(), root }
}

/// Runs every subcommand once into `out`.
pub fn run_pipeline(bin: &str, ws: &Workspace, out: &Path) {
    let out = out.display().to_string();
    let cfg = ws.config.as_str();
    let problem = ws.root.join("problem.json").display().to_string();
    ok(bin, &["--config", cfg, "--out", &out, "ingest"]);
    ok(bin, &["--config", cfg, "--out", &out, "train"]);
    let weights = format!("{out}/weights.json");
    ok(bin, &["--config", cfg, "--out", &out, "predict", "--weights", &weights, "--seed", "3"]);
    let predictions = format!("{out}/predictions.csv");
    ok(bin, &["--config", cfg, "--out", &out, "cache", "--predictions", &predictions]);
    ok(bin, &["--config", cfg, "--out", &out, "allocate", "--problem", &problem]);
    ok(bin, &["--config", cfg, "--out", &out, "allocate", "--problem", &problem, "--format", "json"]);
    ok(bin, &["--config", cfg, "--out", &out, "simulate", "--seed", "5"]);
    ok(bin, &["--config", cfg, "--out", &out, "experiment", "--weights", &weights]);
}

