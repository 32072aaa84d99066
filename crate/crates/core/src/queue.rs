//! Discrete-time fluid queue: `V T` bits arrive in every block and up to
//! `R(i) T` bits leave in the same block.
//!
//! With `q[t]` the backlog at the start of block `t`, the bits that arrived
//! up to the end of block `i` have all departed `k` blocks later iff
//! `q[i + 1 + k] <= V T k`. That is the cumulative-arrival/departure
//! ("last bit") delay rule expressed through the Lindley backlog, which keeps
//! the comparison free of the rounding drift of million-block cumulative sums.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::LinkProfile;
use crate::delay::{self, DelayConstraint};
use crate::error::{Error, Result};

/// Delay of an arrival block whose last bit had not left by the end of the
/// simulated horizon.
pub const CENSORED: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct QueueOptions {
    pub blocks: usize,
    pub warmup: usize,
    /// Backlog, in blocks' worth of arrivals, above which the queue is
    /// declared unstable and the run stops.
    pub backlog_cap_blocks: f64,
    /// Extra blocks simulated past `blocks` to resolve trailing delays.
    pub drain_blocks: usize,
}

impl QueueOptions {
    pub fn new(blocks: usize, warmup: usize) -> Self {
        QueueOptions {
            blocks,
            warmup,
            backlog_cap_blocks: 1e6,
            drain_blocks: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QueueTrace {
    /// `backlog[t]`: bits queued at the start of block `t`.
    pub backlog: Vec<f64>,
    /// Delay in blocks of each measured arrival block, in order, starting at
    /// block `warmup`.
    pub delays: Vec<u32>,
    pub warmup: usize,
    pub arrival_bits: f64,
    pub unstable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DvpEstimate {
    pub probability: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
}

impl QueueTrace {
    /// Fraction of measured arrival blocks whose delay exceeds `budget`
    /// blocks, with a normal-approximation binomial 95% interval.
    pub fn dvp(&self, budget: u32) -> DvpEstimate {
        let n = self.delays.len();
        let hits = self.delays.iter().filter(|&&d| d > budget).count();
        binomial_estimate(hits, n)
    }

    pub fn censored(&self) -> usize {
        self.delays.iter().filter(|&&d| d == CENSORED).count()
    }
}

pub fn binomial_estimate(hits: usize, n: usize) -> DvpEstimate {
    if n == 0 {
        return DvpEstimate {
            probability: 0.0,
            std_error: 0.0,
            ci_low: 0.0,
            ci_high: 0.0,
            samples: 0,
        };
    }
    let p = hits as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    DvpEstimate {
        probability: p,
        std_error: se,
        ci_low: (p - 1.96 * se).max(0.0),
        ci_high: (p + 1.96 * se).min(1.0),
        samples: n,
    }
}

/// Runs the queue from empty for `opts.blocks` blocks (plus drain blocks)
/// and measures the delay of every arrival block after the warmup.
pub fn simulate_queue(link: &LinkProfile, rate: f64, opts: &QueueOptions, seed: u64) -> Result<QueueTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_with(rate, link.block_s, opts, || link.sample_capacity(&mut rng))
}

/// Same as [`simulate_queue`] with an arbitrary per-block capacity source.
pub fn simulate_with(
    rate: f64,
    block_s: f64,
    opts: &QueueOptions,
    mut capacity: impl FnMut() -> f64,
) -> Result<QueueTrace> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::Domain(format!("coding rate must be >= 0, got {rate}")));
    }
    if opts.blocks <= opts.warmup {
        return Err(Error::Domain(format!(
            "blocks ({}) must exceed warmup ({})",
            opts.blocks, opts.warmup
        )));
    }
    let arrival = rate * block_s;
    let cap = opts.backlog_cap_blocks * arrival;
    let horizon = opts.blocks + opts.drain_blocks;
    let mut backlog = Vec::with_capacity(opts.blocks + 1);
    backlog.push(0.0);
    let mut delays = Vec::with_capacity(opts.blocks - opts.warmup);
    let mut unstable = false;

    // `end` is the first backlog index at which the arrival block under
    // consideration has fully departed; it never moves backwards.
    let mut end = 0usize;
    for i in opts.warmup..opts.blocks {
        let mut t = end.max(i + 1);
        loop {
            while backlog.len() <= t && backlog.len() <= horizon && !unstable {
                let q = *backlog.last().unwrap();
                let next = (q + arrival - capacity() * block_s).max(0.0);
                if arrival > 0.0 && next > cap {
                    unstable = true;
                }
                backlog.push(next);
            }
            if t >= backlog.len() {
                break;
            }
            if backlog[t] <= arrival * (t - i - 1) as f64 {
                break;
            }
            t += 1;
        }
        if t >= backlog.len() {
            delays.push(CENSORED);
            if unstable {
                break;
            }
            continue;
        }
        end = t;
        delays.push((t - i - 1) as u32);
    }
    Ok(QueueTrace {
        backlog,
        delays,
        warmup: opts.warmup,
        arrival_bits: arrival,
        unstable,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub target_s: f64,
    pub violation_prob: f64,
    pub bandwidth_hz: f64,
    pub budget_blocks: u32,
    pub rate: f64,
    pub mean_capacity: f64,
    pub bound: f64,
    pub empirical: DvpEstimate,
    pub unstable: bool,
}

/// For each constraint, calibrates the sustainable rate on `link`, runs the
/// queue at that rate and records bound against measurement.
pub fn dvp_sweep(
    link: &LinkProfile,
    grid: &[DelayConstraint],
    opts: &QueueOptions,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let mean = link.mean_capacity()?;
    grid.iter()
        .enumerate()
        .map(|(k, c)| {
            let budget = c.effective_budget(link.block_s)?;
            let rate = delay::calibrated_rate(link, c)?;
            let bound = delay::dvp_bound(link, c, rate)?;
            let trace = simulate_queue(link, rate, opts, seed.wrapping_add(k as u64))?;
            Ok(SweepRow {
                target_s: c.target_s,
                violation_prob: c.violation_prob,
                bandwidth_hz: link.bandwidth_hz,
                budget_blocks: budget,
                rate,
                mean_capacity: mean,
                bound,
                empirical: trace.dvp(budget),
                unstable: trace.unstable,
            })
        })
        .collect()
}
