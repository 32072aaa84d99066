//! Max-min fair coding rate and bandwidth allocation by double bisection.
//!
//! The outer bisection searches the common coding rate `V`; for each
//! candidate the inner bisections find every user's smallest bandwidth that
//! sustains `V` under its delay constraint. The rate is raised while the
//! summed demand fits in the total bandwidth and lowered otherwise. At the
//! optimum all users run at the same rate and the band is used up.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Fading, LinkProfile, PathLoss};
use crate::delay::{self, DelayConstraint};
use crate::error::{Error, Result};

/// One user's link, everything but the bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserLink {
    pub distance_m: f64,
    pub power_w: f64,
    pub constraint: DelayConstraint,
}

/// Parameters shared by every link in the cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub noise_psd: f64,
    pub block_s: f64,
    pub path_loss: PathLoss,
    pub fading: Fading,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    pub users: Vec<UserLink>,
    pub radio: RadioParams,
    pub total_bandwidth_hz: f64,
    /// `phi_V`, bit/s.
    pub rate_tol: f64,
    /// `phi_B`, Hz.
    pub band_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationResult {
    /// Common coding rate `V*` every user sustains.
    pub rate: f64,
    pub bandwidths: Vec<f64>,
    /// Each user's calibrated rate at its allocated bandwidth.
    pub sustained_rates: Vec<f64>,
    pub feasible: bool,
    pub outer_iterations: usize,
    /// Largest inner iteration count over all users and outer steps.
    pub max_inner_iterations: usize,
    /// Bracket extensions performed before the outer loop started.
    pub bracket_widenings: usize,
    /// The initial outer bracket `(V_min, V_max)` from the equal split.
    pub initial_bracket: (f64, f64),
}

impl AllocationResult {
    pub fn min_rate(&self) -> f64 {
        self.sustained_rates.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_rate(&self) -> f64 {
        self.sustained_rates.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn used_bandwidth(&self) -> f64 {
        self.bandwidths.iter().sum()
    }

    /// Sum of the users' sustained coding rates.
    pub fn throughput(&self) -> f64 {
        self.sustained_rates.iter().sum()
    }
}

impl AllocationProblem {
    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::Domain("allocation needs at least one user".into()));
        }
        for (name, v) in [
            ("total bandwidth", self.total_bandwidth_hz),
            ("rate tolerance", self.rate_tol),
            ("bandwidth tolerance", self.band_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        for (n, u) in self.users.iter().enumerate() {
            self.link(u, self.total_bandwidth_hz)
                .map_err(|e| Error::Domain(format!("user {n}: {e}")))?;
            u.constraint
                .effective_budget(self.radio.block_s)
                .map_err(|e| Error::Infeasible(format!("user {n}: {e}")))?;
        }
        Ok(())
    }

    pub fn link(&self, user: &UserLink, bandwidth_hz: f64) -> Result<LinkProfile> {
        Ok(LinkProfile::new(
            bandwidth_hz,
            user.power_w,
            user.distance_m,
            self.radio.noise_psd,
            self.radio.block_s,
            &self.radio.path_loss,
        )?
        .with_fading(self.radio.fading))
    }

    /// Calibrated rate of `user` when given `bandwidth_hz`.
    pub fn user_rate(&self, user: &UserLink, bandwidth_hz: f64) -> Result<f64> {
        delay::calibrated_rate(&self.link(user, bandwidth_hz)?, &user.constraint)
    }

    fn sustains(&self, user: &UserLink, rate: f64, bandwidth_hz: f64) -> Result<bool> {
        delay::sustains(&self.link(user, bandwidth_hz)?, &user.constraint, rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSearch {
    pub bandwidth_hz: f64,
    pub iterations: usize,
}

/// Smallest bandwidth in `(0, cap]` sustaining `rate` for `user`, to within
/// `band_tol`. Returns the upper bisection endpoint, so the bandwidth always
/// sustains `rate`. Bisection also continues while that endpoint would
/// still sustain `rate + rate_tol`, which bounds the over-provisioning in
/// rate terms as well. `None` if even `cap` cannot sustain `rate`.
pub fn min_bandwidth_for_rate(
    problem: &AllocationProblem,
    user: &UserLink,
    rate: f64,
    cap: f64,
) -> Result<Option<BandSearch>> {
    if !(rate > 0.0) {
        return Err(Error::Domain(format!("rate must be positive, got {rate}")));
    }
    if !problem.sustains(user, rate, cap)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0f64, cap);
    let mut hi_generous = problem.sustains(user, rate + problem.rate_tol, hi)?;
    let mut iterations = 0;
    while hi - lo > problem.band_tol || hi_generous {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || iterations >= 200 {
            break;
        }
        iterations += 1;
        if problem.sustains(user, rate, mid)? {
            hi = mid;
            hi_generous = problem.sustains(user, rate + problem.rate_tol, hi)?;
        } else {
            lo = mid;
        }
    }
    if lo > 0.0 && problem.sustains(user, rate, lo)? {
        return Err(Error::Internal(format!(
            "non-monotone bandwidth response at rate {rate}: {lo} Hz sustains it after being rejected"
        )));
    }
    Ok(Some(BandSearch {
        bandwidth_hz: hi,
        iterations,
    }))
}

struct Demand {
    bandwidths: Vec<f64>,
    total: f64,
    max_iterations: usize,
}

/// Each user's minimal bandwidth at `rate`, `None` for users that cannot
/// reach `rate` even with the whole band.
fn user_demands(problem: &AllocationProblem, rate: f64) -> Result<Vec<Option<BandSearch>>> {
    problem
        .users
        .par_iter()
        .map(|u| min_bandwidth_for_rate(problem, u, rate, problem.total_bandwidth_hz))
        .collect()
}

fn collect_demand(searches: &[Option<BandSearch>]) -> Option<Demand> {
    let mut bandwidths = Vec::with_capacity(searches.len());
    let mut max_iterations = 0;
    for s in searches {
        let s = (*s)?;
        max_iterations = max_iterations.max(s.iterations);
        bandwidths.push(s.bandwidth_hz);
    }
    let total = bandwidths.iter().sum();
    Some(Demand {
        bandwidths,
        total,
        max_iterations,
    })
}

/// Per-user minimal bandwidths at `rate`; `None` if some user cannot reach
/// `rate` even with the whole band.
fn demand(problem: &AllocationProblem, rate: f64) -> Result<Option<Demand>> {
    Ok(collect_demand(&user_demands(problem, rate)?))
}

/// Demand at `rate` with the whole band substituted for users that cannot
/// reach it.
fn capped_demand(searches: &[Option<BandSearch>], total: f64) -> Vec<f64> {
    searches.iter().map(|s| s.map_or(total, |s| s.bandwidth_hz)).collect()
}

fn equal_split_rates(problem: &AllocationProblem) -> Result<Vec<f64>> {
    let share = problem.total_bandwidth_hz / problem.users.len() as f64;
    problem
        .users
        .par_iter()
        .map(|u| problem.user_rate(u, share))
        .collect()
}

fn sustained_rates(problem: &AllocationProblem, bandwidths: &[f64]) -> Result<Vec<f64>> {
    problem
        .users
        .par_iter()
        .zip(bandwidths)
        .map(|(u, &b)| problem.user_rate(u, b))
        .collect()
}

/// Double-bisection search for the max-min common coding rate.
pub fn double_bisection(problem: &AllocationProblem) -> Result<AllocationResult> {
    problem.validate()?;
    let n = problem.users.len() as f64;
    let total = problem.total_bandwidth_hz;
    let rates = equal_split_rates(problem)?;
    let v_min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let v_max = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    if v_max - v_min <= problem.rate_tol {
        let bandwidths = vec![total / n; problem.users.len()];
        return Ok(AllocationResult {
            rate: v_min,
            sustained_rates: rates,
            bandwidths,
            feasible: true,
            outer_iterations: 0,
            max_inner_iterations: 0,
            bracket_widenings: 0,
            initial_bracket: (v_min, v_max),
        });
    }

    // The equal split brackets the optimum in exact arithmetic: at `v_min`
    // every user needs at most `B/N`, at `v_max` at least `B/N`. Bisection
    // round-off can still push the lower end over budget, so it is widened
    // downwards until it fits.
    let mut lo = v_min;
    let mut hi = v_max;
    let mut widenings = 0;
    let mut max_inner = 0;
    let mut best = loop {
        match demand(problem, lo)? {
            Some(d) if d.total <= total => break d,
            _ => {
                widenings += 1;
                let width = hi - lo;
                hi = lo;
                lo -= 2.0 * width;
                log::info!("widening allocation bracket below {hi} (step {widenings})");
                if lo <= 0.0 || widenings > 60 {
                    return Err(Error::Infeasible(
                        "no positive common rate fits in the total bandwidth".into(),
                    ));
                }
            }
        }
    };
    max_inner = max_inner.max(best.max_iterations);

    let mut hi_demand: Option<Vec<f64>> = None;
    let mut outer = 0;
    while hi - lo > problem.rate_tol {
        let mid = 0.5 * (lo + hi);
        outer += 1;
        let searches = user_demands(problem, mid)?;
        match collect_demand(&searches) {
            Some(d) if d.total <= total => {
                max_inner = max_inner.max(d.max_iterations);
                lo = mid;
                let done = total - d.total <= n * problem.band_tol;
                best = d;
                if done {
                    break;
                }
            }
            other => {
                if let Some(d) = other {
                    max_inner = max_inner.max(d.max_iterations);
                }
                hi = mid;
                hi_demand = Some(capped_demand(&searches, total));
            }
        }
    }

    let mut bandwidths = best.bandwidths;
    let leftover = total - best.total;
    if leftover > n * problem.band_tol {
        // Move every user the same fraction of the way from its demand at
        // `lo` to its demand at `hi`, so each bandwidth sustains a rate in
        // `[lo, hi + rate_tol]` and the band is used up.
        let upper = match hi_demand {
            Some(u) => u,
            None => capped_demand(&user_demands(problem, hi)?, total),
        };
        let room: f64 = upper.iter().zip(&bandwidths).map(|(u, b)| (u - b).max(0.0)).sum();
        if room > leftover {
            let alpha = leftover / room;
            log::info!("distributing {leftover:.1} Hz toward the demand at {hi} (fraction {alpha:.4})");
            for (b, u) in bandwidths.iter_mut().zip(&upper) {
                *b += alpha * (u - *b).max(0.0);
            }
        } else {
            log::info!("spreading {leftover:.1} Hz of unused bandwidth evenly over {n} users");
            let extra = leftover / n;
            bandwidths.iter_mut().for_each(|b| *b += extra);
        }
    }
    let sustained = sustained_rates(problem, &bandwidths)?;
    Ok(AllocationResult {
        rate: lo,
        bandwidths,
        sustained_rates: sustained,
        feasible: true,
        outer_iterations: outer,
        max_inner_iterations: max_inner,
        bracket_widenings: widenings,
        initial_bracket: (v_min, v_max),
    })
}

/// Baseline: every user gets `B/N` and its own calibrated rate.
pub fn identical_bandwidth(problem: &AllocationProblem) -> Result<AllocationResult> {
    problem.validate()?;
    let rates = equal_split_rates(problem)?;
    let share = problem.total_bandwidth_hz / problem.users.len() as f64;
    let v_min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let v_max = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(AllocationResult {
        rate: v_min,
        bandwidths: vec![share; problem.users.len()],
        sustained_rates: rates,
        feasible: true,
        outer_iterations: 0,
        max_inner_iterations: 0,
        bracket_widenings: 0,
        initial_bracket: (v_min, v_max),
    })
}
