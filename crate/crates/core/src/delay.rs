//! Statistical delay guarantees for a fluid queue drained by a block-fading
//! link.
//!
//! A stream of constant rate `V` meets `P{delay > budget} <= eps` whenever
//! `E[e^{-theta R T}]^budget <= eps` with `theta = -ln(eps) / (V T budget)`.
//! The largest such `V` (the calibrated rate) is the fixed point of
//! `V = -ln E[e^{-theta(V) R T}] / (theta(V) T)`.

use serde::{Deserialize, Serialize};

use crate::channel::LinkProfile;
use crate::error::{Error, Result};

/// Relative slack used when comparing quantities that are equal in exact
/// arithmetic (fixed-point identities, block counts).
const IDENTITY_TOL: f64 = 1e-9;
const RATE_BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayConstraint {
    /// Target end-to-end delay `d` in seconds.
    pub target_s: f64,
    /// Tolerated violation probability `eps`.
    pub violation_prob: f64,
    /// Cloud-to-edge delay paid by uncached requests, seconds.
    pub cloud_delay_s: f64,
    pub cached: bool,
}

impl DelayConstraint {
    pub fn new(target_s: f64, violation_prob: f64, cloud_delay_s: f64, cached: bool) -> Self {
        DelayConstraint {
            target_s,
            violation_prob,
            cloud_delay_s,
            cached,
        }
    }

    pub fn with_cached(self, cached: bool) -> Self {
        DelayConstraint { cached, ..self }
    }

    /// Wireless delay budget `floor((d - d_C * Delta) / T)` in blocks.
    pub fn effective_budget(&self, block_s: f64) -> Result<u32> {
        if !(block_s > 0.0) {
            return Err(Error::Domain(format!("block length must be positive, got {block_s}")));
        }
        if !(self.target_s >= 0.0) || !(self.cloud_delay_s >= 0.0) {
            return Err(Error::Domain("delays must be non-negative".into()));
        }
        let cloud = if self.cached { 0.0 } else { self.cloud_delay_s };
        let blocks = ((self.target_s - cloud) / block_s + IDENTITY_TOL).floor();
        if blocks < 1.0 {
            return Err(Error::Infeasible(format!(
                "delay target {} s leaves no wireless budget (cloud delay {} s, block {} s)",
                self.target_s, cloud, block_s
            )));
        }
        Ok(blocks as u32)
    }

    fn check_probability(&self) -> Result<()> {
        let eps = self.violation_prob;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Domain(format!("violation probability must be in (0,1), got {eps}")));
        }
        Ok(())
    }
}

/// `theta = -ln(eps) / (V T budget)`.
pub fn theta_from_constraint(c: &DelayConstraint, rate: f64, block_s: f64) -> Result<f64> {
    c.check_probability()?;
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::Domain(format!("coding rate must be positive, got {rate}")));
    }
    let budget = c.effective_budget(block_s)? as f64;
    Ok(-c.violation_prob.ln() / (rate * block_s * budget))
}

/// Effective capacity `-ln E[e^{-theta R T}] / (theta T)`.
pub fn max_coding_rate(link: &LinkProfile, theta: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::Domain(format!("theta must be positive, got {theta}")));
    }
    Ok(-link.log_neg_moment(theta)? / (theta * link.block_s))
}

/// `E[e^{-theta R T}]^budget` for the `theta` implied by `rate`.
///
/// Errors with [`Error::Stability`] if `rate` exceeds the effective
/// capacity at that `theta`.
pub fn dvp_bound(link: &LinkProfile, c: &DelayConstraint, rate: f64) -> Result<f64> {
    let theta = theta_from_constraint(c, rate, link.block_s)?;
    let sustainable = max_coding_rate(link, theta)?;
    if rate > sustainable * (1.0 + IDENTITY_TOL) {
        return Err(Error::Stability { rate, sustainable });
    }
    let budget = c.effective_budget(link.block_s)? as f64;
    Ok((budget * link.log_neg_moment(theta)?).exp())
}

/// Log-domain slack of the delay guarantee at `rate`: `budget * ln E - ln eps`.
/// Non-positive iff `rate` is sustainable.
pub fn guarantee_slack(link: &LinkProfile, c: &DelayConstraint, rate: f64) -> Result<f64> {
    let theta = theta_from_constraint(c, rate, link.block_s)?;
    let budget = c.effective_budget(link.block_s)? as f64;
    Ok(budget * link.log_neg_moment(theta)? - c.violation_prob.ln())
}

pub fn sustains(link: &LinkProfile, c: &DelayConstraint, rate: f64) -> Result<bool> {
    Ok(guarantee_slack(link, c, rate)? <= 0.0)
}

/// Largest coding rate the link sustains under `c`: the fixed point of
/// `V -> max_coding_rate(theta(V))`, found by bisection on `(0, E[R]]`.
pub fn calibrated_rate(link: &LinkProfile, c: &DelayConstraint) -> Result<f64> {
    c.check_probability()?;
    c.effective_budget(link.block_s)?;
    let mean = link.mean_capacity()?;
    if sustains(link, c, mean)? {
        return Ok(mean);
    }
    let (mut lo, mut hi) = (0.0, mean);
    for _ in 0..RATE_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sustains(link, c, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    if lo == 0.0 {
        return Err(Error::Infeasible("no positive rate meets the delay constraint".into()));
    }
    Ok(lo)
}
