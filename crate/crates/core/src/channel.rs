//! Wireless downlink model: user placement, distance path loss, block
//! Rayleigh fading and the per-block Shannon capacity
//! `R = B log2(1 + p h l / (N0 B))`.
//!
//! Expectations over the fading gain are taken in the log-capacity variable
//! `u = ln(1 + s h)` with `s = p l / (N0 B)`. For `h ~ Exp(1)` its density is
//! `exp(u - expm1(u) / s) / s`, which stays smooth in every SNR regime,
//! including the high-SNR case where the capacity moments are dominated by
//! deep fades close to `h = 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Fading gains beyond this value carry `e^-60` of the probability mass and
/// are left out of quadrature.
const FADE_CUTOFF: f64 = 60.0;
const QUAD_REL_TOL: f64 = 1e-11;
const QUAD_MAX_PANELS: usize = 4000;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// `l = 10^(-L0/10) * rho^-n`, valid for `rho >= 1` m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLoss {
    pub reference_loss_db: f64,
    pub exponent: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        PathLoss {
            reference_loss_db: 30.0,
            exponent: 2.0,
        }
    }
}

impl PathLoss {
    pub fn gain(&self, distance_m: f64) -> Result<f64> {
        if !(distance_m >= 1.0) || !distance_m.is_finite() {
            return Err(Error::Domain(format!(
                "path loss needs distance >= 1 m, got {distance_m}"
            )));
        }
        Ok(10f64.powf(-self.reference_loss_db / 10.0) * distance_m.powf(-self.exponent))
    }
}

/// Path loss with the default 30 dB reference attenuation and exponent 2.
pub fn path_loss(distance_m: f64) -> Result<f64> {
    PathLoss::default().gain(distance_m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Fading {
    /// Unit-mean exponential power gain, i.i.d. across blocks.
    #[default]
    Rayleigh,
    /// `h = 1` in every block.
    Deterministic,
}

/// Radio parameters of one user's downlink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkProfile {
    pub bandwidth_hz: f64,
    pub power_w: f64,
    pub distance_m: f64,
    pub gain: f64,
    pub noise_psd: f64,
    pub block_s: f64,
    pub fading: Fading,
}

impl LinkProfile {
    pub fn new(
        bandwidth_hz: f64,
        power_w: f64,
        distance_m: f64,
        noise_psd: f64,
        block_s: f64,
        path_loss: &PathLoss,
    ) -> Result<Self> {
        let link = LinkProfile {
            bandwidth_hz,
            power_w,
            distance_m,
            gain: path_loss.gain(distance_m)?,
            noise_psd,
            block_s,
            fading: Fading::Rayleigh,
        };
        link.validate()?;
        Ok(link)
    }

    pub fn with_fading(mut self, fading: Fading) -> Self {
        self.fading = fading;
        self
    }

    pub fn with_bandwidth(&self, bandwidth_hz: f64) -> Self {
        LinkProfile {
            bandwidth_hz,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("bandwidth", self.bandwidth_hz),
            ("power", self.power_w),
            ("distance", self.distance_m),
            ("path gain", self.gain),
            ("noise density", self.noise_psd),
            ("block length", self.block_s),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("link {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Mean received SNR `p l / (N0 B)`.
    pub fn snr_scale(&self) -> f64 {
        self.power_w * self.gain / (self.noise_psd * self.bandwidth_hz)
    }

    pub fn capacity(&self, fade: f64) -> f64 {
        self.bandwidth_hz * (self.snr_scale() * fade).ln_1p() / std::f64::consts::LN_2
    }

    pub fn sample_fade<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.fading {
            Fading::Rayleigh => Exp1.sample(rng),
            Fading::Deterministic => 1.0,
        }
    }

    /// Draws one block's capacity in bit/s.
    pub fn sample_capacity<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.capacity(self.sample_fade(rng))
    }

    /// `E[R]` in bit/s.
    pub fn mean_capacity(&self) -> Result<f64> {
        let s = self.snr_scale();
        let mean_log = match self.fading {
            Fading::Deterministic => s.ln_1p(),
            Fading::Rayleigh => fading_expectation(s, 0.0, |u| u)?,
        };
        Ok(self.bandwidth_hz * mean_log / std::f64::consts::LN_2)
    }

    /// Exponent `a` with `e^{-theta R T} = (1 + s h)^{-a}`.
    fn moment_exponent(&self, theta: f64) -> f64 {
        theta * self.block_s * self.bandwidth_hz / std::f64::consts::LN_2
    }

    /// `E[e^{-theta R T}]`.
    pub fn neg_moment(&self, theta: f64) -> Result<f64> {
        Ok(self.log_neg_moment(theta)?.exp())
    }

    /// `ln E[e^{-theta R T}]`, accurate for both small and large `theta`.
    pub fn log_neg_moment(&self, theta: f64) -> Result<f64> {
        if !(theta >= 0.0) || !theta.is_finite() {
            return Err(Error::Domain(format!("theta must be >= 0, got {theta}")));
        }
        if theta == 0.0 {
            return Ok(0.0);
        }
        let a = self.moment_exponent(theta);
        let s = self.snr_scale();
        match self.fading {
            Fading::Deterministic => Ok(-a * s.ln_1p()),
            Fading::Rayleigh => {
                // 1 - E[e^{-a u}] first: keeps ln E precise when E is near one.
                let shortfall = fading_expectation(s, a, |u| -(-a * u).exp_m1())?;
                if shortfall <= 0.5 {
                    Ok((-shortfall).ln_1p())
                } else {
                    Ok(fading_expectation(s, a, |u| (-a * u).exp())?.ln())
                }
            }
        }
    }
}

/// `E[g(ln(1 + s h))]` for `h ~ Exp(1)`. `decay` is the rate of any
/// `e^{-decay u}` factor inside `g`; it only shapes the initial panels.
fn fading_expectation(s: f64, decay: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
    let upper = (FADE_CUTOFF * s).ln_1p();
    let inv_s = 1.0 / s;
    let log_inv_s = -s.ln();
    let density = |u: f64| (u - u.exp_m1() * inv_s + log_inv_s).exp();

    let mut breaks = vec![0.0];
    if decay > 1.0 {
        let mut x = 0.125 / decay;
        while x < upper.min(1.0) {
            breaks.push(x);
            x *= 2.0;
        }
    }
    let start = *breaks.last().unwrap();
    let steps = ((upper - start) / 2.0).ceil().max(8.0) as usize;
    let width = (upper - start) / steps as f64;
    breaks.extend((1..=steps).map(|i| start + width * i as f64));
    *breaks.last_mut().unwrap() = upper;

    let integral = quadrature::integrate(
        |u| g(u) * density(u),
        &breaks,
        QUAD_REL_TOL,
        0.0,
        QUAD_MAX_PANELS,
    )?;
    Ok(integral.value)
}

/// I.i.d. user distances, uniform over `range`, reproducible under `seed`.
pub fn place_users(n: usize, range: (f64, f64), seed: u64) -> Result<Vec<f64>> {
    let (lo, hi) = range;
    if !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
        return Err(Error::Domain(format!("invalid distance range [{lo}, {hi}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| if hi == lo { lo } else { rng.random_range(lo..hi) })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(bandwidth: f64, distance: f64, power_dbm: f64) -> LinkProfile {
        LinkProfile::new(
            bandwidth,
            dbm_to_watts(power_dbm),
            distance,
            dbm_to_watts(-130.0),
            0.1,
            &PathLoss::default(),
        )
        .unwrap()
    }

    #[test]
    fn path_loss_reference_points() {
        assert!((path_loss(1.0).unwrap() - 1e-3).abs() < 1e-18);
        assert!((path_loss(10.0).unwrap() - 1e-5).abs() < 1e-20);
        assert!(path_loss(12.0).unwrap() < path_loss(11.0).unwrap());
        assert!(matches!(path_loss(0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn capacity_edge_cases() {
        let mut l = link(1e6, 20.0, 20.0);
        // Force p h l / (N0 B) = 1 at h = 1.
        l.power_w = l.noise_psd * l.bandwidth_hz / l.gain;
        assert!((l.capacity(1.0) - 1e6).abs() < 1e-6);
        assert_eq!(l.capacity(0.0), 0.0);
    }

    #[test]
    fn placement() {
        assert!(place_users(5, (20.0, 20.0), 1).unwrap().iter().all(|&d| d == 20.0));
        assert_eq!(
            place_users(50, (15.0, 20.0), 9).unwrap(),
            place_users(50, (15.0, 20.0), 9).unwrap()
        );
        let d = place_users(10_000, (15.0, 20.0), 3).unwrap();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        assert!((mean - 17.5).abs() < 0.1, "mean {mean}");
        assert!(d.iter().all(|&x| (15.0..20.0).contains(&x)));
    }

    #[test]
    fn moment_at_zero_and_monotone() {
        let l = link(5e5, 20.0, 100.0);
        assert_eq!(l.neg_moment(0.0).unwrap(), 1.0);
        let mut prev = 1.0;
        for k in 1..20 {
            let m = l.neg_moment(1e-9 * 1.7f64.powi(k)).unwrap();
            assert!(m < prev && m > 0.0);
            prev = m;
        }
        let theta = 1e-6;
        assert!(l.with_bandwidth(1e6).neg_moment(theta).unwrap() < l.neg_moment(theta).unwrap());
    }

    #[test]
    fn deterministic_fading_moment() {
        let l = link(1e6, 17.0, 30.0).with_fading(Fading::Deterministic);
        let r = l.capacity(1.0);
        let theta = 3e-7;
        let expected = (-theta * r * l.block_s).exp();
        assert!((l.neg_moment(theta).unwrap() - expected).abs() < 1e-15);
        assert!((l.mean_capacity().unwrap() - r).abs() < 1e-6);
    }
}
