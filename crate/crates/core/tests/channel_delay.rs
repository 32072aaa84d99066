use edgecast::channel::{Fading, LinkProfile, PathLoss};
use edgecast::delay::{self, DelayConstraint};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::{gamma, gamma_ur};

fn link(bandwidth_hz: f64, power_w: f64, distance_m: f64) -> LinkProfile {
    LinkProfile::new(bandwidth_hz, power_w, distance_m, 1e-16, 0.1, &PathLoss::default()).unwrap()
}

/// Upper incomplete gamma `Gamma(s, x)` for any non-integer `s < 1` via
/// `Gamma(s, x) = (Gamma(s + 1, x) - x^s e^-x) / s`.
fn upper_gamma(s: f64, x: f64) -> f64 {
    if s > 0.0 {
        gamma_ur(s, x) * gamma(s)
    } else {
        (upper_gamma(s + 1.0, x) - x.powf(s) * (-x).exp()) / s
    }
}

/// `E[(1 + s h)^-a]` for `h ~ Exp(1)`: `s^-a e^(1/s) Gamma(1 - a, 1/s)`.
fn moment_closed_form(s: f64, a: f64) -> f64 {
    s.powf(-a) * (1.0 / s).exp() * upper_gamma(1.0 - a, 1.0 / s)
}

#[test]
fn moment_matches_incomplete_gamma() {
    for (power_w, distance) in [(1e-3, 20.0), (1e-2, 15.0), (1e-4, 18.0), (1.0, 20.0)] {
        let l = link(0.5e6, power_w, distance);
        let s = l.snr_scale();
        for a in [0.05, 0.3, 0.7, 0.95, 1.4, 2.6] {
            let theta = a * std::f64::consts::LN_2 / (l.block_s * l.bandwidth_hz);
            let got = l.neg_moment(theta).unwrap();
            let want = moment_closed_form(s, a);
            assert!(
                ((got - want) / want).abs() < 1e-8,
                "s={s} a={a}: quadrature {got} vs closed form {want}"
            );
        }
    }
}

fn monte_carlo(l: &LinkProfile, n: usize, seed: u64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..n {
        let v = f(l.sample_capacity(&mut rng));
        sum += v;
        sq += v * v;
    }
    let mean = sum / n as f64;
    let var = (sq / n as f64 - mean * mean).max(0.0);
    (mean, (var / n as f64).sqrt())
}

#[test]
fn mean_capacity_matches_monte_carlo() {
    for (power_w, distance) in [(1e-3, 20.0), (1e7, 20.0)] {
        let l = link(0.5e6, power_w, distance);
        let exact = l.mean_capacity().unwrap();
        let (mc, se) = monte_carlo(&l, 1_000_000, 7, |r| r);
        assert!((mc - exact).abs() <= 3.0 * se, "{mc} vs {exact} (se {se})");
        assert!(((mc - exact) / exact).abs() < 5e-3);
    }
}

#[test]
fn effective_capacity_matches_monte_carlo_on_theta_grid() {
    let l = link(0.5e6, 1e-3, 20.0);
    let mean = l.mean_capacity().unwrap();
    let mut previous = f64::INFINITY;
    for theta in [1e-8, 1e-7, 1e-6, 3e-6, 1e-5, 3e-5] {
        let t = l.block_s;
        let (m, se) = monte_carlo(&l, 1_000_000, 11, |r| (-theta * r * t).exp());
        let v = delay::max_coding_rate(&l, theta).unwrap();
        let mc_v = -m.ln() / (theta * t);
        // Delta method: d(-ln m / theta T) = dm / (m theta T).
        let mc_se = se / (m * theta * t);
        assert!((v - mc_v).abs() <= 3.0 * mc_se + 1e-9 * v, "theta {theta}: {v} vs {mc_v}");
        assert!(v <= previous * (1.0 + 1e-12), "not monotone at theta {theta}");
        assert!(v < mean * (1.0 + 1e-9));
        previous = v;
    }
}

#[test]
fn deterministic_channel_has_no_delay_penalty() {
    let l = link(1e6, 1e-3, 15.0).with_fading(Fading::Deterministic);
    let r = l.capacity(1.0);
    for (d, eps) in [(0.2, 1e-3), (1.0, 1e-1), (0.5, 1e-6)] {
        let c = DelayConstraint::new(d, eps, 0.1, true);
        let v = delay::calibrated_rate(&l, &c).unwrap();
        assert!(((v - r) / r).abs() < 1e-9, "{v} vs {r}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn calibrated_rate_meets_bound(
        bw in 1e5f64..5e7,
        power_dbm in -20.0f64..40.0,
        dist in 10.0f64..50.0,
        budget in 1u32..40,
        log_eps in -8.0f64..-0.5,
    ) {
        let l = link(bw, edgecast::channel::dbm_to_watts(power_dbm), dist);
        let c = DelayConstraint::new(0.1 * f64::from(budget), 10f64.powf(log_eps), 0.1, true);
        let v = delay::calibrated_rate(&l, &c).unwrap();
        let bound = delay::dvp_bound(&l, &c, v).unwrap();
        prop_assert!((bound - c.violation_prob).abs() <= 1e-9 * c.violation_prob.max(1e-3));
        prop_assert!(v > 0.0 && v < l.mean_capacity().unwrap() * (1.0 + 1e-9));
    }

    #[test]
    fn rate_grows_with_budget_and_tolerance(
        budget in 1u32..30,
        log_eps in -6.0f64..-1.0,
    ) {
        let l = link(0.5e6, 1e-3, 20.0);
        let rate = |b: u32, e: f64| delay::calibrated_rate(&l, &DelayConstraint::new(0.1 * f64::from(b), e, 0.1, true)).unwrap();
        let eps = 10f64.powf(log_eps);
        let base = rate(budget, eps);
        prop_assert!(rate(budget + 1, eps) >= base * (1.0 - 1e-12));
        prop_assert!(rate(budget, eps * 2.0) >= base * (1.0 - 1e-12));
    }

    #[test]
    fn theta_scales_inversely(v in 1e3f64..1e9, budget in 1u32..50, log_eps in -9.0f64..-0.1) {
        let eps = 10f64.powf(log_eps);
        let c1 = DelayConstraint::new(0.1 * f64::from(budget), eps, 0.1, true);
        let c2 = DelayConstraint::new(0.2 * f64::from(budget), eps, 0.1, true);
        let t1 = delay::theta_from_constraint(&c1, v, 0.1).unwrap();
        let t2 = delay::theta_from_constraint(&c2, v, 0.1).unwrap();
        prop_assert!(((t1 / t2) - 2.0).abs() < 1e-9);
        prop_assert!(delay::theta_from_constraint(&c1, 2.0 * v, 0.1).unwrap() < t1);
    }
}
