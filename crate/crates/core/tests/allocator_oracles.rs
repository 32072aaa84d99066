mod common;

use common::*;
use edgecast::allocator::{self, min_bandwidth_for_rate};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn matches_grid_oracle_on_heterogeneous_users() {
    let p = allocation_problem(&[12.0, 25.0, 40.0], &[true, false, true], 3e6);
    let r = allocator::double_bisection(&p).unwrap();
    let oracle = grid_oracle(&p, 1000, 10_000);
    assert!(((r.rate - oracle) / oracle).abs() < 0.01, "{} vs oracle {oracle}", r.rate);
    assert!(r.rate >= oracle * (1.0 - 1e-3));
}

#[test]
fn residuals_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..8 {
        let n = rng.random_range(2..7);
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(10.0..60.0)).collect();
        let c: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let total = rng.random_range(1e6..2e7);
        let p = allocation_problem(&d, &c, total);
        let r = allocator::double_bisection(&p).unwrap();
        let used: f64 = r.bandwidths.iter().sum();
        assert!(used <= total * (1.0 + 1e-12));
        assert!(total - used <= n as f64 * p.band_tol, "left {} Hz", total - used);
        assert!(r.max_rate() - r.min_rate() <= 2.0 * p.rate_tol, "spread {}", r.max_rate() - r.min_rate());
        assert!(r.min_rate() >= r.rate - p.rate_tol);
        let ib = allocator::identical_bandwidth(&p).unwrap();
        assert!(r.min_rate() >= ib.min_rate() - p.rate_tol);
    }
}

#[test]
fn inner_search_brackets_the_minimum() {
    let p = allocation_problem(&[20.0], &[true], 5e6);
    let u = &p.users[0];
    let target = p.user_rate(u, 2e6).unwrap();
    let s = min_bandwidth_for_rate(&p, u, target, 5e6).unwrap().unwrap();
    assert!(p.user_rate(u, s.bandwidth_hz).unwrap() >= target);
    assert!(s.bandwidth_hz - 2e6 <= p.band_tol + 1.0);
    assert!(p.user_rate(u, s.bandwidth_hz - p.band_tol).unwrap() < target + p.rate_tol);
    assert!(min_bandwidth_for_rate(&p, u, p.user_rate(u, 5e6).unwrap() * 1.01, 5e6).unwrap().is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn more_bandwidth_never_lowers_the_rate(
        d in prop::collection::vec(10.0f64..50.0, 2..5),
        total in 1e6f64..1e7,
    ) {
        let cached = vec![true; d.len()];
        let a = allocator::double_bisection(&allocation_problem(&d, &cached, total)).unwrap();
        let b = allocator::double_bisection(&allocation_problem(&d, &cached, total * 1.5)).unwrap();
        prop_assert!(b.rate >= a.rate - 1e3);
    }

    #[test]
    fn caching_never_lowers_the_rate(
        d in prop::collection::vec(10.0f64..50.0, 2..5),
        flip in 0usize..5,
    ) {
        let mut cached = vec![false; d.len()];
        let none = allocator::double_bisection(&allocation_problem(&d, &cached, 4e6)).unwrap();
        cached[flip % d.len()] = true;
        let some = allocator::double_bisection(&allocation_problem(&d, &cached, 4e6)).unwrap();
        prop_assert!(some.rate >= none.rate - 1e3);
    }

    #[test]
    fn symmetric_users_split_evenly(n in 2usize..8, d in 10.0f64..50.0, total in 1e6f64..2e7) {
        let p = allocation_problem(&vec![d; n], &vec![true; n], total);
        let r = allocator::double_bisection(&p).unwrap();
        for b in &r.bandwidths {
            prop_assert!((b - total / n as f64).abs() <= p.band_tol);
        }
    }
}
