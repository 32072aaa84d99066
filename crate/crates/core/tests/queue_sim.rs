use edgecast::channel::{dbm_to_watts, Fading, LinkProfile, PathLoss};
use edgecast::delay::{self, DelayConstraint};
use edgecast::queue::{simulate_queue, simulate_with, QueueOptions, CENSORED};
use proptest::prelude::*;
use rayon::prelude::*;

fn exact_opts(blocks: usize) -> QueueOptions {
    QueueOptions {
        blocks,
        warmup: 0,
        backlog_cap_blocks: 1e12,
        drain_blocks: 0,
    }
}

/// Delay of arrival block `i` straight from cumulative sums: the first `k`
/// such that everything that arrived by the end of block `i` has been
/// served by the end of block `i + k`.
fn cumulative_delays(arrival: f64, service: &[f64]) -> Vec<Option<usize>> {
    let n = service.len();
    let mut departed = vec![0.0; n + 1];
    let mut q: f64 = 0.0;
    let mut served = 0.0;
    for t in 0..n {
        let next = (q + arrival - service[t]).max(0.0);
        served += q + arrival - next;
        departed[t + 1] = served;
        q = next;
    }
    (0..n)
        .map(|i| {
            let target = arrival * (i + 1) as f64;
            (i + 1..=n)
                .find(|&t| departed[t] >= target - 1e-9 * target.max(1.0))
                .map(|t| t - i - 1)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn backlog_follows_lindley(
        arrival in 0.1f64..3.0,
        service in prop::collection::vec(0.0f64..4.0, 1..300),
    ) {
        let mut it = service.iter();
        let trace = simulate_with(arrival, 1.0, &exact_opts(service.len()), || *it.next().unwrap_or(&0.0)).unwrap();
        prop_assert_eq!(trace.backlog[0], 0.0);
        for t in 0..service.len().min(trace.backlog.len() - 1) {
            let expect = (trace.backlog[t] + arrival - service[t]).max(0.0);
            prop_assert!((trace.backlog[t + 1] - expect).abs() <= 1e-12 * (1.0 + expect));
            prop_assert!(trace.backlog[t + 1] >= 0.0);
        }
    }

    #[test]
    fn delays_match_cumulative_departures(
        arrival in 0.1f64..3.0,
        service in prop::collection::vec(0.0f64..4.0, 1..200),
    ) {
        let mut it = service.iter();
        let trace = simulate_with(arrival, 1.0, &exact_opts(service.len()), || *it.next().unwrap_or(&0.0)).unwrap();
        let reference = cumulative_delays(arrival, &service);
        for (i, d) in reference.iter().enumerate() {
            match d {
                Some(d) => prop_assert_eq!(trace.delays[i] as usize, *d),
                None => prop_assert_eq!(trace.delays[i], CENSORED),
            }
        }
    }

    #[test]
    fn more_service_never_adds_delay(
        arrival in 0.1f64..2.0,
        service in prop::collection::vec(0.0f64..3.0, 1..200),
        boost in 0.0f64..1.0,
    ) {
        let n = service.len();
        let mut a = service.iter();
        let base = simulate_with(arrival, 1.0, &exact_opts(n), || *a.next().unwrap_or(&0.0)).unwrap();
        let mut b = service.iter();
        let more = simulate_with(arrival, 1.0, &exact_opts(n), || b.next().map_or(0.0, |s| s + boost)).unwrap();
        for (x, y) in base.delays.iter().zip(&more.delays) {
            prop_assert!(y <= x);
        }
    }
}

#[test]
fn empirical_dvp_falls_with_the_budget() {
    let link = LinkProfile::new(1e5, 0.1, 50.0, 1e-16, 0.01, &PathLoss::default())
        .unwrap()
        .with_fading(Fading::Rayleigh);
    let c = DelayConstraint::new(0.5, 0.05, 0.0, true);
    let rate = delay::calibrated_rate(&link, &c).unwrap();
    let trace = simulate_queue(&link, rate, &QueueOptions::new(200_000, 1_000), 9).unwrap();
    assert!(!trace.unstable);
    let mut prev = 1.0;
    for d in 0..=60 {
        let p = trace.dvp(d).probability;
        assert!(p <= prev, "budget {d}: {p} > {prev}");
        prev = p;
    }
    assert!(trace.dvp(0).probability > trace.dvp(50).probability);
}

#[test]
fn same_seed_same_trace() {
    let link = LinkProfile::new(1e5, 0.1, 50.0, 1e-16, 0.01, &PathLoss::default()).unwrap();
    let opts = QueueOptions::new(20_000, 100);
    let a = simulate_queue(&link, 1e5, &opts, 4).unwrap();
    let b = simulate_queue(&link, 1e5, &opts, 4).unwrap();
    assert_eq!(a.delays, b.delays);
    assert_eq!(a.backlog, b.backlog);
}

/// The bound is tight near critical load, and per-run estimates are strongly
/// autocorrelated, so soundness is judged on the spread of independent
/// replicates rather than on the per-block binomial error.
#[test]
fn bound_holds_across_replicates() {
    let link = LinkProfile::new(0.25e6, dbm_to_watts(20.0), 20.0, dbm_to_watts(-130.0), 0.1, &PathLoss::default())
        .unwrap()
        .with_fading(Fading::Rayleigh);
    let c = DelayConstraint::new(1.0, 0.01, 0.0, true);
    let rate = delay::calibrated_rate(&link, &c).unwrap();
    let bound = delay::dvp_bound(&link, &c, rate).unwrap();
    let budget = c.effective_budget(link.block_s).unwrap();
    let runs: Vec<f64> = (0..16u64)
        .into_par_iter()
        .map(|seed| {
            simulate_queue(&link, rate, &QueueOptions::new(2_000_000, 10_000), 1000 + seed)
                .unwrap()
                .dvp(budget)
                .probability
        })
        .collect();
    let n = runs.len() as f64;
    let mean = runs.iter().sum::<f64>() / n;
    let sd = (runs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean <= bound + 3.0 * sd / n.sqrt(), "mean {mean} sd {sd} bound {bound}");
}
