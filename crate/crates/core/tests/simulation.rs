mod common;

use common::{random_params, random_policy};
use ehaccess_core::optimizer::enumerate_deterministic;
use ehaccess_core::sim::{simulate, PrimaryTraffic, ServiceMode};
use ehaccess_core::{evaluate, SimConfig, SystemParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(seed: u64, primary: PrimaryTraffic, service: ServiceMode) -> SimConfig {
    SimConfig {
        slots: 200_000,
        replications: 10,
        seed,
        primary,
        service,
        ..SimConfig::default()
    }
}

/// With idle slots drawn independently at rate `Π`, the simulated system is
/// exactly the one the chain describes.
#[test]
fn independent_idle_slots_match_analytics() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut misses = 0;
    let mut checks = 0;
    for k in 0..6 {
        let p = random_params(&mut rng, 4);
        let policy = random_policy(&mut rng, p.energy_capacity);
        let (chain, r) = evaluate(&p, &policy).unwrap();
        let s = simulate(&p, &policy, &config(100 + k, PrimaryTraffic::Independent, ServiceMode::Bernoulli)).unwrap();
        let hw = &s.half_width_99;
        for (a, e, h) in [(r.pi_p, s.est_pi_p, hw.pi_p), (r.mu_e, s.est_mu_e, hw.mu_e), (r.mu_s, s.est_mu_s, hw.mu_s)] {
            checks += 1;
            if (a - e).abs() > h {
                misses += 1;
            }
            assert!((a - e).abs() < 2.0 * h + 1e-9, "{a} vs {e} ± {h} for {p:?}");
        }
        for (i, (&c, (&est, &se))) in chain
            .stationary()
            .iter()
            .zip(s.state_histogram.iter().zip(&s.state_histogram_se))
            .enumerate()
        {
            assert!((c - est).abs() <= 4.0 * se + 1e-9, "state {i}: {c} vs {est} ± {se}");
        }
    }
    // 99% intervals: more than a couple of misses in 18 would be suspicious
    assert!(misses <= 2, "{misses} of {checks} outside the 99% interval");
}

#[test]
fn queue_traffic_reproduces_idle_probability() {
    let p = SystemParams::default();
    let policy = enumerate_deterministic(&p).unwrap().best_policy;
    let (_, r) = evaluate(&p, &policy).unwrap();
    let s = simulate(&p, &policy, &config(7, PrimaryTraffic::Queue, ServiceMode::Bernoulli)).unwrap();
    assert!((r.pi_p - s.est_pi_p).abs() < s.half_width_99.pi_p);
    assert!((r.mu_p - s.est_mu_p).abs() < 0.005);
}

#[test]
fn channel_draws_agree_with_bernoulli_service() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for k in 0..4 {
        let p = random_params(&mut rng, 4);
        let policy = random_policy(&mut rng, p.energy_capacity);
        let b = simulate(&p, &policy, &config(200 + k, PrimaryTraffic::Independent, ServiceMode::Bernoulli)).unwrap();
        let g = simulate(&p, &policy, &config(300 + k, PrimaryTraffic::Independent, ServiceMode::ChannelGain)).unwrap();
        let tol = |x: f64, y: f64| 1.5 * (x * x + y * y).sqrt() + 1e-9;
        assert!((b.est_mu_s - g.est_mu_s).abs() < tol(b.half_width_99.mu_s, g.half_width_99.mu_s));
        assert!((b.est_mu_e - g.est_mu_e).abs() < tol(b.half_width_99.mu_e, g.half_width_99.mu_e));
    }
}

#[test]
fn same_seed_same_stats() {
    let p = SystemParams::default();
    let policy = random_policy(&mut ChaCha8Rng::seed_from_u64(43), p.energy_capacity);
    let c = SimConfig {
        slots: 20_000,
        replications: 4,
        seed: 9,
        ..SimConfig::default()
    };
    let a = simulate(&p, &policy, &c).unwrap();
    let b = simulate(&p, &policy, &c).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let other = simulate(&p, &policy, &SimConfig { seed: 10, ..c }).unwrap();
    assert_ne!(a.est_mu_s, other.est_mu_s);
}
