mod common;

use common::{primary_success_oracle, random_params, secondary_success_oracle};
use ehaccess_core::link::{primary_success_prob, secondary_success_prob};
use ehaccess_core::{NoiseScaling, SystemParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn primary_closed_form_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let p = random_params(&mut rng, 6);
        let closed = primary_success_prob(&p).unwrap();
        let quad = primary_success_oracle(&p);
        assert!((closed - quad).abs() < 1e-10, "{closed} vs {quad} for {p:?}");
    }
}

#[test]
fn secondary_closed_form_matches_quadrature_in_both_modes() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let mut p = random_params(&mut rng, 6);
        for mode in [NoiseScaling::Literal, NoiseScaling::Bandwidth] {
            p.noise_scaling = mode;
            for j in 0..=p.energy_capacity {
                let closed = secondary_success_prob(&p, j).unwrap();
                let quad = secondary_success_oracle(&p, j);
                assert!((closed - quad).abs() < 1e-10, "j={j}: {closed} vs {quad}");
            }
        }
    }
}

#[test]
fn default_primary_success() {
    let quad = primary_success_oracle(&SystemParams::default());
    assert!((quad - (-0.2f64).exp()).abs() < 1e-12);
}
