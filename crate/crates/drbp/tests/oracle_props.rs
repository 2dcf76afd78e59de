//! Randomized properties of the pessimistic oracle: the recourse-dual
//! minimization over λ reproduces the pessimistic face value pointwise,
//! the scalar map λ ↦ Φ_λ is convex, and scaling the leader objective
//! scales the pessimistic value.

mod common;

use drbp::oracle;
use drbp::synth::{random_instance, SynthConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn min_phi_equals_pessimistic_value_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(314);
    let cfg = SynthConfig::default();
    for trial in 0..50 {
        let s = random_instance(&mut rng, &cfg).unwrap();
        let x = s.random_x(&mut rng).unwrap();
        let xi = s.random_xi(&mut rng);
        let psi = oracle::pessimistic_value(&s.inst, &x, &xi)
            .unwrap()
            .pessimistic_value;
        let lam_max = oracle::default_lambda_bracket(&s.inst, std::slice::from_ref(&xi));
        let got = oracle::min_phi_over_lambda(&s.inst, &x, &xi, lam_max).unwrap();
        assert!(
            (got.value - psi).abs() <= 1e-5 * (1.0 + psi.abs()),
            "trial {trial}: min phi {} vs pessimistic {psi}",
            got.value
        );
    }
}

#[test]
fn phi_lambda_is_convex_along_chords() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let cfg = SynthConfig::default();
    for _ in 0..12 {
        let s = random_instance(&mut rng, &cfg).unwrap();
        let x = s.random_x(&mut rng).unwrap();
        let xi = s.random_xi(&mut rng);
        let l1 = rng.random_range(0.0..2.0);
        let l3 = l1 + rng.random_range(0.5..3.0);
        let t = rng.random_range(0.1..0.9);
        let l2 = l1 + t * (l3 - l1);
        let f1 = oracle::phi_lambda(&s.inst, &x, &xi, l1).unwrap().value;
        let f2 = oracle::phi_lambda(&s.inst, &x, &xi, l2).unwrap().value;
        let f3 = oracle::phi_lambda(&s.inst, &x, &xi, l3).unwrap().value;
        let chord = (1.0 - t) * f1 + t * f3;
        assert!(
            f2 <= chord + 1e-7 * (1.0 + chord.abs()),
            "convexity violated: f({l2}) = {f2} above chord {chord}"
        );
    }
}

#[test]
fn scaling_leader_objective_scales_pessimistic_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let cfg = SynthConfig::default();
    for _ in 0..8 {
        let s = random_instance(&mut rng, &cfg).unwrap();
        let x = s.random_x(&mut rng).unwrap();
        let xi = s.random_xi(&mut rng);
        let base = oracle::pessimistic_value(&s.inst, &x, &xi).unwrap();
        let k = rng.random_range(0.5..4.0);
        let mut scaled = s.inst.clone();
        scaled.v_mat *= k;
        scaled.v0 *= k;
        let got = oracle::pessimistic_value(&scaled, &x, &xi).unwrap();
        assert!(
            (got.pessimistic_value - k * base.pessimistic_value).abs()
                <= 1e-5 * (1.0 + (k * base.pessimistic_value).abs()),
            "K={k}: {} vs {}",
            got.pessimistic_value,
            k * base.pessimistic_value
        );
        // the optimal face is unchanged, so the follower optimum agrees too
        assert!(
            (got.optimal_value - base.optimal_value).abs()
                <= 1e-6 * (1.0 + base.optimal_value.abs())
        );
    }
}

#[test]
fn outcome_ordering_and_witness_feasibility() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = SynthConfig::default();
    for _ in 0..10 {
        let s = random_instance(&mut rng, &cfg).unwrap();
        let x = s.random_x(&mut rng).unwrap();
        let xi = s.random_xi(&mut rng);
        let out = oracle::pessimistic_value(&s.inst, &x, &xi).unwrap();
        assert!(out.optimistic_value <= out.pessimistic_value + 1e-7);
        let b = s.inst.rhs_at(&x, &xi).unwrap();
        let slack = b - &s.inst.a * &out.witness;
        assert!(slack.min() > -1e-6, "witness violates Ay <= b by {}", -slack.min());
        let cy = s.inst.c_at(&xi).dot(&out.witness);
        assert!(cy <= out.optimal_value + 1e-7 * (1.0 + out.optimal_value.abs()));
    }
}
