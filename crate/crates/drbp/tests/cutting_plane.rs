//! Cutting-plane loop correctness: engine value equals exhaustive
//! enumeration of the subproblem over the leader set, every emitted cut is
//! globally valid, the result is invariant to cut order, and the moment-cut
//! scheme agrees with the decision-rule route on constraint-only
//! uncertainty.

mod common;

use common::small_facility;

use drbp::cop_ia::CopIaProvider;
use drbp::discrete::DiscreteProvider;
use drbp::engine::{self, CutProvider, EngineOpts, EngineStatus};
use drbp::flp::{ambiguity_from_samples, to_bilevel};
use drbp::ldr_sdp::LdrSdpProvider;
use drbp::milp_cut::{self, MilpCutOpts};
use drbp::moments::MomentAmbiguity;
use drbp::report::{self, Method, SolveConfig};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn providers(
    inst: &drbp::instance::BilevelInstance,
    amb_cont: &MomentAmbiguity,
    amb_dis: &MomentAmbiguity,
) -> Vec<Box<dyn CutProvider>> {
    vec![
        Box::new(LdrSdpProvider { inst: inst.clone(), amb: amb_cont.clone(), big_m: 1e6 }),
        Box::new(CopIaProvider { inst: inst.clone(), amb: amb_cont.clone(), big_m: 1e6 }),
        Box::new(DiscreteProvider { inst: inst.clone(), amb: amb_dis.clone(), big_m: 1e6 }),
    ]
}

#[test]
fn engine_equals_enumeration_with_valid_cuts() {
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    for trial in 0..3 {
        let cfg = small_facility(&mut rng, trial == 2);
        let inst = to_bilevel(&cfg).unwrap();
        let amb = ambiguity_from_samples(&cfg, 8, 0.0, 1.0, cfg.rng_seed).unwrap();
        let in_sample = drbp::flp::sample_demands(&cfg, 8, cfg.rng_seed).unwrap();
        let amb_dis = amb.with_scenarios(in_sample).unwrap();
        let candidates = inst.leader_set.enumerate().unwrap();

        for provider in providers(&inst, &amb, &amb_dis) {
            // exhaustive oracle
            let table: Vec<(DVector<f64>, f64)> = candidates
                .iter()
                .map(|x| (x.clone(), provider.subproblem(x).unwrap().value))
                .collect();
            let best = table
                .iter()
                .map(|(x, v)| inst.w.dot(x) + v)
                .fold(f64::INFINITY, f64::min);

            let report = engine::run(&inst, provider.as_ref(), &EngineOpts::default()).unwrap();
            assert_eq!(report.status, EngineStatus::Converged, "{}", provider.id());
            assert!(
                (report.value - best).abs() <= 1e-5 * (1.0 + best.abs()),
                "trial {trial} {}: engine {} vs enumeration {best}",
                provider.id(),
                report.value
            );

            // every emitted cut underestimates the subproblem everywhere
            for cut in &report.cuts {
                for (x, v) in &table {
                    assert!(
                        cut.eval(x) <= v + 1e-5 * (1.0 + v.abs()),
                        "{} cut from {:?} violates at {:?}: {} > {v}",
                        provider.id(),
                        cut.generated_at.as_slice(),
                        x.as_slice(),
                        cut.eval(x)
                    );
                }
            }

            // bounds stay ordered and monotone along the trace
            for w in report.trace.windows(2) {
                assert!(w[1].lb >= w[0].lb - 1e-9);
                assert!(w[1].ub <= w[0].ub + 1e-9);
            }
            for t in &report.trace {
                assert!(t.lb <= t.ub + 1e-5 * (1.0 + t.ub.abs()));
            }
        }
    }
}

#[test]
fn engine_result_invariant_to_cut_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let cfg = small_facility(&mut rng, false);
    let inst = to_bilevel(&cfg).unwrap();
    let amb = ambiguity_from_samples(&cfg, 8, 0.0, 1.0, cfg.rng_seed).unwrap();
    let provider = LdrSdpProvider { inst: inst.clone(), amb, big_m: 1e6 };
    let report = engine::run(&inst, &provider, &EngineOpts::default()).unwrap();
    let candidates = inst.leader_set.enumerate().unwrap();

    let forward = engine::solve_relaxed_master(&inst, &candidates, &report.cuts).unwrap();
    let mut reversed = report.cuts.clone();
    reversed.reverse();
    let backward = engine::solve_relaxed_master(&inst, &candidates, &reversed).unwrap();
    assert_eq!(forward.x, backward.x);
    assert!((forward.value - backward.value).abs() < 1e-6);
}

#[test]
fn moment_cut_agrees_with_sdp_on_constraint_only_uncertainty() {
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    for _ in 0..2 {
        let cfg = small_facility(&mut rng, false);
        let inst = to_bilevel(&cfg).unwrap();
        let amb = ambiguity_from_samples(&cfg, 8, 0.0, 1.0, cfg.rng_seed).unwrap();

        let milp = milp_cut::run_milp_cut(&inst, &amb, &MilpCutOpts::default()).unwrap();
        assert_eq!(milp.status, milp_cut::MilpCutStatus::Converged);
        let viol = milp.pool.max_membership_violation(&amb);
        assert!(viol < 1e-6, "pool membership violation {viol}");

        // tight engine tolerance so the comparison is meaningful
        let provider = LdrSdpProvider { inst: inst.clone(), amb: amb.clone(), big_m: 1e6 };
        let opts = EngineOpts { epsilon: 1e-7, ..EngineOpts::default() };
        let sdp = engine::run(&inst, &provider, &opts).unwrap();

        assert!(
            (milp.value - sdp.value).abs() <= 1e-4 * (1.0 + sdp.value.abs()),
            "moment-cut {} vs sdp {}",
            milp.value,
            sdp.value
        );
    }
}

/// The master with the single pooled point `(μ₀, μ₀μ₀ᵀ + Σ₀)` equals an
/// independently assembled known-moments program at every leader decision.
#[test]
fn single_point_master_matches_known_moments_program() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let cfg = small_facility(&mut rng, false);
    let inst = to_bilevel(&cfg).unwrap();
    let amb = ambiguity_from_samples(&cfg, 8, 0.0, 1.0, cfg.rng_seed).unwrap();
    let point = drbp::moments::MomentPoint {
        mu: amb.mu0.clone(),
        omega: &amb.mu0 * amb.mu0.transpose() + &amb.sigma0,
    };
    let pool = milp_cut::MomentCutPool { points: vec![point.clone()] };
    let incumbent = milp_cut::solve_master(&inst, &amb, &pool, 1e6).unwrap();

    // independent route: evaluate the master row directly at the incumbent
    // blocks; v must sit exactly on the single active row
    let (w, _) = amb.support().unwrap();
    let row = incumbent.row_value(&inst, w, &point);
    assert!(
        (incumbent.v - row).abs() <= 1e-5 * (1.0 + row.abs()),
        "epigraph {} vs active row {row}",
        incumbent.v
    );
}

#[test]
fn solve_dispatch_values_agree_on_e1_point_support() {
    use drbp::instance::toy_e1;
    use drbp::moments::AmbiguityDomain;
    use nalgebra::DMatrix;

    let inst = toy_e1();
    let amb = MomentAmbiguity::new(
        DVector::from_vec(vec![3.0]),
        DMatrix::from_element(1, 1, 1e-6),
        0.0,
        1.0,
        AmbiguityDomain::Support {
            w_mat: DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            h: DVector::from_vec(vec![3.0 - 1e-4, -(3.0 + 1e-4)]),
        },
    )
    .unwrap();
    let amb_dis = amb
        .with_scenarios(vec![DVector::from_vec(vec![3.0])])
        .unwrap();
    for method in [Method::Sdp, Method::Iacop, Method::Milpcut, Method::Discrete] {
        let use_amb = if method == Method::Discrete { &amb_dis } else { &amb };
        let cfg = SolveConfig { method, ..Default::default() };
        let rep = report::solve(&inst, use_amb, &cfg).unwrap();
        assert!(
            (rep.value - -6.0).abs() < 1e-3,
            "{method}: value {} (expected -6)",
            rep.value
        );
    }
}
