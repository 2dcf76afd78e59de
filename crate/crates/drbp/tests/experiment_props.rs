//! Experiment-harness properties: exhaustive cut validity on a wide leader
//! set, and shrinking out-of-sample variance with growing sample size.

mod common;

use drbp::engine::CutProvider;
use drbp::flp::{ambiguity_from_samples, to_bilevel, DemandLaw, FacilityConfig};
use drbp::ldr_sdp::LdrSdpProvider;
use drbp::report::out_of_sample;
use nalgebra::DVector;

/// Seven locations, six eligible, one occupied: five free candidate sites
/// give exactly 2^5 = 32 leader decisions.
fn wide_leader_config() -> FacilityConfig {
    FacilityConfig {
        coords: vec![
            (0.1, 0.2),
            (0.8, 0.1),
            (0.4, 0.6),
            (0.9, 0.8),
            (0.2, 0.9),
            (0.6, 0.3),
            (0.5, 0.95),
        ],
        l_s: vec![1, 1, 1, 1, 1, 1, 0],
        l_a: vec![1, 0, 0, 0, 0, 0, 0],
        n_b: 5,
        cap: vec![120.0, 90.0, 90.0, 90.0, 90.0, 90.0, 0.0],
        w_open: vec![25.0; 7],
        v_unit: -5.0,
        demand_law: DemandLaw::Uniform { lo: 40.0, hi: 120.0 },
        random_objectives: false,
        rng_seed: 99,
    }
}

#[test]
fn cuts_valid_on_all_32_leader_decisions() {
    let cfg = wide_leader_config();
    let inst = to_bilevel(&cfg).unwrap();
    assert_eq!(inst.leader_set.enumerate().unwrap().len(), 32);
    let amb = ambiguity_from_samples(&cfg, 8, 0.0, 1.0, cfg.rng_seed).unwrap();
    let provider = LdrSdpProvider { inst: inst.clone(), amb, big_m: 1e6 };

    let candidates = inst.leader_set.enumerate().unwrap();
    let table: Vec<(DVector<f64>, f64)> = candidates
        .iter()
        .map(|x| (x.clone(), provider.subproblem(x).unwrap().value))
        .collect();

    // cuts generated at a spread of points must underestimate everywhere
    for probe in [0usize, 7, 15, 31] {
        let out = provider.subproblem(&candidates[probe]).unwrap();
        for (x, v) in &table {
            assert!(
                out.cut.eval(x) <= v + 1e-5 * (1.0 + v.abs()),
                "cut at {probe} violates at {:?}: {} > {v}",
                x.as_slice(),
                out.cut.eval(x)
            );
        }
        // tight at the generating point
        let at = out.cut.eval(&candidates[probe]);
        assert!((at - out.value).abs() <= 1e-5 * (1.0 + out.value.abs()));
    }
}

#[test]
fn oos_replication_variance_shrinks_with_sample_size() {
    let cfg = wide_leader_config();
    let inst = to_bilevel(&cfg).unwrap();
    let mut x = DVector::zeros(7);
    x[1] = 1.0;
    x[2] = 1.0;
    let law = cfg.demand_law.clone();

    let variance = |n: usize| -> f64 {
        let rows = out_of_sample(&inst, &cfg, &x, &law, n, 8, 42).unwrap();
        let vals: Vec<f64> = rows.iter().map(|r| r.expected_profit).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64
    };
    let coarse = variance(60);
    let fine = variance(600);
    assert!(
        fine < coarse,
        "replication variance did not shrink: {fine} at n=600 vs {coarse} at n=60"
    );
}
