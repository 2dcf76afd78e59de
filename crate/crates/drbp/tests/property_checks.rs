//! Structural property tests over randomized inputs.

mod common;

use drbp::instance::{BilevelInstance, LeaderSet};
use drbp::moments::estimate_moments_raw;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn leader_set_strategy(d: usize) -> impl Strategy<Value = LeaderSet> {
    // up to three random constraints with small integer coefficients
    let constraint = (
        proptest::collection::vec(-2i32..=2, d),
        -1i32..=(d as i32),
    );
    proptest::collection::vec(constraint, 0..3).prop_map(move |cs| {
        LeaderSet::new(
            d,
            cs.into_iter()
                .map(|(g, rhs)| {
                    (
                        DVector::from_iterator(d, g.into_iter().map(f64::from)),
                        f64::from(rhs),
                    )
                })
                .collect(),
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enumerate_matches_brute_force(d in 1usize..=9, set in leader_set_strategy(9)) {
        let set = LeaderSet::new(
            d,
            set.constraints
                .iter()
                .map(|(g, r)| (DVector::from_iterator(d, g.iter().take(d).copied()), *r))
                .collect(),
        )
        .unwrap();
        let brute: Vec<DVector<f64>> = (0..(1u32 << d))
            .map(|mask| DVector::from_iterator(d, (0..d).map(|i| f64::from(mask >> i & 1))))
            .filter(|x| set.is_feasible(x))
            .collect();
        match set.enumerate() {
            Ok(xs) => {
                prop_assert_eq!(xs.len(), brute.len());
                for x in &xs {
                    prop_assert!(set.is_feasible(x));
                }
            }
            Err(_) => prop_assert!(brute.is_empty()),
        }
    }

    #[test]
    fn assemble_bx_is_affine(
        vals in proptest::collection::vec(-5.0f64..5.0, 2 * 3 * 2 + 3 * 3 * 2),
        mask_a in 0u32..8,
        mask_b in 0u32..8,
    ) {
        // d=2, m=3, k=2: B blocks from the value pool
        let d = 2;
        let (m, k) = (3, 2);
        let mut it = vals.into_iter();
        let b_mats: Vec<DMatrix<f64>> = (0..=d)
            .map(|_| DMatrix::from_fn(m, k, |_, _| it.next().unwrap_or(0.0)))
            .collect();
        let b_vecs: Vec<DVector<f64>> = (0..=d)
            .map(|_| DVector::from_fn(m, |_, _| it.next().unwrap_or(0.0)))
            .collect();
        let inst = BilevelInstance::new(
            DMatrix::identity(m, 3),
            b_mats,
            b_vecs,
            DMatrix::zeros(3, k),
            DVector::zeros(3),
            DMatrix::zeros(3, k),
            DVector::zeros(3),
            DVector::zeros(d),
            LeaderSet::free(d),
        )
        .unwrap();
        // disjoint-support binary vectors from the masks
        let xa = DVector::from_iterator(d, (0..d).map(|i| f64::from(mask_a >> i & 1)));
        let xb_raw = DVector::from_iterator(d, (0..d).map(|i| f64::from(mask_b >> i & 1)));
        let xb = DVector::from_iterator(d, (0..d).map(|i| xb_raw[i] * (1.0 - xa[i])));
        let sum = &xa + &xb;

        let (ba, va) = inst.assemble_bx(&xa).unwrap();
        let (bb, vb) = inst.assemble_bx(&xb).unwrap();
        let (b0, v0) = inst.assemble_bx(&DVector::zeros(d)).unwrap();
        let (bs, vs) = inst.assemble_bx(&sum).unwrap();
        prop_assert!(((ba + bb - b0) - bs).abs().max() < 1e-12);
        prop_assert!(((va + vb - v0) - vs).abs().max() < 1e-12);
    }

    #[test]
    fn raw_covariance_psd(
        flat in proptest::collection::vec(0.0f64..100.0, 3 * 6..=3 * 12),
    ) {
        let k = 3;
        let n = flat.len() / k;
        let samples: Vec<DVector<f64>> = (0..n)
            .map(|i| DVector::from_iterator(k, flat[i * k..(i + 1) * k].iter().copied()))
            .collect();
        let (_, sigma) = estimate_moments_raw(&samples).unwrap();
        prop_assert!(drbp::linalg::min_eigenvalue(&sigma) >= -1e-10 * (1.0 + sigma.abs().max()));
    }
}
