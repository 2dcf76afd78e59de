//! Synthetic small instances with guaranteed relatively complete recourse,
//! used by the randomized cross-checking suites and reproducible experiments.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::instance::{BilevelInstance, LeaderSet};
use crate::moments::{estimate_moments, AmbiguityDomain, MomentAmbiguity};
use crate::Result;

/// Size caps and support box for [`random_instance`].
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_max: usize,
    pub extra_rows_max: usize,
    pub d_max: usize,
    pub k_max: usize,
    pub box_lo: f64,
    pub box_hi: f64,
    /// Draw `C`, `V` as nonzero matrices (uncertain objectives).
    pub random_objectives: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_max: 4,
            extra_rows_max: 3,
            d_max: 3,
            k_max: 2,
            box_lo: 0.0,
            box_hi: 1.0,
            random_objectives: true,
        }
    }
}

/// Instance plus a matching ambiguity set over the box support.
#[derive(Debug, Clone)]
pub struct SynthInstance {
    pub inst: BilevelInstance,
    pub amb: MomentAmbiguity,
    /// The draws behind `(μ₀, Σ₀)`; a discrete set containing them is
    /// guaranteed nonempty (the empirical distribution is a member).
    pub moment_samples: Vec<DVector<f64>>,
    pub box_lo: f64,
    pub box_hi: f64,
}

impl SynthInstance {
    /// Discrete ambiguity set per the benchmark protocol: the in-sample
    /// points plus fresh draws, sharing the continuous moments.
    pub fn discrete_amb(
        &self,
        extra: usize,
        rng: &mut impl Rng,
    ) -> crate::Result<MomentAmbiguity> {
        let mut scenarios = self.moment_samples.clone();
        for _ in 0..extra {
            scenarios.push(self.random_xi(rng));
        }
        self.amb.with_scenarios(scenarios)
    }
}

impl SynthInstance {
    /// Uniform draw from the support box.
    pub fn random_xi(&self, rng: &mut impl Rng) -> DVector<f64> {
        DVector::from_iterator(
            self.inst.k,
            (0..self.inst.k).map(|_| rng.random_range(self.box_lo..self.box_hi)),
        )
    }

    /// Uniform draw from the leader set.
    pub fn random_x(&self, rng: &mut impl Rng) -> Result<DVector<f64>> {
        let xs = self.inst.leader_set.enumerate()?;
        Ok(xs[rng.random_range(0..xs.len())].clone())
    }
}

fn box_domain(k: usize, lo: f64, hi: f64) -> AmbiguityDomain {
    let mut w = DMatrix::zeros(2 * k, k);
    let mut h = DVector::zeros(2 * k);
    for j in 0..k {
        w[(j, j)] = 1.0;
        h[j] = lo;
        w[(k + j, j)] = -1.0;
        h[k + j] = -hi;
    }
    AmbiguityDomain::Support { w_mat: w, h }
}

/// Random bounded-recourse instance: the follower polytope carries explicit
/// box rows `-u ≤ y ≤ u`, and `b₀` is lifted so `y = 0` stays strictly
/// feasible for every leader decision and every support corner.
pub fn random_instance(rng: &mut impl Rng, cfg: &SynthConfig) -> Result<SynthInstance> {
    let n = rng.random_range(1..=cfg.n_max);
    let k = rng.random_range(1..=cfg.k_max);
    let d = rng.random_range(0..=cfg.d_max);
    let m0 = rng.random_range(0..=cfg.extra_rows_max);
    let m = m0 + 2 * n;

    let mut a = DMatrix::zeros(m, n);
    for i in 0..m0 {
        for j in 0..n {
            a[(i, j)] = rng.random_range(-1.0..1.0);
        }
    }
    for j in 0..n {
        a[(m0 + j, j)] = 1.0;
        a[(m0 + n + j, j)] = -1.0;
    }

    // B blocks touch only the random rows so the box stays deterministic.
    let mut b_mats = Vec::with_capacity(d + 1);
    let mut b_vecs = Vec::with_capacity(d + 1);
    for idx in 0..=d {
        let mut bm = DMatrix::zeros(m, k);
        for i in 0..m0 {
            for j in 0..k {
                bm[(i, j)] = rng.random_range(-0.3..0.3);
            }
        }
        let mut bv = DVector::zeros(m);
        if idx > 0 {
            for i in 0..m0 {
                bv[i] = rng.random_range(-0.5..0.5);
            }
        }
        b_mats.push(bm);
        b_vecs.push(bv);
    }

    // Lift b0 so that b_x(ξ) >= margin > 0 on every random row for all
    // binary x and all support corners, which keeps y = 0 strictly interior.
    let corners: Vec<DVector<f64>> = (0..(1u32 << k))
        .map(|mask| {
            DVector::from_iterator(
                k,
                (0..k).map(|j| if mask >> j & 1 == 1 { cfg.box_hi } else { cfg.box_lo }),
            )
        })
        .collect();
    for i in 0..m0 {
        let mut worst = f64::INFINITY;
        for xmask in 0..(1u32 << d) {
            let x: Vec<f64> = (0..d).map(|j| f64::from(xmask >> j & 1)).collect();
            for xi in &corners {
                let mut val = b_mats[0].row(i).transpose().dot(xi);
                for j in 0..d {
                    if x[j] == 1.0 {
                        val += b_mats[j + 1].row(i).transpose().dot(xi) + b_vecs[j + 1][i];
                    }
                }
                worst = worst.min(val);
            }
        }
        b_vecs[0][i] = rng.random_range(0.2..1.2) - worst.min(0.0);
    }
    let box_bound = 10.0;
    for j in 0..n {
        b_vecs[0][m0 + j] = box_bound;
        b_vecs[0][m0 + n + j] = box_bound;
    }

    let (c_mat, v_mat) = if cfg.random_objectives {
        (
            DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0)),
            DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0)),
        )
    } else {
        (DMatrix::zeros(n, k), DMatrix::zeros(n, k))
    };
    let c0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let v0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let w = DVector::from_fn(d, |_, _| rng.random_range(0.0..2.0));

    let leader_set = if d >= 2 && rng.random_bool(0.5) {
        LeaderSet::new(d, vec![(DVector::from_element(d, 1.0), (d - 1) as f64)])?
    } else {
        LeaderSet::free(d)
    };

    let inst = BilevelInstance::new(a, b_mats, b_vecs, c_mat, c0, v_mat, v0, w, leader_set)?;

    let samples: Vec<DVector<f64>> = (0..8)
        .map(|_| {
            DVector::from_iterator(k, (0..k).map(|_| rng.random_range(cfg.box_lo..cfg.box_hi)))
        })
        .collect();
    let (mu0, sigma0) = estimate_moments(&samples)?;

    let gamma1 = [0.0, 0.25, 1.0][rng.random_range(0..3)];
    let gamma2 = rng.random_range(1.0..2.0);
    let amb = MomentAmbiguity::new(
        mu0,
        sigma0,
        gamma1,
        gamma2,
        box_domain(k, cfg.box_lo, cfg.box_hi),
    )?;

    Ok(SynthInstance { inst, amb, moment_samples: samples, box_lo: cfg.box_lo, box_hi: cfg.box_hi })
}
