//! Shared test helpers: a hand-rolled two-phase dense simplex used as the
//! independent LP reference for the conic backend, plus small builders.
//!
//! The simplex deliberately shares no code with the solver under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

const EPS: f64 = 1e-9;

/// Minimize `cᵀx` over `Ax ≤ b` with free `x`, by the textbook two-phase
/// tableau method with Bland's rule. Free variables split as `x = u − v`.
pub fn simplex_min(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> LpOutcome {
    let n = c.len();
    let m = a.len();
    if m == 0 {
        return if c.iter().all(|&ci| ci == 0.0) {
            LpOutcome::Optimal { value: 0.0, x: vec![0.0; n] }
        } else {
            LpOutcome::Unbounded
        };
    }

    // columns: u(n) | v(n) | slack(m) | artificial(per negative-rhs row)
    let mut art_cols = Vec::new();
    let base_cols = 2 * n + m;
    for (i, &bi) in b.iter().enumerate() {
        if bi < 0.0 {
            art_cols.push(i);
        }
    }
    let ncols = base_cols + art_cols.len();
    let mut t = vec![vec![0.0; ncols + 1]; m];
    let mut basis = vec![0usize; m];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * a[i][j];
            t[i][n + j] = -sign * a[i][j];
        }
        t[i][2 * n + i] = sign;
        t[i][ncols] = sign * b[i];
        if sign > 0.0 {
            basis[i] = 2 * n + i;
        } else {
            let k = art_cols.iter().position(|&r| r == i).unwrap();
            t[i][base_cols + k] = 1.0;
            basis[i] = base_cols + k;
        }
    }

    // phase 1: drive the artificials to zero
    if !art_cols.is_empty() {
        let mut cost = vec![0.0; ncols];
        for k in 0..art_cols.len() {
            cost[base_cols + k] = 1.0;
        }
        match run_simplex(&mut t, &mut basis, &cost, ncols) {
            SimplexEnd::Optimal(v) if v > 1e-7 => return LpOutcome::Infeasible,
            SimplexEnd::Optimal(_) => {}
            SimplexEnd::Unbounded => unreachable!("phase 1 is bounded below by 0"),
        }
        // pivot lingering artificials out of the basis where possible
        for i in 0..m {
            if basis[i] >= base_cols {
                if let Some(j) = (0..base_cols).find(|&j| t[i][j].abs() > EPS) {
                    pivot(&mut t, &mut basis, i, j, ncols);
                }
            }
        }
    }

    // phase 2 over original costs (artificial columns frozen out)
    let mut cost = vec![0.0; ncols];
    for j in 0..n {
        cost[j] = c[j];
        cost[n + j] = -c[j];
    }
    let frozen = base_cols;
    match run_simplex_limited(&mut t, &mut basis, &cost, ncols, frozen) {
        SimplexEnd::Optimal(v) => {
            let mut x = vec![0.0; n];
            for i in 0..m {
                if basis[i] < n {
                    x[basis[i]] += t[i][ncols];
                } else if basis[i] < 2 * n {
                    x[basis[i] - n] -= t[i][ncols];
                }
            }
            LpOutcome::Optimal { value: v, x }
        }
        SimplexEnd::Unbounded => LpOutcome::Unbounded,
    }
}

enum SimplexEnd {
    Optimal(f64),
    Unbounded,
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize, ncols: usize) {
    let piv = t[row][col];
    for j in 0..=ncols {
        t[row][j] /= piv;
    }
    for i in 0..t.len() {
        if i != row && t[i][col].abs() > 0.0 {
            let f = t[i][col];
            for j in 0..=ncols {
                t[i][j] -= f * t[row][j];
            }
        }
    }
    basis[row] = col;
}

fn run_simplex(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], ncols: usize) -> SimplexEnd {
    run_simplex_limited(t, basis, cost, ncols, ncols)
}

/// Bland's-rule simplex over columns `0..limit` (later columns frozen).
fn run_simplex_limited(
    t: &mut [Vec<f64>],
    basis: &mut [usize],
    cost: &[f64],
    ncols: usize,
    limit: usize,
) -> SimplexEnd {
    let m = t.len();
    for _ in 0..20_000 {
        // reduced costs r_j = c_j - c_B' B^-1 A_j
        let mut entering = None;
        for j in 0..limit {
            if basis.contains(&j) {
                continue;
            }
            let mut r = cost[j];
            for i in 0..m {
                r -= cost[basis[i]] * t[i][j];
            }
            if r < -EPS {
                entering = Some(j);
                break; // Bland: smallest index
            }
        }
        let Some(col) = entering else {
            let value: f64 = (0..m).map(|i| cost[basis[i]] * t[i][ncols]).sum();
            return SimplexEnd::Optimal(value);
        };
        // ratio test, Bland tie-break on the basic variable index
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if t[i][col] > EPS {
                let ratio = t[i][ncols] / t[i][col];
                let better = match leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < lr - EPS || (ratio < lr + EPS && basis[i] < basis[li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((row, _)) = leave else {
            return SimplexEnd::Unbounded;
        };
        pivot(t, basis, row, col, ncols);
    }
    panic!("simplex iteration cap hit; cycling guard failed");
}

/// Minimize `cᵀy` over `Ay ≤ b` with dense nalgebra inputs.
pub fn simplex_min_na(c: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> LpOutcome {
    let rows: Vec<Vec<f64>> = (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect();
    simplex_min(
        c.as_slice(),
        &rows,
        b.as_slice(),
    )
}

/// Box-support ambiguity helper shared by integration tests.
pub fn box_amb(
    mu0: DVector<f64>,
    sigma0: DMatrix<f64>,
    gamma1: f64,
    gamma2: f64,
    lo: f64,
    hi: f64,
) -> drbp::moments::MomentAmbiguity {
    let k = mu0.len();
    let mut w = DMatrix::zeros(2 * k, k);
    let mut h = DVector::zeros(2 * k);
    for j in 0..k {
        w[(j, j)] = 1.0;
        h[j] = lo;
        w[(k + j, j)] = -1.0;
        h[k + j] = -hi;
    }
    drbp::moments::MomentAmbiguity::new(
        mu0,
        sigma0,
        gamma1,
        gamma2,
        drbp::moments::AmbiguityDomain::Support { w_mat: w, h },
    )
    .unwrap()
}

use drbp::flp::{DemandLaw, FacilityConfig};
use rand::Rng;

/// Small random facility instance with |X| ≤ 16 for fast exhaustive checks.
pub fn small_facility(rng: &mut impl Rng, random_objectives: bool) -> FacilityConfig {
    let d = rng.random_range(4..=6usize);
    let eligible = 3usize;
    let mut l_s = vec![0u8; d];
    let mut l_a = vec![0u8; d];
    for site in l_s.iter_mut().take(eligible) {
        *site = 1;
    }
    l_a[0] = 1;
    let k = d - eligible;
    let hi = 100.0;
    let mut cap = vec![0.0; d];
    for i in 0..d {
        if l_s[i] == 1 {
            cap[i] = rng.random_range(80.0..150.0);
        }
    }
    cap[0] = hi * k as f64; // incumbent covers peak demand
    FacilityConfig {
        coords: (0..d).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect(),
        l_s,
        l_a,
        n_b: rng.random_range(1..=2),
        cap,
        w_open: vec![rng.random_range(20.0..60.0); d],
        v_unit: -5.0,
        demand_law: DemandLaw::Uniform { lo: 20.0, hi },
        random_objectives,
        rng_seed: rng.random(),
    }
}


#[cfg(test)]
mod self_checks {
    use super::*;

    #[test]
    fn simplex_solves_basic_lp() {
        // min -x - y s.t. x + y <= 3, x <= 2, y <= 2, -x <= 0, -y <= 0
        let out = simplex_min(
            &[-1.0, -1.0],
            &[
                vec![1.0, 1.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![-1.0, 0.0],
                vec![0.0, -1.0],
            ],
            &[3.0, 2.0, 2.0, 0.0, 0.0],
        );
        match out {
            LpOutcome::Optimal { value, .. } => assert!((value - -3.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn simplex_detects_infeasible() {
        let out = simplex_min(&[1.0], &[vec![1.0], vec![-1.0]], &[-2.0, 1.0]);
        assert_eq!(out, LpOutcome::Infeasible);
    }

    #[test]
    fn simplex_detects_unbounded() {
        let out = simplex_min(&[-1.0], &[vec![-1.0]], &[0.0]);
        assert_eq!(out, LpOutcome::Unbounded);
    }

    #[test]
    fn simplex_negative_rhs() {
        // min x s.t. -x <= -5  => x >= 5
        let out = simplex_min(&[1.0], &[vec![-1.0]], &[-5.0]);
        match out {
            LpOutcome::Optimal { value, x } => {
                assert!((value - 5.0).abs() < 1e-9);
                assert!((x[0] - 5.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }
}
