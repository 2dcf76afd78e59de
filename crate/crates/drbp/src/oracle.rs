//! Ground-truth evaluation of follower responses: the follower LP, the
//! pessimistic/optimistic values over the optimal face, and the joint
//! recourse program `Φ_λ` whose minimum over `λ ≥ 0` reproduces the
//! pessimistic value.

use nalgebra::DVector;

use crate::cone::{AffMat, ConeProgramBuilder, SolveOpts};
use crate::instance::BilevelInstance;
use crate::{DrbpError, Result};

/// Follower LP value together with the leader-adverse and leader-favorable
/// values over the follower's optimal face `Ω(x, ξ)`.
#[derive(Debug, Clone)]
pub struct FollowerOutcome {
    /// Follower's own optimum `Q̄ = min c(ξ)ᵀy`.
    pub optimal_value: f64,
    /// `Ψ = max v(ξ)ᵀy` over the optimal face.
    pub pessimistic_value: f64,
    /// `min v(ξ)ᵀy` over the optimal face.
    pub optimistic_value: f64,
    /// Argmax of the pessimistic LP.
    pub witness: DVector<f64>,
}

/// Value and primal witnesses of the joint recourse LP `Φ_λ`.
#[derive(Debug, Clone)]
pub struct PhiLambdaValue {
    pub lambda: f64,
    pub value: f64,
    pub p: DVector<f64>,
    pub y: DVector<f64>,
}

/// Result of the scalar minimization of `λ ↦ Φ_λ`.
#[derive(Debug, Clone, Copy)]
pub struct MinPhiResult {
    pub lambda: f64,
    pub value: f64,
    /// How many times the search bracket was doubled.
    pub doublings: u32,
}

fn follower_lp(
    inst: &BilevelInstance,
    b: &DVector<f64>,
    cost: &DVector<f64>,
    extra_row: Option<(&DVector<f64>, f64)>,
    maximize: bool,
) -> Result<(f64, DVector<f64>)> {
    let mut pb = ConeProgramBuilder::new();
    let y = pb.vector("y", inst.n);
    let ye = pb.ve(y);
    let obj = ye.dot(cost);
    if maximize {
        pb.maximize(obj);
    } else {
        pb.minimize(obj);
    }
    pb.nonneg(&AffMat::from_const_vec(b).sub(&ye.lmul(&inst.a)), "Ay<=b");
    if let Some((g, rhs)) = extra_row {
        pb.nonneg_scalar(ye.dot(g).scale(-1.0).add_const(rhs), "face");
    }
    let sol = pb.build().solve(&SolveOpts::default())?.into_optimal("follower LP")?;
    Ok((sol.objective, sol.vec(y)))
}

/// Follower optimum `Q̄(x, ξ) = min c(ξ)ᵀy s.t. Ay ≤ b_x(ξ)`.
pub fn follower_value(inst: &BilevelInstance, x: &DVector<f64>, xi: &DVector<f64>) -> Result<f64> {
    let b = inst.rhs_at(x, xi)?;
    let c = inst.c_at(xi);
    follower_lp(inst, &b, &c, None, false).map(|(v, _)| v)
}

/// Pessimistic and optimistic second-stage values: extremes of `v(ξ)ᵀy` over
/// the follower's optimal face.
pub fn pessimistic_value(
    inst: &BilevelInstance,
    x: &DVector<f64>,
    xi: &DVector<f64>,
) -> Result<FollowerOutcome> {
    let b = inst.rhs_at(x, xi)?;
    let c = inst.c_at(xi);
    let v = inst.v_at(xi);
    let (q_bar, _) = follower_lp(inst, &b, &c, None, false)?;
    // Tiny slack keeps the face LP strictly feasible under backend tolerances.
    let face = (c.clone(), q_bar + 1e-9 * (1.0 + q_bar.abs()));
    let (pess, witness) = follower_lp(inst, &b, &v, Some((&face.0, face.1)), true)?;
    let (opt, _) = follower_lp(inst, &b, &v, Some((&face.0, face.1)), false)?;
    Ok(FollowerOutcome {
        optimal_value: q_bar,
        pessimistic_value: pess,
        optimistic_value: opt,
        witness,
    })
}

/// The joint recourse LP
/// `Φ_λ(x, ξ) = min b_x(ξ)ᵀp + c(ξ)ᵀy s.t. Aᵀp + λc(ξ) = v(ξ), p ≥ 0, Ay ≤ λ b_x(ξ)`.
pub fn phi_lambda(
    inst: &BilevelInstance,
    x: &DVector<f64>,
    xi: &DVector<f64>,
    lambda: f64,
) -> Result<PhiLambdaValue> {
    if lambda < 0.0 {
        return Err(DrbpError::Invalid("lambda must be nonnegative".into()));
    }
    let b = inst.rhs_at(x, xi)?;
    let c = inst.c_at(xi);
    let v = inst.v_at(xi);
    let mut pb = ConeProgramBuilder::new();
    let p = pb.vector("p", inst.m);
    let y = pb.vector("y", inst.n);
    let pe = pb.ve(p);
    let ye = pb.ve(y);
    pb.minimize(pe.dot(&b).add(&ye.dot(&c)));
    let at = inst.a.transpose();
    let resid = pe.lmul(&at).add(&AffMat::from_const_vec(&(c.clone() * lambda - &v)));
    pb.zero(&resid, "A'p+lc=v");
    pb.nonneg(&pe, "p>=0");
    pb.nonneg(&AffMat::from_const_vec(&(b * lambda)).sub(&ye.lmul(&inst.a)), "Ay<=lb");
    let sol = pb.build().solve(&SolveOpts::default())?.into_optimal("phi_lambda LP")?;
    Ok(PhiLambdaValue { lambda, value: sol.objective, p: sol.vec(p), y: sol.vec(y) })
}

/// Default search bracket for `λ`: `1 + max‖v(ξ)‖₁ / max(1e-9, min‖c(ξ)‖₁)`
/// over representative points of the domain.
pub fn default_lambda_bracket(inst: &BilevelInstance, points: &[DVector<f64>]) -> f64 {
    let mut vmax: f64 = 0.0;
    let mut cmin = f64::INFINITY;
    for xi in points {
        vmax = vmax.max(inst.v_at(xi).iter().map(|t| t.abs()).sum());
        cmin = cmin.min(inst.c_at(xi).iter().map(|t| t.abs()).sum());
    }
    if !cmin.is_finite() {
        cmin = 0.0;
    }
    1.0 + vmax / cmin.max(1e-9)
}

/// Golden-section minimization of the convex map `λ ↦ Φ_λ(x, ξ)` over
/// `[0, lam_max]`, doubling the bracket (up to a factor `2^20`) whenever the
/// minimizer lands on the right edge.
pub fn min_phi_over_lambda(
    inst: &BilevelInstance,
    x: &DVector<f64>,
    xi: &DVector<f64>,
    lam_max: f64,
) -> Result<MinPhiResult> {
    if lam_max <= 0.0 {
        return Err(DrbpError::Invalid("lam_max must be positive".into()));
    }
    let mut hi = lam_max;
    let mut doublings = 0u32;
    loop {
        let f = |l: f64| phi_lambda(inst, x, xi, l).map(|r| r.value);
        let (lam, val) = golden_section(f, 0.0, hi)?;
        if lam < 0.95 * hi {
            return Ok(MinPhiResult { lambda: lam, value: val, doublings });
        }
        if doublings >= 20 {
            return Err(DrbpError::Numerical(format!(
                "lambda bracket exhausted at {hi:.3e} after {doublings} doublings"
            )));
        }
        hi *= 2.0;
        doublings += 1;
    }
}

fn golden_section(
    mut f: impl FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
) -> Result<(f64, f64)> {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut lo = a;
    let mut hi = b;
    let mut best = (a, f(a)?);
    let fb = f(b)?;
    if fb < best.1 {
        best = (b, fb);
    }
    let mut x1 = hi - INVPHI * (hi - lo);
    let mut x2 = lo + INVPHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let tol = 1e-9 * (1.0 + b.abs());
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INVPHI * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INVPHI * (hi - lo);
            f2 = f(x2)?;
        }
        let (xc, fc) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
        if fc < best.1 {
            best = (xc, fc);
        }
    }
    Ok(best)
}

/// Minimize `λ ↦ Σ_s weight_s · Φ_λ(x, ξ^s)` over `λ ≥ 0`; used to
/// re-evaluate worst-case discrete distributions independently of the SDP
/// route.
pub fn min_expected_phi(
    inst: &BilevelInstance,
    x: &DVector<f64>,
    points: &[DVector<f64>],
    weights: &[f64],
    lam_max: f64,
) -> Result<MinPhiResult> {
    if points.len() != weights.len() {
        return Err(DrbpError::Dimension("weights/points length mismatch".into()));
    }
    let mut hi = lam_max;
    let mut doublings = 0u32;
    loop {
        let f = |l: f64| -> Result<f64> {
            let mut acc = 0.0;
            for (xi, &wt) in points.iter().zip(weights) {
                if wt.abs() > 1e-14 {
                    acc += wt * phi_lambda(inst, x, xi, l)?.value;
                }
            }
            Ok(acc)
        };
        let (lam, val) = golden_section(f, 0.0, hi)?;
        if lam < 0.95 * hi {
            return Ok(MinPhiResult { lambda: lam, value: val, doublings });
        }
        if doublings >= 20 {
            return Err(DrbpError::Numerical(format!(
                "lambda bracket exhausted at {hi:.3e} after {doublings} doublings"
            )));
        }
        hi *= 2.0;
        doublings += 1;
    }
}
