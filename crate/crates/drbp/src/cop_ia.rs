//! Copositive-route conservative approximation: the exact copositive
//! reformulation of the quadratic certificate row is inner-approximated by
//! `𝓗ᵀU𝓗` with `U ≥ 0` over the homogenizing cone of the support, where
//! `𝓗 = [W | −h]`. The exact copositive program is intractable and exists
//! here only as a textual rendering ([`exact_cop_description`]).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cone::{AffMat, ConeProgram, ConeProgramBuilder, LinExpr, SolveOpts, SymVar, VecVar};
use crate::engine::{Cut, CutProvider, ProviderOutcome};
use crate::instance::BilevelInstance;
use crate::ldr_base::{self, col, CertBlocks, LdrPolicy, McCormickBlocks, McCormickValues, PolicyBlocks};
use crate::linalg::{abs_sum_mat, abs_sum_vec};
use crate::moments::MomentAmbiguity;
use crate::{DrbpError, Result};

/// `𝓗 = [W | −h]`, the homogenization of the support polytope.
fn homogenized_support(w: &DMatrix<f64>, h: &DVector<f64>) -> DMatrix<f64> {
    let l = w.nrows();
    let k = w.ncols();
    let mut out = DMatrix::zeros(l, k + 1);
    out.view_mut((0, 0), (l, k)).copy_from(w);
    for i in 0..l {
        out[(i, k)] = -h[i];
    }
    out
}

fn require_full_dimensional(amb: &MomentAmbiguity) -> Result<()> {
    let checks = amb.support_checks()?;
    if !checks.full_dimensional() {
        return Err(DrbpError::Invalid(format!(
            "support must be full-dimensional for the copositive route (chebyshev radius {:.3e})",
            checks.chebyshev_radius
        )));
    }
    Ok(())
}

/// Attach the inner-approximation rows: declares `U ∈ S^l`, `U ≥ 0`, and the
/// matrix equality `[[Q − quad, ½(q − lin)], [·, r − const]] = 𝓗ᵀU𝓗`.
fn add_ia_rows(
    pb: &mut ConeProgramBuilder,
    cert: &CertBlocks,
    parts: &ldr_base::QuadParts,
    hmat: &DMatrix<f64>,
    k: usize,
) -> SymVar {
    let l = hmat.nrows();
    let u = pb.symmetric("U", l);
    pb.nonneg(&pb.syme(u), "U>=0");
    let tl = pb.syme(cert.q_mat).sub(&parts.quad);
    let tr = pb.ve(cert.q_vec).sub(&parts.lin).scale(0.5);
    let br = pb.se(cert.r).sub(&parts.constant);
    let mut lhs = AffMat::zeros(k + 1, k + 1);
    for i in 0..k {
        for j in 0..k {
            lhs.set(i, j, tl.entry(i, j).clone());
        }
        lhs.set(i, k, tr.entry(i, 0).clone());
        lhs.set(k, i, tr.entry(i, 0).clone());
    }
    lhs.set(k, k, br);
    let rhs = pb.syme(u).lmul(&hmat.transpose()).rmul(hmat);
    pb.zero(&lhs.sub(&rhs), "ia-equality");
    u
}

/// Solution of the fixed-leader inner-approximation primal.
#[derive(Debug, Clone)]
pub struct CopPrimalSolution {
    pub policy: LdrPolicy,
    /// Certificate factor: `U ≥ 0` with `re₊e₊ᵀ − 𝒬̂ = 𝓗ᵀU𝓗` at the
    /// solution.
    pub u: DMatrix<f64>,
}

/// Fixed-leader primal of the copositive inner approximation.
pub fn solve_fixed_primal(
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    x: &DVector<f64>,
) -> Result<CopPrimalSolution> {
    require_full_dimensional(amb)?;
    let (w, h) = amb.support()?;
    let (bx, bx0) = inst.assemble_bx(x)?;
    let hmat = homogenized_support(w, h);
    let mut pb = ConeProgramBuilder::new();
    let pol = ldr_base::declare_policy_blocks(&mut pb, inst, w.nrows());
    let cert = ldr_base::declare_cert_blocks(&mut pb, inst.k);
    pb.minimize(pb.se(cert.r).add(&pb.se(cert.t)));
    ldr_base::add_policy_rows(&mut pb, inst, amb, &pol)?;
    ldr_base::add_cert_rows(&mut pb, amb, &cert);
    ldr_base::add_recourse_rows_fixed(&mut pb, inst, amb, &pol, &bx, &bx0)?;
    let parts = ldr_base::quad_parts_fixed(&pb, inst, amb, &pol, &bx, &bx0)?;
    let u = add_ia_rows(&mut pb, &cert, &parts, &hmat, inst.k);
    let sol = pb
        .build()
        .solve(&SolveOpts::default())?
        .into_optimal("copositive-route fixed primal")?;
    Ok(CopPrimalSolution { policy: LdrPolicy::extract(&sol, &cert, &pol), u: sol.sym(u) })
}

/// Optimal solution of the copositive-route dual subproblem.
#[derive(Debug, Clone)]
pub struct SpCopDual {
    pub value: f64,
    pub u: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    /// Elementwise-nonnegative dual of the IA equality over the support cone.
    pub e: DMatrix<f64>,
    pub zeta: DVector<f64>,
    pub sigma: DVector<f64>,
    pub eta: DVector<f64>,
    pub mu: DVector<f64>,
    pub chi: DVector<f64>,
}

/// The copositive-route dual subproblem at `x̂`: identical to the S-lemma
/// dual except that the moment Schur block is replaced by elementwise
/// nonnegativity of `𝓗[U η; ηᵀ 1]𝓗ᵀ`.
pub fn solve_subproblem(
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    x: &DVector<f64>,
) -> Result<SpCopDual> {
    require_full_dimensional(amb)?;
    let (w, h) = amb.support()?;
    let (bx, bx0) = inst.assemble_bx(x)?;
    let (k, n, m) = (inst.k, inst.n, inst.m);
    let l = w.nrows();
    let sqg1 = amb.gamma1.sqrt();
    let shalf = amb.sigma_half();

    let mut pb = ConeProgramBuilder::new();
    let u = pb.symmetric("U", k);
    let g = pb.matrix("G", k, n);
    let hh = pb.matrix("H", k, m);
    let e = pb.symmetric("E", l);
    let zeta = pb.vector("zeta", m);
    let sigma = pb.vector("sigma", m);
    let eta = pb.vector("eta", k);
    let mu = pb.vector("mu", k);
    let chi = pb.vector("chi", n);

    pb.maximize(pb.me(g).trace_lmul(&inst.v_mat).add(&pb.ve(chi).dot(&inst.v0)));

    // -tr(CG) - chi'c0 + tr(Bx H) - sigma'bx0 >= 0
    let lhs = pb
        .me(hh)
        .trace_lmul(&bx)
        .sub(&pb.me(g).trace_lmul(&inst.c_mat))
        .sub(&pb.ve(chi).dot(&inst.c0))
        .sub(&pb.ve(sigma).dot(&bx0));
    pb.nonneg_scalar(lhs, "budget-row");

    // -WH - h sigma' >= 0
    let lhs = pb
        .me(hh)
        .lmul(w)
        .add(&pb.ve(sigma).transpose().lmul(&col(h)))
        .scale(-1.0);
    pb.nonneg(&lhs, "H-row");

    // -WGA' - h zeta' + W U Bx' + W eta bx0' >= 0
    let bxt = bx.transpose();
    let lhs = pb
        .syme(u)
        .lmul(w)
        .rmul(&bxt)
        .add(&pb.ve(eta).lmul(w).rmul(&col(&bx0).transpose()))
        .sub(&pb.me(g).lmul(w).rmul(&inst.a.transpose()))
        .sub(&pb.ve(zeta).transpose().lmul(&col(h)));
    pb.nonneg(&lhs, "support-row");

    // -zeta - A chi + Bx eta + bx0 = 0
    let lhs = pb
        .ve(eta)
        .lmul(&bx)
        .add(&AffMat::from_const_vec(&bx0))
        .sub(&pb.ve(chi).lmul(&inst.a))
        .sub(&pb.ve(zeta));
    pb.zero(&lhs, "mean-flow");

    // -HA + U C' + eta c0' = 0 and A' sigma + C eta + c0 = 0
    let lhs = pb
        .syme(u)
        .rmul(&inst.c_mat.transpose())
        .add(&pb.ve(eta).rmul(&col(&inst.c0).transpose()))
        .sub(&pb.me(hh).rmul(&inst.a));
    pb.zero(&lhs, "H-coupling");
    let lhs = pb
        .ve(sigma)
        .lmul(&inst.a.transpose())
        .add(&pb.ve(eta).lmul(&inst.c_mat))
        .add(&AffMat::from_const_vec(&inst.c0));
    pb.zero(&lhs, "sigma-coupling");

    // -U + g2 S0 + mu0 mu0' + sqrt(g1)(mu0 mu' S½ + S½ mu mu0') ⪰ 0
    let gmat = &amb.sigma0 * amb.gamma2 + &amb.mu0 * amb.mu0.transpose();
    let cross1 = pb.ve(mu).transpose().lmul(&col(&amb.mu0)).rmul(shalf);
    let cross2 = pb.ve(mu).lmul(shalf).rmul(&col(&amb.mu0).transpose());
    let lhs = AffMat::from_const(&gmat)
        .sub(&pb.syme(u))
        .add(&cross1.add(&cross2).scale(sqg1));
    pb.psd(&lhs, "second-moment-cap");

    // mu0 + sqrt(g1) S½ mu - eta = 0
    let lhs = pb
        .ve(eta)
        .sub(&AffMat::from_const_vec(&amb.mu0))
        .sub(&pb.ve(mu).lmul(shalf).scale(sqg1));
    pb.zero(&lhs, "mean-anchor");

    // W U W' - h eta' W' - W eta h' + h h' - E = 0, E >= 0
    let weta = pb.ve(eta).lmul(w); // l×1
    let hcol = col(h);
    let lhs = pb
        .syme(u)
        .lmul(w)
        .rmul(&w.transpose())
        .sub(&weta.rmul(&hcol.transpose()))
        .sub(&weta.transpose().lmul(&hcol))
        .add(&AffMat::from_const(&(&hcol * hcol.transpose())))
        .sub(&pb.syme(e));
    pb.zero(&lhs, "cone-moment");
    pb.nonneg(&pb.syme(e), "E>=0");

    pb.nonneg(&pb.ve(zeta), "zeta>=0");
    pb.nonneg(&pb.ve(sigma), "sigma>=0");
    pb.soc(LinExpr::constant(1.0), &pb.ve(mu), "mu-ball");

    let sol = pb
        .build()
        .solve(&SolveOpts::default())?
        .into_optimal("copositive-route dual subproblem")?;
    Ok(SpCopDual {
        value: sol.objective,
        u: sol.sym(u),
        g: sol.mat(g),
        h: sol.mat(hh),
        e: sol.sym(e),
        zeta: sol.vec(zeta),
        sigma: sol.vec(sigma),
        eta: sol.vec(eta),
        mu: sol.vec(mu),
        chi: sol.vec(chi),
    })
}

/// Optimality cut from the copositive-route dual; same flip structure as the
/// S-lemma cut with `½(U + Uᵀ)` in place of `U`.
pub fn make_cut(
    inst: &BilevelInstance,
    x: &DVector<f64>,
    dual: &SpCopDual,
    big_m: f64,
) -> Result<Cut> {
    let abs_u = abs_sum_mat(&dual.u);
    let abs_eta = abs_sum_vec(&dual.eta);
    let pieces: Vec<(f64, f64)> = (0..inst.d)
        .map(|i| {
            let bi = &inst.b_mats[i + 1];
            let bvi = &inst.b_vecs[i + 1];
            let beta = abs_u + abs_sum_vec(&(bi * &dual.eta + bvi)) + abs_eta;
            let kappa = (bi * &dual.h).trace() - bvi.dot(&dual.sigma);
            (beta, kappa)
        })
        .collect();
    ldr_base::assemble_flip_cut(x, dual.value, &pieces, big_m, "iacop")
}

/// Handles into the full mixed-binary model for extraction after pinning.
pub struct FullModel {
    pub program: ConeProgram,
    pub x: VecVar,
    pol: PolicyBlocks,
    cert: CertBlocks,
    mc: McCormickBlocks,
}

/// The monolithic 0-1 SDP with the IA equality in place of the S-lemma
/// block; solved by enumeration only.
pub fn build_full_model(
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    big_m: f64,
) -> Result<FullModel> {
    require_full_dimensional(amb)?;
    let (w, h) = amb.support()?;
    let hmat = homogenized_support(w, h);
    let mut pb = ConeProgramBuilder::new();
    let x = pb.binary_vector("x", inst.d);
    let pol = ldr_base::declare_policy_blocks(&mut pb, inst, w.nrows());
    let cert = ldr_base::declare_cert_blocks(&mut pb, inst.k);
    pb.minimize(
        pb.ve(x)
            .dot(&inst.w)
            .add(&pb.se(cert.r))
            .add(&pb.se(cert.t)),
    );
    ldr_base::add_policy_rows(&mut pb, inst, amb, &pol)?;
    ldr_base::add_cert_rows(&mut pb, amb, &cert);
    let x_expr = pb.ve(x);
    let mc = ldr_base::add_mccormick(&mut pb, inst, amb, &pol, &x_expr, big_m)?;
    ldr_base::add_recourse_rows_full(&mut pb, inst, amb, &pol, &mc)?;
    let parts = ldr_base::quad_parts_full(&pb, inst, amb, &pol, &mc)?;
    add_ia_rows(&mut pb, &cert, &parts, &hmat, inst.k);
    Ok(FullModel { program: pb.build(), x, pol, cert, mc })
}

/// Result of enumerating the full model over the leader set.
#[derive(Debug, Clone)]
pub struct EnumeratedSolve {
    pub x_star: DVector<f64>,
    pub value: f64,
    pub points: Vec<crate::ldr_sdp::EnumeratedPoint>,
    pub policy: LdrPolicy,
    pub mccormick: McCormickValues,
    pub mccormick_residual: f64,
}

/// Solve the full model exactly by pinning the binary block to every
/// feasible leader decision.
pub fn solve_full_by_enumeration(
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    big_m: f64,
) -> Result<EnumeratedSolve> {
    let model = build_full_model(inst, amb, big_m)?;
    let candidates = inst.leader_set.enumerate()?;
    let solved: Vec<Result<(usize, f64, crate::cone::ConeSolution)>> = candidates
        .par_iter()
        .enumerate()
        .map(|(idx, x)| {
            let pinned = model.program.pin_binary(model.x, x.as_slice())?;
            let sol = pinned
                .solve(&SolveOpts::default())?
                .into_optimal("pinned full model")?;
            Ok((idx, sol.objective, sol))
        })
        .collect();
    let mut best: Option<(usize, f64, crate::cone::ConeSolution)> = None;
    let mut points = Vec::with_capacity(candidates.len());
    for item in solved {
        let (idx, obj, sol) = item?;
        points.push(crate::ldr_sdp::EnumeratedPoint {
            x: candidates[idx].clone(),
            objective: obj,
        });
        let better = match &best {
            None => true,
            Some((_, b, _)) => obj < *b - 1e-12,
        };
        if better {
            best = Some((idx, obj, sol));
        }
    }
    let (idx, value, sol) =
        best.ok_or_else(|| DrbpError::Infeasible("no leader decision solved".into()))?;
    let x_star = candidates[idx].clone();
    let policy = LdrPolicy::extract(&sol, &model.cert, &model.pol);
    let mc_vals = McCormickValues::extract(&sol, &model.mc, inst.d);
    let (w, _) = amb.support()?;
    let residual = crate::ldr_sdp::mccormick_residual(
        inst,
        w,
        policy.lambda,
        &policy.t_mat,
        &policy.p0,
        &mc_vals,
        &x_star,
    );
    Ok(EnumeratedSolve {
        x_star,
        value,
        points,
        policy,
        mccormick: mc_vals,
        mccormick_residual: residual,
    })
}

/// Residual of the IA equality at a solved primal:
/// `‖re₊e₊ᵀ − 𝒬̂ − 𝓗ᵀU𝓗‖∞`.
pub fn ia_equality_residual(
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    x: &DVector<f64>,
    sol: &CopPrimalSolution,
) -> Result<f64> {
    let (w, h) = amb.support()?;
    let (bx, bx0) = inst.assemble_bx(x)?;
    let k = inst.k;
    let p = sol.policy.p_mat(w);
    let quad = crate::linalg::symmetrize(
        &(bx.transpose() * &p + inst.c_mat.transpose() * &sol.policy.y_mat),
    );
    let lin = (&sol.policy.p0.transpose() * &bx).transpose()
        + p.transpose() * &bx0
        + inst.c_mat.transpose() * &sol.policy.y0
        + sol.policy.y_mat.transpose() * &inst.c0;
    let mut lhs = DMatrix::zeros(k + 1, k + 1);
    lhs.view_mut((0, 0), (k, k))
        .copy_from(&(&sol.policy.q_mat - quad));
    for i in 0..k {
        let v = 0.5 * (sol.policy.q_vec[i] - lin[i]);
        lhs[(i, k)] = v;
        lhs[(k, i)] = v;
    }
    lhs[(k, k)] = sol.policy.r - bx0.dot(&sol.policy.p0) - inst.c0.dot(&sol.policy.y0);
    let hmat = homogenized_support(w, h);
    let rhs = hmat.transpose() * &sol.u * &hmat;
    Ok((lhs - rhs).abs().max())
}

/// Textual rendering of the exact copositive reformulation (documentation
/// only; the copositive cone itself is never handed to a solver).
pub fn exact_cop_description(inst: &BilevelInstance, amb: &MomentAmbiguity) -> String {
    let k = inst.k;
    let l = match amb.support() {
        Ok((w, _)) => w.nrows(),
        Err(_) => 0,
    };
    format!(
        "exact copositive reformulation (not solved):\n\
         min  w'x + r + t\n\
         s.t. r*e{kk}*e{kk}' - Qhat(x, blocks) in COP(Xi_hat)\n\
         \u{20}     Xi_hat = {{ z in R^{kk} : Hz >= 0 }},  H = [W | -h] in R^{l}x{kk}\n\
         \u{20}     moment row on t, policy rows, McCormick rows, Q psd, lambda >= 0, x binary\n\
         where COP(Xi_hat) = {{ M in S^{kk} : z'Mz >= 0 for all z in Xi_hat }};\n\
         membership testing is NP-hard, so the solver uses the inner\n\
         approximation {{ H'UH : U >= 0, U in S^{l} }} instead.",
        kk = k + 1,
        l = l,
    )
}

/// Cut provider backed by the copositive-route dual subproblem.
pub struct CopIaProvider {
    pub inst: BilevelInstance,
    pub amb: MomentAmbiguity,
    pub big_m: f64,
}

impl CutProvider for CopIaProvider {
    fn id(&self) -> &'static str {
        "iacop"
    }

    fn subproblem(&self, x: &DVector<f64>) -> Result<ProviderOutcome> {
        let dual = solve_subproblem(&self.inst, &self.amb, x)?;
        let cut = make_cut(&self.inst, x, &dual, self.big_m)?;
        Ok(ProviderOutcome { value: dual.value, cut })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::toy_e1;
    use crate::moments::AmbiguityDomain;
    use crate::oracle;

    fn thin_amb(xi: f64, width: f64) -> MomentAmbiguity {
        MomentAmbiguity::new(
            DVector::from_vec(vec![xi]),
            DMatrix::from_element(1, 1, 1e-6),
            0.0,
            1.0,
            AmbiguityDomain::Support {
                w_mat: DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
                h: DVector::from_vec(vec![xi - width, -(xi + width)]),
            },
        )
        .unwrap()
    }

    #[test]
    fn point_support_requires_full_dimension() {
        let inst = toy_e1();
        let amb = thin_amb(3.0, 0.0);
        assert!(solve_fixed_primal(&inst, &amb, &DVector::zeros(0)).is_err());
    }

    #[test]
    fn near_point_support_recovers_pessimistic_value() {
        let inst = toy_e1();
        let amb = thin_amb(3.0, 1e-4);
        let x = DVector::zeros(0);
        let primal = solve_fixed_primal(&inst, &amb, &x).unwrap();
        let dual = solve_subproblem(&inst, &amb, &x).unwrap();
        let want = oracle::pessimistic_value(&inst, &x, &DVector::from_vec(vec![3.0]))
            .unwrap()
            .pessimistic_value;
        assert!(
            (primal.policy.value - want).abs() < 1e-2,
            "primal {} vs {want}",
            primal.policy.value
        );
        assert!(
            (primal.policy.value - dual.value).abs() < 1e-5 * (1.0 + dual.value.abs()),
            "strong duality gap: {} vs {}",
            primal.policy.value,
            dual.value
        );
        let resid = ia_equality_residual(&inst, &amb, &x, &primal).unwrap();
        assert!(resid < 1e-6, "IA equality residual {resid}");
    }

    #[test]
    fn ia_dominates_sdp_route() {
        // inner approximation is weaker: value >= sdp value (within tol)
        let inst = toy_e1();
        let amb = thin_amb(3.0, 0.5);
        let x = DVector::zeros(0);
        let cop = solve_subproblem(&inst, &amb, &x).unwrap().value;
        let sdp = crate::ldr_sdp::solve_subproblem(&inst, &amb, &x).unwrap().value;
        assert!(cop >= sdp - 1e-5, "cop {cop} < sdp {sdp}");
    }

    #[test]
    fn exact_cop_renderer_mentions_cone() {
        let inst = toy_e1();
        let amb = thin_amb(3.0, 0.5);
        let s = exact_cop_description(&inst, &amb);
        assert!(s.contains("COP"));
        assert!(s.contains("NP-hard"));
    }
}
