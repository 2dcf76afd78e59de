//! Linear-decision-rule 0-1 SDP route: the S-lemma full model with McCormick
//! linearization, its fixed-leader primal, the big-M-free dual subproblem,
//! and the closed-form optimality cut assembled from the dual solution.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cone::{AffMat, ConeProgram, ConeProgramBuilder, LinExpr, SolveOpts, VecVar};
use crate::engine::{Cut, CutProvider, ProviderOutcome};
use crate::instance::BilevelInstance;
use crate::ldr_base::{self, col, CertBlocks, McCormickBlocks, PolicyBlocks};
use crate::linalg::{abs_sum_mat, abs_sum_vec};
use crate::moments::MomentAmbiguity;
use crate::{DrbpError, Result};

pub use crate::ldr_base::{LdrPolicy, McCormickValues};

/// Solution of the fixed-leader primal SDP, carrying the affine policy and
/// the support multiplier `τ`.
#[derive(Debug, Clone)]
pub struct LdrPrimalSolution {
    pub policy: LdrPolicy,
    pub tau: DVector<f64>,
}

/// Optimal solution of the dual subproblem; all blocks are needed to
/// assemble the optimality cut.
#[derive(Debug, Clone)]
pub struct SpSdpDual {
    pub value: f64,
    pub u: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub zeta: DVector<f64>,
    pub sigma: DVector<f64>,
    pub eta: DVector<f64>,
    pub mu: DVector<f64>,
    pub chi: DVector<f64>,
}

fn psd_certificate_block(
    pb: &ConeProgramBuilder,
    cert: &CertBlocks,
    parts: &ldr_base::QuadParts,
    w: &DMatrix<f64>,
    h: &DVector<f64>,
    tau: VecVar,
    k: usize,
) -> AffMat {
    // [[Q - quad, (q - lin - W'tau)/2], [sym, r - const + tau'h]]
    let tl = pb.syme(cert.q_mat).sub(&parts.quad);
    let tr = pb
        .ve(cert.q_vec)
        .sub(&parts.lin)
        .sub(&pb.ve(tau).lmul(&w.transpose()))
        .scale(0.5);
    let br = pb
        .se(cert.r)
        .sub(&parts.constant)
        .add(&pb.ve(tau).dot(h));
    let mut block = AffMat::zeros(k + 1, k + 1);
    for i in 0..k {
        for j in 0..k {
            block.set(i, j, tl.entry(i, j).clone());
        }
        block.set(i, k, tr.entry(i, 0).clone());
        block.set(k, i, tr.entry(i, 0).clone());
    }
    block.set(k, k, br);
    block
}

/// Fixed-leader primal SDP: minimize `r + t` over the LDR blocks subject to
/// the S-lemma certificate, the robust counterparts, and the moment row.
/// Its optimum is the decision-rule upper bound on the worst-case
/// second-stage cost at `x̂`.
pub fn solve_fixed_primal(
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    x: &DVector<f64>,
) -> Result<LdrPrimalSolution> {
    let (w, h) = amb.support()?;
    let (bx, bx0) = inst.assemble_bx(x)?;
    let l = w.nrows();
    let mut pb = ConeProgramBuilder::new();
    let pol = ldr_base::declare_policy_blocks(&mut pb, inst, l);
    let cert = ldr_base::declare_cert_blocks(&mut pb, inst.k);
    let tau = pb.vector("tau", l);
    pb.minimize(pb.se(cert.r).add(&pb.se(cert.t)));
    ldr_base::add_policy_rows(&mut pb, inst, amb, &pol)?;
    ldr_base::add_cert_rows(&mut pb, amb, &cert);
    ldr_base::add_recourse_rows_fixed(&mut pb, inst, amb, &pol, &bx, &bx0)?;
    let parts = ldr_base::quad_parts_fixed(&pb, inst, amb, &pol, &bx, &bx0)?;
    let block = psd_certificate_block(&pb, &cert, &parts, w, h, tau, inst.k);
    pb.psd(&block, "certificate");
    pb.nonneg(&pb.ve(tau), "tau>=0");
    let sol = pb
        .build()
        .solve(&SolveOpts::default())?
        .into_optimal("decision-rule fixed primal")?;
    Ok(LdrPrimalSolution { policy: LdrPolicy::extract(&sol, &cert, &pol), tau: sol.vec(tau) })
}

/// The big-M-free dual subproblem at `x̂`. Equals the fixed primal by strong
/// duality; this is the program the cutting-plane loop solves per iteration.
pub fn solve_subproblem(
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    x: &DVector<f64>,
) -> Result<SpSdpDual> {
    let (w, h) = amb.support()?;
    let (bx, bx0) = inst.assemble_bx(x)?;
    let (k, n, m) = (inst.k, inst.n, inst.m);
    let sqg1 = amb.gamma1.sqrt();
    let shalf = amb.sigma_half();

    let mut pb = ConeProgramBuilder::new();
    let u = pb.symmetric("U", k);
    let g = pb.matrix("G", k, n);
    let hh = pb.matrix("H", k, m);
    let zeta = pb.vector("zeta", m);
    let sigma = pb.vector("sigma", m);
    let eta = pb.vector("eta", k);
    let mu = pb.vector("mu", k);
    let chi = pb.vector("chi", n);

    pb.maximize(pb.me(g).trace_lmul(&inst.v_mat).add(&pb.ve(chi).dot(&inst.v0)));

    // W U Bx' + W eta bx0' - W G A' - h zeta' >= 0
    let bxt = bx.transpose();
    let lhs = pb
        .syme(u)
        .lmul(w)
        .rmul(&bxt)
        .add(&pb.ve(eta).lmul(w).rmul(&col(&bx0).transpose()))
        .sub(&pb.me(g).lmul(w).rmul(&inst.a.transpose()))
        .sub(&pb.ve(zeta).transpose().lmul(&col(h)));
    pb.nonneg(&lhs, "support-row");
    pb.nonneg(&pb.ve(zeta), "zeta>=0");

    // tr(Bx H) >= tr(C G) + chi'c0 + sigma'bx0
    let lhs = pb
        .me(hh)
        .trace_lmul(&bx)
        .sub(&pb.me(g).trace_lmul(&inst.c_mat))
        .sub(&pb.ve(chi).dot(&inst.c0))
        .sub(&pb.ve(sigma).dot(&bx0));
    pb.nonneg_scalar(lhs, "budget-row");

    // Bx eta + bx0 = A chi + zeta
    let lhs = pb
        .ve(eta)
        .lmul(&bx)
        .add(&AffMat::from_const_vec(&bx0))
        .sub(&pb.ve(chi).lmul(&inst.a))
        .sub(&pb.ve(zeta));
    pb.zero(&lhs, "mean-flow");

    // -U + g2*S0 + mu0 mu0' + sqrt(g1)(mu0 mu' S½ + S½ mu mu0') ⪰ 0
    let gmat = &amb.sigma0 * amb.gamma2 + &amb.mu0 * amb.mu0.transpose();
    let cross1 = pb.ve(mu).transpose().lmul(&col(&amb.mu0)).rmul(shalf);
    let cross2 = pb.ve(mu).lmul(shalf).rmul(&col(&amb.mu0).transpose());
    let lhs = AffMat::from_const(&gmat)
        .sub(&pb.syme(u))
        .add(&cross1.add(&cross2).scale(sqg1));
    pb.psd(&lhs, "second-moment-cap");

    // eta = mu0 + sqrt(g1) S½ mu;  W eta >= h;  ||mu|| <= 1
    let lhs = pb
        .ve(eta)
        .sub(&AffMat::from_const_vec(&amb.mu0))
        .sub(&pb.ve(mu).lmul(shalf).scale(sqg1));
    pb.zero(&lhs, "mean-anchor");
    pb.nonneg(&pb.ve(eta).lmul(w).sub(&AffMat::from_const_vec(h)), "mean-in-support");
    pb.soc(LinExpr::constant(1.0), &pb.ve(mu), "mu-ball");

    // [[U, eta], [eta', 1]] ⪰ 0
    let mut block = AffMat::zeros(k + 1, k + 1);
    let ue = pb.syme(u);
    for i in 0..k {
        for j in 0..k {
            block.set(i, j, ue.entry(i, j).clone());
        }
        block.set(i, k, pb.ve(eta).entry(i, 0).clone());
        block.set(k, i, pb.ve(eta).entry(i, 0).clone());
    }
    block.set(k, k, LinExpr::constant(1.0));
    pb.psd(&block, "moment-schur");

    // W H + h sigma' <= 0, sigma >= 0
    let lhs = pb
        .me(hh)
        .lmul(w)
        .add(&pb.ve(sigma).transpose().lmul(&col(h)))
        .scale(-1.0);
    pb.nonneg(&lhs, "H-row");
    pb.nonneg(&pb.ve(sigma), "sigma>=0");

    // U C' + eta c0' = H A
    let lhs = pb
        .syme(u)
        .rmul(&inst.c_mat.transpose())
        .add(&pb.ve(eta).rmul(&col(&inst.c0).transpose()))
        .sub(&pb.me(hh).rmul(&inst.a));
    pb.zero(&lhs, "H-coupling");

    // A' sigma + C eta + c0 = 0
    let lhs = pb
        .ve(sigma)
        .lmul(&inst.a.transpose())
        .add(&pb.ve(eta).lmul(&inst.c_mat))
        .add(&AffMat::from_const_vec(&inst.c0));
    pb.zero(&lhs, "sigma-coupling");

    let sol = pb
        .build()
        .solve(&SolveOpts::default())?
        .into_optimal("decision-rule dual subproblem")?;
    Ok(SpSdpDual {
        value: sol.objective,
        u: sol.sym(u),
        g: sol.mat(g),
        h: sol.mat(hh),
        zeta: sol.vec(zeta),
        sigma: sol.vec(sigma),
        eta: sol.vec(eta),
        mu: sol.vec(mu),
        chi: sol.vec(chi),
    })
}

/// Closed-form optimality cut from the dual solution: tight at the
/// generating point, valid on the whole leader set. The per-coordinate
/// penalty combines the elementwise absolute parts of `Û`, `Bᵢη̂ + bᵢ` and
/// `η̂` with the positive/negative part of `tr(BᵢĤ) − bᵢᵀσ̂`.
pub fn make_cut(
    inst: &BilevelInstance,
    x: &DVector<f64>,
    dual: &SpSdpDual,
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
    ldr_base::assemble_flip_cut(x, dual.value, &pieces, big_m, "sdp")
}

/// Handles into the full mixed-binary model for extraction after pinning.
pub struct FullModel {
    pub program: ConeProgram,
    pub x: VecVar,
    pol: PolicyBlocks,
    cert: CertBlocks,
    mc: McCormickBlocks,
}

/// The monolithic 0-1 SDP with symbolic binary leader block and McCormick
/// rows. The backend never receives it un-pinned; it is solved by
/// enumeration over the leader set.
pub fn build_full_model(
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    big_m: f64,
) -> Result<FullModel> {
    let (w, h) = amb.support()?;
    let l = w.nrows();
    let mut pb = ConeProgramBuilder::new();
    let x = pb.binary_vector("x", inst.d);
    let pol = ldr_base::declare_policy_blocks(&mut pb, inst, l);
    let cert = ldr_base::declare_cert_blocks(&mut pb, inst.k);
    let tau = pb.vector("tau", l);
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
    let block = psd_certificate_block(&pb, &cert, &parts, w, h, tau, inst.k);
    pb.psd(&block, "certificate");
    pb.nonneg(&pb.ve(tau), "tau>=0");
    Ok(FullModel { program: pb.build(), x, pol, cert, mc })
}

/// One leader decision evaluated through the pinned full model.
#[derive(Debug, Clone)]
pub struct EnumeratedPoint {
    pub x: DVector<f64>,
    /// `wᵀx + r + t`.
    pub objective: f64,
}

/// Result of enumerating the full model over the leader set.
#[derive(Debug, Clone)]
pub struct EnumeratedSolve {
    pub x_star: DVector<f64>,
    pub value: f64,
    pub points: Vec<EnumeratedPoint>,
    pub policy: LdrPolicy,
    pub mccormick: McCormickValues,
    /// Worst violation of the linearization identities
    /// `Γᵢ = xᵢBᵢᵀTW`, `θᵢ = xᵢλ`, `ωᵢ = xᵢp₀`, `ρᵢ = xᵢ(TW)ᵀbᵢ` at the
    /// optimum; must stay within `1e-6·M`.
    pub mccormick_residual: f64,
}

pub(crate) fn mccormick_residual(
    inst: &BilevelInstance,
    w: &DMatrix<f64>,
    lambda: f64,
    t_mat: &DMatrix<f64>,
    p0: &DVector<f64>,
    mc: &McCormickValues,
    x: &DVector<f64>,
) -> f64 {
    let tw = t_mat * w;
    let mut worst: f64 = 0.0;
    for i in 0..inst.d {
        let expect = inst.b_mats[i + 1].transpose() * &tw * x[i];
        worst = worst.max((&mc.gammas[i] - expect).abs().max());
        worst = worst.max((mc.theta[i] - x[i] * lambda).abs());
        worst = worst.max((&mc.omegas[i] - p0 * x[i]).abs().max());
        let expect = tw.transpose() * &inst.b_vecs[i + 1] * x[i];
        worst = worst.max((&mc.rhos[i] - expect).abs().max());
    }
    worst
}

/// Solve the full model exactly by pinning the binary block to every
/// feasible leader decision in parallel and keeping the best.
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
        points.push(EnumeratedPoint { x: candidates[idx].clone(), objective: obj });
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
    let residual = mccormick_residual(
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

/// Cut provider backed by the decision-rule dual subproblem.
pub struct LdrSdpProvider {
    pub inst: BilevelInstance,
    pub amb: MomentAmbiguity,
    pub big_m: f64,
}

impl CutProvider for LdrSdpProvider {
    fn id(&self) -> &'static str {
        "sdp"
    }

    fn subproblem(&self, x: &DVector<f64>) -> Result<ProviderOutcome> {
        let dual = solve_subproblem(&self.inst, &self.amb, x)?;
        let cut = make_cut(&self.inst, x, &dual, self.big_m)?;
        Ok(ProviderOutcome { value: dual.value, cut })
    }
}
