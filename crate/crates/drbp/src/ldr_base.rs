//! Shared machinery for the linear-decision-rule models: decision blocks,
//! robust-counterpart rows, the moment epigraph row, McCormick
//! linearization, and the quadratic certificate pieces used by both the
//! S-lemma and the copositive-route formulations.
//!
//! Recourse policies are affine: `y(ξ) = Yξ + y₀` and `p(ξ) = TWξ + p₀`
//! with `T ≥ 0` and `Th + p₀ ≥ 0` enforcing `p(ξ) ≥ 0` on the support.

use nalgebra::{DMatrix, DVector};

use crate::cone::{
    AffMat, ConeProgramBuilder, ConeSolution, LinExpr, MatVar, ScalarVar, SymVar, VecVar,
};
use crate::engine::Cut;
use crate::instance::BilevelInstance;
use crate::linalg::{neg, pos};
use crate::moments::MomentAmbiguity;
use crate::Result;

/// Handles to the affine-policy decision blocks (`λ`, `Y`, `y₀`, `T`, `p₀`,
/// `Λ`), shared by every LDR formulation including the moment-cut master.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PolicyBlocks {
    pub lambda: ScalarVar,
    pub y_mat: MatVar,
    pub y0: VecVar,
    pub t_mat: MatVar,
    pub p0: VecVar,
    pub cap_lambda: MatVar,
}

/// Handles to the moment-certificate blocks (`Q`, `q`, `r`, `t`) used by the
/// SDP and copositive routes.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CertBlocks {
    pub q_mat: SymVar,
    pub q_vec: VecVar,
    pub r: ScalarVar,
    pub t: ScalarVar,
}

/// Multiply a scalar expression by a constant matrix.
pub(crate) fn smul(e: &LinExpr, c: &DMatrix<f64>) -> AffMat {
    AffMat::scaled_const(c, e)
}

pub(crate) fn smul_vec(e: &LinExpr, c: &DVector<f64>) -> AffMat {
    AffMat::scaled_const_vec(c, e)
}

pub(crate) fn col(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

pub(crate) fn declare_policy_blocks(
    pb: &mut ConeProgramBuilder,
    inst: &BilevelInstance,
    l: usize,
) -> PolicyBlocks {
    PolicyBlocks {
        lambda: pb.scalar("lambda"),
        y_mat: pb.matrix("Y", inst.n, inst.k),
        y0: pb.vector("y0", inst.n),
        t_mat: pb.matrix("T", inst.m, l),
        p0: pb.vector("p0", inst.m),
        cap_lambda: pb.matrix("Lambda", inst.m, l),
    }
}

pub(crate) fn declare_cert_blocks(pb: &mut ConeProgramBuilder, k: usize) -> CertBlocks {
    CertBlocks {
        q_mat: pb.symmetric("Q", k),
        q_vec: pb.vector("q", k),
        r: pb.scalar("r"),
        t: pb.scalar("t"),
    }
}

/// Dual-policy robust counterpart and signs:
/// `AᵀTW + λC = V`, `Aᵀp₀ + λc₀ = v₀`, `Th + p₀ ≥ 0`, `T ≥ 0`, `Λ ≥ 0`,
/// `λ ≥ 0`.
pub(crate) fn add_policy_rows(
    pb: &mut ConeProgramBuilder,
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    pol: &PolicyBlocks,
) -> Result<()> {
    let (w, h) = amb.support()?;
    let at = inst.a.transpose();

    let lhs = pb
        .me(pol.t_mat)
        .lmul(&at)
        .rmul(w)
        .add(&smul(&pb.se(pol.lambda), &inst.c_mat))
        .sub(&AffMat::from_const(&inst.v_mat));
    pb.zero(&lhs, "A'TW+lC=V");

    let lhs = pb
        .ve(pol.p0)
        .lmul(&at)
        .add(&smul_vec(&pb.se(pol.lambda), &inst.c0))
        .sub(&AffMat::from_const_vec(&inst.v0));
    pb.zero(&lhs, "A'p0+lc0=v0");

    let th = pb.me(pol.t_mat).rmul(&col(h)).add(&pb.ve(pol.p0));
    pb.nonneg(&th, "Th+p0>=0");
    pb.nonneg(&pb.me(pol.t_mat), "T>=0");
    pb.nonneg(&pb.me(pol.cap_lambda), "Lambda>=0");
    pb.nonneg_scalar(pb.se(pol.lambda), "lambda>=0");
    Ok(())
}

/// Moment certificate rows: `Q ⪰ 0` and
/// `t ≥ ⟨γ₂Σ₀ + μ₀μ₀ᵀ, Q⟩ + μ₀ᵀq + √γ₁ ‖Σ₀^{1/2}(q + 2Qμ₀)‖`.
pub(crate) fn add_cert_rows(
    pb: &mut ConeProgramBuilder,
    amb: &MomentAmbiguity,
    cert: &CertBlocks,
) {
    let gmat = &amb.sigma0 * amb.gamma2 + &amb.mu0 * amb.mu0.transpose();
    let lin = pb
        .syme(cert.q_mat)
        .trace_lmul(&gmat)
        .add(&pb.ve(cert.q_vec).dot(&amb.mu0));
    let tpart = pb.se(cert.t).sub(&lin);
    if amb.gamma1 == 0.0 {
        pb.nonneg_scalar(tpart, "t-row");
    } else {
        let inner = pb
            .ve(cert.q_vec)
            .add(&pb.syme(cert.q_mat).rmul(&col(&amb.mu0)).scale(2.0))
            .lmul(amb.sigma_half())
            .scale(amb.gamma1.sqrt());
        pb.soc(tpart, &inner, "t-row");
    }
    pb.psd(&pb.syme(cert.q_mat), "Q-psd");
}

/// Primal-policy robust counterpart at a fixed leader decision:
/// `AY + ΛW = λB_x`, `Λh − Ay₀ + λb_{x0} ≥ 0`.
pub(crate) fn add_recourse_rows_fixed(
    pb: &mut ConeProgramBuilder,
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    pol: &PolicyBlocks,
    bx: &DMatrix<f64>,
    bx0: &DVector<f64>,
) -> Result<()> {
    let (w, h) = amb.support()?;
    let lhs = pb
        .me(pol.y_mat)
        .lmul(&inst.a)
        .add(&pb.me(pol.cap_lambda).rmul(w))
        .sub(&smul(&pb.se(pol.lambda), bx));
    pb.zero(&lhs, "AY+LW=lBx");
    let lhs = pb
        .me(pol.cap_lambda)
        .rmul(&col(h))
        .sub(&pb.ve(pol.y0).lmul(&inst.a))
        .add(&smul_vec(&pb.se(pol.lambda), bx0));
    pb.nonneg(&lhs, "Lh-Ay0+lbx0>=0");
    Ok(())
}

/// McCormick linearization blocks: `Γᵢ = xᵢ·BᵢᵀTW`, `θᵢ = xᵢλ`,
/// `ωᵢ = xᵢp₀`, `ρᵢ = xᵢ·(TW)ᵀbᵢ`.
#[derive(Debug, Clone)]
pub(crate) struct McCormickBlocks {
    pub gammas: Vec<MatVar>,
    pub theta: Option<VecVar>,
    pub omegas: Vec<VecVar>,
    pub rhos: Vec<VecVar>,
}

/// Numeric values of the McCormick blocks in a solved model.
#[derive(Debug, Clone)]
pub struct McCormickValues {
    pub gammas: Vec<DMatrix<f64>>,
    pub theta: DVector<f64>,
    pub omegas: Vec<DVector<f64>>,
    pub rhos: Vec<DVector<f64>>,
}

impl McCormickValues {
    pub(crate) fn extract(sol: &ConeSolution, mc: &McCormickBlocks, d: usize) -> McCormickValues {
        McCormickValues {
            gammas: mc.gammas.iter().map(|g| sol.mat(*g)).collect(),
            theta: mc
                .theta
                .map(|t| sol.vec(t))
                .unwrap_or_else(|| DVector::zeros(d)),
            omegas: mc.omegas.iter().map(|o| sol.vec(*o)).collect(),
            rhos: mc.rhos.iter().map(|r| sol.vec(*r)).collect(),
        }
    }
}

/// Big-M McCormick rows tying the bilinear blocks to `x` (symbolic binary
/// block or pinned constants, passed as a `d×1` expression column).
pub(crate) fn add_mccormick(
    pb: &mut ConeProgramBuilder,
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    pol: &PolicyBlocks,
    x_expr: &AffMat,
    big_m: f64,
) -> Result<McCormickBlocks> {
    let (w, _) = amb.support()?;
    let d = inst.d;
    let theta = if d > 0 { Some(pb.vector("theta", d)) } else { None };
    let mut gammas = Vec::with_capacity(d);
    let mut omegas = Vec::with_capacity(d);
    let mut rhos = Vec::with_capacity(d);
    for i in 0..d {
        gammas.push(pb.matrix(&format!("Gamma{i}"), inst.k, inst.k));
        omegas.push(pb.vector(&format!("omega{i}"), inst.m));
        rhos.push(pb.vector(&format!("rho{i}"), inst.k));
    }

    let band = |pb: &mut ConeProgramBuilder,
                val: &AffMat,
                center: &AffMat,
                slack: &AffMat,
                tag: &str| {
        pb.nonneg(&center.add(slack).sub(val), &format!("{tag}-ub"));
        pb.nonneg(&val.sub(center).add(slack), &format!("{tag}-lb"));
    };

    for i in 0..d {
        let xi = x_expr.entry(i, 0).clone();
        let one_minus_m = xi.scale(-big_m).add_const(big_m); // (1-x_i)M
        let x_m = xi.scale(big_m); // x_i M

        // Γ_i vs B_i'TW
        let center = pb
            .me(pol.t_mat)
            .rmul(w)
            .lmul(&inst.b_mats[i + 1].transpose());
        let val = pb.me(gammas[i]);
        let ones = DMatrix::from_element(inst.k, inst.k, 1.0);
        band(pb, &val, &center, &smul(&one_minus_m, &ones), &format!("mc-gamma{i}"));
        band(pb, &val, &AffMat::zeros(inst.k, inst.k), &smul(&x_m, &ones), &format!("mc-gamma0{i}"));

        // θ_i vs λ
        let th = pb.ve(theta.unwrap()).entry(i, 0).clone();
        pb.nonneg_scalar(x_m.sub(&th), &format!("mc-theta{i}-ub"));
        pb.nonneg_scalar(
            th.sub(&pb.se(pol.lambda)).add(&one_minus_m),
            &format!("mc-theta{i}-lb"),
        );
        pb.nonneg_scalar(th.clone(), &format!("mc-theta{i}-sign"));
        pb.nonneg_scalar(pb.se(pol.lambda).sub(&th), &format!("mc-theta{i}-cap"));

        // ω_i vs p0
        let ones_m = DMatrix::from_element(inst.m, 1, 1.0);
        let val = pb.ve(omegas[i]);
        band(pb, &val, &pb.ve(pol.p0), &smul(&one_minus_m, &ones_m), &format!("mc-omega{i}"));
        band(pb, &val, &AffMat::zeros(inst.m, 1), &smul(&x_m, &ones_m), &format!("mc-omega0{i}"));

        // ρ_i vs (TW)'b_i
        let ones_k = DMatrix::from_element(inst.k, 1, 1.0);
        let center = pb
            .me(pol.t_mat)
            .rmul(w)
            .transpose()
            .rmul(&col(&inst.b_vecs[i + 1]));
        let val = pb.ve(rhos[i]);
        band(pb, &val, &center, &smul(&one_minus_m, &ones_k), &format!("mc-rho{i}"));
        band(pb, &val, &AffMat::zeros(inst.k, 1), &smul(&x_m, &ones_k), &format!("mc-rho0{i}"));
    }

    Ok(McCormickBlocks { gammas, theta, omegas, rhos })
}

/// Primal-policy robust counterpart with linearized leader coupling:
/// `AY + ΛW = Σθᵢ Bᵢ + λB₀`, `Λh − Ay₀ + Σθᵢ bᵢ + λb₀ ≥ 0`.
pub(crate) fn add_recourse_rows_full(
    pb: &mut ConeProgramBuilder,
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    pol: &PolicyBlocks,
    mc: &McCormickBlocks,
) -> Result<()> {
    let (w, h) = amb.support()?;
    let mut rhs_mat = smul(&pb.se(pol.lambda), &inst.b_mats[0]);
    let mut rhs_vec = smul_vec(&pb.se(pol.lambda), &inst.b_vecs[0]);
    if let Some(theta) = mc.theta {
        for i in 0..inst.d {
            let th = pb.ve(theta).entry(i, 0).clone();
            rhs_mat = rhs_mat.add(&smul(&th, &inst.b_mats[i + 1]));
            rhs_vec = rhs_vec.add(&smul_vec(&th, &inst.b_vecs[i + 1]));
        }
    }
    let lhs = pb
        .me(pol.y_mat)
        .lmul(&inst.a)
        .add(&pb.me(pol.cap_lambda).rmul(w))
        .sub(&rhs_mat);
    pb.zero(&lhs, "AY+LW=sum");
    let lhs = pb
        .me(pol.cap_lambda)
        .rmul(&col(h))
        .sub(&pb.ve(pol.y0).lmul(&inst.a))
        .add(&rhs_vec);
    pb.nonneg(&lhs, "Lh-Ay0+sum>=0");
    Ok(())
}

/// The three pieces of the quadratic certificate row: a `k×k` matrix, a
/// `k`-vector, and a scalar such that the semi-infinite row reads
/// `r ≥ ξᵀ(quad − Q)ξ + (lin − q)ᵀξ + constant` over the support.
pub(crate) struct QuadParts {
    pub quad: AffMat,
    pub lin: AffMat,
    pub constant: LinExpr,
}

/// Certificate pieces at a fixed leader decision with `P = TW`.
pub(crate) fn quad_parts_fixed(
    pb: &ConeProgramBuilder,
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    pol: &PolicyBlocks,
    bx: &DMatrix<f64>,
    bx0: &DVector<f64>,
) -> Result<QuadParts> {
    let (w, _) = amb.support()?;
    let p = pb.me(pol.t_mat).rmul(w); // P = TW, m×k
    let bxt = bx.transpose();
    let quad = p
        .lmul(&bxt)
        .add(&pb.me(pol.y_mat).lmul(&inst.c_mat.transpose()))
        .symmetrized();
    let lin = pb
        .ve(pol.p0)
        .lmul(&bxt)
        .add(&p.transpose().rmul(&col(bx0)))
        .add(&pb.ve(pol.y0).lmul(&inst.c_mat.transpose()))
        .add(&pb.me(pol.y_mat).transpose().rmul(&col(&inst.c0)));
    let constant = pb.ve(pol.p0).dot(bx0).add(&pb.ve(pol.y0).dot(&inst.c0));
    Ok(QuadParts { quad, lin, constant })
}

/// Certificate pieces with linearized leader coupling, using the McCormick
/// blocks.
pub(crate) fn quad_parts_full(
    pb: &ConeProgramBuilder,
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    pol: &PolicyBlocks,
    mc: &McCormickBlocks,
) -> Result<QuadParts> {
    let (w, _) = amb.support()?;
    let tw = pb.me(pol.t_mat).rmul(w);
    let mut quad = tw
        .lmul(&inst.b_mats[0].transpose())
        .add(&pb.me(pol.y_mat).lmul(&inst.c_mat.transpose()));
    for g in &mc.gammas {
        quad = quad.add(&pb.me(*g));
    }
    let quad = quad.symmetrized();

    let mut lin = pb
        .ve(pol.p0)
        .lmul(&inst.b_mats[0].transpose())
        .add(&tw.transpose().rmul(&col(&inst.b_vecs[0])))
        .add(&pb.ve(pol.y0).lmul(&inst.c_mat.transpose()))
        .add(&pb.me(pol.y_mat).transpose().rmul(&col(&inst.c0)));
    for i in 0..inst.d {
        lin = lin
            .add(&pb.ve(mc.omegas[i]).lmul(&inst.b_mats[i + 1].transpose()))
            .add(&pb.ve(mc.rhos[i]));
    }

    let mut constant = pb
        .ve(pol.p0)
        .dot(&inst.b_vecs[0])
        .add(&pb.ve(pol.y0).dot(&inst.c0));
    for i in 0..inst.d {
        constant = constant.add(&pb.ve(mc.omegas[i]).dot(&inst.b_vecs[i + 1]));
    }
    Ok(QuadParts { quad, lin, constant })
}

/// Optimality cut shared by the SDP and copositive-route subproblems: per
/// leader coordinate the penalties are `betaᵢ + [kappaᵢ]⁺` on the
/// `x̂ᵢ = 1 → xᵢ = 0` flip and `betaᵢ + [kappaᵢ]⁻` on the opposite flip.
pub(crate) fn assemble_flip_cut(
    x: &DVector<f64>,
    value: f64,
    pieces: &[(f64, f64)],
    big_m: f64,
    source: &'static str,
) -> Result<Cut> {
    let d = x.len();
    let mut u_coef = DVector::zeros(d);
    let mut a = value;
    for (i, &(beta, kappa)) in pieces.iter().enumerate() {
        let k1 = beta + pos(kappa);
        let k0 = beta + neg(kappa);
        u_coef[i] = big_m * (x[i] * k1 - (1.0 - x[i]) * k0);
        a -= big_m * x[i] * k1;
    }
    Cut::checked(u_coef, a, source, x.clone(), value)
}

/// An affine recourse policy extracted from a solved LDR model, sufficient
/// to replay every semi-infinite row at sampled support points.
#[derive(Debug, Clone)]
pub struct LdrPolicy {
    /// Second-stage objective value `r + t`.
    pub value: f64,
    pub q_mat: DMatrix<f64>,
    pub q_vec: DVector<f64>,
    pub r: f64,
    pub t: f64,
    pub lambda: f64,
    pub y_mat: DMatrix<f64>,
    pub y0: DVector<f64>,
    /// Multiplier `T` with `P = TW`.
    pub t_mat: DMatrix<f64>,
    pub p0: DVector<f64>,
}

impl LdrPolicy {
    pub(crate) fn extract(sol: &ConeSolution, cert: &CertBlocks, pol: &PolicyBlocks) -> LdrPolicy {
        LdrPolicy {
            value: sol.value(cert.r) + sol.value(cert.t),
            q_mat: sol.sym(cert.q_mat),
            q_vec: sol.vec(cert.q_vec),
            r: sol.value(cert.r),
            t: sol.value(cert.t),
            lambda: sol.value(pol.lambda),
            y_mat: sol.mat(pol.y_mat),
            y0: sol.vec(pol.y0),
            t_mat: sol.mat(pol.t_mat),
            p0: sol.vec(pol.p0),
        }
    }

    /// `P = TW`.
    pub fn p_mat(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        &self.t_mat * w
    }

    /// Slack of the quadratic certificate row at a support point
    /// (nonnegative when the row holds):
    /// `r − ξᵀ(B_xᵀP + CᵀY − Q)ξ − (p₀ᵀB_x + b_{x0}ᵀP + y₀ᵀC + c₀ᵀY − q)ξ − b_{x0}ᵀp₀ − c₀ᵀy₀`.
    pub fn quad_row_slack(
        &self,
        inst: &BilevelInstance,
        w: &DMatrix<f64>,
        bx: &DMatrix<f64>,
        bx0: &DVector<f64>,
        xi: &DVector<f64>,
    ) -> f64 {
        let p = self.p_mat(w);
        let quad = bx.transpose() * &p + inst.c_mat.transpose() * &self.y_mat - &self.q_mat;
        let lin = (&self.p0.transpose() * bx).transpose()
            + p.transpose() * bx0
            + inst.c_mat.transpose() * &self.y0
            + self.y_mat.transpose() * &inst.c0
            - &self.q_vec;
        let rhs = (xi.transpose() * quad * xi)[(0, 0)]
            + lin.dot(xi)
            + bx0.dot(&self.p0)
            + inst.c0.dot(&self.y0);
        self.r - rhs
    }

    /// Primal-policy feasibility slack at a support point: min over rows of
    /// `λ b_x(ξ) − A(Yξ + y₀)`.
    pub fn primal_feas_slack(
        &self,
        inst: &BilevelInstance,
        bx: &DMatrix<f64>,
        bx0: &DVector<f64>,
        xi: &DVector<f64>,
    ) -> f64 {
        let b = bx * xi + bx0;
        let y = &self.y_mat * xi + &self.y0;
        let slack = b * self.lambda - &inst.a * y;
        slack.min()
    }

    /// Dual-policy residuals at a support point: the sign slack
    /// `min(p(ξ))` and the equality residual `‖Aᵀp(ξ) + λc(ξ) − v(ξ)‖∞`.
    pub fn dual_feas_residuals(
        &self,
        inst: &BilevelInstance,
        w: &DMatrix<f64>,
        xi: &DVector<f64>,
    ) -> (f64, f64) {
        let p = self.p_mat(w) * xi + &self.p0;
        let eq = inst.a.transpose() * &p + inst.c_at(xi) * self.lambda - inst.v_at(xi);
        (p.min(), eq.abs().max())
    }
}
