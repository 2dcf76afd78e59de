//! Moment-point cutting plane: an LP master over the decision-rule blocks
//! with finitely many pooled (mean, second-moment) points, and an SDP
//! separation oracle over the moment set that adds the most violated point
//! until the incumbent is robust.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cone::{AffMat, ConeProgramBuilder, LinExpr, SolveOpts};
use crate::instance::BilevelInstance;
use crate::ldr_base::{self, col, McCormickValues};
use crate::linalg;
use crate::moments::{MomentAmbiguity, MomentPoint};
use crate::{DrbpError, Result};

/// Pool of moment points with their induced master rows.
#[derive(Debug, Clone, Default)]
pub struct MomentCutPool {
    pub points: Vec<MomentPoint>,
}

impl MomentCutPool {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Every pooled point must satisfy the three moment-set membership
    /// conditions.
    pub fn max_membership_violation(&self, amb: &MomentAmbiguity) -> f64 {
        self.points
            .iter()
            .map(|p| p.membership_violation(amb))
            .fold(0.0, f64::max)
    }
}

/// Incumbent of one master solve: the leader decision, the epigraph value,
/// and the decision-rule blocks needed by the separation oracle.
#[derive(Debug, Clone)]
pub struct MasterIncumbent {
    pub x: DVector<f64>,
    pub v: f64,
    /// `wᵀx + v`.
    pub objective: f64,
    pub t_mat: DMatrix<f64>,
    pub y_mat: DMatrix<f64>,
    pub y0: DVector<f64>,
    pub p0: DVector<f64>,
    pub lambda: f64,
    pub mccormick: McCormickValues,
}

impl MasterIncumbent {
    /// `Ξ = ΣΓᵢ + B₀ᵀTW + CᵀY` — multiplies the second moment in the
    /// master row.
    pub fn quad_coeff(&self, inst: &BilevelInstance, w: &DMatrix<f64>) -> DMatrix<f64> {
        let tw = &self.t_mat * w;
        let mut out = inst.b_mats[0].transpose() * &tw + inst.c_mat.transpose() * &self.y_mat;
        for g in &self.mccormick.gammas {
            out += g;
        }
        out
    }

    /// `β = ΣBᵢᵀωᵢ + B₀ᵀp₀ + Σρᵢ + (TW)ᵀb₀ + Cᵀy₀ + Yᵀc₀` — multiplies the
    /// mean.
    pub fn lin_coeff(&self, inst: &BilevelInstance, w: &DMatrix<f64>) -> DVector<f64> {
        let tw = &self.t_mat * w;
        let mut out = inst.b_mats[0].transpose() * &self.p0
            + tw.transpose() * &inst.b_vecs[0]
            + inst.c_mat.transpose() * &self.y0
            + self.y_mat.transpose() * &inst.c0;
        for i in 0..inst.d {
            out += inst.b_mats[i + 1].transpose() * &self.mccormick.omegas[i]
                + &self.mccormick.rhos[i];
        }
        out
    }

    /// Constant part `Σbᵢᵀωᵢ + b₀ᵀp₀ + c₀ᵀy₀`.
    pub fn const_coeff(&self, inst: &BilevelInstance) -> f64 {
        let mut out = inst.b_vecs[0].dot(&self.p0) + inst.c0.dot(&self.y0);
        for i in 0..inst.d {
            out += inst.b_vecs[i + 1].dot(&self.mccormick.omegas[i]);
        }
        out
    }

    /// Master-row right-hand side at a concrete moment point.
    pub fn row_value(
        &self,
        inst: &BilevelInstance,
        w: &DMatrix<f64>,
        point: &MomentPoint,
    ) -> f64 {
        linalg::frob_dot(&point.omega, &self.quad_coeff(inst, w).transpose())
            + point.mu.dot(&self.lin_coeff(inst, w))
            + self.const_coeff(inst)
    }
}

/// Floor on the epigraph variable while the pool is empty.
fn epigraph_floor(inst: &BilevelInstance) -> f64 {
    let scale = 1.0
        + inst.w.abs().max().max(inst.v0.abs().max()).max(inst.c0.abs().max());
    -1e9 * scale
}

/// Box applied to the master's policy blocks; wide enough that converged
/// policies never touch it (their natural scale is the cost data), tight
/// enough that the separation objective stays well-conditioned.
const MASTER_POLICY_BOX: f64 = 1e4;

/// The relaxed master with few pooled points can ride policy recession rays
/// to arbitrarily negative rows (the moment set does not pin the support),
/// so the master intersects the policy blocks with a wide box. Any genuine
/// optimum sits far inside it.
fn add_master_box(
    pb: &mut ConeProgramBuilder,
    pol: &crate::ldr_base::PolicyBlocks,
    big_m: f64,
) {
    let bound = |pb: &mut ConeProgramBuilder, m_expr: AffMat, tag: &str| {
        let ones = AffMat::scaled_const(
            &DMatrix::from_element(m_expr.rows, m_expr.cols, big_m),
            &LinExpr::constant(1.0),
        );
        pb.nonneg(&ones.sub(&m_expr), &format!("{tag}-box-ub"));
        pb.nonneg(&m_expr.add(&ones), &format!("{tag}-box-lb"));
    };
    bound(pb, pb.me(pol.t_mat), "T");
    bound(pb, pb.ve(pol.p0), "p0");
    bound(pb, pb.me(pol.y_mat), "Y");
    bound(pb, pb.ve(pol.y0), "y0");
    bound(pb, pb.me(pol.cap_lambda), "Lambda");
}

/// Solve the relaxed moment master exactly: per feasible leader decision an
/// LP over the policy blocks with one row per pooled point, keeping the
/// best. Returns the incumbent blocks for separation.
pub fn solve_master(
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    pool: &MomentCutPool,
    big_m: f64,
) -> Result<MasterIncumbent> {
    let (w, _) = amb.support()?;
    let candidates = inst.leader_set.enumerate()?;
    let floor = epigraph_floor(inst);
    let solved: Vec<Result<MasterIncumbent>> = candidates
        .par_iter()
        .map(|x| {
            let mut pb = ConeProgramBuilder::new();
            let pol = ldr_base::declare_policy_blocks(&mut pb, inst, w.nrows());
            let v = pb.scalar("v");
            pb.minimize(pb.se(v).add_const(inst.w.dot(x)));
            ldr_base::add_policy_rows(&mut pb, inst, amb, &pol)?;
            add_master_box(&mut pb, &pol, MASTER_POLICY_BOX.min(big_m));
            let x_expr = AffMat::from_const_vec(x);
            let mc = ldr_base::add_mccormick(&mut pb, inst, amb, &pol, &x_expr, big_m)?;
            ldr_base::add_recourse_rows_full(&mut pb, inst, amb, &pol, &mc)?;
            let parts = ldr_base::quad_parts_full(&pb, inst, amb, &pol, &mc)?;
            // v >= <Omega, quad> + mu'lin + const per pooled point
            for (idx, point) in pool.points.iter().enumerate() {
                let row = pb
                    .se(v)
                    .sub(&parts.quad.trace_lmul(&point.omega.transpose()))
                    .sub(&parts.lin.dot(&point.mu))
                    .sub(&parts.constant);
                pb.nonneg_scalar(row, &format!("moment-row{idx}"));
            }
            if pool.is_empty() {
                // the floor only matters before any row exists; keeping it
                // afterwards would drag 1e9-scale data through every solve
                pb.nonneg_scalar(pb.se(v).add_const(-floor), "v-floor");
            }
            let sol = pb
                .build()
                .solve(&SolveOpts::default())?
                .into_optimal("moment master LP")?;
            Ok(MasterIncumbent {
                x: x.clone(),
                v: sol.value(v),
                objective: sol.objective,
                t_mat: sol.mat(pol.t_mat),
                y_mat: sol.mat(pol.y_mat),
                y0: sol.vec(pol.y0),
                p0: sol.vec(pol.p0),
                lambda: sol.value(pol.lambda),
                mccormick: McCormickValues::extract(&sol, &mc, inst.d),
            })
        })
        .collect();
    let mut best: Option<MasterIncumbent> = None;
    for item in solved {
        let inc = item?;
        let better = match &best {
            None => true,
            Some(b) => inc.objective < b.objective - 1e-12,
        };
        if better {
            best = Some(inc);
        }
    }
    best.ok_or_else(|| DrbpError::Infeasible("moment master has no candidates".into()))
}

/// Separation oracle: maximize the master row over the moment set
/// `{(μ, Ω) : (μ−μ₀)ᵀΣ₀⁻¹(μ−μ₀) ≤ γ₁, Ω − μμ₀ᵀ − μ₀μᵀ + μ₀μ₀ᵀ ⪯ γ₂Σ₀,
/// μμᵀ ⪯ Ω}`. Returns the maximizer and its violation, or `None` when the
/// incumbent is already robust.
pub fn separate(
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    incumbent: &MasterIncumbent,
) -> Result<Option<(MomentPoint, f64)>> {
    let (w, _) = amb.support()?;
    let k = inst.k;
    let quad = incumbent.quad_coeff(inst, w);
    let lin = incumbent.lin_coeff(inst, w);
    let constant = incumbent.const_coeff(inst);
    // normalize the objective so incumbents near the master box still yield
    // a well-scaled separation problem
    let norm = quad
        .abs()
        .max()
        .max(lin.abs().max())
        .max(constant.abs())
        .max(1.0);

    let mut pb = ConeProgramBuilder::new();
    let omega = pb.symmetric("Omega", k);
    let mu = pb.vector("mu", k);
    pb.maximize(
        pb.syme(omega)
            .trace_lmul(&(quad.transpose() / norm))
            .add(&pb.ve(mu).dot(&(&lin / norm)))
            .add_const(constant / norm),
    );

    // mean ellipsoid
    if amb.gamma1 == 0.0 {
        pb.zero(&pb.ve(mu).sub(&AffMat::from_const_vec(&amb.mu0)), "mu-pin");
    } else {
        let sinv_half = linalg::sqrt_psd(amb.sigma_inv());
        let dev = pb.ve(mu).sub(&AffMat::from_const_vec(&amb.mu0)).lmul(&sinv_half);
        pb.soc(LinExpr::constant(amb.gamma1.sqrt()), &dev, "mean-ellipsoid");
    }

    // covariance cap: g2 S0 - Omega + mu mu0' + mu0 mu' - mu0 mu0' ⪰ 0
    let cap = AffMat::from_const(&(&amb.sigma0 * amb.gamma2 - &amb.mu0 * amb.mu0.transpose()))
        .sub(&pb.syme(omega))
        .add(&pb.ve(mu).rmul(&col(&amb.mu0).transpose()))
        .add(&pb.ve(mu).transpose().lmul(&col(&amb.mu0)));
    pb.psd(&cap, "covariance-cap");

    // mu mu' ⪯ Omega via the Schur block
    let mut block = AffMat::zeros(k + 1, k + 1);
    let oe = pb.syme(omega);
    for i in 0..k {
        for j in 0..k {
            block.set(i, j, oe.entry(i, j).clone());
        }
        block.set(i, k, pb.ve(mu).entry(i, 0).clone());
        block.set(k, i, pb.ve(mu).entry(i, 0).clone());
    }
    block.set(k, k, LinExpr::constant(1.0));
    pb.psd(&block, "moment-schur");

    let sol = pb
        .build()
        .solve(&SolveOpts::default())?
        .into_optimal("moment separation SDP")?;
    let violation = sol.objective * norm - incumbent.v;
    if violation <= 1e-6 * (1.0 + incumbent.v.abs()) {
        return Ok(None);
    }
    Ok(Some((
        MomentPoint { mu: sol.vec(mu), omega: sol.sym(omega) },
        violation,
    )))
}

/// Termination state of [`run_milp_cut`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpCutStatus {
    Converged,
    IterationCap,
}

/// Controls for the moment-cut loop.
#[derive(Debug, Clone)]
pub struct MilpCutOpts {
    pub big_m: f64,
    pub max_iters: usize,
}

impl Default for MilpCutOpts {
    fn default() -> Self {
        MilpCutOpts { big_m: 1e6, max_iters: 500 }
    }
}

/// Output of the moment-cut loop.
#[derive(Debug, Clone)]
pub struct MilpCutReport {
    pub status: MilpCutStatus,
    pub value: f64,
    pub x_star: DVector<f64>,
    pub iterations: usize,
    pub pool: MomentCutPool,
    /// Master objective per iteration (non-decreasing).
    pub master_trace: Vec<f64>,
    pub wall_seconds: f64,
}

/// Alternate master and separation until no pooled row is violated.
pub fn run_milp_cut(
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    opts: &MilpCutOpts,
) -> Result<MilpCutReport> {
    let started = std::time::Instant::now();
    let mut pool = MomentCutPool::default();
    let mut trace = Vec::new();
    for iter in 1..=opts.max_iters {
        let incumbent = solve_master(inst, amb, &pool, opts.big_m)?;
        trace.push(incumbent.objective);
        match separate(inst, amb, &incumbent)? {
            None => {
                return Ok(MilpCutReport {
                    status: MilpCutStatus::Converged,
                    value: incumbent.objective,
                    x_star: incumbent.x,
                    iterations: iter,
                    pool,
                    master_trace: trace,
                    wall_seconds: started.elapsed().as_secs_f64(),
                })
            }
            Some((point, _violation)) => pool.points.push(point),
        }
    }
    let incumbent = solve_master(inst, amb, &pool, opts.big_m)?;
    trace.push(incumbent.objective);
    Ok(MilpCutReport {
        status: MilpCutStatus::IterationCap,
        value: incumbent.objective,
        x_star: incumbent.x,
        iterations: opts.max_iters,
        pool,
        master_trace: trace,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::toy_e1;
    use crate::moments::AmbiguityDomain;

    fn e1_amb(width: f64) -> MomentAmbiguity {
        MomentAmbiguity::new(
            DVector::from_vec(vec![3.0]),
            DMatrix::from_element(1, 1, 1e-6),
            0.0,
            1.0,
            AmbiguityDomain::Support {
                w_mat: DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
                h: DVector::from_vec(vec![3.0 - width, -(3.0 + width)]),
            },
        )
        .unwrap()
    }

    #[test]
    fn empty_pool_hits_floor() {
        let inst = toy_e1();
        let amb = e1_amb(0.0);
        let master = solve_master(&inst, &amb, &MomentCutPool::default(), 1e6).unwrap();
        assert!(master.v <= -1e8, "v = {}", master.v);
    }

    #[test]
    fn separation_finds_violation_from_floor() {
        let inst = toy_e1();
        let amb = e1_amb(0.0);
        let master = solve_master(&inst, &amb, &MomentCutPool::default(), 1e6).unwrap();
        let sep = separate(&inst, &amb, &master).unwrap();
        let (point, violation) = sep.expect("floor incumbent cannot be robust");
        assert!(violation > 0.0);
        assert!(point.membership_violation(&amb) < 1e-6);
    }

    #[test]
    fn point_support_converges_to_recourse_value() {
        let inst = toy_e1();
        let amb = e1_amb(0.0);
        let report = run_milp_cut(&inst, &amb, &MilpCutOpts::default()).unwrap();
        assert_eq!(report.status, MilpCutStatus::Converged);
        assert!(report.iterations <= 3, "iterations {}", report.iterations);
        assert!(
            (report.value - -6.0).abs() < 1e-4,
            "moment-cut value {}",
            report.value
        );
        // master values non-decreasing
        for pair in report.master_trace.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-7);
        }
        assert!(report.pool.max_membership_violation(&amb) < 1e-6);
    }
}
