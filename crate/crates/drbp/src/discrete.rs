//! Exact 0-1 SDP under the discrete ambiguity set: per-scenario recourse
//! blocks, the scenario dual subproblem, worst-case distribution extraction
//! from its distribution weights, and the scenario optimality cut.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cone::{AffMat, ConeProgram, ConeProgramBuilder, LinExpr, SolveOpts, VecVar};
use crate::engine::{Cut, CutProvider, ProviderOutcome};
use crate::instance::BilevelInstance;
use crate::ldr_base::{col, smul, smul_vec};
use crate::linalg::{self, abs_sum_vec};
use crate::moments::MomentAmbiguity;
use crate::oracle;
use crate::{DrbpError, Result};

/// Optimal solution of the scenario dual subproblem; `gamma` carries the
/// worst-case distribution weights.
#[derive(Debug, Clone)]
pub struct SpDisDual {
    pub value: f64,
    pub sigma: Vec<DVector<f64>>,
    pub mu: DVector<f64>,
    pub chi: Vec<DVector<f64>>,
    pub gamma: DVector<f64>,
}

/// A cleaned worst-case distribution over the scenario list.
#[derive(Debug, Clone)]
pub struct WorstCaseDistribution {
    pub probabilities: DVector<f64>,
}

/// Solution of the fixed-leader primal of the exact discrete model.
#[derive(Debug, Clone)]
pub struct DiscretePrimalSolution {
    pub value: f64,
    pub q_mat: DMatrix<f64>,
    pub q_vec: DVector<f64>,
    pub r: f64,
    pub t: f64,
    pub lambda: f64,
    pub p: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
}

struct CertVars {
    q_mat: crate::cone::SymVar,
    q_vec: VecVar,
    r: crate::cone::ScalarVar,
    t: crate::cone::ScalarVar,
    lambda: crate::cone::ScalarVar,
}

fn declare_cert(pb: &mut ConeProgramBuilder, k: usize) -> CertVars {
    CertVars {
        q_mat: pb.symmetric("Q", k),
        q_vec: pb.vector("q", k),
        r: pb.scalar("r"),
        t: pb.scalar("t"),
        lambda: pb.scalar("lambda"),
    }
}

fn add_cert_rows(pb: &mut ConeProgramBuilder, amb: &MomentAmbiguity, cv: &CertVars) {
    let gmat = &amb.sigma0 * amb.gamma2 + &amb.mu0 * amb.mu0.transpose();
    let lin = pb
        .syme(cv.q_mat)
        .trace_lmul(&gmat)
        .add(&pb.ve(cv.q_vec).dot(&amb.mu0));
    let tpart = pb.se(cv.t).sub(&lin);
    if amb.gamma1 == 0.0 {
        pb.nonneg_scalar(tpart, "t-row");
    } else {
        let inner = pb
            .ve(cv.q_vec)
            .add(&pb.syme(cv.q_mat).rmul(&col(&amb.mu0)).scale(2.0))
            .lmul(amb.sigma_half())
            .scale(amb.gamma1.sqrt());
        pb.soc(tpart, &inner, "t-row");
    }
    pb.psd(&pb.syme(cv.q_mat), "Q-psd");
    pb.nonneg_scalar(pb.se(cv.lambda), "lambda>=0");
}

/// Scenario epigraph slack:
/// `r − b-part − c-part + ξᵀQξ + ξᵀq` (nonnegative when the row holds).
fn scenario_epigraph(
    pb: &ConeProgramBuilder,
    cv: &CertVars,
    xi: &DVector<f64>,
    bp: &LinExpr,
    cy: &LinExpr,
) -> LinExpr {
    let quad = pb.syme(cv.q_mat).trace_lmul(&(xi * xi.transpose()));
    pb.se(cv.r)
        .sub(bp)
        .sub(cy)
        .add(&quad)
        .add(&pb.ve(cv.q_vec).dot(xi))
}

/// Fixed-leader primal of the exact discrete model.
pub fn solve_fixed_primal(
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    x: &DVector<f64>,
) -> Result<DiscretePrimalSolution> {
    let scenarios = amb.scenarios()?.to_vec();
    let mut pb = ConeProgramBuilder::new();
    let cv = declare_cert(&mut pb, inst.k);
    let mut p_vars = Vec::with_capacity(scenarios.len());
    let mut y_vars = Vec::with_capacity(scenarios.len());
    for s in 0..scenarios.len() {
        p_vars.push(pb.vector(&format!("p{s}"), inst.m));
        y_vars.push(pb.vector(&format!("y{s}"), inst.n));
    }
    pb.minimize(pb.se(cv.r).add(&pb.se(cv.t)));
    add_cert_rows(&mut pb, amb, &cv);
    for (s, xi) in scenarios.iter().enumerate() {
        let b = inst.rhs_at(x, xi)?;
        let c = inst.c_at(xi);
        let v = inst.v_at(xi);
        let bp = pb.ve(p_vars[s]).dot(&b);
        let cy = pb.ve(y_vars[s]).dot(&c);
        pb.nonneg_scalar(scenario_epigraph(&pb, &cv, xi, &bp, &cy), &format!("epi{s}"));
        // A'p + λc = v, p >= 0, Ay <= λ b
        let lhs = pb
            .ve(p_vars[s])
            .lmul(&inst.a.transpose())
            .add(&smul_vec(&pb.se(cv.lambda), &c))
            .sub(&AffMat::from_const_vec(&v));
        pb.zero(&lhs, &format!("dualfeas{s}"));
        pb.nonneg(&pb.ve(p_vars[s]), &format!("p{s}>=0"));
        let lhs = smul_vec(&pb.se(cv.lambda), &b).sub(&pb.ve(y_vars[s]).lmul(&inst.a));
        pb.nonneg(&lhs, &format!("primfeas{s}"));
    }
    let sol = pb
        .build()
        .solve(&SolveOpts::default())?
        .into_optimal("discrete fixed primal")?;
    Ok(DiscretePrimalSolution {
        value: sol.objective,
        q_mat: sol.sym(cv.q_mat),
        q_vec: sol.vec(cv.q_vec),
        r: sol.value(cv.r),
        t: sol.value(cv.t),
        lambda: sol.value(cv.lambda),
        p: p_vars.iter().map(|p| sol.vec(*p)).collect(),
        y: y_vars.iter().map(|y| sol.vec(*y)).collect(),
    })
}

/// The scenario dual subproblem at `x̂`: maximizes `Σ_s χ^sᵀv(ξ^s)` over
/// distribution weights `γ` constrained to the ambiguity set, with the
/// per-scenario flow and budget rows.
pub fn solve_subproblem(
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    x: &DVector<f64>,
) -> Result<SpDisDual> {
    let scenarios = amb.scenarios()?.to_vec();
    let nsc = scenarios.len();
    let (k, n, m) = (inst.k, inst.n, inst.m);
    let sqg1 = amb.gamma1.sqrt();
    let shalf = amb.sigma_half();

    let mut pb = ConeProgramBuilder::new();
    let gamma = pb.vector("gamma", nsc);
    let mu = pb.vector("mu", k);
    let mut sigma_vars = Vec::with_capacity(nsc);
    let mut chi_vars = Vec::with_capacity(nsc);
    for s in 0..nsc {
        sigma_vars.push(pb.vector(&format!("sigma{s}"), m));
        chi_vars.push(pb.vector(&format!("chi{s}"), n));
    }

    // v enters only the objective, so normalizing it changes no optimizer;
    // it keeps the mass row accurate when |v| is large (the distribution
    // weights face an absolute 1e-8 gate downstream)
    let v_scale = scenarios
        .iter()
        .map(|xi| inst.v_at(xi).abs().max())
        .fold(1.0_f64, f64::max);
    let mut objective = LinExpr::default();
    for (s, xi) in scenarios.iter().enumerate() {
        objective.add_assign(&pb.ve(chi_vars[s]).dot(&(inst.v_at(xi) / v_scale)));
    }
    pb.maximize(objective);

    // g2 S0 + mu0 mu0' - Σ γ_s ξ^s ξ^s' + sqrt(g1)(mu0 mu' S½ + S½ mu mu0') ⪰ 0
    let gmat = &amb.sigma0 * amb.gamma2 + &amb.mu0 * amb.mu0.transpose();
    let mut lhs = AffMat::from_const(&gmat);
    for (s, xi) in scenarios.iter().enumerate() {
        let gs = pb.ve(gamma).entry(s, 0).clone();
        lhs = lhs.sub(&smul(&gs, &(xi * xi.transpose())));
    }
    let cross1 = pb.ve(mu).transpose().lmul(&col(&amb.mu0)).rmul(shalf);
    let cross2 = pb.ve(mu).lmul(shalf).rmul(&col(&amb.mu0).transpose());
    let lhs = lhs.add(&cross1.add(&cross2).scale(sqg1));
    pb.psd(&lhs, "second-moment-cap");

    // Σ γ_s = 1; sqrt(g1) S½ mu + mu0 - Σ γ_s ξ^s = 0; ||mu|| <= 1
    let mass = pb
        .ve(gamma)
        .dot(&DVector::from_element(nsc, 1.0))
        .add_const(-1.0);
    pb.zero(&AffMat::from_entries(1, 1, vec![mass]), "mass");
    let mut mean = pb
        .ve(mu)
        .lmul(shalf)
        .scale(sqg1)
        .add(&AffMat::from_const_vec(&amb.mu0));
    for (s, xi) in scenarios.iter().enumerate() {
        let gs = pb.ve(gamma).entry(s, 0).clone();
        mean = mean.sub(&smul_vec(&gs, xi));
    }
    pb.zero(&mean, "mean-anchor");
    pb.soc(LinExpr::constant(1.0), &pb.ve(mu), "mu-ball");

    // per-scenario: -A chi^s + γ^s b_x(ξ^s) >= 0 and γ^s c(ξ^s) + A'σ^s = 0
    let mut budget = LinExpr::default();
    for (s, xi) in scenarios.iter().enumerate() {
        let b = inst.rhs_at(x, xi)?;
        let c = inst.c_at(xi);
        let gs = pb.ve(gamma).entry(s, 0).clone();
        let lhs = smul_vec(&gs, &b).sub(&pb.ve(chi_vars[s]).lmul(&inst.a));
        pb.nonneg(&lhs, &format!("flow{s}"));
        let lhs = smul_vec(&gs, &c).add(&pb.ve(sigma_vars[s]).lmul(&inst.a.transpose()));
        pb.zero(&lhs, &format!("obj-anchor{s}"));
        budget.add_assign(&pb.ve(chi_vars[s]).dot(&c));
        budget.add_assign(&pb.ve(sigma_vars[s]).dot(&b));
        pb.nonneg(&pb.ve(sigma_vars[s]), &format!("sigma{s}>=0"));
    }
    // Σ_s (χ^s'c(ξ^s) + σ^s'b_x(ξ^s)) <= 0
    pb.nonneg_scalar(budget.scale(-1.0), "budget");
    pb.nonneg(&pb.ve(gamma), "gamma>=0");

    let opts = SolveOpts { tol: 1e-9, ..SolveOpts::default() };
    let sol = pb.build().solve(&opts)?.into_optimal("discrete dual subproblem")?;
    Ok(SpDisDual {
        value: sol.objective * v_scale,
        sigma: sigma_vars.iter().map(|v| sol.vec(*v)).collect(),
        mu: sol.vec(mu),
        chi: chi_vars.iter().map(|v| sol.vec(*v)).collect(),
        gamma: sol.vec(gamma),
    })
}

/// Clean and verify the worst-case distribution from the subproblem's
/// weights: clip negatives at zero, renormalize, then check the three
/// ambiguity-set membership conditions. A violation beyond tolerance aborts
/// (it signals a dual extraction bug, not a modeling choice).
pub fn extract_worst_case(
    amb: &MomentAmbiguity,
    duals: &SpDisDual,
) -> Result<WorstCaseDistribution> {
    let scenarios = amb.scenarios()?;
    let raw = &duals.gamma;
    if raw.iter().any(|&g| g < -1e-8) {
        return Err(DrbpError::Numerical(format!(
            "worst-case weights dip below zero: min {}",
            raw.min()
        )));
    }
    let total: f64 = raw.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(DrbpError::Numerical(format!(
            "worst-case weights sum to {total}, expected 1"
        )));
    }
    let clipped: DVector<f64> = raw.map(|g| g.max(0.0));
    let probabilities = &clipped / clipped.sum();

    // mean ellipsoid
    let mean: DVector<f64> = scenarios
        .iter()
        .zip(probabilities.iter())
        .fold(DVector::zeros(amb.k), |acc, (xi, &p)| acc + xi * p);
    let dmean = &mean - &amb.mu0;
    let ell = linalg::quad_form(amb.sigma_inv(), &dmean, &dmean);
    if ell > amb.gamma1 + 1e-6 {
        return Err(DrbpError::Numerical(format!(
            "worst-case mean violates the ellipsoid: {ell} > {}",
            amb.gamma1
        )));
    }

    // second-moment cap
    let mut second = DMatrix::zeros(amb.k, amb.k);
    for (xi, &p) in scenarios.iter().zip(probabilities.iter()) {
        let dev = xi - &amb.mu0;
        second += &dev * dev.transpose() * p;
    }
    let slack = &amb.sigma0 * amb.gamma2 - second;
    let min_eig = linalg::min_eigenvalue(&slack);
    if min_eig < -1e-6 {
        return Err(DrbpError::Numerical(format!(
            "worst-case second moment violates the cap: min eig {min_eig}"
        )));
    }

    Ok(WorstCaseDistribution { probabilities })
}

/// Re-evaluate `min_{λ≥0} Σ_s γ_s Φ_λ(x̂, ξ^s)` through the recourse-LP
/// route; must reproduce the subproblem value.
pub fn reevaluate_by_recourse(
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    x: &DVector<f64>,
    dist: &WorstCaseDistribution,
) -> Result<f64> {
    let scenarios = amb.scenarios()?.to_vec();
    let lam_max = oracle::default_lambda_bracket(inst, &scenarios);
    let r = oracle::min_expected_phi(inst, x, &scenarios, dist.probabilities.as_slice(), lam_max)?;
    Ok(r.value)
}

/// Scenario optimality cut: flip penalties are
/// `Σ_s γ̂^s‖Bᵢξ^s + bᵢ‖₁` plus the signed part of
/// `−Σ_s σ̂^sᵀ(Bᵢξ^s + bᵢ)`.
pub fn make_cut(
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    x: &DVector<f64>,
    dual: &SpDisDual,
    big_m: f64,
) -> Result<Cut> {
    let scenarios = amb.scenarios()?;
    let pieces: Vec<(f64, f64)> = (0..inst.d)
        .map(|i| {
            let bi = &inst.b_mats[i + 1];
            let bvi = &inst.b_vecs[i + 1];
            let mut beta = 0.0;
            let mut kappa = 0.0;
            for (s, xi) in scenarios.iter().enumerate() {
                let bixi = bi * xi + bvi;
                beta += abs_sum_vec(&(&bixi * dual.gamma[s]));
                kappa -= dual.sigma[s].dot(&bixi);
            }
            (beta, kappa)
        })
        .collect();
    crate::ldr_base::assemble_flip_cut(x, dual.value, &pieces, big_m, "discrete")
}

/// Handles into the full mixed-binary discrete model.
pub struct FullModel {
    pub program: ConeProgram,
    pub x: VecVar,
    lambda: crate::cone::ScalarVar,
    theta: Option<VecVar>,
    p_vars: Vec<VecVar>,
    omega_vars: Vec<Vec<VecVar>>,
}

/// The exact mixed-binary 0-1 SDP with per-scenario blocks and McCormick
/// rows `ω_i^s = x_i p^s`, `θ_i = x_i λ`; solved by enumeration.
pub fn build_full_model(
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    big_m: f64,
) -> Result<FullModel> {
    let scenarios = amb.scenarios()?.to_vec();
    let nsc = scenarios.len();
    let d = inst.d;
    let mut pb = ConeProgramBuilder::new();
    let x = pb.binary_vector("x", d);
    let cv = declare_cert(&mut pb, inst.k);
    let theta = if d > 0 { Some(pb.vector("theta", d)) } else { None };
    let mut p_vars = Vec::with_capacity(nsc);
    let mut y_vars = Vec::with_capacity(nsc);
    let mut omega_vars: Vec<Vec<VecVar>> = Vec::with_capacity(nsc);
    for s in 0..nsc {
        p_vars.push(pb.vector(&format!("p{s}"), inst.m));
        y_vars.push(pb.vector(&format!("y{s}"), inst.n));
        omega_vars.push((0..d).map(|i| pb.vector(&format!("omega{i}_{s}"), inst.m)).collect());
    }

    pb.minimize(
        pb.ve(x)
            .dot(&inst.w)
            .add(&pb.se(cv.r))
            .add(&pb.se(cv.t)),
    );
    add_cert_rows(&mut pb, amb, &cv);

    for (s, xi) in scenarios.iter().enumerate() {
        let c = inst.c_at(xi);
        let v = inst.v_at(xi);
        let b0xi = &inst.b_mats[0] * xi + &inst.b_vecs[0];

        // r >= Σ_i (B_i ξ + b_i)'ω_i^s + (B_0 ξ + b_0)'p^s + c'y^s - ξ'Qξ - ξ'q
        let mut bp = pb.ve(p_vars[s]).dot(&b0xi);
        for i in 0..d {
            let bixi = &inst.b_mats[i + 1] * xi + &inst.b_vecs[i + 1];
            bp.add_assign(&pb.ve(omega_vars[s][i]).dot(&bixi));
        }
        let cy = pb.ve(y_vars[s]).dot(&c);
        pb.nonneg_scalar(scenario_epigraph(&pb, &cv, xi, &bp, &cy), &format!("epi{s}"));

        // A'p^s + λ c = v
        let lhs = pb
            .ve(p_vars[s])
            .lmul(&inst.a.transpose())
            .add(&smul_vec(&pb.se(cv.lambda), &c))
            .sub(&AffMat::from_const_vec(&v));
        pb.zero(&lhs, &format!("dualfeas{s}"));
        pb.nonneg(&pb.ve(p_vars[s]), &format!("p{s}>=0"));

        // A y^s <= Σ_i θ_i (B_i ξ + b_i) + λ(B_0 ξ + b_0)
        let mut rhs = smul_vec(&pb.se(cv.lambda), &b0xi);
        if let Some(theta) = theta {
            for i in 0..d {
                let bixi = &inst.b_mats[i + 1] * xi + &inst.b_vecs[i + 1];
                let th = pb.ve(theta).entry(i, 0).clone();
                rhs = rhs.add(&smul_vec(&th, &bixi));
            }
        }
        pb.nonneg(&rhs.sub(&pb.ve(y_vars[s]).lmul(&inst.a)), &format!("primfeas{s}"));

        // McCormick: ω_i^s banded against p^s and ±x_i M
        for i in 0..d {
            let xi_e = pb.ve(x).entry(i, 0).clone();
            let one_minus_m = xi_e.scale(-big_m).add_const(big_m);
            let x_m = xi_e.scale(big_m);
            let ones_m = DMatrix::from_element(inst.m, 1, 1.0);
            let val = pb.ve(omega_vars[s][i]);
            let pe = pb.ve(p_vars[s]);
            let slack = smul(&one_minus_m, &ones_m);
            pb.nonneg(&pe.add(&slack).sub(&val), &format!("mc-omega{i}_{s}-ub"));
            pb.nonneg(&val.sub(&pe).add(&slack), &format!("mc-omega{i}_{s}-lb"));
            let slack = smul(&x_m, &ones_m);
            pb.nonneg(&slack.sub(&val), &format!("mc-omega0{i}_{s}-ub"));
            pb.nonneg(&val.add(&slack), &format!("mc-omega0{i}_{s}-lb"));
        }
    }

    // θ_i vs λ
    if let Some(theta) = theta {
        for i in 0..d {
            let xi_e = pb.ve(x).entry(i, 0).clone();
            let one_minus_m = xi_e.scale(-big_m).add_const(big_m);
            let x_m = xi_e.scale(big_m);
            let th = pb.ve(theta).entry(i, 0).clone();
            pb.nonneg_scalar(x_m.sub(&th), &format!("mc-theta{i}-ub"));
            pb.nonneg_scalar(
                th.sub(&pb.se(cv.lambda)).add(&one_minus_m),
                &format!("mc-theta{i}-lb"),
            );
            pb.nonneg_scalar(th.clone(), &format!("mc-theta{i}-sign"));
            pb.nonneg_scalar(pb.se(cv.lambda).sub(&th), &format!("mc-theta{i}-cap"));
        }
    }

    Ok(FullModel { program: pb.build(), x, lambda: cv.lambda, theta, p_vars, omega_vars })
}

/// Result of enumerating the discrete full model over the leader set.
#[derive(Debug, Clone)]
pub struct EnumeratedSolve {
    pub x_star: DVector<f64>,
    pub value: f64,
    pub points: Vec<crate::ldr_sdp::EnumeratedPoint>,
    /// Worst violation of `ω_i^s = x_i p^s` and `θ_i = x_i λ` at the
    /// optimum; must stay within `1e-6·M`.
    pub mccormick_residual: f64,
}

/// Solve the discrete full model exactly by enumeration.
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
                .into_optimal("pinned discrete model")?;
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

    let lambda = sol.value(model.lambda);
    let mut residual: f64 = 0.0;
    for i in 0..inst.d {
        if let Some(theta) = model.theta {
            residual = residual.max((sol.vec(theta)[i] - x_star[i] * lambda).abs());
        }
        for (s, omegas) in model.omega_vars.iter().enumerate() {
            let p = sol.vec(model.p_vars[s]);
            let omega = sol.vec(omegas[i]);
            residual = residual.max((omega - p * x_star[i]).abs().max());
        }
    }

    Ok(EnumeratedSolve { x_star, value, points, mccormick_residual: residual })
}

/// Cut provider backed by the scenario dual subproblem.
pub struct DiscreteProvider {
    pub inst: BilevelInstance,
    pub amb: MomentAmbiguity,
    pub big_m: f64,
}

impl CutProvider for DiscreteProvider {
    fn id(&self) -> &'static str {
        "discrete"
    }

    fn subproblem(&self, x: &DVector<f64>) -> Result<ProviderOutcome> {
        let dual = solve_subproblem(&self.inst, &self.amb, x)?;
        let cut = make_cut(&self.inst, &self.amb, x, &dual, self.big_m)?;
        Ok(ProviderOutcome { value: dual.value, cut })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::toy_e1;
    use crate::moments::AmbiguityDomain;

    fn two_point_amb() -> MomentAmbiguity {
        // scenarios {1, 3}, mu0 = 2, gamma1 = 0: mean pins gamma = (1/2, 1/2)
        MomentAmbiguity::new(
            DVector::from_vec(vec![2.0]),
            DMatrix::from_element(1, 1, 2.0),
            0.0,
            1.0,
            AmbiguityDomain::Scenarios {
                points: vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![3.0])],
            },
        )
        .unwrap()
    }

    #[test]
    fn pinned_two_point_distribution() {
        let inst = toy_e1();
        let amb = two_point_amb();
        let x = DVector::zeros(0);
        let dual = solve_subproblem(&inst, &amb, &x).unwrap();
        let dist = extract_worst_case(&amb, &dual).unwrap();
        assert!((dist.probabilities[0] - 0.5).abs() < 1e-6);
        assert!((dist.probabilities[1] - 0.5).abs() < 1e-6);
        // value = mean of the two pessimistic values
        let psi1 = crate::oracle::pessimistic_value(&inst, &x, &DVector::from_vec(vec![1.0]))
            .unwrap()
            .pessimistic_value;
        let psi3 = crate::oracle::pessimistic_value(&inst, &x, &DVector::from_vec(vec![3.0]))
            .unwrap()
            .pessimistic_value;
        assert!(
            (dual.value - 0.5 * (psi1 + psi3)).abs() < 1e-5,
            "value {} vs {}",
            dual.value,
            0.5 * (psi1 + psi3)
        );
    }

    #[test]
    fn single_scenario_point_mass() {
        let inst = toy_e1();
        let amb = MomentAmbiguity::new(
            DVector::from_vec(vec![3.0]),
            DMatrix::from_element(1, 1, 1.0),
            0.0,
            1.0,
            AmbiguityDomain::Scenarios { points: vec![DVector::from_vec(vec![3.0])] },
        )
        .unwrap();
        let x = DVector::zeros(0);
        let dual = solve_subproblem(&inst, &amb, &x).unwrap();
        let dist = extract_worst_case(&amb, &dual).unwrap();
        assert!((dist.probabilities[0] - 1.0).abs() < 1e-8);
        assert!((dual.value - -6.0).abs() < 1e-5);
        let primal = solve_fixed_primal(&inst, &amb, &x).unwrap();
        assert!(
            (primal.value - dual.value).abs() <= 1e-6 * (1.0 + dual.value.abs()),
            "strong duality {} vs {}",
            primal.value,
            dual.value
        );
    }

    #[test]
    fn reevaluation_matches_subproblem() {
        let inst = toy_e1();
        let amb = two_point_amb();
        let x = DVector::zeros(0);
        let dual = solve_subproblem(&inst, &amb, &x).unwrap();
        let dist = extract_worst_case(&amb, &dual).unwrap();
        let re = reevaluate_by_recourse(&inst, &amb, &x, &dist).unwrap();
        assert!(
            (re - dual.value).abs() <= 1e-5 * (1.0 + dual.value.abs()),
            "recourse re-evaluation {re} vs subproblem {}",
            dual.value
        );
    }

    #[test]
    fn full_model_matches_fixed_primal_at_d0() {
        let inst = toy_e1();
        let amb = two_point_amb();
        let enumerated = solve_full_by_enumeration(&inst, &amb, 1e6).unwrap();
        let fixed = solve_fixed_primal(&inst, &amb, &DVector::zeros(0)).unwrap();
        assert!((enumerated.value - fixed.value).abs() < 1e-6);
    }
}
