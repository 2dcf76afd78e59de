//! Experiment harness: method dispatch, solve reports, gap records, γ and
//! support sweeps, and out-of-sample simulation. Everything is deterministic
//! under a fixed seed and serializes to JSON/CSV for external plotting.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete::{self, DiscreteProvider};
use crate::engine::{self, EngineOpts, EngineStatus};
use crate::flp::{sample_demands, DemandLaw, FacilityConfig};
use crate::instance::BilevelInstance;
use crate::ldr_sdp::LdrSdpProvider;
use crate::milp_cut::{self, MilpCutOpts, MilpCutStatus};
use crate::moments::MomentAmbiguity;
use crate::oracle;
use crate::{cop_ia::CopIaProvider, DrbpError, Result};

/// Solution method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sdp,
    Iacop,
    Discrete,
    Milpcut,
}

impl std::str::FromStr for Method {
    type Err = DrbpError;
    fn from_str(s: &str) -> Result<Method> {
        match s.to_lowercase().as_str() {
            "sdp" => Ok(Method::Sdp),
            "iacop" | "ia-cop" | "cop" => Ok(Method::Iacop),
            "discrete" | "dis" => Ok(Method::Discrete),
            "milpcut" | "milp-cut" | "momentcut" => Ok(Method::Milpcut),
            other => Err(DrbpError::Invalid(format!("unknown method {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Sdp => "sdp",
            Method::Iacop => "iacop",
            Method::Discrete => "discrete",
            Method::Milpcut => "milpcut",
        };
        write!(f, "{s}")
    }
}

/// Solver knobs shared by every command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveConfig {
    pub method: Method,
    pub epsilon: f64,
    pub big_m: f64,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig { method: Method::Sdp, epsilon: 1e-5, big_m: 1e6, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentPointRecord {
    pub mu: Vec<f64>,
    /// Row-major `k×k` second-moment block.
    pub omega: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutRecord {
    pub source: String,
    pub u: Vec<f64>,
    pub a: f64,
    pub generated_at: Vec<u8>,
    pub tight_value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub lb: f64,
    pub ub: f64,
    pub x: Vec<u8>,
    pub subproblem_value: f64,
}

/// One solve, serialized. `profit` is the negated objective (the natural
/// reading for the facility benchmark where costs are minimized).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    pub status: String,
    pub value: f64,
    pub profit: f64,
    pub x_star: Vec<u8>,
    pub iterations: usize,
    pub wall_seconds: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub seed: u64,
    pub epsilon: f64,
    pub big_m: f64,
    pub cuts: Vec<CutRecord>,
    pub trace: Vec<IterationRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_case_distribution: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moment_pool_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moment_pool: Option<Vec<MomentPointRecord>>,
}

fn x_bits(x: &DVector<f64>) -> Vec<u8> {
    x.iter().map(|&v| if v > 0.5 { 1 } else { 0 }).collect()
}

/// Solve one instance with the selected method through its cutting-plane
/// path; the discrete method additionally extracts the worst-case
/// distribution at the optimal leader decision.
pub fn solve(
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    cfg: &SolveConfig,
) -> Result<SolveReport> {
    let opts = EngineOpts { epsilon: cfg.epsilon, ..EngineOpts::default() };
    let (engine_report, worst_case) = match cfg.method {
        Method::Sdp => {
            let provider = LdrSdpProvider {
                inst: inst.clone(),
                amb: amb.clone(),
                big_m: cfg.big_m,
            };
            (engine::run(inst, &provider, &opts)?, None)
        }
        Method::Iacop => {
            let provider = CopIaProvider {
                inst: inst.clone(),
                amb: amb.clone(),
                big_m: cfg.big_m,
            };
            (engine::run(inst, &provider, &opts)?, None)
        }
        Method::Discrete => {
            let provider = DiscreteProvider {
                inst: inst.clone(),
                amb: amb.clone(),
                big_m: cfg.big_m,
            };
            let report = engine::run(inst, &provider, &opts)?;
            let duals = discrete::solve_subproblem(inst, amb, &report.x_star)?;
            let dist = discrete::extract_worst_case(amb, &duals)?;
            let probs = dist.probabilities.iter().copied().collect();
            (report, Some(probs))
        }
        Method::Milpcut => {
            let mopts = MilpCutOpts { big_m: cfg.big_m, max_iters: 500 };
            let report = milp_cut::run_milp_cut(inst, amb, &mopts)?;
            let status = match report.status {
                MilpCutStatus::Converged => "converged",
                MilpCutStatus::IterationCap => "cap_hit",
            };
            return Ok(SolveReport {
                method: cfg.method,
                status: status.into(),
                value: report.value,
                profit: -report.value,
                x_star: x_bits(&report.x_star),
                iterations: report.iterations,
                wall_seconds: report.wall_seconds,
                gamma1: amb.gamma1,
                gamma2: amb.gamma2,
                seed: cfg.seed,
                epsilon: cfg.epsilon,
                big_m: cfg.big_m,
                cuts: Vec::new(),
                trace: report
                    .master_trace
                    .iter()
                    .map(|&v| IterationRecord {
                        lb: v,
                        ub: f64::NAN,
                        x: Vec::new(),
                        subproblem_value: f64::NAN,
                    })
                    .collect(),
                worst_case_distribution: None,
                moment_pool_size: Some(report.pool.len()),
                moment_pool: Some(
                    report
                        .pool
                        .points
                        .iter()
                        .map(|p| MomentPointRecord {
                            mu: p.mu.iter().copied().collect(),
                            omega: p.omega.iter().copied().collect(),
                        })
                        .collect(),
                ),
            });
        }
    };

    let status = match engine_report.status {
        EngineStatus::Converged => "converged",
        EngineStatus::Stalled => "stalled",
        EngineStatus::IterationCap => "cap_hit",
    };
    Ok(SolveReport {
        method: cfg.method,
        status: status.into(),
        value: engine_report.value,
        profit: -engine_report.value,
        x_star: x_bits(&engine_report.x_star),
        iterations: engine_report.iterations,
        wall_seconds: engine_report.wall_seconds,
        gamma1: amb.gamma1,
        gamma2: amb.gamma2,
        seed: cfg.seed,
        epsilon: cfg.epsilon,
        big_m: cfg.big_m,
        cuts: engine_report
            .cuts
            .iter()
            .map(|c| CutRecord {
                source: c.source.to_string(),
                u: c.u.iter().copied().collect(),
                a: c.a,
                generated_at: x_bits(&c.generated_at),
                tight_value: c.tight_value,
            })
            .collect(),
        trace: engine_report
            .trace
            .iter()
            .map(|t| IterationRecord {
                lb: t.lb,
                ub: t.ub,
                x: x_bits(&t.x),
                subproblem_value: t.subproblem_value,
            })
            .collect(),
        worst_case_distribution: worst_case,
        moment_pool_size: None,
        moment_pool: None,
    })
}

/// Approximation-quality record: `gap% = (V_approx − V_dis)/|V_dis|·100`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapRecord {
    pub method: Method,
    pub v_approx: f64,
    pub v_dis: f64,
    pub gap_percent: f64,
}

pub fn gap_percent(v_approx: f64, v_dis: f64) -> f64 {
    (v_approx - v_dis) / v_dis.abs() * 100.0
}

/// Run the continuous methods plus the discrete lower bound (in-sample
/// scenarios plus `extra_draws` fresh ones, all inside the support) and
/// report the optimality gaps.
pub fn compute_gaps(
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    cfg: &FacilityConfig,
    methods: &[Method],
    in_sample: &[DVector<f64>],
    extra_draws: usize,
    solve_cfg: &SolveConfig,
) -> Result<Vec<GapRecord>> {
    let mut scenarios = in_sample.to_vec();
    if extra_draws > 0 {
        scenarios.extend(sample_demands(cfg, extra_draws, solve_cfg.seed.wrapping_add(1))?);
    }
    // The point mass at mu0 is a member of any moment set, so pooling mu0
    // keeps the discrete set nonempty even when the caller's in-sample
    // points do not reproduce the file's moments. Only added when it lies
    // in the support.
    if let Ok((w, h)) = amb.support() {
        if (w * &amb.mu0 - h).min() >= -1e-9 {
            scenarios.push(amb.mu0.clone());
        }
    }
    let amb_dis = amb.with_scenarios(scenarios)?;
    let dis_cfg = SolveConfig { method: Method::Discrete, ..solve_cfg.clone() };
    let v_dis = solve(inst, &amb_dis, &dis_cfg)?.value;

    let mut records = Vec::new();
    for &method in methods {
        if method == Method::Discrete {
            continue;
        }
        let mcfg = SolveConfig { method, ..solve_cfg.clone() };
        let v_approx = solve(inst, amb, &mcfg)?.value;
        let gap = gap_percent(v_approx, v_dis);
        if gap < -1e-3 {
            return Err(DrbpError::Numerical(format!(
                "negative optimality gap {gap}% for {method}: \
                 approx {v_approx} below the discrete lower bound {v_dis}"
            )));
        }
        records.push(GapRecord { method, v_approx, v_dis, gap_percent: gap });
    }
    Ok(records)
}

/// One cell of a γ/support sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub gamma1: f64,
    pub gamma2: f64,
    pub support_lb: Option<f64>,
    pub value: f64,
    pub profit: f64,
    pub x_star: Vec<u8>,
}

/// Sweep over γ pairs and/or support lower bounds; cells run in parallel
/// and merge in deterministic cell order.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    cfg: &FacilityConfig,
    samples: usize,
    gamma1s: &[f64],
    gamma2s: &[f64],
    support_lbs: &[Option<f64>],
    solve_cfg: &SolveConfig,
) -> Result<Vec<SweepCell>> {
    let inst = crate::flp::to_bilevel(cfg)?;
    let demand_samples = sample_demands(cfg, samples, solve_cfg.seed)?;
    let (mu0, sigma0) = crate::moments::estimate_moments(&demand_samples)?;
    let mut cells = Vec::new();
    for &g1 in gamma1s {
        for &g2 in gamma2s {
            for &lb in support_lbs {
                cells.push((g1, g2, lb));
            }
        }
    }
    let results: Vec<Result<SweepCell>> = cells
        .par_iter()
        .map(|&(g1, g2, lb)| {
            let amb = MomentAmbiguity::new(
                mu0.clone(),
                sigma0.clone(),
                g1,
                g2,
                crate::flp::support_domain(cfg, lb),
            )?;
            let report = solve(&inst, &amb, solve_cfg)?;
            Ok(SweepCell {
                gamma1: g1,
                gamma2: g2,
                support_lb: lb,
                value: report.value,
                profit: report.profit,
                x_star: report.x_star,
            })
        })
        .collect();
    results.into_iter().collect()
}

pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("gamma1,gamma2,support_lb,value,profit,x_star\n");
    for c in cells {
        let lb = c.support_lb.map_or(String::from(""), |v| format!("{v}"));
        let xs: String = c.x_star.iter().map(|b| char::from(b'0' + b)).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.gamma1, c.gamma2, lb, c.value, c.profit, xs
        ));
    }
    out
}

pub fn gaps_csv(records: &[GapRecord]) -> String {
    let mut out = String::from("method,v_approx,v_dis,gap_percent\n");
    for r in records {
        out.push_str(&format!("{},{},{},{}\n", r.method, r.v_approx, r.v_dis, r.gap_percent));
    }
    out
}

/// One out-of-sample replication: the mean realized profit of a fixed
/// leader decision under freshly drawn demands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OosReplication {
    pub replication: usize,
    pub n_samples: usize,
    pub expected_profit: f64,
}

/// Simulate a fixed leader decision out of sample: per replication draw
/// `n_samples` demands from `law` and average
/// `−(wᵀx + Ψ(x, ξ))` through the exact pessimistic oracle.
pub fn out_of_sample(
    inst: &BilevelInstance,
    cfg: &FacilityConfig,
    x: &DVector<f64>,
    law: &DemandLaw,
    n_samples: usize,
    replications: usize,
    seed: u64,
) -> Result<Vec<OosReplication>> {
    law.validate()?;
    let mut law_cfg = cfg.clone();
    law_cfg.demand_law = law.clone();
    let fixed_cost = inst.w.dot(x);
    let reps: Vec<Result<OosReplication>> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let draws = sample_demands(&law_cfg, n_samples, seed.wrapping_add(rep as u64))?;
            let total: Result<f64> = draws
                .par_iter()
                .map(|xi| {
                    oracle::pessimistic_value(inst, x, xi).map(|o| o.pessimistic_value)
                })
                .try_reduce(|| 0.0, |a, b| Ok(a + b));
            let mean_psi = total? / n_samples as f64;
            Ok(OosReplication {
                replication: rep,
                n_samples,
                expected_profit: -(fixed_cost + mean_psi),
            })
        })
        .collect();
    reps.into_iter().collect()
}

pub fn oos_csv(rows: &[OosReplication], law: &DemandLaw) -> String {
    let law_name = match law {
        DemandLaw::Uniform { lo, hi } => format!("uniform({lo},{hi})"),
        DemandLaw::TruncatedNormal { mean, std, lo, hi } => {
            format!("truncnormal({mean},{std},{lo},{hi})")
        }
    };
    let mut out = String::from("replication,n_samples,law,expected_profit\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.replication, r.n_samples, law_name, r.expected_profit
        ));
    }
    out
}
