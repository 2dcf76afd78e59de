//! Benders-style cutting-plane loop over a pluggable subproblem provider:
//! a relaxed master over the binary leader set accumulates affine optimality
//! cuts `ν ≥ uᵀx + a` until the bound gap closes.

use std::time::Instant;

use nalgebra::DVector;

use crate::instance::BilevelInstance;
use crate::{DrbpError, Result};

/// Affine lower bound `ν ≥ uᵀx + a` on the worst-case second-stage cost,
/// tight at the generating point.
#[derive(Debug, Clone)]
pub struct Cut {
    pub u: DVector<f64>,
    pub a: f64,
    /// Provider that produced the cut.
    pub source: &'static str,
    /// Leader decision the cut was generated at.
    pub generated_at: DVector<f64>,
    /// Subproblem value at the generating point.
    pub tight_value: f64,
}

impl Cut {
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.u.dot(x) + self.a
    }

    /// Constructor that enforces tightness at the generating point; a
    /// violation signals a dual-extraction bug upstream.
    pub fn checked(
        u: DVector<f64>,
        a: f64,
        source: &'static str,
        generated_at: DVector<f64>,
        tight_value: f64,
    ) -> Result<Cut> {
        let cut = Cut { u, a, source, generated_at, tight_value };
        let at = cut.eval(&cut.generated_at);
        let tol = 1e-5 * (1.0 + tight_value.abs());
        if (at - tight_value).abs() > tol {
            return Err(DrbpError::Numerical(format!(
                "{source} cut not tight at its generating point: cut gives {at}, subproblem {tight_value}"
            )));
        }
        Ok(cut)
    }
}

/// Subproblem outcome fed back into the master.
#[derive(Debug, Clone)]
pub struct ProviderOutcome {
    pub value: f64,
    pub cut: Cut,
}

/// A fixed-leader worst-case-cost evaluator with a closed-form optimality
/// cut. Implemented by the decision-rule, copositive-route, and
/// discrete-exact formulations.
pub trait CutProvider {
    fn id(&self) -> &'static str;
    fn subproblem(&self, x: &DVector<f64>) -> Result<ProviderOutcome>;
}

/// Result of one master solve.
#[derive(Debug, Clone)]
pub struct MasterSolution {
    pub x: DVector<f64>,
    /// `-∞` while no cut constrains the epigraph variable.
    pub nu: f64,
    pub value: f64,
}

/// Exact relaxed master over `LeaderSet × ν` by enumeration: per candidate
/// `x`, `ν(x)` is the max over pooled cuts; ties break to the
/// lexicographically smallest `x`. With an empty pool this degenerates to
/// `argmin wᵀx` with `ν = -∞`.
pub fn solve_relaxed_master(
    inst: &BilevelInstance,
    candidates: &[DVector<f64>],
    cuts: &[Cut],
) -> Result<MasterSolution> {
    if candidates.is_empty() {
        return Err(DrbpError::Infeasible("leader set is empty".into()));
    }
    let mut best: Option<MasterSolution> = None;
    for x in candidates {
        let nu = cuts
            .iter()
            .map(|c| c.eval(x))
            .fold(f64::NEG_INFINITY, f64::max);
        let value = inst.w.dot(x) + nu;
        // strict < keeps the earliest (lexicographically smallest) argmin
        let better = match &best {
            None => true,
            Some(b) => {
                if cuts.is_empty() {
                    inst.w.dot(x) < inst.w.dot(&b.x) - 1e-12
                } else {
                    value < b.value - 1e-12
                }
            }
        };
        if better {
            best = Some(MasterSolution { x: x.clone(), nu, value });
        }
    }
    Ok(best.unwrap())
}

/// Engine controls. `epsilon` is relative: stop once
/// `UB - LB ≤ epsilon·(1 + |UB|)`.
#[derive(Debug, Clone)]
pub struct EngineOpts {
    pub epsilon: f64,
    pub max_iters: usize,
}

impl Default for EngineOpts {
    fn default() -> Self {
        EngineOpts { epsilon: 1e-5, max_iters: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineStatus {
    Converged,
    /// Master repeated a cut point without bound movement.
    Stalled,
    IterationCap,
}

/// One master/subproblem round.
#[derive(Debug, Clone)]
pub struct IterRecord {
    pub lb: f64,
    pub ub: f64,
    pub x: DVector<f64>,
    pub subproblem_value: f64,
}

/// Output of [`run`].
#[derive(Debug, Clone)]
pub struct EngineReport {
    pub status: EngineStatus,
    pub value: f64,
    pub x_star: DVector<f64>,
    pub iterations: usize,
    pub cuts: Vec<Cut>,
    pub trace: Vec<IterRecord>,
    pub wall_seconds: f64,
}

/// The cutting-plane loop: master → lower bound, subproblem at the master's
/// choice → upper bound and a tight cut, until the relative gap closes.
/// Providers' cuts are globally valid, so the loop terminates after at most
/// `|X|` rounds.
pub fn run(
    inst: &BilevelInstance,
    provider: &dyn CutProvider,
    opts: &EngineOpts,
) -> Result<EngineReport> {
    if opts.epsilon <= 0.0 {
        return Err(DrbpError::Invalid("epsilon must be positive".into()));
    }
    let started = Instant::now();
    let candidates = inst.leader_set.enumerate()?;
    let mut cuts: Vec<Cut> = Vec::new();
    let mut trace: Vec<IterRecord> = Vec::new();
    let mut lb = f64::NEG_INFINITY;
    let mut ub = f64::INFINITY;
    let mut incumbent: Option<DVector<f64>> = None;
    let mut seen: Vec<DVector<f64>> = Vec::new();

    for iter in 0..opts.max_iters {
        let master = solve_relaxed_master(inst, &candidates, &cuts)?;
        lb = lb.max(master.value);

        let out = provider.subproblem(&master.x).map_err(|e| {
            DrbpError::Numerical(format!(
                "{} subproblem failed at iteration {iter} (x = {:?}): {e}",
                provider.id(),
                master.x.iter().map(|v| *v as u8).collect::<Vec<_>>()
            ))
        })?;
        let total = inst.w.dot(&master.x) + out.value;
        let improved = total < ub - 1e-12;
        if total < ub {
            ub = total;
            incumbent = Some(master.x.clone());
        }

        let repeat = seen.iter().any(|x| x == &master.x);
        seen.push(master.x.clone());
        cuts.push(out.cut);

        // The master is a cheap enumeration, so refresh the lower bound with
        // the new cut pooled before testing the gap.
        let lb_before = lb;
        lb = lb.max(solve_relaxed_master(inst, &candidates, &cuts)?.value);
        trace.push(IterRecord { lb, ub, x: master.x.clone(), subproblem_value: out.value });

        if ub - lb <= opts.epsilon * (1.0 + ub.abs()) {
            return Ok(EngineReport {
                status: EngineStatus::Converged,
                value: ub,
                x_star: incumbent.unwrap(),
                iterations: iter + 1,
                cuts,
                trace,
                wall_seconds: started.elapsed().as_secs_f64(),
            });
        }

        if repeat && !improved && (lb - lb_before).abs() <= 1e-9 {
            return Ok(EngineReport {
                status: EngineStatus::Stalled,
                value: ub,
                x_star: incumbent.unwrap(),
                iterations: iter + 1,
                cuts,
                trace,
                wall_seconds: started.elapsed().as_secs_f64(),
            });
        }
    }

    Ok(EngineReport {
        status: EngineStatus::IterationCap,
        value: ub,
        x_star: incumbent
            .ok_or_else(|| DrbpError::Numerical("no incumbent after iteration cap".into()))?,
        iterations: opts.max_iters,
        cuts,
        trace,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::LeaderSet;
    use nalgebra::DMatrix;

    fn two_var_instance() -> BilevelInstance {
        // follower is irrelevant for master tests; minimal consistent data
        BilevelInstance::new(
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            vec![DMatrix::zeros(2, 1); 3],
            vec![DVector::from_vec(vec![1.0, 1.0]); 3],
            DMatrix::zeros(1, 1),
            DVector::from_vec(vec![1.0]),
            DMatrix::zeros(1, 1),
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![1.0, 2.0]),
            LeaderSet::new(
                2,
                vec![(DVector::from_vec(vec![1.0, 1.0]), 1.0)],
            )
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn master_with_one_cut() {
        // w = (1,2), X = {00,01,10}, cut ν >= -3x1 - 1.
        let inst = two_var_instance();
        let xs = inst.leader_set.enumerate().unwrap();
        let cut = Cut {
            u: DVector::from_vec(vec![-3.0, 0.0]),
            a: -1.0,
            source: "test",
            generated_at: DVector::from_vec(vec![1.0, 0.0]),
            tight_value: -4.0,
        };
        let sol = solve_relaxed_master(&inst, &xs, &[cut]).unwrap();
        assert_eq!(sol.x, DVector::from_vec(vec![1.0, 0.0]));
        assert!((sol.value - -3.0).abs() < 1e-12);
    }

    #[test]
    fn master_no_cuts_picks_cheapest_leader() {
        let inst = two_var_instance();
        let xs = inst.leader_set.enumerate().unwrap();
        let sol = solve_relaxed_master(&inst, &xs, &[]).unwrap();
        assert!(sol.nu.is_infinite() && sol.nu < 0.0);
        assert_eq!(sol.x, DVector::from_vec(vec![0.0, 0.0]));
    }

    #[test]
    fn dominated_cut_changes_nothing() {
        let inst = two_var_instance();
        let xs = inst.leader_set.enumerate().unwrap();
        let strong = Cut {
            u: DVector::from_vec(vec![-3.0, 0.0]),
            a: -1.0,
            source: "test",
            generated_at: DVector::from_vec(vec![1.0, 0.0]),
            tight_value: -4.0,
        };
        let dominated = Cut {
            u: DVector::from_vec(vec![-3.0, 0.0]),
            a: -2.0,
            source: "test",
            generated_at: DVector::from_vec(vec![1.0, 0.0]),
            tight_value: -5.0,
        };
        let a = solve_relaxed_master(&inst, &xs, std::slice::from_ref(&strong)).unwrap();
        let b = solve_relaxed_master(&inst, &xs, &[strong, dominated]).unwrap();
        assert_eq!(a.x, b.x);
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn cut_tightness_guard() {
        let bad = Cut::checked(
            DVector::from_vec(vec![1.0]),
            0.0,
            "test",
            DVector::from_vec(vec![1.0]),
            5.0,
        );
        assert!(bad.is_err());
        let good = Cut::checked(
            DVector::from_vec(vec![5.0]),
            0.0,
            "test",
            DVector::from_vec(vec![1.0]),
            5.0,
        );
        assert!(good.is_ok());
    }

    struct TableProvider {
        values: Vec<(DVector<f64>, f64)>,
    }

    impl CutProvider for TableProvider {
        fn id(&self) -> &'static str {
            "table"
        }
        fn subproblem(&self, x: &DVector<f64>) -> Result<ProviderOutcome> {
            let value = self
                .values
                .iter()
                .find(|(cx, _)| cx == x)
                .map(|(_, v)| *v)
                .unwrap();
            // a valid tight cut: point cut with big-M style drop elsewhere
            let min_all = self.values.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
            let d = x.len();
            let mut u = DVector::zeros(d);
            let drop = (value - min_all).abs() + 1.0;
            let mut a = value;
            for i in 0..d {
                if x[i] == 1.0 {
                    u[i] = drop;
                    a -= drop;
                } else {
                    u[i] = -drop;
                }
            }
            Ok(ProviderOutcome {
                value,
                cut: Cut::checked(u, a, "table", x.clone(), value)?,
            })
        }
    }

    #[test]
    fn engine_matches_enumeration_on_table() {
        let inst = two_var_instance();
        let provider = TableProvider {
            values: vec![
                (DVector::from_vec(vec![0.0, 0.0]), 4.0),
                (DVector::from_vec(vec![0.0, 1.0]), 0.5),
                (DVector::from_vec(vec![1.0, 0.0]), 1.0),
            ],
        };
        let report = run(&inst, &provider, &EngineOpts::default()).unwrap();
        assert_eq!(report.status, EngineStatus::Converged);
        // enumerate: w·x + v: 00 -> 4.0, 01 -> 2.5, 10 -> 2.0
        assert!((report.value - 2.0).abs() < 1e-9);
        assert_eq!(report.x_star, DVector::from_vec(vec![1.0, 0.0]));
        // bounds are monotone
        for w in report.trace.windows(2) {
            assert!(w[1].lb >= w[0].lb - 1e-12);
            assert!(w[1].ub <= w[0].ub + 1e-12);
        }
    }

    #[test]
    fn singleton_leader_set_one_iteration() {
        let mut inst = two_var_instance();
        inst.leader_set = LeaderSet::new(
            2,
            vec![
                (DVector::from_vec(vec![1.0, 0.0]), 0.0),
                (DVector::from_vec(vec![0.0, 1.0]), 0.0),
            ],
        )
        .unwrap();
        let provider = TableProvider {
            values: vec![(DVector::from_vec(vec![0.0, 0.0]), 7.0)],
        };
        let report = run(&inst, &provider, &EngineOpts::default()).unwrap();
        assert_eq!(report.iterations, 1);
        assert!((report.value - 7.0).abs() < 1e-9);
    }
}
