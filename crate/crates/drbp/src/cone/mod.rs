//! Backend-agnostic conic programs: linear, second-order, and PSD blocks.
//!
//! Model modules build a [`ConeProgram`] through [`ConeProgramBuilder`],
//! writing matrix equations directly with [`AffMat`] expressions; the builder
//! owns the svec scaling and symmetrization of PSD blocks. Solving is
//! delegated to a single interior-point backend (Clarabel) behind
//! [`ConeProgram::solve`], which reports certified statuses and dual
//! multipliers for every constraint.
//!
//! Binary variable blocks may be declared for mixed-binary models, but the
//! backend never solves integrality: binary blocks must be pinned to
//! concrete values with [`ConeProgram::pin_binary`] first (enumeration over
//! the leader set is handled by callers).

mod expr;

pub use expr::{AffMat, LinExpr};

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::{DMatrix, DVector};

use crate::{DrbpError, Result};

/// Handle to a scalar variable.
#[derive(Debug, Clone, Copy)]
pub struct ScalarVar {
    pub(crate) idx: usize,
}

/// Handle to a vector variable block.
#[derive(Debug, Clone, Copy)]
pub struct VecVar {
    pub(crate) offset: usize,
    pub dim: usize,
}

/// Handle to a general (dense) matrix variable block, row-major.
#[derive(Debug, Clone, Copy)]
pub struct MatVar {
    pub(crate) offset: usize,
    pub rows: usize,
    pub cols: usize,
}

/// Handle to a symmetric matrix variable block; stores the upper triangle
/// column-major, so `k(k+1)/2` scalars for a `k×k` block.
#[derive(Debug, Clone, Copy)]
pub struct SymVar {
    pub(crate) offset: usize,
    pub dim: usize,
}

fn tri_index(offset: usize, i: usize, j: usize) -> usize {
    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
    offset + hi * (hi + 1) / 2 + lo
}

/// Cone attached to a constraint block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    /// Affine rows equal to zero.
    Zero,
    /// Affine rows nonnegative.
    NonNeg,
    /// `rows = [t, v₁, …, v_p]` with `‖v‖₂ ≤ t`.
    SecondOrder,
    /// Upper triangle (column-major) of a symmetric `k×k` PSD matrix.
    Psd(usize),
}

/// Identifier returned when adding a constraint; indexes dual multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintId(pub usize);

#[derive(Debug, Clone)]
struct ConstraintData {
    kind: ConeKind,
    rows: Vec<LinExpr>,
    label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone)]
struct BlockInfo {
    name: String,
    offset: usize,
    len: usize,
    shape: String,
}

/// Builder for [`ConeProgram`].
#[derive(Debug, Clone)]
pub struct ConeProgramBuilder {
    nvars: usize,
    blocks: Vec<BlockInfo>,
    binary: Vec<VecVar>,
    sense: Sense,
    objective: LinExpr,
    constraints: Vec<ConstraintData>,
}

impl Default for ConeProgramBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl ConeProgramBuilder {
    pub fn new() -> Self {
        ConeProgramBuilder {
            nvars: 0,
            blocks: Vec::new(),
            binary: Vec::new(),
            sense: Sense::Minimize,
            objective: LinExpr::default(),
            constraints: Vec::new(),
        }
    }

    fn push_block(&mut self, name: &str, len: usize, shape: String) -> usize {
        let offset = self.nvars;
        self.nvars += len;
        self.blocks.push(BlockInfo { name: name.to_string(), offset, len, shape });
        offset
    }

    pub fn scalar(&mut self, name: &str) -> ScalarVar {
        let idx = self.push_block(name, 1, "scalar".into());
        ScalarVar { idx }
    }

    pub fn vector(&mut self, name: &str, dim: usize) -> VecVar {
        let offset = self.push_block(name, dim, format!("vec[{dim}]"));
        VecVar { offset, dim }
    }

    pub fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> MatVar {
        let offset = self.push_block(name, rows * cols, format!("mat[{rows}x{cols}]"));
        MatVar { offset, rows, cols }
    }

    pub fn symmetric(&mut self, name: &str, dim: usize) -> SymVar {
        let offset = self.push_block(name, dim * (dim + 1) / 2, format!("sym[{dim}]"));
        SymVar { offset, dim }
    }

    /// Declare a binary vector block. The backend refuses to solve until it
    /// is pinned to concrete values.
    pub fn binary_vector(&mut self, name: &str, dim: usize) -> VecVar {
        let v = self.vector(name, dim);
        self.binary.push(v);
        v
    }

    pub fn se(&self, v: ScalarVar) -> LinExpr {
        LinExpr::variable(v.idx)
    }

    pub fn ve(&self, v: VecVar) -> AffMat {
        AffMat::from_entries(
            v.dim,
            1,
            (0..v.dim).map(|i| LinExpr::variable(v.offset + i)).collect(),
        )
    }

    pub fn me(&self, m: MatVar) -> AffMat {
        AffMat::from_entries(
            m.rows,
            m.cols,
            (0..m.rows * m.cols).map(|i| LinExpr::variable(m.offset + i)).collect(),
        )
    }

    pub fn syme(&self, s: SymVar) -> AffMat {
        let mut entries = Vec::with_capacity(s.dim * s.dim);
        for i in 0..s.dim {
            for j in 0..s.dim {
                entries.push(LinExpr::variable(tri_index(s.offset, i, j)));
            }
        }
        AffMat::from_entries(s.dim, s.dim, entries)
    }

    pub fn minimize(&mut self, e: LinExpr) {
        self.sense = Sense::Minimize;
        self.objective = e;
    }

    pub fn maximize(&mut self, e: LinExpr) {
        self.sense = Sense::Maximize;
        self.objective = e;
    }

    fn push_constraint(&mut self, kind: ConeKind, rows: Vec<LinExpr>, label: &str) -> ConstraintId {
        let id = ConstraintId(self.constraints.len());
        self.constraints.push(ConstraintData { kind, rows, label: label.to_string() });
        id
    }

    /// All entries of `m` equal zero.
    pub fn zero(&mut self, m: &AffMat, label: &str) -> ConstraintId {
        self.push_constraint(ConeKind::Zero, m.iter().cloned().collect(), label)
    }

    /// All entries of `m` nonnegative.
    pub fn nonneg(&mut self, m: &AffMat, label: &str) -> ConstraintId {
        self.push_constraint(ConeKind::NonNeg, m.iter().cloned().collect(), label)
    }

    /// Scalar inequality `e ≥ 0`.
    pub fn nonneg_scalar(&mut self, e: LinExpr, label: &str) -> ConstraintId {
        self.push_constraint(ConeKind::NonNeg, vec![e], label)
    }

    /// `‖v‖₂ ≤ t`. An empty vector part degenerates to `t ≥ 0`.
    pub fn soc(&mut self, t: LinExpr, v: &AffMat, label: &str) -> ConstraintId {
        if v.rows * v.cols == 0 {
            return self.nonneg_scalar(t, label);
        }
        let mut rows = vec![t];
        rows.extend(v.iter().cloned());
        self.push_constraint(ConeKind::SecondOrder, rows, label)
    }

    /// `m ⪰ 0` for a square affine matrix; the builder symmetrizes.
    pub fn psd(&mut self, m: &AffMat, label: &str) -> ConstraintId {
        assert_eq!(m.rows, m.cols, "psd block must be square");
        let k = m.rows;
        let sym = m.symmetrized();
        // Upper triangle, column-major (svec order, unscaled here).
        let mut rows = Vec::with_capacity(k * (k + 1) / 2);
        for j in 0..k {
            for i in 0..=j {
                rows.push(sym.entry(i, j).clone());
            }
        }
        self.push_constraint(ConeKind::Psd(k), rows, label)
    }

    pub fn build(self) -> ConeProgram {
        ConeProgram {
            nvars: self.nvars,
            blocks: self.blocks,
            binary: self.binary,
            sense: self.sense,
            objective: self.objective.normalized(),
            constraints: self.constraints,
        }
    }
}

/// Immutable conic program; solve with [`ConeProgram::solve`].
#[derive(Debug, Clone)]
pub struct ConeProgram {
    nvars: usize,
    blocks: Vec<BlockInfo>,
    binary: Vec<VecVar>,
    sense: Sense,
    objective: LinExpr,
    constraints: Vec<ConstraintData>,
}

/// Solve tolerances and controls.
#[derive(Debug, Clone)]
pub struct SolveOpts {
    pub tol: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for SolveOpts {
    fn default() -> Self {
        SolveOpts { tol: 1e-8, max_iter: 400, verbose: false }
    }
}

/// Certified outcome of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalTrouble,
}

/// Backend residuals at termination.
#[derive(Debug, Clone, Copy, Default)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap_abs: f64,
    pub iterations: u32,
}

/// Primal/dual solution of a [`ConeProgram`].
#[derive(Debug, Clone)]
pub struct ConeSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Objective in the user's sense (includes any affine constant).
    pub objective: f64,
    pub dual_objective: f64,
    pub residuals: Residuals,
    duals: Vec<(ConeKind, Vec<f64>)>,
}

impl ConeSolution {
    pub fn value(&self, v: ScalarVar) -> f64 {
        self.x[v.idx]
    }

    pub fn vec(&self, v: VecVar) -> DVector<f64> {
        DVector::from_iterator(v.dim, self.x[v.offset..v.offset + v.dim].iter().copied())
    }

    pub fn mat(&self, m: MatVar) -> DMatrix<f64> {
        DMatrix::from_row_iterator(
            m.rows,
            m.cols,
            self.x[m.offset..m.offset + m.rows * m.cols].iter().copied(),
        )
    }

    pub fn sym(&self, s: SymVar) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(s.dim, s.dim);
        for i in 0..s.dim {
            for j in 0..s.dim {
                out[(i, j)] = self.x[tri_index(s.offset, i, j)];
            }
        }
        out
    }

    /// Raw dual multiplier block for a constraint. For PSD constraints the
    /// scaled-svec dual is expanded into a full symmetric matrix stored
    /// row-major; other cones return their rows directly.
    pub fn dual(&self, id: ConstraintId) -> Vec<f64> {
        let (kind, raw) = &self.duals[id.0];
        match kind {
            ConeKind::Psd(k) => {
                let mut m = vec![0.0; k * k];
                let mut idx = 0;
                for j in 0..*k {
                    for i in 0..=j {
                        let v = if i == j { raw[idx] } else { raw[idx] / std::f64::consts::SQRT_2 };
                        m[i * k + j] = v;
                        m[j * k + i] = v;
                        idx += 1;
                    }
                }
                m
            }
            _ => raw.clone(),
        }
    }

    /// Treat any non-optimal status as an error.
    pub fn into_optimal(self, what: &str) -> Result<ConeSolution> {
        match self.status {
            SolveStatus::Optimal => Ok(self),
            SolveStatus::Infeasible => Err(DrbpError::Infeasible(what.to_string())),
            SolveStatus::Unbounded => Err(DrbpError::Unbounded(what.to_string())),
            SolveStatus::NumericalTrouble => Err(DrbpError::Numerical(format!(
                "{what}: residuals primal={:.3e} dual={:.3e} gap={:.3e} after {} iterations",
                self.residuals.primal,
                self.residuals.dual,
                self.residuals.gap_abs,
                self.residuals.iterations
            ))),
        }
    }
}

impl ConeProgram {
    pub fn num_vars(&self) -> usize {
        self.nvars
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Pin a declared binary block to concrete values by appending equality
    /// rows. Returns a program the backend accepts.
    pub fn pin_binary(&self, block: VecVar, values: &[f64]) -> Result<ConeProgram> {
        if values.len() != block.dim {
            return Err(DrbpError::Dimension(format!(
                "pin_binary: got {} values for block of dim {}",
                values.len(),
                block.dim
            )));
        }
        let mut prog = self.clone();
        let rows = (0..block.dim)
            .map(|i| LinExpr::term(block.offset + i, 1.0).add_const(-values[i]))
            .collect();
        prog.constraints.push(ConstraintData {
            kind: ConeKind::Zero,
            rows,
            label: "pin-binary".into(),
        });
        prog.binary.retain(|b| b.offset != block.offset);
        Ok(prog)
    }

    /// Solve with the configured backend.
    pub fn solve(&self, opts: &SolveOpts) -> Result<ConeSolution> {
        if !self.binary.is_empty() {
            return Err(DrbpError::Invalid(
                "program has unpinned binary blocks; pin_binary before solving".into(),
            ));
        }

        // Objective vector (backend always minimizes).
        let obj_sign = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut q = vec![0.0; self.nvars];
        for &(i, c) in &self.objective.terms {
            q[i] += obj_sign * c;
        }

        // Assemble constraint rows: s = b - Ax ∈ K with s equal to the
        // expression value, so A gets the negated coefficients.
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        let mut b: Vec<f64> = Vec::new();
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        let mut row0 = 0usize;
        for c in &self.constraints {
            let mut emit = |rows: &[LinExpr], scales: Option<&[f64]>| {
                for (r, e) in rows.iter().enumerate() {
                    let s = scales.map_or(1.0, |sc| sc[r]);
                    let e = e.normalized();
                    for &(col, coef) in &e.terms {
                        triplets.push((row0 + r, col, -s * coef));
                    }
                    b.push(s * e.constant);
                }
                row0 += rows.len();
            };
            match c.kind {
                ConeKind::Zero => {
                    if c.rows.is_empty() {
                        continue;
                    }
                    cones.push(SupportedConeT::ZeroConeT(c.rows.len()));
                    emit(&c.rows, None);
                }
                ConeKind::NonNeg => {
                    if c.rows.is_empty() {
                        continue;
                    }
                    cones.push(SupportedConeT::NonnegativeConeT(c.rows.len()));
                    emit(&c.rows, None);
                }
                ConeKind::SecondOrder => {
                    cones.push(SupportedConeT::SecondOrderConeT(c.rows.len()));
                    emit(&c.rows, None);
                }
                ConeKind::Psd(k) => {
                    let mut scales = Vec::with_capacity(c.rows.len());
                    for j in 0..k {
                        for i in 0..=j {
                            scales.push(if i == j { 1.0 } else { std::f64::consts::SQRT_2 });
                        }
                    }
                    cones.push(SupportedConeT::PSDTriangleConeT(k));
                    emit(&c.rows, Some(&scales));
                }
            }
        }
        let m = row0;
        let a = csc_from_triplets(m, self.nvars, &mut triplets);
        let p = CscMatrix::zeros((self.nvars, self.nvars));

        let settings = DefaultSettingsBuilder::default()
            .verbose(opts.verbose)
            .max_iter(opts.max_iter)
            .tol_feas(opts.tol)
            .tol_gap_abs(opts.tol)
            .tol_gap_rel(opts.tol)
            .build()
            .map_err(|e| DrbpError::Invalid(format!("solver settings: {e}")))?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
            .map_err(|e| DrbpError::Invalid(format!("backend rejected program: {e:?}")))?;
        solver.solve();

        let status = match solver.solution.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveStatus::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                SolveStatus::Unbounded
            }
            _ => SolveStatus::NumericalTrouble,
        };

        let info = &solver.info;
        let residuals = Residuals {
            primal: info.res_primal,
            dual: info.res_dual,
            gap_abs: info.gap_abs,
            iterations: info.iterations,
        };

        let x = solver.solution.x.clone();
        let objective = obj_sign * solver.solution.obj_val + self.objective.constant;
        let dual_objective = obj_sign * info.cost_dual + self.objective.constant;

        // Slice duals back out per constraint, in emission order.
        let mut duals = Vec::with_capacity(self.constraints.len());
        let mut at = 0usize;
        for c in &self.constraints {
            let len = c.rows.len();
            let block = solver.solution.z[at..at + len].to_vec();
            at += len;
            duals.push((c.kind, block));
        }

        Ok(ConeSolution { status, x, objective, dual_objective, residuals, duals })
    }

    /// Text dump: one sparse triplet line per constraint row, for external
    /// verification.
    pub fn dump(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = writeln!(s, "conic program: {} vars, {} constraints", self.nvars, self.constraints.len());
        for blk in &self.blocks {
            let _ = writeln!(s, "block {:<12} {} offset={} len={}", blk.name, blk.shape, blk.offset, blk.len);
        }
        let sense = match self.sense {
            Sense::Minimize => "min",
            Sense::Maximize => "max",
        };
        let _ = write!(s, "objective {sense}:");
        for &(i, c) in &self.objective.terms {
            let _ = write!(s, " {i}:{c:.12e}");
        }
        let _ = writeln!(s, " const={:.12e}", self.objective.constant);
        for (ci, c) in self.constraints.iter().enumerate() {
            let _ = writeln!(s, "constraint {ci} [{}] {:?} rows={}", c.label, c.kind, c.rows.len());
            for (ri, e) in c.rows.iter().enumerate() {
                let e = e.normalized();
                let _ = write!(s, "  r{ri}:");
                for &(i, co) in &e.terms {
                    let _ = write!(s, " {i}:{co:.12e}");
                }
                let _ = writeln!(s, " const={:.12e}", e.constant);
            }
        }
        s
    }
}

fn csc_from_triplets(m: usize, n: usize, triplets: &mut [(usize, usize, f64)]) -> CscMatrix<f64> {
    triplets.sort_by_key(|&(r, c, _)| (c, r));
    let mut colptr = vec![0usize; n + 1];
    let mut rowval: Vec<usize> = Vec::with_capacity(triplets.len());
    let mut nzval: Vec<f64> = Vec::with_capacity(triplets.len());
    let mut last: Option<(usize, usize)> = None;
    for &(r, c, v) in triplets.iter() {
        if last == Some((c, r)) {
            *nzval.last_mut().unwrap() += v;
        } else {
            rowval.push(r);
            nzval.push(v);
            colptr[c + 1] = rowval.len();
            last = Some((c, r));
        }
    }
    for c in 1..=n {
        if colptr[c] < colptr[c - 1] {
            colptr[c] = colptr[c - 1];
        }
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dim_lp() {
        // min x s.t. x >= 1 -> x* = 1, dual multiplier 1.
        let mut pb = ConeProgramBuilder::new();
        let x = pb.scalar("x");
        pb.minimize(pb.se(x));
        let c = pb.nonneg_scalar(pb.se(x).add_const(-1.0), "x>=1");
        let prog = pb.build();
        let sol = prog.solve(&SolveOpts::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.value(x) - 1.0).abs() < 1e-7);
        assert!((sol.objective - 1.0).abs() < 1e-7);
        assert!((sol.dual(c)[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn two_by_two_psd() {
        // min t s.t. [[t,1],[1,t]] ⪰ 0 -> t* = 1.
        let mut pb = ConeProgramBuilder::new();
        let t = pb.scalar("t");
        pb.minimize(pb.se(t));
        let mut m = AffMat::zeros(2, 2);
        m.set(0, 0, pb.se(t));
        m.set(1, 1, pb.se(t));
        m.set(0, 1, LinExpr::constant(1.0));
        m.set(1, 0, LinExpr::constant(1.0));
        pb.psd(&m, "det");
        let prog = pb.build();
        let sol = prog.solve(&SolveOpts::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.value(t) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn soc_norm_bound() {
        // min t s.t. ‖(3,4)‖ ≤ t -> t* = 5.
        let mut pb = ConeProgramBuilder::new();
        let t = pb.scalar("t");
        pb.minimize(pb.se(t));
        let v = AffMat::from_const_vec(&DVector::from_vec(vec![3.0, 4.0]));
        pb.soc(pb.se(t), &v, "norm");
        let sol = pb.build().solve(&SolveOpts::default()).unwrap();
        assert!((sol.value(t) - 5.0).abs() < 1e-7);
    }

    #[test]
    fn infeasible_detected() {
        let mut pb = ConeProgramBuilder::new();
        let x = pb.scalar("x");
        pb.minimize(pb.se(x));
        pb.nonneg_scalar(pb.se(x).add_const(-1.0), "x>=1");
        pb.nonneg_scalar(pb.se(x).scale(-1.0), "x<=0");
        let sol = pb.build().solve(&SolveOpts::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut pb = ConeProgramBuilder::new();
        let x = pb.scalar("x");
        pb.minimize(pb.se(x));
        pb.nonneg_scalar(pb.se(x).scale(-1.0), "x<=0");
        let sol = pb.build().solve(&SolveOpts::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Unbounded);
    }

    #[test]
    fn maximize_sense_and_duality_gap() {
        // max 2x s.t. x <= 3 -> 6; dual objective equals primal at optimum.
        let mut pb = ConeProgramBuilder::new();
        let x = pb.scalar("x");
        pb.maximize(pb.se(x).scale(2.0));
        pb.nonneg_scalar(pb.se(x).scale(-1.0).add_const(3.0), "x<=3");
        let sol = pb.build().solve(&SolveOpts::default()).unwrap();
        assert!((sol.objective - 6.0).abs() < 1e-7);
        assert!((sol.objective - sol.dual_objective).abs() <= 1e-6 * (1.0 + sol.objective.abs()));
    }

    #[test]
    fn binary_must_be_pinned() {
        let mut pb = ConeProgramBuilder::new();
        let x = pb.binary_vector("x", 2);
        let t = pb.scalar("t");
        pb.minimize(pb.se(t));
        let sum = pb.ve(x).dot(&DVector::from_vec(vec![1.0, 1.0]));
        pb.nonneg_scalar(pb.se(t).sub(&sum), "t>=x1+x2");
        let prog = pb.build();
        assert!(prog.solve(&SolveOpts::default()).is_err());
        let pinned = prog.pin_binary(x, &[1.0, 0.0]).unwrap();
        let sol = pinned.solve(&SolveOpts::default()).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-7);
    }

    #[test]
    fn sym_block_roundtrip() {
        // min tr(Q) s.t. Q ⪰ 0, Q00 >= 2, Q11 >= 1, reading back symmetric value.
        let mut pb = ConeProgramBuilder::new();
        let q = pb.symmetric("Q", 2);
        let qe = pb.syme(q);
        pb.minimize(qe.entry(0, 0).add(qe.entry(1, 1)));
        pb.nonneg_scalar(qe.entry(0, 0).add_const(-2.0), "q00");
        pb.nonneg_scalar(qe.entry(1, 1).add_const(-1.0), "q11");
        pb.psd(&qe, "Q-psd");
        let sol = pb.build().solve(&SolveOpts::default()).unwrap();
        let qm = sol.sym(q);
        assert!((qm[(0, 0)] - 2.0).abs() < 1e-6);
        assert!((qm[(1, 1)] - 1.0).abs() < 1e-6);
        assert!((qm[(0, 1)] - qm[(1, 0)]).abs() < 1e-12);
    }

    #[test]
    fn dump_contains_triplets() {
        let mut pb = ConeProgramBuilder::new();
        let x = pb.scalar("x");
        pb.minimize(pb.se(x));
        pb.nonneg_scalar(pb.se(x).add_const(-1.0), "bound");
        let d = pb.build().dump();
        assert!(d.contains("objective min"));
        assert!(d.contains("bound"));
    }
}
