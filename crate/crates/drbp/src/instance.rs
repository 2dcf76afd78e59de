//! Problem data for the pessimistic bilevel program: follower constraint
//! system, affine uncertainty maps, and the binary leader feasible set.

use nalgebra::{DMatrix, DVector};

use crate::cone::{AffMat, ConeProgramBuilder, SolveOpts, SolveStatus};
use crate::moments::MomentAmbiguity;
use crate::{DrbpError, Result};

/// Binary leader feasible set `{x ∈ {0,1}^d : gᵀx ≤ rhs for each constraint}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderSet {
    pub d: usize,
    /// Linear constraints `gᵀx ≤ rhs`.
    pub constraints: Vec<(DVector<f64>, f64)>,
}

impl LeaderSet {
    /// Unconstrained set `{0,1}^d`.
    pub fn free(d: usize) -> Self {
        LeaderSet { d, constraints: Vec::new() }
    }

    pub fn new(d: usize, constraints: Vec<(DVector<f64>, f64)>) -> Result<Self> {
        for (g, _) in &constraints {
            if g.len() != d {
                return Err(DrbpError::Dimension(format!(
                    "leader constraint has {} coefficients, expected {d}",
                    g.len()
                )));
            }
        }
        Ok(LeaderSet { d, constraints })
    }

    pub fn is_feasible(&self, x: &DVector<f64>) -> bool {
        x.len() == self.d
            && x.iter().all(|&v| v == 0.0 || v == 1.0)
            && self.constraints.iter().all(|(g, rhs)| g.dot(x) <= rhs + 1e-12)
    }

    /// Coordinates pinned to zero by a single-variable constraint
    /// `g_i x_i ≤ rhs` with `g_i > 0` and `rhs/g_i < 1`.
    fn forced_zero(&self) -> Vec<bool> {
        let mut forced = vec![false; self.d];
        for (g, rhs) in &self.constraints {
            let nz: Vec<usize> = (0..self.d).filter(|&i| g[i] != 0.0).collect();
            if let [i] = nz[..] {
                if g[i] > 0.0 && rhs / g[i] < 1.0 - 1e-12 {
                    forced[i] = true;
                }
            }
        }
        forced
    }

    /// All feasible binary vectors in lexicographic order (coordinate 0 most
    /// significant). Enumeration runs over coordinates not obviously pinned
    /// to zero; every candidate is still checked against the full constraint
    /// list.
    pub fn enumerate(&self) -> Result<Vec<DVector<f64>>> {
        let forced = self.forced_zero();
        let free: Vec<usize> = (0..self.d).filter(|&i| !forced[i]).collect();
        if free.len() > 26 {
            return Err(DrbpError::Invalid(format!(
                "leader set enumeration over {} free binaries is too large",
                free.len()
            )));
        }
        let mut out = Vec::new();
        for mask in 0u64..(1u64 << free.len()) {
            let mut x = DVector::zeros(self.d);
            for (bit, &i) in free.iter().enumerate() {
                // free[0] is the most significant bit for lexicographic order
                if mask >> (free.len() - 1 - bit) & 1 == 1 {
                    x[i] = 1.0;
                }
            }
            if self.is_feasible(&x) {
                out.push(x);
            }
        }
        if out.is_empty() {
            return Err(DrbpError::Infeasible("leader set is empty".into()));
        }
        Ok(out)
    }
}

/// The full bilevel problem data.
///
/// The follower solves `min c(ξ)ᵀy s.t. Ay ≤ b_x(ξ)` with
/// `c(ξ) = Cξ + c₀`, `b_x(ξ) = B_x ξ + b_{x0}`,
/// `B_x = B₀ + Σᵢ xᵢ Bᵢ`, `b_{x0} = b₀ + Σᵢ xᵢ bᵢ`; the leader pays
/// `wᵀx` plus the pessimistic expectation of `v(ξ)ᵀy` with `v(ξ) = Vξ + v₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct BilevelInstance {
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub a: DMatrix<f64>,
    /// `B₀ … B_d`, each `m×k`.
    pub b_mats: Vec<DMatrix<f64>>,
    /// `b₀ … b_d`, each length `m`.
    pub b_vecs: Vec<DVector<f64>>,
    pub c_mat: DMatrix<f64>,
    pub c0: DVector<f64>,
    pub v_mat: DMatrix<f64>,
    pub v0: DVector<f64>,
    pub w: DVector<f64>,
    pub leader_set: LeaderSet,
}

impl BilevelInstance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: DMatrix<f64>,
        b_mats: Vec<DMatrix<f64>>,
        b_vecs: Vec<DVector<f64>>,
        c_mat: DMatrix<f64>,
        c0: DVector<f64>,
        v_mat: DMatrix<f64>,
        v0: DVector<f64>,
        w: DVector<f64>,
        leader_set: LeaderSet,
    ) -> Result<Self> {
        let m = a.nrows();
        let n = a.ncols();
        let d = leader_set.d;
        if b_mats.len() != d + 1 || b_vecs.len() != d + 1 {
            return Err(DrbpError::Dimension(format!(
                "need d+1 = {} rhs blocks, got {} matrices / {} vectors",
                d + 1,
                b_mats.len(),
                b_vecs.len()
            )));
        }
        let k = b_mats[0].ncols();
        for (i, bm) in b_mats.iter().enumerate() {
            if bm.nrows() != m || bm.ncols() != k {
                return Err(DrbpError::Dimension(format!("B_{i} is not {m}×{k}")));
            }
        }
        for (i, bv) in b_vecs.iter().enumerate() {
            if bv.len() != m {
                return Err(DrbpError::Dimension(format!("b_{i} is not length {m}")));
            }
        }
        if c_mat.nrows() != n || c_mat.ncols() != k || c0.len() != n {
            return Err(DrbpError::Dimension("c(ξ) blocks inconsistent".into()));
        }
        if v_mat.nrows() != n || v_mat.ncols() != k || v0.len() != n {
            return Err(DrbpError::Dimension("v(ξ) blocks inconsistent".into()));
        }
        if w.len() != d {
            return Err(DrbpError::Dimension("w is not length d".into()));
        }
        let inst =
            BilevelInstance { d, n, m, k, a, b_mats, b_vecs, c_mat, c0, v_mat, v0, w, leader_set };
        if !inst.all_finite() {
            return Err(DrbpError::Invalid("instance contains non-finite entries".into()));
        }
        Ok(inst)
    }

    fn all_finite(&self) -> bool {
        let mats = std::iter::once(&self.a)
            .chain(self.b_mats.iter())
            .chain([&self.c_mat, &self.v_mat]);
        let vecs = self.b_vecs.iter().chain([&self.c0, &self.v0, &self.w]);
        mats.flat_map(|m| m.iter()).all(|v| v.is_finite())
            && vecs.flat_map(|v| v.iter()).all(|v| v.is_finite())
    }

    /// `(B_x, b_{x0})` for a binary leader decision.
    pub fn assemble_bx(&self, x: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
        if x.len() != self.d {
            return Err(DrbpError::Dimension(format!(
                "leader decision has length {}, expected {}",
                x.len(),
                self.d
            )));
        }
        let mut bx = self.b_mats[0].clone();
        let mut bx0 = self.b_vecs[0].clone();
        for i in 0..self.d {
            if x[i] != 0.0 {
                bx += &self.b_mats[i + 1] * x[i];
                bx0 += &self.b_vecs[i + 1] * x[i];
            }
        }
        Ok((bx, bx0))
    }

    /// `b_x(ξ)` at a concrete uncertainty realization.
    pub fn rhs_at(&self, x: &DVector<f64>, xi: &DVector<f64>) -> Result<DVector<f64>> {
        let (bx, bx0) = self.assemble_bx(x)?;
        Ok(bx * xi + bx0)
    }

    pub fn c_at(&self, xi: &DVector<f64>) -> DVector<f64> {
        &self.c_mat * xi + &self.c0
    }

    pub fn v_at(&self, xi: &DVector<f64>) -> DVector<f64> {
        &self.v_mat * xi + &self.v0
    }
}

/// Witness of a recourse violation.
#[derive(Debug, Clone)]
pub enum RecourseViolation {
    /// Direction `y` with `Ay ≤ 0`, `y ≠ 0`: follower set unbounded.
    RecessionRay(DVector<f64>),
    /// Leader decision and support point where `{Ay ≤ b_x(ξ)}` is empty.
    InfeasiblePoint { x: DVector<f64>, xi: DVector<f64>, slack_needed: f64 },
}

/// Diagnostic output of [`check_recourse`].
#[derive(Debug, Clone)]
pub struct RecourseReport {
    pub bounded: bool,
    pub feasible_everywhere: bool,
    pub violations: Vec<RecourseViolation>,
    pub points_checked: usize,
}

impl RecourseReport {
    pub fn pass(&self) -> bool {
        self.bounded && self.feasible_everywhere
    }
}

/// Verify relatively complete recourse: `{y : Ay ≤ 0} = {0}` (via 2n LPs
/// maximizing ±yⱼ), and feasibility of the follower polytope for every
/// enumerated leader decision at `samples` support points. Violations are
/// reported, not thrown.
pub fn check_recourse(
    inst: &BilevelInstance,
    amb: &MomentAmbiguity,
    samples: usize,
) -> Result<RecourseReport> {
    let opts = SolveOpts::default();
    let mut violations = Vec::new();

    // Boundedness: max ±y_j over {Ay <= 0}. Any positive optimum or
    // unbounded ray is a violation.
    let mut bounded = true;
    for j in 0..inst.n {
        for sign in [1.0, -1.0] {
            let mut pb = ConeProgramBuilder::new();
            let y = pb.vector("y", inst.n);
            let ye = pb.ve(y);
            let mut dir = DVector::zeros(inst.n);
            dir[j] = sign;
            pb.maximize(ye.dot(&dir));
            pb.nonneg(&ye.lmul(&inst.a).scale(-1.0), "Ay<=0");
            let sol = pb.build().solve(&opts)?;
            match sol.status {
                SolveStatus::Optimal if sol.objective > 1e-6 => {
                    bounded = false;
                    violations.push(RecourseViolation::RecessionRay(sol.vec(y)));
                }
                SolveStatus::Unbounded => {
                    bounded = false;
                    let mut ray = DVector::zeros(inst.n);
                    ray[j] = sign;
                    violations.push(RecourseViolation::RecessionRay(ray));
                }
                _ => {}
            }
        }
    }

    // Feasibility at sampled support points for every leader decision:
    // phase-1 LP min s s.t. Ay - s·1 <= b_x(ξ), s >= 0.
    let points = amb.sample_points(samples)?;
    let xs = inst.leader_set.enumerate()?;
    let mut feasible = true;
    for x in &xs {
        for xi in &points {
            let b = inst.rhs_at(x, xi)?;
            let mut pb = ConeProgramBuilder::new();
            let y = pb.vector("y", inst.n);
            let s = pb.scalar("s");
            pb.minimize(pb.se(s));
            pb.nonneg_scalar(pb.se(s), "s>=0");
            let mut lhs = AffMat::from_const_vec(&b).sub(&pb.ve(y).lmul(&inst.a));
            for i in 0..inst.m {
                let e = lhs.entry(i, 0).add(&pb.se(s));
                lhs.set(i, 0, e);
            }
            pb.nonneg(&lhs, "Ay-s<=b");
            let sol = pb.build().solve(&opts)?;
            let slack = sol.objective;
            if sol.status != SolveStatus::Optimal || slack > 1e-7 * (1.0 + b.abs().max()) {
                feasible = false;
                violations.push(RecourseViolation::InfeasiblePoint {
                    x: x.clone(),
                    xi: xi.clone(),
                    slack_needed: slack,
                });
            }
        }
    }

    Ok(RecourseReport {
        bounded,
        feasible_everywhere: feasible,
        violations,
        points_checked: points.len() * xs.len(),
    })
}

/// Canonical one-dimensional toy: follower `min y s.t. y ≥ ξ, y ≤ 10` with
/// leader cost `v = -2y` and no leader variables. Every quantity is
/// hand-checkable.
pub fn toy_e1() -> BilevelInstance {
    BilevelInstance::new(
        DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]),
        vec![DMatrix::from_row_slice(2, 1, &[-1.0, 0.0])],
        vec![DVector::from_vec(vec![0.0, 10.0])],
        DMatrix::zeros(1, 1),
        DVector::from_vec(vec![1.0]),
        DMatrix::zeros(1, 1),
        DVector::from_vec(vec![-2.0]),
        DVector::zeros(0),
        LeaderSet::free(0),
    )
    .expect("toy instance is well-formed")
}

/// Variant of [`toy_e1`] with a flat follower objective (`c₀ = 0`), which
/// makes the follower's optimal face the whole interval `[ξ, 10]`.
pub fn toy_e1_flat() -> BilevelInstance {
    let mut inst = toy_e1();
    inst.c0 = DVector::zeros(1);
    inst
}
