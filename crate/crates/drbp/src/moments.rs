//! Moment-based ambiguity sets: a mean ellipsoid around `μ₀`, a second-moment
//! cap `γ₂Σ₀`, and either a polyhedral support or a finite scenario list.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cone::{AffMat, ConeProgramBuilder, SolveOpts, SolveStatus};
use crate::linalg;
use crate::{DrbpError, Result};

/// Where the uncertainty lives.
#[derive(Debug, Clone, PartialEq)]
pub enum AmbiguityDomain {
    /// Polyhedral support `{ξ : Wξ ≥ h}` (continuous distributions).
    Support { w_mat: DMatrix<f64>, h: DVector<f64> },
    /// Finite scenario list (discrete distributions).
    Scenarios { points: Vec<DVector<f64>> },
}

/// Moment ambiguity set `(μ₀, Σ₀, γ₁, γ₂)` over a domain.
///
/// Distributions F with `P(ξ ∈ domain) = 1`,
/// `(E[ξ]−μ₀)ᵀΣ₀⁻¹(E[ξ]−μ₀) ≤ γ₁` and
/// `E[(ξ−μ₀)(ξ−μ₀)ᵀ] ⪯ γ₂Σ₀`.
#[derive(Debug, Clone)]
pub struct MomentAmbiguity {
    pub k: usize,
    pub mu0: DVector<f64>,
    /// Regularized to keep `Σ₀⁻¹` and `Σ₀^{1/2}` well defined.
    pub sigma0: DMatrix<f64>,
    pub gamma1: f64,
    pub gamma2: f64,
    pub domain: AmbiguityDomain,
    sigma_half: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
    /// Amount of `I` added by regularization (0 when none was needed).
    pub regularization: f64,
}

/// Regularization floor for `Σ₀`: eigenvalues must clear
/// `1e-8 · max(tr(Σ₀)/k, 1)`; otherwise that multiple of `I` is added.
pub fn sigma_floor(sigma: &DMatrix<f64>) -> f64 {
    let k = sigma.nrows() as f64;
    1e-8 * (sigma.trace() / k).max(1.0)
}

impl MomentAmbiguity {
    pub fn new(
        mu0: DVector<f64>,
        sigma0: DMatrix<f64>,
        gamma1: f64,
        gamma2: f64,
        domain: AmbiguityDomain,
    ) -> Result<Self> {
        let k = mu0.len();
        if sigma0.nrows() != k || sigma0.ncols() != k {
            return Err(DrbpError::Dimension(format!("sigma0 is not {k}×{k}")));
        }
        if (sigma0.clone() - sigma0.transpose()).abs().max() > 1e-8 * (1.0 + sigma0.abs().max()) {
            return Err(DrbpError::Invalid("sigma0 is not symmetric".into()));
        }
        if gamma1 < 0.0 {
            return Err(DrbpError::Invalid("gamma1 must be >= 0".into()));
        }
        if gamma2 < 1.0 {
            return Err(DrbpError::Invalid("gamma2 must be >= 1".into()));
        }
        match &domain {
            AmbiguityDomain::Support { w_mat, h } => {
                if w_mat.ncols() != k || w_mat.nrows() != h.len() {
                    return Err(DrbpError::Dimension("support rows inconsistent with k".into()));
                }
                if w_mat.nrows() == 0 {
                    return Err(DrbpError::Invalid("support needs at least one row".into()));
                }
            }
            AmbiguityDomain::Scenarios { points } => {
                if points.is_empty() {
                    return Err(DrbpError::Invalid("scenario list is empty".into()));
                }
                if points.iter().any(|p| p.len() != k) {
                    return Err(DrbpError::Dimension("scenario dimension mismatch".into()));
                }
            }
        }

        let sigma0 = linalg::symmetrize(&sigma0);
        let floor = sigma_floor(&sigma0);
        let min_eig = linalg::min_eigenvalue(&sigma0);
        let (sigma0, regularization) = if min_eig < floor {
            (sigma0 + DMatrix::identity(k, k) * floor, floor)
        } else {
            (sigma0, 0.0)
        };
        let sigma_half = linalg::sqrt_psd(&sigma0);
        let sigma_inv = linalg::inv_spd(&sigma0);
        Ok(MomentAmbiguity {
            k,
            mu0,
            sigma0,
            gamma1,
            gamma2,
            domain,
            sigma_half,
            sigma_inv,
            regularization,
        })
    }

    pub fn sigma_half(&self) -> &DMatrix<f64> {
        &self.sigma_half
    }

    pub fn sigma_inv(&self) -> &DMatrix<f64> {
        &self.sigma_inv
    }

    pub fn support(&self) -> Result<(&DMatrix<f64>, &DVector<f64>)> {
        match &self.domain {
            AmbiguityDomain::Support { w_mat, h } => Ok((w_mat, h)),
            AmbiguityDomain::Scenarios { .. } => {
                Err(DrbpError::Invalid("expected polyhedral support domain".into()))
            }
        }
    }

    pub fn scenarios(&self) -> Result<&[DVector<f64>]> {
        match &self.domain {
            AmbiguityDomain::Scenarios { points } => Ok(points),
            AmbiguityDomain::Support { .. } => {
                Err(DrbpError::Invalid("expected scenario domain".into()))
            }
        }
    }

    /// Replace the domain by a scenario list, keeping the moments.
    pub fn with_scenarios(&self, points: Vec<DVector<f64>>) -> Result<MomentAmbiguity> {
        MomentAmbiguity::new(
            self.mu0.clone(),
            self.sigma0.clone(),
            self.gamma1,
            self.gamma2,
            AmbiguityDomain::Scenarios { points },
        )
    }

    /// Deterministically choose representative points of the domain: the
    /// scenario list itself, or a seeded support sample.
    pub fn sample_points(&self, count: usize) -> Result<Vec<DVector<f64>>> {
        match &self.domain {
            AmbiguityDomain::Scenarios { points } => {
                Ok(points.iter().take(count.max(1)).cloned().collect())
            }
            AmbiguityDomain::Support { .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
                self.sample_support(count, &mut rng)
            }
        }
    }

    /// Hit-and-run samples from the polyhedral support, started at the
    /// Chebyshev center.
    pub fn sample_support(&self, count: usize, rng: &mut impl Rng) -> Result<Vec<DVector<f64>>> {
        let (w, h) = self.support()?;
        let checks = self.support_checks()?;
        let mut cur = checks.chebyshev_center.clone();
        let mut out = Vec::with_capacity(count);
        let burn_in = 32;
        let thin = self.k.max(2);
        let total = burn_in + count * thin;
        for step in 0..total {
            // random direction on the sphere
            let mut dir = DVector::from_iterator(
                self.k,
                (0..self.k).map(|_| {
                    let u: f64 = rng.random::<f64>() * 2.0 - 1.0;
                    u
                }),
            );
            let norm = dir.norm();
            if norm < 1e-12 {
                continue;
            }
            dir /= norm;
            // feasible segment cur + t*dir: w_i·cur + t·(w_i·dir) >= h_i
            let mut t_lo = f64::NEG_INFINITY;
            let mut t_hi = f64::INFINITY;
            for i in 0..w.nrows() {
                let wi = w.row(i).transpose();
                let slope = wi.dot(&dir);
                let slack = wi.dot(&cur) - h[i];
                if slope.abs() < 1e-14 {
                    continue;
                }
                let bound = -slack / slope;
                if slope > 0.0 {
                    t_lo = t_lo.max(bound);
                } else {
                    t_hi = t_hi.min(bound);
                }
            }
            if !(t_lo.is_finite() && t_hi.is_finite()) || t_lo > t_hi {
                continue;
            }
            let t = t_lo + (t_hi - t_lo) * rng.random::<f64>();
            cur += dir * t;
            if step >= burn_in && (step - burn_in) % thin == 0 && out.len() < count {
                out.push(cur.clone());
            }
        }
        while out.len() < count {
            out.push(cur.clone());
        }
        Ok(out)
    }

    /// Boundedness and full-dimensionality diagnostics for the support
    /// polytope: per-coordinate min/max LPs plus the Chebyshev-center LP.
    pub fn support_checks(&self) -> Result<SupportChecks> {
        let (w, h) = self.support()?;
        let opts = SolveOpts::default();
        let mut coord_bounds = Vec::with_capacity(self.k);
        for j in 0..self.k {
            let mut bounds = [0.0f64; 2];
            for (slot, sign) in [(0usize, -1.0f64), (1usize, 1.0f64)] {
                let mut pb = ConeProgramBuilder::new();
                let xi = pb.vector("xi", self.k);
                let xie = pb.ve(xi);
                let mut dir = DVector::zeros(self.k);
                dir[j] = sign;
                pb.maximize(xie.dot(&dir));
                pb.nonneg(&xie.lmul(w).sub(&AffMat::from_const_vec(h)), "Wxi>=h");
                let sol = pb.build().solve(&opts)?;
                match sol.status {
                    SolveStatus::Optimal => bounds[slot] = sign * sol.objective,
                    SolveStatus::Unbounded => {
                        return Err(DrbpError::Invalid(format!(
                            "support unbounded in coordinate {j}"
                        )))
                    }
                    _ => {
                        return Err(DrbpError::Numerical(format!(
                            "support bound LP failed for coordinate {j}"
                        )))
                    }
                }
            }
            coord_bounds.push((bounds[0], bounds[1]));
        }

        // Chebyshev center: max r s.t. w_i·c - r‖w_i‖ >= h_i.
        let mut pb = ConeProgramBuilder::new();
        let c = pb.vector("center", self.k);
        let r = pb.scalar("radius");
        pb.maximize(pb.se(r));
        let mut rows = AffMat::zeros(w.nrows(), 1);
        let ce = pb.ve(c);
        for i in 0..w.nrows() {
            let wi = w.row(i).transpose();
            let e = ce
                .dot(&wi)
                .add(&pb.se(r).scale(-wi.norm()))
                .add_const(-h[i]);
            rows.set(i, 0, e);
        }
        pb.nonneg(&rows, "ball-in-support");
        pb.nonneg_scalar(pb.se(r), "r>=0");
        let sol = pb.build().solve(&opts)?.into_optimal("chebyshev center LP")?;
        Ok(SupportChecks {
            coord_bounds,
            chebyshev_center: sol.vec(c),
            chebyshev_radius: sol.value(r),
        })
    }
}

/// Output of [`MomentAmbiguity::support_checks`].
#[derive(Debug, Clone)]
pub struct SupportChecks {
    pub coord_bounds: Vec<(f64, f64)>,
    pub chebyshev_center: DVector<f64>,
    pub chebyshev_radius: f64,
}

impl SupportChecks {
    /// Bounded with nonempty interior.
    pub fn full_dimensional(&self) -> bool {
        self.chebyshev_radius > 1e-9
    }
}

/// Sample mean and covariance, unregularized:
/// `μ₀ = Σξⁿ/N`, `Σ₀ = Σ(ξⁿ−μ₀)(ξⁿ−μ₀)ᵀ/(N−1)`.
pub fn estimate_moments_raw(samples: &[DVector<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if samples.len() < 2 {
        return Err(DrbpError::Invalid("need at least 2 samples".into()));
    }
    let k = samples[0].len();
    if samples.iter().any(|s| s.len() != k) {
        return Err(DrbpError::Dimension("sample dimension mismatch".into()));
    }
    let n = samples.len() as f64;
    let mut mu = DVector::zeros(k);
    for s in samples {
        mu += s;
    }
    mu /= n;
    let mut sigma = DMatrix::zeros(k, k);
    for s in samples {
        let c = s - &mu;
        sigma += &c * c.transpose();
    }
    sigma /= n - 1.0;
    Ok((mu, sigma))
}

/// Sample mean and covariance with the regularization floor applied.
pub fn estimate_moments(samples: &[DVector<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (mu, sigma) = estimate_moments_raw(samples)?;
    let floor = sigma_floor(&sigma);
    let sigma = if linalg::min_eigenvalue(&sigma) < floor {
        let k = sigma.nrows();
        sigma + DMatrix::identity(k, k) * floor
    } else {
        sigma
    };
    Ok((mu, sigma))
}

/// A feasible (mean, second moment) pair of some distribution in the
/// ambiguity set; pooled by the moment-separation cutting plane.
#[derive(Debug, Clone)]
pub struct MomentPoint {
    pub mu: DVector<f64>,
    pub omega: DMatrix<f64>,
}

impl MomentPoint {
    /// Largest violation of the three membership conditions of the moment
    /// set: `μμᵀ ⪯ Ω`, `(μ−μ₀)ᵀΣ₀⁻¹(μ−μ₀) ≤ γ₁` and
    /// `Ω − μμ₀ᵀ − μ₀μᵀ + μ₀μ₀ᵀ ⪯ γ₂Σ₀`.
    pub fn membership_violation(&self, amb: &MomentAmbiguity) -> f64 {
        let mu = &self.mu;
        let d = mu - &amb.mu0;
        let ellipsoid = linalg::quad_form(amb.sigma_inv(), &d, &d) - amb.gamma1;
        let schur = &self.omega - mu * mu.transpose();
        let psd1 = -linalg::min_eigenvalue(&schur);
        let cov = &amb.sigma0 * amb.gamma2 - &self.omega + mu * amb.mu0.transpose()
            + &amb.mu0 * mu.transpose()
            - &amb.mu0 * amb.mu0.transpose();
        let psd2 = -linalg::min_eigenvalue(&cov);
        ellipsoid.max(psd1).max(psd2).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_of_two_samples() {
        let s = vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![3.0])];
        let (mu, sigma) = estimate_moments(&s).unwrap();
        assert!((mu[0] - 2.0).abs() < 1e-12);
        assert!((sigma[(0, 0)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_hit_floor() {
        let s = vec![DVector::from_vec(vec![5.0, 1.0]); 4];
        let (_, sigma) = estimate_moments(&s).unwrap();
        let floor = 1e-8;
        assert!((sigma[(0, 0)] - floor).abs() < 1e-15);
        assert!((sigma[(1, 1)] - floor).abs() < 1e-15);
        assert!(sigma[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn raw_covariance_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s: Vec<DVector<f64>> = (0..10)
            .map(|_| DVector::from_iterator(3, (0..3).map(|_| 30.0 + 210.0 * rng.random::<f64>())))
            .collect();
        let (_, sigma) = estimate_moments_raw(&s).unwrap();
        assert!(linalg::min_eigenvalue(&sigma) >= -1e-10);
        assert!((sigma.clone() - sigma.transpose()).abs().max() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        let s = vec![DVector::from_vec(vec![1.0])];
        assert!(estimate_moments(&s).is_err());
    }

    fn box_support(lo: f64, hi: f64, k: usize) -> AmbiguityDomain {
        let mut w = DMatrix::zeros(2 * k, k);
        let mut h = DVector::zeros(2 * k);
        for j in 0..k {
            w[(j, j)] = 1.0;
            h[j] = lo;
            w[(k + j, j)] = -1.0;
            h[k + j] = -hi;
        }
        AmbiguityDomain::Support { w_mat: w, h }
    }

    #[test]
    fn box_support_checks() {
        let amb = MomentAmbiguity::new(
            DVector::from_vec(vec![135.0, 135.0]),
            DMatrix::identity(2, 2) * 3675.0,
            0.5,
            2.0,
            box_support(30.0, 240.0, 2),
        )
        .unwrap();
        let checks = amb.support_checks().unwrap();
        assert!(checks.full_dimensional());
        for &(lo, hi) in &checks.coord_bounds {
            assert!((lo - 30.0).abs() < 1e-5);
            assert!((hi - 240.0).abs() < 1e-5);
        }
        assert!((checks.chebyshev_radius - 105.0).abs() < 1e-4);
    }

    #[test]
    fn hit_and_run_stays_inside() {
        let amb = MomentAmbiguity::new(
            DVector::from_vec(vec![0.0, 0.0]),
            DMatrix::identity(2, 2),
            0.0,
            1.0,
            box_support(-1.0, 1.0, 2),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = amb.sample_support(200, &mut rng).unwrap();
        assert_eq!(pts.len(), 200);
        for p in &pts {
            assert!(p.iter().all(|&v| (-1.0 - 1e-9..=1.0 + 1e-9).contains(&v)));
        }
        // not all identical
        let spread = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max)
            - pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        assert!(spread > 0.5);
    }

    #[test]
    fn moment_point_membership() {
        let amb = MomentAmbiguity::new(
            DVector::from_vec(vec![2.0]),
            DMatrix::from_element(1, 1, 1.0),
            0.0,
            1.0,
            box_support(1.0, 3.0, 1),
        )
        .unwrap();
        let inside = MomentPoint {
            mu: DVector::from_vec(vec![2.0]),
            omega: DMatrix::from_element(1, 1, 4.5),
        };
        assert!(inside.membership_violation(&amb) < 1e-9);
        let outside = MomentPoint {
            mu: DVector::from_vec(vec![2.5]),
            omega: DMatrix::from_element(1, 1, 4.5),
        };
        assert!(outside.membership_violation(&amb) > 0.1);
    }
}
