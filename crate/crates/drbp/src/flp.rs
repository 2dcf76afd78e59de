//! Facility-location benchmark: a market entrant opens at most `N_B` stores
//! among eligible sites while an incumbent already operates; an aggregate
//! customer ships from the nearest open store (a transportation LP), demand
//! is uncertain at the non-eligible locations, and the entrant books revenue
//! only on shipments from its own stores.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::instance::{BilevelInstance, LeaderSet};
use crate::moments::{estimate_moments, AmbiguityDomain, MomentAmbiguity};
use crate::{DrbpError, Result};

/// Demand distribution at each stochastic location.
#[derive(Debug, Clone, PartialEq)]
pub enum DemandLaw {
    Uniform { lo: f64, hi: f64 },
    /// Normal restricted to `[lo, hi]`, sampled by inverse CDF on the
    /// truncated interval.
    TruncatedNormal { mean: f64, std: f64, lo: f64, hi: f64 },
}

impl DemandLaw {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            DemandLaw::Uniform { lo, hi } => (lo, hi),
            DemandLaw::TruncatedNormal { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DemandLaw::Uniform { lo, hi } => lo < hi,
            DemandLaw::TruncatedNormal { std, lo, hi, .. } => std > 0.0 && lo < hi,
        };
        if ok {
            Ok(())
        } else {
            Err(DrbpError::Invalid(format!("bad demand law: {self:?}")))
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            DemandLaw::Uniform { lo, hi } => rng.random_range(lo..hi),
            DemandLaw::TruncatedNormal { mean, std, lo, hi } => {
                let std_normal = Normal::standard();
                let a = std_normal.cdf((lo - mean) / std);
                let b = std_normal.cdf((hi - mean) / std);
                let u = a + (b - a) * rng.random::<f64>();
                mean + std * std_normal.inverse_cdf(u.clamp(1e-12, 1.0 - 1e-12))
            }
        }
    }
}

/// Benchmark configuration; [`to_bilevel`] maps it into problem data.
#[derive(Debug, Clone)]
pub struct FacilityConfig {
    pub coords: Vec<(f64, f64)>,
    /// Eligible sites (can host a store).
    pub l_s: Vec<u8>,
    /// Sites already operated by the incumbent; `l_a ≤ l_s`.
    pub l_a: Vec<u8>,
    /// Max new stores for the entrant.
    pub n_b: usize,
    /// Store capacity per location (only meaningful where `l_s = 1`).
    pub cap: Vec<f64>,
    /// Store opening cost per location.
    pub w_open: Vec<f64>,
    /// Per-unit revenue (negative cost) for the entrant's shipments.
    pub v_unit: f64,
    pub demand_law: DemandLaw,
    /// Draw `C`, `V` nonzero (uncertainty in the objectives too).
    pub random_objectives: bool,
    pub rng_seed: u64,
}

impl FacilityConfig {
    pub fn d(&self) -> usize {
        self.coords.len()
    }

    /// Stochastic coordinates: demand locations not eligible for stores.
    pub fn stochastic_locations(&self) -> Vec<usize> {
        (0..self.d()).filter(|&j| self.l_s[j] == 0).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d();
        if self.l_s.len() != d || self.l_a.len() != d || self.cap.len() != d || self.w_open.len() != d
        {
            return Err(DrbpError::Dimension("facility vectors must all have length d".into()));
        }
        if self.l_a.iter().zip(&self.l_s).any(|(a, s)| a > s) {
            return Err(DrbpError::Invalid("incumbent stores must sit on eligible sites".into()));
        }
        self.demand_law.validate()?;
        let (_, hi) = self.demand_law.bounds();
        let max_demand = hi * self.stochastic_locations().len() as f64;
        let incumbent_cap: f64 = (0..d)
            .filter(|&i| self.l_a[i] == 1)
            .map(|i| self.cap[i])
            .sum();
        if incumbent_cap + 1e-9 < max_demand {
            return Err(DrbpError::Invalid(format!(
                "incumbent capacity {incumbent_cap} cannot cover peak demand {max_demand}; \
                 the follower would be infeasible at closed-entrant decisions"
            )));
        }
        Ok(())
    }
}

/// The default eight-location layout: five eligible sites, one already
/// occupied by the incumbent, three demand-only locations with uniform
/// demand on `[30, 240]`. External coordinates can be supplied through
/// [`coords_from_csv`].
pub fn eight_city_config() -> FacilityConfig {
    FacilityConfig {
        coords: vec![
            (0.13, 0.35),
            (0.74, 0.12),
            (0.45, 0.58),
            (0.92, 0.81),
            (0.21, 0.88),
            (0.55, 0.25),
            (0.08, 0.62),
            (0.83, 0.42),
        ],
        l_s: vec![1, 1, 1, 1, 0, 1, 0, 0],
        l_a: vec![0, 0, 0, 0, 0, 1, 0, 0],
        n_b: 4,
        cap: vec![360.0, 360.0, 360.0, 360.0, 0.0, 720.0, 0.0, 0.0],
        w_open: vec![305.0; 8],
        v_unit: -5.0,
        demand_law: DemandLaw::Uniform { lo: 30.0, hi: 240.0 },
        random_objectives: false,
        rng_seed: 7,
    }
}

/// Random-layout generator mirroring the benchmark sweep settings:
/// `(d, ‖l_s‖, ‖l_a‖, N_B, w)` per row, unit-square coordinates, uniform
/// demand on `[50, 150]`, capacity `150·(d − ‖l_s‖)/‖l_a‖` at eligible
/// sites.
pub fn benchmark_setting(setting: usize, random_objectives: bool, seed: u64) -> Result<FacilityConfig> {
    let (d, ns, na, n_b, w_base): (usize, usize, usize, usize, f64) = match setting {
        1 => (15, 5, 2, 3, 750.0),
        2 => (15, 5, 3, 2, 750.0),
        3 => (15, 5, 2, 3, 1000.0),
        4 => (15, 5, 3, 2, 1000.0),
        5 => (20, 5, 2, 3, 750.0),
        6 => (20, 5, 3, 2, 750.0),
        7 => (20, 5, 2, 3, 1000.0),
        8 => (20, 5, 3, 2, 1000.0),
        9 => (25, 10, 5, 5, 750.0),
        10 => (25, 10, 5, 5, 1000.0),
        _ => return Err(DrbpError::Invalid(format!("setting {setting} not in 1..=10"))),
    };
    let w = if random_objectives { 2.0 * w_base } else { w_base };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<(f64, f64)> = (0..d)
        .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    let mut l_s = vec![0u8; d];
    for s in l_s.iter_mut().take(ns) {
        *s = 1;
    }
    let mut l_a = vec![0u8; d];
    for a in l_a.iter_mut().take(na) {
        *a = 1;
    }
    let cap_val = 150.0 * (d - ns) as f64 / na as f64;
    let cap: Vec<f64> = (0..d).map(|i| if l_s[i] == 1 { cap_val } else { 0.0 }).collect();
    Ok(FacilityConfig {
        coords,
        l_s,
        l_a,
        n_b,
        cap,
        w_open: vec![w; d],
        v_unit: -5.0,
        demand_law: DemandLaw::Uniform { lo: 50.0, hi: 150.0 },
        random_objectives,
        rng_seed: seed,
    })
}

/// Parse a coordinate CSV with header `id,x,y`.
pub fn coords_from_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.to_lowercase().starts_with("id")) {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(DrbpError::Invalid(format!(
                "coordinate line {} must be id,x,y: {line:?}",
                lineno + 1
            )));
        }
        let x: f64 = parts[1]
            .parse()
            .map_err(|_| DrbpError::Invalid(format!("bad x on line {}", lineno + 1)))?;
        let y: f64 = parts[2]
            .parse()
            .map_err(|_| DrbpError::Invalid(format!("bad y on line {}", lineno + 1)))?;
        out.push((x, y));
    }
    if out.is_empty() {
        return Err(DrbpError::Invalid("no coordinates in CSV".into()));
    }
    Ok(out)
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Map the configuration into bilevel problem data. The follower is the
/// transportation LP with demand rows `−Σᵢ yᵢⱼ ≤ −ξⱼ`, capacity rows
/// `Σⱼ yᵢⱼ ≤ capᵢ(xᵢ + l_aᵢ)`, and sign rows `−yᵢⱼ ≤ 0`; shipments flatten
/// as `y[i·d + j]` (from store `i` to location `j`).
pub fn to_bilevel(cfg: &FacilityConfig) -> Result<BilevelInstance> {
    cfg.validate()?;
    let d = cfg.d();
    let n = d * d;
    let m = 2 * d + n;
    let stochastic = cfg.stochastic_locations();
    let k = stochastic.len();
    let (_, hi) = cfg.demand_law.bounds();

    let mut a = DMatrix::zeros(m, n);
    for j in 0..d {
        for i in 0..d {
            a[(j, i * d + j)] = -1.0;
        }
    }
    for i in 0..d {
        for j in 0..d {
            a[(d + i, i * d + j)] = 1.0;
        }
    }
    for idx in 0..n {
        a[(2 * d + idx, idx)] = -1.0;
    }

    // rhs blocks: demand rows carry -ξ, capacity rows carry cap·(x + l_a)
    let mut b0_mat = DMatrix::zeros(m, k);
    for (t, &j) in stochastic.iter().enumerate() {
        b0_mat[(j, t)] = -1.0;
    }
    let mut b0_vec = DVector::zeros(m);
    for i in 0..d {
        b0_vec[d + i] = cfg.cap[i] * f64::from(cfg.l_a[i]);
    }
    let mut b_mats = vec![b0_mat];
    let mut b_vecs = vec![b0_vec];
    for i in 0..d {
        b_mats.push(DMatrix::zeros(m, k));
        let mut bv = DVector::zeros(m);
        bv[d + i] = cfg.cap[i];
        b_vecs.push(bv);
    }

    // objectives
    let mut c0 = DVector::zeros(n);
    for i in 0..d {
        for j in 0..d {
            c0[i * d + j] = distance(cfg.coords[i], cfg.coords[j]);
        }
    }
    let mut v0 = DVector::zeros(n);
    for i in 0..d {
        if cfg.l_s[i] == 1 && cfg.l_a[i] == 0 {
            for j in 0..d {
                v0[i * d + j] = cfg.v_unit;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ 0xc0ffee);
    let (c_mat, v_mat) = if cfg.random_objectives {
        // Rows of C rescaled so the shipping perturbation (Cξ) lands in
        // [0.09, 0.092] at the upper support corner; V entries drawn on
        // [4·v0_row, 0] so revenue perturbations keep the base sign.
        let mut c_mat = DMatrix::zeros(n, k);
        for row in 0..n {
            let target = rng.random_range(0.09..0.092);
            let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>().max(1e-6)).collect();
            let denom: f64 = raw.iter().sum::<f64>() * hi;
            for t in 0..k {
                c_mat[(row, t)] = raw[t] * target / denom;
            }
        }
        let mut v_mat = DMatrix::zeros(n, k);
        for row in 0..n {
            if v0[row] != 0.0 {
                for t in 0..k {
                    v_mat[(row, t)] = rng.random_range(4.0 * v0[row]..0.0);
                }
            }
        }
        (c_mat, v_mat)
    } else {
        (DMatrix::zeros(n, k), DMatrix::zeros(n, k))
    };
    let mut constraints = Vec::new();
    for i in 0..d {
        let mut g = DVector::zeros(d);
        g[i] = 1.0;
        constraints.push((g, f64::from(cfg.l_s[i]) - f64::from(cfg.l_a[i])));
    }
    constraints.push((DVector::from_element(d, 1.0), cfg.n_b as f64));
    let leader_set = LeaderSet::new(d, constraints)?;

    BilevelInstance::new(
        a,
        b_mats,
        b_vecs,
        c_mat,
        c0,
        v_mat,
        v0,
        DVector::from_vec(cfg.w_open.clone()),
        leader_set,
    )
}

/// Box support `lo ≤ ξ ≤ hi` over the stochastic coordinates, with an
/// optional override of the lower bound (support-size sweeps).
pub fn support_domain(cfg: &FacilityConfig, lb_override: Option<f64>) -> AmbiguityDomain {
    let k = cfg.stochastic_locations().len();
    let (lo, hi) = cfg.demand_law.bounds();
    let lo = lb_override.unwrap_or(lo);
    let mut w = DMatrix::zeros(2 * k, k);
    let mut h = DVector::zeros(2 * k);
    for t in 0..k {
        w[(t, t)] = 1.0;
        h[t] = lo;
        w[(k + t, t)] = -1.0;
        h[k + t] = -hi;
    }
    AmbiguityDomain::Support { w_mat: w, h }
}

/// Draw `n` i.i.d. demand vectors with the seeded generator.
pub fn sample_demands(cfg: &FacilityConfig, n: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    cfg.demand_law.validate()?;
    if n == 0 {
        return Err(DrbpError::Invalid("need at least one sample".into()));
    }
    let k = cfg.stochastic_locations().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| DVector::from_iterator(k, (0..k).map(|_| cfg.demand_law.draw(&mut rng))))
        .collect())
}

/// Estimate `(μ₀, Σ₀)` from fresh demand samples and assemble the ambiguity
/// set over the box support.
pub fn ambiguity_from_samples(
    cfg: &FacilityConfig,
    n_samples: usize,
    gamma1: f64,
    gamma2: f64,
    seed: u64,
) -> Result<MomentAmbiguity> {
    let samples = sample_demands(cfg, n_samples, seed)?;
    let (mu0, sigma0) = estimate_moments(&samples)?;
    MomentAmbiguity::new(mu0, sigma0, gamma1, gamma2, support_domain(cfg, None))
}
