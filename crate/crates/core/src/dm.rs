//! Dirichlet-mixture angular measures and their exponent measures.
//!
//! The angular measure H on the unit simplex is modeled as a k-component
//! mixture of Dirichlet densities parameterized by shape ν_m and center of
//! mass μ_m:
//!
//!   diri_{ν,μ}(w) = Γ(ν)/Π_j Γ(νμ_j) · Π_j w_j^{νμ_j − 1}
//!
//! with respect to dw_1…dw_{d−1}. A mixture is a valid angular measure iff
//! its center of mass sits at the simplex center, Σ_m p_m μ_m = (1/d,…,1/d).
//! The associated exponent measure λ has Cartesian density
//! d · r^{−(d+1)} h(w) with r = Σ x_j, w = x/r, is homogeneous of order −1,
//! and is stable under marginalization: integrating out a coordinate set
//! yields another Dirichlet mixture on the reduced simplex.
//!
//! All densities are computed in log space. Simplex coordinates below
//! `BOUNDARY_EPS` are treated as lying on the boundary, where the density is
//! reported as +∞ (unbounded, when some νμ_j < 1) or −∞ (zero limit) rather
//! than erroring.

use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;
use crate::special::ln_gamma;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

/// Coordinates at or below this are treated as simplex boundary.
pub const BOUNDARY_EPS: f64 = 1e-300;
/// Tolerance for Σ w_j = 1 and Σ p_m = 1.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Tolerance for the moments (center-of-mass) constraint.
pub const MOMENTS_TOL: f64 = 1e-10;

/// A point on the unit simplex: nonnegative coordinates summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::domain("simplex point needs dimension >= 2"));
        }
        if coords.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::domain(format!("coordinates must be finite and >= 0: {coords:?}")));
        }
        let s: f64 = coords.iter().sum();
        if (s - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::domain(format!("coordinates sum to {s}, not 1")));
        }
        Ok(SimplexPoint(coords))
    }

    /// Normalize a nonnegative vector with positive total mass onto the simplex.
    pub fn from_unnormalized(raw: &[f64]) -> Result<Self> {
        if raw.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::domain("unnormalized coordinates must be finite and >= 0"));
        }
        let s: f64 = raw.iter().sum();
        if !(s > 0.0) {
            return Err(Error::domain("total mass must be positive"));
        }
        SimplexPoint::new(raw.iter().map(|&w| w / s).collect())
    }

    /// The barycenter (1/d, …, 1/d).
    pub fn center(d: usize) -> Self {
        SimplexPoint(vec![1.0 / d as f64; d])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// True if any coordinate lies on the numerical boundary.
    pub fn on_boundary(&self) -> bool {
        self.0.iter().any(|&w| w <= BOUNDARY_EPS)
    }
}

/// Parameters of a k-component Dirichlet mixture angular measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmParams {
    weights: Vec<f64>,
    centers: Vec<SimplexPoint>,
    shapes: Vec<f64>,
}

impl DmParams {
    /// Validates positivity, normalization and the moments constraint.
    pub fn new(weights: Vec<f64>, centers: Vec<SimplexPoint>, shapes: Vec<f64>) -> Result<Self> {
        let dm = Self::new_unconstrained(weights, centers, shapes)?;
        let res = dm.moments_residual();
        if res > MOMENTS_TOL {
            return Err(Error::domain(format!(
                "moments constraint violated: max_j |Σ p μ_j − 1/d| = {res:e}"
            )));
        }
        Ok(dm)
    }

    /// Validates everything except the moments constraint. Used for proposal
    /// bookkeeping before the slave component has been recomputed.
    pub fn new_unconstrained(
        weights: Vec<f64>,
        centers: Vec<SimplexPoint>,
        shapes: Vec<f64>,
    ) -> Result<Self> {
        let k = weights.len();
        if k == 0 || centers.len() != k || shapes.len() != k {
            return Err(Error::domain("weights, centers and shapes must have equal length k >= 1"));
        }
        let d = centers[0].dim();
        if centers.iter().any(|c| c.dim() != d) {
            return Err(Error::domain("all centers must share one dimension"));
        }
        if weights.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::domain("weights must be positive"));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::domain(format!("weights sum to {s}, not 1")));
        }
        if shapes.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::domain("shapes must be positive"));
        }
        if centers.iter().any(|c| c.coords().iter().any(|&m| m <= 0.0)) {
            return Err(Error::domain("centers must lie in the open simplex"));
        }
        Ok(DmParams { weights, centers, shapes })
    }

    /// The only valid single-component mixture: center of mass at the barycenter.
    pub fn single(d: usize, shape: f64) -> Result<Self> {
        DmParams::new(vec![1.0], vec![SimplexPoint::center(d)], vec![shape])
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.centers[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn centers(&self) -> &[SimplexPoint] {
        &self.centers
    }

    pub fn shapes(&self) -> &[f64] {
        &self.shapes
    }

    /// max_j |Σ_m p_m μ_{j,m} − 1/d|.
    pub fn moments_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for j in 0..d {
            let s: f64 = self
                .weights
                .iter()
                .zip(self.centers.iter())
                .map(|(p, c)| p * c.coords()[j])
                .sum();
            worst = worst.max((s - 1.0 / d as f64).abs());
        }
        worst
    }
}

/// True iff the center-of-mass constraint holds within `MOMENTS_TOL`.
pub fn check_moments_constraint(dm: &DmParams) -> bool {
    dm.moments_residual() <= MOMENTS_TOL
}

/// Log Dirichlet density at w, with respect to dw_1…dw_{d−1}.
///
/// Boundary points return +∞ when some boundary coordinate has νμ_j < 1
/// (unbounded density) and −∞ otherwise (zero limit).
pub fn dirichlet_log_density(w: &SimplexPoint, shape: f64, center: &SimplexPoint) -> Result<f64> {
    if w.dim() != center.dim() {
        return Err(Error::domain(format!(
            "dimension mismatch: point is {}-dim, center is {}-dim",
            w.dim(),
            center.dim()
        )));
    }
    if !(shape > 0.0) {
        return Err(Error::domain(format!("shape must be positive, got {shape}")));
    }
    let mut ln = ln_gamma(shape);
    for (&wj, &mj) in w.coords().iter().zip(center.coords()) {
        let a = shape * mj;
        ln -= ln_gamma(a);
        if wj <= BOUNDARY_EPS {
            if a < 1.0 {
                return Ok(f64::INFINITY);
            }
            if a > 1.0 {
                return Ok(f64::NEG_INFINITY);
            }
            // a == 1: the factor w^0 contributes nothing
        } else {
            ln += (a - 1.0) * wj.ln();
        }
    }
    Ok(ln)
}

/// Dirichlet density (linear scale); +∞ flags an unbounded boundary value.
pub fn dirichlet_density(w: &SimplexPoint, shape: f64, center: &SimplexPoint) -> Result<f64> {
    Ok(dirichlet_log_density(w, shape, center)?.exp())
}

/// Log mixture density h_ψ(w) = Σ_m p_m diri_{ν_m,μ_m}(w).
pub fn dm_log_density(w: &SimplexPoint, dm: &DmParams) -> Result<f64> {
    let mut terms = Vec::with_capacity(dm.k());
    for m in 0..dm.k() {
        let ld = dirichlet_log_density(w, dm.shapes[m], &dm.centers[m])?;
        if ld == f64::INFINITY {
            return Ok(f64::INFINITY);
        }
        terms.push(dm.weights[m].ln() + ld);
    }
    Ok(log_sum_exp(&terms))
}

/// Mixture density on the linear scale.
pub fn dm_density(w: &SimplexPoint, dm: &DmParams) -> Result<f64> {
    Ok(dm_log_density(w, dm)?.exp())
}

/// Log Cartesian exponent density dλ/dx = d · r^{−(d+1)} h_ψ(x/r), evaluated
/// through the expanded per-component form so that only one pass over the
/// coordinates is needed.
pub fn exponent_log_density(x: &[f64], dm: &DmParams) -> Result<f64> {
    let cache = DmCache::new(dm);
    cache.exponent_log_density(x)
}

/// Exponent density on the linear scale.
pub fn exponent_density(x: &[f64], dm: &DmParams) -> Result<f64> {
    Ok(exponent_log_density(x, dm)?.exp())
}

/// Per-component log normalizers of a mixture, cached for hot loops.
///
/// For component m the normalizer is ln p_m + lnΓ(ν_m) − Σ_j lnΓ(ν_m μ_{j,m});
/// evaluating the mixture density at a point then costs d logs plus k dot
/// products.
#[derive(Debug, Clone)]
pub struct DmCache {
    /// ln p_m + lnΓ(ν_m) − Σ_j lnΓ(ν_m μ_{j,m})
    log_norms: Vec<f64>,
    /// ν_m μ_{j,m} − 1, row-major k×d
    exponents: Vec<f64>,
    shapes: Vec<f64>,
    d: usize,
}

impl DmCache {
    pub fn new(dm: &DmParams) -> Self {
        let d = dm.dim();
        let k = dm.k();
        let mut log_norms = Vec::with_capacity(k);
        let mut exponents = Vec::with_capacity(k * d);
        for m in 0..k {
            let nu = dm.shapes[m];
            let mut ln = dm.weights[m].ln() + ln_gamma(nu);
            for &mu in dm.centers[m].coords() {
                ln -= ln_gamma(nu * mu);
                exponents.push(nu * mu - 1.0);
            }
            log_norms.push(ln);
        }
        DmCache { log_norms, exponents, shapes: dm.shapes.clone(), d }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Log mixture density from cached normalizers; `ln_w` are the coordinate
    /// logs of a simplex point with no boundary coordinates.
    pub(crate) fn log_density_from_logs(&self, ln_w: &[f64]) -> f64 {
        let k = self.log_norms.len();
        let mut terms = Vec::with_capacity(k);
        for m in 0..k {
            let row = &self.exponents[m * self.d..(m + 1) * self.d];
            let dot: f64 = row.iter().zip(ln_w.iter()).map(|(&e, &lw)| e * lw).sum();
            terms.push(self.log_norms[m] + dot);
        }
        log_sum_exp(&terms)
    }

    /// Log mixture density h_ψ(w).
    pub fn dm_log_density(&self, w: &SimplexPoint) -> Result<f64> {
        if w.dim() != self.d {
            return Err(Error::domain("dimension mismatch"));
        }
        if w.on_boundary() {
            // fall back to the careful boundary path
            let mut terms = Vec::with_capacity(self.log_norms.len());
            for m in 0..self.log_norms.len() {
                let row = &self.exponents[m * self.d..(m + 1) * self.d];
                let mut ln = self.log_norms[m];
                let mut unbounded = false;
                let mut zero = false;
                for (&e, &wj) in row.iter().zip(w.coords()) {
                    if wj <= BOUNDARY_EPS {
                        if e < 0.0 {
                            unbounded = true;
                        } else if e > 0.0 {
                            zero = true;
                        }
                    } else {
                        ln += e * wj.ln();
                    }
                }
                if unbounded {
                    return Ok(f64::INFINITY);
                }
                terms.push(if zero { f64::NEG_INFINITY } else { ln });
            }
            return Ok(log_sum_exp(&terms));
        }
        let ln_w: Vec<f64> = w.coords().iter().map(|&v| v.ln()).collect();
        Ok(self.log_density_from_logs(&ln_w))
    }

    /// Log Cartesian exponent density at a strictly positive vector.
    pub fn exponent_log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::domain(format!(
                "dimension mismatch: point is {}-dim, mixture is {}-dim",
                x.len(),
                self.d
            )));
        }
        if x.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::domain(format!("exponent density needs all x_j > 0: {x:?}")));
        }
        if x.iter().any(|&v| v == f64::INFINITY) {
            // a point at infinity has zero intensity
            return Ok(f64::NEG_INFINITY);
        }
        let r: f64 = x.iter().sum();
        let ln_r = r.ln();
        let ln_x: Vec<f64> = x.iter().map(|&v| v.ln()).collect();
        let k = self.log_norms.len();
        let mut terms = Vec::with_capacity(k);
        for m in 0..k {
            let row = &self.exponents[m * self.d..(m + 1) * self.d];
            let dot: f64 = row.iter().zip(ln_x.iter()).map(|(&e, &lw)| e * lw).sum();
            terms.push(self.log_norms[m] + dot - (self.shapes[m] + 1.0) * ln_r);
        }
        Ok((self.d as f64).ln() + log_sum_exp(&terms))
    }
}

/// Integrate the mixture over a coordinate set: the marginal exponent measure
/// corresponds to another Dirichlet mixture on the reduced simplex with
///
///   ν⁰_m = ν_m (1 − s_m),   μ⁰_m = μ_m|_kept / (1 − s_m),
///   p⁰_m = (d/r)(1 − s_m) p_m,    s_m = Σ_{i∈missing} μ_{i,m},  r = d − |missing|.
pub fn marginalize(dm: &DmParams, missing: &[usize]) -> Result<DmParams> {
    let d = dm.dim();
    let mut drop = vec![false; d];
    for &i in missing {
        if i >= d {
            return Err(Error::domain(format!("missing coordinate {i} out of range for d={d}")));
        }
        drop[i] = true;
    }
    let n_drop = drop.iter().filter(|&&b| b).count();
    if n_drop == 0 || n_drop >= d {
        return Err(Error::domain(format!(
            "must drop between 1 and d−1 coordinates, got {n_drop} of {d}"
        )));
    }
    let r = d - n_drop;
    let mut weights = Vec::with_capacity(dm.k());
    let mut centers = Vec::with_capacity(dm.k());
    let mut shapes = Vec::with_capacity(dm.k());
    for m in 0..dm.k() {
        let mu = dm.centers[m].coords();
        let s_m: f64 = (0..d).filter(|&j| drop[j]).map(|j| mu[j]).sum();
        let keep_mass = 1.0 - s_m;
        if !(keep_mass > 0.0) {
            return Err(Error::numeric(format!("component {m} has no mass on kept coordinates")));
        }
        let kept: Vec<f64> = (0..d).filter(|&j| !drop[j]).map(|j| mu[j] / keep_mass).collect();
        centers.push(SimplexPoint::from_unnormalized(&kept)?);
        shapes.push(dm.shapes[m] * keep_mass);
        weights.push(d as f64 / r as f64 * keep_mass * dm.weights[m]);
    }
    // The reduced weights sum to 1 and the reduced mixture satisfies the
    // moments constraint exactly when the input does; renormalize the tiny
    // floating-point drift so repeated marginalization stays valid.
    let s: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= s;
    }
    DmParams::new(weights, centers, shapes)
}

/// Failure regions whose exponent measure the model needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FailureRegion {
    /// E \ [0, u/n]: the complement of the box below the rescaled threshold.
    /// `scale` is the temporal rescaling factor n.
    RectComplement { bounds: Vec<f64>, scale: f64 },
    /// {x : ‖x‖₁ > r_min}, whose measure is d/r_min in closed form.
    Radial { r_min: f64 },
}

impl FailureRegion {
    pub fn rect(bounds: Vec<f64>, scale: f64) -> Result<Self> {
        if bounds.iter().any(|&u| !(u > 0.0)) {
            return Err(Error::domain("rectangular bounds must be positive"));
        }
        if !(scale > 0.0) {
            return Err(Error::domain("scale must be positive"));
        }
        Ok(FailureRegion::RectComplement { bounds, scale })
    }

    pub fn radial(r_min: f64) -> Result<Self> {
        if !(r_min > 0.0) {
            return Err(Error::domain("radial threshold must be positive"));
        }
        Ok(FailureRegion::Radial { r_min })
    }
}

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Exponent measure of a failure region.
///
/// Rectangular complements use the identity λ(E \ [0,u]) = d·E_H[max_j W_j/u_j]
/// estimated over `n_samples` mixture draws (∞ bounds contribute nothing);
/// radial regions use the closed form d/r_min with zero standard error.
pub fn exponent_measure<R: Rng + ?Sized>(
    region: &FailureRegion,
    dm: &DmParams,
    n_samples: usize,
    rng: &mut R,
) -> Result<MeasureEstimate> {
    match region {
        FailureRegion::Radial { r_min } => Ok(MeasureEstimate {
            value: dm.dim() as f64 / r_min,
            std_error: 0.0,
        }),
        FailureRegion::RectComplement { bounds, scale } => {
            if bounds.len() != dm.dim() {
                return Err(Error::domain("bounds dimension mismatch"));
            }
            if n_samples < 10_000 {
                return Err(Error::domain("need at least 10^4 Monte-Carlo samples"));
            }
            let d = dm.dim() as f64;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..n_samples {
                let w = sample_angle(dm, rng);
                let g = w
                    .coords()
                    .iter()
                    .zip(bounds.iter())
                    .map(|(&wj, &uj)| if uj.is_finite() { wj / uj } else { 0.0 })
                    .fold(0.0f64, f64::max);
                sum += g;
                sum_sq += g * g;
            }
            let n = n_samples as f64;
            let mean = sum / n;
            let var = (sum_sq / n - mean * mean).max(0.0) / (n - 1.0) * n;
            Ok(MeasureEstimate {
                value: scale * d * mean,
                std_error: scale * d * (var / n).sqrt(),
            })
        }
    }
}

/// Draw an angle from the mixture: pick component m with probability p_m,
/// then a Dirichlet(ν_m μ_m) vector via normalized gamma draws.
pub fn sample_angle<R: Rng + ?Sized>(dm: &DmParams, rng: &mut R) -> SimplexPoint {
    let m = sample_component(dm.weights(), rng);
    sample_dirichlet(dm.shapes[m], &dm.centers[m], rng)
}

/// Categorical draw from unnormalized-free weights that sum to 1.
pub(crate) fn sample_component<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (m, &p) in weights.iter().enumerate() {
        acc += p;
        if u < acc {
            return m;
        }
    }
    weights.len() - 1
}

/// Dirichlet(ν μ) draw via normalized gammas, guarded so the result stays in
/// the open simplex even for very small shape parameters.
pub(crate) fn sample_dirichlet<R: Rng + ?Sized>(
    shape: f64,
    center: &SimplexPoint,
    rng: &mut R,
) -> SimplexPoint {
    let d = center.dim();
    let mut raw = vec![0.0; d];
    loop {
        let mut sum = 0.0;
        for (slot, &mu) in raw.iter_mut().zip(center.coords()) {
            let a = (shape * mu).max(1e-8);
            let g = Gamma::new(a, 1.0).expect("valid gamma shape").sample(rng);
            *slot = g;
            sum += g;
        }
        if sum > 0.0 && sum.is_finite() {
            let coords: Vec<f64> = raw.iter().map(|&g| g / sum).collect();
            if let Ok(p) = SimplexPoint::new(coords) {
                return p;
            }
        }
        // pathological underflow: redraw
    }
}

/// The simulation-study mixture: d = 4, k = 3, weights (0.25, 0.25, 0.5),
/// shapes (70, 50, 80), centers satisfying the moments constraint exactly.
pub fn reference_mixture() -> DmParams {
    DmParams::new(
        vec![0.25, 0.25, 0.5],
        vec![
            SimplexPoint::new(vec![0.1, 0.1, 0.1, 0.7]).unwrap(),
            SimplexPoint::new(vec![0.7, 0.1, 0.1, 0.1]).unwrap(),
            SimplexPoint::new(vec![0.1, 0.4, 0.4, 0.1]).unwrap(),
        ],
        vec![70.0, 50.0, 80.0],
    )
    .unwrap()
}
