//! Generalized-Pareto marginal model above per-station thresholds, the unit
//! Fréchet standardization T(y) = −1/log F(y), its Jacobian and return levels.
//!
//! Above its threshold v_j, station j follows
//!
//!   F_j(y) = 1 − ζ_j (1 + ξ_j (y − v_j)/σ_j)^{−1/ξ_j}
//!
//! with the exponential limit at ξ_j = 0. ζ_j is the (fixed, plug-in)
//! probability of a marginal excess. The sub-threshold law is never modeled:
//! evaluating any of these maps below v_j is a hard domain error, because the
//! censoring design guarantees such calls are caller bugs.
//!
//! The Fréchet-scale threshold u_j = −1/log(1 − ζ_j) depends only on ζ_j, so
//! it is immutable under MCMC moves on (σ, ξ).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Shared shape (one ξ for all stations) is the default; per-station shapes
/// are available behind this switch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ShapeMode {
    Shared(f64),
    PerStation(Vec<f64>),
}

/// Marginal GPD parameters together with the fixed threshold data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginParams {
    log_scale: Vec<f64>,
    shape: ShapeMode,
    zeta: Vec<f64>,
    thresholds: Vec<f64>,
    /// u_j = −1/log(1 − ζ_j), derived once from ζ.
    frechet_thresholds: Vec<f64>,
}

impl MarginParams {
    pub fn new(
        log_scale: Vec<f64>,
        shape: ShapeMode,
        zeta: Vec<f64>,
        thresholds: Vec<f64>,
    ) -> Result<Self> {
        let d = log_scale.len();
        if d == 0 || zeta.len() != d || thresholds.len() != d {
            return Err(Error::domain("log_scale, zeta and thresholds must share length d >= 1"));
        }
        match &shape {
            ShapeMode::Shared(xi) => {
                if !xi.is_finite() {
                    return Err(Error::domain("shape must be finite"));
                }
            }
            ShapeMode::PerStation(xs) => {
                if xs.len() != d {
                    return Err(Error::domain("per-station shape vector must have length d"));
                }
                if xs.iter().any(|x| !x.is_finite()) {
                    return Err(Error::domain("shapes must be finite"));
                }
            }
        }
        if log_scale.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("log scales must be finite"));
        }
        if zeta.iter().any(|&z| !(z > 0.0 && z < 1.0)) {
            return Err(Error::domain("zeta must lie in (0,1)"));
        }
        let frechet_thresholds: Vec<f64> = zeta.iter().map(|&z| -1.0 / (1.0 - z).ln()).collect();
        if frechet_thresholds.iter().any(|&u| !(u > 0.0) || !u.is_finite()) {
            return Err(Error::domain("derived Fréchet thresholds must be finite and positive"));
        }
        Ok(MarginParams { log_scale, shape, zeta, thresholds, frechet_thresholds })
    }

    pub fn dim(&self) -> usize {
        self.log_scale.len()
    }

    pub fn sigma(&self, j: usize) -> f64 {
        self.log_scale[j].exp()
    }

    pub fn log_sigma(&self, j: usize) -> f64 {
        self.log_scale[j]
    }

    pub fn log_scales(&self) -> &[f64] {
        &self.log_scale
    }

    pub fn xi(&self, j: usize) -> f64 {
        match &self.shape {
            ShapeMode::Shared(x) => *x,
            ShapeMode::PerStation(xs) => xs[j],
        }
    }

    pub fn shape_mode(&self) -> &ShapeMode {
        &self.shape
    }

    pub fn zeta(&self, j: usize) -> f64 {
        self.zeta[j]
    }

    pub fn zetas(&self) -> &[f64] {
        &self.zeta
    }

    pub fn threshold(&self, j: usize) -> f64 {
        self.thresholds[j]
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Fréchet-scale threshold u_j; depends only on ζ_j.
    pub fn frechet_threshold(&self, j: usize) -> f64 {
        self.frechet_thresholds[j]
    }

    pub fn frechet_thresholds(&self) -> &[f64] {
        &self.frechet_thresholds
    }

    /// Same thresholds and ζ, new GPD parameters (for MCMC proposals).
    pub fn with_parameters(&self, log_scale: Vec<f64>, shape: ShapeMode) -> Result<Self> {
        MarginParams::new(log_scale, shape, self.zeta.clone(), self.thresholds.clone())
    }

    /// Number of free parameters: d scales plus 1 or d shapes.
    pub fn n_free(&self) -> usize {
        match &self.shape {
            ShapeMode::Shared(_) => self.dim() + 1,
            ShapeMode::PerStation(_) => 2 * self.dim(),
        }
    }

    /// Flatten (log σ_1..log σ_d, ξ…) for proposal arithmetic.
    pub fn free_vector(&self) -> Vec<f64> {
        let mut v = self.log_scale.clone();
        match &self.shape {
            ShapeMode::Shared(x) => v.push(*x),
            ShapeMode::PerStation(xs) => v.extend_from_slice(xs),
        }
        v
    }

    /// Rebuild from the flattened free vector.
    pub fn from_free_vector(&self, free: &[f64]) -> Result<Self> {
        let d = self.dim();
        if free.len() != self.n_free() {
            return Err(Error::domain("free vector length mismatch"));
        }
        let log_scale = free[..d].to_vec();
        let shape = match &self.shape {
            ShapeMode::Shared(_) => ShapeMode::Shared(free[d]),
            ShapeMode::PerStation(_) => ShapeMode::PerStation(free[d..].to_vec()),
        };
        self.with_parameters(log_scale, shape)
    }
}

/// Shapes this close to zero take the exponential-limit branch.
const XI_ZERO_EPS: f64 = 1e-9;

fn check_above(p: &MarginParams, j: usize, y: f64) -> Result<()> {
    if j >= p.dim() {
        return Err(Error::domain(format!("station {j} out of range")));
    }
    if !(y >= p.threshold(j)) {
        return Err(Error::domain(format!(
            "y = {y} below threshold v_{j} = {}; sub-threshold values must be censored, not evaluated",
            p.threshold(j)
        )));
    }
    Ok(())
}

/// Marginal CDF above the threshold. For ξ < 0 and y at or past the upper
/// endpoint v − σ/ξ the CDF is 1.
pub fn marginal_cdf(p: &MarginParams, j: usize, y: f64) -> Result<f64> {
    check_above(p, j, y)?;
    let xi = p.xi(j);
    let sigma = p.sigma(j);
    let zeta = p.zeta(j);
    let z = (y - p.threshold(j)) / sigma;
    let surv = if xi.abs() < XI_ZERO_EPS {
        (-z).exp()
    } else {
        let base = 1.0 + xi * z;
        if base <= 0.0 {
            return Ok(1.0);
        }
        base.powf(-1.0 / xi)
    };
    Ok(1.0 - zeta * surv)
}

/// Fréchet standardization x = −1/log F(y); maps v_j to u_j, strictly
/// increasing, +∞ at and past a finite upper endpoint.
pub fn frechet_transform(p: &MarginParams, j: usize, y: f64) -> Result<f64> {
    if y == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let f = marginal_cdf(p, j, y)?;
    if f >= 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-1.0 / f.ln())
}

/// Exact inverse of `frechet_transform` on [u_j, ∞).
pub fn inverse_frechet_transform(p: &MarginParams, j: usize, x: f64) -> Result<f64> {
    if j >= p.dim() {
        return Err(Error::domain(format!("station {j} out of range")));
    }
    let u = p.frechet_threshold(j);
    if !(x >= u) {
        return Err(Error::domain(format!("x = {x} below Fréchet threshold u_{j} = {u}")));
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let xi = p.xi(j);
    let sigma = p.sigma(j);
    let zeta = p.zeta(j);
    // survival fraction (1 − e^{−1/x})/ζ, computed with expm1 for large x
    let frac = -(-1.0 / x).exp_m1() / zeta;
    let y = if xi.abs() < XI_ZERO_EPS {
        p.threshold(j) - sigma * frac.ln()
    } else {
        p.threshold(j) + sigma / xi * (frac.powf(-xi) - 1.0)
    };
    Ok(y)
}

/// Log of J_j(y) = σ_j^{−1} ζ_j^{−ξ_j} x² e^{1/x} (1 − e^{−1/x})^{1+ξ_j},
/// x = T_j(y); this is the derivative dT_j/dy of the standardization.
pub fn log_jacobian(p: &MarginParams, j: usize, y: f64) -> Result<f64> {
    let x = frechet_transform(p, j, y)?;
    log_jacobian_at_frechet(p, j, x)
}

/// Same Jacobian expressed through the already-transformed value x = T_j(y).
pub fn log_jacobian_at_frechet(p: &MarginParams, j: usize, x: f64) -> Result<f64> {
    if j >= p.dim() {
        return Err(Error::domain(format!("station {j} out of range")));
    }
    if !(x > 0.0) {
        return Err(Error::domain(format!("Fréchet value must be positive, got {x}")));
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let xi = p.xi(j);
    Ok(-p.log_sigma(j) - xi * p.zeta(j).ln() + 2.0 * x.ln() + 1.0 / x
        + (1.0 + xi) * (-(-1.0 / x).exp_m1()).ln())
}

/// Jacobian dT/dy on the linear scale.
pub fn jacobian(p: &MarginParams, j: usize, y: f64) -> Result<f64> {
    Ok(log_jacobian(p, j, y)?.exp())
}

/// A return-level request: the (1 − 1/T)-quantile at station j, with T in
/// observation units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnLevelQuery {
    pub station: usize,
    pub period: f64,
}

/// Q = v_j + (σ_j/ξ_j)[(ζ_j T)^{ξ_j} − 1]; requires 1/T < ζ_j so the
/// quantile lies above the threshold.
pub fn return_level(p: &MarginParams, q: ReturnLevelQuery) -> Result<f64> {
    let j = q.station;
    if j >= p.dim() {
        return Err(Error::domain(format!("station {j} out of range")));
    }
    if !(q.period > 0.0) {
        return Err(Error::domain("return period must be positive"));
    }
    if 1.0 / q.period >= p.zeta(j) {
        return Err(Error::domain(format!(
            "return period {} puts the quantile below threshold (needs 1/T < ζ = {})",
            q.period,
            p.zeta(j)
        )));
    }
    let xi = p.xi(j);
    let sigma = p.sigma(j);
    let zt = p.zeta(j) * q.period;
    Ok(if xi.abs() < XI_ZERO_EPS {
        p.threshold(j) + sigma * zt.ln()
    } else {
        p.threshold(j) + sigma / xi * (zt.powf(xi) - 1.0)
    })
}
