//! Data augmentation: exact truncated-Beta-mixture full conditionals for the
//! latent coordinates of above-threshold records, auxiliary Poisson processes
//! standing in for the intractable exponential likelihood terms, and the
//! augmented-likelihood contributions built from both.
//!
//! For an above-threshold record with completed point x̄ on the reduced
//! (non-missing) coordinate space, the conditional law of one censored
//! coordinate given the others is a k-component mixture: component m pairs a
//! weight p′_m ∝ p_m C_m with a Beta(a_m, b_m) variable U truncated to
//! (L′, R′), mapped back through z = s_j U/(1−U). Everything is assembled in
//! log space because the incomplete-Beta factors in C_m underflow long before
//! they stop discriminating between components.
//!
//! The exponential terms exp(−n·λ(A)) are traded for Poisson processes Z′ on
//! the radial superset E = {‖x‖₁ > r_min} with intensity τ·λ_ψ, carrying the
//! weight φ(Z′) = (1 − 1/τ)^{#hits of A}. Averaging φ over the process law
//! reproduces the exponential term exactly (a Laplace-transform identity),
//! which is what makes the augmented posterior marginalize back to the
//! censored posterior.

use crate::data::{FrechetMarginal, FrechetObs};
use crate::dm::{sample_component, DmCache, DmParams, SimplexPoint};
use crate::error::{Error, Result};
use crate::margins::{log_jacobian_at_frechet, MarginParams};
use crate::numeric::log_sum_exp;
use crate::special::{inv_inc_beta_ln, ln_add_exp, ln_gamma, ln_inc_beta_interval, ln_inc_beta_parts};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

/// Latent draws this close to the simplex boundary are clamped away from it.
const LATENT_FLOOR: f64 = 1e-250;

/// Truncated-Beta mixture defining the full conditional of one latent
/// coordinate given the others.
#[derive(Debug, Clone)]
pub struct ConditionalMixture {
    /// Normalized component probabilities p′.
    pub weights: Vec<f64>,
    /// Beta parameters (a_m, b_m) per component.
    pub beta_params: Vec<(f64, f64)>,
    /// Truncation bounds on the Beta scale.
    pub lower_u: f64,
    pub upper_u: f64,
    /// Scale s_j = Σ_{r≠j} x_r mapping U back to z = s_j U/(1−U).
    pub scale: f64,
    /// Original bounds [L̃, R̃] on the Fréchet scale.
    pub lower: f64,
    pub upper: f64,
    /// ln I_{a,b}(L′,R′) per component, kept for the truncated inverse-CDF.
    ln_mass: Vec<f64>,
}

/// Build the full conditional of coordinate `j` of the reduced point
/// `values` (the j-th entry is ignored), truncated to the Fréchet box
/// [lower, upper]. `dm0` must already be marginalized over the record's
/// missing coordinates.
pub fn conditional_mixture(
    dm0: &DmParams,
    j: usize,
    values: &[f64],
    lower: f64,
    upper: f64,
) -> Result<ConditionalMixture> {
    let d = dm0.dim();
    if values.len() != d || j >= d {
        return Err(Error::domain("conditional_mixture: coordinate/point mismatch"));
    }
    if !(lower >= 0.0) || lower > upper {
        return Err(Error::domain(format!("bad latent box [{lower}, {upper}]")));
    }
    let s_j: f64 = values.iter().enumerate().filter(|&(r, _)| r != j).map(|(_, &x)| x).sum();
    if !(s_j > 0.0) || !s_j.is_finite() {
        return Err(Error::domain(format!(
            "conditional mixture needs a positive finite sum of the other coordinates, got {s_j}"
        )));
    }
    // u = x/(x+s): bounds on the Beta scale
    let lower_u = lower / (s_j + lower);
    let upper_u = if upper == f64::INFINITY { 1.0 } else { upper / (s_j + upper) };

    let k = dm0.k();
    let mut log_w = Vec::with_capacity(k);
    let mut beta_params = Vec::with_capacity(k);
    let mut ln_mass = Vec::with_capacity(k);
    let ln_sum_others: f64 = s_j.ln();
    for m in 0..k {
        let nu = dm0.shapes()[m];
        let mu = dm0.centers()[m].coords();
        let a = nu * mu[j];
        let b = nu * (1.0 - mu[j]) + 1.0;
        beta_params.push((a, b));
        let ib = ln_inc_beta_interval(a, b, lower_u, upper_u)?;
        ln_mass.push(ib);
        // ln C_m, Appendix-style weight in log space
        let mut ln_c = (1.0 - mu[j]).ln() + ln_gamma(nu * (1.0 - mu[j])) + ib
            - (nu * (1.0 - mu[j]) + 1.0) * ln_sum_others;
        for (r, &x) in values.iter().enumerate() {
            if r == j {
                continue;
            }
            ln_c -= ln_gamma(nu * mu[r]);
            ln_c += (nu * mu[r] - 1.0) * x.ln();
        }
        log_w.push(dm0.weights()[m].ln() + ln_c);
    }
    let total = log_sum_exp(&log_w);
    if total == f64::NEG_INFINITY {
        return Err(Error::DegenerateInterval(format!(
            "all incomplete-beta factors vanished on [{lower}, {upper}] (scale {s_j})"
        )));
    }
    let weights: Vec<f64> = log_w.iter().map(|&lw| (lw - total).exp()).collect();
    Ok(ConditionalMixture {
        weights,
        beta_params,
        lower_u,
        upper_u,
        scale: s_j,
        lower,
        upper,
        ln_mass,
    })
}

/// Draw from the truncated-Beta mixture: pick component m ~ p′, invert the
/// regularized incomplete Beta on [L′, R′] in log space, map back through
/// z = s U/(1−U). The draw always lies in [L̃, R̃].
pub fn sample_conditional<R: Rng + ?Sized>(cm: &ConditionalMixture, rng: &mut R) -> Result<f64> {
    if cm.lower == cm.upper {
        return Ok(cm.lower);
    }
    let m = sample_component(&cm.weights, rng);
    let (a, b) = cm.beta_params[m];
    // target lower-CDF value on the log scale: ln(I_L + U (I_R − I_L))
    let u01: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let (ln_ilo, _) = ln_inc_beta_parts(a, b, cm.lower_u)?;
    let ln_target = ln_add_exp(ln_ilo, u01.ln() + cm.ln_mass[m]);
    let u = inv_inc_beta_ln(a, b, ln_target).map_err(|e| {
        Error::numeric(format!(
            "truncated Beta inverse failed (a={a}, b={b}, box=[{}, {}], component {m}): {e}",
            cm.lower_u, cm.upper_u
        ))
    })?;
    let u = u.clamp(cm.lower_u, cm.upper_u);
    let z = if u >= 1.0 { f64::INFINITY } else { cm.scale * u / (1.0 - u) };
    // floating point can push z marginally outside the box; clamp back and
    // keep it off the simplex boundary
    Ok(z.clamp(cm.lower.max(LATENT_FLOOR), cm.upper))
}

/// Role of one kept (non-missing) coordinate of an above-threshold record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CoordRole {
    /// κ̃ = 1: exactly observed, fixed at X.
    Exact,
    /// κ̃ ∈ {2, 3}: latent, constrained to the box.
    Latent { lower: f64, upper: f64 },
}

/// One above-threshold record with its latent coordinates: the reduced point
/// over non-missing stations, each coordinate either exact or latent-in-box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentRecord {
    pub day: i64,
    /// Station indices of the kept (non-missing) coordinates, ascending.
    pub kept_stations: Vec<usize>,
    /// Station indices marginalized out analytically.
    pub missing_stations: Vec<usize>,
    pub roles: Vec<CoordRole>,
    /// Completed point on the reduced coordinate space.
    pub point: Vec<f64>,
}

impl LatentRecord {
    /// Build from a Fréchet-transformed record, initializing each latent
    /// coordinate at the geometric midpoint of its box (upper/2 when the box
    /// starts at 0, twice the lower bound when it is unbounded above).
    pub fn from_frechet(fo: &FrechetObs) -> Result<LatentRecord> {
        let mut kept_stations = Vec::new();
        let mut missing_stations = Vec::new();
        let mut roles = Vec::new();
        let mut point = Vec::new();
        for (j, s) in fo.stations.iter().enumerate() {
            match s {
                FrechetMarginal::Missing => missing_stations.push(j),
                FrechetMarginal::Exact(x) => {
                    kept_stations.push(j);
                    roles.push(CoordRole::Exact);
                    point.push(*x);
                }
                _ => {
                    let (lower, upper) = s.bounds().unwrap();
                    kept_stations.push(j);
                    roles.push(CoordRole::Latent { lower, upper });
                    point.push(latent_init(lower, upper));
                }
            }
        }
        if kept_stations.is_empty() {
            return Err(Error::domain(format!(
                "record at day {} has no usable coordinates",
                fo.day
            )));
        }
        Ok(LatentRecord { day: fo.day, kept_stations, missing_stations, roles, point })
    }

    /// True if every latent value lies inside the boxes of `candidate`
    /// (which must describe the same record under different margins).
    pub fn contained_in(&self, candidate: &FrechetObs) -> bool {
        for (i, &j) in self.kept_stations.iter().enumerate() {
            if matches!(self.roles[i], CoordRole::Latent { .. }) {
                if let Some((lo, hi)) = candidate.stations[j].bounds() {
                    if self.point[i] < lo || self.point[i] > hi {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Refresh exact values and latent boxes from a re-transformed record
    /// (after a marginal move); latent values are preserved.
    pub fn refresh_bounds(&mut self, fo: &FrechetObs) {
        for (i, &j) in self.kept_stations.iter().enumerate() {
            match (&mut self.roles[i], &fo.stations[j]) {
                (CoordRole::Exact, FrechetMarginal::Exact(x)) => {
                    self.point[i] = *x;
                }
                (CoordRole::Latent { lower, upper }, s) => {
                    let (lo, hi) = s.bounds().expect("latent coordinate lost its bounds");
                    *lower = lo;
                    *upper = hi;
                }
                _ => unreachable!("censoring structure is parameter-free"),
            }
        }
    }

    /// Number of latent coordinates.
    pub fn n_latent(&self) -> usize {
        self.roles.iter().filter(|r| matches!(r, CoordRole::Latent { .. })).count()
    }
}

fn latent_init(lower: f64, upper: f64) -> f64 {
    if upper == f64::INFINITY {
        if lower > 0.0 {
            2.0 * lower
        } else {
            1.0
        }
    } else if lower > 0.0 {
        (lower * upper).sqrt()
    } else {
        (upper / 2.0).max(LATENT_FLOOR)
    }
}

/// One Gibbs sweep over the latent coordinates of a single record,
/// coordinate at a time from the exact full conditionals (acceptance 1).
/// `dm0` must be `dm` marginalized to the record's kept stations.
pub fn gibbs_sweep_record<R: Rng + ?Sized>(
    record: &mut LatentRecord,
    dm0: &DmParams,
    rng: &mut R,
) -> Result<()> {
    let d0 = record.kept_stations.len();
    debug_assert!(d0 == 1 || dm0.dim() == d0);
    for i in 0..d0 {
        let (lower, upper) = match record.roles[i] {
            CoordRole::Exact => continue,
            CoordRole::Latent { lower, upper } => (lower, upper),
        };
        if d0 == 1 {
            // single kept coordinate: the section of the exponent density is
            // ∝ x^{−2}; invert the truncated survival directly
            record.point[i] = sample_inverse_square(lower, upper, rng);
            continue;
        }
        let cm = conditional_mixture(dm0, i, &record.point, lower, upper)?;
        record.point[i] = sample_conditional(&cm, rng)?;
    }
    Ok(())
}

/// Inverse-CDF draw from a density ∝ x^{−2} truncated to [lower, upper].
fn sample_inverse_square<R: Rng + ?Sized>(lower: f64, upper: f64, rng: &mut R) -> f64 {
    let lo = lower.max(LATENT_FLOOR);
    if lo >= upper {
        return upper;
    }
    let u: f64 = rng.gen();
    let inv = 1.0 / lo - u * (1.0 / lo - if upper == f64::INFINITY { 0.0 } else { 1.0 / upper });
    (1.0 / inv).clamp(lo, upper)
}

/// Log contribution of one augmented above-threshold record: the
/// marginalized exponent density at the completed point plus the Jacobians
/// of the exactly observed coordinates.
pub fn loglik_above(
    record: &LatentRecord,
    margins: &MarginParams,
    dm0_cache: &DmCache,
) -> Result<f64> {
    if record.point.iter().any(|&x| !(x > 0.0)) {
        return Ok(f64::NEG_INFINITY);
    }
    let ln_dens = if record.kept_stations.len() == 1 {
        // 1-d marginal exponent density is x^{−2}
        -2.0 * record.point[0].ln()
    } else {
        dm0_cache.exponent_log_density(&record.point)?
    };
    if ln_dens == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let mut total = ln_dens;
    for (i, role) in record.roles.iter().enumerate() {
        if matches!(role, CoordRole::Exact) {
            total += log_jacobian_at_frechet(margins, record.kept_stations[i], record.point[i])?;
        }
    }
    Ok(total)
}

/// An auxiliary Poisson process on E = {‖x‖₁ > r_min} with intensity τ·λ_ψ,
/// together with the hit count of the rectangular failure region it covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugProcess {
    /// Fréchet-scale bounds of the covered failure region (∞ = unconstrained).
    pub bounds: Vec<f64>,
    /// Temporal rescaling n (number of days the region accounts for).
    pub n_block: f64,
    pub tau: f64,
    /// min_j bounds_j / n_block.
    pub r_min: f64,
    pub points: Vec<Vec<f64>>,
    /// Points with some x_j > bounds_j / n_block.
    pub hit_count: usize,
}

/// Poisson mean τ·d·n_block/min_j bounds_j of the process.
pub fn process_mean(bounds: &[f64], n_block: f64, tau: f64, d: usize) -> f64 {
    let min_b = bounds.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_b == f64::INFINITY {
        return 0.0;
    }
    tau * d as f64 * n_block / min_b
}

/// Sample the auxiliary process: N ~ Poisson(τ·d·n_block/min bounds), each
/// point a Pareto(1) radius above r_min times a mixture angle.
pub fn sample_aug_process<R: Rng + ?Sized>(
    bounds: &[f64],
    n_block: f64,
    dm: &DmParams,
    tau: f64,
    rng: &mut R,
) -> Result<AugProcess> {
    if !(tau > 1.0) {
        return Err(Error::domain(format!("tau must exceed 1, got {tau}")));
    }
    if !(n_block > 0.0) {
        return Err(Error::domain("n_block must be positive"));
    }
    if bounds.len() != dm.dim() || bounds.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::domain("bounds must be positive with the mixture's dimension"));
    }
    let d = dm.dim();
    let mean = process_mean(bounds, n_block, tau, d);
    let scaled: Vec<f64> = bounds.iter().map(|&b| b / n_block).collect();
    let r_min = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut points = Vec::new();
    let mut hit_count = 0usize;
    if mean > 0.0 {
        let n = Poisson::new(mean).map_err(|e| Error::numeric(format!("poisson: {e}")))?
            .sample(rng) as usize;
        points.reserve(n);
        for _ in 0..n {
            let (x, hit) = draw_process_point(r_min, &scaled, dm, rng);
            if hit {
                hit_count += 1;
            }
            points.push(x);
        }
    }
    Ok(AugProcess { bounds: bounds.to_vec(), n_block, tau, r_min, points, hit_count })
}

fn draw_process_point<R: Rng + ?Sized>(
    r_min: f64,
    scaled_bounds: &[f64],
    dm: &DmParams,
    rng: &mut R,
) -> (Vec<f64>, bool) {
    // Pareto(1) radius: survival r_min/r
    let u: f64 = rng.gen();
    let r = r_min / (1.0 - u).max(f64::MIN_POSITIVE);
    let w = crate::dm::sample_angle(dm, rng);
    let x: Vec<f64> = w.coords().iter().map(|&wj| r * wj).collect();
    let hit = x.iter().zip(scaled_bounds).any(|(&xj, &bj)| xj > bj);
    (x, hit)
}

/// φ(Z′) = (1 − 1/τ)^{hits}.
pub fn phi_weight(proc: &AugProcess) -> f64 {
    phi_log_weight(proc.hit_count, proc.tau).exp()
}

/// ln φ = hits · ln(1 − 1/τ).
pub fn phi_log_weight(hit_count: usize, tau: f64) -> f64 {
    hit_count as f64 * (1.0 - 1.0 / tau).ln()
}

/// Sufficient statistics of a process for the augmented posterior: the point
/// set itself only enters through these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessStats {
    pub n_points: usize,
    pub hits: usize,
    /// Σ_s −2 ln r_s
    pub sum_neg2_ln_r: f64,
    /// Σ_s ln h_ψ(w_s)
    pub sum_ln_h: f64,
}

impl ProcessStats {
    pub fn empty() -> Self {
        ProcessStats { n_points: 0, hits: 0, sum_neg2_ln_r: 0.0, sum_ln_h: 0.0 }
    }
}

/// Summarize an explicit process into its sufficient statistics.
pub fn process_stats(proc: &AugProcess, cache: &DmCache) -> Result<ProcessStats> {
    let mut s = ProcessStats { n_points: proc.points.len(), hits: proc.hit_count, ..ProcessStats::empty() };
    for x in &proc.points {
        let r: f64 = x.iter().sum();
        s.sum_neg2_ln_r += -2.0 * r.ln();
        let w = SimplexPoint::from_unnormalized(x)?;
        s.sum_ln_h += cache.dm_log_density(&w)?;
    }
    Ok(s)
}

/// Sample a process directly into sufficient statistics without storing
/// points. Point generation is split into fixed-size chunks, each driven by
/// a child generator seeded from the caller's stream, so the result is
/// reproducible independent of evaluation order.
pub fn sample_process_stats<R: Rng + ?Sized>(
    bounds: &[f64],
    n_block: f64,
    dm: &DmParams,
    cache: &DmCache,
    tau: f64,
    rng: &mut R,
) -> Result<ProcessStats> {
    use rand::SeedableRng;
    const CHUNK: usize = 8192;
    if !(tau > 1.0) {
        return Err(Error::domain(format!("tau must exceed 1, got {tau}")));
    }
    let d = dm.dim();
    if bounds.len() != d {
        return Err(Error::domain("bounds dimension mismatch"));
    }
    let mean = process_mean(bounds, n_block, tau, d);
    if mean == 0.0 {
        return Ok(ProcessStats::empty());
    }
    let n = Poisson::new(mean).map_err(|e| Error::numeric(format!("poisson: {e}")))?.sample(rng)
        as usize;
    let scaled: Vec<f64> = bounds.iter().map(|&b| b / n_block).collect();
    let r_min = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let n_chunks = n.div_ceil(CHUNK);
    let seeds: Vec<u64> = (0..n_chunks).map(|_| rng.gen()).collect();
    let mut total = ProcessStats { n_points: n, ..ProcessStats::empty() };
    for (c, &seed) in seeds.iter().enumerate() {
        let count = if c + 1 == n_chunks { n - c * CHUNK } else { CHUNK };
        let mut child = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let mut lnw = vec![0.0; d];
        for _ in 0..count {
            let (x, hit) = draw_process_point(r_min, &scaled, dm, &mut child);
            if hit {
                total.hits += 1;
            }
            let r: f64 = x.iter().sum();
            let ln_r = r.ln();
            total.sum_neg2_ln_r += -2.0 * ln_r;
            for (slot, &v) in lnw.iter_mut().zip(&x) {
                *slot = v.max(f64::MIN_POSITIVE).ln() - ln_r;
            }
            total.sum_ln_h += cache.log_density_from_logs(&lnw);
        }
    }
    Ok(total)
}

/// Log density of a process realization under its own law, the term the
/// augmented posterior stores in full:
/// −ln N! − τ·d·n_block/min_j bounds + N ln(τ d) + Σ(−2 ln r_s) + Σ ln h(w_s).
pub fn process_log_density(stats: &ProcessStats, bounds: &[f64], n_block: f64, tau: f64, d: usize) -> f64 {
    let mean_over_tau_d = {
        let min_b = bounds.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_b == f64::INFINITY {
            return 0.0;
        }
        n_block / min_b
    };
    -ln_gamma(stats.n_points as f64 + 1.0) - tau * d as f64 * mean_over_tau_d
        + stats.n_points as f64 * (tau * d as f64).ln()
        + stats.sum_neg2_ln_r
        + stats.sum_ln_h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dm::{exponent_measure, reference_mixture, FailureRegion};
    use crate::numeric::{integrate_gl, ks_distance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    #[test]
    fn conditional_mixture_single_component_weight() {
        let dm = DmParams::single(2, 3.0).unwrap();
        let cm = conditional_mixture(&dm, 0, &[1.0, 47.1], 0.0, 47.1).unwrap();
        assert_eq!(cm.weights.len(), 1);
        assert!((cm.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn conditional_mixture_bound_arithmetic() {
        // L̃ = 0, R̃ = s_j: (L′, R′) = (0, 0.5)
        let dm = DmParams::single(2, 3.0).unwrap();
        let s = 47.117278995954331;
        let cm = conditional_mixture(&dm, 0, &[0.0, s], 0.0, s).unwrap();
        assert_eq!(cm.lower_u, 0.0);
        assert!((cm.upper_u - 0.5).abs() < 1e-15);
    }

    #[test]
    fn conditional_weights_match_quadrature() {
        // d=2, k=2 hand-set mixture: component masses on [L̃,R̃] by direct
        // quadrature of each component's unnormalized conditional density
        let dm = DmParams::new(
            vec![0.3, 0.7],
            vec![
                SimplexPoint::new(vec![0.25, 0.75]).unwrap(),
                SimplexPoint::new(vec![1.0 / 2.0 + 0.3 * 0.25 / 0.7, 0.5 - 0.3 * 0.25 / 0.7 - 0.0]).unwrap(),
            ],
            vec![5.0, 9.0],
        );
        // build a valid 2-component mixture: weights (0.3, 0.7), first center
        // (0.25, 0.75); second center solves the moments constraint
        let mu2 = [(0.5 - 0.3 * 0.25) / 0.7, (0.5 - 0.3 * 0.75) / 0.7];
        let dm = dm.or_else(|_| {
            DmParams::new(
                vec![0.3, 0.7],
                vec![
                    SimplexPoint::new(vec![0.25, 0.75]).unwrap(),
                    SimplexPoint::new(vec![mu2[0], mu2[1]]).unwrap(),
                ],
                vec![5.0, 9.0],
            )
        })
        .unwrap();
        let x_other = 3.7;
        let (lo, hi) = (0.5, 21.0);
        let cm = conditional_mixture(&dm, 1, &[x_other, 0.0], lo, hi).unwrap();
        // quadrature of p_m * component exponent density section over the box
        let mut masses = Vec::new();
        for m in 0..2 {
            let single = DmParams::new_unconstrained(
                vec![1.0],
                vec![dm.centers()[m].clone()],
                vec![dm.shapes()[m]],
            )
            .unwrap();
            let cache = DmCache::new(&single);
            let f = |z: f64| {
                dm.weights()[m] * cache.exponent_log_density(&[x_other, z]).unwrap().exp()
            };
            masses.push(integrate_gl(f, lo, hi, 400));
        }
        let total: f64 = masses.iter().sum();
        for m in 0..2 {
            let want = masses[m] / total;
            assert!(
                ((cm.weights[m] - want) / want).abs() < 1e-6,
                "component {m}: weight {} vs quadrature {want}",
                cm.weights[m]
            );
        }
    }

    #[test]
    fn sample_conditional_degenerate_point() {
        let dm = DmParams::single(2, 3.0).unwrap();
        let cm = conditional_mixture(&dm, 0, &[1.0, 5.0], 2.5, 2.5).unwrap();
        assert_eq!(sample_conditional(&cm, &mut rng(0)).unwrap(), 2.5);
    }

    #[test]
    fn sample_conditional_stays_in_box_and_matches_quadrature() {
        let dm = reference_mixture();
        let dm0 = crate::dm::marginalize(&dm, &[3]).unwrap();
        let values = [55.0, 9.0, 0.0];
        let (lo, hi) = (0.0, 47.117278995954331);
        let cm = conditional_mixture(&dm0, 2, &values, lo, hi).unwrap();
        let mut r = rng(42);
        let n = 30_000;
        let mut draws = Vec::with_capacity(n);
        for _ in 0..n {
            let z = sample_conditional(&cm, &mut r).unwrap();
            assert!((lo..=hi).contains(&z));
            draws.push(z);
        }
        // quadrature-normalized CDF of the exact conditional section
        let cache = DmCache::new(&dm0);
        let dens = |z: f64| {
            if z <= 0.0 {
                0.0
            } else {
                cache.exponent_log_density(&[values[0], values[1], z]).unwrap().exp()
            }
        };
        let total = integrate_gl(dens, 1e-12, hi, 800);
        let cdf = |z: f64| (integrate_gl(dens, 1e-12, z.max(1e-12), 800) / total).clamp(0.0, 1.0);
        let d = ks_distance(&mut draws, cdf);
        assert!(d < 0.012, "KS distance {d}");
    }

    #[test]
    fn gibbs_sweep_no_censored_coords_is_identity() {
        let dm = reference_mixture();
        let fo = FrechetObs {
            day: 0,
            stations: vec![
                FrechetMarginal::Exact(60.0),
                FrechetMarginal::Exact(50.0),
                FrechetMarginal::Exact(49.0),
                FrechetMarginal::Exact(80.0),
            ],
        };
        let mut rec = LatentRecord::from_frechet(&fo).unwrap();
        let before = rec.clone();
        gibbs_sweep_record(&mut rec, &dm, &mut rng(3)).unwrap();
        assert_eq!(rec, before);
    }

    #[test]
    fn gibbs_sweep_respects_bounds() {
        let dm = reference_mixture();
        let u = 47.117278995954331;
        let fo = FrechetObs {
            day: 0,
            stations: vec![
                FrechetMarginal::Exact(90.0),
                FrechetMarginal::Interval { lower: 0.0, upper: u },
                FrechetMarginal::RightCensored { lower: 60.0 },
                FrechetMarginal::Interval { lower: 50.0, upper: 120.0 },
            ],
        };
        let mut rec = LatentRecord::from_frechet(&fo).unwrap();
        let mut r = rng(9);
        for _ in 0..200 {
            gibbs_sweep_record(&mut rec, &dm, &mut r).unwrap();
            assert!(rec.point[1] <= u && rec.point[1] > 0.0);
            assert!(rec.point[2] >= 60.0);
            assert!(rec.point[3] >= 50.0 && rec.point[3] <= 120.0);
            // exact coordinate untouched
            assert_eq!(rec.point[0], 90.0);
        }
    }

    #[test]
    fn gibbs_sweep_long_run_matches_exact_conditional() {
        // d=2, k=1, one censored coordinate: the chain holds the exact
        // conditional as its stationary law, so a long run's histogram must
        // match quadrature
        let dm = DmParams::single(2, 4.0).unwrap();
        let fo = FrechetObs {
            day: 0,
            stations: vec![
                FrechetMarginal::Exact(120.0),
                FrechetMarginal::Interval { lower: 0.0, upper: 47.117278995954331 },
            ],
        };
        let mut rec = LatentRecord::from_frechet(&fo).unwrap();
        let mut r = rng(17);
        let n = 30_000;
        let mut draws = Vec::with_capacity(n);
        for _ in 0..n {
            gibbs_sweep_record(&mut rec, &dm, &mut r).unwrap();
            draws.push(rec.point[1]);
        }
        let cache = DmCache::new(&dm);
        let dens = |z: f64| {
            if z <= 0.0 {
                0.0
            } else {
                cache.exponent_log_density(&[120.0, z]).unwrap().exp()
            }
        };
        let hi = 47.117278995954331;
        let total = integrate_gl(dens, 1e-12, hi, 800);
        let cdf = |z: f64| (integrate_gl(dens, 1e-12, z.max(1e-12), 800) / total).clamp(0.0, 1.0);
        let d = ks_distance(&mut draws, cdf);
        assert!(d < 0.012, "KS distance {d}");
    }

    #[test]
    fn aug_process_poisson_mean() {
        // τ=50, d=4, bounds ≡ 47.1152, n_block = 100: mean 424.49
        let dm = reference_mixture();
        let bounds = vec![47.1152; 4];
        let mean = process_mean(&bounds, 100.0, 50.0, 4);
        assert!((mean - 20000.0 / 47.1152).abs() < 1e-9);
        let mut r = rng(4);
        let reps = 3_000;
        let mut total = 0.0;
        let mut total_sq = 0.0;
        for _ in 0..reps {
            let p = sample_aug_process(&bounds, 100.0, &dm, 50.0, &mut r).unwrap();
            total += p.points.len() as f64;
            total_sq += (p.points.len() as f64).powi(2);
        }
        let emp = total / reps as f64;
        let var = total_sq / reps as f64 - emp * emp;
        let se = (var / reps as f64).sqrt();
        assert!((emp - mean).abs() < 3.0 * se, "{emp} vs {mean} (se {se})");
    }

    #[test]
    fn aug_process_radius_survival() {
        let dm = DmParams::single(2, 2.0).unwrap();
        let bounds = vec![1.0, 1.0];
        let mut r = rng(8);
        let mut n_tot = 0usize;
        let mut n_over = 0usize;
        for _ in 0..200 {
            let p = sample_aug_process(&bounds, 1.0, &dm, 50.0, &mut r).unwrap();
            for x in &p.points {
                let rad: f64 = x.iter().sum();
                n_tot += 1;
                if rad > 2.0 * p.r_min {
                    n_over += 1;
                }
            }
        }
        let frac = n_over as f64 / n_tot as f64;
        let se = (0.25 / n_tot as f64).sqrt();
        assert!((frac - 0.5).abs() < 3.0 * se, "{frac} over {n_tot} points");
    }

    #[test]
    fn aug_process_hit_rate_matches_exponent_measure() {
        let dm = reference_mixture();
        let bounds = vec![47.1152, 60.0, 52.0, 47.2];
        let n_block = 25.0;
        let tau = 50.0;
        let lambda = exponent_measure(
            &FailureRegion::rect(bounds.clone(), 1.0).unwrap(),
            &dm,
            400_000,
            &mut rng(100),
        )
        .unwrap();
        let mut r = rng(101);
        let reps = 2_000;
        let mut hits = 0.0;
        let mut hits_sq = 0.0;
        for _ in 0..reps {
            let p = sample_aug_process(&bounds, n_block, &dm, tau, &mut r).unwrap();
            hits += p.hit_count as f64;
            hits_sq += (p.hit_count as f64).powi(2);
        }
        let emp = hits / reps as f64;
        let want = tau * n_block * lambda.value;
        let var = hits_sq / reps as f64 - emp * emp;
        let se = (var / reps as f64).sqrt() + tau * n_block * lambda.std_error;
        assert!((emp - want).abs() < 3.0 * se, "{emp} vs {want} (se {se})");
    }

    #[test]
    fn phi_weight_values() {
        let mut p = AugProcess {
            bounds: vec![1.0],
            n_block: 1.0,
            tau: 50.0,
            r_min: 1.0,
            points: vec![],
            hit_count: 0,
        };
        assert_eq!(phi_weight(&p), 1.0);
        p.hit_count = 3;
        assert!((phi_weight(&p) - 0.98f64.powi(3)).abs() < 1e-15);
        assert!((0.98f64.powi(3) - 0.941192).abs() < 1e-12);
    }

    #[test]
    fn phi_laplace_identity_uniform_bivariate() {
        // E[φ] = exp(−n_block λ(A_u)) with the analytic d=2 uniform-H value
        // λ(A_(1,1)) = 3/2
        let dm = DmParams::single(2, 2.0).unwrap();
        let bounds = vec![1.0, 1.0];
        let n_block = 1.0;
        let tau = 50.0;
        let mut r = rng(12);
        let reps = 10_000;
        let mut s = 0.0;
        let mut s2 = 0.0;
        for _ in 0..reps {
            let p = sample_aug_process(&bounds, n_block, &dm, tau, &mut r).unwrap();
            let phi = phi_weight(&p);
            s += phi;
            s2 += phi * phi;
        }
        let emp = s / reps as f64;
        let want = (-n_block * 1.5f64).exp();
        let var = s2 / reps as f64 - emp * emp;
        let se = (var / reps as f64).sqrt();
        assert!((emp - want).abs() < 3.0 * se, "E[φ] = {emp} vs {want} (se {se})");
    }

    #[test]
    fn loglik_above_fully_exact_additivity() {
        use crate::margins::{log_jacobian_at_frechet, MarginParams, ShapeMode};
        let dm = reference_mixture();
        let cache = DmCache::new(&dm);
        let margins = MarginParams::new(
            vec![4.8, 4.6, 5.9, 5.1],
            ShapeMode::Shared(0.4),
            vec![0.021; 4],
            vec![300.0, 320.0, 520.0, 380.0],
        )
        .unwrap();
        let xs = [60.0, 50.0, 49.0, 80.0];
        let fo = FrechetObs {
            day: 0,
            stations: xs.iter().map(|&x| FrechetMarginal::Exact(x)).collect(),
        };
        let rec = LatentRecord::from_frechet(&fo).unwrap();
        let got = loglik_above(&rec, &margins, &cache).unwrap();
        let mut want = cache.exponent_log_density(&xs).unwrap();
        for (j, &x) in xs.iter().enumerate() {
            want += log_jacobian_at_frechet(&margins, j, x).unwrap();
        }
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn loglik_above_integrates_to_censored_term() {
        // d=2, k=1: ∫ exp(loglik) dz over the latent box equals the censored
        // integral term times the exact coordinate's Jacobian
        use crate::margins::{log_jacobian_at_frechet, MarginParams, ShapeMode};
        let dm = DmParams::single(2, 5.0).unwrap();
        let cache = DmCache::new(&dm);
        let margins = MarginParams::new(
            vec![1.0, 1.2],
            ShapeMode::Shared(0.3),
            vec![0.05, 0.04],
            vec![10.0, 12.0],
        )
        .unwrap();
        let x_exact = 75.0;
        let (lo, hi) = (0.0, margins.frechet_threshold(1));
        let fo = FrechetObs {
            day: 0,
            stations: vec![
                FrechetMarginal::Exact(x_exact),
                FrechetMarginal::Interval { lower: lo, upper: hi },
            ],
        };
        let rec = LatentRecord::from_frechet(&fo).unwrap();
        let f = |z: f64| {
            let mut r2 = rec.clone();
            r2.point[1] = z;
            loglik_above(&r2, &margins, &cache).unwrap().exp()
        };
        let got = integrate_gl(f, 1e-9, hi, 400);
        let dens = |z: f64| cache.exponent_log_density(&[x_exact, z]).unwrap().exp();
        let want = integrate_gl(dens, 1e-9, hi, 400)
            * log_jacobian_at_frechet(&margins, 0, x_exact).unwrap().exp();
        assert!(((got - want) / want).abs() < 1e-6, "{got} vs {want}");
    }

    #[test]
    fn process_stats_match_explicit_points() {
        let dm = reference_mixture();
        let cache = DmCache::new(&dm);
        let bounds = vec![47.1, 51.0, 49.0, 48.0];
        let proc = sample_aug_process(&bounds, 10.0, &dm, 50.0, &mut rng(5)).unwrap();
        let s1 = process_stats(&proc, &cache).unwrap();
        assert_eq!(s1.n_points, proc.points.len());
        assert_eq!(s1.hits, proc.hit_count);
        // density assembled from stats matches a direct evaluation
        let ld = process_log_density(&s1, &bounds, 10.0, 50.0, 4);
        assert!(ld.is_finite());
        // doubling tau at fixed points: only −λ'(E) and N ln(τd) change
        let ld2 = process_log_density(&s1, &bounds, 10.0, 100.0, 4);
        let min_b = 47.1;
        let want_delta =
            -(100.0 - 50.0) * 4.0 * 10.0 / min_b + s1.n_points as f64 * 2.0f64.ln();
        assert!(((ld2 - ld) - want_delta).abs() < 1e-9);
    }

    #[test]
    fn streamed_stats_have_correct_distribution() {
        // mean hits of the streamed sampler agree with the explicit sampler
        let dm = reference_mixture();
        let cache = DmCache::new(&dm);
        let bounds = vec![47.1152; 4];
        let mut r1 = rng(21);
        let mut r2 = rng(22);
        let reps = 400;
        let (mut h1, mut h2) = (0.0, 0.0);
        let (mut n1, mut n2) = (0.0, 0.0);
        for _ in 0..reps {
            let a = sample_aug_process(&bounds, 20.0, &dm, 50.0, &mut r1).unwrap();
            let b = sample_process_stats(&bounds, 20.0, &dm, &cache, 50.0, &mut r2).unwrap();
            h1 += a.hit_count as f64;
            h2 += b.hits as f64;
            n1 += a.points.len() as f64;
            n2 += b.n_points as f64;
        }
        let (h1, h2) = (h1 / reps as f64, h2 / reps as f64);
        let (n1, n2) = (n1 / reps as f64, n2 / reps as f64);
        assert!((n1 - n2).abs() / n1 < 0.02, "point counts {n1} vs {n2}");
        assert!((h1 - h2).abs() / h1 < 0.03, "hit counts {h1} vs {h2}");
    }
}
