//! The augmented posterior and its Metropolis-within-Gibbs sampler.
//!
//! The chain state is θ = (χ, ψ) plus the augmentation data: latent
//! coordinates of the above-threshold records and the sufficient statistics
//! of the auxiliary Poisson processes (one for the base failure region, one
//! per threshold-overlapping block). Move types:
//!
//! * marginal — block random-walk on χ with covariance δ·H⁻¹ from the
//!   preliminary fit; rejected outright if any latent coordinate leaves its
//!   re-transformed censoring box;
//! * z-above — exact Gibbs sweep of the latent coordinates (α = 1);
//! * z-prime — wholesale resampling of the auxiliary processes, accepted
//!   with (1−1/τ)^{Δhits};
//! * dependence — fixed-dimension updates of ψ (center / shape / weight),
//!   each immediately followed by a z-prime refresh with the combined ratio;
//! * reversible jump — birth/death of a mixture component, also followed by
//!   the z-prime refresh.
//!
//! The moments constraint is maintained by construction: the last mixture
//! component is a slave whose center solves Σ p μ = (1/d,…,1/d) after every
//! proposal touching weights or centers. The within-dimension prior mass of
//! the valid region, Z_k, enters the birth/death ratio so that the prior
//! marginal of k stays exactly truncated-geometric; Z_k is estimated once by
//! Monte Carlo with a fixed internal seed.

mod prelim;

pub use prelim::{preliminary_fit, PrelimFit};

use crate::augment::{
    gibbs_sweep_record, loglik_above, phi_log_weight, process_log_density, sample_process_stats,
    LatentRecord, ProcessStats,
};
use crate::data::{censor_transform, classify, summarize, DatasetSummary, Observation, Position};
use crate::dm::{
    check_moments_constraint, sample_dirichlet, dirichlet_log_density, DmCache, DmParams,
    SimplexPoint,
};
use crate::error::{Error, Result};
use crate::margins::MarginParams;
use crate::numeric::cholesky;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Prior specification. The mixture-size prior is truncated geometric,
/// [k] ∝ (1 − 1/λ)^{k−1}/λ on {1,…,k_max}; shapes are log-normal; centers
/// and weights are uniform on the constraint manifold; marginal parameters
/// are independent normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub lambda_geo: f64,
    pub k_max: usize,
    pub nu_log_mean: f64,
    pub nu_log_sd: f64,
    pub xi_mean: f64,
    pub xi_sd: f64,
    pub log_sigma_mean: f64,
    pub log_sigma_sd: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            lambda_geo: 4.0,
            k_max: 10,
            nu_log_mean: 3.0,
            nu_log_sd: 2.0,
            xi_mean: 0.0,
            xi_sd: 1.0,
            log_sigma_mean: 5.0,
            log_sigma_sd: 5.0,
        }
    }
}

fn ln_normal(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * (2.0 * std::f64::consts::PI).ln() - sd.ln() - 0.5 * z * z
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_geo > 1.0) {
            return Err(Error::domain("lambda_geo must exceed 1"));
        }
        if self.k_max < 1 {
            return Err(Error::domain("k_max must be >= 1"));
        }
        if !(self.nu_log_sd > 0.0) || !(self.xi_sd > 0.0) || !(self.log_sigma_sd > 0.0) {
            return Err(Error::domain("prior standard deviations must be positive"));
        }
        Ok(())
    }

    /// Normalized truncated-geometric log-pmf of the component count.
    pub fn log_prior_k(&self, k: usize) -> f64 {
        if k < 1 || k > self.k_max {
            return f64::NEG_INFINITY;
        }
        let q = 1.0 - 1.0 / self.lambda_geo;
        let norm = (1.0 - q.powi(self.k_max as i32)) / (1.0 - q);
        (k as f64 - 1.0) * q.ln() - norm.ln()
    }

    pub fn geometric_pmf(&self, k: usize) -> f64 {
        self.log_prior_k(k).exp()
    }

    /// Log-normal prior density of one shape parameter.
    pub fn log_prior_nu(&self, nu: f64) -> f64 {
        if !(nu > 0.0) {
            return f64::NEG_INFINITY;
        }
        ln_normal(nu.ln(), self.nu_log_mean, self.nu_log_sd) - nu.ln()
    }

    /// Normal priors on ξ (one per free shape) and the log scales.
    pub fn log_prior_margins(&self, m: &MarginParams) -> f64 {
        let mut total = 0.0;
        for j in 0..m.dim() {
            total += ln_normal(m.log_sigma(j), self.log_sigma_mean, self.log_sigma_sd);
        }
        match m.shape_mode() {
            crate::margins::ShapeMode::Shared(xi) => {
                total += ln_normal(*xi, self.xi_mean, self.xi_sd);
            }
            crate::margins::ShapeMode::PerStation(xs) => {
                for &xi in xs {
                    total += ln_normal(xi, self.xi_mean, self.xi_sd);
                }
            }
        }
        total
    }

    pub fn sample_nu<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = standard_normal(rng);
        (self.nu_log_mean + self.nu_log_sd * z).exp()
    }
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller; one value per call keeps the draw pattern simple
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Move-type probabilities; must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveProbs {
    pub marginal: f64,
    pub z_above: f64,
    pub z_prime: f64,
    pub dependence: f64,
    pub reversible_jump: f64,
}

impl Default for MoveProbs {
    fn default() -> Self {
        MoveProbs {
            marginal: 0.2,
            z_above: 0.3,
            z_prime: 0.1,
            dependence: 0.3,
            reversible_jump: 0.1,
        }
    }
}

impl MoveProbs {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.marginal, self.z_above, self.z_prime, self.dependence, self.reversible_jump];
        if parts.iter().any(|&p| p < 0.0) {
            return Err(Error::domain("move probabilities must be nonnegative"));
        }
        let s: f64 = parts.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("move probabilities sum to {s}, not 1")));
        }
        Ok(())
    }
}

/// Sampler configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iterations: u64,
    pub burn_in: u64,
    pub thin: u64,
    /// Scale of the marginal block proposal covariance δ·H⁻¹.
    pub delta: f64,
    /// Dirichlet re-centering parameter for center updates, in (0, 0.5).
    pub epsilon: f64,
    /// Intensity multiplier of the auxiliary processes.
    pub tau: f64,
    pub move_probs: MoveProbs,
    /// Log-scale random-walk step for shape updates.
    pub shape_step: f64,
    /// Logistic-normal random-walk step for weight updates.
    pub weight_step: f64,
    /// Monte-Carlo sample count per k for the Z_k constants.
    pub slave_mc_samples: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            iterations: 10_000,
            burn_in: 2_000,
            thin: 10,
            delta: 0.5,
            epsilon: 0.1,
            tau: 50.0,
            move_probs: MoveProbs::default(),
            shape_step: 0.4,
            weight_step: 0.3,
            slave_mc_samples: 400_000,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::domain("epsilon must lie in (0, 0.5)"));
        }
        if !(self.delta > 0.0) {
            return Err(Error::domain("delta must be positive"));
        }
        if !(self.tau > 1.0) {
            return Err(Error::domain("tau must exceed 1"));
        }
        if self.thin == 0 {
            return Err(Error::domain("thin must be >= 1"));
        }
        if !(self.shape_step > 0.0) || !(self.weight_step > 0.0) {
            return Err(Error::domain("random-walk steps must be positive"));
        }
        self.move_probs.validate()
    }
}

/// Acceptance bookkeeping: (attempts, accepts) per move type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveCounters {
    pub marginal: [u64; 2],
    pub z_above: [u64; 2],
    pub z_prime: [u64; 2],
    pub dependence: [u64; 2],
    pub reversible_jump: [u64; 2],
}

/// One region covered by an auxiliary process: the base failure region or a
/// threshold-overlapping block. Bounds are Fréchet-scale and frozen at
/// setup; entries may be +∞ (unconstrained directions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub bounds: Vec<f64>,
    pub n_block: f64,
}

/// Data prepared once per run: the above-threshold records in raw form (they
/// are re-standardized on every marginal move), the dataset summary, and the
/// frozen process regions.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub d: usize,
    pub above_raw: Vec<Observation>,
    pub summary: DatasetSummary,
    pub regions: Vec<Region>,
}

/// Classify the dataset and freeze the process regions under the initial
/// margins. Overlap-block bounds are mapped to the Fréchet scale once, with
/// `margins0`, and held fixed afterwards: the marginal-move ratio contains no
/// process terms, exactly as the augmented model prescribes.
pub fn prepare_data(
    dataset: &[Observation],
    margins0: &MarginParams,
) -> Result<PreparedData> {
    let d = margins0.dim();
    for o in dataset {
        if o.dim() != d {
            return Err(Error::domain("observation dimension mismatch"));
        }
    }
    let v = margins0.thresholds();
    let summary = summarize(dataset, v);
    let above_raw: Vec<Observation> = dataset
        .iter()
        .filter(|o| !o.fully_missing() && classify(o, v) == Position::Above)
        .cloned()
        .collect();
    let mut regions = Vec::with_capacity(1 + summary.blocks.len());
    regions.push(Region {
        bounds: margins0.frechet_thresholds().to_vec(),
        n_block: summary.n_determined() as f64,
    });
    for block in &summary.blocks {
        let bounds: Vec<f64> = block
            .bounds
            .iter()
            .enumerate()
            .map(|(j, b)| b.frechet_bound(margins0, j))
            .collect::<Result<_>>()?;
        if bounds.iter().all(|b| b.is_infinite()) {
            // a block with no finite bound carries no information
            continue;
        }
        regions.push(Region { bounds, n_block: block.count as f64 });
    }
    Ok(PreparedData { d, above_raw, summary, regions })
}

const SLAVE_SEED: u64 = 0x51a7_e5eed;

/// ln Z_k for k = 1..k_max: the prior probability that the slave center
/// solved from free draws lands inside the simplex. Estimated by Monte Carlo
/// with a fixed seed so every run shares the same constants.
pub fn estimate_slave_normalizers(d: usize, k_max: usize, n_samples: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        if k == 1 {
            out.push(0.0);
            continue;
        }
        let mut rng = ChaCha12Rng::seed_from_u64(SLAVE_SEED.wrapping_add(k as u64));
        let uniform_center = SimplexPoint::center(d);
        let mut valid = 0usize;
        for _ in 0..n_samples {
            // weights ~ Dirichlet(1,…,1) on S_k, free centers uniform on S_d
            let w = sample_dirichlet(k as f64, &SimplexPoint::center(k), &mut rng);
            let mut centers: Vec<SimplexPoint> = Vec::with_capacity(k - 1);
            for _ in 0..k - 1 {
                centers.push(sample_dirichlet(d as f64, &uniform_center, &mut rng));
            }
            let refs: Vec<&SimplexPoint> = centers.iter().collect();
            if slave_center(w.coords(), &refs, d).is_some() {
                valid += 1;
            }
        }
        let z = (valid.max(1)) as f64 / n_samples as f64;
        out.push(z.ln());
    }
    out
}

/// Solve the slave center from the free components: μ_slave such that
/// Σ p_m μ_m = (1/d,…,1/d), where `free_centers` are components 0..k−2 and
/// the slave weight is the last entry of `weights`. None when the solution
/// leaves the simplex.
pub fn slave_center(weights: &[f64], free_centers: &[&SimplexPoint], d: usize) -> Option<SimplexPoint> {
    let k = weights.len();
    debug_assert_eq!(free_centers.len(), k - 1);
    let p_slave = weights[k - 1];
    if !(p_slave > 0.0) {
        return None;
    }
    let target = 1.0 / d as f64;
    let mut coords = vec![0.0; d];
    for j in 0..d {
        let mut s = 0.0;
        for (m, c) in free_centers.iter().enumerate() {
            s += weights[m] * c.coords()[j];
        }
        let mu = (target - s) / p_slave;
        if !(mu > 0.0) || !mu.is_finite() {
            return None;
        }
        coords[j] = mu;
    }
    // the coordinates sum to 1 analytically; renormalize the FP drift
    let total: f64 = coords.iter().sum();
    for c in &mut coords {
        *c /= total;
    }
    SimplexPoint::new(coords).ok()
}

/// Assemble a constrained mixture from free parts plus the recomputed slave.
fn build_dm(weights: Vec<f64>, mut free_centers: Vec<SimplexPoint>, shapes: Vec<f64>, d: usize) -> Option<DmParams> {
    let refs: Vec<&SimplexPoint> = free_centers.iter().collect();
    let slave = slave_center(&weights, &refs, d)?;
    free_centers.push(slave);
    DmParams::new(weights, free_centers, shapes).ok()
}

/// Immutable sampler context shared by all chains of a run.
#[derive(Debug)]
pub struct Sampler {
    pub config: McmcConfig,
    pub priors: PriorConfig,
    pub data: PreparedData,
    pub init_margins: MarginParams,
    pub init_dm: DmParams,
    /// Lower-triangular factor of the marginal proposal covariance δ·H⁻¹:
    /// proposal step = sqrt(δ)·L_H⁻ᵀ z with H = L_H L_Hᵀ.
    chol_h: Option<Vec<f64>>,
    /// Fallback per-coordinate proposal standard deviations.
    fallback_sd: Vec<f64>,
    n_free: usize,
    /// ln Z_k, k = 1..k_max.
    slave_ln_z: Vec<f64>,
    /// Unique missing-station patterns over the above records.
    patterns: Vec<Vec<usize>>,
    /// Pattern index per record.
    record_pattern: Vec<usize>,
}

/// Overridable initial values.
#[derive(Debug, Clone, Default)]
pub struct InitOverrides {
    pub margins: Option<MarginParams>,
    pub dm: Option<DmParams>,
}

impl Sampler {
    /// Build the sampler: run the preliminary fit (unless margins are
    /// overridden), freeze the process regions, estimate the Z_k constants
    /// when reversible jumps are enabled.
    pub fn new(
        config: McmcConfig,
        priors: PriorConfig,
        dataset: &[Observation],
        template: &MarginParams,
        overrides: InitOverrides,
    ) -> Result<Sampler> {
        config.validate()?;
        priors.validate()?;
        let prelim = preliminary_fit(dataset, template, &priors)?;
        let init_margins = overrides.margins.unwrap_or_else(|| prelim.margins.clone());
        let n_free = init_margins.n_free();
        let data = prepare_data(dataset, &init_margins)?;
        let d = data.d;

        let chol_h = cholesky(&prelim.hessian, n_free);
        let mut fallback_sd = Vec::with_capacity(n_free);
        for _ in 0..d {
            fallback_sd.push(priors.log_sigma_sd);
        }
        for _ in d..n_free {
            fallback_sd.push(priors.xi_sd);
        }

        let init_dm = match overrides.dm {
            Some(dm) => {
                if dm.dim() != d {
                    return Err(Error::domain("initial mixture dimension mismatch"));
                }
                dm
            }
            None => DmParams::single(d, priors.nu_log_mean.exp())?,
        };
        if init_dm.k() > priors.k_max {
            return Err(Error::domain("initial mixture has more components than k_max"));
        }

        let slave_ln_z = if config.move_probs.reversible_jump > 0.0 && priors.k_max >= 2 {
            estimate_slave_normalizers(d, priors.k_max, config.slave_mc_samples)
        } else {
            vec![0.0; priors.k_max]
        };

        // group records by missing pattern
        let mut patterns: Vec<Vec<usize>> = Vec::new();
        let mut record_pattern = Vec::with_capacity(data.above_raw.len());
        for o in &data.above_raw {
            let fo = censor_transform(o, &init_margins)?;
            let missing = fo.missing_indices();
            let idx = match patterns.iter().position(|p| *p == missing) {
                Some(i) => i,
                None => {
                    patterns.push(missing);
                    patterns.len() - 1
                }
            };
            record_pattern.push(idx);
        }

        Ok(Sampler {
            config,
            priors,
            data,
            init_margins,
            init_dm,
            chol_h,
            fallback_sd,
            n_free,
            slave_ln_z,
            patterns,
            record_pattern,
        })
    }

    pub fn dim(&self) -> usize {
        self.data.d
    }

    fn ln_z(&self, k: usize) -> f64 {
        self.slave_ln_z[k - 1]
    }

    /// Full log prior of a state, including the structural constants of the
    /// constrained-uniform mixture prior so ratios stay auditable.
    pub fn log_prior(&self, margins: &MarginParams, dm: &DmParams) -> f64 {
        let k = dm.k();
        let d = dm.dim() as f64;
        let mut lp = self.priors.log_prior_k(k);
        lp += crate::special::ln_gamma(k as f64); // Dirichlet(1,…,1) weight density
        lp += (k as f64 - 1.0) * crate::special::ln_gamma(d); // uniform free centers
        lp -= self.ln_z(k);
        for &nu in dm.shapes() {
            lp += self.priors.log_prior_nu(nu);
        }
        lp + self.priors.log_prior_margins(margins)
    }

    /// Draw a marginal proposal step.
    fn marginal_step<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.n_free).map(|_| standard_normal(rng)).collect();
        let scale = self.config.delta.sqrt();
        match &self.chol_h {
            Some(l) => {
                // solve Lᵀ x = z (back substitution), then step = sqrt(δ) x
                let n = self.n_free;
                let mut x = vec![0.0; n];
                for i in (0..n).rev() {
                    let mut s = z[i];
                    for l_idx in i + 1..n {
                        s -= l[l_idx * n + i] * x[l_idx];
                    }
                    x[i] = s / l[i * n + i];
                }
                x.iter().map(|&v| scale * v).collect()
            }
            None => z
                .iter()
                .zip(self.fallback_sd.iter())
                .map(|(&zi, &sd)| scale * sd * zi)
                .collect(),
        }
    }
}

/// Reduced mixture for one missing pattern; single-coordinate reductions
/// need no mixture (the 1-d exponent density is x⁻²).
#[derive(Debug, Clone)]
enum Reduced {
    Full(DmCache),
    Mixture(DmParams, DmCache),
    Univariate,
}

impl Reduced {
    fn cache(&self) -> Option<&DmCache> {
        match self {
            Reduced::Full(c) | Reduced::Mixture(_, c) => Some(c),
            Reduced::Univariate => None,
        }
    }

    fn params<'a>(&'a self, full: &'a DmParams) -> Option<&'a DmParams> {
        match self {
            Reduced::Full(_) => Some(full),
            Reduced::Mixture(p, _) => Some(p),
            Reduced::Univariate => None,
        }
    }
}

fn reduce_all(dm: &DmParams, patterns: &[Vec<usize>], d: usize) -> Result<Vec<Reduced>> {
    patterns
        .iter()
        .map(|missing| {
            if missing.is_empty() {
                Ok(Reduced::Full(DmCache::new(dm)))
            } else if d - missing.len() == 1 {
                Ok(Reduced::Univariate)
            } else {
                let red = crate::dm::marginalize(dm, missing)?;
                let cache = DmCache::new(&red);
                Ok(Reduced::Mixture(red, cache))
            }
        })
        .collect()
}

/// Mutable chain state.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub margins: MarginParams,
    pub dm: DmParams,
    pub records: Vec<LatentRecord>,
    pub loglik_terms: Vec<f64>,
    pub proc_stats: Vec<ProcessStats>,
    pub log_prior: f64,
    reduced: Vec<Reduced>,
}

impl ChainState {
    pub fn total_hits(&self) -> usize {
        self.proc_stats.iter().map(|s| s.hits).sum()
    }
}

/// Serialized state sufficient to resume a chain bit-exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iteration: u64,
    pub margins_free: Vec<f64>,
    pub dm: DmParams,
    /// Latent values per record, in kept-coordinate order.
    pub latent_values: Vec<Vec<f64>>,
    pub proc_stats: Vec<ProcessStats>,
    pub counters: MoveCounters,
    pub rng: ChaCha12Rng,
}

/// A record emitted on the thinning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub iter: u64,
    pub k: usize,
    pub log_post: f64,
    pub weights: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
    pub shapes: Vec<f64>,
    pub log_sigma: Vec<f64>,
    pub xi: Vec<f64>,
    pub hits: u64,
    pub accept: MoveCounters,
}

impl ChainRecord {
    /// Rebuild the mixture parameters carried by this record.
    pub fn dm(&self) -> Result<DmParams> {
        let centers = self
            .centers
            .iter()
            .map(|c| SimplexPoint::new(c.clone()))
            .collect::<Result<Vec<_>>>()?;
        DmParams::new(self.weights.clone(), centers, self.shapes.clone())
    }

    /// Rebuild the margins (thresholds and ζ come from the template).
    pub fn margins(&self, template: &MarginParams) -> Result<MarginParams> {
        let shape = if self.xi.len() == 1 {
            crate::margins::ShapeMode::Shared(self.xi[0])
        } else {
            crate::margins::ShapeMode::PerStation(self.xi.clone())
        };
        template.with_parameters(self.log_sigma.clone(), shape)
    }
}

/// One MCMC chain.
pub struct Chain<'a> {
    sampler: &'a Sampler,
    pub state: ChainState,
    pub iteration: u64,
    pub counters: MoveCounters,
    rng: ChaCha12Rng,
}

impl<'a> Chain<'a> {
    /// Fresh chain from the sampler's initial values. `stream` separates
    /// parallel chains sharing one base seed.
    pub fn new(sampler: &'a Sampler, base_seed: u64, stream: u64) -> Result<Chain<'a>> {
        let mut rng = ChaCha12Rng::seed_from_u64(base_seed);
        rng.set_stream(stream);
        let margins = sampler.init_margins.clone();
        let dm = sampler.init_dm.clone();
        let mut state = Chain::assemble_state(sampler, margins, dm, None)?;
        // initial auxiliary processes drawn from their exact law
        let cache = DmCache::new(&state.dm);
        for (i, region) in sampler.data.regions.iter().enumerate() {
            state.proc_stats[i] = sample_process_stats(
                &region.bounds,
                region.n_block,
                &state.dm,
                &cache,
                sampler.config.tau,
                &mut rng,
            )?;
        }
        let chain = Chain { sampler, state, iteration: 0, counters: MoveCounters::default(), rng };
        let lp = chain.cached_log_posterior();
        if !lp.is_finite() {
            return Err(Error::InvalidState(format!(
                "log posterior not finite at initialization: {lp}"
            )));
        }
        Ok(chain)
    }

    /// Rebuild latent records, reduced mixtures and cached likelihood terms
    /// for the given parameters. Latent values are re-initialized unless
    /// supplied.
    fn assemble_state(
        sampler: &Sampler,
        margins: MarginParams,
        dm: DmParams,
        latent_values: Option<&[Vec<f64>]>,
    ) -> Result<ChainState> {
        let reduced = reduce_all(&dm, &sampler.patterns, sampler.data.d)?;
        let mut records = Vec::with_capacity(sampler.data.above_raw.len());
        for (i, raw) in sampler.data.above_raw.iter().enumerate() {
            let fo = censor_transform(raw, &margins)?;
            let mut rec = LatentRecord::from_frechet(&fo)?;
            if let Some(values) = latent_values {
                let mut vi = 0usize;
                for (c, role) in rec.roles.clone().iter().enumerate() {
                    if matches!(role, crate::augment::CoordRole::Latent { .. }) {
                        rec.point[c] = values[i][vi];
                        vi += 1;
                    }
                }
            }
            records.push(rec);
        }
        let mut loglik_terms = vec![0.0; records.len()];
        let full_cache = DmCache::new(&dm);
        for (i, rec) in records.iter().enumerate() {
            let cache = reduced[sampler.record_pattern[i]].cache().unwrap_or(&full_cache);
            loglik_terms[i] = loglik_above(rec, &margins, cache)?;
        }
        let log_prior = sampler.log_prior(&margins, &dm);
        let proc_stats = vec![ProcessStats::empty(); sampler.data.regions.len()];
        Ok(ChainState { margins, dm, records, loglik_terms, proc_stats, log_prior, reduced })
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha12Rng {
        &mut self.rng
    }

    /// The cached augmented log posterior (up to θ-independent constants).
    pub fn cached_log_posterior(&self) -> f64 {
        let s = &self.state;
        let mut lp = s.log_prior;
        lp += s.loglik_terms.iter().sum::<f64>();
        lp += phi_log_weight(s.total_hits(), self.sampler.config.tau);
        for (stats, region) in s.proc_stats.iter().zip(&self.sampler.data.regions) {
            lp += process_log_density(
                stats,
                &region.bounds,
                region.n_block,
                self.sampler.config.tau,
                self.sampler.data.d,
            );
        }
        lp
    }

    /// Recompute every cached term from scratch (process statistics are
    /// sufficient statistics and are kept as-is).
    pub fn recompute_log_posterior(&self) -> Result<f64> {
        let s = &self.state;
        let mut lp = self.sampler.log_prior(&s.margins, &s.dm);
        let full_cache = DmCache::new(&s.dm);
        let reduced = reduce_all(&s.dm, &self.sampler.patterns, self.sampler.data.d)?;
        for (i, rec) in s.records.iter().enumerate() {
            let cache = reduced[self.sampler.record_pattern[i]].cache().unwrap_or(&full_cache);
            lp += loglik_above(rec, &s.margins, cache)?;
        }
        lp += phi_log_weight(s.total_hits(), self.sampler.config.tau);
        for (stats, region) in s.proc_stats.iter().zip(&self.sampler.data.regions) {
            lp += process_log_density(
                stats,
                &region.bounds,
                region.n_block,
                self.sampler.config.tau,
                self.sampler.data.d,
            );
        }
        Ok(lp)
    }

    /// One iteration: pick a move type by the configured probabilities.
    pub fn step(&mut self) -> Result<()> {
        self.iteration += 1;
        let u: f64 = self.rng.gen();
        let p = &self.sampler.config.move_probs;
        if u < p.marginal {
            self.marginal_move()
        } else if u < p.marginal + p.z_above {
            self.z_above_move()
        } else if u < p.marginal + p.z_above + p.z_prime {
            self.z_prime_move()
        } else if u < p.marginal + p.z_above + p.z_prime + p.dependence {
            self.dependence_move()
        } else {
            self.reversible_jump_move()
        }
    }

    /// Run `n` iterations, emitting a record at every thinning boundary.
    /// Iteration 0 (the current state) is emitted first when the chain is
    /// fresh.
    pub fn run<F: FnMut(ChainRecord) -> Result<()>>(&mut self, n: u64, mut sink: F) -> Result<()> {
        if self.iteration == 0 {
            sink(self.record())?;
        }
        let target = self.iteration + n;
        while self.iteration < target {
            self.step()?;
            if self.iteration % self.sampler.config.thin == 0 {
                sink(self.record())?;
            }
        }
        Ok(())
    }

    pub fn record(&self) -> ChainRecord {
        let s = &self.state;
        let xi = match s.margins.shape_mode() {
            crate::margins::ShapeMode::Shared(x) => vec![*x],
            crate::margins::ShapeMode::PerStation(xs) => xs.clone(),
        };
        ChainRecord {
            iter: self.iteration,
            k: s.dm.k(),
            log_post: self.cached_log_posterior(),
            weights: s.dm.weights().to_vec(),
            centers: s.dm.centers().iter().map(|c| c.coords().to_vec()).collect(),
            shapes: s.dm.shapes().to_vec(),
            log_sigma: s.margins.log_scales().to_vec(),
            xi,
            hits: s.total_hits() as u64,
            accept: self.counters,
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let latent_values: Vec<Vec<f64>> = self
            .state
            .records
            .iter()
            .map(|r| {
                r.roles
                    .iter()
                    .enumerate()
                    .filter(|(_, role)| matches!(role, crate::augment::CoordRole::Latent { .. }))
                    .map(|(i, _)| r.point[i])
                    .collect()
            })
            .collect();
        Checkpoint {
            iteration: self.iteration,
            margins_free: self.state.margins.free_vector(),
            dm: self.state.dm.clone(),
            latent_values,
            proc_stats: self.state.proc_stats.clone(),
            counters: self.counters,
            rng: self.rng.clone(),
        }
    }

    /// Rebuild a chain from a checkpoint; continues bit-exactly.
    pub fn restore(sampler: &'a Sampler, ckpt: Checkpoint) -> Result<Chain<'a>> {
        let margins = sampler.init_margins.from_free_vector(&ckpt.margins_free)?;
        let mut state =
            Chain::assemble_state(sampler, margins, ckpt.dm, Some(&ckpt.latent_values))?;
        if ckpt.proc_stats.len() != state.proc_stats.len() {
            return Err(Error::InvalidState("checkpoint region count mismatch".into()));
        }
        state.proc_stats = ckpt.proc_stats;
        Ok(Chain {
            sampler,
            state,
            iteration: ckpt.iteration,
            counters: ckpt.counters,
            rng: ckpt.rng,
        })
    }

    fn accept_with_log_prob(&mut self, log_alpha: f64) -> bool {
        if log_alpha >= 0.0 {
            // still consume one uniform so accept/reject paths draw alike
            let _: f64 = self.rng.gen();
            return true;
        }
        let u: f64 = self.rng.gen::<f64>().max(f64::MIN_POSITIVE);
        u.ln() < log_alpha
    }

    // ----- marginal move -------------------------------------------------

    fn marginal_move(&mut self) -> Result<()> {
        self.counters.marginal[0] += 1;
        let step = self.sampler.marginal_step(&mut self.rng);
        let outcome = self.marginal_candidate(&step)?;
        if let Some((log_alpha, cand_margins, cand_records, cand_logliks, prior_delta)) = outcome {
            if self.accept_with_log_prob(log_alpha) {
                self.counters.marginal[1] += 1;
                self.state.margins = cand_margins;
                self.state.records = cand_records;
                self.state.loglik_terms = cand_logliks;
                self.state.log_prior += prior_delta;
            }
        } else {
            // latent coordinate left its candidate box: immediate rejection;
            // consume the acceptance uniform anyway for a stable draw pattern
            let _: f64 = self.rng.gen();
        }
        Ok(())
    }

    /// Candidate assembly for a marginal step. Returns None when a latent
    /// coordinate falls outside its re-transformed box (hard rejection).
    #[allow(clippy::type_complexity)]
    fn marginal_candidate(
        &self,
        step: &[f64],
    ) -> Result<Option<(f64, MarginParams, Vec<LatentRecord>, Vec<f64>, f64)>> {
        let s = &self.state;
        let free: Vec<f64> =
            s.margins.free_vector().iter().zip(step).map(|(a, b)| a + b).collect();
        let cand_margins = match s.margins.from_free_vector(&free) {
            Ok(m) => m,
            Err(_) => return Ok(None),
        };
        let mut cand_records = Vec::with_capacity(s.records.len());
        let mut cand_logliks = Vec::with_capacity(s.records.len());
        let mut delta_lik = 0.0;
        let full_cache = DmCache::new(&s.dm);
        for (i, raw) in self.sampler.data.above_raw.iter().enumerate() {
            let fo = censor_transform(raw, &cand_margins)?;
            if !s.records[i].contained_in(&fo) {
                return Ok(None);
            }
            let mut rec = s.records[i].clone();
            rec.refresh_bounds(&fo);
            let cache =
                s.reduced[self.sampler.record_pattern[i]].cache().unwrap_or(&full_cache);
            let ll = loglik_above(&rec, &cand_margins, cache)?;
            delta_lik += ll - s.loglik_terms[i];
            cand_records.push(rec);
            cand_logliks.push(ll);
        }
        let prior_delta = self.sampler.priors.log_prior_margins(&cand_margins)
            - self.sampler.priors.log_prior_margins(&s.margins);
        Ok(Some((prior_delta + delta_lik, cand_margins, cand_records, cand_logliks, prior_delta)))
    }

    // ----- latent Gibbs sweep --------------------------------------------

    fn z_above_move(&mut self) -> Result<()> {
        self.counters.z_above[0] += 1;
        let s = &mut self.state;
        let full_cache = DmCache::new(&s.dm);
        for (i, rec) in s.records.iter_mut().enumerate() {
            if rec.n_latent() == 0 {
                continue;
            }
            let pattern = self.sampler.record_pattern[i];
            let dm0 = s.reduced[pattern].params(&s.dm).unwrap_or(&s.dm);
            gibbs_sweep_record(rec, dm0, &mut self.rng)?;
            let cache = s.reduced[pattern].cache().unwrap_or(&full_cache);
            s.loglik_terms[i] = loglik_above(rec, &s.margins, cache)?;
        }
        self.counters.z_above[1] += 1;
        Ok(())
    }

    // ----- auxiliary process refresh --------------------------------------

    /// Draw fresh process statistics for every region under `dm`.
    fn propose_processes(&mut self, dm: &DmParams) -> Result<Vec<ProcessStats>> {
        let cache = DmCache::new(dm);
        let mut out = Vec::with_capacity(self.sampler.data.regions.len());
        for region in &self.sampler.data.regions {
            out.push(sample_process_stats(
                &region.bounds,
                region.n_block,
                dm,
                &cache,
                self.sampler.config.tau,
                &mut self.rng,
            )?);
        }
        Ok(out)
    }

    fn z_prime_move(&mut self) -> Result<()> {
        self.counters.z_prime[0] += 1;
        let dm = self.state.dm.clone();
        let proposal = self.propose_processes(&dm)?;
        let new_hits: usize = proposal.iter().map(|p| p.hits).sum();
        let old_hits = self.state.total_hits();
        let log_alpha = (new_hits as f64 - old_hits as f64)
            * (1.0 - 1.0 / self.sampler.config.tau).ln();
        if self.accept_with_log_prob(log_alpha) {
            self.counters.z_prime[1] += 1;
            self.state.proc_stats = proposal;
        }
        Ok(())
    }

    // ----- dependence moves ------------------------------------------------

    /// Candidate ψ with proposal-density log-ratio q(ψ*→ψ)/q(ψ→ψ*) and prior
    /// log-ratio, or None for an invalid slave.
    fn propose_dependence(&mut self) -> Result<Option<(DmParams, f64, f64)>> {
        let dm = &self.state.dm;
        let k = dm.k();
        let d = dm.dim();
        // feasible sub-moves: center/weight need a free component
        let choice = if k >= 2 {
            self.rng.gen_range(0..3u8)
        } else {
            1u8 // shape move only
        };
        match choice {
            0 => {
                // center update on a random free component
                let m = self.rng.gen_range(0..k - 1);
                let eps = self.sampler.config.epsilon;
                let shape = d as f64 / eps;
                let center = SimplexPoint::center(d);
                let blend = |from: &SimplexPoint| {
                    SimplexPoint::new(
                        from.coords()
                            .iter()
                            .zip(center.coords())
                            .map(|(&a, &c)| (1.0 - eps) * a + eps * c)
                            .collect(),
                    )
                    .expect("convex blend stays on the simplex")
                };
                let gamma_fwd = blend(&dm.centers()[m]);
                let proposal = sample_dirichlet(shape, &gamma_fwd, &mut self.rng);
                let mut free: Vec<SimplexPoint> = dm.centers()[..k - 1].to_vec();
                free[m] = proposal.clone();
                let cand = match build_dm(dm.weights().to_vec(), free, dm.shapes().to_vec(), d) {
                    Some(c) => c,
                    None => return Ok(None),
                };
                let gamma_bwd = blend(&proposal);
                let ln_fwd = dirichlet_log_density(&proposal, shape, &gamma_fwd)?;
                let ln_bwd = dirichlet_log_density(&dm.centers()[m], shape, &gamma_bwd)?;
                Ok(Some((cand, ln_bwd - ln_fwd, 0.0)))
            }
            1 => {
                // log-scale random walk on one shape (slave's ν is free too)
                let m = self.rng.gen_range(0..k);
                let z = standard_normal(&mut self.rng);
                let nu_new = dm.shapes()[m] * (self.sampler.config.shape_step * z).exp();
                if !(nu_new > 0.0) || !nu_new.is_finite() {
                    return Ok(None);
                }
                let mut shapes = dm.shapes().to_vec();
                let old = shapes[m];
                shapes[m] = nu_new;
                let cand =
                    match DmParams::new(dm.weights().to_vec(), dm.centers().to_vec(), shapes) {
                        Ok(c) => c,
                        Err(_) => return Ok(None),
                    };
                let q_ratio = nu_new.ln() - old.ln();
                let prior_ratio =
                    self.sampler.priors.log_prior_nu(nu_new) - self.sampler.priors.log_prior_nu(old);
                Ok(Some((cand, q_ratio, prior_ratio)))
            }
            _ => {
                // logistic-normal random walk on the weights (slave last)
                let p_slave = dm.weights()[k - 1];
                let mut y: Vec<f64> =
                    dm.weights()[..k - 1].iter().map(|&p| (p / p_slave).ln()).collect();
                for yi in &mut y {
                    *yi += self.sampler.config.weight_step * standard_normal(&mut self.rng);
                }
                let mut expy: Vec<f64> = y.iter().map(|&v| v.exp()).collect();
                let denom: f64 = 1.0 + expy.iter().sum::<f64>();
                if !denom.is_finite() {
                    return Ok(None);
                }
                let mut weights: Vec<f64> = expy.drain(..).map(|e| e / denom).collect();
                weights.push(1.0 / denom);
                if weights.iter().any(|&p| !(p > 0.0)) {
                    return Ok(None);
                }
                let free: Vec<SimplexPoint> = dm.centers()[..k - 1].to_vec();
                let cand = match build_dm(weights.clone(), free, dm.shapes().to_vec(), d) {
                    Some(c) => c,
                    None => return Ok(None),
                };
                // alr Jacobian: q-ratio = Σ ln p* − Σ ln p over all k weights
                let q_ratio: f64 = weights.iter().map(|&p| p.ln()).sum::<f64>()
                    - dm.weights().iter().map(|&p| p.ln()).sum::<f64>();
                Ok(Some((cand, q_ratio, 0.0)))
            }
        }
    }

    fn dependence_move(&mut self) -> Result<()> {
        self.counters.dependence[0] += 1;
        let proposal = self.propose_dependence()?;
        self.finish_psi_move(proposal, MoveKind::Dependence)
    }

    // ----- reversible jump --------------------------------------------------

    /// Birth/death proposal. Returns (candidate, structural log-ratio) where
    /// the structural part collapses to ±ln(1−1/λ) + ln Z_k − ln Z_k' after
    /// the Beta(1,k) proposal density, the weight-prior constants, the
    /// uniform slot/victim choices and the (1−β)^{k−1} Jacobian cancel.
    fn propose_jump(&mut self) -> Result<Option<(DmParams, f64)>> {
        let dm = &self.state.dm;
        let k = dm.k();
        let d = dm.dim();
        let birth = self.rng.gen::<f64>() < 0.5;
        let geo = (1.0 - 1.0 / self.sampler.priors.lambda_geo).ln();
        if birth {
            if k >= self.sampler.priors.k_max {
                return Ok(None);
            }
            let u: f64 = self.rng.gen::<f64>().max(f64::MIN_POSITIVE);
            let beta = 1.0 - u.powf(1.0 / k as f64); // Beta(1, k) by inversion
            let mu_new = sample_dirichlet(d as f64, &SimplexPoint::center(d), &mut self.rng);
            let nu_new = self.sampler.priors.sample_nu(&mut self.rng);
            let slot = self.rng.gen_range(0..k);
            let mut weights: Vec<f64> = dm.weights().iter().map(|&p| (1.0 - beta) * p).collect();
            let slave_w = weights.pop().expect("k >= 1");
            weights.insert(slot, beta);
            weights.push(slave_w);
            let mut free: Vec<SimplexPoint> = dm.centers()[..k - 1].to_vec();
            free.insert(slot, mu_new);
            let mut shapes: Vec<f64> = dm.shapes()[..k - 1].to_vec();
            shapes.insert(slot, nu_new);
            shapes.push(dm.shapes()[k - 1]);
            let cand = match build_dm(weights, free, shapes, d) {
                Some(c) => c,
                None => return Ok(None),
            };
            let lr = geo + self.sampler.ln_z(k) - self.sampler.ln_z(k + 1);
            Ok(Some((cand, lr)))
        } else {
            if k <= 1 {
                return Ok(None);
            }
            let victim = self.rng.gen_range(0..k - 1);
            let beta = dm.weights()[victim];
            let mut weights: Vec<f64> = dm
                .weights()
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != victim)
                .map(|(_, &p)| p / (1.0 - beta))
                .collect();
            // renormalize FP drift so the constructor's tolerance holds
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            let free: Vec<SimplexPoint> = dm
                .centers()[..k - 1]
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != victim)
                .map(|(_, c)| c.clone())
                .collect();
            let shapes: Vec<f64> = dm
                .shapes()
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != victim)
                .map(|(_, &s)| s)
                .collect();
            let cand = match build_dm(weights, free, shapes, d) {
                Some(c) => c,
                None => return Ok(None),
            };
            let lr = -geo + self.sampler.ln_z(k) - self.sampler.ln_z(k - 1);
            Ok(Some((cand, lr)))
        }
    }

    fn reversible_jump_move(&mut self) -> Result<()> {
        self.counters.reversible_jump[0] += 1;
        let proposal = self.propose_jump()?.map(|(cand, lr)| (cand, lr, 0.0));
        self.finish_psi_move(proposal, MoveKind::ReversibleJump)
    }

    /// Shared tail of every ψ-changing move: recompute the record likelihoods
    /// under the candidate, resample the auxiliary processes under the
    /// candidate, and accept with the combined ratio (the process densities
    /// cancel against their proposal, leaving the φ hit-count factor).
    fn finish_psi_move(
        &mut self,
        proposal: Option<(DmParams, f64, f64)>,
        kind: MoveKind,
    ) -> Result<()> {
        let (cand, q_log_ratio, extra_prior_ratio) = match proposal {
            Some(p) => p,
            None => {
                let _: f64 = self.rng.gen();
                return Ok(());
            }
        };
        debug_assert!(check_moments_constraint(&cand));
        let cand_reduced = reduce_all(&cand, &self.sampler.patterns, self.sampler.data.d)?;
        let full_cache = DmCache::new(&cand);
        let s = &self.state;
        let mut cand_logliks = Vec::with_capacity(s.records.len());
        let mut delta_lik = 0.0;
        for (i, rec) in s.records.iter().enumerate() {
            let cache =
                cand_reduced[self.sampler.record_pattern[i]].cache().unwrap_or(&full_cache);
            let ll = loglik_above(rec, &s.margins, cache)?;
            delta_lik += ll - s.loglik_terms[i];
            cand_logliks.push(ll);
        }
        let cand_procs = self.propose_processes(&cand)?;
        let new_hits: usize = cand_procs.iter().map(|p| p.hits).sum();
        let old_hits = self.state.total_hits();
        let phi_delta = (new_hits as f64 - old_hits as f64)
            * (1.0 - 1.0 / self.sampler.config.tau).ln();
        // prior ratio beyond what q_log_ratio already absorbed
        let structural_prior = match kind {
            MoveKind::Dependence => extra_prior_ratio,
            // birth/death ratio was collapsed analytically inside propose_jump
            MoveKind::ReversibleJump => extra_prior_ratio,
        };
        let log_alpha = q_log_ratio + structural_prior + delta_lik + phi_delta;
        if self.accept_with_log_prob(log_alpha) {
            match kind {
                MoveKind::Dependence => self.counters.dependence[1] += 1,
                MoveKind::ReversibleJump => self.counters.reversible_jump[1] += 1,
            }
            self.state.dm = cand;
            self.state.reduced = cand_reduced;
            self.state.loglik_terms = cand_logliks;
            self.state.proc_stats = cand_procs;
            self.state.log_prior = self.sampler.log_prior(&self.state.margins, &self.state.dm);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MoveKind {
    Dependence,
    ReversibleJump,
}

#[cfg(test)]
mod tests;
