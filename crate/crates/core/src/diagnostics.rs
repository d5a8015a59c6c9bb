//! Convergence diagnostics: Gelman-Rubin potential scale reduction,
//! Heidelberger-Welch stationarity testing, and scalar functionals of the
//! mixture for monitoring the dependence parameters.

use crate::dm::{sample_dirichlet, DmCache, DmParams, SimplexPoint};
use crate::error::{Error, Result};
use crate::numeric::{mean, sample_variance};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Potential scale reduction factor over two or more equal-length chains.
///
/// Uses the classic between/within variance form: with m chains of length n,
/// σ̂² = (n−1)/n·W + B/n and R̂ = sqrt((m+1)/m · σ̂²/W − (n−1)/(mn)).
/// Identical chains give sqrt((n−1)/n) ≤ 1.
pub fn psrf(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::domain("psrf needs at least 2 chains"));
    }
    let n = chains.iter().map(|c| c.len()).min().unwrap();
    if n < 10 {
        return Err(Error::domain("psrf needs chains of length >= 10"));
    }
    let m = chains.len() as f64;
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(&c[..n])).collect();
    let vars: Vec<f64> = chains.iter().map(|c| sample_variance(&c[..n])).collect();
    let w = mean(&vars);
    let b = nf * sample_variance(&means);
    if w <= 0.0 {
        // completely degenerate chains
        return Ok(if b <= 0.0 { 1.0 } else { f64::INFINITY });
    }
    let sigma2 = (nf - 1.0) / nf * w + b / nf;
    let r2 = (m + 1.0) / m * sigma2 / w - (nf - 1.0) / (m * nf);
    Ok(r2.max(0.0).sqrt())
}

/// CDF of the asymptotic Cramér-von-Mises distribution,
/// P(W² ≤ q) = Σ_k Γ(k+½)√(4k+1)/(Γ(k+1)π^{3/2}√q) e^{−u_k} K_{1/4}(u_k),
/// u_k = (4k+1)²/(16q).
pub fn cramer_von_mises_cdf(q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for k in 0..6usize {
        let kf = k as f64;
        let u = (4.0 * kf + 1.0).powi(2) / (16.0 * q);
        let ln_z = crate::special::ln_gamma(kf + 0.5) + 0.5 * (4.0 * kf + 1.0).ln()
            - crate::special::ln_gamma(kf + 1.0)
            - 1.5 * std::f64::consts::PI.ln()
            - 0.5 * q.ln();
        let term = (ln_z - u).exp() * bessel_k_quarter(u);
        total += term;
        if term < 1e-16 * total.max(1.0) {
            break;
        }
    }
    total.clamp(0.0, 1.0)
}

/// K_{1/4}(u) by direct quadrature of ∫_0^∞ e^{−u cosh t} cosh(t/4) dt.
/// Adequate for u ≥ ~1/32, which is all the CvM CDF ever asks for.
fn bessel_k_quarter(u: f64) -> f64 {
    // integrand decays like exp(−u cosh t): cut where the exponent passes 750
    let t_max = ((750.0 / u).max(2.0)).acosh() + 1.0;
    let n = 4000usize;
    let h = t_max / n as f64;
    let f = |t: f64| (-u * t.cosh()).exp() * (0.25 * t).cosh();
    // Simpson's rule
    let mut s = f(0.0) + f(t_max);
    for i in 1..n {
        let t = i as f64 * h;
        s += f(t) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Estimate of the spectral density at frequency zero through a Yule-Walker
/// AR fit with AIC order selection, as the stationarity test requires.
fn spectrum0_ar(series: &[f64]) -> f64 {
    let n = series.len();
    let max_order = ((10.0 * (n as f64).log10()) as usize).min(n.saturating_sub(2)).min(30);
    let mu = mean(series);
    let centered: Vec<f64> = series.iter().map(|&x| x - mu).collect();
    // autocovariances with 1/n normalization
    let mut acov = vec![0.0; max_order + 1];
    for (lag, slot) in acov.iter_mut().enumerate() {
        let mut s = 0.0;
        for t in lag..n {
            s += centered[t] * centered[t - lag];
        }
        *slot = s / n as f64;
    }
    if acov[0] <= 0.0 {
        return 0.0;
    }
    // Levinson-Durbin over orders, AIC = n ln σ² + 2p
    let mut best_spec = acov[0]; // order 0
    let mut best_aic = n as f64 * acov[0].ln();
    let mut phi = vec![0.0; max_order + 1];
    let mut prev = vec![0.0; max_order + 1];
    let mut var = acov[0];
    for p in 1..=max_order {
        let mut acc = acov[p];
        for j in 1..p {
            acc -= phi[j] * acov[p - j];
        }
        let k = acc / var;
        prev[..p].copy_from_slice(&phi[..p]);
        phi[p] = k;
        for j in 1..p {
            phi[j] = prev[j] - k * prev[p - j];
        }
        var *= 1.0 - k * k;
        if var <= 0.0 {
            break;
        }
        let aic = n as f64 * var.ln() + 2.0 * p as f64;
        if aic < best_aic {
            best_aic = aic;
            let phi_sum: f64 = phi[1..=p].iter().sum();
            best_spec = var / (1.0 - phi_sum).powi(2);
        }
    }
    best_spec
}

/// Outcome of the Heidelberger-Welch stationarity test.
#[derive(Debug, Clone, PartialEq)]
pub struct HwResult {
    pub passed: bool,
    /// Fraction of the series discarded before the retained segment.
    pub start_fraction: f64,
    /// Cramér-von-Mises statistic of the retained segment.
    pub statistic: f64,
    /// CDF value of the statistic (small = comfortably stationary).
    pub cdf: f64,
}

/// Cramér-von-Mises-based stationarity test with iterative discarding of
/// initial segments (0%, 10%, …, 50%). The spectral density at zero is
/// estimated once from the second half of the series. `level` is the test
/// size: the retained segment passes when its statistic stays below the
/// (1 − level) quantile.
pub fn heidelberger_welch(series: &[f64], level: f64) -> Result<HwResult> {
    let n = series.len();
    if n < 100 {
        return Err(Error::domain("stationarity test needs at least 100 points"));
    }
    if !(0.0 < level && level < 0.5) {
        return Err(Error::domain("level must be in (0, 0.5)"));
    }
    let s0 = spectrum0_ar(&series[n / 2..]);
    if s0 <= 0.0 {
        // degenerate (constant) series: zero statistic, trivially stationary
        return Ok(HwResult { passed: true, start_fraction: 0.0, statistic: 0.0, cdf: 0.0 });
    }
    for drop_tenths in 0..=5usize {
        let start = n * drop_tenths / 10;
        let seg = &series[start..];
        let m = seg.len();
        let seg_mean = mean(seg);
        let mut cum = 0.0;
        let mut stat = 0.0;
        for (t, &x) in seg.iter().enumerate() {
            cum += x;
            let bridge = cum - seg_mean * (t as f64 + 1.0);
            stat += bridge * bridge;
        }
        stat /= (m as f64).powi(2) * s0;
        let cdf = cramer_von_mises_cdf(stat);
        if cdf < 1.0 - level {
            return Ok(HwResult {
                passed: true,
                start_fraction: drop_tenths as f64 / 10.0,
                statistic: stat,
                cdf,
            });
        }
        if drop_tenths == 5 {
            return Ok(HwResult { passed: false, start_fraction: 0.5, statistic: stat, cdf });
        }
    }
    unreachable!()
}

/// Number of Monte-Carlo nodes behind each mixture functional.
const FUNCTIONAL_NODES: usize = 4096;
/// Fixed seed: the functionals are deterministic constants of ψ.
const FUNCTIONAL_SEED: u64 = 0x00d1_41c7;

/// Bank of Dirichlet test densities for dimension d: one concentrated at the
/// simplex center plus one biased toward each vertex (d + 1 functions).
pub fn functional_bank(d: usize) -> Vec<(f64, SimplexPoint)> {
    let mut bank = Vec::with_capacity(d + 1);
    bank.push((2.0 * d as f64, SimplexPoint::center(d)));
    for j in 0..d {
        let mut c = vec![0.4 / (d as f64 - 1.0); d];
        c[j] = 0.6;
        bank.push((2.0 * d as f64, SimplexPoint::new(c).unwrap()));
    }
    bank
}

/// Scalar functionals ∫ h_ψ · t_b dw for the fixed bank of Dirichlet test
/// densities t_b, estimated as E_{W∼t_b}[h_ψ(W)] with common random numbers
/// (node sets drawn once per bank entry from a fixed seed), so the result is
/// a deterministic function of ψ.
pub fn dm_functionals(dm: &DmParams) -> Vec<f64> {
    let d = dm.dim();
    let cache = DmCache::new(dm);
    let bank = functional_bank(d);
    let mut out = Vec::with_capacity(bank.len());
    for (b, (shape, center)) in bank.iter().enumerate() {
        let mut rng = ChaCha12Rng::seed_from_u64(FUNCTIONAL_SEED + b as u64);
        let mut acc = 0.0;
        for _ in 0..FUNCTIONAL_NODES {
            let w = sample_dirichlet(*shape, center, &mut rng);
            acc += cache.dm_log_density(&w).map(f64::exp).unwrap_or(0.0);
        }
        out.push(acc / FUNCTIONAL_NODES as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dm::reference_mixture;
    use rand::Rng;

    #[test]
    fn bessel_k_matches_reference() {
        let cases = [
            (0.05, 3.587737545264027299),
            (0.5, 0.96031632493188602295),
            (1.0, 0.43073977444858552466),
            (2.0, 0.11537827684085675697),
            (5.0, 0.0037123027320318406383),
        ];
        for &(u, want) in &cases {
            let got = bessel_k_quarter(u);
            assert!(((got - want) / want).abs() < 1e-9, "K_1/4({u}) = {got} vs {want}");
        }
    }

    #[test]
    fn cvm_cdf_matches_classic_table() {
        let cases = [
            (0.3473, 0.90),
            (0.46136, 0.95),
            (0.74346, 0.99),
            (1.16786, 0.999),
        ];
        for &(q, want) in &cases {
            let got = cramer_von_mises_cdf(q);
            assert!((got - want).abs() < 1e-4, "F({q}) = {got} vs {want}");
        }
    }

    #[test]
    fn psrf_identical_chains() {
        let c: Vec<f64> = (0..500).map(|i| (i as f64 * 0.7).sin()).collect();
        let r = psrf(&[c.clone(), c]).unwrap();
        let n = 500.0f64;
        assert!((r - ((n - 1.0) / n).sqrt()).abs() < 1e-12);
        assert!(r <= 1.0 + 1e-9);
    }

    #[test]
    fn psrf_white_noise_below_105() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mk = |rng: &mut ChaCha12Rng| -> Vec<f64> {
            (0..10_000)
                .map(|_| {
                    let (u1, u2): (f64, f64) = (rng.gen(), rng.gen());
                    (-2.0 * u1.max(1e-300).ln()).sqrt()
                        * (2.0 * std::f64::consts::PI * u2).cos()
                })
                .collect()
        };
        let chains = vec![mk(&mut rng), mk(&mut rng), mk(&mut rng)];
        let r = psrf(&chains).unwrap();
        assert!(r < 1.05, "psrf = {r}");
    }

    #[test]
    fn psrf_detects_mean_shift() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let mut a: Vec<f64> = (0..2000).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng.gen::<f64>()).collect();
        // shift by 10 marginal standard deviations (sd of U(0,1) ≈ 0.2887)
        for x in &mut a {
            *x += 10.0 * 0.2887;
        }
        let r = psrf(&[a, b]).unwrap();
        assert!(r > 2.0, "psrf = {r}");
    }

    #[test]
    fn psrf_needs_two_chains() {
        assert!(psrf(&[vec![0.0; 100]]).is_err());
    }

    #[test]
    fn hw_passes_iid_normal() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let series: Vec<f64> = (0..5000)
            .map(|_| {
                let (u1, u2): (f64, f64) = (rng.gen(), rng.gen());
                (-2.0 * u1.max(1e-300).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        let r = heidelberger_welch(&series, 1e-4).unwrap();
        assert!(r.passed, "stat = {}, cdf = {}", r.statistic, r.cdf);
        assert_eq!(r.start_fraction, 0.0);
    }

    #[test]
    fn hw_fails_linear_trend() {
        let series: Vec<f64> = (0..5000).map(|i| i as f64 * 0.01).collect();
        let r = heidelberger_welch(&series, 1e-4).unwrap();
        assert!(!r.passed, "trend passed with stat {}", r.statistic);
    }

    #[test]
    fn hw_passes_constant_series() {
        let series = vec![3.25; 500];
        let r = heidelberger_welch(&series, 1e-4).unwrap();
        assert!(r.passed);
        assert_eq!(r.statistic, 0.0);
    }

    #[test]
    fn hw_rejects_short_series() {
        assert!(heidelberger_welch(&[0.0; 50], 1e-4).is_err());
    }

    #[test]
    fn functionals_deterministic_and_symmetric() {
        let dm = reference_mixture();
        let a = dm_functionals(&dm);
        let b = dm_functionals(&dm);
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);

        // a permutation-symmetric mixture gives equal vertex functionals up
        // to Monte-Carlo error
        let sym = DmParams::single(4, 12.0).unwrap();
        let f = dm_functionals(&sym);
        let mean_vertex = (f[1] + f[2] + f[3] + f[4]) / 4.0;
        for j in 1..=4 {
            assert!(
                ((f[j] - mean_vertex) / mean_vertex).abs() < 0.1,
                "vertex functionals spread too far: {f:?}"
            );
        }
    }

    #[test]
    fn functional_self_overlap_matches_mc_oracle() {
        // For k=1 with the test function equal to the component itself the
        // functional is ∫ h², here cross-checked with an independent
        // Monte-Carlo estimate drawn from h rather than the bank seed.
        let d = 4;
        let shape = 2.0 * d as f64;
        let dm = DmParams::single(d, shape).unwrap();
        let cache = DmCache::new(&dm);
        let got = dm_functionals(&dm)[0];
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let n = 200_000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..n {
            let w = crate::dm::sample_angle(&dm, &mut rng);
            let h = cache.dm_log_density(&w).unwrap().exp();
            acc += h;
            acc2 += h * h;
        }
        let oracle = acc / n as f64;
        let se = ((acc2 / n as f64 - oracle * oracle) / n as f64).sqrt();
        // bank estimate has its own MC error at 4096 nodes; allow a loose band
        assert!(
            (got - oracle).abs() < 4.0 * se + 0.05 * oracle,
            "functional {got} vs oracle {oracle} (se {se})"
        );
    }
}
