//! Preliminary independent-margins fit: maximize the product of per-station
//! censored GPD likelihoods (penalized by the marginal priors) and return the
//! optimum together with a finite-difference Hessian. The optimum seeds the
//! chain's marginal parameters and the inverse Hessian scales the block
//! proposal for the marginal moves.

use crate::data::{MarginalObs, Observation};
use crate::error::{Error, Result};
use crate::margins::MarginParams;
use crate::sampler::PriorConfig;

/// Result of the preliminary fit.
#[derive(Debug, Clone)]
pub struct PrelimFit {
    pub margins: MarginParams,
    /// Hessian of the negative penalized log-likelihood at the optimum,
    /// row-major n_free × n_free.
    pub hessian: Vec<f64>,
    pub n_free: usize,
    pub objective: f64,
}

/// Independent censored GPD log-likelihood, one station at a time. Values
/// determinately below threshold contribute only parameter-free constants
/// and are skipped.
fn censored_gpd_loglik(dataset: &[Observation], margins: &MarginParams) -> f64 {
    let mut total = 0.0;
    for o in dataset {
        for (j, s) in o.stations.iter().enumerate() {
            let v = margins.threshold(j);
            let zeta = margins.zeta(j);
            let sigma = margins.sigma(j);
            let xi = margins.xi(j);
            // survival above v: S(y) = (1 + ξ(y−v)/σ)^{−1/ξ}
            let ln_surv = |y: f64| -> f64 {
                let z = (y - v) / sigma;
                if xi.abs() < 1e-9 {
                    -z
                } else {
                    let base = 1.0 + xi * z;
                    if base <= 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        -base.ln() / xi
                    }
                }
            };
            match s {
                MarginalObs::Exact(y) if *y > v => {
                    let z = (*y - v) / sigma;
                    let lp = if xi.abs() < 1e-9 {
                        -z
                    } else {
                        let base = 1.0 + xi * z;
                        if base <= 0.0 {
                            total = f64::NEG_INFINITY;
                            continue;
                        }
                        -(1.0 / xi + 1.0) * base.ln()
                    };
                    total += zeta.ln() - sigma.ln() + lp;
                }
                MarginalObs::RightCensored { lower } if *lower >= v => {
                    total += zeta.ln() + ln_surv(*lower);
                }
                MarginalObs::Interval { lower, upper } if *upper > v => {
                    if *lower >= v {
                        // ζ(S(L) − S(R))
                        let sl = ln_surv(*lower).exp();
                        let sr = ln_surv(*upper).exp();
                        let diff = sl - sr;
                        total += if diff > 0.0 { zeta.ln() + diff.ln() } else { f64::NEG_INFINITY };
                    } else {
                        // only "Y ≤ R" is informative: ln(1 − ζ S(R))
                        let sr = ln_surv(*upper).exp();
                        let p = 1.0 - zeta * sr;
                        total += if p > 0.0 { p.ln() } else { f64::NEG_INFINITY };
                    }
                }
                _ => {}
            }
            if total == f64::NEG_INFINITY {
                return total;
            }
        }
    }
    total
}

fn penalized_objective(
    free: &[f64],
    template: &MarginParams,
    dataset: &[Observation],
    priors: &PriorConfig,
) -> f64 {
    let margins = match template.from_free_vector(free) {
        Ok(m) => m,
        Err(_) => return f64::NEG_INFINITY,
    };
    let ll = censored_gpd_loglik(dataset, &margins);
    if ll == f64::NEG_INFINITY {
        return ll;
    }
    ll + priors.log_prior_margins(&margins)
}

/// Nelder-Mead maximization, small and dependency-free; adequate for the
/// (d+1)- or 2d-dimensional marginal surface.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, start: &[f64], step: f64, max_iter: usize) -> Vec<f64> {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += step * v[i].abs().max(1.0) * 0.1;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| -f(v)).collect();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    for _ in 0..max_iter {
        // sort ascending by value (minimizing −f)
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        let reorder: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let revals: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        simplex = reorder;
        values = revals;
        if (values[n] - values[0]).abs() < 1e-12 * (1.0 + values[0].abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let reflect: Vec<f64> =
            (0..n).map(|j| centroid[j] + alpha * (centroid[j] - simplex[n][j])).collect();
        let f_r = -f(&reflect);
        if f_r < values[0] {
            let expand: Vec<f64> =
                (0..n).map(|j| centroid[j] + gamma * (reflect[j] - centroid[j])).collect();
            let f_e = -f(&expand);
            if f_e < f_r {
                simplex[n] = expand;
                values[n] = f_e;
            } else {
                simplex[n] = reflect;
                values[n] = f_r;
            }
        } else if f_r < values[n - 1] {
            simplex[n] = reflect;
            values[n] = f_r;
        } else {
            let contract: Vec<f64> =
                (0..n).map(|j| centroid[j] + rho * (simplex[n][j] - centroid[j])).collect();
            let f_c = -f(&contract);
            if f_c < values[n] {
                simplex[n] = contract;
                values[n] = f_c;
            } else {
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] = simplex[0][j] + sigma * (simplex[i][j] - simplex[0][j]);
                    }
                    values[i] = -f(&simplex[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=n {
        if values[i] < values[best] {
            best = i;
        }
    }
    simplex[best].clone()
}

/// Maximize the penalized independent likelihood and differentiate it twice.
pub fn preliminary_fit(
    dataset: &[Observation],
    template: &MarginParams,
    priors: &PriorConfig,
) -> Result<PrelimFit> {
    let n_free = template.n_free();
    let start = template.free_vector();
    let obj = |x: &[f64]| penalized_objective(x, template, dataset, priors);
    if obj(&start) == f64::NEG_INFINITY {
        return Err(Error::InvalidState(
            "preliminary fit: starting margins have zero likelihood".into(),
        ));
    }
    let opt = nelder_mead(&obj, &start, 1.0, 4000);
    let f0 = obj(&opt);
    if !f0.is_finite() {
        return Err(Error::numeric("preliminary fit did not reach a finite optimum"));
    }
    // central-difference Hessian of −objective
    let mut hessian = vec![0.0; n_free * n_free];
    let h: Vec<f64> = opt.iter().map(|&x| 1e-4 * x.abs().max(1.0)).collect();
    for i in 0..n_free {
        for l in i..n_free {
            let mut xpp = opt.clone();
            let mut xpm = opt.clone();
            let mut xmp = opt.clone();
            let mut xmm = opt.clone();
            xpp[i] += h[i];
            xpp[l] += h[l];
            xpm[i] += h[i];
            xpm[l] -= h[l];
            xmp[i] -= h[i];
            xmp[l] += h[l];
            xmm[i] -= h[i];
            xmm[l] -= h[l];
            let second =
                (obj(&xpp) - obj(&xpm) - obj(&xmp) + obj(&xmm)) / (4.0 * h[i] * h[l]);
            let v = if second.is_finite() { -second } else { 0.0 };
            hessian[i * n_free + l] = v;
            hessian[l * n_free + i] = v;
        }
    }
    let margins = template.from_free_vector(&opt)?;
    Ok(PrelimFit { margins, hessian, n_free, objective: f0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::margins::ShapeMode as SM;

    #[test]
    fn nelder_mead_finds_quadratic_optimum() {
        let f = |x: &[f64]| -((x[0] - 2.0).powi(2) + 3.0 * (x[1] + 1.0).powi(2));
        let opt = nelder_mead(f, &[0.0, 0.0], 1.0, 2000);
        assert!((opt[0] - 2.0).abs() < 1e-5, "{opt:?}");
        assert!((opt[1] + 1.0).abs() < 1e-5, "{opt:?}");
    }

    #[test]
    fn prior_only_fit_recovers_prior_mode() {
        // with no data the penalized objective is the prior itself: the
        // optimum sits at the prior means and the Hessian at the precisions
        let template = MarginParams::new(
            vec![4.0, 4.5],
            SM::Shared(0.2),
            vec![0.021, 0.021],
            vec![100.0, 120.0],
        )
        .unwrap();
        let priors = PriorConfig::default();
        let fit = preliminary_fit(&[], &template, &priors).unwrap();
        assert!((fit.margins.log_sigma(0) - 5.0).abs() < 1e-3);
        assert!((fit.margins.log_sigma(1) - 5.0).abs() < 1e-3);
        assert!(fit.margins.xi(0).abs() < 1e-3);
        // Hessian ≈ diag(1/25, 1/25, 1)
        let n = fit.n_free;
        assert!((fit.hessian[0] - 0.04).abs() < 1e-5);
        assert!((fit.hessian[n + 1] - 0.04).abs() < 1e-5);
        assert!((fit.hessian[2 * n + 2] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn fit_recovers_gpd_parameters_from_exact_excesses() {
        use rand::Rng as _;
        use rand::SeedableRng as _;
        let truth = MarginParams::new(
            vec![3.0, 3.4],
            SM::Shared(0.25),
            vec![0.05, 0.05],
            vec![40.0, 50.0],
        )
        .unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(500);
        let mut ds = Vec::new();
        for day in 0..30_000i64 {
            let mut st = Vec::new();
            for j in 0..2 {
                let y = if rng.gen::<f64>() < truth.zeta(j) {
                    let s: f64 = rng.gen::<f64>().max(1e-300);
                    truth.threshold(j)
                        + truth.sigma(j) / truth.xi(j) * (s.powf(-truth.xi(j)) - 1.0)
                } else {
                    truth.threshold(j) * 0.5
                };
                st.push(MarginalObs::Exact(y));
            }
            ds.push(Observation::new(day, st).unwrap());
        }
        let template = truth
            .with_parameters(vec![2.0, 2.0], SM::Shared(0.05))
            .unwrap();
        let fit = preliminary_fit(&ds, &template, &PriorConfig::default()).unwrap();
        assert!((fit.margins.xi(0) - 0.25).abs() < 0.08, "xi = {}", fit.margins.xi(0));
        assert!((fit.margins.log_sigma(0) - 3.0).abs() < 0.15);
        assert!((fit.margins.log_sigma(1) - 3.4).abs() < 0.15);
        // Hessian is positive definite at an interior optimum
        assert!(crate::numeric::cholesky(&fit.hessian, fit.n_free).is_some());
    }
}
