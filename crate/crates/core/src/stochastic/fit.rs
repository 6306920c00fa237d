use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use super::StochasticError;
use crate::stats;

/// Exponential is kept unless a richer family beats it by more than this
/// many nats (half the 95% chi-squared quantile with one degree of freedom).
const NESTED_TOLERANCE: f64 = 1.92;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Exponential,
    Gaussian,
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub family: Family,
    pub params: BTreeMap<String, f64>,
    pub loglik: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionFit {
    pub family: Family,
    pub params: BTreeMap<String, f64>,
    pub loglik: f64,
    pub n: usize,
    /// Censored iterations excluded from the fit, filled in by the caller.
    pub censored: usize,
    /// Set when the samples have zero variance.
    pub degenerate: bool,
    /// Every family that could be fitted.
    pub candidates: Vec<Candidate>,
}

impl DistributionFit {
    pub fn with_censored(mut self, censored: usize) -> Self {
        self.censored = censored;
        self
    }

    pub fn candidate(&self, family: Family) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.family == family)
    }
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Solves `ln k - digamma(k) = s` for the gamma shape (left side decreases in k).
fn gamma_shape(s: f64) -> f64 {
    let f = |k: f64| k.ln() - digamma(k) - s;
    let (mut lo, mut hi) = (1e-8f64, 1e9f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    (lo * hi).sqrt()
}

/// Maximum-likelihood fits of the exponential, Gaussian and gamma families.
///
/// The exponential is nested in the gamma family, so it is preferred unless
/// the best alternative improves the log-likelihood by more than 1.92. Between
/// Gaussian and gamma the larger log-likelihood wins, ties going to the
/// Gaussian. Families whose support excludes the data are skipped.
pub fn fit_distribution(samples: &[f64]) -> Result<DistributionFit, StochasticError> {
    const MIN: usize = 100;
    if samples.len() < MIN {
        return Err(StochasticError::TooFewSamples {
            need: MIN,
            got: samples.len(),
        });
    }
    if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
        return Err(StochasticError::InvalidInput(format!("non-finite sample {bad}")));
    }
    if samples.iter().all(|&x| x == samples[0]) {
        let c = Candidate {
            family: Family::Gaussian,
            params: params(&[("mu", samples[0]), ("sigma", 0.0)]),
            loglik: f64::INFINITY,
        };
        return Ok(DistributionFit {
            family: Family::Gaussian,
            params: c.params.clone(),
            loglik: c.loglik,
            n: samples.len(),
            censored: 0,
            degenerate: true,
            candidates: vec![c],
        });
    }

    let n = samples.len() as f64;
    let mean = stats::mean(samples);
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let mut candidates = Vec::with_capacity(3);
    let sigma = var.sqrt();
    let gaussian = Candidate {
        family: Family::Gaussian,
        params: params(&[("mu", mean), ("sigma", sigma)]),
        loglik: -0.5 * n * ((2.0 * std::f64::consts::PI * var).ln() + 1.0),
    };
    let nonneg = samples.iter().all(|&x| x >= 0.0);
    let positive = samples.iter().all(|&x| x > 0.0);
    let exponential = (nonneg && mean > 0.0).then(|| Candidate {
        family: Family::Exponential,
        params: params(&[("lambda", 1.0 / mean)]),
        loglik: -n * mean.ln() - n,
    });
    let gamma = positive.then(|| {
        let mean_ln = samples.iter().map(|x| x.ln()).sum::<f64>() / n;
        let s = mean.ln() - mean_ln;
        let k = gamma_shape(s);
        let theta = mean / k;
        let loglik = (k - 1.0) * n * mean_ln - n * k * theta.ln() - n * ln_gamma(k) - n * mean / theta;
        Candidate {
            family: Family::Gamma,
            params: params(&[("k", k), ("theta", theta)]),
            loglik,
        }
    });

    let best_alt = match &gamma {
        Some(g) if g.loglik > gaussian.loglik => g.clone(),
        _ => gaussian.clone(),
    };
    let chosen = match &exponential {
        Some(e) if e.loglik >= best_alt.loglik.max(e.loglik) - NESTED_TOLERANCE => e.clone(),
        _ => best_alt,
    };
    candidates.extend(exponential);
    candidates.push(gaussian);
    candidates.extend(gamma);
    Ok(DistributionFit {
        family: chosen.family,
        params: chosen.params,
        loglik: chosen.loglik,
        n: samples.len(),
        censored: 0,
        degenerate: false,
        candidates,
    })
}
