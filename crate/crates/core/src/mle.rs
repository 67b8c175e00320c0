//! Maximum-likelihood fit of the univariate Cauchy location-scale model.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Newton iteration cap.
pub const NEWTON_MAX_ITERS: usize = 200;
/// Stationarity target: `sigma * ||score||_inf <= SCORE_TOL * n`.
pub const SCORE_TOL: f64 = 1e-9;

/// Location `mu` and scale `sigma > 0` of a Cauchy law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyParams {
    pub mu: f64,
    pub sigma: f64,
}

impl CauchyParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::invalid(format!(
                "Cauchy parameters need finite mu and sigma > 0 (got mu={mu}, sigma={sigma})"
            )));
        }
        Ok(Self { mu, sigma })
    }
}

/// Projected values `c_i = x_i^T u`: at least 3, finite, not all equal.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedSample {
    values: Vec<f64>,
}

impl ProjectedSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::invalid(format!(
                "need at least 3 projected values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("projected values must be finite"));
        }
        if values.iter().all(|v| *v == values[0]) {
            return Err(Error::DegenerateSample("all projected values are equal"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `n log(sigma/pi) - sum log(sigma^2 + (c_i - mu)^2)`.
///
/// Takes a plain slice so it can also be used for diagnostic calls with
/// fewer than three values.
pub fn cauchy_loglik(params: CauchyParams, c: &[f64]) -> f64 {
    weighted_loglik(params, c, None)
}

pub(crate) fn weighted_loglik(params: CauchyParams, c: &[f64], w: Option<&[f64]>) -> f64 {
    let s2 = params.sigma * params.sigma;
    let mut total_w = 0.0;
    let mut acc = 0.0;
    for (i, ci) in c.iter().enumerate() {
        let wi = w.map_or(1.0, |w| w[i]);
        let d = ci - params.mu;
        total_w += wi;
        acc += wi * (s2 + d * d).ln();
    }
    total_w * (params.sigma / PI).ln() - acc
}

/// Score `(dl/dmu, dl/dsigma)` and the analytic Hessian of [`cauchy_loglik`].
pub fn cauchy_score_and_hessian(params: CauchyParams, c: &[f64]) -> ([f64; 2], [[f64; 2]; 2]) {
    weighted_score_and_hessian(params, c, None)
}

pub(crate) fn weighted_score_and_hessian(
    params: CauchyParams,
    c: &[f64],
    w: Option<&[f64]>,
) -> ([f64; 2], [[f64; 2]; 2]) {
    let sigma = params.sigma;
    let s2 = sigma * sigma;
    let mut total_w = 0.0;
    let (mut g_mu, mut g_sig) = (0.0, 0.0);
    let (mut h_mm, mut h_ms, mut h_ss) = (0.0, 0.0, 0.0);
    for (i, ci) in c.iter().enumerate() {
        let wi = w.map_or(1.0, |w| w[i]);
        let d = ci - params.mu;
        let d2 = d * d;
        let den = s2 + d2;
        let den2 = den * den;
        total_w += wi;
        g_mu += wi * 2.0 * d / den;
        g_sig -= wi * 2.0 * sigma / den;
        h_mm -= wi * 2.0 * (s2 - d2) / den2;
        h_ms -= wi * 4.0 * sigma * d / den2;
        h_ss -= wi * 2.0 * (d2 - s2) / den2;
    }
    g_sig += total_w / sigma;
    h_ss -= total_w / s2;
    ([g_mu, g_sig], [[h_mm, h_ms], [h_ms, h_ss]])
}

/// Linear-interpolation (type 7) quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Start values: median and half the interquartile range.
pub fn initial_params(c: &[f64]) -> Result<CauchyParams> {
    let mut sorted = c.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = quantile_sorted(&sorted, 0.5);
    let mut sigma = 0.5 * (quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25));
    if sigma <= 0.0 {
        // more than half the sample sits on one value; fall back to the mean
        // absolute deviation so Newton has somewhere to start
        sigma = sorted.iter().map(|v| (v - median).abs()).sum::<f64>() / sorted.len() as f64;
    }
    if sigma <= 0.0 {
        return Err(Error::DegenerateSample("all projected values are equal"));
    }
    CauchyParams::new(median, sigma)
}

/// Maximum-likelihood `(mu, sigma)` by damped Newton-Raphson from the median
/// and half the IQR.
///
/// Each step is halved until the log-likelihood does not decrease, and the
/// scale is never allowed to drop below half its current value in one step.
/// Where the Hessian is not negative definite a scaled gradient step is used.
pub fn fit_cauchy(c: &ProjectedSample) -> Result<CauchyParams> {
    let init = initial_params(c.values())?;
    fit_cauchy_weighted(c.values(), None, init)
}

pub(crate) fn fit_cauchy_weighted(
    c: &[f64],
    w: Option<&[f64]>,
    init: CauchyParams,
) -> Result<CauchyParams> {
    let total_w: f64 = w.map_or(c.len() as f64, |w| w.iter().sum());
    let spread = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - c.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread.is_nan() || spread <= 0.0 {
        return Err(Error::DegenerateSample("all projected values are equal"));
    }
    let tol = SCORE_TOL * total_w;
    let mut theta = init;
    let mut ll = weighted_loglik(theta, c, w);

    for _ in 0..NEWTON_MAX_ITERS {
        let (g, h) = weighted_score_and_hessian(theta, c, w);
        let scaled = g[0].abs().max(g[1].abs()) * theta.sigma;
        if scaled <= tol {
            return Ok(theta);
        }

        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let mut step = if h[0][0] < 0.0 && det > 0.0 {
            [
                -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                -(-h[1][0] * g[0] + h[0][0] * g[1]) / det,
            ]
        } else {
            let k = theta.sigma * theta.sigma / total_w;
            [g[0] * k, g[1] * k]
        };
        if theta.sigma + step[1] < 0.5 * theta.sigma {
            let t = 0.5 * theta.sigma / -step[1];
            step = [step[0] * t, step[1] * t];
        }

        let slack = 1e-13 * (1.0 + ll.abs());
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = CauchyParams {
                mu: theta.mu + t * step[0],
                sigma: theta.sigma + t * step[1],
            };
            let cand_ll = weighted_loglik(cand, c, w);
            if cand_ll >= ll - slack {
                accepted = Some((cand, cand_ll));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, cand_ll)) => {
                theta = cand;
                ll = cand_ll;
            }
            None => {
                // no ascent available at working precision
                return if scaled <= 1e-6 * total_w {
                    Ok(theta)
                } else {
                    Err(Error::FailedConvergence {
                        what: "Cauchy Newton-Raphson (line search stalled)",
                        iterations: NEWTON_MAX_ITERS,
                    })
                };
            }
        }
        if theta.sigma <= 1e-12 * spread {
            return Err(Error::DegenerateSample(
                "Cauchy scale collapsed to zero (too many coincident values)",
            ));
        }
    }
    Err(Error::FailedConvergence {
        what: "Cauchy Newton-Raphson",
        iterations: NEWTON_MAX_ITERS,
    })
}
