//! Augmented Dickey–Fuller unit-root regression.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Deterministic terms of the test regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Deterministic {
    None,
    Constant,
}

/// Response-surface critical value `b0 + b1/T + b2/T^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalSurface {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
}

impl CriticalSurface {
    pub fn at(&self, nobs: usize) -> f64 {
        let t = nobs as f64;
        self.b0 + self.b1 / t + self.b2 / (t * t)
    }
}

// MacKinnon (2010), "Critical Values for Cointegration Tests", Queen's
// Economics Department Working Paper 1227, Table 2: 5% rows of the
// constant-only case for N = 1 (plain unit-root test) and N = 2
// (Engle–Granger residuals of a two-variable regression with intercept).

/// 5% critical values of the unit-root test with a constant.
pub const UNIT_ROOT_5PCT: CriticalSurface = CriticalSurface {
    b0: -2.86154,
    b1: -2.8903,
    b2: -4.234,
};

/// 5% critical values of the two-variable Engle–Granger residual test.
pub const ENGLE_GRANGER_5PCT: CriticalSurface = CriticalSurface {
    b0: -3.33613,
    b1: -6.1101,
    b2: -6.823,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdfResult {
    /// t-statistic of the lagged level; `-inf` for a degenerate constant series.
    pub statistic: f64,
    pub lags: usize,
    pub nobs: usize,
    pub critical_value: f64,
    pub reject_unit_root: bool,
}

/// Minimum series length accepted by the tests.
pub const MIN_LENGTH: usize = 20;

/// Schwert's rule `floor(12 (n/100)^(1/4))`.
pub fn max_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

struct Fit {
    ssr: f64,
    nobs: usize,
    k: usize,
    tstat: f64,
}

/// Regresses `dy[t]` on the deterministic terms, `y[t-1]` and `lags` lagged
/// differences, over `t` in `start..dy.len()` (indices into the differences).
fn fit(y: &[f64], dy: &[f64], lags: usize, start: usize, det: Deterministic) -> Result<Fit> {
    let nobs = dy.len() - start;
    let k = lags + 1 + usize::from(det == Deterministic::Constant);
    if nobs <= k {
        return Err(Error::domain("too few observations for ADF regression"));
    }
    let mut x = DMatrix::<f64>::zeros(nobs, k);
    let mut target = DVector::<f64>::zeros(nobs);
    for (row, t) in (start..dy.len()).enumerate() {
        target[row] = dy[t];
        // dy[t] = y[t+1] - y[t], so the lagged level is y[t]
        x[(row, 0)] = y[t];
        for j in 1..=lags {
            x[(row, j)] = dy[t - j];
        }
        if det == Deterministic::Constant {
            x[(row, k - 1)] = 1.0;
        }
    }
    let xtx = x.transpose() * &x;
    let chol = xtx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::domain("singular ADF regression"))?;
    let beta = chol.solve(&(x.transpose() * &target));
    let resid = &target - &x * &beta;
    let ssr = resid.norm_squared();
    let sigma2 = ssr / (nobs - k) as f64;
    let inv = chol.inverse();
    let se = (sigma2 * inv[(0, 0)]).sqrt();
    let tstat = if se > 0.0 {
        beta[0] / se
    } else {
        f64::NEG_INFINITY
    };
    Ok(Fit {
        ssr,
        nobs,
        k,
        tstat,
    })
}

/// ADF test with lag order chosen by AIC up to [`max_lag`], decided at 5%
/// against `critical`.
pub fn adf(series: &[f64], det: Deterministic, critical: &CriticalSurface) -> Result<AdfResult> {
    let n = series.len();
    if n < MIN_LENGTH {
        return Err(Error::domain(format!(
            "ADF needs at least {MIN_LENGTH} points, got {n}"
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite value in series"));
    }
    let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo == 0.0 {
        return Ok(AdfResult {
            statistic: f64::NEG_INFINITY,
            lags: 0,
            nobs: n - 1,
            critical_value: critical.at(n - 1),
            reject_unit_root: true,
        });
    }
    let dy: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let kmax = max_lag(n).min(dy.len() / 2 - 2);

    let mut best: Option<(f64, usize)> = None;
    for p in 0..=kmax {
        let Ok(f) = fit(series, &dy, p, kmax, det) else {
            continue;
        };
        if f.ssr <= 0.0 {
            continue;
        }
        let aic = f.nobs as f64 * (f.ssr / f.nobs as f64).ln() + 2.0 * f.k as f64;
        if best.is_none_or(|(b, _)| aic < b) {
            best = Some((aic, p));
        }
    }
    let lags = best.map_or(0, |(_, p)| p);
    let f = fit(series, &dy, lags, lags, det)?;
    let critical_value = critical.at(f.nobs);
    Ok(AdfResult {
        statistic: f.tstat,
        lags,
        nobs: f.nobs,
        critical_value,
        reject_unit_root: f.tstat < critical_value,
    })
}

/// Unit-root test of a raw series (regression with a constant).
pub fn adf_test(series: &[f64]) -> Result<AdfResult> {
    adf(series, Deterministic::Constant, &UNIT_ROOT_5PCT)
}
