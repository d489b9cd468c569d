//! Log-log least squares for growth exponents.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FitModel {
    /// `C·k^p`
    PurePower,
    /// `C·k^p·log k`
    PowerTimesLog,
}

impl FitModel {
    pub fn log_power(self) -> i32 {
        match self {
            FitModel::PurePower => 0,
            FitModel::PowerTimesLog => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FitModel::PurePower => "pure_power",
            FitModel::PowerTimesLog => "power_times_log",
        }
    }
}

impl fmt::Display for FitModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FitModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pure_power" => Ok(FitModel::PurePower),
            "power_times_log" => Ok(FitModel::PowerTimesLog),
            other => Err(Error::Config(format!(
                "unknown fit model `{other}` (pure_power or power_times_log)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit<T> {
    pub c: T,
    pub p: T,
    /// Power of `log k` fixed by the model.
    pub q: i32,
    /// Root-mean-square residual of `log value`.
    pub rms_residual: T,
    pub used: usize,
    /// Points dropped for a nonpositive value (or `k ≤ 1` under the log model).
    pub rejected: usize,
}

/// Least squares of `log v = log C + p·log k + q·log log k` with `q` fixed by `model`.
pub fn fit_exponent<T: Real>(points: &[(T, T)], model: FitModel) -> Result<Fit<T>> {
    let q = model.log_power();
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    let mut rejected = 0;
    for &(k, v) in points {
        let ok = v > T::zero() && v.is_finite() && k > T::zero() && (q == 0 || k > T::one());
        if !ok {
            rejected += 1;
            continue;
        }
        let lk = k.ln();
        let mut y = v.ln();
        if q == 1 {
            y -= lk.ln();
        }
        xs.push(lk);
        ys.push(y);
    }
    let n = xs.len();
    if n < 4 {
        return Err(Error::Argument(format!(
            "a fit needs at least 4 usable points, got {n} ({rejected} rejected)"
        )));
    }
    let nf = T::from_usize_lossy(n);
    let xm = xs.iter().copied().sum::<T>() / nf;
    let ym = ys.iter().copied().sum::<T>() / nf;
    let sxx: T = xs.iter().map(|x| (*x - xm) * (*x - xm)).sum();
    if sxx == T::zero() {
        return Err(Error::Argument("all fit points share one k".into()));
    }
    let sxy: T = xs.iter().zip(&ys).map(|(x, y)| (*x - xm) * (*y - ym)).sum();
    let p = sxy / sxx;
    let log_c = ym - p * xm;
    let ss: T = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = *y - log_c - p * *x;
            r * r
        })
        .sum();
    Ok(Fit {
        c: log_c.exp(),
        p,
        q,
        rms_residual: (ss / nf).sqrt(),
        used: n,
        rejected,
    })
}
