//! Small descriptive statistics used across the estimators and harnesses.

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{argument, Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; NaN below two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn new(value: f64, se: f64) -> Self {
        Estimate { value, se }
    }

    /// Sample mean and its standard error.
    pub fn mean_of(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::InsufficientData("no values to average".into()));
        }
        let se = if xs.len() > 1 {
            (variance(xs) / xs.len() as f64).sqrt()
        } else {
            f64::INFINITY
        };
        Ok(Estimate::new(mean(xs), se))
    }

    /// Binomial proportion `k / n` with the plug-in standard error.
    pub fn proportion(k: u64, n: u64) -> Self {
        let q = k as f64 / n as f64;
        Estimate::new(q, (q * (1.0 - q) / n as f64).sqrt())
    }

    /// Standard error of the difference of two independent estimates.
    pub fn joint_se(&self, other: &Estimate) -> f64 {
        self.se.hypot(other.se)
    }

    /// `|self - other| <= k * joint_se`.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        (self.value - other.value).abs() <= k * self.joint_se(other)
    }
}

/// CDF of `N(mean, variance)`.
pub fn normal_cdf(x: f64, mean: f64, variance: f64) -> f64 {
    0.5 * erfc(-(x - mean) / (2.0 * variance).sqrt())
}

/// Empirical distribution function of a finite sample.
#[derive(Debug, Clone)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData("empty sample".into()));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(argument("sample contains NaN"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Ecdf { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// `F(x) = #{v <= x} / n`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.len() as f64
    }

    /// Distinct sample points with `F` evaluated at each.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &v) in self.sorted.iter().enumerate() {
            let f = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 = f,
                _ => out.push((v, f)),
            }
        }
        out
    }

    /// `sup_x |F(x) - cdf(x)|` for a continuous `cdf`, checking both sides of
    /// every jump.
    pub fn ks_against(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let mut below = 0.0;
        let mut d: f64 = 0.0;
        for (x, f) in self.steps() {
            let g = cdf(x);
            d = d.max((g - below).abs()).max((f - g).abs());
            below = f;
        }
        d
    }
}

/// One-sample KS distance against `N(mean, variance)`.
pub fn ks_normal(values: &[f64], mean: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(argument(format!("target variance must be positive, got {variance}")));
    }
    Ok(Ecdf::new(values)?.ks_against(|x| normal_cdf(x, mean, variance)))
}

/// Two-sample KS distance `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let (fa, fb) = (Ecdf::new(a)?, Ecdf::new(b)?);
    let mut d: f64 = 0.0;
    for &x in fa.sorted.iter().chain(fb.sorted.iter()) {
        d = d.max((fa.eval(x) - fb.eval(x)).abs());
    }
    Ok(d)
}

/// Ordinary least squares `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_se: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(argument("x and y lengths differ"));
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData("need at least two points".into()));
    }
    let (mx, my) = (mean(xs), mean(ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(argument("x values are all equal"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    // A perfectly flat response is perfectly explained by a flat line.
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let slope_se = if xs.len() > 2 {
        (sse / (xs.len() - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
        slope_se,
    })
}

/// Standard error of the mean of a correlated series by non-overlapping batch
/// means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches.max(1);
    if size == 0 || batches < 2 {
        return f64::NAN;
    }
    let means: Vec<f64> = xs.chunks_exact(size).take(batches).map(mean).collect();
    (variance(&means) / means.len() as f64).sqrt()
}
