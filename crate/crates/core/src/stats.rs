//! Empirical samples and Kolmogorov–Smirnov distances.

use serde::Serialize;
use statrs::function::erf::erf;

use crate::error::{Error, Result};

/// A reproducible sample of a real statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalSample {
    values: Vec<f64>,
    #[serde(skip)]
    sorted: Vec<f64>,
    pub seed: u64,
    /// Half-open range of stream ids that produced `values`, in order.
    pub streams: (u64, u64),
}

impl EmpiricalSample {
    pub fn new(values: Vec<f64>, seed: u64, streams: (u64, u64)) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("sample"));
        }
        if let Some(v) = values.iter().find(|v| v.is_nan()) {
            return Err(Error::param(format!("sample contains {v}")));
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(EmpiricalSample {
            values,
            sorted,
            seed,
            streams,
        })
    }

    /// Values in generation order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Unbiased sample standard deviation (0 for a single value).
    pub fn std_dev(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        let ss: f64 = self.values.iter().map(|v| (v - m) * (v - m)).sum();
        (ss / (n - 1) as f64).sqrt()
    }

    pub fn median(&self) -> f64 {
        let s = &self.sorted;
        let n = s.len();
        if n % 2 == 1 {
            s[n / 2]
        } else {
            0.5 * (s[n / 2 - 1] + s[n / 2])
        }
    }

    /// Empirical CDF `#{v <= t} / n`.
    pub fn cdf(&self, t: f64) -> f64 {
        self.sorted.partition_point(|v| *v <= t) as f64 / self.len() as f64
    }

    /// Applies `f` to every value, keeping the provenance.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        EmpiricalSample::new(self.values.iter().map(|v| f(*v)).collect(), self.seed, self.streams)
    }
}

/// Two-sample KS distance `sup_t |F_a(t) - F_b(t)|`.
pub fn ks_distance(a: &EmpiricalSample, b: &EmpiricalSample) -> f64 {
    let (x, y) = (a.sorted(), b.sorted());
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// One-sample KS distance against a continuous CDF.
pub fn ks_against_cdf(a: &EmpiricalSample, cdf: impl Fn(f64) -> f64) -> f64 {
    let s = a.sorted();
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < s.len() {
        // Ties: the empirical CDF jumps over the whole run at once.
        let t = s[i];
        let mut k = i;
        while k < s.len() && s[k] == t {
            k += 1;
        }
        let f = cdf(t);
        d = d.max((f - i as f64 / n).abs()).max((k as f64 / n - f).abs());
        i = k;
    }
    d
}

/// CDF of `|N(0, sigma^2)|`: `erf(x / (sigma sqrt 2))` for `x >= 0`.
pub fn half_normal_cdf(sigma: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if sigma <= 0.0 {
        return 1.0;
    }
    erf(x / (sigma * std::f64::consts::SQRT_2))
}
