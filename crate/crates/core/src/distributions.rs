//! Generating laws: the scalar and vector distributions that drive the random
//! means, with exact moments and the multinomial indicator covariance.

use std::f64::consts::E;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mean::{compensated_sum, SUM_TOL};

/// Scalar law of a generating random variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarDist {
    /// `P(1) = q`, `P(0) = 1 - q`.
    Bernoulli { q: f64 },
    FiniteDiscrete { atoms: Vec<f64>, probs: Vec<f64> },
    Uniform01,
    /// Density `2 l` on `(0, 1)`.
    TriangularDensity,
    /// Density `e/(e-1) exp(-l)` on `(0, 1)`.
    TruncatedExponential,
    /// Density `sin(l) / (1 - cos 1)` on `(0, 1)`.
    SineDensity,
    Dirac { a: f64 },
}

/// Vector law of a generating random variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorDist {
    ProductOfScalars { components: Vec<ScalarDist> },
    /// Uniform on `{y >= 0 : sum y_i <= 1}` in `R^dim`.
    SimplexUniform { dim: usize },
    FiniteDiscreteVector { atoms: Vec<Vec<f64>>, probs: Vec<f64> },
}

/// Either kind of law; JSON documents are distinguished by their `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Law {
    Scalar(ScalarDist),
    Vector(VectorDist),
}

/// Exact first and second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub cov: DMatrix<f64>,
}

impl Moments {
    fn scalar(mean: f64, var: f64) -> Self {
        Moments {
            mean: vec![mean],
            cov: DMatrix::from_element(1, 1, var),
        }
    }

    /// Variance of the first coordinate.
    pub fn variance(&self) -> f64 {
        self.cov[(0, 0)]
    }
}

fn check_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::dist("probability vector is empty"));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::dist(format!(
            "probabilities must be strictly positive: {probs:?}"
        )));
    }
    let s = compensated_sum(probs);
    if (s - 1.0).abs() > SUM_TOL {
        return Err(Error::dist(format!("probabilities sum to {s}, not 1")));
    }
    Ok(())
}

#[inline]
fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Open01.sample(rng)
}

/// Index drawn from `probs` by inversion of one uniform.
fn discrete_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn one_minus_cos1() -> f64 {
    1.0 - 1f64.cos()
}

impl ScalarDist {
    pub fn validate(&self) -> Result<()> {
        match self {
            ScalarDist::Bernoulli { q } => {
                if *q > 0.0 && *q < 1.0 {
                    Ok(())
                } else {
                    Err(Error::dist(format!("Bernoulli q must lie in (0, 1), got {q}")))
                }
            }
            ScalarDist::FiniteDiscrete { atoms, probs } => {
                if atoms.len() != probs.len() {
                    return Err(Error::LengthMismatch {
                        what: "atoms vs probs",
                        left: atoms.len(),
                        right: probs.len(),
                    });
                }
                check_probs(probs)?;
                if atoms.iter().any(|a| !a.is_finite()) {
                    return Err(Error::dist("atoms must be finite"));
                }
                for (i, a) in atoms.iter().enumerate() {
                    if atoms[..i].contains(a) {
                        return Err(Error::dist(format!("atom {a} is repeated")));
                    }
                }
                Ok(())
            }
            ScalarDist::Dirac { a } => {
                if a.is_finite() {
                    Ok(())
                } else {
                    Err(Error::dist("Dirac location must be finite"))
                }
            }
            _ => Ok(()),
        }
    }

    /// Closed support bounds `[lo, hi]`.
    pub fn support(&self) -> (f64, f64) {
        match self {
            ScalarDist::Bernoulli { .. }
            | ScalarDist::Uniform01
            | ScalarDist::TriangularDensity
            | ScalarDist::TruncatedExponential
            | ScalarDist::SineDensity => (0.0, 1.0),
            ScalarDist::FiniteDiscrete { atoms, .. } => atoms
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &a| (l.min(a), h.max(a))),
            ScalarDist::Dirac { a } => (*a, *a),
        }
    }

    /// True when every draw lies in the open interval `(0, 1)`.
    pub fn in_open_unit(&self) -> bool {
        match self {
            ScalarDist::Uniform01
            | ScalarDist::TriangularDensity
            | ScalarDist::TruncatedExponential
            | ScalarDist::SineDensity => true,
            ScalarDist::Bernoulli { .. } => false,
            _ => {
                let (lo, hi) = self.support();
                lo > 0.0 && hi < 1.0
            }
        }
    }

    /// Atoms and probabilities of a discrete law.
    pub fn atoms(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            ScalarDist::Bernoulli { q } => Some((vec![0.0, 1.0], vec![1.0 - q, *q])),
            ScalarDist::FiniteDiscrete { atoms, probs } => Some((atoms.clone(), probs.clone())),
            ScalarDist::Dirac { a } => Some((vec![*a], vec![1.0])),
            _ => None,
        }
    }

    pub fn has_density(&self) -> bool {
        matches!(
            self,
            ScalarDist::Uniform01
                | ScalarDist::TriangularDensity
                | ScalarDist::TruncatedExponential
                | ScalarDist::SineDensity
        )
    }

    /// Density on `(0, 1)` for the absolutely continuous laws.
    pub fn pdf(&self, l: f64) -> Option<f64> {
        if !self.has_density() {
            return None;
        }
        if !(0.0..=1.0).contains(&l) {
            return Some(0.0);
        }
        Some(match self {
            ScalarDist::Uniform01 => 1.0,
            ScalarDist::TriangularDensity => 2.0 * l,
            ScalarDist::TruncatedExponential => E / (E - 1.0) * (-l).exp(),
            ScalarDist::SineDensity => l.sin() / one_minus_cos1(),
            _ => unreachable!(),
        })
    }

    /// Distribution function of the absolutely continuous laws.
    pub fn cdf(&self, l: f64) -> Option<f64> {
        if !self.has_density() {
            return None;
        }
        let l = l.clamp(0.0, 1.0);
        Some(match self {
            ScalarDist::Uniform01 => l,
            ScalarDist::TriangularDensity => l * l,
            ScalarDist::TruncatedExponential => E / (E - 1.0) * -(-l).exp_m1(),
            ScalarDist::SineDensity => (1.0 - l.cos()) / one_minus_cos1(),
            _ => unreachable!(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ScalarDist::Uniform01 => open01(rng),
            ScalarDist::TriangularDensity => open01(rng).sqrt(),
            ScalarDist::TruncatedExponential => {
                let u = open01(rng);
                -(-u * (E - 1.0) / E).ln_1p()
            }
            ScalarDist::SineDensity => {
                let u = open01(rng);
                (1.0 - u * one_minus_cos1()).acos()
            }
            ScalarDist::Dirac { a } => *a,
            ScalarDist::Bernoulli { .. } | ScalarDist::FiniteDiscrete { .. } => {
                let i = self.sample_index(rng);
                match self {
                    ScalarDist::Bernoulli { .. } => i as f64,
                    ScalarDist::FiniteDiscrete { atoms, .. } => atoms[i],
                    _ => unreachable!(),
                }
            }
        }
    }

    /// Index of the drawn atom for discrete laws (0 for Dirac). Consumes the
    /// same randomness as [`ScalarDist::sample`].
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            ScalarDist::Bernoulli { q } => usize::from(rng.random::<f64>() < *q),
            ScalarDist::FiniteDiscrete { probs, .. } => discrete_index(probs, rng),
            _ => 0,
        }
    }

    pub fn moments(&self) -> Moments {
        let c1 = one_minus_cos1();
        let (s, c) = 1f64.sin_cos();
        match self {
            ScalarDist::Bernoulli { q } => Moments::scalar(*q, q * (1.0 - q)),
            ScalarDist::FiniteDiscrete { atoms, probs } => {
                let m: f64 = atoms.iter().zip(probs).map(|(a, p)| a * p).sum();
                let v: f64 = atoms.iter().zip(probs).map(|(a, p)| p * (a - m).powi(2)).sum();
                Moments::scalar(m, v)
            }
            ScalarDist::Uniform01 => Moments::scalar(0.5, 1.0 / 12.0),
            ScalarDist::TriangularDensity => Moments::scalar(2.0 / 3.0, 1.0 / 18.0),
            ScalarDist::TruncatedExponential => {
                let m = (E - 2.0) / (E - 1.0);
                let m2 = (2.0 * E - 5.0) / (E - 1.0);
                Moments::scalar(m, m2 - m * m)
            }
            ScalarDist::SineDensity => {
                let m = (s - c) / c1;
                let m2 = (c + 2.0 * s - 2.0) / c1;
                Moments::scalar(m, m2 - m * m)
            }
            ScalarDist::Dirac { a } => Moments::scalar(*a, 0.0),
        }
    }
}

impl VectorDist {
    pub fn validate(&self) -> Result<()> {
        match self {
            VectorDist::ProductOfScalars { components } => {
                if components.is_empty() {
                    return Err(Error::dist("product of zero components"));
                }
                components.iter().try_for_each(ScalarDist::validate)
            }
            VectorDist::SimplexUniform { dim } => {
                if *dim == 0 {
                    Err(Error::dist("simplex dimension must be at least 1"))
                } else {
                    Ok(())
                }
            }
            VectorDist::FiniteDiscreteVector { atoms, probs } => {
                if atoms.len() != probs.len() {
                    return Err(Error::LengthMismatch {
                        what: "atoms vs probs",
                        left: atoms.len(),
                        right: probs.len(),
                    });
                }
                check_probs(probs)?;
                let d = atoms[0].len();
                if d == 0 || atoms.iter().any(|a| a.len() != d) {
                    return Err(Error::dist("vector atoms must share a positive dimension"));
                }
                if atoms.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::dist("atoms must be finite"));
                }
                for (i, a) in atoms.iter().enumerate() {
                    if atoms[..i].contains(a) {
                        return Err(Error::dist(format!("atom {a:?} is repeated")));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            VectorDist::ProductOfScalars { components } => components.len(),
            VectorDist::SimplexUniform { dim } => *dim,
            VectorDist::FiniteDiscreteVector { atoms, .. } => atoms.first().map_or(0, Vec::len),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            VectorDist::ProductOfScalars { components } => {
                components.iter().map(|c| c.sample(rng)).collect()
            }
            VectorDist::SimplexUniform { dim } => {
                // Spacings of sorted uniforms, slack coordinate dropped.
                let mut u: Vec<f64> = (0..*dim).map(|_| rng.random::<f64>()).collect();
                u.sort_by(f64::total_cmp);
                let mut prev = 0.0;
                u.iter()
                    .map(|&v| {
                        let y = v - prev;
                        prev = v;
                        y
                    })
                    .collect()
            }
            VectorDist::FiniteDiscreteVector { atoms, probs } => {
                atoms[discrete_index(probs, rng)].clone()
            }
        }
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            VectorDist::FiniteDiscreteVector { probs, .. } => discrete_index(probs, rng),
            _ => 0,
        }
    }

    pub fn moments(&self) -> Moments {
        match self {
            VectorDist::ProductOfScalars { components } => {
                let ms: Vec<Moments> = components.iter().map(ScalarDist::moments).collect();
                let d = ms.len();
                Moments {
                    mean: ms.iter().map(|m| m.mean[0]).collect(),
                    cov: DMatrix::from_fn(d, d, |i, j| if i == j { ms[i].variance() } else { 0.0 }),
                }
            }
            VectorDist::SimplexUniform { dim } => {
                let d = *dim as f64;
                let denom = (d + 1.0) * (d + 1.0) * (d + 2.0);
                Moments {
                    mean: vec![1.0 / (d + 1.0); *dim],
                    cov: DMatrix::from_fn(*dim, *dim, |i, j| {
                        if i == j {
                            d / denom
                        } else {
                            -1.0 / denom
                        }
                    }),
                }
            }
            VectorDist::FiniteDiscreteVector { atoms, probs } => {
                let d = self.dim();
                let mean: Vec<f64> = (0..d)
                    .map(|i| atoms.iter().zip(probs).map(|(a, p)| p * a[i]).sum())
                    .collect();
                let cov = DMatrix::from_fn(d, d, |i, j| {
                    atoms
                        .iter()
                        .zip(probs)
                        .map(|(a, p)| p * (a[i] - mean[i]) * (a[j] - mean[j]))
                        .sum()
                });
                Moments { mean, cov }
            }
        }
    }
}

impl Law {
    pub fn validate(&self) -> Result<()> {
        match self {
            Law::Scalar(d) => d.validate(),
            Law::Vector(d) => d.validate(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Law::Scalar(_) => 1,
            Law::Vector(d) => d.dim(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Law::Scalar(d) => vec![d.sample(rng)],
            Law::Vector(d) => d.sample(rng),
        }
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            Law::Scalar(d) => d.sample_index(rng),
            Law::Vector(d) => d.sample_index(rng),
        }
    }

    /// Atoms (as vectors) and probabilities for discrete laws.
    pub fn atoms(&self) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
        match self {
            Law::Scalar(d) => d
                .atoms()
                .map(|(a, p)| (a.into_iter().map(|v| vec![v]).collect(), p)),
            Law::Vector(VectorDist::FiniteDiscreteVector { atoms, probs }) => {
                Some((atoms.clone(), probs.clone()))
            }
            Law::Vector(_) => None,
        }
    }

    pub fn moments(&self) -> Moments {
        match self {
            Law::Scalar(d) => d.moments(),
            Law::Vector(d) => d.moments(),
        }
    }
}

/// Covariance of the indicator vector of a categorical draw:
/// `q_i (1 - q_i)` on the diagonal and `-q_i q_j` off it.
pub fn multinomial_covariance(probs: &[f64]) -> Result<DMatrix<f64>> {
    check_probs(probs)?;
    if probs.iter().any(|p| *p >= 1.0) {
        return Err(Error::dist("probabilities must lie in (0, 1)"));
    }
    let k = probs.len();
    Ok(DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            probs[i] * (1.0 - probs[i])
        } else {
            -probs[i] * probs[j]
        }
    }))
}
