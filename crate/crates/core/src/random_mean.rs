//! Random means in kernel form: a generating law paired with a map from
//! realizations `y` to means `M(., y)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{Law, ScalarDist, VectorDist};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::interval::Interval;
use crate::mean::{compensated_sum, MeanExpr, ALPHA_ZERO_TOL, SUM_TOL};
use crate::sup::internality_violation;

/// The four random-mean families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RandomMeanSpec {
    /// Atom `a_i` of a finite law selects the mean `means[i]`.
    DiscreteMixture {
        dist: Law,
        means: Vec<MeanExpr>,
        interval: Interval,
        p: usize,
    },
    /// Weighted power mean with fixed exponent and random weight `lambda`.
    RandomHolder {
        alpha0: f64,
        lambda_dist: ScalarDist,
        interval: Interval,
    },
    /// `sum_{i<p} y_i x_i + (1 - sum y_i) x_p` with `y` on the simplex.
    WeightedArithmetic {
        weight_dist: Law,
        interval: Interval,
        p: usize,
    },
    /// `x1^y x2^{1-y}` with `y` in `[0, 1]`; averaged geometrically.
    WeightedPower {
        exponent_dist: ScalarDist,
        interval: Interval,
    },
}

/// Grid used for the internality screen of user-supplied means.
fn coarse_grid(interval: Interval, p: usize) -> Result<GridSpec> {
    let per_axis = (10_000f64.powf(1.0 / p as f64).floor() as usize).clamp(2, 21);
    GridSpec::new(interval, p, per_axis)
}

impl RandomMeanSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        let spec: RandomMeanSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            RandomMeanSpec::DiscreteMixture { .. } => "discrete_mixture",
            RandomMeanSpec::RandomHolder { .. } => "random_holder",
            RandomMeanSpec::WeightedArithmetic { .. } => "weighted_arithmetic",
            RandomMeanSpec::WeightedPower { .. } => "weighted_power",
        }
    }

    pub fn interval(&self) -> &Interval {
        match self {
            RandomMeanSpec::DiscreteMixture { interval, .. }
            | RandomMeanSpec::RandomHolder { interval, .. }
            | RandomMeanSpec::WeightedArithmetic { interval, .. }
            | RandomMeanSpec::WeightedPower { interval, .. } => interval,
        }
    }

    pub fn p(&self) -> usize {
        match self {
            RandomMeanSpec::DiscreteMixture { p, .. }
            | RandomMeanSpec::WeightedArithmetic { p, .. } => *p,
            RandomMeanSpec::RandomHolder { .. } | RandomMeanSpec::WeightedPower { .. } => 2,
        }
    }

    /// The generating law of the realizations `y`.
    pub fn law(&self) -> Law {
        match self {
            RandomMeanSpec::DiscreteMixture { dist, .. }
            | RandomMeanSpec::WeightedArithmetic {
                weight_dist: dist, ..
            } => dist.clone(),
            RandomMeanSpec::RandomHolder { lambda_dist, .. } => Law::Scalar(lambda_dist.clone()),
            RandomMeanSpec::WeightedPower { exponent_dist, .. } => {
                Law::Scalar(exponent_dist.clone())
            }
        }
    }

    /// Families whose running average is arithmetic.
    pub fn is_arithmetic_family(&self) -> bool {
        !matches!(self, RandomMeanSpec::WeightedPower { .. })
    }

    /// A grid on this spec's domain.
    pub fn grid(&self, points_per_axis: usize) -> Result<GridSpec> {
        GridSpec::new(*self.interval(), self.p(), points_per_axis)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RandomMeanSpec::DiscreteMixture {
                dist,
                means,
                interval,
                p,
            } => {
                dist.validate()?;
                let (atoms, probs) = dist.atoms().ok_or_else(|| {
                    Error::dist("discrete mixture needs a finite discrete law")
                })?;
                if probs.len() < 2 {
                    return Err(Error::dist(
                        "discrete mixture needs at least two atoms with probabilities in (0, 1)",
                    ));
                }
                if atoms.len() != means.len() {
                    return Err(Error::LengthMismatch {
                        what: "atoms vs means",
                        left: atoms.len(),
                        right: means.len(),
                    });
                }
                let g = coarse_grid(*interval, *p)?;
                for (i, m) in means.iter().enumerate() {
                    m.validate_on(interval, *p)?;
                    let v = internality_violation(m, &g)?;
                    if v > 0.0 {
                        return Err(Error::param(format!(
                            "means[{i}] is not a mean on {interval}: excess {v}"
                        )));
                    }
                }
                Ok(())
            }
            RandomMeanSpec::RandomHolder {
                alpha0,
                lambda_dist,
                interval,
            } => {
                lambda_dist.validate()?;
                if !alpha0.is_finite() {
                    return Err(Error::param("alpha0 must be finite"));
                }
                if !lambda_dist.in_open_unit() {
                    return Err(Error::dist("random Hölder weights must lie in (0, 1)"));
                }
                if !interval.nonneg() {
                    return Err(Error::incompatible(format!(
                        "random Hölder mean needs a nonnegative interval, got {interval}"
                    )));
                }
                if *alpha0 < -ALPHA_ZERO_TOL && !interval.positive() {
                    return Err(Error::incompatible(format!(
                        "alpha0 < 0 needs a positive interval, got {interval}"
                    )));
                }
                Ok(())
            }
            RandomMeanSpec::WeightedArithmetic {
                weight_dist,
                p,
                ..
            } => {
                weight_dist.validate()?;
                if *p < 2 {
                    return Err(Error::param("weighted arithmetic family needs p >= 2"));
                }
                if weight_dist.dim() != p - 1 {
                    return Err(Error::dist(format!(
                        "weight law has dimension {}, expected p - 1 = {}",
                        weight_dist.dim(),
                        p - 1
                    )));
                }
                let on_simplex = match weight_dist {
                    Law::Scalar(d) => {
                        let (lo, hi) = d.support();
                        lo >= 0.0 && hi <= 1.0
                    }
                    Law::Vector(VectorDist::SimplexUniform { .. }) => true,
                    Law::Vector(VectorDist::ProductOfScalars { components }) => {
                        components.iter().all(|c| c.support().0 >= 0.0)
                            && components.iter().map(|c| c.support().1).sum::<f64>() <= 1.0
                    }
                    Law::Vector(VectorDist::FiniteDiscreteVector { atoms, .. }) => atoms
                        .iter()
                        .all(|a| a.iter().all(|v| *v >= 0.0) && a.iter().sum::<f64>() <= 1.0),
                };
                if on_simplex {
                    Ok(())
                } else {
                    Err(Error::dist(
                        "weight law is not supported on the simplex {y >= 0, sum y <= 1} by construction",
                    ))
                }
            }
            RandomMeanSpec::WeightedPower {
                exponent_dist,
                interval,
            } => {
                exponent_dist.validate()?;
                let (lo, hi) = exponent_dist.support();
                if !(lo >= 0.0 && hi <= 1.0) {
                    return Err(Error::dist("exponent law must be supported on [0, 1]"));
                }
                if !interval.positive() {
                    return Err(Error::incompatible(format!(
                        "weighted power family needs a positive interval, got {interval}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// The kernel `y -> M(., y)`.
    pub fn realize(&self, y: &[f64]) -> Result<MeanExpr> {
        let expect_dim = |d: usize| -> Result<()> {
            if y.len() == d {
                Ok(())
            } else {
                Err(Error::Inadmissible(format!(
                    "expected a realization of dimension {d}, got {y:?}"
                )))
            }
        };
        match self {
            RandomMeanSpec::DiscreteMixture { dist, means, .. } => {
                let (atoms, _) = dist.atoms().ok_or_else(|| Error::dist("not discrete"))?;
                atoms
                    .iter()
                    .position(|a| a.as_slice() == y)
                    .map(|i| means[i].clone())
                    .ok_or_else(|| Error::Inadmissible(format!("{y:?} is not an atom")))
            }
            RandomMeanSpec::RandomHolder { alpha0, .. } => {
                expect_dim(1)?;
                let l = y[0];
                if !(l > 0.0 && l < 1.0) {
                    return Err(Error::Inadmissible(format!("weight {l} outside (0, 1)")));
                }
                if alpha0.abs() <= ALPHA_ZERO_TOL {
                    MeanExpr::geometric_weighted(vec![l, 1.0 - l])
                } else {
                    MeanExpr::power(*alpha0, l)
                }
            }
            RandomMeanSpec::WeightedArithmetic { p, .. } => {
                expect_dim(p - 1)?;
                let s: f64 = y.iter().sum();
                if y.iter().any(|v| v.is_nan() || *v < 0.0) || s > 1.0 + SUM_TOL {
                    return Err(Error::Inadmissible(format!("{y:?} is not in the simplex")));
                }
                let mut w = y.to_vec();
                w.push((1.0 - s).max(0.0));
                MeanExpr::arithmetic_weighted(w)
            }
            RandomMeanSpec::WeightedPower { .. } => {
                expect_dim(1)?;
                let e = y[0];
                if !(0.0..=1.0).contains(&e) {
                    return Err(Error::Inadmissible(format!("exponent {e} outside [0, 1]")));
                }
                MeanExpr::geometric_weighted(vec![e, 1.0 - e])
            }
        }
    }

    /// One realization of the random mean.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MeanExpr> {
        match self {
            RandomMeanSpec::DiscreteMixture { dist, means, .. } => {
                Ok(means[dist.sample_index(rng)].clone())
            }
            _ => self.realize(&self.law().sample(rng)),
        }
    }
}

/// `S_n = (1/n) sum_j M_j` for the arithmetic-averaging families.
pub fn running_average(spec: &RandomMeanSpec, draws: &[MeanExpr]) -> Result<MeanExpr> {
    if draws.is_empty() {
        return Err(Error::Empty("draws"));
    }
    if !spec.is_arithmetic_family() {
        return Err(Error::Unsupported(
            "weighted power draws are averaged geometrically; use running_geometric".into(),
        ));
    }
    let n = draws.len();
    if n == 1 {
        return Ok(draws[0].clone());
    }
    match spec {
        RandomMeanSpec::WeightedArithmetic { p, .. } => {
            let mut sums = vec![0.0; *p];
            for d in draws {
                match d {
                    MeanExpr::ArithmeticWeighted { weights } if weights.len() == *p => {
                        for (s, w) in sums.iter_mut().zip(weights) {
                            *s += w;
                        }
                    }
                    _ => return uniform_mixture(draws),
                }
            }
            let mut w: Vec<f64> = sums[..p - 1].iter().map(|s| s / n as f64).collect();
            let head: f64 = w.iter().sum();
            w.push((1.0 - head).max(0.0));
            MeanExpr::arithmetic_weighted(w)
        }
        RandomMeanSpec::DiscreteMixture { means, .. } if means.len() < n => {
            let mut counts = vec![0usize; means.len()];
            for d in draws {
                match means.iter().position(|m| m == d) {
                    Some(i) => counts[i] += 1,
                    None => return uniform_mixture(draws),
                }
            }
            frequency_mixture(means, &counts)
        }
        _ => uniform_mixture(draws),
    }
}

fn uniform_mixture(draws: &[MeanExpr]) -> Result<MeanExpr> {
    let n = draws.len();
    MeanExpr::mixture(vec![1.0 / n as f64; n], draws.to_vec())
}

/// `sum_i (c_i / n) m_i` over the means that occurred.
pub(crate) fn frequency_mixture(means: &[MeanExpr], counts: &[usize]) -> Result<MeanExpr> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::Empty("draws"));
    }
    let mut coeffs: Vec<f64> = Vec::new();
    let mut comps: Vec<MeanExpr> = Vec::new();
    let mut merged: Vec<usize> = Vec::new();
    for (c, m) in counts.iter().zip(means).filter(|(c, _)| **c > 0) {
        match comps.iter().position(|r| r == m) {
            Some(j) => merged[j] += c,
            None => {
                comps.push(m.clone());
                merged.push(*c);
            }
        }
    }
    coeffs.extend(merged.iter().map(|c| *c as f64 / n as f64));
    if comps.len() == 1 {
        return Ok(comps.into_iter().next().unwrap());
    }
    MeanExpr::mixture(coeffs, comps)
}

/// `(prod_j x1^{y_j} x2^{1-y_j})^{1/n} = x1^{ybar} x2^{1-ybar}`.
pub fn running_geometric(spec: &RandomMeanSpec, exponent_draws: &[f64]) -> Result<MeanExpr> {
    if !matches!(spec, RandomMeanSpec::WeightedPower { .. }) {
        return Err(Error::Unsupported(format!(
            "geometric averaging applies to weighted_power, not {}",
            spec.kind_name()
        )));
    }
    if exponent_draws.is_empty() {
        return Err(Error::Empty("exponent draws"));
    }
    if let Some(e) = exponent_draws.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(Error::Inadmissible(format!("exponent {e} outside [0, 1]")));
    }
    let mean = compensated_sum(exponent_draws) / exponent_draws.len() as f64;
    let mean = mean.clamp(0.0, 1.0);
    MeanExpr::geometric_weighted(vec![mean, 1.0 - mean])
}

/// Streaming sufficient statistics of `M_1, ..., M_n`.
#[derive(Debug, Clone)]
pub struct RunningAverage<'a> {
    spec: &'a RandomMeanSpec,
    law: Law,
    n: usize,
    state: State,
}

#[derive(Debug, Clone)]
enum State {
    Counts(Vec<usize>),
    WeightSums(Vec<f64>),
    ExponentSum(f64),
    Draws(Vec<MeanExpr>),
}

impl<'a> RunningAverage<'a> {
    pub fn new(spec: &'a RandomMeanSpec) -> Self {
        let state = match spec {
            RandomMeanSpec::DiscreteMixture { means, .. } => State::Counts(vec![0; means.len()]),
            RandomMeanSpec::WeightedArithmetic { p, .. } => State::WeightSums(vec![0.0; p - 1]),
            RandomMeanSpec::WeightedPower { .. } => State::ExponentSum(0.0),
            RandomMeanSpec::RandomHolder { .. } => State::Draws(Vec::new()),
        };
        RunningAverage {
            spec,
            law: spec.law(),
            n: 0,
            state,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Draws `M_{n+1}` and folds it in. Uses the same randomness as
    /// [`RandomMeanSpec::draw`].
    pub fn push<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        match &mut self.state {
            State::Counts(c) => c[self.law.sample_index(rng)] += 1,
            State::WeightSums(s) => {
                let y = self.law.sample(rng);
                for (acc, v) in s.iter_mut().zip(y) {
                    *acc += v;
                }
            }
            State::ExponentSum(s) => *s += self.law.sample(rng)[0],
            State::Draws(d) => d.push(self.spec.draw(rng)?),
        }
        self.n += 1;
        Ok(())
    }

    /// Empirical atom frequencies (discrete mixture only).
    pub fn frequencies(&self) -> Option<Vec<f64>> {
        match &self.state {
            State::Counts(c) => Some(c.iter().map(|v| *v as f64 / self.n as f64).collect()),
            _ => None,
        }
    }

    /// Averaged leading weights `(ybar_1, ..., ybar_{p-1})` (weighted arithmetic only).
    pub fn mean_weights(&self) -> Option<Vec<f64>> {
        match &self.state {
            State::WeightSums(s) => Some(s.iter().map(|v| v / self.n as f64).collect()),
            _ => None,
        }
    }

    /// Averaged exponent `ybar` (weighted power only).
    pub fn mean_exponent(&self) -> Option<f64> {
        match &self.state {
            State::ExponentSum(s) => Some((s / self.n as f64).clamp(0.0, 1.0)),
            _ => None,
        }
    }

    /// The current average as a mean: arithmetic `S_n`, or the geometric
    /// average for the weighted power family.
    pub fn current(&self) -> Result<MeanExpr> {
        if self.n == 0 {
            return Err(Error::Empty("draws"));
        }
        match (&self.state, self.spec) {
            (State::Counts(c), RandomMeanSpec::DiscreteMixture { means, .. }) => {
                frequency_mixture(means, c)
            }
            (State::WeightSums(_), _) => {
                let mut w = self.mean_weights().unwrap_or_default();
                let head: f64 = w.iter().sum();
                w.push((1.0 - head).max(0.0));
                MeanExpr::arithmetic_weighted(w)
            }
            (State::ExponentSum(_), _) => {
                let e = self.mean_exponent().unwrap_or(0.0);
                MeanExpr::geometric_weighted(vec![e, 1.0 - e])
            }
            (State::Draws(d), _) => running_average(self.spec, d),
            _ => unreachable!("state always matches the spec family"),
        }
    }
}
