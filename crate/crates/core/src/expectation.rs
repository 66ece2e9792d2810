//! The expected mean `E(M)(x) = int M(x, y) dP(y)`: closed forms, quadrature
//! and Monte Carlo tabulations.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::ScalarDist;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::interval::min_max;
use crate::limit_sim::group_means;
use crate::mean::{holder_kernel, MeanExpr, ALPHA_ZERO_TOL};
use crate::quadrature::GaussLegendre;
use crate::random_mean::RandomMeanSpec;
use crate::rng::RngStream;
use crate::sup::{internality_violation, tabulate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationResult {
    pub mean: MeanExpr,
    pub method: Method,
    /// Zero for closed forms; a two-rule difference for quadrature; the
    /// largest node standard error for Monte Carlo.
    pub error_estimate: f64,
}

impl ExpectationResult {
    fn closed(mean: MeanExpr) -> Self {
        ExpectationResult {
            mean,
            method: Method::ClosedForm,
            error_estimate: 0.0,
        }
    }
}

/// `E(M)` in closed form, or `None` when no closed form is known for the
/// combination of family and law.
pub fn closed_form_expectation(spec: &RandomMeanSpec) -> Result<Option<ExpectationResult>> {
    spec.validate()?;
    let mean = match spec {
        RandomMeanSpec::DiscreteMixture { dist, means, .. } => {
            let (_, probs) = dist.atoms().ok_or_else(|| Error::dist("not discrete"))?;
            // Atoms sharing a mean are merged, so a degenerate mixture is that mean exactly.
            let (_, reps, gp) = group_means(means, &probs);
            if reps.len() == 1 {
                reps.into_iter().next()
            } else {
                Some(MeanExpr::mixture(gp, reps)?)
            }
        }
        RandomMeanSpec::RandomHolder {
            alpha0,
            lambda_dist,
            ..
        } => {
            let a = *alpha0;
            let zero = a.abs() <= ALPHA_ZERO_TOL;
            match lambda_dist {
                ScalarDist::Uniform01 if zero => Some(MeanExpr::LogarithmicMean),
                ScalarDist::Uniform01 if a > 0.0 => Some(MeanExpr::CauchyPowerMean { alpha0: a }),
                ScalarDist::TriangularDensity if zero => Some(MeanExpr::TriangularDensityLogMean),
                ScalarDist::TriangularDensity if a > 0.0 => {
                    Some(MeanExpr::TriangularDensityPowerMean { alpha0: a })
                }
                ScalarDist::TruncatedExponential if zero => Some(MeanExpr::ScaledLogMean),
                ScalarDist::SineDensity if zero => Some(MeanExpr::SineDensityMean),
                _ => None,
            }
        }
        RandomMeanSpec::WeightedArithmetic { weight_dist, .. } => {
            let mut w = weight_dist.moments().mean;
            let head: f64 = w.iter().sum();
            w.push((1.0 - head).max(0.0));
            Some(MeanExpr::arithmetic_weighted(w)?)
        }
        RandomMeanSpec::WeightedPower { exponent_dist, .. } => {
            let e = exponent_dist.moments().mean[0].clamp(0.0, 1.0);
            Some(MeanExpr::geometric_weighted(vec![e, 1.0 - e])?)
        }
    };
    Ok(mean.map(ExpectationResult::closed))
}

/// Clamps a tabulated value into `[min(x), max(x)]`.
fn clamp_node(x: &[f64], v: f64) -> f64 {
    let (lo, hi) = min_max(x);
    v.clamp(lo, hi)
}

/// Tabulates `x -> f(x)` over the grid in parallel.
fn tabulate_fn<T, F>(g: &GridSpec, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync,
{
    let axis = g.axis();
    let p = g.p();
    (0..g.num_nodes())
        .into_par_iter()
        .map_init(
            || vec![0.0; p],
            |x, i| {
                g.fill_node(&axis, i, x);
                f(x)
            },
        )
        .collect()
}

/// Kernel value `M(x, y)` for a scalar realization `y`.
fn scalar_kernel(spec: &RandomMeanSpec, x: &[f64], y: f64) -> f64 {
    match spec {
        RandomMeanSpec::RandomHolder { alpha0, .. } => holder_kernel(*alpha0, y, x[0], x[1]),
        RandomMeanSpec::WeightedPower { .. } => holder_kernel(0.0, y, x[0], x[1]),
        _ => unreachable!("scalar kernels belong to the two-variable families"),
    }
}

/// `E(M)` tabulated on `g` by Gauss–Legendre quadrature against the density
/// of the generating law (or an exact sum for discrete laws). The error
/// estimate is the largest node difference between the `nodes`- and
/// `2 nodes`-point rules.
pub fn quadrature_expectation(
    spec: &RandomMeanSpec,
    g: &GridSpec,
    nodes: usize,
) -> Result<ExpectationResult> {
    spec.validate()?;
    check_grid(spec, g)?;
    if nodes == 0 {
        return Err(Error::param("quadrature needs at least one node"));
    }
    let (values, err) = match spec {
        RandomMeanSpec::DiscreteMixture { .. } | RandomMeanSpec::WeightedArithmetic { .. } => {
            // Finite sum over atoms, or the first-moment reduction.
            let exact = closed_form_expectation(spec)?
                .ok_or_else(|| Error::Unsupported("no exact reduction".into()))?;
            (tabulate(&exact.mean, g)?, 0.0)
        }
        RandomMeanSpec::RandomHolder { lambda_dist: d, .. }
        | RandomMeanSpec::WeightedPower {
            exponent_dist: d, ..
        } => {
            if let Some((atoms, probs)) = d.atoms() {
                let v = tabulate_fn(g, |x| {
                    atoms
                        .iter()
                        .zip(&probs)
                        .map(|(a, p)| p * scalar_kernel(spec, x, *a))
                        .sum()
                });
                (v, 0.0)
            } else if d.has_density() {
                let weighted = |rule: &GaussLegendre| -> Vec<f64> {
                    let w: Vec<f64> = rule
                        .nodes
                        .iter()
                        .zip(&rule.weights)
                        .map(|(t, w)| w * d.pdf(*t).unwrap_or(0.0))
                        .collect();
                    tabulate_fn(g, |x| {
                        rule.nodes
                            .iter()
                            .zip(&w)
                            .map(|(t, w)| w * scalar_kernel(spec, x, *t))
                            .sum()
                    })
                };
                let coarse = weighted(&GaussLegendre::new(nodes));
                let fine = weighted(&GaussLegendre::new(2 * nodes));
                let err = coarse
                    .iter()
                    .zip(&fine)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                (coarse, err)
            } else {
                return Err(Error::Unsupported(format!(
                    "quadrature needs a density or a discrete law, got {d:?}"
                )));
            }
        }
    };
    let axis = g.axis();
    let mut x = vec![0.0; g.p()];
    let values = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            g.fill_node(&axis, i, &mut x);
            clamp_node(&x, v)
        })
        .collect();
    Ok(ExpectationResult {
        mean: MeanExpr::grid_mean(g.clone(), values)?,
        method: Method::Quadrature,
        error_estimate: err,
    })
}

/// `E(M)` tabulated on `g` as the average of `n` drawn means. Draws are taken
/// sequentially from `rng`, so the result is reproducible.
pub fn monte_carlo_expectation(
    spec: &RandomMeanSpec,
    n: usize,
    rng: &mut RngStream,
    g: &GridSpec,
) -> Result<ExpectationResult> {
    spec.validate()?;
    check_grid(spec, g)?;
    if n == 0 {
        return Err(Error::param("Monte Carlo needs n >= 1"));
    }
    let draws: Vec<MeanExpr> = (0..n).map(|_| spec.draw(rng)).collect::<Result<_>>()?;
    let nf = n as f64;
    let stats: Vec<(f64, f64)> = tabulate_fn(g, |x| {
        // Welford update per node.
        let (mut mean, mut m2) = (0.0, 0.0);
        for (j, d) in draws.iter().enumerate() {
            let v = d.eval_unchecked(x);
            let delta = v - mean;
            mean += delta / (j + 1) as f64;
            m2 += delta * (v - mean);
        }
        let se = if n > 1 { (m2 / (nf - 1.0) / nf).sqrt() } else { 0.0 };
        (clamp_node(x, mean), se)
    });
    let (values, se): (Vec<f64>, Vec<f64>) = stats.into_iter().unzip();
    let err = se.iter().copied().fold(0.0, f64::max);
    Ok(ExpectationResult {
        mean: MeanExpr::grid_mean(g.clone(), values)?,
        method: Method::MonteCarlo,
        error_estimate: err,
    })
}

/// Internality excess of the computed expectation on `g`.
pub fn check_is_mean(r: &ExpectationResult, g: &GridSpec) -> Result<f64> {
    internality_violation(&r.mean, g)
}

fn check_grid(spec: &RandomMeanSpec, g: &GridSpec) -> Result<()> {
    if g.p() != spec.p() {
        return Err(Error::ArityMismatch {
            expected: spec.p(),
            got: g.p(),
        });
    }
    if !spec.interval().contains_interval(g.interval()) {
        return Err(Error::incompatible(format!(
            "grid interval {} is not inside the spec interval {}",
            g.interval(),
            spec.interval()
        )));
    }
    Ok(())
}

/// CSV text `x1,...,xp,value`, one row per node in row-major order.
pub fn tabulation_csv(g: &GridSpec, values: &[f64]) -> Result<String> {
    if values.len() != g.num_nodes() {
        return Err(Error::LengthMismatch {
            what: "values vs grid nodes",
            left: values.len(),
            right: g.num_nodes(),
        });
    }
    let p = g.p();
    let mut out = String::new();
    for i in 1..=p {
        let _ = write!(out, "x{i},");
    }
    out.push_str("value\n");
    let axis = g.axis();
    let mut x = vec![0.0; p];
    for (i, v) in values.iter().enumerate() {
        g.fill_node(&axis, i, &mut x);
        for c in &x {
            let _ = write!(out, "{c:.16e},");
        }
        let _ = writeln!(out, "{v:.16e}");
    }
    Ok(out)
}

/// Writes the tabulation of `m` on `g` as CSV.
pub fn write_tabulation_csv<W: Write>(m: &MeanExpr, g: &GridSpec, mut w: W) -> Result<()> {
    let values = tabulate(m, g)?;
    w.write_all(tabulation_csv(g, &values)?.as_bytes())?;
    Ok(())
}
