//! Grid suprema over `I^p`: internality checks, the sup-norm metric, and the
//! sup of linear combinations of means.
//!
//! A grid maximum is a lower bound of the continuous supremum and is exact
//! whenever the supremum is attained at a node.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::interval::{min_max, Interval};
use crate::mean::MeanExpr;

/// Maximum of `f` over the nodes of `g`. `f` receives the node coordinates.
pub fn grid_max<F>(g: &GridSpec, f: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
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
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// Evaluates `m` at every node, in row-major order.
pub fn tabulate(m: &MeanExpr, g: &GridSpec) -> Result<Vec<f64>> {
    m.validate_on(g.interval(), g.p())?;
    let axis = g.axis();
    let p = g.p();
    Ok((0..g.num_nodes())
        .into_par_iter()
        .map_init(
            || vec![0.0; p],
            |x, i| {
                g.fill_node(&axis, i, x);
                m.eval_unchecked(x)
            },
        )
        .collect())
}

/// `max_x max(min(x) - m(x), m(x) - max(x), 0)` over the grid.
pub fn internality_violation(m: &MeanExpr, g: &GridSpec) -> Result<f64> {
    m.validate_on(g.interval(), g.p())?;
    Ok(grid_max(g, |x| {
        let v = m.eval_unchecked(x);
        let (lo, hi) = min_max(x);
        (lo - v).max(v - hi).max(0.0)
    }))
}

/// Grid approximation of the sup-norm distance between two means.
pub fn rho(m1: &MeanExpr, m2: &MeanExpr, g: &GridSpec) -> Result<f64> {
    m1.validate_on(g.interval(), g.p())?;
    m2.validate_on(g.interval(), g.p())?;
    Ok(grid_max(g, |x| {
        (m1.eval_unchecked(x) - m2.eval_unchecked(x)).abs()
    }))
}

/// `max_x |sum_i z_i m_i(x)|` over the grid.
pub fn sup_abs_inner(z: &[f64], ms: &[MeanExpr], g: &GridSpec) -> Result<f64> {
    if z.len() != ms.len() {
        return Err(Error::LengthMismatch {
            what: "coefficients vs means",
            left: z.len(),
            right: ms.len(),
        });
    }
    if ms.is_empty() {
        return Err(Error::Empty("means"));
    }
    for m in ms {
        m.validate_on(g.interval(), g.p())?;
    }
    Ok(grid_max(g, |x| {
        z.iter()
            .zip(ms)
            .map(|(zi, m)| zi * m.eval_unchecked(x))
            .sum::<f64>()
            .abs()
    }))
}

/// Grid estimates of `rho(m1, m2)` at increasing resolutions.
///
/// Each entry is the best lower bound seen so far (the running maximum), so
/// the sequence is nondecreasing even for non-nested levels.
pub fn refine_sup(
    m1: &MeanExpr,
    m2: &MeanExpr,
    interval: &Interval,
    p: usize,
    levels: &[usize],
) -> Result<Vec<f64>> {
    if levels.is_empty() {
        return Err(Error::Empty("refinement levels"));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("refinement levels must be strictly increasing"));
    }
    let mut best = 0.0f64;
    levels
        .iter()
        .map(|&n| {
            let g = GridSpec::new(*interval, p, n)?;
            best = best.max(rho(m1, m2, &g)?);
            Ok(best)
        })
        .collect()
}

/// Precomputed per-node feature vectors `phi(x) in R^k` for repeated
/// evaluation of `max_x |<z, phi(x)>|` with many different `z`.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    k: usize,
    data: Vec<f64>,
}

impl FeatureTable {
    /// Features `(m_1(x), ..., m_k(x))`.
    pub fn from_means(ms: &[MeanExpr], g: &GridSpec) -> Result<Self> {
        if ms.is_empty() {
            return Err(Error::Empty("means"));
        }
        let cols: Vec<Vec<f64>> = ms.iter().map(|m| tabulate(m, g)).collect::<Result<_>>()?;
        let k = ms.len();
        let nodes = g.num_nodes();
        let mut data = vec![0.0; nodes * k];
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                data[i * k + j] = *v;
            }
        }
        Ok(FeatureTable { k, data })
    }

    /// Features `(x_1 - x_p, ..., x_{p-1} - x_p)`.
    pub fn from_differences(g: &GridSpec) -> Result<Self> {
        let p = g.p();
        if p < 2 {
            return Err(Error::param("difference features need p >= 2"));
        }
        let k = p - 1;
        let mut data = Vec::with_capacity(g.num_nodes() * k);
        for x in g.nodes() {
            let last = x[p - 1];
            data.extend(x[..k].iter().map(|v| v - last));
        }
        Ok(FeatureTable { k, data })
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    /// `max_x |<z, phi(x)>|`.
    pub fn sup_abs(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.k);
        self.data
            .chunks_exact(self.k)
            .map(|row| row.iter().zip(z).map(|(a, b)| a * b).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }
}
