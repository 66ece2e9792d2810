use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;

/// Uniform tensor grid on `I^p` with both endpoints on every axis.
///
/// Nodes are enumerated in row-major axis order: the first coordinate varies
/// slowest and the last fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct GridSpec {
    interval: Interval,
    p: usize,
    points_per_axis: usize,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    lo: f64,
    hi: f64,
    p: usize,
    points_per_axis: usize,
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        GridSpec::new(Interval::new(raw.lo, raw.hi)?, raw.p, raw.points_per_axis)
    }
}

impl From<GridSpec> for RawGrid {
    fn from(g: GridSpec) -> Self {
        RawGrid {
            lo: g.interval.lo(),
            hi: g.interval.hi(),
            p: g.p,
            points_per_axis: g.points_per_axis,
        }
    }
}

// Keeps node counts addressable and scans finite.
const MAX_NODES: usize = 1 << 28;

impl GridSpec {
    pub fn new(interval: Interval, p: usize, points_per_axis: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::param("grid dimension p must be at least 1"));
        }
        if points_per_axis < 2 {
            return Err(Error::param("points_per_axis must be at least 2"));
        }
        let total = (points_per_axis as u128).checked_pow(p as u32);
        if total.is_none_or(|t| t > MAX_NODES as u128) {
            return Err(Error::param(format!(
                "grid with {points_per_axis}^{p} nodes is too large"
            )));
        }
        Ok(GridSpec {
            interval,
            p,
            points_per_axis,
        })
    }

    pub fn interval(&self) -> &Interval {
        &self.interval
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn num_nodes(&self) -> usize {
        self.points_per_axis.pow(self.p as u32)
    }

    /// Equally spaced axis values; the last one is exactly `hi`.
    pub fn axis(&self) -> Vec<f64> {
        let n = self.points_per_axis;
        let (lo, hi) = (self.interval.lo(), self.interval.hi());
        let width = hi - lo;
        (0..n)
            .map(|j| {
                if j + 1 == n {
                    hi
                } else {
                    lo + width * (j as f64 / (n - 1) as f64)
                }
            })
            .collect()
    }

    /// Axis index of each coordinate of node `index`.
    pub fn multi_index(&self, mut index: usize) -> Vec<usize> {
        let n = self.points_per_axis;
        let mut out = vec![0; self.p];
        for slot in out.iter_mut().rev() {
            *slot = index % n;
            index /= n;
        }
        out
    }

    /// Writes the coordinates of node `index` into `out` (length `p`).
    #[inline]
    pub fn fill_node(&self, axis: &[f64], mut index: usize, out: &mut [f64]) {
        let n = self.points_per_axis;
        for slot in out.iter_mut().rev() {
            *slot = axis[index % n];
            index /= n;
        }
    }

    /// All nodes in row-major order.
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        let axis = self.axis();
        (0..self.num_nodes())
            .map(|i| {
                let mut x = vec![0.0; self.p];
                self.fill_node(&axis, i, &mut x);
                x
            })
            .collect()
    }

    /// Same interval and dimension, different resolution.
    pub fn with_points(&self, points_per_axis: usize) -> Result<Self> {
        GridSpec::new(self.interval, self.p, points_per_axis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_included() {
        let g = GridSpec::new(Interval::new(0.1, 2.0).unwrap(), 2, 51).unwrap();
        let a = g.axis();
        assert_eq!(a[0], 0.1);
        assert_eq!(a[50], 2.0);
        assert_eq!(g.num_nodes(), 51 * 51);
    }

    #[test]
    fn row_major_order() {
        let g = GridSpec::new(Interval::unit(), 2, 3).unwrap();
        let nodes = g.nodes();
        assert_eq!(nodes[0], vec![0.0, 0.0]);
        assert_eq!(nodes[1], vec![0.0, 0.5]);
        assert_eq!(nodes[3], vec![0.5, 0.0]);
        assert_eq!(nodes[8], vec![1.0, 1.0]);
        assert_eq!(g.multi_index(5), vec![1, 2]);
    }

    #[test]
    fn nested_grids_share_nodes_bitwise() {
        let coarse = GridSpec::new(Interval::new(1.0, 2.0).unwrap(), 1, 11).unwrap();
        let fine = coarse.with_points(101).unwrap();
        let (c, f) = (coarse.axis(), fine.axis());
        for (j, v) in c.iter().enumerate() {
            assert_eq!(*v, f[10 * j]);
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(GridSpec::new(Interval::unit(), 0, 3).is_err());
        assert!(GridSpec::new(Interval::unit(), 2, 1).is_err());
        assert!(GridSpec::new(Interval::unit(), 40, 101).is_err());
    }

    #[test]
    fn json_shape() {
        let g: GridSpec =
            serde_json::from_str(r#"{"lo":0,"hi":1,"p":2,"points_per_axis":101}"#).unwrap();
        assert_eq!(g.num_nodes(), 10201);
        let back = serde_json::to_value(&g).unwrap();
        assert_eq!(back["points_per_axis"], 101);
        assert_eq!(back["lo"], 0.0);
    }
}
