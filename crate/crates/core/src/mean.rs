//! Evaluable `p`-variable means on `I^p`.
//!
//! Every closed-form variant is a mean in the strict sense: its value lies in
//! `[min(x), max(x)]`. Evaluation clamps those variants into that range so that
//! rounding never produces a spurious internality violation. Tabulated
//! [`MeanExpr::GridMean`] values are never clamped; a corrupted table stays
//! detectable.

use std::f64::consts::E;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::interval::{min_max, Interval, Point};
use crate::quadrature::GaussLegendre;

/// `|alpha|` at or below this selects the geometric branch of a power mean.
pub const ALPHA_ZERO_TOL: f64 = 1e-8;
/// Relative width of the band around an exceptional set where the special branch is used.
pub const SINGULAR_TOL: f64 = 1e-9;
/// Arguments below this are treated as the zero boundary of the log family.
pub const ZERO_CLAMP: f64 = 1e-300;
/// Tolerance on weight and coefficient sums.
pub const SUM_TOL: f64 = 1e-12;

const SERIES_LOG_RADIUS: f64 = 0.5;
const SERIES_POW_RADIUS: f64 = 0.25;
/// Gauss–Legendre nodes used inside the series radius.
const NEAR_DIAG_NODES: usize = 24;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Multilinear,
}

/// Symbolic `p`-variable mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeanExpr {
    /// `sum w_i x_i` with `w` in the probability simplex.
    ArithmeticWeighted { weights: Vec<f64> },
    /// `prod x_i^{w_i}` with `w` in the probability simplex.
    GeometricWeighted { weights: Vec<f64> },
    /// Two-variable weighted power mean `(l x1^a + (1-l) x2^a)^{1/a}`,
    /// read as `x1^l x2^{1-l}` when `a` is (numerically) zero.
    PowerMean { alpha: f64, lambda: f64 },
    /// `(x1 - x2) / (ln x1 - ln x2)`.
    LogarithmicMean,
    /// Cauchy mean of the power functions `t^{a+1}` and `t^a`.
    CauchyPowerMean { alpha0: f64 },
    /// Expected power mean under the weight density `2l` on `(0, 1)`.
    TriangularDensityPowerMean { alpha0: f64 },
    /// Expected geometric mean under the weight density `2l` on `(0, 1)`.
    TriangularDensityLogMean,
    /// Expected geometric mean under the truncated exponential weight density.
    ScaledLogMean,
    /// Expected geometric mean under the sine weight density.
    SineDensityMean,
    /// Convex combination of means of equal arity.
    Mixture {
        coeffs: Vec<f64>,
        components: Vec<MeanExpr>,
    },
    /// Values tabulated at the nodes of a grid.
    GridMean {
        grid: GridSpec,
        values: Vec<f64>,
        #[serde(default)]
        interpolation: Interpolation,
    },
}

fn check_simplex(weights: &[f64], what: &str) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::param(format!("{what} must be nonempty")));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::param(format!(
            "{what} must be finite and nonnegative: {weights:?}"
        )));
    }
    let s = compensated_sum(weights);
    if (s - 1.0).abs() > SUM_TOL {
        return Err(Error::param(format!("{what} must sum to 1, got {s}")));
    }
    Ok(())
}

/// Neumaier-compensated sum; long runs of equal coefficients stay exact enough
/// for the simplex check.
pub(crate) fn compensated_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

impl MeanExpr {
    pub fn arithmetic(p: usize) -> Self {
        MeanExpr::ArithmeticWeighted {
            weights: vec![1.0 / p as f64; p],
        }
    }

    pub fn geometric(p: usize) -> Self {
        MeanExpr::GeometricWeighted {
            weights: vec![1.0 / p as f64; p],
        }
    }

    pub fn arithmetic_weighted(weights: Vec<f64>) -> Result<Self> {
        check_simplex(&weights, "weights")?;
        Ok(MeanExpr::ArithmeticWeighted { weights })
    }

    pub fn geometric_weighted(weights: Vec<f64>) -> Result<Self> {
        check_simplex(&weights, "weights")?;
        Ok(MeanExpr::GeometricWeighted { weights })
    }

    pub fn power(alpha: f64, lambda: f64) -> Result<Self> {
        let m = MeanExpr::PowerMean { alpha, lambda };
        m.check()?;
        Ok(m)
    }

    pub fn mixture(coeffs: Vec<f64>, components: Vec<MeanExpr>) -> Result<Self> {
        let m = MeanExpr::Mixture { coeffs, components };
        m.check()?;
        Ok(m)
    }

    pub fn grid_mean(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        let m = MeanExpr::GridMean {
            grid,
            values,
            interpolation: Interpolation::Multilinear,
        };
        m.check()?;
        Ok(m)
    }

    /// Parses and structurally validates a JSON document.
    pub fn from_json(s: &str) -> Result<Self> {
        let m: MeanExpr = serde_json::from_str(s)?;
        m.check()?;
        Ok(m)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            MeanExpr::ArithmeticWeighted { .. } => "arithmetic_weighted",
            MeanExpr::GeometricWeighted { .. } => "geometric_weighted",
            MeanExpr::PowerMean { .. } => "power_mean",
            MeanExpr::LogarithmicMean => "logarithmic_mean",
            MeanExpr::CauchyPowerMean { .. } => "cauchy_power_mean",
            MeanExpr::TriangularDensityPowerMean { .. } => "triangular_density_power_mean",
            MeanExpr::TriangularDensityLogMean => "triangular_density_log_mean",
            MeanExpr::ScaledLogMean => "scaled_log_mean",
            MeanExpr::SineDensityMean => "sine_density_mean",
            MeanExpr::Mixture { .. } => "mixture",
            MeanExpr::GridMean { .. } => "grid_mean",
        }
    }

    /// Number of arguments, when it is determined by the expression.
    pub fn arity(&self) -> usize {
        match self {
            MeanExpr::ArithmeticWeighted { weights } | MeanExpr::GeometricWeighted { weights } => {
                weights.len()
            }
            MeanExpr::Mixture { components, .. } => {
                components.first().map_or(0, MeanExpr::arity)
            }
            MeanExpr::GridMean { grid, .. } => grid.p(),
            _ => 2,
        }
    }

    /// Parameter validation independent of any interval.
    pub fn check(&self) -> Result<()> {
        match self {
            MeanExpr::ArithmeticWeighted { weights } | MeanExpr::GeometricWeighted { weights } => {
                check_simplex(weights, "weights")
            }
            MeanExpr::PowerMean { alpha, lambda } => {
                if !alpha.is_finite() {
                    return Err(Error::param("power mean alpha must be finite"));
                }
                if !(*lambda > 0.0 && *lambda < 1.0) {
                    return Err(Error::param(format!(
                        "power mean lambda must lie in (0, 1), got {lambda}"
                    )));
                }
                Ok(())
            }
            MeanExpr::CauchyPowerMean { alpha0 } | MeanExpr::TriangularDensityPowerMean { alpha0 } => {
                if alpha0.is_finite() && *alpha0 > 0.0 {
                    Ok(())
                } else {
                    Err(Error::param(format!("alpha0 must be positive, got {alpha0}")))
                }
            }
            MeanExpr::LogarithmicMean
            | MeanExpr::TriangularDensityLogMean
            | MeanExpr::ScaledLogMean
            | MeanExpr::SineDensityMean => Ok(()),
            MeanExpr::Mixture { coeffs, components } => {
                if coeffs.len() != components.len() {
                    return Err(Error::LengthMismatch {
                        what: "mixture coefficients vs components",
                        left: coeffs.len(),
                        right: components.len(),
                    });
                }
                check_simplex(coeffs, "mixture coefficients")?;
                let p = components[0].arity();
                for c in components {
                    c.check()?;
                    if c.arity() != p {
                        return Err(Error::ArityMismatch {
                            expected: p,
                            got: c.arity(),
                        });
                    }
                }
                Ok(())
            }
            MeanExpr::GridMean { grid, values, .. } => {
                if values.len() != grid.num_nodes() {
                    return Err(Error::LengthMismatch {
                        what: "grid mean values vs grid nodes",
                        left: values.len(),
                        right: grid.num_nodes(),
                    });
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::param("grid mean values must be finite"));
                }
                Ok(())
            }
        }
    }

    /// Checks that the mean is defined on all of `interval^p`.
    pub fn validate_on(&self, interval: &Interval, p: usize) -> Result<()> {
        self.check()?;
        if self.arity() != p {
            return Err(Error::ArityMismatch {
                expected: p,
                got: self.arity(),
            });
        }
        let need_nonneg = |m: &MeanExpr| -> Result<()> {
            if interval.nonneg() {
                Ok(())
            } else {
                Err(Error::incompatible(format!(
                    "{} needs a nonnegative interval, got {interval}",
                    m.kind_name()
                )))
            }
        };
        match self {
            MeanExpr::ArithmeticWeighted { .. } => Ok(()),
            MeanExpr::PowerMean { alpha, .. } if *alpha < -ALPHA_ZERO_TOL => {
                if interval.positive() {
                    Ok(())
                } else {
                    Err(Error::incompatible(format!(
                        "power mean with alpha = {alpha} < 0 needs a positive interval, got {interval}"
                    )))
                }
            }
            MeanExpr::Mixture { components, .. } => components
                .iter()
                .try_for_each(|c| c.validate_on(interval, p)),
            MeanExpr::GridMean { grid, .. } => {
                if grid.interval().contains_interval(interval) {
                    Ok(())
                } else {
                    Err(Error::incompatible(format!(
                        "grid mean tabulated on {} cannot be evaluated on {interval}",
                        grid.interval()
                    )))
                }
            }
            other => need_nonneg(other),
        }
    }

    /// `m(x)` with arity and pointwise domain checks.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.arity() {
            return Err(Error::ArityMismatch {
                expected: self.arity(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutOfDomain {
                mean: self.kind_name(),
                detail: format!("non-finite argument {x:?}"),
            });
        }
        self.check_point_domain(x)?;
        Ok(self.eval_unchecked(x))
    }

    pub fn eval_point(&self, x: &Point) -> Result<f64> {
        self.eval(x.coords())
    }

    fn check_point_domain(&self, x: &[f64]) -> Result<()> {
        let (lo, _) = min_max(x);
        let fail = |detail: String| {
            Err(Error::OutOfDomain {
                mean: self.kind_name(),
                detail,
            })
        };
        match self {
            MeanExpr::ArithmeticWeighted { .. } => Ok(()),
            MeanExpr::PowerMean { alpha, .. } if *alpha < -ALPHA_ZERO_TOL => {
                if lo > 0.0 {
                    Ok(())
                } else {
                    fail(format!("negative exponent needs positive arguments, got {x:?}"))
                }
            }
            MeanExpr::Mixture { components, .. } => components
                .iter()
                .try_for_each(|c| c.check_point_domain(x)),
            MeanExpr::GridMean { grid, .. } => {
                if x.iter().all(|&v| grid.interval().contains(v)) {
                    Ok(())
                } else {
                    fail(format!("{x:?} outside the tabulated interval {}", grid.interval()))
                }
            }
            _ => {
                if lo >= 0.0 {
                    Ok(())
                } else {
                    fail(format!("negative argument in {x:?}"))
                }
            }
        }
    }

    /// True when the expression is a mean by construction (everything except
    /// tabulations and mixtures containing them).
    pub fn is_certified(&self) -> bool {
        match self {
            MeanExpr::GridMean { .. } => false,
            MeanExpr::Mixture { components, .. } => components.iter().all(MeanExpr::is_certified),
            _ => true,
        }
    }

    /// `m(x)` without validation. The caller guarantees arity and domain.
    pub fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let raw = match self {
            MeanExpr::ArithmeticWeighted { weights } => {
                weights.iter().zip(x).map(|(w, v)| w * v).sum()
            }
            MeanExpr::GeometricWeighted { weights } => weighted_geometric(weights, x),
            MeanExpr::PowerMean { alpha, lambda } => power_mean(*alpha, *lambda, x[0], x[1]),
            MeanExpr::LogarithmicMean => logarithmic_mean(x[0], x[1]),
            MeanExpr::CauchyPowerMean { alpha0 } => cauchy_power_mean(*alpha0, x[0], x[1]),
            MeanExpr::TriangularDensityPowerMean { alpha0 } => {
                triangular_power_mean(*alpha0, x[0], x[1])
            }
            MeanExpr::TriangularDensityLogMean => triangular_log_mean(x[0], x[1]),
            MeanExpr::ScaledLogMean => scaled_log_mean(x[0], x[1]),
            MeanExpr::SineDensityMean => sine_density_mean(x[0], x[1]),
            MeanExpr::Mixture { coeffs, components } => coeffs
                .iter()
                .zip(components)
                .map(|(c, m)| c * m.eval_unchecked(x))
                .sum(),
            MeanExpr::GridMean { grid, values, .. } => return interpolate(grid, values, x),
        };
        if self.is_certified() {
            let (lo, hi) = min_max(x);
            raw.clamp(lo, hi)
        } else {
            raw
        }
    }
}

#[inline]
fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= SINGULAR_TOL * 1f64.max(a.abs()).max(b.abs())
}

/// `ln(a / b)` for positive `a`, `b`, accurate when `a` is close to `b`.
#[inline]
fn log_ratio(a: f64, b: f64) -> f64 {
    let r = a / b;
    if (0.5..=2.0).contains(&r) {
        ((a - b) / b).ln_1p()
    } else {
        a.ln() - b.ln()
    }
}

fn weighted_geometric(weights: &[f64], x: &[f64]) -> f64 {
    let mut log_sum = 0.0;
    for (&w, &v) in weights.iter().zip(x) {
        if w == 0.0 {
            continue;
        }
        if v <= 0.0 {
            return 0.0;
        }
        log_sum += w * v.ln();
    }
    log_sum.exp()
}

/// Weighted power mean of two arguments clamped into `[min, max]`; the kernel
/// of the random Hölder family.
pub(crate) fn holder_kernel(alpha: f64, lambda: f64, a: f64, b: f64) -> f64 {
    power_mean(alpha, lambda, a, b).clamp(a.min(b), a.max(b))
}

fn power_mean(alpha: f64, lambda: f64, a: f64, b: f64) -> f64 {
    if alpha.abs() <= ALPHA_ZERO_TOL {
        return weighted_geometric(&[lambda, 1.0 - lambda], &[a, b]);
    }
    if a == b {
        return a;
    }
    // Scale so that alpha * ln(ratio) <= 0, then use expm1/ln_1p for small alpha.
    let scale = if alpha > 0.0 { a.max(b) } else { a.min(b) };
    if scale == 0.0 {
        return 0.0;
    }
    let term = |v: f64| -> f64 {
        if v == 0.0 {
            -1.0
        } else {
            (alpha * (v / scale).ln()).exp_m1()
        }
    };
    let s = lambda * term(a) + (1.0 - lambda) * term(b);
    scale * (s.ln_1p() / alpha).exp()
}

pub(crate) fn logarithmic_mean(a: f64, b: f64) -> f64 {
    if a <= ZERO_CLAMP || b <= ZERO_CLAMP {
        return 0.0;
    }
    if near(a, b) {
        return 0.5 * (a + b);
    }
    (a - b) / log_ratio(a, b)
}

fn cauchy_power_mean(alpha: f64, a: f64, b: f64) -> f64 {
    if near(a, b) {
        return 0.5 * (a + b);
    }
    let c = 1.0 / alpha;
    if a == 0.0 || b == 0.0 {
        return a.max(b) / (c + 1.0);
    }
    let l = log_ratio(a, b);
    // (a^{alpha+1} - b^{alpha+1}) / ((1/alpha + 1)(a^alpha - b^alpha)) with b factored out.
    b * ((alpha + 1.0) * l).exp_m1() / ((c + 1.0) * (alpha * l).exp_m1())
}

fn triangular_power_mean(alpha: f64, a: f64, b: f64) -> f64 {
    if near(a, b) {
        return (2.0 * a + b) / 3.0;
    }
    let c = 1.0 / alpha;
    if b == 0.0 {
        return 2.0 * a / (c + 2.0);
    }
    if a == 0.0 {
        return 2.0 * b / ((c + 1.0) * (c + 2.0));
    }
    let l = log_ratio(a, b);
    let delta = (alpha * l).exp_m1();
    if delta.abs() <= SERIES_POW_RADIUS {
        // 2 b int_0^1 t (1 + t delta)^c dt; the integrand's singularity at
        // t = -1/delta is far from [0, 1], so a short rule is exact to rounding.
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        let rule = RULE.get_or_init(|| GaussLegendre::new(NEAR_DIAG_NODES));
        let acc = rule.integrate(|t| t * (c * (t * delta).ln_1p()).exp());
        return b * 2.0 * acc;
    }
    // Closed form divided through by b^{2 alpha + 1}; s = (a/b)^alpha, r = a/b.
    let s = 1.0 + delta;
    let r1 = (l * (2.0 * alpha + 1.0)).exp();
    let r2 = (l * (alpha + 1.0)).exp();
    let num = (c + 1.0) * r1 - (c + 2.0) * r2 + 1.0;
    b * 2.0 / ((c + 1.0) * (c + 2.0)) * num / ((s - 1.0) * (s - 1.0))
}

fn triangular_log_mean(a: f64, b: f64) -> f64 {
    if a <= ZERO_CLAMP || b <= ZERO_CLAMP {
        return 0.0;
    }
    if near(a, b) {
        return (2.0 * a + b) / 3.0;
    }
    let l = log_ratio(a, b);
    if l.abs() <= SERIES_LOG_RADIUS {
        // 2 * sum_k l^k / (k! (k + 2))
        let mut fact_pow = 1.0;
        let mut acc = 0.0;
        for k in 0..40 {
            let term = fact_pow / (k as f64 + 2.0);
            acc += term;
            if term.abs() < 1e-18 * acc.abs() {
                break;
            }
            fact_pow *= l / (k as f64 + 1.0);
        }
        return b * 2.0 * acc;
    }
    2.0 * (a * l - a + b) / (l * l)
}

fn scaled_log_mean(a: f64, b: f64) -> f64 {
    if a <= ZERO_CLAMP || b <= ZERO_CLAMP {
        return 0.0;
    }
    let u = a / (E - 1.0);
    let v = E * b / (E - 1.0);
    if near(a, E * b) {
        return 0.5 * (u + v);
    }
    (u - v) / log_ratio(u, v)
}

fn sine_density_mean(a: f64, b: f64) -> f64 {
    if a <= ZERO_CLAMP || b <= ZERO_CLAMP {
        return 0.0;
    }
    let (s1, c1) = 1f64.sin_cos();
    let l = log_ratio(a, b);
    (b - c1 * a + s1 * a * l) / ((1.0 + l * l) * (1.0 - c1))
}

/// Cell index and fractional offset of `t` along a grid axis; node hits are exact.
fn locate(axis: &[f64], t: f64) -> (usize, f64) {
    let n = axis.len();
    let (lo, hi) = (axis[0], axis[n - 1]);
    let s = (t - lo) / (hi - lo) * (n - 1) as f64;
    let mut j = (s.floor().max(0.0) as usize).min(n - 2);
    if t < axis[j] && j > 0 {
        j -= 1;
    } else if t > axis[j + 1] && j + 2 < n {
        j += 1;
    }
    if t == axis[j] {
        (j, 0.0)
    } else if t == axis[j + 1] {
        (j, 1.0)
    } else {
        (j, ((t - axis[j]) / (axis[j + 1] - axis[j])).clamp(0.0, 1.0))
    }
}

fn interpolate(grid: &GridSpec, values: &[f64], x: &[f64]) -> f64 {
    let axis = grid.axis();
    let n = grid.points_per_axis();
    let p = grid.p();
    let cells: Vec<(usize, f64)> = x.iter().map(|&t| locate(&axis, t)).collect();
    let mut acc = 0.0;
    for corner in 0..(1usize << p) {
        let mut weight = 1.0;
        let mut index = 0usize;
        for (d, &(j, frac)) in cells.iter().enumerate() {
            let upper = (corner >> (p - 1 - d)) & 1 == 1;
            weight *= if upper { frac } else { 1.0 - frac };
            index = index * n + j + usize::from(upper);
        }
        if weight != 0.0 {
            acc += weight * values[index];
        }
    }
    acc
}
