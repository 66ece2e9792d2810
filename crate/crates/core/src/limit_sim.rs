//! Monte Carlo experiments for the strong laws and limit laws of random means.
//!
//! Replicate `r` of a sample-path experiment draws from stream `r`; draws
//! from a theoretical limit law use stream `LIMIT_STREAM_OFFSET + r`, and the
//! two-atom closed-form limit uses `CLOSED_FORM_STREAM_OFFSET + r`.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{multinomial_covariance, Law};
use crate::error::{Error, Result};
use crate::expectation::closed_form_expectation;
use crate::gaussian::GaussianSampler;
use crate::grid::GridSpec;
use crate::interval::Interval;
use crate::mean::{holder_kernel, MeanExpr};
use crate::random_mean::{running_geometric, RandomMeanSpec, RunningAverage};
use crate::rng::RngStream;
use crate::stats::EmpiricalSample;
use crate::sup::{grid_max, rho, tabulate, FeatureTable};

pub const LIMIT_STREAM_OFFSET: u64 = 1 << 32;
pub const CLOSED_FORM_STREAM_OFFSET: u64 = 2 << 32;

/// Parameters shared by all experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub grid: GridSpec,
    /// Sample size per replicate.
    pub n: usize,
    pub replicates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_schedule: Option<Vec<usize>>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("n must be positive"));
        }
        if self.replicates == 0 {
            return Err(Error::param("replicates must be positive"));
        }
        if let Some(s) = &self.n_schedule {
            if s.is_empty() || s[0] == 0 || s.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::param(format!(
                    "n_schedule must be nonempty, positive and strictly increasing: {s:?}"
                )));
            }
        }
        Ok(())
    }

    fn check_distributional(&self) -> Result<()> {
        self.validate()?;
        if self.replicates < 2 {
            return Err(Error::param(
                "a distributional comparison needs at least 2 replicates",
            ));
        }
        Ok(())
    }

    fn check_against(&self, spec: &RandomMeanSpec) -> Result<()> {
        let g = &self.grid;
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
}

/// `kappa_n = rho(S_n, E(M))` on the grid.
pub fn kappa(
    spec: &RandomMeanSpec,
    sbar: &MeanExpr,
    emean: &MeanExpr,
    g: &GridSpec,
) -> Result<f64> {
    if !spec.is_arithmetic_family() {
        return Err(Error::Unsupported(
            "kappa is defined for arithmetic averages; use power_sup_ratio".into(),
        ));
    }
    rho(sbar, emean, g)
}

/// Groups of atoms whose means coincide, with summed probabilities.
pub(crate) fn group_means(means: &[MeanExpr], probs: &[f64]) -> (Vec<usize>, Vec<MeanExpr>, Vec<f64>) {
    let mut label = Vec::with_capacity(means.len());
    let mut reps: Vec<MeanExpr> = Vec::new();
    let mut gp: Vec<f64> = Vec::new();
    for (m, p) in means.iter().zip(probs) {
        match reps.iter().position(|r| r == m) {
            Some(j) => {
                label.push(j);
                gp[j] += p;
            }
            None => {
                label.push(reps.len());
                reps.push(m.clone());
                gp.push(*p);
            }
        }
    }
    (label, reps, gp)
}

/// Discrete version of a random Hölder mean with a finite weight law.
fn as_discrete(spec: &RandomMeanSpec) -> Option<(Vec<MeanExpr>, Vec<f64>)> {
    match spec {
        RandomMeanSpec::DiscreteMixture { dist, means, .. } => {
            dist.atoms().map(|(_, p)| (means.clone(), p))
        }
        RandomMeanSpec::RandomHolder { lambda_dist, .. } => {
            let (atoms, probs) = lambda_dist.atoms()?;
            let means = atoms
                .iter()
                .map(|a| spec.realize(&[*a]))
                .collect::<Result<Vec<_>>>()
                .ok()?;
            Some((means, probs))
        }
        _ => None,
    }
}

/// Evaluates `kappa_n` along a sample path without forming `S_n` explicitly.
enum KappaPath<'a> {
    /// `S_n - E(M) = sum_g (f_g - q_g) m_g`.
    Discrete {
        acc: RunningAverage<'a>,
        label: &'a [usize],
        probs: &'a [f64],
        table: Option<&'a FeatureTable>,
    },
    /// `S_n - E(M) = sum_i (ybar_i - E y_i)(x_i - x_p)`.
    Weights {
        acc: RunningAverage<'a>,
        center: &'a [f64],
        table: &'a FeatureTable,
    },
    /// Per-node running sums of `M(x, y_j)`.
    Nodes {
        law: Law,
        alpha0: f64,
        nodes: &'a [f64],
        target: &'a [f64],
        sums: Vec<f64>,
        n: usize,
    },
    /// `|ybar - E y|` for the geometric family.
    Exponent { acc: RunningAverage<'a>, center: f64 },
}

/// Per-experiment data shared by all replicates.
struct Prepared {
    label: Vec<usize>,
    probs: Vec<f64>,
    table: Option<FeatureTable>,
    center: Vec<f64>,
    nodes: Vec<f64>,
    target: Vec<f64>,
}

fn prepare(spec: &RandomMeanSpec, g: &GridSpec) -> Result<Prepared> {
    spec.validate()?;
    let mut prep = Prepared {
        label: Vec::new(),
        probs: Vec::new(),
        table: None,
        center: Vec::new(),
        nodes: Vec::new(),
        target: Vec::new(),
    };
    match spec {
        RandomMeanSpec::DiscreteMixture { dist, means, .. } => {
            let (_, probs) = dist.atoms().ok_or_else(|| Error::dist("not discrete"))?;
            let (label, reps, gp) = group_means(means, &probs);
            if reps.len() > 1 {
                prep.table = Some(FeatureTable::from_means(&reps, g)?);
            }
            prep.label = label;
            prep.probs = gp;
        }
        RandomMeanSpec::WeightedArithmetic { weight_dist, .. } => {
            prep.center = weight_dist.moments().mean;
            prep.table = Some(FeatureTable::from_differences(g)?);
        }
        RandomMeanSpec::RandomHolder { .. } => {
            let e = closed_form_expectation(spec)?.ok_or_else(|| {
                Error::Unsupported(
                    "no closed-form expectation for this random Hölder mean".into(),
                )
            })?;
            prep.target = tabulate(&e.mean, g)?;
            prep.nodes = g.nodes().concat();
        }
        RandomMeanSpec::WeightedPower { exponent_dist, .. } => {
            prep.center = vec![exponent_dist.moments().mean[0]];
        }
    }
    Ok(prep)
}

impl<'a> KappaPath<'a> {
    fn new(spec: &'a RandomMeanSpec, prep: &'a Prepared) -> Self {
        match spec {
            RandomMeanSpec::DiscreteMixture { .. } => KappaPath::Discrete {
                acc: RunningAverage::new(spec),
                label: &prep.label,
                probs: &prep.probs,
                table: prep.table.as_ref(),
            },
            RandomMeanSpec::WeightedArithmetic { .. } => KappaPath::Weights {
                acc: RunningAverage::new(spec),
                center: &prep.center,
                table: prep.table.as_ref().expect("difference table"),
            },
            RandomMeanSpec::RandomHolder { alpha0, .. } => KappaPath::Nodes {
                law: spec.law(),
                alpha0: *alpha0,
                nodes: &prep.nodes,
                target: &prep.target,
                sums: vec![0.0; prep.target.len()],
                n: 0,
            },
            RandomMeanSpec::WeightedPower { .. } => KappaPath::Exponent {
                acc: RunningAverage::new(spec),
                center: prep.center[0],
            },
        }
    }

    fn push(&mut self, rng: &mut RngStream) -> Result<()> {
        match self {
            KappaPath::Discrete { acc, .. }
            | KappaPath::Weights { acc, .. }
            | KappaPath::Exponent { acc, .. } => acc.push(rng),
            KappaPath::Nodes {
                law,
                alpha0,
                nodes,
                sums,
                n,
                ..
            } => {
                let y = law.sample(rng)[0];
                for (s, x) in sums.iter_mut().zip(nodes.chunks_exact(2)) {
                    *s += holder_kernel(*alpha0, y, x[0], x[1]);
                }
                *n += 1;
                Ok(())
            }
        }
    }

    /// Current `kappa_n`, or `|ybar - E y|` for the geometric family.
    fn value(&self) -> f64 {
        match self {
            KappaPath::Discrete {
                acc,
                label,
                probs,
                table,
            } => {
                let Some(table) = table else {
                    return 0.0;
                };
                let f = acc.frequencies().unwrap_or_default();
                let mut z: Vec<f64> = probs.iter().map(|p| -p).collect();
                for (i, fi) in f.iter().enumerate() {
                    z[label[i]] += fi;
                }
                table.sup_abs(&z)
            }
            KappaPath::Weights { acc, center, table } => {
                let w = acc.mean_weights().unwrap_or_default();
                let z: Vec<f64> = w.iter().zip(center.iter()).map(|(a, b)| a - b).collect();
                table.sup_abs(&z)
            }
            KappaPath::Nodes {
                target, sums, n, ..
            } => {
                let nf = *n as f64;
                sums.iter()
                    .zip(target.iter())
                    .map(|(s, t)| (s / nf - t).abs())
                    .fold(0.0, f64::max)
            }
            KappaPath::Exponent { acc, center } => {
                (acc.mean_exponent().unwrap_or(*center) - center).abs()
            }
        }
    }
}

/// `kappa_n` along one growing sample path per replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectories {
    pub schedule: Vec<usize>,
    /// `values[r][i]` is the statistic of replicate `r` at `schedule[i]`.
    pub values: Vec<Vec<f64>>,
    pub seed: u64,
}

impl Trajectories {
    /// Median over replicates at schedule position `i`.
    pub fn median_at(&self, i: usize) -> f64 {
        let mut col: Vec<f64> = self.values.iter().map(|r| r[i]).collect();
        col.sort_by(f64::total_cmp);
        let k = col.len();
        if k % 2 == 1 {
            col[k / 2]
        } else {
            0.5 * (col[k / 2 - 1] + col[k / 2])
        }
    }

    /// Tidy CSV `replicate,n,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("replicate,n,value\n");
        for (r, row) in self.values.iter().enumerate() {
            for (n, v) in self.schedule.iter().zip(row) {
                let _ = writeln!(out, "{r},{n},{v:.16e}");
            }
        }
        out
    }
}

/// Strong-law trajectories: `kappa_n` (or `|ybar - E y|` for the geometric
/// family) at each `n` of the schedule, on one nested path per replicate.
pub fn slln_trajectory(spec: &RandomMeanSpec, cfg: &SimConfig) -> Result<Trajectories> {
    cfg.validate()?;
    cfg.check_against(spec)?;
    let schedule = cfg
        .n_schedule
        .clone()
        .ok_or_else(|| Error::param("slln needs n_schedule"))?;
    let prep = prepare(spec, &cfg.grid)?;
    let values = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let mut rng = RngStream::new(cfg.seed, r);
            let mut path = KappaPath::new(spec, &prep);
            let mut done = 0;
            let mut row = Vec::with_capacity(schedule.len());
            for &n in &schedule {
                while done < n {
                    path.push(&mut rng)?;
                    done += 1;
                }
                row.push(path.value());
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectories {
        schedule,
        values,
        seed: cfg.seed,
    })
}

/// `R` independent realizations of `sqrt(n) kappa_n`.
pub fn clt_sample(spec: &RandomMeanSpec, cfg: &SimConfig) -> Result<EmpiricalSample> {
    cfg.check_distributional()?;
    cfg.check_against(spec)?;
    if !spec.is_arithmetic_family() {
        return Err(Error::Unsupported(
            "weighted power family: use power_limit_sample".into(),
        ));
    }
    let prep = prepare(spec, &cfg.grid)?;
    let root_n = (cfg.n as f64).sqrt();
    let values = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let mut rng = RngStream::new(cfg.seed, r);
            let mut path = KappaPath::new(spec, &prep);
            for _ in 0..cfg.n {
                path.push(&mut rng)?;
            }
            Ok(root_n * path.value())
        })
        .collect::<Result<Vec<_>>>()?;
    EmpiricalSample::new(values, cfg.seed, (0, cfg.replicates as u64))
}

fn limit_draws(
    cfg: &SimConfig,
    offset: u64,
    f: impl Fn(&mut RngStream) -> f64 + Sync,
) -> Result<EmpiricalSample> {
    let values: Vec<f64> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| f(&mut RngStream::new(cfg.seed, offset + r)))
        .collect();
    EmpiricalSample::new(
        values,
        cfg.seed,
        (offset, offset + cfg.replicates as u64),
    )
}

/// `R` draws from the theoretical limit law of `sqrt(n) kappa_n` (arithmetic
/// families) or of the sup ratio raised to `sqrt(n)` (geometric family).
pub fn limit_law_sample(spec: &RandomMeanSpec, cfg: &SimConfig) -> Result<EmpiricalSample> {
    cfg.validate()?;
    cfg.check_against(spec)?;
    spec.validate()?;
    let g = &cfg.grid;
    if let Some((means, probs)) = as_discrete(spec) {
        let (_, reps, gp) = group_means(&means, &probs);
        if reps.len() == 1 {
            return limit_draws(cfg, LIMIT_STREAM_OFFSET, |_| 0.0);
        }
        let q = multinomial_covariance(&gp)?;
        let sampler = GaussianSampler::new(&q)?;
        let table = FeatureTable::from_means(&reps, g)?;
        return limit_draws(cfg, LIMIT_STREAM_OFFSET, |rng| {
            table.sup_abs(&sampler.sample(rng))
        });
    }
    match spec {
        RandomMeanSpec::WeightedArithmetic { weight_dist, .. } => {
            let sampler = GaussianSampler::new(&weight_dist.moments().cov)?;
            let table = FeatureTable::from_differences(g)?;
            limit_draws(cfg, LIMIT_STREAM_OFFSET, |rng| {
                table.sup_abs(&sampler.sample(rng))
            })
        }
        RandomMeanSpec::WeightedPower { exponent_dist, .. } => {
            let sd = exponent_dist.moments().variance().max(0.0).sqrt();
            let ratio = g.interval().hi() / g.interval().lo();
            limit_draws(cfg, LIMIT_STREAM_OFFSET, |rng| {
                let z: f64 = rng.sample(StandardNormal);
                ratio.powf((sd * z).abs())
            })
        }
        _ => Err(Error::Unsupported(
            "no limit law is known for a random Hölder mean with a continuous weight law".into(),
        )),
    }
}

/// Closed-form limit for two distinct means: `rho(m_0, m_1) |N(0, q(1 - q))|`,
/// which for the arithmetic and geometric means on `[0, 1]` is
/// `|N(0, q(1 - q))| / 2`.
pub fn bernoulli_closed_form_limit_sample(
    spec: &RandomMeanSpec,
    cfg: &SimConfig,
) -> Result<EmpiricalSample> {
    cfg.validate()?;
    cfg.check_against(spec)?;
    spec.validate()?;
    let (means, probs) = as_discrete(spec)
        .ok_or_else(|| Error::Unsupported("needs a discrete random mean".into()))?;
    let (_, reps, gp) = group_means(&means, &probs);
    if reps.len() != 2 {
        return Err(Error::Unsupported(format!(
            "closed form needs exactly two distinct means, got {}",
            reps.len()
        )));
    }
    let scale = rho(&reps[0], &reps[1], &cfg.grid)?;
    let sd = (gp[0] * gp[1]).sqrt();
    limit_draws(cfg, CLOSED_FORM_STREAM_OFFSET, |rng| {
        let z: f64 = rng.sample(StandardNormal);
        scale * (sd * z).abs()
    })
}

/// Scale `s` such that the limit law of `sqrt(n) kappa_n` is `|N(0, s^2)|`, when
/// it is known in closed form: two distinct discrete means
/// (`s = rho(m_0, m_1) sqrt(q_0 q_1)`) or the weighted arithmetic family with
/// `p = 2` (`s = diam(I) sd(y)`). For the weighted power family, `s` is the
/// scale of the log of the limit, `ln(max I / min I) sd(y)`.
pub fn half_normal_limit_scale(spec: &RandomMeanSpec, g: &GridSpec) -> Result<Option<f64>> {
    spec.validate()?;
    if let Some((means, probs)) = as_discrete(spec) {
        let (_, reps, gp) = group_means(&means, &probs);
        return Ok(match reps.len() {
            1 => Some(0.0),
            2 => Some(rho(&reps[0], &reps[1], g)? * (gp[0] * gp[1]).sqrt()),
            _ => None,
        });
    }
    let i = g.interval();
    Ok(match spec {
        RandomMeanSpec::WeightedArithmetic { weight_dist, p: 2, .. } => {
            Some(i.diameter() * weight_dist.moments().variance().max(0.0).sqrt())
        }
        RandomMeanSpec::WeightedPower { exponent_dist, .. } if i.positive() => {
            Some((i.hi() / i.lo()).ln() * exponent_dist.moments().variance().max(0.0).sqrt())
        }
        _ => None,
    })
}

/// Grid sup of `x1^ybar x2^{1-ybar} / (x1^{E y} x2^{1-E y})` for the geometric
/// average of the drawn exponents.
pub fn power_sup_ratio(
    spec: &RandomMeanSpec,
    exponent_draws: &[f64],
    g: &GridSpec,
) -> Result<f64> {
    let RandomMeanSpec::WeightedPower { exponent_dist, .. } = spec else {
        return Err(Error::Unsupported(format!(
            "sup ratio applies to weighted_power, not {}",
            spec.kind_name()
        )));
    };
    if !g.interval().positive() {
        return Err(Error::incompatible(format!(
            "sup ratio needs a positive interval, got {}",
            g.interval()
        )));
    }
    let sbar = running_geometric(spec, exponent_draws)?;
    let e = exponent_dist.moments().mean[0];
    let reference = MeanExpr::geometric_weighted(vec![e, 1.0 - e])?;
    sbar.validate_on(g.interval(), 2)?;
    Ok(grid_max(g, |x| {
        sbar.eval_unchecked(x) / reference.eval_unchecked(x)
    }))
}

/// `(max I / min I)^{|d|}`.
pub fn power_sup_ratio_closed_form(interval: &Interval, d: f64) -> f64 {
    (interval.hi() / interval.lo()).powf(d.abs())
}

/// Empirical and theoretical samples for the geometric-family limit law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerLimit {
    /// `(sup ratio at size n)^{sqrt n}` per replicate.
    pub empirical: EmpiricalSample,
    /// `(max I / min I)^{|N(0, Var y)|}`.
    pub theoretical: EmpiricalSample,
}

pub fn power_limit_sample(spec: &RandomMeanSpec, cfg: &SimConfig) -> Result<PowerLimit> {
    cfg.check_distributional()?;
    cfg.check_against(spec)?;
    spec.validate()?;
    if !matches!(spec, RandomMeanSpec::WeightedPower { .. }) {
        return Err(Error::Unsupported(format!(
            "power limit applies to weighted_power, not {}",
            spec.kind_name()
        )));
    }
    let law = spec.law();
    let root_n = (cfg.n as f64).sqrt();
    let values = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let mut rng = RngStream::new(cfg.seed, r);
            let draws: Vec<f64> = (0..cfg.n).map(|_| law.sample(&mut rng)[0]).collect();
            Ok(power_sup_ratio(spec, &draws, &cfg.grid)?.powf(root_n))
        })
        .collect::<Result<Vec<_>>>()?;
    let empirical = EmpiricalSample::new(values, cfg.seed, (0, cfg.replicates as u64))?;
    let theoretical = limit_law_sample(spec, cfg)?;
    Ok(PowerLimit {
        empirical,
        theoretical,
    })
}

/// Tidy CSV `replicate,n,value`; `n` is written as given (`inf` for limit
/// draws).
pub fn sample_csv(sample: &EmpiricalSample, n: &str) -> String {
    let mut out = String::from("replicate,n,value\n");
    for (r, v) in sample.values().iter().enumerate() {
        let _ = writeln!(out, "{r},{n},{v:.16e}");
    }
    out
}
