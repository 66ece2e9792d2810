//! Property checks shared by the core test suite and the acceptance target.
//!
//! Every check runs a deterministic proptest runner and returns `Err` with the
//! shrunk counterexample on failure.

#![allow(dead_code)]

use std::f64::consts::E;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::RngCore;
use random_means::{
    check_is_mean, closed_form_expectation, clt_sample, internality_violation, kappa,
    monte_carlo_expectation, multinomial_covariance, power_sup_ratio, quadrature_expectation,
    refine_sup, rho, running_average, running_geometric, slln_trajectory, sup_abs_inner, tabulate,
    GridSpec, Interval, Law, MeanExpr, RandomMeanSpec, RngStream, ScalarDist, SimConfig,
    VectorDist,
};

pub const CASES: u32 = 1000;

pub type Check = fn() -> Result<(), String>;

/// Every invariant, by name.
pub fn all() -> Vec<(&'static str, Check)> {
    vec![
        ("mean internality", mean_internality as Check),
        ("diagonal idempotence", diagonal_idempotence),
        ("rho metric axioms", rho_metric_axioms),
        ("mixture linearity", mixture_linearity),
        ("monotone refinement", monotone_refinement),
        ("power mean continuity at 0", power_continuity_at_zero),
        ("stream reproducibility", stream_reproducibility),
        ("inverse cdf sampling", inverse_cdf_sampling),
        ("multinomial covariance", multinomial_covariance_props),
        ("moments vs monte carlo", moments_consistency),
        ("kernel internality", kernel_internality),
        ("closure under averaging", closure_under_averaging),
        ("exponent sum identity", exponent_sum_identity),
        ("atom frequencies", atom_frequencies),
        ("expectation oracles", expectation_oracles),
        ("expectation internality", expectation_internality),
        ("expectation idempotence", expectation_idempotence),
        ("scaled log mean identity", scaled_log_identity),
        ("degenerate law collapse", degenerate_collapse),
        ("sup ratio identity", sup_ratio_identity),
        ("sup_abs_inner homogeneity", sup_abs_inner_homogeneity),
        ("simulation reproducibility", simulation_reproducibility),
    ]
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn lib<T>(r: random_means::Result<T>) -> Result<T, TestCaseError> {
    r.map_err(|e| TestCaseError::fail(e.to_string()))
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, k).prop_map(|raw| {
        let s: f64 = raw.iter().sum::<f64>() + 1e-9;
        let mut w: Vec<f64> = raw.iter().map(|v| (v + 1e-9 / raw.len() as f64) / s).collect();
        let head: f64 = w[..w.len() - 1].iter().sum();
        *w.last_mut().unwrap() = (1.0 - head).max(0.0);
        w
    })
}

/// Closed-form two-variable means (no grid tables).
pub fn closed_mean2() -> BoxedStrategy<MeanExpr> {
    let leaf = prop_oneof![
        simplex(2).prop_map(|w| MeanExpr::ArithmeticWeighted { weights: w }),
        simplex(2).prop_map(|w| MeanExpr::GeometricWeighted { weights: w }),
        (-4.0f64..4.0, 0.01f64..0.99).prop_map(|(a, l)| MeanExpr::PowerMean { alpha: a, lambda: l }),
        Just(MeanExpr::LogarithmicMean),
        (0.05f64..5.0).prop_map(|a| MeanExpr::CauchyPowerMean { alpha0: a }),
        (0.05f64..5.0).prop_map(|a| MeanExpr::TriangularDensityPowerMean { alpha0: a }),
        Just(MeanExpr::TriangularDensityLogMean),
        Just(MeanExpr::ScaledLogMean),
        Just(MeanExpr::SineDensityMean),
    ];
    leaf.prop_recursive(1, 4, 3, |inner| {
        prop::collection::vec(inner, 2..=3).prop_flat_map(|cs| {
            let k = cs.len();
            (Just(cs), simplex(k))
                .prop_map(|(cs, c)| MeanExpr::Mixture { coeffs: c, components: cs })
        })
    })
    .boxed()
}

/// Nonnegative interval whose left end is zero a quarter of the time.
fn interval() -> impl Strategy<Value = Interval> {
    (prop_oneof![1 => Just(0.0), 3 => 0.01f64..5.0], 0.1f64..20.0)
        .prop_map(|(lo, w)| Interval::new(lo, lo + w).unwrap())
}

fn positive_interval() -> impl Strategy<Value = Interval> {
    (0.01f64..5.0, 0.1f64..20.0).prop_map(|(lo, w)| Interval::new(lo, lo + w).unwrap())
}

/// A mean together with a grid it is defined on; grid tables are included by
/// tabulating a closed-form mean on that grid.
fn mean_on_grid() -> impl Strategy<Value = (MeanExpr, GridSpec)> {
    (closed_mean2(), interval(), 2usize..8, any::<bool>()).prop_filter_map(
        "mean undefined on interval",
        |(m, i, n, tabulated)| {
            let i = if m.validate_on(&i, 2).is_ok() {
                i
            } else {
                Interval::new(i.lo().max(0.01), i.hi() + 0.01).ok()?
            };
            m.validate_on(&i, 2).ok()?;
            let g = GridSpec::new(i, 2, n).ok()?;
            if tabulated {
                let v = tabulate(&m, &g).ok()?;
                Some((MeanExpr::grid_mean(g.clone(), v).ok()?, g))
            } else {
                Some((m, g))
            }
        },
    )
}

pub fn mean_internality() -> Result<(), String> {
    run(CASES, mean_on_grid(), |(m, g)| {
        for x in g.nodes() {
            let v = lib(m.eval(&x))?;
            let (lo, hi) = (x[0].min(x[1]), x[0].max(x[1]));
            ensure(lo <= v && v <= hi, || format!("{v} outside [{lo}, {hi}] at {x:?}"))?;
        }
        let viol = lib(internality_violation(&m, &g))?;
        ensure(viol == 0.0, || format!("violation {viol}"))
    })?;
    // Higher arity for the weighted families.
    run(
        CASES,
        (2usize..=5, any::<bool>(), positive_interval()).prop_flat_map(|(p, geo, i)| {
            (simplex(p), Just(geo), Just(i), Just(p))
        }),
        |(w, geo, i, p)| {
            let m = if geo {
                MeanExpr::GeometricWeighted { weights: w }
            } else {
                MeanExpr::ArithmeticWeighted { weights: w }
            };
            let n = if p > 3 { 4 } else { 6 };
            let g = lib(GridSpec::new(i, p, n))?;
            let viol = lib(internality_violation(&m, &g))?;
            ensure(viol == 0.0, || format!("violation {viol}"))
        },
    )
}

pub fn diagonal_idempotence() -> Result<(), String> {
    run(CASES, (closed_mean2(), 1e-3f64..100.0), |(m, t)| {
        let v = lib(m.eval(&[t, t]))?;
        ensure(rel_close(v, t, 1e-12), || format!("m(t, t) = {v}, t = {t}"))?;
        let z = lib(m.eval(&[0.0, 0.0]));
        if let Ok(z) = z {
            ensure(z == 0.0, || format!("m(0, 0) = {z}"))?;
        }
        Ok(())
    })
}

pub fn rho_metric_axioms() -> Result<(), String> {
    run(
        CASES,
        (closed_mean2(), closed_mean2(), closed_mean2(), positive_interval(), 2usize..8),
        |(a, b, c, i, n)| {
            let g = lib(GridSpec::new(i, 2, n))?;
            let (ab, ba) = (lib(rho(&a, &b, &g))?, lib(rho(&b, &a, &g))?);
            let (bc, ac) = (lib(rho(&b, &c, &g))?, lib(rho(&a, &c, &g))?);
            ensure(lib(rho(&a, &a, &g))? == 0.0, || "rho(m, m) != 0".into())?;
            ensure(ab == ba, || format!("asymmetric: {ab} vs {ba}"))?;
            // One rounding of each difference is allowed for.
            let slack = 4.0 * f64::EPSILON * i.hi();
            ensure(ac <= ab + bc + slack, || format!("{ac} > {ab} + {bc}"))
        },
    )
}

pub fn mixture_linearity() -> Result<(), String> {
    let strat = prop::collection::vec(closed_mean2(), 2..=4)
        .prop_flat_map(|ms| {
            let k = ms.len();
            (Just(ms), simplex(k), positive_interval(), 0.0f64..1.0, 0.0f64..1.0)
        });
    run(CASES, strat, |(ms, c, i, u, v)| {
        let x = [i.lo() + u * i.diameter(), i.lo() + v * i.diameter()];
        let direct: f64 = ms
            .iter()
            .zip(&c)
            .map(|(m, ci)| ci * m.eval(&x).unwrap())
            .sum();
        let mix = lib(MeanExpr::mixture(c.clone(), ms.clone()))?;
        let got = lib(mix.eval(&x))?;
        ensure(rel_close(got, direct, 1e-12), || format!("{got} vs {direct}"))
    })
}

pub fn monotone_refinement() -> Result<(), String> {
    let levels = prop::collection::btree_set(2usize..40, 1..5)
        .prop_map(|s| s.into_iter().collect::<Vec<_>>());
    run(
        CASES,
        (closed_mean2(), closed_mean2(), positive_interval(), levels),
        |(a, b, i, levels)| {
            let r = lib(refine_sup(&a, &b, &i, 2, &levels))?;
            ensure(r.windows(2).all(|w| w[0] <= w[1]), || format!("{r:?}"))
        },
    )
}

pub fn power_continuity_at_zero() -> Result<(), String> {
    run(
        CASES,
        (-1e-8f64..=1e-8, 0.01f64..0.99, 1e-3f64..100.0, 1e-3f64..100.0),
        |(a, l, x1, x2)| {
            let near = lib(lib(MeanExpr::power(a, l))?.eval(&[x1, x2]))?;
            let zero = lib(lib(MeanExpr::power(0.0, l))?.eval(&[x1, x2]))?;
            ensure((near - zero).abs() <= 1e-6, || format!("{near} vs {zero}"))
        },
    )
}

fn all_scalar_dists() -> Vec<ScalarDist> {
    vec![
        ScalarDist::Bernoulli { q: 0.3 },
        ScalarDist::FiniteDiscrete {
            atoms: vec![0.1, 0.5, 0.9],
            probs: vec![0.2, 0.5, 0.3],
        },
        ScalarDist::Uniform01,
        ScalarDist::TriangularDensity,
        ScalarDist::TruncatedExponential,
        ScalarDist::SineDensity,
        ScalarDist::Dirac { a: 0.25 },
    ]
}

pub fn stream_reproducibility() -> Result<(), String> {
    run(CASES, (any::<u64>(), any::<u64>(), 0usize..7), |(seed, id, d)| {
        let dist = &all_scalar_dists()[d];
        let (mut a, mut b) = (RngStream::new(seed, id), RngStream::new(seed, id));
        let xa: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        ensure(xa == xb, || "raw words differ".into())?;
        let sa: Vec<u64> = (0..16).map(|_| dist.sample(&mut a).to_bits()).collect();
        let sb: Vec<u64> = (0..16).map(|_| dist.sample(&mut b).to_bits()).collect();
        ensure(sa == sb, || "samples differ".into())?;
        let mut c = RngStream::new(seed, id.wrapping_add(1));
        let xc: Vec<u64> = (0..16).map(|_| c.next_u64()).collect();
        ensure(xc != xa, || "neighbouring streams coincide".into())
    })
}

pub fn inverse_cdf_sampling() -> Result<(), String> {
    let n = 100_000;
    let bound = 1.36 / (n as f64).sqrt() * 1.5;
    for (i, dist) in [
        ScalarDist::TruncatedExponential,
        ScalarDist::SineDensity,
        ScalarDist::TriangularDensity,
        ScalarDist::Uniform01,
    ]
    .into_iter()
    .enumerate()
    {
        let mut rng = RngStream::new(11, i as u64);
        let values: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let sample = random_means::EmpiricalSample::new(values, 11, (i as u64, i as u64 + 1))
            .map_err(|e| e.to_string())?;
        let d = random_means::ks_against_cdf(&sample, |t| dist.cdf(t).unwrap());
        if d > bound {
            return Err(format!("{dist:?}: KS {d} > {bound}"));
        }
    }
    Ok(())
}

pub fn multinomial_covariance_props() -> Result<(), String> {
    let probs = prop::collection::vec(0.01f64..1.0, 2..10).prop_map(|raw| {
        let s: f64 = raw.iter().sum();
        let mut q: Vec<f64> = raw.iter().map(|v| v / s).collect();
        let head: f64 = q[..q.len() - 1].iter().sum();
        *q.last_mut().unwrap() = 1.0 - head;
        q
    });
    run(CASES, probs, |q| {
        prop_assume!(q.iter().all(|v| *v > 0.0 && *v < 1.0));
        let m = lib(multinomial_covariance(&q))?;
        let k = q.len();
        for i in 0..k {
            let row: f64 = (0..k).map(|j| m[(i, j)]).sum();
            ensure(row.abs() <= 1e-12, || format!("row {i} sums to {row}"))?;
            for j in 0..k {
                ensure(m[(i, j)] == m[(j, i)], || format!("asymmetric at ({i}, {j})"))?;
            }
        }
        let min = m.symmetric_eigenvalues().min();
        ensure(min >= -1e-10, || format!("eigenvalue {min}"))
    })
}

pub fn moments_consistency() -> Result<(), String> {
    let n = 1_000_000;
    for (i, dist) in all_scalar_dists().into_iter().enumerate() {
        let m = dist.moments();
        let (mean, var) = (m.mean[0], m.variance());
        let mut rng = RngStream::new(5, i as u64);
        let total: f64 = (0..n).map(|_| dist.sample(&mut rng)).sum();
        let got = total / n as f64;
        let se = (var / n as f64).sqrt();
        let ok = if var == 0.0 {
            (got - mean).abs() <= 1e-12
        } else {
            (got - mean).abs() <= 4.0 * se
        };
        if !ok {
            return Err(format!("{dist:?}: sample mean {got}, exact {mean}, se {se}"));
        }
    }
    // Vector laws: each coordinate.
    let laws = [
        VectorDist::SimplexUniform { dim: 3 },
        VectorDist::ProductOfScalars {
            components: vec![ScalarDist::Uniform01, ScalarDist::SineDensity],
        },
    ];
    for (i, law) in laws.iter().enumerate() {
        let m = law.moments();
        let mut rng = RngStream::new(6, i as u64);
        let mut sums = vec![0.0; law.dim()];
        for _ in 0..n {
            for (s, v) in sums.iter_mut().zip(law.sample(&mut rng)) {
                *s += v;
            }
        }
        for (j, s) in sums.iter().enumerate() {
            let se = (m.cov[(j, j)] / n as f64).sqrt();
            let got = s / n as f64;
            if (got - m.mean[j]).abs() > 4.0 * se {
                return Err(format!("{law:?}[{j}]: {got} vs {}", m.mean[j]));
            }
        }
    }
    Ok(())
}

/// A random admissible spec with one realization of its generating variable.
fn spec_and_realization() -> impl Strategy<Value = (RandomMeanSpec, Vec<f64>)> {
    let mixture = (closed_mean2(), closed_mean2(), 0.05f64..0.95, any::<bool>())
        .prop_filter_map("means undefined on [0.1, 3]", |(a, b, q, first)| {
            let spec = RandomMeanSpec::DiscreteMixture {
                dist: Law::Scalar(ScalarDist::Bernoulli { q }),
                means: vec![a, b],
                interval: Interval::new(0.1, 3.0).unwrap(),
                p: 2,
            };
            spec.validate().ok()?;
            Some((spec, vec![if first { 0.0 } else { 1.0 }]))
        });
    let holder = (-3.0f64..4.0, 0.001f64..0.999, positive_interval()).prop_map(|(a, l, i)| {
        let spec = RandomMeanSpec::RandomHolder {
            alpha0: a,
            lambda_dist: ScalarDist::Uniform01,
            interval: i,
        };
        (spec, vec![l])
    });
    let weighted = (2usize..=3, interval()).prop_flat_map(|(p, i)| {
        simplex(p).prop_map(move |w| {
            let spec = RandomMeanSpec::WeightedArithmetic {
                weight_dist: Law::Vector(VectorDist::SimplexUniform { dim: p - 1 }),
                interval: i,
                p,
            };
            (spec, w[..p - 1].to_vec())
        })
    });
    let power = (0.0f64..=1.0, interval()).prop_map(|(y, i)| {
        let spec = RandomMeanSpec::WeightedPower {
            exponent_dist: ScalarDist::Uniform01,
            interval: i,
        };
        (spec, vec![y])
    });
    prop_oneof![mixture, holder, weighted, power]
}

pub fn kernel_internality() -> Result<(), String> {
    run(CASES, spec_and_realization(), |(spec, y)| {
        let m = lib(spec.realize(&y))?;
        let g = lib(spec.grid(21))?;
        let viol = lib(internality_violation(&m, &g))?;
        ensure(viol == 0.0, || format!("violation {viol}"))
    })
}

pub fn closure_under_averaging() -> Result<(), String> {
    run(CASES, (spec_and_realization(), any::<u64>(), 1usize..30), |((spec, _), seed, n)| {
        prop_assume!(spec.is_arithmetic_family());
        let mut rng = RngStream::new(seed, 0);
        let draws: Vec<MeanExpr> = (0..n).map(|_| spec.draw(&mut rng)).collect::<Result<_, _>>()
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        let avg = lib(running_average(&spec, &draws))?;
        let g = lib(spec.grid(if spec.p() == 3 { 9 } else { 21 }))?;
        let viol = lib(internality_violation(&avg, &g))?;
        ensure(viol == 0.0, || format!("violation {viol}"))
    })
}

pub fn exponent_sum_identity() -> Result<(), String> {
    let strat = (prop::collection::vec(0.0f64..=1.0, 1..=50), positive_interval());
    run(CASES, strat, |(ys, i)| {
        let spec = RandomMeanSpec::WeightedPower {
            exponent_dist: ScalarDist::Uniform01,
            interval: i,
        };
        let sbar = lib(running_geometric(&spec, &ys))?;
        let g = lib(GridSpec::new(i, 2, 6))?;
        let n = ys.len() as f64;
        for x in g.nodes() {
            let product: f64 = ys.iter().map(|y| x[0].powf(*y) * x[1].powf(1.0 - y)).product();
            let literal = product.powf(1.0 / n);
            let got = lib(sbar.eval(&x))?;
            ensure(rel_close(got, literal, 1e-12), || format!("{got} vs {literal} at {x:?}"))?;
        }
        Ok(())
    })
}

pub fn atom_frequencies() -> Result<(), String> {
    let probs = [0.2, 0.5, 0.3];
    let spec = RandomMeanSpec::DiscreteMixture {
        dist: Law::Scalar(ScalarDist::FiniteDiscrete {
            atoms: vec![0.0, 1.0, 2.0],
            probs: probs.to_vec(),
        }),
        means: vec![
            MeanExpr::arithmetic(2),
            MeanExpr::geometric(2),
            MeanExpr::LogarithmicMean,
        ],
        interval: Interval::unit(),
        p: 2,
    };
    let n = 100_000;
    let mut rng = RngStream::new(3, 0);
    let mut counts = [0usize; 3];
    for _ in 0..n {
        let m = spec.draw(&mut rng).map_err(|e| e.to_string())?;
        let i = match m {
            MeanExpr::ArithmeticWeighted { .. } => 0,
            MeanExpr::GeometricWeighted { .. } => 1,
            _ => 2,
        };
        counts[i] += 1;
    }
    for (c, p) in counts.iter().zip(probs) {
        let f = *c as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        if (f - p).abs() > 4.0 * se {
            return Err(format!("frequency {f} vs {p}"));
        }
    }
    Ok(())
}

/// The random Hölder specs whose expectation has a closed form, on `interval`.
pub fn closed_form_holder_specs(interval: Interval) -> Vec<RandomMeanSpec> {
    let mut out = Vec::new();
    for d in [ScalarDist::Uniform01, ScalarDist::TriangularDensity] {
        for a in [0.0, 1.0, 2.0] {
            out.push(RandomMeanSpec::RandomHolder {
                alpha0: a,
                lambda_dist: d.clone(),
                interval,
            });
        }
    }
    for d in [ScalarDist::TruncatedExponential, ScalarDist::SineDensity] {
        out.push(RandomMeanSpec::RandomHolder {
            alpha0: 0.0,
            lambda_dist: d,
            interval,
        });
    }
    out
}

/// Every spec family with a closed-form expectation, on `interval`.
pub fn closed_form_specs(interval: Interval) -> Vec<RandomMeanSpec> {
    let mut out = closed_form_holder_specs(interval);
    out.push(RandomMeanSpec::DiscreteMixture {
        dist: Law::Scalar(ScalarDist::Bernoulli { q: 0.3 }),
        means: vec![MeanExpr::arithmetic(2), MeanExpr::geometric(2)],
        interval,
        p: 2,
    });
    out.push(RandomMeanSpec::WeightedArithmetic {
        weight_dist: Law::Scalar(ScalarDist::Uniform01),
        interval,
        p: 2,
    });
    out.push(RandomMeanSpec::WeightedArithmetic {
        weight_dist: Law::Vector(VectorDist::SimplexUniform { dim: 2 }),
        interval,
        p: 3,
    });
    if interval.positive() {
        out.push(RandomMeanSpec::WeightedPower {
            exponent_dist: ScalarDist::SineDensity,
            interval,
        });
    }
    out
}

/// Largest node deviation between closed form and 64-node quadrature.
pub fn quadrature_deviation(spec: &RandomMeanSpec, g: &GridSpec) -> Result<f64, String> {
    let closed = closed_form_expectation(spec)
        .map_err(|e| e.to_string())?
        .ok_or_else(|| format!("no closed form for {spec:?}"))?;
    let quad = quadrature_expectation(spec, g, 64).map_err(|e| e.to_string())?;
    let a = tabulate(&closed.mean, g).map_err(|e| e.to_string())?;
    let b = tabulate(&quad.mean, g).map_err(|e| e.to_string())?;
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

pub fn expectation_oracles() -> Result<(), String> {
    let i = Interval::new(0.1, 2.0).unwrap();
    let g = GridSpec::new(i, 2, 51).unwrap();
    for spec in closed_form_holder_specs(i) {
        let d = quadrature_deviation(&spec, &g)?;
        if d > 1e-8 {
            return Err(format!("{spec:?}: quadrature deviation {d}"));
        }
    }
    // Monte Carlo: each node within 4 of its own standard errors. The power
    // family's closed form is the geometric reference mean, not the arithmetic
    // expectation, so its Monte Carlo estimate is checked against quadrature.
    let n = 100_000;
    let g = GridSpec::new(i, 2, 5).unwrap();
    for (k, spec) in closed_form_specs(i).into_iter().filter(|s| s.p() == 2).enumerate() {
        let target = if matches!(spec, RandomMeanSpec::WeightedPower { .. }) {
            quadrature_expectation(&spec, &g, 64).unwrap().mean
        } else {
            closed_form_expectation(&spec).unwrap().unwrap().mean
        };
        let mc = monte_carlo_expectation(&spec, n, &mut RngStream::new(9, k as u64), &g)
            .map_err(|e| e.to_string())?;
        let mut rng = RngStream::new(9, k as u64);
        let draws: Vec<MeanExpr> = (0..n).map(|_| spec.draw(&mut rng).unwrap()).collect();
        let got = tabulate(&mc.mean, &g).unwrap();
        for (x, v) in g.nodes().iter().zip(got) {
            let vals: Vec<f64> = draws.iter().map(|d| d.eval(x).unwrap()).collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            let exact = target.eval(x).unwrap();
            if (v - exact).abs() > 4.0 * se + 1e-12 {
                return Err(format!("{spec:?} at {x:?}: MC {v}, exact {exact}, se {se}"));
            }
        }
    }
    // A degenerate exponent makes the Monte Carlo estimate exact.
    let spec = RandomMeanSpec::WeightedPower {
        exponent_dist: ScalarDist::Dirac { a: 0.3 },
        interval: i,
    };
    let closed = closed_form_expectation(&spec).unwrap().unwrap().mean;
    let mc = monte_carlo_expectation(&spec, 17, &mut RngStream::new(9, 99), &g)
        .map_err(|e| e.to_string())?;
    if tabulate(&mc.mean, &g).unwrap() != tabulate(&closed, &g).unwrap() {
        return Err("Dirac power family: Monte Carlo differs from closed form".into());
    }
    Ok(())
}

pub fn expectation_internality() -> Result<(), String> {
    for i in [Interval::unit(), Interval::new(0.0, 2.0).unwrap(), Interval::new(0.1, 2.0).unwrap()] {
        for spec in closed_form_specs(i) {
            let r = closed_form_expectation(&spec).unwrap().unwrap();
            let g = spec.grid(if spec.p() == 3 { 31 } else { 101 }).unwrap();
            let v = check_is_mean(&r, &g).map_err(|e| e.to_string())?;
            if v != 0.0 {
                return Err(format!("{spec:?} on {i}: violation {v}"));
            }
        }
    }
    Ok(())
}

pub fn expectation_idempotence() -> Result<(), String> {
    let i = Interval::new(1e-6, 50.0).unwrap();
    let means: Vec<MeanExpr> = closed_form_specs(i)
        .iter()
        .map(|s| closed_form_expectation(s).unwrap().unwrap().mean)
        .collect();
    run(CASES, (0usize..means.len(), 1e-6f64..50.0), |(k, t)| {
        let m = &means[k];
        let x = vec![t; m.arity()];
        let v = lib(m.eval(&x))?;
        ensure(rel_close(v, t, 1e-12), || format!("{m:?}: E(M)(t, t) = {v}, t = {t}"))
    })
}

pub fn scaled_log_identity() -> Result<(), String> {
    run(CASES, (1e-3f64..1e3, 1e-3f64..1e3), |(x1, x2)| {
        prop_assume!((x1 / (E * x2)).ln().abs() > 1e-3);
        let got = lib(MeanExpr::ScaledLogMean.eval(&[x1, x2]))?;
        let (a, b) = (x1 / (E - 1.0), E * x2 / (E - 1.0));
        let l = (a - b) / (a / b).ln();
        ensure(rel_close(got, l, 1e-12), || format!("{got} vs {l}"))
    })
}

pub fn degenerate_collapse() -> Result<(), String> {
    let strat = (closed_mean2(), 0.05f64..0.95, any::<u64>(), 1usize..50);
    run(CASES, strat, |(m, q, seed, n)| {
        let i = Interval::new(0.5, 2.0).unwrap();
        prop_assume!(m.validate_on(&i, 2).is_ok());
        let spec = RandomMeanSpec::DiscreteMixture {
            dist: Law::Scalar(ScalarDist::Bernoulli { q }),
            means: vec![m.clone(), m.clone()],
            interval: i,
            p: 2,
        };
        let cfg = SimConfig {
            seed,
            grid: lib(GridSpec::new(i, 2, 5))?,
            n,
            replicates: 3,
            n_schedule: Some(vec![n, n + 7]),
        };
        let s = lib(clt_sample(&spec, &cfg))?;
        ensure(s.values().iter().all(|v| *v == 0.0), || format!("{:?}", s.values()))?;
        let t = lib(slln_trajectory(&spec, &cfg))?;
        ensure(t.values.iter().flatten().all(|v| *v == 0.0), || "kappa != 0".into())?;
        let e = closed_form_expectation(&spec).unwrap().unwrap().mean;
        let k = lib(kappa(&spec, &m, &e, &cfg.grid))?;
        ensure(k == 0.0, || format!("kappa {k}"))
    })
}

pub fn sup_ratio_identity() -> Result<(), String> {
    let strat = (
        prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0f64..=1.0], 1..200),
        positive_interval(),
    );
    run(CASES, strat, |(ys, i)| {
        let spec = RandomMeanSpec::WeightedPower {
            exponent_dist: ScalarDist::Bernoulli { q: 0.5 },
            interval: i,
        };
        let g = lib(GridSpec::new(i, 2, 7))?;
        let got = lib(power_sup_ratio(&spec, &ys, &g))?;
        let d = ys.iter().sum::<f64>() / ys.len() as f64 - 0.5;
        let want = (i.hi() / i.lo()).powf(d.abs());
        ensure(rel_close(got, want, 1e-10), || format!("{got} vs {want}"))
    })
}

pub fn sup_abs_inner_homogeneity() -> Result<(), String> {
    let strat = (
        prop::collection::vec(closed_mean2(), 2..=4),
        prop::collection::vec(-3.0f64..3.0, 4),
        -20i32..20,
        0.01f64..100.0,
        positive_interval(),
    );
    run(CASES, strat, |(ms, z, k, c, i)| {
        let z = &z[..ms.len()];
        let g = lib(GridSpec::new(i, 2, 5))?;
        let base = lib(sup_abs_inner(z, &ms, &g))?;
        let two = 2f64.powi(k);
        let z2: Vec<f64> = z.iter().map(|v| v * two).collect();
        let scaled = lib(sup_abs_inner(&z2, &ms, &g))?;
        ensure(scaled == two * base, || format!("2^{k}: {scaled} vs {}", two * base))?;
        let zc: Vec<f64> = z.iter().map(|v| v * c).collect();
        let sc = lib(sup_abs_inner(&zc, &ms, &g))?;
        ensure(rel_close(sc, c * base, 1e-13), || format!("{c}: {sc} vs {}", c * base))
    })
}

pub fn simulation_reproducibility() -> Result<(), String> {
    let strat = (any::<u64>(), 0.05f64..0.95, 2usize..6, 1usize..40);
    run(CASES, strat, |(seed, q, r, n)| {
        let spec = RandomMeanSpec::DiscreteMixture {
            dist: Law::Scalar(ScalarDist::Bernoulli { q }),
            means: vec![MeanExpr::arithmetic(2), MeanExpr::geometric(2)],
            interval: Interval::unit(),
            p: 2,
        };
        let cfg = SimConfig {
            seed,
            grid: lib(GridSpec::new(Interval::unit(), 2, 5))?,
            n,
            replicates: r,
            n_schedule: None,
        };
        let bits = |s: &random_means::EmpiricalSample| -> Vec<u64> {
            s.values().iter().map(|v| v.to_bits()).collect()
        };
        let (a, b) = (lib(clt_sample(&spec, &cfg))?, lib(clt_sample(&spec, &cfg))?);
        ensure(bits(&a) == bits(&b), || "clt samples differ".into())?;
        let (a, b) = (
            lib(random_means::limit_law_sample(&spec, &cfg))?,
            lib(random_means::limit_law_sample(&spec, &cfg))?,
        );
        ensure(bits(&a) == bits(&b), || "limit samples differ".into())
    })
}
