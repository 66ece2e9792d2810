use random_means::limit_sim::LIMIT_STREAM_OFFSET;
use random_means::sup::tabulate;
use random_means::{
    bernoulli_closed_form_limit_sample, check_is_mean, closed_form_expectation, clt_sample,
    half_normal_cdf, half_normal_limit_scale, ks_against_cdf, ks_distance, limit_law_sample,
    monte_carlo_expectation, power_limit_sample, quadrature_expectation, rho, slln_trajectory,
    EmpiricalSample, Error, RandomMeanSpec, Result, RngStream,
};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{Command, ExperimentConfig, ExpectationMethod, Overrides};

/// KS threshold for one-sample comparisons and the sample-path two-sample test.
pub const KS_THRESHOLD: f64 = 0.05;
/// KS threshold for the generic vs closed-form limit sampler comparison.
pub const KS_LIMIT_EQUIVALENCE_THRESHOLD: f64 = 0.04;

/// A table cell: integers and text verbatim, floats with 17 significant digits.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    #[serde(skip)]
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Everything a command produces, computed before anything touches the disk.
pub struct Outcome {
    pub tables: Vec<Table>,
    pub summary: Map<String, Value>,
    /// `None` when the command makes no statistical claim.
    pub pass: Option<bool>,
}

fn sample_table(name: &str, s: &EmpiricalSample, n: Cell) -> Table {
    let mut t = Table::new(name, &["replicate", "n", "value"]);
    for (r, v) in s.values().iter().enumerate() {
        t.rows.push(vec![Cell::Int(r as u64), n.clone(), Cell::Float(*v)]);
    }
    t
}

fn sample_summary(s: &EmpiricalSample) -> Value {
    json!({
        "mean": s.mean(),
        "std_dev": s.std_dev(),
        "median": s.median(),
        "streams": [s.streams.0, s.streams.1],
    })
}

fn require_spec(cfg: &ExperimentConfig) -> Result<&RandomMeanSpec> {
    let spec = cfg
        .spec
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter(format!("{} needs a spec", cfg.command.name())))?;
    spec.validate()?;
    Ok(spec)
}

pub fn run(cfg: &ExperimentConfig, overrides: &Overrides) -> Result<Outcome> {
    cfg.sim_config().validate()?;
    let mut out = match cfg.command {
        Command::Rho => run_rho(cfg)?,
        Command::Expectation => run_expectation(cfg)?,
        Command::Slln => run_slln(cfg)?,
        Command::Clt => run_clt(cfg)?,
        Command::LimitLaw => run_limit_law(cfg)?,
        Command::PowerLimit => run_power_limit(cfg)?,
    };
    let mut summary = Map::new();
    summary.insert("command".into(), json!(cfg.command.name()));
    summary.insert("seed".into(), json!(cfg.sim.seed));
    summary.insert("grid".into(), serde_json::to_value(&cfg.sim.grid)?);
    summary.insert("n".into(), json!(cfg.sim.n));
    summary.insert("R".into(), json!(cfg.sim.replicates));
    if let Some(s) = &cfg.sim.n_schedule {
        summary.insert("n_schedule".into(), json!(s));
    }
    summary.insert("overrides".into(), serde_json::to_value(overrides)?);
    summary.append(&mut out.summary);
    if let Some(p) = out.pass {
        summary.insert("pass".into(), json!(p));
    }
    out.summary = summary;
    Ok(out)
}

fn run_rho(cfg: &ExperimentConfig) -> Result<Outcome> {
    let means = cfg
        .means
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("rho needs two means".into()))?;
    if means.len() != 2 {
        return Err(Error::InvalidParameter(format!(
            "rho needs exactly two means, got {}",
            means.len()
        )));
    }
    for m in means {
        m.check()?;
    }
    let g = &cfg.sim.grid;
    let value = rho(&means[0], &means[1], g)?;
    let mut t = Table::new("rho", &["points_per_axis", "rho"]);
    t.rows.push(vec![Cell::Int(g.points_per_axis() as u64), Cell::Float(value)]);
    let mut summary = Map::new();
    summary.insert("rho".into(), json!(value));
    Ok(Outcome {
        tables: vec![t],
        summary,
        pass: None,
    })
}

fn run_expectation(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = require_spec(cfg)?;
    let g = &cfg.sim.grid;
    let closed = closed_form_expectation(spec)?;
    let result = match cfg.method {
        ExpectationMethod::ClosedForm => closed.clone().ok_or_else(|| {
            Error::Unsupported(
                "no closed form for this spec; use method quadrature or monte_carlo".into(),
            )
        })?,
        ExpectationMethod::Quadrature => quadrature_expectation(spec, g, cfg.quadrature_nodes)?,
        ExpectationMethod::MonteCarlo => {
            let mut rng = RngStream::new(cfg.sim.seed, 0);
            monte_carlo_expectation(spec, cfg.sim.n, &mut rng, g)?
        }
    };
    let values = tabulate(&result.mean, g)?;
    let violation = check_is_mean(&result, g)?;
    let mut summary = Map::new();
    summary.insert("method".into(), serde_json::to_value(result.method)?);
    summary.insert("mean_kind".into(), json!(result.mean.kind_name()));
    summary.insert("error_estimate".into(), json!(result.error_estimate));
    summary.insert("internality_violation".into(), json!(violation));
    if let Some(c) = &closed {
        let exact = tabulate(&c.mean, g)?;
        let dev = exact
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        summary.insert("closed_form_kind".into(), json!(c.mean.kind_name()));
        summary.insert("max_deviation_from_closed_form".into(), json!(dev));
    }
    if cfg.method == ExpectationMethod::Quadrature {
        summary.insert("quadrature_nodes".into(), json!(cfg.quadrature_nodes));
    }
    let mut t = Table::new("expectation", &[]);
    t.columns = (1..=g.p()).map(|i| format!("x{i}")).collect();
    t.columns.push("value".into());
    for (x, v) in g.nodes().iter().zip(&values) {
        let mut row: Vec<Cell> = x.iter().map(|c| Cell::Float(*c)).collect();
        row.push(Cell::Float(*v));
        t.rows.push(row);
    }
    Ok(Outcome {
        tables: vec![t],
        summary,
        pass: None,
    })
}

fn run_slln(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = require_spec(cfg)?;
    let traj = slln_trajectory(spec, &cfg.sim_config())?;
    let mut t = Table::new("slln", &["replicate", "n", "value"]);
    for (r, row) in traj.values.iter().enumerate() {
        for (n, v) in traj.schedule.iter().zip(row) {
            t.rows.push(vec![Cell::Int(r as u64), Cell::Int(*n as u64), Cell::Float(*v)]);
        }
    }
    let medians: Vec<f64> = (0..traj.schedule.len()).map(|i| traj.median_at(i)).collect();
    let last = medians.len() - 1;
    let pass = medians[last] < medians[0];
    let mut summary = Map::new();
    summary.insert(
        "statistic".into(),
        json!(if spec.is_arithmetic_family() {
            "kappa_n"
        } else {
            "abs(mean_exponent - expected_exponent)"
        }),
    );
    summary.insert("medians".into(), json!(medians));
    summary.insert(
        "check".into(),
        json!("median at the last n is strictly below the median at the first n"),
    );
    Ok(Outcome {
        tables: vec![t],
        summary,
        pass: Some(pass),
    })
}

fn run_clt(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = require_spec(cfg)?;
    let sim = cfg.sim_config();
    let sample = clt_sample(spec, &sim)?;
    let mut tables = vec![sample_table("clt", &sample, Cell::Int(cfg.sim.n as u64))];
    let mut summary = Map::new();
    summary.insert("statistic".into(), json!("sqrt(n) * kappa_n"));
    summary.insert("sample".into(), sample_summary(&sample));
    let ks = match half_normal_limit_scale(spec, &cfg.sim.grid)? {
        Some(sigma) => {
            summary.insert("ks_method".into(), json!("one_sample_half_normal"));
            summary.insert("limit_sigma".into(), json!(sigma));
            ks_against_cdf(&sample, |x| half_normal_cdf(sigma, x))
        }
        None => {
            let limit = limit_law_sample(spec, &sim)?;
            summary.insert("ks_method".into(), json!("two_sample_limit_law"));
            summary.insert("limit".into(), sample_summary(&limit));
            tables.push(sample_table("limit", &limit, Cell::Text("limit".into())));
            ks_distance(&sample, &limit)
        }
    };
    let pass = ks <= KS_THRESHOLD;
    summary.insert("ks".into(), json!(ks));
    summary.insert("threshold".into(), json!(KS_THRESHOLD));
    Ok(Outcome {
        tables,
        summary,
        pass: Some(pass),
    })
}

fn run_limit_law(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = require_spec(cfg)?;
    let sim = cfg.sim_config();
    let sample = limit_law_sample(spec, &sim)?;
    let mut tables = vec![sample_table("limit", &sample, Cell::Text("limit".into()))];
    let mut summary = Map::new();
    summary.insert("sample".into(), sample_summary(&sample));
    summary.insert("limit_streams_offset".into(), json!(LIMIT_STREAM_OFFSET));
    let mut pass = None;
    if let Ok(closed) = bernoulli_closed_form_limit_sample(spec, &sim) {
        let ks = ks_distance(&sample, &closed);
        summary.insert("ks_method".into(), json!("two_sample_generic_vs_closed_form"));
        summary.insert("closed_form".into(), sample_summary(&closed));
        summary.insert("ks".into(), json!(ks));
        summary.insert("threshold".into(), json!(KS_LIMIT_EQUIVALENCE_THRESHOLD));
        tables.push(sample_table("closed_form", &closed, Cell::Text("limit".into())));
        pass = Some(ks <= KS_LIMIT_EQUIVALENCE_THRESHOLD);
    } else if let Some(sigma) = half_normal_limit_scale(spec, &cfg.sim.grid)? {
        if spec.is_arithmetic_family() {
            let ks = ks_against_cdf(&sample, |x| half_normal_cdf(sigma, x));
            summary.insert("ks_method".into(), json!("one_sample_half_normal"));
            summary.insert("limit_sigma".into(), json!(sigma));
            summary.insert("ks".into(), json!(ks));
            summary.insert("threshold".into(), json!(KS_THRESHOLD));
            pass = Some(ks <= KS_THRESHOLD);
        }
    }
    Ok(Outcome {
        tables,
        summary,
        pass,
    })
}

fn run_power_limit(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = require_spec(cfg)?;
    let sim = cfg.sim_config();
    let pl = power_limit_sample(spec, &sim)?;
    let sigma = half_normal_limit_scale(spec, &cfg.sim.grid)?
        .ok_or_else(|| Error::Unsupported("power limit needs a positive interval".into()))?;
    let logs = pl.empirical.map(f64::ln)?;
    let ks = ks_against_cdf(&logs, |x| half_normal_cdf(sigma, x));
    let ks_two = ks_distance(&pl.empirical, &pl.theoretical);
    let pass = ks <= KS_THRESHOLD;
    let mut summary = Map::new();
    summary.insert("statistic".into(), json!("sup_ratio ^ sqrt(n)"));
    summary.insert("empirical".into(), sample_summary(&pl.empirical));
    summary.insert("theoretical".into(), sample_summary(&pl.theoretical));
    summary.insert("ks_method".into(), json!("one_sample_log_half_normal"));
    summary.insert("log_limit_sigma".into(), json!(sigma));
    summary.insert("ks".into(), json!(ks));
    summary.insert("ks_two_sample_empirical_vs_theoretical".into(), json!(ks_two));
    summary.insert("threshold".into(), json!(KS_THRESHOLD));
    Ok(Outcome {
        tables: vec![
            sample_table("power_empirical", &pl.empirical, Cell::Int(cfg.sim.n as u64)),
            sample_table("power_theoretical", &pl.theoretical, Cell::Text("limit".into())),
        ],
        summary,
        pass: Some(pass),
    })
}
