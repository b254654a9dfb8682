//! Declarative experiments: JSON configs, one runner per kind, reports and artifacts.

mod counter;
mod diag;
mod flow;
mod osc;
mod report;

pub use report::{AssertionResult, Outcome, Report, Series, Table};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("malformed config at line {line}, column {column}: {msg}")]
    Json { line: usize, column: usize, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("{module}: {msg}")]
    Numerical { module: &'static str, msg: String },
    #[error("{path}: {err}")]
    Io { path: PathBuf, err: std::io::Error },
}

impl ExperimentError {
    /// 2 for anything wrong with the input, 3 for failures inside a solver.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Json { .. } | ExperimentError::Config(_) | ExperimentError::Io { .. } => 2,
            ExperimentError::Numerical { .. } => 3,
        }
    }
}

pub(crate) fn config_err(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Config(e.to_string())
}

pub(crate) fn numerical(module: &'static str) -> impl Fn(String) -> ExperimentError {
    move |msg| ExperimentError::Numerical { module, msg }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    RepeatedDiag,
    ExactFinite,
    ExactInfinity,
    ExactSingular,
    GapCr,
    OscQuadstat,
    OscGevrey,
    OscCr,
    Counterexample,
    Resonance,
    Manifold,
}

impl Kind {
    pub const ALL: [Kind; 11] = [
        Kind::RepeatedDiag,
        Kind::ExactFinite,
        Kind::ExactInfinity,
        Kind::ExactSingular,
        Kind::GapCr,
        Kind::OscQuadstat,
        Kind::OscGevrey,
        Kind::OscCr,
        Kind::Counterexample,
        Kind::Resonance,
        Kind::Manifold,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::RepeatedDiag => "repeated_diag",
            Kind::ExactFinite => "exact_finite",
            Kind::ExactInfinity => "exact_infinity",
            Kind::ExactSingular => "exact_singular",
            Kind::GapCr => "gap_cr",
            Kind::OscQuadstat => "osc_quadstat",
            Kind::OscGevrey => "osc_gevrey",
            Kind::OscCr => "osc_cr",
            Kind::Counterexample => "counterexample",
            Kind::Resonance => "resonance",
            Kind::Manifold => "manifold",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
    /// |actual − value| ≤ tol
    Approx,
}

/// A check on one reported metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertion {
    pub metric: String,
    pub op: Op,
    pub value: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

/// One experiment as read from disk. `params` holds the kind-specific settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub name: Option<String>,
    /// Recorded for reproducibility; no runner draws random numbers.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: Value,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
    /// Default output directory when none is given on the command line.
    #[serde(default)]
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json_str(src: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(src).map_err(|e| ExperimentError::Json { line: e.line(), column: e.column(), msg: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let src = std::fs::read_to_string(path).map_err(|err| ExperimentError::Io { path: path.to_path_buf(), err })?;
        Self::from_json_str(&src)
    }
}

/// Kind-specific settings with every default filled in.
#[derive(Debug, Clone)]
pub enum Job {
    RepeatedDiag(diag::RepeatedParams),
    ExactFinite(diag::FiniteParams),
    ExactInfinity(diag::InfinityParams),
    ExactSingular(diag::SingularParams),
    GapCr(diag::GapParams),
    OscQuadstat(osc::QuadstatParams),
    OscGevrey(osc::GevreyParams),
    OscCr(osc::CrParams),
    Counterexample(counter::CounterexParams),
    Resonance(counter::ResonanceParams),
    Manifold(flow::ManifoldParams),
}

fn typed<T: serde::de::DeserializeOwned>(kind: Kind, params: &Value) -> Result<T, ExperimentError> {
    let v = if params.is_null() { Value::Object(Default::default()) } else { params.clone() };
    serde_json::from_value(v).map_err(|e| ExperimentError::Config(format!("{} params: {e}", kind.name())))
}

/// A validated config ready to run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub job: Job,
}

impl Prepared {
    /// Parses the params, materializes defaults into `config.params` and builds every
    /// system, symbol and expression once so that schema errors surface before any solve.
    pub fn new(mut config: ExperimentConfig) -> Result<Self, ExperimentError> {
        let k = config.kind;
        let p = &config.params;
        let mut job = match k {
            Kind::RepeatedDiag => Job::RepeatedDiag(typed(k, p)?),
            Kind::ExactFinite => Job::ExactFinite(typed(k, p)?),
            Kind::ExactInfinity => Job::ExactInfinity(typed(k, p)?),
            Kind::ExactSingular => Job::ExactSingular(typed(k, p)?),
            Kind::GapCr => Job::GapCr(typed(k, p)?),
            Kind::OscQuadstat => Job::OscQuadstat(typed(k, p)?),
            Kind::OscGevrey => Job::OscGevrey(typed(k, p)?),
            Kind::OscCr => Job::OscCr(typed(k, p)?),
            Kind::Counterexample => Job::Counterexample(typed(k, p)?),
            Kind::Resonance => Job::Resonance(typed(k, p)?),
            Kind::Manifold => Job::Manifold(typed(k, p)?),
        };
        if let Job::Resonance(p) = &mut job {
            p.materialize();
        }
        job.check()?;
        for a in &config.assertions {
            check_assertion(a)?;
        }
        config.params = job.params_json();
        if config.name.is_none() {
            config.name = Some(k.name().to_string());
        }
        Ok(Prepared { config, job })
    }

    pub fn from_path(path: &Path) -> Result<Self, ExperimentError> {
        Self::new(ExperimentConfig::load(path)?)
    }

    /// Runs the pipeline and evaluates the assertions; nothing is written.
    pub fn run(&self) -> Result<(Report, Outcome), ExperimentError> {
        let start = Instant::now();
        log::info!("running {} ({})", self.config.name.as_deref().unwrap_or(""), self.config.kind.name());
        let outcome = self.job.run()?;
        let assertions = self.config.assertions.iter().map(|a| evaluate(a, &outcome)).collect::<Result<Vec<_>, _>>()?;
        let passed = assertions.iter().all(|a| a.passed);
        let report = Report {
            config: serde_json::to_value(&self.config).expect("config serializes"),
            metrics: outcome.metrics.clone(),
            assertions,
            passed,
            runtime_seconds: start.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        Ok((report, outcome))
    }
}

impl Job {
    fn check(&self) -> Result<(), ExperimentError> {
        match self {
            Job::RepeatedDiag(p) => p.check(),
            Job::ExactFinite(p) => p.check(),
            Job::ExactInfinity(p) => p.check(),
            Job::ExactSingular(p) => p.check(),
            Job::GapCr(p) => p.check(),
            Job::OscQuadstat(p) => p.check(),
            Job::OscGevrey(p) => p.check(),
            Job::OscCr(p) => p.check(),
            Job::Counterexample(p) => p.check(),
            Job::Resonance(p) => p.check(),
            Job::Manifold(p) => p.check(),
        }
    }

    fn run(&self) -> Result<Outcome, ExperimentError> {
        match self {
            Job::RepeatedDiag(p) => p.run(),
            Job::ExactFinite(p) => p.run(),
            Job::ExactInfinity(p) => p.run(),
            Job::ExactSingular(p) => p.run(),
            Job::GapCr(p) => p.run(),
            Job::OscQuadstat(p) => p.run(),
            Job::OscGevrey(p) => p.run(),
            Job::OscCr(p) => p.run(),
            Job::Counterexample(p) => p.run(),
            Job::Resonance(p) => p.run(),
            Job::Manifold(p) => p.run(),
        }
    }

    fn params_json(&self) -> Value {
        let v = match self {
            Job::RepeatedDiag(p) => serde_json::to_value(p),
            Job::ExactFinite(p) => serde_json::to_value(p),
            Job::ExactInfinity(p) => serde_json::to_value(p),
            Job::ExactSingular(p) => serde_json::to_value(p),
            Job::GapCr(p) => serde_json::to_value(p),
            Job::OscQuadstat(p) => serde_json::to_value(p),
            Job::OscGevrey(p) => serde_json::to_value(p),
            Job::OscCr(p) => serde_json::to_value(p),
            Job::Counterexample(p) => serde_json::to_value(p),
            Job::Resonance(p) => serde_json::to_value(p),
            Job::Manifold(p) => serde_json::to_value(p),
        };
        v.expect("params serialize")
    }
}

fn check_assertion(a: &Assertion) -> Result<(), ExperimentError> {
    let bad = |m: &str| ExperimentError::Config(format!("assertion on `{}`: {m}", a.metric));
    match a.op {
        Op::Eq => {
            if !(a.value.is_boolean() || a.value.is_number()) {
                return Err(bad("`eq` needs a boolean or number"));
            }
        }
        Op::Approx => {
            if !a.value.is_number() {
                return Err(bad("`approx` needs a number"));
            }
            match a.tol {
                Some(t) if t >= 0.0 => {}
                _ => return Err(bad("`approx` needs a nonnegative `tol`")),
            }
        }
        _ => {
            if !a.value.is_number() {
                return Err(bad("comparison needs a number"));
            }
        }
    }
    Ok(())
}

fn evaluate(a: &Assertion, out: &Outcome) -> Result<AssertionResult, ExperimentError> {
    let actual = out
        .metrics
        .get(&a.metric)
        .cloned()
        .ok_or_else(|| ExperimentError::Config(format!("assertion refers to unknown metric `{}` (available: {})", a.metric, out.metric_names().join(", "))))?;
    let passed = match a.op {
        Op::Eq => match (&actual, &a.value) {
            (Value::Bool(x), Value::Bool(y)) => x == y,
            (x, y) => x.as_f64().is_some() && x.as_f64() == y.as_f64(),
        },
        op => match (actual.as_f64(), a.value.as_f64()) {
            (Some(x), Some(y)) => match op {
                Op::Le => x <= y,
                Op::Lt => x < y,
                Op::Ge => x >= y,
                Op::Gt => x > y,
                Op::Approx => (x - y).abs() <= a.tol.unwrap_or(0.0),
                Op::Eq => unreachable!(),
            },
            _ => false,
        },
    };
    Ok(AssertionResult { metric: a.metric.clone(), op: a.op, value: a.value.clone(), tol: a.tol, actual, passed })
}

/// Runs a config file and writes the report and artifacts into `out`.
pub fn run_to_dir(prepared: &Prepared, out: &Path) -> Result<Report, ExperimentError> {
    let (report, outcome) = prepared.run()?;
    report::write_all(out, &report, &outcome)?;
    Ok(report)
}

pub(crate) fn check_h_grid(hs: &[f64], what: &str) -> Result<(), ExperimentError> {
    if hs.is_empty() {
        return Err(ExperimentError::Config(format!("{what} is empty")));
    }
    if let Some(h) = hs.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
        return Err(ExperimentError::Config(format!("{what} contains {h}; every h must be positive")));
    }
    Ok(())
}
