use super::osc::symbol;
use super::report::fmt;
use super::{check_h_grid, config_err, numerical, ExperimentError, Outcome, Series, Table};
use crate::counterex::{boundedness_certificate, singular_resonance, triangular_check, CounterexError, TriangularSystem, DEFAULT_BOUND};
use crate::mexpr::complex_from_json;
use crate::num::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

fn d_theta() -> Value {
    Value::String("1".into())
}
fn d_p() -> u32 {
    1
}
fn d_grid() -> Vec<f64> {
    vec![0.1, 0.05, 0.025, 0.0125]
}
fn d_bound() -> f64 {
    DEFAULT_BOUND
}

fn counterex_err(e: CounterexError) -> ExperimentError {
    match e {
        CounterexError::Param(m) => ExperimentError::Config(m),
        e => numerical("counterex")(e.to_string()),
    }
}

/// The triangular system [[x+i, h^p θ], [0, −(x+i)]] on [−L, L] and its boundedness verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexParams {
    #[serde(default = "d_theta")]
    pub theta: Value,
    #[serde(default = "d_p")]
    pub p: u32,
    pub half_width: f64,
    /// Dyadic, at least 4 values.
    #[serde(default = "d_grid")]
    pub h_grid: Vec<f64>,
    #[serde(default = "d_bound")]
    pub bound: f64,
    /// Values of h at which the conjugation residual of T = (1, h^p α; 0, 1) is measured.
    #[serde(default)]
    pub triangular_check: Vec<f64>,
}

impl CounterexParams {
    fn system(&self) -> Result<TriangularSystem, ExperimentError> {
        TriangularSystem::new(symbol(&self.theta)?, self.p, self.half_width).map_err(counterex_err)
    }

    pub(crate) fn check(&self) -> Result<(), ExperimentError> {
        self.system()?;
        check_h_grid(&self.h_grid, "h_grid")?;
        if !self.triangular_check.is_empty() {
            check_h_grid(&self.triangular_check, "triangular_check")?;
        }
        if self.h_grid.len() < 4 {
            return Err(ExperimentError::Config(format!("h_grid needs at least 4 values, got {}", self.h_grid.len())));
        }
        Ok(())
    }

    pub(crate) fn run(&self) -> Result<Outcome, ExperimentError> {
        let ts = self.system()?;
        let v = boundedness_certificate(&ts, &self.h_grid, self.bound).map_err(counterex_err)?;
        let mut out = Outcome::default();
        out.metric("bounded", v.bounded);
        out.metric("unbounded", !v.bounded);
        out.metric("alpha_bounded", v.alpha_bounded);
        out.metric("consistent", v.consistent());
        out.metric("cancellation_limited", v.cancellation_limited);
        out.metric("class", v.class.clone());
        out.metric("sup_ratio_max", v.sup_ratio.iter().copied().fold(0.0, f64::max));
        out.metric("sup_alpha_max", v.sup_alpha.iter().copied().fold(0.0, f64::max));
        out.metric("sup_ratio_last", *v.sup_ratio.last().expect("nonempty grid"));
        out.metric("sup_alpha_last", *v.sup_alpha.last().expect("nonempty grid"));
        if let Some(g) = &v.growth {
            out.metric("growth_g", g.g);
            out.metric("growth_c", g.c);
            out.metric("growth_q", g.q);
            out.metric("growth_residual", g.residual);
        }
        if !self.triangular_check.is_empty() {
            let checks = self.triangular_check.par_iter().map(|h| triangular_check(&ts, *h)).collect::<Result<Vec<_>, _>>().map_err(counterex_err)?;
            out.metric("offdiag_residual_max", checks.iter().map(|c| c.offdiag_residual).fold(0.0, f64::max));
            let mut t = Table::new("triangular_check", &["h", "offdiag_residual", "sup_alpha", "sup_t", "sup_t_inv"]);
            for c in &checks {
                t.push(vec![fmt(c.h), fmt(c.offdiag_residual), fmt(c.sup_alpha), fmt(c.sup_t), fmt(c.sup_t_inv)]);
            }
            out.tables.push(t);
        }
        let mut t = Table::new("criterion", &["h", "x", "alpha_abs", "ratio"]);
        for r in &v.rows {
            t.push(vec![fmt(r.h), fmt(r.x), fmt(r.alpha_abs), fmt(r.ratio)]);
        }
        out.tables.push(t);
        out.series.push(Series::new("sup_alpha", "h", "sup_abs_alpha", v.h_grid.iter().copied().zip(v.sup_alpha.iter().copied()).collect()));
        out.series.push(Series::new("sup_ratio", "h", "sup_ratio", v.h_grid.iter().copied().zip(v.sup_ratio.iter().copied()).collect()));
        Ok(out)
    }
}

/// Formal series of h α' = α/z + φ(z) and its resonances jh = 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceParams {
    /// φ_0, φ_1, …
    pub phi: Vec<Value>,
    /// Defaults to h = 1/j for j = 1..=len(φ)+1.
    #[serde(default)]
    pub h_values: Vec<f64>,
}

impl ResonanceParams {
    fn coefficients(&self) -> Result<Vec<C64>, ExperimentError> {
        self.phi.iter().map(complex_from_json).collect::<Result<Vec<_>, _>>().map_err(config_err)
    }

    pub(crate) fn materialize(&mut self) {
        if self.h_values.is_empty() {
            self.h_values = (1..=self.phi.len() + 1).map(|j| 1.0 / j as f64).collect();
        }
    }

    pub(crate) fn check(&self) -> Result<(), ExperimentError> {
        self.coefficients()?;
        if !self.h_values.is_empty() {
            check_h_grid(&self.h_values, "h_values")?;
        }
        Ok(())
    }

    pub(crate) fn run(&self) -> Result<Outcome, ExperimentError> {
        let phi = self.coefficients()?;
        let reports: Vec<_> = self.h_values.iter().map(|h| singular_resonance(&phi, *h)).collect();
        let mut out = Outcome::default();
        let resonant: Vec<f64> = reports.iter().filter(|r| r.resonant).map(|r| r.h).collect();
        out.metric("resonant_count", resonant.len());
        out.metric("resonant_h", resonant);
        out.metric("failing_indices", reports.iter().filter_map(|r| r.failing_index).collect::<Vec<_>>());
        let mut t = Table::new("resonance", &["h", "resonant", "failing_index"]);
        for r in &reports {
            t.push(vec![fmt(r.h), r.resonant.to_string(), r.failing_index.map(|j| j.to_string()).unwrap_or_default()]);
        }
        out.tables.push(t);
        let doc: Vec<Value> = reports
            .iter()
            .map(|r| {
                let coeffs: Vec<Value> = r.alpha_coeffs.iter().map(|a| if a.re.is_nan() { Value::Null } else { json!([a.re, a.im]) }).collect();
                json!({"h": r.h, "resonant": r.resonant, "failing_index": r.failing_index, "alpha_coeffs": coeffs})
            })
            .collect();
        out.documents.push(("series".into(), Value::Array(doc)));
        Ok(out)
    }
}
