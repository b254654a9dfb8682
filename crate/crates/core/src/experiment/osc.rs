use super::report::fmt;
use super::{check_h_grid, config_err, numerical, ExperimentError, Outcome, Series, Table};
use crate::fit::loglog_slope;
use crate::mexpr::Expression;
use crate::num::C64;
use crate::oscint::{cr_halfline_rate, find_saddle, gevrey_halfline_asymptotics, saddle_deformed_quad, stationary_phase_estimate, AsymptoticFit, OscError, QuadResult, Symbol};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

fn d_one() -> Value {
    Value::String("1".into())
}
fn d_phase() -> String {
    "-(x*x + 2*i*x)".into()
}
fn d_x() -> f64 {
    2.0
}
fn d_grid_quad() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}
fn d_grid_fine() -> Vec<f64> {
    vec![0.05, 0.025, 0.0125, 0.00625, 0.003125]
}
fn d_s() -> f64 {
    2.0
}
fn d_rs() -> Vec<u32> {
    vec![1, 3]
}

fn osc_err(e: OscError) -> ExperimentError {
    match e {
        OscError::BadParameter(m) => ExperimentError::Config(m),
        e => numerical("oscint")(e.to_string()),
    }
}

pub(crate) fn symbol(v: &Value) -> Result<Symbol, ExperimentError> {
    Symbol::from_json(v).map_err(config_err)
}

/// ∫_{−x}^{x} e^{φ/h} a dy on an h-grid by saddle-deformed quadrature; the phase is
/// written in the variable `x`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadstatParams {
    #[serde(default = "d_one")]
    pub amplitude: Value,
    #[serde(default = "d_phase")]
    pub phase: String,
    #[serde(default = "d_x")]
    pub x: f64,
    #[serde(default = "d_grid_quad")]
    pub h_grid: Vec<f64>,
    /// Starting guess for the saddle search, [re, im]; −i when absent.
    #[serde(default)]
    pub saddle: Option<[f64; 2]>,
    /// Exact value of the integral as an expression in h.
    #[serde(default)]
    pub closed_form: Option<String>,
    /// Second amplitude whose integral is divided out before fitting `slope_vs_reference`.
    #[serde(default)]
    pub reference_amplitude: Option<Value>,
    /// Expected |I| h^{−1/2} |e^{−φ(z0)/h}| as h → 0.
    #[serde(default)]
    pub expected_constant: Option<f64>,
}

impl QuadstatParams {
    fn parts(&self) -> Result<(Symbol, Expression, Option<Symbol>, Option<Expression>), ExperimentError> {
        let a = symbol(&self.amplitude)?;
        let phi = Expression::parse(&self.phase).map_err(|e| ExperimentError::Config(format!("phase: {e}")))?;
        let r = self.reference_amplitude.as_ref().map(symbol).transpose()?;
        let cf = self.closed_form.as_ref().map(|s| Expression::parse(s).map_err(|e| ExperimentError::Config(format!("closed_form: {e}")))).transpose()?;
        Ok((a, phi, r, cf))
    }

    pub(crate) fn check(&self) -> Result<(), ExperimentError> {
        self.parts()?;
        check_h_grid(&self.h_grid, "h_grid")?;
        if !(self.x > 0.0) {
            return Err(ExperimentError::Config(format!("x must be positive, got {}", self.x)));
        }
        Ok(())
    }

    pub(crate) fn run(&self) -> Result<Outcome, ExperimentError> {
        let (a, phi, reference, closed) = self.parts()?;
        let guess = self.saddle.map(|s| C64::new(s[0], s[1]));
        let quad = |sym: &Symbol| -> Result<Vec<QuadResult>, ExperimentError> {
            self.h_grid.par_iter().map(|h| saddle_deformed_quad(sym, &phi, self.x, *h, guess)).collect::<Result<Vec<_>, _>>().map_err(osc_err)
        };
        let vals = quad(&a)?;
        let mut out = Outcome::default();
        let x2 = self.x * self.x;
        let ratios: Vec<f64> = self.h_grid.iter().zip(&vals).map(|(h, v)| v.value.norm() / (h * (-x2 / h).exp())).collect();
        out.metric("endpoint_ratio_max", ratios.iter().copied().fold(0.0, f64::max));
        out.metric("quad_error_max", vals.iter().map(|v| v.error).fold(0.0, f64::max));
        let mut table = Table::new("integrals", &["h", "re", "im", "abs", "quad_error", "endpoint_ratio", "closed_form_rel_error"]);
        let mut cf_err = Vec::new();
        if let Some(cf) = &closed {
            for (h, v) in self.h_grid.iter().zip(&vals) {
                let e = cf.eval(C64::new(0.0, 0.0), *h).map_err(config_err)?;
                cf_err.push((v.value - e).norm() / e.norm());
            }
            out.metric("closed_form_rel_error_max", cf_err.iter().copied().fold(0.0, f64::max));
        }
        for (i, (h, v)) in self.h_grid.iter().zip(&vals).enumerate() {
            let ce = cf_err.get(i).map(|e| fmt(*e)).unwrap_or_default();
            table.push(vec![fmt(*h), fmt(v.value.re), fmt(v.value.im), fmt(v.value.norm()), fmt(v.error), fmt(ratios[i]), ce]);
        }
        let (imin, hmin) = self.h_grid.iter().copied().enumerate().fold((0, f64::INFINITY), |m, (i, h)| if h < m.1 { (i, h) } else { m });
        let z0 = find_saddle(&phi, guess.unwrap_or(C64::new(0.0, -1.0)), hmin).map_err(osc_err)?;
        let scale = (phi.eval(z0, hmin).map_err(config_err)?.re / hmin).exp() * hmin.sqrt();
        let constant = vals[imin].value.norm() / scale;
        out.metric("leading_constant", constant);
        if let Some(c) = self.expected_constant {
            out.metric("leading_constant_rel_error", (constant - c).abs() / c);
        }
        if a.is_analytic() && z0.im.abs() <= self.x {
            let sp = stationary_phase_estimate(&a, &phi, z0, hmin, C64::new(1.0, 0.0)).map_err(osc_err)?;
            if sp.norm() > 0.0 {
                out.metric("stationary_phase_rel_error", (vals[imin].value - sp).norm() / sp.norm());
            }
        }
        if let Some(r) = &reference {
            let rv = quad(r)?;
            let q: Vec<f64> = vals.iter().zip(&rv).map(|(v, r)| v.value.norm() / r.value.norm()).collect();
            out.metric("slope_vs_reference", loglog_slope(&self.h_grid, &q));
            out.series.push(Series::new("ratio_to_reference", "h", "abs_ratio", self.h_grid.iter().copied().zip(q).collect()));
        }
        out.series.push(Series::new("abs_integral", "h", "abs_integral", self.h_grid.iter().copied().zip(vals.iter().map(|v| v.value.norm())).collect()));
        out.tables.push(table);
        Ok(out)
    }
}

fn fit_outputs(out: &mut Outcome, name: &str, fit: &AsymptoticFit) {
    let mut t = Table::new(name, &["h", "re", "im", "abs", "model"]);
    for (h, v) in fit.hs.iter().zip(&fit.values) {
        t.push(vec![fmt(*h), fmt(v.re), fmt(v.im), fmt(v.norm()), fmt(fit.predict(*h))]);
    }
    out.tables.push(t);
    out.series.push(Series::new(name, "h", "abs_integral", fit.hs.iter().copied().zip(fit.values.iter().map(|v| v.norm())).collect()));
}

/// Gevrey half-line integral with cutoff e^{−y^{−θ}}, θ = 1/(s − 1), and its law fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GevreyParams {
    #[serde(default = "d_s")]
    pub s: f64,
    #[serde(default = "d_grid_fine")]
    pub h_grid: Vec<f64>,
}

impl GevreyParams {
    pub(crate) fn check(&self) -> Result<(), ExperimentError> {
        if !(self.s > 1.0) {
            return Err(ExperimentError::Config(format!("Gevrey index s must exceed 1, got {}", self.s)));
        }
        check_h_grid(&self.h_grid, "h_grid")?;
        if self.h_grid.len() < 4 {
            return Err(ExperimentError::Config("the three-parameter fit needs at least 4 values of h".into()));
        }
        Ok(())
    }

    pub(crate) fn run(&self) -> Result<Outcome, ExperimentError> {
        let fit = gevrey_halfline_asymptotics(1.0 / (self.s - 1.0), &self.h_grid).map_err(osc_err)?;
        let mut out = Outcome::default();
        out.metric("inv_s", fit.inv_s_free.unwrap_or(f64::NAN));
        out.metric("c", fit.c);
        out.metric("p", fit.p);
        out.metric("prefactor", fit.prefactor);
        out.metric("fit_residual", fit.residual);
        out.metric("expected_inv_s", 1.0 / self.s);
        out.metric("expected_p", 1.0 - 1.0 / (2.0 * self.s));
        fit_outputs(&mut out, "gevrey_integral", &fit);
        Ok(out)
    }
}

/// Power-law fits of ∫_0^2 y^r e^{−(y² + 2iy)/h} dy for each r.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrParams {
    #[serde(default = "d_rs")]
    pub r: Vec<u32>,
    #[serde(default = "d_grid_fine")]
    pub h_grid: Vec<f64>,
}

impl CrParams {
    pub(crate) fn check(&self) -> Result<(), ExperimentError> {
        if self.r.is_empty() || self.r.contains(&0) {
            return Err(ExperimentError::Config("r must be a nonempty list of integers ≥ 1".into()));
        }
        check_h_grid(&self.h_grid, "h_grid")?;
        if self.h_grid.len() < 2 {
            return Err(ExperimentError::Config("the power-law fit needs at least 2 values of h".into()));
        }
        Ok(())
    }

    pub(crate) fn run(&self) -> Result<Outcome, ExperimentError> {
        let fits = self.r.par_iter().map(|r| cr_halfline_rate(*r, &self.h_grid)).collect::<Result<Vec<_>, _>>().map_err(osc_err)?;
        let mut out = Outcome::default();
        for (r, fit) in self.r.iter().zip(&fits) {
            out.metric(format!("p_r{r}"), fit.p);
            out.metric(format!("prefactor_r{r}"), fit.prefactor);
            out.metric(format!("fit_residual_r{r}"), fit.residual);
            fit_outputs(&mut out, &format!("cr_integral_r{r}"), fit);
        }
        Ok(out)
    }
}
