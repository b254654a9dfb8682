use super::report::fmt;
use super::{check_h_grid, config_err, numerical, ExperimentError, Outcome, Series, Table};
use crate::exactdiag::{
    contour_independence, resonance_gate, solve_finite, solve_gap_cr, solve_infinity, solve_singular, Conjugator, Diamond, ExactError, GapInterval, SlitDisk, SolveOptions,
    System, Wedge,
};
use crate::fit::loglog_slope;
use crate::mexpr::{complex_from_json, Expression, MatrixFunction};
use crate::num::{linspace, zeros, C64};
use crate::repeated::{run_over_h, BlockSystem, RepeatedError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

fn d_one() -> usize {
    1
}
fn d_p() -> i32 {
    1
}
fn d_order() -> u32 {
    1
}
fn d_target() -> u32 {
    3
}
fn d_unit() -> [f64; 2] {
    [0.0, 1.0]
}
fn d_points() -> usize {
    401
}
fn d_grid4() -> Vec<f64> {
    vec![0.1, 0.05, 0.025, 0.0125]
}
fn d_grid_finite() -> Vec<f64> {
    vec![0.05, 0.025]
}
fn d_grid_coarse() -> Vec<f64> {
    vec![0.1, 0.05]
}
fn d_grid_infinity() -> Vec<f64> {
    vec![0.05]
}
fn d_center() -> [f64; 2] {
    [0.0, 0.0]
}
fn d_half() -> f64 {
    0.2
}
fn d_eps() -> f64 {
    0.1
}
fn d_tol() -> f64 {
    1e-11
}
fn d_max_iter() -> usize {
    100
}
fn d_panel() -> f64 {
    0.25
}
fn d_panel_wide() -> f64 {
    0.5
}
fn d_max_points() -> usize {
    3_000_000
}
fn d_true() -> bool {
    true
}
fn d_frac() -> f64 {
    0.2
}
fn d_samples() -> usize {
    33
}
fn d_apex() -> f64 {
    1.0
}
fn d_r() -> f64 {
    12.0
}
fn d_compare_inf() -> [f64; 2] {
    [2.0, 10.0]
}
fn d_41() -> usize {
    41
}
fn d_17() -> usize {
    17
}
fn d_r_apex() -> f64 {
    50.0
}
fn d_eps_singular() -> f64 {
    0.7
}
fn d_rho_min() -> f64 {
    0.25
}
fn d_radius() -> f64 {
    1.0
}
fn d_check_radius() -> f64 {
    0.5
}
fn d_64() -> usize {
    64
}
fn d_gap_half() -> f64 {
    4.0
}
fn d_compare_gap() -> [f64; 2] {
    [-3.0, 2.0]
}
fn d_31() -> usize {
    31
}

pub(crate) fn exact_err(e: ExactError) -> ExperimentError {
    match e {
        ExactError::Param(m) => ExperimentError::Config(m),
        e => numerical("exactdiag")(e.to_string()),
    }
}

fn repeated_err(e: RepeatedError) -> ExperimentError {
    numerical("repeated")(e.to_string())
}

fn matrix(v: &Value) -> Result<MatrixFunction, ExperimentError> {
    MatrixFunction::from_json(v).map_err(config_err)
}

fn expression(src: &str) -> Result<Expression, ExperimentError> {
    Expression::parse(src).map_err(|e| ExperimentError::Config(format!("`{src}`: {e}")))
}

/// A block system h W' = (A + h^p Θ) W with the split after the first `m` coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub a: Value,
    #[serde(default)]
    pub theta: Option<Value>,
    #[serde(default = "d_one")]
    pub m: usize,
    #[serde(default = "d_p")]
    pub p: i32,
}

impl SystemSpec {
    pub fn build(&self) -> Result<System, ExperimentError> {
        let theta = self.theta.as_ref().map(matrix).transpose()?;
        System::new(matrix(&self.a)?, theta, self.m, self.p).map_err(exact_err)
    }

    /// φ coefficients when A is the builtin singular example.
    fn singular_phi(&self) -> Option<Vec<C64>> {
        if self.a.get("builtin").and_then(Value::as_str) != Some("singular_example") {
            return None;
        }
        let phi = self.a.get("args")?.get("phi")?.as_array()?;
        phi.iter().map(|v| complex_from_json(v).ok()).collect()
    }
}

fn solve_options(tol: f64, max_iter: usize, panel_max: f64, max_points: usize) -> SolveOptions {
    SolveOptions { tol, max_iter, panel_max, max_points }
}

fn conjugator_metrics(out: &mut Outcome, conjs: &[Conjugator]) {
    out.metric("certificate_max", conjs.iter().map(|c| c.certificate).fold(0.0, f64::max));
    out.metric("beta_error_max", conjs.iter().map(|c| c.beta_error).fold(0.0, f64::max));
    out.metric("picard_ratio_max", conjs.iter().map(|c| c.picard.max_ratio).fold(0.0, f64::max));
    out.metric("picard_iterations_max", conjs.iter().map(|c| c.picard.iterations).max().unwrap_or(0));
    out.metric("sup_alpha_max", conjs.iter().map(|c| c.sup_alpha()).fold(0.0, f64::max));
}

fn conjugator_table(hs: &[f64], conjs: &[Conjugator]) -> Table {
    let mut t = Table::new("conjugators", &["h", "certificate", "beta_error", "picard_ratio", "picard_iterations", "sup_alpha", "t_minus_i"]);
    for (h, c) in hs.iter().zip(conjs) {
        t.push(vec![fmt(*h), fmt(c.certificate), fmt(c.beta_error), fmt(c.picard.max_ratio), c.picard.iterations.to_string(), fmt(c.sup_alpha()), fmt(c.t_minus_i_sup())]);
    }
    t
}

fn export(out: &mut Outcome, conjs: &[Conjugator], samples: usize) {
    for (i, c) in conjs.iter().enumerate() {
        out.documents.push((format!("conjugator_{i}"), c.to_json(&c.default_samples(samples))));
    }
}

/// Largest |α12[0,0] − closed form| over the sample points, relative to max(1, |closed form|).
fn closed_form_error(c: &Conjugator, expr: &Expression, xs: &[f64]) -> Result<f64, ExperimentError> {
    let mut worst: f64 = 0.0;
    for x in xs {
        let z = C64::new(*x, 0.0);
        let (a12, _) = c.alpha_at(z).ok_or_else(|| ExperimentError::Config(format!("x = {x} lies outside the solved region")))?;
        let exact = expr.eval(z, c.h).map_err(config_err)?;
        worst = worst.max((a12[(0, 0)] - exact).norm() / exact.norm().max(1.0));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepeatedParams {
    pub a: Value,
    /// Zero when absent.
    #[serde(default)]
    pub theta: Option<Value>,
    #[serde(default = "d_one")]
    pub m: usize,
    #[serde(default = "d_order")]
    pub order: u32,
    #[serde(default = "d_target")]
    pub target: u32,
    #[serde(default = "d_unit")]
    pub x_range: [f64; 2],
    #[serde(default = "d_points")]
    pub points: usize,
    #[serde(default = "d_grid4")]
    pub h_grid: Vec<f64>,
}

impl RepeatedParams {
    fn functions(&self) -> Result<(MatrixFunction, MatrixFunction), ExperimentError> {
        let a = matrix(&self.a)?;
        let theta = match &self.theta {
            Some(t) => matrix(t)?,
            None => MatrixFunction::constant(zeros(a.dim(), a.dim())),
        };
        if theta.dim() != a.dim() {
            return Err(ExperimentError::Config(format!("theta is {0}×{0} but a is {1}×{1}", theta.dim(), a.dim())));
        }
        if self.m == 0 || self.m >= a.dim() {
            return Err(ExperimentError::Config(format!("block size m = {} must lie in [1, {})", self.m, a.dim())));
        }
        Ok((a, theta))
    }

    pub(crate) fn check(&self) -> Result<(), ExperimentError> {
        self.functions()?;
        check_h_grid(&self.h_grid, "h_grid")?;
        if self.points < 5 || !(self.x_range[1] > self.x_range[0]) {
            return Err(ExperimentError::Config("x_range must be increasing with at least 5 points".into()));
        }
        if self.target < self.order {
            return Err(ExperimentError::Config(format!("target {} is below the starting order {}", self.target, self.order)));
        }
        Ok(())
    }

    pub(crate) fn run(&self) -> Result<Outcome, ExperimentError> {
        let (a, theta) = self.functions()?;
        let xs = linspace(self.x_range[0], self.x_range[1], self.points);
        let build = |h: f64| BlockSystem::from_functions(&a, &theta, self.m, self.order, &xs, h);
        let (rep, outs) = run_over_h(build, &self.h_grid, self.target).map_err(repeated_err)?;
        let mut out = Outcome::default();
        for (k, s) in &rep.order_slopes {
            out.metric(format!("order_slope_{k}"), *s);
        }
        for (k, s) in &rep.t_slopes {
            out.metric(format!("t_slope_{k}"), *s);
        }
        for (k, s) in &rep.chain_increment_slopes {
            out.metric(format!("chain_increment_slope_{k}"), *s);
        }
        out.metric("conjugation_slope", rep.conjugation_slope);
        out.metric("conjugation_residual_max", rep.conjugation_residuals.iter().map(|r| r.1).fold(0.0, f64::max));
        out.metric("final_offdiag_sup", outs.iter().map(|o| o.systems.last().map(|s| s.offdiag_sup()).unwrap_or(0.0)).fold(0.0, f64::max));
        out.metric("fd_floor_max", outs.iter().map(|o| o.fd_floor).fold(0.0, f64::max));
        out.metric("max_cond", rep.max_cond);
        out.metric("max_newton_iterations", rep.max_newton_iterations);
        let mut t = Table::new("residuals", &["order", "h", "sup_residual", "fitted_slope"]);
        for r in &rep.rows {
            t.push(vec![r.order.to_string(), fmt(r.h), fmt(r.sup_residual), fmt(r.fitted_slope)]);
        }
        out.tables.push(t);
        for (k, _) in &rep.order_slopes {
            let pts = rep.rows.iter().filter(|r| r.order == *k).map(|r| (r.h, r.sup_residual)).collect();
            out.series.push(Series::new(&format!("offdiag_order_{k}"), "h", "sup_residual", pts));
        }
        out.series.push(Series::new("conjugation_residual", "h", "residual", rep.conjugation_residuals.clone()));
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteParams {
    pub system: SystemSpec,
    #[serde(default = "d_center")]
    pub center: [f64; 2],
    #[serde(default = "d_half")]
    pub half_length: f64,
    #[serde(default = "d_eps")]
    pub eps: f64,
    #[serde(default = "d_grid_finite")]
    pub h_grid: Vec<f64>,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_max_iter")]
    pub max_iter: usize,
    #[serde(default = "d_panel")]
    pub panel_max: f64,
    #[serde(default = "d_max_points")]
    pub max_points: usize,
    /// Re-solve on a shrunk diamond at the smallest h and compare.
    #[serde(default = "d_true")]
    pub contour_check: bool,
    #[serde(default = "d_frac")]
    pub contour_shrink: f64,
    #[serde(default = "d_samples")]
    pub samples: usize,
}

impl FiniteParams {
    pub(crate) fn check(&self) -> Result<(), ExperimentError> {
        self.system.build()?;
        check_h_grid(&self.h_grid, "h_grid")
    }

    pub(crate) fn run(&self) -> Result<Outcome, ExperimentError> {
        let sys = self.system.build()?;
        let center = C64::new(self.center[0], self.center[1]);
        let diamond = Diamond::new(self.half_length, self.eps);
        let opts = solve_options(self.tol, self.max_iter, self.panel_max, self.max_points);
        let conjs = self.h_grid.par_iter().map(|h| solve_finite(&sys, center, *h, &diamond, &opts)).collect::<Result<Vec<_>, _>>().map_err(exact_err)?;
        let mut out = Outcome::default();
        conjugator_metrics(&mut out, &conjs);
        let tmi: Vec<f64> = conjs.iter().map(Conjugator::t_minus_i_sup).collect();
        if self.h_grid.len() >= 2 {
            out.metric("t_minus_i_slope", loglog_slope(&self.h_grid, &tmi));
        }
        if self.contour_check {
            let h = self.h_grid.iter().copied().fold(f64::INFINITY, f64::min);
            let d = contour_independence(&sys, center, h, &diamond, self.contour_shrink, &opts).map_err(exact_err)?;
            out.metric("contour_dependence", d);
        }
        out.tables.push(conjugator_table(&self.h_grid, &conjs));
        out.series.push(Series::new("t_minus_i", "h", "sup_t_minus_i", self.h_grid.iter().copied().zip(tmi).collect()));
        export(&mut out, &conjs, self.samples);
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfinityParams {
    pub system: SystemSpec,
    #[serde(default = "d_grid_infinity")]
    pub h_grid: Vec<f64>,
    #[serde(default = "d_apex")]
    pub apex: f64,
    #[serde(default = "d_eps")]
    pub eps: f64,
    /// Truncation Re x = r where the limits are imposed.
    #[serde(default = "d_r")]
    pub r: f64,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_max_iter")]
    pub max_iter: usize,
    #[serde(default = "d_panel_wide")]
    pub panel_max: f64,
    #[serde(default = "d_max_points")]
    pub max_points: usize,
    /// Expected α12[0,0](x, h), compared on the real segment `compare`.
    #[serde(default)]
    pub closed_form: Option<String>,
    #[serde(default = "d_compare_inf")]
    pub compare: [f64; 2],
    #[serde(default = "d_41")]
    pub compare_points: usize,
    /// Real segment on which the exponential decay rate of α is fitted.
    #[serde(default = "d_compare_inf")]
    pub decay: [f64; 2],
    #[serde(default = "d_17")]
    pub decay_points: usize,
    #[serde(default = "d_samples")]
    pub samples: usize,
}

impl InfinityParams {
    pub(crate) fn check(&self) -> Result<(), ExperimentError> {
        self.system.build()?;
        if let Some(s) = &self.closed_form {
            expression(s)?;
        }
        check_h_grid(&self.h_grid, "h_grid")
    }

    pub(crate) fn run(&self) -> Result<Outcome, ExperimentError> {
        let sys = self.system.build()?;
        let wedge = Wedge { apex: self.apex, eps: self.eps, r: self.r };
        let opts = solve_options(self.tol, self.max_iter, self.panel_max, self.max_points);
        let conjs = self.h_grid.par_iter().map(|h| solve_infinity(&sys, *h, &wedge, &opts)).collect::<Result<Vec<_>, _>>().map_err(exact_err)?;
        let mut out = Outcome::default();
        conjugator_metrics(&mut out, &conjs);
        if let Some(src) = &self.closed_form {
            let e = expression(src)?;
            let xs = linspace(self.compare[0], self.compare[1], self.compare_points);
            let mut worst: f64 = 0.0;
            for c in &conjs {
                worst = worst.max(closed_form_error(c, &e, &xs)?);
            }
            out.metric("closed_form_error_max", worst);
        }
        let rates: Vec<f64> = conjs.iter().filter_map(|c| c.real_axis_decay(self.decay[0], self.decay[1], self.decay_points)).collect();
        if !rates.is_empty() {
            out.metric("decay_rate_min", rates.iter().copied().fold(f64::INFINITY, f64::min));
        }
        out.tables.push(conjugator_table(&self.h_grid, &conjs));
        for (i, c) in conjs.iter().enumerate() {
            let pts = linspace(self.decay[0], self.decay[1], self.decay_points)
                .into_iter()
                .filter_map(|x| c.alpha_at(C64::new(x, 0.0)).map(|(a12, _)| (x, a12[(0, 0)].norm())))
                .collect();
            out.series.push(Series::new(&format!("alpha_real_axis_{i}"), "x", "abs_alpha12", pts));
        }
        export(&mut out, &conjs, self.samples);
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingularParams {
    pub system: SystemSpec,
    #[serde(default = "d_grid_coarse")]
    pub h_grid: Vec<f64>,
    #[serde(default = "d_r_apex")]
    pub r_apex: f64,
    #[serde(default = "d_eps_singular")]
    pub eps: f64,
    #[serde(default = "d_rho_min")]
    pub rho_min: f64,
    #[serde(default = "d_radius")]
    pub radius: f64,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_max_iter")]
    pub max_iter: usize,
    #[serde(default = "d_panel")]
    pub panel_max: f64,
    #[serde(default = "d_max_points")]
    pub max_points: usize,
    /// Polynomial φ for the series comparison; read from the builtin singular example when absent.
    #[serde(default)]
    pub reference_phi: Option<Vec<Value>>,
    #[serde(default = "d_check_radius")]
    pub check_radius: f64,
    #[serde(default = "d_64")]
    pub check_points: usize,
    /// Probe h = 1/j for j = 1..=resonance_scan with the resonance gate.
    #[serde(default)]
    pub resonance_scan: usize,
    #[serde(default = "d_samples")]
    pub samples: usize,
}

impl SingularParams {
    fn phi(&self) -> Result<Option<Vec<C64>>, ExperimentError> {
        match &self.reference_phi {
            Some(v) => Ok(Some(v.iter().map(complex_from_json).collect::<Result<Vec<_>, _>>().map_err(config_err)?)),
            None => Ok(self.system.singular_phi()),
        }
    }

    fn disk(&self) -> SlitDisk {
        SlitDisk { r_apex: self.r_apex, eps: self.eps, rho_min: self.rho_min, radius: self.radius }
    }

    pub(crate) fn check(&self) -> Result<(), ExperimentError> {
        self.system.build()?;
        self.phi()?;
        check_h_grid(&self.h_grid, "h_grid")
    }

    pub(crate) fn run(&self) -> Result<Outcome, ExperimentError> {
        let sys = self.system.build()?;
        let phi = self.phi()?;
        let disk = self.disk();
        let opts = solve_options(self.tol, self.max_iter, self.panel_max, self.max_points);
        let mut out = Outcome::default();
        if self.resonance_scan > 0 {
            let found = (1..=self.resonance_scan)
                .into_par_iter()
                .map(|j| resonance_gate(&sys, 1.0 / j as f64, disk.rho_min).map(|g| g.map(|(order, _)| (j, order))))
                .collect::<Result<Vec<_>, _>>()
                .map_err(exact_err)?;
            let detected: Vec<usize> = found.iter().flatten().filter(|(j, order)| j == order).map(|(j, _)| *j).collect();
            let misplaced = found.iter().flatten().filter(|(j, order)| j != order).count();
            out.metric("resonance_detected", detected.clone());
            out.metric("resonance_misplaced", misplaced);
            if let Some(phi) = &phi {
                let expected: Vec<usize> = (1..=self.resonance_scan).filter(|j| phi.get(j - 1).map(|f| f.norm() > 0.0).unwrap_or(false)).collect();
                out.metric("resonance_exact", misplaced == 0 && detected == expected);
                out.metric("resonance_expected", expected);
            }
        }
        let conjs = self.h_grid.par_iter().map(|h| solve_singular(&sys, *h, &disk, &opts)).collect::<Result<Vec<_>, _>>().map_err(exact_err)?;
        conjugator_metrics(&mut out, &conjs);
        if let Some(phi) = &phi {
            let mut worst: f64 = 0.0;
            for c in &conjs {
                let n = self.check_points.max(2);
                for k in 0..n {
                    let th = -3.0 + 6.0 * k as f64 / (n - 1) as f64;
                    let z = C64::from_polar(self.check_radius, th);
                    let exact: C64 = phi.iter().enumerate().map(|(j, f)| f * z.powi(j as i32 + 1) / ((j + 1) as f64 * c.h - 1.0)).sum();
                    let (a12, _) = c.alpha_at_original(z).ok_or_else(|| ExperimentError::Config(format!("|z| = {} lies outside the solved disk", self.check_radius)))?;
                    worst = worst.max((a12[(0, 0)] - exact).norm());
                }
            }
            out.metric("series_error_max", worst);
        }
        out.tables.push(conjugator_table(&self.h_grid, &conjs));
        export(&mut out, &conjs, self.samples);
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapParams {
    pub system: SystemSpec,
    #[serde(default = "d_grid_coarse")]
    pub h_grid: Vec<f64>,
    #[serde(default = "d_gap_half")]
    pub half_length: f64,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_max_iter")]
    pub max_iter: usize,
    #[serde(default = "d_panel")]
    pub panel_max: f64,
    #[serde(default = "d_max_points")]
    pub max_points: usize,
    #[serde(default)]
    pub closed_form: Option<String>,
    #[serde(default = "d_compare_gap")]
    pub compare: [f64; 2],
    #[serde(default = "d_31")]
    pub compare_points: usize,
    #[serde(default = "d_samples")]
    pub samples: usize,
}

impl GapParams {
    pub(crate) fn check(&self) -> Result<(), ExperimentError> {
        self.system.build()?;
        if let Some(s) = &self.closed_form {
            expression(s)?;
        }
        check_h_grid(&self.h_grid, "h_grid")
    }

    pub(crate) fn run(&self) -> Result<Outcome, ExperimentError> {
        let sys = self.system.build()?;
        let interval = GapInterval { half_length: self.half_length };
        let opts = solve_options(self.tol, self.max_iter, self.panel_max, self.max_points);
        let conjs = self.h_grid.par_iter().map(|h| solve_gap_cr(&sys, *h, &interval, &opts)).collect::<Result<Vec<_>, _>>().map_err(exact_err)?;
        let mut out = Outcome::default();
        conjugator_metrics(&mut out, &conjs);
        out.metric("h_sup_alpha_max", conjs.iter().map(|c| c.h * c.sup_alpha()).fold(0.0, f64::max));
        if let Some(src) = &self.closed_form {
            let e = expression(src)?;
            let xs = linspace(self.compare[0], self.compare[1], self.compare_points);
            let mut worst: f64 = 0.0;
            for c in &conjs {
                worst = worst.max(closed_form_error(c, &e, &xs)?);
            }
            out.metric("closed_form_error_max", worst);
        }
        out.tables.push(conjugator_table(&self.h_grid, &conjs));
        export(&mut out, &conjs, self.samples);
        Ok(out)
    }
}
