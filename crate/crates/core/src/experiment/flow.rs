use super::report::fmt;
use super::{config_err, numerical, ExperimentError, Outcome, Series, Table};
use crate::manifold::{linearize, solve_stable_manifold, tangency_check, CVec, ManifoldError, ManifoldOptions, VectorField};
use crate::mexpr::{complex_from_json, Expression};
use crate::num::C64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

fn d_nu() -> f64 {
    0.3
}
fn d_tol() -> f64 {
    1e-10
}
fn d_max_iter() -> usize {
    200
}
fn d_panel() -> f64 {
    0.25
}
fn d_compare() -> [f64; 2] {
    [0.0, 10.0]
}

fn manifold_err(e: ManifoldError) -> ExperimentError {
    match e {
        ManifoldError::Parse(_) | ManifoldError::Param(_) | ManifoldError::NotEquilibrium { .. } | ManifoldError::NotStable { .. } | ManifoldError::TooLarge { .. } => {
            ExperimentError::Config(e.to_string())
        }
        e => numerical("manifold")(e.to_string()),
    }
}

/// A builtin name (`logistic`, `saddle`) or component expressions in u1, …, un.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Builtin(String),
    Components(Vec<String>),
}

impl FieldSpec {
    fn build(&self) -> Result<VectorField, ExperimentError> {
        match self {
            FieldSpec::Builtin(name) => match name.as_str() {
                "logistic" => Ok(VectorField::logistic()),
                "saddle" => Ok(VectorField::saddle()),
                other => Err(ExperimentError::Config(format!("unknown vector field `{other}` (builtins: logistic, saddle)"))),
            },
            FieldSpec::Components(c) => {
                let refs: Vec<&str> = c.iter().map(String::as_str).collect();
                VectorField::parse(&refs).map_err(manifold_err)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TangencySpec {
    pub direction: Vec<f64>,
    pub scales: Vec<f64>,
}

/// Stable manifold of u' = f(u) at u*, from the stable datum w_s.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldParams {
    pub field: FieldSpec,
    /// Zero when empty.
    #[serde(default)]
    pub u_star: Vec<Value>,
    pub w_s: Vec<Value>,
    #[serde(default = "d_nu")]
    pub nu: f64,
    #[serde(default)]
    pub eta_tilde: Option<f64>,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_max_iter")]
    pub max_iter: usize,
    #[serde(default = "d_panel")]
    pub panel_max: f64,
    /// Exact u(t) per component, as expressions in x standing for complex time t.
    #[serde(default)]
    pub closed_form: Option<Vec<String>>,
    /// Range of |t| over which the closed form is compared.
    #[serde(default = "d_compare")]
    pub compare: [f64; 2],
    #[serde(default)]
    pub tangency: Option<TangencySpec>,
}

fn vector(vals: &[Value], n: usize, what: &str) -> Result<CVec, ExperimentError> {
    if vals.is_empty() {
        return Ok(CVec::zeros(n));
    }
    if vals.len() != n {
        return Err(ExperimentError::Config(format!("{what} has {} components, the field has {n}", vals.len())));
    }
    let v = vals.iter().map(complex_from_json).collect::<Result<Vec<_>, _>>().map_err(config_err)?;
    Ok(CVec::from_vec(v))
}

impl ManifoldParams {
    fn options(&self) -> ManifoldOptions {
        ManifoldOptions { nu: self.nu, eta_tilde: self.eta_tilde, t_max: self.t_max, delta: self.delta, tol: self.tol, max_iter: self.max_iter, panel_max: self.panel_max }
    }

    fn closed(&self, n: usize) -> Result<Option<Vec<Expression>>, ExperimentError> {
        let Some(src) = &self.closed_form else { return Ok(None) };
        if src.len() != n {
            return Err(ExperimentError::Config(format!("closed_form has {} components, the field has {n}", src.len())));
        }
        let e = src.iter().map(|s| Expression::parse(s).map_err(|e| ExperimentError::Config(format!("closed_form `{s}`: {e}")))).collect::<Result<Vec<_>, _>>()?;
        Ok(Some(e))
    }

    pub(crate) fn check(&self) -> Result<(), ExperimentError> {
        let f = self.field.build()?;
        let n = f.dim();
        vector(&self.u_star, n, "u_star")?;
        if self.w_s.is_empty() {
            return Err(ExperimentError::Config("w_s must not be empty".into()));
        }
        vector(&self.w_s, n, "w_s")?;
        self.closed(n)?;
        if let Some(t) = &self.tangency {
            if t.direction.len() != n || t.scales.len() < 2 || t.scales.iter().any(|s| !(*s > 0.0)) {
                return Err(ExperimentError::Config("tangency needs an n-vector direction and at least 2 positive scales".into()));
            }
        }
        if !(self.nu >= 0.0 && self.nu < std::f64::consts::FRAC_PI_2) {
            return Err(ExperimentError::Config(format!("nu must lie in [0, π/2), got {}", self.nu)));
        }
        Ok(())
    }

    pub(crate) fn run(&self) -> Result<Outcome, ExperimentError> {
        let f = self.field.build()?;
        let n = f.dim();
        let u_star = vector(&self.u_star, n, "u_star")?;
        let w_s = vector(&self.w_s, n, "w_s")?;
        let eq = linearize(&f, &u_star).map_err(manifold_err)?;
        let opts = self.options();
        let sol = solve_stable_manifold(&eq, &f, &w_s, &opts).map_err(manifold_err)?;
        let mut out = Outcome::default();
        out.metric("spectral_gap", eq.spectral_gap);
        out.metric("has_center", eq.has_center);
        out.metric("eta_tilde", sol.eta_tilde);
        out.metric("t_max", sol.t_max);
        out.metric("iterations", sol.iterations);
        out.metric("max_ratio", sol.max_ratio);
        out.metric("weighted_norm", sol.weighted_norm);
        out.metric("tail_bound", sol.tail_bound);
        out.metric("ray_spread", sol.ray_spread);
        out.metric("phi_norm", sol.phi.norm());
        out.metric("projection_error", sol.projection_error(&eq));
        out.metric("flow_residual", sol.flow_residual(&f, &eq).map_err(manifold_err)?);
        let rates = sol.decay_rates();
        let rmin = rates.iter().copied().fold(f64::INFINITY, f64::min);
        out.metric("decay_rate_min", rmin);
        out.metric("decay_margin", rmin - sol.eta_tilde);
        if let Some(exprs) = self.closed(n)? {
            let (mut real, mut wedge) = (0.0f64, 0.0f64);
            for ray in &sol.rays {
                for (t, w) in ray.t.iter().zip(&ray.w) {
                    if t.norm() < self.compare[0] || t.norm() > self.compare[1] {
                        continue;
                    }
                    let mut err = 0.0f64;
                    for (k, e) in exprs.iter().enumerate() {
                        let exact = e.eval(*t, 0.0).map_err(config_err)?;
                        err = err.max((u_star[k] + w[k] - exact).norm());
                    }
                    wedge = wedge.max(err);
                    if ray.angle == 0.0 {
                        real = real.max(err);
                    }
                }
            }
            out.metric("closed_form_error_max", real);
            out.metric("closed_form_error_wedge", wedge);
        }
        if let Some(t) = &self.tangency {
            let dir = CVec::from_iterator(n, t.direction.iter().map(|x| C64::new(*x, 0.0)));
            let rep = tangency_check(&eq, &f, &dir, &t.scales, &opts).map_err(manifold_err)?;
            out.metric("tangency_trivial", rep.trivial);
            if let Some(s) = rep.slope {
                out.metric("tangency_slope", s);
            }
            out.series.push(Series::new("tangency", "scale", "phi_norm", rep.scales.iter().copied().zip(rep.phi_norms.iter().copied()).collect()));
        }
        let mut head = vec!["angle", "re_t", "im_t"];
        let cols: Vec<String> = (1..=n).flat_map(|k| [format!("re_w{k}"), format!("im_w{k}")]).collect();
        head.extend(cols.iter().map(String::as_str));
        let mut table = Table::new("trajectory", &head);
        for (i, ray) in sol.rays.iter().enumerate() {
            for (t, w) in ray.t.iter().zip(&ray.w) {
                let mut row = vec![fmt(ray.angle), fmt(t.re), fmt(t.im)];
                for v in w.iter() {
                    row.push(fmt(v.re));
                    row.push(fmt(v.im));
                }
                table.push(row);
            }
            let pts = ray.t.iter().zip(&ray.w).map(|(t, w)| (t.re, w.norm())).collect();
            out.series.push(Series::new(&format!("abs_w_ray_{i}"), "re_t", "abs_w", pts));
        }
        out.tables.push(table);
        out.series.push(Series::new("picard_differences", "iteration", "difference", sol.diffs.iter().enumerate().map(|(i, d)| ((i + 1) as f64, *d)).collect()));
        Ok(out)
    }
}
