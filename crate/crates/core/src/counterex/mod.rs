//! The triangular system h W' = (x+i, h^p θ; 0, −(x+i)) W: explicit off-diagonal
//! conjugator entry α, the boundedness criterion on ∫_{−x}^{x} e^{−(y²+2iy)/h} θ dy,
//! and the regular-singular resonance obstruction.

mod resonance;

pub use resonance::{singular_resonance, ResonanceReport};

use crate::fit::lstsq;
use crate::mexpr::EvalError;
use crate::num::{c, CMat, C64};
use crate::oscint::{gevrey_halfline_integral, quad_fn, Contour, OscError, QuadResult, Symbol, SymbolClass};
use crate::quad::panel16;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CounterexError {
    #[error(transparent)]
    Osc(#[from] OscError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Param(String),
}

/// Default ceiling on the criterion ratio for a bounded verdict.
pub const DEFAULT_BOUND: f64 = 100.0;
/// Criterion and α grids use this many points per unit length.
pub const POINTS_PER_UNIT: f64 = 64.0;
/// Allowed growth of the last sup ρ over the previous one in a bounded verdict.
pub const TREND_TOL: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct TriangularSystem {
    pub theta: Symbol,
    pub p: u32,
    pub half_width: f64,
}

fn psi(y: C64) -> C64 {
    y * y + C64::new(0.0, 2.0) * y
}

impl TriangularSystem {
    pub fn new(theta: Symbol, p: u32, half_width: f64) -> Result<Self, CounterexError> {
        if p < 1 {
            return Err(CounterexError::Param("p must be ≥ 1".into()));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(CounterexError::Param(format!("half-width must be positive, got {half_width}")));
        }
        Ok(TriangularSystem { theta, p, half_width })
    }

    pub fn class(&self) -> SymbolClass {
        self.theta.class()
    }

    pub fn lambda1(x: f64) -> C64 {
        c(x, 1.0)
    }

    pub fn lambda2(x: f64) -> C64 {
        c(-x, -1.0)
    }

    /// 𝒜(x, h).
    pub fn matrix(&self, x: f64, h: f64) -> Result<CMat, CounterexError> {
        let t = self.theta.eval_real(x, h)?;
        Ok(CMat::from_row_slice(2, 2, &[Self::lambda1(x), t * h.powi(self.p as i32), C64::new(0.0, 0.0), Self::lambda2(x)]))
    }

    /// ∫_path e^{(shift − ψ(y))/h} θ(y) dy.
    fn scaled(&self, shift: C64, path: Vec<C64>, h: f64) -> Result<QuadResult, CounterexError> {
        let th = &self.theta;
        let f = move |y: C64| -> Result<C64, EvalError> {
            let a = th.eval(y, h)?;
            if a == C64::new(0.0, 0.0) {
                return Ok(a);
            }
            Ok(((shift - psi(y)) / h).exp() * a)
        };
        let mut pts: Vec<C64> = Vec::with_capacity(path.len());
        for z in path {
            if pts.last().is_none_or(|w: &C64| (z - w).norm() > 1e-14) {
                pts.push(z);
            }
        }
        if pts.len() < 2 {
            return Ok(QuadResult { value: C64::new(0.0, 0.0), error: 0.0 });
        }
        Ok(quad_fn(&f, &Contour::new(pts)?)?)
    }

    /// Depth of the vertical leg dropped from a point x > 0 for the Gevrey continuation,
    /// keeping |arg y|·θ below π/2.
    fn gevrey_depth(x: f64, gevrey_theta: f64) -> f64 {
        let amax = (0.45 * PI / gevrey_theta).min(0.45 * PI);
        (x * amax.tan()).min(1.0)
    }

    /// ∫_a^∞ e^{(shift − ψ)/h} θ for a > 0 along a → a − id → X − id, θ Gevrey.
    fn gevrey_tail(&self, gevrey_theta: f64, a: f64, shift: C64, h: f64) -> Result<QuadResult, CounterexError> {
        let d = Self::gevrey_depth(a, gevrey_theta);
        let far = a + 1.0 + 12.0 * h.sqrt();
        self.scaled(shift, vec![c(a, 0.0), c(a, -d), c(far, -d)], h)
    }

    /// ∫_0^a e^{(shift − ψ)/h} θ for a cutoff symbol (zero on y ≤ 0).
    fn cutoff_from_zero(&self, a: f64, shift: C64, h: f64) -> Result<QuadResult, CounterexError> {
        if a <= 0.0 {
            return Ok(QuadResult { value: C64::new(0.0, 0.0), error: 0.0 });
        }
        match self.theta {
            Symbol::Gevrey { gevrey_theta } => {
                let full = gevrey_halfline_integral(gevrey_theta, h)? * (shift / h).exp();
                let tail = self.gevrey_tail(gevrey_theta, a, shift, h)?;
                Ok(QuadResult { value: full - tail.value, error: tail.error + 1e-12 * full.norm() })
            }
            _ => self.scaled(shift, vec![c(0.0, 0.0), c(0.0, -1.0), c(a, -1.0), c(a, 0.0)], h),
        }
    }

    /// R(x) = h^{-1} ∫_x^L e^{(ψ(x) − ψ(y))/h} θ(y) dy.
    fn remainder(&self, x: f64, h: f64) -> Result<QuadResult, CounterexError> {
        let l = self.half_width;
        let sx = psi(c(x, 0.0));
        let r = match self.theta {
            Symbol::Analytic(_) => self.scaled(sx, vec![c(x, 0.0), c(x, -1.0), c(l, -1.0), c(l, 0.0)], h)?,
            _ if x <= 0.0 => self.cutoff_from_zero(l, sx, h)?,
            Symbol::Gevrey { gevrey_theta } => {
                let a = self.gevrey_tail(gevrey_theta, x, sx, h)?;
                let b = self.gevrey_tail(gevrey_theta, l, sx, h)?;
                QuadResult { value: a.value - b.value, error: a.error + b.error }
            }
            Symbol::Cr { .. } => self.scaled(sx, vec![c(x, 0.0), c(x, -1.0), c(l, -1.0), c(l, 0.0)], h)?,
        };
        Ok(QuadResult { value: r.value / h, error: r.error / h })
    }

    /// h^{-1} ∫_0^L e^{−ψ/h} θ, the initial value α(0) = −G(L) of the bounded branch.
    pub fn initial_integral(&self, h: f64) -> Result<C64, CounterexError> {
        let l = self.half_width;
        let zero = C64::new(0.0, 0.0);
        let v = match self.theta {
            Symbol::Analytic(_) => self.scaled(zero, vec![zero, c(0.0, -1.0), c(l, -1.0), c(l, 0.0)], h)?.value,
            _ => self.cutoff_from_zero(l, zero, h)?.value,
        };
        Ok(v / h)
    }

    /// α(x, h) solving h α' = (λ₁ − λ₂) α + θ with α(0) = `alpha0`; `None` selects
    /// α(0) = −h^{-1}∫_0^L e^{−ψ/h}θ, for which α(x) = −h^{-1}∫_x^L e^{(ψ(x)−ψ(y))/h}θ dy.
    pub fn alpha(&self, x: f64, h: f64, alpha0: Option<C64>) -> Result<C64, CounterexError> {
        if !(h > 0.0) {
            return Err(CounterexError::Param(format!("h must be positive, got {h}")));
        }
        let r = -self.remainder(x, h)?.value;
        match alpha0 {
            None => Ok(r),
            Some(a0) => {
                let g = self.initial_integral(h)?;
                Ok(r + (psi(c(x, 0.0)) / h).exp() * (a0 + g))
            }
        }
    }

    /// ρ(x, h) = |∫_{−x}^{x} e^{−ψ/h} θ| / (h e^{−x²/h}) for x ≥ 0.
    pub fn criterion(&self, x: f64, h: f64) -> Result<QuadResult, CounterexError> {
        let x = x.abs();
        if x == 0.0 {
            return Ok(QuadResult { value: C64::new(0.0, 0.0), error: 0.0 });
        }
        let shift = c(x * x, 0.0);
        let q = match self.theta {
            Symbol::Analytic(_) => self.scaled(shift, vec![c(-x, 0.0), c(-x, -1.0), c(x, -1.0), c(x, 0.0)], h)?,
            _ => self.cutoff_from_zero(x, shift, h)?,
        };
        Ok(QuadResult { value: q.value / h, error: q.error / h })
    }
}

/// α on the uniform grid over [−L, L] with 64 points per unit length.
#[derive(Debug, Clone, Serialize)]
pub struct AlphaProfile {
    pub h: f64,
    pub x: Vec<f64>,
    pub alpha: Vec<C64>,
}

impl AlphaProfile {
    pub fn sup(&self) -> f64 {
        self.alpha.iter().fold(0.0, |m, a| m.max(a.norm()))
    }
}

pub fn x_grid(half_width: f64) -> Vec<f64> {
    let n = (POINTS_PER_UNIT * half_width).ceil().max(1.0) as usize;
    (0..=2 * n).map(|k| half_width * (k as f64 / n as f64 - 1.0)).collect()
}

pub fn alpha_solution(ts: &TriangularSystem, h: f64, alpha0: Option<C64>) -> Result<AlphaProfile, CounterexError> {
    let x = x_grid(ts.half_width);
    let alpha = x.par_iter().map(|x| ts.alpha(*x, h, alpha0)).collect::<Result<Vec<_>, _>>()?;
    Ok(AlphaProfile { h, x, alpha })
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionRow {
    pub h: f64,
    pub x: f64,
    pub alpha_abs: f64,
    pub ratio: f64,
}

/// log sup|α| ≈ g/h + c + q log h.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthFit {
    pub g: f64,
    pub c: f64,
    pub q: f64,
    /// Max residual relative to max |log sup|α||.
    pub residual: f64,
}

pub fn growth_fit(hs: &[f64], sups: &[f64]) -> Option<GrowthFit> {
    let keep: Vec<usize> = (0..hs.len()).filter(|i| sups[*i] > 0.0 && sups[*i].is_finite()).collect();
    if keep.len() < 3 {
        return None;
    }
    let rows: Vec<Vec<f64>> = keep.iter().map(|i| vec![1.0 / hs[*i], 1.0, hs[*i].ln()]).collect();
    let y: Vec<f64> = keep.iter().map(|i| sups[*i].ln()).collect();
    let f = lstsq(&rows, &y)?;
    let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    Some(GrowthFit { g: f.coef[0], c: f.coef[1], q: f.coef[2], residual: f.max_residual / scale })
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub bounded: bool,
    pub bound: f64,
    pub class: String,
    pub half_width: f64,
    pub h_grid: Vec<f64>,
    pub sup_alpha: Vec<f64>,
    pub sup_ratio: Vec<f64>,
    /// The same test applied to sup|α| instead of sup ρ.
    pub alpha_bounded: bool,
    pub growth: Option<GrowthFit>,
    /// Some criterion integral carries a quadrature error above 1e-3 of its value.
    pub cancellation_limited: bool,
    pub rows: Vec<CriterionRow>,
}

impl Verdict {
    pub fn consistent(&self) -> bool {
        self.bounded == self.alpha_bounded
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn bounded_by(sups: &[f64], bound: f64) -> bool {
    let n = sups.len();
    let max = sups.iter().fold(0.0f64, |m, v| m.max(*v));
    max.is_finite() && max <= bound && sups[n - 1] <= (1.0 + TREND_TOL) * sups[n - 2]
}

fn class_tag(c: SymbolClass) -> String {
    match c {
        SymbolClass::Analytic => "analytic".into(),
        SymbolClass::Gevrey { s, .. } => format!("gevrey(s={s})"),
        SymbolClass::Cr { r } => format!("cr(r={r})"),
    }
}

/// Criterion ratio and bounded-branch α over the grid for every h, and the verdict.
pub fn boundedness_certificate(ts: &TriangularSystem, h_grid: &[f64], bound: f64) -> Result<Verdict, CounterexError> {
    if h_grid.len() < 4 {
        return Err(CounterexError::Param(format!("need at least 4 h values, got {}", h_grid.len())));
    }
    let mut hs = h_grid.to_vec();
    hs.sort_by(|a, b| b.total_cmp(a));
    for w in hs.windows(2) {
        if ((w[0] / w[1]) - 2.0).abs() > 1e-9 {
            return Err(CounterexError::Param(format!("h-grid must be dyadic, found {} and {}", w[0], w[1])));
        }
    }
    let xs = x_grid(ts.half_width);
    let pairs: Vec<(f64, f64)> = hs.iter().flat_map(|h| xs.iter().map(move |x| (*h, *x))).collect();
    let vals = pairs
        .par_iter()
        .map(|(h, x)| -> Result<(f64, f64, bool), CounterexError> {
            let a = ts.alpha(*x, *h, None)?;
            let q = ts.criterion(*x, *h)?;
            let limited = q.value.norm() > 0.0 && q.error > 1e-3 * q.value.norm();
            Ok((a.norm(), q.value.norm(), limited))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::with_capacity(pairs.len());
    let mut sup_alpha = vec![0.0f64; hs.len()];
    let mut sup_ratio = vec![0.0f64; hs.len()];
    let mut limited = false;
    for (k, ((h, x), (a, r, l))) in pairs.iter().zip(&vals).enumerate() {
        let i = k / xs.len();
        sup_alpha[i] = sup_alpha[i].max(*a);
        sup_ratio[i] = sup_ratio[i].max(*r);
        limited |= *l;
        rows.push(CriterionRow { h: *h, x: *x, alpha_abs: *a, ratio: *r });
    }
    let bounded = bounded_by(&sup_ratio, bound);
    let alpha_bounded = bounded_by(&sup_alpha, bound);
    log::debug!("verdict {}: sup ρ = {sup_ratio:?}, sup |α| = {sup_alpha:?}", class_tag(ts.class()));
    Ok(Verdict {
        bounded,
        bound,
        class: class_tag(ts.class()),
        half_width: ts.half_width,
        growth: growth_fit(&hs, &sup_alpha),
        h_grid: hs,
        sup_alpha,
        sup_ratio,
        alpha_bounded,
        cancellation_limited: limited,
        rows,
    })
}

/// θ(y) = y^r for y > 0, zero otherwise, run through the certificate.
pub fn cr_counterexample(r: u32, half_width: f64, h_grid: &[f64]) -> Result<Verdict, CounterexError> {
    if r < 1 {
        return Err(CounterexError::Param("r must be ≥ 1".into()));
    }
    let ts = TriangularSystem::new(Symbol::Cr { r }, 1, half_width)?;
    boundedness_certificate(&ts, h_grid, DEFAULT_BOUND)
}

/// Residual of the triangular conjugation T = (1, h^p α; 0, 1) with D = diag(λ₁, λ₂).
#[derive(Debug, Clone, Serialize)]
pub struct TriangularCheck {
    pub h: f64,
    /// sup |h^p (h α' − (λ₁ − λ₂) α − θ)| with α' by spectral differentiation.
    pub offdiag_residual: f64,
    pub sup_alpha: f64,
    pub sup_t: f64,
    pub sup_t_inv: f64,
}

/// Samples the bounded-branch α on Gauss panels of length ≤ h/4 and measures the
/// off-diagonal entry of T^{-1}𝒜T − hT^{-1}T' − D.
pub fn triangular_check(ts: &TriangularSystem, h: f64) -> Result<TriangularCheck, CounterexError> {
    let rule = panel16();
    let l = ts.half_width;
    let panels = ((2.0 * l) / (0.25 * h)).ceil().max(1.0) as usize;
    let len = 2.0 * l / panels as f64;
    let hp = h.powi(ts.p as i32);
    let per = (0..panels)
        .into_par_iter()
        .map(|p| -> Result<(f64, f64), CounterexError> {
            let x0 = -l + len * p as f64;
            let xs: Vec<f64> = rule.nodes.iter().map(|t| x0 + len * t).collect();
            let a = xs.iter().map(|x| ts.alpha(*x, h, None)).collect::<Result<Vec<_>, _>>()?;
            let mut res = 0.0f64;
            let mut sup = 0.0f64;
            for j in 0..xs.len() {
                let da: C64 = rule.diff[j].iter().zip(&a).map(|(d, v)| v * *d).sum::<C64>() / len;
                let th = ts.theta.eval_real(xs[j], h)?;
                let lam = TriangularSystem::lambda1(xs[j]) - TriangularSystem::lambda2(xs[j]);
                res = res.max((da * h - lam * a[j] - th).norm() * hp);
                sup = sup.max(a[j].norm());
            }
            Ok((res, sup))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (res, sup) = per.iter().fold((0.0f64, 0.0f64), |m, v| (m.0.max(v.0), m.1.max(v.1)));
    let off = hp * sup;
    Ok(TriangularCheck { h, offdiag_residual: res, sup_alpha: sup, sup_t: 1.0 + off, sup_t_inv: 1.0 + off })
}

#[cfg(test)]
mod tests;
