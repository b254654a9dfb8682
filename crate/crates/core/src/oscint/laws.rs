use super::contour::{quad_fn, Contour};
use super::OscError;
use crate::fit::lstsq;
use crate::num::C64;
use std::f64::consts::PI;

/// |I(h)| ≈ C·h^p·exp(−c/h^{1/s}); `inv_s = 0` is the pure power law.
#[derive(Debug, Clone)]
pub struct AsymptoticFit {
    pub hs: Vec<f64>,
    pub values: Vec<C64>,
    pub inv_s: f64,
    pub prefactor: f64,
    pub p: f64,
    pub c: f64,
    /// Max |log|I| − model| relative to max |log|I||.
    pub residual: f64,
    /// 1/s re-estimated from the data with s free (None for power laws).
    pub inv_s_free: Option<f64>,
}

impl AsymptoticFit {
    pub fn predict(&self, h: f64) -> f64 {
        let e = if self.inv_s > 0.0 { -self.c * h.powf(-self.inv_s) } else { 0.0 };
        self.prefactor * h.powf(self.p) * e.exp()
    }
}

fn fit_fixed(hs: &[f64], logs: &[f64], inv_s: f64) -> Option<(f64, f64, f64, f64)> {
    let rows: Vec<Vec<f64>> = hs
        .iter()
        .map(|h| if inv_s > 0.0 { vec![1.0, h.ln(), -h.powf(-inv_s)] } else { vec![1.0, h.ln()] })
        .collect();
    let f = lstsq(&rows, logs)?;
    let c = if inv_s > 0.0 { f.coef[2] } else { 0.0 };
    Some((f.coef[0], f.coef[1], c, f.max_residual))
}

/// Least squares on log|I| with regressors {1, log h, −h^{−1/s}} (or {1, log h} when `inv_s` = 0).
pub fn fit_law(hs: &[f64], values: &[C64], inv_s: f64) -> Result<AsymptoticFit, OscError> {
    if values.iter().all(|v| v.norm() == 0.0) {
        return Err(OscError::ZeroSignal);
    }
    let keep: Vec<usize> = (0..hs.len()).filter(|i| values[*i].norm() > 1e-280).collect();
    let need = if inv_s > 0.0 { 3 } else { 2 };
    if keep.len() < need {
        return Err(OscError::BadParameter(format!("only {} usable h values, need {need}", keep.len())));
    }
    let h: Vec<f64> = keep.iter().map(|i| hs[*i]).collect();
    let logs: Vec<f64> = keep.iter().map(|i| values[*i].norm().ln()).collect();
    let (lc, p, c, res) = fit_fixed(&h, &logs, inv_s).ok_or_else(|| OscError::BadParameter("singular fit".into()))?;
    let scale = logs.iter().fold(1.0f64, |m, l| m.max(l.abs()));
    let inv_s_free = if inv_s > 0.0 { Some(free_exponent(&h, &logs, inv_s)) } else { None };
    Ok(AsymptoticFit { hs: hs.to_vec(), values: values.to_vec(), inv_s, prefactor: lc.exp(), p, c, residual: res / scale, inv_s_free })
}

/// Re-estimates 1/s: with (C, p) from the fixed-s fit, log C + p log h − log|I| ≈ c h^{−1/s}
/// gives 1/s as a log-log slope; iterated to a fixed point.
fn free_exponent(hs: &[f64], logs: &[f64], start: f64) -> f64 {
    let mut inv = start;
    for _ in 0..50 {
        let Some((lc, p, _, _)) = fit_fixed(hs, logs, inv) else { break };
        let y: Vec<f64> = hs.iter().zip(logs).map(|(h, l)| lc + p * h.ln() - l).collect();
        if y.iter().any(|v| *v <= 0.0) {
            break;
        }
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let lh: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
        let next = -crate::fit::line_fit(&lh, &ly).0;
        if !next.is_finite() || next <= 0.0 {
            break;
        }
        if (next - inv).abs() < 1e-10 {
            return next;
        }
        inv = 0.5 * (inv + next);
    }
    inv
}

/// I(h) = ∫_0^∞ e^{−y²/h − 2iy/h} e^{−y^{−θ}} dy along deformed rays in w = y/h^{1−1/s}.
pub fn gevrey_halfline_integral(gevrey_theta: f64, h: f64) -> Result<C64, OscError> {
    if !(gevrey_theta > 0.0) || !(h > 0.0) {
        return Err(OscError::BadParameter(format!("need θ > 0 and h > 0, got θ = {gevrey_theta}, h = {h}")));
    }
    let s = 1.0 + 1.0 / gevrey_theta;
    let alpha = 1.0 - 1.0 / s;
    let beta = C64::from_polar(1.0, -PI * alpha / 2.0);
    let k = h.powf(-1.0 / s);
    let q = h.powf(1.0 - 2.0 / s);
    let f = move |w: C64| -> Result<C64, crate::mexpr::EvalError> {
        if w.norm() == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let wt = (w.ln() * -gevrey_theta).exp();
        Ok(((C64::new(0.0, -2.0) * w - wt) * k - w * w * q).exp())
    };
    let contour = if s < 2.0 {
        let rate = 2.0 * k * (PI * alpha / 2.0).sin();
        Contour::new(vec![C64::new(0.0, 0.0), beta * (2.0 + 60.0 / rate)])?
    } else {
        let bstar = C64::from_polar(1.0, -PI / 4.0);
        let rate = std::f64::consts::SQRT_2 * k;
        if s == 2.0 {
            Contour::new(vec![C64::new(0.0, 0.0), bstar * (2.0 + 60.0 / rate)])?
        } else {
            Contour::new(vec![C64::new(0.0, 0.0), beta * 2.0, bstar * 2.0, bstar * (4.0 + 60.0 / rate)])?
        }
    };
    Ok(quad_fn(&f, &contour)?.value * h.powf(alpha))
}

/// Values of the Gevrey half-line integral on `hs` and the fit with s fixed.
pub fn gevrey_halfline_asymptotics(gevrey_theta: f64, hs: &[f64]) -> Result<AsymptoticFit, OscError> {
    let s = 1.0 + 1.0 / gevrey_theta;
    let values = hs.iter().map(|h| gevrey_halfline_integral(gevrey_theta, *h)).collect::<Result<Vec<_>, _>>()?;
    let fit = fit_law(hs, &values, 1.0 / s)?;
    if fit.residual > 0.1 {
        return Err(OscError::FitResidual(fit.residual));
    }
    Ok(fit)
}

/// ∫_0^x e^{−y²/h − 2iy/h} y^r dy along [0, −i, x − i, x].
pub fn cr_halfline_integral(r: u32, x: f64, h: f64) -> Result<C64, OscError> {
    if r < 1 {
        return Err(OscError::BadParameter("r must be ≥ 1".into()));
    }
    let f = move |y: C64| -> Result<C64, crate::mexpr::EvalError> { Ok(((y * y + C64::new(0.0, 2.0) * y) / -h).exp() * y.powi(r as i32)) };
    let c = Contour::new(vec![C64::new(0.0, 0.0), C64::new(0.0, -1.0), C64::new(x, -1.0), C64::new(x, 0.0)])?;
    Ok(quad_fn(&f, &c)?.value)
}

/// Pure power-law fit of the C^r half-line integral over [−2, 2].
pub fn cr_halfline_rate(r: u32, hs: &[f64]) -> Result<AsymptoticFit, OscError> {
    let values = hs.iter().map(|h| cr_halfline_integral(r, 2.0, *h)).collect::<Result<Vec<_>, _>>()?;
    let fit = fit_law(hs, &values, 0.0)?;
    if fit.residual > 0.1 {
        return Err(OscError::FitResidual(fit.residual));
    }
    Ok(fit)
}
