use super::infinity::{solve_wedge, wedge_rate, TAIL_WIDTHS};
use super::{Chart, Conjugator, ExactError, SolveOptions, SolverKind, System};
use crate::num::{c, max_abs, C64};
use crate::spectral::{dichotomy_group, eig, BlockSylvester};
use std::f64::consts::PI;

/// Slit disk around z = 0 (cut along the negative reals), mapped by x = −ln z to a wedge
/// with apex at −ln(r_apex).
#[derive(Debug, Clone, Copy)]
pub struct SlitDisk {
    pub r_apex: f64,
    pub eps: f64,
    /// Smallest modulus whose whole circle (minus the cut) must be covered.
    pub rho_min: f64,
    /// Radius of the slit disk on which the conjugator is certified.
    pub radius: f64,
}

impl Default for SlitDisk {
    fn default() -> Self {
        SlitDisk { r_apex: 50.0, eps: 0.7, rho_min: 0.25, radius: 1.0 }
    }
}

/// Orders j ≤ jmax with an eigenvalue μ of 𝒜 at z = 0 equal to j·h.
pub fn resonant_orders(sys: &System, h: f64, jmax: usize) -> Result<Vec<(usize, C64)>, ExactError> {
    let base = System { chart: Chart::Identity, ..sys.clone() };
    let (a11, a22) = base.diagonal_blocks(c(0.0, 0.0), h)?;
    let e = eig(&BlockSylvester::new(a11, a22).kron_matrix())?;
    let mut out = Vec::new();
    for mu in e.values {
        let j = mu / h;
        let r = j.re.round();
        if r >= 1.0 && r <= jmax as f64 && (j - r).norm() <= 1e-9 * r.max(1.0) {
            out.push((r as usize, mu));
        }
    }
    Ok(out)
}

/// max |[z^j] offdiag Θ|·ρ^j and max |offdiag Θ| on |z| = ρ, by the trapezoidal rule.
fn offdiag_taylor(sys: &System, h: f64, j: usize, rho: f64) -> Result<(f64, f64), ExactError> {
    let base = System { chart: Chart::Identity, ..sys.clone() };
    let n = 256;
    let mut acc = crate::num::zeros(base.n(), base.n());
    let mut scale: f64 = 0.0;
    for k in 0..n {
        let t = 2.0 * PI * k as f64 / n as f64;
        let z = C64::from_polar(rho, t);
        let (_, th) = base.parts(z, h)?;
        let th = crate::num::offdiag(&th, base.m);
        scale = scale.max(max_abs(&th));
        acc += th * (C64::from_polar(1.0, -(j as f64) * t) / n as f64);
    }
    Ok((max_abs(&acc), scale))
}

/// First resonant order whose off-diagonal Taylor coefficient of Θ at z = 0 is nonzero.
pub fn resonance_gate(sys: &System, h: f64, rho: f64) -> Result<Option<(usize, C64)>, ExactError> {
    for (order, mu) in resonant_orders(sys, h, 10_000)? {
        let (coef, scale) = offdiag_taylor(sys, h, order, rho)?;
        if coef > 1e-10 * scale.max(1e-300) {
            return Ok(Some((order, mu)));
        }
        log::warn!("h = {h} is resonant at order {order}, but the matching Taylor coefficient vanishes ({coef:.1e})");
    }
    Ok(None)
}

/// Conjugator for z h W' = B(z, h) W on a slit disk, solved in the log chart.
pub fn solve_singular(sys: &System, h: f64, disk: &SlitDisk, opts: &SolveOptions) -> Result<Conjugator, ExactError> {
    if !(disk.r_apex > disk.radius && disk.radius >= disk.rho_min && disk.rho_min > 0.0) {
        return Err(ExactError::Param(format!("slit disk needs r_apex > radius ≥ rho_min > 0, got {}, {}, {}", disk.r_apex, disk.radius, disk.rho_min)));
    }
    if let Some((order, mu)) = resonance_gate(sys, h, disk.rho_min)? {
        return Err(ExactError::Resonance { h, mu, order });
    }
    let chart_sys = System { chart: Chart::NegLog, ..sys.clone() };
    let eps = disk.eps;
    let apex = -disk.r_apex.ln();
    let far = C64::new(60.0, 0.0);
    let (a11, a22) = chart_sys.diagonal_blocks(far, h)?;
    let mus = eig(&BlockSylvester::new(a11, a22).kron_matrix())?.values;
    let groups: Vec<u8> = mus.iter().map(|mu| dichotomy_group(*mu, eps)).collect::<Result<_, _>>()?;
    let eta = wedge_rate(&mus, &groups, eps)?;
    let need = ((-disk.rho_min.ln() - apex) / eps.cos() + PI / eps.sin()) / 2.0;
    let len = need + TAIL_WIDTHS * h / eta + 0.5;
    let reference = C64::new(apex + 2.0 * len * eps.cos(), 0.0);
    let (mut conj, delta) = solve_wedge(&chart_sys, h, apex, eps, len, reference, SolverKind::Singular, &|x| x.re >= -disk.radius.ln(), opts)?;
    let x0 = C64::new(apex + 2.0 * (len - delta) * eps.cos(), 0.0);
    if let Some((a12, a21)) = conj.alpha_at(x0) {
        conj.meta["alpha_at_zero"] = serde_json::json!({
            "alpha12": a12.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "alpha21": a21.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "sampled_at_modulus": (-x0.re).exp(),
            "max_abs": max_abs(&a12).max(max_abs(&a21)),
        });
    }
    conj.meta["r_apex"] = serde_json::json!(disk.r_apex);
    conj.meta["rho_min"] = serde_json::json!(disk.rho_min);
    conj.meta["radius"] = serde_json::json!(disk.radius);
    Ok(conj)
}
