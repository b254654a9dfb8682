use super::lattice::{Axis, Lattice, Route};
use super::picard::{certify_lattice, picard_lattice, Fields, GroupSpec};
use super::{Conjugator, ExactError, Grid, SolveOptions, SolverKind, System};
use crate::num::{c, max_abs, C64};
use crate::spectral::{eig, invariant_factor, BlockSylvester};
use serde_json::json;
use std::f64::consts::{FRAC_PI_2, PI};

/// Diamond {x : |arg((x − z_*)/γ)|, |arg((z^* − x)/γ)| ≤ ε} with z_*, z^* = x_c ∓ Mγ.
#[derive(Debug, Clone, Copy)]
pub struct Diamond {
    pub half_length: f64,
    pub eps: f64,
    /// Chosen automatically when None.
    pub gamma: Option<C64>,
}

impl Diamond {
    pub fn new(half_length: f64, eps: f64) -> Diamond {
        Diamond { half_length, eps, gamma: None }
    }

    pub fn z_star(&self, center: C64, gamma: C64) -> C64 {
        center - gamma * self.half_length
    }

    pub fn z_up_star(&self, center: C64, gamma: C64) -> C64 {
        center + gamma * self.half_length
    }
}

/// Scans 64 unimodular directions for the one maximizing min |Re(γμ)|.
/// Returns (γ, margin relative to max |μ|).
pub fn choose_gamma(mus: &[C64]) -> Result<(C64, f64), ExactError> {
    let scale = mus.iter().map(|m| m.norm()).fold(0.0, f64::max).max(1e-300);
    let mut best = (c(1.0, 0.0), -1.0);
    for j in 0..64 {
        let g = C64::from_polar(1.0, 2.0 * PI * j as f64 / 64.0);
        let margin = mus.iter().map(|m| (g * m).re.abs()).fold(f64::INFINITY, f64::min) / scale;
        if margin > best.1 + 1e-14 {
            best = (g, margin);
        }
    }
    if best.1 <= 1e-8 {
        return Err(ExactError::NoDirection { margin: best.1 });
    }
    Ok(best)
}

/// Solves the Riccati fixed point on a diamond around `center`.
pub fn solve_finite(sys: &System, center: C64, h: f64, diamond: &Diamond, opts: &SolveOptions) -> Result<Conjugator, ExactError> {
    if !(diamond.half_length > 0.0) || !(diamond.eps > 0.0 && diamond.eps < FRAC_PI_2) {
        return Err(ExactError::Param(format!("diamond needs M > 0 and ε in (0, π/2), got M = {}, ε = {}", diamond.half_length, diamond.eps)));
    }
    let (a11, a22) = sys.diagonal_blocks(center, h)?;
    let bs = BlockSylvester::new(a11.clone(), a22.clone());
    let calm = bs.kron_matrix();
    let e = eig(&calm)?;
    let gamma = match diamond.gamma {
        Some(g) => g / g.norm(),
        None => choose_gamma(&e.values)?.0,
    };
    let max_eps = e.values.iter().map(|mu| (FRAC_PI_2 - (gamma * mu).arg().abs()).abs()).fold(f64::INFINITY, f64::min);
    if diamond.eps >= max_eps {
        return Err(ExactError::AngleTooLarge { eps: diamond.eps, max: max_eps });
    }
    let eps = diamond.eps;
    let da = gamma * C64::from_polar(1.0, eps);
    let db = gamma * C64::from_polar(1.0, -eps);
    let eta = e.values.iter().flat_map(|mu| [(mu * da).re.abs(), (mu * db).re.abs()]).fold(f64::INFINITY, f64::min);
    let len = diamond.half_length / eps.cos();
    let l_min = (h / eta).min(opts.panel_max);
    let axis = Axis::graded(len, l_min, opts.panel_max);
    let lat = Lattice { origin: diamond.z_star(center, gamma), da, db, axis };
    if lat.len() > opts.max_points {
        return Err(ExactError::TooLarge(lat.len()));
    }
    let mut groups = Vec::new();
    for (stable, route) in [(true, Route::TwoLeg { forward: true }), (false, Route::TwoLeg { forward: false })] {
        let sel: Vec<bool> = e.values.iter().map(|mu| ((gamma * mu).re < 0.0) == stable).collect();
        if sel.iter().any(|s| *s) {
            groups.push(GroupSpec { factor: invariant_factor(&e.schur, &sel)?, route });
        }
    }
    let np = lat.np();
    let points: Vec<C64> = (0..np * np).map(|i| lat.point(i / np, i % np)).collect();
    let fields = Fields::sample(sys, h, &points, a11, a22)?;
    let (u, picard) = picard_lattice(&fields, &lat, &groups, h, opts)?;
    let (certified, certificate, beta_error) = certify_lattice(&fields, &lat, &u, h, &|_, _| true);
    log::info!("finite solve h={h}: {} points, {} Picard iterations, certificate {certificate:.2e}", points.len(), picard.iterations);
    let meta = json!({
        "center": [center.re, center.im],
        "gamma": [gamma.re, gamma.im],
        "eps": eps,
        "half_length": diamond.half_length,
        "eta": eta,
        "panels": lat.axis.panels(),
    });
    Ok(Conjugator {
        kind: SolverKind::Finite,
        h,
        p: sys.p,
        m: fields.m,
        q: fields.q,
        chart: sys.chart,
        grid: Grid::Lattice(lat),
        u,
        certified,
        certificate,
        beta_error,
        picard,
        meta,
    })
}

/// Largest change of α between the diamond at ε and at (1 ± frac)ε, sampled inside the
/// smallest of the three.
pub fn contour_independence(sys: &System, center: C64, h: f64, diamond: &Diamond, frac: f64, opts: &SolveOptions) -> Result<f64, ExactError> {
    let base = solve_finite(sys, center, h, diamond, opts)?;
    let gamma = base.meta["gamma"].as_array().map(|v| c(v[0].as_f64().unwrap_or(1.0), v[1].as_f64().unwrap_or(0.0))).unwrap_or(c(1.0, 0.0));
    let mut fixed = *diamond;
    fixed.gamma = Some(gamma);
    let lo = Diamond { eps: diamond.eps * (1.0 - frac), ..fixed };
    let hi = Diamond { eps: diamond.eps * (1.0 + frac), ..fixed };
    let sol_lo = solve_finite(sys, center, h, &lo, opts)?;
    let sol_hi = solve_finite(sys, center, h, &hi, opts)?;
    let zs = lo.z_star(center, gamma);
    let l = lo.half_length / lo.eps.cos();
    let (da, db) = (gamma * C64::from_polar(1.0, lo.eps), gamma * C64::from_polar(1.0, -lo.eps));
    let mut worst: f64 = 0.0;
    for i in 1..20 {
        for j in 1..20 {
            let z = zs + da * (l * i as f64 / 20.0) + db * (l * j as f64 / 20.0);
            let a = base.alpha_at(z);
            for other in [&sol_lo, &sol_hi] {
                if let (Some((x12, x21)), Some((y12, y21))) = (&a, other.alpha_at(z)) {
                    let d = max_abs(&(x12 - y12)).max(max_abs(&(x21 - y21)));
                    worst = worst.max(d);
                }
            }
        }
    }
    Ok(worst)
}
