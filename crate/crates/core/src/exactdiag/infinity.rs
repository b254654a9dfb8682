use super::lattice::{Axis, Lattice, Route};
use super::picard::{certify_lattice, picard_lattice, Fields, GroupSpec};
use super::{Conjugator, ExactError, Grid, SolveOptions, SolverKind, System};
use crate::num::C64;
use crate::spectral::{dichotomy_group, eig, invariant_factor, BlockSylvester};
use serde_json::json;
use std::f64::consts::FRAC_PI_4;

/// Wedge {x : |arg(x − M')| ≤ ε}, truncated so that Re x ≤ R is covered with margin.
#[derive(Debug, Clone, Copy)]
pub struct Wedge {
    pub apex: f64,
    pub eps: f64,
    pub r: f64,
}

impl Wedge {
    pub fn gamma_plus(&self) -> C64 {
        C64::from_polar(1.0, self.eps)
    }

    pub fn gamma_minus(&self) -> C64 {
        C64::from_polar(1.0, -self.eps)
    }
}

/// e^{−30}: far-edge layers are ignored once their weight drops below this.
pub(super) const TAIL_WIDTHS: f64 = 30.0;

/// Slowest kernel decay rate along the travel directions of each group.
pub(super) fn wedge_rate(mus: &[C64], groups_of: &[u8], eps: f64) -> Result<f64, ExactError> {
    let da = C64::from_polar(1.0, eps);
    let db = C64::from_polar(1.0, -eps);
    let mut eta = f64::INFINITY;
    for (mu, g) in mus.iter().zip(groups_of) {
        let rates = match g {
            0 => vec![-(mu * da).re, -(mu * db).re],
            1 => vec![(mu * db).re],
            _ => vec![(mu * da).re],
        };
        for r in rates {
            if r <= 0.0 {
                return Err(ExactError::AngleTooLarge { eps, max: (std::f64::consts::FRAC_PI_2 - mu.arg().abs()).abs() });
            }
            eta = eta.min(r);
        }
    }
    Ok(eta)
}

/// Lattice origin `apex`, directions e^{±iε}, side `len`; groups by three-way dichotomy of 𝒜(ref).
pub(super) fn solve_wedge(sys: &System, h: f64, apex: f64, eps: f64, len: f64, reference: C64, kind: SolverKind, keep: &(dyn Fn(C64) -> bool + Sync), opts: &SolveOptions) -> Result<(Conjugator, f64), ExactError> {
    let (a11, a22) = sys.diagonal_blocks(reference, h)?;
    let calm = BlockSylvester::new(a11.clone(), a22.clone()).kron_matrix();
    let e = eig(&calm)?;
    let groups_of: Vec<u8> = e.values.iter().map(|mu| dichotomy_group(*mu, eps)).collect::<Result<_, _>>()?;
    let da = C64::from_polar(1.0, eps);
    let db = C64::from_polar(1.0, -eps);
    let eta = wedge_rate(&e.values, &groups_of, eps)?;
    let l_min = (h / eta).min(opts.panel_max);
    let axis = Axis::graded(len, l_min, opts.panel_max);
    let lat = Lattice { origin: C64::new(apex, 0.0), da, db, axis };
    if lat.len() > opts.max_points {
        return Err(ExactError::TooLarge(lat.len()));
    }
    let mut groups = Vec::new();
    for (g, route) in [(0u8, Route::TwoLeg { forward: true }), (1, Route::BackwardB), (2, Route::BackwardA)] {
        let sel: Vec<bool> = groups_of.iter().map(|x| *x == g).collect();
        if sel.iter().any(|s| *s) {
            groups.push(GroupSpec { factor: invariant_factor(&e.schur, &sel)?, route });
        }
    }
    let np = lat.np();
    let points: Vec<C64> = (0..np * np).map(|i| lat.point(i / np, i % np)).collect();
    let fields = Fields::sample(sys, h, &points, a11, a22)?;
    let (u, picard) = picard_lattice(&fields, &lat, &groups, h, opts)?;
    let delta = (len / 2.0).min(TAIL_WIDTHS * h / eta);
    let tail = (-eta * delta / h).exp();
    let (certified, certificate, beta_error) = certify_lattice(&fields, &lat, &u, h, &|a, b| len - a >= delta && len - b >= delta && keep(C64::new(apex, 0.0) + da * a + db * b));
    log::info!("wedge solve h={h}: {} points, {} Picard iterations, certificate {certificate:.2e}, tail bound {tail:.1e}", points.len(), picard.iterations);
    let meta = json!({
        "apex": apex,
        "eps": eps,
        "side": len,
        "eta": eta,
        "tail_margin": delta,
        "tail_bound": tail,
        "panels": lat.axis.panels(),
        "groups": groups_of,
    });
    let conj = Conjugator {
        kind,
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
    };
    Ok((conj, delta))
}

/// Solves the Riccati fixed point on a wedge toward +∞, with limits taken at Re x = R.
pub fn solve_infinity(sys: &System, h: f64, wedge: &Wedge, opts: &SolveOptions) -> Result<Conjugator, ExactError> {
    if !(wedge.eps > 0.0 && wedge.eps < FRAC_PI_4) {
        return Err(ExactError::Param(format!("wedge half-angle must lie in (0, π/4), got {}", wedge.eps)));
    }
    if wedge.r <= wedge.apex {
        return Err(ExactError::Param(format!("truncation R = {} must exceed the apex {}", wedge.r, wedge.apex)));
    }
    let len = (wedge.r - wedge.apex) / wedge.eps.cos();
    let (conj, _) = solve_wedge(sys, h, wedge.apex, wedge.eps, len, C64::new(wedge.r, 0.0), SolverKind::Infinity, &|_| true, opts)?;
    let eta = conj.meta["eta"].as_f64().unwrap_or(0.0);
    if wedge.r < wedge.apex + 10.0 / eta {
        return Err(ExactError::Param(format!("R = {} must be at least M' + 10/η = {:.3}", wedge.r, wedge.apex + 10.0 / eta)));
    }
    Ok(conj)
}

impl Conjugator {
    /// Fitted exponential decay rate of sup |α| along the real axis between x0 and x1.
    pub fn real_axis_decay(&self, x0: f64, x1: f64, n: usize) -> Option<f64> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let x = x0 + (x1 - x0) * i as f64 / (n - 1) as f64;
            let (a12, a21) = self.alpha_at(C64::new(x, 0.0))?;
            let v = crate::num::max_abs(&a12).max(crate::num::max_abs(&a21));
            if v > 0.0 {
                xs.push(x);
                ys.push(v.ln());
            }
        }
        if xs.len() < 2 {
            return None;
        }
        Some(-crate::fit::line_fit(&xs, &ys).0)
    }
}
