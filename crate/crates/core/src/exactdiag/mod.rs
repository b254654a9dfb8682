//! Exact block-diagonalizers by Picard iteration on Duhamel fixed-point equations.
//!
//! The unknown α = (α12, α21) solves
//! h α' = 𝒜(x)α + Θ12 + h^p(Θ11α12 − α12Θ22) − h^{2p}α12Θ21α12 (and the mirror for α21),
//! and T = I + h^p offdiag(α) block-diagonalizes h W' = (A + h^pΘ) W.

mod finite;
mod gap;
mod infinity;
pub mod lattice;
mod picard;
mod singular;

pub use finite::{choose_gamma, contour_independence, solve_finite, Diamond};
pub use gap::{solve_gap_cr, GapInterval};
pub use infinity::{solve_infinity, Wedge};
pub use singular::{resonance_gate, resonant_orders, solve_singular, SlitDisk};

use crate::mexpr::{EvalError, MatrixFunction};
use crate::num::{blockdiag_part, offdiag, CMat, C64};
use crate::spectral::SpectralError;
use lattice::{Axis, Lattice};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("no admissible direction γ: eigenvalue differences surround 0 (best margin {margin:.3e})")]
    NoDirection { margin: f64 },
    #[error("half-angle {eps} too large: eigenvalue directions allow at most {max:.4}")]
    AngleTooLarge { eps: f64, max: f64 },
    #[error("Picard iteration diverged at iteration {iteration} (contraction estimate {ratio:.3}); h too large")]
    Divergence { iteration: usize, ratio: f64 },
    #[error("Picard iteration stalled after {iterations} iterations (last difference {diff:.3e})")]
    NoConvergence { iterations: usize, diff: f64 },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("numerical-range ordering violated at x = {x}: {msg}")]
    NumericalRange { x: f64, msg: String },
    #[error("resonance at h = {h}: eigenvalue difference {mu} equals {order}·h; no analytic conjugator is guaranteed")]
    Resonance { h: f64, mu: C64, order: usize },
    #[error("lattice would have {0} points; reduce the domain or raise h")]
    TooLarge(usize),
}

/// Coordinates in which the lattice lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    Identity,
    /// x = −ln z, so z h W_z = B(z) W becomes h W_x = −B(e^{−x}) W.
    NegLog,
}

impl Chart {
    pub fn to_chart(self, z: C64) -> C64 {
        match self {
            Chart::Identity => z,
            Chart::NegLog => -z.ln(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Chart::Identity => "identity",
            Chart::NegLog => "neg_log",
        }
    }
}

/// h W' = (A + h^p Θ) W with block sizes (m, n − m).
///
/// `a` may carry off-diagonal blocks; they are moved into Θ.
#[derive(Debug, Clone)]
pub struct System {
    pub a: MatrixFunction,
    pub theta: Option<MatrixFunction>,
    pub m: usize,
    pub p: i32,
    pub chart: Chart,
}

impl System {
    pub fn new(a: MatrixFunction, theta: Option<MatrixFunction>, m: usize, p: i32) -> Result<System, ExactError> {
        let n = a.dim();
        if m == 0 || m >= n {
            return Err(ExactError::Param(format!("block size m = {m} must lie in [1, {})", n)));
        }
        if let Some(t) = &theta {
            if t.dim() != n {
                return Err(ExactError::Param(format!("Θ is {}×{} but A is {n}×{n}", t.dim(), t.dim())));
            }
        }
        if p < 1 {
            return Err(ExactError::Param(format!("p = {p} must be ≥ 1")));
        }
        Ok(System { a, theta, m, p, chart: Chart::Identity })
    }

    pub fn with_chart(mut self, chart: Chart) -> System {
        self.chart = chart;
        self
    }

    pub fn n(&self) -> usize {
        self.a.dim()
    }

    /// (blockdiag A, Θ) at chart point x.
    pub fn parts(&self, x: C64, h: f64) -> Result<(CMat, CMat), ExactError> {
        let z = match self.chart {
            Chart::Identity => x,
            Chart::NegLog => (-x).exp(),
        };
        let a = self.a.eval(z, h)?;
        let mut th = offdiag(&a, self.m) / C64::new(h.powi(self.p), 0.0);
        if let Some(t) = &self.theta {
            th += t.eval(z, h)?;
        }
        let a = blockdiag_part(&a, self.m);
        Ok(match self.chart {
            Chart::Identity => (a, th),
            Chart::NegLog => (-a, -th),
        })
    }

    pub fn diagonal_blocks(&self, x: C64, h: f64) -> Result<(CMat, CMat), ExactError> {
        let (a, _) = self.parts(x, h)?;
        let n = self.n();
        let m = self.m;
        Ok((a.view((0, 0), (m, m)).into_owned(), a.view((m, m), (n - m, n - m)).into_owned()))
    }
}

/// Knobs shared by the solvers.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub panel_max: f64,
    pub max_points: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-11, max_iter: 100, panel_max: 0.25, max_points: 3_000_000 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PicardLog {
    pub iterations: usize,
    pub diffs: Vec<f64>,
    /// Largest ratio of successive differences above the noise floor.
    pub max_ratio: f64,
}

#[derive(Debug, Clone)]
pub enum Grid {
    Lattice(Lattice),
    /// Real points origin + s, s on the axis.
    Line { axis: Axis, origin: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Finite,
    Infinity,
    Singular,
    GapCr,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Finite => "finite",
            SolverKind::Infinity => "infinity",
            SolverKind::Singular => "singular",
            SolverKind::GapCr => "gap_cr",
        }
    }
}

/// T = I + h^p offdiag(α) sampled on a grid, with its residual certificate.
#[derive(Debug, Clone)]
pub struct Conjugator {
    pub kind: SolverKind,
    pub h: f64,
    pub p: i32,
    pub m: usize,
    pub q: usize,
    pub chart: Chart,
    pub grid: Grid,
    /// Per grid point: vec(α12) (m×q, column-major) then vec(α21).
    pub u: Vec<C64>,
    /// Points inside the certified region.
    pub certified: Vec<bool>,
    /// sup ‖offdiag(T⁻¹(A + h^pΘ)T − hT⁻¹T')‖_F over certified points.
    pub certificate: f64,
    /// sup deviation of the diagonal blocks from A_jj + h^p(Θ_jj + h^pΘ_jk α_kj).
    pub beta_error: f64,
    pub picard: PicardLog,
    pub meta: Value,
}

impl Conjugator {
    pub fn width(&self) -> usize {
        2 * self.m * self.q
    }

    pub fn points(&self) -> Vec<C64> {
        match &self.grid {
            Grid::Lattice(l) => {
                let np = l.np();
                (0..np * np).map(|i| l.point(i / np, i % np)).collect()
            }
            Grid::Line { axis, origin } => axis.pts.iter().map(|s| C64::new(origin + s, 0.0)).collect(),
        }
    }

    fn unpack(&self, v: &[C64]) -> (CMat, CMat) {
        let (m, q) = (self.m, self.q);
        (CMat::from_column_slice(m, q, &v[..m * q]), CMat::from_column_slice(q, m, &v[m * q..]))
    }

    /// (α12, α21) at chart point x by interpolation, None outside the grid.
    pub fn alpha_at(&self, x: C64) -> Option<(CMat, CMat)> {
        let w = self.width();
        let v = match &self.grid {
            Grid::Lattice(l) => l.interpolate(&self.u, w, x)?,
            Grid::Line { axis, origin } => {
                if x.im.abs() > 1e-12 {
                    return None;
                }
                axis.interpolate(&self.u, w, x.re - origin)?
            }
        };
        Some(self.unpack(&v))
    }

    /// α at a point of the original variable (z for the log chart).
    pub fn alpha_at_original(&self, z: C64) -> Option<(CMat, CMat)> {
        self.alpha_at(self.chart.to_chart(z))
    }

    /// T = I + h^p offdiag(α) at chart point x.
    pub fn t_at(&self, x: C64) -> Option<CMat> {
        let (a12, a21) = self.alpha_at(x)?;
        let (m, q) = (self.m, self.q);
        let hp = C64::new(self.h.powi(self.p), 0.0);
        let mut t = crate::num::eye(m + q);
        t.view_mut((0, m), (m, q)).copy_from(&(a12 * hp));
        t.view_mut((m, 0), (q, m)).copy_from(&(a21 * hp));
        Some(t)
    }

    /// sup over certified points of max |α_ij|.
    pub fn sup_alpha(&self) -> f64 {
        let w = self.width();
        self.u.chunks(w).zip(&self.certified).filter(|(_, c)| **c).flat_map(|(v, _)| v.iter().map(|z| z.norm())).fold(0.0, f64::max)
    }

    /// sup ‖T − I‖_max = h^p sup |α|.
    pub fn t_minus_i_sup(&self) -> f64 {
        self.h.powi(self.p) * self.sup_alpha()
    }

    /// Up to `max` sample points along the middle of the grid.
    pub fn default_samples(&self, max: usize) -> Vec<C64> {
        match &self.grid {
            Grid::Lattice(l) => {
                let np = l.np();
                let step = np.div_ceil(max.max(1)).max(1);
                (0..np).step_by(step).map(|i| l.point(i, i)).collect()
            }
            Grid::Line { axis, origin } => {
                let step = axis.npts().div_ceil(max.max(1)).max(1);
                axis.pts.iter().step_by(step).map(|s| C64::new(origin + s, 0.0)).collect()
            }
        }
    }

    /// JSON export: samples (chart coordinates), α values as [re, im] pairs, certificate and metadata.
    pub fn to_json(&self, samples: &[C64]) -> Value {
        let pair = |z: &C64| json!([z.re, z.im]);
        let rows: Vec<Value> = samples
            .iter()
            .filter_map(|x| {
                let (a12, a21) = self.alpha_at(*x)?;
                Some(json!({
                    "x": pair(x),
                    "alpha12": a12.iter().map(pair).collect::<Vec<_>>(),
                    "alpha21": a21.iter().map(pair).collect::<Vec<_>>(),
                }))
            })
            .collect();
        json!({
            "solver": self.kind.name(),
            "chart": self.chart.name(),
            "h": self.h,
            "p": self.p,
            "block_sizes": [self.m, self.q],
            "grid_points": self.u.len() / self.width().max(1),
            "certificate": self.certificate,
            "beta_error": self.beta_error,
            "t_minus_i_sup": self.t_minus_i_sup(),
            "picard": {
                "iterations": self.picard.iterations,
                "max_ratio": self.picard.max_ratio,
                "diffs": self.picard.diffs,
            },
            "meta": self.meta,
            "samples": rows,
        })
    }
}

#[cfg(test)]
mod tests;
