//! Contour quadrature for oscillatory integrals ∫ e^{φ/h} a dy, saddle-adapted
//! evaluation, Gevrey norms and asymptotic-law fits.

mod contour;
mod laws;
mod norm;
mod symbol;

pub use contour::{find_saddle, phase_derivatives, quad_contour, quad_fn, saddle_deformed_quad, stationary_phase_estimate, Contour, QuadResult};
pub use laws::{cr_halfline_integral, cr_halfline_rate, fit_law, gevrey_halfline_asymptotics, gevrey_halfline_integral, AsymptoticFit};
pub use norm::{gevrey_norm, sample_periodic, GevreyNorm};
pub use symbol::{Symbol, SymbolClass, SymbolError};

use crate::mexpr::EvalError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OscError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("bad contour: {0}")]
    BadContour(String),
    #[error("quadrature on segment {segment} did not settle after {levels} refinements")]
    NoConvergence { segment: usize, levels: usize },
    #[error("symbol is not analytic; contour deformation is not available")]
    NotAnalytic,
    #[error("degenerate saddle: |φ''| = {0:.2e}")]
    DegenerateSaddle(f64),
    #[error("integral vanishes identically on the h-grid; nothing to fit")]
    ZeroSignal,
    #[error("fit residual {0:.3} exceeds 10%; extend the h-grid")]
    FitResidual(f64),
    #[error("Gevrey norm diverges (dominant mode {mode})")]
    NormDiverges { mode: i64 },
    #[error("{0}")]
    BadParameter(String),
}

#[cfg(test)]
mod tests;
