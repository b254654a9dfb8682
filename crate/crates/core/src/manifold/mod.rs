//! Stable manifolds of u' = f(u) at a hyperbolic equilibrium by the Duhamel fixed point
//! on a complex wedge of rays t = τ e^{iν}.

mod solve;

pub use solve::{solve_stable_manifold, tangency_check, ManifoldOptions, ManifoldSolution, RayTrajectory, TangencyReport};

use crate::mexpr::{EvalError, Expression, ParseError};
use crate::num::{zeros, CMat, C64};
use crate::spectral::{eig, invariant_factor, InvariantFactor, SpectralError};
use nalgebra::DVector;
use thiserror::Error;

pub type CVec = DVector<C64>;

#[derive(Debug, Error)]
pub enum ManifoldError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("|f(u*)| = {residual:.3e} exceeds 1e-10; u* is not an equilibrium")]
    NotEquilibrium { residual: f64 },
    #[error("stable datum has a component {offset:.3e} outside the stable subspace")]
    NotStable { offset: f64 },
    #[error("|w_s| = {norm:.3e} exceeds the admissible radius {delta:.3e}")]
    TooLarge { norm: f64, delta: f64 },
    #[error("Picard map is not contracting: ratio {ratio:.3} at iteration {iteration}; reduce |w_s|")]
    Contraction { iteration: usize, ratio: f64 },
    #[error("Picard iteration stalled after {iterations} steps (weighted difference {diff:.3e})")]
    NoConvergence { iterations: usize, diff: f64 },
    #[error("{0}")]
    Param(String),
}

/// Components f_1, …, f_n in the state variables u1, …, un.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub components: Vec<Expression>,
}

impl VectorField {
    pub fn parse(src: &[&str]) -> Result<Self, ManifoldError> {
        let components = src.iter().map(|s| Expression::parse(s)).collect::<Result<Vec<_>, _>>()?;
        let vf = VectorField { components };
        let used = vf.components.iter().map(Expression::var_count).max().unwrap_or(0);
        if used > vf.dim() {
            return Err(ManifoldError::Param(format!("field of dimension {} refers to u{used}", vf.dim())));
        }
        Ok(vf)
    }

    /// f(u) = u² − u.
    pub fn logistic() -> Self {
        Self::parse(&["pow(u,2) - u"]).expect("builtin parses")
    }

    /// f(u, v) = (−u + uv, v + u²).
    pub fn saddle() -> Self {
        Self::parse(&["-u1 + u1*u2", "u2 + pow(u1,2)"]).expect("builtin parses")
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, u: &CVec) -> Result<CVec, ManifoldError> {
        let vars: Vec<C64> = u.iter().copied().collect();
        let zero = C64::new(0.0, 0.0);
        let v = self.components.iter().map(|e| e.eval_vars(&vars, zero, 0.0)).collect::<Result<Vec<_>, _>>()?;
        Ok(CVec::from_vec(v))
    }

    /// df(u) by five-point differences along each coordinate.
    pub fn jacobian(&self, u: &CVec) -> Result<CMat, ManifoldError> {
        let n = self.dim();
        let mut j = zeros(n, n);
        for k in 0..n {
            let s = 1e-3 * (1.0 + u[k].norm());
            let at = |m: f64| -> Result<CVec, ManifoldError> {
                let mut v = u.clone();
                v[k] += C64::new(s * m, 0.0);
                self.eval(&v)
            };
            let d = (at(-2.0)? - at(2.0)? + (at(1.0)? - at(-1.0)?) * C64::new(8.0, 0.0)) / C64::new(12.0 * s, 0.0);
            j.set_column(k, &d);
        }
        Ok(j)
    }
}

/// Linearization at u* with the stable / centre / unstable split of σ(A).
#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub u_star: CVec,
    pub a: CMat,
    pub eigenvalues: Vec<C64>,
    pub pi_s: CMat,
    pub pi_c: CMat,
    pub pi_u: CMat,
    /// min |Re μ| over stable and unstable μ.
    pub spectral_gap: f64,
    /// Hyperbolic margin 0.99 · `spectral_gap`.
    pub eta: f64,
    /// Largest wedge half-angle on which every hyperbolic e^{μt} keeps its dichotomy.
    pub nu_max: f64,
    pub has_center: bool,
    /// The centre block is not diagonalizable.
    pub defective_center: bool,
    pub stable: Option<InvariantFactor>,
    pub center_unstable: Option<InvariantFactor>,
}

pub const CENTER_TOL: f64 = 1e-8;

pub fn linearize(f: &VectorField, u_star: &CVec) -> Result<Equilibrium, ManifoldError> {
    let n = f.dim();
    if u_star.len() != n {
        return Err(ManifoldError::Param(format!("u* has {} components, field has {n}", u_star.len())));
    }
    let residual = f.eval(u_star)?.norm();
    if residual > 1e-10 {
        return Err(ManifoldError::NotEquilibrium { residual });
    }
    let a = f.jacobian(u_star)?;
    let e = eig(&a)?;
    let cls: Vec<i8> = e.values.iter().map(|m| if m.re < -CENTER_TOL { -1 } else if m.re > CENTER_TOL { 1 } else { 0 }).collect();
    let factor = |want: &dyn Fn(i8) -> bool| -> Result<Option<InvariantFactor>, SpectralError> {
        let sel: Vec<bool> = cls.iter().map(|c| want(*c)).collect();
        if sel.iter().any(|s| *s) {
            Ok(Some(invariant_factor(&e.schur, &sel)?))
        } else {
            Ok(None)
        }
    };
    let proj = |f: &Option<InvariantFactor>| f.as_ref().map(|f| f.projector()).unwrap_or_else(|| zeros(n, n));
    let fs = factor(&|c| c < 0)?;
    let fc = factor(&|c| c == 0)?;
    let fu = factor(&|c| c > 0)?;
    let fcu = factor(&|c| c >= 0)?;
    let has_center = fc.is_some();
    let defective_center = match &fc {
        Some(f) => {
            let k = f.dim();
            let mean = f.t.trace() / k as f64;
            let shifted = &f.t - CMat::identity(k, k) * mean;
            k > 1 && shifted.iter().any(|v| v.norm() > 1e-7 * (1.0 + a.norm()))
        }
        None => false,
    };
    let hyper: Vec<C64> = e.values.iter().zip(&cls).filter(|(_, c)| **c != 0).map(|(m, c)| *m * *c as f64).collect();
    let spectral_gap = hyper.iter().fold(f64::INFINITY, |m, mu| m.min(mu.re.abs()));
    let eta = 0.99 * spectral_gap;
    let nu_max = hyper.iter().fold(std::f64::consts::FRAC_PI_2, |m, mu| m.min(std::f64::consts::FRAC_PI_2 - mu.arg().abs()));
    if has_center {
        log::warn!("centre eigenvalues present: the solution is unique only within the bounded-solution class");
    }
    Ok(Equilibrium {
        u_star: u_star.clone(),
        pi_s: proj(&fs),
        pi_c: proj(&fc),
        pi_u: proj(&fu),
        a,
        eigenvalues: e.values,
        spectral_gap,
        eta,
        nu_max,
        has_center,
        defective_center,
        stable: fs,
        center_unstable: fcu,
    })
}

impl Equilibrium {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Decay rate per unit Re t of the stable flow on the ray of angle `nu`.
    pub fn wedge_rate(&self, nu: f64) -> f64 {
        let rates = self
            .eigenvalues
            .iter()
            .filter(|m| m.re.abs() > CENTER_TOL)
            .map(|m| if m.re < 0.0 { -*m } else { *m })
            .map(|m| m.norm() * ((m.arg().abs() + nu.abs()).cos()) / nu.cos());
        0.99 * rates.fold(f64::INFINITY, f64::min)
    }

    /// sup e^{η Re t} |e^{At} Π_s| over `samples` points per ray on the rays of angle
    /// 0, ±ν with τ ∈ [0, τ_max]: the empirical constant C(η).
    pub fn stable_bound(&self, eta: f64, nu: f64, tau_max: f64, samples: usize) -> f64 {
        let Some(f) = &self.stable else { return 0.0 };
        let mut sup = 0.0f64;
        for ang in [-nu, 0.0, nu] {
            for k in 0..=samples {
                let t = C64::from_polar(tau_max * k as f64 / samples as f64, ang);
                let m = &f.v * (&f.t * t).exp() * &f.w;
                sup = sup.max(crate::num::norm2(&m) * (eta * t.re).exp());
            }
        }
        sup
    }
}
