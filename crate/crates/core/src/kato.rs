//! Kato transport of spectral-subspace bases and the initial block-diagonalization.

use crate::mexpr::{EvalError, MatrixFunction};
use crate::num::{cond2, eye, fd_step, fro, inverse, max_abs, offdiag, split_blocks, CMat, C64};
use crate::spectral::{spectral_split, GroupingRule, SpectralError, SpectralSplit, DELTA_MIN};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KatoError {
    #[error("at x={x}: {err}")]
    Spectral { x: C64, err: SpectralError },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("projector jumps by {jump:.3} between x={x0} and x={x1}; refine the grid")]
    CoarseGrid { x0: C64, x1: C64, jump: f64 },
    #[error("invariance drift {drift:.3e} exceeds 1e-6; refine the grid")]
    Drift { drift: f64 },
    #[error("transported basis is ill-conditioned (cond {cond:.3e}) at x={x}")]
    IllConditioned { x: C64, cond: f64 },
    #[error("initial basis must have {want} columns, got {got}")]
    BadInitial { want: usize, got: usize },
}

/// Spectral projectors of A(·, h) sampled along a grid with continued grouping.
#[derive(Debug, Clone)]
pub struct ProjectorField<'a> {
    pub a: &'a MatrixFunction,
    pub h: f64,
    pub grid: Vec<C64>,
    pub splits: Vec<SpectralSplit>,
    pub delta_min: f64,
}

impl<'a> ProjectorField<'a> {
    pub fn build(a: &'a MatrixFunction, h: f64, grid: Vec<C64>, rule: &GroupingRule) -> Result<Self, KatoError> {
        let mut splits: Vec<SpectralSplit> = Vec::with_capacity(grid.len());
        for (i, x) in grid.iter().enumerate() {
            let m = a.eval(*x, h)?;
            let r = if i == 0 {
                rule.clone()
            } else {
                let prev = &splits[i - 1];
                GroupingRule::Nearest { mean1: prev.mean(1), mean2: prev.mean(2) }
            };
            let s = spectral_split(&m, &r, DELTA_MIN).map_err(|err| KatoError::Spectral { x: *x, err })?;
            if i > 0 {
                let jump = fro(&(&s.pi1 - &splits[i - 1].pi1));
                if jump >= 0.1 {
                    return Err(KatoError::CoarseGrid { x0: grid[i - 1], x1: *x, jump });
                }
            }
            splits.push(s);
        }
        Ok(ProjectorField { a, h, grid, splits, delta_min: DELTA_MIN })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn rank1(&self) -> usize {
        self.splits[0].f1.dim()
    }

    /// Π1 at an arbitrary point, grouped by nearness to the given means.
    pub fn pi1_near(&self, x: C64, mean1: C64, mean2: C64) -> Result<CMat, KatoError> {
        let m = self.a.eval(x, self.h)?;
        let s = spectral_split(&m, &GroupingRule::Nearest { mean1, mean2 }, self.delta_min).map_err(|err| KatoError::Spectral { x, err })?;
        Ok(s.pi1)
    }

    /// Π1 and its derivative along `dir` at x (fourth-order central differences).
    pub fn pi1_and_derivative(&self, x: C64, dir: C64, mean1: C64, mean2: C64) -> Result<(CMat, CMat), KatoError> {
        let s = dir * fd_step(x);
        let p = |k: f64| self.pi1_near(x + s * k, mean1, mean2);
        let (pm2, pm1, p0, pp1, pp2) = (p(-2.0)?, p(-1.0)?, p(0.0)?, p(1.0)?, p(2.0)?);
        let d = (pm2 - pp2 + (pp1 - pm1) * C64::new(8.0, 0.0)) / (s * 12.0);
        Ok((p0, d))
    }
}

#[derive(Debug, Clone)]
pub struct TransportedBasis {
    pub grid: Vec<C64>,
    pub t_hat: Vec<CMat>,
    /// d T̂/dx from the transport equation itself.
    pub dt_hat: Vec<CMat>,
    pub cond: Vec<f64>,
    /// max_x ‖Π_j T̂_j − T̂_j‖ over both groups.
    pub invariance_error: f64,
}

/// The generator [Π', Π] = Π'Π − ΠΠ' at x; this order keeps Π T̂ = T̂.
fn kato_generator(pf: &ProjectorField, x: C64, dir: C64, mean1: C64, mean2: C64) -> Result<CMat, KatoError> {
    let (p, dp) = pf.pi1_and_derivative(x, dir, mean1, mean2)?;
    Ok(&dp * &p - &p * &dp)
}

/// Integrates T̂' = [Π', Π] T̂ by classical RK4 along the grid.
pub fn transport(pf: &ProjectorField, t0: &CMat) -> Result<TransportedBasis, KatoError> {
    let n = pf.dim();
    if t0.ncols() != n || t0.nrows() != n {
        return Err(KatoError::BadInitial { want: n, got: t0.ncols() });
    }
    let k = pf.rank1();
    let grid = pf.grid.clone();
    let mut t_hat = Vec::with_capacity(grid.len());
    let mut dt_hat = Vec::with_capacity(grid.len());
    let mut cur = t0.clone();
    for i in 0..grid.len() {
        let (m1, m2) = (pf.splits[i].mean(1), pf.splits[i].mean(2));
        let x = grid[i];
        let g0 = kato_generator(pf, x, C64::new(1.0, 0.0), m1, m2)?;
        t_hat.push(cur.clone());
        dt_hat.push(&g0 * &cur);
        if i + 1 == grid.len() {
            break;
        }
        let dx = grid[i + 1] - x;
        let dir = dx / dx.norm();
        let gmid = kato_generator(pf, x + dx * 0.5, dir, m1, m2)?;
        let gend = kato_generator(pf, grid[i + 1], dir, m1, m2)?;
        let k1 = &g0 * &cur;
        let k2 = &gmid * (&cur + &k1 * (dx * 0.5));
        let k3 = &gmid * (&cur + &k2 * (dx * 0.5));
        let k4 = &gend * (&cur + &k3 * dx);
        cur = &cur + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * (dx / 6.0);
    }
    let mut invariance_error: f64 = 0.0;
    let mut cond = Vec::with_capacity(grid.len());
    for (i, t) in t_hat.iter().enumerate() {
        let s = &pf.splits[i];
        let t1 = t.columns(0, k).into_owned();
        let t2 = t.columns(k, n - k).into_owned();
        invariance_error = invariance_error.max(max_abs(&(&s.pi1 * &t1 - &t1))).max(max_abs(&(&s.pi2 * &t2 - &t2)));
        let c = cond2(t);
        if c > 1e8 {
            return Err(KatoError::IllConditioned { x: grid[i], cond: c });
        }
        cond.push(c);
    }
    if invariance_error > 1e-6 {
        return Err(KatoError::Drift { drift: invariance_error });
    }
    Ok(TransportedBasis { grid, t_hat, dt_hat, cond, invariance_error })
}

/// Default initial basis: Schur bases of the two invariant subspaces at the first grid point.
pub fn default_initial_basis(pf: &ProjectorField) -> CMat {
    let s = &pf.splits[0];
    let n = pf.dim();
    let k = s.f1.dim();
    let mut t = CMat::zeros(n, n);
    t.columns_mut(0, k).copy_from(&s.f1.v);
    t.columns_mut(k, n - k).copy_from(&s.f2.v);
    t
}

/// Output of the initial reduction: per grid point the blocks of
/// T̂⁻¹AT̂ + h(T̂⁻¹BT̂ − T̂⁻¹T̂') with the off-diagonal part divided by h.
#[derive(Debug, Clone)]
pub struct InitialBlockDiag {
    pub grid: Vec<C64>,
    pub m: usize,
    pub a11: Vec<CMat>,
    pub a22: Vec<CMat>,
    pub theta1: Vec<CMat>,
    pub theta2: Vec<CMat>,
    /// sup_x ‖offdiag(T̂⁻¹AT̂)‖.
    pub residual: f64,
    pub basis: TransportedBasis,
}

pub fn initial_blockdiag(
    a: &MatrixFunction,
    b: Option<&MatrixFunction>,
    h: f64,
    grid: Vec<C64>,
    rule: &GroupingRule,
) -> Result<InitialBlockDiag, KatoError> {
    let pf = ProjectorField::build(a, h, grid, rule)?;
    let t0 = default_initial_basis(&pf);
    let basis = transport(&pf, &t0)?;
    let m = pf.rank1();
    let mut out = InitialBlockDiag {
        grid: pf.grid.clone(),
        m,
        a11: vec![],
        a22: vec![],
        theta1: vec![],
        theta2: vec![],
        residual: 0.0,
        basis: basis.clone(),
    };
    for (i, x) in pf.grid.iter().enumerate() {
        let t = &basis.t_hat[i];
        let ti = inverse(t).ok_or(KatoError::IllConditioned { x: *x, cond: f64::INFINITY })?;
        let am = a.eval(*x, h)?;
        let d = &ti * am * t;
        out.residual = out.residual.max(fro(&offdiag(&d, m)));
        let mut rest = -(&ti * &basis.dt_hat[i]);
        if let Some(b) = b {
            rest += &ti * b.eval(*x, h)? * t;
        }
        let full = &d + &rest * C64::new(h, 0.0);
        let (a11, _, _, a22) = split_blocks(&full, m);
        let (_, r12, r21, _) = split_blocks(&rest, m);
        out.a11.push(a11);
        out.a22.push(a22);
        out.theta1.push(r12);
        out.theta2.push(r21);
    }
    Ok(out)
}

/// Uniform grid on [a, b] with `per_unit` points per unit length (at least 2).
pub fn uniform_grid(a: f64, b: f64, per_unit: usize) -> Vec<C64> {
    let n = (((b - a) * per_unit as f64).ceil() as usize).max(1) + 1;
    crate::num::linspace(a, b, n).into_iter().map(|x| C64::new(x, 0.0)).collect()
}

pub fn identity_basis(n: usize) -> CMat {
    eye(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{c, from_real_diag};

    fn rotation() -> MatrixFunction {
        MatrixFunction::parse(r#"{"builtin":"rotation_family"}"#, 2).unwrap()
    }

    #[test]
    fn constant_family_is_not_moved() {
        let a = MatrixFunction::constant(from_real_diag(&[1.0, -1.0]));
        let pf = ProjectorField::build(&a, 0.1, uniform_grid(0.0, 1.0, 50), &GroupingRule::SignOfRealPart).unwrap();
        let t0 = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)]);
        let tb = transport(&pf, &t0).unwrap();
        for t in &tb.t_hat {
            assert!(fro(&(t - &t0)) < 1e-14);
        }
    }

    #[test]
    fn rotation_family_invariance_and_orthonormality() {
        let a = rotation();
        let grid = uniform_grid(0.0, 1.0, 400);
        let pf = ProjectorField::build(&a, 0.1, grid, &GroupingRule::SignOfRealPart).unwrap();
        let tb = transport(&pf, &eye(2)).unwrap();
        assert!(tb.invariance_error <= 1e-8, "{}", tb.invariance_error);
        for (x, t) in tb.grid.iter().zip(&tb.t_hat) {
            assert!(fro(&(t.transpose() * t - eye(2))) <= 1e-8);
            // closed form: Π1 = R diag(1,0) Rᵀ, T̂ = R
            let (cs, sn) = (x.re.cos(), x.re.sin());
            let r = CMat::from_row_slice(2, 2, &[c(cs, 0.0), c(-sn, 0.0), c(sn, 0.0), c(cs, 0.0)]);
            assert!(fro(&(t - r)) <= 1e-8);
        }
    }

    #[test]
    fn rotation_family_blockdiag() {
        let a = rotation();
        let h = 0.1;
        let out = initial_blockdiag(&a, None, h, uniform_grid(0.0, 1.0, 400), &GroupingRule::SignOfRealPart).unwrap();
        assert!(out.residual <= 1e-10, "{}", out.residual);
        // T̂ = R(x)·diag(phases), so |θ1| = |θ2| = 1 and θ1·θ2 = −1
        for (t1, t2) in out.theta1.iter().zip(&out.theta2) {
            assert!((t1[(0, 0)].norm() - 1.0).abs() < 1e-8);
            assert!((t1[(0, 0)] * t2[(0, 0)] + 1.0).norm() < 1e-8);
        }
        // finite-difference oracle for T̂' on the grid
        let step = 1.0 / 400.0;
        let d = crate::num::fd_uniform(&out.basis.t_hat, step);
        for i in 0..out.grid.len() {
            let ti = inverse(&out.basis.t_hat[i]).unwrap();
            let g = -(&ti * &d[i]);
            assert!((g[(0, 1)] - out.theta1[i][(0, 0)]).norm() < 1e-8);
            assert!((g[(1, 0)] - out.theta2[i][(0, 0)]).norm() < 1e-8);
        }
    }

    #[test]
    fn already_block_diagonal() {
        let a = MatrixFunction::constant(from_real_diag(&[2.0, 1.0, -1.0]));
        let out = initial_blockdiag(&a, None, 0.1, uniform_grid(0.0, 1.0, 20), &GroupingRule::SignOfRealPart).unwrap();
        for t in out.theta1.iter().chain(&out.theta2) {
            assert!(max_abs(t) < 1e-14);
        }
        assert!(max_abs(&(&out.a11[3] - from_real_diag(&[2.0, 1.0]))) < 1e-14);
    }
}
