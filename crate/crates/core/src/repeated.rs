//! Repeated block-diagonalization: order k → k+1 by exact Riccati solves per grid point.

use crate::fit::loglog_slope;
use crate::mexpr::{EvalError, MatrixFunction};
use crate::num::{cond2, eye, fd_uniform, fro, inverse, join_blocks, split_blocks, zeros, CMat, C64};
use crate::spectral::{sylvester_solve, BlockSylvester, SpectralError};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RepeatedError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("at x={x}: {err}")]
    Spectral { x: f64, err: SpectralError },
    #[error("Newton did not converge at x={x}, h={h} (residual {residual:.3e}); h is above the contraction threshold, largest working h ≈ {h_star:?}")]
    Newton { x: f64, h: f64, residual: f64, h_star: Option<f64> },
    #[error("x-grid must be uniform with at least 5 points")]
    Grid,
    #[error("chain is ill-conditioned (cond {0:.3e})")]
    IllConditioned(f64),
    #[error("target order {target} must lie in [{order}, {max}]")]
    Order { target: u32, order: u32, max: u32 },
}

pub const MAX_ORDER: u32 = 6;
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX: usize = 25;

/// h W' = [diag(a11, a22) + h^k offdiag(θ1, θ2)] W sampled on a uniform real grid.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub m: usize,
    pub xs: Vec<f64>,
    pub h: f64,
    pub order: u32,
    pub a11: Vec<CMat>,
    pub a22: Vec<CMat>,
    pub theta1: Vec<CMat>,
    pub theta2: Vec<CMat>,
}

impl BlockSystem {
    /// Block-diagonal part of `a` plus h^k times the off-diagonal part of `theta`.
    pub fn from_functions(a: &MatrixFunction, theta: &MatrixFunction, m: usize, order: u32, xs: &[f64], h: f64) -> Result<Self, RepeatedError> {
        let mut s = BlockSystem { m, xs: xs.to_vec(), h, order, a11: vec![], a22: vec![], theta1: vec![], theta2: vec![] };
        for x in xs {
            let z = C64::new(*x, 0.0);
            let (a11, _, _, a22) = split_blocks(&a.eval(z, h)?, m);
            let (_, t12, t21, _) = split_blocks(&theta.eval(z, h)?, m);
            s.a11.push(a11);
            s.a22.push(a22);
            s.theta1.push(t12);
            s.theta2.push(t21);
        }
        s.check_grid()?;
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.a11[0].nrows() + self.a22[0].nrows()
    }

    fn check_grid(&self) -> Result<f64, RepeatedError> {
        if self.xs.len() < 5 {
            return Err(RepeatedError::Grid);
        }
        let d = self.xs[1] - self.xs[0];
        for w in self.xs.windows(2) {
            if ((w[1] - w[0]) - d).abs() > 1e-9 * d.abs().max(1.0) || d <= 0.0 {
                return Err(RepeatedError::Grid);
            }
        }
        Ok(d)
    }

    pub fn step_size(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    fn hk(&self) -> f64 {
        self.h.powi(self.order as i32)
    }

    /// Full coefficient at grid index i.
    pub fn coefficient(&self, i: usize) -> CMat {
        let s = C64::new(self.hk(), 0.0);
        join_blocks(&self.a11[i], &(&self.theta1[i] * s), &(&self.theta2[i] * s), &self.a22[i])
    }

    /// Block-diagonal part at grid index i.
    pub fn diagonal(&self, i: usize) -> CMat {
        join_blocks(&self.a11[i], &zeros(self.m, self.n() - self.m), &zeros(self.n() - self.m, self.m), &self.a22[i])
    }

    /// sup_x ‖h^k offdiag(θ)‖_F.
    pub fn offdiag_sup(&self) -> f64 {
        let hk = self.hk();
        (0..self.xs.len()).map(|i| hk * (fro(&self.theta1[i]).powi(2) + fro(&self.theta2[i]).powi(2)).sqrt()).fold(0.0, f64::max)
    }

    /// sup_x ‖θ^k‖_F without the h^k prefactor.
    pub fn theta_sup(&self) -> f64 {
        (0..self.xs.len()).map(|i| (fro(&self.theta1[i]).powi(2) + fro(&self.theta2[i]).powi(2)).sqrt()).fold(0.0, f64::max)
    }

    /// Minimum over the grid of the eigenvalue separation of a11 and a22.
    pub fn separation(&self) -> Result<f64, RepeatedError> {
        let mut s = f64::INFINITY;
        for (i, x) in self.xs.iter().enumerate() {
            let bs = BlockSylvester::new(self.a11[i].clone(), self.a22[i].clone());
            s = s.min(bs.separation().map_err(|err| RepeatedError::Spectral { x: *x, err })?);
        }
        Ok(s)
    }
}

/// Solves a11 α − α a22 + θ − c α θ' α = 0 by damped Newton seeded with the Sylvester solution.
pub fn riccati_newton(a11: &CMat, a22: &CMat, th: &CMat, thp: &CMat, c: f64) -> Result<(CMat, usize, f64), SpectralError> {
    let cc = C64::new(c, 0.0);
    let f = |a: &CMat| -> CMat { a11 * a - a * a22 + th - a * thp * a * cc };
    let zero_t = zeros(a22.nrows(), a11.nrows());
    let (mut alpha, _) = sylvester_solve(&BlockSylvester::new(a11.clone(), a22.clone()), th, &zero_t)?;
    let scale = || fro(a11).max(fro(a22));
    let mut r = f(&alpha);
    let mut rn = fro(&r);
    for it in 0..=NEWTON_MAX {
        if rn <= NEWTON_TOL * (scale() * fro(&alpha) + fro(th)).max(1e-300) {
            return Ok((alpha, it, rn));
        }
        if it == NEWTON_MAX {
            break;
        }
        let b1 = a11 - &alpha * thp * cc;
        let b2 = a22 + thp * &alpha * cc;
        let (delta, _) = sylvester_solve(&BlockSylvester::new(b1, b2), &r, &zero_t)?;
        let mut lam = 1.0;
        loop {
            let cand = &alpha + &delta * C64::new(lam, 0.0);
            let rc = f(&cand);
            let rcn = fro(&rc);
            if rcn < rn || lam < 1.0 / 64.0 {
                alpha = cand;
                r = rc;
                rn = rcn;
                break;
            }
            lam *= 0.5;
        }
    }
    Err(SpectralError::SingularSylvester(rn))
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    /// T_k = I + h^k offdiag(α12, α21) per grid point.
    pub t: Vec<CMat>,
    pub alpha12: Vec<CMat>,
    pub alpha21: Vec<CMat>,
    pub newton_iterations: usize,
    pub next: BlockSystem,
}

/// One repeated-diagonalization step.
pub fn step(bs: &BlockSystem) -> Result<StepOutput, RepeatedError> {
    let dx = bs.check_grid()?;
    let hk = bs.hk();
    let c = hk * hk;
    let solved: Vec<Result<(CMat, CMat, usize), RepeatedError>> = (0..bs.xs.len())
        .into_par_iter()
        .map(|i| {
            let x = bs.xs[i];
            let newton_err = |e: SpectralError| match e {
                SpectralError::SingularSylvester(r) if r > 0.0 => RepeatedError::Newton { x, h: bs.h, residual: r, h_star: None },
                err => RepeatedError::Spectral { x, err },
            };
            let (a12, i1, _) = riccati_newton(&bs.a11[i], &bs.a22[i], &bs.theta1[i], &bs.theta2[i], c).map_err(newton_err)?;
            let (a21, i2, _) = riccati_newton(&bs.a22[i], &bs.a11[i], &bs.theta2[i], &bs.theta1[i], c).map_err(newton_err)?;
            Ok((a12, a21, i1.max(i2)))
        })
        .collect();
    let mut alpha12 = Vec::with_capacity(bs.xs.len());
    let mut alpha21 = Vec::with_capacity(bs.xs.len());
    let mut newton_iterations = 0;
    for r in solved {
        let (a, b, it) = r?;
        alpha12.push(a);
        alpha21.push(b);
        newton_iterations = newton_iterations.max(it);
    }
    let d12 = fd_uniform(&alpha12, dx);
    let d21 = fd_uniform(&alpha21, dx);
    let m = bs.m;
    let q = bs.n() - m;
    let hkc = C64::new(hk, 0.0);
    let mut next = BlockSystem { m, xs: bs.xs.clone(), h: bs.h, order: bs.order + 1, a11: vec![], a22: vec![], theta1: vec![], theta2: vec![] };
    let mut t = Vec::with_capacity(bs.xs.len());
    let hk1 = bs.h.powi(bs.order as i32 + 1);
    for i in 0..bs.xs.len() {
        let ti = join_blocks(&eye(m), &(&alpha12[i] * hkc), &(&alpha21[i] * hkc), &eye(q));
        let dt = join_blocks(&zeros(m, m), &(&d12[i] * hkc), &(&d21[i] * hkc), &zeros(q, q));
        let inv = inverse(&ti).ok_or(RepeatedError::IllConditioned(f64::INFINITY))?;
        let mm = &inv * bs.coefficient(i) * &ti - &inv * dt * C64::new(bs.h, 0.0);
        let (m11, m12, m21, m22) = split_blocks(&mm, m);
        next.a11.push(m11);
        next.a22.push(m22);
        next.theta1.push(m12 / C64::new(hk1, 0.0));
        next.theta2.push(m21 / C64::new(hk1, 0.0));
        t.push(ti);
    }
    Ok(StepOutput { t, alpha12, alpha21, newton_iterations, next })
}

/// Factors T_{k+1}, …, T_K and their product 𝒯 = T_{k+1} T_{k+2} ⋯ T_K per grid point,
/// so that W = 𝒯 W_K.
#[derive(Debug, Clone)]
pub struct ConjugatorChain {
    pub factors: Vec<Vec<CMat>>,
    pub composed: Vec<CMat>,
    /// Composed product after each step (prefixes of the chain).
    pub prefixes: Vec<Vec<CMat>>,
}

impl ConjugatorChain {
    pub fn identity(n: usize, points: usize) -> Self {
        ConjugatorChain { factors: vec![], composed: vec![eye(n); points], prefixes: vec![] }
    }

    pub fn push(&mut self, t: Vec<CMat>) {
        for (c, f) in self.composed.iter_mut().zip(&t) {
            *c = &*c * f;
        }
        self.prefixes.push(self.composed.clone());
        self.factors.push(t);
    }

    pub fn max_cond(&self) -> f64 {
        self.composed.iter().map(cond2).fold(1.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub chain: ConjugatorChain,
    /// Systems of order k, k+1, …, K.
    pub systems: Vec<BlockSystem>,
    pub newton_iterations: Vec<usize>,
    /// sup_x ‖T_j − I‖ per step.
    pub t_minus_i: Vec<f64>,
    pub conjugation_residual: f64,
    /// FD noise floor estimate of the residual.
    pub fd_floor: f64,
}

pub fn run(bs: &BlockSystem, target: u32) -> Result<RunOutput, RepeatedError> {
    if target < bs.order || target > MAX_ORDER {
        return Err(RepeatedError::Order { target, order: bs.order, max: MAX_ORDER });
    }
    let mut chain = ConjugatorChain::identity(bs.n(), bs.xs.len());
    let mut systems = vec![bs.clone()];
    let mut newton_iterations = vec![];
    let mut t_minus_i = vec![];
    while systems.last().map(|s| s.order).unwrap_or(0) < target {
        let cur = systems.last().expect("nonempty");
        let out = step(cur)?;
        t_minus_i.push(out.t.iter().map(|t| fro(&(t - eye(bs.n())))).fold(0.0, f64::max));
        newton_iterations.push(out.newton_iterations);
        chain.push(out.t);
        systems.push(out.next);
    }
    let cond = chain.max_cond();
    if cond > 1e8 {
        return Err(RepeatedError::IllConditioned(cond));
    }
    let last = systems.last().expect("nonempty");
    let conjugation_residual = conjugation_residual(bs, &chain, last)?;
    let amax = chain.composed.iter().map(fro).fold(0.0, f64::max);
    let fd_floor = f64::EPSILON * amax * bs.h / bs.step_size();
    Ok(RunOutput { chain, systems, newton_iterations, t_minus_i, conjugation_residual, fd_floor })
}

/// sup_x ‖h𝒯' + 𝒯D − A𝒯‖ with D the block-diagonal part of `reduced`.
pub fn conjugation_residual(original: &BlockSystem, chain: &ConjugatorChain, reduced: &BlockSystem) -> Result<f64, RepeatedError> {
    let dx = original.check_grid()?;
    let dt = fd_uniform(&chain.composed, dx);
    let h = C64::new(original.h, 0.0);
    let mut r: f64 = 0.0;
    for i in 0..original.xs.len() {
        let t = &chain.composed[i];
        let res = &dt[i] * h + t * reduced.diagonal(i) - original.coefficient(i) * t;
        r = r.max(fro(&res));
    }
    Ok(r)
}

/// Largest h = h0/2^j (j < 12) for which one step converges.
pub fn estimate_h_star<F>(build: F, h0: f64) -> Option<f64>
where
    F: Fn(f64) -> Result<BlockSystem, RepeatedError>,
{
    let mut h = h0;
    for _ in 0..12 {
        if let Ok(bs) = build(h) {
            if step(&bs).is_ok() {
                return Some(h);
            }
        }
        h *= 0.5;
    }
    None
}

/// One row of the residual report.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ResidualRow {
    pub order: u32,
    pub h: f64,
    pub sup_residual: f64,
    pub fitted_slope: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ResidualReport {
    pub rows: Vec<ResidualRow>,
    /// Fitted slope of sup_x ‖h^k θ^k‖ per order k.
    pub order_slopes: Vec<(u32, f64)>,
    /// Fitted slope of sup_x ‖T_k − I‖ per step (order of the input system).
    pub t_slopes: Vec<(u32, f64)>,
    /// Fitted slope of ‖𝒯^{s+1} − 𝒯^s‖ per step.
    pub chain_increment_slopes: Vec<(u32, f64)>,
    pub conjugation_residuals: Vec<(f64, f64)>,
    pub conjugation_slope: f64,
    pub max_cond: f64,
    pub max_newton_iterations: usize,
}

/// Runs the chain on every h of the grid and fits the order laws.
pub fn run_over_h<F>(build: F, h_grid: &[f64], target: u32) -> Result<(ResidualReport, Vec<RunOutput>), RepeatedError>
where
    F: Fn(f64) -> Result<BlockSystem, RepeatedError> + Sync,
{
    let outs: Vec<Result<RunOutput, RepeatedError>> = h_grid.par_iter().map(|h| build(*h).and_then(|bs| run(&bs, target))).collect();
    let outs = outs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let k0 = outs[0].systems[0].order;
    let mut rows = vec![];
    let mut order_slopes = vec![];
    for (j, k) in (k0..=target).enumerate() {
        let v: Vec<f64> = outs.iter().map(|o| o.systems[j].offdiag_sup()).collect();
        let s = loglog_slope(h_grid, &v);
        order_slopes.push((k, s));
        for (h, v) in h_grid.iter().zip(&v) {
            rows.push(ResidualRow { order: k, h: *h, sup_residual: *v, fitted_slope: s });
        }
    }
    let nsteps = outs[0].t_minus_i.len();
    let mut t_slopes = vec![];
    let mut chain_increment_slopes = vec![];
    for j in 0..nsteps {
        let v: Vec<f64> = outs.iter().map(|o| o.t_minus_i[j]).collect();
        t_slopes.push((k0 + j as u32, loglog_slope(h_grid, &v)));
        let inc: Vec<f64> = outs
            .iter()
            .map(|o| {
                let prev = if j == 0 { None } else { Some(&o.chain.prefixes[j - 1]) };
                o.chain.prefixes[j]
                    .iter()
                    .enumerate()
                    .map(|(i, c)| fro(&(c - prev.map(|p| p[i].clone()).unwrap_or_else(|| eye(c.nrows())))))
                    .fold(0.0, f64::max)
            })
            .collect();
        chain_increment_slopes.push((k0 + j as u32, loglog_slope(h_grid, &inc)));
    }
    let conj: Vec<f64> = outs.iter().map(|o| o.conjugation_residual).collect();
    let report = ResidualReport {
        rows,
        order_slopes,
        t_slopes,
        chain_increment_slopes,
        conjugation_residuals: h_grid.iter().copied().zip(conj.iter().copied()).collect(),
        conjugation_slope: loglog_slope(h_grid, &conj),
        max_cond: outs.iter().map(|o| o.chain.max_cond()).fold(1.0, f64::max),
        max_newton_iterations: outs.iter().flat_map(|o| o.newton_iterations.iter().copied()).max().unwrap_or(0),
    };
    Ok((report, outs))
}

/// Exponential decay rate of sup over blocks of ‖θ‖ along x ∈ [x0, x1] (least-squares on log).
pub fn theta_decay_rate(bs: &BlockSystem, x0: f64, x1: f64) -> f64 {
    let mut xs = vec![];
    let mut ys = vec![];
    for (i, x) in bs.xs.iter().enumerate() {
        if *x >= x0 && *x <= x1 {
            let v = (fro(&bs.theta1[i]).powi(2) + fro(&bs.theta2[i]).powi(2)).sqrt();
            if v > 0.0 {
                xs.push(*x);
                ys.push(v.ln());
            }
        }
    }
    -crate::fit::line_fit(&xs, &ys).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{c, linspace, max_abs};

    fn system(a: &[&str], theta: &[&str], order: u32, h: f64, xs: &[f64]) -> BlockSystem {
        let a = MatrixFunction::from_strs(2, a).unwrap();
        let t = MatrixFunction::from_strs(2, theta).unwrap();
        BlockSystem::from_functions(&a, &t, 1, order, xs, h).unwrap()
    }

    #[test]
    fn constant_coefficients_diagonalize_in_one_step() {
        let h = 0.1;
        let bs = system(&["1", "0", "0", "-1"], &["0", "1", "1", "0"], 1, h, &linspace(0.0, 1.0, 41));
        let out = step(&bs).unwrap();
        assert!(out.next.theta_sup() <= 1e-12, "{}", out.next.theta_sup());
        // diagonal of the reduced system = eigenvalues of diag(1,-1) + h offdiag(1,1)
        let lam = (1.0 + h * h).sqrt();
        assert!((out.next.a11[7][(0, 0)] - c(lam, 0.0)).norm() < 1e-12);
        assert!((out.next.a22[7][(0, 0)] + c(lam, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_theta_gives_identity() {
        let bs = system(&["1+x", "0", "0", "-1"], &["0", "0", "0", "0"], 1, 0.1, &linspace(0.0, 1.0, 21));
        let out = run(&bs, 3).unwrap();
        for t in &out.chain.composed {
            assert_eq!(*t, eye(2));
        }
        assert!(out.conjugation_residual < 1e-13);
    }

    #[test]
    fn riccati_newton_residual() {
        let a11 = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.3, 0.1), c(0.0, 0.0), c(1.5, 0.2)]);
        let a22 = CMat::from_element(1, 1, c(-1.0, 0.5));
        let th = CMat::from_row_slice(2, 1, &[c(1.0, 0.0), c(-0.5, 0.2)]);
        let thp = CMat::from_row_slice(1, 2, &[c(0.7, 0.0), c(0.1, -0.3)]);
        let cc = 0.05;
        let (a, _, _) = riccati_newton(&a11, &a22, &th, &thp, cc).unwrap();
        let r = &a11 * &a - &a * &a22 + &th - &a * &thp * &a * C64::new(cc, 0.0);
        assert!(max_abs(&r) < 1e-13);
    }

    #[test]
    fn x_dependent_orders() {
        let xs = linspace(0.0, 1.0, 401);
        let hs = [0.1, 0.05, 0.025, 0.0125];
        let (rep, _) = run_over_h(|h| Ok(system(&["1+x*x", "0", "0", "-1"], &["0", "1", "1", "0"], 1, h, &xs)), &hs, 3).unwrap();
        for (k, s) in &rep.order_slopes {
            assert!((s - *k as f64).abs() <= 0.15, "order {k}: slope {s}");
        }
        for (k, s) in &rep.t_slopes {
            assert!((s - *k as f64).abs() <= 0.15, "T-I at step from order {k}: {s}");
        }
        assert!((rep.conjugation_slope - 3.0).abs() <= 0.2, "{}", rep.conjugation_slope);
        assert!(rep.max_cond <= 2.0);
    }
}
