use super::{CVec, Equilibrium, ManifoldError, VectorField};
use crate::fit::{line_fit, loglog_slope};
use crate::num::{CMat, C64};
use crate::quad::panel16;
use crate::spectral::InvariantFactor;
use nalgebra::linalg::LU;
use nalgebra::{Dyn, DVector};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct ManifoldOptions {
    /// Half-angle of the wedge; rays at −ν, 0, ν.
    pub nu: f64,
    /// Weight rate η̃ of the norm sup e^{η̃ Re t}|w(t)|; defaults to 0.9 η.
    pub eta_tilde: Option<f64>,
    /// Ray length; defaults to 12/η̃.
    pub t_max: Option<f64>,
    /// Admissible |w_s|; defaults to 0.05 min |Re μ|.
    pub delta: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub panel_max: f64,
}

impl Default for ManifoldOptions {
    fn default() -> Self {
        ManifoldOptions { nu: 0.3, eta_tilde: None, t_max: None, delta: None, tol: 1e-10, max_iter: 200, panel_max: 0.25 }
    }
}

/// Samples on one ray t = τ e^{i·angle}: Gauss nodes panel by panel, and panel edges.
#[derive(Debug, Clone)]
pub struct RayTrajectory {
    pub angle: f64,
    pub panel_len: f64,
    pub t: Vec<C64>,
    pub w: Vec<CVec>,
    pub edge_t: Vec<C64>,
    pub edges: Vec<CVec>,
}

impl RayTrajectory {
    /// Exponential rate of |w| against Re t, fitted over the middle half of the ray.
    pub fn decay_rate(&self) -> f64 {
        let tmax = self.edge_t.last().map(|t| t.norm()).unwrap_or(0.0);
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .t
            .iter()
            .zip(&self.w)
            .filter(|(t, w)| t.norm() >= 0.25 * tmax && t.norm() <= 0.75 * tmax && w.norm() > 0.0)
            .map(|(t, w)| (t.re, w.norm().ln()))
            .unzip();
        if x.len() < 2 {
            return f64::INFINITY;
        }
        -line_fit(&x, &y).0
    }
}

#[derive(Debug, Clone)]
pub struct ManifoldSolution {
    pub w_s: CVec,
    /// Φ(w_s) = Π_cu w(0).
    pub phi: CVec,
    pub w0: CVec,
    pub rays: Vec<RayTrajectory>,
    pub eta_tilde: f64,
    pub t_max: f64,
    pub weighted_norm: f64,
    pub iterations: usize,
    pub diffs: Vec<f64>,
    pub max_ratio: f64,
    /// e^{−η̃ T} ‖N(w)‖_η̃, the size of the truncated tail of the backward integral.
    pub tail_bound: f64,
    /// Largest disagreement of w(0) between rays.
    pub ray_spread: f64,
}

impl ManifoldSolution {
    pub fn projection_error(&self, eq: &Equilibrium) -> f64 {
        (&eq.pi_s * &self.w0 - &self.w_s).norm()
    }

    /// sup |w' − (f(u* + w) − f(u*))| with w' by spectral differentiation on each panel.
    pub fn flow_residual(&self, f: &VectorField, eq: &Equilibrium) -> Result<f64, ManifoldError> {
        let rule = panel16();
        let q = rule.len();
        let f0 = f.eval(&eq.u_star)?;
        let mut sup = 0.0f64;
        for ray in &self.rays {
            let dt = C64::from_polar(ray.panel_len, ray.angle);
            for p in 0..ray.w.len() / q {
                let ws = &ray.w[p * q..(p + 1) * q];
                for j in 0..q {
                    let mut d = CVec::zeros(eq.dim());
                    for (k, wk) in ws.iter().enumerate() {
                        d += wk * C64::new(rule.diff[j][k], 0.0);
                    }
                    d /= dt;
                    let r = d - (f.eval(&(&eq.u_star + &ws[j]))? - &f0);
                    sup = sup.max(r.norm());
                }
            }
        }
        Ok(sup)
    }

    pub fn decay_rates(&self) -> Vec<f64> {
        self.rays.iter().map(RayTrajectory::decay_rate).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let n = self.w_s.len();
        let mut head = vec!["angle".to_string(), "re_t".into(), "im_t".into()];
        for k in 1..=n {
            head.push(format!("re_w{k}"));
            head.push(format!("im_w{k}"));
        }
        wr.write_record(&head)?;
        for ray in &self.rays {
            for (t, w) in ray.t.iter().zip(&ray.w) {
                let mut rec = vec![ray.angle.to_string(), t.re.to_string(), t.im.to_string()];
                for v in w.iter() {
                    rec.push(v.re.to_string());
                    rec.push(v.im.to_string());
                }
                wr.write_record(&rec)?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Collocation solver for y' = e^{iθ}(T y + g) on uniform panels, in one direction.
struct March {
    factor: InvariantFactor,
    lu: LU<C64, Dyn, Dyn>,
    step: C64,
    forward: bool,
}

impl March {
    fn new(factor: InvariantFactor, step: C64, forward: bool) -> March {
        let rule = panel16();
        let q = rule.len();
        let k = factor.dim();
        let mut m = CMat::identity(q * k, q * k);
        for j in 0..q {
            for l in 0..q {
                let s = if forward { rule.integ[j][l] } else { -(rule.weights[l] - rule.integ[j][l]) };
                for a in 0..k {
                    for b in 0..k {
                        m[(j * k + a, l * k + b)] -= step * s * factor.t[(a, b)];
                    }
                }
            }
        }
        March { lu: m.lu(), factor, step, forward }
    }

    /// Marches from `start` (τ = 0 forward, τ = T backward) through all panels;
    /// `g[p*q + j]` is the forcing at node j of panel p in reduced coordinates.
    /// Returns node values and edge values (edge p is τ = pℓ).
    fn run(&self, start: CVec, g: &[CVec], panels: usize) -> (Vec<CVec>, Vec<CVec>) {
        let rule = panel16();
        let q = rule.len();
        let k = self.factor.dim();
        let mut nodes = vec![CVec::zeros(k); panels * q];
        let mut edges = vec![CVec::zeros(k); panels + 1];
        let order: Vec<usize> = if self.forward { (0..panels).collect() } else { (0..panels).rev().collect() };
        let mut y = start;
        edges[if self.forward { 0 } else { panels }] = y.clone();
        for p in order {
            let gs = &g[p * q..(p + 1) * q];
            let mut rhs = DVector::from_element(q * k, C64::new(0.0, 0.0));
            for j in 0..q {
                for l in 0..q {
                    let s = if self.forward { rule.integ[j][l] } else { -(rule.weights[l] - rule.integ[j][l]) };
                    for a in 0..k {
                        rhs[j * k + a] += self.step * s * gs[l][a];
                    }
                }
                for a in 0..k {
                    rhs[j * k + a] += y[a];
                }
            }
            let sol = self.lu.solve(&rhs).expect("collocation matrix is nonsingular for admissible panels");
            let mut inc = CVec::zeros(k);
            for j in 0..q {
                let yj = CVec::from_iterator(k, (0..k).map(|a| sol[j * k + a]));
                inc += (&self.factor.t * &yj + &gs[j]) * C64::new(rule.weights[j], 0.0);
                nodes[p * q + j] = yj;
            }
            inc *= self.step;
            y = if self.forward { &y + inc } else { &y - inc };
            edges[if self.forward { p + 1 } else { p }] = y.clone();
        }
        (nodes, edges)
    }
}

struct Ray {
    angle: f64,
    t: Vec<C64>,
    edge_t: Vec<C64>,
    stable: Option<March>,
    cu: Option<March>,
}

fn nonlinearity(f: &VectorField, eq: &Equilibrium, f0: &CVec, w: &CVec) -> Result<CVec, ManifoldError> {
    Ok(f.eval(&(&eq.u_star + w))? - f0 - &eq.a * w)
}

/// Picard iteration for w = e^{At}w_s + ∫_0^t e^{A(t−s)}Π_s N(w) − ∫_t^T e^{A(t−s)}Π_cu N(w)
/// on the rays at −ν, 0, ν.
pub fn solve_stable_manifold(eq: &Equilibrium, f: &VectorField, w_s: &CVec, opts: &ManifoldOptions) -> Result<ManifoldSolution, ManifoldError> {
    let n = eq.dim();
    if w_s.len() != n {
        return Err(ManifoldError::Param(format!("w_s has {} components, expected {n}", w_s.len())));
    }
    let offset = (&eq.pi_s * w_s - w_s).norm();
    if offset > 1e-10 * w_s.norm().max(1e-300) && offset > 1e-14 {
        return Err(ManifoldError::NotStable { offset });
    }
    let eta = eq.eta;
    let delta = opts.delta.unwrap_or(0.05 * eq.spectral_gap);
    if w_s.norm() > delta * (1.0 + 1e-12) {
        return Err(ManifoldError::TooLarge { norm: w_s.norm(), delta });
    }
    if !(opts.nu >= 0.0) || opts.nu >= eq.nu_max {
        return Err(ManifoldError::Param(format!("wedge angle {} must lie in [0, {:.4})", opts.nu, eq.nu_max)));
    }
    let rate = eq.wedge_rate(opts.nu);
    let eta_t = opts.eta_tilde.unwrap_or(0.9 * rate.min(eta));
    if !(eta_t > 0.0 && eta_t < rate) {
        return Err(ManifoldError::Param(format!("η̃ = {eta_t} must lie in (0, {rate:.4})")));
    }
    let t_max = opts.t_max.unwrap_or(12.0 / eta_t);
    let anorm = crate::num::norm2(&eq.a).max(1e-300);
    let panels = (t_max / opts.panel_max.min(0.5 / anorm)).ceil().max(1.0) as usize;
    let ell = t_max / panels as f64;
    let rule = panel16();
    let angles: Vec<f64> = if opts.nu == 0.0 { vec![0.0] } else { vec![-opts.nu, 0.0, opts.nu] };
    let rays: Vec<Ray> = angles
        .iter()
        .map(|&angle| {
            let dir = C64::from_polar(1.0, angle);
            let t = (0..panels).flat_map(|p| rule.nodes.iter().map(move |c| dir * (ell * (p as f64 + c)))).collect();
            let edge_t = (0..=panels).map(|p| dir * (ell * p as f64)).collect();
            let step = dir * ell;
            Ray {
                angle,
                t,
                edge_t,
                stable: eq.stable.clone().map(|f| March::new(f, step, true)),
                cu: eq.center_unstable.clone().map(|f| March::new(f, step, false)),
            }
        })
        .collect();
    let f0 = f.eval(&eq.u_star)?;
    let weight: Vec<Vec<f64>> = rays.iter().map(|r| r.t.iter().map(|t| (eta_t * t.re).exp()).collect()).collect();
    let mut w: Vec<Vec<CVec>> = rays.iter().map(|r| vec![CVec::zeros(n); r.t.len()]).collect();
    let mut edges: Vec<Vec<CVec>> = rays.iter().map(|r| vec![CVec::zeros(n); r.edge_t.len()]).collect();
    let mut diffs = Vec::new();
    let mut max_ratio = 0.0f64;
    let mut converged = false;
    let mut nsup = 0.0f64;
    for it in 0..opts.max_iter {
        let mut diff = 0.0f64;
        let mut norm = 0.0f64;
        nsup = 0.0;
        for (ri, ray) in rays.iter().enumerate() {
            let g = w[ri].iter().map(|wi| nonlinearity(f, eq, &f0, wi)).collect::<Result<Vec<_>, _>>()?;
            for (gi, wt) in g.iter().zip(&weight[ri]) {
                nsup = nsup.max(gi.norm() * wt);
            }
            let mut new = vec![CVec::zeros(n); ray.t.len()];
            let mut new_edges = vec![CVec::zeros(n); ray.edge_t.len()];
            if let Some(m) = &ray.stable {
                let gr: Vec<CVec> = g.iter().map(|gi| &m.factor.w * gi).collect();
                let (ys, es) = m.run(&m.factor.w * w_s, &gr, panels);
                for (i, y) in ys.iter().enumerate() {
                    new[i] += &m.factor.v * y;
                }
                for (i, y) in es.iter().enumerate() {
                    new_edges[i] += &m.factor.v * y;
                }
            }
            if let Some(m) = &ray.cu {
                let gr: Vec<CVec> = g.iter().map(|gi| &m.factor.w * gi).collect();
                let (ys, es) = m.run(CVec::zeros(m.factor.dim()), &gr, panels);
                for (i, y) in ys.iter().enumerate() {
                    new[i] += &m.factor.v * y;
                }
                for (i, y) in es.iter().enumerate() {
                    new_edges[i] += &m.factor.v * y;
                }
            }
            for i in 0..new.len() {
                diff = diff.max((&new[i] - &w[ri][i]).norm() * weight[ri][i]);
                norm = norm.max(new[i].norm() * weight[ri][i]);
            }
            w[ri] = new;
            edges[ri] = new_edges;
        }
        if let Some(prev) = diffs.last().copied() {
            if it >= 2 && diff > 1e3 * f64::EPSILON * norm {
                let ratio: f64 = diff / prev;
                max_ratio = max_ratio.max(ratio);
                if ratio >= 1.0 {
                    return Err(ManifoldError::Contraction { iteration: it, ratio });
                }
            }
        }
        diffs.push(diff);
        log::trace!("manifold Picard {it}: diff {diff:.3e}, norm {norm:.3e}");
        if diff <= opts.tol * norm || diff <= 1e-300 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(ManifoldError::NoConvergence { iterations: diffs.len(), diff: diffs.last().copied().unwrap_or(f64::NAN) });
    }
    let real = rays.iter().position(|r| r.angle == 0.0).unwrap_or(0);
    let w0 = edges[real][0].clone();
    let ray_spread = edges.iter().map(|e| (&e[0] - &w0).norm()).fold(0.0, f64::max);
    let phi = w0.clone() - &eq.pi_s * &w0;
    let weighted_norm = w.iter().zip(&weight).flat_map(|(ws, wt)| ws.iter().zip(wt).map(|(v, x)| v.norm() * x)).fold(0.0, f64::max);
    let tail_bound = (-eta_t * t_max).exp() * nsup;
    log::debug!("stable manifold: {} iterations, tail bound {tail_bound:.2e}, ray spread {ray_spread:.2e}", diffs.len());
    let trajectories = rays
        .into_iter()
        .zip(w)
        .zip(edges)
        .map(|((r, w), e)| RayTrajectory { angle: r.angle, panel_len: ell, t: r.t, w, edge_t: r.edge_t, edges: e })
        .collect();
    Ok(ManifoldSolution {
        w_s: w_s.clone(),
        phi,
        w0,
        rays: trajectories,
        eta_tilde: eta_t,
        t_max,
        weighted_norm,
        iterations: diffs.len(),
        diffs,
        max_ratio,
        tail_bound,
        ray_spread,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TangencyReport {
    pub scales: Vec<f64>,
    pub phi_norms: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Log-log slope of |Φ(w_s)| against |w_s|; None when there is no centre-unstable part.
    pub slope: Option<f64>,
    pub trivial: bool,
}

/// Φ along w_s = s·`direction` for each scale s.
pub fn tangency_check(eq: &Equilibrium, f: &VectorField, direction: &CVec, scales: &[f64], opts: &ManifoldOptions) -> Result<TangencyReport, ManifoldError> {
    let unit = direction / C64::new(direction.norm(), 0.0);
    let sols = scales
        .par_iter()
        .map(|s| solve_stable_manifold(eq, f, &(&unit * C64::new(*s, 0.0)), opts))
        .collect::<Result<Vec<_>, _>>()?;
    let phi_norms: Vec<f64> = sols.iter().map(|s| s.phi.norm()).collect();
    let ratios = phi_norms.iter().zip(scales).map(|(p, s)| p / s).collect();
    let trivial = eq.center_unstable.is_none();
    let slope = if trivial || phi_norms.iter().any(|p| *p == 0.0) { None } else { Some(loglog_slope(scales, &phi_norms)) };
    Ok(TangencyReport { scales: scales.to_vec(), phi_norms, ratios, slope, trivial })
}
