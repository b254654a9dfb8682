use super::lattice::Axis;
use super::picard::{sup_abs, sup_diff, Fields, Monitor, Step};
use super::{Conjugator, ExactError, Grid, SolveOptions, SolverKind, System};
use crate::num::{fro, linspace, CMat, C64};
use crate::quad::{panel16, PANEL_NODES};
use crate::spectral::BlockSylvester;
use nalgebra::LU;
use nalgebra::Dyn;
use rayon::prelude::*;
use serde_json::json;

/// Real interval [−M, M].
#[derive(Debug, Clone, Copy)]
pub struct GapInterval {
    pub half_length: f64,
}

fn hermitian_range(a: &CMat) -> (f64, f64) {
    let s = (a + a.adjoint()) * C64::new(0.5, 0.0);
    let ev = s.symmetric_eigenvalues();
    (ev.iter().copied().fold(f64::INFINITY, f64::min), ev.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

struct PanelSolve {
    lu: LU<C64, Dyn, Dyn>,
    k: Vec<CMat>,
}

/// One decoupled block (α12 or α21) marched panel by panel.
struct BlockMarch {
    offset: usize,
    d: usize,
    backward: bool,
    panels: Vec<PanelSolve>,
}

impl BlockMarch {
    fn coef(&self, j: usize, l: usize) -> f64 {
        let r = panel16();
        if self.backward {
            r.integ[j][l] - r.weights[l]
        } else {
            r.integ[j][l]
        }
    }

    fn build(sys: &System, h: f64, axis: &Axis, origin: f64, offset: usize, first: bool, backward: bool) -> Result<BlockMarch, ExactError> {
        let m = sys.m;
        let q = sys.n() - m;
        let d = m * q;
        let panels = (0..axis.panels())
            .into_par_iter()
            .map(|p| -> Result<PanelSolve, ExactError> {
                let ell = axis.panel_len(p);
                let mut ks = Vec::with_capacity(PANEL_NODES);
                for j in 0..PANEL_NODES {
                    let x = C64::new(origin + axis.pts[Axis::node_index(p, j)], 0.0);
                    let (a11, a22) = sys.diagonal_blocks(x, h)?;
                    let full = BlockSylvester::new(a11, a22).kron_matrix();
                    let s = if first { 0 } else { d };
                    ks.push(full.view((s, s), (d, d)).into_owned());
                }
                let me = BlockMarch { offset, d, backward, panels: Vec::new() };
                let mut mat = CMat::zeros(PANEL_NODES * d, PANEL_NODES * d);
                for j in 0..PANEL_NODES {
                    for l in 0..PANEL_NODES {
                        let mut blk = &ks[j] * C64::new(-ell * me.coef(j, l), 0.0);
                        if j == l {
                            for i in 0..d {
                                blk[(i, i)] += h;
                            }
                        }
                        mat.view_mut((j * d, l * d), (d, d)).copy_from(&blk);
                    }
                }
                Ok(PanelSolve { lu: mat.lu(), k: ks })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BlockMarch { offset, d, backward, panels })
    }

    /// h u' = K(x) u + g along the axis; writes this block's components of `u`.
    fn march(&self, axis: &Axis, w: usize, g: &[C64], u: &mut [C64]) {
        let d = self.d;
        let rule = panel16();
        let np = axis.npts();
        let zero = C64::new(0.0, 0.0);
        let start = if self.backward { np - 1 } else { 0 };
        for c in 0..d {
            u[start * w + self.offset + c] = zero;
        }
        let n = self.panels.len();
        for step in 0..n {
            let p = if self.backward { n - 1 - step } else { step };
            let ell = axis.panel_len(p);
            let (from, to) = if self.backward { ((p + 1) * (PANEL_NODES + 1), p * (PANEL_NODES + 1)) } else { (p * (PANEL_NODES + 1), (p + 1) * (PANEL_NODES + 1)) };
            let u0 = nalgebra::DVector::from_iterator(d, (0..d).map(|c| u[from * w + self.offset + c]));
            let ps = &self.panels[p];
            let mut rhs = nalgebra::DVector::zeros(PANEL_NODES * d);
            for j in 0..PANEL_NODES {
                let gi = Axis::node_index(p, j) * w + self.offset;
                let kj = &ps.k[j] * &u0;
                for c in 0..d {
                    rhs[j * d + c] = kj[c] + g[gi + c];
                }
            }
            let v = ps.lu.solve(&rhs).unwrap_or_else(|| nalgebra::DVector::from_element(PANEL_NODES * d, C64::new(f64::NAN, 0.0)));
            for j in 0..PANEL_NODES {
                let dst = Axis::node_index(p, j) * w + self.offset;
                for c in 0..d {
                    let mut s = u0[c];
                    for l in 0..PANEL_NODES {
                        s += v[l * d + c] * (ell * self.coef(j, l));
                    }
                    u[dst + c] = s;
                }
            }
            let sign = if self.backward { -ell } else { ell };
            for c in 0..d {
                let mut s = u0[c];
                for l in 0..PANEL_NODES {
                    s += v[l * d + c] * (sign * rule.weights[l]);
                }
                u[to * w + self.offset + c] = s;
            }
        }
    }
}

/// Real-line solve on [−M, M] under the ordering Re a11 ≥ Re a22 (or its mirror),
/// with no exponential decay assumed of the kernels.
pub fn solve_gap_cr(sys: &System, h: f64, interval: &GapInterval, opts: &SolveOptions) -> Result<Conjugator, ExactError> {
    let big_m = interval.half_length;
    if !(big_m > 0.0) {
        return Err(ExactError::Param(format!("interval half-length must be positive, got {big_m}")));
    }
    let mut amax: f64 = 0.0;
    let mut viol12 = None;
    let mut viol21 = None;
    for x in linspace(-big_m, big_m, 401) {
        let (a11, a22) = sys.diagonal_blocks(C64::new(x, 0.0), h)?;
        amax = amax.max(fro(&BlockSylvester::new(a11.clone(), a22.clone()).kron_matrix()));
        let (lo1, hi1) = hermitian_range(&a11);
        let (lo2, hi2) = hermitian_range(&a22);
        let tol = 1e-12 * (1.0 + hi1.abs().max(hi2.abs()));
        if lo1 < hi2 - tol && viol12.is_none() {
            viol12 = Some((x, lo1, hi2));
        }
        if lo2 < hi1 - tol && viol21.is_none() {
            viol21 = Some((x, lo2, hi1));
        }
    }
    let ord12 = match (viol12, viol21) {
        (None, _) => true,
        (Some(_), None) => false,
        (Some((x, lo, hi)), Some(_)) => {
            return Err(ExactError::NumericalRange { x, msg: format!("min Re W(a11) = {lo:.4} < max Re W(a22) = {hi:.4}") });
        }
    };
    let ell = opts.panel_max.min(5.0 * h / amax.max(1e-12));
    let panels = ((2.0 * big_m / ell).ceil() as usize).max(1);
    let n_pts = panels * (PANEL_NODES + 1) + 1;
    if n_pts > opts.max_points {
        return Err(ExactError::TooLarge(n_pts));
    }
    let axis = Axis::uniform(2.0 * big_m, panels);
    let origin = -big_m;
    let points: Vec<C64> = axis.pts.iter().map(|s| C64::new(origin + s, 0.0)).collect();
    let m = sys.m;
    let q = sys.n() - m;
    let fields = Fields::sample(sys, h, &points, CMat::zeros(m, m), CMat::zeros(q, q))?;
    let w = fields.width();
    let d = m * q;
    let b12 = BlockMarch::build(sys, h, &axis, origin, 0, true, ord12)?;
    let b21 = BlockMarch::build(sys, h, &axis, origin, d, false, !ord12)?;
    let zero = C64::new(0.0, 0.0);
    let mut u = vec![zero; points.len() * w];
    let mut g = vec![zero; points.len() * w];
    let mut mon = Monitor::new(opts.tol);
    loop {
        g.par_chunks_mut(w).enumerate().for_each_init(
            || fields.scratch(),
            |tmp, (i, out)| fields.rhs(i, &u[i * w..(i + 1) * w], false, out, tmp),
        );
        let mut next = vec![zero; u.len()];
        b12.march(&axis, w, &g, &mut next);
        b21.march(&axis, w, &g, &mut next);
        let diff = sup_diff(&next, &u);
        u = next;
        if let Step::Done = mon.record(diff, sup_abs(&u), opts.max_iter)? {
            break;
        }
    }
    let du = axis.derivative(&u, w);
    let res: Vec<(f64, f64)> = (0..points.len()).into_par_iter().map(|i| fields.residual(i, &u[i * w..(i + 1) * w], &du[i * w..(i + 1) * w], h)).collect();
    let certificate = res.iter().map(|r| r.0).fold(0.0, f64::max);
    let beta_error = res.iter().map(|r| r.1).fold(0.0, f64::max);
    log::info!("gap solve h={h}: {panels} panels, {} Picard iterations, certificate {certificate:.2e}", mon.log.iterations);
    let meta = json!({
        "half_length": big_m,
        "panel_length": 2.0 * big_m / panels as f64,
        "ordering": if ord12 { "re_a11_ge_re_a22" } else { "re_a22_ge_re_a11" },
    });
    Ok(Conjugator {
        kind: SolverKind::GapCr,
        h,
        p: sys.p,
        m,
        q,
        chart: sys.chart,
        grid: Grid::Line { axis, origin },
        u,
        certified: vec![true; points.len()],
        certificate,
        beta_error,
        picard: mon.log,
        meta,
    })
}
