//! Tensor lattices over diamonds and wedges, and Duhamel propagation along their lines.

use crate::num::{fro, CMat, C64};
use crate::quad::{gauss_legendre, lagrange_basis, panel16, PANEL_NODES};
use rayon::prelude::*;
use std::collections::HashMap;

const STRIDE: usize = PANEL_NODES + 1;

/// Panels on [0, len]; points are each panel's start followed by its 16 nodes, then `len`.
#[derive(Debug, Clone)]
pub struct Axis {
    pub len: f64,
    pub breaks: Vec<f64>,
    pub pts: Vec<f64>,
}

impl Axis {
    /// Panels of length `l_min` doubling away from both ends up to `l_max`.
    pub fn graded(len: f64, l_min: f64, l_max: f64) -> Axis {
        let l_max = l_max.max(l_min);
        let mut sizes: Vec<f64> = Vec::new();
        if len <= 4.0 * l_min {
            let n = (len / l_min).ceil().max(1.0) as usize;
            sizes = vec![len / n as f64; n];
        } else {
            let mut left = Vec::new();
            let mut acc = 0.0;
            let mut s = l_min;
            while acc + s <= len / 2.0 {
                left.push(s);
                acc += s;
                if s * 2.0 <= l_max {
                    s *= 2.0;
                } else {
                    break;
                }
            }
            let mid = len - 2.0 * acc;
            sizes.extend(left.iter().copied());
            if mid > 0.5 * l_min {
                let n = (mid / l_max - 1e-9).ceil().max(1.0) as usize;
                sizes.extend(std::iter::repeat_n(mid / n as f64, n));
            } else {
                let f = len / (2.0 * acc);
                for s in sizes.iter_mut() {
                    *s *= f;
                }
                left.iter_mut().for_each(|s| *s *= f);
            }
            sizes.extend(left.iter().rev().copied());
        }
        Self::from_sizes(&sizes)
    }

    pub fn uniform(len: f64, panels: usize) -> Axis {
        Self::from_sizes(&vec![len / panels as f64; panels])
    }

    fn from_sizes(sizes: &[f64]) -> Axis {
        let rule = panel16();
        let mut breaks = vec![0.0];
        for s in sizes {
            let b = breaks.last().copied().unwrap_or(0.0) + s;
            breaks.push(b);
        }
        let len = *breaks.last().expect("nonempty");
        let mut pts = Vec::with_capacity(sizes.len() * STRIDE + 1);
        for p in 0..sizes.len() {
            let a = breaks[p];
            let l = breaks[p + 1] - a;
            pts.push(a);
            for t in &rule.nodes {
                pts.push(a + l * t);
            }
        }
        pts.push(len);
        Axis { len, breaks, pts }
    }

    pub fn panels(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn npts(&self) -> usize {
        self.pts.len()
    }

    pub fn panel_len(&self, p: usize) -> f64 {
        self.breaks[p + 1] - self.breaks[p]
    }

    pub fn node_index(p: usize, k: usize) -> usize {
        p * STRIDE + 1 + k
    }

    /// Panel containing s (clamped).
    pub fn locate(&self, s: f64) -> usize {
        let p = self.breaks.partition_point(|b| *b <= s);
        p.saturating_sub(1).min(self.panels() - 1)
    }

    /// Lagrange interpolation of width-`w` values at s, None outside [0, len].
    pub fn interpolate(&self, vals: &[C64], w: usize, s: f64) -> Option<Vec<C64>> {
        let tol = 1e-9 * self.len.max(1.0);
        if s < -tol || s > self.len + tol {
            return None;
        }
        let rule = panel16();
        let p = self.locate(s);
        let t = (s - self.breaks[p]) / self.panel_len(p);
        let l = lagrange_basis(&rule.nodes, &rule.bary, t);
        let mut out = vec![C64::new(0.0, 0.0); w];
        for (k, lk) in l.iter().enumerate() {
            let src = Self::node_index(p, k) * w;
            for c in 0..w {
                out[c] += vals[src + c] * *lk;
            }
        }
        Some(out)
    }

    /// Derivative d/ds of width-`w` values sampled at every axis point, from each panel's interpolant.
    pub fn derivative(&self, vals: &[C64], w: usize) -> Vec<C64> {
        let rule = panel16();
        let mut out = vec![C64::new(0.0, 0.0); vals.len()];
        for p in 0..self.panels() {
            let l = self.panel_len(p);
            let mut put = |dst: usize, wts: &[f64]| {
                for (k, wk) in wts.iter().enumerate() {
                    let src = Self::node_index(p, k) * w;
                    for c in 0..w {
                        out[dst * w + c] += vals[src + c] * (wk / l);
                    }
                }
            };
            put(p * STRIDE, &rule.diff_left);
            for j in 0..PANEL_NODES {
                put(Self::node_index(p, j), &rule.diff[j]);
            }
            if p + 1 == self.panels() {
                put((p + 1) * STRIDE, &rule.diff_right);
            }
        }
        out
    }
}

/// Points P(a, b) = origin + a·da + b·db over [0, L]² with |da| = |db| = 1.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub origin: C64,
    pub da: C64,
    pub db: C64,
    pub axis: Axis,
}

impl Lattice {
    pub fn np(&self) -> usize {
        self.axis.npts()
    }

    pub fn len(&self) -> usize {
        self.np() * self.np()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ia: usize, ib: usize) -> usize {
        ia * self.np() + ib
    }

    pub fn point(&self, ia: usize, ib: usize) -> C64 {
        self.origin + self.da * self.axis.pts[ia] + self.db * self.axis.pts[ib]
    }

    /// Lattice coordinates (a, b) of z.
    pub fn coords(&self, z: C64) -> (f64, f64) {
        let w = z - self.origin;
        // w = a da + b db, solved over the reals
        let det = self.da.re * self.db.im - self.da.im * self.db.re;
        let a = (w.re * self.db.im - w.im * self.db.re) / det;
        let b = (self.da.re * w.im - self.da.im * w.re) / det;
        (a, b)
    }

    pub fn contains(&self, z: C64, tol: f64) -> bool {
        let (a, b) = self.coords(z);
        a >= -tol && b >= -tol && a <= self.axis.len + tol && b <= self.axis.len + tol
    }

    /// Tensor Lagrange interpolation of a per-point vector field (width `w`) at z.
    pub fn interpolate(&self, data: &[C64], w: usize, z: C64) -> Option<Vec<C64>> {
        if !self.contains(z, 1e-9 * self.axis.len.max(1.0)) {
            return None;
        }
        let (a, b) = self.coords(z);
        let rule = panel16();
        let pa = self.axis.locate(a);
        let pb = self.axis.locate(b);
        let ta = (a - self.axis.breaks[pa]) / self.axis.panel_len(pa);
        let tb = (b - self.axis.breaks[pb]) / self.axis.panel_len(pb);
        let la = lagrange_basis(&rule.nodes, &rule.bary, ta);
        let lb = lagrange_basis(&rule.nodes, &rule.bary, tb);
        let mut out = vec![C64::new(0.0, 0.0); w];
        for i in 0..PANEL_NODES {
            for j in 0..PANEL_NODES {
                let c = la[i] * lb[j];
                if c == 0.0 {
                    continue;
                }
                let idx = self.index(Axis::node_index(pa, i), Axis::node_index(pb, j)) * w;
                for (o, d) in out.iter_mut().zip(&data[idx..idx + w]) {
                    *o += d * c;
                }
            }
        }
        Some(out)
    }
}

/// Exponential-kernel weights for one panel traversed in one direction.
#[derive(Debug, Clone)]
pub struct PanelWeights {
    pub k: usize,
    /// e^{G s_j} for the 16 nodes then the far end, each k×k column-major.
    pub e: Vec<Vec<C64>>,
    /// w[j][l]: (dir/h)∫_0^{s_j ℓ} e^{B(s_j ℓ − σ)} ℓ_l(σ/ℓ) dσ, k×k.
    pub w: Vec<Vec<Vec<C64>>>,
}

fn expm(m: &CMat) -> CMat {
    if m.nrows() == 1 {
        return CMat::from_element(1, 1, m[(0, 0)].exp());
    }
    m.exp()
}

impl PanelWeights {
    /// `t` is the restricted matrix of the group, `dir` the physical travel direction.
    pub fn new(t: &CMat, dir: C64, h: f64, ell: f64) -> PanelWeights {
        let rule = panel16();
        let k = t.nrows();
        let g = t * (dir * (ell / h));
        let gn = fro(&g);
        let scale = dir * (ell / h);
        let mut outs: Vec<f64> = rule.nodes.clone();
        outs.push(1.0);
        let (qx, qw) = gauss_legendre(20);
        let mut e = Vec::with_capacity(STRIDE);
        let mut w = Vec::with_capacity(STRIDE);
        for &sj in &outs {
            e.push(expm(&(&g * C64::new(sj, 0.0))).as_slice().to_vec());
            let nsub = ((sj * gn).ceil() as usize).max(1);
            let mut acc = vec![CMat::zeros(k, k); PANEL_NODES];
            for s in 0..nsub {
                let u0 = sj * s as f64 / nsub as f64;
                let u1 = sj * (s + 1) as f64 / nsub as f64;
                for (x, wq) in qx.iter().zip(&qw) {
                    let sv = 0.5 * (u0 + u1) + 0.5 * (u1 - u0) * x;
                    let wt = 0.5 * (u1 - u0) * wq;
                    let ex = expm(&(&g * C64::new(sj - sv, 0.0)));
                    let basis = lagrange_basis(&rule.nodes, &rule.bary, sv);
                    for l in 0..PANEL_NODES {
                        acc[l] += &ex * C64::new(wt * basis[l], 0.0);
                    }
                }
            }
            w.push(acc.into_iter().map(|m| (m * scale).as_slice().to_vec()).collect());
        }
        PanelWeights { k, e, w }
    }
}

/// Caches panel weights per (panel length, direction) for one group.
pub struct WeightCache<'a> {
    t: &'a CMat,
    h: f64,
    map: HashMap<(u64, u64, u64), PanelWeights>,
}

impl<'a> WeightCache<'a> {
    pub fn new(t: &'a CMat, h: f64) -> Self {
        WeightCache { t, h, map: HashMap::new() }
    }

    pub fn prepare(&mut self, axis: &Axis, dir: C64) -> Vec<PanelWeights> {
        (0..axis.panels())
            .map(|p| {
                let l = axis.panel_len(p);
                let key = (l.to_bits(), dir.re.to_bits(), dir.im.to_bits());
                self.map.entry(key).or_insert_with(|| PanelWeights::new(self.t, dir, self.h, l)).clone()
            })
            .collect()
    }
}

#[inline]
fn matvec_acc(m: &[C64], v: &[C64], k: usize, out: &mut [C64]) {
    for j in 0..k {
        let vj = v[j];
        if vj == C64::new(0.0, 0.0) {
            continue;
        }
        for i in 0..k {
            out[i] += m[i + j * k] * vj;
        }
    }
}

/// Propagates r' = (dir/h)(T r + c) along one lattice line.
///
/// `c(idx)` gives the k-vector source at axis point idx; `out` receives the
/// k-vectors at all axis points. Forward lines start at index 0, backward at the end.
pub fn propagate_line(axis: &Axis, weights: &[PanelWeights], k: usize, c: &dyn Fn(usize) -> [C64; 8], init: &[C64], forward: bool, out: &mut [C64]) {
    let zero = C64::new(0.0, 0.0);
    let np = axis.npts();
    let start = if forward { 0 } else { np - 1 };
    out[start * k..start * k + k].copy_from_slice(init);
    let panels = axis.panels();
    let mut cs = vec![[zero; 8]; PANEL_NODES];
    let mut r0 = vec![zero; k];
    for step in 0..panels {
        let p = if forward { step } else { panels - 1 - step };
        let pw = &weights[p];
        let (from, to) = if forward { (p * STRIDE, (p + 1) * STRIDE) } else { ((p + 1) * STRIDE, p * STRIDE) };
        r0.copy_from_slice(&out[from * k..from * k + k]);
        // sources in travel order
        for (l, cl) in cs.iter_mut().enumerate() {
            let phys = if forward { l } else { PANEL_NODES - 1 - l };
            *cl = c(Axis::node_index(p, phys));
        }
        for j in 0..STRIDE {
            let idx = if j == PANEL_NODES {
                to
            } else if forward {
                Axis::node_index(p, j)
            } else {
                Axis::node_index(p, PANEL_NODES - 1 - j)
            };
            let mut acc = [zero; 8];
            matvec_acc(&pw.e[j], &r0, k, &mut acc[..k]);
            for l in 0..PANEL_NODES {
                matvec_acc(&pw.w[j][l], &cs[l][..k], k, &mut acc[..k]);
            }
            out[idx * k..idx * k + k].copy_from_slice(&acc[..k]);
        }
    }
}

/// Which lines carry a group's Duhamel integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// From the corner (0,0) along b = 0 then up every a-line's b direction (forward),
    /// or from (L,L) along b = L then down (backward).
    TwoLeg { forward: bool },
    /// Each line of fixed a, integrated from b = L toward b = 0.
    BackwardB,
    /// Each line of fixed b, integrated from a = L toward a = 0.
    BackwardA,
}

impl Route {
    /// Travel directions (physical) used by this route.
    pub fn directions(self, lat: &Lattice) -> Vec<C64> {
        match self {
            Route::TwoLeg { forward: true } => vec![lat.da, lat.db],
            Route::TwoLeg { forward: false } => vec![-lat.da, -lat.db],
            Route::BackwardB => vec![-lat.db],
            Route::BackwardA => vec![-lat.da],
        }
    }
}

/// Propagates a group's reduced coordinate over the whole lattice.
/// `c` holds k-vectors per lattice point; the result has the same layout.
pub fn propagate_route(lat: &Lattice, route: Route, k: usize, wa: &[PanelWeights], wb: &[PanelWeights], c: &[C64]) -> Vec<C64> {
    let np = lat.np();
    let zero = C64::new(0.0, 0.0);
    let mut out = vec![zero; np * np * k];
    let fetch = |flat: usize| -> [C64; 8] {
        let mut v = [zero; 8];
        v[..k].copy_from_slice(&c[flat * k..flat * k + k]);
        v
    };
    match route {
        Route::TwoLeg { forward } => {
            let ib0 = if forward { 0 } else { np - 1 };
            let mut leg1 = vec![zero; np * k];
            propagate_line(&lat.axis, wa, k, &|ia| fetch(lat.index(ia, ib0)), &vec![zero; k], forward, &mut leg1);
            out.par_chunks_mut(np * k).enumerate().for_each(|(ia, line)| {
                let init = &leg1[ia * k..ia * k + k];
                propagate_line(&lat.axis, wb, k, &|ib| fetch(lat.index(ia, ib)), init, forward, line);
            });
        }
        Route::BackwardB => {
            out.par_chunks_mut(np * k).enumerate().for_each(|(ia, line)| {
                propagate_line(&lat.axis, wb, k, &|ib| fetch(lat.index(ia, ib)), &vec![zero; k], false, line);
            });
        }
        Route::BackwardA => {
            let lines: Vec<Vec<C64>> = (0..np)
                .into_par_iter()
                .map(|ib| {
                    let mut line = vec![zero; np * k];
                    propagate_line(&lat.axis, wa, k, &|ia| fetch(lat.index(ia, ib)), &vec![zero; k], false, &mut line);
                    line
                })
                .collect();
            for (ib, line) in lines.iter().enumerate() {
                for ia in 0..np {
                    let dst = lat.index(ia, ib) * k;
                    out[dst..dst + k].copy_from_slice(&line[ia * k..ia * k + k]);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_axis_covers_interval() {
        let ax = Axis::graded(9.0, 0.02, 0.5);
        assert!((ax.len - 9.0).abs() < 1e-12);
        assert!((ax.panel_len(0) - 0.02).abs() < 1e-15);
        assert!((ax.panel_len(ax.panels() - 1) - 0.02).abs() < 1e-12);
        for p in 0..ax.panels() {
            assert!(ax.panel_len(p) <= 0.5 + 1e-12);
        }
        assert_eq!(ax.npts(), ax.panels() * 17 + 1);
        let small = Axis::graded(0.05, 0.02, 0.5);
        assert!((small.len - 0.05).abs() < 1e-15);
    }

    #[test]
    fn scalar_line_matches_closed_form() {
        // r' = (1/h)(−2 r + e^{−s}), r(0) = 0 ⇒ r = (e^{−s} − e^{−2s/h})/(h(2/h − 1))·(1/h)·h
        let h = 0.05;
        let t = CMat::from_element(1, 1, C64::new(-2.0, 0.0));
        let ax = Axis::graded(3.0, h / 2.0, 0.5);
        let mut cache = WeightCache::new(&t, h);
        let w = cache.prepare(&ax, C64::new(1.0, 0.0));
        let src = |i: usize| {
            let mut v = [C64::new(0.0, 0.0); 8];
            v[0] = C64::new((-ax.pts[i]).exp(), 0.0);
            v
        };
        let mut out = vec![C64::new(0.0, 0.0); ax.npts()];
        propagate_line(&ax, &w, 1, &src, &[C64::new(0.0, 0.0)], true, &mut out);
        for (i, s) in ax.pts.iter().enumerate() {
            let exact = ((-s).exp() - (-2.0 * s / h).exp()) / (2.0 - h);
            assert!((out[i].re - exact).abs() < 1e-13, "s={s}: {} vs {exact}", out[i].re);
        }
        // backward from the far end with zero data: r' = (−1/h)(2 r + e^{−s}) traveling toward 0
        let t2 = CMat::from_element(1, 1, C64::new(2.0, 0.0));
        let mut cache2 = WeightCache::new(&t2, h);
        let w2 = cache2.prepare(&ax, C64::new(-1.0, 0.0));
        propagate_line(&ax, &w2, 1, &src, &[C64::new(0.0, 0.0)], false, &mut out);
        // h r' = 2 r + e^{−s}, r(3) = 0: r = −e^{−s}/(2+h) + e^{−3}e^{2(s−3)/h}/(2+h)
        for (i, s) in ax.pts.iter().enumerate() {
            let exact = (-(-s).exp() + (-3.0f64).exp() * (2.0 * (s - 3.0) / h).exp()) / (2.0 + h);
            assert!((out[i].re - exact).abs() < 1e-13, "s={s}");
        }
    }
}
