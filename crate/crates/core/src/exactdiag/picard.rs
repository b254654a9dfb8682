use super::lattice::{propagate_route, Lattice, PanelWeights, Route, WeightCache};
use super::{ExactError, PicardLog, SolveOptions, System};
use crate::num::{fro, inverse, CMat, C64};
use crate::spectral::InvariantFactor;
use rayon::prelude::*;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Coefficients sampled at grid points, flattened column-major per point.
pub(crate) struct Fields {
    pub m: usize,
    pub q: usize,
    pub hp: f64,
    pub h2p: f64,
    pub a11_ref: CMat,
    pub a22_ref: CMat,
    pub da11: Vec<C64>,
    pub da22: Vec<C64>,
    pub th11: Vec<C64>,
    pub th12: Vec<C64>,
    pub th21: Vec<C64>,
    pub th22: Vec<C64>,
}

impl Fields {
    pub fn sample(sys: &System, h: f64, points: &[C64], a11_ref: CMat, a22_ref: CMat) -> Result<Fields, ExactError> {
        let m = sys.m;
        let n = sys.n();
        let q = n - m;
        let per: Vec<(CMat, CMat)> = points.par_iter().map(|x| sys.parts(*x, h)).collect::<Result<_, _>>()?;
        let mut f = Fields {
            m,
            q,
            hp: h.powi(sys.p),
            h2p: h.powi(2 * sys.p),
            a11_ref,
            a22_ref,
            da11: Vec::with_capacity(points.len() * m * m),
            da22: Vec::with_capacity(points.len() * q * q),
            th11: Vec::with_capacity(points.len() * m * m),
            th12: Vec::with_capacity(points.len() * m * q),
            th21: Vec::with_capacity(points.len() * m * q),
            th22: Vec::with_capacity(points.len() * q * q),
        };
        for (a, th) in &per {
            f.da11.extend((a.view((0, 0), (m, m)) - &f.a11_ref).iter());
            f.da22.extend((a.view((m, m), (q, q)) - &f.a22_ref).iter());
            f.th11.extend(th.view((0, 0), (m, m)).iter());
            f.th12.extend(th.view((0, m), (m, q)).iter());
            f.th21.extend(th.view((m, 0), (q, m)).iter());
            f.th22.extend(th.view((m, m), (q, q)).iter());
        }
        Ok(f)
    }

    pub fn width(&self) -> usize {
        2 * self.m * self.q
    }

    fn sl<'a>(v: &'a [C64], i: usize, len: usize) -> &'a [C64] {
        &v[i * len..(i + 1) * len]
    }

    /// Right side of h u' = 𝒜_ref u + g(u) at point i; with `linear = false` the
    /// x-dependent part of 𝒜 is left out (it is then handled by the caller).
    pub fn rhs(&self, i: usize, u: &[C64], linear: bool, out: &mut [C64], tmp: &mut [C64]) {
        let (m, q) = (self.m, self.q);
        let (mm, qq, mq) = (m * m, q * q, m * q);
        let (a12, a21) = u.split_at(mq);
        let (o12, o21) = out.split_at_mut(mq);
        let hp = C64::new(self.hp, 0.0);
        let one = C64::new(1.0, 0.0);
        let th11 = Self::sl(&self.th11, i, mm);
        let th22 = Self::sl(&self.th22, i, qq);
        let th12 = Self::sl(&self.th12, i, mq);
        let th21 = Self::sl(&self.th21, i, mq);
        o12.copy_from_slice(th12);
        o21.copy_from_slice(th21);
        if linear {
            let d11 = Self::sl(&self.da11, i, mm);
            let d22 = Self::sl(&self.da22, i, qq);
            mm_acc(d11, m, m, a12, q, one, o12);
            mm_acc(a12, m, q, d22, q, -one, o12);
            mm_acc(d22, q, q, a21, m, one, o21);
            mm_acc(a21, q, m, d11, m, -one, o21);
        }
        mm_acc(th11, m, m, a12, q, hp, o12);
        mm_acc(a12, m, q, th22, q, -hp, o12);
        mm_acc(th22, q, q, a21, m, hp, o21);
        mm_acc(a21, q, m, th11, m, -hp, o21);
        let h2p = C64::new(-self.h2p, 0.0);
        // α12 (Θ21 α12)
        let t = &mut tmp[..qq];
        t.fill(ZERO);
        mm_acc(th21, q, m, a12, q, one, t);
        mm_acc(a12, m, q, t, q, h2p, o12);
        // α21 (Θ12 α21)
        let t = &mut tmp[..mm];
        t.fill(ZERO);
        mm_acc(th12, m, q, a21, m, one, t);
        mm_acc(a21, q, m, t, m, h2p, o21);
    }

    pub fn scratch(&self) -> Vec<C64> {
        vec![ZERO; (self.m * self.m).max(self.q * self.q)]
    }

    /// (‖offdiag residual‖_F, diagonal-block deviation) at point i with α and dα/dx.
    pub fn residual(&self, i: usize, u: &[C64], du: &[C64], h: f64) -> (f64, f64) {
        let (m, q) = (self.m, self.q);
        let n = m + q;
        let (mm, qq, mq) = (m * m, q * q, m * q);
        let hp = C64::new(self.hp, 0.0);
        let cm = |v: &[C64], r: usize, c: usize| CMat::from_column_slice(r, c, v);
        let th11 = cm(Self::sl(&self.th11, i, mm), m, m);
        let th22 = cm(Self::sl(&self.th22, i, qq), q, q);
        let th12 = cm(Self::sl(&self.th12, i, mq), m, q);
        let th21 = cm(Self::sl(&self.th21, i, mq), q, m);
        let f11 = &self.a11_ref + cm(Self::sl(&self.da11, i, mm), m, m) + &th11 * hp;
        let f22 = &self.a22_ref + cm(Self::sl(&self.da22, i, qq), q, q) + &th22 * hp;
        let a12 = cm(&u[..mq], m, q);
        let a21 = cm(&u[mq..], q, m);
        let mut f = CMat::zeros(n, n);
        f.view_mut((0, 0), (m, m)).copy_from(&f11);
        f.view_mut((m, m), (q, q)).copy_from(&f22);
        f.view_mut((0, m), (m, q)).copy_from(&(&th12 * hp));
        f.view_mut((m, 0), (q, m)).copy_from(&(&th21 * hp));
        let mut t = crate::num::eye(n);
        t.view_mut((0, m), (m, q)).copy_from(&(&a12 * hp));
        t.view_mut((m, 0), (q, m)).copy_from(&(&a21 * hp));
        let mut tp = CMat::zeros(n, n);
        tp.view_mut((0, m), (m, q)).copy_from(&(cm(&du[..mq], m, q) * hp));
        tp.view_mut((m, 0), (q, m)).copy_from(&(cm(&du[mq..], q, m) * hp));
        let Some(ti) = inverse(&t) else {
            return (f64::INFINITY, f64::INFINITY);
        };
        let r = ti * (&f * &t - tp * C64::new(h, 0.0));
        let off = (fro(&r.view((0, m), (m, q)).into_owned()).powi(2) + fro(&r.view((m, 0), (q, m)).into_owned()).powi(2)).sqrt();
        let h2p = C64::new(self.h2p, 0.0);
        let d11 = f11 + &th12 * &a21 * h2p;
        let d22 = f22 + &th21 * &a12 * h2p;
        let b1 = fro(&(r.view((0, 0), (m, m)).into_owned() - d11));
        let b2 = fro(&(r.view((m, m), (q, q)).into_owned() - d22));
        (off, b1.max(b2))
    }
}

/// out += coef · A (ar×ak) · B (ak×bc), column-major.
#[inline]
fn mm_acc(a: &[C64], ar: usize, ak: usize, b: &[C64], bc: usize, coef: C64, out: &mut [C64]) {
    for j in 0..bc {
        for l in 0..ak {
            let blj = b[l + j * ak] * coef;
            if blj == ZERO {
                continue;
            }
            for i in 0..ar {
                out[i + j * ar] += a[i + l * ar] * blj;
            }
        }
    }
}

pub(crate) struct GroupSpec {
    pub factor: InvariantFactor,
    pub route: Route,
}

/// Tracks successive differences and decides when to stop.
pub(crate) struct Monitor {
    pub log: PicardLog,
    tol: f64,
}

pub(crate) enum Step {
    Continue,
    Done,
}

impl Monitor {
    pub fn new(tol: f64) -> Self {
        Monitor { log: PicardLog::default(), tol }
    }

    pub fn record(&mut self, diff: f64, size: f64, max_iter: usize) -> Result<Step, ExactError> {
        let it = self.log.diffs.len() + 1;
        self.log.iterations = it;
        let thresh = self.tol * size.max(1.0);
        if let Some(prev) = self.log.diffs.last() {
            if *prev > 1e3 * thresh {
                self.log.max_ratio = self.log.max_ratio.max(diff / prev);
            }
        }
        self.log.diffs.push(diff);
        log::debug!("picard iteration {it}: diff {diff:.3e}");
        if !diff.is_finite() || size > 1e12 {
            return Err(ExactError::Divergence { iteration: it, ratio: self.log.max_ratio });
        }
        if diff <= thresh {
            return Ok(Step::Done);
        }
        let d = &self.log.diffs;
        if d.len() >= 5 && d[d.len() - 3..].windows(2).all(|w| w[1] > w[0]) && diff > d[0] {
            return Err(ExactError::Divergence { iteration: it, ratio: diff / d[d.len() - 2] });
        }
        if it >= max_iter {
            return Err(ExactError::NoConvergence { iterations: it, diff });
        }
        Ok(Step::Continue)
    }
}

pub(crate) fn sup_diff(a: &[C64], b: &[C64]) -> f64 {
    a.par_iter().zip(b.par_iter()).map(|(x, y)| (x - y).norm()).reduce(|| 0.0, f64::max)
}

pub(crate) fn sup_abs(a: &[C64]) -> f64 {
    a.par_iter().map(|x| x.norm()).reduce(|| 0.0, f64::max)
}

/// Picard iteration of the lattice Duhamel map.
pub(crate) fn picard_lattice(fields: &Fields, lat: &Lattice, groups: &[GroupSpec], h: f64, opts: &SolveOptions) -> Result<(Vec<C64>, PicardLog), ExactError> {
    let w = fields.width();
    let npts = lat.len();
    let weights: Vec<(Vec<PanelWeights>, Vec<PanelWeights>)> = groups
        .iter()
        .map(|g| {
            let mut cache = WeightCache::new(&g.factor.t, h);
            let dirs = g.route.directions(lat);
            match g.route {
                Route::TwoLeg { .. } => (cache.prepare(&lat.axis, dirs[0]), cache.prepare(&lat.axis, dirs[1])),
                Route::BackwardB => (Vec::new(), cache.prepare(&lat.axis, dirs[0])),
                Route::BackwardA => (cache.prepare(&lat.axis, dirs[0]), Vec::new()),
            }
        })
        .collect();
    let mut u = vec![ZERO; npts * w];
    let mut g = vec![ZERO; npts * w];
    let mut mon = Monitor::new(opts.tol);
    loop {
        g.par_chunks_mut(w).enumerate().for_each_init(
            || fields.scratch(),
            |tmp, (i, out)| fields.rhs(i, &u[i * w..(i + 1) * w], true, out, tmp),
        );
        let mut next = vec![ZERO; npts * w];
        for (grp, (wa, wb)) in groups.iter().zip(&weights) {
            let f = &grp.factor;
            let k = f.dim();
            let mut c = vec![ZERO; npts * k];
            c.par_chunks_mut(k).zip(g.par_chunks(w)).for_each(|(ci, gi)| {
                for r in 0..k {
                    ci[r] = (0..w).map(|s| f.w[(r, s)] * gi[s]).sum();
                }
            });
            let r = propagate_route(lat, grp.route, k, wa, wb, &c);
            next.par_chunks_mut(w).zip(r.par_chunks(k)).for_each(|(ui, ri)| {
                for s in 0..w {
                    ui[s] += (0..k).map(|l| f.v[(s, l)] * ri[l]).sum::<C64>();
                }
            });
        }
        let diff = sup_diff(&next, &u);
        u = next;
        if let Step::Done = mon.record(diff, sup_abs(&u), opts.max_iter)? {
            break;
        }
    }
    Ok((u, mon.log))
}

/// Residual certificate on the lattice using derivatives along both families of lines.
pub(crate) fn certify_lattice(fields: &Fields, lat: &Lattice, u: &[C64], h: f64, region: &(dyn Fn(f64, f64) -> bool + Sync)) -> (Vec<bool>, f64, f64) {
    let w = fields.width();
    let np = lat.np();
    let ax = &lat.axis;
    let mut du_b = vec![ZERO; u.len()];
    du_b.par_chunks_mut(np * w).enumerate().for_each(|(ia, out)| {
        let d = ax.derivative(&u[ia * np * w..(ia + 1) * np * w], w);
        for (o, v) in out.iter_mut().zip(d) {
            *o = v / lat.db;
        }
    });
    let cols: Vec<Vec<C64>> = (0..np)
        .into_par_iter()
        .map(|ib| {
            let mut line = Vec::with_capacity(np * w);
            for ia in 0..np {
                let s = lat.index(ia, ib) * w;
                line.extend_from_slice(&u[s..s + w]);
            }
            ax.derivative(&line, w)
        })
        .collect();
    let mut du_a = vec![ZERO; u.len()];
    for (ib, d) in cols.iter().enumerate() {
        for ia in 0..np {
            let s = lat.index(ia, ib) * w;
            for c in 0..w {
                du_a[s + c] = d[ia * w + c] / lat.da;
            }
        }
    }
    let res: Vec<(bool, f64, f64)> = (0..lat.len())
        .into_par_iter()
        .map(|i| {
            let (ia, ib) = (i / np, i % np);
            if !region(ax.pts[ia], ax.pts[ib]) {
                return (false, 0.0, 0.0);
            }
            let ui = &u[i * w..(i + 1) * w];
            let (ra, ba) = fields.residual(i, ui, &du_a[i * w..(i + 1) * w], h);
            let (rb, bb) = fields.residual(i, ui, &du_b[i * w..(i + 1) * w], h);
            (true, ra.max(rb), ba.max(bb))
        })
        .collect();
    let mask: Vec<bool> = res.iter().map(|r| r.0).collect();
    let cert = res.iter().map(|r| r.1).fold(0.0, f64::max);
    let beta = res.iter().map(|r| r.2).fold(0.0, f64::max);
    (mask, cert, beta)
}
