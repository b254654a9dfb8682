use super::{OscError, Symbol};
use crate::mexpr::{EvalError, Expression};
use crate::num::C64;
use crate::quad::gauss_legendre;
use std::sync::OnceLock;

/// Oriented polyline with an initial panel count per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub vertices: Vec<C64>,
    pub panels: Vec<usize>,
}

impl Contour {
    pub fn new(vertices: Vec<C64>) -> Result<Contour, OscError> {
        if vertices.len() < 2 {
            return Err(OscError::BadContour("needs at least two vertices".into()));
        }
        for w in vertices.windows(2) {
            if w[0] == w[1] {
                return Err(OscError::BadContour(format!("repeated vertex {}", w[0])));
            }
            if !(w[1] - w[0]).norm().is_finite() {
                return Err(OscError::BadContour("non-finite vertex".into()));
            }
        }
        let panels = vec![8; vertices.len() - 1];
        Ok(Contour { vertices, panels })
    }

    pub fn segment(a: C64, b: C64) -> Result<Contour, OscError> {
        Contour::new(vec![a, b])
    }

    pub fn reversed(&self) -> Contour {
        let mut v = self.vertices.clone();
        v.reverse();
        let mut p = self.panels.clone();
        p.reverse();
        Contour { vertices: v, panels: p }
    }

    /// Concatenation; the end of `self` must be the start of `other`.
    pub fn then(&self, other: &Contour) -> Result<Contour, OscError> {
        if self.vertices.last() != other.vertices.first() {
            return Err(OscError::BadContour("contours do not join".into()));
        }
        let mut v = self.vertices.clone();
        v.extend_from_slice(&other.vertices[1..]);
        let mut p = self.panels.clone();
        p.extend_from_slice(&other.panels);
        Ok(Contour { vertices: v, panels: p })
    }

    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: C64,
    pub error: f64,
}

const MAX_LEVELS: usize = 12;

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(16))
}

fn composite(f: &dyn Fn(C64) -> Result<C64, EvalError>, a: C64, b: C64, n: usize) -> Result<(C64, f64), EvalError> {
    let (x, w) = gl16();
    let step = (b - a) / n as f64;
    let mut s = C64::new(0.0, 0.0);
    let mut mass = 0.0;
    for p in 0..n {
        let mid = a + step * (p as f64 + 0.5);
        for (xi, wi) in x.iter().zip(w) {
            let v = f(mid + step * (0.5 * xi))? * (0.5 * wi);
            s += v;
            mass += v.norm();
        }
    }
    Ok((s * step, mass * step.norm()))
}

/// ∫ f along the contour by composite 16-node Gauss-Legendre with panel doubling.
///
/// A segment is accepted once two refinements agree to 1e-12 relative, or to the
/// roundoff floor set by ∫|f|.
pub fn quad_fn(f: &dyn Fn(C64) -> Result<C64, EvalError>, c: &Contour) -> Result<QuadResult, OscError> {
    let mut total = QuadResult { value: C64::new(0.0, 0.0), error: 0.0 };
    for (i, w) in c.vertices.windows(2).enumerate() {
        let mut n = c.panels[i].max(1);
        let (mut prev, _) = composite(f, w[0], w[1], n)?;
        let mut done = false;
        for _ in 0..MAX_LEVELS {
            n *= 2;
            let (cur, mass) = composite(f, w[0], w[1], n)?;
            let diff = (cur - prev).norm();
            let floor = 64.0 * f64::EPSILON * mass;
            if diff <= (1e-12 * cur.norm()).max(1e-300).max(floor) {
                total.value += cur;
                total.error += diff.max(floor);
                done = true;
                break;
            }
            prev = cur;
        }
        if !done {
            return Err(OscError::NoConvergence { segment: i, levels: MAX_LEVELS });
        }
    }
    Ok(total)
}

fn integrand<'a>(a: &'a Symbol, phi: &'a Expression, h: f64) -> impl Fn(C64) -> Result<C64, EvalError> + 'a {
    move |z| {
        let amp = a.eval(z, h)?;
        if amp == C64::new(0.0, 0.0) {
            return Ok(amp);
        }
        Ok((phi.eval(z, h)? / h).exp() * amp)
    }
}

/// ∫_c e^{φ(y,h)/h} a(y) dy.
pub fn quad_contour(a: &Symbol, phi: &Expression, c: &Contour, h: f64) -> Result<QuadResult, OscError> {
    if !(h > 0.0) {
        return Err(OscError::BadParameter(format!("h must be positive, got {h}")));
    }
    quad_fn(&integrand(a, phi, h), c)
}

fn fd_step(z: C64) -> f64 {
    1e-3 * (1.0 + z.norm())
}

/// φ'(z) and φ''(z) by five-point differences.
pub fn phase_derivatives(phi: &Expression, z: C64, h: f64) -> Result<(C64, C64), EvalError> {
    let s = fd_step(z);
    let f = |k: f64| phi.eval(z + s * k, h);
    let (m2, m1, z0, p1, p2) = (f(-2.0)?, f(-1.0)?, f(0.0)?, f(1.0)?, f(2.0)?);
    let d1 = (m2 - p2 + (p1 - m1) * 8.0) / (12.0 * s);
    let d2 = (-m2 - p2 + (p1 + m1) * 16.0 - z0 * 30.0) / (12.0 * s * s);
    Ok((d1, d2))
}

/// Critical point of φ by Newton iteration from `guess`.
pub fn find_saddle(phi: &Expression, guess: C64, h: f64) -> Result<C64, OscError> {
    let mut z = guess;
    for _ in 0..50 {
        let (d1, d2) = phase_derivatives(phi, z, h)?;
        if d2.norm() < 1e-10 {
            return Err(OscError::DegenerateSaddle(d2.norm()));
        }
        let dz = d1 / d2;
        z -= dz;
        if dz.norm() < 1e-13 * (1.0 + z.norm()) {
            return Ok(z);
        }
    }
    Err(OscError::BadParameter(format!("saddle search from {guess} did not converge")))
}

/// ∫_{−x}^{x} e^{φ/h} a along [−x, z_c − ε, z_c + ε, x], where z_c is the saddle
/// (found from `saddle`, default −i), raised to depth x when the saddle lies deeper.
pub fn saddle_deformed_quad(a: &Symbol, phi: &Expression, x: f64, h: f64, saddle: Option<C64>) -> Result<QuadResult, OscError> {
    if !a.is_analytic() {
        return Err(OscError::NotAnalytic);
    }
    if !(x > 0.0) {
        return Err(OscError::BadParameter(format!("x must be positive, got {x}")));
    }
    let z0 = find_saddle(phi, saddle.unwrap_or(C64::new(0.0, -1.0)), h)?;
    let depth = z0.im.abs().min(x);
    let zc = C64::new(z0.re, depth * z0.im.signum());
    let eps = 0.25 * x.min(1.0);
    let c = Contour::new(vec![C64::new(-x, 0.0), zc - eps, zc + eps, C64::new(x, 0.0)])?;
    quad_contour(a, phi, &c, h)
}

/// Leading term h^{1/2} e^{φ(z0)/h} a(z0) √(2π/(−φ''(z0))), the root chosen so that
/// √(−φ'') has positive real part against the contour direction `dir`.
pub fn stationary_phase_estimate(a: &Symbol, phi: &Expression, z0: C64, h: f64, dir: C64) -> Result<C64, OscError> {
    let (_, d2) = phase_derivatives(phi, z0, h)?;
    if d2.norm() < 1e-10 {
        return Err(OscError::DegenerateSaddle(d2.norm()));
    }
    let amp = a.eval_continued(z0, h)?;
    if amp == C64::new(0.0, 0.0) {
        return Ok(amp);
    }
    let mut r = (-d2).sqrt();
    if (dir * r).re < 0.0 {
        r = -r;
    }
    Ok((phi.eval(z0, h)? / h).exp() * amp * (2.0 * std::f64::consts::PI * h).sqrt() / r)
}
