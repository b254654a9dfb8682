//! Shared numeric types and small dense helpers.

use nalgebra::DMatrix;
pub use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

pub fn from_real_diag(d: &[f64]) -> CMat {
    let n = d.len();
    CMat::from_fn(n, n, |i, j| if i == j { re(d[i]) } else { C64::new(0.0, 0.0) })
}

pub fn fro(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

/// Spectral norm via SVD.
pub fn norm2(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

pub fn cond2(m: &CMat) -> f64 {
    let s = m.clone().svd(false, false).singular_values;
    let mx = s.max();
    let mn = s.min();
    if mn == 0.0 {
        f64::INFINITY
    } else {
        mx / mn
    }
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().lu().try_inverse()
}

pub fn block(m: &CMat, r0: usize, c0: usize, nr: usize, nc: usize) -> CMat {
    m.view((r0, c0), (nr, nc)).into_owned()
}

/// Splits an n×n matrix at index m into (11, 12, 21, 22) blocks.
pub fn split_blocks(a: &CMat, m: usize) -> (CMat, CMat, CMat, CMat) {
    let n = a.nrows();
    let q = n - m;
    (block(a, 0, 0, m, m), block(a, 0, m, m, q), block(a, m, 0, q, m), block(a, m, m, q, q))
}

pub fn join_blocks(a11: &CMat, a12: &CMat, a21: &CMat, a22: &CMat) -> CMat {
    let m = a11.nrows();
    let q = a22.nrows();
    let mut out = zeros(m + q, m + q);
    out.view_mut((0, 0), (m, m)).copy_from(a11);
    out.view_mut((0, m), (m, q)).copy_from(a12);
    out.view_mut((m, 0), (q, m)).copy_from(a21);
    out.view_mut((m, m), (q, q)).copy_from(a22);
    out
}

/// The off-diagonal part of `a` with respect to the split at `m`.
pub fn offdiag(a: &CMat, m: usize) -> CMat {
    let mut out = a.clone();
    let n = a.nrows();
    for i in 0..n {
        for j in 0..n {
            if (i < m) == (j < m) {
                out[(i, j)] = C64::new(0.0, 0.0);
            }
        }
    }
    out
}

pub fn blockdiag_part(a: &CMat, m: usize) -> CMat {
    a - offdiag(a, m)
}

/// Column-major vectorization.
pub fn vec_of(m: &CMat) -> Vec<C64> {
    m.as_slice().to_vec()
}

pub fn mat_of(v: &[C64], r: usize, c: usize) -> CMat {
    CMat::from_column_slice(r, c, v)
}

/// Finite-difference step used for derivatives of analytic coefficients.
pub fn fd_step(x: C64) -> f64 {
    f64::EPSILON.powf(0.2) * (x.norm() + 1.0)
}

/// Fourth-order central difference of a matrix-valued map along direction `dir`.
pub fn fd_derivative<F>(f: F, x: C64, dir: C64) -> CMat
where
    F: Fn(C64) -> CMat,
{
    let d = fd_step(x);
    let s = dir * d;
    let fp1 = f(x + s);
    let fm1 = f(x - s);
    let fp2 = f(x + s * 2.0);
    let fm2 = f(x - s * 2.0);
    (fm2 - fp2 + (fp1 - fm1) * re(8.0)) / (s * 12.0)
}

/// Derivative of uniformly sampled data: 5-point central stencil inside,
/// one-sided fourth-order stencils at the two ends on each side.
pub fn fd_uniform<T: Linear>(vals: &[T], step: f64) -> Vec<T> {
    let n = vals.len();
    assert!(n >= 5, "need at least five samples for a fourth-order stencil");
    let inv = 1.0 / step;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let v = |k: usize| vals[k].clone();
        let d = if i >= 2 && i + 2 < n {
            (v(i - 2) - v(i + 2) + (v(i + 1) - v(i - 1)).scale(8.0)).scale(inv / 12.0)
        } else if i < 2 {
            // forward stencil at offset i within the first five points
            let w = fwd_weights(i);
            lin5(&vals[0..5], &w).scale(inv)
        } else {
            let w = fwd_weights(n - 1 - i);
            let tail: Vec<T> = vals[n - 5..].iter().rev().cloned().collect();
            lin5(&tail, &w).scale(-inv)
        };
        out.push(d);
    }
    out
}

fn fwd_weights(i: usize) -> [f64; 5] {
    match i {
        0 => [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25],
        1 => [-0.25, -5.0 / 6.0, 1.5, -0.5, 1.0 / 12.0],
        _ => unreachable!(),
    }
}

fn lin5<T: Linear>(v: &[T], w: &[f64; 5]) -> T {
    let mut acc = v[0].scale(w[0]);
    for k in 1..5 {
        acc = acc + v[k].scale(w[k]);
    }
    acc
}

/// Values that can be combined linearly with real weights.
pub trait Linear: Clone + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self> {
    fn scale(&self, s: f64) -> Self;
}

impl Linear for f64 {
    fn scale(&self, s: f64) -> Self {
        self * s
    }
}

impl Linear for C64 {
    fn scale(&self, s: f64) -> Self {
        self * s
    }
}

impl Linear for CMat {
    fn scale(&self, s: f64) -> Self {
        self * C64::new(s, 0.0)
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_uniform_is_fourth_order_on_cubic_and_quartic() {
        let step = 0.1;
        let xs: Vec<f64> = (0..12).map(|i| i as f64 * step).collect();
        let vals: Vec<f64> = xs.iter().map(|x| x.powi(4) - 2.0 * x.powi(3)).collect();
        let d = fd_uniform(&vals, step);
        for (x, dv) in xs.iter().zip(d) {
            let exact = 4.0 * x.powi(3) - 6.0 * x * x;
            assert!((dv - exact).abs() < 1e-10, "x={x} got {dv} want {exact}");
        }
    }

    #[test]
    fn fd_derivative_of_exp() {
        let f = |z: C64| CMat::from_element(1, 1, z.exp());
        let x = c(0.3, -0.2);
        let d = fd_derivative(f, x, re(1.0));
        assert!((d[(0, 0)] - x.exp()).norm() < 1e-10);
    }

    #[test]
    fn block_roundtrip() {
        let a = CMat::from_fn(3, 3, |i, j| c(i as f64, j as f64));
        let (a11, a12, a21, a22) = split_blocks(&a, 1);
        assert_eq!(join_blocks(&a11, &a12, &a21, &a22), a);
        assert_eq!(offdiag(&a, 1) + blockdiag_part(&a, 1), a);
    }
}
