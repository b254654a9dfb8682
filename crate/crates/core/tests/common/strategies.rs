//! Input generators shared by the property tests and the acceptance run.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::collection::vec;
use proptest::prelude::*;

pub type Mat = DMatrix<Complex64>;

fn cplx(r: f64) -> impl Strategy<Value = Complex64> {
    (-r..r, -r..r).prop_map(|(a, b)| Complex64::new(a, b))
}

fn mat(rows: usize, cols: usize, r: f64) -> impl Strategy<Value = Mat> {
    vec(cplx(r), rows * cols).prop_map(move |v| Mat::from_vec(rows, cols, v))
}

/// I + R with ‖R‖_F < 0.75, so cond(S) < 7.
pub fn near_identity(n: usize) -> impl Strategy<Value = (Mat, Mat)> {
    mat(n, n, 0.1).prop_map(move |r| {
        let s = Mat::identity(n, n) + r;
        let si = s.clone().try_inverse().expect("near-identity matrix is invertible");
        (s, si)
    })
}

fn upper(n: usize, diag: Vec<Complex64>, r: f64) -> impl Strategy<Value = Mat> {
    mat(n, n, r).prop_map(move |u| Mat::from_fn(n, n, |i, j| if i == j { diag[i] } else if i < j { u[(i, j)] } else { Complex64::new(0.0, 0.0) }))
}

/// S T S⁻¹ with T upper triangular (possibly defective) and |Re λ| ≥ 0.3 on both sides of
/// the imaginary axis.
pub fn split_matrix() -> impl Strategy<Value = Mat> {
    (2usize..=5)
        .prop_flat_map(|n| (Just(n), 1..n, vec((0.3f64..2.0, -2.0f64..2.0), n)))
        .prop_flat_map(|(n, k, parts)| {
            let diag: Vec<Complex64> = parts.iter().enumerate().map(|(i, (r, im))| Complex64::new(if i < k { *r } else { -*r }, *im)).collect();
            (upper(n, diag, 0.5), near_identity(n))
        })
        .prop_map(|(t, (s, si))| s * t * si)
}

/// A split matrix together with a similarity.
pub fn split_and_similarity() -> impl Strategy<Value = (Mat, Mat, Mat)> {
    split_matrix().prop_flat_map(|m| {
        let n = m.nrows();
        (Just(m), near_identity(n)).prop_map(|(m, (s, si))| (m, s, si))
    })
}

/// Eigenvalue arguments kept 0.05 away from the dichotomy boundary rays ±(π/2 + 0.1).
pub fn dichotomy_matrix() -> impl Strategy<Value = Mat> {
    let b = std::f64::consts::FRAC_PI_2 + 0.1;
    let arg = (-std::f64::consts::PI..std::f64::consts::PI).prop_filter("near a boundary ray", move |t: &f64| (t.abs() - b).abs() > 0.05);
    (2usize..=4)
        .prop_flat_map(move |n| (Just(n), vec((0.5f64..2.0, arg.clone()), n)))
        .prop_flat_map(|(n, parts)| {
            let diag: Vec<Complex64> = parts.iter().map(|(r, t)| Complex64::from_polar(*r, *t)).collect();
            (upper(n, diag, 0.3), near_identity(n))
        })
        .prop_map(|(t, (s, si))| s * t * si)
}

/// (A11 3×3, A22 2×2, C12, C21) with σ(A11) and σ(A22) at distance ≥ 1.
pub fn sylvester_blocks() -> impl Strategy<Value = (Mat, Mat, Mat, Mat)> {
    (mat(3, 3, 0.3), mat(2, 2, 0.3), mat(3, 2, 1.0), mat(2, 3, 1.0)).prop_map(|(r1, r2, c12, c21)| {
        let a11 = Mat::identity(3, 3) * Complex64::new(1.5, 0.0) + r1;
        let a22 = Mat::identity(2, 2) * Complex64::new(-1.5, 0.0) + r2;
        (a11, a22, c12, c21)
    })
}

fn num(x: f64) -> String {
    format!("({x:.4})")
}

fn cnum(z: Complex64) -> String {
    format!("({:.4} + ({:.4})*i)", z.re, z.im)
}

/// Entire integrand data on [−1, 1]: phase source, amplitude source, h and two interior
/// vertices for the deformed contour.
#[derive(Debug, Clone)]
pub struct ContourCase {
    pub phase: String,
    pub amplitude: String,
    pub h: f64,
    pub via: [Complex64; 2],
}

pub fn contour_case() -> impl Strategy<Value = ContourCase> {
    (cplx(1.0), cplx(1.0), cplx(1.0), cplx(1.0), 0.3f64..2.0, cplx(1.0), cplx(1.0)).prop_map(|(c2, c1, c0, b, h, v1, v2)| ContourCase {
        phase: format!("{}*x*x + {}*x + {}", cnum(c2), cnum(c1), cnum(c0)),
        amplitude: format!("1 + {}*x", cnum(b)),
        h,
        via: [v1, v2],
    })
}

/// Row-major entries of D + E x + F x² on [0, 1] with |Re d| ∈ [1, 2] split by sign and
/// |E|, |F| entries below 0.1.
pub fn kato_family() -> impl Strategy<Value = (usize, Vec<String>)> {
    (2usize..=4)
        .prop_flat_map(|n| (Just(n), 1..n, vec((1.0f64..2.0, -1.0f64..1.0), n), mat(n, n, 0.07), mat(n, n, 0.07)))
        .prop_map(|(n, k, d, e, f)| {
            let mut out = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    let diag = if i == j { Complex64::new(if i < k { d[i].0 } else { -d[i].0 }, d[i].1) } else { Complex64::new(0.0, 0.0) };
                    out.push(format!("{} + {}*x + {}*x*x", cnum(diag), cnum(e[(i, j)]), cnum(f[(i, j)])));
                }
            }
            (n, out)
        })
}

/// 2×2 system: A = diag(1 + a x, −1 + b x), Θ affine in x, and h.
#[derive(Debug, Clone)]
pub struct ConjugatorCase {
    pub a: Vec<String>,
    pub theta: Vec<String>,
    pub h: f64,
}

pub fn conjugator_case() -> impl Strategy<Value = ConjugatorCase> {
    (-0.5f64..0.5, -0.5f64..0.5, vec(cplx(1.0), 8), prop::sample::select(vec![0.05, 0.025])).prop_map(|(a, b, t, h)| ConjugatorCase {
        a: vec![format!("1 + {}*x", num(a)), "0".into(), "0".into(), format!("-1 + {}*x", num(b))],
        theta: (0..4).map(|k| format!("{} + {}*x", cnum(t[2 * k]), cnum(t[2 * k + 1]))).collect(),
        h,
    })
}
