//! Invariant checkers: each returns a normalized defect that is zero in exact arithmetic.

use crate::exactdiag::Conjugator;
use crate::kato::{default_initial_basis, transport, KatoError, ProjectorField};
use crate::mexpr::{EvalError, MatrixFunction};
use crate::num::{eye, fro, CMat, C64};
use crate::oscint::{quad_contour, quad_fn, Contour, OscError, Symbol};
use crate::spectral::{dichotomy_projectors, spectral_split, sylvester_solve, BlockSylvester, GroupingRule, SpectralError, DELTA_MIN};

/// Idempotence, completeness, mutual annihilation and commutation with `m` for the
/// two projectors of a split, each measured relative to ‖Π₁‖.
pub fn projector_defect(m: &CMat, rule: &GroupingRule) -> Result<f64, SpectralError> {
    let s = spectral_split(m, rule, DELTA_MIN)?;
    let p1 = s.f1.projector();
    let p2 = s.f2.projector();
    Ok(family_defect(m, &[p1, p2]))
}

/// The same algebra for the three-way dichotomy split; empty groups contribute zero projectors.
pub fn dichotomy_defect(m: &CMat, eps: f64) -> Result<f64, SpectralError> {
    let d = dichotomy_projectors(m, eps)?;
    Ok(family_defect(m, &d.pi))
}

fn family_defect(m: &CMat, ps: &[CMat]) -> f64 {
    let n = m.nrows();
    let s = ps.iter().map(fro).fold(1.0, f64::max);
    let mn = fro(m).max(1.0);
    let mut sum = CMat::zeros(n, n);
    let mut d: f64 = 0.0;
    for (i, p) in ps.iter().enumerate() {
        sum += p;
        for (j, q) in ps.iter().enumerate() {
            let want = if i == j { p.clone() } else { CMat::zeros(n, n) };
            d = d.max(fro(&(p * q - want)) / (s * s));
        }
        d = d.max(fro(&(p * m - m * p)) / (s * mn));
    }
    d.max(fro(&(sum - eye(n))) / s)
}

/// ‖S Π(M) S⁻¹ − Π(S M S⁻¹)‖_F relative to ‖Π‖, grouping by the sign of the real part.
pub fn similarity_defect(m: &CMat, s: &CMat, si: &CMat) -> Result<f64, SpectralError> {
    let rule = GroupingRule::SignOfRealPart;
    let p = spectral_split(m, &rule, DELTA_MIN)?.pi1;
    let q = spectral_split(&(s * m * si), &rule, DELTA_MIN)?.pi1;
    Ok(fro(&(s * p * si - &q)) / fro(&q).max(1.0))
}

/// Relative gap between the Bartels-Stewart solution of 𝒜α = −c and a dense LU solve
/// of the Kronecker form.
pub fn sylvester_kron_gap(a11: &CMat, a22: &CMat, c12: &CMat, c21: &CMat) -> Result<f64, SpectralError> {
    let bs = BlockSylvester::new(a11.clone(), a22.clone());
    let (x12, x21) = sylvester_solve(&bs, c12, c21)?;
    let rhs: Vec<C64> = c12.iter().chain(c21.iter()).map(|z| -z).collect();
    let k = bs.kron_matrix();
    let y = k.lu().solve(&CMat::from_column_slice(rhs.len(), 1, &rhs)).ok_or(SpectralError::SingularSylvester(0.0))?;
    let x: Vec<C64> = x12.iter().chain(x21.iter()).copied().collect();
    let diff = x.iter().zip(y.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let norm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok(diff / norm.max(f64::MIN_POSITIVE))
}

#[derive(Debug, Clone, Copy)]
pub struct ContourGap {
    /// |I₁ − I₂| / |I₁|.
    pub gap: f64,
    /// ∫|f| |dz| / |I₁| along the first contour; near 1 when there is no cancellation.
    pub cancellation: f64,
}

/// Compares ∫ e^{φ/h} a over two contours with shared endpoints.
pub fn contour_gap(a: &Symbol, phi: &crate::mexpr::Expression, c1: &Contour, c2: &Contour, h: f64) -> Result<ContourGap, OscError> {
    let v1 = quad_contour(a, phi, c1, h)?.value;
    let v2 = quad_contour(a, phi, c2, h)?.value;
    let abs = |z: C64| -> Result<C64, EvalError> { Ok(C64::new(((phi.eval(z, h)? / h).exp() * a.eval(z, h)?).norm(), 0.0)) };
    let mut mass = 0.0;
    for w in c1.vertices.windows(2) {
        let d = w[1] - w[0];
        mass += (quad_fn(&abs, &Contour::segment(w[0], w[1])?)?.value * (d.norm() / d)).re;
    }
    Ok(ContourGap { gap: (v1 - v2).norm() / v1.norm(), cancellation: mass / v1.norm() })
}

/// max_x ‖Π_j T̂_j − T̂_j‖ after Kato transport from the Schur bases at the first grid point.
pub fn kato_invariance(a: &MatrixFunction, h: f64, grid: Vec<C64>, rule: &GroupingRule) -> Result<f64, KatoError> {
    let pf = ProjectorField::build(a, h, grid, rule)?;
    let t0 = default_initial_basis(&pf);
    Ok(transport(&pf, &t0)?.invariance_error)
}

/// Certificate of a returned conjugator, NaN when no point was certified.
pub fn certificate(conj: &Conjugator) -> f64 {
    if conj.certified.iter().any(|c| *c) {
        conj.certificate
    } else {
        f64::NAN
    }
}
