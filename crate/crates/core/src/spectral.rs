//! Eigenvalues, ordered Schur forms, spectral projectors and the block-Sylvester operator.

use crate::num::{eye, fro, max_abs, zeros, CMat, C64};
use nalgebra::linalg::Schur;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("Schur iteration did not converge")]
    NoConvergence,
    #[error("spectral groups separated by {gap:.3e}, below the threshold {min:.3e}")]
    SeparationFailure { gap: f64, min: f64 },
    #[error("grouping rule leaves group {0} empty")]
    EmptyGroup(usize),
    #[error("block-Sylvester operator is singular: A11 and A22 share an eigenvalue (distance {0:.3e}), so 𝒜 has a zero eigenvalue")]
    SingularSylvester(f64),
    #[error("eigenvalue {mu} lies on a dichotomy boundary ray for eps={eps}; use a smaller eps")]
    BoundaryRay { mu: C64, eps: f64 },
    #[error("zero eigenvalue of 𝒜 (|μ|={0:.3e})")]
    ZeroEigenvalue(f64),
}

/// A complex Schur factorization M = Q T Q* with T upper triangular.
#[derive(Debug, Clone)]
pub struct SchurForm {
    pub q: CMat,
    pub t: CMat,
}

impl SchurForm {
    pub fn eigenvalues(&self) -> Vec<C64> {
        (0..self.t.nrows()).map(|i| self.t[(i, i)]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Eig {
    /// Eigenvalues in the order they appear on the Schur diagonal.
    pub values: Vec<C64>,
    pub schur: SchurForm,
    /// Some eigenvalue cluster has fewer eigenvectors than its multiplicity.
    pub defective: bool,
}

fn schur(m: &CMat) -> Result<SchurForm, SpectralError> {
    let n = m.nrows();
    if n == 0 {
        return Ok(SchurForm { q: zeros(0, 0), t: zeros(0, 0) });
    }
    let s = Schur::try_new(m.clone(), f64::EPSILON, 10_000).ok_or(SpectralError::NoConvergence)?;
    let (q, mut t) = s.unpack();
    for j in 0..n {
        for i in j + 1..n {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok(SchurForm { q, t })
}

pub fn eig(m: &CMat) -> Result<Eig, SpectralError> {
    let sf = schur(m)?;
    let values = sf.eigenvalues();
    let scale = fro(m).max(1e-300);
    let n = values.len();
    let cluster_tol = 1e-6 * scale;
    let mut seen = vec![false; n];
    let mut defective = false;
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&j| (values[j] - values[i]).norm() <= cluster_tol).collect();
        for &j in &members {
            seen[j] = true;
        }
        if members.len() > 1 {
            let mean = members.iter().map(|&j| values[j]).sum::<C64>() / members.len() as f64;
            let shifted = m - eye(n) * mean;
            let sv = shifted.svd(false, false).singular_values;
            let rank = sv.iter().filter(|s| **s > 1e-7 * scale).count();
            if n - rank < members.len() {
                defective = true;
            }
        }
    }
    Ok(Eig { values, schur: sf, defective })
}

fn lartg(f: C64, g: C64) -> (f64, C64) {
    if g.norm() == 0.0 {
        return (1.0, C64::new(0.0, 0.0));
    }
    if f.norm() == 0.0 {
        return (0.0, g.conj() / g.norm());
    }
    let (nf, ng) = (f.norm(), g.norm());
    let d = nf.hypot(ng);
    (nf / d, (f / nf) * g.conj() / d)
}

/// Applies [c s; -conj(s) c] to the pair (x, y) elementwise.
fn rot(x: &mut C64, y: &mut C64, c: f64, s: C64) {
    let tx = *x * c + s * *y;
    *y = *y * c - s.conj() * *x;
    *x = tx;
}

/// Swaps the diagonal entries k and k+1 of the Schur form by a unitary rotation.
fn swap_adjacent(sf: &mut SchurForm, k: usize) {
    let n = sf.t.nrows();
    let t11 = sf.t[(k, k)];
    let t22 = sf.t[(k + 1, k + 1)];
    let (c, s) = lartg(sf.t[(k, k + 1)], t22 - t11);
    for j in k + 2..n {
        let (mut a, mut b) = (sf.t[(k, j)], sf.t[(k + 1, j)]);
        rot(&mut a, &mut b, c, s);
        sf.t[(k, j)] = a;
        sf.t[(k + 1, j)] = b;
    }
    for i in 0..k {
        let (mut a, mut b) = (sf.t[(i, k)], sf.t[(i, k + 1)]);
        rot(&mut a, &mut b, c, s.conj());
        sf.t[(i, k)] = a;
        sf.t[(i, k + 1)] = b;
    }
    sf.t[(k, k)] = t22;
    sf.t[(k + 1, k + 1)] = t11;
    for i in 0..n {
        let (mut a, mut b) = (sf.q[(i, k)], sf.q[(i, k + 1)]);
        rot(&mut a, &mut b, c, s.conj());
        sf.q[(i, k)] = a;
        sf.q[(i, k + 1)] = b;
    }
}

/// Reorders the Schur form so that the eigenvalues flagged in `select`
/// (indexed by current diagonal position) come first. Returns their count.
pub fn reorder(sf: &mut SchurForm, select: &[bool]) -> usize {
    let n = sf.t.nrows();
    let mut sel = select.to_vec();
    let mut k = 0;
    for i in 0..n {
        if sel[i] {
            let mut j = i;
            while j > k {
                swap_adjacent(sf, j - 1);
                sel.swap(j - 1, j);
                j -= 1;
            }
            k += 1;
        }
    }
    k
}

/// Solves T1 X − X T2 = C for upper-triangular T1 (m×m), T2 (q×q).
pub fn triangular_sylvester(t1: &CMat, t2: &CMat, c: &CMat) -> Result<CMat, SpectralError> {
    let m = t1.nrows();
    let q = t2.nrows();
    let mut x = zeros(m, q);
    let scale = (max_abs(t1) + max_abs(t2)).max(1e-300);
    for j in 0..q {
        let mu = t2[(j, j)];
        let mut rhs: Vec<C64> = (0..m).map(|i| c[(i, j)]).collect();
        for l in 0..j {
            let t = t2[(l, j)];
            if t != C64::new(0.0, 0.0) {
                for i in 0..m {
                    rhs[i] += x[(i, l)] * t;
                }
            }
        }
        for i in (0..m).rev() {
            let mut s = rhs[i];
            for l in i + 1..m {
                s -= t1[(i, l)] * x[(l, j)];
            }
            let d = t1[(i, i)] - mu;
            if d.norm() <= 1e-14 * scale {
                return Err(SpectralError::SingularSylvester(d.norm()));
            }
            x[(i, j)] = s / d;
        }
    }
    Ok(x)
}

/// Basis V (n×k), left factor W (k×n) and restricted matrix T (k×k) of an
/// invariant subspace: M V = V T, Π = V W is the spectral projector.
#[derive(Debug, Clone)]
pub struct InvariantFactor {
    pub v: CMat,
    pub w: CMat,
    pub t: CMat,
}

impl InvariantFactor {
    pub fn projector(&self) -> CMat {
        &self.v * &self.w
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }
}

/// Invariant factor for the eigenvalues flagged in `select` (Schur diagonal order).
pub fn invariant_factor(sf: &SchurForm, select: &[bool]) -> Result<InvariantFactor, SpectralError> {
    let n = sf.t.nrows();
    let mut s = sf.clone();
    let k = reorder(&mut s, select);
    let t11 = s.t.view((0, 0), (k, k)).into_owned();
    let t12 = s.t.view((0, k), (k, n - k)).into_owned();
    let t22 = s.t.view((k, k), (n - k, n - k)).into_owned();
    let x = triangular_sylvester(&t11, &t22, &(-t12))?;
    let qh = s.q.adjoint();
    let v = s.q.view((0, 0), (n, k)).into_owned();
    let w = qh.view((0, 0), (k, n)).into_owned() - &x * qh.view((k, 0), (n - k, n));
    Ok(InvariantFactor { v, w, t: t11 })
}

#[derive(Debug, Clone)]
pub enum GroupingRule {
    /// Group 1 = eigenvalues with positive real part.
    SignOfRealPart,
    /// Group 1 = these indices into `eig(M).values`.
    Indices(Vec<usize>),
    /// Each eigenvalue joins the group with the nearer mean; ties go to the
    /// group whose mean is lexicographically smaller in (Re, Im).
    Nearest { mean1: C64, mean2: C64 },
}

#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub pi1: CMat,
    pub pi2: CMat,
    pub gap: f64,
    /// 1 or 2 for every eigenvalue, in `eigenvalues` order.
    pub group: Vec<u8>,
    pub eigenvalues: Vec<C64>,
    pub f1: InvariantFactor,
    pub f2: InvariantFactor,
}

impl SpectralSplit {
    pub fn mean(&self, g: u8) -> C64 {
        let v: Vec<C64> = self.eigenvalues.iter().zip(&self.group).filter(|(_, gg)| **gg == g).map(|(e, _)| *e).collect();
        v.iter().sum::<C64>() / v.len() as f64
    }
}

pub const DELTA_MIN: f64 = 1e-6;

pub fn spectral_split(m: &CMat, rule: &GroupingRule, delta_min: f64) -> Result<SpectralSplit, SpectralError> {
    let e = eig(m)?;
    let vals = &e.values;
    let n = vals.len();
    let group: Vec<u8> = match rule {
        GroupingRule::SignOfRealPart => vals.iter().map(|v| if v.re > 0.0 { 1 } else { 2 }).collect(),
        GroupingRule::Indices(ix) => (0..n).map(|i| if ix.contains(&i) { 1 } else { 2 }).collect(),
        GroupingRule::Nearest { mean1, mean2 } => vals
            .iter()
            .map(|v| {
                let (d1, d2) = ((v - mean1).norm(), (v - mean2).norm());
                if d1 < d2 {
                    1
                } else if d2 < d1 {
                    2
                } else if (mean1.re, mean1.im) <= (mean2.re, mean2.im) {
                    1
                } else {
                    2
                }
            })
            .collect(),
    };
    for g in [1u8, 2] {
        if !group.contains(&g) {
            return Err(SpectralError::EmptyGroup(g as usize));
        }
    }
    let mut gap = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            if group[i] == 1 && group[j] == 2 {
                gap = gap.min((vals[i] - vals[j]).norm());
            }
        }
    }
    let min = delta_min * fro(m).max(1.0);
    if gap < min {
        return Err(SpectralError::SeparationFailure { gap, min });
    }
    let sel1: Vec<bool> = group.iter().map(|g| *g == 1).collect();
    let sel2: Vec<bool> = group.iter().map(|g| *g == 2).collect();
    let f1 = invariant_factor(&e.schur, &sel1)?;
    let f2 = invariant_factor(&e.schur, &sel2)?;
    let pi1 = f1.projector();
    let pi2 = eye(n) - &pi1;
    Ok(SpectralSplit { pi1, pi2, gap, group, eigenvalues: vals.clone(), f1, f2 })
}

/// The pair (A11, A22) defining 𝒜(α12, α21) = (A11α12 − α12A22, A22α21 − α21A11).
#[derive(Debug, Clone)]
pub struct BlockSylvester {
    pub a11: CMat,
    pub a22: CMat,
}

impl BlockSylvester {
    pub fn new(a11: CMat, a22: CMat) -> Self {
        BlockSylvester { a11, a22 }
    }

    /// Minimum modulus of λ(A11) − μ(A22).
    pub fn separation(&self) -> Result<f64, SpectralError> {
        let l1 = eig(&self.a11)?.values;
        let l2 = eig(&self.a22)?.values;
        Ok(l1.iter().flat_map(|a| l2.iter().map(move |b| (a - b).norm())).fold(f64::INFINITY, f64::min))
    }

    pub fn apply(&self, a12: &CMat, a21: &CMat) -> (CMat, CMat) {
        (&self.a11 * a12 - a12 * &self.a22, &self.a22 * a21 - a21 * &self.a11)
    }

    /// Matrix of 𝒜 acting on (vec α12, vec α21), column-major vectorization.
    pub fn kron_matrix(&self) -> CMat {
        let m = self.a11.nrows();
        let q = self.a22.nrows();
        let k12 = kron(&eye(q), &self.a11) - kron(&self.a22.transpose(), &eye(m));
        let k21 = kron(&eye(m), &self.a22) - kron(&self.a11.transpose(), &eye(q));
        let nn = 2 * m * q;
        let mut out = zeros(nn, nn);
        out.view_mut((0, 0), (m * q, m * q)).copy_from(&k12);
        out.view_mut((m * q, m * q), (m * q, m * q)).copy_from(&k21);
        out
    }
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Solves 𝒜α = −c: A11α12 − α12A22 = −c12 and A22α21 − α21A11 = −c21 (Bartels–Stewart).
pub fn sylvester_solve(bs: &BlockSylvester, c12: &CMat, c21: &CMat) -> Result<(CMat, CMat), SpectralError> {
    let s1 = schur(&bs.a11)?;
    let s2 = schur(&bs.a22)?;
    let solve = |sa: &SchurForm, sb: &SchurForm, c: &CMat| -> Result<CMat, SpectralError> {
        let rhs = -(sa.q.adjoint() * c * &sb.q);
        let y = triangular_sylvester(&sa.t, &sb.t, &rhs)?;
        Ok(&sa.q * y * sb.q.adjoint())
    };
    Ok((solve(&s1, &s2, c12)?, solve(&s2, &s1, c21)?))
}

/// Projectors of the three-way split of σ(𝒜) used at infinity.
#[derive(Debug, Clone)]
pub struct Dichotomy {
    pub pi: [CMat; 3],
    /// 0, 1, 2 for groups I, II, III per eigenvalue.
    pub group: Vec<u8>,
    pub eigenvalues: Vec<C64>,
    pub factors: [Option<InvariantFactor>; 3],
}

/// Group of μ: I = arg ∈ (π/2+ε, 3π/2−ε), II = [0, π/2+ε), III = (−π/2−ε, 0).
pub fn dichotomy_group(mu: C64, eps: f64) -> Result<u8, SpectralError> {
    let scale = mu.norm();
    if scale < 1e-13 {
        return Err(SpectralError::ZeroEigenvalue(scale));
    }
    let a = mu.arg();
    let b = std::f64::consts::FRAC_PI_2 + eps;
    if (a.abs() - b).abs() < 1e-12 {
        return Err(SpectralError::BoundaryRay { mu, eps });
    }
    Ok(if a.abs() > b {
        0
    } else if a >= 0.0 {
        1
    } else {
        2
    })
}

pub fn dichotomy_projectors(calm: &CMat, eps: f64) -> Result<Dichotomy, SpectralError> {
    let e = eig(calm)?;
    let n = e.values.len();
    let group = e.values.iter().map(|mu| dichotomy_group(*mu, eps)).collect::<Result<Vec<u8>, _>>()?;
    let mut factors: [Option<InvariantFactor>; 3] = [None, None, None];
    let mut pi = [zeros(n, n), zeros(n, n), zeros(n, n)];
    for g in 0..3u8 {
        let sel: Vec<bool> = group.iter().map(|x| *x == g).collect();
        if sel.iter().any(|s| *s) {
            let f = invariant_factor(&e.schur, &sel)?;
            pi[g as usize] = f.projector();
            factors[g as usize] = Some(f);
        }
    }
    Ok(Dichotomy { pi, group, eigenvalues: e.values, factors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{c, from_real_diag};

    fn assert_projector_algebra(p1: &CMat, p2: &CMat, m: &CMat) {
        let n = m.nrows();
        let s = fro(p1).max(1.0);
        assert!(fro(&(p1 * p1 - p1)) <= 1e-12 * s * s);
        assert!(fro(&(p2 * p2 - p2)) <= 1e-12 * s * s);
        assert!(fro(&(p1 + p2 - eye(n))) <= 1e-12 * s);
        assert!(fro(&(p1 * p2)) <= 1e-12 * s * s);
        assert!(fro(&(p1 * m - m * p1)) <= 1e-12 * s * fro(m).max(1.0));
    }

    #[test]
    fn eig_examples() {
        let e = eig(&from_real_diag(&[1.0, -1.0])).unwrap();
        let mut v: Vec<f64> = e.values.iter().map(|z| z.re).collect();
        v.sort_by(f64::total_cmp);
        assert_eq!(v, vec![-1.0, 1.0]);
        assert!(!e.defective);
        let j = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let e = eig(&j).unwrap();
        assert!(e.values.iter().all(|z| z.norm() < 1e-12));
        assert!(e.defective);
        let t = CMat::from_row_slice(2, 2, &[c(0.0, 1.0), c(0.1, 0.0), c(0.0, 0.0), c(0.0, -1.0)]);
        let e = eig(&t).unwrap();
        assert!(e.values.iter().any(|z| (z - c(0.0, 1.0)).norm() < 1e-14));
        assert!(e.values.iter().any(|z| (z - c(0.0, -1.0)).norm() < 1e-14));
    }

    #[test]
    fn split_by_sign() {
        let m = from_real_diag(&[1.0, -1.0]);
        let s = spectral_split(&m, &GroupingRule::SignOfRealPart, DELTA_MIN).unwrap();
        assert!(fro(&(s.pi1.clone() - from_real_diag(&[1.0, 0.0]))) < 1e-15);
        assert!(fro(&(s.pi2.clone() - from_real_diag(&[0.0, 1.0]))) < 1e-15);
        assert_eq!(s.gap, 2.0);
    }

    #[test]
    fn split_by_indices_gap() {
        let m = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(1.0, 1.0), c(-1.0, 0.0)]));
        let e = eig(&m).unwrap();
        let ix: Vec<usize> = (0..3).filter(|&i| e.values[i].re > 0.0).collect();
        let s = spectral_split(&m, &GroupingRule::Indices(ix), DELTA_MIN).unwrap();
        // min(|1+i+1|, |1+1|) = 2
        assert!((s.gap - 2.0).abs() < 1e-14);
        assert_projector_algebra(&s.pi1, &s.pi2, &m);
    }

    #[test]
    fn split_fails_near_jordan() {
        let m = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1e-16, 0.0), c(0.0, 0.0)]);
        match spectral_split(&m, &GroupingRule::SignOfRealPart, DELTA_MIN) {
            Err(SpectralError::SeparationFailure { gap, .. }) => assert!(gap < 1e-6),
            Err(SpectralError::EmptyGroup(_)) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn split_handles_jordan_block_in_one_group() {
        let m = CMat::from_row_slice(
            3,
            3,
            &[c(2.0, 0.0), c(1.0, 0.0), c(0.3, 0.0), c(0.0, 0.0), c(2.0, 0.0), c(0.7, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
        );
        let s = spectral_split(&m, &GroupingRule::SignOfRealPart, DELTA_MIN).unwrap();
        assert_projector_algebra(&s.pi1, &s.pi2, &m);
        assert!((s.pi1.trace() - c(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn sylvester_examples() {
        let bs = BlockSylvester::new(from_real_diag(&[2.0]), from_real_diag(&[-1.0]));
        let (a12, a21) = sylvester_solve(&bs, &from_real_diag(&[3.0]), &zeros(1, 1)).unwrap();
        assert!((a12[(0, 0)] - c(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(a21[(0, 0)], c(0.0, 0.0));
        let bs = BlockSylvester::new(from_real_diag(&[1.0, 2.0]), from_real_diag(&[-1.0]));
        let c12 = CMat::from_element(2, 1, c(1.0, 0.0));
        let (a12, _) = sylvester_solve(&bs, &c12, &zeros(1, 2)).unwrap();
        assert!((a12[(0, 0)] - c(-0.5, 0.0)).norm() < 1e-15);
        assert!((a12[(1, 0)] - c(-1.0 / 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn sylvester_shared_eigenvalue_is_an_error() {
        let bs = BlockSylvester::new(from_real_diag(&[1.0]), from_real_diag(&[1.0]));
        assert!(matches!(
            sylvester_solve(&bs, &from_real_diag(&[1.0]), &from_real_diag(&[1.0])),
            Err(SpectralError::SingularSylvester(_))
        ));
    }

    #[test]
    fn dichotomy_examples() {
        let m = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(-1.0, 0.0), c(1.0, 1.0), c(1.0, -1.0)]));
        let d = dichotomy_projectors(&m, 0.1).unwrap();
        for (v, g) in d.eigenvalues.iter().zip(&d.group) {
            let want = if v.re < 0.0 { 0 } else if v.im > 0.0 { 1 } else { 2 };
            assert_eq!(*g, want, "{v}");
        }
        let s = &d.pi[0] + &d.pi[1] + &d.pi[2];
        assert!(fro(&(s - eye(3))) < 1e-12);
        let d = dichotomy_projectors(&from_real_diag(&[-2.0, -3.0]), 0.05).unwrap();
        assert!(fro(&(d.pi[0].clone() - eye(2))) < 1e-14);
        assert!(fro(&d.pi[1]) == 0.0 && fro(&d.pi[2]) == 0.0);
        assert_eq!(dichotomy_group(c(0.0, 1.0), 0.1).unwrap(), 1);
        let on_ray = C64::from_polar(1.0, std::f64::consts::FRAC_PI_2 + 0.1);
        assert!(matches!(dichotomy_group(on_ray, 0.1), Err(SpectralError::BoundaryRay { .. })));
    }

    #[test]
    fn reorder_keeps_factorization() {
        let m = CMat::from_fn(5, 5, |i, j| c(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + 2 * j) % 3) as f64 - 1.0));
        let e = eig(&m).unwrap();
        let sel: Vec<bool> = e.values.iter().map(|v| v.im < 0.0).collect();
        let mut sf = e.schur.clone();
        let k = reorder(&mut sf, &sel);
        assert!(fro(&(&sf.q * &sf.t * sf.q.adjoint() - &m)) < 1e-12 * fro(&m));
        for i in 0..5 {
            assert_eq!(i < k, sf.t[(i, i)].im < 0.0);
            for j in 0..i {
                assert_eq!(sf.t[(i, j)], c(0.0, 0.0));
            }
        }
    }
}
