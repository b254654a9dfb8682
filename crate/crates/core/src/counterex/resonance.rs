use crate::num::C64;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceReport {
    pub h: f64,
    pub resonant: bool,
    /// Smallest j with jh = 1 and φ_{j−1} ≠ 0.
    pub failing_index: Option<usize>,
    /// Taylor coefficients α_0, α_1, …; a resonant slot holds NaN.
    pub alpha_coeffs: Vec<C64>,
}

/// Formal series solution of h α' = α/z + φ: α_0 = 0 and (jh − 1) α_j = φ_{j−1}.
pub fn singular_resonance(phi: &[C64], h: f64) -> ResonanceReport {
    let mut alpha = vec![C64::new(0.0, 0.0); phi.len() + 1];
    let mut failing = None;
    for j in 1..=phi.len() {
        let d = j as f64 * h - 1.0;
        let f = phi[j - 1];
        if d.abs() < 1e-12 {
            if f != C64::new(0.0, 0.0) {
                failing.get_or_insert(j);
                alpha[j] = C64::new(f64::NAN, f64::NAN);
            }
        } else {
            alpha[j] = f / d;
        }
    }
    ResonanceReport { h, resonant: failing.is_some(), failing_index: failing, alpha_coeffs: alpha }
}
