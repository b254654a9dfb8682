use super::*;
use crate::fit::loglog_slope;
use crate::mexpr::MatrixFunction;
use crate::num::c;

fn sys2(a: [&str; 4], theta: [&str; 4]) -> System {
    let a = MatrixFunction::from_strs(2, &a).unwrap();
    let t = MatrixFunction::from_strs(2, &theta).unwrap();
    System::new(a, Some(t), 1, 1).unwrap()
}

#[test]
fn finite_zero_theta_gives_identity() {
    let s = sys2(["1+x", "0", "0", "-1"], ["0", "0", "0", "0"]);
    let conj = solve_finite(&s, c(0.0, 0.0), 0.05, &Diamond::new(0.2, 0.1), &SolveOptions::default()).unwrap();
    assert_eq!(conj.sup_alpha(), 0.0);
    assert!(conj.certificate < 1e-12);
}

#[test]
fn finite_constant_blocks_give_constant_alpha() {
    // 0 = 2α + 1, reached away from the layer of width ~h at z^*
    let s = sys2(["1", "0", "0", "-1"], ["0", "1", "0", "0"]);
    let conj = solve_finite(&s, c(0.0, 0.0), 0.01, &Diamond::new(0.2, 0.1), &SolveOptions::default()).unwrap();
    let (a12, a21) = conj.alpha_at(c(0.0, 0.0)).unwrap();
    assert!((a12[(0, 0)] - c(-0.5, 0.0)).norm() < 1e-10, "{}", a12[(0, 0)]);
    assert!(a21[(0, 0)].norm() < 1e-14);
}

#[test]
fn finite_variable_blocks_certified() {
    let s = sys2(["1+x", "0", "0", "-1"], ["0", "1", "0", "0"]);
    let opts = SolveOptions::default();
    let hs = [0.04, 0.02, 0.01];
    let mut tmi = Vec::new();
    for h in hs {
        let conj = solve_finite(&s, c(0.0, 0.0), h, &Diamond::new(0.2, 0.1), &opts).unwrap();
        assert!(conj.certificate <= 1e-8, "h={h}: {}", conj.certificate);
        assert!(conj.beta_error <= 1e-8, "h={h}: {}", conj.beta_error);
        assert!(conj.picard.max_ratio <= 0.9);
        tmi.push(conj.t_minus_i_sup());
    }
    let slope = loglog_slope(&hs, &tmi);
    assert!((slope - 1.0).abs() <= 0.1, "slope {slope}");
    let d = contour_independence(&s, c(0.0, 0.0), 0.02, &Diamond::new(0.2, 0.1), 0.2, &opts).unwrap();
    assert!(d <= 1e-10, "contour dependence {d}");
}

#[test]
fn finite_rejects_surrounding_spectrum() {
    // σ(a11) and σ(a22) share the eigenvalue 1
    let a = MatrixFunction::from_strs(3, &["1", "0", "0", "0", "-1", "0", "0", "0", "1"]).unwrap();
    let s = System::new(a, None, 2, 1).unwrap();
    let err = solve_finite(&s, c(0.0, 0.0), 0.05, &Diamond::new(0.2, 0.1), &SolveOptions::default());
    assert!(matches!(err, Err(ExactError::NoDirection { .. })), "{err:?}");
}

#[test]
fn infinity_matches_decaying_solution() {
    let h = 0.05;
    let s = sys2(["1", "0", "0", "-1"], ["0", "exp(-x)", "0", "0"]);
    let conj = solve_infinity(&s, h, &Wedge { apex: 1.0, eps: 0.1, r: 12.0 }, &SolveOptions { panel_max: 0.5, ..Default::default() }).unwrap();
    assert!(conj.certificate <= 1e-8, "{}", conj.certificate);
    let mut worst: f64 = 0.0;
    for k in 0..=40 {
        let x = 2.0 + 8.0 * k as f64 / 40.0;
        let (a12, _) = conj.alpha_at(c(x, 0.0)).unwrap();
        let exact = -(-x).exp() / (2.0 + h);
        worst = worst.max((a12[(0, 0)].re - exact).abs() + a12[(0, 0)].im.abs());
    }
    assert!(worst < 1e-8, "{worst}");
    let rate = conj.real_axis_decay(2.0, 10.0, 17).unwrap();
    assert!(rate >= 0.9, "{rate}");
}

#[test]
fn infinity_constant_theta_tends_to_sylvester_limit() {
    let s = sys2(["1", "0", "0", "-1"], ["0", "1", "0", "0"]);
    let w = Wedge { apex: 0.0, eps: 0.1, r: 8.0 };
    let conj = solve_infinity(&s, 0.1, &w, &SolveOptions { panel_max: 0.5, ..Default::default() }).unwrap();
    let (a12, _) = conj.alpha_at(c(w.r, 0.0)).unwrap();
    assert!((a12[(0, 0)] + 0.5).norm() < 1e-6);
}

#[test]
fn singular_example_polynomial_solution() {
    let phi = [c(1.0, 0.0), c(2.0, 0.0), c(-1.0, 0.0)];
    let a = MatrixFunction::builtin("singular_example", &serde_json::json!({"phi": [1, 2, -1]})).unwrap();
    let s = System::new(a, None, 1, 1).unwrap();
    for h in [0.1, 0.05] {
        let conj = solve_singular(&s, h, &SlitDisk::default(), &SolveOptions::default()).unwrap();
        assert!(conj.certificate <= 1e-8, "{}", conj.certificate);
        let mut worst: f64 = 0.0;
        for k in 0..64 {
            let th = -3.0 + 6.0 * k as f64 / 63.0;
            let z = C64::from_polar(0.5, th);
            let exact: C64 = phi.iter().enumerate().map(|(j, f)| f * z.powi(j as i32 + 1) / ((j + 1) as f64 * h - 1.0)).sum();
            let (a12, _) = conj.alpha_at_original(z).unwrap();
            worst = worst.max((a12[(0, 0)] - exact).norm());
        }
        assert!(worst < 1e-8, "h={h}: {worst}");
    }
}

#[test]
fn singular_resonance_is_reported() {
    // h = 1/10 is formally resonant but φ_9 = 0
    let a = MatrixFunction::builtin("singular_example", &serde_json::json!({"phi": [1, 2, -1]})).unwrap();
    let s = System::new(a, None, 1, 1).unwrap();
    assert_eq!(resonant_orders(&s, 0.1, 100).unwrap()[0].0, 10);
    let a = MatrixFunction::builtin("singular_example", &serde_json::json!({"phi": [1, 2, -1]})).unwrap();
    let s = System::new(a, None, 1, 1).unwrap();
    let err = solve_singular(&s, 0.5, &SlitDisk::default(), &SolveOptions::default());
    assert!(matches!(err, Err(ExactError::Resonance { order: 2, .. })), "{err:?}");
}

#[test]
fn gap_strict_matches_closed_form() {
    let h = 0.05;
    let s = sys2(["1", "0", "0", "-1"], ["0", "exp(-x)", "0", "0"]);
    let conj = solve_gap_cr(&s, h, &GapInterval { half_length: 4.0 }, &SolveOptions::default()).unwrap();
    assert!(conj.certificate <= 1e-8, "{}", conj.certificate);
    for k in 0..=30 {
        let x = -3.0 + 5.0 * k as f64 / 30.0;
        let (a12, _) = conj.alpha_at(c(x, 0.0)).unwrap();
        let exact = -(-x).exp() / (2.0 + h);
        assert!((a12[(0, 0)] - exact).norm() < 1e-8 * exact.abs().max(1.0), "x={x}");
    }
}

#[test]
fn gap_neutral_bounded_and_certified() {
    let s = sys2(["i*x", "0", "0", "-i*x"], ["0", "exp(-pow(x,2))", "0", "0"]);
    for h in [0.1, 0.05] {
        let conj = solve_gap_cr(&s, h, &GapInterval { half_length: 4.0 }, &SolveOptions::default()).unwrap();
        assert!(conj.certificate <= 1e-8, "h={h}: {}", conj.certificate);
        assert!(conj.sup_alpha() < 10.0 / h);
    }
}

#[test]
fn gap_reports_numerical_range_violation() {
    let s = sys2(["x", "0", "0", "0"], ["0", "1", "0", "0"]);
    let err = solve_gap_cr(&s, 0.1, &GapInterval { half_length: 1.0 }, &SolveOptions::default());
    assert!(matches!(err, Err(ExactError::NumericalRange { .. })), "{err:?}");
}
