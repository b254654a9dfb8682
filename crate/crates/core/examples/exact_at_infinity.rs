//! Conjugator on a wedge towards +∞ with decaying Θ; the α12 entry is −e^{−x}/(2+h).

use semidiag::exactdiag::{solve_infinity, SolveOptions, System, Wedge};
use semidiag::mexpr::MatrixFunction;
use semidiag::num::C64;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = MatrixFunction::from_strs(2, &["1", "0", "0", "-1"])?;
    let theta = MatrixFunction::from_strs(2, &["0", "exp(-x)", "0", "0"])?;
    let sys = System::new(a, Some(theta), 1, 1)?;
    let h = 0.05;
    let wedge = Wedge { apex: 1.0, eps: 0.1, r: 12.0 };
    let opts = SolveOptions { panel_max: 0.5, ..SolveOptions::default() };
    let conj = solve_infinity(&sys, h, &wedge, &opts)?;
    println!("certificate {:.2e}, {} Picard iterations", conj.certificate, conj.picard.iterations);
    for x in [2.0, 4.0, 6.0, 8.0, 10.0] {
        let z = C64::new(x, 0.0);
        let Some((a12, _)) = conj.alpha_at(z) else { continue };
        let exact = -(-z).exp() / (2.0 + h);
        println!("x = {x:>4}: α12 = {:.6e}  error {:.1e}", a12[(0, 0)].re, (a12[(0, 0)] - exact).norm());
    }
    if let Some(rate) = conj.real_axis_decay(2.0, 10.0, 33) {
        println!("fitted decay rate of |α| on [2, 10]: {rate:.4}");
    }
    Ok(())
}
