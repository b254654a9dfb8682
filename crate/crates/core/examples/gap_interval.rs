//! Conjugators on a real interval: a strict gap (A = diag(1, −1)) and the neutral case
//! A = diag(ix, −ix), where only the numerical-range ordering is available.

use semidiag::exactdiag::{solve_gap_cr, GapInterval, SolveOptions, System};
use semidiag::mexpr::MatrixFunction;
use semidiag::num::C64;

fn system(a: [&str; 4], theta: [&str; 4]) -> Result<System, Box<dyn std::error::Error>> {
    Ok(System::new(MatrixFunction::from_strs(2, &a)?, Some(MatrixFunction::from_strs(2, &theta)?), 1, 1)?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let interval = GapInterval { half_length: 4.0 };
    let opts = SolveOptions::default();
    let strict = system(["1", "0", "0", "-1"], ["0", "exp(-x)", "0", "0"])?;
    let h = 0.05;
    let conj = solve_gap_cr(&strict, h, &interval, &opts)?;
    let mut err: f64 = 0.0;
    for k in 0..=50 {
        let x = -3.0 + 5.0 * k as f64 / 50.0;
        let (a12, _) = conj.alpha_at(C64::new(x, 0.0)).expect("inside the interval");
        err = err.max((a12[(0, 0)].re + (-x).exp() / (2.0 + h)).abs() / (-x).exp().max(1.0));
    }
    println!("strict gap, h = {h}: certificate {:.2e}, error against −e^(−x)/(2+h) {err:.2e}", conj.certificate);
    let neutral = system(["i*x", "0", "0", "-i*x"], ["0", "exp(-pow(x,2))", "0", "0"])?;
    for h in [0.1, 0.05, 0.025] {
        let conj = solve_gap_cr(&neutral, h, &interval, &opts)?;
        println!("neutral, h = {h:<6}: certificate {:.2e}, h·sup|α| = {:.4}", conj.certificate, h * conj.sup_alpha());
    }
    Ok(())
}
