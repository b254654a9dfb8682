//! z h W' = [[1, h z φ(z)], [0, 0]] W near z = 0 with φ = 1 + 2z − z²: the conjugator is the
//! series Σ φ_{j−1} z^j / (jh − 1), and h = 1/j is resonant when φ_{j−1} ≠ 0.

use semidiag::counterex::singular_resonance;
use semidiag::exactdiag::{resonance_gate, solve_singular, SlitDisk, SolveOptions, System};
use semidiag::mexpr::MatrixFunction;
use semidiag::num::C64;
use serde_json::json;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let phi = [1.0, 2.0, -1.0];
    let a = MatrixFunction::builtin("singular_example", &json!({ "phi": phi }))?;
    let sys = System::new(a, None, 1, 1)?;
    let h = 0.1;
    let conj = solve_singular(&sys, h, &SlitDisk::default(), &SolveOptions::default())?;
    println!("h = {h}: certificate {:.2e}", conj.certificate);
    for th in [-2.5, -1.0, 0.0, 1.0, 2.5] {
        let z = C64::from_polar(0.5, th);
        let exact: C64 = phi.iter().enumerate().map(|(j, f)| *f * z.powi(j as i32 + 1) / ((j + 1) as f64 * h - 1.0)).sum();
        let (a12, _) = conj.alpha_at_original(z).expect("inside the slit disk");
        println!("  z = 0.5·e^({th:>4}i): α = {:.8}  error {:.1e}", a12[(0, 0)], (a12[(0, 0)] - exact).norm());
    }
    let coeffs: Vec<C64> = phi.iter().map(|f| C64::new(*f, 0.0)).collect();
    for j in 1..=5 {
        let h = 1.0 / j as f64;
        let r = singular_resonance(&coeffs, h);
        let gate = resonance_gate(&sys, h, 1.0)?;
        println!("h = 1/{j}: resonant {:<5} failing index {:?}  solver gate {:?}", r.resonant, r.failing_index, gate.map(|g| g.0));
    }
    Ok(())
}
