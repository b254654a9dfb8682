//! Stable manifold of u' = u² − u at 0 against the closed form w_s/(w_s + (1 − w_s)e^t), and
//! the quadratic tangency of the planar saddle's manifold.

use semidiag::manifold::{linearize, solve_stable_manifold, tangency_check, CVec, ManifoldOptions, VectorField};
use semidiag::num::C64;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = VectorField::logistic();
    let eq = linearize(&f, &CVec::zeros(1))?;
    let opts = ManifoldOptions { eta_tilde: Some(0.9), delta: Some(0.1), ..ManifoldOptions::default() };
    let ws = 0.1;
    let sol = solve_stable_manifold(&eq, &f, &CVec::from_element(1, C64::new(ws, 0.0)), &opts)?;
    println!("logistic: {} Picard iterations, weighted norm {:.4}", sol.iterations, sol.weighted_norm);
    let mut err: f64 = 0.0;
    for ray in sol.rays.iter().filter(|r| r.angle == 0.0) {
        for (t, w) in ray.t.iter().zip(&ray.w) {
            let exact = ws / (ws + (1.0 - ws) * t.exp());
            err = err.max((w[0] - exact).norm());
        }
    }
    println!("  error against the closed form on the real ray: {err:.2e}");
    println!("  decay rates per ray: {:?}", sol.decay_rates().iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>());

    let saddle = VectorField::saddle();
    let eq = linearize(&saddle, &CVec::zeros(2))?;
    let dir = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let rep = tangency_check(&eq, &saddle, &dir, &[0.02, 0.01, 0.005, 0.0025], &ManifoldOptions::default())?;
    for (s, p) in rep.scales.iter().zip(&rep.phi_norms) {
        println!("saddle: |w_s| = {s:<7} |Φ(w_s)| = {p:.4e}");
    }
    println!("  tangency slope {:.4}", rep.slope.unwrap_or(f64::NAN));
    Ok(())
}
