//! Decay of ∫ e^{φ/h} a: the Gaussian saddle oracle, the Gevrey stretched-exponential law and
//! the C^r boundary power law.

use semidiag::mexpr::Expression;
use semidiag::oscint::{cr_halfline_rate, gevrey_halfline_asymptotics, saddle_deformed_quad, Symbol};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let phi = Expression::parse("-(x*x + 2*i*x)")?;
    for h in [0.2, 0.1, 0.05] {
        let q = saddle_deformed_quad(&Symbol::one(), &phi, 2.0, h, None)?;
        let exact = (std::f64::consts::PI * h).sqrt() * (-1.0 / h).exp();
        println!("h = {h:<5} ∫ = {:.12e}  rel. error {:.1e}", q.value.re, (q.value.re - exact).abs() / exact);
    }
    let hs = [0.05, 0.025, 0.0125, 0.00625, 0.003125];
    let g = gevrey_halfline_asymptotics(1.0, &hs)?;
    println!("Gevrey s = 2: |I| ≈ {:.3} h^{:.3} exp(−{:.3}/h^{:.3}), free 1/s = {:.4}", g.prefactor, g.p, g.c, g.inv_s, g.inv_s_free.unwrap_or(f64::NAN));
    for r in [1, 2, 3] {
        let f = cr_halfline_rate(r, &hs)?;
        println!("C^{r}: |I| ≈ {:.4} h^{:.3} (fit residual {:.1e})", f.prefactor, f.p, f.residual);
    }
    Ok(())
}
