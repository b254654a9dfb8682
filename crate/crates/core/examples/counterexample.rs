//! The triangular counterexample with λ₁ = x + i = −λ₂ on [−L, L]: bounded conjugators exist
//! for short intervals and blow up like e^{g/h} past L = 1, and the flat Gevrey and C^r
//! symbols already fail at L = 0.5.

use semidiag::counterex::{boundedness_certificate, TriangularSystem, Verdict};
use semidiag::oscint::Symbol;

fn show(label: &str, v: &Verdict) {
    let growth = v.growth.as_ref().map(|g| format!("g = {:.3}", g.g)).unwrap_or_else(|| "no growth fit".into());
    println!(
        "{label:<22} bounded {:<5} (α side {:<5}) sup|α| {:?}  {growth}",
        v.bounded,
        v.alpha_bounded,
        v.sup_alpha.iter().map(|s| format!("{s:.3e}")).collect::<Vec<_>>()
    );
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let hs = [0.1, 0.05, 0.025, 0.0125];
    for l in [0.9, 1.1, 1.5] {
        let ts = TriangularSystem::new(Symbol::one(), 1, l)?;
        show(&format!("θ ≡ 1, L = {l}"), &boundedness_certificate(&ts, &hs, 100.0)?);
    }
    let gevrey = TriangularSystem::new(Symbol::gevrey_s(2.0), 1, 0.5)?;
    show("Gevrey s = 2, L = 0.5", &boundedness_certificate(&gevrey, &hs, 100.0)?);
    let cr = TriangularSystem::new(Symbol::Cr { r: 2 }, 1, 0.5)?;
    show("C^2, L = 0.5", &boundedness_certificate(&cr, &hs, 100.0)?);
    Ok(())
}
