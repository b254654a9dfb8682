//! Repeated diagonalization of h W' = A W with A = [[1+x², h], [h, −1]] on [0, 1]:
//! the off-diagonal remainder after k steps shrinks like h^k.

use semidiag::mexpr::MatrixFunction;
use semidiag::num::linspace;
use semidiag::repeated::{run_over_h, BlockSystem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = MatrixFunction::from_strs(2, &["1+x*x", "0", "0", "-1"])?;
    let theta = MatrixFunction::from_strs(2, &["0", "1", "1", "0"])?;
    let xs = linspace(0.0, 1.0, 401);
    let hs = [0.1, 0.05, 0.025, 0.0125];
    let (report, _) = run_over_h(|h| BlockSystem::from_functions(&a, &theta, 1, 1, &xs, h), &hs, 3)?;
    println!("{:>6} {:>10} {:>14}", "order", "h", "sup residual");
    for r in &report.rows {
        println!("{:>6} {:>10} {:>14.3e}", r.order, r.h, r.sup_residual);
    }
    for (k, s) in &report.order_slopes {
        println!("order {k}: log-log slope {s:.3}");
    }
    println!("max cond of the composed conjugator: {:.3}", report.max_cond);
    Ok(())
}
