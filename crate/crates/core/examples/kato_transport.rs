//! Kato transport for a rotating self-adjoint family and the initial block-diagonalization.

use semidiag::kato::{initial_blockdiag, uniform_grid};
use semidiag::mexpr::MatrixFunction;
use semidiag::spectral::GroupingRule;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = MatrixFunction::from_strs(2, &["cos(2*x)", "sin(2*x)", "sin(2*x)", "-cos(2*x)"])?;
    let grid = uniform_grid(0.0, 1.0, 400);
    let out = initial_blockdiag(&a, None, 0.1, grid, &GroupingRule::SignOfRealPart)?;
    let b = &out.basis;
    println!("invariance error  {:.3e}", b.invariance_error);
    println!("max cond(T̂)       {:.6}", b.cond.iter().copied().fold(0.0, f64::max));
    println!("offdiag residual  {:.3e}", out.residual);
    let mid = out.grid.len() / 2;
    println!("θ¹ at x = {}: {:.6} / {:.6}", out.grid[mid].re, out.theta1[mid][(0, 0)], out.theta2[mid][(0, 0)]);
    Ok(())
}
