//! Block-diagonalizing conjugators for semiclassical systems h W' = A(x,h) W.

extern crate self as semidiag;

pub mod checks;
pub mod counterex;
pub mod exactdiag;
pub mod experiment;
pub mod fit;
pub mod kato;
pub mod manifold;
pub mod mexpr;
pub mod num;
pub mod oscint;
pub mod quad;
pub mod repeated;
pub mod spectral;
