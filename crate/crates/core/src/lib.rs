//! Numerics for weighted Besov and Triebel-Lizorkin spaces: dyadic cube
//! quadrature, Muckenhoupt and `X_{alpha,sigma,p}` weight diagnostics,
//! finite-difference and Littlewood-Paley norms, maximal functions, and
//! empirical checks of the dilation bound `||f(lambda .)|| <= c lambda^{alpha2 - n/p} H ||f||`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod differences;
pub mod dilation;
pub mod dyadic;
pub mod error;
pub mod fixtures;
pub mod floats;
pub mod grid;
pub mod lp_fourier;
pub mod maximal;
pub mod norms;
mod par;
pub mod verdict;
pub mod weights;

pub use error::{Error, Result};
pub use grid::{Grid, GridFunction};
pub use verdict::Verdict;
