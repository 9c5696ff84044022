//! Weighted Ditzian–Totik moduli of smoothness on `[-1, 1]`.
//!
//! The crate is organised bottom-up:
//!
//! - [`fnspace`]: symbolic test functions with exact derivatives, Jacobi
//!   weights and partitions (general, Chebyshev, inflection sets).
//! - [`quad`]: weighted `L_p` quasi-norms for `0 < p <= ∞` using the
//!   `x = -cos θ` substitution and composite Gauss–Legendre panels.
//! - [`stieltjes`]: Darboux-type Lebesgue–Stieltjes sums against nondecreasing
//!   integrators, including the iterated (tensor-product) construct.
//! - [`moduli`]: symmetric differences and every modulus variant.
//! - [`shape`]: divided differences, k-monotonicity, coconvexity and
//!   shape-constrained splines on Chebyshev partitions.
//! - [`approx`]: best unconstrained and (co)convex polynomial approximation.
//! - [`harness`]: campaigns that evaluate both sides of equivalences and
//!   Jackson-type inequalities and report empirical constants.
//! - [`cli`]: the `dtmod` command-line front end.
//!
//! With the default `parallel` feature, h-grid sweeps and campaign cases run on
//! the rayon pool; without it the same code runs sequentially and produces
//! bit-identical results.

pub mod approx;
pub mod cheb;
pub mod cli;
pub mod config;
pub mod error;
pub mod fnspace;
pub mod harness;
pub mod moduli;
pub mod optim;
pub mod par;
pub mod quad;
pub mod shape;
pub mod stieltjes;

pub use error::{Error, Result};
pub use fnspace::{FunctionExpr, JacobiWeight, PartitionSet, RealFunction};
