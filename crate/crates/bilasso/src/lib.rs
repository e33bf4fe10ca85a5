//! Bayesian bi-level group lasso for multi-task regression.
//!
//! The model relates an n×c response matrix `Y` to an n×d design matrix `X`
//! through a d×c coefficient matrix `W`, with shrinkage imposed at two nested
//! levels: groups of rows (genes) and individual rows (SNPs). The crate
//! provides
//!
//! * exact log-density evaluations and the two penalty norms ([`likelihood`]),
//! * a Gibbs sampler over (W, τ², ω², σ²) with the tuning parameters
//!   (λ₁², λ₂²) either fixed or sampled under Gamma hyperpriors ([`gibbs`]),
//! * empirical-Bayes tuning via Monte Carlo EM ([`mcem`]),
//! * WAIC grid search and a closed-form marginal-likelihood approximation
//!   ([`selection`]),
//! * an accelerated proximal-gradient solver for the equivalent penalized
//!   estimator, with a numerical check of the posterior-mode relation
//!   γᵢ = 2σλᵢ ([`map_solver`]),
//! * a synthetic data generator ([`sim`]).
//!
//! Scalar-generic kernels are written over the [`scalar::Real`] trait; the
//! sampling stack and the aliases below are pinned to `f64`.

pub mod data;
pub mod error;
pub mod gibbs;
pub mod groups;
pub mod likelihood;
pub mod linalg;
pub mod map_solver;
pub mod mcem;
pub mod rng;
pub mod scalar;
pub mod selection;
pub mod sim;

pub use data::{ChainOutput, Dataset, ModelState, PriorConfig};
pub use error::{Error, Result};
pub use groups::GroupStructure;
pub use scalar::Real;

/// Dense real matrix at working precision.
pub type Matrix = ndarray::Array2<f64>;
/// Dense real vector at working precision.
pub type Vector = ndarray::Array1<f64>;
/// Generic matrix alias for the scalar-generic kernels.
pub type Mat<S> = ndarray::Array2<S>;
/// Generic vector alias for the scalar-generic kernels.
pub type Vec1<S> = ndarray::Array1<S>;
