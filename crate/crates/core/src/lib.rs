//! Maximum likelihood estimation and positive definite matrix completion for
//! Gaussian graphical models.
//!
//! The estimator for a graph `G` and sample covariance `S` is the unique
//! positive definite `Σ̂` that agrees with `S` on the edges and diagonal of
//! `G` and whose inverse vanishes on the non-edges. It exists exactly when
//! that partial matrix has a positive definite completion.
//!
//! ```
//! use ggm_core::graphs::Graph;
//! use ggm_core::linalg::SymMatrix;
//! use ggm_core::mle::{fit_coordinate_k, FitOptions};
//!
//! let s = SymMatrix::from_rows(&[
//!     vec![1.0, 0.5, 0.0],
//!     vec![0.5, 1.0, 0.4],
//!     vec![0.0, 0.4, 1.0],
//! ])
//! .unwrap();
//! let fit = fit_coordinate_k(&Graph::path(3), &s, &FitOptions::default()).unwrap();
//! assert!(fit.converged());
//! assert!((fit.sigma_hat.get(0, 2) - 0.2).abs() < 1e-8);
//! ```

pub mod completion;
pub mod error;
pub mod gaussian;
pub mod graphs;
pub mod linalg;
pub mod mle;
pub mod rcon;
pub mod select;
pub mod subspace;

pub use error::{GgmError, Result};
pub use graphs::Graph;
pub use linalg::SymMatrix;
