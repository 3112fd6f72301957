//! Phase-factor solvers for symmetric quantum signal processing.
//!
//! Given a real target polynomial f with definite parity and sup norm below
//! one, the crate computes symmetric phase factors whose signal unitary has
//! Re U_00 = f, by two independent routes: projected gradient descent on a
//! least-squares cost over Chebyshev nodes (`optimizer`), and direct
//! construction via root selection and symmetric reduction (`direct`). The
//! `landscape` module carries numerical studies of the cost surface that
//! back the optimization guarantees.

pub mod chebyshev;
pub mod direct;
pub mod error;
pub mod io;
pub mod landscape;
pub(crate) mod linalg;
pub mod objective;
pub mod optimizer;
pub mod qsp;

pub use error::{Error, Result};
