//! Physics-informed time-derivative networks for 1D evolution equations.
//!
//! The network learns `u_t` (or `u_tt`) instead of `u`; the state is
//! recovered by quadrature in time and trained against the time derivative
//! of the PDE residual.

pub mod diffcore;
pub mod harness;
pub mod net;
pub mod optim;
pub mod loss;
pub mod problems;
pub mod reference;
pub mod sampling;
pub mod volterra;
