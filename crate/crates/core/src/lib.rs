//! Observer-based boundary stabilization of 1-D reaction-diffusion equations.
//!
//! The plant is `z_t = (p z_x)_x + (q_c - q) z` on `(0, 1)`, actuated through
//! the Dirichlet trace at `x = 1` and measured either through a bounded
//! functional, the Dirichlet trace `z(t, 0)` or the Neumann trace `z_x(t, 0)`.
//!
//! The crate is organised as a pipeline:
//!
//! - [`sturm_liouville`]: eigenpairs of `-(p f')' + q f` and boundary traces.
//! - [`homogenize`]: boundary lifting, modal reduction, `N0` and tail constants.
//! - [`synthesis`]: pole placement for the state feedback and the observer,
//!   and assembly of the finite-dimensional closed-loop matrices.
//! - [`certificate`]: Lyapunov/Riccati constructions of stability
//!   certificates, independent verification, minimal observer order, SDPA
//!   export and the uniform-boundedness sweep of the Lyapunov matrices.
//! - [`simulate`]: exact LTI stepping of the modal closed loop, field
//!   reconstruction, Lyapunov functional and decay fitting.
//!
//! Data-parallel loops (per-mode eigen-solves, sweeps over observer orders)
//! go through [`Exec`], which uses rayon when the `parallel` feature is on
//! and runs sequentially otherwise.

pub mod certificate;
mod error;
mod exec;
pub mod homogenize;
pub mod linalg;
pub mod presets;
pub mod simulate;
pub mod sturm_liouville;
pub mod synthesis;

pub use error::{Error, Result};
pub use exec::Exec;
