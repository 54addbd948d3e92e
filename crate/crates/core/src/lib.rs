//! Rotating Oberbeck–Boussinesq simulator with velocity nudging.
//!
//! The horizontal velocity lives on a 2-D staggered grid over `(0, lx) x (0, ly)`;
//! the temperature deviation lives on the 3-D cylinder `(0, lx) x (0, ly) x (0, 1)`
//! and feels the velocity through horizontal advection only. The two are coupled
//! by the buoyancy term `-<Θ> ∇_h F`.

pub mod assimilation;
pub mod diagnostics;
pub mod elliptic;
pub mod error;
pub mod expr;
pub mod grid;
pub mod interpolant;
pub mod io;
pub mod solver;
pub mod transforms;

pub use error::{Error, Result};
