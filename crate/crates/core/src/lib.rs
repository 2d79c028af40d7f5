//! Radial solitary waves of the Schrödinger–Poisson system with an attractive
//! Coulomb center,
//!
//! ```text
//! -½Δu - φu - (z/|x|) u = ωu,   Δφ = 4πu²,   ∫u² = N,
//! ```
//!
//! in units where `ħ²/2m = 1` and `e = 1`. Radial problems are solved on the
//! reduced fields `U = r u` and `V = -r φ`, which turn the three-dimensional
//! Laplacian into a second derivative on the half line.
//!
//! The building blocks are layered bottom-up: [`grid`] (discretization and
//! quadrature), [`poisson`] (inverse Laplacian), [`energy`] (functional and its
//! derivative), [`eigen`] (linear radial eigenproblem), [`scf`] (nonlinear
//! self-consistent iteration), [`diagnostics`] (checks on converged states) and
//! [`cli`] (batch front end).

pub mod cli;
pub mod diagnostics;
pub mod eigen;
pub mod energy;
pub mod error;
pub mod grid;
pub mod poisson;
pub mod scf;

pub use error::{Result, SolitonError};
pub use grid::{build_grid, ProblemSpec, RadialField, RadialGrid, Stencil};
pub use scf::{Backend, ScfConfig, SolitonState};
