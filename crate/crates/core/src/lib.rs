//! Two-type Widom–Rowlinson birth-and-death dynamics.
//!
//! The crate is organised bottom-up:
//!
//! * [`potential`]: bounded finite-range pair potentials, their
//!   Lebowitz–Penrose rescaling and periodic discretisation.
//! * [`gf_algebra`]: brute-force calculus on finite two-type configurations
//!   (K-transform, Lebesgue–Poisson exponentials, the symbol of the generator).
//! * [`kinetics`]: the nonlocal kinetic system on a torus grid, solved by a
//!   Picard contraction and cross-checked against RK4.
//! * [`equilibria`]: stationary states of the space-homogeneous system,
//!   their stability and the saddle-node bifurcation at `a = e`.
//! * [`microsim`]: exact event-driven simulation of the particle system on a
//!   periodic box via uniformisation.

pub mod equilibria;
pub mod geometry;
pub mod gf_algebra;
pub mod kinetics;
pub mod microsim;
pub mod potential;
pub mod rng;

pub use geometry::{Dim, Point};
pub use potential::{PairPotential, PeriodicKernel, PotentialShape};
