//! Numerical laboratory for the repulsive two-species random walk on the
//! discrete torus and its semi-discrete cross-diffusion limit.

pub mod duality_check;
pub mod experiments;
pub mod fenwick;
pub mod grid_ops;
pub mod numeric;
pub mod params;
pub mod reconstruct;
pub mod semidiscrete;
pub mod walkers;
