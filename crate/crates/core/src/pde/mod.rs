//! Finite-difference solver for `-Δu + e^u - 1 = ν` on planar rectangles
//! with zero Dirichlet data and measure right-hand sides.

pub mod energy;
pub mod grid;
pub mod mollifier;
pub mod multigrid;
pub mod potential;
pub mod residual;
pub mod scheme;
