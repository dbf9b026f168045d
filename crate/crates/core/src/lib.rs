//! Self-collision matrices for articulated robots: shape representations, pairwise
//! proximity queries, sampling-based skip inference, refinement and export.

pub mod assets;
pub mod bench;
pub mod geometry;
pub mod matrix;
pub mod model;
pub mod proximity;
pub mod sampling;
