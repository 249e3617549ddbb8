//! Unfitted finite element solver for fluid-structure-contact interaction
//! in two dimensions.
//!
//! The fluid lives on a fixed structured grid of bilinear elements and is cut
//! by the boundaries of one or more hyperelastic solid bodies discretized on
//! fitted quadrilateral meshes. Fluid-structure coupling and solid-solid
//! contact are both imposed weakly, and the switch between them is decided
//! per quadrature point by comparing the fluid and contact normal tractions.

pub mod config;
pub mod coupling;
pub mod cutcell;
pub mod error;
pub mod fluid;
pub mod geom;
pub mod linalg;
pub mod mesh;
pub mod postproc;
pub mod quadrature;
pub mod scenario;
pub mod solid;
pub mod solver;
pub mod timefn;

pub use error::{Error, Result};
pub use geom::Vec2;
