//! Convex geometry of second-order subequations and grid-level checks of
//! viscosity, distributional and classical subharmonicity.

pub mod cli;
pub mod cone;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod jet_space;
pub mod linalg;
pub mod lp;
pub mod report;
pub mod subequation;
pub mod subharmonic;

pub use error::{Error, Result};
