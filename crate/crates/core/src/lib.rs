//! Two-dimensional microwave tomography: scene and mesh generation, finite
//! element forward modelling, domain decomposition solvers and quasi-Newton
//! reconstruction of complex permittivity.

pub mod config;
pub mod ddm;
pub mod dielectrics;
pub mod direct;
pub mod error;
pub mod fem;
pub mod forward;
pub mod geometry;
pub mod inversion;
pub mod mesh;
pub mod mesher;
pub mod metrics;
pub mod pipeline;
pub mod scene;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
