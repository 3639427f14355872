//! Simulation and verification toolkit for quasi-integrable deformations of
//! the KdV equation: spectral evolution of the deformed flows, loop-algebra
//! bookkeeping, abelianized gauge coefficients, anomalous charges, the
//! KdV-NLS weak-coupling bridge, and the complex coupled system.

pub mod abelianization;
pub mod charges;
pub mod config;
pub mod coupled;
pub mod deformations;
pub mod error;
pub mod grid;
pub mod loop_algebra;
pub mod nls_map;
pub mod pde;
pub mod report;
