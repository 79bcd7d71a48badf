//! Scattering theory for the matrix Schrödinger operator
//! `-ψ'' + Q(x)ψ = k²ψ` on the half-line with general self-adjoint
//! conditions at the origin, and for star graphs with diagonal potentials.

pub mod bc;
pub mod darboux;
pub mod error;
pub mod forward;
pub mod io;
pub mod linalg;
pub mod marchenko;
pub mod numerics;
pub mod potential;
pub mod spectral;
pub mod star;

pub use bc::{BoundaryCondition, StandardKind};
pub use darboux::{DarbouxFactor, ZeroEnergyFrame};
pub use error::{Error, Result};
pub use forward::{BoundState, ForwardOptions, JostFunctions, KGrid, ScatteringData};
pub use linalg::{CMat, C64};
pub use marchenko::{InverseResult, MarchenkoConfig};
pub use potential::{MatrixPotential, Preset};
pub use star::{GraphRecoveryResult, RayScatteringData, RecoveryConfig, StarGraphPotential};
