//! Wave equations on metric trees and graphs with local Kelvin-Voigt damping.
//!
//! The pipeline is: describe a network ([`network`]), validate its structure
//! ([`graph`]) and damping ([`damping`]), build a P1 finite-element system
//! ([`discretize`]), then either integrate it in time ([`simulate`]) or study
//! its spectrum and resolvent along the imaginary axis ([`spectral`]).

pub mod canonical;
pub mod damping;
pub mod discretize;
pub mod graph;
pub mod network;
pub mod quadrature;
pub mod simulate;
pub mod sparse;
pub mod spectral;

use thiserror::Error;

/// Version of this library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use damping::{DampingAssignment, DampingError, DampingProfile, ProfileSpec};
pub use discretize::{DiscreteSystem, DiscretizeError, Mesh, Resolution};
pub use graph::{EdgeId, GraphError, MetricGraph, Mode, VertexId};
pub use network::{Network, NetworkSpec};
pub use simulate::SimulateError;
pub use spectral::SpectralError;

/// Any error produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot parse network description: {0}")]
    Parse(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Damping(#[from] DampingError),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
    #[error(transparent)]
    Simulate(#[from] SimulateError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}
