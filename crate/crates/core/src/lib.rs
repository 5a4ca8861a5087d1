//! Resistance metrics, volume-growth envelopes, heat kernels, Green kernels and
//! exit times on finite measured electrical networks, together with
//! certificates for heat-kernel bounds under fluctuating volume growth.

pub mod error;
pub mod network;
pub mod resistance;
pub mod volume;
pub mod heat;
pub mod exits;
pub mod generators;
pub mod bounds;
pub mod experiment;

pub use error::{Error, Result};
pub use network::{build_network, MeasuredNetwork, NetworkSpec, VertexFunction};
