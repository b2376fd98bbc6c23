//! Random graphs, minimal spanning trees, cycle breaking and continuum trees
//! at simulation scale.

pub mod continuum;
pub mod cyclebreak;
mod error;
pub mod experiments;
pub mod metric;
pub mod multigraph;
pub mod mst;
pub mod percolation;
pub mod rng;
pub mod samplers;
pub mod stats;
pub mod verify;
mod unionfind;

pub use error::{Error, Result};
pub use multigraph::{Edge, Kernel, Multigraph};
pub use rng::{stream, Stream};
