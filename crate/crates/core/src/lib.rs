//! Coined and percolated Grover quantum walks on 3-regular graphs: state
//! graphs, exact step operators and channels, trapped subspaces and
//! source-to-sink transport efficiency.

pub mod dynamics;
pub mod error;
pub mod graph;
pub mod numerics;
pub mod transport;
pub mod trapped;

pub use error::{Error, Result};
