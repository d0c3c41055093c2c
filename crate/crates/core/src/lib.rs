//! Survivable probability of cross-layer networks.
//!
//! A logical network is embedded over a physical network whose links fail independently. This
//! crate evaluates how likely the logical network is to stay connected under a given routing,
//! searches for the routing that maximizes that probability, extracts protecting spanning tree
//! sets that certify it, and checks the numbers against exhaustive and Monte Carlo failure
//! simulation.

pub mod experiments;
pub mod failure_sim;
pub mod instance_file;
pub mod instances;
pub mod model;
pub mod optimizer;
pub mod paths;
pub mod survivability;

pub use instance_file::{parse_instance, write_instance};
pub use model::{
    surviving_logical_subgraph, CrossLayerInstance, Link, LinkMapping, LogicalNetwork, ModelError,
    NodeId, NodeMapping, PhysicalNetwork, PhysicalPath,
};
pub use paths::{enumerate_paths, PathPolicy, PathSet};
