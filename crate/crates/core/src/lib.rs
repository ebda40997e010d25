//! Belief propagation for maximum-weight bipartite matching, with exact
//! oracles and a Monte Carlo harness for convergence-time tails.

pub mod bp;
pub mod comptree;
pub mod error;
pub mod experiments;
pub mod generators;
pub mod instance;
pub mod oracles;

pub use error::{Error, Result};
pub use instance::{BipartiteInstance, Edge, FlowEdge, FlowNetwork, Instance, IntegerFlow, Matching};
