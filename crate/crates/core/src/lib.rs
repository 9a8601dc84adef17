//! Simulation and analysis of affect-conditioned conversational agents.
//!
//! Emotional states live in a continuous valence/arousal square and map onto
//! a 5x5 grid of self-assessment manikin levels. Agents are prompted with a
//! state, their replies are scored back into the square, and [`stats`]
//! compares what was asked for with what came out.

pub mod affect;
pub mod agents;
pub mod corpus;
pub mod experiments;
#[cfg(feature = "live")]
mod net;
pub mod report;
pub mod sampling;
pub mod scorer;
pub mod stats;
