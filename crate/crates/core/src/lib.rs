//! Particle-swarm solvers for continuous distributed constraint optimization
//! problems, run as a deterministic synchronous message-passing simulation.

pub mod benchgen;
pub mod experiment;
pub mod expr;
pub mod model;
pub mod oracle;
pub mod pseudo_tree;
pub mod rng;
pub mod runtime;
pub mod solver;
