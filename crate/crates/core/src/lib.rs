//! Decentralized stochastic gradient descent ascent over gossip networks,
//! with coupled-trajectory stability measurement and closed-form bounds.

pub mod bounds;
pub mod config;
pub mod data;
pub mod engine;
pub mod experiment;
pub mod linalg;
pub mod problems;
pub mod report;
pub mod rng;
pub mod stability;
pub mod topology;
