//! Multi-agent debate simulation with adversarial agents and sentinel-side
//! credit-based filtering.
//!
//! The crate covers the whole pipeline: simulated debates under several
//! attack families ([`debate`], [`policy`]), labeled trajectories and
//! contrastive tuples ([`dataset`]), a linear response scorer trained on those
//! tuples ([`scorer`]), the per-sentinel bottom-k blacklist ([`defense`]) and
//! the evaluation harness ([`eval`]).

pub mod dataset;
pub mod debate;
pub mod defense;
pub mod eval;
pub mod features;
pub mod http;
pub mod policy;
pub mod rng;
pub mod scenario;
pub mod scorer;
pub mod tasks;
