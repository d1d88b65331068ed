//! Object-oriented macro-action reinforcement learning over topological
//! maps.
//!
//! An agent navigates procedurally generated 2-D grid scenes and must
//! reach color-coded target objects in rank order. Instead of learning
//! over elementary motions, it builds a topological map whose nodes are
//! detected objects, plans shortest paths over that map, and executes
//! navigate-to-node macro actions. A small action-value network scores
//! each map node from the outer product of the node's appearance feature
//! with a one-hot task-progress vector, so one set of weights serves a
//! growing, unordered action set.
//!
//! Numeric work is generic over the scalar type via [`scalar::Real`];
//! [`Scene`], [`Map`], and friends fix the default `f64` instantiation.

pub mod grid;
pub mod planner;
pub mod qnet;
pub mod rng;
pub mod scalar;
pub mod simenv;
pub mod topomap;
pub mod trainer;

/// Default-precision scene.
pub type Scene = simenv::GridScene<f64>;
/// Default-precision appearance patch.
pub type Patch = simenv::AppearancePatch<f64>;
/// Default-precision detection.
pub type Obs = simenv::Detection<f64>;
