//! Macro-action planning and execution: shortest paths over the map,
//! local steering over known cells, and the episode-scoped executor that
//! ties them to perception and goal logic.

mod env;
mod path;
mod steer;

pub use env::{BootstrapOutcome, MacroAction, MacroCaps, MacroEnv, MacroOutcome, TraceEvent};
pub use path::{shortest_path, PlanError};
pub use steer::{steer_local, NavMemory};
