//! Command-line front end: configuration resolution, the six
//! subcommands, and the SVG learning-curve renderer. `main` stays a thin
//! dispatch layer so all behavior here is unit-testable.

pub mod cmd;
pub mod config;
pub mod plot;
