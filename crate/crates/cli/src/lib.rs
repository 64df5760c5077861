//! Scenario files, command-line runner and CSV/SVG output for the
//! occlusion-aware planner in `occmpc-core`.

#![forbid(unsafe_code)]

pub mod app;
pub mod cli;
pub mod export;
pub mod scenario;
pub mod svg;

pub use scenario::{Scenario, ScenarioError};
