//! Experiment runner for the iwplan planning engine: classical coverage
//! suites over grounded task files, pixel-gridworld replanning/learning
//! runs, and width-combinatorics queries. The binary in `main.rs` is a thin
//! CLI over these modules.

pub mod classical;
pub mod config;
pub mod pixel;
pub mod widthmath;
