//! Width-based planning engine over deterministic simulators: novelty
//! tables and their combinatorics, breadth-first and rollout IW planners,
//! two-level hierarchical search with incremental feature discovery, and
//! policy-guided replanning with a pluggable estimator.

pub mod guidance;
pub mod hierarchy;
pub mod novelty;
pub mod search;
pub mod simulator;
pub mod strips;
pub mod widthmath;
