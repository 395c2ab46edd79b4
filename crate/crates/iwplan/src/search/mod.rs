//! Flat width-based planners over a deterministic environment: budgeted
//! breadth-first IW(w) with novelty pruning, and Count-Based Rollout IW with
//! depth-based novelty, count-softmax node selection, and retroactive
//! pruning.

mod bfs;
mod rollout;
mod tree;

pub use bfs::{iw_search, iw_search_with, MixedNovelty, NoveltyCheck, StandardNovelty};
pub use rollout::{
    count_based_riw, ActionSelector, FixedOrder, RolloutEnd, RolloutState, UNIFORM_TAU,
};
pub use tree::{NodeId, SearchNode, SearchTree};

use std::time::Duration;

/// Node-generation budget, shared across all levels of a search.
#[derive(Debug, Clone)]
pub struct SearchBudget {
    max_generated: usize,
    used: usize,
}

impl SearchBudget {
    pub fn new(max_generated: usize) -> Self {
        Self {
            max_generated,
            used: 0,
        }
    }

    /// Consumes one generated-node unit. Returns false when the budget is
    /// already exhausted.
    pub fn take(&mut self) -> bool {
        if self.used < self.max_generated {
            self.used += 1;
            true
        } else {
            false
        }
    }

    pub fn exhausted(&self) -> bool {
        self.used >= self.max_generated
    }

    pub fn used(&self) -> usize {
        self.used
    }
}

/// Outcome summary of one search run.
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub solved: bool,
    pub goal_node: Option<NodeId>,
    pub pruned_nodes: Vec<NodeId>,
    pub expanded_count: usize,
    pub generated_count: usize,
    pub elapsed: Duration,
}

/// A search run: the tree it built plus the outcome summary.
#[derive(Debug)]
pub struct SearchRun<S> {
    pub tree: SearchTree<S>,
    pub result: SearchResult,
}

impl<S: Clone> SearchRun<S> {
    /// The action sequence to the goal, if solved.
    pub fn plan(&self) -> Option<Vec<usize>> {
        self.result.goal_node.map(|g| self.tree.plan_to(g))
    }
}
