//! Corridor-with-key environment: walk to the far end of a corridor of
//! length L, pick up the key (automatic on arrival), and walk back to
//! position 0. Described by two features, position p and key flag k, the
//! task has width 2 yet every single feature is width 1.

use super::{DeterministicEnv, FeatureMap, GoalTaskWrapper, Transition};
use crate::novelty::{FeatureSchema, FeatureVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CorridorState {
    /// Position in [0, L].
    pub p: u32,
    /// Whether the key has been picked up.
    pub k: bool,
}

#[derive(Debug, Clone)]
pub struct CorridorEnv {
    length: u32,
}

pub const CORRIDOR_LEFT: usize = 0;
pub const CORRIDOR_RIGHT: usize = 1;

impl CorridorEnv {
    pub fn new(length: u32) -> Self {
        assert!(length >= 1, "corridor length must be positive");
        Self { length }
    }

    pub fn length(&self) -> u32 {
        self.length
    }

    /// The corridor wrapped as a goal task: reach p=0 holding the key.
    pub fn goal_task(length: u32) -> GoalTaskWrapper<CorridorEnv, fn(&CorridorState) -> bool> {
        GoalTaskWrapper::new(CorridorEnv::new(length), |s: &CorridorState| {
            s.p == 0 && s.k
        })
    }
}

impl DeterministicEnv for CorridorEnv {
    type State = CorridorState;

    fn action_count(&self) -> usize {
        2
    }

    fn initial_state(&self) -> CorridorState {
        CorridorState { p: 0, k: false }
    }

    fn step(&self, state: &CorridorState, action: usize) -> Option<Transition<CorridorState>> {
        let p = match action {
            CORRIDOR_LEFT => state.p.saturating_sub(1),
            CORRIDOR_RIGHT => (state.p + 1).min(self.length),
            _ => return None,
        };
        let k = state.k || p == self.length;
        Some(Transition {
            state: CorridorState { p, k },
            reward: 0.0,
        })
    }

    fn is_terminal(&self, _state: &CorridorState) -> bool {
        false
    }
}

/// Feature mapping φ(s) = (p, k) with domains (L+1, 2).
#[derive(Debug, Clone)]
pub struct CorridorFeatures {
    schema: FeatureSchema,
}

impl CorridorFeatures {
    pub fn new(env: &CorridorEnv) -> Self {
        let schema = FeatureSchema::new(
            vec!["p".into(), "k".into()],
            vec![env.length() + 1, 2],
        )
        .expect("two distinct names");
        Self { schema }
    }
}

impl FeatureMap<CorridorState> for CorridorFeatures {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn features(&self, state: &CorridorState) -> FeatureVector {
        FeatureVector(vec![state.p, state.k as u32])
    }
}
