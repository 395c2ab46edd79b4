//! The deterministic-environment contract all planners search over, the
//! goal-task-to-reward wrapper, and the built-in environments.

mod corridor;
mod gridworld;
mod tiles;

pub use corridor::{CorridorEnv, CorridorFeatures, CorridorState, CORRIDOR_LEFT, CORRIDOR_RIGHT};
pub use gridworld::{
    rendered_features, BoundGridFeatures, GridStatus, GridTileFeatures, GridworldEnv,
    GridworldState, Image, GW_DOWN, GW_LEFT, GW_RIGHT, GW_UP, OBS_CHANNELS, OBS_SIZE,
};
pub use tiles::{tile_discretize, TileFeatureMap};

use std::fmt::Debug;
use std::hash::Hash;

use thiserror::Error;

use crate::novelty::{FeatureSchema, FeatureVector};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimulatorError {
    #[error("map parse error at line {line}: {message}")]
    MapParse { line: usize, message: String },
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("empty image")]
    EmptyImage,
}

/// One deterministic transition: the successor state and the reward paid on
/// the way in.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub state: S,
    pub reward: f64,
}

/// A deterministic environment: same state and action always produce the
/// same successor. `step` returns `None` when the action is inapplicable in
/// the given state (planners skip such actions; they are not self-loops).
pub trait DeterministicEnv {
    type State: Clone + Eq + Hash + Debug;

    fn action_count(&self) -> usize;
    fn initial_state(&self) -> Self::State;
    fn step(&self, state: &Self::State, action: usize) -> Option<Transition<Self::State>>;
    fn is_terminal(&self, state: &Self::State) -> bool;

    /// Whether this state satisfies the task goal; searches report `solved`
    /// when they generate such a state. Reward-only environments leave this
    /// false and searches simply maximize returns.
    fn is_goal(&self, _state: &Self::State) -> bool {
        false
    }
}

/// Maps concrete states to feature vectors. Planners only ever see states
/// through one of these.
pub trait FeatureMap<S> {
    fn schema(&self) -> &FeatureSchema;
    fn features(&self, state: &S) -> FeatureVector;
}

/// Restriction of a base feature map to a subset of its feature indices,
/// used to split one schema into high-level and low-level views.
pub struct ProjectionMap<M> {
    base: M,
    indices: Vec<usize>,
    schema: FeatureSchema,
}

impl<M> ProjectionMap<M> {
    pub fn new<S>(base: M, indices: Vec<usize>) -> Self
    where
        M: FeatureMap<S>,
    {
        let names = indices
            .iter()
            .map(|&i| base.schema().names()[i].clone())
            .collect();
        let domains = indices
            .iter()
            .map(|&i| base.schema().domain_sizes()[i])
            .collect();
        let schema = FeatureSchema::new(names, domains).expect("projection of a valid schema");
        Self {
            base,
            indices,
            schema,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

impl<S, M: FeatureMap<S>> FeatureMap<S> for ProjectionMap<M> {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn features(&self, state: &S) -> FeatureVector {
        let full = self.base.features(state);
        FeatureVector(self.indices.iter().map(|&i| full.0[i]).collect())
    }
}

impl<S, M: FeatureMap<S> + ?Sized> FeatureMap<S> for &M {
    fn schema(&self) -> &FeatureSchema {
        (**self).schema()
    }

    fn features(&self, state: &S) -> FeatureVector {
        (**self).features(state)
    }
}

/// Decides whether a state satisfies the task goal.
pub trait GoalPredicate<S> {
    fn is_goal(&self, state: &S) -> bool;
}

impl<S, F: Fn(&S) -> bool> GoalPredicate<S> for F {
    fn is_goal(&self, state: &S) -> bool {
        self(state)
    }
}

/// Turns a reward-free environment plus a goal predicate into the standard
/// goal MDP: +1 is paid on the transition into a goal state, goal states are
/// absorbing, and everything after the goal pays 0.
#[derive(Debug, Clone)]
pub struct GoalTaskWrapper<E, G> {
    inner: E,
    goal: G,
}

impl<E, G> GoalTaskWrapper<E, G>
where
    E: DeterministicEnv,
    G: GoalPredicate<E::State>,
{
    pub fn new(inner: E, goal: G) -> Self {
        Self { inner, goal }
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    pub fn is_goal(&self, state: &E::State) -> bool {
        self.goal.is_goal(state)
    }
}

impl<E, G> DeterministicEnv for GoalTaskWrapper<E, G>
where
    E: DeterministicEnv,
    G: GoalPredicate<E::State>,
{
    type State = E::State;

    fn action_count(&self) -> usize {
        self.inner.action_count()
    }

    fn initial_state(&self) -> Self::State {
        self.inner.initial_state()
    }

    fn step(&self, state: &Self::State, action: usize) -> Option<Transition<Self::State>> {
        if self.goal.is_goal(state) {
            return Some(Transition {
                state: state.clone(),
                reward: 0.0,
            });
        }
        let next = self.inner.step(state, action)?;
        let reward = if self.goal.is_goal(&next.state) {
            1.0
        } else {
            0.0
        };
        Some(Transition {
            state: next.state,
            reward,
        })
    }

    fn is_terminal(&self, state: &Self::State) -> bool {
        self.goal.is_goal(state) || self.inner.is_terminal(state)
    }

    fn is_goal(&self, state: &Self::State) -> bool {
        self.goal.is_goal(state)
    }
}
