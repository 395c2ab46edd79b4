//! Resumable low-level searches owned by high-level nodes: a suspendable
//! breadth-first IW(w) and a wrapper around the rollout search state. Both
//! run over a region of the shared concrete arena and yield control when
//! they generate a state whose high-level features differ from the region's.

use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;

use crate::novelty::{FeatureVector, NoveltyTable};
use crate::search::{ActionSelector, NodeId, RolloutEnd, RolloutState, SearchBudget, SearchTree};
use crate::simulator::{DeterministicEnv, FeatureMap};

use super::LevelSplit;

/// How one resume of a low-level search ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowOutcome {
    /// Generated a state outside this region (a high-level successor
    /// candidate); the node is in the arena but not in this region's
    /// novelty table or frontier.
    Boundary(NodeId),
    /// A generated state satisfied the environment goal.
    Solved(NodeId),
    /// The region's frontier is empty; nothing more to search here.
    Exhausted,
    /// The resume cap (or one rollout) completed without exhausting the
    /// region; call again to continue.
    Paused,
    OutOfBudget,
}

/// One low-level search, resumable across boundary returns.
#[derive(Debug, Clone)]
pub enum LowSearch {
    Bfs(BfsLow),
    Rollout(RolloutState),
}

impl LowSearch {
    /// True when the frontier is empty and no expansion is in progress.
    pub fn exhausted(&self) -> bool {
        match self {
            LowSearch::Bfs(b) => b.current.is_none() && b.queue.is_empty(),
            LowSearch::Rollout(r) => r.open_len() == 0,
        }
    }
}

/// Suspendable breadth-first IW(w): a FIFO frontier plus the node whose
/// expansion a boundary return interrupted. Untried-action cursors live on
/// the arena nodes so that suspension and tree restructuring never lose or
/// repeat a generation.
#[derive(Debug, Clone)]
pub struct BfsLow {
    table: NoveltyTable,
    queue: VecDeque<NodeId>,
    current: Option<NodeId>,
}

impl BfsLow {
    pub fn new(width: usize, num_low_features: usize) -> Self {
        Self {
            table: NoveltyTable::new(width, num_low_features)
                .expect("width within low feature count"),
            queue: VecDeque::new(),
            current: None,
        }
    }

    /// Records the region root in the fresh table and opens it.
    pub fn admit_root<S: Clone>(
        &mut self,
        arena: &SearchTree<S>,
        id: NodeId,
        low_vec: &FeatureVector,
    ) {
        let (novel, _) = self
            .table
            .check_and_update(low_vec)
            .expect("root features conform");
        debug_assert!(novel, "fresh table admits any vector");
        if !arena.get(id).terminal {
            self.queue.push_back(id);
        }
    }

    /// Continues the breadth-first expansion. Returns on the first goal or
    /// boundary state, when the frontier empties, when the budget runs out,
    /// or after `cap` generations (Paused).
    #[allow(clippy::too_many_arguments)]
    pub fn resume<E, M, P>(
        &mut self,
        arena: &mut SearchTree<E::State>,
        env: &E,
        map: &M,
        split: &P,
        hl_features: &FeatureVector,
        budget: &mut SearchBudget,
        cap: Option<usize>,
        novel_accepts: &mut usize,
    ) -> LowOutcome
    where
        E: DeterministicEnv,
        M: FeatureMap<E::State>,
        P: LevelSplit<E::State>,
    {
        let mut generated = 0usize;
        loop {
            let id = match self.current {
                Some(id) => id,
                None => match self.queue.pop_front() {
                    Some(id) => {
                        self.current = Some(id);
                        id
                    }
                    None => return LowOutcome::Exhausted,
                },
            };
            if arena.get(id).untried.is_none() {
                let all: Vec<u16> = (0..env.action_count() as u16).collect();
                arena.get_mut(id).untried = Some(all);
            }
            let untried = arena.get_mut(id).untried.as_mut().expect("just initialized");
            if untried.is_empty() {
                arena.get_mut(id).expanded = true;
                self.current = None;
                continue;
            }
            let action = untried.remove(0);
            if untried.is_empty() {
                arena.get_mut(id).expanded = true;
            }
            let Some(transition) = env.step(&arena.get(id).state, action as usize) else {
                continue;
            };
            if !budget.take() {
                return LowOutcome::OutOfBudget;
            }
            generated += 1;
            let base = map.features(&transition.state);
            let terminal = env.is_terminal(&transition.state);
            let goal = env.is_goal(&transition.state);
            let child = arena.add_child(
                id,
                action as usize,
                transition.state,
                base,
                transition.reward,
                terminal,
            );
            if goal {
                return LowOutcome::Solved(child);
            }
            let node = arena.get(child);
            let high = split.high(&node.state, &node.features);
            if high != *hl_features {
                return LowOutcome::Boundary(child);
            }
            let low = split.low(&node.state, &node.features);
            let (novel, _) = self
                .table
                .check_and_update(&low)
                .expect("child features conform");
            if novel {
                *novel_accepts += 1;
                if !terminal {
                    self.queue.push_back(child);
                }
            } else {
                arena.get_mut(child).pruned = true;
            }
            if let Some(limit) = cap {
                if generated >= limit {
                    return LowOutcome::Paused;
                }
            }
        }
    }

    /// Fresh search state over an existing region: replays unpruned member
    /// feature vectors in breadth-first order into a new table, re-opens the
    /// unexpanded ones, and (optionally) re-checks pruned members, reviving
    /// any that are novel under the new table.
    pub fn rebuilt_from<S, P>(
        width: usize,
        num_low_features: usize,
        arena: &mut SearchTree<S>,
        members: &[NodeId],
        split: &P,
        revive: bool,
    ) -> Self
    where
        S: Clone,
        P: LevelSplit<S>,
    {
        let mut low = Self::new(width, num_low_features);
        for &m in members {
            let node = arena.get(m);
            if node.pruned {
                continue;
            }
            let lv = split.low(&node.state, &node.features);
            let _ = low
                .table
                .check_and_update(&lv)
                .expect("member features conform");
            let unexpanded = node.untried.as_ref().is_none_or(|u| !u.is_empty());
            if !node.terminal && unexpanded {
                low.queue.push_back(m);
            }
        }
        if revive {
            for &m in members {
                if !arena.get(m).pruned {
                    continue;
                }
                let node = arena.get(m);
                let lv = split.low(&node.state, &node.features);
                let (novel, _) = low
                    .table
                    .check_and_update(&lv)
                    .expect("member features conform");
                if novel {
                    arena.get_mut(m).pruned = false;
                    if !arena.get(m).terminal {
                        low.queue.push_back(m);
                    }
                }
            }
        }
        low
    }
}

/// One chunk of low-level work for a rollout-backed region: a single
/// rollout from a uniformly (or count-softmax) selected open node.
#[allow(clippy::too_many_arguments)]
pub fn resume_rollout<E, M, P>(
    rollout: &mut RolloutState,
    arena: &mut SearchTree<E::State>,
    env: &E,
    map: &M,
    split: &P,
    hl_features: &FeatureVector,
    budget: &mut SearchBudget,
    selector: &mut dyn ActionSelector<E::State>,
    rng: &mut ChaCha8Rng,
) -> LowOutcome
where
    E: DeterministicEnv,
    M: FeatureMap<E::State>,
    P: LevelSplit<E::State>,
{
    if budget.exhausted() {
        return LowOutcome::OutOfBudget;
    }
    let Some(start) = rollout.select(arena, rng) else {
        return LowOutcome::Exhausted;
    };
    let mut boundary =
        |state: &E::State, base: &FeatureVector| split.high(state, base) != *hl_features;
    match rollout.rollout(arena, start, env, map, budget, selector, &mut boundary, rng) {
        RolloutEnd::Solved(id) => LowOutcome::Solved(id),
        RolloutEnd::Boundary(id) => LowOutcome::Boundary(id),
        RolloutEnd::OutOfBudget => LowOutcome::OutOfBudget,
        RolloutEnd::Finished => {
            if rollout.open_len() == 0 {
                LowOutcome::Exhausted
            } else {
                LowOutcome::Paused
            }
        }
    }
}
