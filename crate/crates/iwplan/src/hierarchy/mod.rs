//! Two-level hierarchical width-based search: a high-level planner over
//! abstract feature vectors whose successor function is a resumable
//! low-level search, plus feature discovery from pruned branches, tree
//! restructuring, and the incremental driver that ties them together.

mod discover;
mod low;
mod splitting;

pub use discover::{
    find_abstract_features, ihiw, restructure_tree, CandidateFeatureSet, IhiwConfig, IhiwRun,
};
pub use low::{BfsLow, LowOutcome, LowSearch};
pub use splitting::{enumerate_reachable, is_splitting};

use std::collections::{HashMap, VecDeque};
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use thiserror::Error;

use crate::novelty::{FeatureSchema, FeatureVector, NoveltyTable};
use crate::search::{
    ActionSelector, FixedOrder, NodeId, RolloutState, SearchBudget, SearchResult, SearchTree,
};
use crate::simulator::{DeterministicEnv, FeatureMap};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HierarchyError {
    #[error("search widths must be at least 1")]
    InvalidWidth,
    #[error("high-level feature index {0} out of range for the base schema")]
    FeatureOutOfRange(u16),
    #[error("promoting every base feature would leave the low level empty")]
    EmptyLowLevel,
    #[error("candidate value {value} of feature {feature} never observed in the tree")]
    CandidateNotObserved { feature: u16, value: u32 },
    #[error("state space exceeds the enumeration limit of {limit}")]
    EnumerationLimit { limit: usize },
}

/// How one search level derives its feature vector from a concrete state
/// and the base features stored on the arena node.
pub trait LevelSplit<S> {
    fn high_schema(&self) -> &FeatureSchema;
    fn low_schema(&self) -> &FeatureSchema;
    fn high(&self, state: &S, base: &FeatureVector) -> FeatureVector;
    fn low(&self, state: &S, base: &FeatureVector) -> FeatureVector;
}

/// Splits one base feature map into a high-level projection and its
/// complement, the form used by classical tasks where F_h is a subset of
/// the task's features. An empty `high` set degenerates to flat search.
#[derive(Debug, Clone)]
pub struct ProjectionSplit {
    high_idx: Vec<u16>,
    low_idx: Vec<u16>,
    high_schema: FeatureSchema,
    low_schema: FeatureSchema,
}

impl ProjectionSplit {
    pub fn new(base: &FeatureSchema, high: &[u16]) -> Result<Self, HierarchyError> {
        let mut high_idx: Vec<u16> = high.to_vec();
        high_idx.sort_unstable();
        high_idx.dedup();
        if let Some(&bad) = high_idx.iter().find(|&&i| (i as usize) >= base.len()) {
            return Err(HierarchyError::FeatureOutOfRange(bad));
        }
        let low_idx: Vec<u16> = (0..base.len() as u16)
            .filter(|i| !high_idx.contains(i))
            .collect();
        if !high_idx.is_empty() && low_idx.is_empty() {
            return Err(HierarchyError::EmptyLowLevel);
        }
        let sub = |idx: &[u16]| {
            FeatureSchema::new(
                idx.iter()
                    .map(|&i| base.names()[i as usize].clone())
                    .collect(),
                idx.iter()
                    .map(|&i| base.domain_sizes()[i as usize])
                    .collect(),
            )
            .expect("subset of a valid schema")
        };
        Ok(Self {
            high_schema: sub(&high_idx),
            low_schema: sub(&low_idx),
            high_idx,
            low_idx,
        })
    }

    pub fn high_indices(&self) -> &[u16] {
        &self.high_idx
    }
}

impl<S> LevelSplit<S> for ProjectionSplit {
    fn high_schema(&self) -> &FeatureSchema {
        &self.high_schema
    }

    fn low_schema(&self) -> &FeatureSchema {
        &self.low_schema
    }

    fn high(&self, _state: &S, base: &FeatureVector) -> FeatureVector {
        FeatureVector(
            self.high_idx
                .iter()
                .map(|&i| base.values()[i as usize])
                .collect(),
        )
    }

    fn low(&self, _state: &S, base: &FeatureVector) -> FeatureVector {
        FeatureVector(
            self.low_idx
                .iter()
                .map(|&i| base.values()[i as usize])
                .collect(),
        )
    }
}

/// Pairs an independent high-level feature map with the base map, which
/// doubles as the low level — the form used by pixel tasks where the
/// abstraction is a coarser discretization of the same observation.
#[derive(Debug, Clone)]
pub struct MapSplit<H> {
    high_map: H,
    low_schema: FeatureSchema,
}

impl<H> MapSplit<H> {
    pub fn new(high_map: H, base_schema: FeatureSchema) -> Self {
        Self {
            high_map,
            low_schema: base_schema,
        }
    }
}

impl<S, H: FeatureMap<S>> LevelSplit<S> for MapSplit<H> {
    fn high_schema(&self) -> &FeatureSchema {
        self.high_map.schema()
    }

    fn low_schema(&self) -> &FeatureSchema {
        &self.low_schema
    }

    fn high(&self, state: &S, _base: &FeatureVector) -> FeatureVector {
        self.high_map.features(state)
    }

    fn low(&self, _state: &S, base: &FeatureVector) -> FeatureVector {
        base.clone()
    }
}

/// Order in which the high-level planner visits unexhausted high-level
/// nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HighOrder {
    /// IW(w_h): FIFO, each node exhausted before the next.
    BreadthFirst,
    /// Count-softmax selection over high-level feature-vector visitation
    /// counts; each pull resumes one chunk of the chosen node's low search.
    CountBased { tau: f64 },
}

/// The flavor of low-level search each high-level node owns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LowKind {
    BreadthFirst,
    /// Rollout IW with depth novelty; `tau` selects rollout start nodes
    /// (infinite = uniform).
    Rollout { tau: f64 },
}

#[derive(Debug, Clone)]
pub struct HierarchyConfig {
    pub high_width: usize,
    pub low_width: usize,
    pub high_order: HighOrder,
    pub low_kind: LowKind,
    /// Breadth-first low searches yield control after this many generations
    /// even without a boundary, letting count-based high orders interleave
    /// regions. `None` runs until boundary or exhaustion.
    pub low_resume_cap: Option<usize>,
}

impl HierarchyConfig {
    /// Classical HIW(w_h, w_l): breadth-first at both levels.
    pub fn breadth_first(high_width: usize, low_width: usize) -> Self {
        Self {
            high_width,
            low_width,
            high_order: HighOrder::BreadthFirst,
            low_kind: LowKind::BreadthFirst,
            low_resume_cap: None,
        }
    }

    pub fn validate(&self) -> Result<(), HierarchyError> {
        if self.high_width == 0 || self.low_width == 0 {
            return Err(HierarchyError::InvalidWidth);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HlId(pub u32);

impl HlId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One abstract state: the high-level feature vector shared by a connected
/// region of concrete nodes, the region's entry node, and its resumable
/// low-level search.
#[derive(Debug, Clone)]
pub struct HlNode {
    pub features: FeatureVector,
    /// The concrete state that first reached this abstract state; root of
    /// the region's low search.
    pub entry: NodeId,
    pub parent: Option<HlId>,
    pub children: Vec<HlId>,
    /// The low-level search is exhausted.
    pub expanded: bool,
    /// Rejected by the high-level novelty test; never searched.
    pub pruned: bool,
    /// Dropped while caching a subtree across a replanning step.
    pub removed: bool,
    /// None until admitted by the high-level planner.
    pub low: Option<LowSearch>,
}

/// Result of asking a high-level node for its next successor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HlStep {
    /// A new high-level node, materialized but not yet novelty-checked.
    Successor(HlId),
    /// The node's low-level search is exhausted; `expanded` is now set.
    Exhausted,
    Solved(NodeId),
    OutOfBudget,
}

/// A two-level hierarchical search over a shared concrete arena. The
/// structure is resumable: it persists across restructurings (incremental
/// search) and across replanning steps (subtree caching).
#[derive(Debug)]
pub struct TwoLevelSearch<S> {
    pub(crate) arena: SearchTree<S>,
    pub(crate) hl: Vec<HlNode>,
    hl_root: HlId,
    hl_table: Option<NoveltyTable>,
    hl_queue: VecDeque<HlId>,
    hl_counts: HashMap<FeatureVector, u64>,
    solved: Option<NodeId>,
    novel_low_total: usize,
    config: HierarchyConfig,
}

impl<S: Clone> TwoLevelSearch<S> {
    pub fn new<E, M, P>(
        env: &E,
        map: &M,
        split: &P,
        config: HierarchyConfig,
        root_state: S,
    ) -> Result<Self, HierarchyError>
    where
        E: DeterministicEnv<State = S>,
        M: FeatureMap<S>,
        P: LevelSplit<S>,
    {
        config.validate()?;
        let base = map.features(&root_state);
        let terminal = env.is_terminal(&root_state);
        let goal = env.is_goal(&root_state);
        let arena = SearchTree::new(root_state, base, terminal);
        let mut search = Self {
            arena,
            hl: Vec::new(),
            hl_root: HlId(0),
            hl_table: make_hl_table(split.high_schema(), config.high_width),
            hl_queue: VecDeque::new(),
            hl_counts: HashMap::new(),
            solved: None,
            novel_low_total: 0,
            config,
        };
        if goal {
            search.solved = Some(search.arena.root());
        }
        let root = search.materialize_hl(None, search.arena.root(), split);
        if let Some(table) = &mut search.hl_table {
            let _ = table
                .check_and_update(&search.hl[root.index()].features)
                .expect("root features conform");
        }
        search.seed_low(root, split);
        search.hl_queue.push_back(root);
        Ok(search)
    }

    pub fn arena(&self) -> &SearchTree<S> {
        &self.arena
    }

    pub fn hl_nodes(&self) -> &[HlNode] {
        &self.hl
    }

    pub fn hl_root(&self) -> HlId {
        self.hl_root
    }

    pub fn solved_node(&self) -> Option<NodeId> {
        self.solved
    }

    /// Novel states admitted across all low-level searches (their entry
    /// nodes included).
    pub fn novel_low_total(&self) -> usize {
        self.novel_low_total
    }

    /// Removes and returns the region visitation counts of the count-based
    /// high-level order. Keyed by region features, so they stay meaningful
    /// beyond this search's lifetime; see [`Self::seed_hl_counts`].
    pub fn take_hl_counts(&mut self) -> HashMap<FeatureVector, u64> {
        std::mem::take(&mut self.hl_counts)
    }

    /// Installs previously taken visitation counts, so count-based
    /// exploration keeps its memory across searches (e.g. across training
    /// episodes, where each episode starts a fresh search).
    pub fn seed_hl_counts(&mut self, counts: HashMap<FeatureVector, u64>) {
        self.hl_counts = counts;
    }

    /// Live (admitted, not pruned or removed) high-level nodes.
    pub fn hl_live_count(&self) -> usize {
        self.hl
            .iter()
            .filter(|h| !h.pruned && !h.removed)
            .count()
    }

    fn materialize_hl<P: LevelSplit<S>>(
        &mut self,
        parent: Option<HlId>,
        entry: NodeId,
        split: &P,
    ) -> HlId {
        let node = self.arena.get(entry);
        let features = split.high(&node.state, &node.features);
        let id = HlId(self.hl.len() as u32);
        self.hl.push(HlNode {
            features,
            entry,
            parent,
            children: Vec::new(),
            expanded: false,
            pruned: false,
            removed: false,
            low: None,
        });
        if let Some(p) = parent {
            self.hl[p.index()].children.push(id);
        }
        id
    }

    fn seed_low<P: LevelSplit<S>>(&mut self, id: HlId, split: &P) {
        let entry = self.hl[id.index()].entry;
        let node = self.arena.get(entry);
        let low_vec = split.low(&node.state, &node.features);
        let low = match self.config.low_kind {
            LowKind::BreadthFirst => {
                let mut bfs = BfsLow::new(self.config.low_width, split.low_schema().len());
                bfs.admit_root(&self.arena, entry, &low_vec);
                LowSearch::Bfs(bfs)
            }
            LowKind::Rollout { tau } => {
                debug_assert_eq!(
                    split.low_schema().len(),
                    self.arena.get(entry).features.len(),
                    "rollout low searches run over the base feature map"
                );
                let mut rollout = RolloutState::new(
                    self.config.low_width,
                    split.low_schema().len(),
                    tau,
                    entry,
                );
                rollout.attach_root(&mut self.arena);
                LowSearch::Rollout(rollout)
            }
        };
        self.hl[id.index()].low = Some(low);
        self.novel_low_total += 1;
    }

    /// Checks a materialized candidate against the high-level novelty
    /// table. Accepted nodes get a seeded low search; rejected ones are
    /// marked pruned together with their concrete entry.
    fn admit_hl<P: LevelSplit<S>>(&mut self, id: HlId, split: &P) -> bool {
        let novel = match &mut self.hl_table {
            None => true,
            Some(table) => {
                table
                    .check_and_update(&self.hl[id.index()].features)
                    .expect("candidate features conform")
                    .0
            }
        };
        if novel {
            self.seed_low(id, split);
        } else {
            self.hl[id.index()].pruned = true;
            let entry = self.hl[id.index()].entry;
            self.arena.get_mut(entry).pruned = true;
        }
        novel
    }

    /// One chunk of the node's low-level search: a bounded breadth-first
    /// stretch or a single rollout.
    #[allow(clippy::too_many_arguments)]
    fn resume_low<E, M, P>(
        &mut self,
        id: HlId,
        env: &E,
        map: &M,
        split: &P,
        budget: &mut SearchBudget,
        rng: &mut ChaCha8Rng,
        selector: &mut dyn ActionSelector<S>,
    ) -> LowOutcome
    where
        E: DeterministicEnv<State = S>,
        M: FeatureMap<S>,
        P: LevelSplit<S>,
    {
        let features = self.hl[id.index()].features.clone();
        let cap = self.config.low_resume_cap;
        match self.hl[id.index()]
            .low
            .as_mut()
            .expect("resumed nodes are admitted")
        {
            LowSearch::Bfs(bfs) => bfs.resume(
                &mut self.arena,
                env,
                map,
                split,
                &features,
                budget,
                cap,
                &mut self.novel_low_total,
            ),
            LowSearch::Rollout(rollout) => low::resume_rollout(
                rollout,
                &mut self.arena,
                env,
                map,
                split,
                &features,
                budget,
                selector,
                rng,
            ),
        }
    }

    /// Resumes the node's low search until it produces a high-level
    /// successor candidate (materialized, not yet novelty-checked),
    /// exhausts, solves, or runs out of budget.
    #[allow(clippy::too_many_arguments)]
    pub fn hl_successor<E, M, P>(
        &mut self,
        id: HlId,
        env: &E,
        map: &M,
        split: &P,
        budget: &mut SearchBudget,
        rng: &mut ChaCha8Rng,
        selector: &mut dyn ActionSelector<S>,
    ) -> HlStep
    where
        E: DeterministicEnv<State = S>,
        M: FeatureMap<S>,
        P: LevelSplit<S>,
    {
        loop {
            match self.resume_low(id, env, map, split, budget, rng, selector) {
                LowOutcome::Paused => continue,
                LowOutcome::Boundary(node) => {
                    let new = self.materialize_hl(Some(id), node, split);
                    return HlStep::Successor(new);
                }
                LowOutcome::Solved(node) => {
                    self.solved = Some(node);
                    return HlStep::Solved(node);
                }
                LowOutcome::Exhausted => {
                    self.hl[id.index()].expanded = true;
                    return HlStep::Exhausted;
                }
                LowOutcome::OutOfBudget => return HlStep::OutOfBudget,
            }
        }
    }

    /// Drives the high-level planner until solved, out of budget, or all
    /// high-level nodes are exhausted. Resumable: later calls continue
    /// where this one stopped.
    pub fn run<E, M, P>(
        &mut self,
        env: &E,
        map: &M,
        split: &P,
        budget: &mut SearchBudget,
        rng: &mut ChaCha8Rng,
        selector: &mut dyn ActionSelector<S>,
    ) -> SearchResult
    where
        E: DeterministicEnv<State = S>,
        M: FeatureMap<S>,
        P: LevelSplit<S>,
    {
        let started = Instant::now();
        if self.solved.is_none() {
            match self.config.high_order {
                HighOrder::BreadthFirst => {
                    self.run_breadth_first(env, map, split, budget, rng, selector)
                }
                HighOrder::CountBased { tau } => {
                    self.run_count_based(env, map, split, budget, rng, selector, tau)
                }
            }
        }
        self.result(budget, started.elapsed())
    }

    #[allow(clippy::too_many_arguments)]
    fn run_breadth_first<E, M, P>(
        &mut self,
        env: &E,
        map: &M,
        split: &P,
        budget: &mut SearchBudget,
        rng: &mut ChaCha8Rng,
        selector: &mut dyn ActionSelector<S>,
    ) where
        E: DeterministicEnv<State = S>,
        M: FeatureMap<S>,
        P: LevelSplit<S>,
    {
        'high: while let Some(id) = self.hl_queue.pop_front() {
            let node = &self.hl[id.index()];
            if node.pruned || node.removed || node.expanded {
                continue;
            }
            loop {
                match self.hl_successor(id, env, map, split, budget, rng, selector) {
                    HlStep::Successor(new) => {
                        if self.admit_hl(new, split) {
                            self.hl_queue.push_back(new);
                        }
                    }
                    HlStep::Exhausted => break,
                    HlStep::Solved(_) => break 'high,
                    HlStep::OutOfBudget => {
                        // keep the node schedulable for a later resume
                        self.hl_queue.push_front(id);
                        break 'high;
                    }
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn run_count_based<E, M, P>(
        &mut self,
        env: &E,
        map: &M,
        split: &P,
        budget: &mut SearchBudget,
        rng: &mut ChaCha8Rng,
        selector: &mut dyn ActionSelector<S>,
        tau: f64,
    ) where
        E: DeterministicEnv<State = S>,
        M: FeatureMap<S>,
        P: LevelSplit<S>,
    {
        loop {
            if budget.exhausted() {
                return;
            }
            let candidates: Vec<HlId> = (0..self.hl.len())
                .map(|i| HlId(i as u32))
                .filter(|&h| {
                    let node = &self.hl[h.index()];
                    !node.pruned && !node.removed && !node.expanded && node.low.is_some()
                })
                .collect();
            if candidates.is_empty() {
                return;
            }
            let exponents: Vec<f64> = candidates
                .iter()
                .map(|&h| {
                    let c = self
                        .hl_counts
                        .get(&self.hl[h.index()].features)
                        .copied()
                        .unwrap_or(0) as f64;
                    if tau.is_infinite() {
                        0.0
                    } else {
                        1.0 / (tau * (c + 1.0))
                    }
                })
                .collect();
            let picked = candidates[softmax_pick(&exponents, rng)];
            *self
                .hl_counts
                .entry(self.hl[picked.index()].features.clone())
                .or_insert(0) += 1;
            match self.resume_low(picked, env, map, split, budget, rng, selector) {
                LowOutcome::Boundary(node) => {
                    let new = self.materialize_hl(Some(picked), node, split);
                    self.admit_hl(new, split);
                }
                LowOutcome::Solved(node) => {
                    self.solved = Some(node);
                    return;
                }
                LowOutcome::Exhausted => {
                    self.hl[picked.index()].expanded = true;
                }
                LowOutcome::Paused => {}
                LowOutcome::OutOfBudget => return,
            }
        }
    }

    fn result(&self, budget: &SearchBudget, elapsed: std::time::Duration) -> SearchResult {
        let expanded_count = self
            .arena
            .iter_live()
            .filter(|&id| self.arena.get(id).untried.is_some())
            .count();
        SearchResult {
            solved: self.solved.is_some(),
            goal_node: self.solved,
            pruned_nodes: self.arena.pruned_ids(),
            expanded_count,
            generated_count: budget.used(),
            elapsed,
        }
    }

    /// The action sequence from the arena root to the goal, if solved.
    pub fn plan(&self) -> Option<Vec<usize>> {
        self.solved.map(|g| self.arena.plan_to(g))
    }

    /// Rebuilds the whole hierarchical layer over the current arena:
    /// partitions concrete nodes into connected regions of equal high-level
    /// features, replays region feature vectors into fresh novelty tables,
    /// and re-opens the unexpanded frontier. With `revive`, pruned concrete
    /// nodes that are novel under the rebuilt tables rejoin the search —
    /// the incremental-restructuring semantics. Without it, they stay
    /// pruned — the replanning semantics.
    pub fn rebuild<P: LevelSplit<S>>(&mut self, split: &P, revive: bool) {
        self.hl.clear();
        self.hl_queue.clear();
        // hl_counts survive: they are keyed by region features, not by the
        // region objects, so visitation statistics outlive restructuring
        self.solved = None;
        self.hl_table = make_hl_table(split.high_schema(), self.config.high_width);
        self.hl_root = HlId(0);

        let order = self.arena.bfs_order();
        // connected regions of equal high-level features
        let mut comp_of: HashMap<NodeId, HlId> = HashMap::new();
        let mut members: Vec<Vec<NodeId>> = Vec::new();
        for &id in &order {
            let node = self.arena.get(id);
            let high = split.high(&node.state, &node.features);
            let comp = match node.parent {
                Some(parent) => {
                    let parent_comp = comp_of[&parent];
                    if self.hl[parent_comp.index()].features == high {
                        members[parent_comp.index()].push(id);
                        comp_of.insert(id, parent_comp);
                        continue;
                    }
                    self.materialize_hl(Some(parent_comp), id, split)
                }
                None => self.materialize_hl(None, id, split),
            };
            debug_assert_eq!(comp.index(), members.len());
            members.push(vec![id]);
            comp_of.insert(id, comp);
        }

        for (i, comp_members) in members.iter().enumerate() {
            let id = HlId(i as u32);
            let novel = match &mut self.hl_table {
                None => true,
                Some(table) => {
                    table
                        .check_and_update(&self.hl[i].features)
                        .expect("features conform")
                        .0
                }
            };
            if !novel {
                self.hl[i].pruned = true;
                continue;
            }
            let entry = self.hl[i].entry;
            if entry == self.arena.root() {
                // the root region anchors the search at the agent's actual
                // state, even if that node had been pruned
                self.arena.get_mut(entry).pruned = false;
            } else if self.arena.get(entry).pruned && !revive {
                self.hl[i].pruned = true;
                continue;
            }
            let low = match self.config.low_kind {
                LowKind::BreadthFirst => LowSearch::Bfs(BfsLow::rebuilt_from(
                    self.config.low_width,
                    split.low_schema().len(),
                    &mut self.arena,
                    comp_members,
                    split,
                    revive,
                )),
                LowKind::Rollout { tau } => {
                    let mut rollout = RolloutState::new(
                        self.config.low_width,
                        split.low_schema().len(),
                        tau,
                        entry,
                    );
                    rollout.rebuild_from(&mut self.arena, entry, comp_members);
                    LowSearch::Rollout(rollout)
                }
            };
            let exhausted = low.exhausted();
            self.hl[i].low = Some(low);
            self.hl[i].expanded = exhausted;
            if !exhausted {
                self.hl_queue.push_back(id);
            }
        }
    }
}

fn make_hl_table(high_schema: &FeatureSchema, high_width: usize) -> Option<NoveltyTable> {
    if high_schema.is_empty() {
        return None;
    }
    // widths beyond the feature count degenerate to full-vector tuples
    let width = high_width.min(high_schema.len());
    Some(NoveltyTable::new(width, high_schema.len()).expect("clamped width is valid"))
}

/// Samples an index with probability proportional to exp(exponents[i]),
/// stable under large exponents.
pub(crate) fn softmax_pick(exponents: &[f64], rng: &mut ChaCha8Rng) -> usize {
    debug_assert!(!exponents.is_empty());
    let max = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = exponents.iter().map(|e| (e - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut draw = rng.gen_range(0.0..1.0) * total;
    for (i, w) in weights.iter().enumerate() {
        draw -= w;
        if draw <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// One-shot two-level search: HIW(w_h, w_l) and its count-based variants.
pub fn hiw_search<E, M, P>(
    env: &E,
    map: &M,
    split: &P,
    config: HierarchyConfig,
    budget: usize,
    seed: u64,
    root_state: E::State,
) -> Result<HiwRun<E::State>, HierarchyError>
where
    E: DeterministicEnv,
    M: FeatureMap<E::State>,
    P: LevelSplit<E::State>,
{
    let mut search = TwoLevelSearch::new(env, map, split, config, root_state)?;
    let mut budget = SearchBudget::new(budget);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selector = FixedOrder;
    let result = search.run(env, map, split, &mut budget, &mut rng, &mut selector);
    Ok(HiwRun { search, result })
}

/// A hierarchical search run: the persistent structure plus the outcome.
#[derive(Debug)]
pub struct HiwRun<S> {
    pub search: TwoLevelSearch<S>,
    pub result: SearchResult,
}

impl<S: Clone> HiwRun<S> {
    pub fn plan(&self) -> Option<Vec<usize>> {
        self.search.plan()
    }
}
