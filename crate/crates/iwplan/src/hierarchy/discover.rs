//! Discovery of abstraction candidates from pruned branches and the
//! incremental driver that alternates hierarchical search with tree
//! restructuring on a promoted feature.

use std::collections::{BTreeSet, HashSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::novelty::FeatureSchema;
use crate::search::{FixedOrder, NodeId, SearchBudget, SearchResult, SearchTree};
use crate::simulator::{DeterministicEnv, FeatureMap};

use super::{HierarchyConfig, HierarchyError, ProjectionSplit, TwoLevelSearch};

/// Atoms of a pruned leaf that could explain the pruning: the values the
/// leaf shares with its parent but with no interior node of its branch.
/// Returns the empty set for nodes that are not pruned childless leaves
/// deeper than 2, or whose atoms all match the parent's.
pub fn find_abstract_features<S: Clone>(
    tree: &SearchTree<S>,
    node: NodeId,
) -> BTreeSet<(u16, u32)> {
    let n = tree.get(node);
    if !n.pruned || n.removed || !n.children.is_empty() || n.depth <= 2 {
        return BTreeSet::new();
    }
    let parent = n.parent.expect("depth > 2 implies a parent");
    let parent_values = tree.get(parent).features.values();
    let persistent: BTreeSet<(u16, u32)> = n
        .features
        .atoms()
        .filter(|&(i, v)| parent_values[i as usize] == v)
        .collect();
    if persistent.len() == n.features.values().len() {
        // the leaf repeats its parent exactly; nothing discriminates it
        return BTreeSet::new();
    }
    // collect atoms of the branch interior: everything strictly between the
    // root (exclusive) and the parent (exclusive)
    let mut interior: BTreeSet<(u16, u32)> = BTreeSet::new();
    let mut cursor = tree.get(parent).parent;
    while let Some(id) = cursor {
        let ancestor = tree.get(id);
        if ancestor.parent.is_none() {
            break;
        }
        interior.extend(ancestor.features.atoms());
        cursor = ancestor.parent;
    }
    persistent.difference(&interior).copied().collect()
}

/// The sampling pool driving incremental discovery: pruned nodes waiting to
/// be examined and the candidate atoms extracted so far. Nodes enter the
/// pool once; popped nodes never return.
#[derive(Debug, Default)]
pub struct CandidateFeatureSet {
    candidates: BTreeSet<(u16, u32)>,
    pending: Vec<NodeId>,
    ever_pooled: HashSet<NodeId>,
}

impl CandidateFeatureSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn candidates(&self) -> &BTreeSet<(u16, u32)> {
        &self.candidates
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Adds a pruned node unless it was ever pooled before.
    pub fn push_pruned(&mut self, id: NodeId) {
        if self.ever_pooled.insert(id) {
            self.pending.push(id);
        }
    }

    pub fn insert_candidate(&mut self, atom: (u16, u32)) {
        self.candidates.insert(atom);
    }

    /// Removes and returns a uniformly random pending node.
    pub fn pop_pruned(&mut self, rng: &mut ChaCha8Rng) -> Option<NodeId> {
        if self.pending.is_empty() {
            return None;
        }
        let i = rng.gen_range(0..self.pending.len());
        Some(self.pending.swap_remove(i))
    }

    /// Removes and returns a uniformly random candidate atom.
    pub fn pop_candidate(&mut self, rng: &mut ChaCha8Rng) -> Option<(u16, u32)> {
        if self.candidates.is_empty() {
            return None;
        }
        let i = rng.gen_range(0..self.candidates.len());
        let atom = *self.candidates.iter().nth(i).expect("index in range");
        self.candidates.remove(&atom);
        Some(atom)
    }

    /// Drops candidates whose feature is already at the high level.
    pub fn retain_unpromoted(&mut self, high: &[u16]) {
        self.candidates.retain(|a| !high.contains(&a.0));
    }
}

/// Promotes `atom`'s feature to the high level and rebuilds the
/// hierarchical layer over the existing arena: concrete nodes are
/// repartitioned into regions of equal high-level features, novelty tables
/// are rebuilt from the surviving nodes, and pruned nodes that are novel
/// under the new partition rejoin the search. Existing node data, parent
/// links, and depths are untouched.
pub fn restructure_tree<S: Clone>(
    search: &mut TwoLevelSearch<S>,
    base: &FeatureSchema,
    high: &[u16],
    atom: (u16, u32),
) -> Result<ProjectionSplit, HierarchyError> {
    let (feature, value) = atom;
    let observed = search.arena.iter_live().any(|id| {
        search.arena.get(id).features.values()[feature as usize] == value
    });
    if !observed {
        return Err(HierarchyError::CandidateNotObserved { feature, value });
    }
    let mut promoted: Vec<u16> = high.to_vec();
    promoted.push(feature);
    let split = ProjectionSplit::new(base, &promoted)?;
    search.rebuild(&split, true);
    Ok(split)
}

#[derive(Debug, Clone)]
pub struct IhiwConfig {
    pub high_width: usize,
    pub low_width: usize,
    /// Total generation budget shared by every iteration.
    pub budget: usize,
    pub seed: u64,
}

/// An incremental run: the final search structure, the last iteration's
/// outcome, and what was promoted along the way.
#[derive(Debug)]
pub struct IhiwRun<S> {
    pub search: TwoLevelSearch<S>,
    pub result: SearchResult,
    /// Outer iterations executed (searches run, including the last).
    pub iterations: usize,
    /// Promoted atoms in promotion order.
    pub promoted: Vec<(u16, u32)>,
    /// High-level feature indices after all promotions.
    pub high: Vec<u16>,
}

impl<S: Clone> IhiwRun<S> {
    pub fn plan(&self) -> Option<Vec<usize>> {
        self.search.plan()
    }
}

/// Incremental hierarchical search: starts flat, and whenever the search
/// exhausts unsolved, samples pruned leaves for candidate atoms, promotes
/// one, restructures, and resumes — until solved, out of budget, or out of
/// pruned nodes to sample.
pub fn ihiw<E, M>(env: &E, map: &M, cfg: IhiwConfig) -> Result<IhiwRun<E::State>, HierarchyError>
where
    E: DeterministicEnv,
    M: FeatureMap<E::State>,
{
    let base = map.schema().clone();
    let mut high: Vec<u16> = Vec::new();
    let mut split = ProjectionSplit::new(&base, &high)?;
    let config = HierarchyConfig::breadth_first(cfg.high_width, cfg.low_width);
    let mut search = TwoLevelSearch::new(env, map, &split, config, env.initial_state())?;
    let mut budget = SearchBudget::new(cfg.budget);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut selector = FixedOrder;
    let mut pool = CandidateFeatureSet::new();
    let mut promoted: Vec<(u16, u32)> = Vec::new();
    let mut iterations = 0usize;

    let result = loop {
        iterations += 1;
        let result = search.run(env, map, &split, &mut budget, &mut rng, &mut selector);
        if result.solved || budget.exhausted() {
            break result;
        }
        for &id in &result.pruned_nodes {
            pool.push_pruned(id);
        }
        // a promotion that would empty the low level degenerates the
        // hierarchy, so stop once a single low feature remains
        if high.len() + 1 >= base.len() {
            break result;
        }
        pool.retain_unpromoted(&high);
        let mut exhausted_pool = false;
        while pool.candidates().is_empty() {
            let Some(node) = pool.pop_pruned(&mut rng) else {
                exhausted_pool = true;
                break;
            };
            for atom in find_abstract_features(search.arena(), node) {
                if !high.contains(&atom.0) {
                    pool.insert_candidate(atom);
                }
            }
        }
        if exhausted_pool {
            break result;
        }
        let atom = pool.pop_candidate(&mut rng).expect("candidates nonempty");
        split = restructure_tree(&mut search, &base, &high, atom)?;
        high.push(atom.0);
        promoted.push(atom);
    };

    Ok(IhiwRun {
        search,
        result,
        iterations,
        promoted,
        high,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::iw_search;
    use crate::simulator::{CorridorEnv, CorridorFeatures, CorridorState, GoalTaskWrapper};
    use crate::strips::{parse_task, StripsEnv, StripsFeatures};

    type CorridorTask = GoalTaskWrapper<CorridorEnv, fn(&CorridorState) -> bool>;

    fn corridor(length: u32) -> (CorridorTask, CorridorFeatures) {
        let map = CorridorFeatures::new(&CorridorEnv::new(length));
        (CorridorEnv::goal_task(length), map)
    }

    fn find_node(
        tree: &SearchTree<CorridorState>,
        p: u32,
        k: bool,
        depth: u32,
    ) -> NodeId {
        tree.iter_live()
            .find(|&id| {
                let n = tree.get(id);
                n.state == CorridorState { p, k } && n.depth == depth
            })
            .expect("node present in the tree")
    }

    fn failed_width_one_tree(length: u32) -> SearchTree<CorridorState> {
        let (env, map) = corridor(length);
        let run = iw_search(&env, &map, 1, 10_000, env.initial_state());
        assert!(!run.result.solved);
        run.tree
    }

    #[test]
    fn pruned_leaf_keeps_the_atom_shared_with_its_parent() {
        let tree = failed_width_one_tree(3);
        // (p=2, k=1) was pruned under (p=3, k=1): only the key atom persists
        let leaf = find_node(&tree, 2, true, 4);
        let atoms = find_abstract_features(&tree, leaf);
        assert_eq!(atoms.into_iter().collect::<Vec<_>>(), vec![(1, 1)]);
    }

    #[test]
    fn shallow_leaves_yield_no_candidates() {
        let tree = failed_width_one_tree(3);
        for depth in [1, 2] {
            let leaf = find_node(&tree, 0, false, depth);
            assert!(find_abstract_features(&tree, leaf).is_empty(), "depth {depth}");
        }
    }

    #[test]
    fn leaf_identical_to_its_parent_yields_nothing() {
        let tree = failed_width_one_tree(3);
        // (p=3, k=1) pruned under (p=3, k=1): every atom persists
        let leaf = find_node(&tree, 3, true, 4);
        assert!(find_abstract_features(&tree, leaf).is_empty());
    }

    #[test]
    fn atoms_already_on_the_branch_are_filtered_out() {
        let tree = failed_width_one_tree(3);
        // (p=1, k=0) pruned under (p=2, k=0): the shared k=0 atom appears on
        // every interior branch node
        let leaf = find_node(&tree, 1, false, 3);
        assert!(find_abstract_features(&tree, leaf).is_empty());
    }

    #[test]
    fn unpruned_nodes_yield_no_candidates() {
        let tree = failed_width_one_tree(3);
        assert!(find_abstract_features(&tree, tree.root()).is_empty());
        let interior = find_node(&tree, 3, true, 3);
        assert!(!tree.get(interior).pruned);
        assert!(find_abstract_features(&tree, interior).is_empty());
    }

    #[test]
    fn restructure_splits_the_corridor_tree_on_the_key() {
        let (env, map) = corridor(3);
        let base = map.schema().clone();
        let split = ProjectionSplit::new(&base, &[]).unwrap();
        let config = HierarchyConfig::breadth_first(1, 1);
        let mut search =
            TwoLevelSearch::new(&env, &map, &split, config, env.initial_state()).unwrap();
        let mut budget = SearchBudget::new(10_000);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut selector = FixedOrder;
        let flat = search.run(&env, &map, &split, &mut budget, &mut rng, &mut selector);
        assert!(!flat.solved);

        let split = restructure_tree(&mut search, &base, &[], (1, 1)).unwrap();
        assert_eq!(search.hl_live_count(), 2);
        let mut features: Vec<Vec<u32>> = search
            .hl_nodes()
            .iter()
            .filter(|h| !h.pruned && !h.removed)
            .map(|h| h.features.values().to_vec())
            .collect();
        features.sort();
        assert_eq!(features, vec![vec![0], vec![1]]);

        // the key region is resumable and finishes the task optimally
        let resumed = search.run(&env, &map, &split, &mut budget, &mut rng, &mut selector);
        assert!(resumed.solved);
        assert_eq!(search.plan().unwrap().len(), 6);
    }

    #[test]
    fn restructuring_twice_is_idempotent() {
        let (env, map) = corridor(3);
        let base = map.schema().clone();
        let split = ProjectionSplit::new(&base, &[]).unwrap();
        let config = HierarchyConfig::breadth_first(1, 1);
        let mut search =
            TwoLevelSearch::new(&env, &map, &split, config, env.initial_state()).unwrap();
        let mut budget = SearchBudget::new(10_000);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut selector = FixedOrder;
        search.run(&env, &map, &split, &mut budget, &mut rng, &mut selector);

        let snapshot = |search: &TwoLevelSearch<CorridorState>| {
            let mut regions: Vec<(Vec<u32>, NodeId)> = search
                .hl_nodes()
                .iter()
                .filter(|h| !h.pruned && !h.removed)
                .map(|h| (h.features.values().to_vec(), h.entry))
                .collect();
            regions.sort();
            regions
        };
        let split = restructure_tree(&mut search, &base, &[], (1, 1)).unwrap();
        let first = snapshot(&search);
        search.rebuild(&split, true);
        assert_eq!(snapshot(&search), first);
    }

    #[test]
    fn constant_feature_wraps_the_tree_in_one_region() {
        // with the key held from the start, k is constant across the tree
        let env = CorridorEnv::new(3);
        let map = CorridorFeatures::new(&env);
        let base = map.schema().clone();
        let split = ProjectionSplit::new(&base, &[]).unwrap();
        let config = HierarchyConfig::breadth_first(1, 1);
        let mut search = TwoLevelSearch::new(
            &env,
            &map,
            &split,
            config,
            CorridorState { p: 0, k: true },
        )
        .unwrap();
        let mut budget = SearchBudget::new(10_000);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut selector = FixedOrder;
        search.run(&env, &map, &split, &mut budget, &mut rng, &mut selector);

        restructure_tree(&mut search, &base, &[], (1, 1)).unwrap();
        assert_eq!(search.hl_live_count(), 1);
        let region = &search.hl_nodes()[search.hl_root().index()];
        assert_eq!(region.entry, search.arena().root());
    }

    #[test]
    fn unobserved_atoms_cannot_be_promoted() {
        let (env, map) = corridor(3);
        let base = map.schema().clone();
        let split = ProjectionSplit::new(&base, &[]).unwrap();
        let config = HierarchyConfig::breadth_first(1, 1);
        let mut search =
            TwoLevelSearch::new(&env, &map, &split, config, env.initial_state()).unwrap();
        assert_eq!(
            restructure_tree(&mut search, &base, &[], (1, 7)).unwrap_err(),
            HierarchyError::CandidateNotObserved {
                feature: 1,
                value: 7
            }
        );
    }

    #[test]
    fn incremental_search_promotes_the_key_and_solves() {
        for length in [2u32, 3, 5] {
            for seed in 0..5u64 {
                let (env, map) = corridor(length);
                let cfg = IhiwConfig {
                    high_width: 1,
                    low_width: 1,
                    budget: 10_000,
                    seed,
                };
                let run = ihiw(&env, &map, cfg).unwrap();
                assert!(run.result.solved, "length {length} seed {seed}");
                assert_eq!(run.iterations, 2, "length {length} seed {seed}");
                assert_eq!(run.promoted, vec![(1, 1)]);
                assert_eq!(run.high, vec![1]);
                assert_eq!(run.plan().unwrap().len() as u32, 2 * length);
            }
        }
    }

    #[test]
    fn width_one_task_solves_without_restructuring() {
        let (env, map) = corridor(1);
        let cfg = IhiwConfig {
            high_width: 1,
            low_width: 1,
            budget: 10_000,
            seed: 0,
        };
        let run = ihiw(&env, &map, cfg).unwrap();
        assert!(run.result.solved);
        assert_eq!(run.iterations, 1);
        assert!(run.promoted.is_empty());
    }

    #[test]
    fn unsolvable_task_terminates_when_the_pool_empties() {
        // no action chain ever reaches atom c, and no pruned leaf is deep
        // enough to offer candidates
        let task = parse_task(
            "atoms: a b c\naction: flip pre: add: b del:\ninit: a\ngoal: c",
        )
        .unwrap();
        let map = StripsFeatures::new(&task);
        let env = StripsEnv::goal_task(task);
        let cfg = IhiwConfig {
            high_width: 1,
            low_width: 1,
            budget: 10_000,
            seed: 3,
        };
        let run = ihiw(&env, &map, cfg).unwrap();
        assert!(!run.result.solved);
        assert_eq!(run.iterations, 1);
        assert!(run.promoted.is_empty());
    }

    #[test]
    fn exhausted_promotions_stop_the_search() {
        // two-feature task where the only promotion is spent and the goal
        // stays unreachable: the driver stops rather than emptying the low level
        let unreachable: fn(&CorridorState) -> bool = |s| s.p == 99;
        let env = GoalTaskWrapper::new(CorridorEnv::new(2), unreachable);
        let map = CorridorFeatures::new(&CorridorEnv::new(2));
        let cfg = IhiwConfig {
            high_width: 1,
            low_width: 1,
            budget: 10_000,
            seed: 0,
        };
        let run = ihiw(&env, &map, cfg).unwrap();
        assert!(!run.result.solved);
        assert_eq!(run.iterations, 2);
        assert_eq!(run.promoted, vec![(1, 1)]);
    }

    #[test]
    fn popped_nodes_never_reenter_the_pool() {
        let mut pool = CandidateFeatureSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        pool.push_pruned(NodeId(4));
        pool.push_pruned(NodeId(4));
        assert_eq!(pool.pending_len(), 1);
        assert_eq!(pool.pop_pruned(&mut rng), Some(NodeId(4)));
        pool.push_pruned(NodeId(4));
        assert_eq!(pool.pending_len(), 0);
        assert_eq!(pool.pop_pruned(&mut rng), None);
    }
}
