//! Breadth-first IW(w): plain breadth-first search that prunes generated
//! states contributing no unseen width-w feature tuple. The novelty check is
//! pluggable so restricted variants (e.g. mixed high/low tuple checks) can
//! run through the same loop.

use std::collections::{HashSet, VecDeque};
use std::time::Instant;

use crate::novelty::{enumerate_tuples, FeatureTuple, FeatureVector, NoveltyTable};
use crate::simulator::{DeterministicEnv, FeatureMap};

use super::tree::SearchTree;
use super::{SearchBudget, SearchResult, SearchRun};

/// Novelty decision used by the breadth-first loop. Implementations record
/// every checked vector's tuples (novel or not).
pub trait NoveltyCheck {
    fn check(&mut self, fv: &FeatureVector) -> bool;
}

/// The standard width-w table over all features.
pub struct StandardNovelty(pub NoveltyTable);

impl NoveltyCheck for StandardNovelty {
    fn check(&mut self, fv: &FeatureVector) -> bool {
        self.0
            .check_and_update(fv)
            .expect("feature vectors conform to the schema")
            .0
    }
}

/// Restricted novelty over mixed tuples only: every tracked tuple combines
/// exactly `w_h` features from the `high` index set and `w_l` features from
/// the `low` index set.
pub struct MixedNovelty {
    high: Vec<usize>,
    low: Vec<usize>,
    w_h: usize,
    w_l: usize,
    seen: HashSet<FeatureTuple>,
}

impl MixedNovelty {
    pub fn new(high: Vec<usize>, low: Vec<usize>, w_h: usize, w_l: usize) -> Self {
        assert!(w_h >= 1 && w_h <= high.len(), "w_h out of range");
        assert!(w_l >= 1 && w_l <= low.len(), "w_l out of range");
        Self {
            high,
            low,
            w_h,
            w_l,
            seen: HashSet::new(),
        }
    }

    fn mixed_tuples(&self, fv: &FeatureVector) -> Vec<FeatureTuple> {
        let project = |indices: &[usize]| {
            FeatureVector(indices.iter().map(|&i| fv.0[i]).collect::<Vec<_>>())
        };
        let high_fv = project(&self.high);
        let low_fv = project(&self.low);
        let mut out = Vec::new();
        for ht in enumerate_tuples(&high_fv, self.w_h).expect("validated width") {
            for lt in enumerate_tuples(&low_fv, self.w_l).expect("validated width") {
                // re-index back into the full feature space and sort so the
                // tuple is index-increasing regardless of set interleaving
                let mut tuple: FeatureTuple = ht
                    .iter()
                    .map(|&(i, v)| (self.high[i as usize] as u16, v))
                    .chain(lt.iter().map(|&(i, v)| (self.low[i as usize] as u16, v)))
                    .collect();
                tuple.sort_unstable();
                out.push(tuple);
            }
        }
        out
    }
}

impl NoveltyCheck for MixedNovelty {
    fn check(&mut self, fv: &FeatureVector) -> bool {
        let mut novel = false;
        for tuple in self.mixed_tuples(fv) {
            novel |= self.seen.insert(tuple);
        }
        novel
    }
}

/// Breadth-first IW(w) from `root_state` with a generation budget.
pub fn iw_search<E, M>(
    env: &E,
    map: &M,
    width: usize,
    budget: usize,
    root_state: E::State,
) -> SearchRun<E::State>
where
    E: DeterministicEnv,
    M: FeatureMap<E::State>,
{
    let table = NoveltyTable::new(width, map.schema().len())
        .expect("width must be within the feature count");
    let mut checker = StandardNovelty(table);
    iw_search_with(env, map, &mut checker, budget, root_state)
}

/// Breadth-first IW with a custom novelty check.
pub fn iw_search_with<E, M, C>(
    env: &E,
    map: &M,
    checker: &mut C,
    budget: usize,
    root_state: E::State,
) -> SearchRun<E::State>
where
    E: DeterministicEnv,
    M: FeatureMap<E::State>,
    C: NoveltyCheck,
{
    let started = Instant::now();
    let mut budget = SearchBudget::new(budget);
    let root_features = map.features(&root_state);
    let root_terminal = env.is_terminal(&root_state);
    let root_goal = env.is_goal(&root_state);
    let mut tree = SearchTree::new(root_state, root_features, root_terminal);
    let root = tree.root();
    checker.check(&tree.get(root).features);

    let mut solved = root_goal;
    let mut goal_node = if root_goal { Some(root) } else { None };
    let mut expanded_count = 0usize;
    let mut queue = VecDeque::new();
    if !root_terminal && !solved {
        queue.push_back(root);
    }

    'search: while let Some(id) = queue.pop_front() {
        if budget.exhausted() {
            break;
        }
        expanded_count += 1;
        tree.get_mut(id).expanded = true;
        let state = tree.get(id).state.clone();
        for action in 0..env.action_count() {
            let Some(transition) = env.step(&state, action) else {
                continue;
            };
            if !budget.take() {
                break 'search;
            }
            let terminal = env.is_terminal(&transition.state);
            let goal = env.is_goal(&transition.state);
            let features = map.features(&transition.state);
            let child = tree.add_child(id, action, transition.state, features, transition.reward, terminal);
            if goal {
                solved = true;
                goal_node = Some(child);
                break 'search;
            }
            let novel = checker.check(&tree.get(child).features);
            if !novel {
                tree.get_mut(child).pruned = true;
            } else if !terminal {
                queue.push_back(child);
            }
        }
    }

    let result = SearchResult {
        solved,
        goal_node,
        pruned_nodes: tree.pruned_ids(),
        expanded_count,
        generated_count: budget.used(),
        elapsed: started.elapsed(),
    };
    SearchRun { tree, result }
}
