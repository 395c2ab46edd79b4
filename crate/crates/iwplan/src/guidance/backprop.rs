//! Return and count backups across a two-level search. Each region backs up
//! its own low-level tree; where a region's tree has a boundary leaf that
//! entered a child region, the child region's root value is injected as that
//! leaf's continuation, and its node total is rolled into the parent's
//! counts. Flattening the hierarchy and backing up the shared arena directly
//! gives identical results, which the tests verify against random trees.

use std::collections::{HashMap, VecDeque};

use crate::hierarchy::{HlId, HlNode};
use crate::novelty::FeatureVector;
use crate::search::{NodeId, SearchTree};

fn is_live(node: &HlNode) -> bool {
    !node.pruned && !node.removed
}

/// Region-wise greedy return backup and visit-count rollup over a two-level
/// search, producing the per-action returns and live-node counts at the
/// arena root. `leaf_value` estimates the future at non-terminal frontier
/// leaves (clamped below at zero); terminals are worth zero.
pub fn backprop_hierarchical<S: Clone, F>(
    arena: &SearchTree<S>,
    hl: &[HlNode],
    hl_root: HlId,
    gamma: f64,
    mut leaf_value: F,
    action_count: usize,
) -> (Vec<f64>, Vec<u64>)
where
    F: FnMut(&FeatureVector) -> f64,
{
    // boundary markers: the entry node of every live non-root region
    let mut entry_region: HashMap<NodeId, HlId> = HashMap::new();
    for (i, node) in hl.iter().enumerate() {
        let id = HlId(i as u32);
        if id != hl_root && is_live(node) {
            let previous = entry_region.insert(node.entry, id);
            debug_assert!(previous.is_none(), "regions have distinct entries");
        }
    }

    // regions ordered parents-first; iterating in reverse visits children
    // before the regions that must consume their injected values
    let mut order = Vec::new();
    let mut queue = VecDeque::from([hl_root]);
    while let Some(at) = queue.pop_front() {
        order.push(at);
        for &child in &hl[at.0 as usize].children {
            if is_live(&hl[child.0 as usize]) {
                queue.push_back(child);
            }
        }
    }

    let mut region_value: HashMap<HlId, f64> = HashMap::new();
    let mut region_total: HashMap<HlId, u64> = HashMap::new();
    let mut returns = vec![0.0; action_count];
    let mut counts = vec![0u64; action_count];

    for &region in order.iter().rev() {
        let entry = hl[region.0 as usize].entry;

        // the region's own arena nodes, breadth-first, stopping where a
        // child region begins
        let mut members = vec![entry];
        let mut next = 0;
        while next < members.len() {
            let id = members[next];
            next += 1;
            for &child in &arena.get(id).children {
                if arena.get(child).removed || entry_region.contains_key(&child) {
                    continue;
                }
                members.push(child);
            }
        }

        // bottom-up values; a child that opens another region contributes
        // that region's already-computed root value
        let mut value: HashMap<NodeId, f64> = HashMap::with_capacity(members.len());
        for &id in members.iter().rev() {
            let node = arena.get(id);
            let v = if node.terminal {
                0.0
            } else {
                let mut best: Option<f64> = None;
                for &child in &node.children {
                    let child_node = arena.get(child);
                    if child_node.removed {
                        continue;
                    }
                    let continuation = match entry_region.get(&child) {
                        Some(child_region) => region_value[child_region],
                        None => value[&child],
                    };
                    let backup = child_node.reward_on_entry + gamma * continuation;
                    best = Some(best.map_or(backup, |b: f64| b.max(backup)));
                }
                match best {
                    Some(b) => b,
                    None => leaf_value(&node.features).max(0.0),
                }
            };
            value.insert(id, v);
        }

        let mut total = members.len() as u64;
        for &child in &hl[region.0 as usize].children {
            if is_live(&hl[child.0 as usize]) {
                total += region_total[&child];
            }
        }
        region_value.insert(region, value[&entry]);
        region_total.insert(region, total);

        if region == hl_root {
            debug_assert_eq!(entry, arena.root(), "the root region starts at the arena root");
            for &child in &arena.get(entry).children {
                let child_node = arena.get(child);
                if child_node.removed {
                    continue;
                }
                let action = child_node.action.expect("non-root nodes record an action");
                let continuation = match entry_region.get(&child) {
                    Some(child_region) => region_value[child_region],
                    None => value[&child],
                };
                returns[action] = child_node.reward_on_entry + gamma * continuation;
                counts[action] += rollup_count(arena, &entry_region, &region_total, child);
            }
        }
    }

    (returns, counts)
}

/// Live nodes under `start` in the current region plus the full totals of
/// every region opened below it.
fn rollup_count<S: Clone>(
    arena: &SearchTree<S>,
    entry_region: &HashMap<NodeId, HlId>,
    region_total: &HashMap<HlId, u64>,
    start: NodeId,
) -> u64 {
    let mut total = 0;
    let mut stack = vec![start];
    while let Some(id) = stack.pop() {
        if let Some(region) = entry_region.get(&id) {
            total += region_total[region];
            continue;
        }
        total += 1;
        for &child in &arena.get(id).children {
            if !arena.get(child).removed {
                stack.push(child);
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guidance::{backup_rewards, pi_rewards, root_action_counts};
    use crate::hierarchy::{hiw_search, HierarchyConfig, ProjectionSplit};
    use crate::simulator::{CorridorEnv, CorridorFeatures, DeterministicEnv, FeatureMap, CORRIDOR_RIGHT};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn estimate(features: &FeatureVector) -> f64 {
        (features.0[0] as f64 * 0.37).sin()
    }

    /// Builds a random arena with a random region structure layered on top:
    /// each non-root node becomes the entry of a fresh region with
    /// probability 1/4, plus a few rejected (pruned) candidates that the
    /// backup must ignore.
    fn random_two_level(seed: u64) -> (SearchTree<u32>, Vec<HlNode>, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actions = rng.gen_range(2..=4usize);
        let mut tree = SearchTree::new(0u32, FeatureVector(vec![0]), false);
        let root = tree.root();
        let mut hl = vec![HlNode {
            features: FeatureVector(vec![0]),
            entry: root,
            parent: None,
            children: Vec::new(),
            expanded: true,
            pruned: false,
            removed: false,
            low: None,
        }];
        let mut region_of: HashMap<NodeId, u32> = HashMap::from([(root, 0)]);
        let mut open = Vec::new();
        let mut next_state = 1u32;

        // root children get distinct actions so per-action results are
        // well defined
        for action in 0..actions {
            if action > 0 && rng.gen_bool(0.3) {
                continue;
            }
            let reward = rng.gen_range(-1.0..1.0);
            let child = tree.add_child(
                root,
                action,
                next_state,
                FeatureVector(vec![next_state]),
                reward,
                rng.gen_bool(0.15),
            );
            next_state += 1;
            open.push(child);
        }
        let extra = rng.gen_range(0..60usize);
        for _ in 0..extra {
            if open.is_empty() {
                break;
            }
            let parent = open[rng.gen_range(0..open.len())];
            if tree.get(parent).terminal {
                continue;
            }
            let action = rng.gen_range(0..actions);
            let reward = rng.gen_range(-1.0..1.0);
            let child = tree.add_child(
                parent,
                action,
                next_state,
                FeatureVector(vec![next_state]),
                reward,
                rng.gen_bool(0.15),
            );
            next_state += 1;
            open.push(child);
        }

        // layer regions over the finished arena, parents before children
        for id in tree.bfs_order() {
            if id == root {
                continue;
            }
            let parent_region = region_of[&tree.get(id).parent.expect("non-root")];
            if rng.gen_bool(0.25) {
                let region = hl.len() as u32;
                hl.push(HlNode {
                    features: FeatureVector(vec![region]),
                    entry: id,
                    parent: Some(HlId(parent_region)),
                    children: Vec::new(),
                    expanded: rng.gen_bool(0.5),
                    pruned: false,
                    removed: false,
                    low: None,
                });
                hl[parent_region as usize].children.push(HlId(region));
                region_of.insert(id, region);
            } else {
                region_of.insert(id, parent_region);
                if rng.gen_bool(0.1) {
                    // a rejected candidate: pruned, never searched
                    let region = hl.len() as u32;
                    hl.push(HlNode {
                        features: FeatureVector(vec![region]),
                        entry: id,
                        parent: Some(HlId(parent_region)),
                        children: Vec::new(),
                        expanded: false,
                        pruned: true,
                        removed: false,
                        low: None,
                    });
                    hl[parent_region as usize].children.push(HlId(region));
                }
            }
        }
        (tree, hl, actions)
    }

    #[test]
    fn hierarchical_backup_matches_the_flattened_tree() {
        for seed in 0..100 {
            let (tree, hl, actions) = random_two_level(seed);
            let (returns, counts) =
                backprop_hierarchical(&tree, &hl, HlId(0), 0.97, estimate, actions);
            let flat_returns = backup_rewards(&tree, 0.97, estimate, actions);
            let flat_counts = root_action_counts(&tree, actions);
            for (h, f) in returns.iter().zip(&flat_returns) {
                assert!((h - f).abs() < 1e-9, "seed {seed}: {returns:?} vs {flat_returns:?}");
            }
            assert_eq!(counts, flat_counts, "seed {seed}");
        }
    }

    #[test]
    fn corridor_backup_points_at_the_goal() {
        let length = 3;
        let env = CorridorEnv::goal_task(length);
        let map = CorridorFeatures::new(&CorridorEnv::new(length));
        let split = ProjectionSplit::new(map.schema(), &[1]).unwrap();
        let run = hiw_search(
            &env,
            &map,
            &split,
            HierarchyConfig::breadth_first(1, 1),
            10_000,
            0,
            env.initial_state(),
        )
        .unwrap();
        assert!(run.result.solved);
        let search = &run.search;
        let (returns, counts) = backprop_hierarchical(
            search.arena(),
            search.hl_nodes(),
            search.hl_root(),
            0.99,
            |_| 0.0,
            2,
        );
        // goal reward arrives on the sixth step of the best branch
        assert!((returns[CORRIDOR_RIGHT] - 0.99f64.powi(5)).abs() < 1e-12);
        assert_eq!(returns[1 - CORRIDOR_RIGHT], 0.0);
        assert_eq!(pi_rewards(&returns, 1e-4).argmax(), CORRIDOR_RIGHT);
        // every live node except the root is counted exactly once
        assert_eq!(
            counts.iter().sum::<u64>() as usize,
            search.arena().live_count() - 1
        );
        let flat = backup_rewards(search.arena(), 0.99, |_| 0.0, 2);
        assert_eq!(returns, flat);
        assert_eq!(counts, root_action_counts(search.arena(), 2));
    }
}
