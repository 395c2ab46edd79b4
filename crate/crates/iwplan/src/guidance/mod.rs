//! Policy-guided planning: reward and visit-count distributions over the
//! root actions, their tie-breaking product, greedy return backups with
//! estimator values at the frontier, and replanning agents that cache the
//! chosen subtree between steps and learn from Monte-Carlo episode targets.

mod backprop;
mod estimator;
mod replan;

pub use backprop::backprop_hierarchical;
pub use estimator::{EstimatorLoss, PolicyEstimator, PolicySelector, TabularEstimator};
pub use replan::{
    enforce_node_cap, mc_returns, run_training_episode, EpisodeSummary, FlatReplanner,
    HierReplanner, ReplanConfig, Replanner, StepInfo, StepRecord,
};

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::novelty::FeatureVector;
use crate::search::{NodeId, SearchTree};

/// A probability distribution over the actions of an environment. Always
/// normalized: the entries are non-negative and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    probs: Vec<f64>,
}

impl ActionDistribution {
    /// The uniform distribution over `actions` actions.
    pub fn uniform(actions: usize) -> Self {
        assert!(actions > 0, "a distribution needs at least one action");
        ActionDistribution {
            probs: vec![1.0 / actions as f64; actions],
        }
    }

    /// Normalizes non-negative weights into a distribution. Panics when the
    /// weights are empty, negative, non-finite, or sum to zero.
    pub fn from_weights(weights: &[f64]) -> Self {
        assert!(!weights.is_empty(), "a distribution needs at least one action");
        let mut total = 0.0;
        for &w in weights {
            assert!(w.is_finite() && w >= 0.0, "weights must be finite and non-negative");
            total += w;
        }
        assert!(total > 0.0, "weights must not all be zero");
        ActionDistribution {
            probs: weights.iter().map(|w| w / total).collect(),
        }
    }

    /// The probability assigned to each action.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Number of actions the distribution covers.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    /// Whether the distribution covers no actions (never true at rest).
    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Samples an action index.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let draw: f64 = rng.gen::<f64>();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if draw < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }

    /// The lowest-indexed action of maximal probability.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Softmax over the given exponents, stabilized by subtracting the maximum.
fn softmax_of(exponents: &[f64]) -> ActionDistribution {
    let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = exponents.iter().map(|e| (e - max).exp()).collect();
    ActionDistribution::from_weights(&weights)
}

/// Count-based exploration distribution: softmax of `exp(1 / (tau * c + 1))`
/// over the per-action visit counts. Low counts get more mass; `tau -> 0`
/// approaches uniform (all exponents go to 1), and `tau = INFINITY` is exactly
/// uniform over the actions with positive counts and slightly favors the
/// untried ones.
pub fn pi_counts(counts: &[u64], tau: f64) -> ActionDistribution {
    let exponents: Vec<f64> = counts
        .iter()
        .map(|&c| {
            if tau.is_infinite() {
                if c == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                1.0 / (tau * c as f64 + 1.0)
            }
        })
        .collect();
    softmax_of(&exponents)
}

/// Reward-greedy distribution: softmax of the backed-up returns at
/// temperature `tau`. The default temperature (`1e-4`) makes this nearly
/// deterministic on the best action while remaining differentiable-in-spirit
/// as a training target.
pub fn pi_rewards(returns: &[f64], tau: f64) -> ActionDistribution {
    debug_assert!(tau > 0.0, "pi_rewards needs a positive temperature");
    let exponents: Vec<f64> = returns.iter().map(|r| r / tau).collect();
    softmax_of(&exponents)
}

/// Tie-breaking product policy: the elementwise product of the reward and
/// count distributions, renormalized. When the reward policy is uniform the
/// count policy decides; when the product has no mass at all (disjoint
/// supports) the count policy is returned unchanged.
pub fn behavior_policy(
    rewards: &ActionDistribution,
    counts: &ActionDistribution,
) -> ActionDistribution {
    assert_eq!(rewards.len(), counts.len(), "distribution lengths must match");
    let product: Vec<f64> = rewards
        .probs()
        .iter()
        .zip(counts.probs())
        .map(|(r, c)| r * c)
        .collect();
    if product.iter().sum::<f64>() > 0.0 {
        ActionDistribution::from_weights(&product)
    } else {
        counts.clone()
    }
}

/// Per-action visit counts at the root: the number of live nodes in each
/// root action's subtree. Actions never tried from the root count zero.
pub fn root_action_counts<S: Clone>(tree: &SearchTree<S>, action_count: usize) -> Vec<u64> {
    let mut counts = vec![0u64; action_count];
    let root = tree.root();
    for &child in &tree.get(root).children {
        if tree.get(child).removed {
            continue;
        }
        let action = tree.get(child).action.expect("non-root nodes record an action");
        counts[action] += tree.subtree_ids(child).len() as u64;
    }
    counts
}

/// Greedy return backup over the whole tree: each root action's return is
/// its observed entry reward plus the discounted best continuation in its
/// subtree, where `leaf_value` estimates the unexplored future at
/// non-terminal frontier nodes (clamped below at zero, so a pessimistic
/// estimator never beats an observed reward). Actions without a subtree
/// return zero.
pub fn backup_rewards<S: Clone, F>(
    tree: &SearchTree<S>,
    gamma: f64,
    leaf_value: F,
    action_count: usize,
) -> Vec<f64>
where
    F: FnMut(&FeatureVector) -> f64,
{
    let values = node_values(tree, gamma, leaf_value);
    let mut returns = vec![0.0; action_count];
    let root = tree.root();
    for &child in &tree.get(root).children {
        let node = tree.get(child);
        if node.removed {
            continue;
        }
        let action = node.action.expect("non-root nodes record an action");
        returns[action] = node.reward_on_entry + gamma * values[&child];
    }
    returns
}

/// Value of every live node: zero at terminals, the clamped estimate at
/// non-terminal leaves, and the best discounted child backup at interior
/// nodes. Computed iteratively in reverse breadth-first order so deep
/// rollout chains cannot overflow the stack.
pub(crate) fn node_values<S: Clone, F>(
    tree: &SearchTree<S>,
    gamma: f64,
    mut leaf_value: F,
) -> HashMap<NodeId, f64>
where
    F: FnMut(&FeatureVector) -> f64,
{
    let order = tree.bfs_order();
    let mut values = HashMap::with_capacity(order.len());
    for &id in order.iter().rev() {
        let node = tree.get(id);
        let value = if node.terminal {
            0.0
        } else {
            let mut best: Option<f64> = None;
            for &child in &node.children {
                let child_node = tree.get(child);
                if child_node.removed {
                    continue;
                }
                let backup = child_node.reward_on_entry + gamma * values[&child];
                best = Some(best.map_or(backup, |b: f64| b.max(backup)));
            }
            match best {
                Some(b) => b,
                None => leaf_value(&node.features).max(0.0),
            }
        };
        values.insert(id, value);
    }
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn assert_close(actual: &[f64], expected: &[f64], tol: f64) {
        assert_eq!(actual.len(), expected.len());
        for (a, e) in actual.iter().zip(expected) {
            assert!(
                (a - e).abs() < tol,
                "expected {expected:?}, got {actual:?}"
            );
        }
    }

    /// A tree with fixed rewards for backup tests:
    ///
    /// ```text
    /// root -0-> a (r=0) -0-> b (r=0) -0-> c (r=1, terminal)
    ///      -1-> d (r=0, leaf)
    /// ```
    fn reward_chain() -> SearchTree<u32> {
        let mut tree = SearchTree::new(0u32, FeatureVector(vec![0]), false);
        let root = tree.root();
        let a = tree.add_child(root, 0, 1, FeatureVector(vec![1]), 0.0, false);
        let b = tree.add_child(a, 0, 2, FeatureVector(vec![2]), 0.0, false);
        tree.add_child(b, 0, 3, FeatureVector(vec![3]), 1.0, true);
        tree.add_child(root, 1, 4, FeatureVector(vec![4]), 0.0, false);
        tree
    }

    #[test]
    fn count_policy_favors_the_less_visited_action() {
        let dist = pi_counts(&[0, 1], 1.0);
        // exponents 1 and 1/2: softmax gives 1/(1 + e^{-1/2})
        let p0 = 1.0 / (1.0 + (-0.5f64).exp());
        assert_close(dist.probs(), &[p0, 1.0 - p0], 1e-12);
        assert!((dist.probs()[0] - 0.622).abs() < 1e-3);
    }

    #[test]
    fn count_policy_is_uniform_over_equal_counts() {
        let dist = pi_counts(&[3, 3, 3], 1.0);
        assert_close(dist.probs(), &[1.0 / 3.0; 3], 1e-12);
    }

    #[test]
    fn high_temperature_count_policy_approaches_uniform() {
        let dist = pi_counts(&[1, 2, 3], 1e9);
        for &p in dist.probs() {
            assert!((p - 1.0 / 3.0).abs() < 1e-6, "got {:?}", dist.probs());
        }
    }

    #[test]
    fn reward_policy_concentrates_at_low_temperature() {
        let dist = pi_rewards(&[1.0, 0.0], 1e-4);
        assert!(dist.probs()[0] > 1.0 - 1e-6);
        assert_eq!(dist.argmax(), 0);
    }

    #[test]
    fn reward_policy_is_uniform_over_equal_returns() {
        let dist = pi_rewards(&[0.0, 0.0, 0.0], 1e-4);
        assert_close(dist.probs(), &[1.0 / 3.0; 3], 1e-12);
    }

    #[test]
    fn behavior_policy_defers_to_counts_under_a_uniform_reward_policy() {
        let rewards = ActionDistribution::uniform(2);
        let counts = ActionDistribution::from_weights(&[0.8, 0.2]);
        let behavior = behavior_policy(&rewards, &counts);
        assert_close(behavior.probs(), &[0.8, 0.2], 1e-12);
    }

    #[test]
    fn behavior_policy_keeps_a_decisive_reward_argmax() {
        let rewards = ActionDistribution::from_weights(&[0.99, 0.01]);
        let counts = ActionDistribution::from_weights(&[0.4, 0.6]);
        let behavior = behavior_policy(&rewards, &counts);
        assert_eq!(behavior.argmax(), 0);
    }

    #[test]
    fn behavior_policy_falls_back_to_counts_on_disjoint_support() {
        let rewards = ActionDistribution::from_weights(&[1.0, 0.0]);
        let counts = ActionDistribution::from_weights(&[0.0, 1.0]);
        let behavior = behavior_policy(&rewards, &counts);
        assert_close(behavior.probs(), &[0.0, 1.0], 1e-12);
    }

    #[test]
    fn behavior_policy_is_invariant_to_weight_rescaling() {
        let rewards_a = ActionDistribution::from_weights(&[0.3, 0.7]);
        let rewards_b = ActionDistribution::from_weights(&[0.6, 1.4]);
        let counts = ActionDistribution::from_weights(&[5.0, 1.0]);
        let a = behavior_policy(&rewards_a, &counts);
        let b = behavior_policy(&rewards_b, &counts);
        assert_close(a.probs(), b.probs(), 1e-9);
    }

    #[test]
    fn sampling_respects_the_distribution() {
        let dist = ActionDistribution::from_weights(&[0.25, 0.75]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut hits = [0usize; 2];
        for _ in 0..20_000 {
            hits[dist.sample(&mut rng)] += 1;
        }
        let f1 = hits[1] as f64 / 20_000.0;
        assert!((f1 - 0.75).abs() < 0.02, "sampled frequency {f1}");
    }

    #[test]
    fn root_counts_total_each_action_subtree() {
        let tree = reward_chain();
        // action 0 leads to a 3-node chain, action 1 to a single leaf
        assert_eq!(root_action_counts(&tree, 3), vec![3, 1, 0]);
    }

    #[test]
    fn root_counts_skip_removed_branches() {
        let mut tree = reward_chain();
        let root = tree.root();
        let d = tree.get(root).children[1];
        tree.remove_leaf(d);
        assert_eq!(root_action_counts(&tree, 2), vec![3, 0]);
    }

    #[test]
    fn backup_discounts_a_delayed_reward() {
        let tree = reward_chain();
        let returns = backup_rewards(&tree, 0.99, |_| 0.0, 2);
        // reward 1 arrives three steps in: 0 + 0.99 * (0 + 0.99 * 1)
        assert!((returns[0] - 0.9801).abs() < 1e-12, "got {}", returns[0]);
        assert_eq!(returns[1], 0.0);
    }

    #[test]
    fn backup_substitutes_the_estimate_at_live_leaves() {
        let mut tree = SearchTree::new(0u32, FeatureVector(vec![0]), false);
        let root = tree.root();
        tree.add_child(root, 0, 1, FeatureVector(vec![1]), 0.0, false);
        let returns = backup_rewards(&tree, 1.0, |_| 0.5, 2);
        assert!((returns[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn backup_clamps_negative_estimates_to_zero() {
        let mut tree = SearchTree::new(0u32, FeatureVector(vec![0]), false);
        let root = tree.root();
        tree.add_child(root, 0, 1, FeatureVector(vec![1]), 0.25, false);
        let returns = backup_rewards(&tree, 1.0, |_| -3.0, 2);
        assert!((returns[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn backup_gives_terminals_no_continuation_value() {
        let mut tree = SearchTree::new(0u32, FeatureVector(vec![0]), false);
        let root = tree.root();
        tree.add_child(root, 0, 1, FeatureVector(vec![1]), -1.0, true);
        let returns = backup_rewards(&tree, 1.0, |_| 99.0, 2);
        assert!((returns[0] - -1.0).abs() < 1e-12);
        assert_eq!(returns[1], 0.0);
    }

    #[test]
    fn backup_takes_the_best_branch_at_interior_nodes() {
        let mut tree = SearchTree::new(0u32, FeatureVector(vec![0]), false);
        let root = tree.root();
        let a = tree.add_child(root, 0, 1, FeatureVector(vec![1]), 0.0, false);
        tree.add_child(a, 0, 2, FeatureVector(vec![2]), 0.2, true);
        tree.add_child(a, 1, 3, FeatureVector(vec![3]), 0.9, true);
        let returns = backup_rewards(&tree, 1.0, |_| 0.0, 1);
        assert!((returns[0] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn backup_survives_a_deep_rollout_chain() {
        let mut tree = SearchTree::new(0u32, FeatureVector(vec![0]), false);
        let mut at = tree.root();
        for i in 1..=50_000u32 {
            at = tree.add_child(at, 0, i, FeatureVector(vec![i]), 0.0, false);
        }
        let returns = backup_rewards(&tree, 1.0, |_| 1.0, 1);
        assert!((returns[0] - 1.0).abs() < 1e-12);
    }
}
