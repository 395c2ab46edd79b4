//! Replanning agents: plan under a per-step node budget, act by sampling
//! the behavior policy over the applicable actions, cache the chosen
//! subtree as the next root (bounded by a node cap), and train the
//! estimator on Monte-Carlo episode targets.

use std::collections::{BinaryHeap, HashSet};
use std::fmt::Debug;
use std::hash::Hash;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::hierarchy::{
    HierarchyConfig, HighOrder, LowKind, MapSplit, TwoLevelSearch,
};
use crate::novelty::FeatureVector;
use crate::search::{
    NodeId, RolloutEnd, RolloutState, SearchBudget, SearchTree, UNIFORM_TAU,
};
use crate::simulator::{DeterministicEnv, FeatureMap, Transition};

use super::backprop::backprop_hierarchical;
use super::estimator::{EstimatorLoss, PolicyEstimator, PolicySelector, TabularEstimator};
use super::{
    backup_rewards, behavior_policy, node_values, pi_counts, pi_rewards, root_action_counts,
    ActionDistribution,
};

/// Settings shared by the replanning agents.
#[derive(Debug, Clone)]
pub struct ReplanConfig {
    /// Novelty width of the per-step (low-level) search.
    pub width: usize,
    /// Discount for backups and Monte-Carlo targets.
    pub gamma: f64,
    /// Temperature of the reward policy (near-greedy by default).
    pub tau_rewards: f64,
    /// Temperature of the count policy.
    pub tau_counts: f64,
    /// Temperature of the count-based high-level order (hierarchical only).
    pub hl_tau: f64,
    /// Novelty width of the high-level search; `None` means the full
    /// high-level vector (exact duplicate detection). Hierarchical only.
    pub high_width: Option<usize>,
    /// Nodes the planner may generate per environment step.
    pub planning_budget: usize,
    /// Live nodes kept when caching a subtree across steps.
    pub max_tree_nodes: usize,
    /// Back up estimator values at non-terminal frontier leaves.
    pub use_value: bool,
    /// Tie-break the reward policy with the count policy when acting.
    pub use_counts: bool,
}

impl ReplanConfig {
    /// Reward-only guidance: no learned leaf values, no count tie-breaking.
    pub fn pi_iw(width: usize, planning_budget: usize) -> Self {
        ReplanConfig {
            width,
            gamma: 0.99,
            tau_rewards: 1e-4,
            tau_counts: 1.0,
            hl_tau: 0.005,
            high_width: Some(1),
            planning_budget,
            max_tree_nodes: 500,
            use_value: false,
            use_counts: false,
        }
    }

    /// Full guidance: estimator values at the frontier and count
    /// tie-breaking in the behavior policy.
    pub fn pi_iw_plus(width: usize, planning_budget: usize) -> Self {
        ReplanConfig {
            use_value: true,
            use_counts: true,
            ..ReplanConfig::pi_iw(width, planning_budget)
        }
    }

    /// Full guidance over a two-level search.
    pub fn pi_hiw(width: usize, planning_budget: usize) -> Self {
        ReplanConfig::pi_iw_plus(width, planning_budget)
    }
}

/// What one replanning step did: the sampled action, its immediate reward,
/// and the training target extracted from the planning tree at the root.
#[derive(Debug, Clone)]
pub struct StepInfo {
    pub action: usize,
    pub reward: f64,
    /// The successor state ends the episode.
    pub terminal: bool,
    /// Live nodes in the planning tree when the action was chosen.
    pub tree_size: usize,
    /// Features of the state the action was chosen in.
    pub root_features: FeatureVector,
    /// The reward policy at the root; the estimator's policy target.
    pub policy_target: ActionDistribution,
}

/// One JSON-serializable metrics line per environment step.
#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub episode: usize,
    pub action: usize,
    pub reward: f64,
    /// Undiscounted return accumulated so far in this episode.
    pub episode_return: f64,
    pub tree_size: usize,
    pub loss: EstimatorLoss,
}

/// Outcome of one episode.
#[derive(Debug, Clone, Serialize)]
pub struct EpisodeSummary {
    pub episode_return: f64,
    pub steps: usize,
    /// The episode ended in a terminal state rather than at the step cap.
    pub terminated: bool,
}

/// An agent that interleaves planning and acting, one environment step at a
/// time, and learns from Monte-Carlo targets after each episode.
pub trait Replanner<E: DeterministicEnv> {
    /// Plan from the current state, sample an action, execute it, and keep
    /// the chosen subtree. `None` means the episode cannot continue (the
    /// state is terminal or no action applies).
    fn replan_step(&mut self, env: &E) -> Option<StepInfo>;

    /// Start a fresh episode from the environment's initial state.
    fn reset(&mut self, env: &E);

    fn estimator(&self) -> &TabularEstimator;

    fn estimator_mut(&mut self) -> &mut TabularEstimator;

    fn gamma(&self) -> f64;
}

/// Discounted Monte-Carlo return of every suffix of a reward sequence.
pub fn mc_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut returns = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        returns[t] = acc;
    }
    returns
}

/// Evicts deepest-first leaves until at most `cap` live nodes remain, never
/// touching the root or the greedy best-return path (so the plan the agent
/// is acting on survives). An evicted leaf's entry action is handed back to
/// its parent's untried set, so the branch stays reachable later.
pub fn enforce_node_cap<S: Clone, F>(tree: &mut SearchTree<S>, cap: usize, gamma: f64, leaf_value: F)
where
    F: FnMut(&FeatureVector) -> f64,
{
    assert!(cap >= 1, "the node cap must keep at least the root");
    let mut live = tree.live_count();
    if live <= cap {
        return;
    }
    let values = node_values(tree, gamma, leaf_value);

    let mut protected: HashSet<NodeId> = HashSet::new();
    let mut at = tree.root();
    loop {
        protected.insert(at);
        let mut best: Option<(f64, NodeId)> = None;
        for &child in &tree.get(at).children {
            let node = tree.get(child);
            if node.removed {
                continue;
            }
            let backup = node.reward_on_entry + gamma * values[&child];
            if best.is_none_or(|(b, _)| backup > b) {
                best = Some((backup, child));
            }
        }
        match best {
            Some((_, child)) => at = child,
            None => break,
        }
    }

    let root = tree.root();
    let mut heap: BinaryHeap<(u32, NodeId)> = tree
        .bfs_order()
        .into_iter()
        .filter(|&id| {
            id != root && tree.get(id).children.is_empty() && !protected.contains(&id)
        })
        .map(|id| (tree.get(id).depth, id))
        .collect();
    while live > cap {
        let Some((_, id)) = heap.pop() else {
            break;
        };
        let parent = tree.get(id).parent.expect("the root is never evicted");
        let action = tree.get(id).action.expect("non-root nodes record an action");
        tree.remove_leaf(id);
        live -= 1;
        if let Some(untried) = tree.get_mut(parent).untried.as_mut() {
            untried.push(action as u16);
        }
        let parent_node = tree.get(parent);
        if parent != root && parent_node.children.is_empty() && !protected.contains(&parent) {
            heap.push((parent_node.depth, parent));
        }
    }
}

/// Samples the behavior policy restricted to the applicable actions;
/// falls back to uniform over the applicable ones when the policy gives
/// them no mass. `None` when nothing applies.
fn sample_applicable<S>(
    behavior: &ActionDistribution,
    transitions: &[Option<Transition<S>>],
    rng: &mut ChaCha8Rng,
) -> Option<usize> {
    let masked: Vec<f64> = behavior
        .probs()
        .iter()
        .enumerate()
        .map(|(a, &p)| if transitions[a].is_some() { p } else { 0.0 })
        .collect();
    if masked.iter().sum::<f64>() > 0.0 {
        return Some(ActionDistribution::from_weights(&masked).sample(rng));
    }
    let applicable: Vec<f64> = transitions
        .iter()
        .map(|t| if t.is_some() { 1.0 } else { 0.0 })
        .collect();
    if applicable.iter().sum::<f64>() > 0.0 {
        Some(ActionDistribution::from_weights(&applicable).sample(rng))
    } else {
        None
    }
}

/// Flat policy-guided replanner: one Rollout IW search persists across
/// steps, its rollouts draw actions from the learned policy, and the chosen
/// child's subtree seeds the next step's search.
pub struct FlatReplanner<S, M> {
    config: ReplanConfig,
    map: M,
    estimator: TabularEstimator,
    tree: SearchTree<S>,
    rollout: RolloutState,
    rng: ChaCha8Rng,
}

impl<S, M> FlatReplanner<S, M>
where
    S: Clone + Eq + Hash + Debug,
    M: FeatureMap<S>,
{
    pub fn new<E>(env: &E, map: M, config: ReplanConfig, seed: u64) -> Self
    where
        E: DeterministicEnv<State = S>,
    {
        let estimator = TabularEstimator::with_defaults(env.action_count());
        let rng = ChaCha8Rng::seed_from_u64(seed);
        let (tree, rollout) = Self::fresh(env, &map, &config, env.initial_state());
        FlatReplanner {
            config,
            map,
            estimator,
            tree,
            rollout,
            rng,
        }
    }

    pub fn tree(&self) -> &SearchTree<S> {
        &self.tree
    }

    pub fn policy(&self) -> &TabularEstimator {
        &self.estimator
    }

    fn fresh<E>(
        env: &E,
        map: &M,
        config: &ReplanConfig,
        state: S,
    ) -> (SearchTree<S>, RolloutState)
    where
        E: DeterministicEnv<State = S>,
    {
        let features = map.features(&state);
        let terminal = env.is_terminal(&state);
        let mut tree = SearchTree::new(state, features, terminal);
        let width = config.width.min(map.schema().len());
        let mut rollout = RolloutState::new(width, map.schema().len(), UNIFORM_TAU, tree.root());
        rollout.attach_root(&mut tree);
        (tree, rollout)
    }

    fn plan<E>(&mut self, env: &E)
    where
        E: DeterministicEnv<State = S>,
    {
        let mut budget = SearchBudget::new(self.config.planning_budget);
        let mut selector = PolicySelector::new(&self.estimator);
        let mut boundary = |_: &S, _: &FeatureVector| false;
        while !budget.exhausted() {
            let Some(start) = self.rollout.select(&self.tree, &mut self.rng) else {
                break;
            };
            match self.rollout.rollout(
                &mut self.tree,
                start,
                env,
                &self.map,
                &mut budget,
                &mut selector,
                &mut boundary,
                &mut self.rng,
            ) {
                RolloutEnd::Solved(_) | RolloutEnd::OutOfBudget => break,
                RolloutEnd::Finished => {}
                RolloutEnd::Boundary(_) => unreachable!("no boundary predicate installed"),
            }
        }
    }

    fn advance<E>(&mut self, env: &E, action: usize, transition: Transition<S>)
    where
        E: DeterministicEnv<State = S>,
    {
        let root = self.tree.root();
        let chosen = self.tree.get(root).children.iter().copied().find(|&c| {
            let node = self.tree.get(c);
            !node.removed && node.action == Some(action)
        });
        match chosen {
            Some(child) => {
                debug_assert_eq!(self.tree.get(child).state, transition.state);
                let (mut subtree, _) = self.tree.extract_subtree(child);
                let estimator = &self.estimator;
                let use_value = self.config.use_value;
                enforce_node_cap(
                    &mut subtree,
                    self.config.max_tree_nodes,
                    self.config.gamma,
                    |fv| if use_value { estimator.predict(fv).1 } else { 0.0 },
                );
                self.tree = subtree;
                let order = self.tree.bfs_order();
                let root = self.tree.root();
                let width = self.config.width.min(self.map.schema().len());
                self.rollout =
                    RolloutState::new(width, self.map.schema().len(), UNIFORM_TAU, root);
                self.rollout.rebuild_from(&mut self.tree, root, &order);
            }
            None => {
                let (tree, rollout) = Self::fresh(env, &self.map, &self.config, transition.state);
                self.tree = tree;
                self.rollout = rollout;
            }
        }
    }
}

impl<E, S, M> Replanner<E> for FlatReplanner<S, M>
where
    E: DeterministicEnv<State = S>,
    S: Clone + Eq + Hash + Debug,
    M: FeatureMap<S>,
{
    fn replan_step(&mut self, env: &E) -> Option<StepInfo> {
        let root = self.tree.root();
        if self.tree.get(root).terminal {
            return None;
        }
        self.plan(env);

        let action_count = env.action_count();
        let use_value = self.config.use_value;
        let estimator = &self.estimator;
        let returns = backup_rewards(
            &self.tree,
            self.config.gamma,
            |fv| if use_value { estimator.predict(fv).1 } else { 0.0 },
            action_count,
        );
        let target = pi_rewards(&returns, self.config.tau_rewards);
        let behavior = if self.config.use_counts {
            let counts = root_action_counts(&self.tree, action_count);
            behavior_policy(&target, &pi_counts(&counts, self.config.tau_counts))
        } else {
            target.clone()
        };

        let root_state = self.tree.get(root).state.clone();
        let root_features = self.tree.get(root).features.clone();
        let transitions: Vec<Option<Transition<S>>> =
            (0..action_count).map(|a| env.step(&root_state, a)).collect();
        let action = sample_applicable(&behavior, &transitions, &mut self.rng)?;
        let transition = transitions
            .into_iter()
            .nth(action)
            .flatten()
            .expect("sampled action is applicable");
        let reward = transition.reward;
        let terminal = env.is_terminal(&transition.state);
        let tree_size = self.tree.live_count();
        self.advance(env, action, transition);
        Some(StepInfo {
            action,
            reward,
            terminal,
            tree_size,
            root_features,
            policy_target: target,
        })
    }

    fn reset(&mut self, env: &E) {
        let (tree, rollout) = Self::fresh(env, &self.map, &self.config, env.initial_state());
        self.tree = tree;
        self.rollout = rollout;
    }

    fn estimator(&self) -> &TabularEstimator {
        &self.estimator
    }

    fn estimator_mut(&mut self) -> &mut TabularEstimator {
        &mut self.estimator
    }

    fn gamma(&self) -> f64 {
        self.config.gamma
    }
}

/// Hierarchical policy-guided replanner: a two-level search (count-based
/// high level over the given high map, policy-guided rollouts below)
/// persists across steps; backups cross region boundaries by value
/// injection.
pub struct HierReplanner<S, M, H> {
    config: ReplanConfig,
    hierarchy_config: HierarchyConfig,
    map: M,
    split: MapSplit<H>,
    estimator: TabularEstimator,
    search: TwoLevelSearch<S>,
    rng: ChaCha8Rng,
}

impl<S, M, H> HierReplanner<S, M, H>
where
    S: Clone + Eq + Hash + Debug,
    M: FeatureMap<S>,
    H: FeatureMap<S>,
{
    pub fn new<E>(env: &E, map: M, high_map: H, config: ReplanConfig, seed: u64) -> Self
    where
        E: DeterministicEnv<State = S>,
    {
        let high_len = high_map.schema().len();
        let split = MapSplit::new(high_map, map.schema().clone());
        let hierarchy_config = HierarchyConfig {
            high_width: config.high_width.unwrap_or(high_len).min(high_len).max(1),
            low_width: config.width.min(map.schema().len()),
            high_order: HighOrder::CountBased { tau: config.hl_tau },
            low_kind: LowKind::Rollout { tau: UNIFORM_TAU },
            low_resume_cap: None,
        };
        let search = TwoLevelSearch::new(
            env,
            &map,
            &split,
            hierarchy_config.clone(),
            env.initial_state(),
        )
        .expect("a full-schema high width and a positive low width are valid");
        let estimator = TabularEstimator::with_defaults(env.action_count());
        HierReplanner {
            config,
            hierarchy_config,
            map,
            split,
            estimator,
            search,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn search(&self) -> &TwoLevelSearch<S> {
        &self.search
    }

    pub fn policy(&self) -> &TabularEstimator {
        &self.estimator
    }

    fn advance<E>(&mut self, env: &E, action: usize, transition: Transition<S>)
    where
        E: DeterministicEnv<State = S>,
    {
        let arena = self.search.arena();
        let root = arena.root();
        let chosen = arena.get(root).children.iter().copied().find(|&c| {
            let node = arena.get(c);
            !node.removed && node.action == Some(action)
        });
        match chosen {
            Some(child) => {
                debug_assert_eq!(arena.get(child).state, transition.state);
                let (mut subtree, _) = arena.extract_subtree(child);
                let estimator = &self.estimator;
                let use_value = self.config.use_value;
                enforce_node_cap(
                    &mut subtree,
                    self.config.max_tree_nodes,
                    self.config.gamma,
                    |fv| if use_value { estimator.predict(fv).1 } else { 0.0 },
                );
                self.search.arena = subtree;
                self.search.rebuild(&self.split, false);
            }
            None => {
                let counts = self.search.take_hl_counts();
                self.search = TwoLevelSearch::new(
                    env,
                    &self.map,
                    &self.split,
                    self.hierarchy_config.clone(),
                    transition.state,
                )
                .expect("the split stays valid across steps");
                self.search.seed_hl_counts(counts);
            }
        }
    }
}

impl<E, S, M, H> Replanner<E> for HierReplanner<S, M, H>
where
    E: DeterministicEnv<State = S>,
    S: Clone + Eq + Hash + Debug,
    M: FeatureMap<S>,
    H: FeatureMap<S>,
{
    fn replan_step(&mut self, env: &E) -> Option<StepInfo> {
        let root = self.search.arena().root();
        if self.search.arena().get(root).terminal {
            return None;
        }
        {
            let mut budget = SearchBudget::new(self.config.planning_budget);
            let mut selector = PolicySelector::new(&self.estimator);
            self.search.run(
                env,
                &self.map,
                &self.split,
                &mut budget,
                &mut self.rng,
                &mut selector,
            );
        }

        let action_count = env.action_count();
        let use_value = self.config.use_value;
        let estimator = &self.estimator;
        let (returns, counts) = backprop_hierarchical(
            self.search.arena(),
            self.search.hl_nodes(),
            self.search.hl_root(),
            self.config.gamma,
            |fv| if use_value { estimator.predict(fv).1 } else { 0.0 },
            action_count,
        );
        let target = pi_rewards(&returns, self.config.tau_rewards);
        let behavior = if self.config.use_counts {
            behavior_policy(&target, &pi_counts(&counts, self.config.tau_counts))
        } else {
            target.clone()
        };

        let arena = self.search.arena();
        let root_state = arena.get(root).state.clone();
        let root_features = arena.get(root).features.clone();
        let transitions: Vec<Option<Transition<S>>> =
            (0..action_count).map(|a| env.step(&root_state, a)).collect();
        let action = sample_applicable(&behavior, &transitions, &mut self.rng)?;
        let transition = transitions
            .into_iter()
            .nth(action)
            .flatten()
            .expect("sampled action is applicable");
        let reward = transition.reward;
        let terminal = env.is_terminal(&transition.state);
        let tree_size = self.search.arena().live_count();
        self.advance(env, action, transition);
        Some(StepInfo {
            action,
            reward,
            terminal,
            tree_size,
            root_features,
            policy_target: target,
        })
    }

    fn reset(&mut self, env: &E) {
        self.search = TwoLevelSearch::new(
            env,
            &self.map,
            &self.split,
            self.hierarchy_config.clone(),
            env.initial_state(),
        )
        .expect("the split stays valid across episodes");
    }

    fn estimator(&self) -> &TabularEstimator {
        &self.estimator
    }

    fn estimator_mut(&mut self) -> &mut TabularEstimator {
        &mut self.estimator
    }

    fn gamma(&self) -> f64 {
        self.config.gamma
    }
}

/// Runs one training episode: replan-act until termination or `max_steps`,
/// then update the estimator with Monte-Carlo targets, one update per step.
/// Returns the episode summary and one metrics record per step, numbered
/// from `step_offset`.
pub fn run_training_episode<E, R>(
    agent: &mut R,
    env: &E,
    max_steps: usize,
    episode: usize,
    step_offset: usize,
) -> (EpisodeSummary, Vec<StepRecord>)
where
    E: DeterministicEnv,
    R: Replanner<E>,
{
    agent.reset(env);
    let mut infos: Vec<StepInfo> = Vec::new();
    let mut terminated = false;
    for _ in 0..max_steps {
        let Some(info) = agent.replan_step(env) else {
            break;
        };
        let terminal = info.terminal;
        infos.push(info);
        if terminal {
            terminated = true;
            break;
        }
    }

    let rewards: Vec<f64> = infos.iter().map(|i| i.reward).collect();
    let targets = mc_returns(&rewards, agent.gamma());
    let mut records = Vec::with_capacity(infos.len());
    let mut running = 0.0;
    for (t, info) in infos.iter().enumerate() {
        let loss = agent
            .estimator_mut()
            .update(&info.root_features, &info.policy_target, targets[t]);
        running += info.reward;
        records.push(StepRecord {
            step: step_offset + t,
            episode,
            action: info.action,
            reward: info.reward,
            episode_return: running,
            tree_size: info.tree_size,
            loss,
        });
    }
    let summary = EpisodeSummary {
        episode_return: rewards.iter().sum(),
        steps: infos.len(),
        terminated,
    };
    (summary, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::count_based_riw;
    use crate::simulator::{
        CorridorEnv, CorridorFeatures, CorridorState, GoalTaskWrapper, ProjectionMap,
        CORRIDOR_RIGHT,
    };
    use rand::Rng;

    type CorridorTask = GoalTaskWrapper<CorridorEnv, fn(&CorridorState) -> bool>;

    fn corridor(length: u32) -> (CorridorTask, CorridorFeatures) {
        let map = CorridorFeatures::new(&CorridorEnv::new(length));
        (CorridorEnv::goal_task(length), map)
    }

    fn fv(values: &[u32]) -> FeatureVector {
        FeatureVector(values.to_vec())
    }

    #[test]
    fn monte_carlo_returns_match_the_direct_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let rewards: Vec<f64> = (0..rng.gen_range(1..12)).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let gamma = 0.97;
            let returns = mc_returns(&rewards, gamma);
            for t in 0..rewards.len() {
                let direct: f64 = rewards[t..]
                    .iter()
                    .enumerate()
                    .map(|(u, r)| gamma.powi(u as i32) * r)
                    .sum();
                assert!((returns[t] - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flat_agent_takes_the_optimal_first_action() {
        for seed in 0..3 {
            let (env, map) = corridor(3);
            let mut agent = FlatReplanner::new(&env, map, ReplanConfig::pi_iw(2, 5_000), seed);
            let info = agent.replan_step(&env).expect("the corridor start is not terminal");
            assert_eq!(info.action, CORRIDOR_RIGHT, "seed {seed}");
            assert_eq!(info.policy_target.argmax(), CORRIDOR_RIGHT);
            assert!(!info.terminal);
            assert_eq!(info.reward, 0.0);
        }
    }

    #[test]
    fn flat_agent_walks_the_corridor_optimally() {
        for seed in 0..3 {
            let (env, map) = corridor(3);
            let mut agent = FlatReplanner::new(&env, map, ReplanConfig::pi_iw(2, 5_000), seed);
            let (summary, records) = run_training_episode(&mut agent, &env, 20, 0, 0);
            assert!(summary.terminated, "seed {seed}");
            assert_eq!(summary.steps, 6);
            assert!((summary.episode_return - 1.0).abs() < 1e-12);
            assert_eq!(records.len(), 6);
            for (t, record) in records.iter().enumerate() {
                assert_eq!(record.step, t);
                assert_eq!(record.episode, 0);
                assert!(record.loss.total().is_finite());
                assert!(record.tree_size > 0);
            }
            assert!((records[5].episode_return - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cached_subtrees_keep_their_generation_stamps() {
        let (env, map) = corridor(3);
        let mut agent = FlatReplanner::new(&env, map, ReplanConfig::pi_iw(2, 2_000), 1);
        agent.replan_step(&env).expect("step one");
        let first: Vec<u64> = agent
            .tree()
            .bfs_order()
            .iter()
            .map(|&id| agent.tree().get(id).generation)
            .collect();
        let max_first = *first.iter().max().expect("nonempty tree");
        assert_eq!(agent.tree().get(agent.tree().root()).depth, 0);

        agent.replan_step(&env).expect("step two");
        let stamps: Vec<u64> = agent
            .tree()
            .bfs_order()
            .iter()
            .map(|&id| agent.tree().get(id).generation)
            .collect();
        // old stamp numbers are never reissued: anything at or below the
        // previous maximum must be a retained node, not a regenerated one
        for &g in &stamps {
            if g <= max_first {
                assert!(first.contains(&g), "stamp {g} was reissued");
            }
        }
        let root_stamp = agent.tree().get(agent.tree().root()).generation;
        assert!(first.contains(&root_stamp), "the new root was cached, not rebuilt");
        assert_eq!(agent.tree().get(agent.tree().root()).depth, 0);
    }

    #[test]
    fn node_cap_evicts_deep_leaves_but_not_the_best_path() {
        let mut tree = SearchTree::new(0u32, fv(&[0]), false);
        let root = tree.root();
        let a = tree.add_child(root, 0, 1, fv(&[1]), 1.0, false);
        let b = tree.add_child(a, 0, 2, fv(&[2]), 1.0, false);
        let c = tree.add_child(root, 1, 3, fv(&[3]), 0.0, false);
        let d = tree.add_child(c, 0, 4, fv(&[4]), 0.0, false);
        let e = tree.add_child(d, 0, 5, fv(&[5]), 0.0, false);
        tree.get_mut(c).untried = Some(Vec::new());

        enforce_node_cap(&mut tree, 4, 1.0, |_| 0.0);

        assert_eq!(tree.live_count(), 4);
        assert!(tree.get(e).removed);
        assert!(tree.get(d).removed);
        for id in [root, a, b, c] {
            assert!(!tree.get(id).removed);
        }
        // the evicted branch's action is handed back for a later retry
        assert_eq!(tree.get(c).untried, Some(vec![0]));
        assert_eq!(tree.get(c).children, Vec::new());
    }

    #[test]
    fn node_cap_leaves_small_trees_alone() {
        let mut tree = SearchTree::new(0u32, fv(&[0]), false);
        let root = tree.root();
        tree.add_child(root, 0, 1, fv(&[1]), 0.0, false);
        enforce_node_cap(&mut tree, 500, 0.99, |_| 0.0);
        assert_eq!(tree.live_count(), 2);
    }

    #[test]
    fn zero_reward_behavior_reduces_to_count_tie_breaking() {
        // a plain corridor pays no rewards, so the reward policy is uniform
        // and the behavior policy must equal the count policy
        let env = CorridorEnv::new(3);
        let map = CorridorFeatures::new(&env);
        let run = count_based_riw(&env, &map, 1, 200, UNIFORM_TAU, 9, env.initial_state());
        let returns = backup_rewards(&run.tree, 0.99, |_| 0.0, 2);
        assert_eq!(returns, vec![0.0, 0.0]);
        let counts = root_action_counts(&run.tree, 2);
        let rewards_policy = pi_rewards(&returns, 1e-4);
        let counts_policy = pi_counts(&counts, 1.0);
        let behavior = behavior_policy(&rewards_policy, &counts_policy);
        for (b, c) in behavior.probs().iter().zip(counts_policy.probs()) {
            assert!((b - c).abs() < 1e-9);
        }
    }

    #[test]
    fn hierarchical_agent_reaches_the_corridor_goal() {
        for seed in 0..3 {
            let (env, map) = corridor(3);
            let high_map = ProjectionMap::new::<CorridorState>(
                CorridorFeatures::new(&CorridorEnv::new(3)),
                vec![1],
            );
            let mut agent =
                HierReplanner::new(&env, map, high_map, ReplanConfig::pi_hiw(1, 5_000), seed);
            let (summary, records) = run_training_episode(&mut agent, &env, 30, 0, 0);
            assert!(summary.terminated, "seed {seed}");
            assert!((summary.episode_return - 1.0).abs() < 1e-12);
            assert_eq!(records.len(), summary.steps);
        }
    }

    #[test]
    fn hierarchical_agent_caches_a_rooted_subtree() {
        let (env, map) = corridor(3);
        let high_map = ProjectionMap::new::<CorridorState>(
            CorridorFeatures::new(&CorridorEnv::new(3)),
            vec![1],
        );
        let mut agent =
            HierReplanner::new(&env, map, high_map, ReplanConfig::pi_hiw(1, 5_000), 0);
        let info = agent.replan_step(&env).expect("step one");
        let arena = agent.search().arena();
        assert_eq!(arena.get(arena.root()).depth, 0);
        let hl_root = agent.search().hl_root();
        assert_eq!(agent.search().hl_nodes()[hl_root.0 as usize].entry, arena.root());
        assert!(agent.search().hl_live_count() >= 1);
        assert!(info.tree_size > 1);
    }

    #[test]
    fn dead_ends_end_the_episode() {
        struct DeadEnd;
        impl DeterministicEnv for DeadEnd {
            type State = u8;
            fn action_count(&self) -> usize {
                2
            }
            fn initial_state(&self) -> u8 {
                0
            }
            fn step(&self, _state: &u8, _action: usize) -> Option<Transition<u8>> {
                None
            }
            fn is_terminal(&self, _state: &u8) -> bool {
                false
            }
        }
        struct SingleFeature;
        impl FeatureMap<u8> for SingleFeature {
            fn schema(&self) -> &crate::novelty::FeatureSchema {
                use std::sync::OnceLock;
                static SCHEMA: OnceLock<crate::novelty::FeatureSchema> = OnceLock::new();
                SCHEMA.get_or_init(|| {
                    crate::novelty::FeatureSchema::new(vec!["x".into()], vec![2]).unwrap()
                })
            }
            fn features(&self, state: &u8) -> FeatureVector {
                FeatureVector(vec![*state as u32])
            }
        }
        let env = DeadEnd;
        let mut agent = FlatReplanner::new(&env, SingleFeature, ReplanConfig::pi_iw(1, 50), 0);
        assert!(agent.replan_step(&env).is_none());
        let (summary, records) = run_training_episode(&mut agent, &env, 10, 0, 0);
        assert_eq!(summary.steps, 0);
        assert!(!summary.terminated);
        assert!(records.is_empty());
    }

    #[test]
    fn training_sharpens_the_estimator_policy() {
        let (env, map) = corridor(2);
        let mut agent = FlatReplanner::new(&env, map, ReplanConfig::pi_iw_plus(2, 2_000), 4);
        let initial = fv(&[0, 0]);
        let mut offset = 0;
        for episode in 0..5 {
            let (summary, records) = run_training_episode(&mut agent, &env, 20, episode, offset);
            offset += summary.steps;
            assert_eq!(records.len(), summary.steps);
        }
        let (policy, value) = agent.policy().predict(&initial);
        // the optimal first move is right, and the start state's value
        // reflects the discounted goal reward
        assert_eq!(policy.argmax(), CORRIDOR_RIGHT);
        assert!(value > 0.5, "learned value {value}");
    }
}
