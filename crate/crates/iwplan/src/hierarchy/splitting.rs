//! Splitting-feature analysis over enumerable state spaces: a feature
//! splits an environment when every one of its values induces a subset of
//! states that stays connected under transitions restricted to the subset.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::simulator::{DeterministicEnv, FeatureMap};

use super::HierarchyError;

/// All states reachable from the initial state, in breadth-first order.
/// Terminal states are included but their successors are not explored.
/// Errors when more than `limit` states are found.
pub fn enumerate_reachable<E>(env: &E, limit: usize) -> Result<Vec<E::State>, HierarchyError>
where
    E: DeterministicEnv,
{
    let start = env.initial_state();
    let mut seen: HashSet<E::State> = HashSet::new();
    let mut order: Vec<E::State> = Vec::new();
    let mut queue: VecDeque<E::State> = VecDeque::new();
    seen.insert(start.clone());
    order.push(start.clone());
    if !env.is_terminal(&start) {
        queue.push_back(start);
    }
    while let Some(state) = queue.pop_front() {
        for action in 0..env.action_count() {
            let Some(t) = env.step(&state, action) else {
                continue;
            };
            if seen.contains(&t.state) {
                continue;
            }
            if order.len() >= limit {
                return Err(HierarchyError::EnumerationLimit { limit });
            }
            seen.insert(t.state.clone());
            order.push(t.state.clone());
            if !env.is_terminal(&t.state) {
                queue.push_back(t.state);
            }
        }
    }
    Ok(order)
}

/// Whether `feature` splits the environment: for every observed value v,
/// the induced subset {s : φ(s)[feature] = v} of reachable states must be
/// connected (as an undirected graph) under transitions that stay inside
/// the subset.
pub fn is_splitting<E, M>(
    env: &E,
    map: &M,
    feature: u16,
    limit: usize,
) -> Result<bool, HierarchyError>
where
    E: DeterministicEnv,
    M: FeatureMap<E::State>,
{
    let states = enumerate_reachable(env, limit)?;
    let index: HashMap<&E::State, usize> =
        states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let values: Vec<u32> = states
        .iter()
        .map(|s| map.features(s).values()[feature as usize])
        .collect();

    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); states.len()];
    for (i, state) in states.iter().enumerate() {
        if env.is_terminal(state) {
            continue;
        }
        for action in 0..env.action_count() {
            let Some(t) = env.step(state, action) else {
                continue;
            };
            let j = index[&t.state];
            if i != j && values[i] == values[j] {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }

    let mut by_value: HashMap<u32, Vec<usize>> = HashMap::new();
    for (i, &v) in values.iter().enumerate() {
        by_value.entry(v).or_default().push(i);
    }
    for members in by_value.values() {
        let mut visited: HashSet<usize> = HashSet::new();
        let mut queue = VecDeque::new();
        visited.insert(members[0]);
        queue.push_back(members[0]);
        while let Some(i) = queue.pop_front() {
            for &j in &adjacency[i] {
                if visited.insert(j) {
                    queue.push_back(j);
                }
            }
        }
        if visited.len() != members.len() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::novelty::{FeatureSchema, FeatureVector};
    use crate::simulator::{CorridorEnv, CorridorFeatures, Transition};

    #[test]
    fn key_feature_splits_the_corridor() {
        for length in [2u32, 3, 5] {
            let env = CorridorEnv::new(length);
            let map = CorridorFeatures::new(&env);
            assert_eq!(is_splitting(&env, &map, 1, 100_000), Ok(true), "length {length}");
        }
    }

    #[test]
    fn position_feature_does_not_split() {
        // fixing p=0 leaves (0, no-key) and (0, key) with no transition
        // between them inside the subset
        for length in [2u32, 3, 5] {
            let env = CorridorEnv::new(length);
            let map = CorridorFeatures::new(&env);
            assert_eq!(is_splitting(&env, &map, 0, 100_000), Ok(false), "length {length}");
        }
    }

    struct SingleStateEnv;

    impl DeterministicEnv for SingleStateEnv {
        type State = u8;

        fn action_count(&self) -> usize {
            1
        }

        fn initial_state(&self) -> u8 {
            0
        }

        fn step(&self, state: &u8, _action: usize) -> Option<Transition<u8>> {
            Some(Transition {
                state: *state,
                reward: 0.0,
            })
        }

        fn is_terminal(&self, _state: &u8) -> bool {
            false
        }
    }

    struct SingleStateMap {
        schema: FeatureSchema,
    }

    impl FeatureMap<u8> for SingleStateMap {
        fn schema(&self) -> &FeatureSchema {
            &self.schema
        }

        fn features(&self, _state: &u8) -> FeatureVector {
            FeatureVector(vec![0])
        }
    }

    #[test]
    fn single_state_environment_splits_trivially() {
        let env = SingleStateEnv;
        let map = SingleStateMap {
            schema: FeatureSchema::new(vec!["x".into()], vec![1]).unwrap(),
        };
        assert_eq!(is_splitting(&env, &map, 0, 100_000), Ok(true));
    }

    #[test]
    fn enumeration_stops_at_the_state_limit() {
        let env = CorridorEnv::new(200);
        // 200 key-less positions plus 201 with the key
        assert_eq!(enumerate_reachable(&env, 1_000).unwrap().len(), 401);
        assert_eq!(
            enumerate_reachable(&env, 100).unwrap_err(),
            HierarchyError::EnumerationLimit { limit: 100 }
        );
        let map = CorridorFeatures::new(&env);
        assert_eq!(
            is_splitting(&env, &map, 1, 100),
            Err(HierarchyError::EnumerationLimit { limit: 100 })
        );
    }
}
