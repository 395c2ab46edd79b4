//! Arena-backed search tree of concrete simulator states. Nodes are never
//! reallocated while a search runs; detaching a subtree for reuse copies the
//! retained payloads (including generation stamps) into a fresh arena.

use crate::novelty::{FeatureTuple, FeatureVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
pub struct SearchNode<S> {
    pub state: S,
    pub features: FeatureVector,
    pub depth: u32,
    pub parent: Option<NodeId>,
    /// Action taken from the parent to reach this node.
    pub action: Option<usize>,
    pub children: Vec<NodeId>,
    pub reward_on_entry: f64,
    pub terminal: bool,
    pub pruned: bool,
    /// Breadth-first variants: all successors were generated.
    pub expanded: bool,
    /// Rollout variants: the novel tuples justifying this node (the set T).
    pub tuples: Vec<FeatureTuple>,
    /// Rollout variants: actions not yet attempted from this node, in the
    /// order they will be tried. `None` until first touched.
    pub untried: Option<Vec<u16>>,
    /// Creation stamp, preserved across subtree extraction, so caching can
    /// be distinguished from regeneration.
    pub generation: u64,
    /// Evicted by the replanning memory cap; skipped by all traversals.
    pub removed: bool,
}

#[derive(Debug, Clone)]
pub struct SearchTree<S> {
    nodes: Vec<SearchNode<S>>,
    root: NodeId,
    next_generation: u64,
}

impl<S: Clone> SearchTree<S> {
    pub fn new(state: S, features: FeatureVector, terminal: bool) -> Self {
        let root = SearchNode {
            state,
            features,
            depth: 0,
            parent: None,
            action: None,
            children: Vec::new(),
            reward_on_entry: 0.0,
            terminal,
            pruned: false,
            expanded: false,
            tuples: Vec::new(),
            untried: None,
            generation: 0,
            removed: false,
        };
        Self {
            nodes: vec![root],
            root: NodeId(0),
            next_generation: 1,
        }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn get(&self, id: NodeId) -> &SearchNode<S> {
        &self.nodes[id.index()]
    }

    pub fn get_mut(&mut self, id: NodeId) -> &mut SearchNode<S> {
        &mut self.nodes[id.index()]
    }

    /// Number of live (non-evicted) nodes.
    pub fn live_count(&self) -> usize {
        self.nodes.iter().filter(|n| !n.removed).count()
    }

    pub fn add_child(
        &mut self,
        parent: NodeId,
        action: usize,
        state: S,
        features: FeatureVector,
        reward: f64,
        terminal: bool,
    ) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        let depth = self.get(parent).depth + 1;
        let generation = self.next_generation;
        self.next_generation += 1;
        self.nodes.push(SearchNode {
            state,
            features,
            depth,
            parent: Some(parent),
            action: Some(action),
            children: Vec::new(),
            reward_on_entry: reward,
            terminal,
            pruned: false,
            expanded: false,
            tuples: Vec::new(),
            untried: None,
            generation,
            removed: false,
        });
        self.get_mut(parent).children.push(id);
        id
    }

    /// All live ids in breadth-first order from the root.
    pub fn bfs_order(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut queue = std::collections::VecDeque::new();
        if !self.get(self.root).removed {
            queue.push_back(self.root);
        }
        while let Some(id) = queue.pop_front() {
            out.push(id);
            for &child in &self.get(id).children {
                if !self.get(child).removed {
                    queue.push_back(child);
                }
            }
        }
        out
    }

    /// `id` and all its live descendants (preorder).
    pub fn subtree_ids(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(at) = stack.pop() {
            if self.get(at).removed {
                continue;
            }
            out.push(at);
            stack.extend(self.get(at).children.iter().copied());
        }
        out
    }

    /// Marks `id` and all its descendants pruned.
    pub fn prune_subtree(&mut self, id: NodeId) {
        for at in self.subtree_ids(id) {
            self.get_mut(at).pruned = true;
        }
    }

    /// The action sequence from the root to `id`.
    pub fn plan_to(&self, id: NodeId) -> Vec<usize> {
        let mut actions = Vec::new();
        let mut at = id;
        while let Some(parent) = self.get(at).parent {
            actions.push(self.get(at).action.expect("non-root has an action"));
            at = parent;
        }
        actions.reverse();
        actions
    }

    /// Live node ids whose `pruned` flag is set.
    pub fn pruned_ids(&self) -> Vec<NodeId> {
        self.iter_live()
            .filter(|&id| self.get(id).pruned)
            .collect()
    }

    pub fn iter_live(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| !n.removed)
            .map(|(i, _)| NodeId(i as u32))
    }

    /// Evicts a leaf from the arena. Panics if the node has live children or
    /// is the root.
    pub fn remove_leaf(&mut self, id: NodeId) {
        assert!(id != self.root, "cannot remove the root");
        assert!(
            self.get(id)
                .children
                .iter()
                .all(|&c| self.get(c).removed),
            "remove_leaf on an internal node"
        );
        let parent = self.get(id).parent.expect("non-root has a parent");
        self.get_mut(parent).children.retain(|&c| c != id);
        self.get_mut(id).removed = true;
    }

    /// Copies the subtree rooted at `new_root` into a fresh arena, rebasing
    /// depths so the new root has depth 0. Node payloads — states, features,
    /// rewards, tuples, untried actions, generation stamps — are preserved.
    /// Returns the new tree and a mapping from old ids to new ids.
    pub fn extract_subtree(&self, new_root: NodeId) -> (SearchTree<S>, Vec<Option<NodeId>>) {
        let base_depth = self.get(new_root).depth;
        let mut mapping: Vec<Option<NodeId>> = vec![None; self.nodes.len()];
        let mut nodes: Vec<SearchNode<S>> = Vec::new();
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(new_root);
        while let Some(old_id) = queue.pop_front() {
            let old = self.get(old_id);
            if old.removed {
                continue;
            }
            let new_id = NodeId(nodes.len() as u32);
            mapping[old_id.index()] = Some(new_id);
            let mut node = old.clone();
            node.depth -= base_depth;
            node.children = Vec::new();
            if old_id == new_root {
                node.parent = None;
                node.action = None;
                node.reward_on_entry = 0.0;
            } else {
                let new_parent =
                    mapping[old.parent.expect("non-root").index()].expect("parents visit first");
                node.parent = Some(new_parent);
                nodes[new_parent.index()].children.push(new_id);
            }
            nodes.push(node);
            for &child in &old.children {
                queue.push_back(child);
            }
        }
        let tree = SearchTree {
            nodes,
            root: NodeId(0),
            next_generation: self.next_generation,
        };
        (tree, mapping)
    }
}
