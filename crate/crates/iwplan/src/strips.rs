//! Grounded STRIPS tasks: a line-based text format, single-goal splitting,
//! and the adapter that exposes a task as a deterministic environment whose
//! states are boolean atom vectors (one binary feature per atom).

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::novelty::{FeatureSchema, FeatureVector};
use crate::simulator::{
    DeterministicEnv, FeatureMap, GoalPredicate, GoalTaskWrapper, Transition,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StripsError {
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("semantic error at line {line}: {message}")]
    Semantic { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StripsAction {
    pub name: String,
    pub pre: Vec<usize>,
    pub add: Vec<usize>,
    pub del: Vec<usize>,
}

/// A grounded STRIPS task over named atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundedTask {
    atoms: Vec<String>,
    actions: Vec<StripsAction>,
    init: Vec<bool>,
    /// Goal atom indices in declaration order.
    goal: Vec<usize>,
}

/// A state: the truth value of every atom.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StripsState(pub Vec<bool>);

impl GroundedTask {
    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn actions(&self) -> &[StripsAction] {
        &self.actions
    }

    pub fn init(&self) -> StripsState {
        StripsState(self.init.clone())
    }

    pub fn goal(&self) -> &[usize] {
        &self.goal
    }

    pub fn goal_satisfied(&self, state: &StripsState) -> bool {
        self.goal.iter().all(|&i| state.0[i])
    }
}

/// Parses the task text format. UTF-8; `#` starts a comment; sections:
///   `atoms: a1 a2 ...`
///   `action: <name> pre: <atoms> add: <atoms> del: <atoms>`
///   `init: <atoms>`
///   `goal: <atoms>`
pub fn parse_task(text: &str) -> Result<GroundedTask, StripsError> {
    let mut atoms: Option<Vec<String>> = None;
    let mut atom_index: HashMap<String, usize> = HashMap::new();
    let mut actions: Vec<StripsAction> = Vec::new();
    let mut init: Option<Vec<usize>> = None;
    let mut goal: Option<Vec<usize>> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |message: String| StripsError::Syntax {
            line: line_no,
            message,
        };
        let semantic = |message: String| StripsError::Semantic {
            line: line_no,
            message,
        };
        let resolve = |names: &[&str], atom_index: &HashMap<String, usize>| {
            names
                .iter()
                .map(|name| {
                    atom_index
                        .get(*name)
                        .copied()
                        .ok_or_else(|| semantic(format!("unknown atom `{name}`")))
                })
                .collect::<Result<Vec<usize>, _>>()
        };

        if let Some(rest) = line.strip_prefix("atoms:") {
            if atoms.is_some() {
                return Err(syntax("duplicate atoms declaration".into()));
            }
            let names: Vec<String> = rest.split_whitespace().map(str::to_owned).collect();
            for (i, name) in names.iter().enumerate() {
                if atom_index.insert(name.clone(), i).is_some() {
                    return Err(semantic(format!("duplicate atom `{name}`")));
                }
            }
            atoms = Some(names);
        } else if let Some(rest) = line.strip_prefix("action:") {
            if atoms.is_none() {
                return Err(syntax("action declared before atoms".into()));
            }
            let tokens: Vec<&str> = rest.split_whitespace().collect();
            if tokens.is_empty() {
                return Err(syntax("action is missing a name".into()));
            }
            let name = tokens[0].to_owned();
            let find = |kw: &str| tokens.iter().position(|t| *t == kw);
            let (pre_at, add_at, del_at) = match (find("pre:"), find("add:"), find("del:")) {
                (Some(p), Some(a), Some(d)) if p < a && a < d => (p, a, d),
                _ => {
                    return Err(syntax(
                        "action requires `pre:`, `add:`, `del:` sections in order".into(),
                    ))
                }
            };
            if pre_at != 1 {
                return Err(syntax("unexpected tokens between name and `pre:`".into()));
            }
            let pre = resolve(&tokens[pre_at + 1..add_at], &atom_index)?;
            let add = resolve(&tokens[add_at + 1..del_at], &atom_index)?;
            let del = resolve(&tokens[del_at + 1..], &atom_index)?;
            if add.iter().any(|a| del.contains(a)) {
                return Err(semantic(format!(
                    "action `{name}` adds and deletes the same atom"
                )));
            }
            actions.push(StripsAction {
                name,
                pre,
                add,
                del,
            });
        } else if let Some(rest) = line.strip_prefix("init:") {
            if atoms.is_none() {
                return Err(syntax("init declared before atoms".into()));
            }
            if init.is_some() {
                return Err(syntax("duplicate init declaration".into()));
            }
            let names: Vec<&str> = rest.split_whitespace().collect();
            init = Some(resolve(&names, &atom_index)?);
        } else if let Some(rest) = line.strip_prefix("goal:") {
            if atoms.is_none() {
                return Err(syntax("goal declared before atoms".into()));
            }
            if goal.is_some() {
                return Err(syntax("duplicate goal declaration".into()));
            }
            let names: Vec<&str> = rest.split_whitespace().collect();
            goal = Some(resolve(&names, &atom_index)?);
        } else {
            return Err(syntax(format!("unrecognized line `{line}`")));
        }
    }

    let atoms = atoms.ok_or(StripsError::Syntax {
        line: 0,
        message: "missing atoms declaration".into(),
    })?;
    let mut init_mask = vec![false; atoms.len()];
    for i in init.unwrap_or_default() {
        init_mask[i] = true;
    }
    Ok(GroundedTask {
        atoms,
        actions,
        init: init_mask,
        goal: goal.unwrap_or_default(),
    })
}

/// Writes a task back in the text format `parse_task` accepts.
pub fn serialize_task(task: &GroundedTask) -> String {
    let mut out = String::new();
    let name = |i: &usize| task.atoms[*i].as_str();
    out.push_str("atoms:");
    for atom in &task.atoms {
        out.push(' ');
        out.push_str(atom);
    }
    out.push('\n');
    for action in &task.actions {
        out.push_str(&format!(
            "action: {} pre:{} add:{} del:{}\n",
            action.name,
            join(action.pre.iter().map(name)),
            join(action.add.iter().map(name)),
            join(action.del.iter().map(name)),
        ));
    }
    let init_atoms: Vec<usize> = (0..task.atoms.len()).filter(|&i| task.init[i]).collect();
    out.push_str(&format!("init:{}\n", join(init_atoms.iter().map(name))));
    out.push_str(&format!("goal:{}\n", join(task.goal.iter().map(name))));
    out
}

fn join<'a>(items: impl Iterator<Item = &'a str>) -> String {
    items.map(|s| format!(" {s}")).collect()
}

/// Splits a task with G goal atoms into G tasks of one goal atom each,
/// preserving atoms, actions, and init exactly. Goal order follows the
/// declaration order; an empty goal yields an empty list.
pub fn split_single_goal(task: &GroundedTask) -> Vec<GroundedTask> {
    task.goal
        .iter()
        .map(|&g| GroundedTask {
            goal: vec![g],
            ..task.clone()
        })
        .collect()
}

/// The task as a deterministic environment. Inapplicable actions return
/// `None` (planners skip them); rewards and termination come from wrapping
/// in `GoalTaskWrapper` via [`StripsEnv::goal_task`].
#[derive(Debug, Clone)]
pub struct StripsEnv {
    task: Arc<GroundedTask>,
}

impl StripsEnv {
    pub fn new(task: GroundedTask) -> Self {
        Self {
            task: Arc::new(task),
        }
    }

    pub fn task(&self) -> &GroundedTask {
        &self.task
    }

    pub fn goal_task(task: GroundedTask) -> GoalTaskWrapper<StripsEnv, StripsGoal> {
        let env = StripsEnv::new(task);
        let goal = StripsGoal {
            task: env.task.clone(),
        };
        GoalTaskWrapper::new(env, goal)
    }
}

#[derive(Debug, Clone)]
pub struct StripsGoal {
    task: Arc<GroundedTask>,
}

impl GoalPredicate<StripsState> for StripsGoal {
    fn is_goal(&self, state: &StripsState) -> bool {
        self.task.goal_satisfied(state)
    }
}

impl DeterministicEnv for StripsEnv {
    type State = StripsState;

    fn action_count(&self) -> usize {
        self.task.actions.len()
    }

    fn initial_state(&self) -> StripsState {
        self.task.init()
    }

    fn step(&self, state: &StripsState, action: usize) -> Option<Transition<StripsState>> {
        let act = &self.task.actions[action];
        if !act.pre.iter().all(|&i| state.0[i]) {
            return None;
        }
        let mut next = state.clone();
        for &i in &act.del {
            next.0[i] = false;
        }
        for &i in &act.add {
            next.0[i] = true;
        }
        Some(Transition {
            state: next,
            reward: 0.0,
        })
    }

    fn is_terminal(&self, _state: &StripsState) -> bool {
        false
    }
}

/// Each atom is one binary feature, in atom declaration order.
#[derive(Debug, Clone)]
pub struct StripsFeatures {
    schema: FeatureSchema,
}

impl StripsFeatures {
    pub fn new(task: &GroundedTask) -> Self {
        let schema = FeatureSchema::new(task.atoms.to_vec(), vec![2; task.atoms.len()])
            .expect("parser enforces unique atoms");
        Self { schema }
    }
}

impl FeatureMap<StripsState> for StripsFeatures {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn features(&self, state: &StripsState) -> FeatureVector {
        FeatureVector(state.0.iter().map(|&b| b as u32).collect())
    }
}

/// The corridor task in STRIPS form: atoms at_0..at_L plus has_key, move
/// actions in both directions, key pickup on arrival at at_L, goal
/// {at_0, has_key}.
pub fn corridor_task_text(length: u32) -> String {
    let mut out = String::new();
    out.push_str("# corridor walk-pick-return task\natoms:");
    for p in 0..=length {
        out.push_str(&format!(" at_{p}"));
    }
    out.push_str(" has_key\n");
    for p in 0..length {
        let q = p + 1;
        let pickup = if q == length { " has_key" } else { "" };
        out.push_str(&format!(
            "action: right_{p} pre: at_{p} add: at_{q}{pickup} del: at_{p}\n"
        ));
        out.push_str(&format!(
            "action: left_{q} pre: at_{q} add: at_{p} del: at_{q}\n"
        ));
    }
    out.push_str("init: at_0\n");
    out.push_str("goal: at_0 has_key\n");
    out
}
