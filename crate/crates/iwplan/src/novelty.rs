//! Feature schemas, feature vectors, and the two novelty mechanisms used by
//! width-based search: visited-tuple tables for breadth-first IW and
//! depth-indexed tables for rollout-style IW.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NoveltyError {
    #[error("feature vector has {got} features, schema expects {expected}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("width {width} out of range for {features} features")]
    WidthOutOfRange { width: usize, features: usize },
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("schema has {names} names but {domains} domain sizes")]
    LengthMismatch { names: usize, domains: usize },
    #[error("feature domain sizes must be at least 1")]
    EmptyDomain,
}

/// Ordered feature identifiers with per-feature domain cardinalities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    names: Vec<String>,
    domain_sizes: Vec<u32>,
}

impl FeatureSchema {
    pub fn new(names: Vec<String>, domain_sizes: Vec<u32>) -> Result<Self, NoveltyError> {
        if names.len() != domain_sizes.len() {
            return Err(NoveltyError::LengthMismatch {
                names: names.len(),
                domains: domain_sizes.len(),
            });
        }
        if domain_sizes.contains(&0) {
            return Err(NoveltyError::EmptyDomain);
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(NoveltyError::DuplicateFeature(name.clone()));
            }
        }
        Ok(Self {
            names,
            domain_sizes,
        })
    }

    /// Schema with `count` features all sharing one domain size, named `prefix0..`.
    pub fn uniform(prefix: &str, count: usize, domain_size: u32) -> Self {
        let names = (0..count).map(|i| format!("{prefix}{i}")).collect();
        Self::new(names, vec![domain_size; count]).expect("generated names are unique")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn domain_sizes(&self) -> &[u32] {
        &self.domain_sizes
    }

    /// Largest domain size across features, the `d` fed to width math.
    pub fn max_domain(&self) -> u32 {
        self.domain_sizes.iter().copied().max().unwrap_or(0)
    }

    pub fn validate(&self, fv: &FeatureVector) -> Result<(), NoveltyError> {
        if fv.len() != self.len() {
            return Err(NoveltyError::SchemaMismatch {
                expected: self.len(),
                got: fv.len(),
            });
        }
        Ok(())
    }
}

/// One state's feature values, ordered per schema.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<u32>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[u32] {
        &self.0
    }

    /// The (feature index, value) pairs of this vector, the generalized
    /// "atoms" of a state.
    pub fn atoms(&self) -> impl Iterator<Item = (u16, u32)> + '_ {
        self.0.iter().enumerate().map(|(i, &v)| (i as u16, v))
    }
}

impl From<Vec<u32>> for FeatureVector {
    fn from(values: Vec<u32>) -> Self {
        FeatureVector(values)
    }
}

/// A size-w combination of (feature index, value) pairs with strictly
/// increasing indices. This is the unit recorded by novelty tables and the
/// key of rollout ownership maps.
pub type FeatureTuple = Vec<(u16, u32)>;

/// Iterates all strictly-increasing index combinations of size `width` over
/// `fv`, paired with their values, in lexicographic index order.
pub fn enumerate_tuples(
    fv: &FeatureVector,
    width: usize,
) -> Result<TupleIter<'_>, NoveltyError> {
    if width == 0 || width > fv.len() {
        return Err(NoveltyError::WidthOutOfRange {
            width,
            features: fv.len(),
        });
    }
    Ok(TupleIter {
        values: fv.values(),
        indices: (0..width).collect(),
        width,
        done: false,
    })
}

pub struct TupleIter<'a> {
    values: &'a [u32],
    indices: Vec<usize>,
    width: usize,
    done: bool,
}

impl Iterator for TupleIter<'_> {
    type Item = FeatureTuple;

    fn next(&mut self) -> Option<FeatureTuple> {
        if self.done {
            return None;
        }
        let tuple = self
            .indices
            .iter()
            .map(|&i| (i as u16, self.values[i]))
            .collect();
        // advance to the next combination in lexicographic order
        let n = self.values.len();
        let w = self.width;
        let mut pos = w;
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            if self.indices[pos] < n - (w - pos) {
                self.indices[pos] += 1;
                for j in pos + 1..w {
                    self.indices[j] = self.indices[j - 1] + 1;
                }
                break;
            }
        }
        Some(tuple)
    }
}

/// Width-w novelty table: remembers every size-w tuple of feature values
/// observed so far. A state is novel iff it contributes an unseen tuple.
#[derive(Debug, Clone)]
pub struct NoveltyTable {
    width: usize,
    num_features: usize,
    /// Every checked vector's tuples are recorded, novel or not, when true.
    /// The resulting table contents are identical either way (a non-novel
    /// vector has no unseen tuples); the flag exists because IW variants
    /// differ on whether pruned states mark the table.
    record_pruned: bool,
    store: TupleStore,
}

#[derive(Debug, Clone)]
enum TupleStore {
    /// w=1 dominates practical use; store one value set per feature.
    Width1(Vec<HashSet<u32>>),
    General(HashSet<FeatureTuple>),
}

impl NoveltyTable {
    pub fn new(width: usize, num_features: usize) -> Result<Self, NoveltyError> {
        Self::with_options(width, num_features, true)
    }

    pub fn with_options(
        width: usize,
        num_features: usize,
        record_pruned: bool,
    ) -> Result<Self, NoveltyError> {
        if width == 0 || width > num_features {
            return Err(NoveltyError::WidthOutOfRange {
                width,
                features: num_features,
            });
        }
        let store = if width == 1 {
            TupleStore::Width1(vec![HashSet::new(); num_features])
        } else {
            TupleStore::General(HashSet::new())
        };
        Ok(Self {
            width,
            num_features,
            record_pruned,
            store,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    /// Tests `fv` for novelty and records its tuples. Returns whether the
    /// vector was novel together with the tuples that were previously unseen.
    pub fn check_and_update(
        &mut self,
        fv: &FeatureVector,
    ) -> Result<(bool, Vec<FeatureTuple>), NoveltyError> {
        if fv.len() != self.num_features {
            return Err(NoveltyError::SchemaMismatch {
                expected: self.num_features,
                got: fv.len(),
            });
        }
        let mut new_tuples = Vec::new();
        match &mut self.store {
            TupleStore::Width1(per_feature) => {
                for (i, &v) in fv.values().iter().enumerate() {
                    if !per_feature[i].contains(&v) {
                        new_tuples.push(vec![(i as u16, v)]);
                    }
                }
                let novel = !new_tuples.is_empty();
                if self.record_pruned || novel {
                    for (i, &v) in fv.values().iter().enumerate() {
                        per_feature[i].insert(v);
                    }
                }
                Ok((novel, new_tuples))
            }
            TupleStore::General(seen) => {
                for tuple in enumerate_tuples(fv, self.width)? {
                    if !seen.contains(&tuple) {
                        new_tuples.push(tuple);
                    }
                }
                let novel = !new_tuples.is_empty();
                if self.record_pruned || novel {
                    for tuple in new_tuples.iter().cloned() {
                        seen.insert(tuple);
                    }
                }
                Ok((novel, new_tuples))
            }
        }
    }

    /// Novelty test without recording anything.
    pub fn peek(&self, fv: &FeatureVector) -> Result<bool, NoveltyError> {
        if fv.len() != self.num_features {
            return Err(NoveltyError::SchemaMismatch {
                expected: self.num_features,
                got: fv.len(),
            });
        }
        match &self.store {
            TupleStore::Width1(per_feature) => Ok(fv
                .values()
                .iter()
                .enumerate()
                .any(|(i, v)| !per_feature[i].contains(v))),
            TupleStore::General(seen) => {
                for tuple in enumerate_tuples(fv, self.width)? {
                    if !seen.contains(&tuple) {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }
}

/// Depth-indexed novelty table for rollout IW: a tuple counts as novel when
/// it has only been observed at strictly greater depth.
#[derive(Debug, Clone, Default)]
pub struct DepthNoveltyTable {
    width: usize,
    num_features: usize,
    best_depth: HashMap<FeatureTuple, u32>,
}

impl DepthNoveltyTable {
    pub fn new(width: usize, num_features: usize) -> Result<Self, NoveltyError> {
        if width == 0 || width > num_features {
            return Err(NoveltyError::WidthOutOfRange {
                width,
                features: num_features,
            });
        }
        Ok(Self {
            width,
            num_features,
            best_depth: HashMap::new(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Returns the tuples of `fv` whose recorded best depth is absent or
    /// strictly greater than `depth`, then lowers recorded depths to
    /// `min(old, depth)` for every tuple of `fv`. The state is novel iff the
    /// returned set is nonempty.
    pub fn check_and_update_depth(
        &mut self,
        fv: &FeatureVector,
        depth: u32,
    ) -> Result<Vec<FeatureTuple>, NoveltyError> {
        if fv.len() != self.num_features {
            return Err(NoveltyError::SchemaMismatch {
                expected: self.num_features,
                got: fv.len(),
            });
        }
        let mut novel_tuples = Vec::new();
        for tuple in enumerate_tuples(fv, self.width)? {
            match self.best_depth.get_mut(&tuple) {
                Some(best) => {
                    if *best > depth {
                        *best = depth;
                        novel_tuples.push(tuple);
                    }
                }
                None => {
                    self.best_depth.insert(tuple.clone(), depth);
                    novel_tuples.push(tuple);
                }
            }
        }
        Ok(novel_tuples)
    }

    pub fn recorded_depth(&self, tuple: &FeatureTuple) -> Option<u32> {
        self.best_depth.get(tuple).copied()
    }
}
