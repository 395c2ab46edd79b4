//! Policy/value estimators trained from replanning targets. The tabular
//! estimator keeps independent logits and a value per feature vector and
//! takes plain gradient steps on a cross-entropy + squared-error + L2
//! objective; anything with the same interface (e.g. a function
//! approximator) can be dropped in through the `PolicyEstimator` trait.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::novelty::FeatureVector;
use crate::search::ActionSelector;

use super::ActionDistribution;

/// Components of one training update's loss, evaluated at the parameters
/// *before* the gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorLoss {
    /// Cross-entropy between the target policy and the predicted policy.
    pub cross_entropy: f64,
    /// Squared error between the predicted value and the target return.
    pub value: f64,
    /// L2 penalty over the parameters behind this prediction.
    pub regularizer: f64,
}

impl EstimatorLoss {
    /// Sum of all components.
    pub fn total(&self) -> f64 {
        self.cross_entropy + self.value + self.regularizer
    }
}

/// A learned mapping from observation features to an action policy and a
/// state-value estimate.
pub trait PolicyEstimator {
    /// Number of actions in the policy head.
    fn action_count(&self) -> usize;

    /// Predicted policy and value for a feature vector. Never-seen inputs
    /// predict the uniform policy and value zero.
    fn predict(&self, features: &FeatureVector) -> (ActionDistribution, f64);

    /// One gradient step toward the target policy and return, reporting the
    /// loss at the pre-step parameters.
    fn update(
        &mut self,
        features: &FeatureVector,
        target_policy: &ActionDistribution,
        target_return: f64,
    ) -> EstimatorLoss;
}

#[derive(Debug, Clone)]
struct TabularEntry {
    logits: Vec<f64>,
    value: f64,
}

/// One softmax policy head and one value per distinct feature vector,
/// trained by gradient descent on cross-entropy (policy), squared error
/// (value), and an L2 penalty over the entry's own parameters.
#[derive(Debug, Clone)]
pub struct TabularEstimator {
    actions: usize,
    learning_rate: f64,
    l2: f64,
    params: HashMap<FeatureVector, TabularEntry>,
}

impl TabularEstimator {
    /// An empty table with the given optimizer settings.
    pub fn new(actions: usize, learning_rate: f64, l2: f64) -> Self {
        assert!(actions > 0, "the policy head needs at least one action");
        assert!(learning_rate > 0.0, "the learning rate must be positive");
        assert!(l2 >= 0.0, "the L2 weight must be non-negative");
        TabularEstimator {
            actions,
            learning_rate,
            l2,
            params: HashMap::new(),
        }
    }

    /// The default optimizer settings: learning rate 0.1, L2 weight 0.001.
    pub fn with_defaults(actions: usize) -> Self {
        TabularEstimator::new(actions, 0.1, 0.001)
    }

    /// Number of distinct feature vectors seen in training.
    pub fn entries(&self) -> usize {
        self.params.len()
    }

    fn policy_of(&self, entry: &TabularEntry) -> ActionDistribution {
        let max = entry.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = entry.logits.iter().map(|l| (l - max).exp()).collect();
        ActionDistribution::from_weights(&weights)
    }
}

impl PolicyEstimator for TabularEstimator {
    fn action_count(&self) -> usize {
        self.actions
    }

    fn predict(&self, features: &FeatureVector) -> (ActionDistribution, f64) {
        match self.params.get(features) {
            Some(entry) => (self.policy_of(entry), entry.value),
            None => (ActionDistribution::uniform(self.actions), 0.0),
        }
    }

    fn update(
        &mut self,
        features: &FeatureVector,
        target_policy: &ActionDistribution,
        target_return: f64,
    ) -> EstimatorLoss {
        assert_eq!(target_policy.len(), self.actions, "target policy arity mismatch");
        let (learning_rate, l2, actions) = (self.learning_rate, self.l2, self.actions);
        let entry = self
            .params
            .entry(features.clone())
            .or_insert_with(|| TabularEntry {
                logits: vec![0.0; actions],
                value: 0.0,
            });

        let max = entry.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = entry.logits.iter().map(|l| (l - max).exp()).collect();
        let norm: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / norm).collect();

        let cross_entropy: f64 = target_policy
            .probs()
            .iter()
            .zip(&probs)
            .map(|(t, p)| if *t > 0.0 { -t * p.ln() } else { 0.0 })
            .sum();
        let value_error = entry.value - target_return;
        let squared: f64 = entry.logits.iter().map(|l| l * l).sum::<f64>() + entry.value * entry.value;
        let loss = EstimatorLoss {
            cross_entropy,
            value: value_error * value_error,
            regularizer: l2 * squared,
        };

        for (a, logit) in entry.logits.iter_mut().enumerate() {
            let gradient = probs[a] - target_policy.probs()[a] + 2.0 * l2 * *logit;
            *logit -= learning_rate * gradient;
        }
        entry.value -= learning_rate * (2.0 * value_error + 2.0 * l2 * entry.value);
        loss
    }
}

/// Rollout action selector that samples from an estimator's policy
/// restricted to the untried actions, falling back to a uniform choice when
/// the policy places no mass on any of them.
pub struct PolicySelector<'a, P: PolicyEstimator> {
    estimator: &'a P,
}

impl<'a, P: PolicyEstimator> PolicySelector<'a, P> {
    pub fn new(estimator: &'a P) -> Self {
        PolicySelector { estimator }
    }
}

impl<S, P: PolicyEstimator> ActionSelector<S> for PolicySelector<'_, P> {
    fn choose(
        &mut self,
        _state: &S,
        features: &FeatureVector,
        untried: &[u16],
        rng: &mut ChaCha8Rng,
    ) -> u16 {
        let (policy, _) = self.estimator.predict(features);
        let weights: Vec<f64> = untried
            .iter()
            .map(|&a| policy.probs().get(a as usize).copied().unwrap_or(0.0))
            .collect();
        if weights.iter().sum::<f64>() > 0.0 {
            let dist = ActionDistribution::from_weights(&weights);
            untried[dist.sample(rng)]
        } else {
            untried[rng.gen_range(0..untried.len())]
        }
    }
}
