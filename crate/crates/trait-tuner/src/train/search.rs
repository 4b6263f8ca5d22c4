//! Random hyperparameter search: independent draws from a fixed space,
//! scored by best-epoch eval MSE.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::model::{EncoderSpec, HeadSpec};
use crate::seed::derive_seed;
use crate::train::{train_single, TrainConfig};

pub const DEFAULT_SEARCH_BUDGET: usize = 20;

/// Sampling ranges. Learning rate and weight decay are drawn log-uniformly,
/// dropout uniformly; batch size and epochs are categorical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub learning_rate: (f64, f64),
    pub batch_sizes: Vec<usize>,
    pub dropout: (f64, f64),
    pub weight_decay: (f64, f64),
    pub epochs: Vec<usize>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            learning_rate: (1e-5, 5e-4),
            batch_sizes: vec![8, 16, 32],
            dropout: (0.0, 0.3),
            weight_decay: (1e-4, 1e-1),
            epochs: vec![2, 3, 4, 5],
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let log_range = |name: &str, (lo, hi): (f64, f64)| {
            if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi) {
                return Err(Error::Config(format!(
                    "{name} range ({lo}, {hi}) must satisfy 0 < lo <= hi"
                )));
            }
            Ok(())
        };
        log_range("learning_rate", self.learning_rate)?;
        log_range("weight_decay", self.weight_decay)?;
        let (lo, hi) = self.dropout;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi && hi < 1.0) {
            return Err(Error::Config(format!(
                "dropout range ({lo}, {hi}) must lie within [0, 1)"
            )));
        }
        if self.batch_sizes.is_empty() || self.batch_sizes.contains(&0) {
            return Err(Error::Config("batch_sizes must be non-empty and positive".to_string()));
        }
        if self.epochs.is_empty() || self.epochs.contains(&0) {
            return Err(Error::Config("epochs must be non-empty and positive".to_string()));
        }
        Ok(())
    }

    /// Draws one configuration. Fields outside the space (scheduler, warmup,
    /// precision, patience) are inherited from `base`. Draw order is fixed:
    /// learning rate, batch size, dropout, weight decay, epochs.
    pub fn sample(&self, base: &TrainConfig, rng: &mut ChaCha20Rng) -> TrainConfig {
        let log_uniform = |(lo, hi): (f64, f64), rng: &mut ChaCha20Rng| {
            if lo == hi {
                return lo;
            }
            (rng.random_range(lo.ln()..hi.ln())).exp()
        };
        let learning_rate = log_uniform(self.learning_rate, rng);
        let batch_size = self.batch_sizes[rng.random_range(0..self.batch_sizes.len())];
        let dropout = if self.dropout.0 == self.dropout.1 {
            self.dropout.0
        } else {
            rng.random_range(self.dropout.0..self.dropout.1)
        };
        let weight_decay = log_uniform(self.weight_decay, rng);
        let epochs = self.epochs[rng.random_range(0..self.epochs.len())];
        TrainConfig {
            learning_rate,
            batch_size,
            epochs,
            weight_decay,
            dropout,
            ..base.clone()
        }
    }

    pub fn contains(&self, config: &TrainConfig) -> bool {
        let (lr_lo, lr_hi) = self.learning_rate;
        let (dr_lo, dr_hi) = self.dropout;
        let (wd_lo, wd_hi) = self.weight_decay;
        (lr_lo..=lr_hi).contains(&config.learning_rate)
            && self.batch_sizes.contains(&config.batch_size)
            && (dr_lo..=dr_hi).contains(&config.dropout)
            && (wd_lo..=wd_hi).contains(&config.weight_decay)
            && self.epochs.contains(&config.epochs)
    }
}

/// One completed trial. `objective` is the best-epoch eval MSE and is always
/// finite and non-negative; diverged trials never become `TrialResult`s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub config: TrainConfig,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best_index: usize,
    pub trials: Vec<TrialResult>,
}

/// Index of the strictly smallest objective; ties keep the earliest trial.
pub fn select_best(trials: &[TrialResult]) -> usize {
    assert!(!trials.is_empty(), "cannot select from zero trials");
    let mut best = 0;
    for (i, t) in trials.iter().enumerate().skip(1) {
        if t.objective < trials[best].objective {
            best = i;
        }
    }
    best
}

/// Runs `budget` independent trials. Each trial samples a configuration and
/// trains a model from scratch with its own derived seed. Diverged trials
/// are logged and skipped; if every trial diverges the search fails with the
/// collected log. Other training errors abort immediately.
pub fn search_hyperparameters(
    encoder: &EncoderSpec,
    head: &HeadSpec,
    base: &TrainConfig,
    space: &SearchSpace,
    budget: usize,
    corpus: &Corpus,
    seed: u64,
) -> Result<SearchOutcome> {
    if budget == 0 {
        return Err(Error::Argument("search budget must be at least 1".to_string()));
    }
    space.validate()?;
    let mut trials = Vec::with_capacity(budget);
    let mut log = Vec::new();
    for trial in 0..budget {
        let mut sample_rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, 0x5A00 + trial as u64));
        let config = space.sample(base, &mut sample_rng);
        let train_seed = derive_seed(seed, 0x7A00 + trial as u64);
        match train_single(encoder, head, &config, corpus, train_seed) {
            Ok((_, history)) => {
                let objective = history.best_eval_mse;
                debug_assert!(objective.is_finite() && objective >= 0.0);
                trials.push(TrialResult {
                    trial,
                    seed: train_seed,
                    config,
                    objective,
                });
            }
            Err(Error::Divergence { epoch }) => {
                log.push(format!(
                    "trial {trial}: diverged at epoch {epoch} (lr {:.3e}, batch {}, epochs {})",
                    config.learning_rate, config.batch_size, config.epochs
                ));
            }
            Err(other) => return Err(other),
        }
    }
    if trials.is_empty() {
        return Err(Error::SearchFailed {
            attempted: budget,
            log,
        });
    }
    let best_index = select_best(&trials);
    Ok(SearchOutcome { best_index, trials })
}
