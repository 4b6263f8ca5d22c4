//! Fine-tuning: optimizer loop, schedules, early stopping, the six strategy
//! presets, and ensemble training.

pub mod search;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{expand_training_split, AugmentPolicy, SynonymTable};
use crate::corpus::{Corpus, LabeledText, TraitVector};
use crate::error::{Error, Result};
use crate::model::{
    EncoderName, EncoderSpec, HeadSpec, RegressionModel, TrainedModel,
};
use crate::nn::adamw::{zero_grads, AdamW};
use crate::nn::scheduler::{lr_at, ScheduleKind};
use crate::nn::{Mat, Mode, Precision, TrainCtx};
use crate::seed::derive_seed;

pub use search::{
    search_hyperparameters, SearchOutcome, SearchSpace, TrialResult, DEFAULT_SEARCH_BUDGET,
};

/// Every knob of a single fine-tuning run. `dropout` is the encoder-side
/// rate; the head carries its own rate in [`HeadSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_decay: f64,
    pub dropout: f64,
    pub scheduler: ScheduleKind,
    pub warmup_fraction: f64,
    pub mixed_precision: bool,
    pub early_stop_patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 2e-5,
            batch_size: 16,
            epochs: 3,
            weight_decay: 0.01,
            dropout: 0.1,
            scheduler: ScheduleKind::LinearWarmupDecay,
            warmup_fraction: 0.1,
            mixed_precision: false,
            early_stop_patience: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".to_string()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".to_string()));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config(format!(
                "warmup_fraction must be in [0, 1], got {}",
                self.warmup_fraction
            )));
        }
        Ok(())
    }

    pub fn precision(&self) -> Precision {
        if self.mixed_precision {
            Precision::Mixed
        } else {
            Precision::Full
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StrategyId {
    S0,
    S1,
    S2,
    S3,
    S4,
    S5,
}

impl StrategyId {
    pub const ALL: [StrategyId; 6] = [
        StrategyId::S0,
        StrategyId::S1,
        StrategyId::S2,
        StrategyId::S3,
        StrategyId::S4,
        StrategyId::S5,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyId::S0 => "s0",
            StrategyId::S1 => "s1",
            StrategyId::S2 => "s2",
            StrategyId::S3 => "s3",
            StrategyId::S4 => "s4",
            StrategyId::S5 => "s5",
        }
    }
}

impl std::fmt::Display for StrategyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A fully resolved recipe: what to build, how to train it, and which extras
/// (search, augmentation, ensembling) are switched on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainPlan {
    pub strategy: StrategyId,
    pub encoder: EncoderSpec,
    pub head: HeadSpec,
    pub config: TrainConfig,
    pub search_enabled: bool,
    pub search_budget: usize,
    pub augment: Option<AugmentPolicy>,
    pub ensemble_size: usize,
}

impl TrainPlan {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.head.validate()?;
        self.config.validate()?;
        if self.search_enabled && self.search_budget == 0 {
            return Err(Error::Config(
                "search is enabled but the budget is zero".to_string(),
            ));
        }
        if self.ensemble_size == 0 {
            return Err(Error::Config("ensemble_size must be positive".to_string()));
        }
        if let Some(policy) = &self.augment {
            policy.validate()?;
        }
        Ok(())
    }
}

/// The six presets. S0 and S1 are plain fine-tuning baselines on different
/// encoders; S2 adds an mlp head and hyperparameter search; S3 runs S2 under
/// mixed precision; S4 is S3 with the head reduced back to linear; S5 is S3
/// plus synonym augmentation and a three-member ensemble.
pub fn strategy_config(id: StrategyId) -> TrainPlan {
    let base = TrainConfig::default();
    let plan = |encoder, head, search, mixed, augment, ensemble| TrainPlan {
        strategy: id,
        encoder: EncoderSpec::new(encoder),
        head,
        config: TrainConfig {
            mixed_precision: mixed,
            ..base.clone()
        },
        search_enabled: search,
        search_budget: if search { DEFAULT_SEARCH_BUDGET } else { 0 },
        augment,
        ensemble_size: ensemble,
    };
    match id {
        StrategyId::S0 => plan(
            EncoderName::BertBase,
            HeadSpec::linear(),
            false,
            false,
            None,
            1,
        ),
        StrategyId::S1 => plan(
            EncoderName::RobertaBase,
            HeadSpec::linear(),
            false,
            false,
            None,
            1,
        ),
        StrategyId::S2 => plan(
            EncoderName::RobertaBase,
            HeadSpec::mlp(),
            true,
            false,
            None,
            1,
        ),
        StrategyId::S3 => plan(
            EncoderName::RobertaBase,
            HeadSpec::mlp(),
            true,
            true,
            None,
            1,
        ),
        StrategyId::S4 => plan(
            EncoderName::RobertaBase,
            HeadSpec::linear(),
            true,
            true,
            None,
            1,
        ),
        StrategyId::S5 => plan(
            EncoderName::RobertaBase,
            HeadSpec::mlp(),
            true,
            true,
            Some(AugmentPolicy::default()),
            3,
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub eval_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberHistory {
    pub seed: u64,
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_eval_mse: f64,
    pub stopped_early: bool,
}

/// Tracks the best eval MSE seen so far and decides when patience runs out.
/// With patience 0 it never stops early and only records the best epoch.
struct EarlyStop {
    patience: usize,
    best_mse: f64,
    best_epoch: usize,
    since_improve: usize,
}

impl EarlyStop {
    fn new(patience: usize) -> Self {
        EarlyStop {
            patience,
            best_mse: f64::INFINITY,
            best_epoch: 0,
            since_improve: 0,
        }
    }

    /// Returns true when training should stop after this epoch.
    fn observe(&mut self, epoch: usize, eval_mse: f64) -> bool {
        if eval_mse < self.best_mse {
            self.best_mse = eval_mse;
            self.best_epoch = epoch;
            self.since_improve = 0;
            false
        } else {
            self.since_improve += 1;
            self.patience > 0 && self.since_improve >= self.patience
        }
    }
}

/// Mean squared error of clamped predictions against record labels,
/// averaged over records and traits.
pub fn prediction_mse(predictions: &[TraitVector], records: &[LabeledText]) -> f64 {
    assert_eq!(predictions.len(), records.len(), "paired inputs required");
    assert!(!records.is_empty(), "cannot average over zero records");
    let mut total = 0.0;
    for (pred, record) in predictions.iter().zip(records) {
        for (p, y) in pred.to_array().into_iter().zip(record.traits.to_array()) {
            total += (p - y) * (p - y);
        }
    }
    total / (records.len() * 5) as f64
}

/// Full-precision, dropout-free, clamped evaluation of one model.
pub fn eval_mse(model: &RegressionModel, records: &[LabeledText]) -> f64 {
    let predictions: Vec<TraitVector> =
        records.iter().map(|r| model.predict_one(&r.text)).collect();
    prediction_mse(&predictions, records)
}

/// Trains one model on `corpus.train`, evaluating on `corpus.eval` after
/// every epoch. Non-finite train loss or eval MSE aborts with a divergence
/// error naming the epoch. With patience > 0 the best-epoch weights are
/// restored before returning.
pub fn train_single(
    encoder: &EncoderSpec,
    head: &HeadSpec,
    config: &TrainConfig,
    corpus: &Corpus,
    seed: u64,
) -> Result<(RegressionModel, MemberHistory)> {
    config.validate()?;
    assert!(
        !corpus.train.is_empty() && !corpus.eval.is_empty(),
        "training needs non-empty train and eval splits"
    );
    let mut model = RegressionModel::build(encoder, head, seed)?;
    let mut data_rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, 0xDA7A));
    let precision = config.precision();
    let n = corpus.train.len();
    let batches_per_epoch = n.div_ceil(config.batch_size);
    let total_steps = config.epochs * batches_per_epoch;
    let mut optimizer = AdamW::new(config.weight_decay);
    let mut tracker = EarlyStop::new(config.early_stop_patience);
    let mut best_snapshot: Option<Vec<Mat>> = None;
    let mut history = Vec::with_capacity(config.epochs);
    let mut global_step = 0usize;
    let mut stopped_early = false;

    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut data_rng);
        let mut epoch_sq_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            zero_grads(&mut model.params_mut());
            let mut batch_sq_sum = 0.0;
            for &idx in batch {
                let record = &corpus.train[idx];
                let target = record.traits.to_array();
                let (y, cache) = {
                    let mut mode = Mode::Train(TrainCtx {
                        precision,
                        dropout: config.dropout,
                        rng: &mut data_rng,
                    });
                    model.forward_text(&record.text, &mut mode)
                };
                let mut dy = Mat::zeros((1, 5));
                let scale = 2.0 / (batch.len() * 5) as f64;
                for (j, t) in target.into_iter().enumerate() {
                    let diff = y[[0, j]] - t;
                    batch_sq_sum += diff * diff;
                    dy[[0, j]] = scale * diff;
                }
                precision.round(&mut dy);
                model.backward_text(&cache, &dy, precision);
            }
            if !batch_sq_sum.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            epoch_sq_sum += batch_sq_sum;
            let lr = lr_at(
                config.scheduler,
                config.learning_rate,
                config.warmup_fraction,
                global_step,
                total_steps,
            );
            optimizer.step(&mut model.params_mut(), lr);
            global_step += 1;
        }
        let train_loss = epoch_sq_sum / (n * 5) as f64;
        let epoch_eval_mse = eval_mse(&model, &corpus.eval);
        if !epoch_eval_mse.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        history.push(EpochStats {
            epoch,
            train_loss,
            eval_mse: epoch_eval_mse,
        });
        let improved = epoch_eval_mse < tracker.best_mse;
        let stop = tracker.observe(epoch, epoch_eval_mse);
        if improved && config.early_stop_patience > 0 {
            best_snapshot = Some(model.snapshot());
        }
        if stop {
            stopped_early = true;
            break;
        }
    }

    if config.early_stop_patience > 0 && tracker.best_epoch < history.len() {
        if let Some(snapshot) = &best_snapshot {
            model.restore(snapshot);
        }
    }
    Ok((
        model,
        MemberHistory {
            seed,
            epochs: history,
            best_epoch: tracker.best_epoch,
            best_eval_mse: tracker.best_mse,
            stopped_early,
        },
    ))
}

/// Trains one member per seed, sequentially. Seeds must be distinct so the
/// members differ in initialization and data order.
pub fn train_ensemble(
    encoder: &EncoderSpec,
    head: &HeadSpec,
    config: &TrainConfig,
    corpus: &Corpus,
    seeds: &[u64],
) -> Result<(Vec<RegressionModel>, Vec<MemberHistory>)> {
    if seeds.is_empty() {
        return Err(Error::Argument("ensemble needs at least one seed".to_string()));
    }
    let unique: std::collections::HashSet<u64> = seeds.iter().copied().collect();
    if unique.len() != seeds.len() {
        return Err(Error::Argument(format!(
            "ensemble seeds must be distinct, got {seeds:?}"
        )));
    }
    let mut members = Vec::with_capacity(seeds.len());
    let mut histories = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let (model, history) = train_single(encoder, head, config, corpus, seed)?;
        members.push(model);
        histories.push(history);
    }
    Ok((members, histories))
}

pub struct StrategyOutcome {
    pub plan: TrainPlan,
    pub config_used: TrainConfig,
    pub trials: Option<Vec<TrialResult>>,
    pub model: TrainedModel,
    pub histories: Vec<MemberHistory>,
}

/// Runs a full strategy: optional training-split augmentation, optional
/// hyperparameter search, then single or ensemble training. All randomness
/// flows from `seed` through fixed derivation streams.
pub fn run_strategy(plan: &TrainPlan, corpus: &Corpus, seed: u64) -> Result<StrategyOutcome> {
    plan.validate()?;
    let working;
    let corpus = if let Some(policy) = &plan.augment {
        let table = SynonymTable::builtin();
        working = expand_training_split(corpus, &table, policy, derive_seed(seed, 0xA06))?;
        &working
    } else {
        corpus
    };

    let (config_used, trials) = if plan.search_enabled {
        let outcome = search_hyperparameters(
            &plan.encoder,
            &plan.head,
            &plan.config,
            &SearchSpace::default(),
            plan.search_budget,
            corpus,
            derive_seed(seed, 0x5EA6C4),
        )?;
        let best = outcome.trials[outcome.best_index].config.clone();
        (best, Some(outcome.trials))
    } else {
        (plan.config.clone(), None)
    };

    let (model, histories) = if plan.ensemble_size >= 2 {
        let seeds: Vec<u64> = (0..plan.ensemble_size)
            .map(|i| derive_seed(seed, 0x3E5E0 + i as u64))
            .collect();
        let (members, histories) =
            train_ensemble(&plan.encoder, &plan.head, &config_used, corpus, &seeds)?;
        (TrainedModel::Ensemble(members), histories)
    } else {
        let (member, history) = train_single(
            &plan.encoder,
            &plan.head,
            &config_used,
            corpus,
            derive_seed(seed, 0x1),
        )?;
        (TrainedModel::Single(Box::new(member)), vec![history])
    };

    Ok(StrategyOutcome {
        plan: plan.clone(),
        config_used,
        trials,
        model,
        histories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::make_synthetic_corpus;
    use crate::model::HeadKind;

    fn tiny_plan_parts() -> (EncoderSpec, HeadSpec) {
        (EncoderSpec::new(EncoderName::TinyTest), HeadSpec::linear())
    }

    fn quick_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 4,
            epochs,
            weight_decay: 0.0,
            dropout: 0.0,
            scheduler: ScheduleKind::Constant,
            warmup_fraction: 0.0,
            mixed_precision: false,
            early_stop_patience: 0,
        }
    }

    #[test]
    fn defaults_match_the_documented_baseline() {
        let c = TrainConfig::default();
        assert_eq!(c.learning_rate, 2e-5);
        assert_eq!(c.batch_size, 16);
        assert_eq!(c.epochs, 3);
        assert_eq!(c.weight_decay, 0.01);
        assert_eq!(c.dropout, 0.1);
        assert_eq!(c.scheduler, ScheduleKind::LinearWarmupDecay);
        assert_eq!(c.warmup_fraction, 0.1);
        assert!(!c.mixed_precision);
        assert_eq!(c.early_stop_patience, 0);
    }

    #[test]
    fn strategy_table_wires_the_six_presets() {
        for id in StrategyId::ALL {
            let plan = strategy_config(id);
            assert_eq!(plan.strategy, id);
            plan.validate().unwrap();
        }
        let s0 = strategy_config(StrategyId::S0);
        assert_eq!(s0.encoder.name, EncoderName::BertBase);
        assert_eq!(s0.head.kind, HeadKind::Linear);
        assert!(!s0.search_enabled && !s0.config.mixed_precision);

        let s1 = strategy_config(StrategyId::S1);
        assert_eq!(s1.encoder.name, EncoderName::RobertaBase);
        assert!(!s1.search_enabled);

        let s2 = strategy_config(StrategyId::S2);
        assert_eq!(s2.head.kind, HeadKind::Mlp);
        assert!(s2.search_enabled && !s2.config.mixed_precision);
        assert_eq!(s2.search_budget, DEFAULT_SEARCH_BUDGET);

        let s3 = strategy_config(StrategyId::S3);
        assert!(s3.search_enabled && s3.config.mixed_precision);
        assert_eq!(s3.head.kind, HeadKind::Mlp);

        let s4 = strategy_config(StrategyId::S4);
        assert_eq!(s4.head.kind, HeadKind::Linear);
        assert!(s4.search_enabled && s4.config.mixed_precision);

        let s5 = strategy_config(StrategyId::S5);
        assert!(s5.augment.is_some());
        assert_eq!(s5.ensemble_size, 3);
        assert!(s5.search_enabled && s5.config.mixed_precision);
    }

    #[test]
    fn early_stop_follows_the_patience_contract() {
        // Eval MSEs 0.3, 0.2, 0.25, 0.26 with patience 2: stop after the
        // fourth epoch, best is the second.
        let mut tracker = EarlyStop::new(2);
        assert!(!tracker.observe(1, 0.3));
        assert!(!tracker.observe(2, 0.2));
        assert!(!tracker.observe(3, 0.25));
        assert!(tracker.observe(4, 0.26));
        assert_eq!(tracker.best_epoch, 2);
        assert!((tracker.best_mse - 0.2).abs() < 1e-15);
    }

    #[test]
    fn early_stop_disabled_when_patience_is_zero() {
        let mut tracker = EarlyStop::new(0);
        for epoch in 1..=10 {
            assert!(!tracker.observe(epoch, 0.5 + epoch as f64));
        }
        assert_eq!(tracker.best_epoch, 1);
    }

    #[test]
    fn training_is_deterministic_in_the_seed() {
        let corpus = make_synthetic_corpus(9, (16, 6, 6));
        let (enc, head) = tiny_plan_parts();
        let config = quick_config(3);
        let (m1, h1) = train_single(&enc, &head, &config, &corpus, 42).unwrap();
        let (m2, h2) = train_single(&enc, &head, &config, &corpus, 42).unwrap();
        let (_, h3) = train_single(&enc, &head, &config, &corpus, 43).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(m1.param_checksum(), m2.param_checksum());
        assert_ne!(h1.epochs, h3.epochs);
    }

    #[test]
    fn history_records_every_epoch_and_the_best_one() {
        let corpus = make_synthetic_corpus(3, (12, 5, 5));
        let (enc, head) = tiny_plan_parts();
        let (_, history) = train_single(&enc, &head, &quick_config(4), &corpus, 7).unwrap();
        assert_eq!(history.epochs.len(), 4);
        assert!(!history.stopped_early);
        for (i, stats) in history.epochs.iter().enumerate() {
            assert_eq!(stats.epoch, i + 1);
            assert!(stats.train_loss.is_finite());
            assert!(stats.eval_mse.is_finite());
        }
        let min = history
            .epochs
            .iter()
            .map(|e| e.eval_mse)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(history.best_eval_mse, min);
    }

    #[test]
    fn patience_restores_the_best_epoch_weights() {
        // A learning rate high enough to bounce around guarantees some
        // non-improving epochs on a tiny corpus.
        let corpus = make_synthetic_corpus(5, (10, 4, 4));
        let (enc, head) = tiny_plan_parts();
        let config = TrainConfig {
            learning_rate: 5e-2,
            epochs: 12,
            early_stop_patience: 2,
            ..quick_config(12)
        };
        let (model, history) = train_single(&enc, &head, &config, &corpus, 11).unwrap();
        let restored_mse = eval_mse(&model, &corpus.eval);
        assert!(
            (restored_mse - history.best_eval_mse).abs() < 1e-9,
            "restored model should score the best epoch's eval MSE, got {restored_mse} vs {}",
            history.best_eval_mse
        );
        if history.stopped_early {
            assert!(history.epochs.len() < config.epochs);
        }
    }

    #[test]
    fn runaway_learning_rate_reports_divergence() {
        let corpus = make_synthetic_corpus(2, (8, 4, 4));
        let (enc, head) = tiny_plan_parts();
        let config = TrainConfig {
            learning_rate: 1e154,
            ..quick_config(3)
        };
        match train_single(&enc, &head, &config, &corpus, 1) {
            Err(Error::Divergence { epoch }) => assert!((1..=3).contains(&epoch)),
            other => panic!("expected divergence, got {:?}", other.map(|(_, h)| h)),
        }
    }

    #[test]
    fn mixed_precision_tracks_full_precision_closely() {
        let corpus = make_synthetic_corpus(13, (8, 4, 4));
        let (enc, head) = tiny_plan_parts();
        let full = quick_config(20);
        let mixed = TrainConfig {
            mixed_precision: true,
            ..full.clone()
        };
        let (_, h_full) = train_single(&enc, &head, &full, &corpus, 21).unwrap();
        let (_, h_mixed) = train_single(&enc, &head, &mixed, &corpus, 21).unwrap();
        let a = h_full.epochs.last().unwrap().eval_mse;
        let b = h_mixed.epochs.last().unwrap().eval_mse;
        assert!(
            (a - b).abs() <= 0.02,
            "full {a} vs mixed {b} drifted more than 0.02"
        );
    }

    #[test]
    fn ensemble_training_rejects_duplicate_seeds() {
        let corpus = make_synthetic_corpus(2, (8, 4, 4));
        let (enc, head) = tiny_plan_parts();
        let err = train_ensemble(&enc, &head, &quick_config(1), &corpus, &[5, 5]).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }

    #[test]
    fn run_strategy_trains_an_ensemble_when_asked() {
        let corpus = make_synthetic_corpus(17, (10, 4, 4));
        let mut plan = strategy_config(StrategyId::S5);
        plan.encoder = EncoderSpec::new(EncoderName::TinyTest);
        plan.search_enabled = false;
        plan.search_budget = 0;
        plan.ensemble_size = 2;
        plan.config = quick_config(2);
        let outcome = run_strategy(&plan, &corpus, 3).unwrap();
        assert_eq!(outcome.model.members().len(), 2);
        assert_eq!(outcome.histories.len(), 2);
        assert!(outcome.trials.is_none());
        let seeds = outcome.model.seeds();
        assert_ne!(seeds[0], seeds[1]);
    }
}
