//! Fine-tunes pre-trained text encoders into five-dimensional continuous
//! Big Five personality regressors and evaluates them with a continuous
//! metrics suite plus binarized accuracy/F1.
//!
//! The pipeline: [`corpus`] ingests or synthesizes labeled text, [`model`]
//! assembles an encoder + regression head, [`train`] fine-tunes it under one
//! of six strategy presets (optionally with hyperparameter search, synonym
//! [`augment`]ation, and ensembling), [`metrics`] scores the result, and
//! [`cli`] ties it together around a run-directory registry ([`runs`]).
//!
//! All computation is pure Rust on CPU. The `tiny-test` encoder trains in
//! seconds and backs the test suite; `bert-base` and `roberta-base` load
//! pretrained checkpoints from the cache directory (`TRAIT_TUNER_CACHE`).

pub mod augment;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod runs;
pub mod seed;
pub mod train;

pub use corpus::{Corpus, LabeledText, TraitName, TraitVector};
pub use error::{Error, Result};
pub use metrics::{evaluate, EvaluationReport};
pub use model::{load_bundle, save_bundle, EncoderName, EncoderSpec, HeadKind, HeadSpec};
pub use train::{run_strategy, strategy_config, StrategyId, TrainConfig, TrainPlan};
