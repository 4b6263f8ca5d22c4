//! Model assembly: the encoder registry (tiny-test plus pretrained
//! checkpoints), regression heads, prediction with [0,1] clamping, ensemble
//! aggregation, and persistence of trained bundles.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{NormalizationStats, TraitVector};
use crate::error::{Error, Result};
use crate::metrics::BinarizationRule;
use crate::nn::encoder::{EncCache, Encoder, EncoderConfig};
use crate::nn::layers::{dropout_backward, dropout_forward, gelu, gelu_grad, DropoutCache, Linear};
use crate::nn::tokenizer::HashTokenizer;
use crate::nn::{Mat, Mode, Param, Precision};
use crate::seed::derive_seed;

pub const OUTPUT_DIM: usize = 5;
pub const DEFAULT_MAX_SEQUENCE_LENGTH: usize = 384;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderName {
    TinyTest,
    BertBase,
    RobertaBase,
}

impl EncoderName {
    pub fn as_str(self) -> &'static str {
        match self {
            EncoderName::TinyTest => "tiny-test",
            EncoderName::BertBase => "bert-base",
            EncoderName::RobertaBase => "roberta-base",
        }
    }

    /// Architecture registered for each encoder identifier. The tiny-test
    /// encoder is sized so full fine-tuning runs in seconds on a CPU.
    pub fn base_config(self) -> EncoderConfig {
        match self {
            EncoderName::TinyTest => EncoderConfig {
                vocab_size: 2048,
                hidden_size: 32,
                num_layers: 2,
                num_heads: 4,
                ff_size: 64,
                max_positions: 512,
            },
            EncoderName::BertBase => EncoderConfig {
                vocab_size: 30522,
                hidden_size: 768,
                num_layers: 12,
                num_heads: 12,
                ff_size: 3072,
                max_positions: 512,
            },
            EncoderName::RobertaBase => EncoderConfig {
                vocab_size: 50265,
                hidden_size: 768,
                num_layers: 12,
                num_heads: 12,
                ff_size: 3072,
                max_positions: 512,
            },
        }
    }

    /// Whether construction requires checkpoint weights from the cache.
    pub fn pretrained(self) -> bool {
        !matches!(self, EncoderName::TinyTest)
    }
}

impl std::fmt::Display for EncoderName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub name: EncoderName,
    pub max_sequence_length: usize,
    pub hidden_size: usize,
}

impl EncoderSpec {
    pub fn new(name: EncoderName) -> Self {
        let config = name.base_config();
        EncoderSpec {
            name,
            max_sequence_length: DEFAULT_MAX_SEQUENCE_LENGTH.min(config.max_positions),
            hidden_size: config.hidden_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let config = self.name.base_config();
        if self.hidden_size != config.hidden_size {
            return Err(Error::Config(format!(
                "encoder `{}` has hidden size {}, spec says {}",
                self.name, config.hidden_size, self.hidden_size
            )));
        }
        if self.max_sequence_length == 0 || self.max_sequence_length > config.max_positions {
            return Err(Error::Config(format!(
                "max_sequence_length {} exceeds positional capacity {} of `{}`",
                self.max_sequence_length, config.max_positions, self.name
            )));
        }
        Ok(())
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        self.name.base_config()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Linear,
    Mlp,
}

/// Regression head shape. `dropout` applies between hidden layers and is
/// independent of the encoder-side dropout in the train config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub kind: HeadKind,
    pub hidden_sizes: Vec<usize>,
    pub dropout: f64,
}

impl HeadSpec {
    pub fn linear() -> Self {
        HeadSpec {
            kind: HeadKind::Linear,
            hidden_sizes: Vec::new(),
            dropout: 0.0,
        }
    }

    pub fn mlp() -> Self {
        HeadSpec {
            kind: HeadKind::Mlp,
            hidden_sizes: vec![256],
            dropout: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            HeadKind::Mlp if self.hidden_sizes.is_empty() => {
                return Err(Error::Config(
                    "mlp head needs at least one hidden layer".to_string(),
                ));
            }
            HeadKind::Linear if !self.hidden_sizes.is_empty() => {
                return Err(Error::Config(
                    "linear head cannot have hidden layers".to_string(),
                ));
            }
            _ => {}
        }
        if self.hidden_sizes.contains(&0) {
            return Err(Error::Config("head hidden sizes must be positive".to_string()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "head dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

pub struct Head {
    pub dropout: f64,
    pub hidden: Vec<Linear>,
    pub out: Linear,
}

struct HeadStep {
    input: Mat,
    pre: Mat,
    drop: DropoutCache,
}

pub struct HeadCache {
    steps: Vec<HeadStep>,
    out_input: Mat,
}

impl Head {
    fn new(spec: &HeadSpec, encoder_hidden: usize, rng: &mut ChaCha20Rng) -> Self {
        let mut hidden = Vec::with_capacity(spec.hidden_sizes.len());
        let mut input = encoder_hidden;
        for (i, size) in spec.hidden_sizes.iter().enumerate() {
            hidden.push(Linear::new(
                &format!("head.hidden{i}"),
                input,
                *size,
                None,
                rng,
            ));
            input = *size;
        }
        let out = Linear::new("head.out", input, OUTPUT_DIM, None, rng);
        Head {
            dropout: spec.dropout,
            hidden,
            out,
        }
    }

    fn forward(&self, pooled: &Mat, mode: &mut Mode) -> (Mat, HeadCache) {
        let p = mode.precision();
        let mut x = pooled.clone();
        let mut steps = Vec::with_capacity(self.hidden.len());
        for lin in &self.hidden {
            let input = x;
            let pre = lin.forward(&input, p);
            let mut act = pre.mapv(gelu);
            p.round(&mut act);
            let (dropped, drop) = dropout_forward(act, self.dropout, mode);
            steps.push(HeadStep { input, pre, drop });
            x = dropped;
        }
        let out_input = x;
        let y = self.out.forward(&out_input, p);
        (y, HeadCache { steps, out_input })
    }

    fn backward(&mut self, cache: &HeadCache, dy: &Mat, p: Precision) -> Mat {
        let mut d = self.out.backward(&cache.out_input, dy, p);
        for (lin, step) in self.hidden.iter_mut().zip(&cache.steps).rev() {
            d = dropout_backward(&step.drop, d, p);
            d *= &step.pre.mapv(gelu_grad);
            p.round(&mut d);
            d = lin.backward(&step.input, &d, p);
        }
        d
    }

    fn params(&self) -> Vec<&Param> {
        self.hidden
            .iter()
            .flat_map(Linear::params)
            .chain(self.out.params())
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.hidden
            .iter_mut()
            .flat_map(Linear::params_mut)
            .chain(self.out.params_mut())
            .collect()
    }
}

pub struct TextCache {
    enc: EncCache,
    head: HeadCache,
}

/// Encoder + head with mean pooling in between; all parameters trainable.
pub struct RegressionModel {
    pub encoder_spec: EncoderSpec,
    pub head_spec: HeadSpec,
    pub init_seed: u64,
    pub tokenizer: HashTokenizer,
    pub encoder: Encoder,
    pub head: Head,
}

impl std::fmt::Debug for RegressionModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RegressionModel")
            .field("encoder", &self.encoder_spec)
            .field("head", &self.head_spec)
            .field("init_seed", &self.init_seed)
            .finish_non_exhaustive()
    }
}

impl RegressionModel {
    /// Builds a model. Head parameters are always freshly initialized from
    /// `seed`; encoder parameters come from the checkpoint cache for
    /// pretrained names, or from `seed` for tiny-test.
    pub fn build(encoder_spec: &EncoderSpec, head_spec: &HeadSpec, seed: u64) -> Result<Self> {
        encoder_spec.validate()?;
        head_spec.validate()?;
        let encoder = if encoder_spec.name.pretrained() {
            load_pretrained_encoder(encoder_spec.name)?
        } else {
            let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, 0xE0C0));
            Encoder::new(encoder_spec.encoder_config(), &mut rng)?
        };
        Ok(Self::assemble(encoder_spec, head_spec, seed, encoder))
    }

    /// Architecture only, all parameters zero; used when a bundle payload is
    /// about to overwrite every tensor.
    fn zeroed(encoder_spec: &EncoderSpec, head_spec: &HeadSpec, seed: u64) -> Result<Self> {
        encoder_spec.validate()?;
        head_spec.validate()?;
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let mut encoder = Encoder::new(encoder_spec.encoder_config(), &mut rng)?;
        for p in encoder.params_mut() {
            p.value.fill(0.0);
        }
        Ok(Self::assemble(encoder_spec, head_spec, seed, encoder))
    }

    fn assemble(
        encoder_spec: &EncoderSpec,
        head_spec: &HeadSpec,
        seed: u64,
        encoder: Encoder,
    ) -> Self {
        let mut head_rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, 0x4EAD));
        let head = Head::new(head_spec, encoder.config.hidden_size, &mut head_rng);
        let tokenizer = HashTokenizer::new(
            encoder.config.vocab_size,
            encoder_spec.max_sequence_length,
        );
        RegressionModel {
            encoder_spec: *encoder_spec,
            head_spec: head_spec.clone(),
            init_seed: seed,
            tokenizer,
            encoder,
            head,
        }
    }

    /// Raw (unclamped) five-score output for one text.
    pub fn forward_text(&self, text: &str, mode: &mut Mode) -> (Mat, TextCache) {
        let ids = self.tokenizer.encode(text);
        let (pooled, enc) = self.encoder.forward_pooled(&ids, mode);
        let (y, head) = self.head.forward(&pooled, mode);
        (y, TextCache { enc, head })
    }

    pub fn backward_text(&mut self, cache: &TextCache, dy: &Mat, p: Precision) {
        let dpooled = self.head.backward(&cache.head, dy, p);
        self.encoder.backward_pooled(&cache.enc, &dpooled, p);
    }

    /// Inference-path prediction: full precision, no dropout, clamped.
    pub fn predict_one(&self, text: &str) -> TraitVector {
        let (y, _) = self.forward_text(text, &mut Mode::Eval);
        TraitVector::from_array([y[[0, 0]], y[[0, 1]], y[[0, 2]], y[[0, 3]], y[[0, 4]]])
            .clamped01()
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out = self.encoder.params();
        out.extend(self.head.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = self.encoder.params_mut();
        out.extend(self.head.params_mut());
        out
    }

    pub fn param_checksum(&self) -> f64 {
        self.params()
            .iter()
            .map(|p| p.value.iter().map(|v| v.abs()).sum::<f64>())
            .sum()
    }

    pub fn snapshot(&self) -> Vec<Mat> {
        self.params().iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Mat]) {
        let mut params = self.params_mut();
        assert_eq!(params.len(), snapshot.len(), "snapshot shape mismatch");
        for (p, saved) in params.iter_mut().zip(snapshot) {
            p.value.assign(saved);
        }
    }
}

/// Clamped predictions for a batch of texts in input order. Sequences are
/// processed one at a time (no padding), so results are independent of
/// `batch_size` by construction; the argument is validated for API parity
/// with batched backends.
pub fn predict(
    model: &RegressionModel,
    texts: &[String],
    batch_size: usize,
) -> Result<Vec<TraitVector>> {
    if texts.is_empty() {
        return Err(Error::Argument("predict needs at least one text".to_string()));
    }
    if batch_size == 0 {
        return Err(Error::Argument("batch_size must be positive".to_string()));
    }
    Ok(texts.iter().map(|t| model.predict_one(t)).collect())
}

/// Arithmetic mean of the members' clamped predictions, re-clamped.
pub fn ensemble_predict(
    members: &[RegressionModel],
    texts: &[String],
    batch_size: usize,
) -> Result<Vec<TraitVector>> {
    if members.is_empty() {
        return Err(Error::Argument("ensemble has no members".to_string()));
    }
    let mut acc: Option<Vec<[f64; 5]>> = None;
    for member in members {
        let preds = predict(member, texts, batch_size)?;
        let acc = acc.get_or_insert_with(|| vec![[0.0; 5]; texts.len()]);
        for (sum, pred) in acc.iter_mut().zip(&preds) {
            for (s, v) in sum.iter_mut().zip(pred.to_array()) {
                *s += v;
            }
        }
    }
    let n = members.len() as f64;
    Ok(acc
        .unwrap()
        .into_iter()
        .map(|sums| TraitVector::from_array(sums.map(|s| s / n)).clamped01())
        .collect())
}

#[derive(Debug)]
pub enum TrainedModel {
    Single(Box<RegressionModel>),
    Ensemble(Vec<RegressionModel>),
}

impl TrainedModel {
    pub fn members(&self) -> &[RegressionModel] {
        match self {
            TrainedModel::Single(m) => std::slice::from_ref(m),
            TrainedModel::Ensemble(ms) => ms,
        }
    }

    pub fn predict(&self, texts: &[String], batch_size: usize) -> Result<Vec<TraitVector>> {
        match self {
            TrainedModel::Single(m) => predict(m, texts, batch_size),
            TrainedModel::Ensemble(ms) => ensemble_predict(ms, texts, batch_size),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.members().iter().map(|m| m.init_seed).collect()
    }

    pub fn encoder_spec(&self) -> &EncoderSpec {
        &self.members()[0].encoder_spec
    }

    pub fn head_spec(&self) -> &HeadSpec {
        &self.members()[0].head_spec
    }
}

/// Checkpoint cache root: `TRAIT_TUNER_CACHE`, else `~/.cache/trait-tuner`.
pub fn cache_dir() -> PathBuf {
    if let Ok(dir) = std::env::var("TRAIT_TUNER_CACHE") {
        return PathBuf::from(dir);
    }
    match std::env::var("HOME") {
        Ok(home) => Path::new(&home).join(".cache").join("trait-tuner"),
        Err(_) => PathBuf::from(".trait-tuner-cache"),
    }
}

fn load_pretrained_encoder(name: EncoderName) -> Result<Encoder> {
    let dir = cache_dir().join(name.as_str());
    let config_path = dir.join("encoder.json");
    let weights_path = dir.join("weights.bin");
    if !config_path.exists() || !weights_path.exists() {
        return Err(Error::Resource(format!(
            "pretrained encoder `{name}` not found at {}; expected encoder.json and \
             weights.bin (point TRAIT_TUNER_CACHE at your checkpoint cache)",
            dir.display()
        )));
    }
    let config: EncoderConfig = serde_json::from_reader(BufReader::new(File::open(&config_path)?))?;
    if config != name.base_config() {
        return Err(Error::Config(format!(
            "checkpoint config at {} does not match the registered `{name}` architecture",
            config_path.display()
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let mut encoder = Encoder::new(config, &mut rng)?;
    for p in encoder.params_mut() {
        p.value.fill(0.0);
    }
    let entries = read_weights(&weights_path)?;
    fill_params(encoder.params_mut(), entries, &weights_path)?;
    Ok(encoder)
}

const WEIGHTS_MAGIC: &[u8; 4] = b"TTWB";
const WEIGHTS_VERSION: u32 = 1;

pub fn write_weights(path: &Path, params: &[&Param]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(WEIGHTS_MAGIC)?;
    w.write_all(&WEIGHTS_VERSION.to_le_bytes())?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for p in params {
        let name = p.name.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        let (rows, cols) = p.value.dim();
        w.write_all(&(rows as u32).to_le_bytes())?;
        w.write_all(&(cols as u32).to_le_bytes())?;
        for v in p.value.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_weights(path: &Path) -> Result<Vec<(String, Mat)>> {
    let bad = |message: String| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message,
    };
    let mut r = BufReader::new(File::open(path)?);
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    if &u32buf != WEIGHTS_MAGIC {
        return Err(bad("not a weight payload (bad magic)".to_string()));
    }
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != WEIGHTS_VERSION {
        return Err(bad(format!("unsupported payload version {version}")));
    }
    r.read_exact(&mut u32buf)?;
    let count = u32::from_le_bytes(u32buf) as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut u32buf)?;
        let name_len = u32::from_le_bytes(u32buf) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| bad("tensor name is not UTF-8".to_string()))?;
        r.read_exact(&mut u32buf)?;
        let rows = u32::from_le_bytes(u32buf) as usize;
        r.read_exact(&mut u32buf)?;
        let cols = u32::from_le_bytes(u32buf) as usize;
        let mut data = vec![0.0f64; rows * cols];
        let mut f64buf = [0u8; 8];
        for v in data.iter_mut() {
            r.read_exact(&mut f64buf)?;
            *v = f64::from_le_bytes(f64buf);
        }
        let mat = Mat::from_shape_vec((rows, cols), data)
            .map_err(|e| bad(format!("tensor `{name}`: {e}")))?;
        entries.push((name, mat));
    }
    Ok(entries)
}

fn fill_params(params: Vec<&mut Param>, entries: Vec<(String, Mat)>, origin: &Path) -> Result<()> {
    use std::collections::HashMap;
    let mut by_name: HashMap<String, Mat> = entries.into_iter().collect();
    for p in params {
        let value = by_name.remove(&p.name).ok_or_else(|| {
            Error::Validation(format!(
                "weight payload {} is missing tensor `{}`",
                origin.display(),
                p.name
            ))
        })?;
        if value.dim() != p.value.dim() {
            return Err(Error::Validation(format!(
                "tensor `{}` in {} has shape {:?}, expected {:?}",
                p.name,
                origin.display(),
                value.dim(),
                p.value.dim()
            )));
        }
        p.value = value;
    }
    if let Some(extra) = by_name.keys().next() {
        return Err(Error::Validation(format!(
            "weight payload {} contains unknown tensor `{extra}`",
            origin.display()
        )));
    }
    Ok(())
}

pub const BUNDLE_FORMAT: &str = "trait-tuner-bundle";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format: String,
    pub version: u32,
    pub encoder: EncoderSpec,
    pub head: HeadSpec,
    pub pooling: String,
    pub seeds: Vec<u64>,
    pub members: Vec<String>,
    pub train_config: Option<serde_json::Value>,
    pub created: String,
}

#[derive(Debug)]
pub struct LoadedBundle {
    pub model: TrainedModel,
    pub stats: NormalizationStats,
    pub rule: BinarizationRule,
    pub manifest: BundleManifest,
}

pub(crate) fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Writes a self-contained bundle directory: manifest, one weight payload per
/// member, normalization stats, and binarization thresholds.
pub fn save_bundle(
    dir: &Path,
    model: &TrainedModel,
    stats: &NormalizationStats,
    rule: &BinarizationRule,
    train_config: Option<serde_json::Value>,
) -> Result<BundleManifest> {
    std::fs::create_dir_all(dir)?;
    let members: Vec<String> = (0..model.members().len())
        .map(|i| format!("member_{i}.bin"))
        .collect();
    for (member, file) in model.members().iter().zip(&members) {
        write_weights(&dir.join(file), &member.params())?;
    }
    let manifest = BundleManifest {
        format: BUNDLE_FORMAT.to_string(),
        version: BUNDLE_VERSION,
        encoder: *model.encoder_spec(),
        head: model.head_spec().clone(),
        pooling: "mean".to_string(),
        seeds: model.seeds(),
        members,
        train_config,
        created: chrono::Utc::now().to_rfc3339(),
    };
    write_json_pretty(&dir.join("manifest.json"), &manifest)?;
    write_json_pretty(&dir.join("normalization.json"), stats)?;
    write_json_pretty(&dir.join("thresholds.json"), rule)?;
    Ok(manifest)
}

fn bundle_part<T: for<'de> Deserialize<'de>>(dir: &Path, part: &str) -> Result<T> {
    let path = dir.join(part);
    if !path.exists() {
        return Err(Error::BundleIncomplete {
            part: part.to_string(),
            dir: dir.to_path_buf(),
        });
    }
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn load_bundle(dir: &Path) -> Result<LoadedBundle> {
    let manifest: BundleManifest = bundle_part(dir, "manifest.json")?;
    if manifest.format != BUNDLE_FORMAT || manifest.version != BUNDLE_VERSION {
        return Err(Error::Validation(format!(
            "{} is not a supported bundle (format `{}` version {})",
            dir.display(),
            manifest.format,
            manifest.version
        )));
    }
    if manifest.members.is_empty() || manifest.members.len() != manifest.seeds.len() {
        return Err(Error::Validation(format!(
            "bundle manifest at {} lists {} member files but {} seeds",
            dir.display(),
            manifest.members.len(),
            manifest.seeds.len()
        )));
    }
    let stats: NormalizationStats = bundle_part(dir, "normalization.json")?;
    crate::corpus::validate_stats(&stats)?;
    let rule: BinarizationRule = bundle_part(dir, "thresholds.json")?;

    let mut members = Vec::with_capacity(manifest.members.len());
    for (file, seed) in manifest.members.iter().zip(&manifest.seeds) {
        let path = dir.join(file);
        if !path.exists() {
            return Err(Error::BundleIncomplete {
                part: file.clone(),
                dir: dir.to_path_buf(),
            });
        }
        let mut model = RegressionModel::zeroed(&manifest.encoder, &manifest.head, *seed)?;
        let entries = read_weights(&path)?;
        fill_params(model.params_mut(), entries, &path)?;
        members.push(model);
    }
    let model = if members.len() == 1 {
        TrainedModel::Single(Box::new(members.into_iter().next().unwrap()))
    } else {
        TrainedModel::Ensemble(members)
    };
    Ok(LoadedBundle {
        model,
        stats,
        rule,
        manifest,
    })
}
