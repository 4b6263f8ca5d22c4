//! Data model for Big Five regression corpora: labeled records, split files,
//! label normalization, comment chunking, and a synthetic corpus generator
//! used by the test suite and the `prepare --synthetic` command.

use std::collections::HashSet;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// The five traits in canonical order. Every per-trait container, report row,
/// and serialized object follows this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraitName {
    Agreeableness,
    Openness,
    Conscientiousness,
    Extraversion,
    Neuroticism,
}

impl TraitName {
    pub const ALL: [TraitName; 5] = [
        TraitName::Agreeableness,
        TraitName::Openness,
        TraitName::Conscientiousness,
        TraitName::Extraversion,
        TraitName::Neuroticism,
    ];

    pub fn key(self) -> &'static str {
        match self {
            TraitName::Agreeableness => "agreeableness",
            TraitName::Openness => "openness",
            TraitName::Conscientiousness => "conscientiousness",
            TraitName::Extraversion => "extraversion",
            TraitName::Neuroticism => "neuroticism",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|t| *t == self).unwrap()
    }
}

impl fmt::Display for TraitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// One value per trait, stored as named fields so serialized key order is
/// always the canonical trait order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerTrait<T> {
    pub agreeableness: T,
    pub openness: T,
    pub conscientiousness: T,
    pub extraversion: T,
    pub neuroticism: T,
}

impl<T> PerTrait<T> {
    pub fn from_fn(mut f: impl FnMut(TraitName) -> T) -> Self {
        PerTrait {
            agreeableness: f(TraitName::Agreeableness),
            openness: f(TraitName::Openness),
            conscientiousness: f(TraitName::Conscientiousness),
            extraversion: f(TraitName::Extraversion),
            neuroticism: f(TraitName::Neuroticism),
        }
    }

    pub fn try_from_fn(mut f: impl FnMut(TraitName) -> Result<T>) -> Result<Self> {
        Ok(PerTrait {
            agreeableness: f(TraitName::Agreeableness)?,
            openness: f(TraitName::Openness)?,
            conscientiousness: f(TraitName::Conscientiousness)?,
            extraversion: f(TraitName::Extraversion)?,
            neuroticism: f(TraitName::Neuroticism)?,
        })
    }

    pub fn get(&self, t: TraitName) -> &T {
        match t {
            TraitName::Agreeableness => &self.agreeableness,
            TraitName::Openness => &self.openness,
            TraitName::Conscientiousness => &self.conscientiousness,
            TraitName::Extraversion => &self.extraversion,
            TraitName::Neuroticism => &self.neuroticism,
        }
    }

    pub fn get_mut(&mut self, t: TraitName) -> &mut T {
        match t {
            TraitName::Agreeableness => &mut self.agreeableness,
            TraitName::Openness => &mut self.openness,
            TraitName::Conscientiousness => &mut self.conscientiousness,
            TraitName::Extraversion => &mut self.extraversion,
            TraitName::Neuroticism => &mut self.neuroticism,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(TraitName, &T) -> U) -> PerTrait<U> {
        PerTrait::from_fn(|t| f(t, self.get(t)))
    }
}

impl<T: Clone> PerTrait<T> {
    pub fn uniform(v: T) -> Self {
        PerTrait::from_fn(|_| v.clone())
    }
}

/// Five continuous trait scores. Labels and predictions live in [0, 1] once
/// normalized; raw inputs may use any finite scale.
pub type TraitVector = PerTrait<f64>;

impl TraitVector {
    pub fn to_array(&self) -> [f64; 5] {
        [
            self.agreeableness,
            self.openness,
            self.conscientiousness,
            self.extraversion,
            self.neuroticism,
        ]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        PerTrait {
            agreeableness: a[0],
            openness: a[1],
            conscientiousness: a[2],
            extraversion: a[3],
            neuroticism: a[4],
        }
    }

    pub fn clamped01(&self) -> Self {
        self.map(|_, v| v.clamp(0.0, 1.0))
    }
}

/// One training record: a text span with its owning user and trait scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledText {
    pub id: String,
    pub user_id: String,
    pub text: String,
    pub traits: TraitVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Eval, Split::Test];

    pub fn file_name(self) -> &'static str {
        match self {
            Split::Train => "train.jsonl",
            Split::Eval => "eval.jsonl",
            Split::Test => "test.jsonl",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub train: Vec<LabeledText>,
    pub eval: Vec<LabeledText>,
    pub test: Vec<LabeledText>,
}

impl Corpus {
    pub fn split(&self, s: Split) -> &[LabeledText] {
        match s {
            Split::Train => &self.train,
            Split::Eval => &self.eval,
            Split::Test => &self.test,
        }
    }

    pub fn labels(&self, s: Split) -> Vec<TraitVector> {
        self.split(s).iter().map(|r| r.traits).collect()
    }
}

/// Training-split min/max for one trait; drives normalization to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraitRange {
    pub min: f64,
    pub max: f64,
}

pub type NormalizationStats = PerTrait<TraitRange>;

pub fn identity_stats() -> NormalizationStats {
    PerTrait::uniform(TraitRange { min: 0.0, max: 1.0 })
}

pub fn validate_stats(stats: &NormalizationStats) -> Result<()> {
    for t in TraitName::ALL {
        let r = stats.get(t);
        if !(r.min.is_finite() && r.max.is_finite() && r.max > r.min) {
            return Err(Error::Validation(format!(
                "normalization stats for `{t}` must satisfy min < max, got [{}, {}]",
                r.min, r.max
            )));
        }
    }
    Ok(())
}

/// Loads `train.jsonl`, `eval.jsonl`, and `test.jsonl` from `dir`. With
/// `already_normalized`, every score must lie in [0, 1]; record ids must be
/// unique across all three splits.
pub fn load_corpus(dir: &Path, already_normalized: bool) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    let mut seen_ids: HashSet<String> = HashSet::new();

    for split in Split::ALL {
        let path = dir.join(split.file_name());
        if !path.exists() {
            return Err(Error::MissingSplit {
                split: split.name().to_string(),
                path,
            });
        }
        let reader = BufReader::new(File::open(&path)?);
        let mut records = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let record: LabeledText =
                serde_json::from_str(&line).map_err(|e| Error::Parse {
                    path: path.clone(),
                    line: lineno,
                    message: e.to_string(),
                })?;
            if record.text.trim().is_empty() {
                return Err(Error::Parse {
                    path: path.clone(),
                    line: lineno,
                    message: format!("record `{}` has empty text", record.id),
                });
            }
            for t in TraitName::ALL {
                let v = *record.traits.get(t);
                if !v.is_finite() {
                    return Err(Error::Parse {
                        path: path.clone(),
                        line: lineno,
                        message: format!("record `{}`: `{t}` is not finite", record.id),
                    });
                }
                if already_normalized && !(0.0..=1.0).contains(&v) {
                    return Err(Error::Validation(format!(
                        "{}:{lineno}: record `{}`: `{t}` = {v} is outside [0, 1]",
                        path.display(),
                        record.id
                    )));
                }
            }
            if !seen_ids.insert(record.id.clone()) {
                return Err(Error::Validation(format!(
                    "duplicate record id `{}` in {} split",
                    record.id,
                    split.name()
                )));
            }
            records.push(record);
        }
        if records.is_empty() {
            return Err(Error::Validation(format!(
                "{} split is empty: {}",
                split.name(),
                path.display()
            )));
        }
        match split {
            Split::Train => corpus.train = records,
            Split::Eval => corpus.eval = records,
            Split::Test => corpus.test = records,
        }
    }
    Ok(corpus)
}

pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for split in Split::ALL {
        let mut w = BufWriter::new(File::create(dir.join(split.file_name()))?);
        for record in corpus.split(split) {
            serde_json::to_writer(&mut w, record)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    Ok(())
}

fn scale(v: f64, r: &TraitRange) -> f64 {
    (v - r.min) / (r.max - r.min)
}

/// Rescales every label to [0, 1] using per-trait min/max computed from the
/// training split only. Eval and test scores are clipped into [0, 1] so
/// out-of-range values never leak past this boundary; training scores land in
/// range by construction. A trait whose training labels are constant cannot
/// be scaled and is reported as an error.
pub fn normalize_labels(corpus: &Corpus) -> Result<(Corpus, NormalizationStats)> {
    if corpus.train.is_empty() {
        return Err(Error::Validation(
            "cannot normalize: training split is empty".to_string(),
        ));
    }
    let stats = NormalizationStats::try_from_fn(|t| {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for r in &corpus.train {
            let v = *r.traits.get(t);
            min = min.min(v);
            max = max.max(v);
        }
        if max > min {
            Ok(TraitRange { min, max })
        } else {
            Err(Error::DegenerateLabels {
                trait_name: t.key().to_string(),
            })
        }
    })?;

    let apply = |records: &[LabeledText], clip: bool| -> Vec<LabeledText> {
        records
            .iter()
            .map(|r| {
                let traits = r.traits.map(|t, v| {
                    let s = scale(*v, stats.get(t));
                    if clip {
                        s.clamp(0.0, 1.0)
                    } else {
                        s
                    }
                });
                LabeledText {
                    traits,
                    ..r.clone()
                }
            })
            .collect()
    };

    let normalized = Corpus {
        train: apply(&corpus.train, false),
        eval: apply(&corpus.eval, true),
        test: apply(&corpus.test, true),
    };
    Ok((normalized, stats))
}

/// Maps a normalized vector back to the original label scale.
pub fn denormalize(v: &TraitVector, stats: &NormalizationStats) -> TraitVector {
    v.map(|t, s| {
        let r = stats.get(t);
        s * (r.max - r.min) + r.min
    })
}

/// Raw per-user input: all comments by one user plus that user's trait scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserComments {
    pub user_id: String,
    pub traits: TraitVector,
    pub comments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChunkOutcome {
    pub chunks: Vec<LabeledText>,
    pub skipped_users: usize,
}

/// Greedily packs each user's comments into chunks of at most `max_tokens`
/// whitespace tokens, never splitting a comment. A single comment longer than
/// `max_tokens` becomes its own oversized chunk. Every chunk inherits the
/// user's trait scores; users without any non-empty comment are skipped and
/// counted.
pub fn chunk_user_comments(users: &[UserComments], max_tokens: usize) -> Result<ChunkOutcome> {
    if max_tokens < 16 {
        return Err(Error::Argument(format!(
            "max_tokens must be at least 16, got {max_tokens}"
        )));
    }
    let mut outcome = ChunkOutcome::default();
    for user in users {
        let mut parts: Vec<&str> = Vec::new();
        let mut part_tokens = 0usize;
        let mut chunk_index = 0usize;
        let flush =
            |parts: &mut Vec<&str>, part_tokens: &mut usize, chunk_index: &mut usize| {
                if parts.is_empty() {
                    return None;
                }
                let record = LabeledText {
                    id: format!("{}#{}", user.user_id, *chunk_index),
                    user_id: user.user_id.clone(),
                    text: parts.join(" "),
                    traits: user.traits,
                };
                *chunk_index += 1;
                parts.clear();
                *part_tokens = 0;
                Some(record)
            };
        for comment in &user.comments {
            let tokens = comment.split_whitespace().count();
            if tokens == 0 {
                continue;
            }
            if !parts.is_empty() && part_tokens + tokens > max_tokens {
                outcome
                    .chunks
                    .extend(flush(&mut parts, &mut part_tokens, &mut chunk_index));
            }
            parts.push(comment);
            part_tokens += tokens;
        }
        match flush(&mut parts, &mut part_tokens, &mut chunk_index) {
            Some(record) => outcome.chunks.push(record),
            None if chunk_index == 0 => outcome.skipped_users += 1,
            None => {}
        }
    }
    Ok(outcome)
}

const KEYWORDS_PER_TRAIT: usize = 10;

const TRAIT_KEYWORDS: [[&str; KEYWORDS_PER_TRAIT]; 5] = [
    [
        "kind",
        "warm",
        "gentle",
        "helpful",
        "friendly",
        "caring",
        "polite",
        "generous",
        "trusting",
        "compassionate",
    ],
    [
        "curious",
        "creative",
        "imaginative",
        "artistic",
        "inventive",
        "original",
        "philosophical",
        "adventurous",
        "insightful",
        "unconventional",
    ],
    [
        "organized",
        "careful",
        "diligent",
        "punctual",
        "thorough",
        "responsible",
        "disciplined",
        "tidy",
        "methodical",
        "reliable",
    ],
    [
        "outgoing",
        "chatty",
        "energetic",
        "sociable",
        "lively",
        "assertive",
        "enthusiastic",
        "bold",
        "cheerful",
        "gregarious",
    ],
    [
        "anxious",
        "worried",
        "nervous",
        "moody",
        "tense",
        "insecure",
        "irritable",
        "fearful",
        "gloomy",
        "restless",
    ],
];

const FILLER_WORDS: [&str; 16] = [
    "the", "and", "then", "about", "while", "today", "really", "very", "just", "quite", "with",
    "from", "upon", "under", "again", "also",
];

/// Every distinct word the synthetic generator can emit.
pub fn synthetic_vocabulary() -> Vec<&'static str> {
    TRAIT_KEYWORDS
        .iter()
        .flatten()
        .copied()
        .chain(FILLER_WORDS)
        .collect()
}

fn synthetic_split(split: Split, size: usize, seed: u64) -> Vec<LabeledText> {
    let stream = match split {
        Split::Train => 0x51,
        Split::Eval => 0x52,
        Split::Test => 0x53,
    };
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, stream));
    let mut records = Vec::with_capacity(size);
    for i in 0..size {
        let content_words = rng.random_range(8..=24usize);
        let mut counts = [0usize; 5];
        let mut words: Vec<&str> = Vec::with_capacity(content_words + content_words / 2);
        for _ in 0..content_words {
            let t = rng.random_range(0..5usize);
            let k = rng.random_range(0..KEYWORDS_PER_TRAIT);
            counts[t] += 1;
            words.push(TRAIT_KEYWORDS[t][k]);
        }
        for _ in 0..content_words / 2 {
            words.push(FILLER_WORDS[rng.random_range(0..FILLER_WORDS.len())]);
        }
        words.shuffle(&mut rng);
        let traits =
            TraitVector::from_array(counts.map(|c| c as f64 / content_words as f64));
        records.push(LabeledText {
            id: format!("syn-{}-{i:05}", split.name()),
            user_id: format!("syn-user-{}-{i:05}", split.name()),
            text: words.join(" "),
            traits,
        });
    }
    records
}

/// Deterministic toy corpus where each label is the exact fraction of that
/// trait's keywords among a record's content words. The mapping from mean
/// token occupancy to labels is close to linear, so a small encoder can learn
/// it quickly. Same `(seed, sizes)` always yields the same corpus.
pub fn make_synthetic_corpus(seed: u64, sizes: (usize, usize, usize)) -> Corpus {
    let (train, eval, test) = sizes;
    assert!(
        train >= 1 && eval >= 1 && test >= 1,
        "synthetic split sizes must all be at least 1"
    );
    Corpus {
        train: synthetic_split(Split::Train, train, seed),
        eval: synthetic_split(Split::Eval, eval, seed),
        test: synthetic_split(Split::Test, test, seed),
    }
}
