//! Synonym-substitution augmentation for the training split. Substitution is
//! whitespace-token level with case-insensitive table lookup, so labels and
//! token counts are preserved by construction.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabeledText};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Lowercase token -> candidate replacements. Entries always offer at least
/// one alternative besides the key itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SynonymTable {
    map: HashMap<String, Vec<String>>,
}

fn single_token(word: &str) -> bool {
    !word.is_empty() && !word.chars().any(char::is_whitespace)
}

impl SynonymTable {
    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<S>)>,
        S: Into<String>,
    {
        let mut map = HashMap::new();
        for (word, synonyms) in entries {
            let word: String = word.into();
            let synonyms: Vec<String> = synonyms.into_iter().map(Into::into).collect();
            if !single_token(&word) || word.to_lowercase() != word {
                return Err(Error::Validation(format!(
                    "synonym table key `{word}` must be one lowercase token"
                )));
            }
            if synonyms.is_empty() {
                return Err(Error::Validation(format!(
                    "synonym list for `{word}` is empty"
                )));
            }
            if let Some(bad) = synonyms.iter().find(|s| !single_token(s)) {
                return Err(Error::Validation(format!(
                    "synonym `{bad}` for `{word}` must be one non-empty token"
                )));
            }
            if synonyms.iter().all(|s| s == &word) {
                return Err(Error::Validation(format!(
                    "`{word}` maps only to itself"
                )));
            }
            if map.insert(word.clone(), synonyms).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate synonym table entry for `{word}`"
                )));
            }
        }
        Ok(SynonymTable { map })
    }

    /// Reads a table from a file of `word<TAB>syn1,syn2,...` lines. Blank
    /// lines and lines starting with `#` are skipped.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Resource(format!("synonym table {}: {e}", path.display()))
        })?;
        let mut entries: Vec<(String, Vec<String>)> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, rest) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: "expected `word<TAB>synonym1,synonym2,...`".to_string(),
            })?;
            let synonyms: Vec<String> = rest
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            entries.push((word.trim().to_string(), synonyms));
        }
        Self::from_entries(entries).map_err(|e| match e {
            Error::Validation(message) => Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message,
            },
            other => other,
        })
    }

    /// The built-in lexicon: groups of interchangeable adjectives/adverbs,
    /// each word mapping to the other members of its group.
    pub fn builtin() -> Self {
        let entries = BUILTIN_GROUPS.iter().flat_map(|group| {
            group.iter().map(move |word| {
                let synonyms: Vec<String> = group
                    .iter()
                    .filter(|w| *w != word)
                    .map(|w| w.to_string())
                    .collect();
                (word.to_string(), synonyms)
            })
        });
        Self::from_entries(entries).expect("built-in synonym table is valid")
    }

    /// Case-insensitive lookup.
    pub fn lookup(&self, token: &str) -> Option<&[String]> {
        let key = token.to_lowercase();
        self.map.get(&key).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentPolicy {
    pub rate: f64,
    pub copies: usize,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        AugmentPolicy {
            rate: 0.15,
            copies: 1,
        }
    }
}

impl AugmentPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::Config(format!(
                "augment rate must be in [0, 1], got {}",
                self.rate
            )));
        }
        Ok(())
    }
}

/// Replaces each table-covered token with probability `rate` by a uniformly
/// chosen synonym. Deterministic in (text, table, rate, seed); token count is
/// preserved because substitution is one token for one token.
pub fn synonym_augment(text: &str, table: &SynonymTable, rate: f64, seed: u64) -> String {
    assert!((0.0..=1.0).contains(&rate), "rate must be in [0, 1]");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut out: Vec<&str> = Vec::with_capacity(tokens.len());
    for token in tokens {
        let replacement = table.lookup(token).and_then(|synonyms| {
            if rng.random::<f64>() < rate {
                Some(synonyms[rng.random_range(0..synonyms.len())].as_str())
            } else {
                None
            }
        });
        out.push(replacement.unwrap_or(token));
    }
    out.join(" ")
}

/// Appends `copies` augmented variants after each training record (ids
/// suffixed `#aug1`, `#aug2`, ...), leaving labels and the eval/test splits
/// untouched.
pub fn expand_training_split(
    corpus: &Corpus,
    table: &SynonymTable,
    policy: &AugmentPolicy,
    seed: u64,
) -> Result<Corpus> {
    policy.validate()?;
    let mut train = Vec::with_capacity(corpus.train.len() * (1 + policy.copies));
    for (i, record) in corpus.train.iter().enumerate() {
        train.push(record.clone());
        for k in 1..=policy.copies {
            let stream = (i as u64).wrapping_mul(1 << 16).wrapping_add(k as u64);
            let text = synonym_augment(
                &record.text,
                table,
                policy.rate,
                derive_seed(seed, stream),
            );
            train.push(LabeledText {
                id: format!("{}#aug{k}", record.id),
                user_id: record.user_id.clone(),
                text,
                traits: record.traits,
            });
        }
    }
    Ok(Corpus {
        train,
        eval: corpus.eval.clone(),
        test: corpus.test.clone(),
    })
}

const BUILTIN_GROUPS: &[&[&str]] = &[
    &["happy", "glad", "joyful", "merry"],
    &["sad", "unhappy", "sorrowful", "mournful"],
    &["angry", "furious", "irate", "enraged"],
    &["calm", "serene", "tranquil", "placid"],
    &["kind", "caring", "compassionate", "benevolent"],
    &["mean", "cruel", "unkind", "heartless"],
    &["smart", "clever", "intelligent", "brainy"],
    &["dull", "boring", "tedious", "monotonous"],
    &["big", "large", "huge", "enormous"],
    &["small", "tiny", "little", "minuscule"],
    &["fast", "quick", "rapid", "swift"],
    &["slow", "sluggish", "unhurried", "leisurely"],
    &["good", "fine", "decent", "satisfactory"],
    &["bad", "awful", "terrible", "dreadful"],
    &["pretty", "beautiful", "lovely", "gorgeous"],
    &["ugly", "hideous", "unsightly", "unattractive"],
    &["strong", "powerful", "mighty", "sturdy"],
    &["weak", "feeble", "frail", "flimsy"],
    &["brave", "courageous", "fearless", "valiant"],
    &["scared", "afraid", "frightened", "terrified"],
    &["anxious", "uneasy", "apprehensive", "jittery"],
    &["tired", "weary", "exhausted", "fatigued"],
    &["energetic", "lively", "spirited", "vigorous"],
    &["quiet", "silent", "hushed", "soundless"],
    &["loud", "noisy", "deafening", "thunderous"],
    &["funny", "hilarious", "amusing", "comical"],
    &["serious", "solemn", "grave", "earnest"],
    &["honest", "truthful", "sincere", "candid"],
    &["dishonest", "deceitful", "untruthful", "insincere"],
    &["friendly", "amiable", "affable", "genial"],
    &["hostile", "antagonistic", "unfriendly", "adversarial"],
    &["careful", "cautious", "prudent", "vigilant"],
    &["careless", "negligent", "reckless", "sloppy"],
    &["neat", "tidy", "orderly", "immaculate"],
    &["messy", "untidy", "disorderly", "cluttered"],
    &["rich", "wealthy", "affluent", "prosperous"],
    &["poor", "impoverished", "destitute", "penniless"],
    &["easy", "simple", "effortless", "straightforward"],
    &["hard", "difficult", "tough", "arduous"],
    &["new", "fresh", "novel", "recent"],
    &["old", "ancient", "aged", "antiquated"],
    &["hot", "scorching", "sweltering", "torrid"],
    &["cold", "chilly", "frigid", "icy"],
    &["wet", "damp", "moist", "soggy"],
    &["dry", "arid", "parched", "dehydrated"],
    &["clean", "spotless", "pristine", "unsoiled"],
    &["dirty", "filthy", "grimy", "soiled"],
    &["bright", "radiant", "luminous", "gleaming"],
    &["dark", "dim", "gloomy", "murky"],
    &["really", "truly", "genuinely", "honestly"],
    &["very", "extremely", "exceedingly", "immensely"],
    &["often", "frequently", "regularly", "repeatedly"],
    &["rarely", "seldom", "infrequently", "sporadically"],
    &["quickly", "rapidly", "swiftly", "speedily"],
    &["slowly", "gradually", "steadily", "unhurriedly"],
    &["always", "constantly", "perpetually", "invariably"],
    &["maybe", "perhaps", "possibly", "conceivably"],
];
