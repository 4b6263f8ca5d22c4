//! Token encoder: word + position embeddings with layer norm, a stack of
//! transformer blocks, and mean pooling over tokens.

use ndarray::Axis;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    dropout_backward, dropout_forward, DropoutCache, LayerCache, LayerNorm, LnCache,
    TransformerLayer,
};
use super::{normal_matrix, Mat, Mode, Param, Precision};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden_size: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub ff_size: usize,
    pub max_positions: usize,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.vocab_size > 2
            && self.hidden_size > 0
            && self.num_layers > 0
            && self.num_heads > 0
            && self.ff_size > 0
            && self.max_positions > 0
            && self.hidden_size.is_multiple_of(self.num_heads);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid encoder config: {self:?}")))
        }
    }
}

pub struct Embeddings {
    pub word: Param,
    pub position: Param,
    pub ln: LayerNorm,
}

pub struct EmbCache {
    ids: Vec<usize>,
    ln: LnCache,
    drop: DropoutCache,
}

impl Embeddings {
    fn forward(&self, ids: &[usize], mode: &mut Mode) -> (Mat, EmbCache) {
        let p = mode.precision();
        let hidden = self.word.value.ncols();
        let mut x = Mat::zeros((ids.len(), hidden));
        for (t, id) in ids.iter().enumerate() {
            let row = &self.word.value.row(*id) + &self.position.value.row(t);
            x.row_mut(t).assign(&row);
        }
        p.round(&mut x);
        let (x, ln) = self.ln.forward(&x, p);
        let (x, drop) = dropout_forward(x, mode.encoder_dropout(), mode);
        (
            x,
            EmbCache {
                ids: ids.to_vec(),
                ln,
                drop,
            },
        )
    }

    fn backward(&mut self, cache: &EmbCache, dy: Mat, p: Precision) {
        let dy = dropout_backward(&cache.drop, dy, p);
        let dx = self.ln.backward(&cache.ln, &dy, p);
        for (t, id) in cache.ids.iter().enumerate() {
            self.word.grad.row_mut(*id).scaled_add(1.0, &dx.row(t));
            self.position.grad.row_mut(t).scaled_add(1.0, &dx.row(t));
        }
    }
}

pub struct Encoder {
    pub config: EncoderConfig,
    pub embeddings: Embeddings,
    pub layers: Vec<TransformerLayer>,
}

pub struct EncCache {
    emb: EmbCache,
    layers: Vec<LayerCache>,
    tokens: usize,
}

const INIT_STD: f64 = 0.02;

impl Encoder {
    pub fn new(config: EncoderConfig, rng: &mut ChaCha20Rng) -> Result<Self> {
        config.validate()?;
        let embeddings = Embeddings {
            word: Param::new(
                "embeddings.word",
                normal_matrix(rng, config.vocab_size, config.hidden_size, INIT_STD),
                true,
            ),
            position: Param::new(
                "embeddings.position",
                normal_matrix(rng, config.max_positions, config.hidden_size, INIT_STD),
                true,
            ),
            ln: LayerNorm::new("embeddings.ln", config.hidden_size),
        };
        let layers = (0..config.num_layers)
            .map(|i| {
                TransformerLayer::new(
                    &format!("layer{i}"),
                    config.hidden_size,
                    config.num_heads,
                    config.ff_size,
                    INIT_STD,
                    rng,
                )
            })
            .collect();
        Ok(Encoder {
            config,
            embeddings,
            layers,
        })
    }

    /// Returns the mean-pooled representation of `ids` as a 1 x hidden row.
    pub fn forward_pooled(&self, ids: &[usize], mode: &mut Mode) -> (Mat, EncCache) {
        assert!(!ids.is_empty(), "encoder input must have at least one token");
        assert!(ids.len() <= self.config.max_positions);
        let (mut x, emb) = self.embeddings.forward(ids, mode);
        let mut layer_caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (next, cache) = layer.forward(&x, mode);
            x = next;
            layer_caches.push(cache);
        }
        let mut pooled = x.mean_axis(Axis(0)).unwrap().insert_axis(Axis(0));
        mode.precision().round(&mut pooled);
        (
            pooled,
            EncCache {
                emb,
                layers: layer_caches,
                tokens: ids.len(),
            },
        )
    }

    pub fn backward_pooled(&mut self, cache: &EncCache, dpooled: &Mat, p: Precision) {
        let t = cache.tokens;
        let per_token = dpooled.mapv(|v| v / t as f64);
        let mut dx = per_token
            .broadcast((t, dpooled.ncols()))
            .unwrap()
            .to_owned();
        p.round(&mut dx);
        for (layer, lcache) in self.layers.iter_mut().zip(&cache.layers).rev() {
            dx = layer.backward(lcache, &dx, p);
        }
        self.embeddings.backward(&cache.emb, dx, p);
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out = vec![
            &self.embeddings.word,
            &self.embeddings.position,
        ];
        out.extend(self.embeddings.ln.params());
        for layer in &self.layers {
            out.extend(layer.params());
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = vec![
            &mut self.embeddings.word,
            &mut self.embeddings.position,
        ];
        out.extend(self.embeddings.ln.params_mut());
        for layer in &mut self.layers {
            out.extend(layer.params_mut());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn tiny_config() -> EncoderConfig {
        EncoderConfig {
            vocab_size: 64,
            hidden_size: 8,
            num_layers: 2,
            num_heads: 2,
            ff_size: 16,
            max_positions: 12,
        }
    }

    #[test]
    fn config_validation_rejects_nondividing_heads() {
        let mut cfg = tiny_config();
        cfg.num_heads = 3;
        assert!(cfg.validate().is_err());
        assert!(tiny_config().validate().is_ok());
    }

    #[test]
    fn pooled_forward_is_deterministic_per_seed() {
        let ids = vec![5usize, 9, 33, 2];
        let mk = |seed: u64| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let enc = Encoder::new(tiny_config(), &mut rng).unwrap();
            enc.forward_pooled(&ids, &mut Mode::Eval).0
        };
        assert_eq!(mk(1), mk(1));
        assert_ne!(mk(1), mk(2));
    }

    #[test]
    fn backward_through_full_encoder_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut enc = Encoder::new(tiny_config(), &mut rng).unwrap();
        let ids = vec![1usize, 17, 42, 42, 7];
        let loss = |enc: &Encoder| {
            let (pooled, _) = enc.forward_pooled(&ids, &mut Mode::Eval);
            0.5 * pooled.mapv(|v| v * v).sum()
        };
        let (pooled, cache) = enc.forward_pooled(&ids, &mut Mode::Eval);
        enc.backward_pooled(&cache, &pooled.clone(), Precision::Full);

        let h = 1e-6;
        // One probe per parameter family: word id 42 (repeated token), a
        // position row, an attention weight, a feed-forward weight, a
        // layer-norm gain.
        let probes: Vec<(String, (usize, usize))> = vec![
            ("embeddings.word".into(), (42, 3)),
            ("embeddings.position".into(), (2, 1)),
            ("layer0.attn.wq.weight".into(), (1, 6)),
            ("layer1.ff.lin1.weight".into(), (4, 11)),
            ("layer1.ln2.gamma".into(), (0, 5)),
        ];
        for (name, idx) in probes {
            let analytic = {
                let params = enc.params();
                let p = params.iter().find(|p| p.name == name).unwrap();
                p.grad[idx]
            };
            let fd = {
                {
                    let mut params = enc.params_mut();
                    let p = params.iter_mut().find(|p| p.name == name).unwrap();
                    p.value[idx] += h;
                }
                let up = loss(&enc);
                {
                    let mut params = enc.params_mut();
                    let p = params.iter_mut().find(|p| p.name == name).unwrap();
                    p.value[idx] -= 2.0 * h;
                }
                let down = loss(&enc);
                {
                    let mut params = enc.params_mut();
                    let p = params.iter_mut().find(|p| p.name == name).unwrap();
                    p.value[idx] += h;
                }
                (up - down) / (2.0 * h)
            };
            assert!(
                (analytic - fd).abs() / fd.abs().max(1e-4) < 1e-4,
                "{name}{idx:?}: analytic {analytic} vs fd {fd}"
            );
        }
    }

    #[test]
    fn param_names_are_unique() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let enc = Encoder::new(tiny_config(), &mut rng).unwrap();
        let names: Vec<&str> = enc.params().iter().map(|p| p.name.as_str()).collect();
        let unique: std::collections::HashSet<&&str> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
    }
}
