//! Self-contained dense transformer stack in f64 with hand-written forward
//! and backward passes. No external autograd: every layer returns a cache
//! from `forward` that its `backward` consumes, and gradients accumulate into
//! [`Param::grad`] until the optimizer consumes them.
//!
//! Mixed precision is emulated honestly on CPU: parameters are quantized to
//! f32 at the point of use and layer outputs/gradients are rounded through
//! f32 per operation, while master weights, optimizer state, and evaluation
//! stay in f64. That keeps full-precision runs exactly reproducible and
//! finite-difference-checkable.

pub mod adamw;
pub mod encoder;
pub mod layers;
pub mod scheduler;
pub mod tokenizer;

use ndarray::{CowArray, Ix2};
use rand_chacha::ChaCha20Rng;

pub type Mat = ndarray::Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Full,
    Mixed,
}

impl Precision {
    /// Rounds a matrix through f32 when mixed; identity when full.
    pub fn round(self, m: &mut Mat) {
        if self == Precision::Mixed {
            m.mapv_inplace(|v| v as f32 as f64);
        }
    }
}

/// One trainable tensor. Biases and LayerNorm parameters opt out of weight
/// decay via `decay = false`.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Mat,
    pub grad: Mat,
    pub decay: bool,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Mat, decay: bool) -> Self {
        let grad = Mat::zeros(value.raw_dim());
        Param {
            name: name.into(),
            value,
            grad,
            decay,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    /// The value as seen by compute: the f64 master in full precision, an
    /// f32-quantized copy in mixed precision.
    pub fn effective(&self, p: Precision) -> CowArray<'_, f64, Ix2> {
        match p {
            Precision::Full => CowArray::from(self.value.view()),
            Precision::Mixed => CowArray::from(self.value.mapv(|v| v as f32 as f64)),
        }
    }
}

/// Training-time context threaded through forward passes. `dropout` is the
/// rate for encoder-side dropout sites; the head carries its own rate.
pub struct TrainCtx<'a> {
    pub precision: Precision,
    pub dropout: f64,
    pub rng: &'a mut ChaCha20Rng,
}

pub enum Mode<'a> {
    Eval,
    Train(TrainCtx<'a>),
}

impl Mode<'_> {
    pub fn precision(&self) -> Precision {
        match self {
            Mode::Eval => Precision::Full,
            Mode::Train(ctx) => ctx.precision,
        }
    }

    pub fn encoder_dropout(&self) -> f64 {
        match self {
            Mode::Eval => 0.0,
            Mode::Train(ctx) => ctx.dropout,
        }
    }
}

/// Standard-normal draw via Box-Muller, scaled by `std`.
pub fn sample_normal(rng: &mut ChaCha20Rng, std: f64) -> f64 {
    use rand::Rng;
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    std * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn normal_matrix(rng: &mut ChaCha20Rng, rows: usize, cols: usize, std: f64) -> Mat {
    Mat::from_shape_fn((rows, cols), |_| sample_normal(rng, std))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn mixed_rounding_truncates_to_f32_grid() {
        let mut m = Mat::from_elem((1, 1), 0.1);
        Precision::Full.round(&mut m);
        assert_eq!(m[[0, 0]], 0.1);
        Precision::Mixed.round(&mut m);
        assert_eq!(m[[0, 0]], 0.1f32 as f64);
        // Rounding is idempotent.
        let once = m[[0, 0]];
        Precision::Mixed.round(&mut m);
        assert_eq!(m[[0, 0]], once);
    }

    #[test]
    fn effective_param_quantizes_only_in_mixed() {
        let p = Param::new("w", Mat::from_elem((2, 2), 1.0 / 3.0), true);
        assert_eq!(p.effective(Precision::Full)[[0, 0]], 1.0 / 3.0);
        assert_eq!(
            p.effective(Precision::Mixed)[[0, 0]],
            (1.0f64 / 3.0) as f32 as f64
        );
        // The master value itself is untouched.
        assert_eq!(p.value[[0, 0]], 1.0 / 3.0);
    }

    #[test]
    fn normal_samples_have_roughly_unit_scale() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let m = normal_matrix(&mut rng, 200, 50, 1.0);
        let mean = m.mean().unwrap();
        let var = m.mapv(|v| v * v).mean().unwrap() - mean * mean;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
    }
}
