//! Layer primitives: linear, layer norm, GELU, dropout, multi-head
//! self-attention, and the post-LN transformer block. Each `forward` returns
//! the cache its `backward` needs; `backward` accumulates parameter gradients
//! and returns the gradient with respect to the layer input.

use ndarray::{s, Axis};
use rand::Rng;
use rand_chacha::ChaCha20Rng;

use super::{normal_matrix, Mat, Mode, Param, Precision};

pub struct Linear {
    pub w: Param,
    pub b: Param,
}

impl Linear {
    /// `std = None` uses Xavier scaling sqrt(2 / (in + out)).
    pub fn new(
        prefix: &str,
        input: usize,
        output: usize,
        std: Option<f64>,
        rng: &mut ChaCha20Rng,
    ) -> Self {
        let std = std.unwrap_or_else(|| (2.0 / (input + output) as f64).sqrt());
        Linear {
            w: Param::new(
                format!("{prefix}.weight"),
                normal_matrix(rng, input, output, std),
                true,
            ),
            b: Param::new(format!("{prefix}.bias"), Mat::zeros((1, output)), false),
        }
    }

    pub fn zeroed(prefix: &str, input: usize, output: usize) -> Self {
        Linear {
            w: Param::new(format!("{prefix}.weight"), Mat::zeros((input, output)), true),
            b: Param::new(format!("{prefix}.bias"), Mat::zeros((1, output)), false),
        }
    }

    pub fn forward(&self, x: &Mat, p: Precision) -> Mat {
        let w = self.w.effective(p);
        let b = self.b.effective(p);
        let mut y = x.dot(&w) + &b;
        p.round(&mut y);
        y
    }

    pub fn backward(&mut self, x: &Mat, dy: &Mat, p: Precision) -> Mat {
        let mut dw = x.t().dot(dy);
        p.round(&mut dw);
        let mut db = dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        p.round(&mut db);
        let w = self.w.effective(p);
        let mut dx = dy.dot(&w.t());
        p.round(&mut dx);
        self.w.grad += &dw;
        self.b.grad += &db;
        dx
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.w, &self.b]
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.w, &mut self.b]
    }
}

pub struct LayerNorm {
    pub gamma: Param,
    pub beta: Param,
    pub eps: f64,
}

pub struct LnCache {
    xhat: Mat,
    inv_std: Mat, // column vector [T, 1]
}

impl LayerNorm {
    pub fn new(prefix: &str, size: usize) -> Self {
        LayerNorm {
            gamma: Param::new(format!("{prefix}.gamma"), Mat::ones((1, size)), false),
            beta: Param::new(format!("{prefix}.beta"), Mat::zeros((1, size)), false),
            eps: 1e-12,
        }
    }

    pub fn forward(&self, x: &Mat, p: Precision) -> (Mat, LnCache) {
        let mean = x.mean_axis(Axis(1)).unwrap().insert_axis(Axis(1));
        let centered = x - &mean;
        let var = centered
            .mapv(|v| v * v)
            .mean_axis(Axis(1))
            .unwrap()
            .insert_axis(Axis(1));
        let inv_std = var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        let xhat = &centered * &inv_std;
        let mut y = &xhat * &self.gamma.effective(p) + &self.beta.effective(p);
        p.round(&mut y);
        (y, LnCache { xhat, inv_std })
    }

    /// dx = inv_std * (dyg - mean(dyg) - xhat * mean(dyg * xhat)), where
    /// dyg = dy * gamma; the two means run over the normalized axis.
    pub fn backward(&mut self, cache: &LnCache, dy: &Mat, p: Precision) -> Mat {
        let mut dgamma = (dy * &cache.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
        p.round(&mut dgamma);
        let mut dbeta = dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        p.round(&mut dbeta);
        self.gamma.grad += &dgamma;
        self.beta.grad += &dbeta;

        let dyg = dy * &self.gamma.effective(p);
        let m1 = dyg.mean_axis(Axis(1)).unwrap().insert_axis(Axis(1));
        let m2 = (&dyg * &cache.xhat)
            .mean_axis(Axis(1))
            .unwrap()
            .insert_axis(Axis(1));
        let mut dx = (&dyg - &m1 - &(&cache.xhat * &m2)) * &cache.inv_std;
        p.round(&mut dx);
        dx
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.gamma, &self.beta]
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.gamma, &mut self.beta]
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_K * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
}

/// Inverted-dropout mask holding 0 or 1/(1-rate); `None` when dropout was a
/// no-op (eval mode or rate 0).
pub struct DropoutCache {
    mask: Option<Mat>,
}

pub fn dropout_forward(mut x: Mat, rate: f64, mode: &mut Mode) -> (Mat, DropoutCache) {
    match mode {
        Mode::Train(ctx) if rate > 0.0 => {
            let keep = 1.0 - rate;
            let scale = 1.0 / keep;
            let mask = Mat::from_shape_fn(x.raw_dim(), |_| {
                if ctx.rng.random::<f64>() < rate {
                    0.0
                } else {
                    scale
                }
            });
            x *= &mask;
            ctx.precision.round(&mut x);
            (x, DropoutCache { mask: Some(mask) })
        }
        _ => (x, DropoutCache { mask: None }),
    }
}

pub fn dropout_backward(cache: &DropoutCache, dy: Mat, p: Precision) -> Mat {
    match &cache.mask {
        Some(mask) => {
            let mut dx = dy * mask;
            p.round(&mut dx);
            dx
        }
        None => dy,
    }
}

fn softmax_rows(m: &mut Mat) {
    for mut row in m.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

pub struct SelfAttention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub heads: usize,
}

pub struct AttnCache {
    x: Mat,
    q: Mat,
    k: Mat,
    v: Mat,
    probs: Vec<Mat>,
    concat: Mat,
}

impl SelfAttention {
    pub fn new(
        prefix: &str,
        hidden: usize,
        heads: usize,
        std: f64,
        rng: &mut ChaCha20Rng,
    ) -> Self {
        assert!(hidden.is_multiple_of(heads), "hidden size must divide into heads");
        SelfAttention {
            wq: Linear::new(&format!("{prefix}.wq"), hidden, hidden, Some(std), rng),
            wk: Linear::new(&format!("{prefix}.wk"), hidden, hidden, Some(std), rng),
            wv: Linear::new(&format!("{prefix}.wv"), hidden, hidden, Some(std), rng),
            wo: Linear::new(&format!("{prefix}.wo"), hidden, hidden, Some(std), rng),
            heads,
        }
    }

    pub fn forward(&self, x: &Mat, p: Precision) -> (Mat, AttnCache) {
        let (t, hidden) = x.dim();
        let d = hidden / self.heads;
        let scale = 1.0 / (d as f64).sqrt();
        let q = self.wq.forward(x, p);
        let k = self.wk.forward(x, p);
        let v = self.wv.forward(x, p);
        let mut concat = Mat::zeros((t, hidden));
        let mut probs = Vec::with_capacity(self.heads);
        for head in 0..self.heads {
            let cols = s![.., head * d..(head + 1) * d];
            let qh = q.slice(cols);
            let kh = k.slice(cols);
            let vh = v.slice(cols);
            let mut scores = qh.dot(&kh.t());
            scores.mapv_inplace(|s| s * scale);
            p.round(&mut scores);
            softmax_rows(&mut scores);
            p.round(&mut scores);
            let mut oh = scores.dot(&vh);
            p.round(&mut oh);
            concat.slice_mut(cols).assign(&oh);
            probs.push(scores);
        }
        let y = self.wo.forward(&concat, p);
        let cache = AttnCache {
            x: x.clone(),
            q,
            k,
            v,
            probs,
            concat,
        };
        (y, cache)
    }

    pub fn backward(&mut self, cache: &AttnCache, dy: &Mat, p: Precision) -> Mat {
        let (t, hidden) = cache.x.dim();
        let d = hidden / self.heads;
        let scale = 1.0 / (d as f64).sqrt();
        let dconcat = self.wo.backward(&cache.concat, dy, p);
        let mut dq = Mat::zeros((t, hidden));
        let mut dk = Mat::zeros((t, hidden));
        let mut dv = Mat::zeros((t, hidden));
        for head in 0..self.heads {
            let cols = s![.., head * d..(head + 1) * d];
            let doh = dconcat.slice(cols);
            let a = &cache.probs[head];
            let qh = cache.q.slice(cols);
            let kh = cache.k.slice(cols);
            let vh = cache.v.slice(cols);
            let da = doh.dot(&vh.t());
            let dvh = a.t().dot(&doh);
            // Softmax backward per row: ds = a * (da - sum(da * a)).
            let rowsum = (&da * a).sum_axis(Axis(1)).insert_axis(Axis(1));
            let mut ds = a * &(&da - &rowsum);
            ds.mapv_inplace(|v| v * scale);
            let dqh = ds.dot(&kh);
            let dkh = ds.t().dot(&qh);
            dq.slice_mut(cols).assign(&dqh);
            dk.slice_mut(cols).assign(&dkh);
            dv.slice_mut(cols).assign(&dvh);
        }
        p.round(&mut dq);
        p.round(&mut dk);
        p.round(&mut dv);
        let mut dx = self.wq.backward(&cache.x, &dq, p);
        dx += &self.wk.backward(&cache.x, &dk, p);
        dx += &self.wv.backward(&cache.x, &dv, p);
        dx
    }

    pub fn params(&self) -> Vec<&Param> {
        [&self.wq, &self.wk, &self.wv, &self.wo]
            .into_iter()
            .flat_map(Linear::params)
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        [&mut self.wq, &mut self.wk, &mut self.wv, &mut self.wo]
            .into_iter()
            .flat_map(Linear::params_mut)
            .collect()
    }
}

pub struct FeedForward {
    pub lin1: Linear,
    pub lin2: Linear,
}

pub struct FfCache {
    x: Mat,
    pre: Mat,
    act: Mat,
}

impl FeedForward {
    pub fn new(prefix: &str, hidden: usize, ff: usize, std: f64, rng: &mut ChaCha20Rng) -> Self {
        FeedForward {
            lin1: Linear::new(&format!("{prefix}.lin1"), hidden, ff, Some(std), rng),
            lin2: Linear::new(&format!("{prefix}.lin2"), ff, hidden, Some(std), rng),
        }
    }

    pub fn forward(&self, x: &Mat, p: Precision) -> (Mat, FfCache) {
        let pre = self.lin1.forward(x, p);
        let mut act = pre.mapv(gelu);
        p.round(&mut act);
        let y = self.lin2.forward(&act, p);
        let cache = FfCache {
            x: x.clone(),
            pre,
            act,
        };
        (y, cache)
    }

    pub fn backward(&mut self, cache: &FfCache, dy: &Mat, p: Precision) -> Mat {
        let dact = self.lin2.backward(&cache.act, dy, p);
        let mut dpre = dact * &cache.pre.mapv(gelu_grad);
        p.round(&mut dpre);
        self.lin1.backward(&cache.x, &dpre, p)
    }

    pub fn params(&self) -> Vec<&Param> {
        [&self.lin1, &self.lin2]
            .into_iter()
            .flat_map(Linear::params)
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        [&mut self.lin1, &mut self.lin2]
            .into_iter()
            .flat_map(Linear::params_mut)
            .collect()
    }
}

/// Post-LN transformer block: LN(x + drop(attn(x))) then LN(h + drop(ff(h))).
pub struct TransformerLayer {
    pub attn: SelfAttention,
    pub ln1: LayerNorm,
    pub ff: FeedForward,
    pub ln2: LayerNorm,
}

pub struct LayerCache {
    attn: AttnCache,
    drop1: DropoutCache,
    ln1: LnCache,
    ff: FfCache,
    drop2: DropoutCache,
    ln2: LnCache,
}

impl TransformerLayer {
    pub fn new(
        prefix: &str,
        hidden: usize,
        heads: usize,
        ff: usize,
        std: f64,
        rng: &mut ChaCha20Rng,
    ) -> Self {
        TransformerLayer {
            attn: SelfAttention::new(&format!("{prefix}.attn"), hidden, heads, std, rng),
            ln1: LayerNorm::new(&format!("{prefix}.ln1"), hidden),
            ff: FeedForward::new(&format!("{prefix}.ff"), hidden, ff, std, rng),
            ln2: LayerNorm::new(&format!("{prefix}.ln2"), hidden),
        }
    }

    pub fn forward(&self, x: &Mat, mode: &mut Mode) -> (Mat, LayerCache) {
        let p = mode.precision();
        let rate = mode.encoder_dropout();
        let (a, attn) = self.attn.forward(x, p);
        let (a, drop1) = dropout_forward(a, rate, mode);
        let (h1, ln1) = self.ln1.forward(&(x + &a), p);
        let (f, ff) = self.ff.forward(&h1, p);
        let (f, drop2) = dropout_forward(f, rate, mode);
        let (y, ln2) = self.ln2.forward(&(&h1 + &f), p);
        let cache = LayerCache {
            attn,
            drop1,
            ln1,
            ff,
            drop2,
            ln2,
        };
        (y, cache)
    }

    pub fn backward(&mut self, cache: &LayerCache, dy: &Mat, p: Precision) -> Mat {
        let dsum2 = self.ln2.backward(&cache.ln2, dy, p);
        let df = dropout_backward(&cache.drop2, dsum2.clone(), p);
        let mut dh1 = self.ff.backward(&cache.ff, &df, p);
        dh1 += &dsum2;
        let dsum1 = self.ln1.backward(&cache.ln1, &dh1, p);
        let da = dropout_backward(&cache.drop1, dsum1.clone(), p);
        let mut dx = self.attn.backward(&cache.attn, &da, p);
        dx += &dsum1;
        dx
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out = self.attn.params();
        out.extend(self.ln1.params());
        out.extend(self.ff.params());
        out.extend(self.ln2.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = self.attn.params_mut();
        out.extend(self.ln1.params_mut());
        out.extend(self.ff.params_mut());
        out.extend(self.ln2.params_mut());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(12)
    }

    /// Scalar test loss: L = 0.5 * sum(y^2), so dL/dy = y.
    fn loss_of(y: &Mat) -> f64 {
        0.5 * y.mapv(|v| v * v).sum()
    }

    #[test]
    fn linear_backward_matches_finite_differences() {
        let mut rng = rng();
        let mut lin = Linear::new("t", 4, 3, None, &mut rng);
        let x = normal_matrix(&mut rng, 5, 4, 1.0);
        let y = lin.forward(&x, Precision::Full);
        let dx = lin.backward(&x, &y.clone(), Precision::Full);

        let h = 1e-6;
        // Weight gradient.
        let base = lin.w.value[[1, 2]];
        lin.w.value[[1, 2]] = base + h;
        let up = loss_of(&lin.forward(&x, Precision::Full));
        lin.w.value[[1, 2]] = base - h;
        let down = loss_of(&lin.forward(&x, Precision::Full));
        lin.w.value[[1, 2]] = base;
        let fd = (up - down) / (2.0 * h);
        assert!((lin.w.grad[[1, 2]] - fd).abs() / fd.abs().max(1.0) < 1e-6);

        // Input gradient.
        let mut x2 = x.clone();
        x2[[0, 1]] += h;
        let up = loss_of(&lin.forward(&x2, Precision::Full));
        x2[[0, 1]] -= 2.0 * h;
        let down = loss_of(&lin.forward(&x2, Precision::Full));
        let fd = (up - down) / (2.0 * h);
        assert!((dx[[0, 1]] - fd).abs() / fd.abs().max(1.0) < 1e-6);
    }

    #[test]
    fn layernorm_backward_matches_finite_differences() {
        let mut rng = rng();
        let mut ln = LayerNorm::new("t", 6);
        ln.gamma.value = normal_matrix(&mut rng, 1, 6, 0.5) + 1.0;
        let x = normal_matrix(&mut rng, 4, 6, 1.3);
        let (y, cache) = ln.forward(&x, Precision::Full);
        let dx = ln.backward(&cache, &y.clone(), Precision::Full);

        let h = 1e-6;
        for idx in [(0, 0), (2, 3), (3, 5)] {
            let mut x2 = x.clone();
            x2[idx] += h;
            let up = loss_of(&ln.forward(&x2, Precision::Full).0);
            x2[idx] -= 2.0 * h;
            let down = loss_of(&ln.forward(&x2, Precision::Full).0);
            let fd = (up - down) / (2.0 * h);
            assert!(
                (dx[idx] - fd).abs() / fd.abs().max(1e-3) < 1e-5,
                "dx{idx:?} analytic {} vs fd {fd}",
                dx[idx]
            );
        }
        let base = ln.gamma.value[[0, 2]];
        let mut lnw = ln;
        lnw.gamma.value[[0, 2]] = base + h;
        let up = loss_of(&lnw.forward(&x, Precision::Full).0);
        lnw.gamma.value[[0, 2]] = base - h;
        let down = loss_of(&lnw.forward(&x, Precision::Full).0);
        let fd = (up - down) / (2.0 * h);
        assert!((lnw.gamma.grad[[0, 2]] - fd).abs() / fd.abs().max(1e-3) < 1e-5);
    }

    #[test]
    fn attention_rows_are_convex_combinations() {
        let mut rng = rng();
        let attn = SelfAttention::new("t", 8, 2, 0.2, &mut rng);
        let x = normal_matrix(&mut rng, 5, 8, 1.0);
        let (y, cache) = attn.forward(&x, Precision::Full);
        assert_eq!(y.dim(), (5, 8));
        for probs in &cache.probs {
            for row in probs.axis_iter(Axis(0)) {
                assert!((row.sum() - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|v| *v >= 0.0));
            }
        }
    }

    #[test]
    fn transformer_layer_backward_matches_finite_differences() {
        let mut rng = rng();
        let mut layer = TransformerLayer::new("t", 8, 2, 16, 0.3, &mut rng);
        let x = normal_matrix(&mut rng, 3, 8, 0.8);
        let (y, cache) = layer.forward(&x, &mut Mode::Eval);
        let dx = layer.backward(&cache, &y.clone(), Precision::Full);

        let h = 1e-6;
        for idx in [(0, 0), (1, 4), (2, 7)] {
            let mut x2 = x.clone();
            x2[idx] += h;
            let up = loss_of(&layer.forward(&x2, &mut Mode::Eval).0);
            x2[idx] -= 2.0 * h;
            let down = loss_of(&layer.forward(&x2, &mut Mode::Eval).0);
            let fd = (up - down) / (2.0 * h);
            assert!(
                (dx[idx] - fd).abs() / fd.abs().max(1e-3) < 1e-4,
                "dx{idx:?} analytic {} vs fd {fd}",
                dx[idx]
            );
        }

        // A parameter deep inside the block: first feed-forward weight.
        let fd = {
            let base = layer.ff.lin1.w.value[[3, 9]];
            layer.ff.lin1.w.value[[3, 9]] = base + h;
            let up = loss_of(&layer.forward(&x, &mut Mode::Eval).0);
            layer.ff.lin1.w.value[[3, 9]] = base - h;
            let down = loss_of(&layer.forward(&x, &mut Mode::Eval).0);
            layer.ff.lin1.w.value[[3, 9]] = base;
            (up - down) / (2.0 * h)
        };
        let analytic = layer.ff.lin1.w.grad[[3, 9]];
        assert!(
            (analytic - fd).abs() / fd.abs().max(1e-3) < 1e-4,
            "ff grad analytic {analytic} vs fd {fd}"
        );
    }

    #[test]
    fn gelu_grad_matches_finite_differences() {
        let h = 1e-6;
        for x in [-3.0, -1.0, -0.1, 0.0, 0.4, 2.5] {
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((gelu_grad(x) - fd).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn dropout_is_identity_in_eval_and_masks_in_train() {
        let x = Mat::ones((10, 10));
        let (y, cache) = dropout_forward(x.clone(), 0.5, &mut Mode::Eval);
        assert_eq!(y, x);
        assert!(cache.mask.is_none());

        let mut rng = rng();
        let mut mode = Mode::Train(super::super::TrainCtx {
            precision: Precision::Full,
            dropout: 0.5,
            rng: &mut rng,
        });
        let (y, cache) = dropout_forward(x.clone(), 0.5, &mut mode);
        let mask = cache.mask.as_ref().unwrap();
        let zeros = mask.iter().filter(|v| **v == 0.0).count();
        assert!(zeros > 20 && zeros < 80, "zeros {zeros}");
        assert!(y.iter().all(|v| *v == 0.0 || *v == 2.0));
        // Backward routes gradients through the same mask.
        let dx = dropout_backward(&cache, Mat::ones((10, 10)), Precision::Full);
        assert_eq!(dx, *mask);
    }
}
