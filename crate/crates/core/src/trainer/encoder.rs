//! Per-frame two-layer perceptron with a log-softmax head.
//!
//! The input `x` at frame `t` stacks frames `t-c ..= t+c` (`c` = `context`,
//! out-of-range frames clamp to the first or last frame).
//! `hidden = tanh(W1 x + b1)`, `logits = W2 hidden + b2`, output rows are
//! `log_softmax(logits)`. Weights are row-major with one row per output unit.

use std::fmt::Write as _;

use rand::Rng;

use crate::corruption::utterance_rng;
use crate::error::{Error, Result};
use crate::loss::EmissionMatrix;
use crate::trainer::data::Features;

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    /// Dimension of one feature frame.
    pub input_dim: usize,
    /// Neighbouring frames stacked on each side.
    pub context: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Gradients with the same layout as [`EncoderParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderGrads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Activations kept from the forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    hidden: Vec<f64>,
    probs: Vec<f64>,
}

impl EncoderParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        Self::zeros_with_context(input_dim, 0, hidden_dim, output_dim)
    }

    pub fn zeros_with_context(
        input_dim: usize,
        context: usize,
        hidden_dim: usize,
        output_dim: usize,
    ) -> Self {
        EncoderParams {
            input_dim,
            context,
            hidden_dim,
            output_dim,
            w1: vec![0.0; hidden_dim * (2 * context + 1) * input_dim],
            b1: vec![0.0; hidden_dim],
            w2: vec![0.0; output_dim * hidden_dim],
            b2: vec![0.0; output_dim],
        }
    }

    /// Uniform `±1/sqrt(fan_in)` weights, zero biases.
    pub fn init(
        input_dim: usize,
        context: usize,
        hidden_dim: usize,
        output_dim: usize,
        seed: u64,
    ) -> Self {
        let mut p = Self::zeros_with_context(input_dim, context, hidden_dim, output_dim);
        let mut rng = utterance_rng(seed, 0);
        let r1 = 1.0 / (p.splice_dim() as f64).sqrt();
        for w in &mut p.w1 {
            *w = rng.random_range(-r1..r1);
        }
        let r2 = 1.0 / (hidden_dim as f64).sqrt();
        for w in &mut p.w2 {
            *w = rng.random_range(-r2..r2);
        }
        p
    }

    /// Width of the stacked first-layer input.
    pub fn splice_dim(&self) -> usize {
        (2 * self.context + 1) * self.input_dim
    }

    pub fn zero_grads(&self) -> EncoderGrads {
        EncoderGrads {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
        }
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    fn slices_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    /// `self -= step * g`.
    pub fn apply(&mut self, g: &EncoderGrads, step: f64) {
        for (p, g) in self.slices_mut().into_iter().zip(g.slices()) {
            for (x, d) in p.iter_mut().zip(g) {
                *x -= step * d;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    const MAGIC: &'static [u8; 8] = b"BTCMLP02";
    const HEADER: usize = 24;

    /// Binary form: 8 magic bytes `BTCMLP02`, then input size, context,
    /// hidden and output sizes as little-endian `u32`, then `w1`, `b1`, `w2`, `b2` as
    /// little-endian `f64` in row-major order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::HEADER + 8 * self.num_params());
        out.extend_from_slice(Self::MAGIC);
        for d in [self.input_dim, self.context, self.hidden_dim, self.output_dim] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in [&self.w1, &self.b1, &self.w2, &self.b2] {
            for x in v.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < Self::HEADER || &bytes[..8] != Self::MAGIC {
            return Err(Error::Model("bad magic".into()));
        }
        let dim = |i: usize| {
            u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().expect("4 bytes")) as usize
        };
        let mut p = Self::zeros_with_context(dim(0), dim(1), dim(2), dim(3));
        let expected = Self::HEADER + 8 * p.num_params();
        if bytes.len() != expected {
            return Err(Error::Model(format!(
                "expected {expected} bytes, found {}",
                bytes.len()
            )));
        }
        let mut chunks = bytes[Self::HEADER..].chunks_exact(8);
        for v in p.slices_mut() {
            for x in v.iter_mut() {
                *x = f64::from_le_bytes(chunks.next().expect("length checked").try_into().expect("8"));
            }
        }
        Ok(p)
    }

    /// Human-readable dump, one named block per tensor.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "input_dim {}\ncontext {}\nhidden_dim {}\noutput_dim {}\n",
            self.input_dim, self.context, self.hidden_dim, self.output_dim
        );
        let blocks = [
            ("w1", &self.w1, self.splice_dim()),
            ("b1", &self.b1, self.hidden_dim),
            ("w2", &self.w2, self.hidden_dim),
            ("b2", &self.b2, self.output_dim),
        ];
        for (name, v, cols) in blocks {
            let _ = writeln!(out, "{name}");
            for row in v.chunks(cols.max(1)) {
                let r: Vec<String> = row.iter().map(|x| format!("{x:.17e}")).collect();
                let _ = writeln!(out, "{}", r.join(" "));
            }
        }
        out
    }
}

impl EncoderGrads {
    fn slices(&self) -> [&Vec<f64>; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn slices_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn add_assign(&mut self, o: &EncoderGrads) {
        for (a, b) in self.slices_mut().into_iter().zip(o.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|v| v.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, k: f64) {
        for v in self.slices_mut() {
            for x in v.iter_mut() {
                *x *= k;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.slices().iter().all(|v| v.iter().all(|&x| x == 0.0))
    }
}

/// Emission rows for every frame.
pub fn encoder_forward(params: &EncoderParams, features: &Features) -> Result<EmissionMatrix> {
    encoder_forward_cached(params, features).map(|(e, _)| e)
}

pub fn encoder_forward_cached(
    params: &EncoderParams,
    features: &Features,
) -> Result<(EmissionMatrix, ForwardCache)> {
    if features.dim != params.input_dim {
        return Err(Error::Model(format!(
            "feature dim {} does not match encoder input {}",
            features.dim, params.input_dim
        )));
    }
    let (x_dim, h_dim, o_dim) = (params.splice_dim(), params.hidden_dim, params.output_dim);
    let mut x = vec![0.0; x_dim];
    let mut hidden = vec![0.0; features.frames * h_dim];
    let mut logp = vec![0.0; features.frames * o_dim];
    let mut probs = vec![0.0; features.frames * o_dim];
    for t in 0..features.frames {
        splice(features, params.context, t, &mut x);
        let h = &mut hidden[t * h_dim..(t + 1) * h_dim];
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &params.w1[j * x_dim..(j + 1) * x_dim];
            *hj = (params.b1[j] + dot(row, &x)).tanh();
        }
        let z = &mut logp[t * o_dim..(t + 1) * o_dim];
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = params.b2[k] + dot(&params.w2[k * h_dim..(k + 1) * h_dim], h);
        }
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for (k, zk) in z.iter_mut().enumerate() {
            *zk -= lse;
            probs[t * o_dim + k] = zk.exp();
        }
    }
    let e = EmissionMatrix::unnormalized(features.frames, o_dim, logp)?;
    Ok((e, ForwardCache { hidden, probs }))
}

/// Parameter gradients given `∂L/∂(log-probabilities)`.
pub fn encoder_backward(
    params: &EncoderParams,
    features: &Features,
    grad_wrt_emissions: &[f64],
) -> Result<EncoderGrads> {
    let (_, cache) = encoder_forward_cached(params, features)?;
    Ok(encoder_backward_cached(params, features, &cache, grad_wrt_emissions))
}

pub fn encoder_backward_cached(
    params: &EncoderParams,
    features: &Features,
    cache: &ForwardCache,
    grad: &[f64],
) -> EncoderGrads {
    let (x_dim, h_dim, o_dim) = (params.splice_dim(), params.hidden_dim, params.output_dim);
    assert_eq!(grad.len(), features.frames * o_dim, "gradient shape");
    let mut g = params.zero_grads();
    let mut x = vec![0.0; x_dim];
    let mut dz = vec![0.0; o_dim];
    let mut dh = vec![0.0; h_dim];
    for t in 0..features.frames {
        let gt = &grad[t * o_dim..(t + 1) * o_dim];
        if gt.iter().all(|&v| v == 0.0) {
            continue;
        }
        // log-softmax Jacobian: dz = g - softmax * sum(g)
        let total: f64 = gt.iter().sum();
        let p = &cache.probs[t * o_dim..(t + 1) * o_dim];
        for ((d, &gk), &pk) in dz.iter_mut().zip(gt).zip(p) {
            *d = gk - pk * total;
        }
        let h = &cache.hidden[t * h_dim..(t + 1) * h_dim];
        dh.iter_mut().for_each(|v| *v = 0.0);
        for (k, &dzk) in dz.iter().enumerate() {
            g.b2[k] += dzk;
            let w_row = &params.w2[k * h_dim..(k + 1) * h_dim];
            let gw_row = &mut g.w2[k * h_dim..(k + 1) * h_dim];
            for j in 0..h_dim {
                gw_row[j] += dzk * h[j];
                dh[j] += dzk * w_row[j];
            }
        }
        splice(features, params.context, t, &mut x);
        for j in 0..h_dim {
            let da = dh[j] * (1.0 - h[j] * h[j]);
            g.b1[j] += da;
            let gw_row = &mut g.w1[j * x_dim..(j + 1) * x_dim];
            for (gw, &xi) in gw_row.iter_mut().zip(&x) {
                *gw += da * xi;
            }
        }
    }
    g
}

/// Stacks frames `t-c ..= t+c` into `out`, clamping at the edges.
fn splice(features: &Features, context: usize, t: usize, out: &mut [f64]) {
    let d = features.dim;
    let last = features.frames - 1;
    for k in 0..=2 * context {
        let s = (t + k).saturating_sub(context).min(last);
        out[k * d..(k + 1) * d].copy_from_slice(features.frame(s));
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semiring::logsumexp;

    fn feats(frames: usize, dim: usize, seed: u64) -> Features {
        let mut rng = utterance_rng(seed, 9);
        Features {
            frames,
            dim,
            values: (0..frames * dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    #[test]
    fn zero_params_give_uniform_rows() {
        let p = EncoderParams::zeros(3, 4, 5);
        let e = encoder_forward(&p, &feats(2, 3, 0)).unwrap();
        for v in e.values() {
            assert!((v + 5f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn rows_normalized() {
        let p = EncoderParams::init(3, 0, 6, 5, 4);
        let e = encoder_forward(&p, &feats(7, 3, 1)).unwrap();
        for t in 0..7 {
            assert!(logsumexp(e.row(t)).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_incoming_gradient() {
        let p = EncoderParams::init(3, 0, 6, 5, 4);
        let f = feats(4, 3, 2);
        let g = encoder_backward(&p, &f, &[0.0; 4 * 5]).unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn single_frame_gradient_only_sees_that_frame() {
        let p = EncoderParams::init(3, 0, 6, 5, 4);
        let f = feats(4, 3, 2);
        let mut gin = vec![0.0; 4 * 5];
        gin[2 * 5 + 1] = 1.0;
        let g = encoder_backward(&p, &f, &gin).unwrap();
        // changing the other frames leaves the gradient untouched
        let mut f2 = f.clone();
        for t in [0, 1, 3] {
            for d in 0..3 {
                f2.values[t * 3 + d] += 0.5;
            }
        }
        let g2 = encoder_backward(&p, &f2, &gin).unwrap();
        assert_eq!(g, g2);
        let only = Features {
            frames: 1,
            dim: 3,
            values: f.frame(2).to_vec(),
        };
        let mut gin1 = vec![0.0; 5];
        gin1[1] = 1.0;
        assert_eq!(encoder_backward(&p, &only, &gin1).unwrap(), g);
    }

    #[test]
    fn context_frames_are_clamped_at_edges() {
        let p = EncoderParams::init(2, 1, 3, 4, 5);
        let f = feats(3, 2, 1);
        let e = encoder_forward(&p, &f).unwrap();
        // a single frame padded on both sides equals its own 3-frame utterance
        let rep = Features {
            frames: 3,
            dim: 2,
            values: [f.frame(0), f.frame(0), f.frame(1)].concat(),
        };
        let e2 = encoder_forward(&p, &rep).unwrap();
        assert_eq!(e.row(0), e2.row(1));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let p = EncoderParams::init(2, 1, 3, 4, 11);
        let f = feats(3, 2, 5);
        let gin: Vec<f64> = (0..12).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let objective = |p: &EncoderParams| -> f64 {
            let e = encoder_forward(p, &f).unwrap();
            e.values().iter().zip(&gin).map(|(a, b)| a * b).sum()
        };
        let g = encoder_backward(&p, &f, &gin).unwrap();
        let h = 1e-5;
        let mut q = p.clone();
        for (idx, analytic) in g.w1.iter().enumerate() {
            q.w1[idx] = p.w1[idx] + h;
            let up = objective(&q);
            q.w1[idx] = p.w1[idx] - h;
            let down = objective(&q);
            q.w1[idx] = p.w1[idx];
            let fd = (up - down) / (2.0 * h);
            assert!((fd - analytic).abs() < 1e-7 * fd.abs().max(1.0), "{fd} vs {analytic}");
        }
    }

    #[test]
    fn binary_round_trip() {
        let p = EncoderParams::init(3, 2, 4, 5, 1);
        let bytes = p.to_bytes();
        assert_eq!(&bytes[..8], b"BTCMLP02");
        assert_eq!(EncoderParams::from_bytes(&bytes).unwrap(), p);
        assert!(EncoderParams::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(EncoderParams::from_bytes(b"nope").is_err());
        assert!(p.to_text().starts_with("input_dim 3\ncontext 2\n"));
    }

    #[test]
    fn dimension_mismatch() {
        let p = EncoderParams::zeros(3, 4, 5);
        assert!(encoder_forward(&p, &feats(2, 2, 0)).is_err());
    }
}
