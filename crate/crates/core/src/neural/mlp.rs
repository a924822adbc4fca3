//! Dense stack with a shared hidden activation and a configurable output
//! activation; the building block of the encoder, generator, discriminator
//! and the tandem dense block.

use rand_chacha::rand_core::RngCore;
use serde::{Deserialize, Serialize};

use super::activation::{relu_apply, relu_backprop, sigmoid_apply, sigmoid_backprop};
use super::adam::AdamState;
use super::dense::{Dense, DenseGrads};
use super::tensor::Tensor;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    fn apply(&self, x: &Tensor) -> Tensor {
        match self {
            Activation::Relu => relu_apply(x),
            Activation::Sigmoid => sigmoid_apply(x),
            Activation::Linear => x.clone(),
        }
    }

    fn backprop(&self, pre: &Tensor, post: &Tensor, upstream: &Tensor) -> Result<Tensor> {
        match self {
            Activation::Relu => relu_backprop(pre, upstream),
            Activation::Sigmoid => sigmoid_backprop(post, upstream),
            Activation::Linear => Ok(upstream.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub hidden: Activation,
    pub output: Activation,
}

pub struct MlpCache {
    layer_inputs: Vec<Tensor>,
    pre_acts: Vec<Tensor>,
    post_acts: Vec<Tensor>,
}

impl MlpCache {
    pub fn output(&self) -> &Tensor {
        self.post_acts.last().expect("non-empty mlp")
    }
}

impl Mlp {
    /// `widths = [in, h1, ..., out]`.
    pub fn init(widths: &[usize], hidden: Activation, output: Activation, rng: &mut impl RngCore) -> Self {
        let layers = widths
            .windows(2)
            .map(|w| Dense::init(w[0], w[1], rng))
            .collect();
        Mlp {
            layers,
            hidden,
            output,
        }
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = vec![self.layers[0].input_width()];
        w.extend(self.layers.iter().map(|l| l.output_width()));
        w
    }

    pub fn forward(&self, x: &Tensor) -> Result<MlpCache> {
        let n = self.layers.len();
        let mut layer_inputs = Vec::with_capacity(n);
        let mut pre_acts = Vec::with_capacity(n);
        let mut post_acts = Vec::with_capacity(n);
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            layer_inputs.push(cur.clone());
            let pre = layer.apply(&cur)?;
            let act = if i + 1 == n { self.output } else { self.hidden };
            let post = act.apply(&pre);
            pre_acts.push(pre);
            cur = post.clone();
            post_acts.push(post);
        }
        Ok(MlpCache {
            layer_inputs,
            pre_acts,
            post_acts,
        })
    }

    /// Returns (input gradient, per-layer parameter gradients in layer order).
    pub fn backward(&self, cache: &MlpCache, upstream: &Tensor) -> Result<(Tensor, Vec<DenseGrads>)> {
        let n = self.layers.len();
        let mut grads: Vec<Option<DenseGrads>> = (0..n).map(|_| None).collect();
        let mut up = upstream.clone();
        for i in (0..n).rev() {
            let act = if i + 1 == n { self.output } else { self.hidden };
            let d_pre = act.backprop(&cache.pre_acts[i], &cache.post_acts[i], &up)?;
            let (dx, g) = self.layers[i].backprop(&cache.layer_inputs[i], &d_pre)?;
            grads[i] = Some(g);
            up = dx;
        }
        Ok((up, grads.into_iter().map(|g| g.unwrap()).collect()))
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Feed parameter bytes to a checksum, in canonical layer order.
    pub fn digest(&self, hasher: &mut crc32fast::Hasher) {
        for l in &self.layers {
            l.w.byte_digest(hasher);
            l.b.byte_digest(hasher);
        }
    }
}

/// Adam states mirroring an [`Mlp`]'s parameters.
pub struct MlpOptimizer {
    states: Vec<AdamState>,
}

impl MlpOptimizer {
    pub fn new(mlp: &Mlp, lr: f64) -> Self {
        let mut states = Vec::with_capacity(mlp.layers.len() * 2);
        for l in &mlp.layers {
            states.push(AdamState::new(l.w.shape(), lr));
            states.push(AdamState::new(l.b.shape(), lr));
        }
        MlpOptimizer { states }
    }

    pub fn step(&mut self, mlp: &mut Mlp, grads: &[DenseGrads]) -> Result<()> {
        debug_assert_eq!(grads.len(), mlp.layers.len());
        for (i, (layer, g)) in mlp.layers.iter_mut().zip(grads).enumerate() {
            self.states[2 * i].step(&mut layer.w, &g.w)?;
            self.states[2 * i + 1].step(&mut layer.b, &g.b)?;
        }
        Ok(())
    }
}

/// Accumulate `src` into `acc` (used when one backward pass contributes to a
/// parameter from several paths).
pub fn add_grads(acc: &mut [DenseGrads], src: &[DenseGrads]) -> Result<()> {
    debug_assert_eq!(acc.len(), src.len());
    for (a, s) in acc.iter_mut().zip(src) {
        a.w.add_in_place(&s.w)?;
        a.b.add_in_place(&s.b)?;
    }
    Ok(())
}
