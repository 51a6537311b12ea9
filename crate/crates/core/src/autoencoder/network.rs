//! Encoder–decoder network with mirrored skip connections.
//!
//! Encoder stage `k` (0-based) is `conv3x3 → relu → maxpool2`, producing
//! `base·2^k` channels. Decoder stage `j` is `deconv3x3/2 → relu`, upsampling
//! to the resolution of encoder stage `4 − j` and concatenating that stage's
//! pre-pool features. A final `conv3x3 → sigmoid` head maps back to the five
//! input frames.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{
    concat_channels, conv2d, conv2d_backward, deconv2d, deconv2d_backward, maxpool2,
    maxpool2_backward, split_channels, Activation, FilterBank, PoolIndexMap, KERNEL,
};
use crate::tensor::{Real, Tensor};

/// Number of pooling stages, and of decoder stages.
pub const STAGES: usize = 5;
pub const INPUT_FRAMES: usize = 5;
pub const INPUT_SIZE: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub base_channels: usize,
    pub input_frames: usize,
    pub input_size: usize,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            base_channels: 16,
            input_frames: INPUT_FRAMES,
            input_size: INPUT_SIZE,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn with_base(base_channels: usize, seed: u64) -> Self {
        Self {
            base_channels,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_channels == 0 || self.base_channels > 1 << 12 {
            return Err(Error::Argument(format!(
                "base_channels must be in 1..=4096, got {}",
                self.base_channels
            )));
        }
        if self.input_frames != INPUT_FRAMES {
            return Err(Error::Argument(format!(
                "input_frames must be {INPUT_FRAMES}, got {}",
                self.input_frames
            )));
        }
        let div = 1 << STAGES;
        if self.input_size == 0 || self.input_size % div != 0 {
            return Err(Error::Argument(format!(
                "input_size must be a positive multiple of {div}, got {}",
                self.input_size
            )));
        }
        Ok(())
    }

    /// Channels produced by encoder stage `k`.
    pub fn stage_channels(&self, k: usize) -> usize {
        self.base_channels << k
    }

    /// `(in, out)` channels of every layer in storage order: encoder stages,
    /// decoder stages, head.
    pub fn layer_channels(&self) -> Vec<(usize, usize)> {
        let c = |k| self.stage_channels(k);
        let mut v = Vec::with_capacity(2 * STAGES + 1);
        for k in 0..STAGES {
            v.push((if k == 0 { self.input_frames } else { c(k - 1) }, c(k)));
        }
        for j in 0..STAGES {
            let m = STAGES - 1 - j;
            v.push((if j == 0 { c(STAGES - 1) } else { 2 * c(m + 1) }, c(m)));
        }
        v.push((2 * c(0), self.input_frames));
        v
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs_seen: u64,
    pub steps: u64,
    pub loss_history: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network<T = f32> {
    config: NetworkConfig,
    pub encoder: Vec<FilterBank<T>>,
    pub decoder: Vec<FilterBank<T>>,
    pub head: FilterBank<T>,
    pub meta: TrainingMeta,
}

/// The single-precision network used for training and scoring.
pub type Model = Network<f32>;

/// Activations kept from a forward pass for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    enc_in: Vec<Tensor<T>>,
    enc_act: Vec<Tensor<T>>,
    pool_idx: Vec<PoolIndexMap>,
    bottleneck: Tensor<T>,
    dec_in: Vec<Tensor<T>>,
    dec_act: Vec<Tensor<T>>,
    head_in: Tensor<T>,
    output: Tensor<T>,
}

impl<T: Real> ForwardCache<T> {
    /// Pre-pool activation of encoder stage `k`.
    pub fn encoder_features(&self, k: usize) -> &Tensor<T> {
        &self.enc_act[k]
    }

    /// Pooled output of encoder stage `k`.
    pub fn pooled(&self, k: usize) -> &Tensor<T> {
        if k + 1 < STAGES {
            &self.enc_in[k + 1]
        } else {
            &self.bottleneck
        }
    }

    pub fn bottleneck(&self) -> &Tensor<T> {
        &self.bottleneck
    }

    /// Upsampled activation of decoder stage `j`, before its skip concat.
    pub fn decoder_features(&self, j: usize) -> &Tensor<T> {
        &self.dec_act[j]
    }

    pub fn output(&self) -> &Tensor<T> {
        &self.output
    }
}

impl<T: Real> Network<T> {
    /// Builds a network with fan-in scaled uniform weights drawn from
    /// `config.seed` and zero biases.
    pub fn build(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut layers: Vec<FilterBank<T>> = config
            .layer_channels()
            .into_iter()
            .map(|(cin, cout)| {
                let bound = (6.0 / (cin * KERNEL * KERNEL) as f64).sqrt();
                let mut fb = FilterBank::zeros(cout, cin);
                for w in fb.weights.data_mut() {
                    *w = T::of(rng.gen_range(-bound..bound));
                }
                fb
            })
            .collect();
        let head = layers.pop().expect("head layer");
        let decoder = layers.split_off(STAGES);
        Ok(Self {
            config,
            encoder: layers,
            decoder,
            head,
            meta: TrainingMeta::default(),
        })
    }

    /// Reassembles a network from layers in storage order, checking shapes.
    pub fn from_layers(config: NetworkConfig, layers: Vec<FilterBank<T>>, meta: TrainingMeta) -> Result<Self> {
        config.validate()?;
        let expect = config.layer_channels();
        if layers.len() != expect.len() {
            return Err(Error::Shape(format!(
                "expected {} layers, got {}",
                expect.len(),
                layers.len()
            )));
        }
        for (i, (fb, &(cin, cout))) in layers.iter().zip(&expect).enumerate() {
            if fb.in_channels() != cin || fb.out_channels() != cout {
                return Err(Error::Shape(format!(
                    "layer {i}: expected {cout}x{cin} filters, got {}x{}",
                    fb.out_channels(),
                    fb.in_channels()
                )));
            }
        }
        let mut layers = layers;
        let head = layers.pop().expect("head layer");
        let decoder = layers.split_off(STAGES);
        Ok(Self {
            config,
            encoder: layers,
            decoder,
            head,
            meta,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layers(&self) -> impl Iterator<Item = &FilterBank<T>> {
        self.encoder.iter().chain(&self.decoder).chain(std::iter::once(&self.head))
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut FilterBank<T>> {
        self.encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .chain(std::iter::once(&mut self.head))
    }

    /// Every weight and bias tensor, in storage order.
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.layers_mut().flat_map(|fb| [&mut fb.weights, &mut fb.bias])
    }

    pub fn num_params(&self) -> usize {
        self.layers().map(FilterBank::num_params).sum()
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            config: self.config,
            encoder: self.encoder.iter().map(FilterBank::cast).collect(),
            decoder: self.decoder.iter().map(FilterBank::cast).collect(),
            head: self.head.cast(),
            meta: self.meta.clone(),
        }
    }

    fn check_input(&self, stack: &Tensor<T>) -> Result<()> {
        let s = self.config.input_size;
        let want = [self.config.input_frames, s, s];
        if stack.shape() != want {
            return Err(Error::Shape(format!(
                "network input must be {want:?}, got {:?}",
                stack.shape()
            )));
        }
        Ok(())
    }

    /// Reconstruction of one stack.
    pub fn forward(&self, stack: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_cached(stack)?.output)
    }

    pub fn forward_cached(&self, stack: &Tensor<T>) -> Result<ForwardCache<T>> {
        self.check_input(stack)?;
        let relu = Activation::Relu;
        let mut enc_in = Vec::with_capacity(STAGES);
        let mut enc_act = Vec::with_capacity(STAGES);
        let mut pool_idx = Vec::with_capacity(STAGES);
        let mut x = stack.clone();
        for fb in &self.encoder {
            let mut f = conv2d(&x, fb)?;
            relu.apply_in_place(&mut f);
            let (p, idx) = maxpool2(&f)?;
            enc_in.push(x);
            enc_act.push(f);
            pool_idx.push(idx);
            x = p;
        }
        let bottleneck = x.clone();
        let mut dec_in = Vec::with_capacity(STAGES);
        let mut dec_act = Vec::with_capacity(STAGES);
        for (j, fb) in self.decoder.iter().enumerate() {
            let mut u = deconv2d(&x, fb)?;
            relu.apply_in_place(&mut u);
            let z = concat_channels(&u, &enc_act[STAGES - 1 - j])?;
            dec_in.push(x);
            dec_act.push(u);
            x = z;
        }
        let mut output = conv2d(&x, &self.head)?;
        Activation::Sigmoid.apply_in_place(&mut output);
        Ok(ForwardCache {
            enc_in,
            enc_act,
            pool_idx,
            bottleneck,
            dec_in,
            dec_act,
            head_in: x,
            output,
        })
    }

    /// Parameter gradients, in storage order, given `∂loss/∂output`.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_output: &Tensor<T>) -> Result<Vec<FilterBank<T>>> {
        if grad_output.shape() != cache.output.shape() {
            return Err(Error::Shape(format!(
                "backward: grad {:?} vs output {:?}",
                grad_output.shape(),
                cache.output.shape()
            )));
        }
        let relu = Activation::Relu;
        let mut g = grad_output.clone();
        Activation::Sigmoid.backward_in_place(&mut g, &cache.output);
        let (mut gh, g_head) = conv2d_backward(&g, &cache.head_in, &self.head)?;

        let mut skip_grads: Vec<Option<Tensor<T>>> = vec![None; STAGES];
        let mut dec_grads = Vec::with_capacity(STAGES);
        for j in (0..STAGES).rev() {
            let u = &cache.dec_act[j];
            let (mut gu, gskip) = split_channels(&gh, u.channels())?;
            skip_grads[STAGES - 1 - j] = Some(gskip);
            relu.backward_in_place(&mut gu, u);
            let (gin, gfb) = deconv2d_backward(&gu, &cache.dec_in[j], &self.decoder[j])?;
            dec_grads.push(gfb);
            gh = gin;
        }
        dec_grads.reverse();

        let mut enc_grads = Vec::with_capacity(STAGES);
        for k in (0..STAGES).rev() {
            let f = &cache.enc_act[k];
            let mut gf = maxpool2_backward(&gh, &cache.pool_idx[k], f.shape())?;
            if let Some(s) = skip_grads[k].take() {
                gf.add_assign(&s)?;
            }
            relu.backward_in_place(&mut gf, f);
            let (gin, gfb) = conv2d_backward(&gf, &cache.enc_in[k], &self.encoder[k])?;
            enc_grads.push(gfb);
            gh = gin;
        }
        enc_grads.reverse();

        let mut all = enc_grads;
        all.extend(dec_grads);
        all.push(g_head);
        Ok(all)
    }

    /// Copies summed gradients into each parameter's gradient buffer.
    pub fn set_grads(&mut self, grads: &[FilterBank<T>]) -> Result<()> {
        let n = self.layers().count();
        if grads.len() != n {
            return Err(Error::Shape(format!("expected {n} gradient banks, got {}", grads.len())));
        }
        for (fb, g) in self.layers_mut().zip(grads) {
            if fb.weights.shape() != g.weights.shape() || fb.bias.shape() != g.bias.shape() {
                return Err(Error::Shape("gradient bank shape mismatch".into()));
            }
            fb.weights.grad_or_zeros().copy_from_slice(g.weights.data());
            fb.bias.grad_or_zeros().copy_from_slice(g.bias.data());
        }
        Ok(())
    }
}

/// Anything that maps a `(5, S, S)` stack to its reconstruction.
pub trait Reconstructor: Sync {
    fn reconstruct(&self, stack: &Tensor<f32>) -> Result<Tensor<f32>>;

    /// Expected spatial extent of input frames.
    fn input_size(&self) -> usize;
}

impl Reconstructor for Model {
    fn reconstruct(&self, stack: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.forward(stack)
    }

    fn input_size(&self) -> usize {
        self.config.input_size
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_ladder_base16() {
        let cfg = NetworkConfig::with_base(16, 0);
        let l = cfg.layer_channels();
        let enc: Vec<_> = l[..5].iter().map(|p| p.1).collect();
        assert_eq!(enc, [16, 32, 64, 128, 256]);
        assert_eq!(l[0].0, 5);
        // decoder inputs include the concatenated skip features
        assert_eq!(l[5], (256, 256));
        assert_eq!(l[6], (512, 128));
        assert_eq!(l[9], (64, 16));
        assert_eq!(l[10], (32, 5));
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            NetworkConfig { base_channels: 0, ..Default::default() },
            NetworkConfig { input_frames: 4, ..Default::default() },
            NetworkConfig { input_size: 100, ..Default::default() },
        ] {
            assert!(matches!(Model::build(cfg), Err(Error::Argument(_))));
        }
    }

    #[test]
    fn same_seed_same_weights() {
        let cfg = NetworkConfig::with_base(2, 42);
        let a = Model::build(cfg).unwrap();
        let b = Model::build(cfg).unwrap();
        assert_eq!(a, b);
        let c = Model::build(NetworkConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, c);
        assert!(a.layers().all(|fb| fb.bias.data().iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn small_variant_shapes() {
        let cfg = NetworkConfig { base_channels: 1, input_size: 32, ..Default::default() };
        let net = Network::<f64>::build(cfg).unwrap();
        let x = Tensor::full(&[5, 32, 32], 0.5);
        let cache = net.forward_cached(&x).unwrap();
        assert_eq!(cache.bottleneck().shape(), &[16, 1, 1]);
        assert_eq!(cache.output().shape(), &[5, 32, 32]);
        let grads = net.backward(&cache, &Tensor::full(&[5, 32, 32], 1.0)).unwrap();
        assert_eq!(grads.len(), 11);
    }

    #[test]
    fn wrong_input_shape() {
        let net = Model::build(NetworkConfig { base_channels: 1, input_size: 32, ..Default::default() }).unwrap();
        assert!(matches!(net.forward(&Tensor::zeros(&[5, 64, 64])), Err(Error::Shape(_))));
        assert!(matches!(net.forward(&Tensor::zeros(&[4, 32, 32])), Err(Error::Shape(_))));
    }
}
