//! Greedy layerwise autoencoder pretraining of the conv stack.
//!
//! Each conv layer (plus its activation) is trained as the encoder of a
//! single-layer autoencoder: a temporary 3x3 decoder conv maps the encoder's
//! output channels back to its input channels (linear output) and the pair
//! minimizes mean squared reconstruction error against the layer's own
//! inputs. The decoder is discarded afterwards. Layers train in order, each
//! on the frozen pooled outputs of its predecessors; dense layers are never
//! touched. Pooling stays outside the autoencoding path — encode/decode run
//! at full resolution.

use crate::error::{Error, Result};
use crate::layers::ConvLayer;
use crate::network::{ActParams, Network};
use crate::optim::RmspropState;
use crate::rng::{component, component_seed, seeded_rng, stream_seed};
use crate::tensor::Tensor;
use rand::seq::SliceRandom;

#[derive(Debug, Clone)]
pub struct AePretrainConfig {
    /// Epochs spent on each conv layer; 0 disables pretraining entirely.
    pub epochs_per_layer: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for AePretrainConfig {
    fn default() -> Self {
        AePretrainConfig {
            epochs_per_layer: 5,
            lr: 0.001,
            batch_size: 64,
            seed: 0,
        }
    }
}

/// Splits `[enc kernel | enc bias | act params | dec kernel | dec bias]`
/// boundaries for the joint flat vector used by the optimizer.
struct JointLayout {
    enc_k: usize,
    enc_b: usize,
    act: usize,
    dec_k: usize,
    total: usize,
}

impl JointLayout {
    fn of(enc: &ConvLayer, act: &ActParams, dec: &ConvLayer) -> JointLayout {
        let enc_k = enc.kernel.len();
        let enc_b = enc.bias.len();
        let act = act.flat_len();
        let dec_k = dec.kernel.len();
        let total = enc_k + enc_b + act + dec_k + dec.bias.len();
        JointLayout { enc_k, enc_b, act, dec_k, total }
    }

    fn flatten(&self, enc: &ConvLayer, act: &ActParams, dec: &ConvLayer) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.total);
        flat.extend_from_slice(enc.kernel.data());
        flat.extend_from_slice(&enc.bias);
        act.write_flat(&mut flat);
        flat.extend_from_slice(dec.kernel.data());
        flat.extend_from_slice(&dec.bias);
        flat
    }

    fn unflatten(
        &self,
        flat: &[f64],
        enc: &mut ConvLayer,
        act: &mut ActParams,
        dec: &mut ConvLayer,
    ) -> Result<()> {
        let mut off = 0;
        enc.kernel.data_mut().copy_from_slice(&flat[off..off + self.enc_k]);
        off += self.enc_k;
        enc.bias.copy_from_slice(&flat[off..off + self.enc_b]);
        off += self.enc_b;
        act.read_flat(&flat[off..off + self.act])?;
        off += self.act;
        dec.kernel.data_mut().copy_from_slice(&flat[off..off + self.dec_k]);
        off += self.dec_k;
        dec.bias.copy_from_slice(&flat[off..]);
        act.apply_constraints();
        Ok(())
    }
}

/// Trains one conv layer + activation as an autoencoder over a batch of its
/// input activations, in place. Returns the per-epoch mean reconstruction
/// MSE (averaged over samples; each sample's MSE is over all its values).
pub fn pretrain_layer(
    enc: &mut ConvLayer,
    act: &mut ActParams,
    inputs: &Tensor,
    cfg: &AePretrainConfig,
) -> Result<Vec<f64>> {
    if cfg.epochs_per_layer == 0 {
        return Ok(Vec::new());
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument {
            what: "pretrain batch size",
            detail: "must be at least 1".to_string(),
        });
    }
    if inputs.rank() != 4 || inputs.shape()[1] != enc.c_in() {
        return Err(Error::InvalidShape {
            op: "pretrain inputs",
            shape: inputs.shape().to_vec(),
            reason: format!("expected (B, {}, h, w)", enc.c_in()),
        });
    }
    let n = inputs.shape()[0];
    let sample_len = inputs.len() / n;
    let base = component_seed(cfg.seed, component::PRETRAIN);
    let mut dec = ConvLayer::init(enc.c_out(), enc.c_in(), &mut seeded_rng(stream_seed(base, 0)));

    let layout = JointLayout::of(enc, act, &dec);
    let mut state = RmspropState::new(layout.total);
    let mut history = Vec::with_capacity(cfg.epochs_per_layer);
    for epoch in 1..=cfg.epochs_per_layer {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seeded_rng(stream_seed(base, epoch as u64)));
        let mut epoch_sq = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut grads = vec![0.0; layout.total];
            let mut batch_sq = 0.0;
            for &i in chunk {
                let x = Tensor::new(
                    inputs.shape()[1..].to_vec(),
                    inputs.data()[i * sample_len..(i + 1) * sample_len].to_vec(),
                )?;
                batch_sq += reconstruct_sample(enc, act, &dec, &x, chunk.len(), &layout, &mut grads)?;
            }
            epoch_sq += batch_sq;
            let mut flat = layout.flatten(enc, act, &dec);
            state.step(&mut flat, &grads, cfg.lr)?;
            layout.unflatten(&flat, enc, act, &mut dec)?;
        }
        history.push(epoch_sq / (n * sample_len) as f64);
    }
    Ok(history)
}

/// Forward + backward of the autoencoder on one sample. Accumulates joint
/// gradients of the batch-mean MSE into `grads` and returns the sample's
/// summed squared reconstruction error.
fn reconstruct_sample(
    enc: &ConvLayer,
    act: &ActParams,
    dec: &ConvLayer,
    x: &Tensor,
    batch_len: usize,
    layout: &JointLayout,
    grads: &mut [f64],
) -> Result<f64> {
    let (pre, enc_cache) = enc.forward(x)?;
    let (hidden, act_cache) = act.forward(pre.data())?;
    let hidden = Tensor::new(pre.shape().to_vec(), hidden)?;
    let (recon, dec_cache) = dec.forward(&hidden)?;

    let sample_len = x.len() as f64;
    let mut sq = 0.0;
    let mut drecon = Vec::with_capacity(x.len());
    // loss = mean over batch of per-sample mean squared error
    let scale = 2.0 / (sample_len * batch_len as f64);
    for (&r, &t) in recon.data().iter().zip(x.data()) {
        let d = r - t;
        sq += d * d;
        drecon.push(scale * d);
    }
    let drecon = Tensor::new(recon.shape().to_vec(), drecon)?;

    let (dec_grads, dhidden) = dec.backward(&dec_cache, &drecon)?;
    let act_span = layout.enc_k + layout.enc_b..layout.enc_k + layout.enc_b + layout.act;
    let dpre = act.backward(&act_cache, dhidden.data(), &mut grads[act_span])?;
    let dpre = Tensor::new(pre.shape().to_vec(), dpre)?;
    let (enc_grads, _) = enc.backward(&enc_cache, &dpre)?;

    add_into(&mut grads[..layout.enc_k], enc_grads.kernel.data());
    add_into(&mut grads[layout.enc_k..layout.enc_k + layout.enc_b], &enc_grads.bias);
    let dec_off = layout.enc_k + layout.enc_b + layout.act;
    add_into(&mut grads[dec_off..dec_off + layout.dec_k], dec_grads.kernel.data());
    add_into(&mut grads[dec_off + layout.dec_k..], &dec_grads.bias);
    Ok(sq)
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Pretrains every conv layer of the network in order, layer i on the frozen
/// pooled outputs of layers < i. Dense layers are untouched. Returns the
/// per-layer MSE histories. `epochs_per_layer = 0` is an exact no-op.
pub fn pretrain_network(
    net: &mut Network,
    images: &Tensor,
    cfg: &AePretrainConfig,
) -> Result<Vec<Vec<f64>>> {
    if cfg.epochs_per_layer == 0 {
        return Ok(Vec::new());
    }
    let mut histories = Vec::with_capacity(net.conv.len());
    let mut inputs = images.clone();
    for i in 0..net.conv.len() {
        let layer_cfg = AePretrainConfig {
            seed: stream_seed(component_seed(cfg.seed, component::PRETRAIN), 100 + i as u64),
            ..cfg.clone()
        };
        let block = &mut net.conv[i];
        histories.push(pretrain_layer(&mut block.layer, &mut block.act, &inputs, &layer_cfg)?);
        if i + 1 < net.conv.len() {
            inputs = forward_pooled(&net.conv[i].layer, &net.conv[i].act, &inputs)?;
        }
    }
    net.bump_revision();
    Ok(histories)
}

/// conv -> act -> maxpool over a batch, matching the supervised forward path.
fn forward_pooled(layer: &ConvLayer, act: &ActParams, inputs: &Tensor) -> Result<Tensor> {
    let n = inputs.shape()[0];
    let sample_len = inputs.len() / n;
    let mut out: Vec<f64> = Vec::new();
    let mut out_shape: Vec<usize> = Vec::new();
    for i in 0..n {
        let x = Tensor::new(
            inputs.shape()[1..].to_vec(),
            inputs.data()[i * sample_len..(i + 1) * sample_len].to_vec(),
        )?;
        let (mut pre, _) = layer.forward(&x)?;
        act.eval_inplace(pre.data_mut())?;
        let (pooled, _) = pre.maxpool2()?;
        if out_shape.is_empty() {
            out_shape = pooled.shape().to_vec();
            out.reserve(n * pooled.len());
        }
        out.extend_from_slice(pooled.data());
    }
    let mut shape = vec![n];
    shape.extend(out_shape);
    Tensor::new(shape, out)
}
