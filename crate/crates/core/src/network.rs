//! Model configuration and the three-tier CNN: three conv→act→maxpool blocks,
//! a 256-wide dense layer with activation, and a 10-way softmax head.
//!
//! The network owns every trainable parameter, including activation
//! parameters, and exposes them as one flat vector with a stable layout
//! (flatten followed by unflatten is the identity — the swarm optimizer
//! depends on it). Forward passes produce per-sample traces; backward passes
//! consume them and accumulate into a flat gradient vector aligned with the
//! parameter layout.

use crate::activations::{
    FixedKind, FourierCache, FourierParams, LcCache, LcParams, EPS_DENOM, OMEGA_MIN,
};
use crate::error::{Error, Result};
use crate::layers::{softmax, ConvCache, ConvLayer, DenseCache, DenseLayer, maxpool2_backward};
use crate::rng::{component, component_seed, seeded_rng};
use crate::tensor::Tensor;
use rand_chacha::ChaCha8Rng;
use std::sync::atomic::{AtomicU64, Ordering};

// ── Configuration ───────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSize {
    Small,
    Middle,
    Large,
}

impl ModelSize {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "small" => Ok(ModelSize::Small),
            "middle" => Ok(ModelSize::Middle),
            "large" => Ok(ModelSize::Large),
            _ => Err(Error::UnknownKind {
                what: "model size",
                value: name.to_string(),
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelSize::Small => "small",
            ModelSize::Middle => "middle",
            ModelSize::Large => "large",
        }
    }

    pub fn conv_filters(self) -> [usize; 3] {
        match self {
            ModelSize::Small => [16, 32, 32],
            ModelSize::Middle => [32, 64, 64],
            ModelSize::Large => [48, 96, 96],
        }
    }
}

/// Which activation family the model's four activation layers use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationKind {
    Relu,
    Fourier,
    Lc,
}

impl ActivationKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "relu" => Ok(ActivationKind::Relu),
            "fourier" => Ok(ActivationKind::Fourier),
            "lc" => Ok(ActivationKind::Lc),
            _ => Err(Error::UnknownKind {
                what: "activation kind",
                value: name.to_string(),
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Fourier => "fourier",
            ActivationKind::Lc => "lc",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub size: ModelSize,
    pub activation: ActivationKind,
    pub seed: u64,
    /// Number of Fourier harmonics for fourier models.
    pub fourier_rank: usize,
    /// When set, conv activation layers get one parameter set per output
    /// channel instead of one shared set per layer.
    pub per_channel: bool,
}

impl ModelConfig {
    pub fn new(size: ModelSize, activation: ActivationKind, seed: u64) -> Self {
        Self {
            size,
            activation,
            seed,
            fourier_rank: 5,
            per_channel: false,
        }
    }

    pub fn conv_filters(&self) -> [usize; 3] {
        self.size.conv_filters()
    }
}

/// Shape plan for one network: input dims, conv widths, dense width, classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchSpec {
    pub input: (usize, usize, usize),
    pub conv_filters: [usize; 3],
    pub dense_width: usize,
    pub n_classes: usize,
}

impl ArchSpec {
    pub fn standard(size: ModelSize) -> Self {
        Self {
            input: (3, 32, 32),
            conv_filters: size.conv_filters(),
            dense_width: 256,
            n_classes: 10,
        }
    }

    /// Miniature variant used by gradient-check tests: 8x8 input, 2 filters
    /// per conv, 8-wide dense. Same topology, ~300 parameters.
    pub fn tiny() -> Self {
        Self {
            input: (3, 8, 8),
            conv_filters: [2, 2, 2],
            dense_width: 8,
            n_classes: 10,
        }
    }

    pub fn flatten_len(&self) -> usize {
        let (_, h, w) = self.input;
        self.conv_filters[2] * (h / 8) * (w / 8)
    }

    fn validate(&self) -> Result<()> {
        let (c, h, w) = self.input;
        if c == 0 || h % 8 != 0 || w % 8 != 0 || h == 0 || w == 0 {
            return Err(Error::InvalidShape {
                op: "arch spec",
                shape: vec![c, h, w],
                reason: "input height/width must be positive multiples of 8".to_string(),
            });
        }
        if self.conv_filters.contains(&0) || self.dense_width == 0 || self.n_classes == 0 {
            return Err(Error::InvalidArgument {
                what: "arch spec",
                detail: "zero-width layer".to_string(),
            });
        }
        Ok(())
    }
}

// ── Activation layer glue ───────────────────────────────────────────────────

/// One activation layer's parameters: a fixed function, or one-or-more
/// trainable parameter sets. Trainable layers hold one set shared across the
/// layer, or (per-channel mode) one per conv output channel.
#[derive(Debug, Clone, PartialEq)]
pub enum ActParams {
    Fixed(FixedKind),
    Fourier(Vec<FourierParams>),
    Lc(Vec<LcParams>),
}

#[derive(Debug, Clone)]
pub enum ActCache {
    Fixed(Vec<f64>),
    Fourier(Vec<FourierCache>),
    Lc(Vec<LcCache>),
}

impl ActParams {
    fn init(kind: ActivationKind, groups: usize, rank: usize, rng: &mut ChaCha8Rng) -> Self {
        match kind {
            ActivationKind::Relu => ActParams::Fixed(FixedKind::Relu),
            ActivationKind::Fourier => {
                ActParams::Fourier((0..groups).map(|_| FourierParams::init(rank, rng)).collect())
            }
            ActivationKind::Lc => ActParams::Lc(vec![LcParams::init(); groups]),
        }
    }

    pub fn n_groups(&self) -> usize {
        match self {
            ActParams::Fixed(_) => 1,
            ActParams::Fourier(v) => v.len(),
            ActParams::Lc(v) => v.len(),
        }
    }

    /// Trainable parameter count.
    pub fn flat_len(&self) -> usize {
        match self {
            ActParams::Fixed(_) => 0,
            ActParams::Fourier(v) => v.iter().map(|p| p.flat_len()).sum(),
            ActParams::Lc(v) => v.iter().map(|p| p.weights.len()).sum(),
        }
    }

    fn group_len(&self, total: usize) -> Result<usize> {
        let g = self.n_groups();
        if total % g != 0 {
            return Err(Error::InvalidArgument {
                what: "activation grouping",
                detail: format!("{total} values do not split into {g} channel groups"),
            });
        }
        Ok(total / g)
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ActCache)> {
        match self {
            ActParams::Fixed(kind) => {
                let out = x.iter().map(|&v| kind.forward(v)).collect();
                Ok((out, ActCache::Fixed(x.to_vec())))
            }
            ActParams::Fourier(groups) => {
                let glen = self.group_len(x.len())?;
                let mut out = Vec::with_capacity(x.len());
                let mut caches = Vec::with_capacity(groups.len());
                for (g, p) in groups.iter().enumerate() {
                    let (y, c) = p.forward(&x[g * glen..(g + 1) * glen]);
                    out.extend_from_slice(&y);
                    caches.push(c);
                }
                Ok((out, ActCache::Fourier(caches)))
            }
            ActParams::Lc(groups) => {
                let glen = self.group_len(x.len())?;
                let mut out = Vec::with_capacity(x.len());
                let mut caches = Vec::with_capacity(groups.len());
                for (g, p) in groups.iter().enumerate() {
                    let (y, c) = p.forward(&x[g * glen..(g + 1) * glen]);
                    out.extend_from_slice(&y);
                    caches.push(c);
                }
                Ok((out, ActCache::Lc(caches)))
            }
        }
    }

    /// Cache-free forward for evaluation passes.
    pub fn eval_inplace(&self, x: &mut [f64]) -> Result<()> {
        match self {
            ActParams::Fixed(kind) => {
                for v in x.iter_mut() {
                    *v = kind.forward(*v);
                }
            }
            ActParams::Fourier(groups) => {
                let glen = self.group_len(x.len())?;
                for (g, p) in groups.iter().enumerate() {
                    for v in &mut x[g * glen..(g + 1) * glen] {
                        *v = p.eval(*v);
                    }
                }
            }
            ActParams::Lc(groups) => {
                let glen = self.group_len(x.len())?;
                for (g, p) in groups.iter().enumerate() {
                    for v in &mut x[g * glen..(g + 1) * glen] {
                        *v = p.eval(*v);
                    }
                }
            }
        }
        Ok(())
    }

    /// Backward pass: writes parameter gradients (flat, layout-aligned) into
    /// `dparams` (accumulating) and returns dLoss/dInput.
    pub fn backward(
        &self,
        cache: &ActCache,
        upstream: &[f64],
        dparams: &mut [f64],
    ) -> Result<Vec<f64>> {
        if dparams.len() != self.flat_len() {
            return Err(Error::LengthMismatch {
                what: "activation grad buffer",
                expected: self.flat_len(),
                actual: dparams.len(),
            });
        }
        match (self, cache) {
            (ActParams::Fixed(kind), ActCache::Fixed(x)) => {
                if x.len() != upstream.len() {
                    return Err(Error::StaleCache("fixed activation backward"));
                }
                Ok(x.iter()
                    .zip(upstream)
                    .map(|(&xi, &g)| g * kind.derivative(xi))
                    .collect())
            }
            (ActParams::Fourier(groups), ActCache::Fourier(caches)) => {
                if caches.len() != groups.len() {
                    return Err(Error::StaleCache("fourier activation backward"));
                }
                let glen = self.group_len(upstream.len())?;
                let mut dx = Vec::with_capacity(upstream.len());
                let mut off = 0;
                for (g, p) in groups.iter().enumerate() {
                    let (grads, dxg) = p.backward(&caches[g], &upstream[g * glen..(g + 1) * glen])?;
                    for (slot, v) in dparams[off..off + p.flat_len()]
                        .iter_mut()
                        .zip(grads.to_flat())
                    {
                        *slot += v;
                    }
                    off += p.flat_len();
                    dx.extend_from_slice(&dxg);
                }
                Ok(dx)
            }
            (ActParams::Lc(groups), ActCache::Lc(caches)) => {
                if caches.len() != groups.len() {
                    return Err(Error::StaleCache("lc activation backward"));
                }
                let glen = self.group_len(upstream.len())?;
                let mut dx = Vec::with_capacity(upstream.len());
                let mut off = 0;
                for (g, p) in groups.iter().enumerate() {
                    let (dw, dxg) = p.backward(&caches[g], &upstream[g * glen..(g + 1) * glen])?;
                    for (slot, v) in dparams[off..off + dw.len()].iter_mut().zip(&dw) {
                        *slot += v;
                    }
                    off += dw.len();
                    dx.extend_from_slice(&dxg);
                }
                Ok(dx)
            }
            _ => Err(Error::StaleCache("activation cache kind mismatch")),
        }
    }

    pub(crate) fn write_flat(&self, out: &mut Vec<f64>) {
        match self {
            ActParams::Fixed(_) => {}
            ActParams::Fourier(v) => {
                for p in v {
                    out.extend_from_slice(&p.to_flat());
                }
            }
            ActParams::Lc(v) => {
                for p in v {
                    out.extend_from_slice(&p.weights);
                }
            }
        }
    }

    pub(crate) fn read_flat(&mut self, flat: &[f64]) -> Result<()> {
        match self {
            ActParams::Fixed(_) => Ok(()),
            ActParams::Fourier(v) => {
                let mut off = 0;
                for p in v.iter_mut() {
                    p.set_from_flat(&flat[off..off + p.flat_len()])?;
                    off += p.flat_len();
                }
                Ok(())
            }
            ActParams::Lc(v) => {
                let mut off = 0;
                for p in v.iter_mut() {
                    let n = p.weights.len();
                    p.weights.copy_from_slice(&flat[off..off + n]);
                    off += n;
                }
                Ok(())
            }
        }
    }

    /// Post-step clamps keeping the activation families non-degenerate:
    /// |omega| >= OMEGA_MIN, and LC weight sums shifted back onto the
    /// denominator-guard boundary when they land inside it.
    pub(crate) fn apply_constraints(&mut self) {
        match self {
            ActParams::Fixed(_) => {}
            ActParams::Fourier(v) => {
                for p in v {
                    if p.omega.abs() < OMEGA_MIN {
                        p.omega = if p.omega < 0.0 { -OMEGA_MIN } else { OMEGA_MIN };
                    }
                }
            }
            ActParams::Lc(v) => {
                for p in v {
                    let sum: f64 = p.weights.iter().sum();
                    if sum.abs() < EPS_DENOM {
                        let target = if sum < 0.0 { -EPS_DENOM } else { EPS_DENOM };
                        let shift = (target - sum) / p.weights.len() as f64;
                        for w in &mut p.weights {
                            *w += shift;
                        }
                    }
                }
            }
        }
    }
}

// ── Network ─────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock {
    pub layer: ConvLayer,
    pub act: ActParams,
}

/// Name, shape and flat-vector location of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

static NET_UID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone)]
pub struct Network {
    pub arch: ArchSpec,
    pub conv: Vec<ConvBlock>,
    pub dense1: DenseLayer,
    pub act_dense: ActParams,
    pub dense2: DenseLayer,
    uid: u64,
    revision: u64,
}

/// Everything the backward pass needs about one sample's forward pass.
#[derive(Debug)]
pub struct SampleTrace {
    net_uid: u64,
    revision: u64,
    conv_caches: Vec<ConvCache>,
    act_caches: Vec<ActCache>,
    pool_argmax: Vec<Vec<usize>>,
    pool_in_shapes: Vec<Vec<usize>>,
    dense1_cache: DenseCache,
    act_dense_cache: ActCache,
    dense2_cache: DenseCache,
    probs: Vec<f64>,
}

impl SampleTrace {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

#[derive(Debug, Clone, Copy)]
struct Offsets {
    conv: [(usize, usize, usize); 3], // kernel, bias, activation params
    dense1_w: usize,
    dense1_b: usize,
    act_d: usize,
    dense2_w: usize,
    dense2_b: usize,
    total: usize,
}

impl Network {
    /// Builds the standard 32x32 CIFAR architecture for a model config.
    pub fn build(cfg: &ModelConfig) -> Result<Self> {
        Self::build_custom(
            ArchSpec::standard(cfg.size),
            cfg.activation,
            cfg.fourier_rank,
            cfg.per_channel,
            component_seed(cfg.seed, component::MODEL_INIT),
        )
    }

    /// Builds an arbitrary ArchSpec (the tiny test net uses this directly).
    /// `init_seed` is used as-is; [`Network::build`] derives it from the
    /// model seed.
    pub fn build_custom(
        arch: ArchSpec,
        activation: ActivationKind,
        fourier_rank: usize,
        per_channel: bool,
        init_seed: u64,
    ) -> Result<Self> {
        arch.validate()?;
        if activation == ActivationKind::Fourier && fourier_rank == 0 {
            return Err(Error::InvalidArgument {
                what: "fourier rank",
                detail: "must be >= 1".to_string(),
            });
        }
        let mut rng = seeded_rng(init_seed);
        let (c_in, _, _) = arch.input;
        let mut conv = Vec::with_capacity(3);
        let mut prev = c_in;
        for &f in &arch.conv_filters {
            let layer = ConvLayer::init(prev, f, &mut rng);
            let groups = if per_channel { f } else { 1 };
            let act = ActParams::init(activation, groups, fourier_rank, &mut rng);
            conv.push(ConvBlock { layer, act });
            prev = f;
        }
        let dense1 = DenseLayer::init(arch.flatten_len(), arch.dense_width, &mut rng);
        let act_dense = ActParams::init(activation, 1, fourier_rank, &mut rng);
        let dense2 = DenseLayer::init(arch.dense_width, arch.n_classes, &mut rng);
        Ok(Self {
            arch,
            conv,
            dense1,
            act_dense,
            dense2,
            uid: NET_UID.fetch_add(1, Ordering::Relaxed),
            revision: 0,
        })
    }

    fn offsets(&self) -> Offsets {
        let mut off = 0;
        let mut conv = [(0, 0, 0); 3];
        for (i, block) in self.conv.iter().enumerate() {
            let k = off;
            off += block.layer.kernel.len();
            let b = off;
            off += block.layer.bias.len();
            let a = off;
            off += block.act.flat_len();
            conv[i] = (k, b, a);
        }
        let dense1_w = off;
        let dense1_b = dense1_w + self.dense1.weights.len();
        let act_d = dense1_b + self.dense1.bias.len();
        let dense2_w = act_d + self.act_dense.flat_len();
        let dense2_b = dense2_w + self.dense2.weights.len();
        Offsets {
            conv,
            dense1_w,
            dense1_b,
            act_d,
            dense2_w,
            dense2_b,
            total: dense2_b + self.dense2.bias.len(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.offsets().total
    }

    /// Named layout of the flat parameter vector, in flat order.
    pub fn param_entries(&self) -> Vec<ParamEntry> {
        let mut entries = Vec::new();
        let mut off = 0;
        let mut push = |name: String, shape: Vec<usize>, off: &mut usize| {
            let len: usize = shape.iter().product();
            entries.push(ParamEntry {
                name,
                shape,
                offset: *off,
                len,
            });
            *off += len;
        };
        let act_entries =
            |prefix: &str, act: &ActParams, push: &mut dyn FnMut(String, Vec<usize>, &mut usize), off: &mut usize| {
                match act {
                    ActParams::Fixed(_) => {}
                    ActParams::Fourier(v) => {
                        for (i, p) in v.iter().enumerate() {
                            push(format!("{prefix}.fourier{i}"), vec![p.flat_len()], off);
                        }
                    }
                    ActParams::Lc(v) => {
                        for (i, p) in v.iter().enumerate() {
                            push(format!("{prefix}.lc{i}"), vec![p.weights.len()], off);
                        }
                    }
                }
            };
        for (i, block) in self.conv.iter().enumerate() {
            let n = i + 1;
            push(
                format!("conv{n}.kernel"),
                block.layer.kernel.shape().to_vec(),
                &mut off,
            );
            push(format!("conv{n}.bias"), vec![block.layer.bias.len()], &mut off);
            act_entries(&format!("conv{n}.act"), &block.act, &mut push, &mut off);
        }
        push(
            "dense1.weights".to_string(),
            self.dense1.weights.shape().to_vec(),
            &mut off,
        );
        push("dense1.bias".to_string(), vec![self.dense1.bias.len()], &mut off);
        act_entries("dense1.act", &self.act_dense, &mut push, &mut off);
        push(
            "dense2.weights".to_string(),
            self.dense2.weights.shape().to_vec(),
            &mut off,
        );
        push("dense2.bias".to_string(), vec![self.dense2.bias.len()], &mut off);
        entries
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for block in &self.conv {
            out.extend_from_slice(block.layer.kernel.data());
            out.extend_from_slice(&block.layer.bias);
            block.act.write_flat(&mut out);
        }
        out.extend_from_slice(self.dense1.weights.data());
        out.extend_from_slice(&self.dense1.bias);
        self.act_dense.write_flat(&mut out);
        out.extend_from_slice(self.dense2.weights.data());
        out.extend_from_slice(&self.dense2.bias);
        out
    }

    /// Writes a flat vector back into the parameter tensors, exactly (no
    /// clamping — see [`Network::apply_param_constraints`]). Invalidates
    /// outstanding traces.
    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let offs = self.offsets();
        if flat.len() != offs.total {
            return Err(Error::LengthMismatch {
                what: "network flat params",
                expected: offs.total,
                actual: flat.len(),
            });
        }
        for (i, block) in self.conv.iter_mut().enumerate() {
            let (k, b, a) = offs.conv[i];
            block.layer.kernel.data_mut().copy_from_slice(&flat[k..b]);
            let blen = block.layer.bias.len();
            block.layer.bias.copy_from_slice(&flat[b..b + blen]);
            let alen = block.act.flat_len();
            block.act.read_flat(&flat[a..a + alen])?;
        }
        self.dense1
            .weights
            .data_mut()
            .copy_from_slice(&flat[offs.dense1_w..offs.dense1_b]);
        let b1 = self.dense1.bias.len();
        self.dense1
            .bias
            .copy_from_slice(&flat[offs.dense1_b..offs.dense1_b + b1]);
        self.act_dense
            .read_flat(&flat[offs.act_d..offs.act_d + self.act_dense.flat_len()])?;
        self.dense2
            .weights
            .data_mut()
            .copy_from_slice(&flat[offs.dense2_w..offs.dense2_b]);
        let b2 = self.dense2.bias.len();
        self.dense2
            .bias
            .copy_from_slice(&flat[offs.dense2_b..offs.dense2_b + b2]);
        self.revision += 1;
        Ok(())
    }

    /// Re-applies activation-family clamps after an optimizer step.
    pub fn apply_param_constraints(&mut self) {
        for block in &mut self.conv {
            block.act.apply_constraints();
        }
        self.act_dense.apply_constraints();
        self.revision += 1;
    }

    /// Marks outstanding traces stale; call after mutating parameters
    /// directly through the public fields.
    pub fn bump_revision(&mut self) {
        self.revision += 1;
    }

    /// Forward pass of one (c,h,w) image, keeping the trace for backward.
    pub fn forward_sample(&self, image: &Tensor) -> Result<(Vec<f64>, SampleTrace)> {
        self.check_input(image)?;
        let mut conv_caches = Vec::with_capacity(3);
        let mut act_caches = Vec::with_capacity(3);
        let mut pool_argmax = Vec::with_capacity(3);
        let mut pool_in_shapes = Vec::with_capacity(3);
        let mut x = image.clone();
        for block in &self.conv {
            let (pre, ccache) = block.layer.forward(&x)?;
            let (acted, acache) = block.act.forward(pre.data())?;
            let acted = Tensor::new(pre.shape().to_vec(), acted)?;
            pool_in_shapes.push(acted.shape().to_vec());
            let (pooled, argmax) = acted.maxpool2()?;
            conv_caches.push(ccache);
            act_caches.push(acache);
            pool_argmax.push(argmax);
            x = pooled;
        }
        let flat = x.into_data();
        let (pre_d, dense1_cache) = self.dense1.forward(&flat)?;
        let (hidden, act_dense_cache) = self.act_dense.forward(&pre_d)?;
        let (logits, dense2_cache) = self.dense2.forward(&hidden)?;
        let probs = softmax(&logits);
        Ok((
            probs.clone(),
            SampleTrace {
                net_uid: self.uid,
                revision: self.revision,
                conv_caches,
                act_caches,
                pool_argmax,
                pool_in_shapes,
                dense1_cache,
                act_dense_cache,
                dense2_cache,
                probs,
            },
        ))
    }

    /// Distance of a forward pass from its non-smooth points: the minimum
    /// |x| over every ReLU input (fixed ReLU layers and the ReLU candidate
    /// inside LC layers) and the minimum (max - runner-up) over every pool
    /// window. The gradient checker rejects draws where either margin is too
    /// small for central differences to be valid.
    pub fn smoothness_margins(&self, image: &Tensor) -> Result<(f64, f64)> {
        self.check_input(image)?;
        let mut min_relu = f64::INFINITY;
        let mut min_pool = f64::INFINITY;
        let track_relu = |act: &ActParams, x: &[f64], min_relu: &mut f64| {
            let has_relu = match act {
                ActParams::Fixed(k) => *k == FixedKind::Relu,
                ActParams::Lc(groups) => groups
                    .iter()
                    .any(|p| p.candidates.contains(&FixedKind::Relu)),
                ActParams::Fourier(_) => false,
            };
            if has_relu {
                for &v in x {
                    *min_relu = min_relu.min(v.abs());
                }
            }
        };
        let mut x = image.clone();
        for block in &self.conv {
            let (mut pre, _) = block.layer.forward(&x)?;
            track_relu(&block.act, pre.data(), &mut min_relu);
            block.act.eval_inplace(pre.data_mut())?;
            let (c, h, w) = pre.dims3("smoothness margins")?;
            let d = pre.data();
            for ch in 0..c {
                for py in 0..h / 2 {
                    for px in 0..w / 2 {
                        let mut vals = [0.0; 4];
                        for (j, v) in vals.iter_mut().enumerate() {
                            let y = py * 2 + j / 2;
                            let xx = px * 2 + j % 2;
                            *v = d[ch * h * w + y * w + xx];
                        }
                        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
                        // A tied pair of exact zeros is two clamped ReLU
                        // outputs; the window is locally constant there (the
                        // ReLU margin guards the clamp itself), not a kink.
                        if !(vals[0] == 0.0 && vals[1] == 0.0) {
                            min_pool = min_pool.min(vals[0] - vals[1]);
                        }
                    }
                }
            }
            let (pooled, _) = pre.maxpool2()?;
            x = pooled;
        }
        let flat = x.into_data();
        let (mut pre_d, _) = self.dense1.forward(&flat)?;
        track_relu(&self.act_dense, &pre_d, &mut min_relu);
        self.act_dense.eval_inplace(&mut pre_d)?;
        let (_, _) = self.dense2.forward(&pre_d)?;
        Ok((min_relu, min_pool))
    }

    /// Cache-free forward for evaluation.
    pub fn predict_sample(&self, image: &Tensor) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits_sample(image)?))
    }

    /// Pre-softmax scores of one image.
    pub fn logits_sample(&self, image: &Tensor) -> Result<Vec<f64>> {
        self.check_input(image)?;
        let mut x = image.clone();
        for block in &self.conv {
            let (mut pre, _) = block.layer.forward(&x)?;
            block.act.eval_inplace(pre.data_mut())?;
            let (pooled, _) = pre.maxpool2()?;
            x = pooled;
        }
        let flat = x.into_data();
        let (mut pre_d, _) = self.dense1.forward(&flat)?;
        self.act_dense.eval_inplace(&mut pre_d)?;
        let (logits, _) = self.dense2.forward(&pre_d)?;
        Ok(logits)
    }

    /// Batch forward: (B, c, h, w) -> (B, n_classes) probabilities plus
    /// per-sample traces.
    pub fn forward(&self, batch: &Tensor) -> Result<(Tensor, Vec<SampleTrace>)> {
        let (b, sample_len) = self.check_batch(batch)?;
        let mut probs = Vec::with_capacity(b * self.arch.n_classes);
        let mut traces = Vec::with_capacity(b);
        for i in 0..b {
            let image = self.batch_sample(batch, i, sample_len)?;
            let (p, t) = self.forward_sample(&image)?;
            probs.extend_from_slice(&p);
            traces.push(t);
        }
        Ok((Tensor::new(vec![b, self.arch.n_classes], probs)?, traces))
    }

    /// Accumulates one sample's gradients (given dLoss/dLogits) into a flat
    /// gradient vector aligned with the parameter layout.
    pub fn backward_sample(
        &self,
        trace: &SampleTrace,
        dlogits: &[f64],
        grads: &mut [f64],
    ) -> Result<()> {
        if trace.net_uid != self.uid || trace.revision != self.revision {
            return Err(Error::StaleCache("network backward: trace predates a parameter update"));
        }
        let offs = self.offsets();
        if grads.len() != offs.total {
            return Err(Error::LengthMismatch {
                what: "network grad buffer",
                expected: offs.total,
                actual: grads.len(),
            });
        }
        // Head: dense2 <- activation <- dense1.
        let (d2, dhidden) = self.dense2.backward(&trace.dense2_cache, dlogits)?;
        accumulate(&mut grads[offs.dense2_w..], d2.weights.data());
        accumulate(&mut grads[offs.dense2_b..], &d2.bias);
        let act_d_len = self.act_dense.flat_len();
        let dpre_d = self.act_dense.backward(
            &trace.act_dense_cache,
            &dhidden,
            &mut grads[offs.act_d..offs.act_d + act_d_len],
        )?;
        let (d1, dflat) = self.dense1.backward(&trace.dense1_cache, &dpre_d)?;
        accumulate(&mut grads[offs.dense1_w..], d1.weights.data());
        accumulate(&mut grads[offs.dense1_b..], &d1.bias);
        // Conv blocks in reverse: unpool -> activation -> conv.
        let (_, h, w) = self.arch.input;
        let (h3, w3) = (h / 8, w / 8);
        let mut dx = Tensor::new(vec![self.arch.conv_filters[2], h3, w3], dflat)?;
        for i in (0..3).rev() {
            let block = &self.conv[i];
            let dacted =
                maxpool2_backward(&dx, &trace.pool_argmax[i], &trace.pool_in_shapes[i])?;
            let (_, ao, _) = (0, offs.conv[i].2, 0);
            let alen = block.act.flat_len();
            let dpre = block.act.backward(
                &trace.act_caches[i],
                dacted.data(),
                &mut grads[ao..ao + alen],
            )?;
            let dpre = Tensor::new(dacted.shape().to_vec(), dpre)?;
            let (cg, dinput) = block.layer.backward(&trace.conv_caches[i], &dpre)?;
            let (k, b, _) = offs.conv[i];
            accumulate(&mut grads[k..], cg.kernel.data());
            accumulate(&mut grads[b..], &cg.bias);
            dx = dinput;
        }
        Ok(())
    }

    /// Batch backward per the chain rule; gradient contributions sum over
    /// samples. `dlogits` rows pair with `traces`.
    pub fn backward(&self, traces: &[SampleTrace], dlogits: &Tensor) -> Result<Vec<f64>> {
        if dlogits.rank() != 2
            || dlogits.shape()[0] != traces.len()
            || dlogits.shape()[1] != self.arch.n_classes
        {
            return Err(Error::InvalidShape {
                op: "network backward",
                shape: dlogits.shape().to_vec(),
                reason: format!("expected ({}, {})", traces.len(), self.arch.n_classes),
            });
        }
        let mut grads = vec![0.0; self.param_count()];
        let c = self.arch.n_classes;
        for (i, trace) in traces.iter().enumerate() {
            self.backward_sample(trace, &dlogits.data()[i * c..(i + 1) * c], &mut grads)?;
        }
        Ok(grads)
    }

    /// Streaming loss/gradient over a batch: per-sample forward + backward
    /// with only one trace alive at a time. Returns (mean loss, mean
    /// accuracy, flat gradients of the mean loss).
    pub fn batch_loss_and_grads(&self, images: &Tensor, one_hot: &Tensor) -> Result<(f64, f64, Vec<f64>)> {
        let (b, sample_len) = self.check_batch(images)?;
        let c = self.arch.n_classes;
        if one_hot.shape() != [b, c] {
            return Err(Error::ShapeMismatch {
                op: "batch labels",
                lhs: one_hot.shape().to_vec(),
                rhs: vec![b, c],
            });
        }
        let mut grads = vec![0.0; self.param_count()];
        let mut loss = 0.0;
        let mut hits = 0usize;
        let bf = b as f64;
        for i in 0..b {
            let image = self.batch_sample(images, i, sample_len)?;
            let (probs, trace) = self.forward_sample(&image)?;
            let labels = &one_hot.data()[i * c..(i + 1) * c];
            let mut dlogits = vec![0.0; c];
            for j in 0..c {
                loss -= labels[j] * (probs[j] + crate::layers::EPS_LOG).ln() / bf;
                dlogits[j] = (probs[j] - labels[j]) / bf;
            }
            if argmax(&probs) == argmax(labels) {
                hits += 1;
            }
            self.backward_sample(&trace, &dlogits, &mut grads)?;
        }
        Ok((loss, hits as f64 / bf, grads))
    }

    /// Mean loss and accuracy over a dataset slice, cache-free.
    pub fn evaluate(&self, images: &Tensor, one_hot: &Tensor) -> Result<(f64, f64)> {
        let (b, sample_len) = self.check_batch(images)?;
        let c = self.arch.n_classes;
        if one_hot.shape() != [b, c] {
            return Err(Error::ShapeMismatch {
                op: "eval labels",
                lhs: one_hot.shape().to_vec(),
                rhs: vec![b, c],
            });
        }
        let mut loss = 0.0;
        let mut hits = 0usize;
        for i in 0..b {
            let image = self.batch_sample(images, i, sample_len)?;
            let probs = self.predict_sample(&image)?;
            let labels = &one_hot.data()[i * c..(i + 1) * c];
            for j in 0..c {
                loss -= labels[j] * (probs[j] + crate::layers::EPS_LOG).ln();
            }
            if argmax(&probs) == argmax(labels) {
                hits += 1;
            }
        }
        Ok((loss / b as f64, hits as f64 / b as f64))
    }

    /// Batch probabilities (B, n_classes) without traces, cache-free.
    pub fn predict(&self, images: &Tensor) -> Result<Tensor> {
        let (b, sample_len) = self.check_batch(images)?;
        let mut rows = Vec::with_capacity(b * self.arch.n_classes);
        for i in 0..b {
            let image = self.batch_sample(images, i, sample_len)?;
            rows.extend(self.predict_sample(&image)?);
        }
        Tensor::new(vec![b, self.arch.n_classes], rows)
    }

    fn check_input(&self, image: &Tensor) -> Result<()> {
        let (c, h, w) = self.arch.input;
        if image.shape() != [c, h, w] {
            return Err(Error::ShapeMismatch {
                op: "network input",
                lhs: image.shape().to_vec(),
                rhs: vec![c, h, w],
            });
        }
        Ok(())
    }

    fn check_batch(&self, batch: &Tensor) -> Result<(usize, usize)> {
        let (c, h, w) = self.arch.input;
        if batch.rank() != 4 || batch.shape()[1..] != [c, h, w] {
            return Err(Error::InvalidShape {
                op: "network batch",
                shape: batch.shape().to_vec(),
                reason: format!("expected (B, {c}, {h}, {w})"),
            });
        }
        Ok((batch.shape()[0], c * h * w))
    }

    fn batch_sample(&self, batch: &Tensor, i: usize, sample_len: usize) -> Result<Tensor> {
        let (c, h, w) = self.arch.input;
        Tensor::new(
            vec![c, h, w],
            batch.data()[i * sample_len..(i + 1) * sample_len].to_vec(),
        )
    }
}

fn accumulate(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
