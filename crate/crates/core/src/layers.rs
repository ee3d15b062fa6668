//! Parameterized layers (3x3 same-padding convolution, dense), max-pool
//! backward routing, and the softmax cross-entropy head.
//!
//! Each layer exposes `forward` returning a cache and `backward` consuming it;
//! caches hold exactly what the gradient formulas need, nothing else. All
//! gradients here are validated against the finite-difference oracle in
//! `gradcheck`.

use crate::error::{Error, Result};
use crate::rng::he_uniform;
use crate::tensor::{col2im3x3, gemm_nn, gemm_nt, gemm_tn, im2col3x3, Tensor};
use rand_chacha::ChaCha8Rng;

/// Guard added inside the loss logarithm; far below reporting precision.
pub const EPS_LOG: f64 = 1e-12;

// ── Convolution ─────────────────────────────────────────────────────────────

/// 3x3 same-padding convolution with per-output-channel bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    /// (c_out, c_in, 3, 3)
    pub kernel: Tensor,
    pub bias: Vec<f64>,
}

/// Forward cache: the im2col matrix (c_in*9 rows, h*w columns) plus the input
/// dims, which together determine the whole backward pass.
#[derive(Debug, Clone)]
pub struct ConvCache {
    cols: Vec<f64>,
    c_in: usize,
    h: usize,
    w: usize,
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub kernel: Tensor,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    /// He-uniform kernel (fan_in = c_in * 9), zero bias.
    pub fn init(c_in: usize, c_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = c_in * 9;
        let kernel = Tensor::new(
            vec![c_out, c_in, 3, 3],
            he_uniform(rng, fan_in, c_out * fan_in),
        )
        .expect("conv kernel shape");
        Self {
            kernel,
            bias: vec![0.0; c_out],
        }
    }

    pub fn c_in(&self) -> usize {
        self.kernel.shape()[1]
    }

    pub fn c_out(&self) -> usize {
        self.kernel.shape()[0]
    }

    /// Same-padding 3x3 convolution of one sample (c_in, h, w) -> (c_out, h, w).
    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, ConvCache)> {
        let (c_in, h, w) = input.dims3("conv forward")?;
        if c_in != self.c_in() {
            return Err(Error::ShapeMismatch {
                op: "conv forward",
                lhs: input.shape().to_vec(),
                rhs: self.kernel.shape().to_vec(),
            });
        }
        let (c_out, hw) = (self.c_out(), h * w);
        let cols = im2col3x3(input.data(), c_in, h, w);
        let mut out = vec![0.0; c_out * hw];
        gemm_nn(c_out, c_in * 9, hw, 1.0, self.kernel.data(), &cols, 0.0, &mut out);
        for c in 0..c_out {
            let b = self.bias[c];
            for v in &mut out[c * hw..(c + 1) * hw] {
                *v += b;
            }
        }
        Ok((
            Tensor::new(vec![c_out, h, w], out)?,
            ConvCache { cols, c_in, h, w },
        ))
    }

    /// Backward from dLoss/dOutput (c_out, h, w) to kernel/bias gradients and
    /// dLoss/dInput (c_in, h, w).
    pub fn backward(&self, cache: &ConvCache, dout: &Tensor) -> Result<(ConvGrads, Tensor)> {
        let (c_out, h, w) = dout.dims3("conv backward")?;
        let hw = h * w;
        if c_out != self.c_out() || cache.h != h || cache.w != w || cache.c_in != self.c_in() {
            return Err(Error::StaleCache("conv backward"));
        }
        let k = cache.c_in * 9;
        // dKernel = dOut (c_out,hw) * cols^T (hw, c_in*9)
        let mut dkernel = vec![0.0; c_out * k];
        gemm_nt(c_out, hw, k, 1.0, dout.data(), &cache.cols, 0.0, &mut dkernel);
        let dbias: Vec<f64> = (0..c_out)
            .map(|c| dout.data()[c * hw..(c + 1) * hw].iter().sum())
            .collect();
        // dCols = kernel^T (c_in*9, c_out) * dOut (c_out, hw), then col2im.
        let mut dcols = vec![0.0; k * hw];
        gemm_tn(k, c_out, hw, 1.0, self.kernel.data(), dout.data(), 0.0, &mut dcols);
        let dinput = col2im3x3(&dcols, cache.c_in, h, w);
        Ok((
            ConvGrads {
                kernel: Tensor::new(self.kernel.shape().to_vec(), dkernel)?,
                bias: dbias,
            },
            Tensor::new(vec![cache.c_in, h, w], dinput)?,
        ))
    }
}

// ── Dense ───────────────────────────────────────────────────────────────────

/// Fully connected layer y = W x + b.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// (n_out, n_in)
    pub weights: Tensor,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub weights: Tensor,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn init(n_in: usize, n_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let weights = Tensor::new(vec![n_out, n_in], he_uniform(rng, n_in, n_out * n_in))
            .expect("dense weight shape");
        Self {
            weights,
            bias: vec![0.0; n_out],
        }
    }

    pub fn n_in(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn n_out(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, DenseCache)> {
        let (n_out, n_in) = (self.n_out(), self.n_in());
        if input.len() != n_in {
            return Err(Error::LengthMismatch {
                what: "dense input",
                expected: n_in,
                actual: input.len(),
            });
        }
        let w = self.weights.data();
        let out: Vec<f64> = (0..n_out)
            .map(|o| {
                self.bias[o]
                    + w[o * n_in..(o + 1) * n_in]
                        .iter()
                        .zip(input)
                        .map(|(wi, xi)| wi * xi)
                        .sum::<f64>()
            })
            .collect();
        Ok((
            out,
            DenseCache {
                input: input.to_vec(),
            },
        ))
    }

    pub fn backward(&self, cache: &DenseCache, dout: &[f64]) -> Result<(DenseGrads, Vec<f64>)> {
        let (n_out, n_in) = (self.n_out(), self.n_in());
        if dout.len() != n_out {
            return Err(Error::LengthMismatch {
                what: "dense backward upstream",
                expected: n_out,
                actual: dout.len(),
            });
        }
        if cache.input.len() != n_in {
            return Err(Error::StaleCache("dense backward"));
        }
        let w = self.weights.data();
        let mut dweights = vec![0.0; n_out * n_in];
        let mut dinput = vec![0.0; n_in];
        for o in 0..n_out {
            let g = dout[o];
            let row = &w[o * n_in..(o + 1) * n_in];
            let drow = &mut dweights[o * n_in..(o + 1) * n_in];
            for i in 0..n_in {
                drow[i] = g * cache.input[i];
                dinput[i] += g * row[i];
            }
        }
        Ok((
            DenseGrads {
                weights: Tensor::new(vec![n_out, n_in], dweights)?,
                bias: dout.to_vec(),
            },
            dinput,
        ))
    }
}

// ── Pooling backward ────────────────────────────────────────────────────────

/// Routes pooled gradients back to the argmax positions recorded by
/// [`Tensor::maxpool2`]. `in_shape` is the pre-pool shape.
pub fn maxpool2_backward(dout: &Tensor, argmax: &[usize], in_shape: &[usize]) -> Result<Tensor> {
    if dout.len() != argmax.len() {
        return Err(Error::LengthMismatch {
            what: "maxpool backward argmax",
            expected: dout.len(),
            actual: argmax.len(),
        });
    }
    let mut din = Tensor::zeros(in_shape.to_vec());
    let flat = din.data_mut();
    for (&idx, &g) in argmax.iter().zip(dout.data()) {
        if idx >= flat.len() {
            return Err(Error::StaleCache("maxpool backward"));
        }
        flat[idx] += g;
    }
    Ok(din)
}

// ── Softmax cross-entropy ───────────────────────────────────────────────────

/// Numerically stable softmax of one logit row.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Mean cross-entropy over a batch of prob rows against one-hot labels, plus
/// the gradient with respect to the LOGITS, (probs - labels) / B.
pub fn loss_and_grad(probs: &Tensor, labels: &Tensor) -> Result<(f64, Tensor)> {
    if probs.shape() != labels.shape() {
        return Err(Error::ShapeMismatch {
            op: "loss_and_grad",
            lhs: probs.shape().to_vec(),
            rhs: labels.shape().to_vec(),
        });
    }
    if probs.rank() != 2 {
        return Err(Error::InvalidShape {
            op: "loss_and_grad",
            shape: probs.shape().to_vec(),
            reason: "expected (batch, classes)".to_string(),
        });
    }
    let b = probs.shape()[0] as f64;
    let loss = -probs
        .data()
        .iter()
        .zip(labels.data())
        .map(|(&p, &t)| t * (p + EPS_LOG).ln())
        .sum::<f64>()
        / b;
    let dlogits = Tensor::new(
        probs.shape().to_vec(),
        probs
            .data()
            .iter()
            .zip(labels.data())
            .map(|(&p, &t)| (p - t) / b)
            .collect(),
    )?;
    Ok((loss, dlogits))
}

/// Fraction of rows whose prob argmax matches the label argmax; ties break to
/// the lowest class index.
pub fn accuracy(probs: &Tensor, labels: &Tensor) -> Result<f64> {
    if probs.shape() != labels.shape() || probs.rank() != 2 {
        return Err(Error::ShapeMismatch {
            op: "accuracy",
            lhs: probs.shape().to_vec(),
            rhs: labels.shape().to_vec(),
        });
    }
    let (b, c) = (probs.shape()[0], probs.shape()[1]);
    let mut hits = 0usize;
    for r in 0..b {
        let row = |t: &Tensor| -> usize {
            let d = &t.data()[r * c..(r + 1) * c];
            let mut best = 0;
            for (i, &v) in d.iter().enumerate() {
                if v > d[best] {
                    best = i;
                }
            }
            best
        };
        if row(probs) == row(labels) {
            hits += 1;
        }
    }
    Ok(hits as f64 / b as f64)
}
