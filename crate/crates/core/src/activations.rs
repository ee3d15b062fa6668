//! Activation functions: the four fixed candidates (ReLU, sigmoid, tanh,
//! linear) and the two trainable families built from them.
//!
//! A Fourier activation is a truncated Fourier series
//!
//! ```text
//! act(x) = offset + sum_{n=1..rank} cos_coefs[n] * cos(n * omega * x)
//!                                 + sin_coefs[n] * sin(n * omega * x)
//! ```
//!
//! with the offset, the fundamental frequency and every harmonic coefficient
//! trainable. A linear-combination (LC) activation is a sum-normalized blend
//! of the fixed candidates,
//!
//! ```text
//! act(x) = (sum_i w_i * cand_i(x)) / clamp(sum_i w_i)
//! ```
//!
//! with the blend weights trainable. Both come with analytic gradients with
//! respect to their parameters *and* their input, validated against the
//! finite-difference oracle in `gradcheck`.

use crate::error::{Error, Result};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Denominator guard for LC activations: the weight sum is clamped away from
/// zero at this magnitude (sign preserved, sign(0) treated as +1).
pub const EPS_DENOM: f64 = 1e-3;

/// Trainable-omega clamp: |omega| is kept at or above this after every
/// optimizer step so the activation never degenerates to a constant.
pub const OMEGA_MIN: f64 = 1e-3;

// ── Fixed candidates ────────────────────────────────────────────────────────

/// The four fixed activation functions used as LC candidates and as the
/// baseline CNN activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedKind {
    Relu,
    Sigmoid,
    Tanh,
    Linear,
}

impl FixedKind {
    /// Candidate order is part of the LC weight-vector layout contract.
    pub const ALL: [FixedKind; 4] = [
        FixedKind::Relu,
        FixedKind::Sigmoid,
        FixedKind::Tanh,
        FixedKind::Linear,
    ];

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "relu" => Ok(FixedKind::Relu),
            "sigmoid" => Ok(FixedKind::Sigmoid),
            "tanh" => Ok(FixedKind::Tanh),
            "linear" => Ok(FixedKind::Linear),
            _ => Err(Error::UnknownKind {
                what: "activation",
                value: name.to_string(),
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FixedKind::Relu => "relu",
            FixedKind::Sigmoid => "sigmoid",
            FixedKind::Tanh => "tanh",
            FixedKind::Linear => "linear",
        }
    }

    pub fn forward(self, x: f64) -> f64 {
        match self {
            FixedKind::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            FixedKind::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            FixedKind::Tanh => x.tanh(),
            FixedKind::Linear => x,
        }
    }

    /// Derivative at `x`. The ReLU subgradient at exactly 0 is defined as 0.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            FixedKind::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            FixedKind::Sigmoid => {
                let s = self.forward(x);
                s * (1.0 - s)
            }
            FixedKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            FixedKind::Linear => 1.0,
        }
    }
}

/// Scalar forward of a fixed activation.
pub fn fixed_forward(kind: FixedKind, x: f64) -> f64 {
    kind.forward(x)
}

// ── Fourier-series activation ───────────────────────────────────────────────

/// Trainable Fourier-series activation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierParams {
    /// Constant term of the series.
    pub offset: f64,
    /// Fundamental frequency; the series has period 2*pi/omega.
    pub omega: f64,
    /// Cosine coefficients, one per harmonic (len == rank).
    pub cos_coefs: Vec<f64>,
    /// Sine coefficients, one per harmonic (len == rank).
    pub sin_coefs: Vec<f64>,
}

/// Forward-pass cache: the input plus cos(n*omega*x) and sin(n*omega*x) for
/// every harmonic, so the backward pass is pure arithmetic.
#[derive(Debug, Clone)]
pub struct FourierCache {
    pub x: Vec<f64>,
    /// Harmonic-major: cos_nx[(n-1)*len + i] = cos(n * omega * x[i]).
    pub cos_nx: Vec<f64>,
    pub sin_nx: Vec<f64>,
}

/// Gradients of a scalar loss with respect to every Fourier parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierGrads {
    pub offset: f64,
    pub omega: f64,
    pub cos_coefs: Vec<f64>,
    pub sin_coefs: Vec<f64>,
}

impl FourierParams {
    pub fn new(offset: f64, omega: f64, cos_coefs: Vec<f64>, sin_coefs: Vec<f64>) -> Result<Self> {
        if cos_coefs.len() != sin_coefs.len() {
            return Err(Error::LengthMismatch {
                what: "FourierParams coefficient arrays",
                expected: cos_coefs.len(),
                actual: sin_coefs.len(),
            });
        }
        if cos_coefs.is_empty() {
            return Err(Error::InvalidArgument {
                what: "FourierParams rank",
                detail: "rank must be >= 1".to_string(),
            });
        }
        let p = Self {
            offset,
            omega,
            cos_coefs,
            sin_coefs,
        };
        if let Some(i) = p.to_flat().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "FourierParams",
                index: i,
            });
        }
        Ok(p)
    }

    /// Near-identity initialization: offset 0, omega 1, first sine coefficient
    /// 1 and everything else drawn from N(0, 0.01^2), so the activation starts
    /// out close to sin(x) ~ x around the origin.
    pub fn init(rank: usize, rng: &mut ChaCha8Rng) -> Self {
        let noise = Normal::new(0.0, 0.01).unwrap();
        let cos_coefs: Vec<f64> = (0..rank).map(|_| noise.sample(rng)).collect();
        let mut sin_coefs: Vec<f64> = (0..rank).map(|_| noise.sample(rng)).collect();
        sin_coefs[0] = 1.0;
        Self {
            offset: 0.0,
            omega: 1.0,
            cos_coefs,
            sin_coefs,
        }
    }

    /// Rank-5 least-squares fit of the sigmoid over [-4, 4] (period-16
    /// fundamental). Demonstrates that the family covers the usual fixed
    /// activations; the fit error is below 0.05 everywhere on that interval.
    pub fn sigmoid_fit() -> Self {
        Self {
            offset: 0.5000000000000923,
            omega: 0.39269908169872414,
            cos_coefs: vec![
                -1.6176880450073746e-13,
                1.09574478045791e-13,
                -5.465111268779833e-14,
                1.821767358373925e-14,
                -2.897667829261272e-15,
            ],
            sin_coefs: vec![
                0.5483898614520939,
                -0.05385193950963371,
                0.07318150111787787,
                -0.014722262407604025,
                0.0069342781787857,
            ],
        }
    }

    /// Rank-5 least-squares fit of tanh over [-4, 4]; see [`Self::sigmoid_fit`].
    pub fn tanh_fit() -> Self {
        Self {
            offset: 3.016853398270758e-13,
            omega: 0.39269908169872414,
            cos_coefs: vec![
                -5.289100279530229e-13,
                3.529227519783522e-13,
                -1.708273607239551e-13,
                5.492194280852636e-14,
                -8.794499878724532e-15,
            ],
            sin_coefs: vec![
                2.4614238726834525,
                -1.8052121488368187,
                1.744391670153978,
                -0.7861085923699378,
                0.297985952373344,
            ],
        }
    }

    pub fn rank(&self) -> usize {
        self.cos_coefs.len()
    }

    /// Flat layout: [offset, omega, cos_coefs.., sin_coefs..].
    pub fn flat_len(&self) -> usize {
        2 + 2 * self.rank()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.flat_len());
        v.push(self.offset);
        v.push(self.omega);
        v.extend_from_slice(&self.cos_coefs);
        v.extend_from_slice(&self.sin_coefs);
        v
    }

    pub fn set_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.flat_len() {
            return Err(Error::LengthMismatch {
                what: "FourierParams flat vector",
                expected: self.flat_len(),
                actual: flat.len(),
            });
        }
        let r = self.rank();
        self.offset = flat[0];
        self.omega = flat[1];
        self.cos_coefs.copy_from_slice(&flat[2..2 + r]);
        self.sin_coefs.copy_from_slice(&flat[2 + r..]);
        Ok(())
    }

    /// Evaluates one scalar (no cache).
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = self.offset;
        let (s1, c1) = (self.omega * x).sin_cos();
        let (mut sn, mut cn) = (s1, c1);
        for n in 0..self.rank() {
            if n > 0 {
                let (s, c) = (sn * c1 + cn * s1, cn * c1 - sn * s1);
                sn = s;
                cn = c;
            }
            acc += self.cos_coefs[n] * cn + self.sin_coefs[n] * sn;
        }
        acc
    }

    /// Elementwise forward over a slice, caching x and the per-harmonic
    /// cos/sin tables for the backward pass (O(rank) memory per element).
    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, FourierCache) {
        let len = x.len();
        let rank = self.rank();
        let mut cos_nx = vec![0.0; rank * len];
        let mut sin_nx = vec![0.0; rank * len];
        let mut out = vec![self.offset; len];
        for (i, &xi) in x.iter().enumerate() {
            let (s1, c1) = (self.omega * xi).sin_cos();
            let (mut sn, mut cn) = (s1, c1);
            for n in 0..rank {
                if n > 0 {
                    // angle-addition step: (n+1)theta from n*theta and theta
                    let (s, c) = (sn * c1 + cn * s1, cn * c1 - sn * s1);
                    sn = s;
                    cn = c;
                }
                cos_nx[n * len + i] = cn;
                sin_nx[n * len + i] = sn;
                out[i] += self.cos_coefs[n] * cn + self.sin_coefs[n] * sn;
            }
        }
        (
            out,
            FourierCache {
                x: x.to_vec(),
                cos_nx,
                sin_nx,
            },
        )
    }

    /// Backward pass. `upstream` is dLoss/dOut per element; returns the
    /// parameter gradients (summed over every element that shares this
    /// parameter set) and dLoss/dInput per element.
    ///
    /// Per element, with g the upstream gradient:
    ///   d offset     += g
    ///   d cos_coefs[n] += g * cos(n omega x)
    ///   d sin_coefs[n] += g * sin(n omega x)
    ///   d omega      += g * x * sum_n n * (-cos_coefs[n] sin + sin_coefs[n] cos)
    ///   d input       = g * omega * sum_n n * (-cos_coefs[n] sin + sin_coefs[n] cos)
    pub fn backward(
        &self,
        cache: &FourierCache,
        upstream: &[f64],
    ) -> Result<(FourierGrads, Vec<f64>)> {
        let len = cache.x.len();
        if upstream.len() != len {
            return Err(Error::LengthMismatch {
                what: "fourier backward upstream",
                expected: len,
                actual: upstream.len(),
            });
        }
        let rank = self.rank();
        if cache.cos_nx.len() != rank * len {
            return Err(Error::StaleCache("fourier backward"));
        }
        let mut grads = FourierGrads {
            offset: 0.0,
            omega: 0.0,
            cos_coefs: vec![0.0; rank],
            sin_coefs: vec![0.0; rank],
        };
        let mut dx = vec![0.0; len];
        for (i, (&g, &xi)) in upstream.iter().zip(&cache.x).enumerate() {
            grads.offset += g;
            let mut slope = 0.0; // sum_n n * (-a_n sin + b_n cos)
            for n in 0..rank {
                let c = cache.cos_nx[n * len + i];
                let s = cache.sin_nx[n * len + i];
                grads.cos_coefs[n] += g * c;
                grads.sin_coefs[n] += g * s;
                slope += (n + 1) as f64 * (self.sin_coefs[n] * c - self.cos_coefs[n] * s);
            }
            grads.omega += g * xi * slope;
            dx[i] = g * self.omega * slope;
        }
        Ok((grads, dx))
    }
}

impl FourierGrads {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 + 2 * self.cos_coefs.len());
        v.push(self.offset);
        v.push(self.omega);
        v.extend_from_slice(&self.cos_coefs);
        v.extend_from_slice(&self.sin_coefs);
        v
    }
}

// ── Linear-combination activation ───────────────────────────────────────────

/// Trainable linear-combination activation: blend weights over an ordered
/// list of fixed candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct LcParams {
    pub weights: Vec<f64>,
    pub candidates: Vec<FixedKind>,
}

/// Forward cache: input, every candidate's output (candidate-major), the
/// clamped denominator and the blended output.
#[derive(Debug, Clone)]
pub struct LcCache {
    pub x: Vec<f64>,
    /// candidate_out[k*len + i] = candidates[k].forward(x[i])
    pub candidate_out: Vec<f64>,
    pub denom: f64,
    pub out: Vec<f64>,
}

/// Weight sum clamped away from zero: identity when |sum| >= EPS_DENOM,
/// otherwise EPS_DENOM with the sign of the sum (sign(0) = +1).
pub fn clamp_denom(sum: f64) -> f64 {
    if sum.abs() >= EPS_DENOM {
        sum
    } else if sum < 0.0 {
        -EPS_DENOM
    } else {
        EPS_DENOM
    }
}

impl LcParams {
    pub fn new(weights: Vec<f64>, candidates: Vec<FixedKind>) -> Result<Self> {
        if weights.len() != candidates.len() {
            return Err(Error::LengthMismatch {
                what: "LcParams weights vs candidates",
                expected: candidates.len(),
                actual: weights.len(),
            });
        }
        if weights.is_empty() {
            return Err(Error::InvalidArgument {
                what: "LcParams",
                detail: "candidate list must be non-empty".to_string(),
            });
        }
        Ok(Self {
            weights,
            candidates,
        })
    }

    /// Unbiased start over [ReLU, sigmoid, tanh, linear]: every weight 0.25,
    /// so the denominator starts at exactly 1.
    pub fn init() -> Self {
        Self {
            weights: vec![0.25; 4],
            candidates: FixedKind::ALL.to_vec(),
        }
    }

    /// One-hot weights selecting a single candidate.
    pub fn one_hot(k: usize) -> Self {
        let mut p = Self::init();
        p.weights = vec![0.0; 4];
        p.weights[k] = 1.0;
        p
    }

    /// Evaluates one scalar (no cache).
    pub fn eval(&self, x: f64) -> f64 {
        let denom = clamp_denom(self.weights.iter().sum());
        let s: f64 = self
            .candidates
            .iter()
            .zip(&self.weights)
            .map(|(k, w)| w * k.forward(x))
            .sum();
        s / denom
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, LcCache) {
        let len = x.len();
        let m = self.n_candidates();
        let denom = clamp_denom(self.weights.iter().sum());
        let mut candidate_out = vec![0.0; m * len];
        let mut out = vec![0.0; len];
        for (k, &kind) in self.candidates.iter().enumerate() {
            let w = self.weights[k];
            for (i, &xi) in x.iter().enumerate() {
                let y = kind.forward(xi);
                candidate_out[k * len + i] = y;
                out[i] += w * y;
            }
        }
        for v in &mut out {
            *v /= denom;
        }
        let cache = LcCache {
            x: x.to_vec(),
            candidate_out,
            denom,
            out: out.clone(),
        };
        (out, cache)
    }

    /// Backward pass. Returns (per-weight gradients summed over elements,
    /// dLoss/dInput per element).
    ///
    /// Per element with g the upstream gradient:
    ///   d w_k  += g * (cand_k(x) - act(x)) / denom
    ///   d input = g * (sum_i w_i * cand_i'(x)) / denom
    pub fn backward(&self, cache: &LcCache, upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let len = cache.x.len();
        if upstream.len() != len {
            return Err(Error::LengthMismatch {
                what: "lc backward upstream",
                expected: len,
                actual: upstream.len(),
            });
        }
        let m = self.n_candidates();
        if cache.candidate_out.len() != m * len || cache.out.len() != len {
            return Err(Error::StaleCache("lc backward"));
        }
        let mut dw = vec![0.0; m];
        let mut dx = vec![0.0; len];
        for (i, &g) in upstream.iter().enumerate() {
            let xi = cache.x[i];
            let acted = cache.out[i];
            let mut slope = 0.0;
            for (k, &kind) in self.candidates.iter().enumerate() {
                dw[k] += g * (cache.candidate_out[k * len + i] - acted) / cache.denom;
                slope += self.weights[k] * kind.derivative(xi);
            }
            dx[i] = g * slope / cache.denom;
        }
        Ok((dw, dx))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;

    #[test]
    fn fixed_forward_definitions() {
        assert_eq!(fixed_forward(FixedKind::Relu, -2.0), 0.0);
        assert_eq!(fixed_forward(FixedKind::Sigmoid, 0.0), 0.5);
        assert_eq!(fixed_forward(FixedKind::Tanh, 0.0), 0.0);
        assert_eq!(fixed_forward(FixedKind::Linear, 3.7), 3.7);
    }

    #[test]
    fn fixed_parse_rejects_unknown() {
        assert!(FixedKind::parse("relu").is_ok());
        assert!(matches!(
            FixedKind::parse("swish"),
            Err(Error::UnknownKind { .. })
        ));
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        assert_eq!(FixedKind::Relu.derivative(0.0), 0.0);
    }

    #[test]
    fn fourier_constant_term_only() {
        let p = FourierParams::new(1.0, 1.0, vec![0.0; 5], vec![0.0; 5]).unwrap();
        let (out, _) = p.forward(&[-3.0, 0.0, 2.5]);
        assert_eq!(out, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn fourier_single_cosine_term() {
        let p = FourierParams::new(0.0, 1.0, vec![1.0, 0.0, 0.0, 0.0, 0.0], vec![0.0; 5]).unwrap();
        let (out, _) = p.forward(&[std::f64::consts::FRAC_PI_2]);
        assert!(out[0].abs() < 1e-12, "cos(pi/2) expected ~0, got {}", out[0]);
    }

    #[test]
    fn fourier_backward_constant_function() {
        let p = FourierParams::new(0.7, 1.3, vec![0.0; 5], vec![0.0; 5]).unwrap();
        let x = [0.4, -1.2, 2.0];
        let g = [1.0, 2.0, 3.0];
        let (_, cache) = p.forward(&x);
        let (grads, dx) = p.backward(&cache, &g).unwrap();
        assert_eq!(dx, vec![0.0, 0.0, 0.0]);
        assert_eq!(grads.offset, 6.0);
    }

    #[test]
    fn fourier_backward_single_term_at_zero() {
        let p = FourierParams::new(0.0, 1.0, vec![1.0, 0.0, 0.0, 0.0, 0.0], vec![0.0; 5]).unwrap();
        let (_, cache) = p.forward(&[0.0]);
        let (grads, dx) = p.backward(&cache, &[1.0]).unwrap();
        assert_eq!(grads.cos_coefs[0], 1.0); // cos(0)
        assert_eq!(dx[0], 0.0); // -sin(0)
    }

    #[test]
    fn fourier_recurrence_matches_direct_trig() {
        let p = FourierParams::init(5, &mut seeded_rng_local(99));
        let mut rng = seeded_rng_local(3);
        for _ in 0..200 {
            let x: f64 = rng.random_range(-10.0..10.0);
            let direct: f64 = p.offset
                + (1..=5)
                    .map(|n| {
                        p.cos_coefs[n - 1] * (n as f64 * p.omega * x).cos()
                            + p.sin_coefs[n - 1] * (n as f64 * p.omega * x).sin()
                    })
                    .sum::<f64>();
            assert!((p.eval(x) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn fourier_flat_round_trip() {
        let p = FourierParams::init(5, &mut seeded_rng_local(1234));
        let mut q = FourierParams::init(5, &mut seeded_rng_local(0));
        q.set_from_flat(&p.to_flat()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn lc_one_hot_linear_is_identity() {
        let p = LcParams::one_hot(3); // linear
        let xs = [-2.0, -0.5, 0.0, 0.5, 7.25];
        let (out, _) = p.forward(&xs);
        assert_eq!(out, xs.to_vec());
    }

    #[test]
    fn lc_uniform_weights_at_zero() {
        let p = LcParams::new(vec![1.0; 4], FixedKind::ALL.to_vec()).unwrap();
        let (out, _) = p.forward(&[0.0]);
        assert_eq!(out[0], 0.125); // (0 + 0.5 + 0 + 0) / 4
    }

    #[test]
    fn lc_one_hot_relu_bit_exact() {
        let p = LcParams::one_hot(0);
        let mut rng = seeded_rng_local(17);
        let xs: Vec<f64> = (0..1000).map(|_| rng.random_range(-5.0..5.0)).collect();
        let (out, _) = p.forward(&xs);
        for (o, x) in out.iter().zip(&xs) {
            assert_eq!(*o, fixed_forward(FixedKind::Relu, *x));
        }
    }

    #[test]
    fn lc_backward_one_hot_active_weight_grad_is_zero() {
        for k in 0..4 {
            let p = LcParams::one_hot(k);
            let xs = [-1.5, 0.25, 3.0];
            let (_, cache) = p.forward(&xs);
            let (dw, _) = p.backward(&cache, &[1.0, 1.0, 1.0]).unwrap();
            assert_eq!(dw[k], 0.0, "active candidate {k} grad must vanish");
        }
    }

    #[test]
    fn lc_backward_matches_direct_formula() {
        // Straight-line evaluation of the quotient-rule weight gradient.
        let p = LcParams::new(vec![1.0; 4], FixedKind::ALL.to_vec()).unwrap();
        let x = 10.0;
        let (out, cache) = p.forward(&[x]);
        let (dw, _) = p.backward(&cache, &[1.0]).unwrap();

        let cand: Vec<f64> = FixedKind::ALL.iter().map(|k| k.forward(x)).collect();
        let denom: f64 = 4.0;
        let act = cand.iter().sum::<f64>() / denom;
        assert!((out[0] - act).abs() < 1e-15);
        for k in 0..4 {
            let direct = (cand[k] - act) / denom;
            assert!((dw[k] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn clamp_denom_guard() {
        assert_eq!(clamp_denom(0.5), 0.5);
        assert_eq!(clamp_denom(-0.5), -0.5);
        assert_eq!(clamp_denom(1e-5), EPS_DENOM);
        assert_eq!(clamp_denom(-1e-5), -EPS_DENOM);
        assert_eq!(clamp_denom(0.0), EPS_DENOM);
    }

    #[test]
    fn fourier_fits_stay_under_error_budget() {
        // 401-point grid over [-4, 4]; the committed coefficients came from an
        // offline least-squares fit and must reproduce the target to < 0.05.
        let grid: Vec<f64> = (0..401).map(|i| -4.0 + 8.0 * i as f64 / 400.0).collect();
        let sig = FourierParams::sigmoid_fit();
        let max_err_sig = grid
            .iter()
            .map(|&x| (sig.eval(x) - FixedKind::Sigmoid.forward(x)).abs())
            .fold(0.0, f64::max);
        assert!(max_err_sig < 0.05, "sigmoid fit error {max_err_sig}");

        let th = FourierParams::tanh_fit();
        let max_err_tanh = grid
            .iter()
            .map(|&x| (th.eval(x) - FixedKind::Tanh.forward(x)).abs())
            .fold(0.0, f64::max);
        assert!(max_err_tanh < 0.05, "tanh fit error {max_err_tanh}");
    }

    fn seeded_rng_local(seed: u64) -> rand_chacha::ChaCha8Rng {
        crate::rng::seeded_rng(seed)
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn fourier_is_periodic(x in -20.0f64..20.0, seed in 0u64..1000) {
                let p = FourierParams::init(5, &mut crate::rng::seeded_rng(seed));
                let period = 2.0 * std::f64::consts::PI / p.omega;
                let a = p.eval(x);
                let b = p.eval(x + period);
                prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }

            #[test]
            fn lc_one_hot_matches_candidate(x in -10.0f64..10.0, k in 0usize..4) {
                let p = LcParams::one_hot(k);
                let (out, _) = p.forward(&[x]);
                prop_assert_eq!(out[0], FixedKind::ALL[k].forward(x));
            }
        }
    }
}
