//! Dense row-major f64 tensor with the handful of primitives the networks
//! need: elementwise arithmetic, rank-2 matmul, 3x3 same-padding convolution
//! and 2x2 max pooling.
//!
//! Values are immutable once constructed (all operations return new tensors),
//! so tensors are safe to share across threads.

use crate::error::{Error, Result};

/// Dense n-dimensional array of f64, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn element_count(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    /// Builds a tensor, validating that the shape is non-empty, every
    /// dimension is >= 1 and the data length matches the shape.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidShape {
                op: "Tensor::new",
                shape,
                reason: "shape must be non-empty with every dimension >= 1".to_string(),
            });
        }
        let expected = element_count(&shape);
        if expected != data.len() {
            return Err(Error::LengthMismatch {
                what: "Tensor::new data",
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    /// All-zero tensor. Panics on a degenerate shape; shapes here are always
    /// produced by the library itself.
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = element_count(&shape);
        Self::new(shape, vec![0.0; n]).expect("zeros: invalid shape")
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Self {
        let n = element_count(&shape);
        Self::new(shape, vec![value; n]).expect("filled: invalid shape")
    }

    /// Rank-2 identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Same data, new shape (element counts must agree).
    pub fn reshape(&self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data.clone())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Applies a binary op element by element; shapes must match exactly.
    pub fn elementwise(&self, other: &Tensor, op: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op: "elementwise",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| op(a, b))
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.elementwise(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.elementwise(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.elementwise(other, |a, b| a * b)
    }

    pub fn scale(&self, k: f64) -> Tensor {
        self.map(|v| v * k)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Rank-2 matrix product (m,k) x (k,n) -> (m,n).
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || other.rank() != 2 {
            return Err(Error::InvalidShape {
                op: "matmul",
                shape: if self.rank() != 2 {
                    self.shape.clone()
                } else {
                    other.shape.clone()
                },
                reason: "matmul requires rank-2 tensors".to_string(),
            });
        }
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, n) = (other.shape[0], other.shape[1]);
        if k != k2 {
            return Err(Error::ShapeMismatch {
                op: "matmul inner dimensions",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let mut out = Tensor::zeros(vec![m, n]);
        gemm_nn(m, k, n, 1.0, &self.data, &other.data, 0.0, &mut out.data);
        Ok(out)
    }

    /// 3x3 convolution, stride 1, zero padding 1 ("same" spatial size).
    ///
    /// `self` is (C_in, H, W), `kernels` is (C_out, C_in, 3, 3), `bias` is
    /// (C_out); the result is (C_out, H, W). Out-of-range input is treated
    /// as zero.
    pub fn conv2d(&self, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
        let (c_in, h, w) = self.dims3("conv2d input")?;
        if kernels.rank() != 4 || kernels.shape[2] != 3 || kernels.shape[3] != 3 {
            return Err(Error::InvalidShape {
                op: "conv2d kernels",
                shape: kernels.shape.clone(),
                reason: "kernels must be (C_out, C_in, 3, 3)".to_string(),
            });
        }
        let c_out = kernels.shape[0];
        if kernels.shape[1] != c_in {
            return Err(Error::ShapeMismatch {
                op: "conv2d channels",
                lhs: self.shape.clone(),
                rhs: kernels.shape.clone(),
            });
        }
        if bias.shape() != [c_out] {
            return Err(Error::ShapeMismatch {
                op: "conv2d bias",
                lhs: kernels.shape.clone(),
                rhs: bias.shape.clone(),
            });
        }

        let cols = im2col3x3(&self.data, c_in, h, w);
        let mut out = Tensor::zeros(vec![c_out, h, w]);
        // (C_out, C_in*9) x (C_in*9, H*W)
        gemm_nn(
            c_out,
            c_in * 9,
            h * w,
            1.0,
            &kernels.data,
            &cols,
            0.0,
            &mut out.data,
        );
        for o in 0..c_out {
            let b = bias.data[o];
            for v in &mut out.data[o * h * w..(o + 1) * h * w] {
                *v += b;
            }
        }
        Ok(out)
    }

    /// Non-overlapping 2x2 max pooling over (C, H, W) with H, W even.
    ///
    /// Returns the pooled tensor and, per output element, the flat index of
    /// the chosen input element. Ties break toward the smallest flat index.
    pub fn maxpool2(&self) -> Result<(Tensor, Vec<usize>)> {
        let (c, h, w) = self.dims3("maxpool2 input")?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::InvalidShape {
                op: "maxpool2",
                shape: self.shape.clone(),
                reason: "height and width must be even".to_string(),
            });
        }
        let (oh, ow) = (h / 2, w / 2);
        let mut out = Tensor::zeros(vec![c, oh, ow]);
        let mut argmax = vec![0usize; c * oh * ow];
        for ch in 0..c {
            let base = ch * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best_idx = base + (2 * oy) * w + 2 * ox;
                    let mut best = self.data[best_idx];
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                        if self.data[idx] > best {
                            best = self.data[idx];
                            best_idx = idx;
                        }
                    }
                    let o = ch * oh * ow + oy * ow + ox;
                    out.data[o] = best;
                    argmax[o] = best_idx;
                }
            }
        }
        Ok((out, argmax))
    }

    pub(crate) fn dims3(&self, op: &'static str) -> Result<(usize, usize, usize)> {
        if self.rank() != 3 {
            return Err(Error::InvalidShape {
                op: "rank-3 view",
                shape: self.shape.clone(),
                reason: op.to_string(),
            });
        }
        Ok((self.shape[0], self.shape[1], self.shape[2]))
    }
}

/// Row-major C = alpha * A(m,k) * B(k,n) + beta * C.
pub(crate) fn gemm_nn(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    b: &[f64],
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Row-major C = alpha * A(m,k) * B(n,k)^T + beta * C.
pub(crate) fn gemm_nt(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    b: &[f64],
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Row-major C = alpha * A(k,m)^T * B(k,n) + beta * C.
pub(crate) fn gemm_tn(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    b: &[f64],
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Unfolds (C, H, W) into a (C*9, H*W) patch matrix for 3x3/stride-1/pad-1
/// convolution. Row (c*9 + dy*3 + dx) holds input[c, y+dy-1, x+dx-1] for every
/// output position (y, x), with zero for out-of-range taps.
pub(crate) fn im2col3x3(input: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let hw = h * w;
    let mut cols = vec![0.0; c * 9 * hw];
    for ch in 0..c {
        let plane = &input[ch * hw..(ch + 1) * hw];
        for dy in 0..3usize {
            // rows where y+dy-1 stays in range
            let y0 = 1usize.saturating_sub(dy);
            let y1 = (h + 1 - dy).min(h);
            for dx in 0..3usize {
                let row = &mut cols[(ch * 9 + dy * 3 + dx) * hw..(ch * 9 + dy * 3 + dx + 1) * hw];
                let x0 = 1usize.saturating_sub(dx);
                let x1 = (w + 1 - dx).min(w);
                for y in y0..y1 {
                    let src = &plane[(y + dy - 1) * w + (x0 + dx - 1)..(y + dy - 1) * w + (x1 + dx - 1)];
                    row[y * w + x0..y * w + x1].copy_from_slice(src);
                }
            }
        }
    }
    cols
}

/// Folds a (C*9, H*W) patch-gradient matrix back onto a (C, H, W) input
/// gradient (the adjoint of [`im2col3x3`]).
pub(crate) fn col2im3x3(cols: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let hw = h * w;
    let mut out = vec![0.0; c * hw];
    for ch in 0..c {
        let plane = &mut out[ch * hw..(ch + 1) * hw];
        for dy in 0..3usize {
            let y0 = 1usize.saturating_sub(dy);
            let y1 = (h + 1 - dy).min(h);
            for dx in 0..3usize {
                let row = &cols[(ch * 9 + dy * 3 + dx) * hw..(ch * 9 + dy * 3 + dx + 1) * hw];
                let x0 = 1usize.saturating_sub(dx);
                let x1 = (w + 1 - dx).min(w);
                for y in y0..y1 {
                    let dst =
                        &mut plane[(y + dy - 1) * w + (x0 + dx - 1)..(y + dy - 1) * w + (x1 + dx - 1)];
                    for (d, s) in dst.iter_mut().zip(&row[y * w + x0..y * w + x1]) {
                        *d += s;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use rand::RngExt;

    fn random_tensor(shape: Vec<usize>, seed: u64) -> Tensor {
        let mut rng = seeded_rng(seed);
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::new(shape, data).unwrap()
    }

    #[test]
    fn elementwise_add_and_mul() {
        let a = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::new(vec![2], vec![3.0, 4.0]).unwrap();
        assert_eq!(a.add(&b).unwrap().data(), &[4.0, 6.0]);

        let c = Tensor::new(vec![2], vec![2.0, 2.0]).unwrap();
        let z = Tensor::new(vec![2], vec![0.0, 0.0]).unwrap();
        assert_eq!(c.mul(&z).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn elementwise_shape_mismatch_names_both_shapes() {
        let a = Tensor::zeros(vec![2, 3]);
        let b = Tensor::zeros(vec![3, 2]);
        match a.add(&b) {
            Err(Error::ShapeMismatch { lhs, rhs, .. }) => {
                assert_eq!(lhs, vec![2, 3]);
                assert_eq!(rhs, vec![3, 2]);
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn tensor_new_rejects_degenerate_shapes() {
        assert!(Tensor::new(vec![], vec![]).is_err());
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
        assert!(Tensor::new(vec![2, 2], vec![1.0]).is_err());
    }

    #[test]
    fn matmul_identity() {
        let a = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = Tensor::identity(2).matmul(&a).unwrap();
        assert_eq!(out.data(), a.data());
    }

    #[test]
    fn matmul_forced_arithmetic() {
        let a = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let b = Tensor::new(vec![2, 2], vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().data(), &[5.0, 6.0, 0.0, 0.0]);
    }

    #[test]
    fn matmul_inner_dim_mismatch() {
        let a = Tensor::zeros(vec![2, 3]);
        let b = Tensor::zeros(vec![2, 3]);
        assert!(matches!(a.matmul(&b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        // Independent reference: entry-by-entry triple loop.
        let a = random_tensor(vec![4, 5], 11);
        let b = random_tensor(vec![5, 3], 12);
        let out = a.matmul(&b).unwrap();
        for i in 0..4 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..5 {
                    acc += a.data()[i * 5 + k] * b.data()[k * 3 + j];
                }
                assert!((out.data()[i * 3 + j] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv2d_zero_input_yields_bias() {
        let input = Tensor::zeros(vec![2, 4, 4]);
        let kernels = random_tensor(vec![3, 2, 3, 3], 21);
        let bias = Tensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap();
        let out = input.conv2d(&kernels, &bias).unwrap();
        assert_eq!(out.shape(), &[3, 4, 4]);
        for o in 0..3 {
            for &v in &out.data()[o * 16..(o + 1) * 16] {
                assert_eq!(v, bias.data()[o]);
            }
        }
    }

    #[test]
    fn conv2d_same_padding_shape() {
        let input = Tensor::zeros(vec![3, 32, 32]);
        let kernels = Tensor::zeros(vec![16, 3, 3, 3]);
        let bias = Tensor::zeros(vec![16]);
        let out = input.conv2d(&kernels, &bias).unwrap();
        assert_eq!(out.shape(), &[16, 32, 32]);
    }

    #[test]
    fn conv2d_channel_mismatch() {
        let input = Tensor::zeros(vec![3, 8, 8]);
        let kernels = Tensor::zeros(vec![4, 2, 3, 3]);
        let bias = Tensor::zeros(vec![4]);
        assert!(matches!(
            input.conv2d(&kernels, &bias),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn conv2d_matches_nested_loop_oracle() {
        // Independent reference: direct six-nested-loop convolution.
        let input = random_tensor(vec![2, 5, 5], 31);
        let kernels = random_tensor(vec![3, 2, 3, 3], 32);
        let bias = random_tensor(vec![3], 33);
        let out = input.conv2d(&kernels, &bias).unwrap();

        let (h, w) = (5usize, 5usize);
        for o in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = bias.data()[o];
                    for c in 0..2 {
                        for dy in 0..3usize {
                            for dx in 0..3usize {
                                let iy = y as isize + dy as isize - 1;
                                let ix = x as isize + dx as isize - 1;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                acc += input.data()[c * h * w + iy as usize * w + ix as usize]
                                    * kernels.data()[((o * 2 + c) * 3 + dy) * 3 + dx];
                            }
                        }
                    }
                    let got = out.data()[o * h * w + y * w + x];
                    assert!(
                        (got - acc).abs() < 1e-12,
                        "mismatch at ({o},{y},{x}): {got} vs {acc}"
                    );
                }
            }
        }
    }

    #[test]
    fn conv2d_linear_in_input() {
        let x = random_tensor(vec![2, 6, 6], 41);
        let y = random_tensor(vec![2, 6, 6], 42);
        let kernels = random_tensor(vec![3, 2, 3, 3], 43);
        let zero_bias = Tensor::zeros(vec![3]);
        let (alpha, beta) = (0.7, -1.3);

        let lhs = x
            .scale(alpha)
            .add(&y.scale(beta))
            .unwrap()
            .conv2d(&kernels, &zero_bias)
            .unwrap();
        let rhs = x
            .conv2d(&kernels, &zero_bias)
            .unwrap()
            .scale(alpha)
            .add(&y.conv2d(&kernels, &zero_bias).unwrap().scale(beta))
            .unwrap();
        for (a, b) in lhs.data().iter().zip(rhs.data()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn maxpool2_shapes_and_forced_max() {
        let t = Tensor::zeros(vec![16, 32, 32]);
        let (out, _) = t.maxpool2().unwrap();
        assert_eq!(out.shape(), &[16, 16, 16]);

        let t = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (out, idx) = t.maxpool2().unwrap();
        assert_eq!(out.data(), &[4.0]);
        assert_eq!(idx, vec![3]);
    }

    #[test]
    fn maxpool2_tie_breaks_to_smallest_flat_index() {
        let t = Tensor::new(vec![1, 2, 2], vec![7.0, 7.0, 7.0, 7.0]).unwrap();
        let (out, idx) = t.maxpool2().unwrap();
        assert_eq!(out.data(), &[7.0]);
        assert_eq!(idx, vec![0]);
    }

    #[test]
    fn maxpool2_rejects_odd_sizes() {
        let t = Tensor::zeros(vec![1, 3, 4]);
        assert!(matches!(t.maxpool2(), Err(Error::InvalidShape { .. })));
    }

    #[test]
    fn im2col_col2im_are_adjoint() {
        // <im2col(x), y> == <x, col2im(y)> for random x, y; this pins the
        // index bookkeeping both directions.
        let (c, h, w) = (2, 4, 5);
        let x = random_tensor(vec![c, h, w], 51);
        let y = random_tensor(vec![c * 9, h * w], 52);
        let cols = im2col3x3(x.data(), c, h, w);
        let folded = col2im3x3(y.data(), c, h, w);
        let lhs: f64 = cols.iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(&folded).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
