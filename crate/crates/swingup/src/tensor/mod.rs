//! Minimal dense-tensor engine with reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every forward operation as an append-only node list;
//! inputs always precede outputs, so [`Tape::backward`] is a single reverse
//! walk. Graphs are rebuilt per example (define-by-run), which handles the
//! variable-length shake sequences without padding.
//!
//! Everything runs in f64. Debug builds assert finiteness of every forward
//! output and backward accumulation.

pub mod check;
pub mod optim;

use crate::error::{Error, Result};

/// Dense row-major n-dimensional array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() || shape.iter().any(|&d| d == 0) {
            return Err(Error::shape(
                "tensor",
                format!("shape {:?} incompatible with {} values", shape, data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; numel],
        }
    }

    pub fn scalar(x: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![x],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

struct LstmSaved {
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c_new: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq)]
enum BiasMode {
    Elementwise,
    Leading,
    Axis1,
}

enum Op {
    Leaf,
    Add(Var, Var),
    AddBias {
        x: Var,
        bias: Var,
        mode: BiasMode,
    },
    Matmul {
        a: Var,
        b: Var,
        m: usize,
        k: usize,
        n: usize,
    },
    Conv2d {
        input: Var,
        weight: Var,
    },
    Conv2dBatched {
        input: Var,
        weight: Var,
    },
    Transpose(Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    Concat(Vec<Var>),
    Slice {
        x: Var,
        start: usize,
    },
    Reshape(Var),
    Mean(Var),
    MseLoss {
        pred: Var,
        target: Var,
    },
    CrossEntropy {
        logits: Var,
        class: usize,
        probs: Vec<f64>,
    },
    LstmCell {
        x: Var,
        h: Var,
        c: Var,
        w_ih: Var,
        w_hh: Var,
        b: Var,
        saved: Box<LstmSaved>,
    },
}

struct Node {
    value: Tensor,
    grad: Option<Vec<f64>>,
    op: Op,
    needs_grad: bool,
}

/// Append-only computation graph.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

#[inline]
fn debug_check_finite(op: &str, data: &[f64]) {
    debug_assert!(
        data.iter().all(|v| v.is_finite()),
        "non-finite value out of {op}"
    );
    let _ = (op, data);
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `out[j] += s * x[j]`; the compiler vectorizes this form.
#[inline]
fn axpy(s: f64, x: &[f64], out: &mut [f64]) {
    for (o, v) in out.iter_mut().zip(x.iter()) {
        *o += s * v;
    }
}

/// Dot product with four independent accumulators; breaking the serial
/// dependency chain is what lets it vectorize.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let n4 = n - n % 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    let mut i = 0;
    while i < n4 {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
        i += 4;
    }
    for j in n4..n {
        s0 += a[j] * b[j];
    }
    (s0 + s1) + (s2 + s3)
}

const MM_TILE: usize = 256;

/// `c[m×n] += a[m×k] · b[k×n]`, row-major. Four-row micro-kernel over
/// column tiles that stay cache-resident across the k loop.
pub fn matmul_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    if n == 1 {
        for i in 0..m {
            c[i] += dot(&a[i * k..(i + 1) * k], b);
        }
        return;
    }
    let mut j0 = 0;
    while j0 < n {
        let jw = MM_TILE.min(n - j0);
        let mut i = 0;
        while i + 4 <= m {
            let mut acc0 = [0.0f64; MM_TILE];
            let mut acc1 = [0.0f64; MM_TILE];
            let mut acc2 = [0.0f64; MM_TILE];
            let mut acc3 = [0.0f64; MM_TILE];
            for p in 0..k {
                let brow = &b[p * n + j0..p * n + j0 + jw];
                let a0 = a[i * k + p];
                let a1 = a[(i + 1) * k + p];
                let a2 = a[(i + 2) * k + p];
                let a3 = a[(i + 3) * k + p];
                for (j, &bv) in brow.iter().enumerate() {
                    acc0[j] += a0 * bv;
                    acc1[j] += a1 * bv;
                    acc2[j] += a2 * bv;
                    acc3[j] += a3 * bv;
                }
            }
            for (r, acc) in [&acc0, &acc1, &acc2, &acc3].into_iter().enumerate() {
                let crow = &mut c[(i + r) * n + j0..(i + r) * n + j0 + jw];
                for (cv, av) in crow.iter_mut().zip(acc.iter()) {
                    *cv += av;
                }
            }
            i += 4;
        }
        while i < m {
            let arow = &a[i * k..(i + 1) * k];
            let crow = &mut c[i * n + j0..i * n + j0 + jw];
            for (p, &av) in arow.iter().enumerate() {
                if av != 0.0 {
                    axpy(av, &b[p * n + j0..p * n + j0 + jw], crow);
                }
            }
            i += 1;
        }
        j0 += jw;
    }
}

/// `c[m×n] += a[m×k] · bᵀ` where `b` is `[n, k]` row-major; both operand
/// rows are contiguous, so every cell is one long dot product.
pub fn matmul_abt_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for j in 0..n {
        let brow = &b[j * k..(j + 1) * k];
        for i in 0..m {
            c[i * n + j] += dot(&a[i * k..(i + 1) * k], brow);
        }
    }
}

/// Valid-padding stride-1 2-d convolution over `[C_in, H, W]` input with
/// `[C_out, C_in, KH, KW]` weights.
fn conv2d_forward(
    input: &[f64],
    weight: &[f64],
    ci: usize,
    ih: usize,
    iw: usize,
    co: usize,
    kh: usize,
    kw: usize,
    out: &mut [f64],
) {
    let oh = ih - kh + 1;
    let ow = iw - kw + 1;
    for c_out in 0..co {
        let out_ch = &mut out[c_out * oh * ow..(c_out + 1) * oh * ow];
        for c_in in 0..ci {
            let in_ch = &input[c_in * ih * iw..(c_in + 1) * ih * iw];
            let w_base = (c_out * ci + c_in) * kh * kw;
            for dy in 0..kh {
                for dx in 0..kw {
                    let w = weight[w_base + dy * kw + dx];
                    if w == 0.0 {
                        continue;
                    }
                    for y in 0..oh {
                        let in_row = &in_ch[(y + dy) * iw + dx..(y + dy) * iw + dx + ow];
                        axpy(w, in_row, &mut out_ch[y * ow..(y + 1) * ow]);
                    }
                }
            }
        }
    }
}

/// Unroll a `[B, C_in, H, W]` batch into im2col layout: row `(c, dy, dx)`,
/// column `(b, y, x)`. One big matmul then evaluates the convolution for the
/// whole batch, which is where the shake-encoder throughput comes from.
fn im2col(
    input: &[f64],
    b: usize,
    ci: usize,
    ih: usize,
    iw: usize,
    kh: usize,
    kw: usize,
) -> Vec<f64> {
    let oh = ih - kh + 1;
    let ow = iw - kw + 1;
    let n = b * oh * ow;
    let mut cols = vec![0.0; ci * kh * kw * n];
    for bi in 0..b {
        for c in 0..ci {
            let in_ch = &input[(bi * ci + c) * ih * iw..(bi * ci + c + 1) * ih * iw];
            for dy in 0..kh {
                for dx in 0..kw {
                    let krow = (c * kh + dy) * kw + dx;
                    for y in 0..oh {
                        let src = &in_ch[(y + dy) * iw + dx..(y + dy) * iw + dx + ow];
                        let dst_off = krow * n + (bi * oh + y) * ow;
                        cols[dst_off..dst_off + ow].copy_from_slice(src);
                    }
                }
            }
        }
    }
    cols
}

fn conv2d_batched_forward(
    input: &[f64],
    weight: &[f64],
    b: usize,
    ci: usize,
    ih: usize,
    iw: usize,
    co: usize,
    kh: usize,
    kw: usize,
    out: &mut [f64],
) {
    let oh = ih - kh + 1;
    let ow = iw - kw + 1;
    let n = b * oh * ow;
    let kdim = ci * kh * kw;
    let cols = im2col(input, b, ci, ih, iw, kh, kw);
    let mut out_mat = vec![0.0; co * n];
    matmul_acc(weight, &cols, &mut out_mat, co, kdim, n);
    // Reorder [co, b·oh·ow] → [b, co, oh·ow].
    let plane = oh * ow;
    for bi in 0..b {
        for c_out in 0..co {
            let src = &out_mat[c_out * n + bi * plane..c_out * n + (bi + 1) * plane];
            let dst = (bi * co + c_out) * plane;
            out[dst..dst + plane].copy_from_slice(src);
        }
    }
}

fn conv2d_batched_backward(
    input: &[f64],
    weight: &[f64],
    gout: &[f64],
    b: usize,
    ci: usize,
    ih: usize,
    iw: usize,
    co: usize,
    kh: usize,
    kw: usize,
    ginput: Option<&mut [f64]>,
    gweight: Option<&mut [f64]>,
) {
    let oh = ih - kh + 1;
    let ow = iw - kw + 1;
    let n = b * oh * ow;
    let kdim = ci * kh * kw;
    let plane = oh * ow;
    // gout reordered to [co, b·oh·ow].
    let mut gout_mat = vec![0.0; co * n];
    for bi in 0..b {
        for c_out in 0..co {
            let src = &gout[(bi * co + c_out) * plane..(bi * co + c_out + 1) * plane];
            gout_mat[c_out * n + bi * plane..c_out * n + (bi + 1) * plane].copy_from_slice(src);
        }
    }
    if let Some(gw) = gweight {
        // gW = gout_mat · colsᵀ. Materializing the transposed cols keeps the
        // inner product cache-friendly; cols are rebuilt rather than saved to
        // keep per-sample tapes small.
        let cols = im2col(input, b, ci, ih, iw, kh, kw);
        let mut cols_t = vec![0.0; n * kdim];
        for k in 0..kdim {
            for j in 0..n {
                cols_t[j * kdim + k] = cols[k * n + j];
            }
        }
        matmul_acc(&gout_mat, &cols_t, gw, co, n, kdim);
    }
    if let Some(gin) = ginput {
        // g_cols = Wᵀ · gout_mat, then scatter-add back through the im2col map.
        let mut wt = vec![0.0; kdim * co];
        for c_out in 0..co {
            for k in 0..kdim {
                wt[k * co + c_out] = weight[c_out * kdim + k];
            }
        }
        let mut gcols = vec![0.0; kdim * n];
        matmul_acc(&wt, &gout_mat, &mut gcols, kdim, co, n);
        for bi in 0..b {
            for c in 0..ci {
                let gin_ch = &mut gin[(bi * ci + c) * ih * iw..(bi * ci + c + 1) * ih * iw];
                for dy in 0..kh {
                    for dx in 0..kw {
                        let krow = (c * kh + dy) * kw + dx;
                        for y in 0..oh {
                            let src_off = krow * n + (bi * oh + y) * ow;
                            let dst = &mut gin_ch[(y + dy) * iw + dx..(y + dy) * iw + dx + ow];
                            axpy(1.0, &gcols[src_off..src_off + ow], dst);
                        }
                    }
                }
            }
        }
    }
}

fn conv2d_backward(
    input: &[f64],
    weight: &[f64],
    gout: &[f64],
    ci: usize,
    ih: usize,
    iw: usize,
    co: usize,
    kh: usize,
    kw: usize,
    ginput: Option<&mut [f64]>,
    gweight: Option<&mut [f64]>,
) {
    let oh = ih - kh + 1;
    let ow = iw - kw + 1;
    if let Some(gw) = gweight {
        for c_out in 0..co {
            let g_ch = &gout[c_out * oh * ow..(c_out + 1) * oh * ow];
            for c_in in 0..ci {
                let in_ch = &input[c_in * ih * iw..(c_in + 1) * ih * iw];
                let w_base = (c_out * ci + c_in) * kh * kw;
                for dy in 0..kh {
                    for dx in 0..kw {
                        let mut acc = 0.0;
                        for y in 0..oh {
                            let in_row = &in_ch[(y + dy) * iw + dx..(y + dy) * iw + dx + ow];
                            acc += dot(&g_ch[y * ow..(y + 1) * ow], in_row);
                        }
                        gw[w_base + dy * kw + dx] += acc;
                    }
                }
            }
        }
    }
    if let Some(gin) = ginput {
        for c_out in 0..co {
            let g_ch = &gout[c_out * oh * ow..(c_out + 1) * oh * ow];
            for c_in in 0..ci {
                let gin_ch = &mut gin[c_in * ih * iw..(c_in + 1) * ih * iw];
                let w_base = (c_out * ci + c_in) * kh * kw;
                for dy in 0..kh {
                    for dx in 0..kw {
                        let w = weight[w_base + dy * kw + dx];
                        if w == 0.0 {
                            continue;
                        }
                        for y in 0..oh {
                            let grow = &g_ch[y * ow..(y + 1) * ow];
                            let gi_row =
                                &mut gin_ch[(y + dy) * iw + dx..(y + dy) * iw + dx + ow];
                            axpy(w, grow, gi_row);
                        }
                    }
                }
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient accumulated at `v` by previous [`Tape::backward`] calls.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        debug_check_finite(op_name(&op), value.data());
        self.nodes.push(Node {
            value,
            grad: None,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn leaf(&mut self, value: Tensor, needs_grad: bool) -> Var {
        self.push(value, Op::Leaf, needs_grad)
    }

    pub fn scalar_leaf(&mut self, x: f64) -> Var {
        self.leaf(Tensor::scalar(x), false)
    }

    pub fn vec_leaf(&mut self, data: &[f64]) -> Var {
        self.leaf(Tensor::vector(data.to_vec()), false)
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::shape(
                "add",
                format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor { shape, data }, Op::Add(a, b), needs))
    }

    /// Bias addition. Three broadcast rules, resolved in order:
    /// same-shape elementwise; a rank-1 bias over the leading axis
    /// (`[C,...] + [C]`, one value per chunk); or a rank-1 bias over axis 1
    /// of a rank-2/rank-4 tensor (`[B, C, ...] + [C]`, the batched layouts).
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let bs = self.value(bias).shape().to_vec();
        let mode = if xs == bs {
            BiasMode::Elementwise
        } else if bs.len() == 1 && xs.len() >= 2 && bs[0] == xs[0] {
            BiasMode::Leading
        } else if bs.len() == 1 && (xs.len() == 2 || xs.len() == 4) && bs[0] == xs[1] {
            BiasMode::Axis1
        } else {
            return Err(Error::shape("add_bias", format!("{xs:?} vs {bs:?}")));
        };
        let mut data = self.value(x).data().to_vec();
        let b = self.value(bias).data();
        match mode {
            BiasMode::Elementwise => {
                for (v, add) in data.iter_mut().zip(b) {
                    *v += add;
                }
            }
            BiasMode::Leading => {
                let per = data.len() / bs[0];
                for (ch, chunk) in data.chunks_mut(per).enumerate() {
                    for v in chunk {
                        *v += b[ch];
                    }
                }
            }
            BiasMode::Axis1 => {
                let per = data.len() / (xs[0] * bs[0]);
                for block in data.chunks_mut(per * bs[0]) {
                    for (ch, chunk) in block.chunks_mut(per).enumerate() {
                        for v in chunk {
                            *v += b[ch];
                        }
                    }
                }
            }
        }
        let needs = self.needs(x) || self.needs(bias);
        Ok(self.push(Tensor { shape: xs, data }, Op::AddBias { x, bias, mode }, needs))
    }

    /// Transpose of a rank-2 tensor.
    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let (m, n) = match xs.as_slice() {
            [m, n] => (*m, *n),
            _ => return Err(Error::shape("transpose", format!("{xs:?} is not rank 2"))),
        };
        let src = self.value(x).data();
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = src[i * n + j];
            }
        }
        let needs = self.needs(x);
        Ok(self.push(
            Tensor {
                shape: vec![n, m],
                data,
            },
            Op::Transpose(x),
            needs,
        ))
    }

    /// Matrix product: `[m,k] · [k,n] → [m,n]`, or `[m,k] · [k] → [m]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let ash = self.value(a).shape().to_vec();
        let bsh = self.value(b).shape().to_vec();
        let (m, k) = match ash.as_slice() {
            [m, k] => (*m, *k),
            _ => return Err(Error::shape("matmul", format!("lhs {ash:?} is not rank 2"))),
        };
        let (k2, n, out_shape) = match bsh.as_slice() {
            [k2, n] => (*k2, *n, vec![m, *n]),
            [k2] => (*k2, 1, vec![m]),
            _ => return Err(Error::shape("matmul", format!("rhs {bsh:?} rank unsupported"))),
        };
        if k != k2 {
            return Err(Error::shape("matmul", format!("{ash:?} vs {bsh:?}")));
        }
        let mut data = vec![0.0; m * n];
        matmul_acc(self.value(a).data(), self.value(b).data(), &mut data, m, k, n);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(
            Tensor {
                shape: out_shape,
                data,
            },
            Op::Matmul { a, b, m, k, n },
            needs,
        ))
    }

    /// Valid-padding, stride-1 convolution. A `[C_in,H,W]` input convolves
    /// with `[C_out,C_in,KH,KW]` weights into `[C_out,H',W']`; a rank-4
    /// `[B,C_in,H,W]` input applies the same kernel to every batch element
    /// through one im2col matmul.
    pub fn conv2d(&mut self, input: Var, weight: Var) -> Result<Var> {
        let ish = self.value(input).shape().to_vec();
        let wsh = self.value(weight).shape().to_vec();
        let (batch, ci, ih, iw) = match ish.as_slice() {
            [c, h, w] => (None, *c, *h, *w),
            [b, c, h, w] => (Some(*b), *c, *h, *w),
            _ => {
                return Err(Error::shape(
                    "conv2d",
                    format!("input {ish:?} is not rank 3 or 4"),
                ))
            }
        };
        let (co, ci2, kh, kw) = match wsh.as_slice() {
            [o, i, kh, kw] => (*o, *i, *kh, *kw),
            _ => return Err(Error::shape("conv2d", format!("weight {wsh:?} is not rank 4"))),
        };
        if ci != ci2 || kh > ih || kw > iw {
            return Err(Error::shape("conv2d", format!("input {ish:?} vs weight {wsh:?}")));
        }
        let (oh, ow) = (ih - kh + 1, iw - kw + 1);
        let needs = self.needs(input) || self.needs(weight);
        match batch {
            None => {
                let mut data = vec![0.0; co * oh * ow];
                conv2d_forward(
                    self.value(input).data(),
                    self.value(weight).data(),
                    ci,
                    ih,
                    iw,
                    co,
                    kh,
                    kw,
                    &mut data,
                );
                Ok(self.push(
                    Tensor {
                        shape: vec![co, oh, ow],
                        data,
                    },
                    Op::Conv2d { input, weight },
                    needs,
                ))
            }
            Some(b) => {
                let mut data = vec![0.0; b * co * oh * ow];
                conv2d_batched_forward(
                    self.value(input).data(),
                    self.value(weight).data(),
                    b,
                    ci,
                    ih,
                    iw,
                    co,
                    kh,
                    kw,
                    &mut data,
                );
                Ok(self.push(
                    Tensor {
                        shape: vec![b, co, oh, ow],
                        data,
                    },
                    Op::Conv2dBatched { input, weight },
                    needs,
                ))
            }
        }
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let data: Vec<f64> = self.value(x).data().iter().map(|&v| f(v)).collect();
        let shape = self.value(x).shape().to_vec();
        let needs = self.needs(x);
        self.push(Tensor { shape, data }, op, needs)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, f64::tanh, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    /// Numerically stable softmax over a rank-1 tensor.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        if self.value(x).shape().len() != 1 {
            return Err(Error::shape(
                "softmax",
                format!("{:?} is not rank 1", self.value(x).shape()),
            ));
        }
        let v = self.value(x).data();
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let data: Vec<f64> = exps.into_iter().map(|e| e / sum).collect();
        let needs = self.needs(x);
        Ok(self.push(Tensor::vector(data), Op::Softmax(x), needs))
    }

    /// Concatenate rank-1 tensors in order.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::shape("concat", "no inputs"));
        }
        let mut data = Vec::new();
        let mut needs = false;
        for &p in parts {
            if self.value(p).shape().len() != 1 {
                return Err(Error::shape(
                    "concat",
                    format!("{:?} is not rank 1", self.value(p).shape()),
                ));
            }
            data.extend_from_slice(self.value(p).data());
            needs |= self.needs(p);
        }
        Ok(self.push(Tensor::vector(data), Op::Concat(parts.to_vec()), needs))
    }

    /// Contiguous slice `[start, start+len)` of a rank-1 tensor.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let v = self.value(x);
        if v.shape().len() != 1 || start + len > v.numel() || len == 0 {
            return Err(Error::shape(
                "slice",
                format!("[{start}, {start}+{len}) of {:?}", v.shape()),
            ));
        }
        let data = v.data()[start..start + len].to_vec();
        let needs = self.needs(x);
        Ok(self.push(Tensor::vector(data), Op::Slice { x, start }, needs))
    }

    /// Reinterpret the row-major data under a new shape of equal size.
    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let numel: usize = shape.iter().product();
        if numel != self.value(x).numel() {
            return Err(Error::shape(
                "reshape",
                format!("{:?} -> {:?}", self.value(x).shape(), shape),
            ));
        }
        let data = self.value(x).data().to_vec();
        let needs = self.needs(x);
        Ok(self.push(Tensor { shape, data }, Op::Reshape(x), needs))
    }

    /// Mean over all elements, as a scalar.
    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let m = v.data().iter().sum::<f64>() / v.numel() as f64;
        let needs = self.needs(x);
        self.push(Tensor::scalar(m), Op::Mean(x), needs)
    }

    /// Mean squared error between two same-shape tensors, as a scalar.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        if self.value(pred).shape() != self.value(target).shape() {
            return Err(Error::shape(
                "mse_loss",
                format!(
                    "{:?} vs {:?}",
                    self.value(pred).shape(),
                    self.value(target).shape()
                ),
            ));
        }
        let n = self.value(pred).numel() as f64;
        let sum: f64 = self
            .value(pred)
            .data()
            .iter()
            .zip(self.value(target).data())
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        let needs = self.needs(pred) || self.needs(target);
        Ok(self.push(Tensor::scalar(sum / n), Op::MseLoss { pred, target }, needs))
    }

    /// Cross entropy of a rank-1 logit vector against a class index,
    /// fused with a stable log-softmax.
    pub fn cross_entropy_loss(&mut self, logits: Var, class: usize) -> Result<Var> {
        let v = self.value(logits);
        if v.shape().len() != 1 || class >= v.numel() {
            return Err(Error::shape(
                "cross_entropy",
                format!("class {class} for logits {:?}", v.shape()),
            ));
        }
        let data = v.data();
        let max = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = data.iter().map(|&x| (x - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let probs: Vec<f64> = exps.into_iter().map(|e| e / sum).collect();
        let loss = sum.ln() + max - data[class];
        let needs = self.needs(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                class,
                probs,
            },
            needs,
        ))
    }

    /// Classical LSTM cell. Inputs: `x [I]`, state `h [H]`, `c [H]`, weights
    /// `w_ih [4H, I]`, `w_hh [4H, H]`, bias `b [4H]` with gate rows ordered
    /// (input, forget, cell, output). Returns `[h'; c']` of length 2H; use
    /// [`Tape::slice`] to split the halves for the next step.
    pub fn lstm_cell(
        &mut self,
        x: Var,
        h: Var,
        c: Var,
        w_ih: Var,
        w_hh: Var,
        b: Var,
    ) -> Result<Var> {
        let isz = match self.value(x).shape() {
            [i] => *i,
            s => return Err(Error::shape("lstm_cell", format!("x {s:?} is not rank 1"))),
        };
        let hsz = match self.value(h).shape() {
            [h] => *h,
            s => return Err(Error::shape("lstm_cell", format!("h {s:?} is not rank 1"))),
        };
        let ok = self.value(c).shape() == [hsz]
            && self.value(w_ih).shape() == [4 * hsz, isz]
            && self.value(w_hh).shape() == [4 * hsz, hsz]
            && self.value(b).shape() == [4 * hsz];
        if !ok {
            return Err(Error::shape(
                "lstm_cell",
                format!(
                    "x [{isz}], h [{hsz}], c {:?}, w_ih {:?}, w_hh {:?}, b {:?}",
                    self.value(c).shape(),
                    self.value(w_ih).shape(),
                    self.value(w_hh).shape(),
                    self.value(b).shape()
                ),
            ));
        }

        let mut pre = self.value(b).data().to_vec();
        matmul_acc(self.value(w_ih).data(), self.value(x).data(), &mut pre, 4 * hsz, isz, 1);
        matmul_acc(self.value(w_hh).data(), self.value(h).data(), &mut pre, 4 * hsz, hsz, 1);

        let gi: Vec<f64> = pre[0..hsz].iter().map(|&v| sigmoid(v)).collect();
        let gf: Vec<f64> = pre[hsz..2 * hsz].iter().map(|&v| sigmoid(v)).collect();
        let gg: Vec<f64> = pre[2 * hsz..3 * hsz].iter().map(|&v| v.tanh()).collect();
        let go: Vec<f64> = pre[3 * hsz..4 * hsz].iter().map(|&v| sigmoid(v)).collect();

        let c_prev = self.value(c).data();
        let mut out = vec![0.0; 2 * hsz];
        let mut tanh_c_new = vec![0.0; hsz];
        for j in 0..hsz {
            let c_new = gf[j] * c_prev[j] + gi[j] * gg[j];
            let tc = c_new.tanh();
            out[j] = go[j] * tc;
            out[hsz + j] = c_new;
            tanh_c_new[j] = tc;
        }

        let needs = [x, h, c, w_ih, w_hh, b].iter().any(|&v| self.needs(v));
        Ok(self.push(
            Tensor::vector(out),
            Op::LstmCell {
                x,
                h,
                c,
                w_ih,
                w_hh,
                b,
                saved: Box::new(LstmSaved {
                    i: gi,
                    f: gf,
                    g: gg,
                    o: go,
                    tanh_c_new,
                }),
            },
            needs,
        ))
    }

    /// Reverse pass from a scalar loss. The sweep's gradients accumulate
    /// additively into every node that requires them; calling backward twice
    /// doubles them.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss {:?} is not scalar", self.nodes[loss.0].value.shape()),
            ));
        }
        if !self.nodes[loss.0].needs_grad {
            return Ok(());
        }
        let mut sweep: Vec<Option<Vec<f64>>> = (0..=loss.0).map(|_| None).collect();
        sweep[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let Some(gout) = sweep[idx].take() else {
                continue;
            };
            propagate(&self.nodes, idx, &gout, &mut sweep);
            debug_check_finite("backward", &gout);
            // Accumulated grads are only kept on leaves; intermediate
            // activations would double the memory traffic for nothing.
            let node = &mut self.nodes[idx];
            if matches!(node.op, Op::Leaf) {
                match &mut node.grad {
                    Some(acc) => axpy(1.0, &gout, acc),
                    slot => *slot = Some(gout),
                }
            }
        }
        Ok(())
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::Add(..) => "add",
        Op::AddBias { .. } => "add_bias",
        Op::Matmul { .. } => "matmul",
        Op::Conv2d { .. } => "conv2d",
        Op::Conv2dBatched { .. } => "conv2d_batched",
        Op::Transpose(_) => "transpose",
        Op::Relu(_) => "relu",
        Op::Tanh(_) => "tanh",
        Op::Sigmoid(_) => "sigmoid",
        Op::Softmax(_) => "softmax",
        Op::Concat(_) => "concat",
        Op::Slice { .. } => "slice",
        Op::Reshape(_) => "reshape",
        Op::Mean(_) => "mean",
        Op::MseLoss { .. } => "mse_loss",
        Op::CrossEntropy { .. } => "cross_entropy",
        Op::LstmCell { .. } => "lstm_cell",
    }
}

/// Zero-initialized sweep gradient for `v`, or `None` when `v` does not
/// require gradients.
fn sweep_slot<'a>(
    sweep: &'a mut [Option<Vec<f64>>],
    nodes: &[Node],
    v: Var,
) -> Option<&'a mut Vec<f64>> {
    if !nodes[v.0].needs_grad {
        return None;
    }
    let slot = &mut sweep[v.0];
    if slot.is_none() {
        *slot = Some(vec![0.0; nodes[v.0].value.numel()]);
    }
    slot.as_mut()
}

fn propagate(nodes: &[Node], idx: usize, gout: &[f64], sweep: &mut [Option<Vec<f64>>]) {
    let value = &nodes[idx].value;
    match &nodes[idx].op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            for v in [a, b] {
                if let Some(g) = sweep_slot(sweep, nodes, *v) {
                    axpy(1.0, gout, g);
                }
            }
        }
        Op::AddBias { x, bias, mode } => {
            if let Some(g) = sweep_slot(sweep, nodes, *x) {
                axpy(1.0, gout, g);
            }
            let blen = nodes[bias.0].value.numel();
            let lead = nodes[x.0].value.shape()[0];
            if let Some(g) = sweep_slot(sweep, nodes, *bias) {
                match mode {
                    BiasMode::Elementwise => axpy(1.0, gout, g),
                    BiasMode::Leading => {
                        let per = gout.len() / blen;
                        for (ch, chunk) in gout.chunks(per).enumerate() {
                            g[ch] += chunk.iter().sum::<f64>();
                        }
                    }
                    BiasMode::Axis1 => {
                        let per = gout.len() / (lead * blen);
                        for block in gout.chunks(per * blen) {
                            for (ch, chunk) in block.chunks(per).enumerate() {
                                g[ch] += chunk.iter().sum::<f64>();
                            }
                        }
                    }
                }
            }
        }
        Op::Matmul { a, b, m, k, n } => {
            let (m, k, n) = (*m, *k, *n);
            if nodes[a.0].needs_grad {
                // gA[i,p] = Σ_j gC[i,j] B[p,j]
                let bdata = nodes[b.0].value.data();
                let ga = sweep_slot(sweep, nodes, *a).unwrap();
                for i in 0..m {
                    let grow = &gout[i * n..(i + 1) * n];
                    for p in 0..k {
                        ga[i * k + p] += dot(grow, &bdata[p * n..(p + 1) * n]);
                    }
                }
            }
            if nodes[b.0].needs_grad {
                // gB[p,j] = Σ_i A[i,p] gC[i,j]
                let adata = nodes[a.0].value.data();
                let gb = sweep_slot(sweep, nodes, *b).unwrap();
                for i in 0..m {
                    let grow = &gout[i * n..(i + 1) * n];
                    for p in 0..k {
                        let av = adata[i * k + p];
                        if av != 0.0 {
                            axpy(av, grow, &mut gb[p * n..(p + 1) * n]);
                        }
                    }
                }
            }
        }
        Op::Conv2d { input, weight } => {
            let ish = nodes[input.0].value.shape();
            let wsh = nodes[weight.0].value.shape();
            let (ci, ih, iw) = (ish[0], ish[1], ish[2]);
            let (co, kh, kw) = (wsh[0], wsh[2], wsh[3]);
            let in_data = nodes[input.0].value.data();
            let w_data = nodes[weight.0].value.data();
            if nodes[weight.0].needs_grad {
                let gw = sweep_slot(sweep, nodes, *weight).unwrap();
                conv2d_backward(in_data, w_data, gout, ci, ih, iw, co, kh, kw, None, Some(gw));
            }
            if nodes[input.0].needs_grad {
                let gi = sweep_slot(sweep, nodes, *input).unwrap();
                conv2d_backward(in_data, w_data, gout, ci, ih, iw, co, kh, kw, Some(gi), None);
            }
        }
        Op::Conv2dBatched { input, weight } => {
            let ish = nodes[input.0].value.shape();
            let wsh = nodes[weight.0].value.shape();
            let (b, ci, ih, iw) = (ish[0], ish[1], ish[2], ish[3]);
            let (co, kh, kw) = (wsh[0], wsh[2], wsh[3]);
            let in_data = nodes[input.0].value.data();
            let w_data = nodes[weight.0].value.data();
            let mut gw = nodes[weight.0]
                .needs_grad
                .then(|| vec![0.0; nodes[weight.0].value.numel()]);
            let mut gi = nodes[input.0]
                .needs_grad
                .then(|| vec![0.0; nodes[input.0].value.numel()]);
            conv2d_batched_backward(
                in_data, w_data, gout, b, ci, ih, iw, co, kh, kw,
                gi.as_deref_mut(),
                gw.as_deref_mut(),
            );
            if let Some(gw) = gw {
                let slot = sweep_slot(sweep, nodes, *weight).unwrap();
                axpy(1.0, &gw, slot);
            }
            if let Some(gi) = gi {
                let slot = sweep_slot(sweep, nodes, *input).unwrap();
                axpy(1.0, &gi, slot);
            }
        }
        Op::Transpose(x) => {
            let (n, m) = {
                let s = value.shape();
                (s[0], s[1])
            };
            if let Some(g) = sweep_slot(sweep, nodes, *x) {
                for i in 0..n {
                    for j in 0..m {
                        g[j * n + i] += gout[i * m + j];
                    }
                }
            }
        }
        Op::Relu(x) => {
            let out = value.data();
            if let Some(g) = sweep_slot(sweep, nodes, *x) {
                for j in 0..g.len() {
                    if out[j] > 0.0 {
                        g[j] += gout[j];
                    }
                }
            }
        }
        Op::Tanh(x) => {
            let out = value.data();
            if let Some(g) = sweep_slot(sweep, nodes, *x) {
                for j in 0..g.len() {
                    g[j] += gout[j] * (1.0 - out[j] * out[j]);
                }
            }
        }
        Op::Sigmoid(x) => {
            let out = value.data();
            if let Some(g) = sweep_slot(sweep, nodes, *x) {
                for j in 0..g.len() {
                    g[j] += gout[j] * out[j] * (1.0 - out[j]);
                }
            }
        }
        Op::Softmax(x) => {
            let y = value.data();
            if let Some(g) = sweep_slot(sweep, nodes, *x) {
                let dot_gy: f64 = gout.iter().zip(y).map(|(a, b)| a * b).sum();
                for j in 0..g.len() {
                    g[j] += y[j] * (gout[j] - dot_gy);
                }
            }
        }
        Op::Concat(parts) => {
            let mut off = 0;
            for &p in parts {
                let len = nodes[p.0].value.numel();
                if let Some(g) = sweep_slot(sweep, nodes, p) {
                    axpy(1.0, &gout[off..off + len], g);
                }
                off += len;
            }
        }
        Op::Slice { x, start } => {
            if let Some(g) = sweep_slot(sweep, nodes, *x) {
                axpy(1.0, gout, &mut g[*start..*start + value.numel()]);
            }
        }
        Op::Reshape(x) => {
            if let Some(g) = sweep_slot(sweep, nodes, *x) {
                axpy(1.0, gout, g);
            }
        }
        Op::Mean(x) => {
            let n = nodes[x.0].value.numel() as f64;
            if let Some(g) = sweep_slot(sweep, nodes, *x) {
                let s = gout[0] / n;
                for v in g.iter_mut() {
                    *v += s;
                }
            }
        }
        Op::MseLoss { pred, target } => {
            let n = nodes[pred.0].value.numel() as f64;
            let scale = 2.0 * gout[0] / n;
            if nodes[pred.0].needs_grad {
                let diffs: Vec<f64> = nodes[pred.0]
                    .value
                    .data()
                    .iter()
                    .zip(nodes[target.0].value.data())
                    .map(|(p, t)| p - t)
                    .collect();
                let g = sweep_slot(sweep, nodes, *pred).unwrap();
                axpy(scale, &diffs, g);
            }
            if nodes[target.0].needs_grad {
                let diffs: Vec<f64> = nodes[pred.0]
                    .value
                    .data()
                    .iter()
                    .zip(nodes[target.0].value.data())
                    .map(|(p, t)| p - t)
                    .collect();
                let g = sweep_slot(sweep, nodes, *target).unwrap();
                axpy(-scale, &diffs, g);
            }
        }
        Op::CrossEntropy {
            logits,
            class,
            probs,
        } => {
            if let Some(g) = sweep_slot(sweep, nodes, *logits) {
                for j in 0..g.len() {
                    let indic = if j == *class { 1.0 } else { 0.0 };
                    g[j] += gout[0] * (probs[j] - indic);
                }
            }
        }
        Op::LstmCell {
            x,
            h,
            c,
            w_ih,
            w_hh,
            b,
            saved,
        } => {
            let hsz = saved.i.len();
            let gh = &gout[0..hsz];
            let gc_ext = &gout[hsz..2 * hsz];
            let c_prev = nodes[c.0].value.data();

            // Backward through h' = o ⊙ tanh(c'), c' = f ⊙ c + i ⊙ g.
            let mut gpre = vec![0.0; 4 * hsz];
            let mut gc_prev = vec![0.0; hsz];
            for j in 0..hsz {
                let tc = saved.tanh_c_new[j];
                let gc_total = gc_ext[j] + gh[j] * saved.o[j] * (1.0 - tc * tc);
                let (i, f, g, o) = (saved.i[j], saved.f[j], saved.g[j], saved.o[j]);
                gpre[j] = gc_total * g * i * (1.0 - i);
                gpre[hsz + j] = gc_total * c_prev[j] * f * (1.0 - f);
                gpre[2 * hsz + j] = gc_total * i * (1.0 - g * g);
                gpre[3 * hsz + j] = gh[j] * tc * o * (1.0 - o);
                gc_prev[j] = gc_total * f;
            }

            if let Some(g) = sweep_slot(sweep, nodes, *c) {
                axpy(1.0, &gc_prev, g);
            }
            if let Some(g) = sweep_slot(sweep, nodes, *b) {
                axpy(1.0, &gpre, g);
            }
            let isz = nodes[x.0].value.numel();
            if nodes[w_ih.0].needs_grad {
                let xv = nodes[x.0].value.data();
                let g = sweep_slot(sweep, nodes, *w_ih).unwrap();
                for r in 0..4 * hsz {
                    if gpre[r] != 0.0 {
                        axpy(gpre[r], xv, &mut g[r * isz..(r + 1) * isz]);
                    }
                }
            }
            if nodes[w_hh.0].needs_grad {
                let hv = nodes[h.0].value.data();
                let g = sweep_slot(sweep, nodes, *w_hh).unwrap();
                for r in 0..4 * hsz {
                    if gpre[r] != 0.0 {
                        axpy(gpre[r], hv, &mut g[r * hsz..(r + 1) * hsz]);
                    }
                }
            }
            if nodes[x.0].needs_grad {
                let w = nodes[w_ih.0].value.data();
                let g = sweep_slot(sweep, nodes, *x).unwrap();
                for r in 0..4 * hsz {
                    if gpre[r] != 0.0 {
                        axpy(gpre[r], &w[r * isz..(r + 1) * isz], g);
                    }
                }
            }
            if nodes[h.0].needs_grad {
                let w = nodes[w_hh.0].value.data();
                let g = sweep_slot(sweep, nodes, *h).unwrap();
                for r in 0..4 * hsz {
                    if gpre[r] != 0.0 {
                        axpy(gpre[r], &w[r * hsz..(r + 1) * hsz], g);
                    }
                }
            }
        }
    }
}
