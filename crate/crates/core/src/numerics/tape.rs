//! Reverse-mode differentiation over a flat operation record.
//!
//! Every op evaluates eagerly when recorded and keeps what its vector-Jacobian
//! product needs. Ops are coarse (a whole convolution, a whole dense layer) so a
//! model forward pass produces a few dozen nodes.

use std::collections::BTreeMap;

use super::fft::{self, FftPlan};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Identifier of a trainable tensor, assigned by the caller.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug)]
enum Op {
    Leaf(Option<ParamId>),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Gelu(Var),
    Sum(Var),
    Reshape(Var),
    ConcatCols(Var, Var),
    Conv1d {
        input: Var,
        weight: Var,
        bias: Var,
    },
    Dense {
        input: Var,
        weight: Var,
        bias: Var,
    },
    Chebyshev {
        input: Var,
        coeffs: Vec<Var>,
    },
    SpectralMask {
        input: Var,
        keep: Vec<bool>,
    },
    SumSquaredDiff {
        input: Var,
        target: Tensor,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients keyed by parameter. A parameter that was recorded but does not
/// influence the loss gets an explicit zero tensor; one that was never recorded
/// is absent.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    by_param: BTreeMap<ParamId, Tensor>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.by_param.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.by_param.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.by_param.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_param.is_empty()
    }
}

const GELU_A: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_B: f64 = 0.044_715;

/// tanh-form GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_A * (x + GELU_B * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let th = (GELU_A * (x + GELU_B * x * x * x)).tanh();
    0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * GELU_A * (1.0 + 3.0 * GELU_B * x * x)
}

/// First-kind Chebyshev values `T_0(x)..=T_order(x)` by the three-term recurrence.
pub fn chebyshev_basis(x: f64, order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(order + 1);
    out.push(1.0);
    if order >= 1 {
        out.push(x);
    }
    for m in 1..order {
        out.push(2.0 * x * out[m] - out[m - 1]);
    }
    out
}

/// Indices of the `r` largest-magnitude bins in each column of a `bins x C`
/// spectrum, as a row-major keep mask. Ties go to the lower bin index.
pub fn top_k_mask(re: &[f64], im: &[f64], bins: usize, cols: usize, r: usize) -> Vec<bool> {
    let mut keep = vec![false; bins * cols];
    let r = r.min(bins);
    let mut order: Vec<usize> = Vec::with_capacity(bins);
    let mut mag = vec![0.0; bins];
    for c in 0..cols {
        for w in 0..bins {
            let i = w * cols + c;
            mag[w] = re[i] * re[i] + im[i] * im[i];
        }
        order.clear();
        order.extend(0..bins);
        order.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]).then(a.cmp(&b)));
        for &w in &order[..r] {
            keep[w * cols + c] = true;
        }
    }
    keep
}

/// `irfft(mask * rfft(z))` column by column for a `T x C` matrix.
fn apply_spectral_mask(z: &Tensor, keep: &[bool]) -> Tensor {
    let (t, c) = (z.shape()[0], z.shape()[1]);
    let plan = FftPlan::new(t);
    let bins = fft::rfft_bins(t);
    let mut out = Tensor::zeros(&[t, c]);
    let mut re = vec![0.0; t];
    let mut im = vec![0.0; t];
    for col in 0..c {
        fft::rfft_column(&plan, z.data(), c, col, &mut re, &mut im);
        for w in 0..bins {
            if !keep[w * c + col] {
                re[w] = 0.0;
                im[w] = 0.0;
            }
        }
        fft::irfft_column(&plan, &mut re, &mut im);
        for (row, v) in re.iter().enumerate() {
            out.data_mut()[row * c + col] = *v;
        }
    }
    out
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
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

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Records a trainable tensor.
    pub fn param(&mut self, id: ParamId, value: Tensor) -> Var {
        self.push(value, Op::Leaf(Some(id)), true)
    }

    /// Records an input that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf(None), false)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add(a, b), needs))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Mul(a, b), needs))
    }

    pub fn scale(&mut self, a: Var, alpha: f64) -> Var {
        let value = self.value(a).map(|x| alpha * x);
        let needs = self.needs(a);
        self.push(value, Op::Scale(a, alpha), needs)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        let needs = self.needs(a);
        self.push(value, Op::Tanh(a), needs)
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(gelu);
        let needs = self.needs(a);
        self.push(value, Op::Gelu(a), needs)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        let needs = self.needs(a);
        self.push(value, Op::Sum(a), needs)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().reshape(shape)?;
        let needs = self.needs(a);
        Ok(self.push(value, Op::Reshape(a), needs))
    }

    /// Concatenates two row-aligned matrices `[R, A]` and `[R, B]` into `[R, A + B]`.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let (ra, ca, rb, cb) = match (va.shape(), vb.shape()) {
            ([ra, ca], [rb, cb]) => (*ra, *ca, *rb, *cb),
            (sa, sb) => {
                return Err(Error::Dimension(format!(
                    "concat needs two matrices, got {sa:?} and {sb:?}"
                )))
            }
        };
        if ra != rb {
            return Err(Error::Dimension(format!(
                "concat row mismatch: {ra} vs {rb}"
            )));
        }
        let mut data = Vec::with_capacity(ra * (ca + cb));
        for r in 0..ra {
            data.extend_from_slice(&va.data()[r * ca..(r + 1) * ca]);
            data.extend_from_slice(&vb.data()[r * cb..(r + 1) * cb]);
        }
        let value = Tensor::new(vec![ra, ca + cb], data)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::ConcatCols(a, b), needs))
    }

    /// Same-padded 1-D convolution along the middle axis of `[T, P, C_in]`
    /// with `weight: [C_out, C_in, K]` (odd `K`) and `bias: [C_out]`.
    pub fn conv1d(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let x = self.value(input);
        let w = self.value(weight);
        let b = self.value(bias);
        let (t, p, cin) = match x.shape() {
            [t, p, c] => (*t, *p, *c),
            s => return Err(Error::Dimension(format!("conv input must be 3-D, got {s:?}"))),
        };
        let (cout, wcin, ks) = match w.shape() {
            [o, i, k] => (*o, *i, *k),
            s => return Err(Error::Dimension(format!("conv weight must be 3-D, got {s:?}"))),
        };
        if wcin != cin || ks % 2 == 0 || b.shape() != [cout] {
            return Err(Error::Dimension(format!(
                "conv weight {:?} / bias {:?} incompatible with input {:?}",
                w.shape(),
                b.shape(),
                x.shape()
            )));
        }
        let pad = ks / 2;
        let (xd, bd) = (x.data(), b.data());
        let wk = taps_major(w.data(), cout, cin, ks);
        let mut y = vec![0.0; t * p * cout];
        for ti in 0..t {
            let xrow = &xd[ti * p * cin..(ti + 1) * p * cin];
            let yrow = &mut y[ti * p * cout..(ti + 1) * p * cout];
            for pi in 0..p {
                let out = &mut yrow[pi * cout..(pi + 1) * cout];
                out.copy_from_slice(bd);
                for k in 0..ks {
                    let src = pi + k;
                    if src < pad || src - pad >= p {
                        continue;
                    }
                    let xin = &xrow[(src - pad) * cin..(src - pad + 1) * cin];
                    let wtap = &wk[k * cout * cin..(k + 1) * cout * cin];
                    for (acc, wo) in out.iter_mut().zip(wtap.chunks_exact(cin)) {
                        *acc += dot(wo, xin);
                    }
                }
            }
        }
        let value = Tensor::new(vec![t, p, cout], y)?;
        let needs = self.needs(input) || self.needs(weight) || self.needs(bias);
        Ok(self.push(
            value,
            Op::Conv1d {
                input,
                weight,
                bias,
            },
            needs,
        ))
    }

    /// Row-wise affine map: `[N, in] -> [N, out]` with `weight: [out, in]`.
    /// A 1-D input is treated as a single row.
    pub fn dense(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let x = self.value(input);
        let w = self.value(weight);
        let b = self.value(bias);
        let (out_dim, in_dim) = match w.shape() {
            [o, i] => (*o, *i),
            s => return Err(Error::Dimension(format!("dense weight must be 2-D, got {s:?}"))),
        };
        let rows = match x.shape() {
            [n] if *n == in_dim => 1,
            [r, n] if *n == in_dim => *r,
            s => {
                return Err(Error::Dimension(format!(
                    "dense input {s:?} incompatible with weight {:?}",
                    w.shape()
                )))
            }
        };
        if b.shape() != [out_dim] {
            return Err(Error::Dimension(format!(
                "dense bias {:?} does not match output width {out_dim}",
                b.shape()
            )));
        }
        let (xd, wd, bd) = (x.data(), w.data(), b.data());
        let mut y = Vec::with_capacity(rows * out_dim);
        for r in 0..rows {
            let xr = &xd[r * in_dim..(r + 1) * in_dim];
            for o in 0..out_dim {
                let wr = &wd[o * in_dim..(o + 1) * in_dim];
                y.push(bd[o] + dot(wr, xr));
            }
        }
        let shape = if x.shape().len() == 1 {
            vec![out_dim]
        } else {
            vec![rows, out_dim]
        };
        let value = Tensor::new(shape, y)?;
        let needs = self.needs(input) || self.needs(weight) || self.needs(bias);
        Ok(self.push(
            value,
            Op::Dense {
                input,
                weight,
                bias,
            },
            needs,
        ))
    }

    /// Element-wise `sum_m coeffs[m] * T_m(input)`; `input` is expected in `[-1, 1]`.
    pub fn chebyshev(&mut self, input: Var, coeffs: &[Var]) -> Result<Var> {
        if coeffs.is_empty() {
            return Err(Error::Config("Chebyshev map needs at least T_0".into()));
        }
        let x = self.value(input);
        for &c in coeffs {
            self.value(c).expect_shape(x.shape())?;
        }
        let order = coeffs.len() - 1;
        let mut y = Tensor::zeros(x.shape());
        for (i, xv) in x.data().iter().enumerate() {
            let basis = chebyshev_basis(*xv, order);
            y.data_mut()[i] = basis
                .iter()
                .zip(coeffs)
                .map(|(tm, &c)| self.nodes[c.0].value.data()[i] * tm)
                .sum();
        }
        let needs = self.needs(input) || coeffs.iter().any(|&c| self.needs(c));
        Ok(self.push(
            y,
            Op::Chebyshev {
                input,
                coeffs: coeffs.to_vec(),
            },
            needs,
        ))
    }

    /// Keeps, per column of a `T x C` matrix, the `r` strongest rFFT bins and
    /// transforms back. The mask is fixed at record time.
    pub fn spectral_top_k(&mut self, input: Var, r: usize) -> Result<Var> {
        let z = self.value(input);
        let spec = fft::rfft_t(z)?;
        let (bins, cols) = (spec.shape()[0], spec.shape()[1]);
        if r == 0 || r > bins {
            return Err(Error::Config(format!(
                "kept-bin count {r} outside [1, {bins}]"
            )));
        }
        let keep = top_k_mask(spec.re.data(), spec.im.data(), bins, cols, r);
        let value = apply_spectral_mask(z, &keep);
        let needs = self.needs(input);
        Ok(self.push(value, Op::SpectralMask { input, keep }, needs))
    }

    /// `sum (input - target)^2` as a scalar.
    pub fn sum_squared_diff(&mut self, input: Var, target: Tensor) -> Result<Var> {
        let x = self.value(input);
        x.expect_shape(target.shape())?;
        let s = x
            .data()
            .iter()
            .zip(target.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let needs = self.needs(input);
        Ok(self.push(Tensor::scalar(s), Op::SumSquaredDiff { input, target }, needs))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Gradient(format!(
                "loss must be scalar, found shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf(_)) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(&node.op, &node.value, g, &mut grads);
        }

        let mut by_param = BTreeMap::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf(Some(id)) = node.op {
                let g = grads[idx]
                    .take()
                    .unwrap_or_else(|| Tensor::zeros(node.value.shape()));
                match by_param.get_mut(&id) {
                    Some(acc) => Tensor::axpy(acc, 1.0, &g),
                    None => {
                        by_param.insert(id, g);
                    }
                }
            }
        }
        Ok(Gradients { by_param })
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: Tensor, grads: &mut [Option<Tensor>]) {
        match op {
            Op::Leaf(_) => {}
            Op::Add(a, b) => {
                if self.needs(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if self.needs(*b) {
                    accumulate(grads, *b, g);
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    accumulate(grads, *a, hadamard(&g, vb));
                }
                if self.needs(*b) {
                    accumulate(grads, *b, hadamard(&g, va));
                }
            }
            Op::Scale(a, alpha) => accumulate(grads, *a, g.map(|v| alpha * v)),
            Op::Tanh(a) => {
                let d = g.zip_map(out, |gv, y| gv * (1.0 - y * y)).expect("shape");
                accumulate(grads, *a, d);
            }
            Op::Gelu(a) => {
                let d = g
                    .zip_map(self.value(*a), |gv, x| gv * gelu_grad(x))
                    .expect("shape");
                accumulate(grads, *a, d);
            }
            Op::Sum(a) => {
                let gv = g.data()[0];
                accumulate(grads, *a, Tensor::full(self.value(*a).shape(), gv));
            }
            Op::Reshape(a) => {
                let shape = self.value(*a).shape().to_vec();
                accumulate(grads, *a, g.reshape(&shape).expect("reshape"));
            }
            Op::ConcatCols(a, b) => {
                let (ca, cb) = (self.value(*a).shape()[1], self.value(*b).shape()[1]);
                let rows = out.shape()[0];
                let mut ga = Vec::with_capacity(rows * ca);
                let mut gb = Vec::with_capacity(rows * cb);
                for r in 0..rows {
                    let row = &g.data()[r * (ca + cb)..(r + 1) * (ca + cb)];
                    ga.extend_from_slice(&row[..ca]);
                    gb.extend_from_slice(&row[ca..]);
                }
                if self.needs(*a) {
                    accumulate(grads, *a, Tensor::new(vec![rows, ca], ga).expect("shape"));
                }
                if self.needs(*b) {
                    accumulate(grads, *b, Tensor::new(vec![rows, cb], gb).expect("shape"));
                }
            }
            Op::Conv1d {
                input,
                weight,
                bias,
            } => self.conv1d_backward(*input, *weight, *bias, &g, grads),
            Op::Dense {
                input,
                weight,
                bias,
            } => self.dense_backward(*input, *weight, *bias, &g, grads),
            Op::Chebyshev { input, coeffs } => {
                let x = self.value(*input);
                let order = coeffs.len() - 1;
                let mut gc: Vec<Tensor> = coeffs
                    .iter()
                    .map(|_| Tensor::zeros(x.shape()))
                    .collect();
                let mut gx = Tensor::zeros(x.shape());
                let mut deriv = vec![0.0; order + 1];
                for (i, &xv) in x.data().iter().enumerate() {
                    let basis = chebyshev_basis(xv, order);
                    chebyshev_derivatives(xv, &basis, &mut deriv);
                    let gi = g.data()[i];
                    let mut dx = 0.0;
                    for m in 0..=order {
                        gc[m].data_mut()[i] = gi * basis[m];
                        dx += self.value(coeffs[m]).data()[i] * deriv[m];
                    }
                    gx.data_mut()[i] = gi * dx;
                }
                for (c, gm) in coeffs.iter().zip(gc) {
                    if self.needs(*c) {
                        accumulate(grads, *c, gm);
                    }
                }
                if self.needs(*input) {
                    accumulate(grads, *input, gx);
                }
            }
            Op::SpectralMask { input, keep } => {
                // The masked projection is real-symmetric, so its VJP is itself.
                accumulate(grads, *input, apply_spectral_mask(&g, keep));
            }
            Op::SumSquaredDiff { input, target } => {
                let gv = g.data()[0];
                let d = self
                    .value(*input)
                    .zip_map(target, |x, t| 2.0 * gv * (x - t))
                    .expect("shape");
                accumulate(grads, *input, d);
            }
        }
    }

    fn conv1d_backward(
        &self,
        input: Var,
        weight: Var,
        bias: Var,
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) {
        let x = self.value(input);
        let w = self.value(weight);
        let (t, p, cin) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let (cout, ks) = (w.shape()[0], w.shape()[2]);
        let pad = ks / 2;
        let (xd, gd) = (x.data(), g.data());
        let wk = taps_major(w.data(), cout, cin, ks);
        let want_x = self.needs(input);
        let mut gx = vec![0.0; if want_x { xd.len() } else { 0 }];
        let mut gwk = vec![0.0; wk.len()];
        let mut gb = vec![0.0; cout];
        for ti in 0..t {
            for pi in 0..p {
                let go = &gd[(ti * p + pi) * cout..(ti * p + pi + 1) * cout];
                for (o, gv) in go.iter().enumerate() {
                    gb[o] += gv;
                }
                for k in 0..ks {
                    let src = pi + k;
                    if src < pad || src - pad >= p {
                        continue;
                    }
                    let xoff = (ti * p + src - pad) * cin;
                    let xin = &xd[xoff..xoff + cin];
                    let tap = k * cout * cin;
                    for (o, &gv) in go.iter().enumerate() {
                        if gv == 0.0 {
                            continue;
                        }
                        let row = tap + o * cin;
                        for (gw, xv) in gwk[row..row + cin].iter_mut().zip(xin) {
                            *gw += gv * xv;
                        }
                        if want_x {
                            for (gxv, wv) in gx[xoff..xoff + cin].iter_mut().zip(&wk[row..row + cin]) {
                                *gxv += gv * wv;
                            }
                        }
                    }
                }
            }
        }
        let mut gw = vec![0.0; gwk.len()];
        for k in 0..ks {
            for o in 0..cout {
                for i in 0..cin {
                    gw[(o * cin + i) * ks + k] = gwk[(k * cout + o) * cin + i];
                }
            }
        }
        if want_x {
            accumulate(grads, input, Tensor::new(x.shape().to_vec(), gx).expect("shape"));
        }
        if self.needs(weight) {
            accumulate(grads, weight, Tensor::new(w.shape().to_vec(), gw).expect("shape"));
        }
        if self.needs(bias) {
            accumulate(grads, bias, Tensor::new(vec![cout], gb).expect("shape"));
        }
    }

    fn dense_backward(
        &self,
        input: Var,
        weight: Var,
        bias: Var,
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) {
        let x = self.value(input);
        let w = self.value(weight);
        let (out_dim, in_dim) = (w.shape()[0], w.shape()[1]);
        let rows = x.len() / in_dim;
        let (xd, wd, gd) = (x.data(), w.data(), g.data());
        let want_x = self.needs(input);
        let mut gx = vec![0.0; if want_x { xd.len() } else { 0 }];
        let mut gw = vec![0.0; wd.len()];
        let mut gb = vec![0.0; out_dim];
        for r in 0..rows {
            let xr = &xd[r * in_dim..(r + 1) * in_dim];
            for o in 0..out_dim {
                let gv = gd[r * out_dim + o];
                gb[o] += gv;
                if gv == 0.0 {
                    continue;
                }
                let gwr = &mut gw[o * in_dim..(o + 1) * in_dim];
                for (a, xv) in gwr.iter_mut().zip(xr) {
                    *a += gv * xv;
                }
                if want_x {
                    let wr = &wd[o * in_dim..(o + 1) * in_dim];
                    let gxr = &mut gx[r * in_dim..(r + 1) * in_dim];
                    for (a, wv) in gxr.iter_mut().zip(wr) {
                        *a += gv * wv;
                    }
                }
            }
        }
        if want_x {
            accumulate(grads, input, Tensor::new(x.shape().to_vec(), gx).expect("shape"));
        }
        if self.needs(weight) {
            accumulate(grads, weight, Tensor::new(w.shape().to_vec(), gw).expect("shape"));
        }
        if self.needs(bias) {
            accumulate(grads, bias, Tensor::new(vec![out_dim], gb).expect("shape"));
        }
    }
}

/// `T'_m(x)` from the basis values via `T'_{m+1} = 2 T_m + 2x T'_m - T'_{m-1}`.
fn chebyshev_derivatives(x: f64, basis: &[f64], out: &mut [f64]) {
    out[0] = 0.0;
    if out.len() > 1 {
        out[1] = 1.0;
    }
    for m in 1..out.len().saturating_sub(1) {
        out[m + 1] = 2.0 * basis[m] + 2.0 * x * out[m] - out[m - 1];
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let mut acc = [0.0; 4];
    let (ac, bc) = (a[..n].chunks_exact(4), b[..n].chunks_exact(4));
    let tail: f64 = ac.remainder().iter().zip(bc.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ac.zip(bc) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn hadamard(a: &Tensor, b: &Tensor) -> Tensor {
    a.zip_map(b, |x, y| x * y).expect("shape")
}

/// Repacks a `[out, in, k]` kernel as `[k, out, in]`.
fn taps_major(w: &[f64], cout: usize, cin: usize, ks: usize) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    for o in 0..cout {
        for i in 0..cin {
            for k in 0..ks {
                out[(k * cout + o) * cin + i] = w[(o * cin + i) * ks + k];
            }
        }
    }
    out
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, delta: Tensor) {
    match &mut grads[v.0] {
        Some(g) => g.axpy(1.0, &delta),
        slot @ None => *slot = Some(delta),
    }
}
