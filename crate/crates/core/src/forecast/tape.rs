//! Reverse-mode automatic differentiation over dense row-major matrices.
//!
//! Only the operations the transformer needs are provided. Each forward pass
//! records onto a fresh [`Tape`]; `backward` returns the gradient of a scalar
//! node with respect to every parameter leaf.

use super::studentt::nll_gradient_unchecked;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn filled(rows: usize, cols: usize, v: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn add_assign(&mut self, other: &Matrix<T>) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// A · B
pub fn matmul<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    assert_eq!(a.cols, b.rows, "matmul shape");
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik == T::zero() {
                continue;
            }
            for (o, &bkj) in orow.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    }
    out
}

/// A · Bᵀ
pub fn matmul_bt<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    assert_eq!(a.cols, b.cols, "matmul_bt shape");
    let mut out = Matrix::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let ar = a.row(i);
        for j in 0..b.rows {
            out.data[i * b.rows + j] = ar.iter().zip(b.row(j)).map(|(&x, &y)| x * y).sum();
        }
    }
    out
}

/// Aᵀ · B
pub fn matmul_at<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    assert_eq!(a.rows, b.rows, "matmul_at shape");
    let mut out = Matrix::zeros(a.cols, b.cols);
    for k in 0..a.rows {
        let br = b.row(k);
        for (i, &aki) in a.row(k).iter().enumerate() {
            if aki == T::zero() {
                continue;
            }
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, &bkj) in orow.iter_mut().zip(br) {
                *o += aki * bkj;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// How the raw head output maps onto Student-t parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadSpec<T> {
    pub targets: usize,
    pub sigma_floor: T,
    pub nu_floor: T,
}

enum Op<T> {
    Leaf,
    Param(usize),
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, T),
    Gelu(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<T>,
        rstd: Vec<T>,
    },
    Softmax(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    Dropout(Var, Vec<T>),
    StudentNll {
        raw: Var,
        targets: Matrix<T>,
        head: HeadSpec<T>,
    },
}

struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
}

pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.044715;

#[inline]
fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// (μ, σ, ν) from raw head outputs.
#[inline]
pub fn head_transform<T: Scalar>(mu: T, sigma_raw: T, nu_raw: T, head: &HeadSpec<T>) -> (T, T, T) {
    (
        mu,
        head.sigma_floor + softplus(sigma_raw),
        T::c(2.0) + head.nu_floor + softplus(nu_raw),
    )
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    pub fn constant(&mut self, m: Matrix<T>) -> Var {
        self.push(m, Op::Leaf)
    }

    /// A trainable leaf; `index` identifies it in the parameter store.
    pub fn param(&mut self, index: usize, m: &Matrix<T>) -> Var {
        self.push(m.clone(), Op::Param(index))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = matmul(self.value(a), self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let v = matmul_bt(self.value(a), self.value(b));
        self.push(v, Op::MatMulBt(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    /// Adds a 1×c row to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let b = self.value(bias);
        assert_eq!((b.rows, b.cols), (1, self.value(a).cols), "add_row shape");
        let bias_row = b.data.clone();
        let mut v = self.value(a).clone();
        for row in v.data.chunks_mut(bias_row.len()) {
            for (x, &y) in row.iter_mut().zip(&bias_row) {
                *x += y;
            }
        }
        self.push(v, Op::AddRow(a, bias))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let mut v = self.value(a).clone();
        v.data.iter_mut().for_each(|x| *x *= s);
        self.push(v, Op::Scale(a, s))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let k = (T::c(2.0) / T::PI()).sqrt();
        let c = T::c(GELU_C);
        let half = T::c(0.5);
        let mut v = self.value(a).clone();
        v.data
            .iter_mut()
            .for_each(|x| *x = half * *x * (T::one() + (k * (*x + c * *x * *x * *x)).tanh()));
        self.push(v, Op::Gelu(a))
    }

    /// Row-wise layer normalization with learned gain and bias (1×c each).
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let xv = self.value(x);
        let (rows, cols) = (xv.rows, xv.cols);
        let g = self.value(gamma).data.clone();
        let b = self.value(beta).data.clone();
        let n = T::from_count(cols);
        let mut xhat = Vec::with_capacity(rows * cols);
        let mut rstd = Vec::with_capacity(rows);
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let rs = T::one() / (var + T::c(LAYER_NORM_EPS)).sqrt();
            rstd.push(rs);
            for (c, &v) in row.iter().enumerate() {
                let h = (v - mean) * rs;
                xhat.push(h);
                out.data[r * cols + c] = h * g[c] + b[c];
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            },
        )
    }

    /// Row-wise softmax. `mask[r][c] == true` blocks that entry (weight 0).
    pub fn softmax(&mut self, a: Var, mask: Option<&[Vec<bool>]>) -> Var {
        let mut v = self.value(a).clone();
        let cols = v.cols;
        for (r, row) in v.data.chunks_mut(cols).enumerate() {
            let blocked = |c: usize| mask.is_some_and(|m| m[r][c]);
            let mut max = T::neg_infinity();
            for (c, &x) in row.iter().enumerate() {
                if !blocked(c) && x > max {
                    max = x;
                }
            }
            let mut total = T::zero();
            for (c, x) in row.iter_mut().enumerate() {
                *x = if blocked(c) { T::zero() } else { (*x - max).exp() };
                total += *x;
            }
            row.iter_mut().for_each(|x| *x /= total);
        }
        self.push(v, Op::Softmax(a))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let av = self.value(a);
        let mut v = Matrix::zeros(av.rows, len);
        for r in 0..av.rows {
            v.data[r * len..(r + 1) * len].copy_from_slice(&av.row(r)[start..start + len]);
        }
        self.push(v, Op::SliceCols(a, start))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut v = Matrix::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let pv = self.value(p);
            assert_eq!(pv.rows, rows, "concat_cols rows");
            for r in 0..rows {
                v.data[r * cols + off..r * cols + off + pv.cols].copy_from_slice(pv.row(r));
            }
            off += pv.cols;
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    /// Multiplies by a precomputed mask (already scaled by 1/(1−p)).
    pub fn dropout(&mut self, a: Var, mask: Vec<T>) -> Var {
        let mut v = self.value(a).clone();
        assert_eq!(mask.len(), v.data.len(), "dropout mask length");
        for (x, &m) in v.data.iter_mut().zip(&mask) {
            *x *= m;
        }
        self.push(v, Op::Dropout(a, mask))
    }

    /// Mean Student-t NLL of `targets` (steps × T) under the head output
    /// `raw` (steps × 3T: μ | σ pre-activation | ν pre-activation).
    pub fn student_nll(&mut self, raw: Var, targets: Matrix<T>, head: HeadSpec<T>) -> Var {
        let rv = self.value(raw);
        let t = head.targets;
        assert_eq!((rv.rows, rv.cols), (targets.rows, 3 * t), "head shape");
        assert_eq!(targets.cols, t, "target shape");
        let mut total = T::zero();
        for s in 0..rv.rows {
            let row = rv.row(s);
            for j in 0..t {
                let (mu, sigma, nu) = head_transform(row[j], row[t + j], row[2 * t + j], &head);
                total += super::studentt::nll_unchecked(targets.get(s, j), mu, sigma, nu);
            }
        }
        let mean = total / T::from_count(rv.rows * t);
        self.push(
            Matrix::from_vec(1, 1, vec![mean]),
            Op::StudentNll { raw, targets, head },
        )
    }

    /// Gradients of the 1×1 node `loss` with respect to each parameter leaf,
    /// indexed by parameter index. Parameters not on the tape get `None`.
    pub fn backward(&self, loss: Var, n_params: usize) -> Vec<Option<Matrix<T>>> {
        let mut grads: Vec<Option<Matrix<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::filled(1, 1, T::one()));
        let mut out: Vec<Option<Matrix<T>>> = (0..n_params).map(|_| None).collect();

        fn accumulate<T: Scalar>(grads: &mut [Option<Matrix<T>>], v: Var, g: Matrix<T>) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Param(p) => match &mut out[*p] {
                    Some(existing) => existing.add_assign(&g),
                    slot => *slot = Some(g),
                },
                Op::MatMul(a, b) => {
                    let da = matmul_bt(&g, self.value(*b));
                    let db = matmul_at(self.value(*a), &g);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::MatMulBt(a, b) => {
                    let da = matmul(&g, self.value(*b));
                    let db = matmul_at(&g, self.value(*a));
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::AddRow(a, bias) => {
                    let mut db = Matrix::zeros(1, g.cols);
                    for row in g.data.chunks(g.cols) {
                        for (d, &x) in db.data.iter_mut().zip(row) {
                            *d += x;
                        }
                    }
                    accumulate(&mut grads, *bias, db);
                    accumulate(&mut grads, *a, g);
                }
                Op::Scale(a, s) => {
                    let mut d = g;
                    d.data.iter_mut().for_each(|x| *x *= *s);
                    accumulate(&mut grads, *a, d);
                }
                Op::Gelu(a) => {
                    let k = (T::c(2.0) / T::PI()).sqrt();
                    let c = T::c(GELU_C);
                    let half = T::c(0.5);
                    let mut d = g;
                    for (dx, &x) in d.data.iter_mut().zip(&self.value(*a).data) {
                        let th = (k * (x + c * x * x * x)).tanh();
                        let deriv = half * (T::one() + th)
                            + half * x * (T::one() - th * th) * k * (T::one() + T::c(3.0) * c * x * x);
                        *dx *= deriv;
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    rstd,
                } => {
                    let cols = g.cols;
                    let n = T::from_count(cols);
                    let gv = &self.value(*gamma).data;
                    let mut dgamma = Matrix::zeros(1, cols);
                    let mut dbeta = Matrix::zeros(1, cols);
                    let mut dx = Matrix::zeros(g.rows, cols);
                    let mut dxhat = vec![T::zero(); cols];
                    for r in 0..g.rows {
                        let grow = g.row(r);
                        let hrow = &xhat[r * cols..(r + 1) * cols];
                        let mut sum_d = T::zero();
                        let mut sum_dh = T::zero();
                        for c in 0..cols {
                            dgamma.data[c] += grow[c] * hrow[c];
                            dbeta.data[c] += grow[c];
                            dxhat[c] = grow[c] * gv[c];
                            sum_d += dxhat[c];
                            sum_dh += dxhat[c] * hrow[c];
                        }
                        let scale = rstd[r] / n;
                        for c in 0..cols {
                            dx.data[r * cols + c] = scale * (n * dxhat[c] - sum_d - hrow[c] * sum_dh);
                        }
                    }
                    accumulate(&mut grads, *gamma, dgamma);
                    accumulate(&mut grads, *beta, dbeta);
                    accumulate(&mut grads, *x, dx);
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let mut d = g;
                    let cols = d.cols;
                    for (drow, yrow) in d.data.chunks_mut(cols).zip(y.data.chunks(cols)) {
                        let dot: T = drow.iter().zip(yrow).map(|(&a, &b)| a * b).sum();
                        for (dv, &yv) in drow.iter_mut().zip(yrow) {
                            *dv = yv * (*dv - dot);
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::SliceCols(a, start) => {
                    let av = self.value(*a);
                    let mut d = Matrix::zeros(av.rows, av.cols);
                    for r in 0..g.rows {
                        d.data[r * av.cols + start..r * av.cols + start + g.cols].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let pc = self.value(p).cols;
                        let mut d = Matrix::zeros(g.rows, pc);
                        for r in 0..g.rows {
                            d.data[r * pc..(r + 1) * pc].copy_from_slice(&g.row(r)[off..off + pc]);
                        }
                        off += pc;
                        accumulate(&mut grads, p, d);
                    }
                }
                Op::Dropout(a, mask) => {
                    let mut d = g;
                    for (x, &m) in d.data.iter_mut().zip(mask) {
                        *x *= m;
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::StudentNll { raw, targets, head } => {
                    let rv = self.value(*raw);
                    let t = head.targets;
                    let upstream = g.data[0] / T::from_count(rv.rows * t);
                    let mut d = Matrix::zeros(rv.rows, rv.cols);
                    for s in 0..rv.rows {
                        let row = rv.row(s);
                        for j in 0..t {
                            let (mu, sigma, nu) = head_transform(row[j], row[t + j], row[2 * t + j], head);
                            let gr = nll_gradient_unchecked(targets.get(s, j), mu, sigma, nu);
                            let base = s * rv.cols;
                            d.data[base + j] = upstream * gr.mu;
                            d.data[base + t + j] = upstream * gr.sigma * sigmoid(row[t + j]);
                            d.data[base + 2 * t + j] = upstream * gr.nu * sigmoid(row[2 * t + j]);
                        }
                    }
                    accumulate(&mut grads, *raw, d);
                }
            }
        }
        out
    }
}
