//! Reverse-mode tape over a fixed operator set.
//!
//! Each primitive validates shapes on the forward pass and records what its
//! backward pass needs. [`Tape::backward`] walks the nodes in reverse and
//! returns the gradient of a scalar output with respect to every parameter
//! that was read through [`Tape::param`].

use crate::error::{Error, Result};

use super::{Gradients, ParamId, ParamStore, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddBias(Var, Var),
    OuterAdd(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Concat(Vec<Var>),
    Slice(Var, usize),
    StackRows(Vec<Var>),
    ConcatRows(Var, Var),
    Row(Var, usize),
    Sigmoid(Var),
    Tanh(Var),
    Log(Var),
    Softmax(Var, Option<Vec<bool>>),
    Sum(Var),
    Mean(Var),
    Pick(Var, usize),
    ScatterAdd(Var, Vec<Option<usize>>),
    Mix(Var, Var, Var),
    BceWithLogits(Var, Vec<f64>),
}

#[derive(Debug)]
struct Node {
    value: Option<Tensor>,
    op: Op,
}

pub struct Tape<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl<'p> Tape<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::with_capacity(512),
            param_vars: vec![None; store.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.store.value(*id),
            _ => unreachable!("only parameter nodes borrow their value"),
        }
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).data()[0]
    }

    fn push(&mut self, value: Tensor, op: Op) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("{} output", op_name(&op))));
        }
        self.nodes.push(Node { value: Some(value), op });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn input(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op: Op::Input,
        });
        Var(self.nodes.len() - 1)
    }

    /// Reads a parameter; repeated reads return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    /// `[m,k]·[k,n] → [m,n]`, `[m,k]·[k] → [m]` or `[k]·[k,n] → [n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let out = match (av.shape(), bv.shape()) {
            (&[m, k], &[k2, n]) if k == k2 => {
                let mut out = vec![0.0; m * n];
                let (ad, bd) = (av.data(), bv.data());
                for i in 0..m {
                    let orow = &mut out[i * n..(i + 1) * n];
                    for p in 0..k {
                        let x = ad[i * k + p];
                        if x == 0.0 {
                            continue;
                        }
                        let brow = &bd[p * n..(p + 1) * n];
                        for (o, y) in orow.iter_mut().zip(brow) {
                            *o += x * y;
                        }
                    }
                }
                Tensor::matrix(m, n, out)?
            }
            (&[m, k], &[k2]) if k == k2 => {
                let (ad, bd) = (av.data(), bv.data());
                let out = (0..m)
                    .map(|i| ad[i * k..(i + 1) * k].iter().zip(bd).map(|(x, y)| x * y).sum())
                    .collect();
                Tensor::vector(out)
            }
            (&[k], &[k2, n]) if k == k2 => {
                let (ad, bd) = (av.data(), bv.data());
                let mut out = vec![0.0; n];
                for p in 0..k {
                    let x = ad[p];
                    for (o, y) in out.iter_mut().zip(&bd[p * n..(p + 1) * n]) {
                        *o += x * y;
                    }
                }
                Tensor::vector(out)
            }
            (sa, sb) => return Err(Error::shape("matmul", format!("{sa:?} x {sb:?}"))),
        };
        self.push(out, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let &[m, n] = av.shape() else {
            return Err(Error::shape("transpose", format!("{:?}", av.shape())));
        };
        let d = av.data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = d[i * n + j];
            }
        }
        let t = Tensor::matrix(n, m, out)?;
        self.push(t, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if !av.same_shape(bv) {
            return Err(Error::shape("add", format!("{:?} + {:?}", av.shape(), bv.shape())));
        }
        let mut out = av.clone();
        out.add_assign(bv);
        self.push(out, Op::Add(a, b))
    }

    /// Adds `bias` to every row of `x`; a one-element bias is added everywhere.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        let mut out = xv.clone();
        if bv.len() == 1 {
            let b = bv.data()[0];
            out.data_mut().iter_mut().for_each(|v| *v += b);
        } else if bv.rank() == 1 && xv.cols() == bv.len() {
            let c = xv.cols();
            for (i, v) in out.data_mut().iter_mut().enumerate() {
                *v += bv.data()[i % c];
            }
        } else {
            return Err(Error::shape("add_bias", format!("{:?} + {:?}", xv.shape(), bv.shape())));
        }
        self.push(out, Op::AddBias(x, bias))
    }

    /// `out[i][j] = a[i] + b[j]`.
    pub fn outer_add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rank() != 1 || bv.rank() != 1 {
            return Err(Error::shape("outer_add", format!("{:?}, {:?}", av.shape(), bv.shape())));
        }
        let (m, n) = (av.len(), bv.len());
        let mut out = Vec::with_capacity(m * n);
        for &x in av.data() {
            out.extend(bv.data().iter().map(|y| x + y));
        }
        let t = Tensor::matrix(m, n, out)?;
        self.push(t, Op::OuterAdd(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if !av.same_shape(bv) {
            return Err(Error::shape("mul", format!("{:?} * {:?}", av.shape(), bv.shape())));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let t = Tensor::new(av.shape().to_vec(), data)?;
        self.push(t, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let av = self.value(a);
        let data = av.data().iter().map(|x| c * x).collect();
        let t = Tensor::new(av.shape().to_vec(), data)?;
        self.push(t, Op::Scale(a, c))
    }

    /// Concatenates vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::shape("concat", "no inputs"));
        }
        let mut out = Vec::new();
        for &p in parts {
            let pv = self.value(p);
            if pv.rank() != 1 {
                return Err(Error::shape(
                    "concat",
                    format!("input {:?} is not a vector", pv.shape()),
                ));
            }
            out.extend_from_slice(pv.data());
        }
        self.push(Tensor::vector(out), Op::Concat(parts.to_vec()))
    }

    /// `a[start..start + len]` of a vector.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let av = self.value(a);
        if av.rank() != 1 || start + len > av.len() || len == 0 {
            return Err(Error::shape(
                "slice",
                format!("[{start}..{}] of {:?}", start + len, av.shape()),
            ));
        }
        let t = Tensor::vector(av.data()[start..start + len].to_vec());
        self.push(t, Op::Slice(a, start))
    }

    /// Stacks equal-length vectors into the rows of a matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var> {
        let Some(&first) = rows.first() else {
            return Err(Error::shape("stack_rows", "no inputs"));
        };
        let n = self.value(first).len();
        let mut out = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            let rv = self.value(r);
            if rv.rank() != 1 || rv.len() != n {
                return Err(Error::shape(
                    "stack_rows",
                    format!("row {:?}, expected [{n}]", rv.shape()),
                ));
            }
            out.extend_from_slice(rv.data());
        }
        let t = Tensor::matrix(rows.len(), n, out)?;
        self.push(t, Op::StackRows(rows.to_vec()))
    }

    /// Vertical concatenation of two matrices.
    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.cols() {
            return Err(Error::shape(
                "concat_rows",
                format!("{:?}, {:?}", av.shape(), bv.shape()),
            ));
        }
        let mut t = av.clone();
        t.append_rows(bv)?;
        self.push(t, Op::ConcatRows(a, b))
    }

    /// Row `i` of a matrix as a vector (embedding lookup).
    pub fn row(&mut self, a: Var, i: usize) -> Result<Var> {
        let av = self.value(a);
        if av.rank() != 2 || i >= av.rows() {
            return Err(Error::shape("row", format!("row {i} of {:?}", av.shape())));
        }
        let t = Tensor::vector(av.row(i).to_vec());
        self.push(t, Op::Row(a, i))
    }

    pub fn embedding_lookup(&mut self, table: Var, ids: &[usize]) -> Result<Vec<Var>> {
        ids.iter().map(|&i| self.row(table, i)).collect()
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let av = self.value(a);
        let data = av.data().iter().map(|&x| f(x)).collect();
        let t = Tensor::new(av.shape().to_vec(), data)?;
        self.push(t, op)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        if self.value(a).data().iter().any(|&x| x <= 0.0) {
            return Err(Error::NonFinite("log of a non-positive value".into()));
        }
        self.map(a, f64::ln, Op::Log(a))
    }

    /// Softmax over a vector, or over each row of a matrix.
    ///
    /// Masked positions (`false`) get exactly zero probability; every row
    /// needs at least one unmasked position.
    pub fn softmax(&mut self, a: Var, mask: Option<&[bool]>) -> Result<Var> {
        let av = self.value(a);
        if av.rank() > 2 {
            return Err(Error::shape("softmax", format!("{:?}", av.shape())));
        }
        if let Some(m) = mask {
            if m.len() != av.len() {
                return Err(Error::shape(
                    "softmax",
                    format!("mask of {} for {:?}", m.len(), av.shape()),
                ));
            }
        }
        let (rows, cols) = (av.rows(), av.cols());
        let mut out = vec![0.0; av.len()];
        for r in 0..rows {
            let x = &av.data()[r * cols..(r + 1) * cols];
            let live = |j: usize| mask.is_none_or(|m| m[r * cols + j]);
            let max = (0..cols)
                .filter(|&j| live(j))
                .map(|j| x[j])
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(Error::AllMasked { op: "softmax", row: r });
            }
            let o = &mut out[r * cols..(r + 1) * cols];
            let mut total = 0.0;
            for j in 0..cols {
                if live(j) {
                    o[j] = (x[j] - max).exp();
                    total += o[j];
                }
            }
            o.iter_mut().for_each(|v| *v /= total);
        }
        let t = Tensor::new(av.shape().to_vec(), out)?;
        self.push(t, Op::Softmax(a, mask.map(<[bool]>::to_vec)))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let s = av.data().iter().sum::<f64>() / av.len() as f64;
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    /// Element `i` of a vector as a one-element tensor.
    pub fn pick(&mut self, a: Var, i: usize) -> Result<Var> {
        let av = self.value(a);
        if av.rank() != 1 || i >= av.len() {
            return Err(Error::shape("pick", format!("index {i} of {:?}", av.shape())));
        }
        let t = Tensor::scalar(av.data()[i]);
        self.push(t, Op::Pick(a, i))
    }

    /// `out[targets[i]] += a[i]` into a vector of length `size`;
    /// `None` targets are dropped.
    pub fn scatter_add(&mut self, a: Var, targets: &[Option<usize>], size: usize) -> Result<Var> {
        let av = self.value(a);
        if av.rank() != 1 || targets.len() != av.len() || targets.iter().flatten().any(|&t| t >= size) {
            return Err(Error::shape(
                "scatter_add",
                format!("{:?} into [{size}] with {} targets", av.shape(), targets.len()),
            ));
        }
        let mut out = vec![0.0; size];
        for (x, t) in av.data().iter().zip(targets) {
            if let Some(t) = t {
                out[*t] += x;
            }
        }
        self.push(Tensor::vector(out), Op::ScatterAdd(a, targets.to_vec()))
    }

    /// `g·a + (1 − g)·b` for a one-element gate `g`.
    pub fn mix(&mut self, g: Var, a: Var, b: Var) -> Result<Var> {
        let (gv, av, bv) = (self.value(g), self.value(a), self.value(b));
        if gv.len() != 1 || !av.same_shape(bv) {
            return Err(Error::shape(
                "mix",
                format!("gate {:?}, {:?} vs {:?}", gv.shape(), av.shape(), bv.shape()),
            ));
        }
        let gs = gv.data()[0];
        let data = av
            .data()
            .iter()
            .zip(bv.data())
            .map(|(x, y)| gs * x + (1.0 - gs) * y)
            .collect();
        let t = Tensor::new(av.shape().to_vec(), data)?;
        self.push(t, Op::Mix(g, a, b))
    }

    /// Mean binary cross-entropy of logits against 0/1 targets.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[f64]) -> Result<Var> {
        let zv = self.value(logits);
        if zv.rank() != 1 || zv.len() != targets.len() || targets.is_empty() {
            return Err(Error::shape(
                "bce_with_logits",
                format!("{:?} vs {} targets", zv.shape(), targets.len()),
            ));
        }
        let n = targets.len() as f64;
        let loss = zv
            .data()
            .iter()
            .zip(targets)
            .map(|(&z, &y)| softplus(z) - y * z)
            .sum::<f64>()
            / n;
        self.push(Tensor::scalar(loss), Op::BceWithLogits(logits, targets.to_vec()))
    }

    /// Gradients of the scalar `output` with respect to every parameter read
    /// on this tape.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = self.value(output);
        if out.len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("output {:?} is not scalar", out.shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = Vec::new();
        grads.resize_with(output.0 + 1, || None);
        grads[output.0] = Some(Tensor::scalar(1.0));
        let mut result = Gradients::empty(self.store.len());

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = node.value.as_ref();
            match &node.op {
                Op::Input => {}
                Op::Param(id) => result.set(*id, g),
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (ga, gb) = matmul_backward(av, bv, &g);
                    accum(&mut grads, *a, ga);
                    accum(&mut grads, *b, gb);
                }
                Op::Transpose(a) => {
                    let (n, m) = (g.rows(), g.cols());
                    let mut out = vec![0.0; n * m];
                    for i in 0..n {
                        for j in 0..m {
                            out[j * n + i] = g.data()[i * m + j];
                        }
                    }
                    accum(&mut grads, *a, Tensor::matrix(m, n, out)?);
                }
                Op::Add(a, b) => {
                    accum(&mut grads, *a, g.clone());
                    accum(&mut grads, *b, g);
                }
                Op::AddBias(x, b) => {
                    let blen = self.value(*b).len();
                    let mut gb = vec![0.0; blen];
                    for (i, v) in g.data().iter().enumerate() {
                        gb[i % blen] += v;
                    }
                    let shape = self.value(*b).shape().to_vec();
                    accum(&mut grads, *b, Tensor::new(shape, gb)?);
                    accum(&mut grads, *x, g);
                }
                Op::OuterAdd(a, b) => {
                    let (m, n) = (g.rows(), g.cols());
                    let mut ga = vec![0.0; m];
                    let mut gb = vec![0.0; n];
                    for i in 0..m {
                        for j in 0..n {
                            let v = g.data()[i * n + j];
                            ga[i] += v;
                            gb[j] += v;
                        }
                    }
                    accum(&mut grads, *a, Tensor::vector(ga));
                    accum(&mut grads, *b, Tensor::vector(gb));
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let ga = zip_map(&g, bv, |x, y| x * y)?;
                    let gb = zip_map(&g, av, |x, y| x * y)?;
                    accum(&mut grads, *a, ga);
                    accum(&mut grads, *b, gb);
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    let mut ga = g;
                    ga.data_mut().iter_mut().for_each(|v| *v *= c);
                    accum(&mut grads, *a, ga);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = self.value(*p).len();
                        accum(&mut grads, *p, Tensor::vector(g.data()[offset..offset + n].to_vec()));
                        offset += n;
                    }
                }
                Op::Slice(a, start) => {
                    let mut ga = Tensor::zeros(self.value(*a).shape());
                    ga.data_mut()[*start..*start + g.len()].copy_from_slice(g.data());
                    accum(&mut grads, *a, ga);
                }
                Op::StackRows(rows) => {
                    for (i, r) in rows.iter().enumerate() {
                        accum(&mut grads, *r, Tensor::vector(g.row(i).to_vec()));
                    }
                }
                Op::ConcatRows(a, b) => {
                    let (ar, c) = (self.value(*a).rows(), g.cols());
                    let (top, bottom) = g.data().split_at(ar * c);
                    accum(&mut grads, *a, Tensor::matrix(ar, c, top.to_vec())?);
                    accum(&mut grads, *b, Tensor::matrix(g.rows() - ar, c, bottom.to_vec())?);
                }
                Op::Row(a, i) => {
                    let src = self.value(*a);
                    let slot = a.0;
                    if grads[slot].is_none() {
                        grads[slot] = Some(Tensor::zeros(src.shape()));
                    }
                    let acc = grads[slot].as_mut().expect("just initialised");
                    for (d, v) in acc.row_mut(*i).iter_mut().zip(g.data()) {
                        *d += v;
                    }
                }
                Op::Sigmoid(a) => {
                    let y = y.expect("owned");
                    accum(&mut grads, *a, zip_map(&g, y, |d, s| d * s * (1.0 - s))?);
                }
                Op::Tanh(a) => {
                    let y = y.expect("owned");
                    accum(&mut grads, *a, zip_map(&g, y, |d, t| d * (1.0 - t * t))?);
                }
                Op::Log(a) => {
                    accum(&mut grads, *a, zip_map(&g, self.value(*a), |d, x| d / x)?);
                }
                Op::Softmax(a, mask) => {
                    let y = y.expect("owned");
                    let cols = y.cols();
                    let mut ga = vec![0.0; y.len()];
                    for r in 0..y.rows() {
                        let ys = &y.data()[r * cols..(r + 1) * cols];
                        let gs = &g.data()[r * cols..(r + 1) * cols];
                        let dot: f64 = ys.iter().zip(gs).map(|(p, d)| p * d).sum();
                        for j in 0..cols {
                            let live = mask.as_ref().is_none_or(|m| m[r * cols + j]);
                            if live {
                                ga[r * cols + j] = ys[j] * (gs[j] - dot);
                            }
                        }
                    }
                    accum(&mut grads, *a, Tensor::new(y.shape().to_vec(), ga)?);
                }
                Op::Sum(a) => {
                    let shape = self.value(*a).shape();
                    accum(&mut grads, *a, Tensor::filled(shape, g.data()[0]));
                }
                Op::Mean(a) => {
                    let av = self.value(*a);
                    accum(
                        &mut grads,
                        *a,
                        Tensor::filled(av.shape(), g.data()[0] / av.len() as f64),
                    );
                }
                Op::Pick(a, i) => {
                    let mut ga = Tensor::zeros(self.value(*a).shape());
                    ga.data_mut()[*i] = g.data()[0];
                    accum(&mut grads, *a, ga);
                }
                Op::ScatterAdd(a, targets) => {
                    let ga = targets.iter().map(|t| t.map_or(0.0, |t| g.data()[t])).collect();
                    accum(&mut grads, *a, Tensor::vector(ga));
                }
                Op::Mix(gate, a, b) => {
                    let gs = self.value(*gate).data()[0];
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let dg: f64 = g
                        .data()
                        .iter()
                        .zip(av.data().iter().zip(bv.data()))
                        .map(|(d, (x, y))| d * (x - y))
                        .sum();
                    let mut ga = g.clone();
                    ga.data_mut().iter_mut().for_each(|v| *v *= gs);
                    let mut gb = g;
                    gb.data_mut().iter_mut().for_each(|v| *v *= 1.0 - gs);
                    accum(&mut grads, *gate, Tensor::scalar(dg));
                    accum(&mut grads, *a, ga);
                    accum(&mut grads, *b, gb);
                }
                Op::BceWithLogits(z, targets) => {
                    let zv = self.value(*z);
                    let n = targets.len() as f64;
                    let d = g.data()[0];
                    let gz = zv
                        .data()
                        .iter()
                        .zip(targets)
                        .map(|(&z, &t)| d * (sigmoid(z) - t) / n)
                        .collect();
                    accum(&mut grads, *z, Tensor::vector(gz));
                }
            }
        }
        Ok(result)
    }
}

fn accum(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data)
}

fn matmul_backward(a: &Tensor, b: &Tensor, g: &Tensor) -> (Tensor, Tensor) {
    match (a.shape(), b.shape()) {
        (&[m, k], &[_, n]) => {
            let (ad, bd, gd) = (a.data(), b.data(), g.data());
            // dA = G·Bᵀ
            let mut ga = vec![0.0; m * k];
            for i in 0..m {
                let grow = &gd[i * n..(i + 1) * n];
                for p in 0..k {
                    ga[i * k + p] = grow.iter().zip(&bd[p * n..(p + 1) * n]).map(|(x, y)| x * y).sum();
                }
            }
            // dB = Aᵀ·G
            let mut gb = vec![0.0; k * n];
            for i in 0..m {
                let grow = &gd[i * n..(i + 1) * n];
                for p in 0..k {
                    let x = ad[i * k + p];
                    if x == 0.0 {
                        continue;
                    }
                    for (o, y) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                        *o += x * y;
                    }
                }
            }
            (
                Tensor::new(vec![m, k], ga).expect("shape"),
                Tensor::new(vec![k, n], gb).expect("shape"),
            )
        }
        (&[m, k], &[_]) => {
            let (ad, bd, gd) = (a.data(), b.data(), g.data());
            let mut ga = vec![0.0; m * k];
            let mut gb = vec![0.0; k];
            for i in 0..m {
                let gi = gd[i];
                for p in 0..k {
                    ga[i * k + p] = gi * bd[p];
                    gb[p] += ad[i * k + p] * gi;
                }
            }
            (Tensor::new(vec![m, k], ga).expect("shape"), Tensor::vector(gb))
        }
        (&[k], &[_, n]) => {
            let (ad, bd, gd) = (a.data(), b.data(), g.data());
            let mut ga = vec![0.0; k];
            let mut gb = vec![0.0; k * n];
            for p in 0..k {
                let brow = &bd[p * n..(p + 1) * n];
                ga[p] = brow.iter().zip(gd).map(|(x, y)| x * y).sum();
                for (o, y) in gb[p * n..(p + 1) * n].iter_mut().zip(gd) {
                    *o = ad[p] * y;
                }
            }
            (Tensor::vector(ga), Tensor::new(vec![k, n], gb).expect("shape"))
        }
        _ => unreachable!("shapes validated on the forward pass"),
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Input => "input",
        Op::Param(_) => "param",
        Op::MatMul(..) => "matmul",
        Op::Transpose(_) => "transpose",
        Op::Add(..) => "add",
        Op::AddBias(..) => "add_bias",
        Op::OuterAdd(..) => "outer_add",
        Op::Mul(..) => "mul",
        Op::Scale(..) => "scale",
        Op::Concat(_) => "concat",
        Op::Slice(..) => "slice",
        Op::StackRows(_) => "stack_rows",
        Op::ConcatRows(..) => "concat_rows",
        Op::Row(..) => "row",
        Op::Sigmoid(_) => "sigmoid",
        Op::Tanh(_) => "tanh",
        Op::Log(_) => "log",
        Op::Softmax(..) => "softmax",
        Op::Sum(_) => "sum",
        Op::Mean(_) => "mean",
        Op::Pick(..) => "pick",
        Op::ScatterAdd(..) => "scatter_add",
        Op::Mix(..) => "mix",
        Op::BceWithLogits(..) => "bce_with_logits",
    }
}
