use super::{AutodiffError, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    ScaleBy(Var, Var),
    Affine(Var, f64),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    Reshape(Var),
    Tanh(Var),
    Sigmoid(Var),
    Log(Var),
    Softmax(Var),
    Min(Var, Var),
    Clamp(Var, f64, f64),
    Sum(Var),
    Mean(Var),
    Gather(Var, Vec<usize>),
    ScatterAdd(Var, Vec<usize>),
    PadCols(Var),
    Index(Var, usize),
    Elementwise(Var, fn(f64) -> f64),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    /// True when some `requires_grad` leaf is reachable through the inputs.
    needs_grad: bool,
    grad: Option<Tensor>,
}

/// Append-only record of tensor operations supporting one reverse sweep.
///
/// Nodes are stored in creation order; every op's inputs already exist when
/// it is recorded, so insertion order is a topological order.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn mm(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `g (m x n) * b^T` where `b` is `k x n`.
fn mm_bt(g: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * k];
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            out[i * k + p] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// `a^T * g` where `a` is `m x k` and `g` is `m x n`.
fn mm_at(a: &[f64], g: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * n];
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &gv) in orow.iter_mut().zip(grow) {
                *o += av * gv;
            }
        }
    }
    out
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds a leaf. Gradients are retained for leaves with `requires_grad`.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
            needs_grad: requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` loss with respect to a `requires_grad` leaf.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes.get(v.0).and_then(|n| n.grad.as_ref())
    }

    fn check(&self, v: Var) -> Result<&Tensor, AutodiffError> {
        self.nodes
            .get(v.0)
            .map(|n| &n.value)
            .ok_or(AutodiffError::UnknownVar(v.0))
    }

    fn push(&mut self, op: &'static str, value: Tensor, kind: Op, inputs: &[Var]) -> Result<Var, AutodiffError> {
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite { op });
        }
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value,
            op: kind,
            requires_grad: false,
            needs_grad,
            grad: None,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn mat_rank(op: &'static str, t: &Tensor) -> Result<(), AutodiffError> {
        if t.rank() > 2 {
            return Err(AutodiffError::InvalidArgument {
                op,
                detail: format!("rank {} tensors are not supported", t.rank()),
            });
        }
        Ok(())
    }

    /// Matrix product of an `m x k` and a `k x n` operand.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (ta, tb) = (self.check(a)?, self.check(b)?);
        Self::mat_rank("matmul", ta)?;
        Self::mat_rank("matmul", tb)?;
        let (m, k, k2, n) = (ta.rows(), ta.cols(), tb.rows(), tb.cols());
        if k != k2 {
            return Err(AutodiffError::ShapeMismatch {
                op: "matmul",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let out = Tensor::from_parts(vec![m, n], mm(ta.data(), tb.data(), m, k, n));
        self.push("matmul", out, Op::MatMul(a, b), &[a, b])
    }

    /// Checks that `b` matches `a` exactly or is a single row broadcast over `a`'s rows.
    fn broadcast_ok(&self, op: &'static str, a: Var, b: Var) -> Result<bool, AutodiffError> {
        let (ta, tb) = (self.check(a)?, self.check(b)?);
        Self::mat_rank(op, ta)?;
        Self::mat_rank(op, tb)?;
        if ta.shape() == tb.shape() {
            return Ok(false);
        }
        if tb.rows() == 1 && tb.cols() == ta.cols() {
            return Ok(true);
        }
        Err(AutodiffError::ShapeMismatch {
            op,
            lhs: ta.shape().to_vec(),
            rhs: tb.shape().to_vec(),
        })
    }

    fn zip_broadcast(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let cols = ta.cols();
        let bd = tb.data();
        let data = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, if bd.len() == ta.numel() { bd[i] } else { bd[i % cols] }))
            .collect();
        Tensor::from_parts(ta.shape().to_vec(), data)
    }

    /// Elementwise sum; `b` may be a row broadcast over the rows of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.broadcast_ok("add", a, b)?;
        let out = self.zip_broadcast(a, b, |x, y| x + y);
        self.push("add", out, Op::Add(a, b), &[a, b])
    }

    /// Elementwise product; `b` may be a row broadcast over the rows of `a`.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.broadcast_ok("mul", a, b)?;
        let out = self.zip_broadcast(a, b, |x, y| x * y);
        self.push("mul", out, Op::Mul(a, b), &[a, b])
    }

    /// Multiplies every entry of `x` by the one-element tensor `s`.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Result<Var, AutodiffError> {
        let (tx, ts) = (self.check(x)?, self.check(s)?);
        if ts.numel() != 1 {
            return Err(AutodiffError::ShapeMismatch {
                op: "scale_by",
                lhs: tx.shape().to_vec(),
                rhs: ts.shape().to_vec(),
            });
        }
        let k = ts.item();
        let out = Tensor::from_parts(tx.shape().to_vec(), tx.data().iter().map(|v| v * k).collect());
        self.push("scale_by", out, Op::ScaleBy(x, s), &[x, s])
    }

    /// `scale * x + shift` with constant coefficients.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Result<Var, AutodiffError> {
        let tx = self.check(x)?;
        let out = Tensor::from_parts(
            tx.shape().to_vec(),
            tx.data().iter().map(|v| scale * v + shift).collect(),
        );
        self.push("affine", out, Op::Affine(x, scale), &[x])
    }

    /// Concatenation along the column axis of operands with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        if parts.is_empty() {
            return Err(AutodiffError::InvalidArgument {
                op: "concat_cols",
                detail: "no operands".into(),
            });
        }
        let rows = self.check(parts[0])?.rows();
        let mut total = 0;
        for &p in parts {
            let t = self.check(p)?;
            Self::mat_rank("concat_cols", t)?;
            if t.rows() != rows {
                return Err(AutodiffError::ShapeMismatch {
                    op: "concat_cols",
                    lhs: self.nodes[parts[0].0].value.shape().to_vec(),
                    rhs: t.shape().to_vec(),
                });
            }
            total += t.cols();
        }
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.nodes[p.0].value.row_slice(r));
            }
        }
        let out = Tensor::from_parts(vec![rows, total], data);
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()), parts)
    }

    /// Stacks operands with equal column counts.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        if parts.is_empty() {
            return Err(AutodiffError::InvalidArgument {
                op: "concat_rows",
                detail: "no operands".into(),
            });
        }
        let cols = self.check(parts[0])?.cols();
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let t = self.check(p)?;
            Self::mat_rank("concat_rows", t)?;
            if t.cols() != cols {
                return Err(AutodiffError::ShapeMismatch {
                    op: "concat_rows",
                    lhs: self.nodes[parts[0].0].value.shape().to_vec(),
                    rhs: t.shape().to_vec(),
                });
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let out = Tensor::from_parts(vec![rows, cols], data);
        self.push("concat_rows", out, Op::ConcatRows(parts.to_vec()), parts)
    }

    /// Columns `start..end` of every row.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var, AutodiffError> {
        let tx = self.check(x)?;
        Self::mat_rank("slice_cols", tx)?;
        if start >= end || end > tx.cols() {
            return Err(AutodiffError::InvalidArgument {
                op: "slice_cols",
                detail: format!("range {start}..{end} outside {:?}", tx.shape()),
            });
        }
        let data = (0..tx.rows())
            .flat_map(|r| tx.row_slice(r)[start..end].iter().copied())
            .collect();
        let out = Tensor::from_parts(vec![tx.rows(), end - start], data);
        self.push("slice_cols", out, Op::SliceCols(x, start), &[x])
    }

    /// Rows `start..end`.
    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var, AutodiffError> {
        let tx = self.check(x)?;
        Self::mat_rank("slice_rows", tx)?;
        if start >= end || end > tx.rows() {
            return Err(AutodiffError::InvalidArgument {
                op: "slice_rows",
                detail: format!("range {start}..{end} outside {:?}", tx.shape()),
            });
        }
        let c = tx.cols();
        let out = Tensor::from_parts(vec![end - start, c], tx.data()[start * c..end * c].to_vec());
        self.push("slice_rows", out, Op::SliceRows(x, start), &[x])
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, AutodiffError> {
        let tx = self.check(x)?;
        if shape.iter().product::<usize>() != tx.numel() || shape.contains(&0) {
            return Err(AutodiffError::ShapeMismatch {
                op: "reshape",
                lhs: tx.shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        let out = Tensor::from_parts(shape.to_vec(), tx.data().to_vec());
        self.push("reshape", out, Op::Reshape(x), &[x])
    }

    fn map(&mut self, op: &'static str, x: Var, kind: Op, f: impl Fn(f64) -> f64) -> Result<Var, AutodiffError> {
        let tx = self.check(x)?;
        let out = Tensor::from_parts(tx.shape().to_vec(), tx.data().iter().map(|&v| f(v)).collect());
        self.push(op, out, kind, &[x])
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var, AutodiffError> {
        self.map("tanh", x, Op::Tanh(x), f64::tanh)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var, AutodiffError> {
        self.map("sigmoid", x, Op::Sigmoid(x), |v| {
            if v >= 0.0 {
                1.0 / (1.0 + (-v).exp())
            } else {
                let e = v.exp();
                e / (1.0 + e)
            }
        })
    }

    /// Natural log; nonpositive inputs produce a non-finite error.
    pub fn log(&mut self, x: Var) -> Result<Var, AutodiffError> {
        self.map("log", x, Op::Log(x), f64::ln)
    }

    /// Applies `f` elementwise with the caller-supplied derivative `df`.
    pub fn elementwise(&mut self, x: Var, f: fn(f64) -> f64, df: fn(f64) -> f64) -> Result<Var, AutodiffError> {
        self.map("elementwise", x, Op::Elementwise(x, df), f)
    }

    /// Row-wise softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var, AutodiffError> {
        let cols = self.check(x)?.cols();
        self.softmax_impl(x, &vec![true; cols])
    }

    /// Row-wise softmax where columns with `mask[j] == false` get probability 0.
    pub fn masked_softmax(&mut self, x: Var, mask: &[bool]) -> Result<Var, AutodiffError> {
        self.softmax_impl(x, mask)
    }

    fn softmax_impl(&mut self, x: Var, mask: &[bool]) -> Result<Var, AutodiffError> {
        let tx = self.check(x)?;
        Self::mat_rank("softmax", tx)?;
        let cols = tx.cols();
        if mask.len() != cols {
            return Err(AutodiffError::ShapeMismatch {
                op: "softmax",
                lhs: tx.shape().to_vec(),
                rhs: vec![mask.len()],
            });
        }
        if !mask.iter().any(|&m| m) {
            return Err(AutodiffError::InvalidArgument {
                op: "softmax",
                detail: "every position is masked".into(),
            });
        }
        let mut data = vec![0.0; tx.numel()];
        for r in 0..tx.rows() {
            let row = tx.row_slice(r);
            let max = row
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(&v, _)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            let out = &mut data[r * cols..(r + 1) * cols];
            let mut total = 0.0;
            for j in 0..cols {
                if mask[j] {
                    out[j] = (row[j] - max).exp();
                    total += out[j];
                }
            }
            out.iter_mut().for_each(|v| *v /= total);
        }
        let out = Tensor::from_parts(tx.shape().to_vec(), data);
        self.push("softmax", out, Op::Softmax(x), &[x])
    }

    /// Elementwise minimum of two same-shape operands.
    pub fn min(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (ta, tb) = (self.check(a)?, self.check(b)?);
        if ta.shape() != tb.shape() {
            return Err(AutodiffError::ShapeMismatch {
                op: "min",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let out = self.zip_broadcast(a, b, f64::min);
        self.push("min", out, Op::Min(a, b), &[a, b])
    }

    /// Clamps into `[lo, hi]`; clamped entries pass no gradient.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Result<Var, AutodiffError> {
        self.map("clamp", x, Op::Clamp(x, lo, hi), |v| v.clamp(lo, hi))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, AutodiffError> {
        let s = self.check(x)?.data().iter().sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Result<Var, AutodiffError> {
        let t = self.check(x)?;
        let s = t.data().iter().sum::<f64>() / t.numel() as f64;
        self.push("mean", Tensor::scalar(s), Op::Mean(x), &[x])
    }

    /// Row lookup: output row `i` is row `ids[i]` of `table`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var, AutodiffError> {
        let tt = self.check(table)?;
        Self::mat_rank("gather", tt)?;
        if ids.is_empty() {
            return Err(AutodiffError::InvalidArgument {
                op: "gather",
                detail: "no ids".into(),
            });
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= tt.rows()) {
            return Err(AutodiffError::InvalidArgument {
                op: "gather",
                detail: format!("row {bad} out of range for table {:?}", tt.shape()),
            });
        }
        let data = ids.iter().flat_map(|&i| tt.row_slice(i).iter().copied()).collect();
        let out = Tensor::from_parts(vec![ids.len(), tt.cols()], data);
        self.push("gather", out, Op::Gather(table, ids.to_vec()), &[table])
    }

    /// Sums the entries of a single row into `size` buckets: `out[idx[j]] += x[j]`.
    pub fn scatter_add(&mut self, x: Var, idx: &[usize], size: usize) -> Result<Var, AutodiffError> {
        let tx = self.check(x)?;
        if tx.numel() != idx.len() {
            return Err(AutodiffError::ShapeMismatch {
                op: "scatter_add",
                lhs: tx.shape().to_vec(),
                rhs: vec![idx.len()],
            });
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= size) {
            return Err(AutodiffError::InvalidArgument {
                op: "scatter_add",
                detail: format!("index {bad} out of range for size {size}"),
            });
        }
        let mut data = vec![0.0; size];
        for (&i, &v) in idx.iter().zip(tx.data()) {
            data[i] += v;
        }
        let out = Tensor::from_parts(vec![1, size], data);
        self.push("scatter_add", out, Op::ScatterAdd(x, idx.to_vec()), &[x])
    }

    /// Appends `extra` zero columns to every row.
    pub fn pad_cols(&mut self, x: Var, extra: usize) -> Result<Var, AutodiffError> {
        let tx = self.check(x)?;
        Self::mat_rank("pad_cols", tx)?;
        let (rows, cols) = (tx.rows(), tx.cols());
        let mut data = Vec::with_capacity(rows * (cols + extra));
        for r in 0..rows {
            data.extend_from_slice(tx.row_slice(r));
            data.extend(std::iter::repeat(0.0).take(extra));
        }
        let out = Tensor::from_parts(vec![rows, cols + extra], data);
        self.push("pad_cols", out, Op::PadCols(x), &[x])
    }

    /// The entry at flat row-major position `i`, as a one-element tensor.
    pub fn index(&mut self, x: Var, i: usize) -> Result<Var, AutodiffError> {
        let tx = self.check(x)?;
        if i >= tx.numel() {
            return Err(AutodiffError::InvalidArgument {
                op: "index",
                detail: format!("position {i} out of range for {:?}", tx.shape()),
            });
        }
        let out = Tensor::scalar(tx.data()[i]);
        self.push("index", out, Op::Index(x, i), &[x])
    }

    /// Reverse sweep from a one-element `loss`. Afterwards every
    /// `requires_grad` leaf reachable from the loss holds its gradient.
    pub fn backward(&mut self, loss: Var) -> Result<(), AutodiffError> {
        let lt = self.check(loss)?;
        if lt.numel() != 1 {
            return Err(AutodiffError::NonScalarLoss(lt.shape().to_vec()));
        }
        for n in &mut self.nodes {
            n.grad = None;
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            if self.nodes[i].requires_grad {
                let shape = self.nodes[i].value.shape().to_vec();
                self.nodes[i].grad = Some(Tensor::from_parts(shape, g.clone()));
            }
            self.propagate(i, &g, &mut grads);
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let y = node.value.data();
        let nodes = &self.nodes;
        let mut acc = |v: Var, f: &dyn Fn(&mut [f64])| {
            if !nodes[v.0].needs_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.numel()]);
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                acc(*a, &|s| {
                    for (o, d) in s.iter_mut().zip(mm_bt(g, tb.data(), m, k, n)) {
                        *o += d;
                    }
                });
                acc(*b, &|s| {
                    for (o, d) in s.iter_mut().zip(mm_at(ta.data(), g, m, k, n)) {
                        *o += d;
                    }
                });
            }
            Op::Add(a, b) => {
                acc(*a, &|s| s.iter_mut().zip(g).for_each(|(o, d)| *o += d));
                let nb = nodes[b.0].value.numel();
                acc(*b, &|s| {
                    for (j, d) in g.iter().enumerate() {
                        s[j % nb] += d;
                    }
                });
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (nodes[a.0].value.data(), nodes[b.0].value.data());
                let nb = bd.len();
                acc(*a, &|s| {
                    for (j, d) in g.iter().enumerate() {
                        s[j] += d * bd[j % nb];
                    }
                });
                acc(*b, &|s| {
                    for (j, d) in g.iter().enumerate() {
                        s[j % nb] += d * ad[j];
                    }
                });
            }
            Op::ScaleBy(x, k) => {
                let xd = nodes[x.0].value.data();
                let kv = nodes[k.0].value.item();
                acc(*x, &|s| s.iter_mut().zip(g).for_each(|(o, d)| *o += d * kv));
                acc(*k, &|s| s[0] += g.iter().zip(xd).map(|(d, v)| d * v).sum::<f64>());
            }
            Op::Affine(x, scale) => {
                acc(*x, &|s| s.iter_mut().zip(g).for_each(|(o, d)| *o += d * scale));
            }
            Op::ConcatCols(parts) => {
                let total = node.value.cols();
                let mut offset = 0;
                for p in parts {
                    let w = nodes[p.0].value.cols();
                    acc(*p, &|s| {
                        for (r, srow) in s.chunks_mut(w).enumerate() {
                            let grow = &g[r * total + offset..r * total + offset + w];
                            srow.iter_mut().zip(grow).for_each(|(o, d)| *o += d);
                        }
                    });
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let len = nodes[p.0].value.numel();
                    acc(*p, &|s| {
                        s.iter_mut().zip(&g[offset..offset + len]).for_each(|(o, d)| *o += d)
                    });
                    offset += len;
                }
            }
            Op::SliceCols(x, start) => {
                let (w, xc) = (node.value.cols(), nodes[x.0].value.cols());
                acc(*x, &|s| {
                    for (r, grow) in g.chunks(w).enumerate() {
                        let srow = &mut s[r * xc + start..r * xc + start + w];
                        srow.iter_mut().zip(grow).for_each(|(o, d)| *o += d);
                    }
                });
            }
            Op::SliceRows(x, start) => {
                let off = start * node.value.cols();
                acc(*x, &|s| {
                    s[off..off + g.len()].iter_mut().zip(g).for_each(|(o, d)| *o += d)
                });
            }
            Op::Reshape(x) => acc(*x, &|s| s.iter_mut().zip(g).for_each(|(o, d)| *o += d)),
            Op::Tanh(x) => acc(*x, &|s| {
                for j in 0..s.len() {
                    s[j] += g[j] * (1.0 - y[j] * y[j]);
                }
            }),
            Op::Sigmoid(x) => acc(*x, &|s| {
                for j in 0..s.len() {
                    s[j] += g[j] * y[j] * (1.0 - y[j]);
                }
            }),
            Op::Log(x) => {
                let xd = nodes[x.0].value.data();
                acc(*x, &|s| {
                    for j in 0..s.len() {
                        s[j] += g[j] / xd[j];
                    }
                });
            }
            Op::Elementwise(x, df) => {
                let xd = nodes[x.0].value.data();
                acc(*x, &|s| {
                    for j in 0..s.len() {
                        s[j] += g[j] * df(xd[j]);
                    }
                });
            }
            Op::Softmax(x) => {
                let cols = node.value.cols();
                acc(*x, &|s| {
                    for r in 0..node.value.rows() {
                        let yr = &y[r * cols..(r + 1) * cols];
                        let gr = &g[r * cols..(r + 1) * cols];
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for j in 0..cols {
                            s[r * cols + j] += yr[j] * (gr[j] - dot);
                        }
                    }
                });
            }
            Op::Min(a, b) => {
                let (ad, bd) = (nodes[a.0].value.data(), nodes[b.0].value.data());
                acc(*a, &|s| {
                    for j in 0..s.len() {
                        if ad[j] <= bd[j] {
                            s[j] += g[j];
                        }
                    }
                });
                acc(*b, &|s| {
                    for j in 0..s.len() {
                        if ad[j] > bd[j] {
                            s[j] += g[j];
                        }
                    }
                });
            }
            Op::Clamp(x, lo, hi) => {
                let xd = nodes[x.0].value.data();
                acc(*x, &|s| {
                    for j in 0..s.len() {
                        if xd[j] > *lo && xd[j] < *hi {
                            s[j] += g[j];
                        }
                    }
                });
            }
            Op::Sum(x) => acc(*x, &|s| s.iter_mut().for_each(|o| *o += g[0])),
            Op::Mean(x) => {
                let n = nodes[x.0].value.numel() as f64;
                acc(*x, &|s| s.iter_mut().for_each(|o| *o += g[0] / n));
            }
            Op::Gather(table, ids) => {
                let c = node.value.cols();
                acc(*table, &|s| {
                    for (r, &id) in ids.iter().enumerate() {
                        let srow = &mut s[id * c..(id + 1) * c];
                        srow.iter_mut()
                            .zip(&g[r * c..(r + 1) * c])
                            .for_each(|(o, d)| *o += d);
                    }
                });
            }
            Op::ScatterAdd(x, idx) => acc(*x, &|s| {
                for (j, &i) in idx.iter().enumerate() {
                    s[j] += g[i];
                }
            }),
            Op::PadCols(x) => {
                let (xc, oc) = (nodes[x.0].value.cols(), node.value.cols());
                acc(*x, &|s| {
                    for (r, srow) in s.chunks_mut(xc).enumerate() {
                        srow.iter_mut()
                            .zip(&g[r * oc..r * oc + xc])
                            .for_each(|(o, d)| *o += d);
                    }
                });
            }
            Op::Index(x, pos) => acc(*x, &|s| s[*pos] += g[0]),
        }
    }
}
