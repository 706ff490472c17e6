//! Define-by-run computation graph with reverse-mode differentiation.
//!
//! The graph is rebuilt for every training step: values are computed eagerly
//! as operations are recorded, and `backward` replays the recording in
//! reverse to accumulate vector-Jacobian products. Everything is `f64`;
//! sequence models at this scale do not need a faster path badly enough to
//! justify a second numeric type.

use crate::error::{Error, Result};

/// Identity of a node within one graph. Ids are unique per graph and are
/// meaningless across graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TensorId(pub(crate) usize);

impl TensorId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// An n-dimensional value held by a graph node. Row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Tensor {
    pub fn new(values: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::NonPositiveExtent { shape });
        }
        let numel: usize = shape.iter().product();
        if values.len() != numel {
            return Err(Error::ShapeMismatch {
                op: "tensor",
                detail: format!("{} values for shape {:?}", values.len(), shape),
            });
        }
        Ok(Tensor { shape, values })
    }

    pub fn numel(&self) -> usize {
        self.values.len()
    }
}

/// Recorded operation that produced a node. Leaves are inputs or parameters.
#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Matmul { a: TensorId, b: TensorId },
    Add { a: TensorId, b: TensorId },
    Sub { a: TensorId, b: TensorId },
    Mul { a: TensorId, b: TensorId },
    Scale { x: TensorId, factor: f64 },
    AddScalar { x: TensorId },
    Tanh { x: TensorId },
    Sigmoid { x: TensorId },
    Exp { x: TensorId },
    Softmax { x: TensorId },
    Concat { parts: Vec<TensorId> },
    StackRows { rows: Vec<TensorId> },
    Slice { x: TensorId, start: usize, len: usize },
    Reshape { x: TensorId },
    EmbeddingLookup { table: TensorId, ids: Vec<usize> },
    CrossEntropy { logits: TensorId, targets: Vec<usize> },
    Sum { x: TensorId },
    Mean { x: TensorId },
}

/// Gradients keyed by node id, produced by [`Graph::backward`].
///
/// Nodes the loss never reached read back as zero-filled arrays, so every
/// parameter bound into the graph always has a well-defined gradient.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    sizes: Vec<usize>,
}

impl Gradients {
    /// Gradient for `id`, or `None` if the loss does not depend on it.
    pub fn flowed(&self, id: TensorId) -> Option<&[f64]> {
        self.grads[id.0].as_deref()
    }

    /// Gradient for `id`, materializing zeros for non-participating nodes.
    pub fn get(&self, id: TensorId) -> Vec<f64> {
        match &self.grads[id.0] {
            Some(g) => g.clone(),
            None => vec![0.0; self.sizes[id.0]],
        }
    }
}

/// The computation graph. One per forward pass; single-threaded by design.
pub struct Graph {
    tensors: Vec<Tensor>,
    ops: Vec<Op>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph { tensors: Vec::new(), ops: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn value(&self, id: TensorId) -> &[f64] {
        &self.tensors[id.0].values
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.tensors[id.0].shape
    }

    fn push(&mut self, tensor: Tensor, op: Op) -> TensorId {
        let id = TensorId(self.tensors.len());
        self.tensors.push(tensor);
        self.ops.push(op);
        id
    }

    // ── Leaves ───────────────────────────────────────────────────────

    /// Record an input or parameter node. The graph owns a copy of the data.
    pub fn leaf(&mut self, values: Vec<f64>, shape: Vec<usize>) -> Result<TensorId> {
        let t = Tensor::new(values, shape)?;
        Ok(self.push(t, Op::Leaf))
    }

    pub fn leaf_from(&mut self, values: &[f64], shape: &[usize]) -> Result<TensorId> {
        self.leaf(values.to_vec(), shape.to_vec())
    }

    /// Scalar constant, shape `[1]`.
    pub fn scalar(&mut self, value: f64) -> TensorId {
        self.push(Tensor { shape: vec![1], values: vec![value] }, Op::Leaf)
    }

    // ── Shape helpers ────────────────────────────────────────────────

    fn mismatch(&self, op: &'static str, a: TensorId, b: TensorId) -> Error {
        Error::ShapeMismatch {
            op,
            detail: format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
        }
    }

    fn require_same_shape(&self, op: &'static str, a: TensorId, b: TensorId) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(self.mismatch(op, a, b));
        }
        Ok(())
    }

    /// Interpret a node as a stack of rows with the class axis last:
    /// rank-1 is a single row, rank-2 is (rows, cols).
    fn as_rows(&self, op: &'static str, id: TensorId) -> Result<(usize, usize)> {
        match self.shape(id) {
            [n] => Ok((1, *n)),
            [r, c] => Ok((*r, *c)),
            other => Err(Error::ShapeMismatch {
                op,
                detail: format!("expected rank 1 or 2, got {:?}", other),
            }),
        }
    }

    // ── Operations ───────────────────────────────────────────────────

    /// Matrix product. Rank-1 operands are treated as a row vector on the
    /// left and a column vector on the right; the unit axis is dropped from
    /// the result, so vector·matrix → vector, matrix·vector → vector and
    /// vector·vector → scalar.
    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (m, ka, a_vec) = match self.shape(a) {
            [k] => (1, *k, true),
            [m, k] => (*m, *k, false),
            _ => return Err(self.mismatch("matmul", a, b)),
        };
        let (kb, n, b_vec) = match self.shape(b) {
            [k] => (*k, 1, true),
            [k, n] => (*k, *n, false),
            _ => return Err(self.mismatch("matmul", a, b)),
        };
        if ka != kb {
            return Err(self.mismatch("matmul", a, b));
        }
        let k = ka;
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let aip = av[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                let brow = &bv[p * n..(p + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += aip * brow[j];
                }
            }
        }
        let shape = match (a_vec, b_vec) {
            (true, true) => vec![1],
            (true, false) => vec![n],
            (false, true) => vec![m],
            (false, false) => vec![m, n],
        };
        Ok(self.push(Tensor { shape, values: out }, Op::Matmul { a, b }))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.require_same_shape("add", a, b)?;
        let values = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor { shape, values }, Op::Add { a, b }))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.require_same_shape("sub", a, b)?;
        let values = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x - y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor { shape, values }, Op::Sub { a, b }))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.require_same_shape("multiply", a, b)?;
        let values = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor { shape, values }, Op::Mul { a, b }))
    }

    pub fn scale(&mut self, x: TensorId, factor: f64) -> TensorId {
        let values = self.value(x).iter().map(|v| v * factor).collect();
        let shape = self.shape(x).to_vec();
        self.push(Tensor { shape, values }, Op::Scale { x, factor })
    }

    pub fn add_scalar(&mut self, x: TensorId, value: f64) -> TensorId {
        let values = self.value(x).iter().map(|v| v + value).collect();
        let shape = self.shape(x).to_vec();
        self.push(Tensor { shape, values }, Op::AddScalar { x })
    }

    pub fn tanh(&mut self, x: TensorId) -> TensorId {
        let values = self.value(x).iter().map(|v| v.tanh()).collect();
        let shape = self.shape(x).to_vec();
        self.push(Tensor { shape, values }, Op::Tanh { x })
    }

    pub fn sigmoid(&mut self, x: TensorId) -> TensorId {
        let values = self.value(x).iter().map(|v| sigmoid(*v)).collect();
        let shape = self.shape(x).to_vec();
        self.push(Tensor { shape, values }, Op::Sigmoid { x })
    }

    pub fn exp(&mut self, x: TensorId) -> TensorId {
        let values = self.value(x).iter().map(|v| v.exp()).collect();
        let shape = self.shape(x).to_vec();
        self.push(Tensor { shape, values }, Op::Exp { x })
    }

    /// Softmax along the last (class) axis. Stabilized by max subtraction.
    pub fn softmax(&mut self, x: TensorId) -> Result<TensorId> {
        let (rows, cols) = self.as_rows("softmax", x)?;
        let xv = self.value(x);
        let mut values = vec![0.0; rows * cols];
        for r in 0..rows {
            let row = &xv[r * cols..(r + 1) * cols];
            let out = &mut values[r * cols..(r + 1) * cols];
            softmax_into(row, out);
        }
        let shape = self.shape(x).to_vec();
        Ok(self.push(Tensor { shape, values }, Op::Softmax { x }))
    }

    /// Concatenate rank-1 vectors into one rank-1 vector.
    pub fn concat(&mut self, parts: &[TensorId]) -> Result<TensorId> {
        if parts.is_empty() {
            return Err(Error::EmptySequence { what: "concat inputs" });
        }
        let mut values = Vec::new();
        for &p in parts {
            if self.shape(p).len() != 1 {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    detail: format!("rank-1 inputs required, got {:?}", self.shape(p)),
                });
            }
            values.extend_from_slice(self.value(p));
        }
        let shape = vec![values.len()];
        Ok(self.push(Tensor { shape, values }, Op::Concat { parts: parts.to_vec() }))
    }

    /// Stack equal-length rank-1 vectors into a (rows, cols) matrix.
    pub fn stack_rows(&mut self, rows: &[TensorId]) -> Result<TensorId> {
        if rows.is_empty() {
            return Err(Error::EmptySequence { what: "stack_rows inputs" });
        }
        let cols = self.value(rows[0]).len();
        let mut values = Vec::with_capacity(rows.len() * cols);
        for &r in rows {
            if self.shape(r) != [cols] {
                return Err(Error::ShapeMismatch {
                    op: "stack_rows",
                    detail: format!("[{}] vs {:?}", cols, self.shape(r)),
                });
            }
            values.extend_from_slice(self.value(r));
        }
        let shape = vec![rows.len(), cols];
        Ok(self.push(Tensor { shape, values }, Op::StackRows { rows: rows.to_vec() }))
    }

    /// Contiguous range of the flattened input, returned as a rank-1 vector.
    pub fn slice(&mut self, x: TensorId, start: usize, len: usize) -> Result<TensorId> {
        let numel = self.tensors[x.0].numel();
        if len == 0 || start + len > numel {
            return Err(Error::ShapeMismatch {
                op: "slice",
                detail: format!("[{start}, {start}+{len}) of {numel} elements"),
            });
        }
        let values = self.value(x)[start..start + len].to_vec();
        Ok(self.push(Tensor { shape: vec![len], values }, Op::Slice { x, start, len }))
    }

    /// Reinterpret the flat data under a new shape. No data movement.
    pub fn reshape(&mut self, x: TensorId, shape: Vec<usize>) -> Result<TensorId> {
        let numel: usize = shape.iter().product();
        if numel != self.tensors[x.0].numel() || shape.iter().any(|&d| d == 0) {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                detail: format!("{:?} to {:?}", self.shape(x), shape),
            });
        }
        let values = self.value(x).to_vec();
        Ok(self.push(Tensor { shape, values }, Op::Reshape { x }))
    }

    /// Gather rows of an embedding table: (vocab, dim) × ids → (len, dim).
    pub fn embedding_lookup(&mut self, table: TensorId, ids: &[usize]) -> Result<TensorId> {
        let (vocab, dim) = match self.shape(table) {
            [v, d] => (*v, *d),
            other => {
                return Err(Error::ShapeMismatch {
                    op: "embedding_lookup",
                    detail: format!("table must be rank 2, got {:?}", other),
                })
            }
        };
        if ids.is_empty() {
            return Err(Error::EmptySequence { what: "embedding_lookup ids" });
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab) {
            return Err(Error::ShapeMismatch {
                op: "embedding_lookup",
                detail: format!("id {bad} out of table with {vocab} rows"),
            });
        }
        let tv = self.value(table);
        let mut values = Vec::with_capacity(ids.len() * dim);
        for &i in ids {
            values.extend_from_slice(&tv[i * dim..(i + 1) * dim]);
        }
        let shape = vec![ids.len(), dim];
        Ok(self.push(
            Tensor { shape, values },
            Op::EmbeddingLookup { table, ids: ids.to_vec() },
        ))
    }

    /// Per-target negative log-likelihood under a softmax of the logits,
    /// fused for numerical stability (log-sum-exp). The class axis is last.
    ///
    /// Logits may be a single row shared by every target, or one row per
    /// target. Output is a rank-1 vector of nats, one entry per target.
    pub fn cross_entropy(&mut self, logits: TensorId, targets: &[usize]) -> Result<TensorId> {
        if targets.is_empty() {
            return Err(Error::EmptySequence { what: "cross_entropy targets" });
        }
        let (rows, cols) = self.as_rows("cross_entropy", logits)?;
        if rows != targets.len() && rows != 1 {
            return Err(Error::ShapeMismatch {
                op: "cross_entropy",
                detail: format!("{rows} logit rows vs {} targets", targets.len()),
            });
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= cols) {
            return Err(Error::ShapeMismatch {
                op: "cross_entropy",
                detail: format!("target {bad} out of {cols} classes"),
            });
        }
        let lv = self.value(logits);
        let mut values = Vec::with_capacity(targets.len());
        for (t, &target) in targets.iter().enumerate() {
            let r = if rows == 1 { 0 } else { t };
            let row = &lv[r * cols..(r + 1) * cols];
            values.push(log_sum_exp(row) - row[target]);
        }
        let shape = vec![targets.len()];
        Ok(self.push(
            Tensor { shape, values },
            Op::CrossEntropy { logits, targets: targets.to_vec() },
        ))
    }

    /// Sum of all elements; scalar output.
    pub fn sum(&mut self, x: TensorId) -> TensorId {
        let total: f64 = self.value(x).iter().sum();
        self.push(Tensor { shape: vec![1], values: vec![total] }, Op::Sum { x })
    }

    /// Mean of all elements; scalar output.
    pub fn mean(&mut self, x: TensorId) -> TensorId {
        let n = self.tensors[x.0].numel() as f64;
        let total: f64 = self.value(x).iter().sum();
        self.push(Tensor { shape: vec![1], values: vec![total / n] }, Op::Mean { x })
    }

    // ── Backward ─────────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss. Returns gradients for every node;
    /// nodes that do not reach the loss read back as zeros.
    pub fn backward(&self, loss: TensorId) -> Result<Gradients> {
        if self.tensors[loss.0].numel() != 1 {
            return Err(Error::NonScalarLoss { shape: self.shape(loss).to_vec() });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.tensors.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(d_out) = grads[idx].take() else { continue };
            self.backward_op(idx, &d_out, &mut grads);
            grads[idx] = Some(d_out);
        }

        let sizes = self.tensors.iter().map(Tensor::numel).collect();
        Ok(Gradients { grads, sizes })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], id: TensorId, contribution: &[f64]) {
        match &mut grads[id.0] {
            Some(existing) => {
                for (e, c) in existing.iter_mut().zip(contribution) {
                    *e += c;
                }
            }
            None => grads[id.0] = Some(contribution.to_vec()),
        }
    }

    fn backward_op(&self, idx: usize, d_out: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &self.ops[idx] {
            Op::Leaf => {}

            Op::Matmul { a, b } => {
                let (m, k) = match self.shape(*a) {
                    [k] => (1, *k),
                    [m, k] => (*m, *k),
                    _ => unreachable!(),
                };
                let n = match self.shape(*b) {
                    [_] => 1,
                    [_, n] => *n,
                    _ => unreachable!(),
                };
                let av = self.value(*a);
                let bv = self.value(*b);
                // d_a[i,p] = Σ_j d_out[i,j] · b[p,j]
                let mut d_a = vec![0.0; m * k];
                for i in 0..m {
                    for p in 0..k {
                        let mut acc = 0.0;
                        for j in 0..n {
                            acc += d_out[i * n + j] * bv[p * n + j];
                        }
                        d_a[i * k + p] = acc;
                    }
                }
                self.accumulate(grads, *a, &d_a);
                // d_b[p,j] = Σ_i a[i,p] · d_out[i,j]
                let mut d_b = vec![0.0; k * n];
                for i in 0..m {
                    for p in 0..k {
                        let aip = av[i * k + p];
                        if aip == 0.0 {
                            continue;
                        }
                        for j in 0..n {
                            d_b[p * n + j] += aip * d_out[i * n + j];
                        }
                    }
                }
                self.accumulate(grads, *b, &d_b);
            }

            Op::Add { a, b } => {
                self.accumulate(grads, *a, d_out);
                self.accumulate(grads, *b, d_out);
            }

            Op::Sub { a, b } => {
                self.accumulate(grads, *a, d_out);
                let neg: Vec<f64> = d_out.iter().map(|d| -d).collect();
                self.accumulate(grads, *b, &neg);
            }

            Op::Mul { a, b } => {
                let d_a: Vec<f64> = d_out.iter().zip(self.value(*b)).map(|(d, y)| d * y).collect();
                let d_b: Vec<f64> = d_out.iter().zip(self.value(*a)).map(|(d, x)| d * x).collect();
                self.accumulate(grads, *a, &d_a);
                self.accumulate(grads, *b, &d_b);
            }

            Op::Scale { x, factor } => {
                let d: Vec<f64> = d_out.iter().map(|g| g * factor).collect();
                self.accumulate(grads, *x, &d);
            }

            Op::AddScalar { x } => {
                self.accumulate(grads, *x, d_out);
            }

            Op::Tanh { x } => {
                let out = self.value(TensorId(idx));
                let d: Vec<f64> = d_out.iter().zip(out).map(|(g, y)| g * (1.0 - y * y)).collect();
                self.accumulate(grads, *x, &d);
            }

            Op::Sigmoid { x } => {
                let out = self.value(TensorId(idx));
                let d: Vec<f64> = d_out.iter().zip(out).map(|(g, y)| g * y * (1.0 - y)).collect();
                self.accumulate(grads, *x, &d);
            }

            Op::Exp { x } => {
                let out = self.value(TensorId(idx));
                let d: Vec<f64> = d_out.iter().zip(out).map(|(g, y)| g * y).collect();
                self.accumulate(grads, *x, &d);
            }

            Op::Softmax { x } => {
                let (rows, cols) = self.as_rows("softmax", *x).expect("validated at record time");
                let out = self.value(TensorId(idx));
                let mut d_x = vec![0.0; rows * cols];
                for r in 0..rows {
                    let base = r * cols;
                    let dot: f64 = (0..cols).map(|c| d_out[base + c] * out[base + c]).sum();
                    for c in 0..cols {
                        d_x[base + c] = out[base + c] * (d_out[base + c] - dot);
                    }
                }
                self.accumulate(grads, *x, &d_x);
            }

            Op::Concat { parts } => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.tensors[p.0].numel();
                    self.accumulate(grads, p, &d_out[offset..offset + len]);
                    offset += len;
                }
            }

            Op::StackRows { rows } => {
                let cols = self.tensors[rows[0].0].numel();
                for (r, &row) in rows.iter().enumerate() {
                    self.accumulate(grads, row, &d_out[r * cols..(r + 1) * cols]);
                }
            }

            Op::Slice { x, start, len } => {
                let mut d_x = vec![0.0; self.tensors[x.0].numel()];
                d_x[*start..start + len].copy_from_slice(d_out);
                self.accumulate(grads, *x, &d_x);
            }

            Op::Reshape { x } => {
                self.accumulate(grads, *x, d_out);
            }

            Op::EmbeddingLookup { table, ids } => {
                let dim = match self.shape(*table) {
                    [_, d] => *d,
                    _ => unreachable!(),
                };
                let mut d_table = vec![0.0; self.tensors[table.0].numel()];
                for (t, &id) in ids.iter().enumerate() {
                    for j in 0..dim {
                        d_table[id * dim + j] += d_out[t * dim + j];
                    }
                }
                self.accumulate(grads, *table, &d_table);
            }

            Op::CrossEntropy { logits, targets } => {
                let (rows, cols) =
                    self.as_rows("cross_entropy", *logits).expect("validated at record time");
                let lv = self.value(*logits);
                let mut d_logits = vec![0.0; rows * cols];
                let mut probs = vec![0.0; cols];
                for (t, &target) in targets.iter().enumerate() {
                    let r = if rows == 1 { 0 } else { t };
                    let base = r * cols;
                    softmax_into(&lv[base..base + cols], &mut probs);
                    let g = d_out[t];
                    for c in 0..cols {
                        d_logits[base + c] += g * probs[c];
                    }
                    d_logits[base + target] -= g;
                }
                self.accumulate(grads, *logits, &d_logits);
            }

            Op::Sum { x } => {
                let d = vec![d_out[0]; self.tensors[x.0].numel()];
                self.accumulate(grads, *x, &d);
            }

            Op::Mean { x } => {
                let n = self.tensors[x.0].numel();
                let d = vec![d_out[0] / n as f64; n];
                self.accumulate(grads, *x, &d);
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

fn softmax_into(row: &[f64], out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, v) in out.iter_mut().zip(row) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}
