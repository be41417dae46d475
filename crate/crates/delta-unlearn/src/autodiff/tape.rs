//! Reverse-mode automatic differentiation on a flat operation tape.
//!
//! A [`Tape`] borrows one [`ParamStore`] (the trainable parameters of a
//! single model) for the duration of a forward/backward pass. Operations
//! append nodes in topological order; a single backward traversal visits
//! each node exactly once, in reverse. Parameter gradients land in a
//! buffer indexed like the store and are applied by the caller.

use crate::autodiff::kernels::{axpy, dot, matmul_acc, matmul_nt_acc, matmul_tn_acc};
use crate::autodiff::params::{ParamId, ParamStore};
use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Value {
    Owned(Tensor),
    Param(ParamId),
}

enum Op {
    Const,
    Param,
    Matmul {
        a: NodeId,
        b: NodeId,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    AddRowBroadcast {
        a: NodeId,
        bias: NodeId,
    },
    Scale {
        a: NodeId,
        k: f64,
    },
    /// Value is `a + c` for a constant tensor `c`; gradient passes through.
    AddConst {
        a: NodeId,
    },
    Gelu {
        a: NodeId,
    },
    LayerNorm {
        a: NodeId,
        gamma: NodeId,
        beta: NodeId,
        /// (mean, rstd) per row
        cache: Vec<(f64, f64)>,
    },
    Embed {
        table: NodeId,
        pos: NodeId,
        ids: Vec<u32>,
    },
    CausalAttention {
        q: NodeId,
        k: NodeId,
        v: NodeId,
        n_heads: usize,
        /// attention probabilities, n_heads * seq * seq, row-major per head
        probs: Vec<f64>,
    },
    SelectRows {
        a: NodeId,
        rows: Vec<usize>,
    },
    /// Mean over rows of -log softmax(logits[row])[target[row]].
    CrossEntropyRows {
        logits: NodeId,
        targets: Vec<u32>,
        probs: Tensor,
    },
    /// Mean over rows of KL(p_ref[row] || softmax(logits[row])).
    KlFromFixed {
        logits: NodeId,
        p_ref: Tensor,
        probs: Tensor,
    },
    MeanScalars {
        xs: Vec<NodeId>,
    },
}

struct Node {
    value: Value,
    requires_grad: bool,
    op: Op,
}

pub struct Tape<'p> {
    store: &'p ParamStore,
    trainable: bool,
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    param_leaves: HashMap<ParamId, NodeId>,
}

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

impl<'p> Tape<'p> {
    /// `trainable = false` makes every parameter leaf gradient-free, so
    /// backward is a no-op (the frozen-model fast path).
    pub fn new(store: &'p ParamStore, trainable: bool) -> Self {
        Tape {
            store,
            trainable,
            nodes: Vec::new(),
            grads: Vec::new(),
            param_leaves: HashMap::new(),
        }
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        match &self.nodes[id.0].value {
            Value::Owned(t) => t,
            Value::Param(pid) => self.store.value(*pid),
        }
    }

    fn push(&mut self, value: Value, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        self.grads.push(None);
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    pub fn constant(&mut self, t: Tensor) -> NodeId {
        self.push(Value::Owned(t), Op::Const, false)
    }

    pub fn param(&mut self, pid: ParamId) -> NodeId {
        if let Some(&id) = self.param_leaves.get(&pid) {
            return id;
        }
        let id = self.push(Value::Param(pid), Op::Param, self.trainable);
        self.param_leaves.insert(pid, id);
        id
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, ka) = self.value(a).rows_cols();
        let (kb, n) = self.value(b).rows_cols();
        if ka != kb {
            return Err(Error::Dimension(format!(
                "matmul inner dims {ka} vs {kb}"
            )));
        }
        let mut out = vec![0.0; m * n];
        matmul_acc(self.value(a).data(), self.value(b).data(), &mut out, m, ka, n);
        let t = Tensor::new(vec![m, n], out)?;
        t.check_finite("matmul")?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Value::Owned(t), Op::Matmul { a, b }, rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::Dimension(format!(
                "add shapes {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        let mut t = self.value(a).clone();
        axpy(1.0, self.value(b).data(), t.data_mut());
        t.check_finite("add")?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Value::Owned(t), Op::Add { a, b }, rg))
    }

    /// a[m,n] + bias[n] broadcast over rows.
    pub fn add_row_broadcast(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (m, n) = self.value(a).rows_cols();
        if self.value(bias).len() != n {
            return Err(Error::Dimension(format!(
                "bias length {} vs row width {n}",
                self.value(bias).len()
            )));
        }
        let mut t = self.value(a).clone();
        {
            let bias_v = self.value(bias).data().to_vec();
            let d = t.data_mut();
            for r in 0..m {
                axpy(1.0, &bias_v, &mut d[r * n..(r + 1) * n]);
            }
        }
        t.check_finite("add_row_broadcast")?;
        let rg = self.rg(a) || self.rg(bias);
        Ok(self.push(Value::Owned(t), Op::AddRowBroadcast { a, bias }, rg))
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        let mut t = self.value(a).clone();
        for v in t.data_mut() {
            *v *= k;
        }
        let rg = self.rg(a);
        self.push(Value::Owned(t), Op::Scale { a, k }, rg)
    }

    /// a + c for a constant (non-tape) tensor c.
    pub fn add_const(&mut self, a: NodeId, c: &Tensor) -> Result<NodeId> {
        if self.value(a).shape() != c.shape() {
            return Err(Error::Dimension(format!(
                "add_const shapes {:?} vs {:?}",
                self.value(a).shape(),
                c.shape()
            )));
        }
        let mut t = self.value(a).clone();
        axpy(1.0, c.data(), t.data_mut());
        t.check_finite("add_const")?;
        let rg = self.rg(a);
        Ok(self.push(Value::Owned(t), Op::AddConst { a }, rg))
    }

    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let mut t = self.value(a).clone();
        for v in t.data_mut() {
            let x = *v;
            *v = 0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh());
        }
        let rg = self.rg(a);
        self.push(Value::Owned(t), Op::Gelu { a }, rg)
    }

    pub fn layer_norm(&mut self, a: NodeId, gamma: NodeId, beta: NodeId) -> Result<NodeId> {
        let (m, n) = self.value(a).rows_cols();
        if self.value(gamma).len() != n || self.value(beta).len() != n {
            return Err(Error::Dimension("layer_norm scale/shift width".into()));
        }
        let mut out = vec![0.0; m * n];
        let mut cache = Vec::with_capacity(m);
        {
            let x = self.value(a).data();
            let g = self.value(gamma).data();
            let b = self.value(beta).data();
            for r in 0..m {
                let row = &x[r * n..(r + 1) * n];
                let mean = row.iter().sum::<f64>() / n as f64;
                let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
                let rstd = 1.0 / (var + LN_EPS).sqrt();
                cache.push((mean, rstd));
                let o = &mut out[r * n..(r + 1) * n];
                for i in 0..n {
                    o[i] = g[i] * (row[i] - mean) * rstd + b[i];
                }
            }
        }
        let t = Tensor::new(self.value(a).shape().to_vec(), out)?;
        t.check_finite("layer_norm")?;
        let rg = self.rg(a) || self.rg(gamma) || self.rg(beta);
        Ok(self.push(
            Value::Owned(t),
            Op::LayerNorm {
                a,
                gamma,
                beta,
                cache,
            },
            rg,
        ))
    }

    /// Token + position embedding lookup: out[t] = table[ids[t]] + pos[t].
    pub fn embed(&mut self, table: NodeId, pos: NodeId, ids: &[u32]) -> Result<NodeId> {
        let (vocab, d) = self.value(table).rows_cols();
        let (max_len, dp) = self.value(pos).rows_cols();
        if d != dp {
            return Err(Error::Dimension("embedding widths differ".into()));
        }
        if ids.len() > max_len {
            return Err(Error::Dimension(format!(
                "sequence length {} exceeds max {}",
                ids.len(),
                max_len
            )));
        }
        let mut out = vec![0.0; ids.len() * d];
        {
            let tb = self.value(table).data();
            let pb = self.value(pos).data();
            for (t, &id) in ids.iter().enumerate() {
                let id = id as usize;
                if id >= vocab {
                    return Err(Error::Index(format!("token id {id} >= vocab {vocab}")));
                }
                let o = &mut out[t * d..(t + 1) * d];
                o.copy_from_slice(&tb[id * d..(id + 1) * d]);
                axpy(1.0, &pb[t * d..(t + 1) * d], o);
            }
        }
        let t = Tensor::new(vec![ids.len(), d], out)?;
        let rg = self.rg(table) || self.rg(pos);
        Ok(self.push(
            Value::Owned(t),
            Op::Embed {
                table,
                pos,
                ids: ids.to_vec(),
            },
            rg,
        ))
    }

    /// Multi-head causal self-attention over already-projected q, k, v.
    pub fn causal_attention(
        &mut self,
        q: NodeId,
        k: NodeId,
        v: NodeId,
        n_heads: usize,
    ) -> Result<NodeId> {
        let (s, d) = self.value(q).rows_cols();
        if self.value(k).shape() != self.value(q).shape()
            || self.value(v).shape() != self.value(q).shape()
        {
            return Err(Error::Dimension("attention q/k/v shapes differ".into()));
        }
        if d % n_heads != 0 {
            return Err(Error::Dimension(format!(
                "d_model {d} not divisible by heads {n_heads}"
            )));
        }
        let dh = d / n_heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut out = vec![0.0; s * d];
        let mut probs = vec![0.0; n_heads * s * s];
        {
            let qd = self.value(q).data();
            let kd = self.value(k).data();
            let vd = self.value(v).data();
            for h in 0..n_heads {
                let off = h * dh;
                for t in 0..s {
                    let q_row = &qd[t * d + off..t * d + off + dh];
                    let p_row = &mut probs[h * s * s + t * s..h * s * s + t * s + s];
                    let mut max = f64::NEG_INFINITY;
                    for u in 0..=t {
                        let sc = dot(q_row, &kd[u * d + off..u * d + off + dh]) * scale;
                        p_row[u] = sc;
                        if sc > max {
                            max = sc;
                        }
                    }
                    let mut sum = 0.0;
                    for p in p_row.iter_mut().take(t + 1) {
                        *p = (*p - max).exp();
                        sum += *p;
                    }
                    for u in 0..=t {
                        p_row[u] /= sum;
                        let w = p_row[u];
                        axpy(
                            w,
                            &vd[u * d + off..u * d + off + dh],
                            &mut out[t * d + off..t * d + off + dh],
                        );
                    }
                }
            }
        }
        let t = Tensor::new(vec![s, d], out)?;
        t.check_finite("causal_attention")?;
        let rg = self.rg(q) || self.rg(k) || self.rg(v);
        Ok(self.push(
            Value::Owned(t),
            Op::CausalAttention {
                q,
                k,
                v,
                n_heads,
                probs,
            },
            rg,
        ))
    }

    pub fn select_rows(&mut self, a: NodeId, rows: &[usize]) -> Result<NodeId> {
        let (m, n) = self.value(a).rows_cols();
        let mut out = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            if r >= m {
                return Err(Error::Index(format!("row {r} >= {m}")));
            }
            out.extend_from_slice(self.value(a).row(r));
        }
        let t = Tensor::new(vec![rows.len(), n], out)?;
        let rg = self.rg(a);
        Ok(self.push(
            Value::Owned(t),
            Op::SelectRows {
                a,
                rows: rows.to_vec(),
            },
            rg,
        ))
    }

    /// Mean over rows of -log softmax(logits[row])[targets[row]].
    /// A rank-1 logits node is treated as a single row.
    pub fn cross_entropy_rows(&mut self, logits: NodeId, targets: &[u32]) -> Result<NodeId> {
        let (m, vocab) = self.value(logits).rows_cols();
        if targets.len() != m {
            return Err(Error::Dimension(format!(
                "{} targets for {m} rows",
                targets.len()
            )));
        }
        let mut probs = vec![0.0; m * vocab];
        let mut loss = 0.0;
        {
            let ld = self.value(logits).data();
            for (r, &tgt) in targets.iter().enumerate() {
                let tgt = tgt as usize;
                if tgt >= vocab {
                    return Err(Error::Index(format!("target {tgt} >= vocab {vocab}")));
                }
                let row = &ld[r * vocab..(r + 1) * vocab];
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let p_row = &mut probs[r * vocab..(r + 1) * vocab];
                let mut sum = 0.0;
                for (p, &x) in p_row.iter_mut().zip(row) {
                    *p = (x - max).exp();
                    sum += *p;
                }
                for p in p_row.iter_mut() {
                    *p /= sum;
                }
                loss += -(row[tgt] - max - sum.ln());
            }
        }
        loss /= m as f64;
        let t = Tensor::scalar(loss);
        t.check_finite("cross_entropy")?;
        let probs = Tensor::new(vec![m, vocab], probs)?;
        let rg = self.rg(logits);
        Ok(self.push(
            Value::Owned(t),
            Op::CrossEntropyRows {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// Mean over rows of KL(p_ref[row] || softmax(logits[row])).
    pub fn kl_from_fixed(&mut self, logits: NodeId, p_ref: &Tensor) -> Result<NodeId> {
        let (m, vocab) = self.value(logits).rows_cols();
        if p_ref.shape() != [m, vocab] && !(m == 1 && p_ref.shape() == [vocab]) {
            return Err(Error::Dimension(format!(
                "kl reference shape {:?} vs logits {:?}",
                p_ref.shape(),
                self.value(logits).shape()
            )));
        }
        let mut probs = vec![0.0; m * vocab];
        let mut total = 0.0;
        {
            let ld = self.value(logits).data();
            let rd = p_ref.data();
            for r in 0..m {
                let row = &ld[r * vocab..(r + 1) * vocab];
                let refr = &rd[r * vocab..(r + 1) * vocab];
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let logsumexp =
                    row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln() + max;
                let p_row = &mut probs[r * vocab..(r + 1) * vocab];
                for (i, p) in p_row.iter_mut().enumerate() {
                    *p = (row[i] - logsumexp).exp();
                }
                for i in 0..vocab {
                    if refr[i] > 0.0 {
                        total += refr[i] * (refr[i].ln() - (row[i] - logsumexp));
                    }
                }
            }
        }
        total /= m as f64;
        let t = Tensor::scalar(total);
        t.check_finite("kl_from_fixed")?;
        let probs = Tensor::new(vec![m, vocab], probs)?;
        let rg = self.rg(logits);
        Ok(self.push(
            Value::Owned(t),
            Op::KlFromFixed {
                logits,
                p_ref: p_ref.clone(),
                probs,
            },
            rg,
        ))
    }

    pub fn mean_scalars(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        if xs.is_empty() {
            return Err(Error::Contract("mean of zero scalars".into()));
        }
        let mut sum = 0.0;
        for &x in xs {
            if self.value(x).len() != 1 {
                return Err(Error::Contract("mean_scalars input is not scalar".into()));
            }
            sum += self.value(x).item();
        }
        let t = Tensor::scalar(sum / xs.len() as f64);
        let rg = xs.iter().any(|&x| self.rg(x));
        Ok(self.push(Value::Owned(t), Op::MeanScalars { xs: xs.to_vec() }, rg))
    }

    /// Reverse sweep from a scalar loss. Gradients accumulate, so repeated
    /// calls without a fresh tape add up.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward from non-scalar node of shape {:?}",
                self.value(loss).shape()
            )));
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(()); // no leaf requires grad: no-op
        }
        // Intermediate grads are per-sweep scratch; only parameter-leaf
        // grads persist so repeated backward calls accumulate.
        for (node, grad) in self.nodes.iter().zip(self.grads.iter_mut()) {
            if !matches!(node.op, Op::Param) {
                *grad = None;
            }
        }
        self.acc_grad(loss, None, 1.0);
        for i in (0..self.nodes.len()).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let g = match self.grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            self.backprop_node(i, &g);
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    /// Gradient accumulated on a node (if any).
    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    /// Extract parameter gradients indexed like the store.
    pub fn param_grads(&self) -> Vec<Option<Tensor>> {
        let mut out = vec![None; self.store.len()];
        for (&pid, &nid) in &self.param_leaves {
            if let Some(g) = &self.grads[nid.0] {
                out[pid.0] = Some(g.clone());
            }
        }
        out
    }

    fn acc_grad(&mut self, id: NodeId, from: Option<&[f64]>, scale: f64) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        let shape = self.value(id).shape().to_vec();
        let g = self.grads[id.0].get_or_insert_with(|| Tensor::zeros(shape));
        match from {
            Some(src) => axpy(scale, src, g.data_mut()),
            None => g.data_mut()[0] += scale,
        }
    }

    fn backprop_node(&mut self, i: usize, g: &Tensor) {
        // Ops are matched by reading values immutably and writing into
        // the input grad buffers. Buffers are taken out one at a time to
        // satisfy the borrow checker.
        let op = std::mem::replace(&mut self.nodes[i].op, Op::Const);
        match &op {
            Op::Const | Op::Param => {}
            Op::Matmul { a, b } => {
                let (m, k) = self.value(*a).rows_cols();
                let (_, n) = self.value(*b).rows_cols();
                if self.rg(*a) {
                    let b_val = self.value(*b).data().to_vec();
                    let mut da = vec![0.0; m * k];
                    matmul_nt_acc(g.data(), &b_val, &mut da, m, n, k);
                    self.acc_grad(*a, Some(&da), 1.0);
                }
                if self.rg(*b) {
                    let a_val = self.value(*a).data().to_vec();
                    let mut db = vec![0.0; k * n];
                    matmul_tn_acc(&a_val, g.data(), &mut db, m, k, n);
                    self.acc_grad(*b, Some(&db), 1.0);
                }
            }
            Op::Add { a, b } => {
                self.acc_grad(*a, Some(g.data()), 1.0);
                self.acc_grad(*b, Some(g.data()), 1.0);
            }
            Op::AddRowBroadcast { a, bias } => {
                self.acc_grad(*a, Some(g.data()), 1.0);
                if self.rg(*bias) {
                    let (m, n) = self.value(*a).rows_cols();
                    let mut db = vec![0.0; n];
                    for r in 0..m {
                        axpy(1.0, &g.data()[r * n..(r + 1) * n], &mut db);
                    }
                    self.acc_grad(*bias, Some(&db), 1.0);
                }
            }
            Op::Scale { a, k } => {
                self.acc_grad(*a, Some(g.data()), *k);
            }
            Op::AddConst { a } => {
                self.acc_grad(*a, Some(g.data()), 1.0);
            }
            Op::Gelu { a } => {
                if self.rg(*a) {
                    let x = self.value(*a).data().to_vec();
                    let mut da = vec![0.0; x.len()];
                    for (i, &xv) in x.iter().enumerate() {
                        let u = GELU_C * (xv + GELU_A * xv * xv * xv);
                        let th = u.tanh();
                        let du = GELU_C * (1.0 + 3.0 * GELU_A * xv * xv);
                        da[i] = g.data()[i]
                            * (0.5 * (1.0 + th) + 0.5 * xv * (1.0 - th * th) * du);
                    }
                    self.acc_grad(*a, Some(&da), 1.0);
                }
            }
            Op::LayerNorm {
                a,
                gamma,
                beta,
                cache,
            } => {
                let (m, n) = self.value(*a).rows_cols();
                let x = self.value(*a).data().to_vec();
                let gm = self.value(*gamma).data().to_vec();
                let gd = g.data();
                if self.rg(*a) {
                    let mut da = vec![0.0; m * n];
                    for r in 0..m {
                        let (mean, rstd) = cache[r];
                        let xr = &x[r * n..(r + 1) * n];
                        let gr = &gd[r * n..(r + 1) * n];
                        let mut mean_dxhat = 0.0;
                        let mut mean_dxhat_xhat = 0.0;
                        for i in 0..n {
                            let xhat = (xr[i] - mean) * rstd;
                            let dxhat = gr[i] * gm[i];
                            mean_dxhat += dxhat;
                            mean_dxhat_xhat += dxhat * xhat;
                        }
                        mean_dxhat /= n as f64;
                        mean_dxhat_xhat /= n as f64;
                        let dar = &mut da[r * n..(r + 1) * n];
                        for i in 0..n {
                            let xhat = (xr[i] - mean) * rstd;
                            let dxhat = gr[i] * gm[i];
                            dar[i] = rstd * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
                        }
                    }
                    self.acc_grad(*a, Some(&da), 1.0);
                }
                if self.rg(*gamma) {
                    let mut dg = vec![0.0; n];
                    for r in 0..m {
                        let (mean, rstd) = cache[r];
                        for i in 0..n {
                            let xhat = (x[r * n + i] - mean) * rstd;
                            dg[i] += gd[r * n + i] * xhat;
                        }
                    }
                    self.acc_grad(*gamma, Some(&dg), 1.0);
                }
                if self.rg(*beta) {
                    let mut db = vec![0.0; n];
                    for r in 0..m {
                        axpy(1.0, &gd[r * n..(r + 1) * n], &mut db);
                    }
                    self.acc_grad(*beta, Some(&db), 1.0);
                }
            }
            Op::Embed { table, pos, ids } => {
                let (_, d) = self.value(*table).rows_cols();
                if self.rg(*table) {
                    let shape = self.value(*table).shape().to_vec();
                    let ids = ids.clone();
                    let gd = g.data().to_vec();
                    let buf = self.grads[table.0]
                        .get_or_insert_with(|| Tensor::zeros(shape))
                        .data_mut();
                    for (t, &id) in ids.iter().enumerate() {
                        let id = id as usize;
                        axpy(1.0, &gd[t * d..(t + 1) * d], &mut buf[id * d..(id + 1) * d]);
                    }
                }
                if self.rg(*pos) {
                    let shape = self.value(*pos).shape().to_vec();
                    let gd = g.data().to_vec();
                    let n_rows = ids.len();
                    let buf = self.grads[pos.0]
                        .get_or_insert_with(|| Tensor::zeros(shape))
                        .data_mut();
                    for t in 0..n_rows {
                        axpy(1.0, &gd[t * d..(t + 1) * d], &mut buf[t * d..(t + 1) * d]);
                    }
                }
            }
            Op::CausalAttention {
                q,
                k,
                v,
                n_heads,
                probs,
            } => {
                let (s, d) = self.value(*q).rows_cols();
                let dh = d / n_heads;
                let scale = 1.0 / (dh as f64).sqrt();
                let qd = self.value(*q).data().to_vec();
                let kd = self.value(*k).data().to_vec();
                let vd = self.value(*v).data().to_vec();
                let gd = g.data();
                let mut dq = vec![0.0; s * d];
                let mut dk = vec![0.0; s * d];
                let mut dv = vec![0.0; s * d];
                let mut dp = vec![0.0; s];
                for h in 0..*n_heads {
                    let off = h * dh;
                    for t in 0..s {
                        let p_row = &probs[h * s * s + t * s..h * s * s + t * s + s];
                        let g_row = &gd[t * d + off..t * d + off + dh];
                        // dV and dP
                        let mut dp_dot_p = 0.0;
                        for u in 0..=t {
                            axpy(p_row[u], g_row, &mut dv[u * d + off..u * d + off + dh]);
                            dp[u] = dot(g_row, &vd[u * d + off..u * d + off + dh]);
                            dp_dot_p += dp[u] * p_row[u];
                        }
                        // softmax backward, then into q and k
                        for u in 0..=t {
                            let ds = p_row[u] * (dp[u] - dp_dot_p) * scale;
                            if ds == 0.0 {
                                continue;
                            }
                            axpy(
                                ds,
                                &kd[u * d + off..u * d + off + dh],
                                &mut dq[t * d + off..t * d + off + dh],
                            );
                            axpy(
                                ds,
                                &qd[t * d + off..t * d + off + dh],
                                &mut dk[u * d + off..u * d + off + dh],
                            );
                        }
                    }
                }
                self.acc_grad(*q, Some(&dq), 1.0);
                self.acc_grad(*k, Some(&dk), 1.0);
                self.acc_grad(*v, Some(&dv), 1.0);
            }
            Op::SelectRows { a, rows } => {
                if self.rg(*a) {
                    let (_, n) = self.value(*a).rows_cols();
                    let shape = self.value(*a).shape().to_vec();
                    let gd = g.data().to_vec();
                    let buf = self.grads[a.0]
                        .get_or_insert_with(|| Tensor::zeros(shape))
                        .data_mut();
                    for (out_r, &src_r) in rows.iter().enumerate() {
                        axpy(
                            1.0,
                            &gd[out_r * n..(out_r + 1) * n],
                            &mut buf[src_r * n..(src_r + 1) * n],
                        );
                    }
                }
            }
            Op::CrossEntropyRows {
                logits,
                targets,
                probs,
            } => {
                if self.rg(*logits) {
                    let up = g.item();
                    let (m, vocab) = probs.rows_cols();
                    let mut dl = probs.data().to_vec();
                    let w = up / m as f64;
                    for (r, &tgt) in targets.iter().enumerate() {
                        dl[r * vocab + tgt as usize] -= 1.0;
                    }
                    for v in &mut dl {
                        *v *= w;
                    }
                    self.acc_grad(*logits, Some(&dl), 1.0);
                }
            }
            Op::KlFromFixed {
                logits,
                p_ref,
                probs,
            } => {
                if self.rg(*logits) {
                    let up = g.item();
                    let (m, _) = probs.rows_cols();
                    let w = up / m as f64;
                    let mut dl = probs.data().to_vec();
                    axpy(-1.0, p_ref.data(), &mut dl);
                    for v in &mut dl {
                        *v *= w;
                    }
                    self.acc_grad(*logits, Some(&dl), 1.0);
                }
            }
            Op::MeanScalars { xs } => {
                let w = g.item() / xs.len() as f64;
                for &x in xs {
                    self.acc_grad(x, None, w);
                }
            }
        }
        self.nodes[i].op = op;
    }
}
