//! Reverse-mode recorder over the fixed primitive set the network needs.
//!
//! A [`Graph`] records every operation applied during one forward pass in
//! execution order, so node indices are already topologically sorted.
//! [`backward`] walks the record once in reverse and accumulates gradients
//! for every [`ParamId`] it reaches.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::kernels::{self, BatchNormConfig, BnSaved, RunningStats};
use super::{ln_clamped, Mode, RngStream, Tensor, LOG_EPS};
use crate::error::{Error, Result};

/// Index of a learnable tensor inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named learnable tensors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    pub fn total_len(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }
}

/// Handle to a recorded node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct NodeId(usize);

/// One source row contributing to a [`Graph::row_combine`] output row.
type RowSource = (u32, u32, f64);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Affine(NodeId, NodeId, NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    SoftmaxRows(NodeId),
    Dropout(NodeId, Tensor),
    BatchNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        saved: BnSaved,
    },
    Mul(NodeId, NodeId),
    MulColumn(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Scale(NodeId, f64),
    ConcatCols(Vec<NodeId>),
    GatherRows(NodeId, Vec<usize>),
    RowCombine {
        parts: Vec<NodeId>,
        rows: Vec<Vec<RowSource>>,
    },
    RowSum(NodeId),
    Sum(NodeId),
    JointDistribution {
        a: NodeId,
        b: NodeId,
        total: f64,
    },
    ContrastivePair {
        p: NodeId,
        alpha: f64,
    },
    NllSum {
        probs: NodeId,
        labels: Vec<usize>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// A computation record.
#[derive(Debug)]
pub struct Graph {
    nodes: Vec<Node>,
    params: BTreeMap<ParamId, NodeId>,
    mode: Mode,
}

impl Graph {
    pub fn new(mode: Mode) -> Self {
        Self {
            nodes: Vec::new(),
            params: BTreeMap::new(),
            mode,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    /// A leaf that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Constant)
    }

    /// Leaf for a learnable tensor; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        if let Some(&n) = self.params.get(&id) {
            return n;
        }
        let n = self.push(store.get(id).clone(), Op::Param(id));
        self.params.insert(id, n);
        n
    }

    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let v = kernels::affine(self.value(x), self.value(w), self.value(b))?;
        Ok(self.push(v, Op::Affine(x, w, b)))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let v = kernels::sigmoid(self.value(x));
        self.push(v, Op::Sigmoid(x))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = kernels::relu(self.value(x));
        self.push(v, Op::Relu(x))
    }

    pub fn softmax_rows(&mut self, x: NodeId) -> NodeId {
        let v = kernels::softmax_rows(self.value(x));
        self.push(v, Op::SoftmaxRows(x))
    }

    /// Inverted dropout; the identity when the graph is in eval mode.
    pub fn dropout(&mut self, x: NodeId, p: f64, rng: &mut RngStream) -> Result<NodeId> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
        if self.mode == Mode::Eval || p == 0.0 {
            return Ok(x);
        }
        let (r, c) = self.value(x).shape();
        let mask = kernels::dropout_mask(r, c, p, rng)?;
        let v = self.value(x).zip_map(&mask, |a, m| a * m)?;
        Ok(self.push(v, Op::Dropout(x, mask)))
    }

    /// Batch normalization in the given mode (independent of the graph mode,
    /// so a train-mode pass can fall back to running statistics for tiny
    /// batches).
    pub fn batch_norm(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        state: &mut RunningStats,
        mode: Mode,
        cfg: BatchNormConfig,
    ) -> Result<NodeId> {
        let (v, saved) = kernels::batch_norm(
            self.value(x),
            self.value(gamma),
            self.value(beta),
            state,
            mode,
            cfg,
        )?;
        Ok(self.push(
            v,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                saved,
            },
        ))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    /// `a (N x D)` scaled row-wise by the column `s (N x 1)`.
    pub fn mul_column(&mut self, a: NodeId, s: NodeId) -> Result<NodeId> {
        let (av, sv) = (self.value(a), self.value(s));
        if sv.shape() != (av.rows(), 1) {
            return Err(Error::Shape {
                op: "mul_column",
                lhs: av.shape(),
                rhs: sv.shape(),
            });
        }
        let v = Tensor::from_fn(av.rows(), av.cols(), |r, c| av.get(r, c) * sv.get(r, 0));
        Ok(self.push(v, Op::MulColumn(a, s)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let v = self.value(a).map(|x| x * factor);
        self.push(v, Op::Scale(a, factor))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let vals: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let v = Tensor::concat_cols(&vals)?;
        Ok(self.push(v, Op::ConcatCols(parts.to_vec())))
    }

    pub fn gather_rows(&mut self, a: NodeId, indices: &[usize]) -> NodeId {
        let v = self.value(a).gather_rows(indices);
        self.push(v, Op::GatherRows(a, indices.to_vec()))
    }

    /// Builds a `rows.len() x cols` tensor whose row `r` is
    /// `sum(w * parts[p].row(i))` over the `(p, i, w)` listed in `rows[r]`;
    /// rows with no sources are zero.
    pub fn row_combine(
        &mut self,
        parts: &[NodeId],
        rows: Vec<Vec<(usize, usize, f64)>>,
        cols: usize,
    ) -> Result<NodeId> {
        for &p in parts {
            if self.value(p).cols() != cols {
                return Err(Error::Shape {
                    op: "row_combine",
                    lhs: (rows.len(), cols),
                    rhs: self.value(p).shape(),
                });
            }
        }
        let mut out = Tensor::zeros(rows.len(), cols);
        for (r, sources) in rows.iter().enumerate() {
            for &(p, i, w) in sources {
                let src = self.nodes[parts[p].0].value.row(i);
                for (o, &s) in out.row_mut(r).iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        }
        let rows = rows
            .into_iter()
            .map(|s| s.into_iter().map(|(p, i, w)| (p as u32, i as u32, w)).collect())
            .collect();
        Ok(self.push(
            out,
            Op::RowCombine {
                parts: parts.to_vec(),
                rows,
            },
        ))
    }

    /// Per-row sum, `N x D -> N x 1`.
    pub fn row_sum(&mut self, a: NodeId) -> NodeId {
        let av = self.value(a);
        let v = Tensor::from_fn(av.rows(), 1, |r, _| av.row(r).iter().sum());
        self.push(v, Op::RowSum(a))
    }

    /// Sum of all entries, returned as `1 x 1`.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    /// Normalized average outer product of two row-distribution matrices.
    pub fn joint_distribution(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (raw, total) = joint_raw(self.value(a), self.value(b))?;
        let v = raw.map(|x| x / total);
        Ok(self.push(v, Op::JointDistribution { a, b, total }))
    }

    pub fn contrastive_pair(&mut self, p: NodeId, alpha: f64) -> Result<NodeId> {
        let v = Tensor::scalar(contrastive_pair_value(self.value(p), alpha)?);
        Ok(self.push(v, Op::ContrastivePair { p, alpha }))
    }

    /// `-sum_r ln(max(probs[r, labels[r]], eps))`.
    pub fn nll_sum(&mut self, probs: NodeId, labels: &[usize]) -> Result<NodeId> {
        let pv = self.value(probs);
        if labels.len() != pv.rows() {
            return Err(Error::LengthMismatch {
                left: pv.rows(),
                right: labels.len(),
            });
        }
        let mut total = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            if y >= pv.cols() {
                return Err(Error::InvalidLabel {
                    label: y,
                    classes: pv.cols(),
                });
            }
            total -= ln_clamped(pv.get(r, y));
        }
        Ok(self.push(
            Tensor::scalar(total),
            Op::NllSum {
                probs,
                labels: labels.to_vec(),
            },
        ))
    }
}

/// Sum of a square matrix in an order that is invariant under transposition;
/// falls back to row-major order for rectangular input.
pub(crate) fn transpose_invariant_sum(m: &Tensor) -> f64 {
    let (r, c) = m.shape();
    if r != c {
        return m.sum();
    }
    let mut s = 0.0;
    for d in 0..r {
        s += m.get(d, d);
        for e in d + 1..r {
            s += m.get(d, e) + m.get(e, d);
        }
    }
    s
}

/// Unnormalized `A^T B / N` and its total.
pub(crate) fn joint_raw(a: &Tensor, b: &Tensor) -> Result<(Tensor, f64)> {
    if a.rows() != b.rows() {
        return Err(Error::Shape {
            op: "joint_distribution",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    let n = a.rows();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    let (da, db) = (a.cols(), b.cols());
    let mut raw = Tensor::zeros(da, db);
    for j in 0..n {
        let (ar, br) = (a.row(j), b.row(j));
        for (d, &x) in ar.iter().enumerate() {
            let out = raw.row_mut(d);
            for (o, &y) in out.iter_mut().zip(br) {
                *o += x * y;
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    let raw = raw.map(|v| v * inv_n);
    let total = transpose_invariant_sum(&raw);
    Ok((raw, total))
}

fn marginals(p: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let (r, c) = p.shape();
    let rows: Vec<f64> = (0..r).map(|d| p.row(d).iter().sum()).collect();
    let mut cols = vec![0.0; c];
    for d in 0..r {
        for (s, &v) in cols.iter_mut().zip(p.row(d)) {
            *s += v;
        }
    }
    (rows, cols)
}

pub(crate) fn contrastive_pair_value(p: &Tensor, alpha: f64) -> Result<f64> {
    if let Some(v) = p.data().iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidDistribution(alloc::format!(
            "entry {v} is negative or not a number"
        )));
    }
    let total = transpose_invariant_sum(p);
    if libm::fabs(total - 1.0) > 1e-9 {
        return Err(Error::InvalidDistribution(alloc::format!(
            "entries sum to {total}, expected 1"
        )));
    }
    let (rows, cols) = marginals(p);
    let ln_r: Vec<f64> = rows.iter().map(|&v| ln_clamped(v)).collect();
    let ln_c: Vec<f64> = cols.iter().map(|&v| ln_clamped(v)).collect();
    let w = alpha + 1.0;
    let term = |d: usize, e: usize| {
        let v = p.get(d, e);
        v * ln_clamped(v) - w * v * (ln_r[d] + ln_c[e])
    };
    let (r, c) = p.shape();
    let mut s = 0.0;
    if r == c {
        for d in 0..r {
            s += term(d, d);
            for e in d + 1..r {
                s += term(d, e) + term(e, d);
            }
        }
    } else {
        for d in 0..r {
            for e in 0..c {
                s += term(d, e);
            }
        }
    }
    Ok(-s)
}

/// Gradients for every parameter in a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self {
            grads: store
                .ids()
                .map(|id| {
                    let (r, c) = store.get(id).shape();
                    Tensor::zeros(r, c)
                })
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn as_slice(&self) -> &[Tensor] {
        &self.grads
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().all(Tensor::is_finite)
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            a.add_assign(b);
        }
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(t) => t.add_assign(&g),
        None => *slot = Some(g),
    }
}

/// Reverse pass from the scalar node `loss`.
pub fn backward(graph: &Graph, loss: NodeId, store: &ParamStore) -> Result<Gradients> {
    let lv = graph.value(loss);
    if lv.shape() != (1, 1) {
        return Err(Error::NonScalarLoss {
            rows: lv.rows(),
            cols: lv.cols(),
        });
    }
    let mut out = Gradients::zeros_like(store);
    let mut grads: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
    grads[loss.0] = Some(Tensor::scalar(1.0));

    for idx in (0..=loss.0).rev() {
        let Some(g) = grads[idx].take() else { continue };
        let node = &graph.nodes[idx];
        let val = |id: NodeId| &graph.nodes[id.0].value;
        match &node.op {
            Op::Constant => {}
            Op::Param(pid) => out.grads[pid.0].add_assign(&g),
            Op::Affine(x, w, b) => {
                let (xv, wv) = (val(*x), val(*w));
                accumulate(&mut grads[x.0], kernels::matmul(&g, &wv.transpose())?);
                accumulate(&mut grads[w.0], kernels::matmul(&xv.transpose(), &g)?);
                let mut db = Tensor::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (s, &v) in db.data_mut().iter_mut().zip(g.row(r)) {
                        *s += v;
                    }
                }
                accumulate(&mut grads[b.0], db);
            }
            Op::Sigmoid(x) => {
                let y = &node.value;
                accumulate(&mut grads[x.0], g.zip_map(y, |gv, yv| gv * yv * (1.0 - yv))?);
            }
            Op::Relu(x) => {
                let xv = val(*x);
                accumulate(
                    &mut grads[x.0],
                    g.zip_map(xv, |gv, v| if v > 0.0 { gv } else { 0.0 })?,
                );
            }
            Op::SoftmaxRows(x) => {
                let y = &node.value;
                let mut dx = Tensor::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((o, &yv), &gv) in dx.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *o = yv * (gv - dot);
                    }
                }
                accumulate(&mut grads[x.0], dx);
            }
            Op::Dropout(x, mask) => {
                accumulate(&mut grads[x.0], g.zip_map(mask, |a, m| a * m)?);
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                saved,
            } => {
                let gv = val(*gamma);
                let (n, d) = g.shape();
                let xhat = &saved.xhat;
                let mut dgamma = Tensor::zeros(1, d);
                let mut dbeta = Tensor::zeros(1, d);
                for r in 0..n {
                    for c in 0..d {
                        dgamma.data_mut()[c] += g.get(r, c) * xhat.get(r, c);
                        dbeta.data_mut()[c] += g.get(r, c);
                    }
                }
                let dx = match saved.mode {
                    Mode::Eval => {
                        Tensor::from_fn(n, d, |r, c| g.get(r, c) * gv.get(0, c) * saved.inv_std[c])
                    }
                    Mode::Train => {
                        let nf = n as f64;
                        let mut sum_dxhat = vec![0.0; d];
                        let mut sum_dxhat_xhat = vec![0.0; d];
                        for r in 0..n {
                            for c in 0..d {
                                let dxh = g.get(r, c) * gv.get(0, c);
                                sum_dxhat[c] += dxh;
                                sum_dxhat_xhat[c] += dxh * xhat.get(r, c);
                            }
                        }
                        Tensor::from_fn(n, d, |r, c| {
                            let dxh = g.get(r, c) * gv.get(0, c);
                            saved.inv_std[c] / nf
                                * (nf * dxh - sum_dxhat[c] - xhat.get(r, c) * sum_dxhat_xhat[c])
                        })
                    }
                };
                accumulate(&mut grads[x.0], dx);
                accumulate(&mut grads[gamma.0], dgamma);
                accumulate(&mut grads[beta.0], dbeta);
            }
            Op::Mul(a, b) => {
                accumulate(&mut grads[a.0], g.zip_map(val(*b), |x, y| x * y)?);
                accumulate(&mut grads[b.0], g.zip_map(val(*a), |x, y| x * y)?);
            }
            Op::MulColumn(a, s) => {
                let (av, sv) = (val(*a), val(*s));
                let da = Tensor::from_fn(g.rows(), g.cols(), |r, c| g.get(r, c) * sv.get(r, 0));
                let ds = Tensor::from_fn(g.rows(), 1, |r, _| {
                    g.row(r).iter().zip(av.row(r)).map(|(x, y)| x * y).sum()
                });
                accumulate(&mut grads[a.0], da);
                accumulate(&mut grads[s.0], ds);
            }
            Op::Add(a, b) => {
                accumulate(&mut grads[a.0], g.clone());
                accumulate(&mut grads[b.0], g);
            }
            Op::Sub(a, b) => {
                accumulate(&mut grads[b.0], g.map(|v| -v));
                accumulate(&mut grads[a.0], g);
            }
            Op::Scale(a, f) => {
                let f = *f;
                accumulate(&mut grads[a.0], g.map(|v| v * f));
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for p in parts {
                    let w = val(*p).cols();
                    let cols: Vec<usize> = (offset..offset + w).collect();
                    accumulate(&mut grads[p.0], g.select_cols(&cols));
                    offset += w;
                }
            }
            Op::GatherRows(a, indices) => {
                let av = val(*a);
                let mut da = Tensor::zeros(av.rows(), av.cols());
                for (r, &i) in indices.iter().enumerate() {
                    for (o, &v) in da.row_mut(i).iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                accumulate(&mut grads[a.0], da);
            }
            Op::RowCombine { parts, rows } => {
                let mut dparts: Vec<Tensor> = parts
                    .iter()
                    .map(|p| {
                        let (r, c) = val(*p).shape();
                        Tensor::zeros(r, c)
                    })
                    .collect();
                for (r, sources) in rows.iter().enumerate() {
                    for &(p, i, w) in sources {
                        let dst = dparts[p as usize].row_mut(i as usize);
                        for (o, &v) in dst.iter_mut().zip(g.row(r)) {
                            *o += w * v;
                        }
                    }
                }
                for (p, dp) in parts.iter().zip(dparts) {
                    accumulate(&mut grads[p.0], dp);
                }
            }
            Op::RowSum(a) => {
                let av = val(*a);
                accumulate(
                    &mut grads[a.0],
                    Tensor::from_fn(av.rows(), av.cols(), |r, _| g.get(r, 0)),
                );
            }
            Op::Sum(a) => {
                let (r, c) = val(*a).shape();
                accumulate(&mut grads[a.0], Tensor::filled(r, c, g.item()));
            }
            Op::JointDistribution { a, b, total } => {
                let (av, bv) = (val(*a), val(*b));
                let p = &node.value;
                // P = R / s with s = sum(R): dR = (G - <G, P>) / s.
                let gp: f64 = g.data().iter().zip(p.data()).map(|(x, y)| x * y).sum();
                let inv_n = 1.0 / av.rows() as f64;
                let graw = g.map(|v| (v - gp) / total * inv_n);
                // R = A^T B / N.
                accumulate(&mut grads[a.0], kernels::matmul(bv, &graw.transpose())?);
                accumulate(&mut grads[b.0], kernels::matmul(av, &graw)?);
            }
            Op::ContrastivePair { p, alpha } => {
                let pv = val(*p);
                let (rows, cols) = marginals(pv);
                let ind = |x: f64| if x > LOG_EPS { 1.0 } else { 0.0 };
                let w = alpha + 1.0;
                let scale = g.item();
                let dp = Tensor::from_fn(pv.rows(), pv.cols(), |d, e| {
                    let v = pv.get(d, e);
                    let inner = ln_clamped(v) + ind(v)
                        - w * (ln_clamped(rows[d]) + ind(rows[d]))
                        - w * (ln_clamped(cols[e]) + ind(cols[e]));
                    -scale * inner
                });
                accumulate(&mut grads[p.0], dp);
            }
            Op::NllSum { probs, labels } => {
                let pv = val(*probs);
                let scale = g.item();
                let mut dp = Tensor::zeros(pv.rows(), pv.cols());
                for (r, &y) in labels.iter().enumerate() {
                    let v = pv.get(r, y);
                    if v > LOG_EPS {
                        dp.set(r, y, -scale / v);
                    }
                }
                accumulate(&mut grads[probs.0], dp);
            }
        }
    }
    Ok(out)
}
