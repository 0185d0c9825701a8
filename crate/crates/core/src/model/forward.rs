//! Forward pass: attention gating, embedding, cross-view completion, fusion.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::loss::{self, LossBreakdown};
use super::{CompletionMode, LossToggles, LossWeights, Model, Reduction};
use crate::data::Mask;
use crate::error::{Error, Result};
use crate::numerics::{Graph, Mode, NodeId, RngStream, RunningStats, Tensor};

/// Where a subject's latent for a view came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Observed,
    Completed,
}

/// Eager output of one view's attention/embedding stack.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewOutput {
    pub fatt: Tensor,
    pub xhat: Tensor,
    pub matt: Tensor,
    pub zhat: Tensor,
    pub yhat: Tensor,
}

/// Per-view intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewCache {
    /// Subjects observing this view; the rows of `fatt`, `xhat`, `matt`
    /// and `yhat` follow this order.
    pub subjects: Vec<usize>,
    pub fatt: Tensor,
    pub xhat: Tensor,
    pub matt: Tensor,
    pub yhat: Tensor,
    /// Latents for every subject (`N x D`), observed or completed.
    pub zhat: Tensor,
    pub provenance: Vec<Provenance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub views: Vec<ViewCache>,
    pub fused: Tensor,
    pub yhat: Tensor,
}

impl ForwardCache {
    /// Per-view maximal auxiliary probability over observed subjects.
    pub fn confidence(&self) -> Vec<Tensor> {
        self.views.iter().map(|v| v.yhat.max_rows()).collect()
    }

    /// Mean per-coordinate variance of each view's observed latents; values
    /// near zero signal collapsed representations.
    pub fn latent_variance(&self) -> Vec<f64> {
        self.views
            .iter()
            .map(|v| {
                let rows: Vec<usize> = v
                    .provenance
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p == Provenance::Observed)
                    .map(|(j, _)| j)
                    .collect();
                column_variance(&v.zhat.gather_rows(&rows))
            })
            .collect()
    }
}

fn column_variance(z: &Tensor) -> f64 {
    let (n, d) = z.shape();
    if n == 0 || d == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for c in 0..d {
        let mean = (0..n).map(|r| z.get(r, c)).sum::<f64>() / n as f64;
        total += (0..n).map(|r| (z.get(r, c) - mean) * (z.get(r, c) - mean)).sum::<f64>()
            / n as f64;
    }
    total / d as f64
}

pub(crate) struct ViewNodes {
    pub fatt: NodeId,
    pub xhat: NodeId,
    pub matt: NodeId,
    pub zhat: NodeId,
    pub yhat: NodeId,
}

pub(crate) struct ForwardNodes {
    pub rows: Vec<Vec<usize>>,
    pub positions: Vec<Vec<Option<usize>>>,
    pub views: Vec<ViewNodes>,
    /// `preds[target][source]`, rows following `rows[source]`.
    pub preds: Vec<Vec<Option<NodeId>>>,
    pub completed: Vec<NodeId>,
    pub provenance: Vec<Vec<Provenance>>,
    pub fused: NodeId,
    pub yhat: NodeId,
}

/// Column-wise concatenation of per-view latents in view order.
pub fn fuse(latents: &[Tensor]) -> Result<Tensor> {
    let parts: Vec<&Tensor> = latents.iter().collect();
    Tensor::concat_cols(&parts)
}

/// Class probabilities and hard predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: Tensor,
    pub labels: Vec<usize>,
    pub cache: ForwardCache,
}

/// Loss weights and switches for one objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectiveConfig {
    pub weights: LossWeights,
    pub toggles: LossToggles,
    pub reduction: Reduction,
}

/// A recorded objective ready for [`crate::numerics::backward`].
#[derive(Debug)]
pub struct Objective {
    pub graph: Graph,
    pub total: NodeId,
    pub breakdown: LossBreakdown,
    pub cache: ForwardCache,
}

impl Model {
    fn check_inputs(&self, views: &[Tensor], mask: &Mask) -> Result<()> {
        let m = self.config.num_views();
        if views.len() != m || mask.views() != m {
            return Err(Error::LengthMismatch {
                left: m,
                right: views.len(),
            });
        }
        for (x, &dim) in views.iter().zip(&self.config.input_dims) {
            if x.rows() != mask.subjects() || x.cols() != dim {
                return Err(Error::Shape {
                    op: "view input",
                    lhs: x.shape(),
                    rhs: (mask.subjects(), dim),
                });
            }
        }
        if let Some(subject) = mask.first_empty_subject() {
            return Err(Error::InvalidSubject { subject });
        }
        Ok(())
    }

    pub(crate) fn view_nodes(
        &self,
        g: &mut Graph,
        view: usize,
        x: NodeId,
        rng: &mut RngStream,
    ) -> Result<ViewNodes> {
        let layers = self.views[view];
        let p = &self.params;
        let fa = layers.feature_attention.apply(g, p, x)?;
        let fatt = g.sigmoid(fa);
        let gated = g.mul(x, fatt)?;
        let e = layers.embed.apply(g, p, gated)?;
        let e = g.relu(e);
        let xhat = g.dropout(e, self.config.dropout, rng)?;
        let va = layers.view_attention.apply(g, p, xhat)?;
        let matt = g.sigmoid(va);
        let zhat = g.mul_column(xhat, matt)?;
        let logits = layers.aux_classifier.apply(g, p, zhat)?;
        let yhat = g.softmax_rows(logits);
        Ok(ViewNodes {
            fatt,
            xhat,
            matt,
            zhat,
            yhat,
        })
    }

    pub(crate) fn encode_nodes(
        &self,
        g: &mut Graph,
        stats: &mut [RunningStats],
        source: usize,
        z: NodeId,
    ) -> Result<NodeId> {
        let enc = self.encoders[source];
        let mode = g.mode();
        let h = enc.fc1.apply(g, &self.params, z)?;
        let h = self.bn_apply(g, stats, &enc.bn, h, mode)?;
        let h = g.relu(h);
        let h = enc.fc2.apply(g, &self.params, h)?;
        Ok(g.relu(h))
    }

    pub(crate) fn decode_nodes(
        &self,
        g: &mut Graph,
        stats: &mut [RunningStats],
        target: usize,
        h: NodeId,
    ) -> Result<NodeId> {
        let dec = self.decoders[target];
        let mode = g.mode();
        let h = dec.fc1.apply(g, &self.params, h)?;
        let h = self.bn_apply(g, stats, &dec.bn, h, mode)?;
        let h = g.relu(h);
        dec.fc2.apply(g, &self.params, h)
    }

    /// Records the whole forward pass. In train mode every ordered view pair
    /// is translated so batch-norm statistics see the same batches no matter
    /// which loss terms are active; in eval mode only the pairs needed for
    /// completion are computed.
    pub(crate) fn forward_nodes(
        &self,
        g: &mut Graph,
        stats: &mut [RunningStats],
        views: &[Tensor],
        mask: &Mask,
        rng: &mut RngStream,
    ) -> Result<ForwardNodes> {
        self.check_inputs(views, mask)?;
        let m = self.config.num_views();
        let n = mask.subjects();
        let d = self.config.embed_dim();
        let (rows, positions) = loss::positions(mask);

        let mut view_nodes = Vec::with_capacity(m);
        for (i, x) in views.iter().enumerate() {
            let x = g.constant(x.gather_rows(&rows[i]));
            view_nodes.push(self.view_nodes(g, i, x, rng)?);
        }

        let cross_view = self.config.completion == CompletionMode::CrossView;
        let needed = |i: usize, k: usize| {
            cross_view && (0..n).any(|j| !mask.observed(j, i) && mask.observed(j, k))
        };
        let all_pairs = g.mode() == Mode::Train;
        let mut preds = vec![vec![None; m]; m];
        for k in 0..m {
            if rows[k].is_empty() {
                continue;
            }
            let targets: Vec<usize> = (0..m)
                .filter(|&i| i != k && (all_pairs || needed(i, k)))
                .collect();
            if targets.is_empty() {
                continue;
            }
            let h = self.encode_nodes(g, stats, k, view_nodes[k].zhat)?;
            for i in targets {
                preds[i][k] = Some(self.decode_nodes(g, stats, i, h)?);
            }
        }

        let mut completed = Vec::with_capacity(m);
        let mut provenance = Vec::with_capacity(m);
        for i in 0..m {
            let sources: Vec<usize> = (0..m).filter(|&k| k != i && preds[i][k].is_some()).collect();
            let mut parts = vec![view_nodes[i].zhat];
            parts.extend(sources.iter().map(|&k| preds[i][k].unwrap()));
            let mut spec = Vec::with_capacity(n);
            let mut prov = Vec::with_capacity(n);
            for j in 0..n {
                if let Some(r) = positions[i][j] {
                    spec.push(vec![(0, r, 1.0)]);
                    prov.push(Provenance::Observed);
                    continue;
                }
                prov.push(Provenance::Completed);
                if !cross_view {
                    spec.push(Vec::new());
                    continue;
                }
                let observed: Vec<(usize, usize)> = sources
                    .iter()
                    .enumerate()
                    .filter_map(|(s, &k)| positions[k][j].map(|r| (s + 1, r)))
                    .collect();
                let w = 1.0 / observed.len() as f64;
                spec.push(observed.into_iter().map(|(p, r)| (p, r, w)).collect());
            }
            completed.push(g.row_combine(&parts, spec, d)?);
            provenance.push(prov);
        }

        let fused = g.concat_cols(&completed)?;
        let logits = self.classifier.apply(g, &self.params, fused)?;
        let yhat = g.softmax_rows(logits);
        Ok(ForwardNodes {
            rows,
            positions,
            views: view_nodes,
            preds,
            completed,
            provenance,
            fused,
            yhat,
        })
    }

    pub(crate) fn cache_from(&self, g: &Graph, f: &ForwardNodes) -> ForwardCache {
        let views = f
            .views
            .iter()
            .enumerate()
            .map(|(i, v)| ViewCache {
                subjects: f.rows[i].clone(),
                fatt: g.value(v.fatt).clone(),
                xhat: g.value(v.xhat).clone(),
                matt: g.value(v.matt).clone(),
                yhat: g.value(v.yhat).clone(),
                zhat: g.value(f.completed[i]).clone(),
                provenance: f.provenance[i].clone(),
            })
            .collect();
        ForwardCache {
            views,
            fused: g.value(f.fused).clone(),
            yhat: g.value(f.yhat).clone(),
        }
    }

    /// Runs `f` with the batch-norm statistics borrowed mutably in train
    /// mode, or on a scratch copy in eval mode.
    fn with_stats<T>(
        &mut self,
        mode: Mode,
        f: impl FnOnce(&Self, &mut [RunningStats]) -> Result<T>,
    ) -> Result<T> {
        match mode {
            Mode::Eval => {
                let mut scratch = self.bn_stats.clone();
                f(self, &mut scratch)
            }
            Mode::Train => {
                let mut stats = core::mem::take(&mut self.bn_stats);
                let out = f(self, &mut stats);
                self.bn_stats = stats;
                out
            }
        }
    }

    /// One view's attention-gated embedding and auxiliary prediction.
    pub fn forward_view(
        &self,
        view: usize,
        x: &Tensor,
        mode: Mode,
        rng: &mut RngStream,
    ) -> Result<ViewOutput> {
        if view >= self.config.num_views() {
            return Err(Error::InvalidConfig(alloc::format!("no view {view}")));
        }
        let dim = self.config.input_dims[view];
        if x.cols() != dim {
            return Err(Error::Shape {
                op: "forward_view",
                lhs: x.shape(),
                rhs: (x.rows(), dim),
            });
        }
        let mut g = Graph::new(mode);
        let xn = g.constant(x.clone());
        let v = self.view_nodes(&mut g, view, xn, rng)?;
        Ok(ViewOutput {
            fatt: g.value(v.fatt).clone(),
            xhat: g.value(v.xhat).clone(),
            matt: g.value(v.matt).clone(),
            zhat: g.value(v.zhat).clone(),
            yhat: g.value(v.yhat).clone(),
        })
    }

    /// Translates latents of view `source` into the latent space of view
    /// `target` through the source encoder and the target decoder.
    pub fn cross_predict(
        &mut self,
        z: &Tensor,
        source: usize,
        target: usize,
        mode: Mode,
    ) -> Result<Tensor> {
        let m = self.config.num_views();
        if source == target || source >= m || target >= m {
            return Err(Error::InvalidPair {
                source_view: source,
                target_view: target,
            });
        }
        if z.cols() != self.config.embed_dim() {
            return Err(Error::Shape {
                op: "cross_predict",
                lhs: z.shape(),
                rhs: (z.rows(), self.config.embed_dim()),
            });
        }
        self.with_stats(mode, |model, stats| {
            let mut g = Graph::new(mode);
            let zn = g.constant(z.clone());
            let h = model.encode_nodes(&mut g, stats, source, zn)?;
            let out = model.decode_nodes(&mut g, stats, target, h)?;
            Ok(g.value(out).clone())
        })
    }

    /// The encoder half of [`Model::cross_predict`].
    pub fn encode(&mut self, z: &Tensor, source: usize, mode: Mode) -> Result<Tensor> {
        self.with_stats(mode, |model, stats| {
            let mut g = Graph::new(mode);
            let zn = g.constant(z.clone());
            let h = model.encode_nodes(&mut g, stats, source, zn)?;
            Ok(g.value(h).clone())
        })
    }

    /// Completes one subject's latents: `latents[i]` is `Some(1 x D)` for an
    /// observed view and `None` for a missing one. Missing views receive the
    /// mean of the cross-view predictions from every observed view.
    pub fn complete_missing(
        &mut self,
        latents: &[Option<Tensor>],
        mode: Mode,
    ) -> Result<Vec<(Tensor, Provenance)>> {
        let m = self.config.num_views();
        if latents.len() != m {
            return Err(Error::LengthMismatch {
                left: m,
                right: latents.len(),
            });
        }
        let observed: Vec<usize> = (0..m).filter(|&i| latents[i].is_some()).collect();
        if observed.is_empty() {
            return Err(Error::InvalidSubject { subject: 0 });
        }
        let d = self.config.embed_dim();
        let mut out = Vec::with_capacity(m);
        for i in 0..m {
            if let Some(z) = &latents[i] {
                out.push((z.clone(), Provenance::Observed));
                continue;
            }
            match self.config.completion {
                CompletionMode::ZeroFill => out.push((Tensor::zeros(1, d), Provenance::Completed)),
                CompletionMode::CrossView => {
                    let w = 1.0 / observed.len() as f64;
                    let mut acc = Tensor::zeros(1, d);
                    for &k in &observed {
                        let z = latents[k].as_ref().unwrap();
                        let pred = self.cross_predict(z, k, i, mode)?;
                        for (a, &p) in acc.data_mut().iter_mut().zip(pred.data()) {
                            *a += w * p;
                        }
                    }
                    out.push((acc, Provenance::Completed));
                }
            }
        }
        Ok(out)
    }

    /// Cross-view reconstruction loss for given full-height latents
    /// (`N x D` per view; rows of unobserved views are ignored).
    pub fn loss_cross_omics(&mut self, latents: &[Tensor], mask: &Mask, mode: Mode) -> Result<f64> {
        loss::check_views(latents, mask)?;
        let m = self.config.num_views();
        if latents.len() != m {
            return Err(Error::LengthMismatch {
                left: m,
                right: latents.len(),
            });
        }
        let (rows, positions) = loss::positions(mask);
        self.with_stats(mode, |model, stats| {
            let mut g = Graph::new(mode);
            let nodes: Vec<NodeId> = latents
                .iter()
                .zip(&rows)
                .map(|(z, r)| g.constant(z.gather_rows(r)))
                .collect();
            let mut preds = vec![vec![None; m]; m];
            for k in 0..m {
                if rows[k].is_empty() {
                    continue;
                }
                let h = model.encode_nodes(&mut g, stats, k, nodes[k])?;
                for (i, row) in preds.iter_mut().enumerate() {
                    if i != k {
                        row[k] = Some(model.decode_nodes(&mut g, stats, i, h)?);
                    }
                }
            }
            Ok(
                loss::graph_cross_omics(&mut g, &nodes, &preds, &positions, mask, Reduction::PaperSum)?
                    .map_or(0.0, |n| g.value(n).item()),
            )
        })
    }

    /// Eval-mode prediction with missing views completed.
    pub fn predict(&self, views: &[Tensor], mask: &Mask) -> Result<Prediction> {
        let mut stats = self.bn_stats.clone();
        let mut g = Graph::new(Mode::Eval);
        // Eval mode never draws from the stream.
        let mut rng = RngStream::new(0, "eval");
        let f = self.forward_nodes(&mut g, &mut stats, views, mask, &mut rng)?;
        let cache = self.cache_from(&g, &f);
        let probs = cache.yhat.clone();
        let labels = probs.argmax_rows();
        Ok(Prediction {
            probs,
            labels,
            cache,
        })
    }

    /// Records the full training objective for one batch.
    pub fn objective(
        &mut self,
        views: &[Tensor],
        mask: &Mask,
        labels: &[usize],
        cfg: &ObjectiveConfig,
        mode: Mode,
        rng: &mut RngStream,
    ) -> Result<Objective> {
        self.objective_inner(views, mask, labels, cfg, mode, rng, None)
    }

    /// Like [`Model::objective`] but with the confidence targets of the
    /// auxiliary term pinned to `targets` (one column per view, rows in the
    /// order of [`ViewCache::subjects`]). Since those targets carry no
    /// gradient, this is the function whose derivative `backward` returns.
    #[allow(clippy::too_many_arguments)]
    pub fn objective_with_confidence(
        &mut self,
        views: &[Tensor],
        mask: &Mask,
        labels: &[usize],
        cfg: &ObjectiveConfig,
        mode: Mode,
        rng: &mut RngStream,
        targets: &[Tensor],
    ) -> Result<Objective> {
        let m = self.config.num_views();
        if targets.len() != m {
            return Err(Error::LengthMismatch {
                left: m,
                right: targets.len(),
            });
        }
        for (i, t) in targets.iter().enumerate() {
            let rows = mask.observed_subjects(i).len();
            if t.shape() != (rows, 1) {
                return Err(Error::Shape {
                    op: "confidence target",
                    lhs: t.shape(),
                    rhs: (rows, 1),
                });
            }
        }
        self.objective_inner(views, mask, labels, cfg, mode, rng, Some(targets))
    }

    #[allow(clippy::too_many_arguments)]
    fn objective_inner(
        &mut self,
        views: &[Tensor],
        mask: &Mask,
        labels: &[usize],
        cfg: &ObjectiveConfig,
        mode: Mode,
        rng: &mut RngStream,
        targets: Option<&[Tensor]>,
    ) -> Result<Objective> {
        if labels.len() != mask.subjects() {
            return Err(Error::LengthMismatch {
                left: mask.subjects(),
                right: labels.len(),
            });
        }
        let c = self.config.num_classes;
        if let Some(&label) = labels.iter().find(|&&y| y >= c) {
            return Err(Error::InvalidLabel { label, classes: c });
        }
        let w = cfg.weights;
        w.validate()?;
        self.with_stats(mode, |model, stats| {
            let mut g = Graph::new(mode);
            let f = model.forward_nodes(&mut g, stats, views, mask, rng)?;
            let clf = loss::graph_classification(&mut g, f.yhat, labels, cfg.reduction)?;
            let mut total = clf;
            let mut values = [g.value(clf).item(), 0.0, 0.0, 0.0];

            let mut add_term = |g: &mut Graph, node: Option<NodeId>, lambda: f64, slot: usize| {
                let node = match node {
                    Some(n) => n,
                    None => g.constant(Tensor::scalar(0.0)),
                };
                values[slot] = g.value(node).item();
                let scaled = g.scale(node, lambda);
                total = g.add(total, scaled)?;
                Ok::<(), Error>(())
            };

            if cfg.toggles.auxiliary {
                let matt: Vec<NodeId> = f.views.iter().map(|v| v.matt).collect();
                let yhat: Vec<NodeId> = f.views.iter().map(|v| v.yhat).collect();
                let lab: Vec<Vec<usize>> = f
                    .rows
                    .iter()
                    .map(|r| r.iter().map(|&j| labels[j]).collect())
                    .collect();
                let al = loss::graph_auxiliary(&mut g, &matt, &yhat, &lab, cfg.reduction, targets)?;
                add_term(&mut g, al, w.lambda_al, 1)?;
            }
            let latents: Vec<NodeId> = f.views.iter().map(|v| v.zhat).collect();
            if cfg.toggles.cross_omics {
                let co =
                    loss::graph_cross_omics(
                    &mut g,
                    &latents,
                    &f.preds,
                    &f.positions,
                    mask,
                    cfg.reduction,
                )?;
                add_term(&mut g, co, w.lambda_co, 2)?;
            }
            if cfg.toggles.contrastive {
                let cl = loss::graph_contrastive(&mut g, &latents, &f.positions, mask, w.alpha)?;
                add_term(&mut g, cl, w.lambda_cl, 3)?;
            }
            let breakdown = loss::total_loss(values[0], values[1], values[2], values[3], &w)?;
            let cache = model.cache_from(&g, &f);
            Ok(Objective {
                graph: g,
                total,
                breakdown,
                cache,
            })
        })
    }
}
