//! The four loss terms, as graph builders and as eager functions.

use alloc::string::ToString;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{LossWeights, Reduction};
use crate::data::Mask;
use crate::error::{Error, Result};
use crate::numerics::{softmax_rows, Graph, Mode, NodeId, Tensor};

/// Values of each loss term and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_clf: f64,
    pub l_al: f64,
    pub l_co: f64,
    pub l_cl: f64,
    pub total: f64,
}

/// Combines the four terms as
/// `l_clf + lambda_al l_al + lambda_co l_co + lambda_cl l_cl`.
pub fn total_loss(
    l_clf: f64,
    l_al: f64,
    l_co: f64,
    l_cl: f64,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    for (name, v) in [("l_clf", l_clf), ("l_al", l_al), ("l_co", l_co), ("l_cl", l_cl)] {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                term: name.to_string(),
            });
        }
    }
    let total =
        l_clf + l_al * weights.lambda_al + l_co * weights.lambda_co + l_cl * weights.lambda_cl;
    Ok(LossBreakdown {
        l_clf,
        l_al,
        l_co,
        l_cl,
        total,
    })
}

/// Row positions of each subject inside a view's observed-rows tensor.
pub(crate) type Positions = [Vec<Option<usize>>];

fn pair_rows(positions: &Positions, joint: &[usize], view: usize) -> Vec<usize> {
    joint
        .iter()
        .map(|&j| positions[view][j].expect("jointly observed subject has a row"))
        .collect()
}

fn sum_nodes(g: &mut Graph, nodes: &[NodeId]) -> Result<Option<NodeId>> {
    let Some((&first, rest)) = nodes.split_first() else {
        return Ok(None);
    };
    let mut acc = first;
    for &n in rest {
        acc = g.add(acc, n)?;
    }
    Ok(Some(acc))
}

/// Mean (or summed) negative log-likelihood of the fused prediction.
pub(crate) fn graph_classification(
    g: &mut Graph,
    yhat: NodeId,
    labels: &[usize],
    reduction: Reduction,
) -> Result<NodeId> {
    let nll = g.nll_sum(yhat, labels)?;
    Ok(match reduction {
        Reduction::Mean if !labels.is_empty() => g.scale(nll, 1.0 / labels.len() as f64),
        _ => nll,
    })
}

/// Per-view confidence matching plus auxiliary negative log-likelihood,
/// averaged over the subjects that observe the view and summed over views.
pub(crate) fn graph_auxiliary(
    g: &mut Graph,
    matt: &[NodeId],
    yhat: &[NodeId],
    labels: &[Vec<usize>],
    reduction: Reduction,
    targets: Option<&[Tensor]>,
) -> Result<Option<NodeId>> {
    let mut terms = Vec::new();
    for (i, ((&a, &y), lab)) in matt.iter().zip(yhat).zip(labels).enumerate() {
        if lab.is_empty() {
            continue;
        }
        // The confidence target carries no gradient.
        let target = match targets {
            Some(t) => t[i].clone(),
            None => g.value(y).max_rows(),
        };
        let target = g.constant(target);
        let diff = g.sub(a, target)?;
        let sq = g.mul(diff, diff)?;
        let sq = g.sum(sq);
        let nll = g.nll_sum(y, lab)?;
        let term = g.add(sq, nll)?;
        terms.push(match reduction {
            Reduction::Mean => g.scale(term, 1.0 / lab.len() as f64),
            Reduction::PaperSum => term,
        });
    }
    sum_nodes(g, &terms)
}

/// Squared cross-view prediction error summed over subjects, then over
/// ordered pairs `(target, source)` for each subject, restricted to subjects
/// observing both views. `preds[i][k]` holds predictions of view `i` from
/// the observed rows of view `k`. With [`Reduction::Mean`] each pair's
/// subject sum is divided by the pair's jointly observed count.
pub(crate) fn graph_cross_omics(
    g: &mut Graph,
    latents: &[NodeId],
    preds: &[Vec<Option<NodeId>>],
    positions: &Positions,
    mask: &Mask,
    reduction: Reduction,
) -> Result<Option<NodeId>> {
    let m = latents.len();
    let n = mask.subjects();
    let mut columns = Vec::new();
    for i in 0..m {
        for k in 0..m {
            if i == k {
                continue;
            }
            let joint = mask.jointly_observed(i, k);
            if joint.is_empty() {
                continue;
            }
            let Some(pred) = preds[i][k] else { continue };
            let a = g.gather_rows(pred, &pair_rows(positions, &joint, k));
            let b = g.gather_rows(latents[i], &pair_rows(positions, &joint, i));
            let diff = g.sub(a, b)?;
            let sq = g.mul(diff, diff)?;
            let per_subject = g.row_sum(sq);
            let w = match reduction {
                Reduction::Mean => 1.0 / joint.len() as f64,
                Reduction::PaperSum => 1.0,
            };
            let mut rows: Vec<Vec<(usize, usize, f64)>> = (0..n).map(|_| Vec::new()).collect();
            for (r, &j) in joint.iter().enumerate() {
                rows[j].push((0, r, w));
            }
            columns.push(g.row_combine(&[per_subject], rows, 1)?);
        }
    }
    if columns.is_empty() {
        return Ok(None);
    }
    let table = g.concat_cols(&columns)?;
    let per_subject = g.row_sum(table);
    Ok(Some(g.sum(per_subject)))
}

/// Contrastive term summed over ordered view pairs with at least two
/// jointly observed subjects.
pub(crate) fn graph_contrastive(
    g: &mut Graph,
    latents: &[NodeId],
    positions: &Positions,
    mask: &Mask,
    alpha: f64,
) -> Result<Option<NodeId>> {
    let m = latents.len();
    let mut terms = Vec::new();
    for i in 0..m {
        for k in 0..m {
            if i == k {
                continue;
            }
            let joint = mask.jointly_observed(i, k);
            if joint.len() < 2 {
                continue;
            }
            let a = g.gather_rows(latents[i], &pair_rows(positions, &joint, i));
            let b = g.gather_rows(latents[k], &pair_rows(positions, &joint, k));
            let a = g.softmax_rows(a);
            let b = g.softmax_rows(b);
            let p = g.joint_distribution(a, b)?;
            if !g.value(p).is_finite() {
                return Err(Error::NonFinite {
                    term: "l_cl".to_string(),
                });
            }
            terms.push(g.contrastive_pair(p, alpha)?);
        }
    }
    sum_nodes(g, &terms)
}

/// Joint distribution of two latent matrices: rows are softmaxed over
/// latent coordinates, averaged as outer products over subjects, and
/// normalized to total mass one.
pub fn joint_distribution(zi: &Tensor, zk: &Tensor) -> Result<Tensor> {
    let mut g = Graph::new(Mode::Eval);
    let a = g.constant(softmax_rows(zi));
    let b = g.constant(softmax_rows(zk));
    let p = g.joint_distribution(a, b)?;
    Ok(g.value(p).clone())
}

/// `-sum P ln(P / (P_row^(alpha+1) P_col^(alpha+1)))` with logarithms of
/// values below `1e-12` clamped.
pub fn loss_contrastive_pair(p: &Tensor, alpha: f64) -> Result<f64> {
    crate::numerics::graph_contrastive_value(p, alpha)
}

fn positions_for(mask: &Mask) -> (Vec<Vec<usize>>, Vec<Vec<Option<usize>>>) {
    let rows: Vec<Vec<usize>> = (0..mask.views()).map(|i| mask.observed_subjects(i)).collect();
    let positions = rows
        .iter()
        .map(|r| {
            let mut pos = alloc::vec![None; mask.subjects()];
            for (p, &j) in r.iter().enumerate() {
                pos[j] = Some(p);
            }
            pos
        })
        .collect();
    (rows, positions)
}

/// Contrastive term over all ordered view pairs of full-height latent
/// matrices (rows of unobserved views are ignored).
pub fn loss_contrastive(latents: &[Tensor], mask: &Mask, alpha: f64) -> Result<f64> {
    check_views(latents, mask)?;
    let (rows, positions) = positions_for(mask);
    let mut g = Graph::new(Mode::Eval);
    let nodes: Vec<NodeId> = latents
        .iter()
        .zip(&rows)
        .map(|(z, r)| g.constant(z.gather_rows(r)))
        .collect();
    Ok(graph_contrastive(&mut g, &nodes, &positions, mask, alpha)?
        .map_or(0.0, |n| g.value(n).item()))
}

/// Cross-entropy of class probabilities against integer labels.
pub fn loss_classification(yhat: &Tensor, labels: &[usize], reduction: Reduction) -> Result<f64> {
    let mut g = Graph::new(Mode::Eval);
    let y = g.constant(yhat.clone());
    let l = graph_classification(&mut g, y, labels, reduction)?;
    Ok(g.value(l).item())
}

/// Auxiliary term from full-height per-view attention columns (`N x 1`) and
/// per-view class probabilities (`N x C`); unobserved rows are ignored.
pub fn loss_auxiliary(
    matt: &[Tensor],
    yhat: &[Tensor],
    labels: &[usize],
    mask: &Mask,
    reduction: Reduction,
) -> Result<f64> {
    if matt.len() != mask.views() || yhat.len() != mask.views() {
        return Err(Error::LengthMismatch {
            left: mask.views(),
            right: matt.len().min(yhat.len()),
        });
    }
    if labels.len() != mask.subjects() {
        return Err(Error::LengthMismatch {
            left: mask.subjects(),
            right: labels.len(),
        });
    }
    let mut g = Graph::new(Mode::Eval);
    let mut a_nodes = Vec::new();
    let mut y_nodes = Vec::new();
    let mut lab = Vec::new();
    for i in 0..mask.views() {
        let rows = mask.observed_subjects(i);
        a_nodes.push(g.constant(matt[i].gather_rows(&rows)));
        y_nodes.push(g.constant(yhat[i].gather_rows(&rows)));
        lab.push(rows.iter().map(|&j| labels[j]).collect());
    }
    Ok(graph_auxiliary(&mut g, &a_nodes, &y_nodes, &lab, reduction, None)?
        .map_or(0.0, |n| g.value(n).item()))
}

pub(crate) fn check_views(latents: &[Tensor], mask: &Mask) -> Result<()> {
    if latents.len() != mask.views() {
        return Err(Error::LengthMismatch {
            left: mask.views(),
            right: latents.len(),
        });
    }
    for z in latents {
        if z.rows() != mask.subjects() {
            return Err(Error::Shape {
                op: "latents vs mask",
                lhs: z.shape(),
                rhs: (mask.subjects(), mask.views()),
            });
        }
    }
    Ok(())
}

pub(crate) fn positions(mask: &Mask) -> (Vec<Vec<usize>>, Vec<Vec<Option<usize>>>) {
    positions_for(mask)
}
