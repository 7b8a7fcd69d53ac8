//! Object assignment between a ground-truth and a predicted graph, and
//! strict one-to-one relation matching on top of it.

use serde::{Deserialize, Serialize};

use crate::assignment::{hungarian, maximum_matching, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::{giou, iou, l1_box};
use crate::graph::{Relation, SceneGraph, FRAME_HEIGHT, FRAME_WIDTH};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig<T> {
    /// Weight of the label-mismatch term of the assignment cost.
    pub lambda_s: T,
    /// Weight of the `1 - GIoU` term.
    pub lambda_g: T,
    /// Weight of the normalized L1 term.
    pub lambda_l: T,
    pub iou_threshold: T,
    pub epsilon: T,
    pub frame_width: T,
    pub frame_height: T,
    /// Require IoU >= threshold (besides label equality) for an assigned
    /// pair to count as a matched object.
    pub object_iou_gate: bool,
}

impl<T: Scalar> Default for MatchConfig<T> {
    fn default() -> Self {
        Self {
            lambda_s: T::one(),
            lambda_g: T::one(),
            lambda_l: T::one(),
            iou_threshold: T::lit(0.5),
            epsilon: T::lit(1e-6),
            frame_width: T::lit(FRAME_WIDTH),
            frame_height: T::lit(FRAME_HEIGHT),
            object_iou_gate: true,
        }
    }
}

impl<T: Scalar> MatchConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [self.lambda_s, self.lambda_g, self.lambda_l];
        if nonneg.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::InvalidConfig(
                "cost weights must be finite and non-negative".into(),
            ));
        }
        if !(self.iou_threshold >= T::zero() && self.iou_threshold <= T::one()) {
            return Err(Error::InvalidConfig(
                "iou_threshold must lie in [0, 1]".into(),
            ));
        }
        if self.epsilon.is_nan() || self.epsilon <= T::zero() || !self.epsilon.is_finite() {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        if !(self.frame_width > T::zero() && self.frame_height > T::zero()) {
            return Err(Error::InvalidConfig("frame size must be positive".into()));
        }
        Ok(())
    }
}

/// Scores of one assigned (ground truth, prediction) object pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairScore<T> {
    pub gt: usize,
    pub pred: usize,
    /// Exact label equality as 0 or 1.
    pub similarity: T,
    pub iou: T,
    pub giou: T,
    pub l1: T,
    pub cost: T,
    pub matched: bool,
}

/// Optimal object assignment plus matched counts. Indices are positions in
/// the graphs' object lists.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult<T> {
    pub assignment: Vec<(usize, usize)>,
    pub per_pair: Vec<PairScore<T>>,
    pub matched_objects: usize,
    pub matched_relations: usize,
    pub relation_pairs: Vec<(usize, usize)>,
    pub total_cost: T,
}

impl<T: Scalar> MatchResult<T> {
    /// Predicted position assigned to ground-truth position `gt`, if any.
    pub fn pred_for(&self, gt: usize) -> Option<usize> {
        self.assignment
            .iter()
            .find(|(g, _)| *g == gt)
            .map(|(_, p)| *p)
    }
}

/// Assigns predicted objects to ground-truth objects minimizing
/// `λs(1 - sim) + λg(1 - GIoU) + λl·L1`, where `sim` is exact label
/// equality and L1 uses frame-normalized coordinates.
pub fn match_objects<T: Scalar>(
    gt: &SceneGraph<T>,
    pred: &SceneGraph<T>,
    cfg: &MatchConfig<T>,
) -> Result<MatchResult<T>> {
    let pair = |i: usize, j: usize| {
        let (a, b) = (&gt.objects[i], &pred.objects[j]);
        let similarity = if a.label == b.label {
            T::one()
        } else {
            T::zero()
        };
        let g = giou(&a.bbox, &b.bbox);
        let l1 = l1_box(&a.bbox, &b.bbox, cfg.frame_width, cfg.frame_height);
        let cost = cfg.lambda_s * (T::one() - similarity)
            + cfg.lambda_g * (T::one() - g)
            + cfg.lambda_l * l1;
        (similarity, g, l1, cost)
    };
    let cost = CostMatrix::from_fn(gt.objects.len(), pred.objects.len(), |i, j| pair(i, j).3);
    let solved = hungarian(&cost)?;

    let per_pair: Vec<PairScore<T>> = solved
        .pairs
        .iter()
        .map(|&(i, j)| {
            let (similarity, g, l1, cost) = pair(i, j);
            let iou = iou(&gt.objects[i].bbox, &pred.objects[j].bbox);
            let gate = !cfg.object_iou_gate || iou >= cfg.iou_threshold;
            PairScore {
                gt: i,
                pred: j,
                similarity,
                iou,
                giou: g,
                l1,
                cost,
                matched: similarity == T::one() && gate,
            }
        })
        .collect();
    let matched_objects = per_pair.iter().filter(|p| p.matched).count();
    Ok(MatchResult {
        assignment: solved.pairs,
        per_pair,
        matched_objects,
        matched_relations: 0,
        relation_pairs: Vec::new(),
        total_cost: solved.cost,
    })
}

/// How relation endpoints are compared.
#[derive(Debug, Clone, Copy)]
pub enum EndpointRule<'a, T> {
    /// Endpoint labels equal and endpoint boxes overlap with IoU at or above
    /// the threshold, independently of the object assignment.
    BoxIou,
    /// Each predicted endpoint must be the object assigned to the
    /// corresponding ground-truth endpoint and that pair must be matched.
    Aligned(&'a MatchResult<T>),
}

/// Strict one-to-one relation matching: a predicted relation is eligible for
/// a ground-truth relation when predicates (and groups) agree and both
/// endpoints agree under `rule`; the result is a maximum matching of the
/// eligibility graph. Returns `(gt_relation, pred_relation)` pairs.
pub fn match_relations<T: Scalar>(
    gt: &SceneGraph<T>,
    pred: &SceneGraph<T>,
    rule: EndpointRule<'_, T>,
    cfg: &MatchConfig<T>,
) -> Vec<(usize, usize)> {
    let adj = relation_eligibility(gt, pred, rule, cfg, |g, p| g.same_predicate(p));
    maximum_matching(&adj, pred.relations.len())
}

/// Eligibility lists (gt relation -> predicted relations) for a custom
/// predicate comparison.
pub fn relation_eligibility<T: Scalar>(
    gt: &SceneGraph<T>,
    pred: &SceneGraph<T>,
    rule: EndpointRule<'_, T>,
    cfg: &MatchConfig<T>,
    mut predicate_ok: impl FnMut(&Relation, &Relation) -> bool,
) -> Vec<Vec<usize>> {
    let gt_idx = gt.id_index();
    let pred_idx = pred.id_index();
    let matched_pred: Vec<Option<usize>> = match rule {
        EndpointRule::Aligned(m) => {
            let mut by_gt = vec![None; gt.objects.len()];
            for p in m.per_pair.iter().filter(|p| p.matched) {
                by_gt[p.gt] = Some(p.pred);
            }
            by_gt
        }
        EndpointRule::BoxIou => Vec::new(),
    };
    let endpoint_ok = |g: usize, p: usize| -> bool {
        match rule {
            EndpointRule::BoxIou => {
                let (a, b) = (&gt.objects[g], &pred.objects[p]);
                a.label == b.label && iou(&a.bbox, &b.bbox) >= cfg.iou_threshold
            }
            EndpointRule::Aligned(_) => matched_pred[g] == Some(p),
        }
    };

    gt.relations
        .iter()
        .map(|gr| {
            let (Some(&gs), Some(&go)) = (gt_idx.get(&gr.subject_id), gt_idx.get(&gr.object_id))
            else {
                return Vec::new();
            };
            pred.relations
                .iter()
                .enumerate()
                .filter(|(_, pr)| {
                    let (Some(&ps), Some(&po)) =
                        (pred_idx.get(&pr.subject_id), pred_idx.get(&pr.object_id))
                    else {
                        return false;
                    };
                    endpoint_ok(gs, ps) && endpoint_ok(go, po) && predicate_ok(gr, pr)
                })
                .map(|(k, _)| k)
                .collect()
        })
        .collect()
}

/// Object assignment followed by relation matching with the box-IoU
/// endpoint rule; fills `matched_relations` and `relation_pairs`.
pub fn match_graphs<T: Scalar>(
    gt: &SceneGraph<T>,
    pred: &SceneGraph<T>,
    cfg: &MatchConfig<T>,
) -> Result<MatchResult<T>> {
    let mut m = match_objects(gt, pred, cfg)?;
    m.relation_pairs = match_relations(gt, pred, EndpointRule::BoxIou, cfg);
    m.matched_relations = m.relation_pairs.len();
    Ok(m)
}
