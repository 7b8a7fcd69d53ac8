//! Hallucination-aware graph reward for GRPO-style fine-tuning.
//!
//! ```text
//! total = mask · (format + obj_cls + obj_box + rel_recall
//!                 + rel_precision + rel_f1 − penalty_obj − penalty_rel)
//! ```
//!
//! `mask` is 1 only when the completion carries an answer block holding a
//! structurally valid TOON graph. Object terms come from the Hungarian
//! assignment, relation terms from strict one-to-one triplet matching, and
//! the penalties from the fraction of unmatched predicted objects/relations
//! raised to `alpha`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{extract_answer, ParseOutcome};
use crate::error::{Error, Result};
use crate::graph::{validate_graph, SceneGraph};
use crate::matching::{match_graphs, MatchConfig, MatchResult};
use crate::scalar::{guarded_ratio, harmonic, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights<T> {
    pub format: T,
    pub obj_cls: T,
    pub obj_box: T,
    pub rel_recall: T,
    pub rel_precision: T,
    pub rel_f1: T,
    pub obj_hallucination: T,
    pub rel_hallucination: T,
    pub alpha_obj: T,
    pub alpha_rel: T,
    /// Mixing weights of IoU and `exp(-L1)` inside the box term.
    pub lambda_iou: T,
    pub lambda_l1: T,
}

impl<T: Scalar> Default for RewardWeights<T> {
    fn default() -> Self {
        Self {
            format: T::lit(0.5),
            obj_cls: T::lit(1.5),
            obj_box: T::lit(1.5),
            rel_recall: T::lit(3.0),
            rel_precision: T::lit(1.0),
            rel_f1: T::lit(2.0),
            obj_hallucination: T::lit(1.0),
            rel_hallucination: T::lit(1.0),
            alpha_obj: T::lit(2.0),
            alpha_rel: T::lit(2.0),
            lambda_iou: T::one(),
            lambda_l1: T::one(),
        }
    }
}

impl<T: Scalar> RewardWeights<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.format,
            self.obj_cls,
            self.obj_box,
            self.rel_recall,
            self.rel_precision,
            self.rel_f1,
            self.obj_hallucination,
            self.rel_hallucination,
            self.lambda_iou,
            self.lambda_l1,
        ];
        if all.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::InvalidConfig(
                "reward weights must be finite and non-negative".into(),
            ));
        }
        if !(self.alpha_obj >= T::one() && self.alpha_rel >= T::one()) {
            return Err(Error::InvalidConfig(
                "penalty exponents must be >= 1".into(),
            ));
        }
        if self.lambda_iou + self.lambda_l1 <= T::zero() {
            return Err(Error::InvalidConfig(
                "lambda_iou + lambda_l1 must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Largest attainable total (every positive term at its weight).
    pub fn max_total(&self) -> T {
        self.format
            + self.obj_cls
            + self.obj_box
            + self.rel_recall
            + self.rel_precision
            + self.rel_f1
    }
}

/// Zero-weight monitoring signals.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardDiagnostics<T> {
    pub frac_no_rel: T,
    pub num_pred_objs: usize,
    pub num_pred_rels: usize,
    pub frac_invalid_rel: T,
    pub has_answer_tags: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown<T> {
    pub valid_mask: u8,
    pub format: T,
    pub obj_cls: T,
    pub obj_box: T,
    pub rel_recall: T,
    pub rel_precision: T,
    pub rel_f1: T,
    pub penalty_obj: T,
    pub penalty_rel: T,
    pub total: T,
    pub matched_objects: usize,
    pub matched_relations: usize,
    /// Whether matched objects had to pass the IoU threshold.
    pub object_iou_gate: bool,
    pub diagnostics: RewardDiagnostics<T>,
}

/// Object-list and relation-list sizes of both graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphSizes {
    pub gt_objects: usize,
    pub pred_objects: usize,
    pub gt_relations: usize,
    pub pred_relations: usize,
}

impl GraphSizes {
    pub fn of<T: Scalar>(gt: &SceneGraph<T>, pred: &SceneGraph<T>) -> Self {
        Self {
            gt_objects: gt.objects.len(),
            pred_objects: pred.objects.len(),
            gt_relations: gt.relations.len(),
            pred_relations: pred.relations.len(),
        }
    }
}

/// `w_cls · Σ sim / max(|V|, |V̂|)` over the assignment.
pub fn reward_obj_cls<T: Scalar>(m: &MatchResult<T>, sizes: GraphSizes, w_cls: T, eps: T) -> T {
    let sum: T = m.per_pair.iter().map(|p| p.similarity).sum();
    let den = T::from_count(sizes.gt_objects.max(sizes.pred_objects));
    w_cls * guarded_ratio(sum, den, eps)
}

/// `w_box / max(|V|, |V̂|) · Σ (λ_iou·IoU + λ_l1·exp(−L1)) / (λ_iou + λ_l1)`.
pub fn reward_obj_box<T: Scalar>(
    m: &MatchResult<T>,
    sizes: GraphSizes,
    w: &RewardWeights<T>,
    eps: T,
) -> T {
    let mix = w.lambda_iou + w.lambda_l1;
    let sum: T = m
        .per_pair
        .iter()
        .map(|p| (w.lambda_iou * p.iou + w.lambda_l1 * (-p.l1).exp()) / mix)
        .sum();
    let den = T::from_count(sizes.gt_objects.max(sizes.pred_objects));
    w.obj_box * guarded_ratio(sum, den, eps)
}

/// Relation recall, precision and F1 terms `(w_r·R, w_p·P, w_f1·F1)`.
///
/// F1 is `2PR/(P+R)`, defined as `0` when `P + R = 0`.
pub fn reward_relations<T: Scalar>(
    matched: usize,
    gt_relations: usize,
    pred_relations: usize,
    w: &RewardWeights<T>,
    eps: T,
) -> (T, T, T) {
    let m = T::from_count(matched);
    let recall = guarded_ratio(m, T::from_count(gt_relations), eps);
    let precision = guarded_ratio(m, T::from_count(pred_relations), eps);
    (
        w.rel_recall * recall,
        w.rel_precision * precision,
        w.rel_f1 * harmonic(precision, recall),
    )
}

fn power<T: Scalar>(base: T, alpha: T) -> T {
    if alpha.fract() == T::zero() && alpha.abs() <= T::lit(64.0) {
        base.powi(alpha.to_i32().unwrap_or(1))
    } else {
        base.powf(alpha)
    }
}

/// `(w_obj_h·((|V̂| − M_V)/max(|V̂|, ε))^α_obj, w_rel_h·((|Ê| − M_R)/max(|Ê|, ε))^α_rel)`.
pub fn hallucination_penalties<T: Scalar>(
    matched_objects: usize,
    matched_relations: usize,
    pred_objects: usize,
    pred_relations: usize,
    w: &RewardWeights<T>,
    eps: T,
) -> (T, T) {
    let frac = |pred: usize, matched: usize| {
        guarded_ratio(
            T::from_count(pred.saturating_sub(matched)),
            T::from_count(pred),
            eps,
        )
    };
    (
        w.obj_hallucination * power(frac(pred_objects, matched_objects), w.alpha_obj),
        w.rel_hallucination * power(frac(pred_relations, matched_relations), w.alpha_rel),
    )
}

fn diagnostics<T: Scalar>(outcome: &ParseOutcome<T>, eps: T) -> RewardDiagnostics<T> {
    let has_answer_tags = u8::from(outcome.has_answer_tags.unwrap_or(false));
    match &outcome.graph {
        Some(g) => {
            let invalid = validate_graph(g, None, false).invalid_relation_count();
            RewardDiagnostics {
                frac_no_rel: if g.relations.is_empty() {
                    T::one()
                } else {
                    T::zero()
                },
                num_pred_objs: g.objects.len(),
                num_pred_rels: g.relations.len(),
                frac_invalid_rel: guarded_ratio(
                    T::from_count(invalid),
                    T::from_count(g.relations.len()),
                    eps,
                ),
                has_answer_tags,
            }
        }
        None => RewardDiagnostics {
            frac_no_rel: T::one(),
            has_answer_tags,
            ..Default::default()
        },
    }
}

/// Scores an already-parsed prediction against the ground truth.
pub fn score_outcome<T: Scalar>(
    gt: &SceneGraph<T>,
    outcome: &ParseOutcome<T>,
    w: &RewardWeights<T>,
    cfg: &MatchConfig<T>,
) -> Result<RewardBreakdown<T>> {
    let report = validate_graph(gt, None, false);
    if !report.is_valid() {
        return Err(Error::InvalidGraph(report));
    }
    let eps = cfg.epsilon;
    let mut out = RewardBreakdown {
        diagnostics: diagnostics(outcome, eps),
        object_iou_gate: cfg.object_iou_gate,
        ..Default::default()
    };
    let Some(pred) = outcome.valid_graph() else {
        return Ok(out);
    };

    let m = match_graphs(gt, pred, cfg)?;
    let sizes = GraphSizes::of(gt, pred);
    out.valid_mask = 1;
    out.matched_objects = m.matched_objects;
    out.matched_relations = m.matched_relations;
    out.format = w.format;
    out.obj_cls = reward_obj_cls(&m, sizes, w.obj_cls, eps);
    out.obj_box = reward_obj_box(&m, sizes, w, eps);
    (out.rel_recall, out.rel_precision, out.rel_f1) = reward_relations(
        m.matched_relations,
        sizes.gt_relations,
        sizes.pred_relations,
        w,
        eps,
    );
    (out.penalty_obj, out.penalty_rel) = hallucination_penalties(
        m.matched_objects,
        m.matched_relations,
        sizes.pred_objects,
        sizes.pred_relations,
        w,
        eps,
    );
    out.total =
        out.format + out.obj_cls + out.obj_box + out.rel_recall + out.rel_precision + out.rel_f1
            - out.penalty_obj
            - out.penalty_rel;
    Ok(out)
}

/// Full pipeline for one rollout: answer extraction, TOON parse, validity
/// mask, matching, and every reward term.
pub fn score_completion<T: Scalar>(
    gt: &SceneGraph<T>,
    completion: &str,
    w: &RewardWeights<T>,
    cfg: &MatchConfig<T>,
) -> Result<RewardBreakdown<T>> {
    let outcome = extract_answer(completion, gt.schema);
    score_outcome(gt, &outcome, w, cfg)
}

/// Scores many rollouts in parallel; output order follows input order.
pub fn score_batch<T: Scalar>(
    items: &[(&SceneGraph<T>, &str)],
    w: &RewardWeights<T>,
    cfg: &MatchConfig<T>,
) -> Vec<Result<RewardBreakdown<T>>> {
    items
        .par_iter()
        .map(|(gt, c)| score_completion(gt, c, w, cfg))
        .collect()
}
