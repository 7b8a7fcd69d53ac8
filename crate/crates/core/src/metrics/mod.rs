//! Evaluation: strict and judge-assisted (soft) per-sample P/R/F1 for
//! objects and relations, macro aggregation with the SGG score, and ranked
//! SGDET metrics.
//!
//! Objects are aligned by a Hungarian assignment on `1 - IoU`. An aligned pair
//! is a true positive when its IoU reaches the threshold and its labels agree
//! (exactly, or by the judge in soft mode). A relation is a true positive when
//! both endpoints are true-positive pairs and the predicates agree; relation
//! true positives form a maximum one-to-one matching.

mod judge;
mod sgdet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{hungarian, maximum_matching, CostMatrix};
use crate::codec::{serialize_toon, ParseOutcome};
use crate::error::{Error, Result};
use crate::geometry::{giou, iou, l1_box};
use crate::graph::{validate_graph, Relation, SceneGraph};
use crate::matching::{relation_eligibility, EndpointRule, MatchConfig, MatchResult, PairScore};
use crate::scalar::{harmonic, Scalar};

pub use judge::{
    CachingJudge, JudgeClient, JudgeError, RejectingJudge, SynonymJudge, SynonymTable,
};
pub use sgdet::{evaluate_sgdet, triplets_from_graph, AtK, PrecisionDenominator, RankedTriplet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    #[default]
    Strict,
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    fn from_sizes(tp: usize, gt: usize, pred: usize) -> Self {
        Self {
            tp,
            fp: pred - tp,
            fn_: gt - tp,
        }
    }

    /// `(precision, recall, f1)` with `0/0 = 0`.
    pub fn prf<T: Scalar>(&self) -> (T, T, T) {
        let ratio = |den: usize| {
            if den == 0 {
                T::zero()
            } else {
                T::from_count(self.tp) / T::from_count(den)
            }
        };
        let p = ratio(self.tp + self.fp);
        let r = ratio(self.tp + self.fn_);
        (p, r, harmonic(p, r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleMetrics<T> {
    pub obj_p: T,
    pub obj_r: T,
    pub obj_f1: T,
    pub rel_p: T,
    pub rel_r: T,
    pub rel_f1: T,
    pub objects: Counts,
    pub relations: Counts,
    pub failed: bool,
    /// Disputed pairs the judge could not answer (scored as non-matches).
    pub judge_failures: usize,
}

impl<T: Scalar> SampleMetrics<T> {
    pub fn from_counts(objects: Counts, relations: Counts) -> Self {
        let (obj_p, obj_r, obj_f1) = objects.prf();
        let (rel_p, rel_r, rel_f1) = relations.prf();
        Self {
            obj_p,
            obj_r,
            obj_f1,
            rel_p,
            rel_r,
            rel_f1,
            objects,
            relations,
            failed: false,
            judge_failures: 0,
        }
    }

    /// All-zero metrics of an unparseable prediction.
    pub fn failure(gt: &SceneGraph<T>) -> Self {
        Self {
            objects: Counts {
                fn_: gt.objects.len(),
                ..Default::default()
            },
            relations: Counts {
                fn_: gt.relations.len(),
                ..Default::default()
            },
            failed: true,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport<T> {
    pub mode: EvalMode,
    /// Samples that entered the averages.
    pub samples: usize,
    pub failed: usize,
    /// Failed samples over all samples, excluded ones included.
    pub failure_rate: T,
    pub excluded_failed: bool,
    pub obj_p: T,
    pub obj_r: T,
    pub obj_f1: T,
    pub rel_p: T,
    pub rel_r: T,
    pub rel_f1: T,
    pub sgg_score: T,
    pub judge_failures: usize,
}

/// Mean of object F1 and relation F1.
pub fn sgg_score<T: Scalar>(obj_f1: T, rel_f1: T) -> T {
    (obj_f1 + rel_f1) / T::lit(2.0)
}

fn align_by_iou<T: Scalar>(
    gt: &SceneGraph<T>,
    pred: &SceneGraph<T>,
    cfg: &MatchConfig<T>,
    mut accept_labels: impl FnMut(usize, usize) -> bool,
) -> Result<MatchResult<T>> {
    let cost = CostMatrix::from_fn(gt.objects.len(), pred.objects.len(), |i, j| {
        T::one() - iou(&gt.objects[i].bbox, &pred.objects[j].bbox)
    });
    let solved = hungarian(&cost)?;
    let per_pair: Vec<PairScore<T>> = solved
        .pairs
        .iter()
        .map(|&(i, j)| {
            let (a, b) = (&gt.objects[i].bbox, &pred.objects[j].bbox);
            let overlap = iou(a, b);
            let same = gt.objects[i].label == pred.objects[j].label;
            let matched = overlap >= cfg.iou_threshold && (same || accept_labels(i, j));
            PairScore {
                gt: i,
                pred: j,
                similarity: if same { T::one() } else { T::zero() },
                iou: overlap,
                giou: giou(a, b),
                l1: l1_box(a, b, cfg.frame_width, cfg.frame_height),
                cost: cost.get(i, j),
                matched,
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

fn require_valid<T: Scalar>(gt: &SceneGraph<T>) -> Result<()> {
    let report = validate_graph(gt, None, false);
    if report.is_valid() {
        Ok(())
    } else {
        Err(Error::InvalidGraph(report))
    }
}

fn finish<T: Scalar>(
    gt: &SceneGraph<T>,
    pred: &SceneGraph<T>,
    m: &MatchResult<T>,
    rel_tp: usize,
) -> SampleMetrics<T> {
    SampleMetrics::from_counts(
        Counts::from_sizes(m.matched_objects, gt.objects.len(), pred.objects.len()),
        Counts::from_sizes(rel_tp, gt.relations.len(), pred.relations.len()),
    )
}

/// Strict lexical evaluation of one prediction.
pub fn evaluate_sample_strict<T: Scalar>(
    gt: &SceneGraph<T>,
    pred: &ParseOutcome<T>,
    cfg: &MatchConfig<T>,
) -> Result<SampleMetrics<T>> {
    require_valid(gt)?;
    let Some(p) = pred.valid_graph() else {
        return Ok(SampleMetrics::failure(gt));
    };
    let m = align_by_iou(gt, p, cfg, |_, _| false)?;
    let adj = relation_eligibility(
        gt,
        p,
        EndpointRule::Aligned(&m),
        cfg,
        Relation::same_predicate,
    );
    let rel_tp = maximum_matching(&adj, p.relations.len()).len();
    Ok(finish(gt, p, &m, rel_tp))
}

/// Soft evaluation: IoU-aligned pairs with differing labels, and relations on
/// aligned endpoints with differing predicates, are referred to `judge`.
/// A judge error counts the pair as a non-match and is tallied.
pub fn evaluate_sample_soft<T: Scalar, J: JudgeClient + ?Sized>(
    gt: &SceneGraph<T>,
    pred: &ParseOutcome<T>,
    cfg: &MatchConfig<T>,
    judge: &J,
) -> Result<SampleMetrics<T>> {
    require_valid(gt)?;
    let Some(p) = pred.valid_graph() else {
        return Ok(SampleMetrics::failure(gt));
    };
    let context = serialize_toon(gt).map(|d| d.raw_text).unwrap_or_default();
    let mut failures = 0usize;
    let m = align_by_iou(gt, p, cfg, |i, j| {
        judge
            .judge_objects(&gt.objects[i].label, &p.objects[j].label, &context)
            .unwrap_or_else(|_| {
                failures += 1;
                false
            })
    })?;

    let gt_idx = gt.id_index();
    let label = |id: usize| {
        gt_idx
            .get(&id)
            .map_or("", |&k| gt.objects[k].label.as_str())
    };
    let adj = relation_eligibility(gt, p, EndpointRule::Aligned(&m), cfg, |g, q| {
        if g.group != q.group {
            return false;
        }
        if g.predicate == q.predicate {
            return true;
        }
        judge
            .judge_predicates(
                &g.predicate,
                &q.predicate,
                label(g.subject_id),
                label(g.object_id),
                &context,
            )
            .unwrap_or_else(|_| {
                failures += 1;
                false
            })
    });
    let rel_tp = maximum_matching(&adj, p.relations.len()).len();
    let mut out = finish(gt, p, &m, rel_tp);
    out.judge_failures = failures;
    Ok(out)
}

/// Strict evaluation of many samples in parallel, in input order.
pub fn evaluate_strict_batch<T: Scalar>(
    items: &[(&SceneGraph<T>, &ParseOutcome<T>)],
    cfg: &MatchConfig<T>,
) -> Vec<Result<SampleMetrics<T>>> {
    items
        .par_iter()
        .map(|(g, p)| evaluate_sample_strict(g, p, cfg))
        .collect()
}

/// Soft evaluation with at most `max_in_flight` samples (and therefore judge
/// calls) running at once.
pub fn evaluate_soft_batch<T: Scalar, J: JudgeClient + ?Sized>(
    items: &[(&SceneGraph<T>, &ParseOutcome<T>)],
    cfg: &MatchConfig<T>,
    judge: &J,
    max_in_flight: usize,
) -> Result<Vec<Result<SampleMetrics<T>>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(max_in_flight.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    Ok(pool.install(|| {
        items
            .par_iter()
            .map(|(g, p)| evaluate_sample_soft(g, p, cfg, judge))
            .collect()
    }))
}

fn mean<T: Scalar>(values: impl Iterator<Item = T>) -> T {
    let mut v: Vec<T> = values.collect();
    // summing in sorted order keeps the mean independent of sample order
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = T::from_count(v.len());
    v.into_iter().sum::<T>() / n
}

/// Macro-averages per-sample metrics. Failed samples count as zeros unless
/// `exclude_failed` is set; `failure_rate` always covers every sample.
pub fn aggregate<T: Scalar>(
    samples: &[SampleMetrics<T>],
    mode: EvalMode,
    exclude_failed: bool,
) -> Result<MetricsReport<T>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let failed = samples.iter().filter(|s| s.failed).count();
    let used: Vec<&SampleMetrics<T>> = samples
        .iter()
        .filter(|s| !(exclude_failed && s.failed))
        .collect();
    if used.is_empty() {
        return Err(Error::EmptySamples);
    }
    let avg = |f: fn(&SampleMetrics<T>) -> T| mean(used.iter().map(|s| f(s)));
    let obj_f1 = avg(|s| s.obj_f1);
    let rel_f1 = avg(|s| s.rel_f1);
    Ok(MetricsReport {
        mode,
        samples: used.len(),
        failed,
        failure_rate: T::from_count(failed) / T::from_count(samples.len()),
        excluded_failed: exclude_failed,
        obj_p: avg(|s| s.obj_p),
        obj_r: avg(|s| s.obj_r),
        obj_f1,
        rel_p: avg(|s| s.rel_p),
        rel_r: avg(|s| s.rel_r),
        rel_f1,
        sgg_score: sgg_score(obj_f1, rel_f1),
        judge_failures: samples.iter().map(|s| s.judge_failures).sum(),
    })
}
