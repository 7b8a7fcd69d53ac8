//! Ranked triplet metrics (SGDET, with constraint).
//!
//! Generative models emit no confidences, so rank is emission order. At most
//! one predicate per (subject, object) pair survives, the first-ranked one,
//! before truncation to the top K.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::assignment::maximum_matching;
use crate::error::{Error, Result};
use crate::geometry::iou;
use crate::graph::{BoundingBox, SceneGraph};
use crate::matching::MatchConfig;
use crate::scalar::{harmonic, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTriplet<T> {
    pub subject_label: String,
    pub subject_box: BoundingBox<T>,
    pub predicate: String,
    pub object_label: String,
    pub object_box: BoundingBox<T>,
}

/// Denominator of P@K.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecisionDenominator {
    /// `min(K, number of retained predictions)`.
    #[default]
    Emitted,
    /// `K`.
    K,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtK<T> {
    pub k: usize,
    pub tp: usize,
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

/// Relations of `g` as triplets in list order; grouped predicates are
/// qualified as `group:value`. Relations with unknown endpoints are skipped.
pub fn triplets_from_graph<T: Scalar>(g: &SceneGraph<T>) -> Vec<RankedTriplet<T>> {
    g.resolved_relations()
        .into_iter()
        .map(|(s, o, r)| RankedTriplet {
            subject_label: g.objects[s].label.clone(),
            subject_box: g.objects[s].bbox,
            predicate: r.qualified_predicate(),
            object_label: g.objects[o].label.clone(),
            object_box: g.objects[o].bbox,
        })
        .collect()
}

type PairKey = (String, [u64; 4], String, [u64; 4]);

fn pair_key<T: Scalar>(t: &RankedTriplet<T>) -> PairKey {
    let bits = |b: &BoundingBox<T>| b.coords().map(|c| c.as_f64().to_bits());
    (
        t.subject_label.clone(),
        bits(&t.subject_box),
        t.object_label.clone(),
        bits(&t.object_box),
    )
}

fn with_constraint<T: Scalar>(pred: &[RankedTriplet<T>]) -> Vec<&RankedTriplet<T>> {
    let mut seen = HashSet::new();
    pred.iter().filter(|t| seen.insert(pair_key(t))).collect()
}

fn triplet_match<T: Scalar>(g: &RankedTriplet<T>, p: &RankedTriplet<T>, thr: T) -> bool {
    g.predicate == p.predicate
        && g.subject_label == p.subject_label
        && g.object_label == p.object_label
        && iou(&g.subject_box, &p.subject_box) >= thr
        && iou(&g.object_box, &p.object_box) >= thr
}

/// P@K, R@K and F1@K for each requested K, in the order given.
pub fn evaluate_sgdet<T: Scalar>(
    gt: &[RankedTriplet<T>],
    pred_ranked: &[RankedTriplet<T>],
    k_values: &[i64],
    cfg: &MatchConfig<T>,
    denominator: PrecisionDenominator,
) -> Result<Vec<AtK<T>>> {
    if let Some(&k) = k_values.iter().find(|&&k| k <= 0) {
        return Err(Error::InvalidK(k));
    }
    let retained = with_constraint(pred_ranked);
    k_values
        .iter()
        .map(|&k| {
            let k = usize::try_from(k).map_err(|_| Error::InvalidK(k))?;
            let top = &retained[..retained.len().min(k)];
            let adj: Vec<Vec<usize>> = gt
                .iter()
                .map(|g| {
                    (0..top.len())
                        .filter(|&j| triplet_match(g, top[j], cfg.iou_threshold))
                        .collect()
                })
                .collect();
            let tp = maximum_matching(&adj, top.len()).len();
            let den = match denominator {
                PrecisionDenominator::Emitted => top.len(),
                PrecisionDenominator::K => k,
            };
            let ratio = |d: usize| {
                if d == 0 {
                    T::zero()
                } else {
                    T::from_count(tp) / T::from_count(d)
                }
            };
            let (precision, recall) = (ratio(den), ratio(gt.len()));
            Ok(AtK {
                k,
                tp,
                precision,
                recall,
                f1: harmonic(precision, recall),
            })
        })
        .collect()
}
