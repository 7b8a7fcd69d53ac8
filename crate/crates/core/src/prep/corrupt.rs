use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::clean_graph;
use crate::error::{Error, Result};
use crate::graph::{validate_graph, BoundingBox, SceneGraph, Schema};
use crate::scalar::Scalar;

/// Perturbations applied to a previous-frame graph before it is shown as
/// temporal context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionPolicy {
    pub object_dropout: f64,
    pub relation_dropout: f64,
    /// Maximum coordinate offset as a fraction of the box side.
    pub box_jitter: f64,
    pub label_substitution: f64,
}

impl Default for CorruptionPolicy {
    fn default() -> Self {
        Self {
            object_dropout: 0.1,
            relation_dropout: 0.2,
            box_jitter: 0.05,
            label_substitution: 0.05,
        }
    }
}

impl CorruptionPolicy {
    pub const NONE: Self = Self {
        object_dropout: 0.0,
        relation_dropout: 0.0,
        box_jitter: 0.0,
        label_substitution: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let probs = [
            self.object_dropout,
            self.relation_dropout,
            self.label_substitution,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidConfig(
                "corruption probabilities must lie in [0, 1]".into(),
            ));
        }
        if !(self.box_jitter >= 0.0 && self.box_jitter.is_finite()) {
            return Err(Error::InvalidConfig(
                "box_jitter must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

fn jitter<T: Scalar>(b: &BoundingBox<T>, frac: f64, rng: &mut ChaCha8Rng) -> BoundingBox<T> {
    let (w, h) = (b.width().as_f64(), b.height().as_f64());
    let mut shift = |v: T, side: f64| T::lit(v.as_f64() + rng.random_range(-frac..=frac) * side);
    let (x1, x2) = (shift(b.x1, w), shift(b.x2, w));
    let (y1, y2) = (shift(b.y1, h), shift(b.y2, h));
    BoundingBox::new(x1.min(x2), y1.min(y2), x1.max(x2), y1.max(y2))
}

/// Seeded corruption: object dropout, relation dropout, box jitter and label
/// substitution from `vocabulary` (the graph's own labels when empty), in that
/// order. Relations left dangling by dropped objects are removed and the
/// result is cleaned. The human anchor of a human-object graph is never
/// dropped.
pub fn corrupt_graph<T: Scalar>(
    g: &SceneGraph<T>,
    policy: &CorruptionPolicy,
    vocabulary: &[String],
    seed: u64,
) -> Result<SceneGraph<T>> {
    policy.validate()?;
    let report = validate_graph(g, None, false);
    if !report.is_valid() {
        return Err(Error::InvalidGraph(report));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<String> = if vocabulary.is_empty() {
        super::label_vocabulary([g])
    } else {
        vocabulary.to_vec()
    };

    let mut out = g.clone();
    let anchor = (g.schema == Schema::HumanObject)
        .then(|| g.objects.first().map(|o| o.id))
        .flatten();
    out.objects
        .retain(|o| Some(o.id) == anchor || !rng.random_bool(policy.object_dropout));
    let alive: std::collections::HashSet<usize> = out.objects.iter().map(|o| o.id).collect();
    out.relations
        .retain(|r| alive.contains(&r.subject_id) && alive.contains(&r.object_id));
    out.relations
        .retain(|_| !rng.random_bool(policy.relation_dropout));

    for o in &mut out.objects {
        if policy.box_jitter > 0.0 {
            o.bbox = jitter(&o.bbox, policy.box_jitter, &mut rng);
        }
        if Some(o.id) != anchor && rng.random_bool(policy.label_substitution) {
            let others: Vec<&String> = pool.iter().filter(|l| **l != o.label).collect();
            if !others.is_empty() {
                o.label = others[rng.random_range(0..others.len())].clone();
            }
        }
    }

    let out = clean_graph(&out);
    let report = validate_graph(&out, None, false);
    if !report.is_valid() {
        return Err(Error::InvalidGraph(report));
    }
    Ok(out)
}
