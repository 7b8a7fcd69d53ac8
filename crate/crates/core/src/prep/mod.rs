//! Dataset preparation: cleaning, zero-relation filtering, annotation-based
//! frame thinning, previous-frame corruption and serialization-length
//! statistics.

mod corrupt;
mod lengths;
pub mod psg;
mod records;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::graph::{Relation, SceneGraph, SceneObject};
use crate::scalar::Scalar;

pub use corrupt::{corrupt_graph, CorruptionPolicy};
pub use lengths::{
    length_stats, length_stats_from_counts, measure_text, read_token_counts, LengthMeasure,
    LengthStats, Summary, TokenCounts,
};
pub use records::{parse_records, DatasetSplit, GraphFormat, RawRecord, Record};

/// Removes exact-duplicate objects (same label and box), self relations,
/// relations with unknown endpoints and duplicate relations, keeping first
/// occurrences. Relations pointing at a removed duplicate are retargeted to
/// the surviving object.
///
/// Surviving objects keep their ids when ids are unique; otherwise objects
/// are renumbered by position (relations then resolve to the first object
/// carrying an id).
pub fn clean_graph<T: Scalar>(g: &SceneGraph<T>) -> SceneGraph<T> {
    let unique_ids =
        g.objects.iter().map(|o| o.id).collect::<HashSet<_>>().len() == g.objects.len();
    let mut first_of_id: HashMap<usize, usize> = HashMap::new();
    for (pos, o) in g.objects.iter().enumerate() {
        first_of_id.entry(o.id).or_insert(pos);
    }

    let key = |o: &SceneObject<T>| {
        (
            o.label.clone(),
            o.bbox.coords().map(|c| c.as_f64().to_bits()),
        )
    };
    let mut survivor_of_key = HashMap::new();
    let mut survivor: Vec<usize> = Vec::with_capacity(g.objects.len());
    let mut objects = Vec::new();
    for o in &g.objects {
        let kept = *survivor_of_key.entry(key(o)).or_insert_with(|| {
            let id = if unique_ids { o.id } else { objects.len() };
            objects.push(SceneObject { id, ..o.clone() });
            objects.len() - 1
        });
        survivor.push(kept);
    }

    let new_id = |old: usize| first_of_id.get(&old).map(|&pos| objects[survivor[pos]].id);
    let mut seen = HashSet::new();
    let relations = g
        .relations
        .iter()
        .filter_map(|r| {
            let (s, o) = (new_id(r.subject_id)?, new_id(r.object_id)?);
            let rel = Relation {
                subject_id: s,
                object_id: o,
                ..r.clone()
            };
            (s != o && seen.insert(rel.clone())).then_some(rel)
        })
        .collect();
    SceneGraph {
        schema: g.schema,
        objects,
        relations,
        frame_id: g.frame_id.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterStats {
    pub before: usize,
    pub removed: usize,
    pub kept: usize,
    pub removed_pct: f64,
}

impl FilterStats {
    pub fn new(before: usize, removed: usize) -> Self {
        let removed_pct = if before == 0 {
            0.0
        } else {
            100.0 * removed as f64 / before as f64
        };
        Self {
            before,
            removed,
            kept: before - removed,
            removed_pct,
        }
    }
}

/// Drops records whose cleaned graph has no relations. Kept records carry
/// the cleaned graph.
pub fn filter_zero_relation<T: Scalar>(split: DatasetSplit<T>) -> (DatasetSplit<T>, FilterStats) {
    let before = split.records.len();
    let records: Vec<Record<T>> = split
        .records
        .into_iter()
        .map(|r| Record {
            graph: clean_graph(&r.graph),
            ..r
        })
        .filter(|r| !r.graph.relations.is_empty())
        .collect();
    let stats = FilterStats::new(before, before - records.len());
    (
        DatasetSplit {
            name: split.name,
            records,
        },
        stats,
    )
}

/// How consecutive frames' object categories are compared when thinning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryComparison {
    /// Set of distinct labels.
    #[default]
    Set,
    /// Labels with multiplicity.
    Multiset,
}

fn thinning_key<T: Scalar>(
    g: &SceneGraph<T>,
    cmp: CategoryComparison,
) -> (BTreeMap<&str, usize>, usize) {
    let mut cats = BTreeMap::new();
    for o in &g.objects {
        *cats.entry(o.label.as_str()).or_insert(0) += 1;
    }
    if cmp == CategoryComparison::Set {
        cats.values_mut().for_each(|n| *n = 1);
    }
    (cats, g.relations.len())
}

/// Positions of the frames kept by annotation-based thinning: the first frame
/// of each video, then every frame whose object categories or relation count
/// differ from the immediately preceding frame. Records without a video id
/// are always kept.
pub fn thin_base_annot<T: Scalar>(records: &[Record<T>], cmp: CategoryComparison) -> Vec<usize> {
    let mut kept = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let same_video = i > 0 && r.video_id.is_some() && records[i - 1].video_id == r.video_id;
        if !same_video || thinning_key(&r.graph, cmp) != thinning_key(&records[i - 1].graph, cmp) {
            kept.push(i);
        }
    }
    kept
}

/// Distinct labels across a split, sorted, for corruption vocabularies.
pub fn label_vocabulary<'a, T: Scalar + 'a>(
    graphs: impl IntoIterator<Item = &'a SceneGraph<T>>,
) -> Vec<String> {
    let set: BTreeSet<&str> = graphs
        .into_iter()
        .flat_map(|g| g.objects.iter().map(|o| o.label.as_str()))
        .collect();
    set.into_iter().map(str::to_string).collect()
}
