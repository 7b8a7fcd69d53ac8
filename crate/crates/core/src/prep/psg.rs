//! Adapter for the PSG release annotation file (`psg.json`).
//!
//! Field mapping:
//!
//! | PSG                                      | toolkit                          |
//! |------------------------------------------|----------------------------------|
//! | `data[i].image_id`                       | `sample_id = "psg/<image_id>"`   |
//! | `data[i].annotations[k].category_id`     | label from `thing_classes ++ stuff_classes` |
//! | `data[i].annotations[k].bbox` (x1,y1,x2,y2) | box rescaled from `width`×`height` to 640×480 |
//! | `data[i].relations[r] = [s, o, p]`       | relation `s -(predicate_classes[p])-> o`, ids = annotation positions |
//! | `test_image_ids`                         | split membership                 |
//!
//! Graphs are cleaned after mapping.

use std::collections::HashSet;

use serde::Deserialize;

use super::{clean_graph, Record};
use crate::error::{Error, Result};
use crate::graph::{
    BoundingBox, Relation, SceneGraph, SceneObject, Schema, FRAME_HEIGHT, FRAME_WIDTH,
};

#[derive(Debug, Deserialize)]
struct PsgFile {
    data: Vec<PsgImage>,
    thing_classes: Vec<String>,
    stuff_classes: Vec<String>,
    predicate_classes: Vec<String>,
    #[serde(default)]
    test_image_ids: Vec<serde_json::Value>,
}

#[derive(Debug, Deserialize)]
struct PsgImage {
    image_id: serde_json::Value,
    width: f64,
    height: f64,
    annotations: Vec<PsgAnnotation>,
    relations: Vec<[usize; 3]>,
}

#[derive(Debug, Deserialize)]
struct PsgAnnotation {
    bbox: [f64; 4],
    category_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsgSplit {
    Train,
    Test,
    All,
}

fn id_string(v: &serde_json::Value) -> String {
    v.as_str().map_or_else(|| v.to_string(), str::to_string)
}

/// Reads `psg.json` text into cleaned records of the requested split.
pub fn load_psg(text: &str, split: PsgSplit) -> Result<Vec<Record<f64>>> {
    let file: PsgFile =
        serde_json::from_str(text).map_err(|e| Error::Dataset(format!("psg: {e}")))?;
    let classes: Vec<&String> = file
        .thing_classes
        .iter()
        .chain(&file.stuff_classes)
        .collect();
    let test: HashSet<String> = file.test_image_ids.iter().map(id_string).collect();
    let mut out = Vec::new();
    for img in &file.data {
        let id = id_string(&img.image_id);
        let is_test = test.contains(&id);
        if (split == PsgSplit::Train && is_test) || (split == PsgSplit::Test && !is_test) {
            continue;
        }
        if !(img.width > 0.0 && img.height > 0.0) {
            return Err(Error::Dataset(format!("psg image {id}: non-positive size")));
        }
        let (sx, sy) = (FRAME_WIDTH / img.width, FRAME_HEIGHT / img.height);
        let mut g = SceneGraph::new(Schema::ObjectRelation);
        for (k, a) in img.annotations.iter().enumerate() {
            let label = classes.get(a.category_id).ok_or_else(|| {
                Error::Dataset(format!(
                    "psg image {id}: unknown category {}",
                    a.category_id
                ))
            })?;
            let [x1, y1, x2, y2] = a.bbox;
            let bbox = BoundingBox::new(x1 * sx, y1 * sy, x2 * sx, y2 * sy);
            g.objects.push(SceneObject::new(k, label.as_str(), bbox));
        }
        for &[s, o, p] in &img.relations {
            let pred = file
                .predicate_classes
                .get(p)
                .ok_or_else(|| Error::Dataset(format!("psg image {id}: unknown predicate {p}")))?;
            g.relations.push(Relation::new(s, pred.as_str(), o));
        }
        out.push(Record {
            sample_id: format!("psg/{id}"),
            video_id: None,
            frame_index: None,
            graph: clean_graph(&g),
        });
    }
    Ok(out)
}
