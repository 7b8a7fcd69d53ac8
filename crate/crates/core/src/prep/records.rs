//! Annotation records: one JSON object per line (or one JSON array).
//!
//! ```json
//! {"sample_id":"psg/1","schema":"object_relation","graph":{"objects":[...],"relations":[...]}}
//! {"sample_id":"ag/v7/12","schema":"human_object","video_id":"v7","frame_index":12,"toon":"objects[2]..."}
//! {"sample_id":"psg/1","completion":"<think>...</think><answer>...</answer>"}
//! ```
//!
//! Exactly one of `graph`, `toon` or `completion` is present. `schema`
//! defaults to the caller's choice.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::clean_graph;
use crate::codec::{
    extract_answer, parse_json_value, parse_toon, serialize_json, serialize_toon, DiagnosticKind,
    ParseOutcome,
};
use crate::error::{Error, Result};
use crate::graph::{validate_graph, SceneGraph, Schema};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRecord {
    pub sample_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<Schema>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_index: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toon: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion: Option<String>,
}

/// Which representation a record carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphFormat {
    Json,
    Toon,
}

impl std::str::FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "toon" => Ok(Self::Toon),
            other => Err(Error::InvalidConfig(format!(
                "unknown graph format `{other}` (expected json or toon)"
            ))),
        }
    }
}

impl RawRecord {
    pub fn schema_or(&self, default: Schema) -> Schema {
        self.schema.unwrap_or(default)
    }

    fn body_count(&self) -> usize {
        usize::from(self.graph.is_some())
            + usize::from(self.toon.is_some())
            + usize::from(self.completion.is_some())
    }

    /// Parses whichever body is present. Completions go through answer-tag
    /// extraction and are read as TOON.
    pub fn parse<T: Scalar>(&self, default_schema: Schema) -> Result<ParseOutcome<T>> {
        if self.body_count() != 1 {
            return Err(Error::Dataset(format!(
                "record `{}` must carry exactly one of graph, toon, completion",
                self.sample_id
            )));
        }
        let schema = self.schema_or(default_schema);
        Ok(match (&self.graph, &self.toon, &self.completion) {
            (Some(v), _, _) => parse_json_value(v, schema),
            (_, Some(t), _) => parse_toon(t, schema),
            (_, _, Some(c)) => extract_answer(c, schema),
            _ => unreachable!(),
        })
    }
}

/// An ingested annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct Record<T> {
    pub sample_id: String,
    pub video_id: Option<String>,
    pub frame_index: Option<u64>,
    pub graph: SceneGraph<T>,
}

impl<T: Scalar> Record<T> {
    /// Reads an annotation record. With `clean`, duplicate and self
    /// relations in the source are repaired instead of rejected.
    pub fn from_raw(raw: &RawRecord, default_schema: Schema, clean: bool) -> Result<Self> {
        if raw.completion.is_some() {
            return Err(Error::Dataset(format!(
                "record `{}` is a completion, not an annotation",
                raw.sample_id
            )));
        }
        let outcome = raw.parse::<T>(default_schema)?;
        let fixable = |k: DiagnosticKind| {
            clean
                && matches!(
                    k,
                    DiagnosticKind::Validation | DiagnosticKind::DanglingReference
                )
        };
        let graph = match outcome.graph {
            Some(g) if outcome.diagnostics.iter().all(|d| fixable(d.kind)) => g,
            _ => {
                let first = outcome
                    .diagnostics
                    .first()
                    .map(ToString::to_string)
                    .unwrap_or_default();
                return Err(Error::Dataset(format!(
                    "record `{}`: {first}",
                    raw.sample_id
                )));
            }
        };
        let graph = if clean { clean_graph(&graph) } else { graph };
        let report = validate_graph(&graph, None, false);
        if !report.is_valid() {
            return Err(Error::Dataset(format!(
                "record `{}`: {report}",
                raw.sample_id
            )));
        }
        Ok(Self {
            sample_id: raw.sample_id.clone(),
            video_id: raw.video_id.clone(),
            frame_index: raw.frame_index,
            graph,
        })
    }

    /// One canonical JSONL line (no trailing newline) with the graph in
    /// `format`.
    pub fn to_line(&self, format: GraphFormat) -> Result<String> {
        let quote = |s: &str| serde_json::to_string(s).expect("string serialization is infallible");
        let mut out = format!(
            "{{\"sample_id\":{},\"schema\":\"{}\"",
            quote(&self.sample_id),
            self.graph.schema.as_str()
        );
        if let Some(v) = &self.video_id {
            out.push_str(&format!(",\"video_id\":{}", quote(v)));
        }
        if let Some(i) = self.frame_index {
            out.push_str(&format!(",\"frame_index\":{i}"));
        }
        match format {
            GraphFormat::Json => {
                out.push_str(&format!(",\"graph\":{}}}", serialize_json(&self.graph)?))
            }
            GraphFormat::Toon => out.push_str(&format!(
                ",\"toon\":{}}}",
                quote(&serialize_toon(&self.graph)?.raw_text)
            )),
        }
        Ok(out)
    }
}

/// Reads records from JSONL text or a JSON array. Blank lines are skipped.
pub fn parse_records(text: &str) -> Result<Vec<RawRecord>> {
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(text)
            .map_err(|e| Error::Dataset(format!("record array: {e}")));
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| Error::Dataset(format!("line {}: {e}", n + 1)))
        })
        .collect()
}

/// A named, ordered collection of annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit<T> {
    pub name: String,
    pub records: Vec<Record<T>>,
}

impl<T: Scalar> DatasetSplit<T> {
    /// Checks that sample ids are unique and that each video's frames are
    /// contiguous and in increasing index order.
    pub fn new(name: impl Into<String>, records: Vec<Record<T>>) -> Result<Self> {
        let mut ids = HashSet::new();
        let mut finished_videos = HashSet::new();
        let mut current: Option<(&str, Option<u64>)> = None;
        for r in &records {
            if !ids.insert(r.sample_id.as_str()) {
                return Err(Error::Dataset(format!(
                    "duplicate sample_id `{}`",
                    r.sample_id
                )));
            }
            let Some(video) = r.video_id.as_deref() else {
                if let Some((v, _)) = current.take() {
                    finished_videos.insert(v);
                }
                continue;
            };
            match current {
                Some((v, last)) if v == video => {
                    if let (Some(a), Some(b)) = (last, r.frame_index) {
                        if b <= a {
                            return Err(Error::Dataset(format!(
                                "video `{video}`: frame {b} follows frame {a}"
                            )));
                        }
                    }
                }
                _ => {
                    if let Some((v, _)) = current {
                        finished_videos.insert(v);
                    }
                    if finished_videos.contains(video) {
                        return Err(Error::Dataset(format!(
                            "video `{video}` frames are not contiguous"
                        )));
                    }
                }
            }
            current = Some((video, r.frame_index));
        }
        Ok(Self {
            name: name.into(),
            records,
        })
    }

    /// Ingests raw records, cleaning every graph.
    pub fn from_raw(
        name: impl Into<String>,
        raws: &[RawRecord],
        default_schema: Schema,
    ) -> Result<Self> {
        let records = raws
            .iter()
            .map(|r| Record::from_raw(r, default_schema, true))
            .collect::<Result<_>>()?;
        Self::new(name, records)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}
