//! Canonical JSON form:
//!
//! ```json
//! {"objects":[{"id":0,"label":"zebra","bbox":[12,40,300,400]}],
//!  "relations":[{"subject":0,"predicate":"eating","object":1}]}
//! ```
//!
//! emitted without whitespace, keys in the order shown. Human-object relations
//! carry an extra `"group"` key; `"frame_id"` follows `"relations"` when set.

use serde_json::Value;

use super::toon::format_coord;
use super::{Diagnostic, DiagnosticKind, ParseOutcome};
use crate::error::{Error, Result};
use crate::graph::{
    validate_graph, BoundingBox, Relation, RelationGroup, SceneGraph, SceneObject, Schema,
};
use crate::scalar::Scalar;

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization is infallible")
}

/// Serializes a structurally valid graph; objects in id order.
pub fn serialize_json<T: Scalar>(g: &SceneGraph<T>) -> Result<String> {
    let report = validate_graph(g, None, false);
    if !report.is_valid() {
        return Err(Error::InvalidGraph(report));
    }
    let mut objects: Vec<&SceneObject<T>> = g.objects.iter().collect();
    objects.sort_by_key(|o| o.id);

    let mut out = String::from("{\"objects\":[");
    for (i, o) in objects.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let b = &o.bbox;
        out.push_str(&format!(
            "{{\"id\":{},\"label\":{},\"bbox\":[{},{},{},{}]}}",
            o.id,
            quote(&o.label),
            format_coord(b.x1),
            format_coord(b.y1),
            format_coord(b.x2),
            format_coord(b.y2)
        ));
    }
    out.push_str("],\"relations\":[");
    for (i, r) in g.relations.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!(
            "{{\"subject\":{},\"predicate\":{},\"object\":{}",
            r.subject_id,
            quote(&r.predicate),
            r.object_id
        ));
        if let Some(group) = r.group {
            out.push_str(&format!(",\"group\":\"{}\"", group.as_str()));
        }
        out.push('}');
    }
    out.push(']');
    if let Some(frame) = &g.frame_id {
        out.push_str(&format!(",\"frame_id\":{}", quote(frame)));
    }
    out.push('}');
    Ok(out)
}

struct Walker {
    diags: Vec<Diagnostic>,
}

impl Walker {
    fn bad(&mut self, kind: DiagnosticKind, msg: impl Into<String>) {
        self.diags.push(Diagnostic::unpositioned(kind, msg));
    }

    fn index(&mut self, v: Option<&Value>, what: &str) -> Option<usize> {
        match v.and_then(Value::as_u64) {
            Some(n) => usize::try_from(n).ok(),
            None => {
                self.bad(
                    DiagnosticKind::BadNumber,
                    format!("{what} must be a non-negative integer"),
                );
                None
            }
        }
    }

    fn text(&mut self, v: Option<&Value>, what: &str) -> Option<String> {
        match v.and_then(Value::as_str) {
            Some(s) if !s.is_empty() => Some(s.to_string()),
            _ => {
                self.bad(
                    DiagnosticKind::BadField,
                    format!("{what} must be a non-empty string"),
                );
                None
            }
        }
    }

    fn object<T: Scalar>(&mut self, k: usize, v: &Value) -> Option<SceneObject<T>> {
        let Some(m) = v.as_object() else {
            self.bad(
                DiagnosticKind::BadField,
                format!("objects[{k}] is not an object"),
            );
            return None;
        };
        let id = self.index(m.get("id"), &format!("objects[{k}].id"));
        let label = self.text(m.get("label"), &format!("objects[{k}].label"));
        let bbox = self.bbox(m.get("bbox"), k);
        Some(SceneObject::new(id?, label?, bbox?))
    }

    fn bbox<T: Scalar>(&mut self, v: Option<&Value>, k: usize) -> Option<BoundingBox<T>> {
        let coords: Option<Vec<f64>> = v
            .and_then(Value::as_array)
            .filter(|a| a.len() == 4)
            .and_then(|a| a.iter().map(Value::as_f64).collect());
        match coords {
            Some(c) if c.iter().all(|x| x.is_finite()) => Some(BoundingBox::new(
                T::from_f64(c[0])?,
                T::from_f64(c[1])?,
                T::from_f64(c[2])?,
                T::from_f64(c[3])?,
            )),
            _ => {
                self.bad(
                    DiagnosticKind::BadNumber,
                    format!("objects[{k}].bbox must be four finite numbers"),
                );
                None
            }
        }
    }

    fn relation(&mut self, k: usize, v: &Value) -> Option<Relation> {
        let Some(m) = v.as_object() else {
            self.bad(
                DiagnosticKind::BadField,
                format!("relations[{k}] is not an object"),
            );
            return None;
        };
        let s = self.index(m.get("subject"), &format!("relations[{k}].subject"));
        let p = self.text(m.get("predicate"), &format!("relations[{k}].predicate"));
        let o = self.index(m.get("object"), &format!("relations[{k}].object"));
        let group = match m.get("group") {
            None | Some(Value::Null) => None,
            Some(g) => match g.as_str().and_then(|s| s.parse::<RelationGroup>().ok()) {
                Some(g) => Some(g),
                None => {
                    self.bad(
                        DiagnosticKind::BadField,
                        format!("relations[{k}].group is not a relation group"),
                    );
                    return None;
                }
            },
        };
        Some(Relation {
            subject_id: s?,
            predicate: p?,
            object_id: o?,
            group,
        })
    }
}

/// Parses a canonical-JSON graph (any key order).
pub fn parse_json<T: Scalar>(text: &str, schema: Schema) -> ParseOutcome<T> {
    let value: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            return ParseOutcome::failure(Diagnostic::new(
                e.line(),
                e.column(),
                DiagnosticKind::Syntax,
                e.to_string(),
            ))
        }
    };
    parse_json_value(&value, schema)
}

/// Like [`parse_json`] for an already-decoded JSON value.
pub fn parse_json_value<T: Scalar>(value: &Value, schema: Schema) -> ParseOutcome<T> {
    let Some(root) = value.as_object() else {
        return ParseOutcome::failure(Diagnostic::unpositioned(
            DiagnosticKind::Syntax,
            "graph must be a JSON object",
        ));
    };
    let mut w = Walker { diags: Vec::new() };
    let list = |key: &str, w: &mut Walker| -> Vec<Value> {
        match root.get(key) {
            Some(Value::Array(a)) => a.clone(),
            Some(_) => {
                w.bad(
                    DiagnosticKind::BadField,
                    format!("`{key}` must be an array"),
                );
                Vec::new()
            }
            None => {
                w.bad(DiagnosticKind::MissingHeader, format!("missing `{key}`"));
                Vec::new()
            }
        }
    };
    let objects = list("objects", &mut w);
    let relations = list("relations", &mut w);
    let objects: Vec<SceneObject<T>> = objects
        .iter()
        .enumerate()
        .filter_map(|(k, v)| w.object(k, v))
        .collect();
    let relations: Vec<Relation> = relations
        .iter()
        .enumerate()
        .filter_map(|(k, v)| w.relation(k, v))
        .collect();
    let frame_id = root
        .get("frame_id")
        .and_then(Value::as_str)
        .map(str::to_string);
    let graph = SceneGraph {
        schema,
        objects,
        relations,
        frame_id,
    };
    ParseOutcome::finish(Some(graph), w.diags)
}
