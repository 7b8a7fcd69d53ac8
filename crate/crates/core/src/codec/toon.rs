//! TOON: objects and relations as comma-separated rows under shared headers.
//!
//! ```text
//! objects[3]{id,label,x1,y1,x2,y2}:
//! 0,zebra,12,40,300,400
//! 1,zebra,310,52,598,410
//! 2,grass,0,300,640,480
//! relations[2]{subject,predicate,object}:
//! 0,standing on,2
//! 1,standing on,2
//! ```
//!
//! The human-object variant replaces the relation header with
//! `relations[M]{object,attention,spatial,contacting}:`; each row names the
//! object the person (first object) relates to, with `|`-separated values per
//! group and `-` for an empty group. See `docs/toon-grammar.md`.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::{Diagnostic, DiagnosticKind, ParseOutcome};
use crate::error::{Error, Result};
use crate::graph::{
    validate_graph, BoundingBox, Relation, RelationGroup, SceneGraph, SceneObject, Schema,
};
use crate::scalar::Scalar;

const OBJECT_FIELDS: [&str; 6] = ["id", "label", "x1", "y1", "x2", "y2"];
const RELATION_FIELDS: [&str; 3] = ["subject", "predicate", "object"];
const GROUPED_FIELDS: [&str; 4] = ["object", "attention", "spatial", "contacting"];
const EMPTY_GROUP: &str = "-";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ToonDocument {
    pub raw_text: String,
    pub schema: Schema,
}

impl ToonDocument {
    pub fn len_chars(&self) -> usize {
        self.raw_text.chars().count()
    }
}

pub(crate) fn format_coord<T: Scalar>(v: T) -> String {
    // `round` is half-away-from-zero; the i64 cast also folds -0 into 0.
    let r = v.round().as_f64() as i64;
    r.to_string()
}

/// Serializes a structurally valid graph. Objects are written in id order.
pub fn serialize_toon<T: Scalar>(g: &SceneGraph<T>) -> Result<ToonDocument> {
    let report = validate_graph(g, None, false);
    if !report.is_valid() {
        return Err(Error::InvalidGraph(report));
    }
    let mut objects: Vec<&SceneObject<T>> = g.objects.iter().collect();
    objects.sort_by_key(|o| o.id);

    let mut out = String::with_capacity(32 + 24 * objects.len() + 16 * g.relations.len());
    let _ = writeln!(
        out,
        "objects[{}]{{{}}}:",
        objects.len(),
        OBJECT_FIELDS.join(",")
    );
    for o in &objects {
        let b = &o.bbox;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            o.id,
            o.label,
            format_coord(b.x1),
            format_coord(b.y1),
            format_coord(b.x2),
            format_coord(b.y2)
        );
    }
    match g.schema {
        Schema::ObjectRelation => {
            let _ = writeln!(
                out,
                "relations[{}]{{{}}}:",
                g.relations.len(),
                RELATION_FIELDS.join(",")
            );
            for r in &g.relations {
                let _ = writeln!(out, "{},{},{}", r.subject_id, r.predicate, r.object_id);
            }
        }
        Schema::HumanObject => {
            let rows = grouped_rows(&g.relations);
            let _ = writeln!(
                out,
                "relations[{}]{{{}}}:",
                rows.len(),
                GROUPED_FIELDS.join(",")
            );
            for (object_id, cells) in rows {
                out.push_str(&object_id.to_string());
                for cell in cells {
                    out.push(',');
                    if cell.is_empty() {
                        out.push_str(EMPTY_GROUP);
                    } else {
                        out.push_str(&cell.join("|"));
                    }
                }
                out.push('\n');
            }
        }
    }
    Ok(ToonDocument {
        raw_text: out,
        schema: g.schema,
    })
}

/// Groups human-object relations into rows: one per object, in order of
/// first appearance, each with per-group values in appearance order.
fn grouped_rows(relations: &[Relation]) -> Vec<(usize, [Vec<&str>; 3])> {
    let mut rows: Vec<(usize, [Vec<&str>; 3])> = Vec::new();
    let mut index: HashMap<usize, usize> = HashMap::new();
    for r in relations {
        let pos = *index.entry(r.object_id).or_insert_with(|| {
            rows.push((r.object_id, [Vec::new(), Vec::new(), Vec::new()]));
            rows.len() - 1
        });
        let slot = group_slot(r.group.unwrap_or(RelationGroup::Spatial));
        rows[pos].1[slot].push(&r.predicate);
    }
    rows
}

fn group_slot(g: RelationGroup) -> usize {
    match g {
        RelationGroup::Attention => 0,
        RelationGroup::Spatial => 1,
        RelationGroup::Contacting => 2,
    }
}

/// Reorders human-object relations into the order the TOON parser yields;
/// a no-op for object-relation graphs.
pub fn canonicalize_relations<T: Scalar>(g: &mut SceneGraph<T>) {
    if g.schema != Schema::HumanObject {
        return;
    }
    let Some(anchor) = g.objects.first().map(|o| o.id) else {
        return;
    };
    let mut out = Vec::with_capacity(g.relations.len());
    for (object_id, cells) in grouped_rows(&g.relations) {
        for (slot, values) in cells.iter().enumerate() {
            for v in values {
                out.push(Relation::grouped(
                    anchor,
                    RelationGroup::ALL[slot],
                    *v,
                    object_id,
                ));
            }
        }
    }
    g.relations = out;
}

struct Line<'a> {
    number: usize,
    text: &'a str,
    /// Last line of input and not newline-terminated.
    unterminated: bool,
}

struct Field<'a> {
    text: &'a str,
    column: usize,
}

fn split_fields(line: &str) -> Vec<Field<'_>> {
    let mut fields = Vec::new();
    let mut start = 0usize;
    for part in line.split(',') {
        let lead = part.len() - part.trim_start().len();
        fields.push(Field {
            text: part.trim(),
            column: line[..start + lead].chars().count() + 1,
        });
        start += part.len() + 1;
    }
    fields
}

struct Header {
    name: String,
    count: usize,
    fields: Vec<String>,
}

/// `name[count]{f1,f2,...}:`. `None` when the line is not header-shaped.
fn parse_header(text: &str) -> Option<std::result::Result<Header, String>> {
    let t = text.trim();
    let open = t.find('[')?;
    let name = t[..open].trim();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphabetic() || c == '_') {
        return None;
    }
    let rest = &t[open + 1..];
    let Some(close) = rest.find(']') else {
        return Some(Err("unterminated `[` in header".into()));
    };
    let count = match rest[..close].trim().parse::<usize>() {
        Ok(c) => c,
        Err(_) => return Some(Err(format!("bad row count `{}`", &rest[..close]))),
    };
    let rest = rest[close + 1..].trim_start();
    let Some(body) = rest.strip_prefix('{') else {
        return Some(Err("expected `{` after row count".into()));
    };
    let Some(end) = body.find('}') else {
        return Some(Err("unterminated `{` in header".into()));
    };
    if body[end + 1..].trim() != ":" {
        return Some(Err("header must end with `}:`".into()));
    }
    let fields = body[..end]
        .split(',')
        .map(|f| f.trim().to_string())
        .collect();
    Some(Ok(Header {
        name: name.to_string(),
        count,
        fields,
    }))
}

struct Parser<'a> {
    lines: Vec<Line<'a>>,
    pos: usize,
    diags: Vec<Diagnostic>,
    schema: Schema,
}

enum RowOutcome<R> {
    Row(R),
    Skip,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, schema: Schema) -> Self {
        let terminated = text.ends_with('\n');
        let raw: Vec<&str> = text.split('\n').collect();
        let n = raw.len();
        let lines = raw
            .into_iter()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| Line {
                number: i + 1,
                text: l.strip_suffix('\r').unwrap_or(l),
                unterminated: !terminated && i + 1 == n,
            })
            .collect();
        Self {
            lines,
            pos: 0,
            diags: Vec::new(),
            schema,
        }
    }

    fn peek(&self) -> Option<&Line<'a>> {
        self.lines.get(self.pos)
    }

    fn end_line(&self) -> usize {
        self.lines.last().map_or(1, |l| l.number)
    }

    fn diag(&mut self, line: usize, column: usize, kind: DiagnosticKind, msg: impl Into<String>) {
        self.diags.push(Diagnostic::new(line, column, kind, msg));
    }

    /// Reads the header named `name` with the given field list.
    fn header(&mut self, name: &str, expected: &[&str]) -> Option<usize> {
        let Some(line) = self.peek() else {
            let at = self.end_line();
            self.diag(
                at,
                1,
                DiagnosticKind::UnexpectedEnd,
                format!("missing `{name}` header"),
            );
            return None;
        };
        let (number, text) = (line.number, line.text);
        match parse_header(text) {
            None => {
                self.diag(
                    number,
                    1,
                    DiagnosticKind::MissingHeader,
                    format!("expected `{name}[N]{{...}}:` header"),
                );
                None
            }
            Some(Err(msg)) => {
                self.diag(number, 1, DiagnosticKind::BadHeader, msg);
                self.pos += 1;
                None
            }
            Some(Ok(h)) => {
                self.pos += 1;
                if h.name != name {
                    self.diag(
                        number,
                        1,
                        DiagnosticKind::BadHeader,
                        format!("expected `{name}` header, found `{}`", h.name),
                    );
                    return None;
                }
                if h.fields != expected {
                    self.diag(
                        number,
                        1,
                        DiagnosticKind::BadHeader,
                        format!(
                            "expected fields {{{}}}, found {{{}}}",
                            expected.join(","),
                            h.fields.join(",")
                        ),
                    );
                    return None;
                }
                Some(h.count)
            }
        }
    }

    /// Reads rows until the next header-shaped line or end of input,
    /// checking the total against `declared`.
    fn rows<R>(
        &mut self,
        section: &str,
        declared: usize,
        width: usize,
        mut parse: impl FnMut(&mut Self, usize, &[Field<'a>]) -> RowOutcome<R>,
    ) -> Vec<R> {
        let mut out = Vec::new();
        let mut seen = 0usize;
        while let Some(line) = self.peek() {
            if parse_header(line.text).is_some() {
                break;
            }
            let (number, text, unterminated) = (line.number, line.text, line.unterminated);
            self.pos += 1;
            seen += 1;
            let fields = split_fields(text);
            if fields.len() != width {
                let kind = if unterminated && fields.len() < width {
                    DiagnosticKind::UnexpectedEnd
                } else {
                    DiagnosticKind::FieldCount
                };
                self.diag(
                    number,
                    1,
                    kind,
                    format!(
                        "{section} row has {} fields, expected {width}",
                        fields.len()
                    ),
                );
                continue;
            }
            if let RowOutcome::Row(r) = parse(self, number, &fields) {
                out.push(r);
            }
        }
        if seen != declared {
            let (line, kind) = if seen < declared && self.peek().is_none() {
                (self.end_line(), DiagnosticKind::UnexpectedEnd)
            } else {
                let at = self.peek().map_or_else(|| self.end_line(), |l| l.number);
                (at, DiagnosticKind::CountMismatch)
            };
            self.diag(
                line,
                1,
                kind,
                format!("{section} header declares {declared} rows, found {seen}"),
            );
        }
        out
    }

    fn index(&mut self, line: usize, f: &Field<'_>, what: &str) -> Option<usize> {
        match f.text.parse::<usize>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.diag(
                    line,
                    f.column,
                    DiagnosticKind::BadNumber,
                    format!("{what} `{}` is not a non-negative integer", f.text),
                );
                None
            }
        }
    }

    fn coord<T: Scalar>(&mut self, line: usize, f: &Field<'_>) -> Option<T> {
        match f.text.parse::<f64>() {
            Ok(v) if v.is_finite() => T::from_f64(v),
            _ => {
                self.diag(
                    line,
                    f.column,
                    DiagnosticKind::BadNumber,
                    format!("coordinate `{}` is not a finite number", f.text),
                );
                None
            }
        }
    }

    fn text_field(&mut self, line: usize, f: &Field<'a>, what: &str) -> Option<&'a str> {
        if f.text.is_empty() {
            self.diag(
                line,
                f.column,
                DiagnosticKind::BadField,
                format!("empty {what}"),
            );
            None
        } else {
            Some(f.text)
        }
    }

    fn object_row<T: Scalar>(
        &mut self,
        line: usize,
        f: &[Field<'a>],
    ) -> RowOutcome<SceneObject<T>> {
        let id = self.index(line, &f[0], "object id");
        let label = self.text_field(line, &f[1], "label");
        let mut c = [T::zero(); 4];
        let mut ok = true;
        for (k, slot) in c.iter_mut().enumerate() {
            match self.coord(line, &f[2 + k]) {
                Some(v) => *slot = v,
                None => ok = false,
            }
        }
        match (id, label, ok) {
            (Some(id), Some(label), true) => RowOutcome::Row(SceneObject::new(
                id,
                label,
                BoundingBox::new(c[0], c[1], c[2], c[3]),
            )),
            _ => RowOutcome::Skip,
        }
    }

    fn relation_row(&mut self, line: usize, f: &[Field<'a>]) -> RowOutcome<Vec<Relation>> {
        let s = self.index(line, &f[0], "subject");
        let p = self.text_field(line, &f[1], "predicate");
        let o = self.index(line, &f[2], "object");
        match (s, p, o) {
            (Some(s), Some(p), Some(o)) => RowOutcome::Row(vec![Relation::new(s, p, o)]),
            _ => RowOutcome::Skip,
        }
    }

    fn grouped_row(
        &mut self,
        line: usize,
        f: &[Field<'a>],
        anchor: usize,
    ) -> RowOutcome<Vec<Relation>> {
        let Some(object) = self.index(line, &f[0], "object") else {
            return RowOutcome::Skip;
        };
        let mut rels = Vec::new();
        let mut ok = true;
        for (slot, group) in RelationGroup::ALL.iter().enumerate() {
            let cell = &f[1 + slot];
            if cell.text == EMPTY_GROUP {
                continue;
            }
            if cell.text.is_empty() {
                self.diag(
                    line,
                    cell.column,
                    DiagnosticKind::BadField,
                    format!("empty {group} cell (use `-`)"),
                );
                ok = false;
                continue;
            }
            for v in cell.text.split('|') {
                let v = v.trim();
                if v.is_empty() || v == EMPTY_GROUP {
                    self.diag(
                        line,
                        cell.column,
                        DiagnosticKind::BadField,
                        format!("empty value in {group} cell"),
                    );
                    ok = false;
                } else {
                    rels.push(Relation::grouped(anchor, *group, v, object));
                }
            }
        }
        if ok {
            RowOutcome::Row(rels)
        } else {
            RowOutcome::Skip
        }
    }
}

/// Parses TOON text. Never panics; malformed input yields `valid == false`
/// with diagnostics and, when both headers were found, a best-effort graph.
pub fn parse_toon<T: Scalar>(text: &str, schema: Schema) -> ParseOutcome<T> {
    let mut p = Parser::new(text, schema);
    let Some(n_obj) = p.header("objects", &OBJECT_FIELDS) else {
        return ParseOutcome {
            graph: None,
            valid: false,
            diagnostics: p.diags,
            has_answer_tags: None,
        };
    };
    let objects: Vec<SceneObject<T>> = p.rows("objects", n_obj, OBJECT_FIELDS.len(), |p, l, f| {
        p.object_row(l, f)
    });

    let grouped = p.schema == Schema::HumanObject;
    let expected: &[&str] = if grouped {
        &GROUPED_FIELDS
    } else {
        &RELATION_FIELDS
    };
    let Some(n_rel) = p.header("relations", expected) else {
        return ParseOutcome {
            graph: None,
            valid: false,
            diagnostics: p.diags,
            has_answer_tags: None,
        };
    };
    let relations: Vec<Relation> = if grouped {
        let anchor = objects.first().map(|o| o.id);
        let rows = p.rows(
            "relations",
            n_rel,
            GROUPED_FIELDS.len(),
            |p, l, f| match anchor {
                Some(a) => p.grouped_row(l, f, a),
                None => {
                    p.diag(
                        l,
                        1,
                        DiagnosticKind::DanglingReference,
                        "relation row but no person object declared",
                    );
                    RowOutcome::Skip
                }
            },
        );
        rows.into_iter().flatten().collect()
    } else {
        let rows = p.rows("relations", n_rel, RELATION_FIELDS.len(), |p, l, f| {
            p.relation_row(l, f)
        });
        rows.into_iter().flatten().collect()
    };

    if let Some(line) = p.peek() {
        let number = line.number;
        p.diag(
            number,
            1,
            DiagnosticKind::TrailingContent,
            "unexpected content after relations section",
        );
    }
    let graph = SceneGraph {
        schema,
        objects,
        relations,
        frame_id: None,
    };
    ParseOutcome::finish(Some(graph), p.diags)
}
