//! Scene-graph data model, schema variants and structural validation.
//!
//! Objects are identified by their `id`; relations refer to object ids.
//! Graphs produced by the cleaning pass use ids `0..n` in list order, which
//! is the form every serializer emits.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Resized frame the annotations live in.
pub const FRAME_WIDTH: f64 = 640.0;
pub const FRAME_HEIGHT: f64 = 480.0;

/// Axis-aligned box in pixel coordinates of the resized frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundingBox<T> {
    pub x1: T,
    pub y1: T,
    pub x2: T,
    pub y2: T,
}

impl<T: Scalar> BoundingBox<T> {
    pub fn new(x1: T, y1: T, x2: T, y2: T) -> Self {
        Self { x1, y1, x2, y2 }
    }

    /// Builds a box from `f64` coordinates.
    pub fn from_f64(c: [f64; 4]) -> Self {
        Self::new(T::lit(c[0]), T::lit(c[1]), T::lit(c[2]), T::lit(c[3]))
    }

    pub fn coords(&self) -> [T; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|c| c.is_finite())
    }

    /// `x1 <= x2 && y1 <= y2`.
    pub fn is_ordered(&self) -> bool {
        self.x1 <= self.x2 && self.y1 <= self.y2
    }

    pub fn width(&self) -> T {
        (self.x2 - self.x1).max(T::zero())
    }

    pub fn height(&self) -> T {
        (self.y2 - self.y1).max(T::zero())
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    /// Rounds each coordinate half away from zero, the form used on the wire.
    pub fn rounded(&self) -> Self {
        Self::new(
            self.x1.round(),
            self.y1.round(),
            self.x2.round(),
            self.y2.round(),
        )
    }

    pub fn cast<U: Scalar>(&self) -> BoundingBox<U> {
        BoundingBox::new(
            U::lit(self.x1.as_f64()),
            U::lit(self.y1.as_f64()),
            U::lit(self.x2.as_f64()),
            U::lit(self.y2.as_f64()),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject<T> {
    pub id: usize,
    pub label: String,
    pub bbox: BoundingBox<T>,
}

impl<T: Scalar> SceneObject<T> {
    pub fn new(id: usize, label: impl Into<String>, bbox: BoundingBox<T>) -> Self {
        Self {
            id,
            label: label.into(),
            bbox,
        }
    }
}

/// Relation families of the human-object schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationGroup {
    Attention,
    Spatial,
    Contacting,
}

impl RelationGroup {
    pub const ALL: [RelationGroup; 3] = [
        RelationGroup::Attention,
        RelationGroup::Spatial,
        RelationGroup::Contacting,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationGroup::Attention => "attention",
            RelationGroup::Spatial => "spatial",
            RelationGroup::Contacting => "contacting",
        }
    }
}

impl fmt::Display for RelationGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attention" => Ok(RelationGroup::Attention),
            "spatial" => Ok(RelationGroup::Spatial),
            "contacting" => Ok(RelationGroup::Contacting),
            other => Err(Error::InvalidConfig(format!(
                "unknown relation group `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub subject_id: usize,
    pub predicate: String,
    pub object_id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<RelationGroup>,
}

impl Relation {
    pub fn new(subject_id: usize, predicate: impl Into<String>, object_id: usize) -> Self {
        Self {
            subject_id,
            predicate: predicate.into(),
            object_id,
            group: None,
        }
    }

    pub fn grouped(
        subject_id: usize,
        group: RelationGroup,
        predicate: impl Into<String>,
        object_id: usize,
    ) -> Self {
        Self {
            subject_id,
            predicate: predicate.into(),
            object_id,
            group: Some(group),
        }
    }

    /// `group:predicate` for grouped relations, the bare predicate otherwise.
    pub fn qualified_predicate(&self) -> String {
        match self.group {
            Some(g) => format!("{}:{}", g.as_str(), self.predicate),
            None => self.predicate.clone(),
        }
    }

    /// Same predicate and (if any) same group.
    pub fn same_predicate(&self, other: &Relation) -> bool {
        self.group == other.group && self.predicate == other.predicate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schema {
    #[default]
    ObjectRelation,
    HumanObject,
}

impl Schema {
    pub fn as_str(self) -> &'static str {
        match self {
            Schema::ObjectRelation => "object_relation",
            Schema::HumanObject => "human_object",
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Schema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "object_relation" => Ok(Schema::ObjectRelation),
            "human_object" => Ok(Schema::HumanObject),
            other => Err(Error::InvalidConfig(format!("unknown schema `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph<T> {
    pub schema: Schema,
    pub objects: Vec<SceneObject<T>>,
    pub relations: Vec<Relation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_id: Option<String>,
}

impl<T: Scalar> SceneGraph<T> {
    pub fn new(schema: Schema) -> Self {
        Self {
            schema,
            objects: Vec::new(),
            relations: Vec::new(),
            frame_id: None,
        }
    }

    pub fn with_parts(
        schema: Schema,
        objects: Vec<SceneObject<T>>,
        relations: Vec<Relation>,
    ) -> Self {
        Self {
            schema,
            objects,
            relations,
            frame_id: None,
        }
    }

    /// Appends an object with the next positional id and returns that id.
    pub fn push_object(&mut self, label: impl Into<String>, bbox: BoundingBox<T>) -> usize {
        let id = self.objects.len();
        self.objects.push(SceneObject::new(id, label, bbox));
        id
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty() && self.relations.is_empty()
    }

    /// Map from object id to position in `objects` (first occurrence wins).
    pub fn id_index(&self) -> HashMap<usize, usize> {
        let mut map = HashMap::with_capacity(self.objects.len());
        for (pos, o) in self.objects.iter().enumerate() {
            map.entry(o.id).or_insert(pos);
        }
        map
    }

    /// Relations whose endpoints both resolve, as `(subject_pos, object_pos, relation)`.
    pub fn resolved_relations(&self) -> Vec<(usize, usize, &Relation)> {
        let idx = self.id_index();
        self.relations
            .iter()
            .filter_map(|r| Some((*idx.get(&r.subject_id)?, *idx.get(&r.object_id)?, r)))
            .collect()
    }

    pub fn cast<U: Scalar>(&self) -> SceneGraph<U> {
        SceneGraph {
            schema: self.schema,
            objects: self
                .objects
                .iter()
                .map(|o| SceneObject::new(o.id, o.label.clone(), o.bbox.cast()))
                .collect(),
            relations: self.relations.clone(),
            frame_id: self.frame_id.clone(),
        }
    }
}

/// Closed label sets for a dataset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Vocabulary {
    pub object_labels: BTreeSet<String>,
    pub predicates: BTreeSet<String>,
    #[serde(default)]
    pub group_predicates: BTreeMap<RelationGroup, BTreeSet<String>>,
}

impl Vocabulary {
    /// Rejects empty sets and duplicate entries.
    pub fn new<I, J>(object_labels: I, predicates: J) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: Into<String>,
        J: IntoIterator,
        J::Item: Into<String>,
    {
        let objects = collect_unique(object_labels, "object label")?;
        let predicates = collect_unique(predicates, "predicate")?;
        Ok(Self {
            object_labels: objects,
            predicates,
            group_predicates: BTreeMap::new(),
        })
    }

    /// Vocabulary for the human-object schema with one predicate set per group.
    pub fn grouped<I>(
        object_labels: I,
        groups: impl IntoIterator<Item = (RelationGroup, Vec<String>)>,
    ) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: Into<String>,
    {
        let objects = collect_unique(object_labels, "object label")?;
        let mut group_predicates = BTreeMap::new();
        let mut all = BTreeSet::new();
        for (g, preds) in groups {
            let set = collect_unique(preds, "predicate")?;
            all.extend(set.iter().cloned());
            if group_predicates.insert(g, set).is_some() {
                return Err(Error::InvalidVocabulary(format!(
                    "group `{g}` listed twice"
                )));
            }
        }
        if all.is_empty() {
            return Err(Error::InvalidVocabulary("no predicates".into()));
        }
        Ok(Self {
            object_labels: objects,
            predicates: all,
            group_predicates,
        })
    }

    pub fn allows_predicate(&self, rel: &Relation) -> bool {
        match rel.group.and_then(|g| self.group_predicates.get(&g)) {
            Some(set) => set.contains(&rel.predicate),
            None => self.predicates.contains(&rel.predicate),
        }
    }
}

fn collect_unique<I>(items: I, what: &str) -> Result<BTreeSet<String>>
where
    I: IntoIterator,
    I::Item: Into<String>,
{
    let mut set = BTreeSet::new();
    for item in items {
        let s: String = item.into();
        if !set.insert(s.clone()) {
            return Err(Error::InvalidVocabulary(format!("duplicate {what} `{s}`")));
        }
    }
    if set.is_empty() {
        return Err(Error::InvalidVocabulary(format!("empty {what} set")));
    }
    Ok(set)
}

/// Which text field a reserved-character violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TextField {
    Label,
    Predicate,
}

/// One violated structural rule. Indices are list positions.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DuplicateObjectId {
        object: usize,
        id: usize,
    },
    EmptyLabel {
        object: usize,
    },
    ReservedCharacter {
        field: TextField,
        index: usize,
        value: String,
    },
    NonFiniteBox {
        object: usize,
    },
    DegenerateBox {
        object: usize,
    },
    DanglingReference {
        relation: usize,
        id: usize,
    },
    SelfRelation {
        relation: usize,
    },
    DuplicateRelation {
        relation: usize,
        first: usize,
    },
    EmptyPredicate {
        relation: usize,
    },
    MissingGroup {
        relation: usize,
    },
    UnexpectedGroup {
        relation: usize,
    },
    SubjectNotAnchor {
        relation: usize,
    },
    UnknownLabel {
        object: usize,
        label: String,
    },
    UnknownPredicate {
        relation: usize,
        predicate: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateObjectId { object, id } => {
                write!(f, "object #{object}: duplicate id {id}")
            }
            Violation::EmptyLabel { object } => write!(f, "object #{object}: empty label"),
            Violation::ReservedCharacter {
                field,
                index,
                value,
            } => {
                write!(
                    f,
                    "{field:?} #{index}: `{value}` contains a reserved character or padding"
                )
            }
            Violation::NonFiniteBox { object } => write!(f, "object #{object}: non-finite box"),
            Violation::DegenerateBox { object } => {
                write!(f, "object #{object}: box has x1 > x2 or y1 > y2")
            }
            Violation::DanglingReference { relation, id } => {
                write!(f, "relation #{relation}: references unknown object id {id}")
            }
            Violation::SelfRelation { relation } => {
                write!(f, "relation #{relation}: subject equals object")
            }
            Violation::DuplicateRelation { relation, first } => {
                write!(f, "relation #{relation}: duplicates relation #{first}")
            }
            Violation::EmptyPredicate { relation } => {
                write!(f, "relation #{relation}: empty predicate")
            }
            Violation::MissingGroup { relation } => {
                write!(
                    f,
                    "relation #{relation}: human-object relation without group"
                )
            }
            Violation::UnexpectedGroup { relation } => {
                write!(
                    f,
                    "relation #{relation}: group tag on object-relation graph"
                )
            }
            Violation::SubjectNotAnchor { relation } => {
                write!(
                    f,
                    "relation #{relation}: subject is not the first (person) object"
                )
            }
            Violation::UnknownLabel { object, label } => {
                write!(f, "object #{object}: label `{label}` not in vocabulary")
            }
            Violation::UnknownPredicate {
                relation,
                predicate,
            } => {
                write!(
                    f,
                    "relation #{relation}: predicate `{predicate}` not in vocabulary"
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// Number of relations that reference a missing object or loop on themselves.
    pub fn invalid_relation_count(&self) -> usize {
        let bad: HashSet<usize> = self
            .violations
            .iter()
            .filter_map(|v| match v {
                Violation::DanglingReference { relation, .. }
                | Violation::SelfRelation { relation } => Some(*relation),
                _ => None,
            })
            .collect();
        bad.len()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Text usable as a single wire field: no delimiters, no padding.
pub(crate) fn is_wire_safe(s: &str, grouped_value: bool) -> bool {
    if s.trim() != s || s.contains([',', '\n', '\r', '\t']) {
        return false;
    }
    !(grouped_value && (s.contains('|') || s == "-"))
}

/// Lists every structural rule `g` breaks; with `closed` and a vocabulary,
/// out-of-vocabulary labels and predicates are violations too.
pub fn validate_graph<T: Scalar>(
    g: &SceneGraph<T>,
    vocab: Option<&Vocabulary>,
    closed: bool,
) -> ValidationReport {
    let mut out = Vec::new();
    let mut seen_ids: HashMap<usize, usize> = HashMap::new();
    for (pos, o) in g.objects.iter().enumerate() {
        if seen_ids.insert(o.id, pos).is_some() {
            out.push(Violation::DuplicateObjectId {
                object: pos,
                id: o.id,
            });
        }
        if o.label.is_empty() {
            out.push(Violation::EmptyLabel { object: pos });
        } else if !is_wire_safe(&o.label, false) {
            out.push(Violation::ReservedCharacter {
                field: TextField::Label,
                index: pos,
                value: o.label.clone(),
            });
        }
        if !o.bbox.is_finite() {
            out.push(Violation::NonFiniteBox { object: pos });
        } else if !o.bbox.is_ordered() {
            out.push(Violation::DegenerateBox { object: pos });
        }
        if let (true, Some(v)) = (closed, vocab) {
            if !o.label.is_empty() && !v.object_labels.contains(&o.label) {
                out.push(Violation::UnknownLabel {
                    object: pos,
                    label: o.label.clone(),
                });
            }
        }
    }

    let anchor = g.objects.first().map(|o| o.id);
    let mut seen_triples: HashMap<(usize, Option<RelationGroup>, &str, usize), usize> =
        HashMap::new();
    for (pos, r) in g.relations.iter().enumerate() {
        for id in [r.subject_id, r.object_id] {
            if !seen_ids.contains_key(&id) {
                out.push(Violation::DanglingReference { relation: pos, id });
            }
        }
        if r.subject_id == r.object_id {
            out.push(Violation::SelfRelation { relation: pos });
        }
        let grouped = g.schema == Schema::HumanObject;
        if r.predicate.is_empty() {
            out.push(Violation::EmptyPredicate { relation: pos });
        } else if !is_wire_safe(&r.predicate, grouped) {
            out.push(Violation::ReservedCharacter {
                field: TextField::Predicate,
                index: pos,
                value: r.predicate.clone(),
            });
        }
        match (g.schema, r.group) {
            (Schema::HumanObject, None) => out.push(Violation::MissingGroup { relation: pos }),
            (Schema::ObjectRelation, Some(_)) => {
                out.push(Violation::UnexpectedGroup { relation: pos })
            }
            _ => {}
        }
        if grouped && Some(r.subject_id) != anchor {
            out.push(Violation::SubjectNotAnchor { relation: pos });
        }
        let key = (r.subject_id, r.group, r.predicate.as_str(), r.object_id);
        if let Some(&first) = seen_triples.get(&key) {
            out.push(Violation::DuplicateRelation {
                relation: pos,
                first,
            });
        } else {
            seen_triples.insert(key, pos);
        }
        if let (true, Some(v)) = (closed, vocab) {
            if !r.predicate.is_empty() && !v.allows_predicate(r) {
                out.push(Violation::UnknownPredicate {
                    relation: pos,
                    predicate: r.predicate.clone(),
                });
            }
        }
    }
    ValidationReport { violations: out }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct GraphStats {
    pub num_objects: usize,
    pub num_relations: usize,
    /// Keyed by the group-qualified predicate for human-object graphs.
    pub predicate_counts: BTreeMap<String, usize>,
    pub zero_relation: bool,
}

pub fn graph_stats<T: Scalar>(g: &SceneGraph<T>) -> GraphStats {
    let mut predicate_counts = BTreeMap::new();
    for r in &g.relations {
        *predicate_counts.entry(r.qualified_predicate()).or_insert(0) += 1;
    }
    GraphStats {
        num_objects: g.objects.len(),
        num_relations: g.relations.len(),
        predicate_counts,
        zero_relation: g.relations.is_empty(),
    }
}
