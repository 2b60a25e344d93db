//! Heterogeneous commit graphs: deleted/added line nodes joined by typed
//! dependency edges, plus the on-disk dataset format.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Deleted,
    Added,
}

impl NodeKind {
    pub const ALL: [NodeKind; 2] = [NodeKind::Deleted, NodeKind::Added];
    pub const COUNT: usize = 2;

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Deleted => "deleted",
            NodeKind::Added => "added",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    ControlFlow,
    DataDependency,
    Call,
    ClassMemberRef,
    LineMapping,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 5] = [
        EdgeKind::ControlFlow,
        EdgeKind::DataDependency,
        EdgeKind::Call,
        EdgeKind::ClassMemberRef,
        EdgeKind::LineMapping,
    ];
    pub const COUNT: usize = 5;

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            EdgeKind::ControlFlow => "control_flow",
            EdgeKind::DataDependency => "data_dependency",
            EdgeKind::Call => "call",
            EdgeKind::ClassMemberRef => "class_member_ref",
            EdgeKind::LineMapping => "line_mapping",
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineNode {
    pub id: usize,
    pub kind: NodeKind,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub is_root_cause: bool,
    /// Precomputed initial embedding; takes precedence over `text`.
    #[serde(default)]
    pub embedding: Option<Vec<f64>>,
}

impl LineNode {
    pub fn new(id: usize, kind: NodeKind, text: impl Into<String>) -> Self {
        Self {
            id,
            kind,
            text: Some(text.into()),
            is_root_cause: false,
            embedding: None,
        }
    }

    pub fn root_cause(mut self) -> Self {
        self.is_root_cause = true;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepEdge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
}

impl DepEdge {
    pub fn new(src: usize, dst: usize, kind: EdgeKind) -> Self {
        Self { src, dst, kind }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommitGraph {
    pub commit_id: String,
    #[serde(default)]
    pub timestamp: Option<i64>,
    pub nodes: Vec<LineNode>,
    pub edges: Vec<DepEdge>,
}

impl CommitGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn deleted_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Deleted).map(|n| n.id)
    }

    pub fn root_causes(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter(|n| n.is_root_cause).map(|n| n.id)
    }

    pub fn is_labeled(&self) -> bool {
        self.nodes.iter().any(|n| n.is_root_cause)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub name: String,
    pub graphs: Vec<CommitGraph>,
}

/// A broken graph invariant, reported by [`validate_graph`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NoDeletedLines,
    NoRootCause,
    NonDenseId { position: usize, id: usize },
    RootCauseNotDeleted(usize),
    MissingNode(usize),
    SelfLoop(usize),
    DuplicateEdge(DepEdge),
    LineMappingDirection(DepEdge),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoDeletedLines => write!(f, "no deleted lines"),
            Violation::NoRootCause => write!(f, "no root-cause line"),
            Violation::NonDenseId { position, id } => {
                write!(
                    f,
                    "node at position {position} has id {id}; ids must be 0..n-1 in order"
                )
            }
            Violation::RootCauseNotDeleted(id) => write!(f, "node {id} is marked root cause but is not deleted"),
            Violation::MissingNode(id) => write!(f, "edge references missing node {id}"),
            Violation::SelfLoop(id) => write!(f, "self-referencing edge on node {id}"),
            Violation::DuplicateEdge(e) => write!(f, "duplicate edge {}->{} ({})", e.src, e.dst, e.kind),
            Violation::LineMappingDirection(e) => {
                write!(
                    f,
                    "line_mapping edge {}->{} must go from a deleted to an added line",
                    e.src, e.dst
                )
            }
        }
    }
}

/// Checks every structural invariant of `g`, including the presence of a
/// root-cause label. Inference callers ignore [`Violation::NoRootCause`].
pub fn validate_graph(g: &CommitGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = g.nodes.len();
    for (position, node) in g.nodes.iter().enumerate() {
        if node.id != position {
            out.push(Violation::NonDenseId { position, id: node.id });
        }
        if node.is_root_cause && node.kind != NodeKind::Deleted {
            out.push(Violation::RootCauseNotDeleted(node.id));
        }
    }
    if !g.nodes.iter().any(|n| n.kind == NodeKind::Deleted) {
        out.push(Violation::NoDeletedLines);
    }
    if !g.is_labeled() {
        out.push(Violation::NoRootCause);
    }

    let mut seen = HashSet::new();
    for e in &g.edges {
        let mut dangling = false;
        for id in [e.src, e.dst] {
            if id >= n {
                out.push(Violation::MissingNode(id));
                dangling = true;
            }
        }
        if e.src == e.dst {
            out.push(Violation::SelfLoop(e.src));
        }
        if !seen.insert((e.src, e.dst, e.kind)) {
            out.push(Violation::DuplicateEdge(*e));
        }
        if !dangling
            && e.kind == EdgeKind::LineMapping
            && (g.nodes[e.src].kind != NodeKind::Deleted || g.nodes[e.dst].kind != NodeKind::Added)
        {
            out.push(Violation::LineMappingDirection(*e));
        }
    }
    out
}

/// Incoming edges of `t` as `(source, kind)`, sorted by source id then kind ordinal.
pub fn neighbors_in(g: &CommitGraph, t: usize) -> Result<Vec<(usize, EdgeKind)>> {
    if t >= g.nodes.len() {
        return Err(Error::UnknownNode {
            commit_id: g.commit_id.clone(),
            node: t,
        });
    }
    let mut out: Vec<(usize, EdgeKind)> = g.edges.iter().filter(|e| e.dst == t).map(|e| (e.src, e.kind)).collect();
    out.sort();
    Ok(out)
}

/// Whether loaded graphs must carry root-cause labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelPolicy {
    Required,
    Optional,
    /// Labels optional, and graphs without deleted lines are kept for the
    /// caller to skip.
    Inference,
}

impl LabelPolicy {
    fn tolerates(self, v: &Violation) -> bool {
        match self {
            LabelPolicy::Required => false,
            LabelPolicy::Optional => *v == Violation::NoRootCause,
            LabelPolicy::Inference => matches!(v, Violation::NoRootCause | Violation::NoDeletedLines),
        }
    }
}

impl Dataset {
    pub fn from_json_str(json: &str, labels: LabelPolicy) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(json).map_err(|e| Error::Schema {
            commit_id: None,
            reason: e.to_string(),
        })?;
        let serde_json::Value::Object(mut top) = raw else {
            return Err(Error::Schema {
                commit_id: None,
                reason: "top level must be an object".into(),
            });
        };
        if let Some(extra) = top.keys().find(|k| *k != "name" && *k != "graphs") {
            return Err(Error::Schema {
                commit_id: None,
                reason: format!("unknown field `{extra}`"),
            });
        }
        let name = match top.remove("name") {
            Some(serde_json::Value::String(s)) => s,
            _ => {
                return Err(Error::Schema {
                    commit_id: None,
                    reason: "field `name` must be a string".into(),
                })
            }
        };
        let raw_graphs = match top.remove("graphs") {
            Some(serde_json::Value::Array(a)) => a,
            _ => {
                return Err(Error::Schema {
                    commit_id: None,
                    reason: "field `graphs` must be an array".into(),
                })
            }
        };

        let mut graphs = Vec::with_capacity(raw_graphs.len());
        for (i, value) in raw_graphs.into_iter().enumerate() {
            let commit_id = value
                .get("commit_id")
                .and_then(|c| c.as_str())
                .map(str::to_owned)
                .unwrap_or_else(|| format!("#{i}"));
            let graph: CommitGraph = serde_json::from_value(value).map_err(|e| Error::Schema {
                commit_id: Some(commit_id),
                reason: e.to_string(),
            })?;
            graphs.push(graph);
        }
        let ds = Dataset { name, graphs };
        ds.validate(labels)?;
        Ok(ds)
    }

    pub fn validate(&self, labels: LabelPolicy) -> Result<()> {
        let mut ids = HashSet::new();
        for g in &self.graphs {
            if !ids.insert(g.commit_id.as_str()) {
                return Err(Error::DuplicateCommit(g.commit_id.clone()));
            }
            let violations: Vec<Violation> = validate_graph(g).into_iter().filter(|v| !labels.tolerates(v)).collect();
            if !violations.is_empty() {
                return Err(Error::InvalidGraph {
                    commit_id: g.commit_id.clone(),
                    violations,
                });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serialization cannot fail")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })
    }
}

/// Reads and validates a dataset file.
pub fn load_dataset(path: &Path, labels: LabelPolicy) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    Dataset::from_json_str(&text, labels)
}
