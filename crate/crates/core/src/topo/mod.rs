//! Testbed topology model.
//!
//! A topology is a set of labelled nodes plus a symmetric matrix of optional
//! links. Users submit it as an adjacency document (JSON), the controller
//! validates it and compiles static per-node IP and NDN routing tables from it
//! (see [`routing`]).

mod routing;

pub use routing::{
    compile_node_configs, compute_next_hop_sets, compute_routes, compute_routes_with,
    node_address, node_name_prefix, shortest_distances, EdgeWeight, FaceKind, FaceSpec,
    NextHopSet, NodeConfig, RouteEntry,
};

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while parsing, validating or editing a topology.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopoError {
    #[error("malformed adjacency document: {0}")]
    Malformed(String),
    #[error("asymmetric matrix: entry ({0},{1}) does not match ({1},{0})")]
    Asymmetric(usize, usize),
    #[error("non-positive delay {delay} at ({i},{j})")]
    NonPositiveDelay { i: usize, j: usize, delay: f64 },
    #[error("self loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate node label {0:?}")]
    DuplicateLabel(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("no link between {0} and {1}")]
    NoSuchLink(String, String),
}

impl TopoError {
    /// Short machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            TopoError::Malformed(_) => "malformed",
            TopoError::Asymmetric(..) => "asymmetric",
            TopoError::NonPositiveDelay { .. } => "non_positive_delay",
            TopoError::SelfLoop(_) => "self_loop",
            TopoError::DuplicateLabel(_) => "duplicate_label",
            TopoError::UnknownNode(_) => "unknown_node",
            TopoError::NoSuchLink(..) => "no_such_link",
        }
    }
}

/// A node of the testbed, identified by its matrix index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub index: usize,
    pub label: String,
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// Physical medium a link runs over. Only used for labelling and face kinds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Medium {
    #[default]
    Wired,
    Wireless,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub delay_ms: f64,
    pub medium: Medium,
    pub up: bool,
}

impl LinkSpec {
    pub fn new(delay_ms: f64, medium: Medium) -> Self {
        LinkSpec {
            delay_ms,
            medium,
            up: true,
        }
    }
}

/// Outcome of validation that does not prevent the topology from being used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub node_count: usize,
    pub link_count: usize,
    pub connected: bool,
    pub warnings: Vec<String>,
}

/// A validated topology: labelled nodes and a symmetric link matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<NodeId>,
    links: Vec<Vec<Option<LinkSpec>>>,
}

/// The JSON adjacency document accepted from users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjacencyDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub matrix: Vec<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media: Option<Vec<Vec<Option<Medium>>>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DocumentForm {
    Full(AdjacencyDocument),
    Bare(Vec<Vec<Option<f64>>>),
}

/// Parse and validate an adjacency document.
///
/// Accepts either the full object form or a bare matrix (`[[null, 5], [5, null]]`).
pub fn parse_adjacency(text: &str) -> Result<Topology, TopoError> {
    let form: DocumentForm =
        serde_json::from_str(text).map_err(|e| TopoError::Malformed(e.to_string()))?;
    let doc = match form {
        DocumentForm::Full(doc) => doc,
        DocumentForm::Bare(matrix) => AdjacencyDocument {
            labels: None,
            matrix,
            media: None,
        },
    };
    Topology::from_document(&doc)
}

fn check_label(label: &str) -> Result<(), TopoError> {
    let bad = label.is_empty()
        || label.len() > 32
        || label
            .chars()
            .any(|c| c.is_whitespace() || c.is_control() || matches!(c, '-' | '/' | ',' | '"'));
    if bad {
        return Err(TopoError::Malformed(format!("invalid node label {label:?}")));
    }
    Ok(())
}

impl Topology {
    /// Build a topology from explicit labels and links `(i, j, spec)`.
    pub fn from_links(
        labels: Vec<String>,
        links: impl IntoIterator<Item = (usize, usize, LinkSpec)>,
    ) -> Result<Self, TopoError> {
        let n = labels.len();
        let mut matrix = vec![vec![None; n]; n];
        let mut media = vec![vec![None; n]; n];
        for (i, j, spec) in links {
            if i >= n || j >= n {
                return Err(TopoError::Malformed(format!("link ({i},{j}) out of range")));
            }
            matrix[i][j] = Some(spec.delay_ms);
            matrix[j][i] = Some(spec.delay_ms);
            media[i][j] = Some(spec.medium);
            media[j][i] = Some(spec.medium);
        }
        Topology::from_document(&AdjacencyDocument {
            labels: Some(labels),
            matrix,
            media: Some(media),
        })
    }

    pub fn from_document(doc: &AdjacencyDocument) -> Result<Self, TopoError> {
        let n = doc.matrix.len();
        if n == 0 {
            return Err(TopoError::Malformed("empty matrix".into()));
        }
        if let Some(row) = doc.matrix.iter().position(|r| r.len() != n) {
            return Err(TopoError::Malformed(format!("row {row} is not of length {n}")));
        }
        let labels: Vec<String> = match &doc.labels {
            Some(labels) if labels.len() != n => {
                return Err(TopoError::Malformed(format!(
                    "{} labels for {n} nodes",
                    labels.len()
                )))
            }
            Some(labels) => labels.clone(),
            None => (0..n).map(|i| format!("N{i}")).collect(),
        };
        let mut seen = HashSet::new();
        for label in &labels {
            check_label(label)?;
            if !seen.insert(label.as_str()) {
                return Err(TopoError::DuplicateLabel(label.clone()));
            }
        }
        if let Some(media) = &doc.media {
            if media.len() != n || media.iter().any(|r| r.len() != n) {
                return Err(TopoError::Malformed("media matrix shape differs".into()));
            }
        }
        let medium_at = |i: usize, j: usize| {
            doc.media
                .as_ref()
                .and_then(|m| m[i][j])
                .unwrap_or_default()
        };

        let mut links = vec![vec![None; n]; n];
        for i in 0..n {
            for j in 0..n {
                let entry = doc.matrix[i][j];
                if i == j {
                    match entry {
                        None => {}
                        Some(d) if d == 0.0 => {}
                        Some(_) => return Err(TopoError::SelfLoop(i)),
                    }
                    continue;
                }
                if let Some(delay) = entry {
                    if !(delay > 0.0) || !delay.is_finite() {
                        return Err(TopoError::NonPositiveDelay { i, j, delay });
                    }
                }
                let mirror = doc.matrix[j][i];
                if entry != mirror || (entry.is_some() && medium_at(i, j) != medium_at(j, i)) {
                    return Err(TopoError::Asymmetric(i.min(j), i.max(j)));
                }
                links[i][j] = entry.map(|delay| LinkSpec::new(delay, medium_at(i, j)));
            }
        }
        let nodes = labels
            .into_iter()
            .enumerate()
            .map(|(index, label)| NodeId { index, label })
            .collect();
        Ok(Topology { nodes, links })
    }

    /// Canonical adjacency document. `media` is only emitted when some link is wireless.
    pub fn to_document(&self) -> AdjacencyDocument {
        let n = self.node_count();
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| self.links[i][j].map(|l| l.delay_ms)).collect())
            .collect();
        let any_wireless = self
            .links
            .iter()
            .flatten()
            .flatten()
            .any(|l| l.medium == Medium::Wireless);
        let media = any_wireless.then(|| {
            (0..n)
                .map(|i| (0..n).map(|j| self.links[i][j].map(|l| l.medium)).collect())
                .collect()
        });
        AdjacencyDocument {
            labels: Some(self.nodes.iter().map(|n| n.label.clone()).collect()),
            matrix,
            media,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("adjacency document serializes")
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> Option<&NodeId> {
        self.nodes.get(index)
    }

    pub fn find(&self, label: &str) -> Result<&NodeId, TopoError> {
        self.nodes
            .iter()
            .find(|n| n.label == label)
            .ok_or_else(|| TopoError::UnknownNode(label.to_string()))
    }

    pub fn link(&self, a: usize, b: usize) -> Option<&LinkSpec> {
        self.links.get(a)?.get(b)?.as_ref()
    }

    /// Neighbors of `node` in index order, together with the link.
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = (usize, &LinkSpec)> + '_ {
        self.links[node]
            .iter()
            .enumerate()
            .filter_map(|(j, l)| l.as_ref().map(|l| (j, l)))
    }

    /// Every link once, as `(i, j, spec)` with `i < j`.
    pub fn links(&self) -> impl Iterator<Item = (usize, usize, &LinkSpec)> + '_ {
        self.links.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .skip(i + 1)
                .filter_map(move |(j, l)| l.as_ref().map(|l| (i, j, l)))
        })
    }

    pub fn link_count(&self) -> usize {
        self.links().count()
    }

    /// Label of the link `a-b`, lower index first.
    pub fn link_label(&self, a: usize, b: usize) -> String {
        let (lo, hi) = (a.min(b), a.max(b));
        format!("{}-{}", self.nodes[lo].label, self.nodes[hi].label)
    }

    /// Connectivity over links that are present, regardless of their up flag.
    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for (v, _) in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn validation_report(&self) -> ValidationReport {
        let connected = self.is_connected();
        let mut warnings = Vec::new();
        if !connected {
            warnings.push("topology is disconnected; unreachable destinations get no route".into());
        }
        ValidationReport {
            node_count: self.node_count(),
            link_count: self.link_count(),
            connected,
            warnings,
        }
    }

    /// Set the up flag on both directions of link `a-b`.
    ///
    /// Routes compiled earlier are left untouched.
    pub fn set_link_state(&mut self, a: usize, b: usize, up: bool) -> Result<(), TopoError> {
        let missing = || {
            let name = |i: usize| {
                self.nodes
                    .get(i)
                    .map(|n| n.label.clone())
                    .unwrap_or_else(|| i.to_string())
            };
            TopoError::NoSuchLink(name(a), name(b))
        };
        if a == b || self.link(a, b).is_none() {
            return Err(missing());
        }
        for (x, y) in [(a, b), (b, a)] {
            if let Some(link) = self.links[x][y].as_mut() {
                link.up = up;
            }
        }
        Ok(())
    }
}

/// Copy of `topo` with link `a-b` set up or down.
pub fn apply_link_state(
    topo: &Topology,
    a: &NodeId,
    b: &NodeId,
    up: bool,
) -> Result<Topology, TopoError> {
    let mut next = topo.clone();
    next.set_link_state(a.index, b.index, up)?;
    Ok(next)
}

/// The six-node diamond used by the link-failure experiment:
/// C0-R1, R1-R2, R1-R3, R2-R4, R3-R4, R4-P1 with delays 1/20/5/20/5/1 ms.
///
/// Only the R3-R4 link and node roles come from the original figure; the rest
/// of the wiring is a reconstruction with one fast path through R3-R4 and one
/// slow path through R2.
pub fn canonical_diamond() -> Topology {
    let labels = ["C0", "R1", "R2", "R3", "R4", "P1"]
        .map(String::from)
        .to_vec();
    let wired = |d| LinkSpec::new(d, Medium::Wired);
    Topology::from_links(
        labels,
        [
            (0, 1, wired(1.0)),
            (1, 2, wired(20.0)),
            (1, 3, wired(5.0)),
            (2, 4, wired(20.0)),
            (3, 4, wired(5.0)),
            (4, 5, wired(1.0)),
        ],
    )
    .expect("diamond is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node_without_links() {
        let topo = parse_adjacency("[[null]]").unwrap();
        assert_eq!(topo.node_count(), 1);
        assert_eq!(topo.link_count(), 0);
        assert_eq!(topo.nodes()[0].label, "N0");
    }

    #[test]
    fn diamond_document_contains_r3_r4() {
        let doc = r#"{
            "labels": ["C0","R1","R2","R3","R4","P1"],
            "matrix": [
                [null, 1, null, null, null, null],
                [1, null, 20, 5, null, null],
                [null, 20, null, null, 20, null],
                [null, 5, null, null, 5, null],
                [null, null, 20, 5, null, 1],
                [null, null, null, null, 1, null]
            ]
        }"#;
        let topo = parse_adjacency(doc).unwrap();
        let r3 = topo.find("R3").unwrap().index;
        let r4 = topo.find("R4").unwrap().index;
        assert_eq!(topo.link(r3, r4).unwrap().delay_ms, 5.0);
        assert_eq!(topo, canonical_diamond());
    }

    #[test]
    fn error_kinds_are_distinct() {
        let asym = parse_adjacency("[[null, 5], [null, null]]").unwrap_err();
        assert_eq!(asym, TopoError::Asymmetric(0, 1));
        let neg = parse_adjacency("[[null, -1], [-1, null]]").unwrap_err();
        assert_eq!(neg.kind(), "non_positive_delay");
        let zero = parse_adjacency("[[null, 0], [0, null]]").unwrap_err();
        assert_eq!(zero.kind(), "non_positive_delay");
        let dup = parse_adjacency(r#"{"labels":["A","A"],"matrix":[[null,1],[1,null]]}"#)
            .unwrap_err();
        assert_eq!(dup, TopoError::DuplicateLabel("A".into()));
        assert_eq!(parse_adjacency("{").unwrap_err().kind(), "malformed");
        assert_eq!(parse_adjacency("[]").unwrap_err().kind(), "malformed");
        assert_eq!(parse_adjacency("[[null, 1]]").unwrap_err().kind(), "malformed");
        assert_eq!(parse_adjacency("[[3]]").unwrap_err().kind(), "self_loop");
    }

    #[test]
    fn asymmetric_delay_values() {
        let err = parse_adjacency("[[null, 5], [6, null]]").unwrap_err();
        assert_eq!(err.kind(), "asymmetric");
        let err = parse_adjacency(
            r#"{"matrix":[[null,5],[5,null]],"media":[[null,"wired"],["wireless",null]]}"#,
        )
        .unwrap_err();
        assert_eq!(err.kind(), "asymmetric");
    }

    #[test]
    fn zero_diagonal_is_accepted() {
        let topo = parse_adjacency("[[0, 2], [2, 0]]").unwrap();
        assert_eq!(topo.link_count(), 1);
    }

    #[test]
    fn labels_reject_separator_characters() {
        let err = parse_adjacency(r#"{"labels":["A-1","B"],"matrix":[[null,1],[1,null]]}"#)
            .unwrap_err();
        assert_eq!(err.kind(), "malformed");
    }

    #[test]
    fn disconnected_topology_is_flagged() {
        let topo = parse_adjacency("[[null, 1, null], [1, null, null], [null, null, null]]")
            .unwrap();
        let report = topo.validation_report();
        assert!(!report.connected);
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn link_state_changes() {
        let topo = canonical_diamond();
        let r3 = topo.find("R3").unwrap().clone();
        let r4 = topo.find("R4").unwrap().clone();
        let down = apply_link_state(&topo, &r3, &r4, false).unwrap();
        assert!(!down.link(3, 4).unwrap().up);
        assert!(!down.link(4, 3).unwrap().up);
        let twice = apply_link_state(&down, &r4, &r3, false).unwrap();
        assert_eq!(down, twice);

        let c0 = topo.find("C0").unwrap().clone();
        let p1 = topo.find("P1").unwrap().clone();
        let err = apply_link_state(&topo, &c0, &p1, false).unwrap_err();
        assert_eq!(err, TopoError::NoSuchLink("C0".into(), "P1".into()));
    }

    #[test]
    fn wireless_media_round_trip() {
        let text = r#"{"labels":["A","B"],"matrix":[[null,2.5],[2.5,null]],"media":[[null,"wireless"],["wireless",null]]}"#;
        let topo = parse_adjacency(text).unwrap();
        assert_eq!(topo.link(0, 1).unwrap().medium, Medium::Wireless);
        assert_eq!(topo.to_json(), text);
    }
}
