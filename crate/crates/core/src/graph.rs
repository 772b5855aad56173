//! Labeled property graphs of mail infrastructure.
//!
//! A graph is a directed multigraph over domains, IPs, ASes and countries.
//! Edge endpoints are label-checked at load time, so the grounding code can
//! assume every `A` edge goes from a domain to an IP and so on.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("validation error at {location}: {reason}")]
    Validation { location: String, reason: String },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
}

pub type NodeId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeLabel {
    #[serde(rename = "IP")]
    Ip,
    Dom,
    #[serde(rename = "AS")]
    As,
    Cntry,
    Provider,
}

impl NodeLabel {
    /// Providers are mail domains, so they satisfy every `Dom` endpoint constraint.
    pub fn is_domain(self) -> bool {
        matches!(self, NodeLabel::Dom | NodeLabel::Provider)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeKind {
    #[serde(rename = "ORIG")]
    Orig,
    #[serde(rename = "LOC")]
    Loc,
    A,
    #[serde(rename = "MX")]
    Mx,
    #[serde(rename = "NS")]
    Ns,
    #[serde(rename = "DNS")]
    Dns,
    #[serde(rename = "RES")]
    Res,
    #[serde(rename = "RTE")]
    Rte,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 8] = [
        EdgeKind::Orig,
        EdgeKind::Loc,
        EdgeKind::A,
        EdgeKind::Mx,
        EdgeKind::Ns,
        EdgeKind::Dns,
        EdgeKind::Res,
        EdgeKind::Rte,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Orig => "ORIG",
            EdgeKind::Loc => "LOC",
            EdgeKind::A => "A",
            EdgeKind::Mx => "MX",
            EdgeKind::Ns => "NS",
            EdgeKind::Dns => "DNS",
            EdgeKind::Res => "RES",
            EdgeKind::Rte => "RTE",
        }
    }

    fn endpoints_ok(self, src: NodeLabel, dst: NodeLabel) -> bool {
        use NodeLabel::*;
        match self {
            EdgeKind::A | EdgeKind::Res => src.is_domain() && dst == Ip,
            EdgeKind::Mx | EdgeKind::Ns | EdgeKind::Dns => src.is_domain() && dst.is_domain(),
            EdgeKind::Orig => src == Ip && dst == As,
            EdgeKind::Loc => (src.is_domain() || src == Ip || src == As) && dst == Cntry,
            EdgeKind::Rte => src == As && dst == As,
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EdgeKind {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EdgeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| GraphError::Syntax(format!("unknown edge label `{s}`")))
    }
}

/// Label of an edge; `transit` is the intermediate AS of an `RTE` edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeLabel {
    pub kind: EdgeKind,
    pub transit: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeId,
    pub label: EdgeKind,
    pub dst: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transit: Option<NodeId>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: BTreeMap<String, String>,
}

impl Edge {
    pub fn new(src: &str, label: EdgeKind, dst: &str) -> Self {
        Edge {
            src: src.to_string(),
            label,
            dst: dst.to_string(),
            transit: None,
            attrs: BTreeMap::new(),
        }
    }

    pub fn route(src: &str, dst: &str, transit: &str) -> Self {
        Edge {
            transit: Some(transit.to_string()),
            ..Edge::new(src, EdgeKind::Rte, dst)
        }
    }

    pub fn edge_label(&self) -> EdgeLabel {
        EdgeLabel {
            kind: self.label,
            transit: self.transit.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
}

/// On-disk form. Node attributes live in an optional top-level `attrs` map.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    nodes: BTreeMap<NodeId, NodeLabel>,
    edges: Vec<Edge>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    attrs: BTreeMap<NodeId, BTreeMap<String, String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PropertyGraph {
    nodes: BTreeMap<NodeId, NodeLabel>,
    edges: Vec<Edge>,
    node_attrs: BTreeMap<NodeId, BTreeMap<String, String>>,
}

impl PropertyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, name: &str, label: NodeLabel) -> Result<(), GraphError> {
        if name.is_empty() {
            return Err(GraphError::Validation {
                location: "nodes".into(),
                reason: "empty node name".into(),
            });
        }
        if self.nodes.insert(name.to_string(), label).is_some() {
            return Err(GraphError::Validation {
                location: format!("node `{name}`"),
                reason: "duplicate node".into(),
            });
        }
        Ok(())
    }

    pub fn add_edge(&mut self, edge: Edge) -> Result<(), GraphError> {
        self.check_edge(self.edges.len(), &edge)?;
        self.edges.push(edge);
        Ok(())
    }

    pub fn set_attr(&mut self, node: &str, key: &str, value: &str) -> Result<(), GraphError> {
        if !self.nodes.contains_key(node) {
            return Err(GraphError::UnknownNode(node.to_string()));
        }
        self.node_attrs
            .entry(node.to_string())
            .or_default()
            .insert(key.to_string(), value.to_string());
        Ok(())
    }

    fn check_edge(&self, index: usize, e: &Edge) -> Result<(), GraphError> {
        let loc = || format!("edge #{index} ({} -{}-> {})", e.src, e.label, e.dst);
        let label_of = |n: &str| {
            self.nodes
                .get(n)
                .copied()
                .ok_or_else(|| GraphError::Validation {
                    location: loc(),
                    reason: format!("dangling endpoint `{n}`"),
                })
        };
        let src = label_of(&e.src)?;
        let dst = label_of(&e.dst)?;
        if !e.label.endpoints_ok(src, dst) {
            return Err(GraphError::Validation {
                location: loc(),
                reason: format!("{} edge cannot connect {src:?} to {dst:?}", e.label),
            });
        }
        match (&e.label, &e.transit) {
            (EdgeKind::Rte, None) => {
                return Err(GraphError::Validation {
                    location: loc(),
                    reason: "RTE edge without transit AS".into(),
                })
            }
            (EdgeKind::Rte, Some(t)) => {
                if label_of(t)? != NodeLabel::As {
                    return Err(GraphError::Validation {
                        location: loc(),
                        reason: format!("transit `{t}` is not an AS"),
                    });
                }
            }
            (_, Some(t)) => {
                return Err(GraphError::Validation {
                    location: loc(),
                    reason: format!("transit `{t}` on non-RTE edge"),
                })
            }
            (_, None) => {}
        }
        let dup = self.edges.iter().any(|o| {
            o.src == e.src && o.label == e.label && o.dst == e.dst && o.transit == e.transit
        });
        if dup {
            return Err(GraphError::Validation {
                location: loc(),
                reason: "duplicate edge".into(),
            });
        }
        Ok(())
    }

    pub fn label(&self, v: &str) -> Option<NodeLabel> {
        self.nodes.get(v).copied()
    }

    pub fn contains(&self, v: &str) -> bool {
        self.nodes.contains_key(v)
    }

    /// Nodes in lexicographic order.
    pub fn nodes(&self) -> impl Iterator<Item = (&NodeId, NodeLabel)> {
        self.nodes.iter().map(|(n, l)| (n, *l))
    }

    pub fn nodes_with(&self, pred: impl Fn(NodeLabel) -> bool) -> Vec<&NodeId> {
        self.nodes
            .iter()
            .filter(|(_, l)| pred(**l))
            .map(|(n, _)| n)
            .collect()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Edges in insertion order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edges_of(&self, kind: EdgeKind) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.label == kind)
    }

    pub fn attr(&self, node: &str, key: &str) -> Option<&str> {
        self.node_attrs.get(node)?.get(key).map(String::as_str)
    }

    pub fn flag(&self, node: &str, key: &str) -> bool {
        matches!(self.attr(node, key), Some("true") | Some("1") | Some("yes"))
    }

    /// Root name servers cannot be corrupted.
    pub fn is_root_server(&self, node: &str) -> bool {
        self.flag(node, "rns")
    }

    /// Targets of `kind` edges leaving `v`, in insertion order.
    pub fn succ(&self, v: &str, kind: EdgeKind) -> Vec<&NodeId> {
        self.edges
            .iter()
            .filter(|e| e.label == kind && e.src == v)
            .map(|e| &e.dst)
            .collect()
    }

    /// Sources of `kind` edges entering `v`, in insertion order.
    pub fn pred(&self, v: &str, kind: EdgeKind) -> Vec<&NodeId> {
        self.edges
            .iter()
            .filter(|e| e.label == kind && e.dst == v)
            .map(|e| &e.src)
            .collect()
    }

    pub fn has_edge(&self, src: &str, kind: EdgeKind, dst: &str) -> bool {
        self.edges
            .iter()
            .any(|e| e.label == kind && e.src == src && e.dst == dst)
    }

    pub fn neighbors(
        &self,
        v: &str,
        kind: EdgeKind,
        direction: Direction,
    ) -> Result<Vec<(NodeId, EdgeLabel)>, GraphError> {
        if !self.contains(v) {
            return Err(GraphError::UnknownNode(v.to_string()));
        }
        Ok(self
            .edges
            .iter()
            .filter(|e| e.label == kind)
            .filter_map(|e| match direction {
                Direction::Out if e.src == v => Some((e.dst.clone(), e.edge_label())),
                Direction::In if e.dst == v => Some((e.src.clone(), e.edge_label())),
                _ => None,
            })
            .collect())
    }

    pub fn to_json(&self) -> String {
        let doc = GraphDoc {
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
            attrs: self.node_attrs.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("graph serialization is infallible")
    }
}

pub fn load_graph(source: &[u8]) -> Result<PropertyGraph, GraphError> {
    let text = std::str::from_utf8(source).map_err(|e| GraphError::Syntax(e.to_string()))?;
    let doc: GraphDoc =
        serde_json::from_str(text).map_err(|e| GraphError::Syntax(e.to_string()))?;
    let mut g = PropertyGraph::new();
    for (name, label) in doc.nodes {
        g.add_node(&name, label)?;
    }
    for edge in doc.edges {
        g.add_edge(edge)?;
    }
    for (node, kv) in doc.attrs {
        if !g.contains(&node) {
            return Err(GraphError::Validation {
                location: format!("attrs of `{node}`"),
                reason: format!("dangling endpoint `{node}`"),
            });
        }
        for (k, v) in kv {
            g.set_attr(&node, &k, &v)?;
        }
    }
    Ok(g)
}

pub fn load_graph_file(path: &std::path::Path) -> Result<PropertyGraph, GraphError> {
    let bytes =
        std::fs::read(path).map_err(|e| GraphError::Syntax(format!("{}: {e}", path.display())))?;
    load_graph(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PropertyGraph {
        let mut g = PropertyGraph::new();
        g.add_node("gmail.com", NodeLabel::Provider).unwrap();
        g.add_node("mx.gmail.com", NodeLabel::Dom).unwrap();
        g.add_node("1.1.1.1", NodeLabel::Ip).unwrap();
        g.add_node("AS1", NodeLabel::As).unwrap();
        g.add_node("AS2", NodeLabel::As).unwrap();
        g.add_node("AS3", NodeLabel::As).unwrap();
        g.add_edge(Edge::new("gmail.com", EdgeKind::Mx, "mx.gmail.com"))
            .unwrap();
        g.add_edge(Edge::new("mx.gmail.com", EdgeKind::A, "1.1.1.1"))
            .unwrap();
        g.add_edge(Edge::new("1.1.1.1", EdgeKind::Orig, "AS1"))
            .unwrap();
        g.add_edge(Edge::route("AS1", "AS2", "AS3")).unwrap();
        g
    }

    #[test]
    fn empty_document() {
        let g = load_graph(br#"{"nodes":{},"edges":[]}"#).unwrap();
        assert_eq!(g.node_count(), 0);
        assert!(g.edges().is_empty());
    }

    #[test]
    fn dangling_endpoint_is_named() {
        let err =
            load_graph(br#"{"nodes":{"x":"Dom"},"edges":[{"src":"x","label":"A","dst":"y"}]}"#)
                .unwrap_err();
        match err {
            GraphError::Validation { reason, .. } => assert!(reason.contains("`y`"), "{reason}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn incompatible_labels_rejected() {
        let mut g = small();
        let err = g
            .add_edge(Edge::new("1.1.1.1", EdgeKind::A, "mx.gmail.com"))
            .unwrap_err();
        assert!(matches!(err, GraphError::Validation { .. }));
    }

    #[test]
    fn rte_needs_as_transit() {
        let mut g = small();
        assert!(g.add_edge(Edge::new("AS1", EdgeKind::Rte, "AS2")).is_err());
        assert!(g.add_edge(Edge::route("AS1", "AS2", "1.1.1.1")).is_err());
        // parallel route through a different transit is fine
        g.add_edge(Edge::route("AS1", "AS2", "AS1")).unwrap();
        assert!(g.add_edge(Edge::route("AS1", "AS2", "AS3")).is_err());
    }

    #[test]
    fn transit_only_on_rte() {
        let err = load_graph(
            br#"{"nodes":{"a":"Dom","b":"Dom","t":"AS"},"edges":[{"src":"a","label":"MX","dst":"b","transit":"t"}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::Validation { .. }));
    }

    #[test]
    fn malformed_json() {
        assert!(matches!(load_graph(b"{nodes"), Err(GraphError::Syntax(_))));
        assert!(matches!(
            load_graph(br#"{"nodes":{"a":"Planet"},"edges":[]}"#),
            Err(GraphError::Syntax(_))
        ));
    }

    #[test]
    fn neighbors_in_and_out() {
        let g = small();
        let out = g
            .neighbors("gmail.com", EdgeKind::Mx, Direction::Out)
            .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, "mx.gmail.com");
        let inc = g.neighbors("AS2", EdgeKind::Rte, Direction::In).unwrap();
        assert_eq!(inc[0].1.transit.as_deref(), Some("AS3"));
        assert!(g
            .neighbors("1.1.1.1", EdgeKind::A, Direction::Out)
            .unwrap()
            .is_empty());
        assert_eq!(
            g.neighbors("nope", EdgeKind::A, Direction::Out),
            Err(GraphError::UnknownNode("nope".into()))
        );
    }

    #[test]
    fn json_round_trip_is_byte_stable() {
        let mut g = small();
        g.set_attr("mx.gmail.com", "rns", "false").unwrap();
        let text = g.to_json();
        let back = load_graph(text.as_bytes()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_json(), text);
    }
}
