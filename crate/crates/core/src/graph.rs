//! The influence graph assembled from directional cross-map decisions:
//! coordinated-user marking, leader/follower ranking by net-degree,
//! community detection and graph exports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::ccm::CrossMapResult;
use crate::ingest::Label;
use crate::louvain;

/// A detected influence flow `source => target`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceEdge {
    pub source: String,
    pub target: String,
    pub rho_max: f64,
    pub slope: f64,
}

/// Directed graph of detected influence flows. Nodes include every user that
/// appeared in a scan result, so isolated users survive an all-false run.
#[derive(Debug, Clone, Default)]
pub struct InfluenceGraph {
    nodes: BTreeMap<String, Option<Label>>,
    edges: Vec<InfluenceEdge>,
}

/// In/out/net degree of one node; leaders rank high, followers negative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeDegreeReport {
    pub user_id: String,
    pub indegree: usize,
    pub outdegree: usize,
    pub net_degree: i64,
}

/// Build the graph from scan results: an edge `u1 -> u2` exists iff the
/// directional decision for `u1 => u2` was true. Self-loops and duplicate
/// ordered pairs are ignored.
pub fn build_graph(results: &[CrossMapResult]) -> InfluenceGraph {
    let records: Vec<crate::eval::EdgeRecord> =
        results.iter().map(crate::eval::EdgeRecord::from).collect();
    build_graph_from_records(&records)
}

/// Same as [`build_graph`] over the shared edge schema, so baseline and
/// re-loaded detections feed the identical graph machinery.
pub fn build_graph_from_records(records: &[crate::eval::EdgeRecord]) -> InfluenceGraph {
    let mut graph = InfluenceGraph::default();
    let mut seen = BTreeSet::new();
    for r in records {
        graph.nodes.entry(r.source.clone()).or_insert(None);
        graph.nodes.entry(r.mapper.clone()).or_insert(None);
        if !r.decision || r.source == r.mapper {
            continue;
        }
        if !seen.insert((r.source.clone(), r.mapper.clone())) {
            continue;
        }
        graph.edges.push(InfluenceEdge {
            source: r.source.clone(),
            target: r.mapper.clone(),
            rho_max: r.rho_max.unwrap_or(f64::NAN),
            slope: r.slope.unwrap_or(f64::NAN),
        });
    }
    graph.edges.sort_by(|a, b| {
        a.source
            .cmp(&b.source)
            .then_with(|| a.target.cmp(&b.target))
    });
    graph
}

impl InfluenceGraph {
    pub fn set_labels(&mut self, labels: &BTreeMap<String, Label>) {
        for (id, slot) in self.nodes.iter_mut() {
            *slot = labels.get(id).copied();
        }
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &String> {
        self.nodes.keys()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn label(&self, id: &str) -> Option<Label> {
        self.nodes.get(id).copied().flatten()
    }

    pub fn edges(&self) -> &[InfluenceEdge] {
        &self.edges
    }

    /// Users belonging to at least one influence pair (degree >= 1).
    pub fn mark_coordinated(&self) -> BTreeSet<String> {
        let mut marked = BTreeSet::new();
        for e in &self.edges {
            marked.insert(e.source.clone());
            marked.insert(e.target.clone());
        }
        marked
    }

    /// Degree reports sorted by net-degree desc, ties by outdegree desc then
    /// user id.
    pub fn rank_by_net_degree(&self) -> Vec<NodeDegreeReport> {
        let mut out: BTreeMap<&str, usize> = BTreeMap::new();
        let mut inn: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &self.edges {
            *out.entry(&e.source).or_default() += 1;
            *inn.entry(&e.target).or_default() += 1;
        }
        let mut reports: Vec<NodeDegreeReport> = self
            .nodes
            .keys()
            .map(|id| {
                let outdegree = out.get(id.as_str()).copied().unwrap_or(0);
                let indegree = inn.get(id.as_str()).copied().unwrap_or(0);
                NodeDegreeReport {
                    user_id: id.clone(),
                    indegree,
                    outdegree,
                    net_degree: outdegree as i64 - indegree as i64,
                }
            })
            .collect();
        reports.sort_by(|a, b| {
            b.net_degree
                .cmp(&a.net_degree)
                .then_with(|| b.outdegree.cmp(&a.outdegree))
                .then_with(|| a.user_id.cmp(&b.user_id))
        });
        reports
    }

    /// Undirected projection: one edge per unordered pair detected in either
    /// direction.
    pub fn undirected_edges(&self) -> BTreeSet<(String, String)> {
        self.edges
            .iter()
            .map(|e| {
                if e.source < e.target {
                    (e.source.clone(), e.target.clone())
                } else {
                    (e.target.clone(), e.source.clone())
                }
            })
            .collect()
    }

    /// Louvain community detection on the undirected projection, node
    /// visitation fixed to sorted user id. Every node (including isolated
    /// ones) is assigned a community id.
    pub fn detect_communities(&self, resolution: f64) -> BTreeMap<String, usize> {
        let ids: Vec<&String> = self.nodes.keys().collect();
        let index: BTreeMap<&str, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let edges: Vec<(usize, usize)> = self
            .undirected_edges()
            .iter()
            .map(|(a, b)| (index[a.as_str()], index[b.as_str()]))
            .collect();
        let communities = louvain::louvain(ids.len(), &edges, resolution);
        ids.into_iter()
            .zip(communities)
            .map(|(id, c)| (id.clone(), c))
            .collect()
    }

    /// DOT export with optional node attributes (ground-truth label,
    /// community, topic, net-degree) and the rho score per edge.
    pub fn to_dot(&self, attrs: &NodeAttributes) -> String {
        let mut dot = String::from("digraph influence {\n");
        for id in self.nodes.keys() {
            let mut parts = Vec::new();
            if let Some(label) = self.label(id) {
                parts.push(format!("label_class={label}"));
            }
            if let Some(c) = attrs.communities.and_then(|m| m.get(id)) {
                parts.push(format!("community={c}"));
            }
            if let Some(t) = attrs.topics.and_then(|m| m.get(id)) {
                parts.push(format!("topic={t}"));
            }
            if let Some(n) = attrs.net_degrees.and_then(|m| m.get(id)) {
                parts.push(format!("net_degree={n}"));
            }
            let _ = writeln!(dot, "  {:?} [{}];", id, parts.join(", "));
        }
        for e in &self.edges {
            let _ = writeln!(
                dot,
                "  {:?} -> {:?} [rho_max={}];",
                e.source, e.target, e.rho_max
            );
        }
        dot.push_str("}\n");
        dot
    }

    /// GraphML export mirroring the DOT attributes.
    pub fn to_graphml(&self, attrs: &NodeAttributes) -> String {
        let mut g = String::new();
        g.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        g.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
        g.push_str("  <key id=\"d0\" for=\"node\" attr.name=\"label_class\" attr.type=\"string\"/>\n");
        g.push_str("  <key id=\"d1\" for=\"node\" attr.name=\"community\" attr.type=\"int\"/>\n");
        g.push_str("  <key id=\"d2\" for=\"node\" attr.name=\"topic\" attr.type=\"int\"/>\n");
        g.push_str("  <key id=\"d3\" for=\"node\" attr.name=\"net_degree\" attr.type=\"int\"/>\n");
        g.push_str("  <key id=\"d4\" for=\"edge\" attr.name=\"rho_max\" attr.type=\"double\"/>\n");
        g.push_str("  <graph id=\"influence\" edgedefault=\"directed\">\n");
        for id in self.nodes.keys() {
            let _ = writeln!(g, "    <node id=\"{}\">", xml_escape(id));
            if let Some(label) = self.label(id) {
                let _ = writeln!(g, "      <data key=\"d0\">{label}</data>");
            }
            if let Some(c) = attrs.communities.and_then(|m| m.get(id)) {
                let _ = writeln!(g, "      <data key=\"d1\">{c}</data>");
            }
            if let Some(t) = attrs.topics.and_then(|m| m.get(id)) {
                let _ = writeln!(g, "      <data key=\"d2\">{t}</data>");
            }
            if let Some(n) = attrs.net_degrees.and_then(|m| m.get(id)) {
                let _ = writeln!(g, "      <data key=\"d3\">{n}</data>");
            }
            g.push_str("    </node>\n");
        }
        for (i, e) in self.edges.iter().enumerate() {
            let _ = writeln!(
                g,
                "    <edge id=\"e{i}\" source=\"{}\" target=\"{}\">",
                xml_escape(&e.source),
                xml_escape(&e.target)
            );
            let _ = writeln!(g, "      <data key=\"d4\">{}</data>", e.rho_max);
            g.push_str("    </edge>\n");
        }
        g.push_str("  </graph>\n</graphml>\n");
        g
    }
}

/// Optional per-node annotations for the graph exports.
#[derive(Debug, Clone, Copy, Default)]
pub struct NodeAttributes<'a> {
    pub communities: Option<&'a BTreeMap<String, usize>>,
    pub topics: Option<&'a BTreeMap<String, usize>>,
    pub net_degrees: Option<&'a BTreeMap<String, i64>>,
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
