//! Graph export: entities become nodes, triples become predicate-labelled
//! edges. Nodes carry a kind: `concept` for classes, `instance` for typed
//! individuals, `plain` otherwise.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kgstore::{KnowledgeBase, TripleKey};
use crate::rdf::INSTANCE_OF;

pub const DEFAULT_MAX_NODES: usize = 150;
pub const DEFAULT_RADIUS: usize = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExportError {
    #[error("seed entity {0:?} is not in the knowledge base")]
    UnknownSeedEntity(String),
    #[error("unsupported export format {0:?} (expected dot, graphml or json)")]
    UnsupportedFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Dot,
    Graphml,
    Json,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Dot => "dot",
            ExportFormat::Graphml => "graphml",
            ExportFormat::Json => "json",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = ExportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dot" => Ok(ExportFormat::Dot),
            "graphml" => Ok(ExportFormat::Graphml),
            "json" => Ok(ExportFormat::Json),
            _ => Err(ExportError::UnsupportedFormat(s.to_string())),
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportOptions {
    /// Keep the most connected nodes when there is no seed. Defaults to 150.
    pub max_nodes: Option<usize>,
    /// Export the neighbourhood of this entity instead.
    pub seed_entity: Option<String>,
    /// Hops from the seed, ignoring edge direction. Defaults to 1.
    pub radius: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Concept,
    Instance,
    Plain,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Concept => "concept",
            NodeKind::Instance => "instance",
            NodeKind::Plain => "plain",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    pub target: String,
    pub label: String,
}

/// A selected subgraph, nodes sorted by id and edges by (source, label, target).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

pub fn node_kinds(kb: &KnowledgeBase) -> BTreeMap<&str, NodeKind> {
    let mut kinds: BTreeMap<&str, NodeKind> = kb.entities().iter().map(|e| (e.as_str(), NodeKind::Plain)).collect();
    for t in kb.triples().filter(|t| t.p == INSTANCE_OF) {
        kinds.insert(&t.s, NodeKind::Instance);
    }
    let concepts = kb
        .concepts()
        .iter()
        .map(String::as_str)
        .chain(kb.triples().filter(|t| t.p == INSTANCE_OF).map(|t| t.o.as_str()));
    for c in concepts {
        kinds.insert(c, NodeKind::Concept);
    }
    kinds
}

fn neighbourhood<'a>(kb: &'a KnowledgeBase, seed: &'a str, radius: usize) -> BTreeSet<&'a str> {
    let mut adj: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for t in kb.triples() {
        adj.entry(&t.s).or_default().insert(&t.o);
        adj.entry(&t.o).or_default().insert(&t.s);
    }
    let mut seen = BTreeSet::from([seed]);
    let mut queue = VecDeque::from([(seed, 0)]);
    while let Some((n, d)) = queue.pop_front() {
        if d == radius {
            continue;
        }
        for &m in adj.get(n).into_iter().flatten() {
            if seen.insert(m) {
                queue.push_back((m, d + 1));
            }
        }
    }
    seen
}

fn most_connected(kb: &KnowledgeBase, max_nodes: usize) -> BTreeSet<&str> {
    let mut degree: BTreeMap<&str, usize> = kb.entities().iter().map(|e| (e.as_str(), 0)).collect();
    for t in kb.triples() {
        *degree.entry(&t.s).or_default() += 1;
        *degree.entry(&t.o).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = degree.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.into_iter().take(max_nodes).map(|(e, _)| e).collect()
}

/// Picks the nodes to export and every triple between them.
pub fn select_subgraph(kb: &KnowledgeBase, options: &ExportOptions) -> Result<Graph, ExportError> {
    let selected = match &options.seed_entity {
        Some(seed) => {
            if !kb.entities().contains(seed) {
                return Err(ExportError::UnknownSeedEntity(seed.clone()));
            }
            neighbourhood(kb, seed, options.radius.unwrap_or(DEFAULT_RADIUS))
        }
        None => most_connected(kb, options.max_nodes.unwrap_or(DEFAULT_MAX_NODES)),
    };
    let kinds = node_kinds(kb);
    let nodes = selected
        .iter()
        .map(|id| Node {
            id: id.to_string(),
            kind: kinds.get(id).copied().unwrap_or(NodeKind::Plain),
        })
        .collect();
    let mut keys: Vec<&TripleKey> = kb
        .triples()
        .filter(|t| selected.contains(t.s.as_str()) && selected.contains(t.o.as_str()))
        .collect();
    keys.sort_by(|a, b| (&a.s, &a.p, &a.o).cmp(&(&b.s, &b.p, &b.o)));
    let edges = keys
        .into_iter()
        .map(|t| Edge {
            source: t.s.clone(),
            target: t.o.clone(),
            label: t.p.clone(),
        })
        .collect();
    Ok(Graph { nodes, edges })
}

fn dot_quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn fill(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::Concept => "#f7dc6f",
        NodeKind::Instance => "#82e0aa",
        NodeKind::Plain => "#ffffff",
    }
}

pub fn to_dot(graph: &Graph) -> String {
    let mut out = String::from("digraph kg {\n  node [shape=box, style=filled];\n");
    for n in &graph.nodes {
        let _ = writeln!(
            out,
            "  {} [kind={}, fillcolor={}];",
            dot_quote(&n.id),
            dot_quote(n.kind.as_str()),
            dot_quote(fill(n.kind))
        );
    }
    for e in &graph.edges {
        let _ = writeln!(
            out,
            "  {} -> {} [label={}];",
            dot_quote(&e.source),
            dot_quote(&e.target),
            dot_quote(&e.label)
        );
    }
    out.push_str("}\n");
    out
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            // characters XML 1.0 cannot carry
            c if (c as u32) < 0x20 && !matches!(c, '\t' | '\n' | '\r') => {}
            c => out.push(c),
        }
    }
    out
}

pub fn to_graphml(graph: &Graph) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    out.push_str("  <key id=\"kind\" for=\"node\" attr.name=\"kind\" attr.type=\"string\"/>\n");
    out.push_str("  <key id=\"label\" for=\"edge\" attr.name=\"label\" attr.type=\"string\"/>\n");
    out.push_str("  <graph id=\"kg\" edgedefault=\"directed\">\n");
    let index: BTreeMap<&str, usize> = graph.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
    for (i, n) in graph.nodes.iter().enumerate() {
        let _ = writeln!(
            out,
            "    <node id=\"n{i}\"><data key=\"kind\">{}</data><desc>{}</desc></node>",
            n.kind.as_str(),
            xml_escape(&n.id)
        );
    }
    for (i, e) in graph.edges.iter().enumerate() {
        let _ = writeln!(
            out,
            "    <edge id=\"e{i}\" source=\"n{}\" target=\"n{}\"><data key=\"label\">{}</data></edge>",
            index[e.source.as_str()],
            index[e.target.as_str()],
            xml_escape(&e.label)
        );
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

pub fn to_json(graph: &Graph) -> String {
    let mut s = serde_json::to_string_pretty(graph).expect("graph serializes");
    s.push('\n');
    s
}

pub fn export_graph(kb: &KnowledgeBase, format: ExportFormat, options: &ExportOptions) -> Result<String, ExportError> {
    let graph = select_subgraph(kb, options)?;
    Ok(match format {
        ExportFormat::Dot => to_dot(&graph),
        ExportFormat::Graphml => to_graphml(&graph),
        ExportFormat::Json => to_json(&graph),
    })
}
