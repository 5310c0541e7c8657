//! Render-oriented view of a model: nodes, edges and classification.

use cgm_core::model::{Category, ElementKind, RelationEdge};
use cgm_core::{Cgm, Classification, GroupTag};
use serde::Serialize;

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Node {
    pub id: String,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub category: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub display_name: Option<String>,
    pub mandatory: bool,
}

#[derive(Serialize)]
pub struct Edge {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub from: String,
    pub to: String,
}

#[derive(Serialize)]
pub struct Graph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub classification: Classification,
}

pub fn relation_edge_id(index: usize) -> String {
    format!("rel:{index}")
}

fn category_name(c: Category) -> &'static str {
    match c {
        Category::Requirement => "requirement",
        Category::Intermediate => "intermediate",
        Category::Task => "task",
        Category::Assumption => "assumption",
    }
}

/// Refinements appear as their own nodes, linked from each source and to their
/// target.
pub fn graph(m: &Cgm) -> Graph {
    let class = m.classify();
    let mut nodes = Vec::new();
    for e in &m.elements {
        nodes.push(Node {
            id: e.label.clone(),
            kind: match e.kind {
                ElementKind::Goal => "goal",
                ElementKind::Assumption => "assumption",
            },
            category: m.category(&class, &e.label).map(category_name),
            display_name: e.display_name.clone(),
            mandatory: class.mandatory.contains(&e.label),
        });
    }
    let mut edges = Vec::new();
    for r in &m.refinements {
        nodes.push(Node { id: r.label.clone(), kind: "refinement", category: None, display_name: None, mandatory: false });
        for s in &r.sources {
            edges.push(Edge { id: format!("ref:{}:{s}", r.label), kind: "source", from: s.clone(), to: r.label.clone() });
        }
        edges.push(Edge { id: format!("ref:{}", r.label), kind: "target", from: r.label.clone(), to: r.target.clone() });
    }
    for (i, e) in m.edges.iter().enumerate() {
        let kind = match e {
            RelationEdge::Contribution { .. } => "contribution",
            RelationEdge::Mutual { .. } => "mutual",
            RelationEdge::Conflict { .. } => "conflict",
            RelationEdge::Binding { .. } => "binding",
        };
        let (a, b) = e.endpoints();
        edges.push(Edge { id: relation_edge_id(i), kind, from: a.to_string(), to: b.to_string() });
    }
    for (i, p) in m.preferences.iter().enumerate() {
        edges.push(Edge { id: format!("pref:{i}"), kind: "preference", from: p.preferred.clone(), to: p.over.clone() });
    }
    Graph { nodes, edges, classification: class }
}

/// A core group with the model labels and graph edges it refers to.
#[derive(Serialize)]
pub struct CoreGroup {
    pub tag: GroupTag,
    pub text: String,
    pub labels: Vec<String>,
    pub edges: Vec<String>,
}

pub fn core_groups(m: &Cgm, groups: &[GroupTag]) -> Vec<CoreGroup> {
    groups
        .iter()
        .map(|g| CoreGroup {
            tag: g.clone(),
            text: g.to_string(),
            labels: g.labels(m),
            edges: match g {
                GroupTag::RelationEdge { index } => vec![relation_edge_id(*index)],
                _ => Vec::new(),
            },
        })
        .collect()
}
