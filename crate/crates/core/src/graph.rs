//! Metric trees and directed graphs of strings.
//!
//! Every edge is an interval `[0, length]`; `tail` sits at `x = 0` and `head`
//! at `x = length`. In tree mode edges point away from the root, so the head of
//! an edge is the vertex farther from the root.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::damping::DampingAssignment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Tree,
    Graph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: VertexId,
    pub label: String,
    pub dirichlet: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub label: String,
    pub tail: VertexId,
    pub head: VertexId,
    pub length: f64,
}

impl Edge {
    /// The endpoint other than `k`, if `k` is an endpoint.
    pub fn opposite(&self, k: VertexId) -> Option<VertexId> {
        if self.tail == k {
            Some(self.head)
        } else if self.head == k {
            Some(self.tail)
        } else {
            None
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph has no edges")]
    NoEdges,
    #[error("duplicate identifier `{0}`")]
    DuplicateId(String),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("edge `{0}` is a self-loop")]
    SelfLoop(String),
    #[error("edge `{edge}` has nonpositive length {length}")]
    NonpositiveLength { edge: String, length: f64 },
    #[error("graph is not connected")]
    DisconnectedGraph,
    #[error("tree mode requires an acyclic graph ({edges} edges on {vertices} vertices)")]
    CycleInTreeMode { vertices: usize, edges: usize },
    #[error("tree mode requires exactly one root, found {0}")]
    RootCount(usize),
    #[error("root `{root}` must have degree 1, has degree {degree}")]
    BadRootDegree { root: String, degree: usize },
    #[error("edge `{0}` points toward the root; tree edges must be oriented away from it")]
    EdgeTowardRoot(String),
    #[error("vertex `{0}` has degree 1 but is not a Dirichlet vertex")]
    LeafNotDirichlet(String),
    #[error("vertex `{0}` is Dirichlet but interior (tree mode requires Dirichlet vertices to be leaves)")]
    DirichletInteriorVertex(String),
    #[error("no Dirichlet vertex: the stiffness matrix would be singular")]
    NoDirichletVertex,
    #[error("edge flips are only allowed in graph mode")]
    FlipInTreeMode,
}

/// A validated metric graph. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    mode: Mode,
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    root: Option<VertexId>,
    incident: Vec<Vec<(EdgeId, i8)>>,
}

impl MetricGraph {
    /// Validates the topology and builds the graph. Vertex and edge ids must
    /// equal their positions in the input vectors.
    pub fn new(
        mode: Mode,
        vertices: Vec<Vertex>,
        edges: Vec<Edge>,
        root: Option<VertexId>,
    ) -> Result<Self, GraphError> {
        if edges.is_empty() {
            return Err(GraphError::NoEdges);
        }
        for (i, v) in vertices.iter().enumerate() {
            assert_eq!(v.id.0, i, "vertex ids must be positional");
        }
        let nv = vertices.len();
        let mut incident = vec![Vec::new(); nv];
        for (j, e) in edges.iter().enumerate() {
            assert_eq!(e.id.0, j, "edge ids must be positional");
            for end in [e.tail, e.head] {
                if end.0 >= nv {
                    return Err(GraphError::UnknownVertex(end.to_string()));
                }
            }
            if e.tail == e.head {
                return Err(GraphError::SelfLoop(e.label.clone()));
            }
            if !(e.length > 0.0) || !e.length.is_finite() {
                return Err(GraphError::NonpositiveLength {
                    edge: e.label.clone(),
                    length: e.length,
                });
            }
            incident[e.tail.0].push((e.id, -1));
            incident[e.head.0].push((e.id, 1));
        }

        let g = MetricGraph {
            mode,
            vertices,
            edges,
            root,
            incident,
        };
        if g.bfs_depths(VertexId(0)).iter().any(Option::is_none) {
            return Err(GraphError::DisconnectedGraph);
        }
        if !g.vertices.iter().any(|v| v.dirichlet) {
            return Err(GraphError::NoDirichletVertex);
        }
        for v in &g.vertices {
            if g.degree(v.id) == 1 && !v.dirichlet {
                return Err(GraphError::LeafNotDirichlet(v.label.clone()));
            }
        }
        if mode == Mode::Tree {
            g.check_tree()?;
        }
        Ok(g)
    }

    fn check_tree(&self) -> Result<(), GraphError> {
        let (nv, ne) = (self.vertices.len(), self.edges.len());
        if ne != nv - 1 {
            return Err(GraphError::CycleInTreeMode {
                vertices: nv,
                edges: ne,
            });
        }
        let root = self.root.ok_or(GraphError::RootCount(0))?;
        let degree = self.degree(root);
        if degree != 1 {
            return Err(GraphError::BadRootDegree {
                root: self.vertices[root.0].label.clone(),
                degree,
            });
        }
        for v in &self.vertices {
            if v.dirichlet && self.degree(v.id) > 1 {
                return Err(GraphError::DirichletInteriorVertex(v.label.clone()));
            }
        }
        let depth = self.bfs_depths(root);
        for e in &self.edges {
            if depth[e.tail.0] >= depth[e.head.0] {
                return Err(GraphError::EdgeTowardRoot(e.label.clone()));
            }
        }
        Ok(())
    }

    fn bfs_depths(&self, start: VertexId) -> Vec<Option<usize>> {
        let mut depth = vec![None; self.vertices.len()];
        depth[start.0] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(k) = queue.pop_front() {
            let d = depth[k.0].unwrap_or(0);
            for &(j, _) in &self.incident[k.0] {
                let other = self.edges[j.0].opposite(k).expect("incident edge");
                if depth[other.0].is_none() {
                    depth[other.0] = Some(d + 1);
                    queue.push_back(other);
                }
            }
        }
        depth
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn root(&self) -> Option<VertexId> {
        self.root
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex(&self, k: VertexId) -> &Vertex {
        &self.vertices[k.0]
    }

    pub fn edge(&self, j: EdgeId) -> &Edge {
        &self.edges[j.0]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, k: VertexId) -> usize {
        self.incident[k.0].len()
    }

    pub fn is_dirichlet(&self, k: VertexId) -> bool {
        self.vertices[k.0].dirichlet
    }

    pub fn dirichlet_vertices(&self) -> Vec<VertexId> {
        self.vertices
            .iter()
            .filter(|v| v.dirichlet)
            .map(|v| v.id)
            .collect()
    }

    /// Vertices carrying transmission conditions, i.e. every non-Dirichlet vertex.
    pub fn interior_vertices(&self) -> Vec<VertexId> {
        self.vertices
            .iter()
            .filter(|v| !v.dirichlet)
            .map(|v| v.id)
            .collect()
    }

    /// Edges adjacent to `k` with the incidence sign `d[k][j]`.
    pub fn adjacent_edges(&self, k: VertexId) -> Result<&[(EdgeId, i8)], GraphError> {
        self.incident
            .get(k.0)
            .map(Vec::as_slice)
            .ok_or_else(|| GraphError::UnknownVertex(k.to_string()))
    }

    pub fn incidence_matrix(&self) -> IncidenceMatrix {
        let mut m = IncidenceMatrix {
            rows: self.num_vertices(),
            cols: self.num_edges(),
            entries: vec![0; self.num_vertices() * self.num_edges()],
        };
        for e in &self.edges {
            m.entries[e.tail.0 * m.cols + e.id.0] = -1;
            m.entries[e.head.0 * m.cols + e.id.0] = 1;
        }
        m
    }

    /// In a tree-mode graph: the unique edge whose head is `k`.
    pub fn parent_edge(&self, k: VertexId) -> Option<EdgeId> {
        if self.mode != Mode::Tree {
            return None;
        }
        self.incident[k.0]
            .iter()
            .find(|&&(_, s)| s == 1)
            .map(|&(j, _)| j)
    }

    /// In a tree-mode graph: the edges whose tail is `k`.
    pub fn child_edges(&self, k: VertexId) -> Vec<EdgeId> {
        if self.mode != Mode::Tree {
            return Vec::new();
        }
        self.incident[k.0]
            .iter()
            .filter(|&&(_, s)| s == -1)
            .map(|&(j, _)| j)
            .collect()
    }

    /// The same network reinterpreted in graph mode.
    pub fn to_graph_mode(&self) -> MetricGraph {
        MetricGraph {
            mode: Mode::Graph,
            ..self.clone()
        }
    }

    /// A copy with edge `j` reversed. Only graph mode permits arbitrary orientation.
    pub fn with_edge_flipped(&self, j: EdgeId) -> Result<MetricGraph, GraphError> {
        if self.mode == Mode::Tree {
            return Err(GraphError::FlipInTreeMode);
        }
        let mut edges = self.edges.clone();
        let e = &mut edges[j.0];
        std::mem::swap(&mut e.tail, &mut e.head);
        MetricGraph::new(self.mode, self.vertices.clone(), edges, self.root)
    }
}

/// Dense `|V| x |E|` incidence matrix with entries in {-1, 0, +1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<i8>,
}

impl IncidenceMatrix {
    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, k: VertexId, j: EdgeId) -> i8 {
        self.entries[k.0 * self.cols + j.0]
    }

    pub fn column(&self, j: EdgeId) -> Vec<i8> {
        (0..self.rows)
            .map(|k| self.entries[k * self.cols + j.0])
            .collect()
    }

    pub fn row(&self, k: VertexId) -> &[i8] {
        &self.entries[k.0 * self.cols..(k.0 + 1) * self.cols]
    }

    pub fn column_sums(&self) -> Vec<i32> {
        (0..self.cols)
            .map(|j| self.column(EdgeId(j)).iter().map(|&d| d as i32).sum())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// A maximal connected set of purely elastic edges.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElasticComponent {
    pub edges: Vec<EdgeId>,
    pub vertices: Vec<VertexId>,
    pub leaves: Vec<VertexId>,
    pub is_tree: bool,
    pub leaf_attachment_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub elastic_components: Vec<ElasticComponent>,
    pub has_kv_edge: bool,
    pub overall: Verdict,
    pub messages: Vec<String>,
}

/// Checks the structural hypotheses: at least one K-V edge, and every maximal
/// elastic subgraph is a tree whose leaves touch a K-V edge. With
/// `strict_leaves = false` a leaf may instead be a Dirichlet vertex.
pub fn validate_structure(
    g: &MetricGraph,
    damping: &DampingAssignment,
    strict_leaves: bool,
) -> ValidationReport {
    let elastic: Vec<bool> = g
        .edges()
        .iter()
        .map(|e| damping.profile(e.id).is_zero())
        .collect();
    let has_kv_edge = elastic.iter().any(|&z| !z);
    let mut messages = Vec::new();
    if !has_kv_edge {
        messages.push("network has no Kelvin-Voigt edge".to_string());
    }

    let mut seen = vec![false; g.num_edges()];
    let mut components = Vec::new();
    for start in 0..g.num_edges() {
        if !elastic[start] || seen[start] {
            continue;
        }
        let mut comp_edges = Vec::new();
        let mut comp_vertices = Vec::new();
        let mut in_comp = vec![false; g.num_vertices()];
        let mut queue = VecDeque::from([EdgeId(start)]);
        seen[start] = true;
        while let Some(j) = queue.pop_front() {
            comp_edges.push(j);
            let e = g.edge(j);
            for k in [e.tail, e.head] {
                if !in_comp[k.0] {
                    in_comp[k.0] = true;
                    comp_vertices.push(k);
                }
                for &(jj, _) in &g.incident[k.0] {
                    if elastic[jj.0] && !seen[jj.0] {
                        seen[jj.0] = true;
                        queue.push_back(jj);
                    }
                }
            }
        }
        comp_edges.sort();
        comp_vertices.sort();

        let is_tree = comp_edges.len() + 1 == comp_vertices.len();
        let leaves: Vec<VertexId> = comp_vertices
            .iter()
            .copied()
            .filter(|&k| {
                g.incident[k.0]
                    .iter()
                    .filter(|(j, _)| elastic[j.0])
                    .count()
                    == 1
            })
            .collect();
        let mut leaf_attachment_ok = true;
        for &k in &leaves {
            let touches_kv = g.incident[k.0].iter().any(|(j, _)| !elastic[j.0]);
            let allowed = touches_kv || (!strict_leaves && g.is_dirichlet(k));
            if !allowed {
                leaf_attachment_ok = false;
                messages.push(format!(
                    "elastic leaf `{}` is not attached to a Kelvin-Voigt edge",
                    g.vertex(k).label
                ));
            }
        }
        if !is_tree {
            let labels: Vec<&str> = comp_edges
                .iter()
                .map(|&j| g.edge(j).label.as_str())
                .collect();
            messages.push(format!(
                "elastic subgraph {{{}}} contains a cycle",
                labels.join(", ")
            ));
        }
        components.push(ElasticComponent {
            edges: comp_edges,
            vertices: comp_vertices,
            leaves,
            is_tree,
            leaf_attachment_ok,
        });
    }

    let ok = has_kv_edge
        && components
            .iter()
            .all(|c| c.is_tree && c.leaf_attachment_ok);
    ValidationReport {
        elastic_components: components,
        has_kv_edge,
        overall: if ok { Verdict::Pass } else { Verdict::Fail },
        messages,
    }
}
