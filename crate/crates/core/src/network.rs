//! JSON network description and its conversion into a validated graph with
//! damping.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::damping::{DampingAssignment, DampingProfile, ProfileSpec, DEFAULT_NODE_TOL};
use crate::discretize::{assemble, build_mesh_for, DiscreteSystem, Resolution};
use crate::graph::{Edge, EdgeId, GraphError, MetricGraph, Mode, Vertex, VertexId};
use crate::Error;

/// Vertex or edge identifier as written in the file: a string (multi-index
/// labels such as `"1.2"`) or an integer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(pub String);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label(s.to_string())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Str(String),
            Int(i64),
        }
        Ok(match Raw::deserialize(d)? {
            Raw::Str(s) => Label(s),
            Raw::Int(i) => Label(i.to_string()),
        })
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexEntry {
    pub id: Label,
    #[serde(default)]
    pub dirichlet: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub root: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub id: Label,
    pub from: Label,
    pub to: Label,
    pub length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    pub damping: ProfileSpec,
}

/// Numerical tolerances and classification thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// node conditions, relative to the largest damping value
    pub node: f64,
    /// require every elastic leaf to touch a K-V edge (Dirichlet leaves not accepted)
    pub strict_leaves: bool,
    /// largest resolvent slope still called bounded
    pub exponential_max_slope: f64,
    /// slope band called polynomial growth
    pub polynomial_slope: [f64; 2],
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            node: DEFAULT_NODE_TOL,
            strict_leaves: false,
            exponential_max_slope: 0.1,
            polynomial_slope: [0.3, 0.7],
        }
    }
}

/// The network file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub mode: Mode,
    pub vertices: Vec<VertexEntry>,
    pub edges: Vec<EdgeEntry>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl NetworkSpec {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("network spec serializes")
    }

    /// The same network declared in graph mode (root flag dropped).
    pub fn as_graph_mode(&self) -> NetworkSpec {
        let mut spec = self.clone();
        spec.mode = Mode::Graph;
        for v in &mut spec.vertices {
            v.root = false;
        }
        spec
    }
}

/// Builds and validates the graph described by `spec`.
pub fn build_graph(spec: &NetworkSpec) -> Result<MetricGraph, GraphError> {
    let mut index: HashMap<&Label, VertexId> = HashMap::new();
    let mut vertices = Vec::with_capacity(spec.vertices.len());
    let mut roots = Vec::new();
    for (i, v) in spec.vertices.iter().enumerate() {
        if index.insert(&v.id, VertexId(i)).is_some() {
            return Err(GraphError::DuplicateId(v.id.0.clone()));
        }
        if v.root {
            roots.push(VertexId(i));
        }
        vertices.push(Vertex {
            id: VertexId(i),
            label: v.id.0.clone(),
            dirichlet: v.dirichlet,
        });
    }
    let mut edge_ids = HashMap::new();
    let mut edges = Vec::with_capacity(spec.edges.len());
    for (j, e) in spec.edges.iter().enumerate() {
        if edge_ids.insert(&e.id, j).is_some() {
            return Err(GraphError::DuplicateId(e.id.0.clone()));
        }
        let lookup = |l: &Label| {
            index
                .get(l)
                .copied()
                .ok_or_else(|| GraphError::UnknownVertex(l.0.clone()))
        };
        edges.push(Edge {
            id: EdgeId(j),
            label: e.id.0.clone(),
            tail: lookup(&e.from)?,
            head: lookup(&e.to)?,
            length: e.length,
        });
    }
    let root = match spec.mode {
        Mode::Tree => {
            if roots.len() != 1 {
                return Err(GraphError::RootCount(roots.len()));
            }
            Some(roots[0])
        }
        Mode::Graph => roots.first().copied(),
    };
    MetricGraph::new(spec.mode, vertices, edges, root)
}

/// A network ready for discretization.
#[derive(Debug, Clone)]
pub struct Network {
    pub graph: MetricGraph,
    pub damping: DampingAssignment,
    /// per-edge cell count overrides from the file
    pub cells: Vec<Option<usize>>,
    pub tolerances: Tolerances,
}

impl Network {
    pub fn from_spec(spec: &NetworkSpec) -> Result<Self, Error> {
        let graph = build_graph(spec)?;
        let profiles = spec
            .edges
            .iter()
            .map(|e| DampingProfile::new(e.damping.clone(), e.length))
            .collect::<Result<Vec<_>, _>>()?;
        let damping = DampingAssignment::new(&graph, profiles)?;
        Ok(Network {
            graph,
            damping,
            cells: spec.edges.iter().map(|e| e.cells).collect(),
            tolerances: spec.tolerances.clone(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let spec = NetworkSpec::from_json(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_spec(&spec)
    }

    /// `cells` on every edge except those with a count in the file.
    pub fn resolution(&self, cells: usize) -> Resolution {
        if self.cells.iter().all(Option::is_none) {
            Resolution::CellsPerEdge(cells)
        } else {
            Resolution::PerEdge(self.cells.iter().map(|c| c.unwrap_or(cells)).collect())
        }
    }

    /// Mesh (with damping breakpoints on nodes) and assembled matrices.
    pub fn discretize(&self, resolution: &Resolution) -> Result<DiscreteSystem, Error> {
        let mesh = build_mesh_for(&self.graph, resolution, &self.damping)?;
        Ok(assemble(&mesh, &self.damping)?)
    }
}
