//! Per-edge grids and the global degree-of-freedom map.

use serde::Serialize;

use super::DiscretizeError;
use crate::damping::DampingAssignment;
use crate::graph::{EdgeId, MetricGraph, VertexId};

/// Minimum number of cells on any edge.
pub const MIN_CELLS: usize = 2;

/// How finely each edge is divided.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Resolution {
    /// The same number of cells on every edge.
    CellsPerEdge(usize),
    /// `ceil(density * length)` cells per edge.
    CellsPerUnitLength(f64),
    /// Explicit cell count per edge, indexed by `EdgeId`.
    PerEdge(Vec<usize>),
}

impl Resolution {
    /// Cell count for every edge of `g`.
    pub fn cell_counts(&self, g: &MetricGraph) -> Result<Vec<usize>, DiscretizeError> {
        let counts: Vec<usize> = match self {
            Resolution::CellsPerEdge(c) => vec![*c; g.num_edges()],
            Resolution::CellsPerUnitLength(rho) => g
                .edges()
                .iter()
                .map(|e| {
                    let c = rho * e.length;
                    if c.is_finite() && c > 0.0 {
                        (c - 1e-9).ceil().max(0.0) as usize
                    } else {
                        0
                    }
                })
                .collect(),
            Resolution::PerEdge(v) => {
                if v.len() != g.num_edges() {
                    return Err(DiscretizeError::ResolutionSize {
                        found: v.len(),
                        expected: g.num_edges(),
                    });
                }
                v.clone()
            }
        };
        for (j, &c) in counts.iter().enumerate() {
            if c < MIN_CELLS {
                return Err(DiscretizeError::ResolutionTooCoarse {
                    edge: g.edge(EdgeId(j)).label.clone(),
                    cells: c,
                });
            }
        }
        Ok(counts)
    }
}

/// Where a degree of freedom lives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DofLocation {
    /// A non-Dirichlet vertex (shared by every incident edge).
    Vertex(VertexId),
    /// An interior node of an edge at coordinate `x` measured from its tail.
    Edge { edge: EdgeId, x: f64 },
}

/// Grid on one edge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeMesh {
    pub edge: EdgeId,
    pub length: f64,
    /// node coordinates from tail (0) to head (length), strictly increasing
    pub nodes: Vec<f64>,
    /// global DOF of each node, `None` at Dirichlet vertices
    pub dofs: Vec<Option<usize>>,
}

impl EdgeMesh {
    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn min_cell(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// The discretized network.
///
/// Non-Dirichlet vertices are numbered first (in vertex order), followed by
/// the interior nodes of each edge (in edge order, tail to head).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mesh {
    #[serde(skip)]
    graph: MetricGraph,
    edges: Vec<EdgeMesh>,
    vertex_dofs: Vec<Option<usize>>,
    locations: Vec<DofLocation>,
}

/// Uniform grid on every edge.
pub fn build_mesh(g: &MetricGraph, resolution: &Resolution) -> Result<Mesh, DiscretizeError> {
    build(g, resolution, None)
}

/// Uniform grid on every edge with the damping breakpoints snapped onto
/// nodes, so every cell lies inside one polynomial piece.
pub fn build_mesh_for(
    g: &MetricGraph,
    resolution: &Resolution,
    damping: &DampingAssignment,
) -> Result<Mesh, DiscretizeError> {
    if damping.profiles().len() != g.num_edges() {
        return Err(DiscretizeError::MismatchedGraph);
    }
    build(g, resolution, Some(damping))
}

fn build(
    g: &MetricGraph,
    resolution: &Resolution,
    damping: Option<&DampingAssignment>,
) -> Result<Mesh, DiscretizeError> {
    let counts = resolution.cell_counts(g)?;
    let mut n = 0;
    let mut locations = Vec::new();
    let vertex_dofs: Vec<Option<usize>> = g
        .vertices()
        .iter()
        .map(|v| {
            if v.dirichlet {
                None
            } else {
                locations.push(DofLocation::Vertex(v.id));
                n += 1;
                Some(n - 1)
            }
        })
        .collect();
    let mut edges = Vec::with_capacity(g.num_edges());
    for (e, &cells) in g.edges().iter().zip(&counts) {
        let h = e.length / cells as f64;
        let mut nodes: Vec<f64> = (0..=cells).map(|i| i as f64 * h).collect();
        nodes[cells] = e.length;
        if let Some(d) = damping {
            let breaks = d.profile(e.id).interior_breaks();
            snap_breaks(&mut nodes, &breaks, h);
        }
        let last = nodes.len() - 1;
        let dofs = (0..nodes.len())
            .map(|i| {
                if i == 0 {
                    vertex_dofs[e.tail.0]
                } else if i == last {
                    vertex_dofs[e.head.0]
                } else {
                    locations.push(DofLocation::Edge {
                        edge: e.id,
                        x: nodes[i],
                    });
                    n += 1;
                    Some(n - 1)
                }
            })
            .collect();
        edges.push(EdgeMesh {
            edge: e.id,
            length: e.length,
            nodes,
            dofs,
        });
    }
    let mesh = Mesh {
        graph: g.clone(),
        edges,
        vertex_dofs,
        locations,
    };
    debug_assert_eq!(mesh.n(), mesh.expected_dof_count());
    Ok(mesh)
}

/// Moves the nearest interior node onto each breakpoint; inserts a node when
/// the nearest one is already taken by another breakpoint.
fn snap_breaks(nodes: &mut Vec<f64>, breaks: &[f64], h: f64) {
    let mut pinned = vec![false; nodes.len()];
    pinned[0] = true;
    *pinned.last_mut().unwrap() = true;
    for &b in breaks {
        if let Some(i) = nodes.iter().position(|&x| (x - b).abs() <= 1e-12 * h) {
            nodes[i] = b;
            pinned[i] = true;
            continue;
        }
        let i = (b / h).round() as usize;
        let i = i.clamp(1, nodes.len() - 2);
        // keep ordering: only move if b stays between the neighbours
        if !pinned[i] && nodes[i - 1] < b && b < nodes[i + 1] {
            nodes[i] = b;
            pinned[i] = true;
        } else {
            let at = nodes.partition_point(|&x| x < b);
            nodes.insert(at, b);
            pinned.insert(at, true);
        }
    }
}

impl Mesh {
    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    /// Number of free degrees of freedom.
    pub fn n(&self) -> usize {
        self.locations.len()
    }

    pub fn edges(&self) -> &[EdgeMesh] {
        &self.edges
    }

    pub fn edge(&self, j: EdgeId) -> &EdgeMesh {
        &self.edges[j.0]
    }

    pub fn vertex_dof(&self, k: VertexId) -> Option<usize> {
        self.vertex_dofs[k.0]
    }

    pub fn locations(&self) -> &[DofLocation] {
        &self.locations
    }

    pub fn total_cells(&self) -> usize {
        self.edges.iter().map(EdgeMesh::cells).sum()
    }

    /// Smallest cell width over all edges.
    pub fn h_min(&self) -> f64 {
        self.edges
            .iter()
            .map(EdgeMesh::min_cell)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest nominal width `length / cells` over all edges.
    pub fn h_max(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| e.length / e.cells() as f64)
            .fold(0.0, f64::max)
    }

    /// `sum(cells + 1) - sum(deg - 1) - |dirichlet|`.
    pub fn expected_dof_count(&self) -> usize {
        let nodes: usize = self.edges.iter().map(|e| e.cells() + 1).sum();
        let shared: usize = self
            .graph
            .vertices()
            .iter()
            .map(|v| self.graph.degree(v.id).saturating_sub(1))
            .sum();
        nodes - shared - self.graph.dirichlet_vertices().len()
    }

    /// Permutation `p` with `other.dof(p[i])` at the same physical point as
    /// `self.dof(i)`; edges are matched by id and `flipped[j]` marks edges
    /// whose orientation differs between the two meshes.
    pub fn dof_permutation(&self, other: &Mesh, flipped: &[bool]) -> Option<Vec<usize>> {
        if self.n() != other.n() || self.edges.len() != other.edges.len() {
            return None;
        }
        let mut perm = vec![usize::MAX; self.n()];
        for (k, dof) in self.vertex_dofs.iter().enumerate() {
            match (dof, other.vertex_dofs[k]) {
                (Some(a), Some(b)) => perm[*a] = b,
                (None, None) => {}
                _ => return None,
            }
        }
        for (a, b) in self.edges.iter().zip(&other.edges) {
            if a.nodes.len() != b.nodes.len() {
                return None;
            }
            let m = a.nodes.len();
            for i in 1..m - 1 {
                let i_other = if flipped[a.edge.0] { m - 1 - i } else { i };
                let xa = a.nodes[i];
                let xb = if flipped[a.edge.0] {
                    b.length - b.nodes[i_other]
                } else {
                    b.nodes[i_other]
                };
                if (xa - xb).abs() > 1e-12 * a.length {
                    return None;
                }
                perm[a.dofs[i]?] = b.dofs[i_other]?;
            }
        }
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p == usize::MAX || std::mem::replace(&mut seen[p], true) {
                return None;
            }
        }
        Some(perm)
    }
}
