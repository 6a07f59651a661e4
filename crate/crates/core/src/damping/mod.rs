//! Kelvin-Voigt coefficients per edge and the node conditions that decide
//! which decay regime to expect.

mod profile;

pub use profile::{DampingError, DampingProfile, End, Piece, ProfileSpec, MAX_DEGREE};

use serde::Serialize;

use crate::graph::{EdgeId, MetricGraph, Mode, VertexId};

/// Default tolerance for node conditions, relative to the largest `|a|`.
pub const DEFAULT_NODE_TOL: f64 = 1e-12;

/// One profile per edge, indexed by `EdgeId`.
#[derive(Debug, Clone, PartialEq)]
pub struct DampingAssignment {
    profiles: Vec<DampingProfile>,
}

impl DampingAssignment {
    pub fn new(g: &MetricGraph, profiles: Vec<DampingProfile>) -> Result<Self, DampingError> {
        if profiles.len() != g.num_edges() {
            return Err(DampingError::AssignmentSize {
                found: profiles.len(),
                expected: g.num_edges(),
            });
        }
        Ok(Self { profiles })
    }

    pub fn undamped(g: &MetricGraph) -> Self {
        Self {
            profiles: g.edges().iter().map(|e| DampingProfile::zero(e.length)).collect(),
        }
    }

    pub fn profile(&self, j: EdgeId) -> &DampingProfile {
        &self.profiles[j.0]
    }

    pub fn profiles(&self) -> &[DampingProfile] {
        &self.profiles
    }

    pub fn is_undamped(&self) -> bool {
        self.profiles.iter().all(DampingProfile::is_zero)
    }

    pub fn sup_a(&self) -> f64 {
        self.profiles.iter().map(|p| p.sup_abs(0)).fold(0.0, f64::max)
    }

    /// Replaces the profile on edge `j` with its mirror image, matching an
    /// orientation flip of that edge.
    pub fn with_edge_flipped(&self, j: EdgeId) -> Self {
        let mut profiles = self.profiles.clone();
        profiles[j.0] = profiles[j.0].reversed();
        Self { profiles }
    }
}

/// An `L^inf` bound that may be infinite (a Dirac part in the derivative).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Finite(f64),
    Unbounded,
}

impl Bound {
    pub fn is_finite(&self) -> bool {
        matches!(self, Bound::Finite(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeBounds {
    pub edge: EdgeId,
    pub sup_a: f64,
    pub sup_da: Bound,
    pub sup_d2a: Bound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeCondition {
    pub vertex: VertexId,
    pub node_value: f64,
    pub satisfied: bool,
}

/// Which evaluation route produced a property report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyForm {
    /// parent derivative at its head minus the children's derivatives at their tails
    Tree,
    /// incidence-signed sum over adjacent edges
    Graph,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub form: PropertyForm,
    pub edges: Vec<EdgeBounds>,
    pub nodes: Vec<NodeCondition>,
    pub overall: bool,
}

impl PropertyReport {
    pub fn node(&self, k: VertexId) -> Option<&NodeCondition> {
        self.nodes.iter().find(|n| n.vertex == k)
    }
}

fn edge_bounds(damping: &DampingAssignment, g: &MetricGraph, tol: f64) -> Vec<EdgeBounds> {
    g.edges()
        .iter()
        .map(|e| {
            let a = damping.profile(e.id);
            let sup_a = a.sup_abs(0);
            let jump_a = a.max_interior_jump(0);
            let jump_da = a.max_interior_jump(1);
            let sup_da = if jump_a > tol * sup_a.max(f64::MIN_POSITIVE) {
                Bound::Unbounded
            } else {
                Bound::Finite(a.sup_abs(1))
            };
            let d_scale = a.sup_abs(1).max(sup_a).max(f64::MIN_POSITIVE);
            let sup_d2a = if !sup_da.is_finite() || jump_da > tol * d_scale {
                Bound::Unbounded
            } else {
                Bound::Finite(a.sup_abs(2))
            };
            EdgeBounds {
                edge: e.id,
                sup_a,
                sup_da,
                sup_d2a,
            }
        })
        .collect()
}

fn finish(form: PropertyForm, edges: Vec<EdgeBounds>, nodes: Vec<NodeCondition>) -> PropertyReport {
    let overall = edges
        .iter()
        .all(|b| b.sup_da.is_finite() && b.sup_d2a.is_finite())
        && nodes.iter().all(|n| n.satisfied);
    PropertyReport {
        form,
        edges,
        nodes,
        overall,
    }
}

/// Evaluates the node condition through the form that matches the graph's mode.
pub fn check_property_p(g: &MetricGraph, damping: &DampingAssignment, tol: f64) -> PropertyReport {
    match g.mode() {
        Mode::Tree => check_property_p_tree(g, damping, tol),
        Mode::Graph => check_property_p_graph(g, damping, tol),
    }
}

/// Tree form: `a'_parent(l) - sum_children a'_child(0) <= tol * sup|a|` at every
/// interior vertex. Falls back to the graph form on graph-mode input.
pub fn check_property_p_tree(
    g: &MetricGraph,
    damping: &DampingAssignment,
    tol: f64,
) -> PropertyReport {
    if g.mode() != Mode::Tree {
        return check_property_p_graph(g, damping, tol);
    }
    let threshold = tol * damping.sup_a();
    let nodes = g
        .interior_vertices()
        .into_iter()
        .map(|k| {
            let parent = g.parent_edge(k).expect("interior tree vertex has a parent");
            let incoming = damping.profile(parent).end_derivative(End::Head);
            let outgoing: f64 = g
                .child_edges(k)
                .into_iter()
                .map(|j| damping.profile(j).end_derivative(End::Tail))
                .sum();
            let node_value = incoming - outgoing;
            NodeCondition {
                vertex: k,
                node_value,
                satisfied: node_value <= threshold,
            }
        })
        .collect();
    finish(PropertyForm::Tree, edge_bounds(damping, g, tol), nodes)
}

/// Graph form: `sum_{j in J_k} d_kj a'_j(s_k)`, compared with the same sign
/// convention as the tree form so that both agree on trees.
pub fn check_property_p_graph(
    g: &MetricGraph,
    damping: &DampingAssignment,
    tol: f64,
) -> PropertyReport {
    let threshold = tol * damping.sup_a();
    let d = g.incidence_matrix();
    let nodes = g
        .interior_vertices()
        .into_iter()
        .map(|k| {
            let node_value: f64 = (0..g.num_edges())
                .map(EdgeId)
                .filter(|&j| d.get(k, j) != 0)
                .map(|j| {
                    let sign = d.get(k, j);
                    let end = if sign > 0 { End::Head } else { End::Tail };
                    sign as f64 * damping.profile(j).end_derivative(end)
                })
                .sum();
            NodeCondition {
                vertex: k,
                node_value,
                satisfied: node_value <= threshold,
            }
        })
        .collect();
    finish(PropertyForm::Graph, edge_bounds(damping, g, tol), nodes)
}

/// Case I: the coefficient is continuous at every interior vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ContinuityCase {
    I,
    II,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeContinuity {
    pub vertex: VertexId,
    pub values: Vec<(EdgeId, f64)>,
    pub continuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub nodes: Vec<NodeContinuity>,
    pub case: ContinuityCase,
}

pub fn classify_continuity(
    g: &MetricGraph,
    damping: &DampingAssignment,
    tol: f64,
) -> ContinuityReport {
    let threshold = tol * damping.sup_a();
    let nodes: Vec<NodeContinuity> = g
        .interior_vertices()
        .into_iter()
        .map(|k| {
            let values: Vec<(EdgeId, f64)> = g
                .adjacent_edges(k)
                .expect("vertex from this graph")
                .iter()
                .map(|&(j, sign)| {
                    let end = if sign > 0 { End::Head } else { End::Tail };
                    (j, damping.profile(j).end_value(end))
                })
                .collect();
            let max = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
            let min = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
            NodeContinuity {
                vertex: k,
                values,
                continuous: max - min <= threshold,
            }
        })
        .collect();
    let case = if nodes.iter().all(|n| n.continuous) {
        ContinuityCase::I
    } else {
        ContinuityCase::II
    };
    ContinuityReport { nodes, case }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Vertex};

    fn chain() -> MetricGraph {
        let vertices = (0..3)
            .map(|i| Vertex {
                id: VertexId(i),
                label: format!("n{i}"),
                dirichlet: i != 1,
            })
            .collect();
        let edges = (0..2)
            .map(|j| Edge {
                id: EdgeId(j),
                label: format!("e{j}"),
                tail: VertexId(j),
                head: VertexId(j + 1),
                length: 1.0,
            })
            .collect();
        MetricGraph::new(Mode::Tree, vertices, edges, Some(VertexId(0))).unwrap()
    }

    fn linear(slope: f64) -> DampingProfile {
        DampingProfile::polynomial(vec![0.0, slope], 1.0).unwrap()
    }

    #[test]
    fn constant_profiles_give_zero_node_value() {
        let g = chain();
        let a = DampingAssignment::new(
            &g,
            vec![
                DampingProfile::constant(1.0, 1.0).unwrap(),
                DampingProfile::constant(3.0, 1.0).unwrap(),
            ],
        )
        .unwrap();
        let r = check_property_p(&g, &a, DEFAULT_NODE_TOL);
        assert_eq!(r.nodes[0].node_value, 0.0);
        assert!(r.overall);
    }

    #[test]
    fn hand_worked_node_values() {
        let g = chain();
        // parent a = x (a'(l) = 1), child a = 2x (a'(0) = 2)
        let a = DampingAssignment::new(&g, vec![linear(1.0), linear(2.0)]).unwrap();
        let r = check_property_p(&g, &a, DEFAULT_NODE_TOL);
        assert_eq!(r.nodes[0].node_value, -1.0);
        assert!(r.overall);

        let a = DampingAssignment::new(&g, vec![linear(2.0), linear(1.0)]).unwrap();
        let r = check_property_p(&g, &a, DEFAULT_NODE_TOL);
        assert_eq!(r.nodes[0].node_value, 1.0);
        assert!(!r.overall);
    }

    #[test]
    fn interior_kink_is_unbounded_second_derivative() {
        let g = chain();
        let kinked = DampingProfile::piecewise(
            vec![0.0, 0.5, 1.0],
            vec![vec![1.0, 1.0], vec![1.5, 2.0]],
            1.0,
        )
        .unwrap();
        let a = DampingAssignment::new(&g, vec![DampingProfile::zero(1.0), kinked]).unwrap();
        let r = check_property_p(&g, &a, DEFAULT_NODE_TOL);
        assert_eq!(r.edges[1].sup_d2a, Bound::Unbounded);
        assert!(r.edges[1].sup_da.is_finite());
        assert!(!r.overall);
    }

    #[test]
    fn continuity_cases() {
        let g = chain();
        // x(1-x) vanishes at the shared vertex: continuous with the elastic edge
        let bump = DampingProfile::polynomial(vec![0.0, 1.0, -1.0], 1.0).unwrap();
        let a = DampingAssignment::new(&g, vec![bump, DampingProfile::zero(1.0)]).unwrap();
        assert_eq!(classify_continuity(&g, &a, DEFAULT_NODE_TOL).case, ContinuityCase::I);

        let a = DampingAssignment::new(
            &g,
            vec![DampingProfile::constant(1.0, 1.0).unwrap(), DampingProfile::zero(1.0)],
        )
        .unwrap();
        let report = classify_continuity(&g, &a, DEFAULT_NODE_TOL);
        assert_eq!(report.case, ContinuityCase::II);
        let mut vals: Vec<f64> = report.nodes[0].values.iter().map(|v| v.1).collect();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals, vec![0.0, 1.0]);
    }

    #[test]
    fn single_edge_is_vacuously_case_one() {
        let g = MetricGraph::new(
            Mode::Tree,
            vec![
                Vertex { id: VertexId(0), label: "r".into(), dirichlet: true },
                Vertex { id: VertexId(1), label: "o".into(), dirichlet: true },
            ],
            vec![Edge { id: EdgeId(0), label: "e".into(), tail: VertexId(0), head: VertexId(1), length: 1.0 }],
            Some(VertexId(0)),
        )
        .unwrap();
        let a = DampingAssignment::new(&g, vec![DampingProfile::constant(1.0, 1.0).unwrap()]).unwrap();
        let r = classify_continuity(&g, &a, DEFAULT_NODE_TOL);
        assert!(r.nodes.is_empty());
        assert_eq!(r.case, ContinuityCase::I);
    }
}
