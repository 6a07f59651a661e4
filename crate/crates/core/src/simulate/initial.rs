//! Initial displacement and velocity fields.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Mat, Par, Side};
use serde::{Deserialize, Serialize};

use super::{SimulateError, State};
use crate::discretize::{DiscreteSystem, DiscretizeError};
use crate::graph::{EdgeId, VertexId};

/// Tolerance for boundary and continuity conditions on initial data.
pub const INITIAL_DATA_TOL: f64 = 1e-10;

/// `f(x) = Σ poly[k] x^k + Σ sine[m] sin((m + 1) π x / ℓ)` on one edge,
/// `x` measured from the edge's tail.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeFunction {
    #[serde(default)]
    pub poly: Vec<f64>,
    #[serde(default)]
    pub sine: Vec<f64>,
}

impl EdgeFunction {
    pub fn eval(&self, x: f64, length: f64) -> f64 {
        let p = self.poly.iter().rev().fold(0.0, |acc, &c| acc * x + c);
        let s: f64 = self
            .sine
            .iter()
            .enumerate()
            .map(|(m, &c)| c * ((m + 1) as f64 * PI * x / length).sin())
            .sum();
        p + s
    }
}

/// A field on the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    /// Combination of the undamped discrete modes (`K x = μ M x`, `xᵀMx = 1`),
    /// lowest frequency first.
    Modes { coefficients: Vec<f64> },
    /// Functions per edge, keyed by edge label; missing edges are zero.
    Edges { edges: BTreeMap<String, EdgeFunction> },
}

impl FieldSpec {
    /// The first two undamped modes with unit weights.
    pub fn low_modes() -> Self {
        FieldSpec::Modes {
            coefficients: vec![1.0, 1.0],
        }
    }

    /// `sin(m π x / ℓ)` on every edge of the reference networks (labels are
    /// looked up when the field is applied, so a wildcard label is used).
    pub fn sine_on_all_edges(m: usize) -> Self {
        let mut sine = vec![0.0; m];
        sine[m - 1] = 1.0;
        let mut edges = BTreeMap::new();
        edges.insert("*".to_string(), EdgeFunction { poly: vec![], sine });
        FieldSpec::Edges { edges }
    }
}

/// Nodal interpolation of `u0`, `v0` at `t = 0`.
///
/// Edge functions must vanish at Dirichlet vertices and agree at shared
/// vertices (within [`INITIAL_DATA_TOL`] relative to `max(1, sup |f|)`).
/// The label `"*"` applies to every edge without its own entry.
pub fn initial_state(sys: &DiscreteSystem, u0: &FieldSpec, v0: &FieldSpec) -> Result<State, SimulateError> {
    let u = field_values(sys, u0, "u0")?;
    let v = field_values(sys, v0, "v0")?;
    Ok(State { u, v, t: 0.0 })
}

fn field_values(sys: &DiscreteSystem, field: &FieldSpec, name: &'static str) -> Result<Vec<f64>, SimulateError> {
    let n = sys.n();
    match field {
        FieldSpec::Zero => Ok(vec![0.0; n]),
        FieldSpec::Modes { coefficients } => {
            let modes = undamped_modes(sys, coefficients.len())?;
            let mut out = vec![0.0; n];
            for (c, (_, x)) in coefficients.iter().zip(&modes) {
                out.iter_mut().zip(x).for_each(|(o, xi)| *o += c * xi);
            }
            Ok(out)
        }
        FieldSpec::Edges { edges } => edge_field(sys, edges, name),
    }
}

fn edge_field(
    sys: &DiscreteSystem,
    edges: &BTreeMap<String, EdgeFunction>,
    name: &'static str,
) -> Result<Vec<f64>, SimulateError> {
    let mesh = &sys.mesh;
    let g = mesh.graph();
    for label in edges.keys() {
        if label != "*" && !g.edges().iter().any(|e| &e.label == label) {
            return Err(SimulateError::UnknownEdge(label.clone()));
        }
    }
    let zero = EdgeFunction::default();
    let func = |j: EdgeId| {
        let label = &g.edge(j).label;
        edges.get(label).or_else(|| edges.get("*")).unwrap_or(&zero)
    };

    // scale for the tolerances
    let mut scale: f64 = 1.0;
    for em in mesh.edges() {
        for &x in &em.nodes {
            scale = scale.max(func(em.edge).eval(x, em.length).abs());
        }
    }
    let tol = INITIAL_DATA_TOL * scale;

    let mut out = vec![0.0; sys.n()];
    for v in g.vertices() {
        let ends: Vec<f64> = g
            .adjacent_edges(VertexId(v.id.0))
            .expect("vertex from this graph")
            .iter()
            .map(|&(j, sign)| {
                let e = g.edge(j);
                let x = if sign > 0 { e.length } else { 0.0 };
                func(j).eval(x, e.length)
            })
            .collect();
        if v.dirichlet {
            if let Some(bad) = ends.iter().find(|x| x.abs() > tol) {
                return Err(SimulateError::IncompatibleInitialData {
                    field: name,
                    vertex: v.label.clone(),
                    detail: format!("value {bad:e} at a fixed vertex"),
                });
            }
        } else {
            let max = ends.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = ends.iter().copied().fold(f64::INFINITY, f64::min);
            if max - min > tol {
                return Err(SimulateError::IncompatibleInitialData {
                    field: name,
                    vertex: v.label.clone(),
                    detail: format!("edge values differ by {:e}", max - min),
                });
            }
            if let Some(dof) = mesh.vertex_dof(v.id) {
                out[dof] = ends[0];
            }
        }
    }
    for em in mesh.edges() {
        let f = func(em.edge);
        for (x, dof) in em.nodes.iter().zip(&em.dofs).skip(1).take(em.nodes.len() - 2) {
            if let Some(d) = dof {
                out[*d] = f.eval(*x, em.length);
            }
        }
    }
    Ok(out)
}

/// The `count` lowest modes of `K x = μ M x`, `M`-normalized, with the
/// largest-magnitude entry of each made positive. Dense.
pub fn undamped_modes(sys: &DiscreteSystem, count: usize) -> Result<Vec<(f64, Vec<f64>)>, SimulateError> {
    let n = sys.n();
    if count > n {
        return Err(SimulateError::ModeCount {
            requested: count,
            available: n,
        });
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let l = sys
        .m
        .to_dense()
        .llt(Side::Lower)
        .map_err(|_| DiscretizeError::SingularMass)?
        .L()
        .to_owned();
    // C = L⁻¹ K L⁻ᵀ
    let mut x = sys.k.to_dense();
    solve_lower_triangular_in_place(l.as_ref(), x.as_mut(), Par::Seq);
    let mut c = x.transpose().to_owned();
    solve_lower_triangular_in_place(l.as_ref(), c.as_mut(), Par::Seq);
    let c = Mat::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let eig = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| SimulateError::LinearSolveFailure)?;
    let s = eig.S();
    let u = eig.U();
    let mut y = Mat::from_fn(n, count, |i, j| u[(i, j)]);
    solve_upper_triangular_in_place(l.transpose(), y.as_mut(), Par::Seq);
    Ok((0..count)
        .map(|j| {
            let mut col: Vec<f64> = (0..n).map(|i| y[(i, j)]).collect();
            let imax = (0..n)
                .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()).then(b.cmp(&a)))
                .expect("nonempty");
            if col[imax] < 0.0 {
                col.iter_mut().for_each(|x| *x = -*x);
            }
            (s[j], col)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical;
    use crate::discretize::{assemble, build_mesh_for, Resolution};
    use crate::Network;

    fn system(net: &Network, cells: usize) -> DiscreteSystem {
        let mesh = build_mesh_for(&net.graph, &Resolution::CellsPerEdge(cells), &net.damping).unwrap();
        assemble(&mesh, &net.damping).unwrap()
    }

    fn on_edge(label: &str, f: EdgeFunction) -> FieldSpec {
        FieldSpec::Edges {
            edges: BTreeMap::from([(label.to_string(), f)]),
        }
    }

    #[test]
    fn sine_interpolant() {
        let sys = system(&canonical::undamped_string(1.0), 8);
        let s = initial_state(&sys, &FieldSpec::sine_on_all_edges(1), &FieldSpec::Zero).unwrap();
        for (i, u) in s.u.iter().enumerate() {
            let x = (i + 1) as f64 / 8.0;
            assert!((u - (PI * x).sin()).abs() < 1e-15);
        }
        assert!(s.v.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nonzero_at_root_is_rejected() {
        let sys = system(&canonical::undamped_string(1.0), 8);
        let u0 = on_edge("e", EdgeFunction { poly: vec![1.0, -1.0], sine: vec![] });
        assert!(matches!(
            initial_state(&sys, &u0, &FieldSpec::Zero),
            Err(SimulateError::IncompatibleInitialData { field: "u0", .. })
        ));
    }

    #[test]
    fn mismatch_at_star_center_is_rejected() {
        let sys = system(&canonical::kv_star(), 8);
        // the root edge carries zero, child edge "1" starts at 0.5 at the centre
        let mut edges = BTreeMap::new();
        edges.insert("1".to_string(), EdgeFunction { poly: vec![0.5, -0.5], sine: vec![] });
        let u0 = FieldSpec::Edges { edges };
        let err = initial_state(&sys, &u0, &FieldSpec::Zero).unwrap_err();
        assert!(matches!(err, SimulateError::IncompatibleInitialData { ref vertex, .. } if vertex == "O"));
    }

    #[test]
    fn continuous_star_field_is_accepted() {
        let sys = system(&canonical::kv_star(), 8);
        let mut edges = BTreeMap::new();
        edges.insert("e".to_string(), EdgeFunction { poly: vec![0.0, 0.5], sine: vec![] });
        edges.insert("1".to_string(), EdgeFunction { poly: vec![0.5, -0.5], sine: vec![] });
        edges.insert("2".to_string(), EdgeFunction { poly: vec![0.5, -0.5], sine: vec![] });
        let s = initial_state(&sys, &FieldSpec::Edges { edges }, &FieldSpec::Zero).unwrap();
        let o = sys.mesh.vertex_dof(VertexId(1)).unwrap();
        assert_eq!(s.u[o], 0.5);
    }

    #[test]
    fn unknown_edge_label() {
        let sys = system(&canonical::kv_string(1.0), 4);
        let u0 = on_edge("nope", EdgeFunction::default());
        assert!(matches!(
            initial_state(&sys, &u0, &FieldSpec::Zero),
            Err(SimulateError::UnknownEdge(_))
        ));
    }

    #[test]
    fn modes_are_mass_orthonormal_and_converge() {
        let sys = system(&canonical::undamped_string(1.0), 64);
        let modes = undamped_modes(&sys, 3).unwrap();
        for (a, (mu, x)) in modes.iter().enumerate() {
            // continuum eigenvalue (kπ)²; consistent mass overestimates by about (kπh)²/12
            let exact = ((a + 1) as f64 * PI).powi(2);
            let bound = 1.1 * exact / 12.0 / 64f64.powi(2);
            assert!(mu > &exact && (mu - exact) / exact < bound);
            for (b, (_, y)) in modes.iter().enumerate() {
                let ip = sys.m.bilinear(x, y);
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((ip - expected).abs() < 1e-12);
            }
        }
        assert!(matches!(
            undamped_modes(&sys, 1000),
            Err(SimulateError::ModeCount { .. })
        ));
    }
}
