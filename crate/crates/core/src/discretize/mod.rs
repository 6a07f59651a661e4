//! P1 finite elements on each edge with vertex values shared across incident
//! edges.
//!
//! Continuity at vertices is built into the DOF map and the flux balance at
//! interior vertices is natural in the weak form, so neither is imposed
//! explicitly. Dirichlet vertices carry no DOF.

mod generator;
mod mesh;

pub use generator::{
    check_generator_wellposed, dense_generator, weighted_generator, GeneratorAction, WellPosedness,
    COND_LIMIT, WELLPOSED_SAMPLES, WELLPOSED_SEED,
};
pub use mesh::{build_mesh, build_mesh_for, DofLocation, EdgeMesh, Mesh, Resolution, MIN_CELLS};

use faer::Side;
use rayon::prelude::*;
use thiserror::Error;

use crate::damping::{DampingAssignment, MAX_DEGREE};
use crate::quadrature::{gauss_legendre, points_for_degree};
use crate::sparse::{SymBuilder, SymMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscretizeError {
    #[error("edge {edge} has {cells} cells; at least 2 are required")]
    ResolutionTooCoarse { edge: String, cells: usize },
    #[error("resolution lists {found} edges, the graph has {expected}")]
    ResolutionSize { found: usize, expected: usize },
    #[error("damping on edge {edge} has degree {degree}, above the supported 20")]
    QuadratureDegreeOverflow { edge: String, degree: usize },
    #[error("damping assignment and mesh describe different graphs")]
    MismatchedGraph,
    #[error("{0} matrix is not positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("mass matrix is singular")]
    SingularMass,
}

/// Mass, stiffness and damped stiffness on the free DOFs.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    pub mesh: Mesh,
    /// consistent mass, entries `∫ φ_i φ_j`
    pub m: SymMatrix,
    /// stiffness, entries `∫ φ_i' φ_j'`
    pub k: SymMatrix,
    /// damped stiffness, entries `∫ a φ_i' φ_j'`
    pub ka: SymMatrix,
}

impl DiscreteSystem {
    pub fn n(&self) -> usize {
        self.m.n()
    }

    pub fn is_undamped(&self) -> bool {
        self.ka.is_zero()
    }

    /// `E = (u^T K u + v^T M v) / 2`.
    pub fn energy(&self, u: &[f64], v: &[f64]) -> f64 {
        0.5 * (self.k.quad_form(u) + self.m.quad_form(v))
    }

    /// `D = v^T K_a v`.
    pub fn dissipation(&self, v: &[f64]) -> f64 {
        self.ka.quad_form(v)
    }

    /// Same system with DOFs renumbered by `perm` (see [`SymMatrix::permuted`]).
    pub fn permuted_matrices(&self, perm: &[usize]) -> [SymMatrix; 3] {
        [
            self.m.permuted(perm),
            self.k.permuted(perm),
            self.ka.permuted(perm),
        ]
    }

    /// Compares `M`, `K`, `K_a` renumbered by `perm` with `other`'s matrices.
    /// `None` if any sparsity pattern differs, otherwise the largest entry
    /// difference relative to the largest entry of the matrix involved.
    pub fn permutation_mismatch(&self, other: &DiscreteSystem, perm: &[usize]) -> Option<f64> {
        if self.n() != other.n() {
            return None;
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.permuted_matrices(perm).iter().zip([&other.m, &other.k, &other.ka]) {
            if !a.same_pattern(b) {
                return None;
            }
            let scale = a.max_abs().max(b.max_abs());
            if scale > 0.0 {
                worst = worst.max(a.max_abs_diff(b) / scale);
            }
        }
        Some(worst)
    }
}

/// Local element contributions `(i, j, mass, stiffness, damped)` of one edge.
type Contribution = (usize, usize, f64, f64, f64);

/// Assembles `M`, `K`, `K_a` on `mesh`.
///
/// The damped element matrix is `(∫_cell a) / h^2 [[1, -1], [-1, 1]]`, the
/// integral taken by Gauss-Legendre per polynomial piece, which is exact.
pub fn assemble(mesh: &Mesh, damping: &DampingAssignment) -> Result<DiscreteSystem, DiscretizeError> {
    let g = mesh.graph();
    if damping.profiles().len() != g.num_edges()
        || g
            .edges()
            .iter()
            .any(|e| damping.profile(e.id).length() != e.length)
    {
        return Err(DiscretizeError::MismatchedGraph);
    }
    for e in g.edges() {
        let degree = damping.profile(e.id).max_degree();
        if degree > MAX_DEGREE {
            return Err(DiscretizeError::QuadratureDegreeOverflow {
                edge: e.label.clone(),
                degree,
            });
        }
    }

    let per_edge: Vec<Vec<Contribution>> = mesh
        .edges()
        .par_iter()
        .map(|em| {
            let profile = damping.profile(em.edge);
            let mut out = Vec::with_capacity(4 * em.cells());
            for c in 0..em.cells() {
                let (x0, x1) = (em.nodes[c], em.nodes[c + 1]);
                let h = x1 - x0;
                let aint = integrate_profile(profile, x0, x1);
                let ends = [em.dofs[c], em.dofs[c + 1]];
                for p in 0..2 {
                    for q in p..2 {
                        if let (Some(i), Some(j)) = (ends[p], ends[q]) {
                            let same = p == q;
                            let mass = if same { h / 3.0 } else { h / 6.0 };
                            let sign = if same { 1.0 } else { -1.0 };
                            out.push((i, j, mass, sign / h, sign * aint / (h * h)));
                        }
                    }
                }
            }
            out
        })
        .collect();

    let n = mesh.n();
    let (mut bm, mut bk, mut ba) = (SymBuilder::new(n), SymBuilder::new(n), SymBuilder::new(n));
    for (i, j, m, k, a) in per_edge.into_iter().flatten() {
        bm.add(i, j, m);
        bk.add(i, j, k);
        if a != 0.0 {
            ba.add(i, j, a);
        }
    }
    let sys = DiscreteSystem {
        mesh: mesh.clone(),
        m: bm.build(),
        k: bk.build(),
        ka: ba.build(),
    };
    if n > 0 {
        sys.m
            .to_faer()
            .sp_cholesky(Side::Lower)
            .map_err(|_| DiscretizeError::NotPositiveDefinite("mass"))?;
        sys.k
            .to_faer()
            .sp_cholesky(Side::Lower)
            .map_err(|_| DiscretizeError::NotPositiveDefinite("stiffness"))?;
    }
    Ok(sys)
}

/// `∫_{x0}^{x1} a`, split at the piece boundaries inside the interval.
fn integrate_profile(profile: &crate::damping::DampingProfile, x0: f64, x1: f64) -> f64 {
    let mut total = 0.0;
    for piece in profile.pieces() {
        let lo = piece.start.max(x0);
        let hi = piece.end.min(x1);
        if hi <= lo || piece.is_zero() {
            continue;
        }
        let (nodes, weights) = gauss_legendre(points_for_degree(piece.degree()));
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        total += nodes
            .iter()
            .zip(&weights)
            .map(|(s, w)| w * half * piece.eval_local(mid + half * s - piece.start, 0))
            .sum::<f64>();
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical;
    use crate::damping::DampingProfile;

    #[test]
    fn hand_worked_two_cells() {
        let net = canonical::undamped_string(1.0);
        let mesh = build_mesh(&net.graph, &Resolution::CellsPerEdge(2)).unwrap();
        let sys = assemble(&mesh, &net.damping).unwrap();
        assert_eq!(sys.n(), 1);
        assert!((sys.k.get(0, 0) - 4.0).abs() < 1e-15);
        assert!((sys.m.get(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!(sys.ka.is_zero());
    }

    #[test]
    fn constant_damping_is_multiple_of_stiffness() {
        let net = canonical::kv_string(0.7);
        let mesh = build_mesh(&net.graph, &Resolution::CellsPerEdge(9)).unwrap();
        let sys = assemble(&mesh, &net.damping).unwrap();
        for i in 0..sys.n() {
            for (j, v) in sys.k.row(i) {
                assert!((sys.ka.get(i, j) - 0.7 * v).abs() <= 1e-13 * v.abs());
            }
        }
    }

    #[test]
    fn exact_integration_of_polynomials() {
        // ∫_0^1 (1 + x^3) on [0.25, 0.75] = 0.5 + (0.75^4 - 0.25^4) / 4
        let p = DampingProfile::polynomial(vec![1.0, 0.0, 0.0, 1.0], 1.0).unwrap();
        let exact = 0.5 + (0.75f64.powi(4) - 0.25f64.powi(4)) / 4.0;
        assert!((integrate_profile(&p, 0.25, 0.75) - exact).abs() < 1e-15);
        // a cell straddling a breakpoint is split
        let spec = crate::damping::ProfileSpec::Pp {
            breaks: vec![0.0, 0.5, 1.0],
            coeffs: vec![vec![1.0, 1.0], vec![1.5, -1.0]],
        };
        let q = DampingProfile::new(spec, 1.0).unwrap();
        let exact = 0.625 + 0.625;
        let by_parts = integrate_profile(&q, 0.0, 0.5) + integrate_profile(&q, 0.5, 1.0);
        assert!((integrate_profile(&q, 0.0, 1.0) - by_parts).abs() < 1e-15);
        assert!((by_parts - exact).abs() < 1e-14);
    }

    #[test]
    fn structural_properties() {
        for net in canonical::acceptance_networks() {
            let mesh = build_mesh_for(&net.graph, &Resolution::CellsPerEdge(8), &net.damping).unwrap();
            let sys = assemble(&mesh, &net.damping).unwrap();
            for m in [&sys.m, &sys.k, &sys.ka] {
                for i in 0..sys.n() {
                    for (j, v) in m.row(i) {
                        assert_eq!(v, m.get(j, i));
                    }
                }
            }
            assert!(sys.ka.pattern_within(&sys.k));
            assert!(!sys.ka.is_zero());
        }
    }

    #[test]
    fn zero_damping_gives_zero_matrix() {
        let net = canonical::undamped_string(2.0);
        let mesh = build_mesh(&net.graph, &Resolution::CellsPerEdge(16)).unwrap();
        assert!(assemble(&mesh, &net.damping).unwrap().ka.is_zero());
    }

    #[test]
    fn mismatched_assignment() {
        let net = canonical::kv_star();
        let other = canonical::undamped_string(1.0);
        let mesh = build_mesh(&net.graph, &Resolution::CellsPerEdge(4)).unwrap();
        assert_eq!(
            assemble(&mesh, &other.damping).unwrap_err(),
            DiscretizeError::MismatchedGraph
        );
    }
}
