//! Reference networks used by the test suites and the bundled examples.

use rand::Rng;

use crate::damping::ProfileSpec;
use crate::graph::Mode;
use crate::network::{EdgeEntry, Label, Network, NetworkSpec, Tolerances, VertexEntry};

fn vertex(id: &str, dirichlet: bool, root: bool) -> VertexEntry {
    VertexEntry {
        id: Label::from(id),
        dirichlet,
        root,
    }
}

fn edge(id: &str, from: &str, to: &str, length: f64, damping: ProfileSpec) -> EdgeEntry {
    EdgeEntry {
        id: Label::from(id),
        from: Label::from(from),
        to: Label::from(to),
        length,
        cells: None,
        damping,
    }
}

fn constant(value: f64) -> ProfileSpec {
    ProfileSpec::Constant { value }
}

fn poly(length: f64, coeffs: Vec<f64>) -> ProfileSpec {
    ProfileSpec::Pp {
        breaks: vec![0.0, length],
        coeffs: vec![coeffs],
    }
}

fn spec(mode: Mode, vertices: Vec<VertexEntry>, edges: Vec<EdgeEntry>) -> NetworkSpec {
    NetworkSpec {
        mode,
        vertices,
        edges,
        tolerances: Tolerances::default(),
    }
}

fn build(spec: NetworkSpec) -> Network {
    Network::from_spec(&spec).expect("reference network is valid")
}

/// Unit string `R → L`, both ends fixed, constant damping `a`.
pub fn kv_string_spec(a: f64) -> NetworkSpec {
    spec(
        Mode::Tree,
        vec![vertex("R", true, true), vertex("L", true, false)],
        vec![edge("e", "R", "L", 1.0, constant(a))],
    )
}

/// String of length `length` without damping.
pub fn undamped_string_spec(length: f64) -> NetworkSpec {
    spec(
        Mode::Tree,
        vec![vertex("R", true, true), vertex("L", true, false)],
        vec![edge("e", "R", "L", length, ProfileSpec::Zero)],
    )
}

/// Elastic edge `R → O` followed by a constant-damping edge `O → L` (`a = 1`);
/// the damping jumps at `O`.
pub fn elastic_kv_chain_spec() -> NetworkSpec {
    spec(
        Mode::Tree,
        vec![
            vertex("R", true, true),
            vertex("O", false, false),
            vertex("L", true, false),
        ],
        vec![
            edge("e", "R", "O", 1.0, ProfileSpec::Zero),
            edge("1", "O", "L", 1.0, constant(1.0)),
        ],
    )
}

/// Elastic edge followed by a damped edge whose coefficient `4x(1-x)` vanishes
/// at both ends, so it is continuous at the junction.
pub fn smooth_chain_spec() -> NetworkSpec {
    spec(
        Mode::Tree,
        vec![
            vertex("R", true, true),
            vertex("O", false, false),
            vertex("L", true, false),
        ],
        vec![
            edge("e", "R", "O", 1.0, ProfileSpec::Zero),
            edge("1", "O", "L", 1.0, poly(1.0, vec![0.0, 4.0, -4.0])),
        ],
    )
}

/// Three damped edges meeting at `O`; the coefficient is continuous at `O`
/// (value 0.05) and the node condition holds with value `-0.05`.
pub fn kv_star_spec() -> NetworkSpec {
    spec(
        Mode::Tree,
        vec![
            vertex("R", true, true),
            vertex("O", false, false),
            vertex("1", true, false),
            vertex("2", true, false),
        ],
        vec![
            edge("e", "R", "O", 1.0, poly(1.0, vec![0.1, -0.05])),
            edge("1", "O", "1", 1.0, constant(0.05)),
            edge("2", "O", "2", 1.0, constant(0.05)),
        ],
    )
}

/// Two-level tree `R → O → {1, 2}`, `1 → {1.1, 1.2}` mixing elastic,
/// constant, polynomial and piecewise damping.
pub fn mixed_tree_spec() -> NetworkSpec {
    spec(
        Mode::Tree,
        vec![
            vertex("R", true, true),
            vertex("O", false, false),
            vertex("1", false, false),
            vertex("2", true, false),
            vertex("1.1", true, false),
            vertex("1.2", true, false),
        ],
        vec![
            edge(
                "e",
                "R",
                "O",
                1.0,
                ProfileSpec::Pp {
                    breaks: vec![0.0, 0.5, 1.0],
                    coeffs: vec![vec![0.2, 0.2], vec![0.3, -0.2]],
                },
            ),
            edge("1", "O", "1", 0.8, ProfileSpec::Zero),
            edge("2", "O", "2", 1.2, constant(0.2)),
            edge("1.1", "1", "1.1", 0.6, poly(0.6, vec![0.1, 0.2, -0.1])),
            edge("1.2", "1", "1.2", 0.7, ProfileSpec::Zero),
        ],
    )
}

fn triangle_entries() -> (Vec<VertexEntry>, Vec<EdgeEntry>) {
    (
        vec![
            vertex("A", true, false),
            vertex("B", false, false),
            vertex("C", false, false),
        ],
        vec![
            edge("ab", "A", "B", 1.0, constant(0.5)),
            edge("bc", "B", "C", 1.0, ProfileSpec::Zero),
            edge("ca", "C", "A", 1.0, ProfileSpec::Zero),
        ],
    )
}

/// Triangle `A B C` with `A` fixed; one damped side, two elastic sides.
pub fn triangle_spec() -> NetworkSpec {
    let (v, e) = triangle_entries();
    spec(Mode::Graph, v, e)
}

/// [`triangle_spec`] plus a damped pendant edge `C → P`, `P` fixed.
pub fn triangle_pendant_spec() -> NetworkSpec {
    let (mut v, mut e) = triangle_entries();
    v.push(vertex("P", true, false));
    e.push(edge("cp", "C", "P", 0.8, constant(0.3)));
    spec(Mode::Graph, v, e)
}

pub fn kv_string(a: f64) -> Network {
    build(kv_string_spec(a))
}

pub fn undamped_string(length: f64) -> Network {
    build(undamped_string_spec(length))
}

pub fn elastic_kv_chain() -> Network {
    build(elastic_kv_chain_spec())
}

pub fn smooth_chain() -> Network {
    build(smooth_chain_spec())
}

pub fn kv_star() -> Network {
    build(kv_star_spec())
}

pub fn mixed_tree() -> Network {
    build(mixed_tree_spec())
}

pub fn triangle() -> Network {
    build(triangle_spec())
}

pub fn triangle_pendant() -> Network {
    build(triangle_pendant_spec())
}

/// Damping of the single string in [`acceptance_networks`].
pub const KV_STRING_DAMPING: f64 = 0.5;

/// The five damped networks every structural check runs on, with names.
pub fn acceptance_specs() -> Vec<(&'static str, NetworkSpec)> {
    vec![
        ("kv_string", kv_string_spec(KV_STRING_DAMPING)),
        ("elastic_kv_chain", elastic_kv_chain_spec()),
        ("kv_star", kv_star_spec()),
        ("mixed_tree", mixed_tree_spec()),
        ("triangle_pendant", triangle_pendant_spec()),
    ]
}

pub fn acceptance_networks() -> Vec<Network> {
    acceptance_specs().into_iter().map(|(_, s)| build(s)).collect()
}

/// Random tree with `vertices` vertices: the root has the single child `v1`,
/// every later vertex hangs below a random earlier non-root vertex, the root
/// and all leaves are fixed, and each edge gets no
/// damping, a constant, or a strictly positive quadratic.
pub fn random_tree_spec<R: Rng>(rng: &mut R, vertices: usize) -> NetworkSpec {
    assert!(vertices >= 2, "a tree needs at least two vertices");
    let parents: Vec<usize> = (1..vertices)
        .map(|i| if i == 1 { 0 } else { rng.gen_range(1..i) })
        .collect();
    let mut has_child = vec![false; vertices];
    for &p in &parents {
        has_child[p] = true;
    }
    let names: Vec<String> = (0..vertices).map(|i| format!("v{i}")).collect();
    let vs = (0..vertices)
        .map(|i| vertex(&names[i], i == 0 || !has_child[i], i == 0))
        .collect();
    let es = parents
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            let length = rng.gen_range(0.5..1.5);
            let damping = match rng.gen_range(0..3) {
                0 => ProfileSpec::Zero,
                1 => constant(rng.gen_range(0.1..1.0)),
                _ => poly(
                    length,
                    vec![
                        rng.gen_range(0.5..1.0),
                        rng.gen_range(-0.1..0.1),
                        rng.gen_range(-0.1..0.1),
                    ],
                ),
            };
            edge(&format!("e{j}"), &names[p], &names[j + 1], length, damping)
        })
        .collect();
    spec(Mode::Tree, vs, es)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damping::{check_property_p, classify_continuity, ContinuityCase};
    use crate::graph::{validate_structure, Verdict};

    #[test]
    fn all_reference_networks_validate() {
        let specs = acceptance_specs()
            .into_iter()
            .map(|(_, s)| s)
            .chain([smooth_chain_spec(), triangle_spec()]);
        for s in specs {
            let net = build(s);
            let report = validate_structure(&net.graph, &net.damping, false);
            assert_eq!(report.overall, Verdict::Pass, "{:?}", report.messages);
        }
        let undamped = undamped_string(1.0);
        let report = validate_structure(&undamped.graph, &undamped.damping, false);
        assert_eq!(report.overall, Verdict::Fail);
        assert!(!report.has_kv_edge);
    }

    #[test]
    fn continuity_cases() {
        let tol = 1e-12;
        let case = |n: Network| classify_continuity(&n.graph, &n.damping, tol).case;
        assert_eq!(case(kv_star()), ContinuityCase::I);
        assert_eq!(case(smooth_chain()), ContinuityCase::I);
        assert_eq!(case(elastic_kv_chain()), ContinuityCase::II);
        assert_eq!(case(mixed_tree()), ContinuityCase::II);
    }

    #[test]
    fn star_node_condition() {
        let n = kv_star();
        let report = check_property_p(&n.graph, &n.damping, 1e-12);
        assert!(report.overall);
        let o = report.node(crate::VertexId(1)).unwrap();
        assert!((o.node_value + 0.05).abs() < 1e-15);
    }

    #[test]
    fn specs_round_trip_through_json() {
        for (_, s) in acceptance_specs() {
            let back = NetworkSpec::from_json(&s.to_json_pretty()).unwrap();
            assert_eq!(back, s);
        }
    }
}
