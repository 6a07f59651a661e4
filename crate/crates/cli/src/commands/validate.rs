//! `graphwave validate`: structural, node-condition and continuity checks.

use std::fmt::Write;
use std::path::PathBuf;

use anyhow::Result;
use graphwave::damping::{check_property_p, classify_continuity, ContinuityCase, PropertyReport};
use graphwave::damping::{Bound, ContinuityReport};
use graphwave::graph::{validate_structure, ValidationReport, Verdict};
use graphwave::{Mode, Network};
use serde::Serialize;

use crate::{load, to_json, Outcome, EXIT_NEGATIVE, EXIT_OK};

#[derive(Debug, Clone)]
pub struct ValidateOptions {
    pub spec: PathBuf,
    /// print the JSON report instead of the text summary
    pub json: bool,
}

/// Decay regime the structure and damping predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// coefficient continuous at every junction, node condition holds
    Exponential,
    /// coefficient jumps somewhere, node condition holds: `‖z(t)‖ ≲ t⁻²`
    Polynomial,
    /// structural hypotheses hold but the node condition or regularity fails
    Undetermined,
    /// structural hypotheses fail: no stability claim
    None,
}

impl Regime {
    pub fn describe(self) -> &'static str {
        match self {
            Regime::Exponential => "exponential",
            Regime::Polynomial => "polynomial t^-2",
            Regime::Undetermined => "undetermined (node condition fails)",
            Regime::None => "none (structural hypotheses fail)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub structure: Verdict,
    pub property_p: bool,
    pub case: ContinuityCase,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateReport {
    pub spec_path: String,
    pub mode: Mode,
    pub vertices: usize,
    pub edges: usize,
    pub passed: bool,
    pub prediction: Prediction,
    pub structure: ValidationReport,
    pub property: PropertyReport,
    pub continuity: ContinuityReport,
}

/// The three checks on a loaded network, with the predicted regime.
pub fn analyse(net: &Network) -> (Prediction, ValidationReport, PropertyReport, ContinuityReport) {
    let tol = net.tolerances.node;
    let structure = validate_structure(&net.graph, &net.damping, net.tolerances.strict_leaves);
    let property = check_property_p(&net.graph, &net.damping, tol);
    let continuity = classify_continuity(&net.graph, &net.damping, tol);
    let regime = if structure.overall == Verdict::Fail {
        Regime::None
    } else if !property.overall {
        Regime::Undetermined
    } else if continuity.case == ContinuityCase::I {
        Regime::Exponential
    } else {
        Regime::Polynomial
    };
    let prediction = Prediction {
        structure: structure.overall,
        property_p: property.overall,
        case: continuity.case,
        regime,
    };
    (prediction, structure, property, continuity)
}

pub fn validate_report(path: &str, net: &Network) -> ValidateReport {
    let (prediction, structure, property, continuity) = analyse(net);
    ValidateReport {
        spec_path: path.to_string(),
        mode: net.graph.mode(),
        vertices: net.graph.num_vertices(),
        edges: net.graph.num_edges(),
        passed: prediction.structure == Verdict::Pass && prediction.property_p,
        prediction,
        structure,
        property,
        continuity,
    }
}

fn bound(b: Bound) -> String {
    match b {
        Bound::Finite(v) => format!("{v:.4e}"),
        Bound::Unbounded => "unbounded".into(),
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

/// Human-readable rendering of a report.
pub fn render_text(report: &ValidateReport, net: &Network) -> String {
    let g = &net.graph;
    let mut out = String::new();
    let mode = match report.mode {
        Mode::Tree => "tree",
        Mode::Graph => "graph",
    };
    let w = &mut out;
    writeln!(w, "network: {} ({mode} mode, {} vertices, {} edges)", report.spec_path, report.vertices, report.edges).unwrap();
    writeln!(w, "structure: {}", verdict(report.structure.overall == Verdict::Pass)).unwrap();
    for m in &report.structure.messages {
        writeln!(w, "  {m}").unwrap();
    }
    for c in &report.structure.elastic_components {
        let edges: Vec<&str> = c.edges.iter().map(|&j| g.edge(j).label.as_str()).collect();
        writeln!(
            w,
            "  elastic subgraph [{}]: {}, leaves {}",
            edges.join(", "),
            if c.is_tree { "tree" } else { "contains a cycle" },
            if c.leaf_attachment_ok { "attached" } else { "not attached" }
        )
        .unwrap();
    }
    let form = match report.property.form {
        graphwave::damping::PropertyForm::Tree => "tree form",
        graphwave::damping::PropertyForm::Graph => "graph form",
    };
    writeln!(w, "property (P), {form}: {}", verdict(report.property.overall)).unwrap();
    for e in &report.property.edges {
        writeln!(
            w,
            "  edge {}: sup a = {:.4e}, sup |a'| = {}, sup |a''| = {}",
            g.edge(e.edge).label,
            e.sup_a,
            bound(e.sup_da),
            bound(e.sup_d2a)
        )
        .unwrap();
    }
    for n in &report.property.nodes {
        writeln!(
            w,
            "  node {}: value {:.6e} ({})",
            g.vertex(n.vertex).label,
            n.node_value,
            if n.satisfied { "satisfied" } else { "violated" }
        )
        .unwrap();
    }
    let case = match report.continuity.case {
        ContinuityCase::I => "I (continuous at every junction)",
        ContinuityCase::II => "II (jumps at a junction)",
    };
    writeln!(w, "continuity: case {case}").unwrap();
    for n in report.continuity.nodes.iter().filter(|n| !n.continuous) {
        let values: Vec<String> = n
            .values
            .iter()
            .map(|&(j, v)| format!("{}={v}", g.edge(j).label))
            .collect();
        writeln!(w, "  jump at {}: {}", g.vertex(n.vertex).label, values.join(", ")).unwrap();
    }
    writeln!(w, "predicted: {}", report.prediction.regime.describe()).unwrap();
    writeln!(w, "result: {}", verdict(report.passed)).unwrap();
    out
}

/// Exit 0 when the structure and node condition pass, 1 otherwise; input
/// errors are returned as `Err` (exit 2).
pub fn cmd_validate(opts: &ValidateOptions) -> Result<Outcome> {
    let loaded = load(&opts.spec)?;
    let report = validate_report(&loaded.path, &loaded.network);
    let stdout = if opts.json {
        to_json(&report)
    } else {
        render_text(&report, &loaded.network)
    };
    Ok(Outcome {
        code: if report.passed { EXIT_OK } else { EXIT_NEGATIVE },
        stdout,
    })
}
