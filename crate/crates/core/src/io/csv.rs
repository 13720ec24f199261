//! CSV emitters. Floats use the shortest representation that parses back
//! to the same value.

use crate::growth::{tree_metrics, BranchNode, CoralTree, EventRecord};
use crate::integrator::{EventHit, Trajectory};
use crate::kinetics::{saturation_index, Equilibrium};
use crate::vladimirov::{GeneratorMatrix, SpectrumReport};
use std::fmt::Write;

fn header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for species in ["u", "v", "w"] {
        cols.extend((0..n).map(|i| format!("{species}_{i}")));
    }
    cols.join(",")
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// `t,u_0..,v_0..,w_0..`, one row per trajectory point.
pub fn timeseries(traj: &Trajectory, compartments: usize) -> String {
    let mut out = header(compartments);
    out.push('\n');
    for (t, y) in traj.t.iter().zip(&traj.y) {
        let _ = writeln!(out, "{t},{}", join(y.iter().copied()));
    }
    out
}

pub fn events(records: &[EventRecord]) -> String {
    let mut out = String::from("branch,kind,time,u,v,w,omega\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.branch,
            r.kind.as_str(),
            r.time,
            r.state.u,
            r.state.v,
            r.state.w,
            r.omega
        );
    }
    out
}

/// Event log for raw solver hits on a packed `n`-compartment state.
pub fn solver_events(hits: &[EventHit], compartments: usize, kappa_sp: f64) -> String {
    let n = compartments;
    let mut out = String::from("branch,kind,time,u,v,w,omega\n");
    for h in hits {
        let i = h.id;
        let (u, v, w) = (h.y[i], h.y[n + i], h.y[2 * n + i]);
        let _ = writeln!(
            out,
            "{i},crossing,{},{u},{v},{w},{}",
            h.t,
            saturation_index(u, v, kappa_sp)
        );
    }
    out
}

pub fn matrix(gen: &GeneratorMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..gen.dim() {
        out.push_str(&join(gen.row(i).iter().copied()));
        out.push('\n');
    }
    out
}

pub fn spectrum(report: &SpectrumReport) -> String {
    let mut out = String::from("eigenvalue,multiplicity,expected,expected_multiplicity,abs_error\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.eigenvalue, r.multiplicity, r.expected, r.expected_multiplicity, r.abs_error
        );
    }
    out
}

pub fn equilibria(points: &[Equilibrium]) -> String {
    let mut out = String::from("u,v,lambda_1,lambda_2,classification\n");
    for e in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.u,
            e.v,
            e.eigenvalues[0],
            e.eigenvalues[1],
            e.stability.label()
        );
    }
    out
}

/// One row per tree node in depth-first order.
pub fn tree_nodes(tree: &CoralTree) -> String {
    let mut out = String::from("path,depth,birth_time,crossing_time,lifetime,omega,halted,continuation,children\n");
    for node in tree.root.nodes() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            path_label(node),
            node.depth(),
            node.birth_time,
            opt(node.crossing_time),
            node.lifetime,
            opt(node.omega),
            node.halted,
            node.continuation,
            node.children.len()
        );
    }
    out
}

/// Digits most significant first, `root` for the empty path.
pub fn path_label(node: &BranchNode) -> String {
    if node.path.is_empty() {
        "root".to_string()
    } else {
        node.path
            .iter()
            .rev()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("")
    }
}

pub fn metrics(tree: &CoralTree, min_depth: usize) -> String {
    let m = tree_metrics(tree, min_depth);
    let mut out = String::from("node_count,leaf_count,depth,min_lifetime,max_lifetime,mean_lifetime,relative_range\n");
    let l = m.lifetimes;
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{}",
        m.node_count,
        m.leaf_count,
        m.depth,
        opt(l.map(|l| l.min)),
        opt(l.map(|l| l.max)),
        opt(l.map(|l| l.mean)),
        opt(l.map(|l| l.relative_range))
    );
    out
}
