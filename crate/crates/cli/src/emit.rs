use std::fmt::Write as _;

use padic_polygon::radii_engine::{EdgeProfile, Violation};
use padic_polygon::scalars::{approx, fmt_q};
use padic_polygon::{ControllingGraph, QLog, RadiiProfile};
use serde::Serialize;

use crate::manifest::RunManifest;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    manifest_digest: String,
    manifest: &'a RunManifest,
    data: &'a T,
}

/// Pretty JSON wrapped with the manifest; struct field order keeps the key
/// order stable.
pub fn json<T: Serialize>(data: &T, manifest: &RunManifest) -> String {
    let env = Envelope { manifest_digest: manifest.digest(), manifest, data };
    let mut s = serde_json::to_string_pretty(&env).expect("output serializes");
    s.push('\n');
    s
}

fn approx_log(v: &QLog) -> String {
    match v {
        QLog::Fin(x) => format!("{:.6}", approx(x)),
        other => other.to_string(),
    }
}

/// Abscissae of the CSV rows of an edge: both ends and every breakpoint of
/// any radius.
fn edge_rows(ep: &EdgeProfile) -> Vec<QLog> {
    let mut xs: Vec<_> = ep.radii.iter().flat_map(|f| f.breakpoints()).collect();
    xs.sort();
    xs.dedup();
    let hi = ep.radii[0].hi().clone();
    let mut out = vec![ep.radii[0].lo().clone()];
    out.extend(xs.into_iter().map(QLog::Fin));
    out.push(QLog::Fin(hi));
    out
}

/// `# manifest <digest>` followed by RFC 4180 records.
fn csv_text(manifest: &RunManifest, header: Vec<String>, rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 records");
    format!("# manifest {}\n{body}", manifest.digest())
}

/// One row per edge end and per breakpoint: `edge,center,L,R_1..R_r`.
pub fn profile_csv(profile: &RadiiProfile, with_approx: bool, manifest: &RunManifest) -> String {
    let r = profile.rank;
    let mut header = vec!["edge".to_string(), "center".into(), "L".into()];
    header.extend((1..=r).map(|i| format!("R_{i}")));
    if with_approx {
        header.extend((1..=r).map(|i| format!("R_{i}_approx")));
    }
    let mut rows = Vec::new();
    for (e, ep) in profile.edges.iter().enumerate() {
        let center = fmt_q(&profile.graph.edges[e].center);
        for l in edge_rows(ep) {
            let vals: Vec<QLog> = ep.radii.iter().map(|f| f.eval(&l).expect("row inside the edge")).collect();
            let mut row = vec![e.to_string(), center.clone(), l.to_string()];
            row.extend(vals.iter().map(|v| v.to_string()));
            if with_approx {
                row.extend(vals.iter().map(approx_log));
            }
            rows.push(row);
        }
    }
    csv_text(manifest, header, rows)
}

/// A controlling graph with the slopes of its function along every edge.
#[derive(Debug, Clone, Serialize)]
pub struct GraphExport {
    pub index: usize,
    pub controlling: ControllingGraph,
    /// Slopes of `log R_i` on each edge, from its lower end upwards.
    pub edge_slopes: Vec<Vec<String>>,
}

impl GraphExport {
    pub fn new(profile: &RadiiProfile, index: usize) -> Self {
        let controlling = padic_polygon::prune_to_controlling_graph(profile, index);
        let f = profile.radius_fn(index);
        let edge_slopes = controlling
            .graph
            .edges
            .iter()
            .map(|e| match f.segment(&e.center, &e.lo, &e.hi, profile.p) {
                Some(seg) => seg.slopes().iter().map(fmt_q).collect(),
                None => Vec::new(),
            })
            .collect();
        GraphExport { index, controlling, edge_slopes }
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Undirected DOT with vertices labelled `x_{c,L}` and edges labelled with
/// their slope lists.
pub fn graph_dot(g: &GraphExport, manifest: &RunManifest) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "// manifest {}", manifest.digest());
    let _ = writeln!(s, "graph controlling_graph_{} {{", g.index);
    for (v, x) in g.controlling.graph.vertices.iter().enumerate() {
        let _ = writeln!(s, "  v{v} [label=\"{}\"];", dot_escape(&x.label()));
    }
    for (e, ed) in g.controlling.graph.edges.iter().enumerate() {
        let label = format!("[{}]", g.edge_slopes[e].join(", "));
        let style = if g.controlling.constant[e] { ", style=dashed" } else { "" };
        let _ = writeln!(s, "  v{} -- v{} [label=\"{}\"{style}];", ed.child, ed.parent, dot_escape(&label));
    }
    s.push_str("}\n");
    s
}

pub fn graph_csv(g: &GraphExport, manifest: &RunManifest) -> String {
    let header = ["child", "parent", "center", "lo", "hi", "constant", "slopes"].map(String::from).to_vec();
    let vs = &g.controlling.graph.vertices;
    let rows = g
        .controlling
        .graph
        .edges
        .iter()
        .enumerate()
        .map(|(e, ed)| {
            vec![
                vs[ed.child].label(),
                vs[ed.parent].label(),
                fmt_q(&ed.center),
                ed.lo.to_string(),
                fmt_q(&ed.hi),
                g.controlling.constant[e].to_string(),
                g.edge_slopes[e].join(" "),
            ]
        })
        .collect();
    csv_text(manifest, header, rows)
}

pub fn violations_csv(violations: &[Violation], manifest: &RunManifest) -> String {
    let header = ["check", "index", "at", "direction", "value", "detail"].map(String::from).to_vec();
    let rows = violations
        .iter()
        .map(|v| {
            let dir = v
                .direction
                .as_ref()
                .map(|d| serde_json::to_string(d).expect("direction serializes"))
                .unwrap_or_default();
            vec![v.check.clone(), v.index.to_string(), v.at.label(), dir, fmt_q(&v.value.0), v.detail.clone()]
        })
        .collect();
    csv_text(manifest, header, rows)
}
