//! Graph and potential files, CSV series and JSON reports.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use qwalk_core::generators::EdgePhases;
use qwalk_core::graph::Graph;

use crate::error::{CliError, CliResult};

/// A graph read from disk with its hopping phases and vertex labels.
#[derive(Clone, Debug)]
pub struct GraphFile {
    pub graph: Graph,
    pub phases: EdgePhases,
    /// External label of each vertex id.
    pub labels: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphJson {
    #[serde(default)]
    directed: bool,
    n: usize,
    edges: Vec<EdgeJson>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeJson {
    u: usize,
    v: usize,
    w: Option<[f64; 2]>,
    theta: Option<f64>,
}

/// Reads a `.json` graph or, for any other extension, an edge list.
pub fn load_graph(path: &Path) -> CliResult<GraphFile> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        parse_graph_json(&text)
    } else {
        parse_edge_list(&text)
    };
    parsed.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn parse_graph_json(text: &str) -> CliResult<GraphFile> {
    let raw: GraphJson = from_json(text)?;
    let mut graph = Graph::new(raw.n, raw.directed);
    let mut phases = EdgePhases::new();
    for (i, e) in raw.edges.iter().enumerate() {
        let field = |name: &str| format!("edges[{i}].{name}");
        for (name, x) in [("u", e.u), ("v", e.v)] {
            if x >= raw.n {
                return Err(CliError::Input(format!("{}: vertex {x} out of range (n = {})", field(name), raw.n)));
            }
        }
        let w = e.w.map_or(Complex64::new(1.0, 0.0), |[re, im]| Complex64::new(re, im));
        graph
            .add_weighted_edge(e.u, e.v, w)
            .map_err(|err| CliError::Input(format!("{}: {err}", field("w"))))?;
        if let Some(theta) = e.theta {
            if raw.directed {
                return Err(CliError::Input(format!("{}: phases need an undirected graph", field("theta"))));
            }
            if !theta.is_finite() {
                return Err(CliError::Input(format!("{}: non-finite phase", field("theta"))));
            }
            phases.insert(e.u, e.v, theta);
        }
    }
    Ok(GraphFile {
        graph,
        phases,
        labels: (0..raw.n).map(|v| v.to_string()).collect(),
    })
}

/// Undirected unit-weight edge list, one `u v` pair per line; `#` starts a
/// comment. Integer labels are used as vertex ids directly; otherwise labels
/// are numbered in order of first appearance.
pub fn parse_edge_list(text: &str) -> CliResult<GraphFile> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(CliError::Input(format!("line {}: expected `u v`, got {line:?}", i + 1)));
        }
        pairs.push((i + 1, tokens[0], tokens[1]));
    }
    let numeric: Option<Vec<(usize, usize)>> = pairs
        .iter()
        .map(|(_, a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
        .collect();
    let (n, edges, labels) = match numeric {
        Some(edges) => {
            let n = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
            (n, edges, (0..n).map(|v| v.to_string()).collect())
        }
        None => {
            let mut ids: HashMap<&str, usize> = HashMap::new();
            let mut labels: Vec<String> = Vec::new();
            let mut edges = Vec::new();
            for &(_, a, b) in &pairs {
                let mut ends = [0; 2];
                for (end, s) in ends.iter_mut().zip([a, b]) {
                    *end = *ids.entry(s).or_insert_with(|| {
                        labels.push(s.to_string());
                        labels.len() - 1
                    });
                }
                edges.push((ends[0], ends[1]));
            }
            (labels.len(), edges, labels)
        }
    };
    let mut graph = Graph::new(n, false);
    for ((line, _, _), (a, b)) in pairs.iter().zip(edges) {
        graph
            .add_edge(a, b)
            .map_err(|e| CliError::Input(format!("line {line}: {e}")))?;
    }
    Ok(GraphFile {
        graph,
        phases: EdgePhases::new(),
        labels,
    })
}

/// A JSON array of `n` real numbers.
pub fn load_vector(path: &Path, n: usize, what: &str) -> CliResult<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let v: Vec<f64> = from_json(&text).map_err(|e| CliError::Input(format!("{}: {what}: {e}", path.display())))?;
    if v.len() != n {
        return Err(CliError::Input(format!(
            "{}: {what} has length {}, graph has {n} vertices",
            path.display(),
            v.len()
        )));
    }
    Ok(v)
}

/// Deserializes JSON, prefixing errors with the path of the offending field.
pub fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Input(inner.to_string())
        } else {
            CliError::Input(format!("{path}: {inner}"))
        }
    })
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Seventeen significant digits: enough to read back the same double.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `t,value` rows.
pub fn export_series(times: &[f64], values: &[f64], path: &Path) -> CliResult<()> {
    if times.len() != values.len() {
        return Err(CliError::Input(format!(
            "series lengths differ: {} times, {} values",
            times.len(),
            values.len()
        )));
    }
    let mut out = String::from("t,value\n");
    for (t, v) in times.iter().zip(values) {
        let _ = writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*v));
    }
    write_file(path, &out)
}

/// Writes `t,re,im` rows.
pub fn export_complex_series(times: &[f64], values: &[Complex64], path: &Path) -> CliResult<()> {
    if times.len() != values.len() {
        return Err(CliError::Input(format!(
            "series lengths differ: {} times, {} values",
            times.len(),
            values.len()
        )));
    }
    let mut out = String::from("t,re,im\n");
    for (t, v) in times.iter().zip(values) {
        let _ = writeln!(out, "{},{},{}", fmt_f64(*t), fmt_f64(v.re), fmt_f64(v.im));
    }
    write_file(path, &out)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> CliResult<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Input(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    write_file(path, &text)
}
