//! JSON model files.
//!
//! ```json
//! {"meta": {"name": "...", "description": "..."},
//!  "nodes": [{"id": "T", "domain": ["0","1"], "parents": ["X"],
//!             "table": {"0": [0.2, 0.8], "1": [0.8, 0.2]}}]}
//! ```
//! Row keys are parent values joined by "|" in declared parent order ("" for roots).
//! Tables may be omitted when only the graph is needed.

use crate::error::{Error, Result};
use crate::gaussian::LinearGaussianScm;
use crate::graph::Dag;
use crate::scm::{mixed_decode, row_key, Meta, NodeSpec, Scm};
use serde::Deserialize;
use serde_json::Value;
use std::collections::BTreeMap;

#[derive(Deserialize)]
struct FileDoc {
    #[serde(default)]
    meta: Option<FileMeta>,
    nodes: Vec<FileNode>,
}

#[derive(Deserialize, Default)]
struct FileMeta {
    #[serde(default)]
    name: String,
    #[serde(default)]
    description: String,
}

#[derive(Deserialize)]
struct FileNode {
    id: String,
    #[serde(default)]
    domain: Vec<Value>,
    #[serde(default)]
    parents: Vec<String>,
    #[serde(default)]
    table: Option<BTreeMap<String, Vec<f64>>>,
    #[serde(default)]
    latent: bool,
    // linear-Gaussian fields
    #[serde(default)]
    intercept: Option<f64>,
    #[serde(default)]
    coefficients: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    noise_variance: Option<f64>,
}

/// A parsed model document: always a graph, plus tables or linear coefficients when present.
#[derive(Clone, Debug)]
pub struct ModelDoc {
    pub meta: Meta,
    pub dag: Dag,
    pub scm: Option<Scm>,
    pub gaussian: Option<LinearGaussianScm>,
    pub latent: Vec<String>,
}

fn label(v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        other => Err(Error::Parse(format!("domain value {other} is not a scalar"))),
    }
}

pub fn parse_model(text: &str) -> Result<ModelDoc> {
    let doc: FileDoc = serde_json::from_str(text)?;
    let meta = doc.meta.as_ref().map(|m| Meta { name: m.name.clone(), description: m.description.clone() }).unwrap_or_default();
    let names: Vec<&str> = doc.nodes.iter().map(|n| n.id.as_str()).collect();
    let mut edges = vec![];
    for n in &doc.nodes {
        for p in &n.parents {
            edges.push((p.as_str(), n.id.as_str()));
        }
    }
    let dag = Dag::new(&names, &edges)?;
    let latent: Vec<String> = doc.nodes.iter().filter(|n| n.latent).map(|n| n.id.clone()).collect();

    let all_tables = !doc.nodes.is_empty() && doc.nodes.iter().all(|n| n.table.is_some());
    let all_linear = !doc.nodes.is_empty() && doc.nodes.iter().all(|n| n.noise_variance.is_some());
    let scm = if all_tables { Some(build_scm(&doc, &meta)?) } else { None };
    let gaussian = if all_linear && !all_tables {
        let mut m = LinearGaussianScm::new(dag.clone());
        for n in &doc.nodes {
            let coefs: Vec<(String, f64)> = n.coefficients.clone().unwrap_or_default().into_iter().collect();
            let coefs: Vec<(&str, f64)> = coefs.iter().map(|(a, b)| (a.as_str(), *b)).collect();
            m.set(&n.id, n.intercept.unwrap_or(0.0), &coefs, n.noise_variance.unwrap())?;
        }
        Some(m)
    } else {
        None
    };
    Ok(ModelDoc { meta, dag, scm, gaussian, latent })
}

fn build_scm(doc: &FileDoc, meta: &Meta) -> Result<Scm> {
    let mut domains: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for n in &doc.nodes {
        domains.insert(&n.id, n.domain.iter().map(label).collect::<Result<_>>()?);
    }
    let mut errs = vec![];
    let mut specs = vec![];
    for n in &doc.nodes {
        let table = n.table.as_ref().unwrap();
        let psizes: Vec<usize> = n.parents.iter().map(|p| domains.get(p.as_str()).map_or(0, |d| d.len())).collect();
        let rows: usize = psizes.iter().product();
        let mut out = Vec::with_capacity(rows);
        let mut seen = 0;
        for r in 0..rows {
            let states = mixed_decode(r, &psizes);
            let key = n
                .parents
                .iter()
                .zip(&states)
                .map(|(p, s)| domains[p.as_str()][*s].clone())
                .collect::<Vec<_>>()
                .join("|");
            match table.get(&key) {
                Some(row) => {
                    seen += 1;
                    out.push(row.clone());
                }
                None => errs.push(format!("node {}: missing table row \"{key}\"", n.id)),
            }
        }
        if seen != table.len() {
            errs.push(format!("node {}: table has rows for parent values outside the domains", n.id));
        }
        let mut spec = NodeSpec::new(&n.id, &domains[n.id.as_str()], &n.parents, out);
        spec.latent = n.latent;
        specs.push(spec);
    }
    if !errs.is_empty() {
        return Err(Error::InvalidModel(errs));
    }
    let mut scm = Scm::new(specs)?;
    scm.meta = meta.clone();
    Ok(scm)
}

pub fn load_model(path: &std::path::Path) -> Result<ModelDoc> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_model(&text)
}

/// Canonical document tree: keys sorted, floats kept apart so they print with 17 significant digits.
enum Canon {
    Obj(BTreeMap<String, Canon>),
    Arr(Vec<Canon>),
    Str(String),
    Num(f64),
    Bool(bool),
}

fn write_canon(c: &Canon, out: &mut String) {
    match c {
        Canon::Obj(m) => {
            out.push('{');
            for (i, (k, v)) in m.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).unwrap());
                out.push(':');
                write_canon(v, out);
            }
            out.push('}');
        }
        Canon::Arr(v) => {
            out.push('[');
            for (i, x) in v.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canon(x, out);
            }
            out.push(']');
        }
        Canon::Str(s) => out.push_str(&serde_json::to_string(s).unwrap()),
        Canon::Num(x) => out.push_str(&format_17(*x)),
        Canon::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
    }
}

/// Scientific notation with 17 significant digits.
pub fn format_17(x: f64) -> String {
    format!("{x:.16e}")
}

fn meta_canon(meta: &Meta) -> Canon {
    Canon::Obj(BTreeMap::from([
        ("description".to_string(), Canon::Str(meta.description.clone())),
        ("name".to_string(), Canon::Str(meta.name.clone())),
    ]))
}

/// Byte-stable serialization of a discrete model.
pub fn to_canonical_json(scm: &Scm) -> String {
    let mut nodes = vec![];
    for (i, n) in scm.nodes().iter().enumerate() {
        let mut m = BTreeMap::new();
        m.insert("id".to_string(), Canon::Str(n.name.clone()));
        m.insert("domain".to_string(), Canon::Arr(n.domain.iter().map(|d| Canon::Str(d.clone())).collect()));
        m.insert("parents".to_string(), Canon::Arr(n.parents.iter().map(|d| Canon::Str(d.clone())).collect()));
        let table: BTreeMap<String, Canon> = n
            .table
            .iter()
            .enumerate()
            .map(|(r, row)| (row_key(scm, i, r), Canon::Arr(row.iter().map(|p| Canon::Num(*p)).collect())))
            .collect();
        m.insert("table".to_string(), Canon::Obj(table));
        if n.latent {
            m.insert("latent".to_string(), Canon::Bool(true));
        }
        nodes.push(Canon::Obj(m));
    }
    let doc = Canon::Obj(BTreeMap::from([
        ("meta".to_string(), meta_canon(&scm.meta)),
        ("nodes".to_string(), Canon::Arr(nodes)),
    ]));
    let mut s = String::new();
    write_canon(&doc, &mut s);
    s.push('\n');
    s
}

/// Byte-stable serialization of a linear-Gaussian model.
pub fn gaussian_to_canonical_json(model: &LinearGaussianScm, meta: &Meta) -> String {
    let dag = model.dag();
    let mut nodes = vec![];
    for i in 0..dag.len() {
        let name = dag.name(i);
        let mut m = BTreeMap::new();
        m.insert("id".to_string(), Canon::Str(name.to_string()));
        let parents: Vec<String> = dag.parents(i).iter().map(|&p| dag.name(p).to_string()).collect();
        m.insert("parents".to_string(), Canon::Arr(parents.iter().map(|p| Canon::Str(p.clone())).collect()));
        m.insert("intercept".to_string(), Canon::Num(model.intercept(i)));
        m.insert("noise_variance".to_string(), Canon::Num(model.noise_variance(i)));
        let coefs: BTreeMap<String, Canon> =
            parents.iter().map(|p| (p.clone(), Canon::Num(model.coefficient(i, dag.id(p).unwrap())))).collect();
        m.insert("coefficients".to_string(), Canon::Obj(coefs));
        nodes.push(Canon::Obj(m));
    }
    let doc = Canon::Obj(BTreeMap::from([
        ("meta".to_string(), meta_canon(meta)),
        ("nodes".to_string(), Canon::Arr(nodes)),
    ]));
    let mut s = String::new();
    write_canon(&doc, &mut s);
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::binary_node;

    #[test]
    fn roundtrip_is_byte_stable() {
        let scm = Scm::new(vec![
            binary_node("X", &[], &[0.5]),
            binary_node("T", &["X"], &[0.8, 0.2]),
            binary_node("R", &["T", "X"], &[0.2, 0.7, 0.5, 0.9]),
        ])
        .unwrap()
        .with_meta("s", "d");
        let a = to_canonical_json(&scm);
        let doc = parse_model(&a).unwrap();
        let back = doc.scm.unwrap();
        assert_eq!(back, scm);
        assert_eq!(to_canonical_json(&back), a);
        assert!(a.contains("\"1|0\":[5.0000000000000000e-1,5.0000000000000000e-1]"));
    }

    #[test]
    fn graph_only_and_numeric_domains() {
        let doc = parse_model(r#"{"nodes":[{"id":"A"},{"id":"B","parents":["A"]}]}"#).unwrap();
        assert!(doc.scm.is_none());
        assert!(doc.dag.has_edge("A", "B"));
        let doc = parse_model(r#"{"nodes":[{"id":"A","domain":[0,1],"table":{"":[0.25,0.75]}}]}"#).unwrap();
        assert_eq!(doc.scm.unwrap().node("A").unwrap().domain, vec!["0", "1"]);
    }

    #[test]
    fn bad_rows_reported() {
        let e = parse_model(r#"{"nodes":[{"id":"A","domain":[0,1],"table":{"":[0.5,0.4]}}]}"#).unwrap_err();
        assert!(matches!(e, Error::InvalidModel(_)));
        let e = parse_model(
            r#"{"nodes":[{"id":"A","domain":[0,1],"table":{"":[0.5,0.5]}},
            {"id":"B","domain":[0,1],"parents":["A"],"table":{"0":[0.5,0.5]}}]}"#,
        )
        .unwrap_err();
        assert!(e.to_string().contains("missing table row \"1\""));
        assert!(matches!(parse_model("{"), Err(Error::Parse(_))));
    }
}
