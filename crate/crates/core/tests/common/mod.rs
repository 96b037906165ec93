#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use scmkit::graph::Dag;
use scmkit::identify::Dist;
use scmkit::scm::{intervene, joint_distribution, random_scm, JointTable, NodeSpec, Scm};
use std::collections::BTreeMap;

pub const FLOOR: f64 = 0.05;

/// Random DAG on n nodes named N0..: edges only forward in index order.
pub fn random_dag<R: Rng>(n: usize, p_edge: f64, rng: &mut R) -> Dag {
    let names: Vec<String> = (0..n).map(|i| format!("N{i}")).collect();
    let mut edges = vec![];
    for j in 0..n {
        for i in 0..j {
            if rng.gen_bool(p_edge) {
                edges.push((names[i].clone(), names[j].clone()));
            }
        }
    }
    Dag::new(&names, &edges).unwrap()
}

/// Random positive tables on the graph, cardinalities drawn from `cards` except for the
/// nodes listed in `binary`.
pub fn random_model<R: Rng>(dag: &Dag, cards: &[usize], binary: &[&str], latent: &[&str], rng: &mut R) -> Scm {
    let c: Vec<usize> =
        (0..dag.len()).map(|i| if binary.contains(&dag.name(i)) { 2 } else { *cards.choose(rng).unwrap() }).collect();
    let scm = random_scm(dag, &c, FLOOR, rng).unwrap();
    with_latent(&scm, latent)
}

pub fn with_latent(scm: &Scm, latent: &[&str]) -> Scm {
    let specs: Vec<NodeSpec> =
        scm.nodes().iter().map(|n| if latent.contains(&n.name.as_str()) { n.clone().latent() } else { n.clone() }).collect();
    Scm::new(specs).unwrap()
}

/// Graph over role names with all required edges and each optional edge with probability 1/2.
pub fn shape_dag<R: Rng>(roles: &[&str], required: &[(&str, &str)], optional: &[(&str, &str)], rng: &mut R) -> Dag {
    let mut edges: Vec<(&str, &str)> = required.to_vec();
    edges.extend(optional.iter().filter(|_| rng.gen_bool(0.5)));
    // list nodes in a topological order so tables can be built in order
    let d = Dag::new(roles, &edges).unwrap();
    let order = d.topological_order().unwrap();
    Dag::new(&order, &edges.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect::<Vec<_>>()).unwrap()
}

/// Observational joint: latent nodes summed out.
pub fn observed_joint(scm: &Scm) -> JointTable<f64> {
    joint_distribution(scm).unwrap().marginal_by_name(&scm.observed_names()).unwrap()
}

/// Law of `target` after forcing the given values.
pub fn do_marginal(scm: &Scm, set: &[(&str, &str)], target: &str) -> Dist {
    let iv = set.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    let m = intervene(scm, &iv).unwrap();
    joint_distribution(&m).unwrap().marginal_by_name(&[target]).unwrap().to_map()
}

pub fn tv(a: &Dist, b: &Dist) -> f64 {
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    0.5 * keys.iter().map(|k| (a.get(*k).unwrap_or(&0.0) - b.get(*k).unwrap_or(&0.0)).abs()).sum::<f64>()
}

pub fn mean(d: &Dist) -> f64 {
    d.iter().map(|(k, p)| k.parse::<f64>().unwrap() * p).sum()
}

/// Mixed-radix decoding, first coordinate slowest.
pub fn decode(mut i: usize, sizes: &[usize]) -> Vec<usize> {
    let mut out = vec![0; sizes.len()];
    for k in (0..sizes.len()).rev() {
        out[k] = i % sizes[k];
        i /= sizes[k];
    }
    out
}

/// Rebuild `scm` with `f` applied to each node spec and optional extra root nodes prepended.
pub fn rebuild(scm: &Scm, roots: Vec<NodeSpec>, f: impl Fn(&NodeSpec) -> NodeSpec) -> Scm {
    let mut specs = roots;
    specs.extend(scm.nodes().iter().map(f));
    Scm::new(specs).unwrap()
}

pub fn state_labels(scm: &Scm, node: &str) -> Vec<String> {
    scm.node(node).unwrap().domain.clone()
}

pub fn sizes_of(scm: &Scm, names: &[String]) -> Vec<usize> {
    names.iter().map(|p| scm.node(p).unwrap().domain.len()).collect()
}

pub fn point(k: usize, s: usize) -> Vec<f64> {
    let mut r = vec![0.0; k];
    r[s] = 1.0;
    r
}

pub fn dist_map(pairs: &[(&str, f64)]) -> Dist {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect::<BTreeMap<_, _>>()
}
