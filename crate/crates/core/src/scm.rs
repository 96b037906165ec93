//! Discrete structural causal models stored as conditional probability tables.

use crate::error::{invalid, Error, Result};
use crate::exogenous::{sample_index, split_streams, DigitStream};
use crate::graph::Dag;
use crate::prob::{abs_diff, Prob};
use num_rational::BigRational;
use rand::Rng;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

pub const NORMALIZATION_TOL: f64 = 1e-12;
pub const JOINT_TOL: f64 = 1e-10;
pub const MAX_CONFIGS: usize = 10_000_000;

/// One node: finite domain, declared parent order, and a table with one
/// probability row per parent configuration (first parent varies slowest).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeSpec {
    pub name: String,
    pub domain: Vec<String>,
    pub parents: Vec<String>,
    pub table: Vec<Vec<f64>>,
    pub latent: bool,
}

impl NodeSpec {
    pub fn new<S: AsRef<str>>(name: &str, domain: &[S], parents: &[S], table: Vec<Vec<f64>>) -> Self {
        NodeSpec {
            name: name.to_string(),
            domain: domain.iter().map(|s| s.as_ref().to_string()).collect(),
            parents: parents.iter().map(|s| s.as_ref().to_string()).collect(),
            table,
            latent: false,
        }
    }

    pub fn latent(mut self) -> Self {
        self.latent = true;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Meta {
    pub name: String,
    pub description: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scm {
    pub meta: Meta,
    dag: Dag,
    nodes: Vec<NodeSpec>,
    parent_ids: Vec<Vec<usize>>,
}

/// Mixed-radix index with the first coordinate varying slowest.
pub(crate) fn mixed_index(states: &[usize], sizes: &[usize]) -> usize {
    states.iter().zip(sizes).fold(0, |acc, (s, n)| acc * n + s)
}

pub(crate) fn mixed_decode(mut idx: usize, sizes: &[usize]) -> Vec<usize> {
    let mut out = vec![0; sizes.len()];
    for k in (0..sizes.len()).rev() {
        out[k] = idx % sizes[k];
        idx /= sizes[k];
    }
    out
}

impl Scm {
    /// Build and validate.
    pub fn new(nodes: Vec<NodeSpec>) -> Result<Self> {
        let scm = Self::unchecked(nodes)?;
        let errs = validate_scm(&scm);
        if errs.is_empty() {
            Ok(scm)
        } else {
            Err(Error::InvalidModel(errs))
        }
    }

    pub fn with_meta(mut self, name: &str, description: &str) -> Self {
        self.meta = Meta { name: name.into(), description: description.into() };
        self
    }

    /// Build the graph from the declared parents, without checking the tables.
    pub fn unchecked(nodes: Vec<NodeSpec>) -> Result<Self> {
        let names: Vec<&str> = nodes.iter().map(|n| n.name.as_str()).collect();
        let mut edges = vec![];
        for n in &nodes {
            for p in &n.parents {
                edges.push((p.as_str(), n.name.as_str()));
            }
        }
        let dag = Dag::new(&names, &edges)?;
        Self::with_dag(dag, nodes)
    }

    /// Pair an explicit graph with node specs; the two may disagree (see `validate_scm`).
    pub fn with_dag(dag: Dag, nodes: Vec<NodeSpec>) -> Result<Self> {
        if dag.len() != nodes.len() {
            return invalid("graph and node list have different sizes");
        }
        let mut parent_ids = vec![];
        for (i, n) in nodes.iter().enumerate() {
            if dag.name(i) != n.name {
                return invalid(format!("node {} out of order with the graph", n.name));
            }
            let ids = n.parents.iter().map(|p| dag.id(p)).collect::<Result<Vec<_>>>()?;
            parent_ids.push(ids);
        }
        Ok(Scm { meta: Meta::default(), dag, nodes, parent_ids })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.dag.id(name)
    }

    pub fn node(&self, name: &str) -> Result<&NodeSpec> {
        Ok(&self.nodes[self.id(name)?])
    }

    pub fn names(&self) -> Vec<String> {
        self.nodes.iter().map(|n| n.name.clone()).collect()
    }

    pub fn latent_names(&self) -> Vec<String> {
        self.nodes.iter().filter(|n| n.latent).map(|n| n.name.clone()).collect()
    }

    pub fn observed_names(&self) -> Vec<String> {
        self.nodes.iter().filter(|n| !n.latent).map(|n| n.name.clone()).collect()
    }

    pub fn state(&self, node: &str, label: &str) -> Result<usize> {
        let n = self.node(node)?;
        n.domain
            .iter()
            .position(|v| v == label)
            .ok_or_else(|| Error::InvalidArgument(format!("value {label} not in the domain of {node}")))
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.domain.len()).collect()
    }

    /// Probability row for node `i` at the given full configuration.
    pub(crate) fn row_for(&self, i: usize, config: &[usize]) -> &[f64] {
        let sizes: Vec<usize> = self.parent_ids[i].iter().map(|&p| self.nodes[p].domain.len()).collect();
        let states: Vec<usize> = self.parent_ids[i].iter().map(|&p| config[p]).collect();
        &self.nodes[i].table[mixed_index(&states, &sizes)]
    }

    /// Replace one node's mechanism (domain, parents, table) and revalidate.
    pub fn replace_node(&self, spec: NodeSpec) -> Result<Scm> {
        let i = self.id(&spec.name)?;
        let mut nodes = self.nodes.clone();
        nodes[i] = spec;
        let mut s = Scm::new(nodes)?;
        s.meta = self.meta.clone();
        Ok(s)
    }

    /// Append new nodes and revalidate.
    pub fn extend(&self, extra: Vec<NodeSpec>) -> Result<Scm> {
        let mut nodes = self.nodes.clone();
        nodes.extend(extra);
        let mut s = Scm::new(nodes)?;
        s.meta = self.meta.clone();
        Ok(s)
    }

    /// Drop nodes, substituting a fixed value for each dropped node wherever it is a parent.
    pub fn fix_and_remove(&self, fixed: &BTreeMap<String, String>) -> Result<Scm> {
        let mut fixed_states = BTreeMap::new();
        for (k, v) in fixed {
            fixed_states.insert(k.clone(), self.state(k, v)?);
        }
        let mut out = vec![];
        for n in &self.nodes {
            if fixed.contains_key(&n.name) {
                continue;
            }
            let sizes: Vec<usize> = n.parents.iter().map(|p| self.node(p).unwrap().domain.len()).collect();
            let keep: Vec<usize> = (0..n.parents.len()).filter(|&k| !fixed.contains_key(&n.parents[k])).collect();
            let kept_sizes: Vec<usize> = keep.iter().map(|&k| sizes[k]).collect();
            let rows: usize = kept_sizes.iter().product();
            let mut table = Vec::with_capacity(rows);
            for r in 0..rows {
                let kept_states = mixed_decode(r, &kept_sizes);
                let mut full = vec![0; n.parents.len()];
                for (j, &k) in keep.iter().enumerate() {
                    full[k] = kept_states[j];
                }
                for (k, p) in n.parents.iter().enumerate() {
                    if let Some(s) = fixed_states.get(p) {
                        full[k] = *s;
                    }
                }
                table.push(n.table[mixed_index(&full, &sizes)].clone());
            }
            out.push(NodeSpec {
                name: n.name.clone(),
                domain: n.domain.clone(),
                parents: keep.iter().map(|&k| n.parents[k].clone()).collect(),
                table,
                latent: n.latent,
            });
        }
        let mut s = Scm::new(out)?;
        s.meta = self.meta.clone();
        Ok(s)
    }
}

/// All violated invariants; empty means the model is well formed.
pub fn validate_scm(scm: &Scm) -> Vec<String> {
    let mut errs = vec![];
    if let Err(e) = scm.dag.topological_order() {
        errs.push(e.to_string());
    }
    for (i, n) in scm.nodes.iter().enumerate() {
        if n.domain.is_empty() {
            errs.push(format!("node {}: empty domain", n.name));
        }
        let uniq: BTreeSet<&String> = n.domain.iter().collect();
        if uniq.len() != n.domain.len() {
            errs.push(format!("node {}: repeated domain values", n.name));
        }
        let declared: BTreeSet<&str> = n.parents.iter().map(|s| s.as_str()).collect();
        if declared.len() != n.parents.len() {
            errs.push(format!("node {}: repeated parent", n.name));
        }
        let graph: BTreeSet<&str> = scm.dag.parents(i).iter().map(|&p| scm.dag.name(p)).collect();
        if declared != graph {
            errs.push(format!(
                "node {}: table parents [{}] differ from graph parents [{}]",
                n.name,
                n.parents.join(","),
                graph.into_iter().collect::<Vec<_>>().join(",")
            ));
            continue;
        }
        let psizes: Vec<usize> = scm.parent_ids[i].iter().map(|&p| scm.nodes[p].domain.len()).collect();
        let rows: usize = psizes.iter().product();
        if n.table.len() != rows {
            errs.push(format!("node {}: {} table rows, expected {}", n.name, n.table.len(), rows));
            continue;
        }
        for (r, row) in n.table.iter().enumerate() {
            let key = row_key(scm, i, r);
            if row.len() != n.domain.len() {
                errs.push(format!("node {} row {key}: {} entries for {} values", n.name, row.len(), n.domain.len()));
                continue;
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                errs.push(format!("node {} row {key}: negative or non-finite probability", n.name));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > NORMALIZATION_TOL {
                errs.push(format!("node {} row {key}: sums to {s}", n.name));
            }
        }
    }
    errs
}

/// Parent values joined by "|" in declared order; "" for parentless nodes.
pub fn row_key(scm: &Scm, node: usize, row: usize) -> String {
    let pids = &scm.parent_ids[node];
    let sizes: Vec<usize> = pids.iter().map(|&p| scm.nodes[p].domain.len()).collect();
    let states = mixed_decode(row, &sizes);
    pids.iter().zip(states).map(|(&p, s)| scm.nodes[p].domain[s].clone()).collect::<Vec<_>>().join("|")
}

/// Exact joint law over a list of discrete variables.
#[derive(Clone, Debug, PartialEq)]
pub struct JointTable<P = f64> {
    names: Vec<String>,
    domains: Vec<Vec<String>>,
    sizes: Vec<usize>,
    probs: Vec<P>,
}

pub type Event<'a> = [(usize, usize)];

impl<P: Prob> JointTable<P> {
    pub fn from_parts(names: Vec<String>, domains: Vec<Vec<String>>, probs: Vec<P>) -> Result<Self> {
        let sizes: Vec<usize> = domains.iter().map(|d| d.len()).collect();
        if names.len() != domains.len() || sizes.iter().product::<usize>() != probs.len() {
            return invalid("joint table dimensions disagree");
        }
        Ok(JointTable { names, domains, sizes, probs })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn domains(&self) -> &[Vec<String>] {
        &self.domains
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn probs(&self) -> &[P] {
        &self.probs
    }

    pub fn var(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variable {name}")))
    }

    pub fn vars(&self, names: &[impl AsRef<str>]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.var(n.as_ref())).collect()
    }

    pub fn state(&self, var: usize, label: &str) -> Result<usize> {
        self.domains[var]
            .iter()
            .position(|v| v == label)
            .ok_or_else(|| Error::InvalidArgument(format!("value {label} not in the domain of {}", self.names[var])))
    }

    /// Numeric reading of a state label.
    pub fn value(&self, var: usize, state: usize) -> Result<f64> {
        self.domains[var][state].parse::<f64>().map_err(|_| {
            Error::InvalidArgument(format!(
                "variable {} has non-numeric value {}",
                self.names[var], self.domains[var][state]
            ))
        })
    }

    pub fn config(&self, idx: usize) -> Vec<usize> {
        mixed_decode(idx, &self.sizes)
    }

    pub fn at(&self, states: &[usize]) -> &P {
        &self.probs[mixed_index(states, &self.sizes)]
    }

    pub fn total(&self) -> P {
        self.probs.iter().fold(P::zero(), |a, b| a + b.clone())
    }

    /// Marginal over `vars`, in the given order.
    pub fn marginal(&self, vars: &[usize]) -> JointTable<P> {
        let sizes: Vec<usize> = vars.iter().map(|&v| self.sizes[v]).collect();
        let mut probs = vec![P::zero(); sizes.iter().product()];
        for (idx, p) in self.probs.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let c = self.config(idx);
            let sub: Vec<usize> = vars.iter().map(|&v| c[v]).collect();
            let k = mixed_index(&sub, &sizes);
            probs[k] = probs[k].clone() + p.clone();
        }
        JointTable {
            names: vars.iter().map(|&v| self.names[v].clone()).collect(),
            domains: vars.iter().map(|&v| self.domains[v].clone()).collect(),
            sizes,
            probs,
        }
    }

    pub fn marginal_by_name(&self, names: &[impl AsRef<str>]) -> Result<JointTable<P>> {
        Ok(self.marginal(&self.vars(names)?))
    }

    /// P(event) for a partial configuration.
    pub fn prob(&self, event: &Event) -> P {
        let mut s = P::zero();
        for (idx, p) in self.probs.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let c = self.config(idx);
            if event.iter().all(|&(v, st)| c[v] == st) {
                s = s + p.clone();
            }
        }
        s
    }

    pub fn describe(&self, event: &Event) -> String {
        if event.is_empty() {
            return "(empty event)".into();
        }
        event
            .iter()
            .map(|&(v, s)| format!("{}={}", self.names[v], self.domains[v][s]))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// P(target | given); zero-probability conditioning is an error.
    pub fn cond(&self, target: &Event, given: &Event) -> Result<P> {
        let pg = self.prob(given);
        if pg.negligible() {
            return Err(Error::ZeroProbability(self.describe(given)));
        }
        let both: Vec<(usize, usize)> = given.iter().chain(target.iter()).copied().collect();
        Ok(self.prob(&both) / pg)
    }

    /// Conditional law of `targets` given a partial configuration.
    pub fn restrict(&self, targets: &[usize], given: &Event) -> Result<JointTable<P>> {
        let gv: BTreeSet<usize> = given.iter().map(|g| g.0).collect();
        if targets.iter().any(|t| gv.contains(t)) {
            return invalid("targets overlap the conditioning variables");
        }
        let pg = self.prob(given);
        if pg.negligible() {
            return Err(Error::ZeroProbability(self.describe(given)));
        }
        let sizes: Vec<usize> = targets.iter().map(|&v| self.sizes[v]).collect();
        let mut probs = vec![P::zero(); sizes.iter().product()];
        for (idx, p) in self.probs.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let c = self.config(idx);
            if given.iter().all(|&(v, st)| c[v] == st) {
                let sub: Vec<usize> = targets.iter().map(|&v| c[v]).collect();
                let k = mixed_index(&sub, &sizes);
                probs[k] = probs[k].clone() + p.clone();
            }
        }
        let probs = probs.into_iter().map(|p| p / pg.clone()).collect();
        Ok(JointTable {
            names: targets.iter().map(|&v| self.names[v].clone()).collect(),
            domains: targets.iter().map(|&v| self.domains[v].clone()).collect(),
            sizes,
            probs,
        })
    }

    /// Name-based convenience around `restrict`.
    pub fn restrict_by_name(&self, targets: &[&str], given: &[(&str, &str)]) -> Result<JointTable<P>> {
        let t = self.vars(targets)?;
        let g = self.event(given)?;
        self.restrict(&t, &g)
    }

    pub fn event(&self, pairs: &[(&str, &str)]) -> Result<Vec<(usize, usize)>> {
        pairs
            .iter()
            .map(|(n, v)| {
                let i = self.var(n)?;
                Ok((i, self.state(i, v)?))
            })
            .collect()
    }

    /// Probability of a single-variable table's state, by label.
    pub fn p1(&self, label: &str) -> Result<P> {
        if self.names.len() != 1 {
            return invalid("p1 needs a one-variable table");
        }
        Ok(self.probs[self.state(0, label)?].clone())
    }

    pub fn to_f64(&self) -> JointTable<f64> {
        JointTable {
            names: self.names.clone(),
            domains: self.domains.clone(),
            sizes: self.sizes.clone(),
            probs: self.probs.iter().map(|p| p.to_f64()).collect(),
        }
    }

    /// Largest absolute difference against another table over the same variables.
    pub fn max_abs_diff(&self, other: &JointTable<P>) -> Result<f64> {
        let o = align(other, &self.names)?;
        Ok(self.probs.iter().zip(&o.probs).map(|(a, b)| abs_diff(a, b)).fold(0.0, f64::max))
    }
}

fn align<P: Prob>(t: &JointTable<P>, names: &[String]) -> Result<JointTable<P>> {
    let vars = t.vars(names)?;
    if vars.len() != t.names.len() {
        return invalid("tables range over different variables");
    }
    Ok(t.marginal(&vars))
}

impl JointTable<f64> {
    /// Half the L1 distance; both tables must range over the same variables (any order).
    pub fn tv_distance(&self, other: &JointTable<f64>) -> Result<f64> {
        let o = align(other, &self.names)?;
        if o.domains != self.domains {
            return invalid("tables have different domains");
        }
        Ok(0.5 * self.probs.iter().zip(&o.probs).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    /// Map of label tuple (joined by "|") to probability; handy in reports.
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        (0..self.probs.len())
            .map(|i| {
                let c = self.config(i);
                let key = c.iter().enumerate().map(|(v, s)| self.domains[v][*s].clone()).collect::<Vec<_>>().join("|");
                (key, self.probs[i])
            })
            .collect()
    }
}

fn check_size(scm: &Scm) -> Result<()> {
    let mut n: usize = 1;
    for s in scm.sizes() {
        n = n.checked_mul(s).filter(|&v| v <= MAX_CONFIGS).ok_or_else(|| {
            Error::ResourceLimit(format!("joint state space exceeds {MAX_CONFIGS} configurations"))
        })?;
    }
    Ok(())
}

fn joint_generic<P: Prob>(scm: &Scm) -> Result<JointTable<P>> {
    check_size(scm)?;
    let sizes = scm.sizes();
    let total: usize = sizes.iter().product();
    let order = scm.dag.topological_order_ids()?;
    let tables: Vec<Vec<Vec<P>>> = scm
        .nodes
        .iter()
        .map(|n| n.table.iter().map(|row| row.iter().map(|&x| P::from_f64(x)).collect()).collect())
        .collect();
    let mut probs = Vec::with_capacity(total);
    for idx in 0..total {
        let c = mixed_decode(idx, &sizes);
        let mut p = P::one();
        for &i in &order {
            let psizes: Vec<usize> = scm.parent_ids[i].iter().map(|&q| sizes[q]).collect();
            let pstates: Vec<usize> = scm.parent_ids[i].iter().map(|&q| c[q]).collect();
            let v = &tables[i][mixed_index(&pstates, &psizes)][c[i]];
            if v.is_zero() {
                p = P::zero();
                break;
            }
            p = p * v.clone();
        }
        probs.push(p);
    }
    Ok(JointTable {
        names: scm.names(),
        domains: scm.nodes.iter().map(|n| n.domain.clone()).collect(),
        sizes,
        probs,
    })
}

/// Product of the tables in topological order.
pub fn joint_distribution(scm: &Scm) -> Result<JointTable<f64>> {
    joint_generic(scm)
}

/// Same as `joint_distribution` with each table entry read as an exact decimal.
pub fn joint_distribution_exact(scm: &Scm) -> Result<JointTable<BigRational>> {
    joint_generic(scm)
}

/// Forced values: node name to value label.
pub type Intervention = BTreeMap<String, String>;

pub fn intervention(pairs: &[(&str, &str)]) -> Intervention {
    pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

/// Replace each target's mechanism by a point mass and cut its incoming edges.
pub fn intervene(scm: &Scm, iv: &Intervention) -> Result<Scm> {
    let mut nodes = scm.nodes.clone();
    for (name, value) in iv {
        let i = scm.id(name)?;
        let s = scm.state(name, value)?;
        let mut row = vec![0.0; nodes[i].domain.len()];
        row[s] = 1.0;
        nodes[i].parents.clear();
        nodes[i].table = vec![row];
    }
    let mut out = Scm::new(nodes)?;
    out.meta = scm.meta.clone();
    Ok(out)
}

/// Observed rows in collection order, stored as state indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub domains: Vec<Vec<String>>,
    pub rows: Vec<Vec<usize>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn col(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown column {name}")))
    }

    /// Column as numbers (labels must parse).
    pub fn numeric(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.col(name)?;
        let vals: Vec<f64> = self.domains[c]
            .iter()
            .map(|l| l.parse::<f64>().map_err(|_| Error::InvalidArgument(format!("column {name} has non-numeric value {l}"))))
            .collect::<Result<_>>()?;
        Ok(self.rows.iter().map(|r| vals[r[c]]).collect())
    }

    /// Empirical joint over all columns.
    pub fn empirical(&self) -> Result<JointTable<f64>> {
        let sizes: Vec<usize> = self.domains.iter().map(|d| d.len()).collect();
        let total: usize = sizes.iter().product();
        if total > MAX_CONFIGS {
            return Err(Error::ResourceLimit("empirical table too large".into()));
        }
        let mut probs = vec![0.0; total];
        if self.rows.is_empty() {
            return invalid("empty dataset");
        }
        let w = 1.0 / self.rows.len() as f64;
        for r in &self.rows {
            probs[mixed_index(r, &sizes)] += w;
        }
        JointTable::from_parts(self.names.clone(), self.domains.clone(), probs)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.names)?;
        for r in &self.rows {
            wr.write_record(r.iter().enumerate().map(|(c, s)| self.domains[c][*s].as_str()))?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Read a header-first CSV. Values are matched against `domains` when given
    /// (column name to ordered labels); otherwise each column's domain is its sorted set of labels.
    pub fn read_csv<R: std::io::Read>(r: R, domains: Option<&BTreeMap<String, Vec<String>>>) -> Result<Dataset> {
        let mut rd = csv::Reader::from_reader(r);
        let names: Vec<String> = rd.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let mut raw: Vec<Vec<String>> = vec![];
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != names.len() {
                return Err(Error::Parse(format!("row has {} fields, header has {}", rec.len(), names.len())));
            }
            raw.push(rec.iter().map(|s| s.trim().to_string()).collect());
        }
        let mut doms = vec![];
        for (c, n) in names.iter().enumerate() {
            let d = match domains.and_then(|m| m.get(n)) {
                Some(d) => d.clone(),
                None => {
                    let set: BTreeSet<&String> = raw.iter().map(|r| &r[c]).collect();
                    let mut v: Vec<String> = set.into_iter().cloned().collect();
                    if v.iter().all(|s| s.parse::<f64>().is_ok()) {
                        v.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
                    }
                    v
                }
            };
            doms.push(d);
        }
        let mut rows = vec![];
        for (k, r) in raw.iter().enumerate() {
            let mut row = vec![];
            for (c, v) in r.iter().enumerate() {
                let s = doms[c].iter().position(|x| x == v).ok_or_else(|| {
                    Error::Parse(format!("row {}: value {v} not in the domain of {}", k + 1, names[c]))
                })?;
                row.push(s);
            }
            rows.push(row);
        }
        Ok(Dataset { names, domains: doms, rows })
    }
}

/// Draw `n` rows: node i reads uniforms from diagonal row i+1 and applies the inverse CDF of its table row.
pub fn sample(scm: &Scm, source: &DigitStream, n: usize) -> Result<Dataset> {
    let mut s = Sampler::new(scm, source)?;
    let rows = (0..n).map(|_| s.next_row()).collect();
    Ok(Dataset {
        names: scm.names(),
        domains: scm.nodes.iter().map(|x| x.domain.clone()).collect(),
        rows,
    })
}

/// Lazy row generator over an SCM.
pub struct Sampler<'a> {
    scm: &'a Scm,
    order: Vec<usize>,
    streams: Vec<crate::exogenous::UniformStream>,
}

impl<'a> Sampler<'a> {
    pub fn new(scm: &'a Scm, source: &DigitStream) -> Result<Self> {
        let order = scm.dag.topological_order_ids()?;
        let streams = if scm.is_empty() { vec![] } else { split_streams(source, scm.len())? };
        Ok(Sampler { scm, order, streams })
    }

    pub fn next_row(&mut self) -> Vec<usize> {
        let mut c = vec![0; self.scm.len()];
        for &i in &self.order {
            let u = self.streams[i].next_uniform();
            c[i] = sample_index(self.scm.row_for(i, &c), u);
        }
        c
    }
}

/// Checks A independent of B given C on the exact joint; returns the verdict and the largest
/// |P(a,b|c) - P(a|c)P(b|c)| over strata with P(c) > 0.
pub fn cond_independent<P: Prob>(
    joint: &JointTable<P>,
    a: &[&str],
    b: &[&str],
    c: &[&str],
    tol: f64,
) -> Result<(bool, f64)> {
    let (av, bv, cv) = (joint.vars(a)?, joint.vars(b)?, joint.vars(c)?);
    let sa: BTreeSet<usize> = av.iter().copied().collect();
    let sb: BTreeSet<usize> = bv.iter().copied().collect();
    let sc: BTreeSet<usize> = cv.iter().copied().collect();
    if !sa.is_disjoint(&sb) || !sa.is_disjoint(&sc) || !sb.is_disjoint(&sc) || sa.len() != av.len() || sb.len() != bv.len() {
        return invalid("conditional-independence sets must be pairwise disjoint");
    }
    let all: Vec<usize> = cv.iter().chain(av.iter()).chain(bv.iter()).copied().collect();
    let m = joint.marginal(&all);
    let (nc, na, nb) = (cv.len(), av.len(), bv.len());
    let sizes = m.sizes().to_vec();
    let csz: usize = sizes[..nc].iter().product();
    let asz: usize = sizes[nc..nc + na].iter().product();
    let bsz: usize = sizes[nc + na..].iter().product();
    let mut worst = 0.0f64;
    let probs = m.probs();
    for ci in 0..csz {
        let block = &probs[ci * asz * bsz..(ci + 1) * asz * bsz];
        let pc = block.iter().fold(P::zero(), |x, y| x + y.clone());
        if pc.negligible() {
            continue;
        }
        let pa: Vec<P> = (0..asz)
            .map(|ai| (0..bsz).fold(P::zero(), |x, bi| x + block[ai * bsz + bi].clone()) / pc.clone())
            .collect();
        let pb: Vec<P> = (0..bsz)
            .map(|bi| (0..asz).fold(P::zero(), |x, ai| x + block[ai * bsz + bi].clone()) / pc.clone())
            .collect();
        for ai in 0..asz {
            for bi in 0..bsz {
                let pab = block[ai * bsz + bi].clone() / pc.clone();
                worst = worst.max(abs_diff(&pab, &(pa[ai].clone() * pb[bi].clone())));
            }
        }
    }
    let _ = (na, nb);
    Ok((worst <= tol, worst))
}

/// Random strictly positive tables on a graph: entries drawn uniformly from [floor, 1] then normalized.
pub fn random_scm<R: Rng>(dag: &Dag, cards: &[usize], floor: f64, rng: &mut R) -> Result<Scm> {
    if cards.len() != dag.len() {
        return invalid("one cardinality per node required");
    }
    let mut nodes = vec![];
    for i in 0..dag.len() {
        let parents: Vec<String> = dag.parents(i).iter().map(|&p| dag.name(p).to_string()).collect();
        let rows: usize = dag.parents(i).iter().map(|&p| cards[p]).product();
        let table = (0..rows).map(|_| random_row(cards[i], floor, rng)).collect();
        let domain: Vec<String> = (0..cards[i]).map(|v| v.to_string()).collect();
        nodes.push(NodeSpec { name: dag.name(i).to_string(), domain, parents, table, latent: false });
    }
    Scm::new(nodes)
}

pub fn random_row<R: Rng>(k: usize, floor: f64, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(floor..=1.0)).collect();
    let s: f64 = raw.iter().sum();
    let mut row: Vec<f64> = raw.iter().map(|x| x / s).collect();
    let head: f64 = row[..k - 1].iter().sum();
    row[k - 1] = 1.0 - head;
    row
}

/// Point-mass row.
pub fn point_row(k: usize, s: usize) -> Vec<f64> {
    let mut r = vec![0.0; k];
    r[s] = 1.0;
    r
}

/// Binary node whose table gives P(node = 1) per parent configuration.
pub fn binary_node(name: &str, parents: &[&str], p1: &[f64]) -> NodeSpec {
    NodeSpec::new(name, &["0", "1"], parents, p1.iter().map(|p| vec![crate::prob::decimal_complement(*p), *p]).collect())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// X sex (0 = women), T treatment, R recovery.
    pub fn simpson() -> Scm {
        Scm::new(vec![
            binary_node("X", &[], &[0.5]),
            binary_node("T", &["X"], &[0.8, 0.2]),
            binary_node("R", &["T", "X"], &[0.2, 0.7, 0.5, 0.9]),
        ])
        .unwrap()
    }

    #[test]
    fn coin() {
        let s = Scm::new(vec![binary_node("C", &[], &[0.5])]).unwrap();
        let j = joint_distribution(&s).unwrap();
        assert_eq!(j.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn simpson_conditionals() {
        let j = joint_distribution(&simpson()).unwrap();
        let r1 = j.restrict_by_name(&["R"], &[("T", "1")]).unwrap();
        let r0 = j.restrict_by_name(&["R"], &[("T", "0")]).unwrap();
        // hand expansion: sum_x p(t,x) P(X=x|T=t)
        let pt1 = 0.5 * 0.8 + 0.5 * 0.2;
        let want1 = (0.5 * 0.8 * 0.5 + 0.5 * 0.2 * 0.9) / pt1;
        let want0 = (0.5 * 0.2 * 0.2 + 0.5 * 0.8 * 0.7) / (1.0 - pt1);
        assert!((r1.p1("1").unwrap() - want1).abs() < 1e-12);
        assert!((r1.p1("0").unwrap() - (1.0 - want1)).abs() < 1e-12);
        assert!((r0.p1("1").unwrap() - want0).abs() < 1e-12);
        assert!((want1 - 0.58).abs() < 1e-12 && (want0 - 0.60).abs() < 1e-12);
    }

    #[test]
    fn simpson_exact() {
        let j = joint_distribution_exact(&simpson()).unwrap();
        let r1 = j.restrict_by_name(&["R"], &[("T", "1")]).unwrap();
        assert_eq!(r1.p1("1").unwrap(), <BigRational as Prob>::from_f64(0.58));
    }

    #[test]
    fn normalization_and_marginals() {
        let j = joint_distribution(&simpson()).unwrap();
        assert!((j.total() - 1.0).abs() < JOINT_TOL);
        let m = j.restrict_by_name(&["X"], &[]).unwrap();
        assert!((m.p1("0").unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            j.restrict_by_name(&["R"], &[("T", "1"), ("X", "0")]).map(|_| ()),
            Ok(())
        ));
    }

    #[test]
    fn impossible_conditioning() {
        let s = Scm::new(vec![binary_node("A", &[], &[0.0]), binary_node("B", &["A"], &[0.3, 0.6])]).unwrap();
        let j = joint_distribution(&s).unwrap();
        assert!(matches!(j.restrict_by_name(&["B"], &[("A", "1")]), Err(Error::ZeroProbability(_))));
        assert!(j.restrict_by_name(&["B"], &[("B", "1")]).is_err());
    }

    #[test]
    fn validation_catches_problems() {
        let ok = Scm::new(vec![binary_node("A", &[], &[0.4]), binary_node("B", &["A"], &[0.1, 0.2])]);
        assert!(ok.is_ok());
        let bad = Scm::unchecked(vec![
            NodeSpec::new("A", &["0", "1"], &[], vec![vec![0.5, 0.4]]),
            binary_node("B", &["A"], &[0.1, 0.2]),
        ])
        .unwrap();
        let errs = validate_scm(&bad);
        assert_eq!(errs.len(), 1);
        assert!(errs[0].contains("node A") && errs[0].contains("sums to"));
        let dag = Dag::new(&["A", "B", "C"], &[("A", "B")]).unwrap();
        let wrong = Scm::with_dag(
            dag,
            vec![
                binary_node("A", &[], &[0.5]),
                binary_node("B", &["A", "C"], &[0.1, 0.2, 0.3, 0.4]),
                binary_node("C", &[], &[0.5]),
            ],
        )
        .unwrap();
        let errs = validate_scm(&wrong);
        assert!(errs.iter().any(|e| e.contains("node B") && e.contains("graph parents")));
    }

    #[test]
    fn intervention_simpson() {
        let s = intervene(&simpson(), &intervention(&[("T", "1")])).unwrap();
        let j = joint_distribution(&s).unwrap();
        let r = j.restrict_by_name(&["R"], &[]).unwrap();
        assert!((r.p1("1").unwrap() - (0.5 + 0.9) / 2.0).abs() < 1e-12);
        assert!(intervene(&simpson(), &intervention(&[("T", "7")])).is_err());
    }

    #[test]
    fn intervention_commutes_and_root_case() {
        let s = simpson();
        let a = intervene(&intervene(&s, &intervention(&[("X", "1")])).unwrap(), &intervention(&[("T", "0")])).unwrap();
        let b = intervene(&intervene(&s, &intervention(&[("T", "0")])).unwrap(), &intervention(&[("X", "1")])).unwrap();
        assert_eq!(a, b);
        let c = intervene(&s, &intervention(&[("X", "1"), ("T", "0")])).unwrap();
        assert_eq!(a, c);
        assert_eq!(a.node("X").unwrap().table, vec![vec![0.0, 1.0]]);
    }

    #[test]
    fn sampling_basics() {
        let src = DigitStream::seeded(7);
        assert!(sample(&simpson(), &src, 0).unwrap().is_empty());
        let pm = Scm::new(vec![binary_node("A", &[], &[1.0]), binary_node("B", &["A"], &[0.0, 0.0])]).unwrap();
        let d = sample(&pm, &src, 50).unwrap();
        assert!(d.rows.iter().all(|r| r == &vec![1, 0]));
        let d1 = sample(&simpson(), &src, 200).unwrap();
        let d2 = sample(&simpson(), &src, 200).unwrap();
        assert_eq!(d1, d2);
    }

    #[test]
    fn csv_roundtrip() {
        let d = sample(&simpson(), &DigitStream::seeded(1), 20).unwrap();
        let mut buf = vec![];
        d.write_csv(&mut buf).unwrap();
        let doms: BTreeMap<String, Vec<String>> =
            d.names.iter().cloned().zip(d.domains.iter().cloned()).collect();
        let back = Dataset::read_csv(&buf[..], Some(&doms)).unwrap();
        assert_eq!(back, d);
        let bad = "X,T\n0,5\n";
        assert!(Dataset::read_csv(bad.as_bytes(), Some(&doms)).is_err());
    }

    #[test]
    fn independence_checks() {
        let j = joint_distribution(&simpson()).unwrap();
        let (ind, dev) = cond_independent(&j, &["T"], &["R"], &["X"], 1e-12).unwrap();
        assert!(!ind && dev > 0.01);
        // copy: B = A, uniform A
        let s = Scm::new(vec![
            binary_node("A", &[], &[0.5]),
            NodeSpec::new("B", &["0", "1"], &["A"], vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
        ])
        .unwrap();
        let j = joint_distribution(&s).unwrap();
        let (ind, dev) = cond_independent(&j, &["A"], &["B"], &[], 1e-12).unwrap();
        assert!(!ind);
        assert!((dev - 0.25).abs() < 1e-15);
        assert!(cond_independent(&j, &["A"], &["A"], &[], 1e-12).is_err());
    }

    #[test]
    fn fix_and_remove_matches_intervention() {
        let s = simpson();
        let fixed = intervention(&[("T", "1")]);
        let a = joint_distribution(&s.fix_and_remove(&fixed).unwrap()).unwrap();
        let b = joint_distribution(&intervene(&s, &fixed).unwrap()).unwrap().marginal_by_name(&["X", "R"]).unwrap();
        assert!(a.tv_distance(&b).unwrap() < 1e-15);
    }

    #[test]
    fn random_models_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dag = Dag::new(&["A", "B", "C"], &[("A", "B"), ("A", "C"), ("B", "C")]).unwrap();
        let s = random_scm(&dag, &[2, 3, 2], 0.05, &mut rng).unwrap();
        let j = joint_distribution(&s).unwrap();
        assert!((j.total() - 1.0).abs() < JOINT_TOL);
    }
}
