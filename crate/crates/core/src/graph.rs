//! Directed acyclic graphs, back-door paths and the back-door criterion,
//! including the pseudo-treatment extension for adjustment sets that contain
//! descendants of the treatment.

use crate::error::{invalid, Error, Result};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

pub const DEFAULT_PATH_CAP: usize = 100_000;
pub const MAX_CANDIDATES: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dag {
    names: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl Dag {
    /// Build and check acyclicity.
    pub fn new<S: AsRef<str>>(nodes: &[S], edges: &[(S, S)]) -> Result<Self> {
        let d = Self::build(nodes, edges)?;
        d.topological_order()?;
        Ok(d)
    }

    /// Build without the acyclicity check (self-loops and parallel edges are still rejected).
    pub fn build<S: AsRef<str>>(nodes: &[S], edges: &[(S, S)]) -> Result<Self> {
        let mut d = Dag { names: vec![], index: HashMap::new(), parents: vec![], children: vec![] };
        for n in nodes {
            d.add_node(n.as_ref())?;
        }
        for (a, b) in edges {
            d.add_edge(a.as_ref(), b.as_ref())?;
        }
        Ok(d)
    }

    fn add_node(&mut self, name: &str) -> Result<usize> {
        if name.is_empty() {
            return invalid("empty node identifier");
        }
        if self.index.contains_key(name) {
            return invalid(format!("duplicate node {name}"));
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        self.parents.push(vec![]);
        self.children.push(vec![]);
        Ok(i)
    }

    fn add_edge(&mut self, a: &str, b: &str) -> Result<()> {
        let (ia, ib) = (self.id(a)?, self.id(b)?);
        if ia == ib {
            return invalid(format!("self-loop on {a}"));
        }
        if self.children[ia].contains(&ib) {
            return invalid(format!("parallel edge {a} -> {b}"));
        }
        self.children[ia].push(ib);
        self.parents[ib].push(ia);
        let names = &self.names;
        self.children[ia].sort_by(|x, y| names[*x].cmp(&names[*y]));
        self.parents[ib].sort_by(|x, y| names[*x].cmp(&names[*y]));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("unknown node {name}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Parents sorted by identifier.
    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn parent_names(&self, name: &str) -> Result<Vec<String>> {
        Ok(self.parents[self.id(name)?].iter().map(|&p| self.names[p].clone()).collect())
    }

    pub fn edges(&self) -> Vec<(String, String)> {
        let mut e: Vec<(String, String)> = (0..self.len())
            .flat_map(|i| self.children[i].iter().map(move |&c| (i, c)))
            .map(|(a, b)| (self.names[a].clone(), self.names[b].clone()))
            .collect();
        e.sort();
        e
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        match (self.id(a), self.id(b)) {
            (Ok(x), Ok(y)) => self.children[x].contains(&y),
            _ => false,
        }
    }

    /// Kahn's algorithm with ties broken by identifier.
    pub fn topological_order_ids(&self) -> Result<Vec<usize>> {
        let mut indeg: Vec<usize> = self.parents.iter().map(|p| p.len()).collect();
        let mut ready: BTreeSet<(&str, usize)> = (0..self.len())
            .filter(|&i| indeg[i] == 0)
            .map(|i| (self.names[i].as_str(), i))
            .collect();
        let mut out = Vec::with_capacity(self.len());
        while let Some(&first) = ready.iter().next() {
            ready.remove(&first);
            let i = first.1;
            out.push(i);
            for &c in &self.children[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert((self.names[c].as_str(), c));
                }
            }
        }
        if out.len() < self.len() {
            return Err(Error::CyclicGraph(self.cycle_witness()));
        }
        Ok(out)
    }

    pub fn topological_order(&self) -> Result<Vec<String>> {
        Ok(self.topological_order_ids()?.into_iter().map(|i| self.names[i].clone()).collect())
    }

    fn cycle_witness(&self) -> Vec<String> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; self.len()];
        let mut stack: Vec<usize> = vec![];
        fn dfs(d: &Dag, v: usize, state: &mut [u8], stack: &mut Vec<usize>) -> Option<Vec<String>> {
            state[v] = 1;
            stack.push(v);
            for &c in &d.children[v] {
                if state[c] == 1 {
                    let pos = stack.iter().position(|&x| x == c).unwrap();
                    let mut cyc: Vec<String> = stack[pos..].iter().map(|&i| d.names[i].clone()).collect();
                    cyc.push(d.names[c].clone());
                    return Some(cyc);
                }
                if state[c] == 0 {
                    if let Some(w) = dfs(d, c, state, stack) {
                        return Some(w);
                    }
                }
            }
            stack.pop();
            state[v] = 2;
            None
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|a, b| self.names[*a].cmp(&self.names[*b]));
        for v in order {
            if state[v] == 0 {
                if let Some(w) = dfs(self, v, &mut state, &mut stack) {
                    return w;
                }
            }
        }
        vec![]
    }

    pub fn descendant_ids(&self, i: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut q: VecDeque<usize> = self.children[i].iter().copied().collect();
        while let Some(v) = q.pop_front() {
            if seen.insert(v) {
                q.extend(self.children[v].iter().copied());
            }
        }
        seen.remove(&i);
        seen
    }

    /// All nodes reachable by a directed path, excluding the node itself.
    pub fn descendants(&self, name: &str) -> Result<BTreeSet<String>> {
        let i = self.id(name)?;
        Ok(self.descendant_ids(i).into_iter().map(|j| self.names[j].clone()).collect())
    }

    pub fn ancestor_ids(&self, i: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut q: VecDeque<usize> = self.parents[i].iter().copied().collect();
        while let Some(v) = q.pop_front() {
            if seen.insert(v) {
                q.extend(self.parents[v].iter().copied());
            }
        }
        seen
    }

    /// Copy with the named nodes and their incident edges removed.
    pub fn without(&self, drop: &BTreeSet<String>) -> Dag {
        let nodes: Vec<&String> = self.names.iter().filter(|n| !drop.contains(*n)).collect();
        let edges: Vec<(String, String)> =
            self.edges().into_iter().filter(|(a, b)| !drop.contains(a) && !drop.contains(b)).collect();
        let edges: Vec<(&String, &String)> = edges.iter().map(|(a, b)| (a, b)).collect();
        Dag::build(&nodes, &edges).expect("subgraph of a valid graph")
    }
}

/// A simple path; `forward[k]` is true when the k-th edge points from `nodes[k]` to `nodes[k+1]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Path {
    pub nodes: Vec<String>,
    pub forward: Vec<bool>,
}

impl Path {
    /// Interior node k (0 < k < len-1) is a collider when both path edges point into it.
    pub fn is_collider(&self, k: usize) -> bool {
        k > 0 && k + 1 < self.nodes.len() && self.forward[k - 1] && !self.forward[k]
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.nodes[0])?;
        for (k, fw) in self.forward.iter().enumerate() {
            write!(f, " {} {}", if *fw { "->" } else { "<-" }, self.nodes[k + 1])?;
        }
        Ok(())
    }
}

fn check_pair(dag: &Dag, t: &str, r: &str) -> Result<(usize, usize)> {
    let (ti, ri) = (dag.id(t)?, dag.id(r)?);
    if ti == ri {
        return invalid("treatment and response must differ");
    }
    Ok((ti, ri))
}

/// Simple paths from t to r whose first edge points into t and whose last edge points into r.
pub fn backdoor_paths(dag: &Dag, t: &str, r: &str) -> Result<Vec<Path>> {
    backdoor_paths_capped(dag, t, r, DEFAULT_PATH_CAP)
}

pub fn backdoor_paths_capped(dag: &Dag, t: &str, r: &str, cap: usize) -> Result<Vec<Path>> {
    let (ti, ri) = check_pair(dag, t, r)?;
    let mut out = vec![];
    let mut nodes = vec![ti];
    let mut fwd: Vec<bool> = vec![];
    let mut on = vec![false; dag.len()];
    on[ti] = true;

    #[allow(clippy::too_many_arguments)]
    fn go(
        d: &Dag,
        ri: usize,
        cap: usize,
        nodes: &mut Vec<usize>,
        fwd: &mut Vec<bool>,
        on: &mut [bool],
        out: &mut Vec<Path>,
    ) -> Result<()> {
        let v = *nodes.last().unwrap();
        let mut steps: Vec<(usize, bool)> = d.children[v].iter().map(|&c| (c, true)).collect();
        steps.extend(d.parents[v].iter().map(|&p| (p, false)));
        steps.sort_by(|a, b| d.names[a.0].cmp(&d.names[b.0]).then(b.1.cmp(&a.1)));
        for (w, forward) in steps {
            if on[w] {
                continue;
            }
            if w == ri {
                if forward {
                    if out.len() >= cap {
                        return Err(Error::ResourceLimit(format!("more than {cap} back-door paths")));
                    }
                    let mut names: Vec<String> = nodes.iter().map(|&i| d.names[i].clone()).collect();
                    names.push(d.names[ri].clone());
                    let mut f = fwd.clone();
                    f.push(true);
                    out.push(Path { nodes: names, forward: f });
                }
                continue;
            }
            on[w] = true;
            nodes.push(w);
            fwd.push(forward);
            go(d, ri, cap, nodes, fwd, on, out)?;
            nodes.pop();
            fwd.pop();
            on[w] = false;
        }
        Ok(())
    }

    let mut parents: Vec<usize> = dag.parents[ti].clone();
    parents.sort_by(|a, b| dag.names[*a].cmp(&dag.names[*b]));
    for p in parents {
        if p == ri {
            // R -> T: the single-edge path has no arrow into R.
            continue;
        }
        on[p] = true;
        nodes.push(p);
        fwd.push(false);
        go(dag, ri, cap, &mut nodes, &mut fwd, &mut on, &mut out)?;
        nodes.pop();
        fwd.pop();
        on[p] = false;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PathVerdict {
    /// A member of Z on the path points an arrow along it.
    SatisfiesI { via: String },
    /// No member of Z points an arrow, and some collider has neither itself nor a descendant in Z.
    SatisfiesII { collider: String },
    Violates,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PathReport {
    pub path: Path,
    pub display: String,
    #[serde(flatten)]
    pub verdict: PathVerdict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OverruleKind {
    Partly,
    Completely,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Overrule {
    pub kind: OverruleKind,
    /// Members of the descendant part of Z that are parents of the response.
    pub nodes: Vec<String>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BackdoorReport {
    pub treatment: String,
    pub response: String,
    pub adjustment: Vec<String>,
    pub valid: bool,
    pub paths: Vec<PathReport>,
    pub overrule: Option<Overrule>,
}

impl BackdoorReport {
    pub fn violating(&self) -> Vec<&PathReport> {
        self.paths.iter().filter(|p| p.verdict == PathVerdict::Violates).collect()
    }
}

fn judge(dag: &Dag, path: &Path, z: &BTreeSet<String>) -> PathVerdict {
    let n = path.nodes.len();
    let interior = 1..n - 1;
    for k in interior.clone() {
        if z.contains(&path.nodes[k]) && !path.is_collider(k) {
            return PathVerdict::SatisfiesI { via: path.nodes[k].clone() };
        }
    }
    for k in interior {
        if path.is_collider(k) {
            let c = &path.nodes[k];
            if z.contains(c) {
                continue;
            }
            let desc = dag.descendants(c).expect("path node exists");
            if desc.is_disjoint(z) {
                return PathVerdict::SatisfiesII { collider: c.clone() };
            }
        }
    }
    PathVerdict::Violates
}

fn to_set<S: AsRef<str>>(dag: &Dag, z: &[S]) -> Result<BTreeSet<String>> {
    let mut s = BTreeSet::new();
    for v in z {
        dag.id(v.as_ref())?;
        s.insert(v.as_ref().to_string());
    }
    Ok(s)
}

/// Back-door criterion for an adjustment set containing no descendant of the treatment.
pub fn check_backdoor<S: AsRef<str>>(dag: &Dag, t: &str, r: &str, z: &[S]) -> Result<BackdoorReport> {
    check_pair(dag, t, r)?;
    let zs = to_set(dag, z)?;
    if zs.contains(t) || zs.contains(r) {
        return invalid("adjustment set may not contain the treatment or the response");
    }
    let desc = dag.descendants(t)?;
    let bad: Vec<&String> = zs.intersection(&desc).collect();
    if !bad.is_empty() {
        let names: Vec<&str> = bad.iter().map(|s| s.as_str()).collect();
        return Err(Error::RoutedToExtended(names.join(",")));
    }
    let paths = backdoor_paths(dag, t, r)?;
    let reports: Vec<PathReport> = paths
        .into_iter()
        .map(|p| {
            let verdict = judge(dag, &p, &zs);
            PathReport { display: p.to_string(), path: p, verdict }
        })
        .collect();
    let valid = reports.iter().all(|p| p.verdict != PathVerdict::Violates);
    Ok(BackdoorReport {
        treatment: t.to_string(),
        response: r.to_string(),
        adjustment: zs.into_iter().collect(),
        valid,
        paths: reports,
        overrule: None,
    })
}

/// Graph in which the descendant part of Z is deleted and the treatment becomes a
/// pseudo-treatment inheriting the deleted nodes' parents and children.
pub fn pseudo_treatment_graph<S: AsRef<str>>(dag: &Dag, t: &str, z_desc: &[S]) -> Result<Dag> {
    let ti = dag.id(t)?;
    let zd = to_set(dag, z_desc)?;
    let desc = dag.descendants(t)?;
    for v in &zd {
        if !desc.contains(v) {
            return invalid(format!("{v} is not a descendant of {t}"));
        }
    }
    let mut merged: BTreeSet<String> = zd.clone();
    merged.insert(t.to_string());
    let mut new_parents = BTreeSet::new();
    let mut new_children = BTreeSet::new();
    for v in &merged {
        let i = dag.id(v)?;
        new_parents.extend(dag.parents(i).iter().map(|&p| dag.name(p).to_string()));
        new_children.extend(dag.children(i).iter().map(|&c| dag.name(c).to_string()));
    }
    let _ = ti;
    let new_parents: BTreeSet<String> = new_parents.difference(&merged).cloned().collect();
    let new_children: BTreeSet<String> = new_children.difference(&merged).cloned().collect();
    let nodes: Vec<String> = dag.names().iter().filter(|n| !zd.contains(*n)).cloned().collect();
    let mut edges: BTreeSet<(String, String)> = dag
        .edges()
        .into_iter()
        .filter(|(a, b)| !merged.contains(a) && !merged.contains(b))
        .collect();
    for p in new_parents {
        edges.insert((p, t.to_string()));
    }
    for c in new_children {
        edges.insert((t.to_string(), c));
    }
    let edges: Vec<(String, String)> = edges.into_iter().collect();
    Dag::new(&nodes, &edges)
}

/// Back-door check when part of Z descends from the treatment.
pub fn check_backdoor_extended<S: AsRef<str>>(
    dag: &Dag,
    t: &str,
    r: &str,
    z_desc: &[S],
    z_nondesc: &[S],
) -> Result<BackdoorReport> {
    check_pair(dag, t, r)?;
    let zd = to_set(dag, z_desc)?;
    let zn = to_set(dag, z_nondesc)?;
    if zd.contains(r) || zn.contains(r) || zd.contains(t) || zn.contains(t) {
        return invalid("adjustment set may not contain the treatment or the response");
    }
    let desc = dag.descendants(t)?;
    if let Some(v) = zn.iter().find(|v| desc.contains(*v)) {
        return invalid(format!("{v} descends from {t} but was given as a non-descendant"));
    }
    if zd.is_empty() {
        return check_backdoor(dag, t, r, z_nondesc);
    }
    let g = pseudo_treatment_graph(dag, t, z_desc)?;
    let zn_list: Vec<&String> = zn.iter().collect();
    let mut rep = match check_backdoor(&g, t, r, &zn_list) {
        Err(Error::RoutedToExtended(v)) => {
            return invalid(format!("{v} descends from the pseudo-treatment after merging"))
        }
        other => other?,
    };
    let ri = dag.id(r)?;
    let hits: Vec<String> = dag
        .parents(ri)
        .iter()
        .map(|&p| dag.name(p).to_string())
        .filter(|p| zd.contains(p))
        .collect();
    if !hits.is_empty() {
        let pruned = dag.without(&zd);
        let still = pruned.descendants(t)?.contains(r);
        let kind = if still { OverruleKind::Partly } else { OverruleKind::Completely };
        let how = if still { "partly" } else { "completely" };
        rep.overrule = Some(Overrule {
            kind,
            message: format!(
                "adjusting for {} (parents of {r} descending from {t}) {how} overrules the effect of {t}",
                hits.join(",")
            ),
            nodes: hits,
        });
    }
    let mut all: BTreeSet<String> = zd;
    all.extend(zn);
    rep.adjustment = all.into_iter().collect();
    Ok(rep)
}

/// All minimal subsets of `candidates` that satisfy the back-door criterion.
pub fn enumerate_valid_adjustment_sets<S: AsRef<str>>(
    dag: &Dag,
    t: &str,
    r: &str,
    candidates: &[S],
) -> Result<Vec<Vec<String>>> {
    check_pair(dag, t, r)?;
    let cand: Vec<String> = to_set(dag, candidates)?.into_iter().collect();
    if cand.len() > MAX_CANDIDATES {
        return Err(Error::ResourceLimit(format!(
            "{} candidates exceeds the limit of {MAX_CANDIDATES}",
            cand.len()
        )));
    }
    let desc = dag.descendants(t)?;
    for c in &cand {
        if c == t || c == r || desc.contains(c) {
            return invalid(format!("candidate {c} is the treatment, the response, or a descendant of the treatment"));
        }
    }
    let n = cand.len();
    let mut masks: Vec<u32> = (0..(1u32 << n)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    let paths = backdoor_paths(dag, t, r)?;
    let mut found: Vec<u32> = vec![];
    for m in masks {
        if found.iter().any(|f| f & m == *f) {
            continue;
        }
        let z: BTreeSet<String> = (0..n).filter(|i| m >> i & 1 == 1).map(|i| cand[i].clone()).collect();
        if paths.iter().all(|p| judge(dag, p, &z) != PathVerdict::Violates) {
            found.push(m);
        }
    }
    let mut out: Vec<Vec<String>> = found
        .into_iter()
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| cand[i].clone()).collect())
        .collect();
    out.sort();
    Ok(out)
}

/// Parents of every node, keyed by name. Handy for reports.
pub fn parent_map(dag: &Dag) -> BTreeMap<String, Vec<String>> {
    dag.names().iter().map(|n| (n.clone(), dag.parent_names(n).unwrap())).collect()
}
