//! Adjustment-family identification formulas evaluated on an observational joint table.
//!
//! Every function reads only observational probabilities; the matching interventional
//! quantities are obtained from `scm::intervene` + `scm::joint_distribution` in tests.

use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::prob::Prob;
use crate::scm::{mixed_decode, JointTable};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

/// Distribution over the labels of one variable.
pub type Dist = BTreeMap<String, f64>;

/// Tolerance under which two propensity vectors count as equal.
pub const PROPENSITY_TOL: f64 = 1e-12;

/// P(targets | given) backed by two marginals, so each lookup is O(1).
pub(crate) struct Cond<P> {
    names: Vec<String>,
    domains: Vec<Vec<String>>,
    num: JointTable<P>,
    den: JointTable<P>,
}

impl<P: Prob> Cond<P> {
    pub(crate) fn new(joint: &JointTable<P>, targets: &[usize], given: &[usize]) -> Self {
        let all: Vec<usize> = given.iter().chain(targets).copied().collect();
        Cond {
            names: all.iter().map(|&v| joint.names()[v].clone()).collect(),
            domains: all.iter().map(|&v| joint.domains()[v].clone()).collect(),
            num: joint.marginal(&all),
            den: joint.marginal(given),
        }
    }

    pub(crate) fn weight(&self, g: &[usize]) -> P {
        self.den.at(g).clone()
    }

    fn stratum(&self, g: &[usize]) -> String {
        if g.is_empty() {
            return "(whole population)".into();
        }
        g.iter()
            .enumerate()
            .map(|(k, &s)| format!("{}={}", self.names[k], self.domains[k][s]))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// P(t | g); a stratum of probability zero is a positivity violation.
    pub(crate) fn get(&self, t: &[usize], g: &[usize], what: &str) -> Result<P> {
        let w = self.weight(g);
        if w.negligible() {
            return Err(Error::Positivity(format!("P({}) = 0 needed by {what}", self.stratum(g))));
        }
        let all: Vec<usize> = g.iter().chain(t).copied().collect();
        Ok(self.num.at(&all).clone() / w)
    }
}

/// All configurations of variables with the given sizes, first coordinate slowest.
pub(crate) fn configs(sizes: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    (0..sizes.iter().product::<usize>()).map(move |i| mixed_decode(i, sizes))
}

fn one(joint: &JointTable<impl Prob>, name: &str) -> Result<usize> {
    joint.var(name)
}

fn single_table<P: Prob>(joint: &JointTable<P>, var: usize, probs: Vec<P>) -> JointTable<P> {
    JointTable::from_parts(vec![joint.names()[var].clone()], vec![joint.domains()[var].clone()], probs)
        .expect("one-variable table")
}

/// Expectation of a one-variable table with numeric labels.
pub fn mean<P: Prob>(dist: &JointTable<P>) -> Result<P> {
    let mut m = P::zero();
    for (s, p) in dist.probs().iter().enumerate() {
        m = m + P::from_f64(dist.value(0, s)?) * p.clone();
    }
    Ok(m)
}

pub fn to_dist(t: &JointTable<f64>) -> Dist {
    t.to_map()
}

pub fn dist_expectation(d: &Dist) -> Result<f64> {
    d.iter().try_fold(0.0, |acc, (k, p)| {
        let v: f64 = k.parse().map_err(|_| Error::InvalidArgument(format!("non-numeric response value {k}")))?;
        Ok(acc + v * p)
    })
}

/// Σ_z P(R=·|T=t,Z=z) P(Z=z).
pub fn adjust<P: Prob>(joint: &JointTable<P>, t: &str, t_val: &str, r: &str, z: &[&str]) -> Result<JointTable<P>> {
    let (tv, rv) = (one(joint, t)?, one(joint, r)?);
    let ts = joint.state(tv, t_val)?;
    let zv = joint.vars(z)?;
    if zv.contains(&tv) || zv.contains(&rv) || tv == rv {
        return Err(Error::InvalidArgument("adjustment set must exclude treatment and response".into()));
    }
    let given: Vec<usize> = std::iter::once(tv).chain(zv.iter().copied()).collect();
    let cond = Cond::new(joint, &[rv], &given);
    let pz = joint.marginal(&zv);
    let mut out = vec![P::zero(); joint.sizes()[rv]];
    for zc in configs(pz.sizes()) {
        let w = pz.at(&zc).clone();
        if w.negligible() {
            continue;
        }
        let g: Vec<usize> = std::iter::once(ts).chain(zc.iter().copied()).collect();
        for (rs, o) in out.iter_mut().enumerate() {
            *o = o.clone() + cond.get(&[rs], &g, "the adjustment formula")? * w.clone();
        }
    }
    Ok(single_table(joint, rv, out))
}

/// Σ_z {E(R|t,z) − E(R|t′,z)} P(z).
pub fn ate<P: Prob>(joint: &JointTable<P>, t: &str, t1: &str, t0: &str, r: &str, z: &[&str]) -> Result<P> {
    Ok(mean(&adjust(joint, t, t1, r, z)?)? - mean(&adjust(joint, t, t0, r, z)?)?)
}

/// Propensity vectors λ(x) = P(T=·|X=x) for every x with P(x) > 0.
pub fn propensity_table(joint: &JointTable<f64>, t: &str, z: &[&str]) -> Result<BTreeMap<String, Vec<f64>>> {
    let tv = one(joint, t)?;
    let zv = joint.vars(z)?;
    let cond = Cond::new(joint, &[tv], &zv);
    let pz = joint.marginal(&zv);
    let mut out = BTreeMap::new();
    for zc in configs(pz.sizes()) {
        if pz.at(&zc).negligible() {
            continue;
        }
        let lam = (0..joint.sizes()[tv]).map(|s| cond.get(&[s], &zc, "the propensity score")).collect::<Result<Vec<_>>>()?;
        let key = zc.iter().zip(&zv).map(|(&s, &v)| joint.domains()[v][s].clone()).collect::<Vec<_>>().join("|");
        out.insert(key, lam);
    }
    Ok(out)
}

/// Adjustment over strata of equal propensity vectors instead of over X itself.
pub fn propensity_adjust(joint: &JointTable<f64>, t: &str, t_val: &str, r: &str, z: &[&str]) -> Result<JointTable<f64>> {
    let (tv, rv) = (one(joint, t)?, one(joint, r)?);
    let ts = joint.state(tv, t_val)?;
    let zv = joint.vars(z)?;
    let lam_cond = Cond::new(joint, &[tv], &zv);
    let pz = joint.marginal(&zv);
    // groups: representative λ, member z configurations
    let mut groups: Vec<(Vec<f64>, Vec<Vec<usize>>)> = vec![];
    for zc in configs(pz.sizes()) {
        if pz.at(&zc).negligible() {
            continue;
        }
        let lam: Vec<f64> =
            (0..joint.sizes()[tv]).map(|s| lam_cond.get(&[s], &zc, "the propensity score")).collect::<Result<_>>()?;
        match groups
            .iter_mut()
            .find(|(rep, _)| rep.iter().zip(&lam).all(|(a, b)| (a - b).abs() <= PROPENSITY_TOL))
        {
            Some(g) => g.1.push(zc),
            None => groups.push((lam, vec![zc])),
        }
    }
    let trz: Vec<usize> = [tv, rv].iter().chain(&zv).copied().collect();
    let m = joint.marginal(&trz);
    let mut out = vec![0.0; joint.sizes()[rv]];
    for (lam, members) in &groups {
        let weight: f64 = members.iter().map(|zc| pz.at(zc)).sum();
        let pt: f64 = weight * lam[ts];
        if pt < crate::prob::POSITIVITY_TOL {
            return Err(Error::Positivity(format!(
                "P({t}={t_val}) = 0 in the propensity stratum {:?} needed by the propensity-score adjustment",
                lam
            )));
        }
        for (rs, o) in out.iter_mut().enumerate() {
            let num: f64 = members
                .iter()
                .map(|zc| {
                    let c: Vec<usize> = [ts, rs].iter().chain(zc).copied().collect();
                    m.at(&c)
                })
                .sum();
            *o += num / pt * weight;
        }
    }
    Ok(single_table(joint, rv, out))
}

/// Adjustment report for one or more treatment values.
#[derive(Clone, Debug, Serialize)]
pub struct EffectReport {
    pub estimand: String,
    pub treatment: String,
    pub treatment_values: Vec<String>,
    pub response: String,
    pub adjustment: Vec<String>,
    pub distributions: BTreeMap<String, Dist>,
    pub means: BTreeMap<String, f64>,
    /// Mean under the last listed value minus mean under the first.
    pub ate: Option<f64>,
    pub citation: String,
}

pub const ADJUST_CITATION: &str = "adjustment formula for the law of the potential responses";
pub const PROPENSITY_CITATION: &str = "adjustment over strata of equal propensity score";

pub fn effect_report(
    joint: &JointTable<f64>,
    t: &str,
    t_values: &[&str],
    r: &str,
    z: &[&str],
    propensity: bool,
) -> Result<EffectReport> {
    if t_values.is_empty() {
        return Err(Error::InvalidArgument("at least one treatment value required".into()));
    }
    let mut distributions = BTreeMap::new();
    let mut means = BTreeMap::new();
    let numeric = joint.domains()[joint.var(r)?].iter().all(|v| v.parse::<f64>().is_ok());
    for tv in t_values {
        let d = if propensity { propensity_adjust(joint, t, tv, r, z)? } else { adjust(joint, t, tv, r, z)? };
        if numeric {
            means.insert(tv.to_string(), mean(&d)?);
        }
        distributions.insert(tv.to_string(), d.to_map());
    }
    let ate = if numeric && t_values.len() >= 2 {
        Some(means[*t_values.last().unwrap()] - means[t_values[0]])
    } else {
        None
    };
    Ok(EffectReport {
        estimand: if propensity { "propensity_adjust" } else { "adjust" }.into(),
        treatment: t.into(),
        treatment_values: t_values.iter().map(|s| s.to_string()).collect(),
        response: r.into(),
        adjustment: z.iter().map(|s| s.to_string()).collect(),
        distributions,
        means,
        ate,
        citation: if propensity { PROPENSITY_CITATION } else { ADJUST_CITATION }.into(),
    })
}

/// Front-door result: l_y(w) and the intermediate m_z(w).
#[derive(Clone, Debug, Serialize)]
pub struct FrontDoor {
    /// y label → law of W under do(Y=y).
    pub l: BTreeMap<String, Dist>,
    /// z label → Σ_{y′} P(W=·|Y=y′,Z=z) P(Y=y′).
    pub m: BTreeMap<String, Dist>,
    pub citation: String,
}

pub const FRONTDOOR_CITATION: &str = "front-door identity for the smoking example";

pub fn frontdoor(joint: &JointTable<f64>, y: &str, z: &str, w: &str) -> Result<FrontDoor> {
    let (yv, zv, wv) = (one(joint, y)?, one(joint, z)?, one(joint, w)?);
    let (ny, nz, nw) = (joint.sizes()[yv], joint.sizes()[zv], joint.sizes()[wv]);
    let py = joint.marginal(&[yv]);
    let w_given_yz = Cond::new(joint, &[wv], &[yv, zv]);
    let z_given_y = Cond::new(joint, &[zv], &[yv]);
    let mut m = vec![vec![0.0; nw]; nz];
    for (zs, mz) in m.iter_mut().enumerate() {
        for ys in 0..ny {
            let wy = *py.at(&[ys]);
            if wy.negligible() {
                continue;
            }
            for (ws, o) in mz.iter_mut().enumerate() {
                *o += w_given_yz.get(&[ws], &[ys, zs], "the front-door formula")? * wy;
            }
        }
    }
    let label = |v: usize, s: usize| joint.domains()[v][s].clone();
    let mut l = BTreeMap::new();
    for ys in 0..ny {
        let mut d = vec![0.0; nw];
        for (zs, mz) in m.iter().enumerate() {
            let pz = z_given_y.get(&[zs], &[ys], "the front-door formula")?;
            if pz.negligible() {
                continue;
            }
            for ws in 0..nw {
                d[ws] += mz[ws] * pz;
            }
        }
        l.insert(label(yv, ys), (0..nw).map(|ws| (label(wv, ws), d[ws])).collect());
    }
    let m = m
        .iter()
        .enumerate()
        .map(|(zs, mz)| (label(zv, zs), (0..nw).map(|ws| (label(wv, ws), mz[ws])).collect()))
        .collect();
    Ok(FrontDoor { l, m, citation: FRONTDOOR_CITATION.into() })
}

/// Role bindings for the eelworm formula.
#[derive(Clone, Debug)]
pub struct EelwormRoles<'a> {
    pub x: &'a str,
    pub u: &'a str,
    pub v: &'a str,
    pub w: &'a str,
    pub y: &'a str,
}

pub const EELWORMS_CITATION: &str = "eelworm identity";

/// μ_x(y) = Σ_{v,w} P(y|x,v,w) Σ_u P(v|x,u) Σ_{x′} P(w|v,x′,u) P(x′,u); keyed by x label.
pub fn eelworms_effect(joint: &JointTable<f64>, roles: &EelwormRoles) -> Result<BTreeMap<String, Dist>> {
    let (x, u, v, w, y) = (
        one(joint, roles.x)?,
        one(joint, roles.u)?,
        one(joint, roles.v)?,
        one(joint, roles.w)?,
        one(joint, roles.y)?,
    );
    let s = joint.sizes();
    let (nx, nu, nv, nw, ny) = (s[x], s[u], s[v], s[w], s[y]);
    let y_given = Cond::new(joint, &[y], &[x, v, w]);
    let v_given = Cond::new(joint, &[v], &[x, u]);
    let w_given = Cond::new(joint, &[w], &[v, x, u]);
    let pxu = joint.marginal(&[x, u]);
    let pu = joint.marginal(&[u]);
    let what = "the eelworm formula";
    let mut out = BTreeMap::new();
    for xs in 0..nx {
        let mut d = vec![0.0; ny];
        for vs in 0..nv {
            for ws in 0..nw {
                let mut weight = 0.0;
                for us in 0..nu {
                    if pu.at(&[us]).negligible() {
                        continue;
                    }
                    let pv = v_given.get(&[vs], &[xs, us], what)?;
                    if pv.negligible() {
                        continue;
                    }
                    let mut inner = 0.0;
                    for xp in 0..nx {
                        let p = *pxu.at(&[xp, us]);
                        if p.negligible() {
                            continue;
                        }
                        inner += w_given.get(&[ws], &[vs, xp, us], what)? * p;
                    }
                    weight += pv * inner;
                }
                if weight.negligible() {
                    continue;
                }
                for (ys, o) in d.iter_mut().enumerate() {
                    *o += y_given.get(&[ys], &[xs, vs, ws], what)? * weight;
                }
            }
        }
        let lab = |var: usize, st: usize| joint.domains()[var][st].clone();
        out.insert(lab(x, xs), (0..ny).map(|ys| (lab(y, ys), d[ys])).collect());
    }
    Ok(out)
}

/// Role bindings for the two-stage sequential-treatment model.
#[derive(Clone, Debug)]
pub struct SequentialRoles<'a> {
    pub x: &'a str,
    pub t: &'a str,
    pub r: &'a str,
    pub x2: &'a str,
    pub t2: &'a str,
    pub r2: &'a str,
}

pub const GFORMULA_CITATION: &str = "two-stage g-formula for the joint effect of sequential treatments";

fn gformula_terms(
    joint: &JointTable<f64>,
    roles: &SequentialRoles,
    t: &str,
    t2: &str,
) -> Result<(Vec<usize>, usize, usize, Vec<Vec<f64>>)> {
    let ids = [roles.x, roles.t, roles.r, roles.x2, roles.t2, roles.r2]
        .iter()
        .map(|n| one(joint, n))
        .collect::<Result<Vec<_>>>()?;
    if ids.iter().collect::<BTreeSet<_>>().len() != 6 {
        return Err(Error::InvalidArgument("sequential roles must be six distinct variables".into()));
    }
    let [x, tv, r, x2, t2v, r2] = [ids[0], ids[1], ids[2], ids[3], ids[4], ids[5]];
    let ts = joint.state(tv, t)?;
    let t2s = joint.state(t2v, t2)?;
    let s = joint.sizes();
    let what = "the g-formula";
    let r2_given = Cond::new(joint, &[r2], &[x, tv, r, x2, t2v]);
    let x2_given = Cond::new(joint, &[x2], &[x, tv, r]);
    let r_given = Cond::new(joint, &[r], &[x, tv]);
    // per-x conditional laws of R′ (before weighting by P(x))
    let mut per_x = vec![vec![0.0; s[r2]]; s[x]];
    let px = joint.marginal(&[x]);
    for (xs, d) in per_x.iter_mut().enumerate() {
        if px.at(&[xs]).negligible() {
            continue;
        }
        for rs in 0..s[r] {
            let pr = r_given.get(&[rs], &[xs, ts], what)?;
            if pr.negligible() {
                continue;
            }
            for x2s in 0..s[x2] {
                let px2 = x2_given.get(&[x2s], &[xs, ts, rs], what)?;
                if px2.negligible() {
                    continue;
                }
                for (r2s, o) in d.iter_mut().enumerate() {
                    *o += r2_given.get(&[r2s], &[xs, ts, rs, x2s, t2s], what)? * px2 * pr;
                }
            }
        }
    }
    Ok((ids, x, r2, per_x))
}

/// Law of R′ under do(T=t, T′=t′), as a mass function.
pub fn gformula2(joint: &JointTable<f64>, roles: &SequentialRoles, t: &str, t2: &str) -> Result<Dist> {
    let (_, x, r2, per_x) = gformula_terms(joint, roles, t, t2)?;
    let px = joint.marginal(&[x]);
    let mut d = vec![0.0; joint.sizes()[r2]];
    for (xs, row) in per_x.iter().enumerate() {
        let w = *px.at(&[xs]);
        for (o, p) in d.iter_mut().zip(row) {
            *o += p * w;
        }
    }
    Ok(d.iter().enumerate().map(|(s, p)| (joint.domains()[r2][s].clone(), *p)).collect())
}

/// Conditional variant: law of R′ under do(T=t, T′=t′) given X=x, for each x with P(x) > 0.
pub fn gformula2_given_x(
    joint: &JointTable<f64>,
    roles: &SequentialRoles,
    t: &str,
    t2: &str,
) -> Result<BTreeMap<String, Dist>> {
    let (_, x, r2, per_x) = gformula_terms(joint, roles, t, t2)?;
    let px = joint.marginal(&[x]);
    Ok(per_x
        .iter()
        .enumerate()
        .filter(|(xs, _)| !px.at(&[*xs]).negligible())
        .map(|(xs, row)| {
            (
                joint.domains()[x][xs].clone(),
                row.iter().enumerate().map(|(s, p)| (joint.domains()[r2][s].clone(), *p)).collect(),
            )
        })
        .collect())
}

/// Cumulative form P(R′ ≤ r′) of a mass function over numeric labels.
pub fn cumulative(d: &Dist) -> Result<Vec<(f64, f64)>> {
    let mut pts = d
        .iter()
        .map(|(k, p)| {
            k.parse::<f64>().map(|v| (v, *p)).map_err(|_| Error::InvalidArgument(format!("non-numeric value {k}")))
        })
        .collect::<Result<Vec<_>>>()?;
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0.0;
    Ok(pts
        .into_iter()
        .map(|(v, p)| {
            acc += p;
            (v, acc)
        })
        .collect())
}

/// Required graph shape for a formula, written over role names.
#[derive(Clone, Debug)]
pub struct ShapeTemplate {
    pub name: &'static str,
    pub roles: &'static [&'static str],
    pub latent: &'static [&'static str],
    pub required: &'static [(&'static str, &'static str)],
    pub optional: &'static [(&'static str, &'static str)],
}

pub const FRONTDOOR_SHAPE: ShapeTemplate = ShapeTemplate {
    name: "front-door (smoking)",
    roles: &["X", "Y", "Z", "W"],
    latent: &["X"],
    required: &[("X", "Y"), ("X", "W"), ("Y", "Z"), ("Z", "W")],
    optional: &[],
};

pub const EELWORMS_SHAPE: ShapeTemplate = ShapeTemplate {
    name: "eelworms",
    roles: &["A", "B", "X", "U", "V", "W", "Y"],
    latent: &["A", "B"],
    required: &[
        ("A", "X"),
        ("A", "U"),
        ("A", "B"),
        ("U", "V"),
        ("X", "V"),
        ("X", "Y"),
        ("V", "W"),
        ("B", "W"),
        ("V", "Y"),
        ("W", "Y"),
    ],
    optional: &[],
};

pub const SEQUENTIAL_SHAPE: ShapeTemplate = ShapeTemplate {
    name: "two-stage sequential treatment",
    roles: &["X", "T", "R", "X2", "T2", "R2"],
    latent: &[],
    required: &[
        ("X", "T"),
        ("X", "R"),
        ("T", "R"),
        ("X", "X2"),
        ("T", "X2"),
        ("R", "X2"),
        ("X2", "T2"),
        ("T", "T2"),
        ("R", "T2"),
        ("X2", "R2"),
        ("T2", "R2"),
        ("T", "R2"),
    ],
    optional: &[("X", "T2"), ("X", "R2"), ("R", "R2")],
};

pub const TREATMENT_PLAN_SHAPE: ShapeTemplate = ShapeTemplate {
    name: "treatment plan",
    roles: &["U", "Y1", "Y2", "Y3", "Y4"],
    latent: &["U"],
    required: &[("U", "Y1"), ("Y2", "Y1"), ("Y4", "Y1"), ("Y3", "Y2"), ("Y4", "Y3"), ("U", "Y3")],
    optional: &[("Y4", "Y2")],
};

pub const HIRING_SHAPE: ShapeTemplate = ShapeTemplate {
    name: "hiring",
    roles: &["S", "B", "Q", "H"],
    latent: &[],
    required: &[("S", "B"), ("S", "Q"), ("S", "H"), ("B", "Q"), ("B", "H"), ("Q", "H")],
    optional: &[],
};

/// Checks that `dag` is exactly the template under the role binding (role → node).
/// Required edges must all be present; only optional edges may be added.
pub fn validate_shape(dag: &Dag, shape: &ShapeTemplate, binding: &BTreeMap<String, String>) -> Result<()> {
    let mut errs = vec![];
    let mut node_of = BTreeMap::new();
    for role in shape.roles {
        match binding.get(*role) {
            Some(n) if dag.contains(n) => {
                node_of.insert(*role, n.clone());
            }
            Some(n) => errs.push(format!("role {role} bound to unknown node {n}")),
            None => errs.push(format!("role {role} is not bound")),
        }
    }
    if !errs.is_empty() {
        return Err(Error::Structure(format!("{}: {}", shape.name, errs.join("; "))));
    }
    let bound: BTreeSet<&String> = node_of.values().collect();
    if bound.len() != shape.roles.len() {
        return Err(Error::Structure(format!("{}: roles must be bound to distinct nodes", shape.name)));
    }
    for n in dag.names() {
        if !bound.contains(n) {
            errs.push(format!("node {n} plays no role"));
        }
    }
    let role_of: BTreeMap<&String, &str> = node_of.iter().map(|(r, n)| (n, *r)).collect();
    let allowed: BTreeSet<(&str, &str)> = shape.required.iter().chain(shape.optional).copied().collect();
    for (a, b) in dag.edges() {
        if let (Some(ra), Some(rb)) = (role_of.get(&a), role_of.get(&b)) {
            if !allowed.contains(&(*ra, *rb)) {
                errs.push(format!("unexpected edge {a} -> {b}"));
            }
        }
    }
    for (ra, rb) in shape.required {
        if !dag.has_edge(&node_of[ra], &node_of[rb]) {
            errs.push(format!("missing edge {} -> {}", node_of[ra], node_of[rb]));
        }
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Error::Structure(format!("{}: {}", shape.name, errs.join("; "))))
    }
}

/// Binding helper: pairs of (role, node).
pub fn binding(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::tests::simpson;
    use crate::scm::{binary_node, intervene, intervention, joint_distribution, joint_distribution_exact, Scm};
    use num_rational::BigRational;

    #[test]
    fn simpson_adjustment() {
        let j = joint_distribution(&simpson()).unwrap();
        let a1 = adjust(&j, "T", "1", "R", &["X"]).unwrap();
        let a0 = adjust(&j, "T", "0", "R", &["X"]).unwrap();
        assert!((a1.p1("1").unwrap() - 0.70).abs() < 1e-12);
        assert!((a0.p1("1").unwrap() - 0.45).abs() < 1e-12);
        assert!((ate(&j, "T", "1", "0", "R", &["X"]).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(ate(&j, "T", "1", "1", "R", &["X"]).unwrap(), 0.0);
        let p = propensity_adjust(&j, "T", "1", "R", &["X"]).unwrap();
        assert!(p.tv_distance(&a1).unwrap() < 1e-12);
    }

    #[test]
    fn simpson_exact_rational() {
        let j = joint_distribution_exact(&simpson()).unwrap();
        let e = ate(&j, "T", "1", "0", "R", &["X"]).unwrap();
        assert_eq!(e, <BigRational as Prob>::from_f64(0.25));
        let a = adjust(&j, "T", "1", "R", &["X"]).unwrap();
        assert_eq!(a.p1("1").unwrap(), <BigRational as Prob>::from_f64(0.7));
    }

    #[test]
    fn empty_set_with_root_treatment_is_conditional() {
        let scm = Scm::new(vec![binary_node("T", &[], &[0.3]), binary_node("R", &["T"], &[0.1, 0.6])]).unwrap();
        let j = joint_distribution(&scm).unwrap();
        let a = adjust(&j, "T", "1", "R", &[]).unwrap();
        let c = j.restrict_by_name(&["R"], &[("T", "1")]).unwrap();
        assert!(a.tv_distance(&c).unwrap() < 1e-15);
    }

    #[test]
    fn positivity_names_stratum() {
        let scm = Scm::new(vec![
            binary_node("X", &[], &[0.5]),
            binary_node("T", &["X"], &[0.0, 0.5]),
            binary_node("R", &["T", "X"], &[0.2, 0.7, 0.5, 0.9]),
        ])
        .unwrap();
        let j = joint_distribution(&scm).unwrap();
        let e = adjust(&j, "T", "1", "R", &["X"]).unwrap_err();
        assert!(matches!(&e, Error::Positivity(m) if m.contains("T=1,X=0")), "{e}");
    }

    #[test]
    fn propensity_groups_strata() {
        // X has three values; x=0 and x=1 share a propensity but differ in response law
        let scm = Scm::new(vec![
            crate::scm::NodeSpec::new("X", &["0", "1", "2"], &[] as &[&str], vec![vec![0.3, 0.3, 0.4]]),
            crate::scm::NodeSpec::new("T", &["0", "1"], &["X"], vec![vec![0.6, 0.4], vec![0.6, 0.4], vec![0.2, 0.8]]),
            crate::scm::NodeSpec::new(
                "R",
                &["0", "1"],
                &["T", "X"],
                vec![vec![0.9, 0.1], vec![0.5, 0.5], vec![0.7, 0.3], vec![0.4, 0.6], vec![0.1, 0.9], vec![0.2, 0.8]],
            ),
        ])
        .unwrap();
        let j = joint_distribution(&scm).unwrap();
        assert_eq!(propensity_table(&j, "T", &["X"]).unwrap().len(), 3);
        for t in ["0", "1"] {
            let p = propensity_adjust(&j, "T", t, "R", &["X"]).unwrap();
            let oracle = joint_distribution(&intervene(&scm, &intervention(&[("T", t)])).unwrap())
                .unwrap()
                .marginal_by_name(&["R"])
                .unwrap();
            assert!(p.tv_distance(&oracle).unwrap() < 1e-12);
        }
    }

    #[test]
    fn effect_report_values() {
        let j = joint_distribution(&simpson()).unwrap();
        let r = effect_report(&j, "T", &["0", "1"], "R", &["X"], false).unwrap();
        assert!((r.ate.unwrap() - 0.25).abs() < 1e-12);
        assert!((r.distributions["1"]["1"] - 0.70).abs() < 1e-12);
    }

    #[test]
    fn shape_validation() {
        let dag = Dag::new(&["X", "Y", "Z", "W"], &[("X", "Y"), ("X", "W"), ("Y", "Z"), ("Z", "W")]).unwrap();
        let b = binding(&[("X", "X"), ("Y", "Y"), ("Z", "Z"), ("W", "W")]);
        validate_shape(&dag, &FRONTDOOR_SHAPE, &b).unwrap();
        let extra = Dag::new(&["X", "Y", "Z", "W"], &[("X", "Y"), ("X", "W"), ("Y", "Z"), ("Z", "W"), ("X", "Z")]).unwrap();
        let e = validate_shape(&extra, &FRONTDOOR_SHAPE, &b).unwrap_err();
        assert!(e.to_string().contains("unexpected edge X -> Z"));
        let missing = Dag::new(&["X", "Y", "Z", "W"], &[("X", "Y"), ("Y", "Z"), ("Z", "W")]).unwrap();
        assert!(validate_shape(&missing, &FRONTDOOR_SHAPE, &b).is_err());
    }

    #[test]
    fn frontdoor_no_pathway_is_constant() {
        // Z a noisy copy of Y, W independent of Z given the latent X
        let scm = Scm::new(vec![
            binary_node("X", &[], &[0.4]),
            binary_node("Y", &["X"], &[0.3, 0.8]),
            binary_node("Z", &["Y"], &[0.1, 0.9]),
            binary_node("W", &["X", "Z"], &[0.2, 0.2, 0.7, 0.7]),
        ])
        .unwrap();
        let j = joint_distribution(&scm).unwrap();
        let f = frontdoor(&j, "Y", "Z", "W").unwrap();
        assert!((f.l["0"]["1"] - f.l["1"]["1"]).abs() < 1e-12);
    }

    #[test]
    fn cumulative_form() {
        let d: Dist = [("0".to_string(), 0.2), ("1".to_string(), 0.3), ("2".to_string(), 0.5)].into();
        let c = cumulative(&d).unwrap();
        assert!((c[1].1 - 0.5).abs() < 1e-15 && (c[2].1 - 1.0).abs() < 1e-15);
        assert!((dist_expectation(&d).unwrap() - 1.3).abs() < 1e-15);
    }
}
