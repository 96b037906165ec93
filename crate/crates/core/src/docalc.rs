//! Mutilated models M′ₓ and M″ₓ,𝓏, numerical checks of the do-calculus conditions C1
//! and C2, and verification of Rules 1 and 2 by exact enumeration.
//!
//! M′ₓ drops the X mechanisms and substitutes x; M″ₓ,𝓏 additionally drops Z and
//! substitutes z. For C2 the model M″ₓ,𝓏 is augmented with copies Z″ₓ: each copy runs
//! the original Z mechanism with X-parents fixed at x, Z-parents bound to other copies
//! and all remaining parents bound to the M″ nodes. Parentless X nodes are re-attached
//! as isolates carrying their original marginals.

use crate::error::{invalid, Error, Result};
use crate::scm::{joint_distribution, cond_independent, JointTable, NodeSpec, Scm};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

pub type Assignment = BTreeMap<String, String>;

/// Suffix of re-attached parentless X nodes.
pub const ISOLATE_SUFFIX: &str = "'1";
/// Suffix of the Z″ₓ copies added for C2.
pub const COPY_SUFFIX: &str = "''x";

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct NodePartition {
    pub w: Vec<String>,
    pub x: Vec<String>,
    pub y: Vec<String>,
    pub z: Vec<String>,
}

/// Parentless (exogenous) and parented (endogenous) members of one set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Split {
    pub exogenous: Vec<String>,
    pub endogenous: Vec<String>,
}

impl NodePartition {
    pub fn new<S: AsRef<str>>(w: &[S], x: &[S], y: &[S], z: &[S]) -> Self {
        let v = |s: &[S]| s.iter().map(|n| n.as_ref().to_string()).collect();
        NodePartition { w: v(w), x: v(x), y: v(y), z: v(z) }
    }

    pub fn validate(&self, scm: &Scm) -> Result<()> {
        let mut seen = BTreeSet::new();
        for n in self.w.iter().chain(&self.x).chain(&self.y).chain(&self.z) {
            scm.id(n)?;
            if !seen.insert(n) {
                return invalid(format!("node {n} appears twice in the partition"));
            }
        }
        if self.y.is_empty() {
            return invalid("Y must be non-empty");
        }
        Ok(())
    }

    pub fn split(&self, scm: &Scm, set: &[String]) -> Result<Split> {
        let mut s = Split { exogenous: vec![], endogenous: vec![] };
        for n in set {
            if scm.node(n)?.parents.is_empty() {
                s.exogenous.push(n.clone());
            } else {
                s.endogenous.push(n.clone());
            }
        }
        Ok(s)
    }
}

fn check_assignment(scm: &Scm, set: &[String], vals: &Assignment, what: &str) -> Result<()> {
    let want: BTreeSet<&String> = set.iter().collect();
    let got: BTreeSet<&String> = vals.keys().collect();
    if want != got {
        return invalid(format!("{what} must assign exactly {want:?}, got {got:?}"));
    }
    for (k, v) in vals {
        scm.state(k, v)?;
    }
    Ok(())
}

fn fresh(scm: &Scm, name: String) -> Result<String> {
    if scm.id(&name).is_ok() {
        return invalid(format!("generated node name {name} collides with an existing node"));
    }
    Ok(name)
}

fn isolates(scm: &Scm, part: &NodePartition) -> Result<Vec<NodeSpec>> {
    let mut out = vec![];
    for n in part.split(scm, &part.x)?.exogenous {
        let mut spec = scm.node(&n)?.clone();
        spec.name = fresh(scm, format!("{n}{ISOLATE_SUFFIX}"))?;
        out.push(spec);
    }
    Ok(out)
}

fn isolate_names(scm: &Scm, part: &NodePartition) -> Result<Vec<String>> {
    Ok(part.split(scm, &part.x)?.exogenous.iter().map(|n| format!("{n}{ISOLATE_SUFFIX}")).collect())
}

/// M′ₓ; with `attach` the parentless X nodes come back as isolates named `X'1`.
pub fn build_m_prime(scm: &Scm, part: &NodePartition, x: &Assignment, attach: bool) -> Result<Scm> {
    part.validate(scm)?;
    check_assignment(scm, &part.x, x, "x")?;
    let m = scm.fix_and_remove(x)?;
    if attach {
        m.extend(isolates(scm, part)?)
    } else {
        Ok(m)
    }
}

/// M″ₓ,𝓏; with `augment` the X isolates and the Z″ₓ copies (named `Z''x`) are added.
pub fn build_m_doubleprime(scm: &Scm, part: &NodePartition, x: &Assignment, z: &Assignment, augment: bool) -> Result<Scm> {
    part.validate(scm)?;
    check_assignment(scm, &part.x, x, "x")?;
    check_assignment(scm, &part.z, z, "z")?;
    let m_prime = scm.fix_and_remove(x)?;
    let m2 = m_prime.fix_and_remove(z)?;
    if !augment {
        return Ok(m2);
    }
    let zset: BTreeSet<&String> = part.z.iter().collect();
    let rename = |n: &String| if zset.contains(n) { format!("{n}{COPY_SUFFIX}") } else { n.clone() };
    let mut extra = isolates(scm, part)?;
    for n in &part.z {
        let mut spec = m_prime.node(n)?.clone();
        spec.name = fresh(scm, rename(n))?;
        spec.parents = spec.parents.iter().map(rename).collect();
        extra.push(spec);
    }
    m2.extend(extra)
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(|s| s.as_str()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub holds: bool,
    pub deviation: f64,
}

/// C1: Y′ ⫫ Z′ | W′, X′₁ in M′ₓ.
pub fn check_c1(scm: &Scm, part: &NodePartition, x: &Assignment, tol: f64) -> Result<ConditionCheck> {
    let m = build_m_prime(scm, part, x, true)?;
    let joint = joint_distribution(&m)?;
    let mut given = part.w.clone();
    given.extend(isolate_names(scm, part)?);
    let (holds, deviation) = cond_independent(&joint, &strs(&part.y), &strs(&part.z), &strs(&given), tol)?;
    Ok(ConditionCheck { holds, deviation })
}

/// C2: Y″ ⫫ Z″ₓ | W″, X″₁ in the augmented M″ₓ,𝓏.
pub fn check_c2(scm: &Scm, part: &NodePartition, x: &Assignment, z: &Assignment, tol: f64) -> Result<ConditionCheck> {
    let m = build_m_doubleprime(scm, part, x, z, true)?;
    let joint = joint_distribution(&m)?;
    let mut given = part.w.clone();
    given.extend(isolate_names(scm, part)?);
    let copies: Vec<String> = part.z.iter().map(|n| format!("{n}{COPY_SUFFIX}")).collect();
    let (holds, deviation) = cond_independent(&joint, &strs(&part.y), &strs(&copies), &strs(&given), tol)?;
    Ok(ConditionCheck { holds, deviation })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Condition {
    C1,
    C2,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RuleVerdict {
    pub rule: u8,
    pub condition: Condition,
    pub condition_holds: bool,
    pub condition_deviation: f64,
    /// Max |lhs − rhs| over y and the W strata where both sides are defined.
    pub identity_deviation: f64,
    /// W strata skipped because one side conditions on a null event.
    pub skipped_strata: Vec<String>,
    pub pass: bool,
}

/// All configurations of `vars` in `joint` as (var, state) events.
fn events(joint: &JointTable, vars: &[usize]) -> Vec<Vec<(usize, usize)>> {
    let mut out = vec![vec![]];
    for &v in vars {
        let k = joint.sizes()[v];
        out = out.into_iter().flat_map(|e| (0..k).map(move |s| { let mut e = e.clone(); e.push((v, s)); e })).collect();
    }
    out
}

fn zero_event(joint: &JointTable, e: &[(usize, usize)]) -> bool {
    joint.prob(e) <= crate::prob::POSITIVITY_TOL
}

/// Max deviation between P_a(Y | W=w, extra_a) and P_b(Y | W=w, extra_b) over all w where
/// both conditioning events have positive probability.
fn compare_conditionals(
    a: &JointTable,
    extra_a: &[(usize, usize)],
    b: &JointTable,
    extra_b: &[(usize, usize)],
    part: &NodePartition,
) -> Result<(f64, Vec<String>)> {
    let (wa, ya) = (a.vars(&part.w)?, a.vars(&part.y)?);
    let (wb, yb) = (b.vars(&part.w)?, b.vars(&part.y)?);
    let mut worst = 0.0f64;
    let mut skipped = vec![];
    let mut usable = 0;
    for ea in events(a, &wa) {
        let eb: Vec<(usize, usize)> = ea.iter().zip(&wb).map(|(&(_, s), &v)| (v, s)).collect();
        let ga: Vec<(usize, usize)> = ea.iter().chain(extra_a).copied().collect();
        let gb: Vec<(usize, usize)> = eb.iter().chain(extra_b).copied().collect();
        if zero_event(a, &ga) || zero_event(b, &gb) {
            if !zero_event(a, &ea) || !zero_event(b, &eb) {
                skipped.push(if ea.is_empty() { "(all)".to_string() } else { a.describe(&ea) });
            }
            continue;
        }
        usable += 1;
        let pa = a.restrict(&ya, &ga)?;
        let pb = b.restrict(&yb, &gb)?;
        for (p, q) in pa.probs().iter().zip(pb.probs()) {
            worst = worst.max((p - q).abs());
        }
    }
    if usable == 0 {
        let what = if extra_a.is_empty() { b.describe(extra_b) } else { a.describe(extra_a) };
        return Err(Error::ZeroProbability(format!("every W stratum is null together with {what}")));
    }
    Ok((worst, skipped))
}

/// Rule 1: P(y | x̂, z, w) = P(y | x̂, w) under C1. Rule 2: P(y | x̂, ẑ, w) = P(y | x̂, z, w)
/// under C2. Both sides are enumerated in the mutilated models.
pub fn verify_rule(scm: &Scm, part: &NodePartition, rule: u8, x: &Assignment, z: &Assignment, tol: f64) -> Result<RuleVerdict> {
    part.validate(scm)?;
    check_assignment(scm, &part.z, z, "z")?;
    let m1 = build_m_prime(scm, part, x, false)?;
    let j1 = joint_distribution(&m1)?;
    let zev: Vec<(usize, usize)> =
        z.iter().map(|(k, v)| Ok((j1.var(k)?, j1.state(j1.var(k)?, v)?))).collect::<Result<_>>()?;
    let (cond, identity, skipped) = match rule {
        1 => {
            let c = check_c1(scm, part, x, tol)?;
            let (d, s) = compare_conditionals(&j1, &zev, &j1, &[], part)?;
            (c, d, s)
        }
        2 => {
            let c = check_c2(scm, part, x, z, tol)?;
            let j2 = joint_distribution(&build_m_doubleprime(scm, part, x, z, false)?)?;
            let (d, s) = compare_conditionals(&j2, &[], &j1, &zev, part)?;
            (c, d, s)
        }
        r => return invalid(format!("rule {r} is not supported; use 1 or 2")),
    };
    Ok(RuleVerdict {
        rule,
        condition: if rule == 1 { Condition::C1 } else { Condition::C2 },
        condition_holds: cond.holds,
        condition_deviation: cond.deviation,
        identity_deviation: identity,
        skipped_strata: skipped,
        pass: cond.holds && identity <= tol,
    })
}

/// Convenience for building assignments from pairs.
pub fn assignment(pairs: &[(&str, &str)]) -> Assignment {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::fig1;
    use crate::scm::{binary_node, intervene, intervention, point_row, random_scm};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn copy_model() -> Scm {
        Scm::new(vec![
            binary_node("T", &[], &[0.5]),
            binary_node("Z", &[], &[0.5]),
            NodeSpec::new("Y", &["0", "1"], &["Z"], vec![point_row(2, 0), point_row(2, 1)]),
        ])
        .unwrap()
    }

    fn fig1_model(seed: u64) -> Scm {
        let scm = random_scm(&fig1(), &[2; 8], 0.05, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        scm.replace_node(NodeSpec::new("X6", &["0", "1"], &["T"], vec![point_row(2, 0), point_row(2, 1)])).unwrap()
    }

    #[test]
    fn copy_mechanism_violates_c1() {
        let p = NodePartition::new(&[] as &[&str], &["T"], &["Y"], &["Z"]);
        let x = assignment(&[("T", "1")]);
        let c = check_c1(&copy_model(), &p, &x, 1e-12).unwrap();
        assert!(!c.holds);
        assert!((c.deviation - 0.25).abs() < 1e-12);
        let v = verify_rule(&copy_model(), &p, 1, &x, &assignment(&[("Z", "1")]), 1e-12).unwrap();
        assert!(!v.pass && !v.condition_holds);
        assert!((v.identity_deviation - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fig1_x6_is_constant_after_fixing_t() {
        let scm = fig1_model(4);
        let p = NodePartition::new(&["X3", "X5"], &["T"], &["R"], &["X6"]);
        let x = assignment(&[("T", "1")]);
        let c = check_c1(&scm, &p, &x, 1e-12).unwrap();
        assert!(c.holds, "{c:?}");
        let v = verify_rule(&scm, &p, 1, &x, &assignment(&[("X6", "1")]), 1e-12).unwrap();
        assert!(v.pass, "{v:?}");
    }

    #[test]
    fn m_prime_matches_intervention() {
        let scm = fig1_model(9);
        let p = NodePartition::new(&["X3"], &["T", "X1"], &["R"], &["X6"]);
        let x = assignment(&[("T", "0"), ("X1", "1")]);
        let m = joint_distribution(&build_m_prime(&scm, &p, &x, false).unwrap()).unwrap();
        let iv = joint_distribution(&intervene(&scm, &intervention(&[("T", "0"), ("X1", "1")])).unwrap()).unwrap();
        let keep: Vec<&str> = m.names().iter().map(|s| s.as_str()).collect();
        let iv = iv.marginal_by_name(&keep).unwrap();
        assert!(m.tv_distance(&iv).unwrap() <= 1e-12);
        let with_iso = build_m_prime(&scm, &p, &x, true).unwrap();
        assert!(with_iso.node("X1'1").unwrap().parents.is_empty());
    }

    #[test]
    fn m_doubleprime_matches_intervention_and_empty_z() {
        let scm = fig1_model(11);
        let p = NodePartition::new(&["X5"], &["T"], &["R"], &["X3"]);
        let (x, z) = (assignment(&[("T", "1")]), assignment(&[("X3", "0")]));
        let m = joint_distribution(&build_m_doubleprime(&scm, &p, &x, &z, false).unwrap()).unwrap();
        let iv = joint_distribution(&intervene(&scm, &intervention(&[("T", "1"), ("X3", "0")])).unwrap()).unwrap();
        let keep: Vec<&str> = m.names().iter().map(|s| s.as_str()).collect();
        assert!(m.tv_distance(&iv.marginal_by_name(&keep).unwrap()).unwrap() <= 1e-12);

        let p0 = NodePartition::new(&["X5"], &["T"], &["R"], &[] as &[&str]);
        let a = joint_distribution(&build_m_doubleprime(&scm, &p0, &x, &Assignment::new(), false).unwrap()).unwrap();
        let b = joint_distribution(&build_m_prime(&scm, &p0, &x, false).unwrap()).unwrap();
        assert_eq!(a.max_abs_diff(&b).unwrap(), 0.0);
        let v = verify_rule(&scm, &p0, 2, &x, &Assignment::new(), 1e-12).unwrap();
        assert!(v.pass && v.identity_deviation == 0.0);
    }

    #[test]
    fn confounded_z_fails_c2() {
        // the copy of X3 shares X2 with R through X5, so it stays dependent on R″
        let scm = fig1_model(2);
        let p = NodePartition::new(&[] as &[&str], &["T"], &["R"], &["X3"]);
        let (x, z) = (assignment(&[("T", "1")]), assignment(&[("X3", "1")]));
        let c = check_c2(&scm, &p, &x, &z, 1e-12).unwrap();
        assert!(!c.holds && c.deviation > 1e-6);
        let v = verify_rule(&scm, &p, 2, &x, &z, 1e-12).unwrap();
        assert!(!v.pass);
    }

    #[test]
    fn augmentation_copies_follow_original_mechanism() {
        let scm = fig1_model(5);
        let p = NodePartition::new(&[] as &[&str], &["T"], &["R"], &["X6"]);
        let (x, z) = (assignment(&[("T", "0")]), assignment(&[("X6", "1")]));
        let m = build_m_doubleprime(&scm, &p, &x, &z, true).unwrap();
        let copy = m.node("X6''x").unwrap();
        assert!(copy.parents.is_empty());
        assert_eq!(copy.table[0], point_row(2, 0));
        // the copy has no children, so it cannot be an ancestor of W or Y
        assert!(m.nodes().iter().all(|n| !n.parents.contains(&"X6''x".to_string())));
        assert!(check_c2(&scm, &p, &x, &z, 1e-12).unwrap().holds);
    }

    #[test]
    fn bad_partitions_rejected() {
        let scm = copy_model();
        assert!(NodePartition::new(&["Y"], &["T"], &["Y"], &[] as &[&str]).validate(&scm).is_err());
        assert!(NodePartition::new(&[] as &[&str], &["Q"], &["Y"], &[] as &[&str]).validate(&scm).is_err());
        let p = NodePartition::new(&[] as &[&str], &["T"], &["Y"], &["Z"]);
        assert!(build_m_prime(&scm, &p, &assignment(&[("T", "7")]), false).is_err());
        assert!(verify_rule(&scm, &p, 3, &assignment(&[("T", "1")]), &assignment(&[("Z", "1")]), 1e-12).is_err());
    }
}
