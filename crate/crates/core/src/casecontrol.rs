//! Matched case-control sampling from a population model, and odds-ratio estimation
//! from the resulting pairs.
//!
//! The population is an unbounded i.i.d. sequence generated lazily. Phase one scans it
//! for the first N cases (R = 1). Phase two continues after the last case and hands each
//! row to the oldest still-unmatched case with the same x, so controls follow
//! ℒ(T,R | X = x) and never reuse a case index.

use crate::error::{Error, Result};
use crate::estimands::{OddsRatioReport, OddsStratum, ODDS_CITATION};
use crate::exogenous::DigitStream;
use crate::scm::{joint_distribution, Sampler, Scm};
use serde::Serialize;
use std::collections::{BTreeMap, VecDeque};

pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Case,
    Control,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CcRow {
    /// X labels joined by "|".
    pub x: String,
    pub t: String,
    pub r: String,
    pub pair_id: usize,
    pub role: Role,
    /// Position in the simulated population sequence (1-based).
    pub index: u64,
}

/// Rows alternate case, control, case, control, ...
#[derive(Clone, Debug, Serialize)]
pub struct CaseControlSample {
    pub x_names: Vec<String>,
    pub rows: Vec<CcRow>,
    pub population_rows: u64,
}

impl CaseControlSample {
    pub fn pairs(&self) -> usize {
        self.rows.len() / 2
    }

    /// Delimited export with columns x,t,r,pair_id,role.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "t", "r", "pair_id", "role"])?;
        for row in &self.rows {
            let role = match row.role {
                Role::Case => "case",
                Role::Control => "control",
            };
            wr.write_record([row.x.as_str(), &row.t, &row.r, &row.pair_id.to_string(), role])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Checks the pairing invariants; returns the first violation found.
    pub fn check_pairing(&self) -> Result<()> {
        if self.rows.len() % 2 != 0 {
            return Err(Error::Constraint("odd number of rows".into()));
        }
        let case_idx: std::collections::BTreeSet<u64> =
            self.rows.iter().filter(|r| r.role == Role::Case).map(|r| r.index).collect();
        for (k, pair) in self.rows.chunks(2).enumerate() {
            let (c, k2) = (&pair[0], &pair[1]);
            let ok = c.role == Role::Case
                && k2.role == Role::Control
                && c.r == "1"
                && c.x == k2.x
                && c.pair_id == k
                && k2.pair_id == k
                && !case_idx.contains(&k2.index);
            if !ok {
                return Err(Error::Constraint(format!("pair {k} violates the case-control pairing")));
            }
        }
        Ok(())
    }
}

/// Draws `pairs` matched case-control pairs from `population`.
pub fn simulate_case_control(
    population: &Scm,
    x: &[&str],
    t: &str,
    r: &str,
    pairs: usize,
    source: &DigitStream,
    budget: u64,
) -> Result<CaseControlSample> {
    let xi: Vec<usize> = x.iter().map(|n| population.id(n)).collect::<Result<_>>()?;
    let (ti, ri) = (population.id(t)?, population.id(r)?);
    let r1 = population.state(r, "1")?;
    let joint = joint_distribution(population)?;
    let pr1 = joint.prob(&[(joint.var(r)?, r1)]);
    if pr1 <= 0.0 {
        return Err(Error::Exhaustion(format!("P({r}=1) = 0: no case can ever be found")));
    }
    let nodes = population.nodes();
    let label = |i: usize, s: usize| nodes[i].domain[s].clone();
    let xkey = |row: &[usize]| xi.iter().map(|&i| label(i, row[i])).collect::<Vec<_>>().join("|");
    let mut sampler = Sampler::new(population, source)?;
    let mut seen = 0u64;
    let mut next = |seen: &mut u64| -> Result<Vec<usize>> {
        if *seen >= budget {
            return Err(Error::Exhaustion(format!("population budget of {budget} rows used up")));
        }
        *seen += 1;
        Ok(sampler.next_row())
    };

    let mut rows: Vec<CcRow> = Vec::with_capacity(2 * pairs);
    let mut pending: BTreeMap<String, VecDeque<usize>> = BTreeMap::new();
    while rows.len() < 2 * pairs {
        let row = next(&mut seen)?;
        if row[ri] != r1 {
            continue;
        }
        let k = rows.len() / 2;
        let key = xkey(&row);
        pending.entry(key.clone()).or_default().push_back(k);
        rows.push(CcRow { x: key.clone(), t: label(ti, row[ti]), r: label(ri, row[ri]), pair_id: k, role: Role::Case, index: seen });
        // placeholder control, filled in phase two
        rows.push(CcRow { x: key, t: String::new(), r: String::new(), pair_id: k, role: Role::Control, index: 0 });
    }
    let mut open = pairs;
    while open > 0 {
        let row = next(&mut seen)?;
        if let Some(queue) = pending.get_mut(&xkey(&row)) {
            if let Some(k) = queue.pop_front() {
                let c = &mut rows[2 * k + 1];
                c.t = label(ti, row[ti]);
                c.r = label(ri, row[ri]);
                c.index = seen;
                open -= 1;
            }
        }
    }
    Ok(CaseControlSample { x_names: x.iter().map(|s| s.to_string()).collect(), rows, population_rows: seen })
}

/// Per-stratum ê(x) = ad/(bc) from exposed/unexposed cases (a, b) and exposed/unexposed
/// controls with r = 0 (c, d); strata with an empty cell are dropped with a warning.
pub fn estimate_cc_or(sample: &CaseControlSample) -> OddsRatioReport {
    // x → [exposed cases, unexposed cases, exposed controls, unexposed controls]
    let mut cells: BTreeMap<&str, [u64; 4]> = BTreeMap::new();
    for row in &sample.rows {
        let c = cells.entry(row.x.as_str()).or_default();
        let exposed = row.t == "1";
        match row.role {
            Role::Case => c[if exposed { 0 } else { 1 }] += 1,
            Role::Control if row.r == "0" => c[if exposed { 2 } else { 3 }] += 1,
            Role::Control => {}
        }
    }
    let mut warnings = vec![];
    let mut strata = vec![];
    for (x, c) in &cells {
        if c.iter().any(|&n| n == 0) {
            warnings.push(format!("stratum {x} dropped: empty cell in counts {c:?}"));
            continue;
        }
        let [a, b, cc, d] = c.map(|n| n as f64);
        let e = a * d / (b * cc);
        strata.push(OddsStratum {
            x: x.to_string(),
            p: a / (a + b),
            q: cc / (cc + d),
            e_conditional: (a / cc) / (b / d),
            e_exposure: e,
            weight: a + b,
            se_log: Some((1.0 / a + 1.0 / b + 1.0 / cc + 1.0 / d).sqrt()),
            counts: Some(*c),
        });
    }
    let total: f64 = strata.iter().map(|s| s.weight).sum();
    let overall = if total > 0.0 {
        for s in &mut strata {
            s.weight /= total;
        }
        Some(strata.iter().map(|s| s.weight * s.e_exposure).sum())
    } else {
        warnings.push("no usable strata".into());
        None
    };
    OddsRatioReport { strata, overall, warnings, citation: ODDS_CITATION.into() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::binary_node;

    pub(crate) fn population() -> Scm {
        // P(T=1|x) mixes 0.6 and 0.3 by P(R=1|x), so p_x = 0.6, q_x = 0.3 and e(x) = 3.5
        let pi = [0.2, 0.4];
        let mut r_rows = vec![];
        let mut t_rows = vec![];
        for &p in &pi {
            let pt = 0.6 * p + 0.3 * (1.0 - p);
            t_rows.push(pt);
            r_rows.push((p, pt));
        }
        // P(R=1|T,x) from Bayes: P(R=1|T=1,x) = 0.6π/pt, P(R=1|T=0,x) = 0.4π/(1−pt)
        let mut r_p = vec![];
        for t in 0..2 {
            for &(p, pt) in &r_rows {
                r_p.push(if t == 1 { 0.6 * p / pt } else { 0.4 * p / (1.0 - pt) });
            }
        }
        Scm::new(vec![
            binary_node("X", &[], &[0.5]),
            binary_node("T", &["X"], &t_rows),
            binary_node("R", &["T", "X"], &r_p),
        ])
        .unwrap()
    }

    #[test]
    fn pairs_are_well_formed() {
        let s = simulate_case_control(&population(), &["X"], "T", "R", 200, &DigitStream::seeded(3), DEFAULT_BUDGET).unwrap();
        assert_eq!(s.pairs(), 200);
        s.check_pairing().unwrap();
        assert!(s.rows.iter().step_by(2).all(|r| r.r == "1"));
        let mut buf = vec![];
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("x,t,r,pair_id,role\n"));
    }

    #[test]
    fn impossible_cases_exhaust() {
        let scm = Scm::new(vec![binary_node("X", &[], &[0.5]), binary_node("T", &[], &[0.5]), binary_node("R", &["T"], &[0.0, 0.0])])
            .unwrap();
        let e = simulate_case_control(&scm, &["X"], "T", "R", 1, &DigitStream::seeded(1), 1000).unwrap_err();
        assert!(matches!(e, Error::Exhaustion(_)));
    }

    #[test]
    fn single_pair_drops_all_strata() {
        let s = simulate_case_control(&population(), &["X"], "T", "R", 1, &DigitStream::seeded(5), DEFAULT_BUDGET).unwrap();
        let rep = estimate_cc_or(&s);
        assert!(rep.strata.is_empty() && rep.overall.is_none() && !rep.warnings.is_empty());
    }

    #[test]
    fn equal_exposure_gives_unit_odds() {
        let mk = |x: &str, t: &str, r: &str, k: usize, role: Role| CcRow { x: x.into(), t: t.into(), r: r.into(), pair_id: k, role, index: 0 };
        let mut rows = vec![];
        for (k, t) in ["1", "0", "1", "0"].iter().enumerate() {
            rows.push(mk("0", t, "1", k, Role::Case));
            rows.push(mk("0", t, "0", k, Role::Control));
        }
        let rep = estimate_cc_or(&CaseControlSample { x_names: vec!["X".into()], rows, population_rows: 0 });
        assert!((rep.strata[0].e_exposure - 1.0).abs() < 1e-12);
    }
}
