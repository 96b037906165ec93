//! Estimands beyond plain adjustment: direct effects under a treatment plan,
//! the antibiotic policy, hiring mediation, instrumental variables and odds ratios.

use crate::error::{Error, Result};
use crate::gaussian::{lg_moments, lg_regression, LinearGaussianScm};
use crate::identify::{dist_expectation, Cond, Dist};
use crate::prob::Prob;
use crate::scm::{Dataset, JointTable};
use serde::Serialize;
use std::collections::BTreeMap;

/// Denominators at or below this make an instrument unusable.
pub const WEAK_IV_TOL: f64 = 1e-12;

fn labelled(joint: &JointTable<f64>, var: usize, probs: &[f64]) -> Dist {
    probs.iter().enumerate().map(|(s, p)| (joint.domains()[var][s].clone(), *p)).collect()
}

fn binary_states(joint: &JointTable<f64>, var: usize) -> Result<(usize, usize)> {
    if joint.sizes()[var] != 2 {
        return Err(Error::InvalidArgument(format!("{} must be binary", joint.names()[var])));
    }
    Ok((joint.state(var, "0")?, joint.state(var, "1")?))
}

/// Role bindings for the treatment-plan model (Y₁ outcome, Y₂ second treatment, Y₃ test, Y₄ first treatment).
#[derive(Clone, Debug)]
pub struct PlanRoles<'a> {
    pub y1: &'a str,
    pub y2: &'a str,
    pub y3: &'a str,
    pub y4: &'a str,
}

#[derive(Clone, Debug, Serialize)]
pub struct DirectEffect {
    pub y2: String,
    pub t: String,
    pub dist: Dist,
    /// ν: the mean of `dist` when Y₁ is numeric.
    pub nu: Option<f64>,
    pub citation: String,
}

pub const DIRECT_CITATION: &str = "direct effect of the first treatment under a fixed second treatment";

/// p_t^{(y₂)}(y) = Σ_{y₃} P(Y₁=y|Y₂=y₂,Y₃=y₃,Y₄=t) P(Y₃=y₃|Y₄=t).
pub fn two_stage_direct(joint: &JointTable<f64>, roles: &PlanRoles, y2: &str, t: &str) -> Result<DirectEffect> {
    let [v1, v2, v3, v4] = [roles.y1, roles.y2, roles.y3, roles.y4].map(|n| joint.var(n));
    let (v1, v2, v3, v4) = (v1?, v2?, v3?, v4?);
    let (s2, s4) = (joint.state(v2, y2)?, joint.state(v4, t)?);
    let what = "the direct-effect formula";
    let y1_given = Cond::new(joint, &[v1], &[v2, v3, v4]);
    let y3_given = Cond::new(joint, &[v3], &[v4]);
    let mut d = vec![0.0; joint.sizes()[v1]];
    for s3 in 0..joint.sizes()[v3] {
        let w = y3_given.get(&[s3], &[s4], what)?;
        if w.negligible() {
            continue;
        }
        for (s1, o) in d.iter_mut().enumerate() {
            *o += y1_given.get(&[s1], &[s2, s3, s4], what)? * w;
        }
    }
    let dist = labelled(joint, v1, &d);
    Ok(DirectEffect { y2: y2.into(), t: t.into(), nu: dist_expectation(&dist).ok(), dist, citation: DIRECT_CITATION.into() })
}

/// ν_t^{(y₂)} for a linear-Gaussian treatment plan: the same formula with conditional means.
pub fn two_stage_direct_gaussian(model: &LinearGaussianScm, roles: &PlanRoles, y2: f64, t: f64) -> Result<f64> {
    let law = lg_moments(model)?;
    let (a, b) = lg_regression(&law, roles.y1, &[roles.y2, roles.y3, roles.y4])?;
    let (c, d) = lg_regression(&law, roles.y3, &[roles.y4])?;
    let e_y3 = c + d[0] * t;
    Ok(a + b[0] * y2 + b[1] * e_y3 + b[2] * t)
}

#[derive(Clone, Debug, Serialize)]
pub struct PolicyReport {
    /// y₄ label → law of the outcome under the policy.
    pub dists: BTreeMap<String, Dist>,
    pub means: BTreeMap<String, f64>,
    /// E(Y̌₁|Y̌₄=1) < E(Y̌₁|Y̌₄=0), when Y₁ is numeric.
    pub first_treatment_lowers_outcome: Option<bool>,
    pub citation: String,
}

pub const POLICY_CITATION: &str = "policy of treating every positive test with the effective antibiotic";

/// P(Y₁=y₁,Y₃=0|Y₄=y₄) + P(Y₁=y₁|Y₂=1,Y₃=1,Y₄=y₄) P(Y₃=1|Y₄=y₄), for each y₄.
pub fn antibiotic_policy(joint: &JointTable<f64>, roles: &PlanRoles) -> Result<PolicyReport> {
    let [v1, v2, v3, v4] = [roles.y1, roles.y2, roles.y3, roles.y4].map(|n| joint.var(n));
    let (v1, v2, v3, v4) = (v1?, v2?, v3?, v4?);
    let (_, two1) = binary_states(joint, v2)?;
    let (three0, three1) = binary_states(joint, v3)?;
    let what = "the policy formula";
    let y1y3_given = Cond::new(joint, &[v1, v3], &[v4]);
    let y1_given = Cond::new(joint, &[v1], &[v2, v3, v4]);
    let y3_given = Cond::new(joint, &[v3], &[v4]);
    let mut dists = BTreeMap::new();
    let mut means = BTreeMap::new();
    for s4 in 0..joint.sizes()[v4] {
        let p3 = y3_given.get(&[three1], &[s4], what)?;
        let mut d = vec![0.0; joint.sizes()[v1]];
        for (s1, o) in d.iter_mut().enumerate() {
            *o = y1y3_given.get(&[s1, three0], &[s4], what)?;
            if !p3.negligible() {
                *o += y1_given.get(&[s1], &[two1, three1, s4], what)? * p3;
            }
        }
        let dist = labelled(joint, v1, &d);
        let key = joint.domains()[v4][s4].clone();
        if let Ok(m) = dist_expectation(&dist) {
            means.insert(key.clone(), m);
        }
        dists.insert(key, dist);
    }
    let cmp = match (means.get("1"), means.get("0")) {
        (Some(a), Some(b)) => Some(a < b),
        _ => None,
    };
    Ok(PolicyReport { dists, means, first_treatment_lowers_outcome: cmp, citation: POLICY_CITATION.into() })
}

/// Role bindings for the hiring model.
#[derive(Clone, Debug)]
pub struct HiringRoles<'a> {
    pub h: &'a str,
    pub b: &'a str,
    pub q: &'a str,
    pub s: &'a str,
}

pub const MEDIATION_CITATION: &str = "hiring with an assumed sex supplied to the committee";
pub const INDIRECT_CITATION: &str = "natural indirect effect of sex on hiring";

/// "b|q" → Σ_{s′} P(H=·|B=b,Q=q,S=s′) σ(s′), where σ is the law of the assumed sex.
pub fn mediation_fixed_sex(joint: &JointTable<f64>, roles: &HiringRoles, sigma: &Dist) -> Result<BTreeMap<String, Dist>> {
    let [h, b, q, s] = [roles.h, roles.b, roles.q, roles.s].map(|n| joint.var(n));
    let (h, b, q, s) = (h?, b?, q?, s?);
    let total: f64 = sigma.values().sum();
    if (total - 1.0).abs() > 1e-9 || sigma.values().any(|p| *p < 0.0) {
        return Err(Error::InvalidArgument("assumed-sex law must be a probability vector".into()));
    }
    let sig: Vec<(usize, f64)> = sigma
        .iter()
        .map(|(k, p)| Ok((joint.state(s, k)?, *p)))
        .collect::<Result<_>>()?;
    let h_given = Cond::new(joint, &[h], &[b, q, s]);
    let mut out = BTreeMap::new();
    for sb in 0..joint.sizes()[b] {
        for sq in 0..joint.sizes()[q] {
            let mut d = vec![0.0; joint.sizes()[h]];
            for &(ss, w) in &sig {
                if w == 0.0 {
                    continue;
                }
                for (sh, o) in d.iter_mut().enumerate() {
                    *o += h_given.get(&[sh], &[sb, sq, ss], "the mediation formula")? * w;
                }
            }
            let key = format!("{}|{}", joint.domains()[b][sb], joint.domains()[q][sq]);
            out.insert(key, labelled(joint, h, &d));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct IndirectEffect {
    /// Σ_{b,q} E(H|b,q,S=1) P(b,q|S=0): women's chance when always taken for men.
    pub women_assumed_men: f64,
    /// Σ_{b,q} E(H|b,q,S=1) P(b,q|S=1).
    pub men: f64,
    pub value: f64,
    pub citation: String,
}

/// Σ_{b,q} E(H|B=b,Q=q,S=1) {P(B=b,Q=q|S=0) − P(B=b,Q=q|S=1)}.
pub fn natural_indirect(joint: &JointTable<f64>, roles: &HiringRoles) -> Result<IndirectEffect> {
    let [h, b, q, s] = [roles.h, roles.b, roles.q, roles.s].map(|n| joint.var(n));
    let (h, b, q, s) = (h?, b?, q?, s?);
    let (s0, s1) = binary_states(joint, s)?;
    let hv: Vec<f64> = (0..joint.sizes()[h]).map(|k| joint.value(h, k)).collect::<Result<_>>()?;
    let h_given = Cond::new(joint, &[h], &[b, q, s]);
    let bq_given = Cond::new(joint, &[b, q], &[s]);
    let what = "the natural indirect effect";
    let (mut a0, mut a1) = (0.0, 0.0);
    for sb in 0..joint.sizes()[b] {
        for sq in 0..joint.sizes()[q] {
            let w0 = bq_given.get(&[sb, sq], &[s0], what)?;
            let w1 = bq_given.get(&[sb, sq], &[s1], what)?;
            if w0.negligible() && w1.negligible() {
                continue;
            }
            let mut e = 0.0;
            for (sh, v) in hv.iter().enumerate() {
                e += v * h_given.get(&[sh], &[sb, sq, s1], what)?;
            }
            a0 += e * w0;
            a1 += e * w1;
        }
    }
    Ok(IndirectEffect { women_assumed_men: a0, men: a1, value: a0 - a1, citation: INDIRECT_CITATION.into() })
}

/// Role bindings for instrument I, treatment T and response R.
#[derive(Clone, Debug)]
pub struct IvRoles<'a> {
    pub i: &'a str,
    pub t: &'a str,
    pub r: &'a str,
}

#[derive(Clone, Debug, Serialize)]
pub struct IvTerm {
    pub level: String,
    pub theta: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IvResult {
    pub theta: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub valid: bool,
    /// One term per non-base instrument level (a single term for binary I).
    pub terms: Vec<IvTerm>,
    pub citation: String,
}

pub const IV_CITATION: &str = "instrumental-variable ratio and its complier interpretation";

/// Per-level P(I=i), E(T|I=i), E(R|I=i).
struct LevelMoments {
    labels: Vec<String>,
    p: Vec<f64>,
    et: Vec<f64>,
    er: Vec<f64>,
}

fn joint_moments(joint: &JointTable<f64>, roles: &IvRoles) -> Result<LevelMoments> {
    let (i, t, r) = (joint.var(roles.i)?, joint.var(roles.t)?, joint.var(roles.r)?);
    let m = joint.marginal(&[i, t, r]);
    let s = m.sizes().to_vec();
    let tv: Vec<f64> = (0..s[1]).map(|k| joint.value(t, k)).collect::<Result<_>>()?;
    let rv: Vec<f64> = (0..s[2]).map(|k| joint.value(r, k)).collect::<Result<_>>()?;
    let mut lm = LevelMoments { labels: joint.domains()[i].clone(), p: vec![0.0; s[0]], et: vec![0.0; s[0]], er: vec![0.0; s[0]] };
    for a in 0..s[0] {
        for b in 0..s[1] {
            for c in 0..s[2] {
                let p = *m.at(&[a, b, c]);
                lm.p[a] += p;
                lm.et[a] += p * tv[b];
                lm.er[a] += p * rv[c];
            }
        }
        if lm.p[a] > 0.0 {
            lm.et[a] /= lm.p[a];
            lm.er[a] /= lm.p[a];
        }
    }
    Ok(lm)
}

fn data_moments(data: &Dataset, roles: &IvRoles) -> Result<LevelMoments> {
    let ci = data.col(roles.i)?;
    let tv = data.numeric(roles.t)?;
    let rv = data.numeric(roles.r)?;
    let labels = data.domains[ci].clone();
    let k = labels.len();
    let mut lm = LevelMoments { labels, p: vec![0.0; k], et: vec![0.0; k], er: vec![0.0; k] };
    for (row, (t, r)) in data.rows.iter().zip(tv.iter().zip(&rv)) {
        let a = row[ci];
        lm.p[a] += 1.0;
        lm.et[a] += t;
        lm.er[a] += r;
    }
    for a in 0..k {
        if lm.p[a] > 0.0 {
            lm.et[a] /= lm.p[a];
            lm.er[a] /= lm.p[a];
        }
        lm.p[a] /= data.len().max(1) as f64;
    }
    Ok(lm)
}

fn iv_from_moments(lm: &LevelMoments, base: &str) -> Result<IvResult> {
    let b = lm
        .labels
        .iter()
        .position(|l| l == base)
        .ok_or_else(|| Error::InvalidArgument(format!("instrument has no level {base}")))?;
    if lm.p[b] <= 0.0 {
        return Err(Error::Positivity(format!("instrument level {base} never occurs")));
    }
    let mut terms = vec![];
    for k in 0..lm.labels.len() {
        if k == b || lm.p[k] <= 0.0 {
            continue;
        }
        let numerator = lm.er[k] - lm.er[b];
        let denominator = lm.et[k] - lm.et[b];
        if denominator.abs() <= WEAK_IV_TOL {
            return Err(Error::WeakInstrument(format!(
                "E(T|I={}) - E(T|I={base}) = {denominator:e} for level k={}",
                lm.labels[k],
                terms.len() + 1
            )));
        }
        terms.push(IvTerm { level: lm.labels[k].clone(), theta: numerator / denominator, numerator, denominator, weight: lm.p[k] * denominator });
    }
    if terms.is_empty() {
        return Err(Error::WeakInstrument("instrument takes a single value".into()));
    }
    let wsum: f64 = terms.iter().map(|t| t.weight).sum();
    if wsum.abs() <= WEAK_IV_TOL {
        return Err(Error::WeakInstrument("level weights sum to zero".into()));
    }
    for t in &mut terms {
        t.weight /= wsum;
    }
    let theta: f64 = terms.iter().map(|t| t.theta * t.weight).sum();
    let (numerator, denominator) = if terms.len() == 1 { (terms[0].numerator, terms[0].denominator) } else { (theta * wsum, wsum) };
    Ok(IvResult { theta, numerator, denominator, valid: true, terms, citation: IV_CITATION.into() })
}

fn binary_base(labels: &[String]) -> Result<&'static str> {
    if labels.len() != 2 || !labels.iter().any(|l| l == "0") || !labels.iter().any(|l| l == "1") {
        return Err(Error::InvalidArgument("binary instrument with values 0 and 1 required".into()));
    }
    Ok("0")
}

/// θ = {E(R|I=1) − E(R|I=0)} / {E(T|I=1) − E(T|I=0)} on an exact joint.
pub fn iv_theta(joint: &JointTable<f64>, roles: &IvRoles) -> Result<IvResult> {
    let lm = joint_moments(joint, roles)?;
    iv_from_moments(&lm, binary_base(&lm.labels)?)
}

/// θ with expectations replaced by sample averages.
pub fn iv_theta_data(data: &Dataset, roles: &IvRoles) -> Result<IvResult> {
    let lm = data_moments(data, roles)?;
    iv_from_moments(&lm, binary_base(&lm.labels)?)
}

/// θₖ for every level iₖ ≠ i₀ and Θ = Σ θₖ pₖ.
pub fn iv_multi(joint: &JointTable<f64>, roles: &IvRoles, base: &str) -> Result<IvResult> {
    iv_from_moments(&joint_moments(joint, roles)?, base)
}

pub fn iv_multi_data(data: &Dataset, roles: &IvRoles, base: &str) -> Result<IvResult> {
    iv_from_moments(&data_moments(data, roles)?, base)
}

#[derive(Clone, Debug, Serialize)]
pub struct TslsResult {
    pub n: usize,
    /// cov(I,R)/cov(I,T).
    pub beta: f64,
    /// Asymptotic standard error of `beta`.
    pub se: f64,
    /// First-stage slope cov(I,T)/var(I).
    pub b_hat: f64,
    /// Reduced-form slope cov(I,R)/var(I).
    pub big_b_hat: f64,
    /// big_b_hat / b_hat, equal to `beta` by algebra.
    pub ratio: f64,
    /// Ordinary least-squares slope of R on T, for comparison.
    pub ols: f64,
    pub citation: String,
}

pub const TSLS_CITATION: &str = "instrumental-variable regression / two-stage least squares";
pub const TSLS_IDENTITY_TOL: f64 = 1e-10;

fn cov(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n
}

/// β̌ from raw columns; I is centred internally.
pub fn iv_tsls_columns(i: &[f64], t: &[f64], r: &[f64]) -> Result<TslsResult> {
    let n = i.len();
    if n < 2 || t.len() != n || r.len() != n {
        return Err(Error::InvalidArgument("columns must have equal length of at least 2".into()));
    }
    let (cit, cir, vi, vt) = (cov(i, t), cov(i, r), cov(i, i), cov(t, t));
    if cit.abs() <= WEAK_IV_TOL || vi <= 0.0 {
        return Err(Error::WeakInstrument(format!("cov(I,T) = {cit:e}")));
    }
    let beta = cir / cit;
    let b_hat = cit / vi;
    let big_b_hat = cir / vi;
    let ratio = big_b_hat / b_hat;
    if (ratio - beta).abs() > TSLS_IDENTITY_TOL * beta.abs().max(1.0) {
        return Err(Error::Constraint(format!("two-stage identity failed: {ratio} vs {beta}")));
    }
    let mt = t.iter().sum::<f64>() / n as f64;
    let mr = r.iter().sum::<f64>() / n as f64;
    let alpha = mr - beta * mt;
    let s2 = r.iter().zip(t).map(|(y, x)| (y - alpha - beta * x).powi(2)).sum::<f64>() / n as f64;
    let se = (s2 * vi / (n as f64 * cit * cit)).sqrt();
    let ols = if vt > 0.0 { cov(t, r) / vt } else { f64::NAN };
    Ok(TslsResult { n, beta, se, b_hat, big_b_hat, ratio, ols, citation: TSLS_CITATION.into() })
}

pub fn iv_tsls(data: &Dataset, roles: &IvRoles) -> Result<TslsResult> {
    iv_tsls_columns(&data.numeric(roles.i)?, &data.numeric(roles.t)?, &data.numeric(roles.r)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct OddsStratum {
    pub x: String,
    /// P(T=1|R=1,x).
    pub p: f64,
    /// P(T=1|R=0,x).
    pub q: f64,
    /// O(R=1|T=1,x) / O(R=1|T=0,x).
    pub e_conditional: f64,
    /// p(1−q) / (q(1−p)).
    pub e_exposure: f64,
    /// P(x|R=1), or the case-side frequency for estimates.
    pub weight: f64,
    /// Standard error of log e, for estimates.
    pub se_log: Option<f64>,
    /// Exposed cases, unexposed cases, exposed controls, unexposed controls.
    pub counts: Option<[u64; 4]>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OddsRatioReport {
    pub strata: Vec<OddsStratum>,
    /// E[e(X)|R=1].
    pub overall: Option<f64>,
    pub warnings: Vec<String>,
    pub citation: String,
}

pub const ODDS_CITATION: &str = "odds ratio conditional on the background, in both exposure and disease form";

/// Exposure-odds form p(1−q)/(q(1−p)).
pub fn odds_ratio_exposure(p: f64, q: f64) -> f64 {
    p * (1.0 - q) / (q * (1.0 - p))
}

/// Disease-odds form from a = P(R=1|T=1), b = P(R=1|T=0).
pub fn odds_ratio_conditional(a: f64, b: f64) -> f64 {
    (a / (1.0 - a)) / (b / (1.0 - b))
}

/// Both odds-ratio forms per stratum of X from an exact joint.
pub fn odds_ratio(joint: &JointTable<f64>, r: &str, t: &str, x: &[&str]) -> Result<OddsRatioReport> {
    let (rv, tv) = (joint.var(r)?, joint.var(t)?);
    let (r0, r1) = binary_states(joint, rv)?;
    let (t0, t1) = binary_states(joint, tv)?;
    let xv = joint.vars(x)?;
    let all: Vec<usize> = xv.iter().copied().chain([tv, rv]).collect();
    let m = joint.marginal(&all);
    let xsz: Vec<usize> = xv.iter().map(|&v| joint.sizes()[v]).collect();
    let pr1 = joint.prob(&[(rv, r1)]);
    if pr1.negligible() {
        return Err(Error::Positivity(format!("P({r}=1) = 0")));
    }
    let mut strata = vec![];
    for xc in crate::identify::configs(&xsz) {
        let cell = |ts: usize, rs: usize| -> f64 {
            let c: Vec<usize> = xc.iter().copied().chain([ts, rs]).collect();
            *m.at(&c)
        };
        let (n11, n10, n01, n00) = (cell(t1, r1), cell(t1, r0), cell(t0, r1), cell(t0, r0));
        let px = n11 + n10 + n01 + n00;
        if px.negligible() {
            continue;
        }
        let label = xc.iter().zip(&xv).map(|(&s, &v)| format!("{}={}", joint.names()[v], joint.domains()[v][s])).collect::<Vec<_>>().join(",");
        if [n11, n10, n01, n00].iter().any(|c| c.negligible()) {
            return Err(Error::Positivity(format!("empty (exposure, disease) cell in stratum {label}")));
        }
        let p = n11 / (n11 + n01);
        let q = n10 / (n10 + n00);
        let a = n11 / (n11 + n10);
        let b = n01 / (n01 + n00);
        strata.push(OddsStratum {
            x: label,
            p,
            q,
            e_conditional: odds_ratio_conditional(a, b),
            e_exposure: odds_ratio_exposure(p, q),
            weight: (n11 + n01) / pr1,
            se_log: None,
            counts: None,
        });
    }
    let overall = Some(strata.iter().map(|s| s.e_exposure * s.weight).sum());
    Ok(OddsRatioReport { strata, overall, warnings: vec![], citation: ODDS_CITATION.into() })
}
