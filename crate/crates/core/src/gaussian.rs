//! Linear-Gaussian structural models: exact moments, Gaussian conditioning,
//! intervention, and the continuous Simpson and Lord examples.

use crate::error::{invalid, Error, Result};
use crate::exogenous::{split_streams, DigitStream};
use crate::graph::Dag;
use crate::scm::{NodeSpec, Scm};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

pub const PSD_FLOOR: f64 = -1e-9;
pub const SINGULAR_DET: f64 = 1e-12;

/// x_i = intercept_i + sum_j coef_ij x_j + N(0, noise_i), with j ranging over the parents of i.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearGaussianScm {
    dag: Dag,
    intercept: Vec<f64>,
    coef: Vec<Vec<f64>>,
    noise: Vec<f64>,
}

impl LinearGaussianScm {
    /// All intercepts, coefficients and variances start at zero.
    pub fn new(dag: Dag) -> Self {
        let n = dag.len();
        LinearGaussianScm { dag, intercept: vec![0.0; n], coef: vec![vec![0.0; n]; n], noise: vec![0.0; n] }
    }

    pub fn set(&mut self, node: &str, intercept: f64, coefs: &[(&str, f64)], noise_variance: f64) -> Result<()> {
        let i = self.dag.id(node)?;
        if !(noise_variance >= 0.0) || !noise_variance.is_finite() {
            return invalid(format!("noise variance of {node} must be a non-negative number"));
        }
        self.intercept[i] = intercept;
        self.noise[i] = noise_variance;
        self.coef[i] = vec![0.0; self.dag.len()];
        for (p, c) in coefs {
            let j = self.dag.id(p)?;
            if !self.dag.parents(i).contains(&j) {
                return invalid(format!("{p} is not a parent of {node}"));
            }
            self.coef[i][j] = *c;
        }
        Ok(())
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn intercept(&self, i: usize) -> f64 {
        self.intercept[i]
    }

    pub fn coefficient(&self, i: usize, parent: usize) -> f64 {
        self.coef[i][parent]
    }

    pub fn noise_variance(&self, i: usize) -> f64 {
        self.noise[i]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussianLaw {
    pub names: Vec<String>,
    #[serde(serialize_with = "ser_vec")]
    pub mean: DVector<f64>,
    #[serde(serialize_with = "ser_mat")]
    pub cov: DMatrix<f64>,
}

fn ser_vec<S: serde::Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

fn ser_mat<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    s.collect_seq(rows)
}

impl GaussianLaw {
    pub fn idx(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variable {name}")))
    }

    pub fn mean_of(&self, name: &str) -> Result<f64> {
        Ok(self.mean[self.idx(name)?])
    }

    pub fn var_of(&self, name: &str) -> Result<f64> {
        let i = self.idx(name)?;
        Ok(self.cov[(i, i)])
    }

    pub fn cov_of(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.cov[(self.idx(a)?, self.idx(b)?)])
    }

    /// Smallest eigenvalue of the covariance.
    pub fn min_eigenvalue(&self) -> f64 {
        if self.cov.nrows() == 0 {
            return 0.0;
        }
        self.cov.clone().symmetric_eigenvalues().min()
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= PSD_FLOOR
    }
}

/// Forward propagation of means and covariances in topological order.
pub fn lg_moments(model: &LinearGaussianScm) -> Result<GaussianLaw> {
    let dag = &model.dag;
    let n = dag.len();
    let order = dag.topological_order_ids()?;
    let mut mean = DVector::zeros(n);
    let mut cov = DMatrix::zeros(n, n);
    let mut done: Vec<usize> = vec![];
    for &i in &order {
        let ps = dag.parents(i);
        mean[i] = model.intercept[i] + ps.iter().map(|&p| model.coef[i][p] * mean[p]).sum::<f64>();
        for &k in &done {
            let c: f64 = ps.iter().map(|&p| model.coef[i][p] * cov[(p, k)]).sum();
            cov[(i, k)] = c;
            cov[(k, i)] = c;
        }
        let mut v = model.noise[i];
        for &p in ps {
            for &q in ps {
                v += model.coef[i][p] * model.coef[i][q] * cov[(p, q)];
            }
        }
        cov[(i, i)] = v;
        done.push(i);
    }
    Ok(GaussianLaw { names: dag.names().to_vec(), mean, cov })
}

/// Law of the remaining variables given exact values for `on`.
pub fn lg_condition(law: &GaussianLaw, on: &[(&str, f64)]) -> Result<GaussianLaw> {
    let b: Vec<usize> = on.iter().map(|(n, _)| law.idx(n)).collect::<Result<_>>()?;
    let a: Vec<usize> = (0..law.names.len()).filter(|i| !b.contains(i)).collect();
    if b.is_empty() {
        return Ok(law.clone());
    }
    let sbb = law.cov.select_rows(&b).select_columns(&b);
    let det = sbb.determinant();
    if det.abs() <= SINGULAR_DET {
        return Err(Error::SingularConditioning(format!(
            "covariance of {} has determinant {det}",
            on.iter().map(|x| x.0).collect::<Vec<_>>().join(",")
        )));
    }
    let inv = sbb.try_inverse().ok_or_else(|| Error::SingularConditioning("inversion failed".into()))?;
    let sab = law.cov.select_rows(&a).select_columns(&b);
    let saa = law.cov.select_rows(&a).select_columns(&a);
    let mb = DVector::from_iterator(b.len(), b.iter().map(|&i| law.mean[i]));
    let vb = DVector::from_iterator(b.len(), on.iter().map(|x| x.1));
    let ma = DVector::from_iterator(a.len(), a.iter().map(|&i| law.mean[i]));
    let k = &sab * &inv;
    let mean = ma + &k * (vb - mb);
    let mut cov = saa - &k * sab.transpose();
    cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianLaw { names: a.iter().map(|&i| law.names[i].clone()).collect(), mean, cov })
}

/// Coefficients of E(target | on) as a linear function of the `on` values: (intercept, slopes).
pub fn lg_regression(law: &GaussianLaw, target: &str, on: &[&str]) -> Result<(f64, Vec<f64>)> {
    let zero: Vec<(&str, f64)> = on.iter().map(|n| (*n, 0.0)).collect();
    let base = lg_condition(law, &zero)?.mean_of(target)?;
    let mut slopes = vec![];
    for k in 0..on.len() {
        let mut at: Vec<(&str, f64)> = zero.clone();
        at[k].1 = 1.0;
        slopes.push(lg_condition(law, &at)?.mean_of(target)? - base);
    }
    Ok((base, slopes))
}

/// Make `node` the constant `value`.
pub fn lg_intervene(model: &LinearGaussianScm, node: &str, value: f64) -> Result<LinearGaussianScm> {
    let i = model.dag.id(node)?;
    let names = model.dag.names().to_vec();
    let edges: Vec<(String, String)> = model.dag.edges().into_iter().filter(|(_, b)| b != node).collect();
    let dag = Dag::new(&names, &edges)?;
    let mut out = model.clone();
    out.dag = dag;
    out.intercept[i] = value;
    out.coef[i] = vec![0.0; names.len()];
    out.noise[i] = 0.0;
    Ok(out)
}

/// Standard normal quantile.
pub fn normal_quantile(u: f64) -> f64 {
    let u = u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(u)
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// Draw `n` rows (columns in node order); node i reads diagonal row i+1 and uses the normal quantile.
pub fn lg_sample(model: &LinearGaussianScm, source: &DigitStream, n: usize) -> Result<Vec<Vec<f64>>> {
    let k = model.dag.len();
    let order = model.dag.topological_order_ids()?;
    let mut streams = split_streams(source, k.max(1))?;
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut x = vec![0.0; k];
        for &i in &order {
            let z = normal_quantile(streams[i].next_uniform());
            let m = model.intercept[i] + model.dag.parents(i).iter().map(|&p| model.coef[i][p] * x[p]).sum::<f64>();
            x[i] = m + model.noise[i].sqrt() * z;
        }
        rows.push(x);
    }
    Ok(rows)
}

/// Parameters of the continuous Simpson example.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimpsonContParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub mu: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
}

impl SimpsonContParams {
    pub fn check(&self) -> Result<()> {
        for (n, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v > 0.0) {
                return invalid(format!("{n} must be positive"));
            }
        }
        for (n, v) in [("sigma1", self.sigma1), ("sigma2", self.sigma2), ("sigma3", self.sigma3)] {
            if !(v > 0.0) {
                return invalid(format!("{n} must be positive"));
            }
        }
        if !self.mu.is_finite() {
            return invalid("mu must be finite");
        }
        Ok(())
    }

    /// sqrt(sigma2^2 + 2 gamma^2 sigma3^2), the standard deviation of X.
    pub fn sd_x(&self) -> f64 {
        (self.sigma2.powi(2) + 2.0 * self.gamma.powi(2) * self.sigma3.powi(2)).sqrt()
    }

    /// alpha sd_x / (2 sigma3) - beta.
    pub fn closed_form_slope(&self) -> f64 {
        self.alpha * self.sd_x() / (2.0 * self.sigma3) - self.beta
    }
}

/// X covariate, T treatment, R response; the joint law of (X, T) has the stated
/// moments and R = alpha X - beta T + noise.
pub fn simpson_cont_model(p: &SimpsonContParams) -> Result<LinearGaussianScm> {
    p.check()?;
    let dag = Dag::new(&["X", "T", "R"], &[("X", "T"), ("X", "R"), ("T", "R")])?;
    let mut m = LinearGaussianScm::new(dag);
    let vx = p.sd_x().powi(2);
    let c = p.sigma3 / p.sd_x();
    m.set("X", p.gamma * p.mu, &[], vx)?;
    m.set("T", p.mu - c * p.gamma * p.mu, &[("X", c)], p.sigma3.powi(2))?;
    m.set("R", 0.0, &[("X", p.alpha), ("T", -p.beta)], p.sigma1.powi(2))?;
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimpsonContReport {
    pub observational_slope: f64,
    pub closed_form_slope: f64,
    pub causal_slope: f64,
    pub paradox: bool,
}

pub const SLOPE_TOL: f64 = 1e-12;

pub fn simpson_cont_report(p: &SimpsonContParams) -> Result<SimpsonContReport> {
    let m = simpson_cont_model(p)?;
    let law = lg_moments(&m)?;
    let obs = lg_condition(&law, &[("T", 1.0)])?.mean_of("R")? - lg_condition(&law, &[("T", 0.0)])?.mean_of("R")?;
    let at = |t: f64| -> Result<f64> { lg_moments(&lg_intervene(&m, "T", t)?)?.mean_of("R") };
    let causal = at(1.0)? - at(0.0)?;
    Ok(SimpsonContReport {
        observational_slope: obs,
        closed_form_slope: p.closed_form_slope(),
        causal_slope: causal,
        paradox: obs > SLOPE_TOL,
    })
}

/// Parameters of Lord's example: group means, common sd, P(T=1), persistence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LordParams {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma: f64,
    pub p: f64,
    pub rho: f64,
}

impl LordParams {
    pub fn check(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return invalid("sigma must be positive");
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return invalid("p must lie in (0,1)");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return invalid("rho must lie in (0,1)");
        }
        Ok(())
    }
}

/// One group: X ~ N(mu, sigma^2), R = (1-rho) mu + rho X + N(0, (1-rho^2) sigma^2).
pub fn lord_component(mu: f64, sigma: f64, rho: f64) -> Result<LinearGaussianScm> {
    let dag = Dag::new(&["X", "R"], &[("X", "R")])?;
    let mut m = LinearGaussianScm::new(dag);
    m.set("X", mu, &[], sigma * sigma)?;
    m.set("R", (1.0 - rho) * mu, &[("X", rho)], (1.0 - rho * rho) * sigma * sigma)?;
    Ok(m)
}

/// Two groups weighted by p and 1-p.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub components: Vec<LinearGaussianScm>,
}

pub fn lord_model(p: &LordParams) -> Result<GaussianMixture> {
    p.check()?;
    Ok(GaussianMixture {
        weights: vec![p.p, 1.0 - p.p],
        components: vec![lord_component(p.mu1, p.sigma, p.rho)?, lord_component(p.mu2, p.sigma, p.rho)?],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormalLaw {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LordReport {
    /// Law of R - X within each group.
    pub gain: Vec<NormalLaw>,
    /// Law of R within each group.
    pub groups: Vec<NormalLaw>,
    /// E(R | X=x, T=1) - E(R | X=x, T=2), the same for every x.
    pub difference: f64,
    pub mean_r: f64,
    pub var_r: f64,
}

pub fn lord_report(p: &LordParams) -> Result<LordReport> {
    let mix = lord_model(p)?;
    let mut gain = vec![];
    let mut groups = vec![];
    let mut intercepts = vec![];
    for comp in &mix.components {
        let law = lg_moments(comp)?;
        let (mx, mr) = (law.mean_of("X")?, law.mean_of("R")?);
        let (vx, vr, cxr) = (law.var_of("X")?, law.var_of("R")?, law.cov_of("X", "R")?);
        gain.push(NormalLaw { mean: mr - mx, variance: vr + vx - 2.0 * cxr });
        groups.push(NormalLaw { mean: mr, variance: vr });
        intercepts.push(lg_regression(&law, "R", &["X"])?.0);
    }
    let mean_r = mix.weights.iter().zip(&groups).map(|(w, g)| w * g.mean).sum::<f64>();
    let second = mix.weights.iter().zip(&groups).map(|(w, g)| w * (g.variance + g.mean * g.mean)).sum::<f64>();
    Ok(LordReport { gain, groups, difference: intercepts[0] - intercepts[1], mean_r, var_r: second - mean_r * mean_r })
}

pub const DEFAULT_BINS: usize = 16;

/// Discrete approximation: each node gets `bins` equal cells over its mean +/- 4 sd (tails folded
/// into the end cells); labels are cell midpoints and each table row uses the parents' midpoints.
pub fn discretize(model: &LinearGaussianScm, bins: usize) -> Result<Scm> {
    if bins < 2 {
        return invalid("need at least two bins");
    }
    let law = lg_moments(model)?;
    let dag = &model.dag;
    let n = dag.len();
    let mut grids: Vec<(f64, f64, Vec<f64>)> = vec![];
    for i in 0..n {
        let sd = law.cov[(i, i)].max(0.0).sqrt();
        let m = law.mean[i];
        if sd == 0.0 {
            grids.push((m, 0.0, vec![m]));
        } else {
            let lo = m - 4.0 * sd;
            let w = 8.0 * sd / bins as f64;
            grids.push((lo, w, (0..bins).map(|k| lo + (k as f64 + 0.5) * w).collect()));
        }
    }
    let mut nodes = vec![];
    for i in 0..n {
        let ps: Vec<usize> = dag.parents(i).to_vec();
        let psizes: Vec<usize> = ps.iter().map(|&p| grids[p].2.len()).collect();
        let rows: usize = psizes.iter().product();
        let (lo, w, mids) = &grids[i];
        let mut table = vec![];
        for r in 0..rows {
            let st = crate::scm::mixed_decode(r, &psizes);
            let mean = model.intercept[i]
                + ps.iter().zip(&st).map(|(&p, &s)| model.coef[i][p] * grids[p].2[s]).sum::<f64>();
            let sd = model.noise[i].sqrt();
            let k = mids.len();
            let mut row = vec![0.0; k];
            if k == 1 {
                row[0] = 1.0;
            } else if sd == 0.0 {
                let cell = (((mean - lo) / w).floor().max(0.0) as usize).min(k - 1);
                row[cell] = 1.0;
            } else {
                let mut prev = 0.0;
                for (c, cell) in row.iter_mut().enumerate() {
                    let upper = if c + 1 == k { 1.0 } else { normal_cdf((lo + (c + 1) as f64 * w - mean) / sd) };
                    *cell = upper - prev;
                    prev = upper;
                }
            }
            table.push(row);
        }
        let domain: Vec<String> = mids.iter().map(|x| format!("{x:.6}")).collect();
        let parents: Vec<String> = ps.iter().map(|&p| dag.name(p).to_string()).collect();
        nodes.push(NodeSpec { name: dag.name(i).to_string(), domain, parents, table, latent: false });
    }
    Scm::new(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::joint_distribution;

    fn base() -> SimpsonContParams {
        SimpsonContParams { alpha: 1.0, beta: 0.2, gamma: 1.0, mu: 0.0, sigma1: 1.0, sigma2: 1.0, sigma3: 1.0 }
    }

    #[test]
    fn simpson_moments() {
        let law = lg_moments(&simpson_cont_model(&base()).unwrap()).unwrap();
        assert!((law.var_of("X").unwrap() - 3.0).abs() < 1e-12);
        assert!((law.cov_of("X", "T").unwrap() - 3f64.sqrt()).abs() < 1e-12);
        assert!((law.var_of("T").unwrap() - 2.0).abs() < 1e-12);
        assert!(law.mean_of("R").unwrap().abs() < 1e-15);
        assert!(law.is_psd());
    }

    #[test]
    fn mean_of_r_with_nonzero_mu() {
        let mut p = base();
        p.mu = 2.0;
        p.gamma = 1.5;
        let law = lg_moments(&simpson_cont_model(&p).unwrap()).unwrap();
        assert!((law.mean_of("R").unwrap() - (p.alpha * p.gamma - p.beta) * p.mu).abs() < 1e-12);
        assert!((law.mean_of("T").unwrap() - p.mu).abs() < 1e-12);
    }

    #[test]
    fn zero_coefficients_give_diagonal() {
        let dag = Dag::new(&["A", "B"], &[("A", "B")]).unwrap();
        let mut m = LinearGaussianScm::new(dag);
        m.set("A", 1.0, &[], 2.0).unwrap();
        m.set("B", 0.0, &[("A", 0.0)], 3.0).unwrap();
        let law = lg_moments(&m).unwrap();
        assert_eq!(law.cov, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]));
    }

    #[test]
    fn slopes_and_flag() {
        let r = simpson_cont_report(&base()).unwrap();
        let want = 3f64.sqrt() / 2.0 - 0.2;
        assert!((r.observational_slope - want).abs() < 1e-12);
        assert!((r.closed_form_slope - want).abs() < 1e-15);
        assert!((r.causal_slope + 0.2).abs() < 1e-12);
        assert!(r.paradox);
        let mut p = base();
        p.beta = 10.0;
        assert!(!simpson_cont_report(&p).unwrap().paradox);
        p.beta = 3f64.sqrt() / 2.0;
        let r = simpson_cont_report(&p).unwrap();
        assert!(r.observational_slope.abs() < 1e-12);
        assert!(!r.paradox);
        p.sigma2 = 0.0;
        assert!(simpson_cont_report(&p).is_err());
    }

    #[test]
    fn conditioning_on_independent_node() {
        let dag = Dag::new(&["A", "B"], &[]).unwrap();
        let mut m = LinearGaussianScm::new(dag);
        m.set("A", 1.0, &[], 2.0).unwrap();
        m.set("B", -1.0, &[], 5.0).unwrap();
        let law = lg_moments(&m).unwrap();
        let c = lg_condition(&law, &[("A", 7.0)]).unwrap();
        assert_eq!(c.names, vec!["B"]);
        assert!((c.mean[0] + 1.0).abs() < 1e-15 && (c.cov[(0, 0)] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn singular_conditioning() {
        let dag = Dag::new(&["A", "B"], &[("A", "B")]).unwrap();
        let mut m = LinearGaussianScm::new(dag);
        m.set("A", 0.0, &[], 1.0).unwrap();
        m.set("B", 0.0, &[("A", 1.0)], 0.0).unwrap();
        let law = lg_moments(&m).unwrap();
        assert!(matches!(lg_condition(&law, &[("A", 0.0), ("B", 0.0)]), Err(Error::SingularConditioning(_))));
    }

    #[test]
    fn intervention_properties() {
        let m = simpson_cont_model(&base()).unwrap();
        let a = lg_intervene(&lg_intervene(&m, "T", 1.0).unwrap(), "X", 2.0).unwrap();
        let b = lg_intervene(&lg_intervene(&m, "X", 2.0).unwrap(), "T", 1.0).unwrap();
        assert_eq!(a, b);
        let sink = lg_moments(&lg_intervene(&m, "R", 5.0).unwrap()).unwrap();
        let orig = lg_moments(&m).unwrap();
        assert!((sink.cov_of("X", "T").unwrap() - orig.cov_of("X", "T").unwrap()).abs() < 1e-15);
        assert!(sink.is_psd());
    }

    #[test]
    fn lord_values() {
        let p = LordParams { mu1: 0.0, mu2: 1.0, sigma: 1.0, p: 0.5, rho: 0.5 };
        let r = lord_report(&p).unwrap();
        for g in &r.gain {
            assert!(g.mean.abs() < 1e-12 && (g.variance - 1.0).abs() < 1e-12);
        }
        assert!((r.groups[0].mean - 0.0).abs() < 1e-12 && (r.groups[1].mean - 1.0).abs() < 1e-12);
        assert!((r.groups[0].variance - 1.0).abs() < 1e-12);
        assert!((r.difference + 0.5).abs() < 1e-12);
        assert!((r.mean_r - 0.5).abs() < 1e-12 && (r.var_r - 1.25).abs() < 1e-12);
        let same = lord_report(&LordParams { mu2: 0.0, ..p }).unwrap();
        assert!(same.difference.abs() < 1e-15 && same.groups[0] == same.groups[1]);
        let tight = lord_report(&LordParams { rho: 0.999_999, ..p }).unwrap();
        assert!(tight.gain[0].variance < 1e-5);
        assert!(lord_report(&LordParams { p: 1.0, ..p }).is_err());
    }

    #[test]
    fn discretized_lord_component_tracks_moments() {
        let m = lord_component(1.0, 1.0, 0.5).unwrap();
        let d = discretize(&m, DEFAULT_BINS).unwrap();
        let j = joint_distribution(&d).unwrap();
        let r = j.marginal_by_name(&["R"]).unwrap();
        let mean: f64 = (0..r.probs().len()).map(|k| r.probs()[k] * r.value(0, k).unwrap()).sum();
        assert!((mean - 1.0).abs() < 0.05);
    }
}
