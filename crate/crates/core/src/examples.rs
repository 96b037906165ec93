//! Parameterized builders for the worked examples. Randomized builders fill their
//! conditional tables from a seeded ChaCha8 generator with entries bounded away from zero.

use crate::error::{invalid, Error, Result};
use crate::gaussian::{lord_model, simpson_cont_model, GaussianMixture, LinearGaussianScm, LordParams, SimpsonContParams};
use crate::graph::Dag;
use crate::scm::{binary_node, point_row, random_scm, NodeSpec, Scm};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;

/// Lower bound for randomly drawn table entries before normalization.
pub const RANDOM_FLOOR: f64 = 0.05;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ExampleSpec {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
}

impl ExampleSpec {
    pub fn new(name: &str) -> Self {
        ExampleSpec { name: name.into(), ..Default::default() }
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.into(), value);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Discrete(Scm),
    Gaussian(LinearGaussianScm),
    Mixture(GaussianMixture),
}

impl Model {
    pub fn discrete(self) -> Result<Scm> {
        match self {
            Model::Discrete(s) => Ok(s),
            _ => invalid("example is not a discrete model"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamDoc {
    pub name: &'static str,
    pub default: f64,
    pub range: &'static str,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExampleInfo {
    pub name: &'static str,
    pub kind: &'static str,
    pub description: &'static str,
    pub citation: &'static str,
    pub randomized: bool,
    pub params: Vec<ParamDoc>,
}

const fn p(name: &'static str, default: f64, range: &'static str) -> ParamDoc {
    ParamDoc { name, default, range }
}

const FIG1_NODES: [&str; 8] = ["X1", "X2", "X3", "X4", "X5", "T", "X6", "R"];
const FIG1_EDGES: [(&str, &str); 10] = [
    ("X1", "X4"), ("X1", "X3"), ("X2", "X3"), ("X2", "X5"), ("X4", "T"),
    ("X3", "T"), ("X3", "R"), ("X5", "R"), ("T", "X6"), ("X6", "R"),
];
const FIG1A_NODES: [&str; 11] = ["X1", "X2", "X3", "X4", "X5", "X6", "X7", "X8", "X9", "T", "R"];
const FIG1A_EDGES: [(&str, &str); 18] = [
    ("X1", "X8"), ("X1", "X4"), ("X1", "X3"), ("X2", "X3"), ("X2", "X5"), ("X4", "X8"),
    ("X4", "T"), ("X3", "T"), ("X3", "R"), ("X3", "X9"), ("X5", "R"), ("T", "X8"),
    ("T", "X7"), ("T", "X6"), ("T", "X9"), ("X8", "X7"), ("X6", "R"), ("X9", "R"),
];

/// Stable-ordered catalog.
pub fn list_examples() -> Vec<ExampleInfo> {
    vec![
        ExampleInfo {
            name: "simpson_binary",
            kind: "discrete",
            description: "sex X, treatment T, recovery R with P(R=1|T=t,X=x)=p(t,x) and P(T=1|X=x)=q(x)",
            citation: "Simpson's paradox, binary recovery example",
            randomized: false,
            params: vec![
                p("p00", 0.2, "[0,1]"),
                p("p01", 0.7, "[0,1]"),
                p("p10", 0.5, "[0,1]"),
                p("p11", 0.9, "[0,1]"),
                p("beta", 0.8, "(0,1); q(0)=beta, q(1)=1-beta"),
                p("beta0", f64::NAN, "(0,1); overrides q(0)"),
                p("beta1", f64::NAN, "(0,1); overrides q(1)"),
                p("px0", 0.5, "(0,1); P(X=0)"),
                p("paradox", 1.0, "{0,1}; enforce ordering and the beta constraint"),
            ],
        },
        ExampleInfo {
            name: "simpson_continuous",
            kind: "gaussian",
            description: "linear-Gaussian covariate, treatment and response",
            citation: "Simpson's paradox, continuous example",
            randomized: false,
            params: vec![
                p("alpha", 2.0, "(0,inf)"),
                p("beta", 1.0, "(0,inf)"),
                p("gamma", 1.0, "(0,inf)"),
                p("mu", 1.0, "finite"),
                p("sigma1", 1.0, "(0,inf)"),
                p("sigma2", 1.0, "(0,inf)"),
                p("sigma3", 1.0, "(0,inf)"),
            ],
        },
        ExampleInfo {
            name: "lord",
            kind: "gaussian mixture",
            description: "two groups with initial weight X and final weight R",
            citation: "Lord's paradox",
            randomized: false,
            params: vec![
                p("mu1", 0.0, "finite"),
                p("mu2", 1.0, "finite"),
                p("sigma", 1.0, "(0,inf)"),
                p("p", 0.5, "(0,1)"),
                p("rho", 0.5, "(0,1)"),
            ],
        },
        ExampleInfo {
            name: "fig1",
            kind: "discrete",
            description: "second-level model on X1..X6, T, R with seeded random tables",
            citation: "back-door example graph",
            randomized: true,
            params: vec![p("card", 2.0, "integer >= 2; states per node")],
        },
        ExampleInfo {
            name: "fig1a",
            kind: "discrete",
            description: "extended graph on X1..X9, T, R with descendants of T",
            citation: "back-door complements graph",
            randomized: true,
            params: vec![p("card", 2.0, "integer >= 2; states per node")],
        },
        ExampleInfo {
            name: "two_stage",
            kind: "discrete",
            description: "two treatment stages X,T,R then X2,T2,R2",
            citation: "sequential treatments",
            randomized: true,
            params: vec![p("card", 2.0, "integer >= 2; states per node")],
        },
        ExampleInfo {
            name: "smoking",
            kind: "discrete",
            description: "latent genotype X, smoking Y, tar Z, cancer W",
            citation: "smoking and lung cancer, front-door example",
            randomized: true,
            params: vec![p("card", 2.0, "integer >= 2; states per node")],
        },
        ExampleInfo {
            name: "eelworms",
            kind: "discrete",
            description: "latent A, B; fumigation X; eelworm counts U, V, W; yield Y",
            citation: "eelworms example",
            randomized: true,
            params: vec![p("card", 2.0, "integer >= 2; states per node")],
        },
        ExampleInfo {
            name: "treatment_plan",
            kind: "discrete",
            description: "latent U; outcome Y1, second treatment Y2, test Y3, first treatment Y4",
            citation: "treatment plan example",
            randomized: true,
            params: vec![p("antibiotic", 0.0, "{0,1}; include the edge Y4->Y2")],
        },
        ExampleInfo {
            name: "hiring",
            kind: "discrete",
            description: "sex S, background B, qualifications Q, hiring H",
            citation: "hiring discrimination example",
            randomized: true,
            params: vec![],
        },
        ExampleInfo {
            name: "iv_binary",
            kind: "discrete",
            description: "instrument I, treatment T, response R, latent compliance type U (never/complier/always)",
            citation: "instrumental variable with monotone treatment assignment",
            randomized: true,
            params: vec![
                p("p_instrument", 0.5, "(0,1); P(I=1)"),
                p("never", 0.3, "[0,1]; P(U=never)"),
                p("complier", 0.5, "(0,1]; P(U=complier)"),
                p("always", 0.2, "[0,1]; P(U=always)"),
            ],
        },
        ExampleInfo {
            name: "case_control_pop",
            kind: "discrete",
            description: "population with P(T=1|R=1,x)=p and P(T=1|R=0,x)=q in every stratum",
            citation: "case-control study of a rare disease",
            randomized: false,
            params: vec![
                p("pi0", 0.2, "(0,1); P(R=1|X=0)"),
                p("pi1", 0.4, "(0,1); P(R=1|X=1)"),
                p("p", 0.6, "(0,1); exposure among cases"),
                p("q", 0.3, "(0,1); exposure among non-cases"),
            ],
        },
    ]
}

struct Params<'a> {
    given: &'a BTreeMap<String, f64>,
    info: &'a ExampleInfo,
}

impl Params<'_> {
    fn get(&self, k: &str) -> f64 {
        self.given.get(k).copied().unwrap_or_else(|| self.info.params.iter().find(|d| d.name == k).unwrap().default)
    }

    fn has(&self, k: &str) -> bool {
        self.given.contains_key(k)
    }

    fn prob(&self, k: &str, open: bool) -> Result<f64> {
        let v = self.get(k);
        let ok = if open { v > 0.0 && v < 1.0 } else { (0.0..=1.0).contains(&v) };
        if !ok {
            return invalid(format!("parameter {k} = {v} out of range"));
        }
        Ok(v)
    }

    fn card(&self) -> Result<usize> {
        let c = self.get("card");
        if c.fract() != 0.0 || !(2.0..=16.0).contains(&c) {
            return invalid(format!("card = {c} must be an integer in [2, 16]"));
        }
        Ok(c as usize)
    }
}

fn random_on(nodes: &[&str], edges: &[(&str, &str)], card: usize, latent: &[&str], seed: u64, name: &str) -> Result<Scm> {
    let dag = Dag::new(nodes, edges)?;
    let scm = random_scm(&dag, &vec![card; nodes.len()], RANDOM_FLOOR, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let specs: Vec<NodeSpec> = scm
        .nodes()
        .iter()
        .map(|n| if latent.contains(&n.name.as_str()) { n.clone().latent() } else { n.clone() })
        .collect();
    Ok(Scm::new(specs)?.with_meta(name, &format!("seeded random tables, seed {seed}")))
}

/// θ = (p(1,1) − p(0,0)) / (p(0,1) − p(1,0)).
pub fn simpson_theta(p: [[f64; 2]; 2]) -> f64 {
    (p[1][1] - p[0][0]) / (p[0][1] - p[1][0])
}

fn simpson_binary(ps: &Params) -> Result<Scm> {
    let mut p = [[0.0; 2]; 2];
    for (t, row) in p.iter_mut().enumerate() {
        for (x, v) in row.iter_mut().enumerate() {
            *v = ps.prob(&format!("p{t}{x}"), false)?;
        }
    }
    let asymmetric = ps.has("beta0") || ps.has("beta1");
    let (q0, q1) = if asymmetric {
        let beta = ps.prob("beta", true)?;
        let q0 = if ps.has("beta0") { ps.prob("beta0", true)? } else { beta };
        let q1 = if ps.has("beta1") { ps.prob("beta1", true)? } else { crate::prob::decimal_complement(beta) };
        (q0, q1)
    } else {
        let b = ps.prob("beta", true)?;
        (b, crate::prob::decimal_complement(b))
    };
    let px0 = ps.prob("px0", true)?;
    let paradox = ps.get("paradox");
    if paradox != 0.0 && paradox != 1.0 {
        return invalid("paradox must be 0 or 1");
    }
    if paradox == 1.0 {
        if !(p[1][1] > p[0][1] && p[0][1] > p[1][0] && p[1][0] > p[0][0]) {
            return Err(Error::Constraint(format!(
                "Simpson ordering p(1,1) > p(0,1) > p(1,0) > p(0,0) violated by {:?}",
                [p[1][1], p[0][1], p[1][0], p[0][0]]
            )));
        }
        if !asymmetric {
            let theta = simpson_theta(p);
            if q0 / q1 < theta {
                return Err(Error::Constraint(format!(
                    "beta constraint beta/(1-beta) >= theta violated: {} < {theta}",
                    q0 / q1
                )));
            }
        }
    }
    Ok(Scm::new(vec![
        binary_node("X", &[], &[crate::prob::decimal_complement(px0)]),
        binary_node("T", &["X"], &[q0, q1]),
        binary_node("R", &["T", "X"], &[p[0][0], p[0][1], p[1][0], p[1][1]]),
    ])?
    .with_meta("simpson_binary", "X sex (0 = women), T treatment, R recovery"))
}

fn iv_binary(ps: &Params, seed: u64) -> Result<Scm> {
    let pi = ps.prob("p_instrument", true)?;
    let w = [ps.prob("never", false)?, ps.prob("complier", false)?, ps.prob("always", false)?];
    if w[1] <= 0.0 {
        return Err(Error::Constraint("complier share must be positive for the instrument to move T".into()));
    }
    if (w.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::Constraint("never + complier + always must equal 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let types = ["never", "complier", "always"];
    // T per (I, U): never 0, complier I, always 1
    let mut t_rows = vec![];
    for i in 0..2 {
        for u in 0..3 {
            let t = match u {
                0 => 0,
                1 => i,
                _ => 1,
            };
            t_rows.push(point_row(2, t));
        }
    }
    let r_rows: Vec<Vec<f64>> = (0..6).map(|_| crate::scm::random_row(2, RANDOM_FLOOR, &mut rng)).collect();
    Ok(Scm::new(vec![
        binary_node("I", &[], &[pi]),
        NodeSpec::new("U", &types, &[], vec![w.to_vec()]).latent(),
        NodeSpec::new("T", &["0", "1"], &["I", "U"], t_rows),
        NodeSpec::new("R", &["0", "1"], &["T", "U"], r_rows),
    ])?
    .with_meta("iv_binary", &format!("monotone assignment; response tables seeded with {seed}")))
}

/// P(T=1|x) = p·π + q·(1−π); P(R=1|T,x) from Bayes so that exposure among cases is p and
/// among non-cases q in every stratum.
fn case_control_pop(ps: &Params) -> Result<Scm> {
    let pis = [ps.prob("pi0", true)?, ps.prob("pi1", true)?];
    let (pp, q) = (ps.prob("p", true)?, ps.prob("q", true)?);
    let mut t_rows = vec![];
    let mut pts = vec![];
    for &pi in &pis {
        let pt = pp * pi + q * (1.0 - pi);
        t_rows.push(pt);
        pts.push((pi, pt));
    }
    let mut r_rows = vec![];
    for t in 0..2 {
        for &(pi, pt) in &pts {
            r_rows.push(if t == 1 { pp * pi / pt } else { (1.0 - pp) * pi / (1.0 - pt) });
        }
    }
    Ok(Scm::new(vec![binary_node("X", &[], &[0.5]), binary_node("T", &["X"], &t_rows), binary_node("R", &["T", "X"], &r_rows)])?
        .with_meta("case_control_pop", "population for matched case-control sampling"))
}

pub fn build_example(spec: &ExampleSpec) -> Result<Model> {
    let catalog = list_examples();
    let info = catalog
        .iter()
        .find(|e| e.name == spec.name)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown example {}", spec.name)))?;
    for k in spec.params.keys() {
        if !info.params.iter().any(|d| d.name == k) {
            return invalid(format!("example {} has no parameter {k}", spec.name));
        }
    }
    let ps = Params { given: &spec.params, info };
    let seed = spec.seed;
    Ok(match info.name {
        "simpson_binary" => Model::Discrete(simpson_binary(&ps)?),
        "simpson_continuous" => Model::Gaussian(simpson_cont_model(&SimpsonContParams {
            alpha: ps.get("alpha"),
            beta: ps.get("beta"),
            gamma: ps.get("gamma"),
            mu: ps.get("mu"),
            sigma1: ps.get("sigma1"),
            sigma2: ps.get("sigma2"),
            sigma3: ps.get("sigma3"),
        })?),
        "lord" => Model::Mixture(lord_model(&LordParams {
            mu1: ps.get("mu1"),
            mu2: ps.get("mu2"),
            sigma: ps.get("sigma"),
            p: ps.get("p"),
            rho: ps.get("rho"),
        })?),
        "fig1" => Model::Discrete(random_on(&FIG1_NODES, &FIG1_EDGES, ps.card()?, &[], seed, "fig1")?),
        "fig1a" => Model::Discrete(random_on(&FIG1A_NODES, &FIG1A_EDGES, ps.card()?, &[], seed, "fig1a")?),
        "two_stage" => {
            let s = crate::identify::SEQUENTIAL_SHAPE;
            let edges: Vec<(&str, &str)> = s.required.iter().chain(s.optional).copied().collect();
            Model::Discrete(random_on(s.roles, &edges, ps.card()?, &[], seed, "two_stage")?)
        }
        "smoking" => {
            let s = crate::identify::FRONTDOOR_SHAPE;
            Model::Discrete(random_on(s.roles, s.required, ps.card()?, s.latent, seed, "smoking")?)
        }
        "eelworms" => {
            let s = crate::identify::EELWORMS_SHAPE;
            Model::Discrete(random_on(s.roles, s.required, ps.card()?, s.latent, seed, "eelworms")?)
        }
        "treatment_plan" => {
            let s = crate::identify::TREATMENT_PLAN_SHAPE;
            let a = ps.get("antibiotic");
            if a != 0.0 && a != 1.0 {
                return invalid("antibiotic must be 0 or 1");
            }
            let mut edges: Vec<(&str, &str)> = s.required.to_vec();
            if a == 1.0 {
                edges.extend(s.optional);
            }
            Model::Discrete(random_on(s.roles, &edges, 2, s.latent, seed, "treatment_plan")?)
        }
        "hiring" => {
            let s = crate::identify::HIRING_SHAPE;
            Model::Discrete(random_on(s.roles, s.required, 2, &[], seed, "hiring")?)
        }
        "iv_binary" => Model::Discrete(iv_binary(&ps, seed)?),
        "case_control_pop" => Model::Discrete(case_control_pop(&ps)?),
        other => return invalid(format!("unknown example {other}")),
    })
}
