//! Command-line front end. `run` parses arguments, executes one subcommand and returns the
//! exit status with the text destined for stdout and stderr, so it can be driven in-process.
//!
//! Exit status: 0 success, 1 domain error (including an invalid back-door verdict or a
//! failed rule check), 2 usage error (bad flags, unreadable or unparsable input).

use crate::casecontrol::{estimate_cc_or, simulate_case_control, DEFAULT_BUDGET};
use crate::diagnostics::homogeneity_report;
use crate::docalc::{verify_rule, Assignment, NodePartition};
use crate::error::Error;
use crate::estimands::{
    antibiotic_policy, iv_multi, iv_multi_data, iv_theta, iv_theta_data, iv_tsls, mediation_fixed_sex, natural_indirect,
    odds_ratio, two_stage_direct, HiringRoles, IvRoles, PlanRoles, MEDIATION_CITATION,
};
use crate::examples::{build_example, list_examples, ExampleSpec, Model};
use crate::exogenous::DigitStream;
use crate::gaussian::{discretize, DEFAULT_BINS};
use crate::graph::{check_backdoor, check_backdoor_extended, enumerate_valid_adjustment_sets, Dag};
use crate::identify::{
    eelworms_effect, effect_report, frontdoor, gformula2, validate_shape, EelwormRoles, SequentialRoles,
    ShapeTemplate, EELWORMS_CITATION, EELWORMS_SHAPE, FRONTDOOR_SHAPE, GFORMULA_CITATION, HIRING_SHAPE, SEQUENTIAL_SHAPE,
    TREATMENT_PLAN_SHAPE,
};
use crate::model_io::{load_model, to_canonical_json, ModelDoc};
use crate::scm::{intervene, joint_distribution, joint_distribution_exact, sample, Dataset, JointTable, Meta, Scm};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "scmkit", version, about = "Structural causal models: interventions, identification and checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Model file (JSON).
    #[arg(short = 'm', long = "model")]
    pub model: Option<PathBuf>,
    /// Dataset file (CSV with header).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Treatment node.
    #[arg(short = 't', long = "treatment")]
    pub t: Option<String>,
    /// Response node.
    #[arg(short = 'r', long = "response")]
    pub r: Option<String>,
    /// Adjustment / stratification set.
    #[arg(short = 'z', long, value_delimiter = ',')]
    pub adjust: Vec<String>,
    /// Role bindings role=node.
    #[arg(long, value_delimiter = ',')]
    pub roles: Vec<String>,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Plain {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct JointArgs {
    #[command(flatten)]
    pub common: Common,
    /// Marginalize onto these nodes.
    #[arg(long, value_delimiter = ',')]
    pub vars: Vec<String>,
    /// Exact rational arithmetic.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct InterveneArgs {
    #[command(flatten)]
    pub common: Common,
    /// Forced values node=value.
    #[arg(long = "set", value_delimiter = ',', required = true)]
    pub set: Vec<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BackdoorArgs {
    #[command(flatten)]
    pub common: Common,
    /// Members of the adjustment set that descend from the treatment.
    #[arg(long = "z-desc", value_delimiter = ',')]
    pub z_desc: Vec<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct AdjustSetsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Candidate nodes (default: every observed node except t and r that is not a descendant of t).
    #[arg(long, value_delimiter = ',')]
    pub candidates: Vec<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EffectArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "t-values", value_delimiter = ',')]
    pub t_values: Vec<String>,
    /// Adjust within strata of the propensity score instead of Z.
    #[arg(long)]
    pub propensity: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GformulaArgs {
    #[command(flatten)]
    pub common: Common,
    /// Values of the two treatments, t,t2.
    #[arg(long = "t-values", value_delimiter = ',', required = true)]
    pub t_values: Vec<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DirectArgs {
    #[command(flatten)]
    pub common: Common,
    /// Fixed value of the second treatment.
    #[arg(long, required = true)]
    pub y2: String,
    /// Values of the first treatment to report.
    #[arg(long = "t-values", value_delimiter = ',', required = true)]
    pub t_values: Vec<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MediationArgs {
    #[command(flatten)]
    pub common: Common,
    /// Law of the assumed sex, value=probability.
    #[arg(long, value_delimiter = ',')]
    pub sigma: Vec<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct IvArgs {
    #[command(flatten)]
    pub common: Common,
    /// Base instrument level for a multi-level instrument.
    #[arg(long)]
    pub base: Option<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CaseControlArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, required = true)]
    pub pairs: usize,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DocalcArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',')]
    pub w: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub x: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub y: Vec<String>,
    #[arg(long = "zset", value_delimiter = ',')]
    pub z: Vec<String>,
    /// X values node=value.
    #[arg(long = "x-values", value_delimiter = ',')]
    pub x_values: Vec<String>,
    /// Z values node=value.
    #[arg(long = "z-values", value_delimiter = ',')]
    pub z_values: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub rule: u8,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(short = 'k', long, default_value_t = 4)]
    pub k: usize,
    /// Column giving the within-stratum order (default: row order).
    #[arg(long)]
    pub order: Option<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ExampleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Example name; omit to list the catalog.
    #[arg(long)]
    pub name: Option<String>,
    /// Parameters key=value.
    #[arg(long = "param", value_delimiter = ',')]
    pub params: Vec<String>,
    /// Emit a discretized companion of a Gaussian example with this many bins per node.
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse and validate a model.
    Validate(Plain),
    /// Exact joint distribution.
    Joint(JointArgs),
    /// Intervened model and its joint.
    Intervene(InterveneArgs),
    /// Seeded sample from a model.
    Sample(Plain),
    /// Back-door criterion for -t, -r and -z.
    Backdoor(BackdoorArgs),
    /// All valid adjustment sets among candidates.
    AdjustSets(AdjustSetsArgs),
    /// Adjustment formula for the effect of -t on -r.
    Effect(EffectArgs),
    /// Front-door formula; roles X,Y,Z,W.
    Frontdoor(Plain),
    /// Eelworm formula; roles A,B,X,U,V,W,Y.
    Eelworms(Plain),
    /// Sequential g-formula; roles X,T,R,X2,T2,R2.
    Gformula(GformulaArgs),
    /// Direct effect of the first treatment; roles U,Y1,Y2,Y3,Y4.
    DirectEffect(DirectArgs),
    /// Antibiotic policy; roles U,Y1,Y2,Y3,Y4.
    Policy(Plain),
    /// Hiring with an assumed sex and the natural indirect effect; roles S,B,Q,H.
    Mediation(MediationArgs),
    /// Instrumental-variable ratio (and two-stage least squares on data); roles I,T,R.
    Iv(IvArgs),
    /// Odds ratio of -r and -t within strata of -z.
    Oddsratio(Plain),
    /// Matched case-control simulation and odds-ratio estimate.
    Casecontrol(CaseControlArgs),
    /// Do-calculus rule check.
    Docalc(DocalcArgs),
    /// Stratification diagnostics on a dataset.
    Diagnose(DiagnoseArgs),
    /// Build a catalog example.
    Example(ExampleArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Joint(_) => "joint",
            Command::Intervene(_) => "intervene",
            Command::Sample(_) => "sample",
            Command::Backdoor(_) => "backdoor",
            Command::AdjustSets(_) => "adjust-sets",
            Command::Effect(_) => "effect",
            Command::Frontdoor(_) => "frontdoor",
            Command::Eelworms(_) => "eelworms",
            Command::Gformula(_) => "gformula",
            Command::DirectEffect(_) => "direct-effect",
            Command::Policy(_) => "policy",
            Command::Mediation(_) => "mediation",
            Command::Iv(_) => "iv",
            Command::Oddsratio(_) => "oddsratio",
            Command::Casecontrol(_) => "casecontrol",
            Command::Docalc(_) => "docalc",
            Command::Diagnose(_) => "diagnose",
            Command::Example(_) => "example",
        }
    }

    fn inputs(&self) -> Value {
        let v = match self {
            Command::Validate(a) | Command::Sample(a) | Command::Frontdoor(a) | Command::Eelworms(a) | Command::Policy(a) | Command::Oddsratio(a) => {
                serde_json::to_value(a)
            }
            Command::Joint(a) => serde_json::to_value(a),
            Command::Intervene(a) => serde_json::to_value(a),
            Command::Backdoor(a) => serde_json::to_value(a),
            Command::AdjustSets(a) => serde_json::to_value(a),
            Command::Effect(a) => serde_json::to_value(a),
            Command::Gformula(a) => serde_json::to_value(a),
            Command::DirectEffect(a) => serde_json::to_value(a),
            Command::Mediation(a) => serde_json::to_value(a),
            Command::Iv(a) => serde_json::to_value(a),
            Command::Casecontrol(a) => serde_json::to_value(a),
            Command::Docalc(a) => serde_json::to_value(a),
            Command::Diagnose(a) => serde_json::to_value(a),
            Command::Example(a) => serde_json::to_value(a),
        };
        v.unwrap_or(Value::Null)
    }
}

/// What a finished invocation prints and returns.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Serialize)]
struct Report {
    command: String,
    inputs: Value,
    result: Value,
    citations: Vec<String>,
    warnings: Vec<String>,
    error: Option<String>,
}

enum Fail {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_) | Error::Io(_) => Fail::Usage(e.to_string()),
            other => Fail::Domain(other),
        }
    }
}

type Res<T> = std::result::Result<T, Fail>;

#[derive(Default)]
struct Done {
    result: Value,
    citations: Vec<String>,
    warnings: Vec<String>,
    /// Domain verdict that should exit with status 1 while still reporting normally.
    failed: bool,
    /// Printed instead of the JSON report.
    raw: Option<String>,
}

impl Done {
    fn new(result: impl Serialize) -> Res<Done> {
        Ok(Done { result: to_value(result)?, ..Default::default() })
    }

    fn cite(mut self, c: &str) -> Self {
        self.citations.push(c.to_string());
        self
    }
}

fn to_value(v: impl Serialize) -> Res<Value> {
    serde_json::to_value(v).map_err(|e| Fail::Usage(e.to_string()))
}

fn usage<T>(msg: impl Into<String>) -> Res<T> {
    Err(Fail::Usage(msg.into()))
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    execute(&cli.command)
}

pub fn execute(cmd: &Command) -> Outcome {
    let outcome = dispatch(cmd);
    let mut report = Report {
        command: cmd.name().into(),
        inputs: cmd.inputs(),
        result: Value::Null,
        citations: vec![],
        warnings: vec![],
        error: None,
    };
    let (code, stderr) = match outcome {
        Ok(done) => {
            if let Some(raw) = done.raw {
                return Outcome { code: i32::from(done.failed), stdout: raw, stderr: String::new() };
            }
            report.result = done.result;
            report.citations = done.citations;
            report.warnings = done.warnings;
            (i32::from(done.failed), String::new())
        }
        Err(Fail::Domain(e)) => {
            report.error = Some(e.to_string());
            (1, format!("error: {e}\n"))
        }
        Err(Fail::Usage(m)) => {
            report.error = Some(m.clone());
            (2, format!("error: {m}\n"))
        }
    };
    let mut stdout = serde_json::to_string_pretty(&report).unwrap_or_default();
    stdout.push('\n');
    Outcome { code, stdout, stderr }
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Validate(a) | Command::Sample(a) | Command::Frontdoor(a) | Command::Eelworms(a) | Command::Policy(a) | Command::Oddsratio(a) => &a.common,
        Command::Joint(a) => &a.common,
        Command::Intervene(a) => &a.common,
        Command::Backdoor(a) => &a.common,
        Command::AdjustSets(a) => &a.common,
        Command::Effect(a) => &a.common,
        Command::Gformula(a) => &a.common,
        Command::DirectEffect(a) => &a.common,
        Command::Mediation(a) => &a.common,
        Command::Iv(a) => &a.common,
        Command::Casecontrol(a) => &a.common,
        Command::Docalc(a) => &a.common,
        Command::Diagnose(a) => &a.common,
        Command::Example(a) => &a.common,
    }
}

fn dispatch(cmd: &Command) -> Res<Done> {
    let c = common(cmd);
    if c.format == Format::Csv && !matches!(cmd, Command::Joint(_) | Command::Sample(_) | Command::Casecontrol(_)) {
        return usage("--format csv is supported by joint, sample and casecontrol only");
    }
    match cmd {
        Command::Validate(_) => cmd_validate(c),
        Command::Joint(a) => cmd_joint(a),
        Command::Intervene(a) => cmd_intervene(a),
        Command::Sample(_) => cmd_sample(c),
        Command::Backdoor(a) => cmd_backdoor(a),
        Command::AdjustSets(a) => cmd_adjust_sets(a),
        Command::Effect(a) => cmd_effect(a),
        Command::Frontdoor(_) => cmd_frontdoor(c),
        Command::Eelworms(_) => cmd_eelworms(c),
        Command::Gformula(a) => cmd_gformula(a),
        Command::DirectEffect(a) => cmd_direct(a),
        Command::Policy(_) => cmd_policy(c),
        Command::Mediation(a) => cmd_mediation(a),
        Command::Iv(a) => cmd_iv(a),
        Command::Oddsratio(_) => cmd_oddsratio(c),
        Command::Casecontrol(a) => cmd_casecontrol(a),
        Command::Docalc(a) => cmd_docalc(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Example(a) => cmd_example(a),
    }
}

fn model_doc(c: &Common) -> Res<ModelDoc> {
    match &c.model {
        Some(p) => Ok(load_model(p.as_path())?),
        None => usage("-m/--model is required"),
    }
}

fn discrete(doc: &ModelDoc) -> Res<Scm> {
    doc.scm.clone().ok_or_else(|| Fail::Domain(Error::InvalidArgument("model has no probability tables".into())))
}

fn scm_of(c: &Common) -> Res<Scm> {
    discrete(&model_doc(c)?)
}

/// Joint law to evaluate formulas on: empirical from --data, else exact from the model.
/// Returns the model graph when one was given.
fn joint_source(c: &Common) -> Res<(JointTable<f64>, Option<Dag>)> {
    let doc = c.model.as_deref().map(load_model).transpose()?;
    if let Some(path) = &c.data {
        let domains = doc.as_ref().and_then(|d| d.scm.as_ref()).map(|s| {
            s.nodes().iter().map(|n| (n.name.clone(), n.domain.clone())).collect::<BTreeMap<_, _>>()
        });
        let data = read_data(path, domains.as_ref())?;
        return Ok((data.empirical()?, doc.map(|d| d.dag)));
    }
    match doc {
        Some(d) => {
            let s = discrete(&d)?;
            Ok((joint_distribution(&s)?, Some(d.dag)))
        }
        None => usage("either -m/--model or --data is required"),
    }
}

fn read_data(path: &PathBuf, domains: Option<&BTreeMap<String, Vec<String>>>) -> Res<Dataset> {
    let f = std::fs::File::open(path).map_err(|e| Fail::Usage(format!("{}: {e}", path.display())))?;
    Ok(Dataset::read_csv(f, domains)?)
}

fn dataset(c: &Common) -> Res<Dataset> {
    match &c.data {
        Some(p) => read_data(p, None),
        None => usage("--data is required"),
    }
}

fn need<'a>(v: &'a Option<String>, flag: &str) -> Res<&'a str> {
    v.as_deref().ok_or_else(|| Fail::Usage(format!("{flag} is required")))
}

fn pairs(items: &[String], what: &str) -> Res<BTreeMap<String, String>> {
    let mut m = BTreeMap::new();
    for it in items {
        match it.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                m.insert(k.trim().to_string(), v.trim().to_string());
            }
            _ => return usage(format!("{what}: expected key=value, got {it:?}")),
        }
    }
    Ok(m)
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(|s| s.as_str()).collect()
}

/// Role bindings from --roles; each role defaults to the node of the same name.
fn roles(c: &Common, shape: &ShapeTemplate) -> Res<BTreeMap<String, String>> {
    let given = pairs(&c.roles, "--roles")?;
    for k in given.keys() {
        if !shape.roles.contains(&k.as_str()) {
            return usage(format!("unknown role {k} for {}; roles are {:?}", shape.name, shape.roles));
        }
    }
    Ok(shape.roles.iter().map(|r| (r.to_string(), given.get(*r).cloned().unwrap_or_else(|| r.to_string()))).collect())
}

/// Checks the graph shape when a model graph is available.
fn check_shape(dag: &Option<Dag>, shape: &ShapeTemplate, b: &BTreeMap<String, String>, warnings: &mut Vec<String>) -> Res<()> {
    match dag {
        Some(d) => Ok(validate_shape(d, shape, b)?),
        None => {
            warnings.push(format!("no model graph given; the {} shape was not checked", shape.name));
            Ok(())
        }
    }
}

fn cmd_validate(c: &Common) -> Res<Done> {
    let doc = model_doc(c)?;
    let kind = if doc.scm.is_some() {
        "discrete"
    } else if doc.gaussian.is_some() {
        "gaussian"
    } else {
        "graph"
    };
    Done::new(json!({
        "status": "ok",
        "kind": kind,
        "nodes": doc.dag.names(),
        "latent": doc.latent,
        "topological_order": doc.dag.topological_order()?,
    }))
}

fn joint_csv(j: &JointTable<f64>) -> Res<String> {
    let mut wr = csv::Writer::from_writer(vec![]);
    let mut header: Vec<String> = j.names().to_vec();
    header.push("p".into());
    wr.write_record(&header).map_err(|e| Fail::Usage(e.to_string()))?;
    for (i, p) in j.probs().iter().enumerate() {
        let mut rec: Vec<String> = j.config(i).iter().enumerate().map(|(v, s)| j.domains()[v][*s].clone()).collect();
        rec.push(crate::model_io::format_17(*p));
        wr.write_record(&rec).map_err(|e| Fail::Usage(e.to_string()))?;
    }
    String::from_utf8(wr.into_inner().map_err(|e| Fail::Usage(e.to_string()))?).map_err(|e| Fail::Usage(e.to_string()))
}

fn cmd_joint(a: &JointArgs) -> Res<Done> {
    let scm = scm_of(&a.common)?;
    let vars: Vec<String> = if a.vars.is_empty() { scm.names() } else { a.vars.clone() };
    if a.exact {
        if a.common.format == Format::Csv {
            return usage("--exact output is JSON only");
        }
        let j = joint_distribution_exact(&scm)?.marginal_by_name(&vars)?;
        let probs: BTreeMap<String, String> = (0..j.probs().len())
            .map(|i| {
                let key = j.config(i).iter().enumerate().map(|(v, s)| j.domains()[v][*s].clone()).collect::<Vec<_>>().join("|");
                (key, j.probs()[i].to_string())
            })
            .collect();
        return Done::new(json!({"names": vars, "exact": true, "probabilities": probs}));
    }
    let j = joint_distribution(&scm)?.marginal_by_name(&vars)?;
    if a.common.format == Format::Csv {
        return Ok(Done { raw: Some(joint_csv(&j)?), ..Default::default() });
    }
    Done::new(json!({"names": vars, "exact": false, "probabilities": j.to_map()}))
}

fn write_out(path: &PathBuf, text: &str) -> Res<()> {
    std::fs::write(path, text).map_err(|e| Fail::Usage(format!("{}: {e}", path.display())))
}

fn cmd_intervene(a: &InterveneArgs) -> Res<Done> {
    let scm = scm_of(&a.common)?;
    let iv = pairs(&a.set, "--set")?;
    let m = intervene(&scm, &iv)?;
    let text = to_canonical_json(&m);
    if let Some(p) = &a.common.out {
        write_out(p, &text)?;
    }
    let j = joint_distribution(&m)?;
    Done::new(json!({"intervention": iv, "names": m.names(), "probabilities": j.to_map(), "model_written": a.common.out}))
}

fn cmd_sample(c: &Common) -> Res<Done> {
    let scm = scm_of(c)?;
    let seed = c.seed.ok_or_else(|| Fail::Usage("--seed is required".into()))?;
    let n = c.n.ok_or_else(|| Fail::Usage("--n is required".into()))?;
    let data = sample(&scm, &DigitStream::seeded(seed), n)?;
    let mut buf = vec![];
    data.write_csv(&mut buf)?;
    let text = String::from_utf8(buf).map_err(|e| Fail::Usage(e.to_string()))?;
    if let Some(p) = &c.out {
        write_out(p, &text)?;
    }
    if c.format == Format::Csv {
        return Ok(Done { raw: Some(text), ..Default::default() });
    }
    Done::new(json!({"rows": n, "seed": seed, "columns": data.names, "written": c.out}))
}

fn cmd_backdoor(a: &BackdoorArgs) -> Res<Done> {
    let c = &a.common;
    let doc = model_doc(c)?;
    let (t, r) = (need(&c.t, "-t")?, need(&c.r, "-r")?);
    let rep = if a.z_desc.is_empty() {
        check_backdoor(&doc.dag, t, r, &c.adjust)?
    } else {
        check_backdoor_extended(&doc.dag, t, r, &a.z_desc, &c.adjust)?
    };
    let mut done = Done::new(&rep)?.cite("back-door criterion");
    if let Some(o) = &rep.overrule {
        done.warnings.push(o.message.clone());
    }
    for p in rep.violating() {
        done.warnings.push(format!("unblocked back-door path: {}", p.display));
    }
    done.failed = !rep.valid;
    Ok(done)
}

fn cmd_adjust_sets(a: &AdjustSetsArgs) -> Res<Done> {
    let c = &a.common;
    let doc = model_doc(c)?;
    let (t, r) = (need(&c.t, "-t")?, need(&c.r, "-r")?);
    let cand: Vec<String> = if a.candidates.is_empty() {
        let desc = doc.dag.descendants(t)?;
        doc.dag
            .names()
            .iter()
            .filter(|n| n.as_str() != t && n.as_str() != r && !desc.contains(*n) && !doc.latent.contains(n))
            .cloned()
            .collect()
    } else {
        a.candidates.clone()
    };
    let sets = enumerate_valid_adjustment_sets(&doc.dag, t, r, &cand)?;
    Ok(Done::new(json!({"candidates": cand, "valid_sets": sets}))?.cite("back-door criterion"))
}

fn cmd_effect(a: &EffectArgs) -> Res<Done> {
    let c = &a.common;
    let (joint, dag) = joint_source(c)?;
    let (t, r) = (need(&c.t, "-t")?, need(&c.r, "-r")?);
    let values: Vec<String> =
        if a.t_values.is_empty() { joint.domains()[joint.var(t)?].clone() } else { a.t_values.clone() };
    let mut warnings = vec![];
    if let Some(d) = &dag {
        match check_backdoor(d, t, r, &c.adjust) {
            Ok(rep) if !rep.valid => warnings.push(format!("{:?} does not satisfy the back-door criterion", c.adjust)),
            Ok(_) => {}
            Err(e) => warnings.push(format!("back-door check not applicable: {e}")),
        }
    }
    let rep = effect_report(&joint, t, &strs(&values), r, &strs(&c.adjust), a.propensity)?;
    let cite = rep.citation.clone();
    let mut done = Done::new(&rep)?.cite(&cite);
    done.warnings = warnings;
    Ok(done)
}

fn cmd_frontdoor(c: &Common) -> Res<Done> {
    let (joint, dag) = joint_source(c)?;
    let b = roles(c, &FRONTDOOR_SHAPE)?;
    let mut warnings = vec![];
    check_shape(&dag, &FRONTDOOR_SHAPE, &b, &mut warnings)?;
    let fd = frontdoor(&joint, &b["Y"], &b["Z"], &b["W"])?;
    let cite = fd.citation.clone();
    let mut done = Done::new(&fd)?.cite(&cite);
    done.warnings = warnings;
    Ok(done)
}

fn cmd_eelworms(c: &Common) -> Res<Done> {
    let (joint, dag) = joint_source(c)?;
    let b = roles(c, &EELWORMS_SHAPE)?;
    let mut warnings = vec![];
    check_shape(&dag, &EELWORMS_SHAPE, &b, &mut warnings)?;
    let r = EelwormRoles { x: &b["X"], u: &b["U"], v: &b["V"], w: &b["W"], y: &b["Y"] };
    let mut done = Done::new(eelworms_effect(&joint, &r)?)?.cite(EELWORMS_CITATION);
    done.warnings = warnings;
    Ok(done)
}

fn cmd_gformula(a: &GformulaArgs) -> Res<Done> {
    let c = &a.common;
    if a.t_values.len() != 2 {
        return usage("--t-values needs exactly two values: t,t2");
    }
    let (joint, dag) = joint_source(c)?;
    let b = roles(c, &SEQUENTIAL_SHAPE)?;
    let mut warnings = vec![];
    check_shape(&dag, &SEQUENTIAL_SHAPE, &b, &mut warnings)?;
    let r = SequentialRoles { x: &b["X"], t: &b["T"], r: &b["R"], x2: &b["X2"], t2: &b["T2"], r2: &b["R2"] };
    let d = gformula2(&joint, &r, &a.t_values[0], &a.t_values[1])?;
    let mean = crate::identify::dist_expectation(&d).ok();
    let mut done = Done::new(json!({"t": a.t_values[0], "t2": a.t_values[1], "distribution": d, "mean": mean}))?.cite(GFORMULA_CITATION);
    done.warnings = warnings;
    Ok(done)
}

fn plan_roles(c: &Common, warnings: &mut Vec<String>, dag: &Option<Dag>) -> Res<BTreeMap<String, String>> {
    let b = roles(c, &TREATMENT_PLAN_SHAPE)?;
    check_shape(dag, &TREATMENT_PLAN_SHAPE, &b, warnings)?;
    Ok(b)
}

fn cmd_direct(a: &DirectArgs) -> Res<Done> {
    let c = &a.common;
    let (joint, dag) = joint_source(c)?;
    let mut warnings = vec![];
    let b = plan_roles(c, &mut warnings, &dag)?;
    let r = PlanRoles { y1: &b["Y1"], y2: &b["Y2"], y3: &b["Y3"], y4: &b["Y4"] };
    let mut out = BTreeMap::new();
    let mut cite = String::new();
    for t in &a.t_values {
        let d = two_stage_direct(&joint, &r, &a.y2, t)?;
        cite = d.citation.clone();
        out.insert(t.clone(), d);
    }
    let mut done = Done::new(out)?.cite(&cite);
    done.warnings = warnings;
    Ok(done)
}

fn cmd_policy(c: &Common) -> Res<Done> {
    let (joint, dag) = joint_source(c)?;
    let mut warnings = vec![];
    let b = plan_roles(c, &mut warnings, &dag)?;
    let r = PlanRoles { y1: &b["Y1"], y2: &b["Y2"], y3: &b["Y3"], y4: &b["Y4"] };
    let rep = antibiotic_policy(&joint, &r)?;
    let cite = rep.citation.clone();
    let mut done = Done::new(&rep)?.cite(&cite);
    done.warnings = warnings;
    Ok(done)
}

fn cmd_mediation(a: &MediationArgs) -> Res<Done> {
    let c = &a.common;
    let (joint, dag) = joint_source(c)?;
    let b = roles(c, &HIRING_SHAPE)?;
    let mut warnings = vec![];
    check_shape(&dag, &HIRING_SHAPE, &b, &mut warnings)?;
    let r = HiringRoles { h: &b["H"], b: &b["B"], q: &b["Q"], s: &b["S"] };
    let sigma: BTreeMap<String, f64> = pairs(&a.sigma, "--sigma")?
        .into_iter()
        .map(|(k, v)| v.parse::<f64>().map(|p| (k, p)).map_err(|_| Fail::Usage(format!("--sigma: {v} is not a number"))))
        .collect::<Res<_>>()?;
    let mediated = if sigma.is_empty() { None } else { Some(mediation_fixed_sex(&joint, &r, &sigma)?) };
    let indirect = natural_indirect(&joint, &r)?;
    let cite = indirect.citation.clone();
    let mut done = Done::new(json!({"assumed_sex": mediated, "natural_indirect": indirect}))?.cite(MEDIATION_CITATION).cite(&cite);
    done.warnings = warnings;
    Ok(done)
}

fn cmd_iv(a: &IvArgs) -> Res<Done> {
    let c = &a.common;
    let b = pairs(&c.roles, "--roles")?;
    let get = |k: &str| b.get(k).cloned().unwrap_or_else(|| k.to_string());
    let (i, t, r) = (get("I"), get("T"), get("R"));
    let roles = IvRoles { i: &i, t: &t, r: &r };
    if c.data.is_some() {
        let data = dataset(c)?;
        let ratio = match &a.base {
            Some(base) => iv_multi_data(&data, &roles, base)?,
            None => iv_theta_data(&data, &roles)?,
        };
        let tsls = iv_tsls(&data, &roles)?;
        let (c1, c2) = (ratio.citation.clone(), tsls.citation.clone());
        return Ok(Done::new(json!({"ratio": ratio, "tsls": tsls}))?.cite(&c1).cite(&c2));
    }
    let scm = scm_of(c)?;
    let joint = joint_distribution(&scm)?;
    let ratio = match &a.base {
        Some(base) => iv_multi(&joint, &roles, base)?,
        None => iv_theta(&joint, &roles)?,
    };
    let cite = ratio.citation.clone();
    Ok(Done::new(json!({ "ratio": ratio }))?.cite(&cite))
}

fn cmd_oddsratio(c: &Common) -> Res<Done> {
    let (joint, _) = joint_source(c)?;
    let (t, r) = (need(&c.t, "-t")?, need(&c.r, "-r")?);
    let rep = odds_ratio(&joint, r, t, &strs(&c.adjust))?;
    let cite = rep.citation.clone();
    let mut done = Done::new(&rep)?.cite(&cite);
    done.warnings = rep.warnings.clone();
    Ok(done)
}

fn cmd_casecontrol(a: &CaseControlArgs) -> Res<Done> {
    let c = &a.common;
    let scm = scm_of(c)?;
    let seed = c.seed.ok_or_else(|| Fail::Usage("--seed is required".into()))?;
    let (t, r) = (need(&c.t, "-t")?, need(&c.r, "-r")?);
    let s = simulate_case_control(&scm, &strs(&c.adjust), t, r, a.pairs, &DigitStream::seeded(seed), a.budget)?;
    let mut buf = vec![];
    s.write_csv(&mut buf)?;
    let text = String::from_utf8(buf).map_err(|e| Fail::Usage(e.to_string()))?;
    if let Some(p) = &c.out {
        write_out(p, &text)?;
    }
    if c.format == Format::Csv {
        return Ok(Done { raw: Some(text), ..Default::default() });
    }
    let est = estimate_cc_or(&s);
    let truth = odds_ratio(&joint_distribution(&scm)?, r, t, &strs(&c.adjust)).ok();
    let cite = est.citation.clone();
    let mut done = Done::new(json!({
        "pairs": s.pairs(),
        "population_rows": s.population_rows,
        "estimate": est,
        "population": truth,
        "written": c.out,
    }))?
    .cite(&cite);
    done.warnings = est.warnings.clone();
    Ok(done)
}

fn cmd_docalc(a: &DocalcArgs) -> Res<Done> {
    let scm = scm_of(&a.common)?;
    let part = NodePartition::new(&a.w, &a.x, &a.y, &a.z);
    let x: Assignment = pairs(&a.x_values, "--x-values")?;
    let z: Assignment = pairs(&a.z_values, "--z-values")?;
    let v = verify_rule(&scm, &part, a.rule, &x, &z, a.common.tol)?;
    let cite = if a.rule == 1 { "do-calculus rule 1 (insertion/deletion of observations)" } else { "do-calculus rule 2 (action/observation exchange)" };
    let mut done = Done::new(&v)?.cite(cite);
    for s in &v.skipped_strata {
        done.warnings.push(format!("stratum {s} skipped: null conditioning event"));
    }
    done.failed = !v.pass;
    Ok(done)
}

fn cmd_diagnose(a: &DiagnoseArgs) -> Res<Done> {
    let c = &a.common;
    let data = dataset(c)?;
    let (t, r) = (need(&c.t, "-t")?, need(&c.r, "-r")?);
    let rep = homogeneity_report(&data, &strs(&c.adjust), t, r, a.k, a.order.as_deref())?;
    let mut done = Done::new(&rep)?.cite("stratification as the empirical analogue of conditioning");
    done.warnings = rep.warnings.clone();
    Ok(done)
}

fn model_text(model: &Model, name: &str, description: &str, bins: Option<usize>) -> Res<String> {
    let meta = Meta { name: name.into(), description: description.into() };
    Ok(match (model, bins) {
        (Model::Discrete(s), _) => to_canonical_json(s),
        (Model::Gaussian(g), None) => crate::model_io::gaussian_to_canonical_json(g, &meta),
        (Model::Gaussian(g), Some(b)) => {
            let mut s = discretize(g, b)?;
            s.meta = meta;
            to_canonical_json(&s)
        }
        (Model::Mixture(m), _) => {
            let comps: Vec<String> = m
                .components
                .iter()
                .map(|g| crate::model_io::gaussian_to_canonical_json(g, &meta).trim_end().to_string())
                .collect();
            let weights: Vec<String> = m.weights.iter().map(|w| crate::model_io::format_17(*w)).collect();
            format!("{{\"mixture\":{{\"components\":[{}],\"weights\":[{}]}}}}\n", comps.join(","), weights.join(","))
        }
    })
}

fn cmd_example(a: &ExampleArgs) -> Res<Done> {
    let Some(name) = &a.name else {
        return Done::new(list_examples());
    };
    let mut spec = ExampleSpec::new(name).seed(a.common.seed.unwrap_or(0));
    for (k, v) in pairs(&a.params, "--param")? {
        let x = v.parse::<f64>().map_err(|_| Fail::Usage(format!("--param {k}: {v} is not a number")))?;
        spec.params.insert(k, x);
    }
    let model = build_example(&spec)?;
    let info = list_examples().into_iter().find(|e| e.name == name.as_str()).expect("built examples are listed");
    if a.bins.is_some() && !matches!(model, Model::Gaussian(_)) {
        return usage("--bins applies to Gaussian examples only");
    }
    let bins = a.bins.map(|b| if b == 0 { DEFAULT_BINS } else { b });
    let text = model_text(&model, name, info.description, bins)?;
    match &a.common.out {
        Some(p) => {
            write_out(p, &text)?;
            Ok(Done::new(json!({"example": name, "seed": spec.seed, "params": spec.params, "written": p}))?.cite(info.citation))
        }
        None => Ok(Done { raw: Some(text), ..Default::default() }),
    }
}
