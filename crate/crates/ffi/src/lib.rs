//! C interface to scmkit.
//!
//! Every fallible function returns a status code: `SCM_OK` (0) on success, otherwise the
//! numeric code of the library error, `SCM_ERR_NULL` for a null argument or
//! `SCM_ERR_PANIC` when an internal panic was caught. The message of the last failure on
//! the calling thread is available from `scm_last_error`.
//!
//! Handles are opaque; free each with its `_free` function. Strings returned through
//! `char **` out-parameters are owned by the caller and released with `scm_string_free`.

use scmkit::error::Error;
use scmkit::examples::{build_example, ExampleSpec, Model};
use scmkit::exogenous::DigitStream;
use scmkit::graph::check_backdoor;
use scmkit::identify::effect_report;
use scmkit::model_io::{parse_model, to_canonical_json};
use scmkit::scm::{intervene, joint_distribution, sample, JointTable, Scm};
use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

pub const SCM_OK: i32 = 0;
/// A required pointer argument was null.
pub const SCM_ERR_NULL: i32 = 100;
/// A string argument was not valid UTF-8.
pub const SCM_ERR_UTF8: i32 = 101;
/// A panic was caught at the boundary.
pub const SCM_ERR_PANIC: i32 = 102;

/// Discrete structural causal model.
pub struct ScmModel(Scm);

/// Joint distribution of a model's nodes.
pub struct ScmJoint(JointTable<f64>);

/// Seeded source of uniform draws.
pub struct ScmStream(DigitStream);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(i32, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(e.code(), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SCM_OK,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SCM_ERR_PANIC
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(SCM_ERR_NULL, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(SCM_ERR_UTF8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(SCM_ERR_NULL, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(SCM_ERR_NULL, format!("{what} is null")));
    }
    out.write(v);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let c = CString::new(s).map_err(|_| Fail(SCM_ERR_UTF8, "output contains a nul byte".into()))?;
    put(out, c.into_raw(), "out")
}

fn csv_list(s: &str) -> Vec<&str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).collect()
}

/// Message of the last failure on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn scm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn scm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn scm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a model document (JSON text) with probability tables.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scm_model_from_json(json: *const c_char, out: *mut *mut ScmModel) -> i32 {
    guard(|| {
        let text = str_arg(json, "json")?;
        let doc = parse_model(text)?;
        let scm = doc.scm.ok_or_else(|| Fail(1, "model has no probability tables".into()))?;
        put(out, Box::into_raw(Box::new(ScmModel(scm))), "out")
    })
}

/// Builds a discrete catalog example. `params` is `key=value,...` or null.
///
/// # Safety
/// String arguments must be nul-terminated or null where allowed; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scm_example(name: *const c_char, params: *const c_char, seed: u64, out: *mut *mut ScmModel) -> i32 {
    guard(|| {
        let name = str_arg(name, "name")?;
        let mut spec = ExampleSpec::new(name).seed(seed);
        if !params.is_null() {
            for kv in csv_list(str_arg(params, "params")?) {
                let (k, v) = kv.split_once('=').ok_or_else(|| Fail(1, format!("parameter {kv:?} is not key=value")))?;
                let x: f64 = v.trim().parse().map_err(|_| Fail(1, format!("parameter {k} is not a number")))?;
                spec.params.insert(k.trim().to_string(), x);
            }
        }
        match build_example(&spec)? {
            Model::Discrete(s) => put(out, Box::into_raw(Box::new(ScmModel(s))), "out"),
            _ => Err(Fail(1, format!("{name} is not a discrete example"))),
        }
    })
}

/// # Safety
/// `m` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn scm_model_free(m: *mut ScmModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scm_model_node_count(m: *const ScmModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.len())
}

/// Canonical JSON of the model.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scm_model_to_json(m: *const ScmModel, out: *mut *mut c_char) -> i32 {
    guard(|| put_string(out, to_canonical_json(&handle(m, "model")?.0)))
}

/// New model with `node` forced to `value`.
///
/// # Safety
/// `m` must be a live handle; strings nul-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn scm_model_intervene(
    m: *const ScmModel,
    node: *const c_char,
    value: *const c_char,
    out: *mut *mut ScmModel,
) -> i32 {
    guard(|| {
        let m = handle(m, "model")?;
        let iv = BTreeMap::from([(str_arg(node, "node")?.to_string(), str_arg(value, "value")?.to_string())]);
        let new = intervene(&m.0, &iv)?;
        put(out, Box::into_raw(Box::new(ScmModel(new))), "out")
    })
}

/// Exact joint distribution of all nodes.
///
/// # Safety
/// `m` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn scm_joint(m: *const ScmModel, out: *mut *mut ScmJoint) -> i32 {
    guard(|| {
        let j = joint_distribution(&handle(m, "model")?.0)?;
        put(out, Box::into_raw(Box::new(ScmJoint(j))), "out")
    })
}

/// # Safety
/// `j` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn scm_joint_free(j: *mut ScmJoint) {
    if !j.is_null() {
        drop(Box::from_raw(j));
    }
}

/// Number of cells, or 0 for a null handle.
///
/// # Safety
/// `j` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn scm_joint_len(j: *const ScmJoint) -> usize {
    j.as_ref().map_or(0, |j| j.0.probs().len())
}

/// Probability of the configuration `labels`, values separated by `|` in node order.
///
/// # Safety
/// `j` must be a live handle; `labels` nul-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn scm_joint_prob(j: *const ScmJoint, labels: *const c_char, out: *mut f64) -> i32 {
    guard(|| {
        let j = &handle(j, "joint")?.0;
        let key = str_arg(labels, "labels")?;
        let map = j.to_map();
        let p = map.get(key).ok_or_else(|| Fail(1, format!("no cell {key:?}")))?;
        put(out, *p, "out")
    })
}

/// Probability of `node = value` after marginalizing the rest.
///
/// # Safety
/// `j` must be a live handle; strings nul-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn scm_joint_marginal(j: *const ScmJoint, node: *const c_char, value: *const c_char, out: *mut f64) -> i32 {
    guard(|| {
        let j = &handle(j, "joint")?.0;
        let node = str_arg(node, "node")?;
        let m = j.marginal_by_name(&[node])?;
        let value = str_arg(value, "value")?;
        let s = m.domains()[0].iter().position(|v| v == value).ok_or_else(|| Fail(1, format!("{value} is not a value of {node}")))?;
        put(out, m.probs()[s], "out")
    })
}

/// Seeded stream of uniform draws.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scm_stream_new(seed: u64, out: *mut *mut ScmStream) -> i32 {
    guard(|| put(out, Box::into_raw(Box::new(ScmStream(DigitStream::seeded(seed)))), "out"))
}

/// # Safety
/// `s` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn scm_stream_free(s: *mut ScmStream) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Draws `n` rows and returns them as CSV with a header line.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn scm_sample_csv(m: *const ScmModel, s: *const ScmStream, n: usize, out: *mut *mut c_char) -> i32 {
    guard(|| {
        let data = sample(&handle(m, "model")?.0, &handle(s, "stream")?.0, n)?;
        let mut buf = vec![];
        data.write_csv(&mut buf)?;
        put_string(out, String::from_utf8(buf).map_err(|e| Fail(SCM_ERR_UTF8, e.to_string()))?)
    })
}

/// Back-door verdict for adjustment set `z` (comma-separated, may be empty or null).
/// Writes 1 for valid, 0 for invalid.
///
/// # Safety
/// `m` must be a live handle; strings nul-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn scm_backdoor(
    m: *const ScmModel,
    t: *const c_char,
    r: *const c_char,
    z: *const c_char,
    out: *mut i32,
) -> i32 {
    guard(|| {
        let m = handle(m, "model")?;
        let z: Vec<String> = if z.is_null() { vec![] } else { csv_list(str_arg(z, "z")?).into_iter().map(String::from).collect() };
        let rep = check_backdoor(m.0.dag(), str_arg(t, "t")?, str_arg(r, "r")?, &z)?;
        put(out, i32::from(rep.valid), "out")
    })
}

/// Adjusted mean response under `t = t1` minus under `t = t0`, adjusting for `z`.
///
/// # Safety
/// `m` must be a live handle; strings nul-terminated (`z` may be null); `out` writable.
#[no_mangle]
pub unsafe extern "C" fn scm_effect_ate(
    m: *const ScmModel,
    t: *const c_char,
    t0: *const c_char,
    t1: *const c_char,
    r: *const c_char,
    z: *const c_char,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let m = handle(m, "model")?;
        let z = if z.is_null() { vec![] } else { csv_list(str_arg(z, "z")?) };
        let j = joint_distribution(&m.0)?;
        let values = [str_arg(t0, "t0")?, str_arg(t1, "t1")?];
        let rep = effect_report(&j, str_arg(t, "t")?, &values, str_arg(r, "r")?, &z, false)?;
        let ate = rep.ate.ok_or_else(|| Fail(1, "response is not numeric".into()))?;
        put(out, ate, "out")
    })
}
