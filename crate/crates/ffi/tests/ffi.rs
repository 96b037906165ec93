use scmkit_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = scm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn example(name: &str) -> *mut ScmModel {
    let mut m = ptr::null_mut();
    assert_eq!(scm_example(c(name).as_ptr(), ptr::null(), 0, &mut m), SCM_OK);
    m
}

#[test]
fn simpson_effect_through_c_abi() {
    unsafe {
        let m = example("simpson_binary");
        assert_eq!(scm_model_node_count(m), 3);
        let mut ate = 0.0;
        let st = scm_effect_ate(m, c("T").as_ptr(), c("0").as_ptr(), c("1").as_ptr(), c("R").as_ptr(), c("X").as_ptr(), &mut ate);
        assert_eq!(st, SCM_OK);
        assert!((ate - 0.25).abs() < 1e-12);
        let mut naive = 0.0;
        scm_effect_ate(m, c("T").as_ptr(), c("0").as_ptr(), c("1").as_ptr(), c("R").as_ptr(), ptr::null(), &mut naive);
        assert!((naive - (0.58 - 0.60)).abs() < 1e-12);
        scm_model_free(m);
    }
}

#[test]
fn joint_and_intervention() {
    unsafe {
        let m = example("simpson_binary");
        let mut j = ptr::null_mut();
        assert_eq!(scm_joint(m, &mut j), SCM_OK);
        assert_eq!(scm_joint_len(j), 8);
        let mut p = 0.0;
        assert_eq!(scm_joint_marginal(j, c("T").as_ptr(), c("1").as_ptr(), &mut p), SCM_OK);
        assert!((p - 0.5).abs() < 1e-12);
        let mut cell = 0.0;
        assert_eq!(scm_joint_prob(j, c("0|1|1").as_ptr(), &mut cell), SCM_OK);
        assert!((cell - 0.5 * 0.8 * 0.5).abs() < 1e-12);

        let mut mi = ptr::null_mut();
        assert_eq!(scm_model_intervene(m, c("T").as_ptr(), c("1").as_ptr(), &mut mi), SCM_OK);
        let mut ji = ptr::null_mut();
        scm_joint(mi, &mut ji);
        let mut r1 = 0.0;
        scm_joint_marginal(ji, c("R").as_ptr(), c("1").as_ptr(), &mut r1);
        assert!((r1 - 0.70).abs() < 1e-12);
        scm_joint_free(ji);
        scm_joint_free(j);
        scm_model_free(mi);
        scm_model_free(m);
    }
}

#[test]
fn json_round_trip_and_sampling_determinism() {
    unsafe {
        let m = example("fig1");
        let mut js = ptr::null_mut();
        assert_eq!(scm_model_to_json(m, &mut js), SCM_OK);
        let mut m2 = ptr::null_mut();
        assert_eq!(scm_model_from_json(js, &mut m2), SCM_OK);
        let mut js2 = ptr::null_mut();
        scm_model_to_json(m2, &mut js2);
        assert_eq!(CStr::from_ptr(js), CStr::from_ptr(js2));

        let draw = |seed| {
            let mut s = ptr::null_mut();
            assert_eq!(scm_stream_new(seed, &mut s), SCM_OK);
            let mut csv = ptr::null_mut();
            assert_eq!(scm_sample_csv(m, s, 50, &mut csv), SCM_OK);
            let text = CStr::from_ptr(csv).to_string_lossy().into_owned();
            scm_string_free(csv);
            scm_stream_free(s);
            text
        };
        let a = draw(7);
        assert_eq!(a, draw(7));
        assert_ne!(a, draw(8));
        assert_eq!(a.lines().count(), 51);

        scm_string_free(js);
        scm_string_free(js2);
        scm_model_free(m2);
        scm_model_free(m);
    }
}

#[test]
fn backdoor_verdicts() {
    unsafe {
        let m = example("fig1");
        let mut ok = -1;
        assert_eq!(scm_backdoor(m, c("T").as_ptr(), c("R").as_ptr(), c("X3,X4").as_ptr(), &mut ok), SCM_OK);
        assert_eq!(ok, 1);
        assert_eq!(scm_backdoor(m, c("T").as_ptr(), c("R").as_ptr(), c("X4").as_ptr(), &mut ok), SCM_OK);
        assert_eq!(ok, 0);
        // a descendant of the treatment routes to the extended check
        let st = scm_backdoor(m, c("T").as_ptr(), c("R").as_ptr(), c("X6").as_ptr(), &mut ok);
        assert_eq!(st, 3);
        assert!(last_error().contains("extended"));
        scm_model_free(m);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(scm_example(c("nope").as_ptr(), ptr::null(), 0, &mut m), 1);
        assert!(m.is_null());
        assert_eq!(scm_example(ptr::null(), ptr::null(), 0, &mut m), SCM_ERR_NULL);
        assert_eq!(scm_model_from_json(c("{not json").as_ptr(), &mut m), 13);
        assert!(!last_error().is_empty());
        let st = scm_example(c("simpson_binary").as_ptr(), c("p00=0.9").as_ptr(), 0, &mut m);
        assert_eq!(st, 10, "{}", last_error());
        assert_eq!(scm_example(c("lord").as_ptr(), ptr::null(), 0, &mut m), 1);

        let good = example("simpson_binary");
        let mut j = ptr::null_mut();
        assert_eq!(scm_joint(ptr::null(), &mut j), SCM_ERR_NULL);
        assert_eq!(scm_joint(good, ptr::null_mut()), SCM_ERR_NULL);
        let mut mi = ptr::null_mut();
        assert_eq!(scm_model_intervene(good, c("Q").as_ptr(), c("1").as_ptr(), &mut mi), 1);
        assert_eq!(scm_model_node_count(ptr::null()), 0);
        scm_model_free(ptr::null_mut());
        scm_model_free(good);
    }
}

#[test]
fn last_error_is_thread_local() {
    unsafe {
        let mut m = ptr::null_mut();
        scm_example(c("nope").as_ptr(), ptr::null(), 0, &mut m);
    }
    let msg = last_error();
    std::thread::spawn(|| assert!(scm_last_error().is_null())).join().unwrap();
    assert_eq!(last_error(), msg);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(scm_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_generated_and_compiles_as_c() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/scmkit.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["scm_example", "scm_joint", "scm_backdoor", "scm_last_error", "typedef struct ScmModel ScmModel"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"scmkit.h\"\nint f(void){ScmModel*m=0;return scm_example(\"fig1\",0,0,&m)+SCM_ERR_NULL;}\n",
    )
    .unwrap();
    match std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&src)
        .output()
    {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("no C compiler; header syntax check skipped"),
    }
}
