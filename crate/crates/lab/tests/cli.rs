use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn perc_lab(args: &[&str], workers_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_perc-lab"));
    cmd.args(args).env_remove("PERC_WORKERS");
    if let Some(w) = workers_env {
        cmd.env("PERC_WORKERS", w);
    }
    cmd.output().expect("binary runs")
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn enumerate_prints_exact_value() {
    let out = perc_lab(&["enumerate", "--p", "0.5", "--n", "1", "--event", "survival"], None);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "0.75");
}

#[test]
fn enumerate_size_law() {
    let out = perc_lab(&["enumerate", "--p", "0.5", "--n", "1", "--event", "size"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, "size,probability\n0,0.25\n1,0.5\n2,0.25\n");
}

#[test]
fn exit_codes() {
    let bad_p = perc_lab(&["simulate", "--p", "1.5"], None);
    assert_eq!(bad_p.status.code(), Some(2));
    assert!(!bad_p.stderr.is_empty());
    assert_eq!(perc_lab(&["simulate", "--trials", "0"], None).status.code(), Some(2));
    assert_eq!(perc_lab(&["simulate", "--bogus"], None).status.code(), Some(2));
    assert_eq!(perc_lab(&["simulate"], Some("zero")).status.code(), Some(2));
    let infeasible = perc_lab(&["enumerate", "--p", "0.5", "--n", "12"], None);
    assert_eq!(infeasible.status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    // No trial survives at p = 0, so there is nothing to standardize.
    let regime = perc_lab(
        &["clt", "--p", "0", "--n", "10", "--trials", "50", "--levels", "10", "--nu-samples", "40",
          "--nu-width", "50", "--out", out],
        None,
    );
    assert_eq!(regime.status.code(), Some(4), "{}", String::from_utf8_lossy(&regime.stderr));
}

#[test]
fn simulate_writes_echoed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = perc_lab(&["simulate", "--p", "0.8", "--n", "20", "--trials", "50", "--seed", "42", "--out", out], None);
    assert!(run.status.success());
    for name in ["trials.csv", "summary.json"] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.starts_with("# perc-lab "));
        assert!(text.contains("# seed = 42\n"));
        assert!(!text.contains("workers"));
    }
    let csv = fs::read_to_string(dir.path().join("trials.csv")).unwrap();
    let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "trial,level,size,rminus,lplus,diameter,survived,tau");
    assert_eq!(body.len(), 1 + 50 * 21);
    assert!(body[1].starts_with("0,0,1,0,0,0,"));
}

fn determinism_case(args: &[&str]) {
    let runs: Vec<_> = [("--workers", "1"), ("--workers", "4")]
        .iter()
        .map(|(flag, w)| {
            let dir = tempfile::tempdir().unwrap();
            let mut full: Vec<&str> = args.to_vec();
            full.extend([*flag, *w, "--out", dir.path().to_str().unwrap()]);
            let out = perc_lab(&full, None);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            (read_tree(dir.path()), out.stdout, dir)
        })
        .collect();
    assert!(!runs[0].0.is_empty());
    assert_eq!(runs[0].0, runs[1].0);
    assert_eq!(runs[0].1, runs[1].1);
}

#[test]
fn simulate_is_worker_independent() {
    determinism_case(&["simulate", "--n", "30", "--trials", "700", "--seed", "9"]);
}

#[test]
fn estimate_is_worker_independent() {
    determinism_case(&["estimate", "--n", "60", "--trials", "600", "--nu-samples", "60", "--nu-width", "60",
        "--truncation", "10"]);
}

#[test]
fn clt_is_worker_independent() {
    determinism_case(&["clt", "--n", "40", "--trials", "300", "--levels", "10,20,40", "--nu-samples", "60",
        "--nu-width", "60", "--truncation", "10"]);
}

#[test]
fn assoc_is_worker_independent() {
    determinism_case(&["assoc", "--t", "50,200", "--paths", "200", "--eps", "0.5,2", "--nu-samples", "60",
        "--nu-width", "60", "--truncation", "10"]);
}

#[test]
fn env_var_overrides_worker_flag() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |d: &Path| {
        vec!["simulate".to_string(), "--n".into(), "15".into(), "--trials".into(), "300".into(),
             "--workers".into(), "1".into(), "--out".into(), d.to_str().unwrap().to_string()]
    };
    let ra = perc_lab(&args(a.path()).iter().map(String::as_str).collect::<Vec<_>>(), Some("3"));
    let rb = perc_lab(&args(b.path()).iter().map(String::as_str).collect::<Vec<_>>(), None);
    assert!(ra.status.success() && rb.status.success());
    assert_eq!(read_tree(a.path()), read_tree(b.path()));
}
