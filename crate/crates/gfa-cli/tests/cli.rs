use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gfa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfa")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json_file(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn family_file(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_3() {
    for args in [
        &["classify", "--builtin", "nope"][..],
        &["classify", "--builtin", "bump", "--tests", "moderate,nope"],
        &["classify", "--builtin", "bump", "--eps-grid", "geom:0.1:0.5:10"],
        &["classify", "--builtin", "bump", "--eps-grid", "lin:0.5:0.1:10"],
        &["classify"],
        &["frobnicate"],
        &["parse", "x1 +* 2"],
    ] {
        let o = gfa(args);
        assert_eq!(code(&o), 3, "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
    let o = gfa(&["classify", "--builtin", "nope"]);
    assert!(stderr(&o).contains("mollifier"), "lists the known names");
}

#[test]
fn thread_override_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_gfa"))
        .args(["parse", "x1"])
        .env("GFA_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
}

#[test]
fn mollifier_classify_report() {
    let dir = tempfile::tempdir().unwrap();
    let (json, csv) = (dir.path().join("r.json"), dir.path().join("r.csv"));
    let o = gfa(&[
        "classify",
        "--builtin",
        "mollifier",
        "--tests",
        "moderate,tau,schwartz",
        "--quick",
        "--json",
        json.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = json_file(&json);
    let reports = doc.as_array().unwrap();
    assert_eq!(reports.len(), 3);
    for (r, t) in reports.iter().zip(["moderate", "tau", "schwartz"]) {
        for key in ["family", "test", "verdict", "witnesses", "diagnostics", "params", "version"] {
            assert!(r.get(key).is_some(), "{t}: missing {key}");
        }
        assert_eq!(r["family"], "mollifier");
        assert_eq!(r["test"], t);
        assert_eq!(r["verdict"], "pass");
        assert!(r["params"]["classify"]["grid"].is_array() && r["params"]["fourier"].is_object());
    }
    let text = std::fs::read_to_string(&csv).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "eps,region,alpha,m_or_k,sup_logmag,fit_slope,residual");
    assert!(text.lines().count() > 100);
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let p = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_gfa"))
            .args(["classify", "--builtin", "oscillatory_bump", "--tests", "tau,schwartz", "--quick", "--json"])
            .arg(&p)
            .env("GFA_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        std::fs::read(p).unwrap()
    };
    let a = run("a.json", "1");
    assert_eq!(a, run("b.json", "1"));
    assert_eq!(a, run("c.json", "3"));
}

#[test]
fn log_power_file_fails_tau() {
    let dir = tempfile::tempdir().unwrap();
    let f = family_file(
        dir.path(),
        "logpow.gfa",
        "# moderate, not tempered\nname = logpow\ndim = 1\nu = (1+x1^2)^(log(1+x1^2)/log(1/eps))\n",
    );
    let o = gfa(&["classify", "--family", &f, "--tests", "tau", "--quick", "--json", "-"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["family"], "logpow");
    assert_eq!(r["verdict"], "fail");
    let q: Vec<f64> =
        r["witnesses"]["per_alpha"]["0"]["neg_e_over_m"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(q.windows(2).all(|w| w[1] > w[0]), "{q:?}");
}

#[test]
fn counterexample_regularity_suite() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let o = gfa(&["classify", "--builtin", "example510", "--tests", "regularity-suite", "--quick", "--json", json.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json_file(&json);
    assert_eq!(r["verdict"], "pass");
    let subs: Vec<&str> = r["sub_reports"].as_array().unwrap().iter().map(|s| s["test"].as_str().unwrap()).collect();
    for t in ["pointstar_at_0", "classical_at_0", "pointwise_at_x0", "sharp_at_x0", "pointwise_at_a_m"] {
        assert!(subs.contains(&t), "{t} in {subs:?}");
    }
}

#[test]
fn spectrum_of_modulated_bump() {
    let dir = tempfile::tempdir().unwrap();
    let (json, csv) = (dir.path().join("s.json"), dir.path().join("peaks.csv"));
    let o = gfa(&[
        "spectrum",
        "--builtin",
        "modulated_bump",
        "--tests",
        "gs_infinity",
        "--json",
        json.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = json_file(&json);
    assert_eq!(r["verdict"], "fail");
    assert_eq!(r["witnesses"]["failing_side"], serde_json::json!(["spectrum"]));
    let mut rd = csv::Reader::from_path(&csv).unwrap();
    let headers = rd.headers().unwrap().clone();
    let (ie, ip) = (
        headers.iter().position(|h| h == "eps").unwrap(),
        headers.iter().position(|h| h == "xi_peak_times_eps").unwrap(),
    );
    let mut checked = 0;
    for row in rd.records() {
        let row = row.unwrap();
        let eps: f64 = row[ie].parse().unwrap();
        let xe: f64 = row[ip].parse().unwrap();
        if (2f64.powi(-14)..=2f64.powi(-6)).contains(&eps) {
            assert!((0.9..=1.1).contains(&xe), "eps {eps}: {xe}");
            checked += 1;
        }
    }
    assert!(checked >= 8);
}

#[test]
fn spectrum_verdicts_of_bump_and_oscillatory_bump() {
    let o = gfa(&["spectrum", "--builtin", "bump", "--tests", "gs_infinity", "--json", "-"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["verdict"], "pass");

    let o = gfa(&["spectrum", "--builtin", "oscillatory_bump", "--tests", "tempered_equality", "--json", "-"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["verdict"], "pass");
    assert_eq!(r["witnesses"]["pairing_negligible"], true);
    assert_eq!(r["witnesses"]["spectrum_vanishing"], true);
}

#[test]
fn fourier_budget_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let f = family_file(dir.path(), "fast.gfa", "name = fast\ndim = 1\nu = bump(x1)*exp(i*x1/eps^2)\n");
    let o = gfa(&["spectrum", "--family", &f, "--tests", "slowscale_spectrum", "--eps-grid", "geom:0.001:0.0005:8"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("budget exceeded"));
}

#[test]
fn spectrum_rejects_two_dimensional_families() {
    let dir = tempfile::tempdir().unwrap();
    let f = family_file(dir.path(), "g2.gfa", "name = g2\ndim = 2\nu = gauss(x1)*gauss(x2)\n");
    assert_eq!(code(&gfa(&["spectrum", "--family", &f])), 3);
}

#[test]
fn custom_grid_is_recorded() {
    let o = gfa(&["classify", "--builtin", "bump", "--tests", "moderate", "--eps-grid", "geom:0.0625:1e-6:12", "--k-max", "2", "--json", "-"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["verdict"], "pass");
    let text = r["params"].to_string();
    assert!(text.contains("0.0625") && text.contains("\"k_max\":2"), "{text}");
}

#[test]
fn parse_prints_canonical_form() {
    let dir = tempfile::tempdir().unwrap();
    let f = family_file(dir.path(), "m.gfa", "# mollifier\ndim = 1\nname = moll\nu = eps^-1 * bump( x1/eps )\n");
    let o = gfa(&["parse", "--family", &f]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("name = moll") && out.contains("dim = 1"));
    let printed = out.lines().find_map(|l| l.strip_prefix("u = ")).unwrap();
    let again = gfa(&["parse", printed]);
    assert_eq!(code(&again), 0);
    assert!(String::from_utf8(again.stdout).unwrap().contains(&format!("u = {printed}")));

    let bad = family_file(dir.path(), "bad.gfa", "dim = 1\nu = x1 +\n");
    let o = gfa(&["parse", "--family", &bad]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains('2'), "names the line: {}", stderr(&o));
}
