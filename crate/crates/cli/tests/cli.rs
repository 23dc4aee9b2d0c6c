use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cpb_cli::config::ModelConfig;
use cpb_core::verify::Witness;
use cpb_core::{validate_rates, ContinuousLaw};
use tempfile::TempDir;

fn cpb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpb")).args(args).output().unwrap()
}

fn cpb_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpb"))
        .args(args)
        .env(key, value)
        .output()
        .unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Records of a CSV text keyed by header name.
fn records(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            headers.iter().map(String::from).zip(rec.iter().map(String::from)).collect()
        })
        .collect()
}

fn num(x: &str) -> f64 {
    x.parse().unwrap()
}

const CLOSED: &str = "[rates]\npre = 1\npost = 2\n[changepoint]\nfamily = exponential\nrate = 1\n[history]\nhorizon = 1\n";

const ADDED_ARRIVAL: &str = "[rates]\npre = 1, 1\npost = 2, 100\n[changepoint]\nfamily = exponential\nrate = 1\n\
                             [history]\narrivals = 0.25, 0.5\nhorizon = 1\n[run]\nM = 100\nseed = 7\n";

#[test]
fn posterior_closed_form() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "closed.ini", CLOSED);
    let o = cpb(&["posterior", s(&cfg)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("scenario,engine,prob_before,prob_after,intensity\n"));
    let rows = records(&text);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["scenario"], "closed");
    assert!((num(&rows[0]["prob_before"]) - 0.5).abs() < 1e-10);
    assert!((num(&rows[0]["intensity"]) - 1.5).abs() < 1e-10);
}

#[test]
fn equal_rates_give_prior_survival() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "flat.ini",
        "[rates]\npre = 1.5, 0.7\npost = 1.5, 0.7\n[changepoint]\nfamily = weibull\nshape = 0.8\nscale = 2\n\
         [history]\narrivals = 0.3\nhorizon = 1.7\n",
    );
    let rows = records(&stdout(&cpb(&["posterior", s(&cfg)])));
    let expected = ContinuousLaw::weibull(0.8, 2.0).unwrap().survival(1.7);
    assert!((num(&rows[0]["prob_before"]) - expected).abs() < 1e-12);
}

#[test]
fn discrete_engines_agree() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "disc.ini",
        "[rates]\npre = 0.2, 0.3\npost = 0.5, 0.8\n[changepoint]\nfamily = discrete\nhazards = 0.1, 0.2\ntail = 0.3\n\
         [history]\narrivals = 2, 5\nhorizon = 9\n",
    );
    let a = records(&stdout(&cpb(&["posterior", s(&cfg), "--engine", "discrete"])));
    let b = records(&stdout(&cpb(&["posterior", s(&cfg), "--engine", "oracle"])));
    assert!((num(&a[0]["prob_before"]) - num(&b[0]["prob_before"])).abs() < 1e-12);
    let o = cpb(&["posterior", s(&cfg), "--engine", "continuous"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn oracle_capacity_is_a_precondition_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "long.ini",
        "[rates]\npre = 0.2\npost = 0.5\n[changepoint]\nfamily = discrete\nhazards = 0.1\n[history]\narrivals = 3\nhorizon = 17\n",
    );
    let o = cpb(&["posterior", s(&cfg), "--engine", "oracle"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("capacity"));
}

#[test]
fn discretised_posterior_needs_grid() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "aa.ini", ADDED_ARRIVAL);
    assert_eq!(cpb(&["posterior", s(&cfg), "--engine", "discrete"]).status.code(), Some(3));
    let fine = records(&stdout(&cpb(&["posterior", s(&cfg), "--engine", "discrete", "--m", "512"])));
    let exact = records(&stdout(&cpb(&["posterior", s(&cfg)])));
    assert!((num(&fine[0]["prob_before"]) - num(&exact[0]["prob_before"])).abs() < 1e-4);
    // rate 100 is not below m = 64
    assert_eq!(cpb(&["posterior", s(&cfg), "--engine", "discrete", "--m", "64"]).status.code(), Some(3));
}

#[test]
fn parse_errors_cite_lines() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bad.ini", "[rates]\npre = 1\npost = two\n");
    let o = cpb(&["posterior", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let cfg = write(&dir, "nolaw.ini", "[rates]\npre = 1\npost = 2\n[history]\nhorizon = 1\n");
    assert_eq!(cpb(&["posterior", s(&cfg)]).status.code(), Some(2));
    assert_eq!(cpb(&["posterior", s(&cfg), "--engine", "bogus"]).status.code(), Some(2));
    assert_eq!(cpb(&["verify", s(&cfg), "--suite", "everything"]).status.code(), Some(2));
}

#[test]
fn missing_config_is_an_io_error() {
    let o = cpb(&["posterior", "/nonexistent/model.ini"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn simulate_zero_paths_writes_header_only() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "closed.ini", CLOSED);
    let out = dir.path().join("paths.csv");
    let o = cpb(&["simulate", s(&cfg), "--paths", "0", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "path_id,change_time,arrival_index,arrival_time\n");
}

#[test]
fn simulate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "aa.ini", ADDED_ARRIVAL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    for (out, seed) in [(&a, "11"), (&b, "11"), (&c, "12")] {
        let o = cpb(&["simulate", s(&cfg), "--paths", "50", "--seed", seed, "--out", s(out)]);
        assert_eq!(o.status.code(), Some(0));
    }
    let ra = std::fs::read(&a).unwrap();
    assert_eq!(ra, std::fs::read(&b).unwrap());
    assert_ne!(ra, std::fs::read(&c).unwrap());
    let single = cpb_env(&["simulate", s(&cfg), "--paths", "50", "--seed", "11"], "THREADS", "1");
    assert_eq!(single.stdout, ra);
}

#[test]
fn immediate_change_gives_post_change_first_gap() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "pm.ini",
        "[rates]\npre = 0.5\npost = 2\n[changepoint]\nfamily = point-mass\nat = 0\n",
    );
    let paths = 4000;
    let o = cpb(&[
        "simulate",
        s(&cfg),
        "--paths",
        &paths.to_string(),
        "--seed",
        "3",
        "--horizon",
        "inf",
        "--max-arrivals",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = records(&stdout(&o));
    assert_eq!(rows.len(), paths);
    let mean = rows.iter().map(|r| num(&r["arrival_time"])).sum::<f64>() / paths as f64;
    let sigma = 0.5 / (paths as f64).sqrt();
    assert!((mean - 0.5).abs() < 3.0 * sigma, "mean {mean}");
}

#[test]
fn unwritable_output_exits_4() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "closed.ini", CLOSED);
    let o = cpb(&["simulate", s(&cfg), "--paths", "2", "--out", "/nonexistent/dir/out.csv"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn theorem1_suite_passes_on_valid_schedules() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "aa.ini", ADDED_ARRIVAL);
    let o = cpb(&["verify", s(&cfg), "--suite", "theorem1", "--instances", "500"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = records(&stdout(&o));
    let v = rows.iter().find(|r| r["quantity"] == "violations").unwrap();
    assert_eq!(v["value"], "0");
    assert_eq!(v["status"], "pass");

    let disc = write(
        &dir,
        "disc.ini",
        "[rates]\npre = 0.2, 0.3\npost = 0.5, 0.8\n[changepoint]\nfamily = discrete\nhazards = 0.1, 0.2\n",
    );
    for engine in ["discrete", "oracle"] {
        let o = cpb(&["verify", s(&disc), "--suite", "theorem1", "--engine", engine, "--instances", "200"]);
        assert_eq!(o.status.code(), Some(0), "{engine}: {}", stderr(&o));
    }
}

#[test]
fn sweep_output_ignores_thread_count() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "closed.ini", "[run]\nseed = 9\n");
    let args = ["verify", s(&cfg), "--suite", "theorem1", "--instances", "300"];
    let one = cpb_env(&args, "THREADS", "1");
    let four = cpb_env(&args, "THREADS", "4");
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(cpb_env(&args, "THREADS", "zero").status.code(), Some(2));
}

#[test]
fn decreasing_differences_fail_with_reproducible_witnesses() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "loose.ini",
        "[rates]\npre = 1.0437479405373167, 3.9603527236008262\npost = 2.9962321359557134, 3.9603527236008262\n\
         [changepoint]\nfamily = weibull\nshape = 0.7293460076926701\nscale = 3.0843251719188234\n",
    );
    let wfile = dir.path().join("w.json");
    let o = cpb(&[
        "verify",
        s(&cfg),
        "--suite",
        "theorem1",
        "--instances",
        "500",
        "--witness-out",
        s(&wfile),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("witness: {"));
    let witnesses: Vec<Witness> = serde_json::from_str(&std::fs::read_to_string(&wfile).unwrap()).unwrap();
    assert!(!witnesses.is_empty());
    for w in &witnesses {
        assert!(w.reproduces(1e-10).unwrap());
    }
    // the violation rows carry the same gaps
    let rows = records(&stdout(&o));
    let gaps: Vec<f64> = rows
        .iter()
        .filter(|r| r["scenario"].starts_with("theorem1/violation-"))
        .map(|r| num(&r["value"]))
        .collect();
    assert_eq!(gaps.len(), witnesses.len());
    for (g, w) in gaps.iter().zip(&witnesses) {
        assert_eq!(*g, w.gap());
    }
}

#[test]
fn counterexample_with_exponential_law_reports_best_margin() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "aa.ini", ADDED_ARRIVAL);
    let o = cpb(&["verify", s(&cfg), "--suite", "counterexample"]);
    assert_eq!(o.status.code(), Some(1));
    let rows = records(&stdout(&o));
    let drop = rows.iter().find(|r| r["quantity"] == "intensity_drop").unwrap();
    assert_eq!(drop["status"], "fail");
    assert!(num(&drop["value"]) < 0.0);
}

#[test]
fn counterexample_with_decreasing_hazard_finds_witness() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "wb.ini",
        "[changepoint]\nfamily = weibull\nshape = 0.3\nscale = 1\n[run]\nM = 100\n",
    );
    let wfile = dir.path().join("w.json");
    let o = cpb(&["verify", s(&cfg), "--suite", "counterexample", "--witness-out", s(&wfile)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = records(&stdout(&o));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["status"], "pass");
    let witnesses: Vec<Witness> = serde_json::from_str(&std::fs::read_to_string(&wfile).unwrap()).unwrap();
    assert_eq!(witnesses.len(), 1);
    let w = &witnesses[0];
    assert!(w.reproduces(1e-10).unwrap());
    assert!((w.first_value.intensity - w.second_value.intensity - num(&rows[0]["value"])).abs() < 1e-12);
}

#[test]
fn identities_suite_reports_ratios() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "disc.ini",
        "[rates]\npre = 0.2, 0.3\npost = 0.5, 0.8\n[changepoint]\nfamily = discrete\nhazards = 0.1, 0.2\ntail = 0.3\n\
         [history]\narrivals = 2, 5\nhorizon = 20\n",
    );
    let o = cpb(&["verify", s(&cfg), "--suite", "identities", "--instances", "200"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = records(&stdout(&o));
    for q in ["alpha", "gamma_b", "gamma_c", "delta"] {
        let r = rows.iter().find(|r| r["quantity"] == q).unwrap();
        let expected = num(r["detail"].trim_start_matches("expected "));
        assert!((num(&r["value"]) / expected - 1.0).abs() < 1e-12);
    }
}

#[test]
fn convergence_and_timescale_suites_pass() {
    let dir = TempDir::new().unwrap();
    let empty = write(&dir, "empty.ini", "[run]\nseed = 4\n");
    let o = cpb(&["verify", s(&empty), "--suite", "convergence", "--instances", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let cfg = write(&dir, "closed.ini", CLOSED);
    let o = cpb(&["verify", s(&cfg), "--suite", "timescale", "--instances", "300"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn converge_table() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "aa.ini", ADDED_ARRIVAL);
    let o = cpb(&["converge", s(&cfg), "--m-list", "64,128,256"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = records(&stdout(&o));
    assert_eq!(rows.len(), 3);
    assert!(rows[0]["status"].starts_with("inadmissible"));
    assert_eq!(rows[1]["status"], "ok");
    assert!(num(&rows[2]["error"]) < num(&rows[1]["error"]));
}

#[test]
fn unit_speeds_are_the_identity() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "aa.ini", ADDED_ARRIVAL);
    let o = cpb(&["transform", s(&cfg), "--gammas", "1,1,1"]);
    assert_eq!(o.status.code(), Some(0));
    let before = ModelConfig::parse(ADDED_ARRIVAL).unwrap();
    let after = ModelConfig::parse(&stdout(&o)).unwrap();
    assert_eq!(after.history, before.history);
    let (a, b) = (after.rates.unwrap(), before.rates.unwrap());
    for k in 0..4 {
        assert_eq!(a.pre(k), b.pre(k));
        assert_eq!(a.post(k), b.post(k));
    }
    assert_eq!(after.changepoint, before.changepoint);
}

#[test]
fn regularize_makes_differences_increase() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "flat.ini", "[rates]\npre = 1, 2, 3\npost = 3, 3.5, 3.6\n[history]\narrivals = 0.2, 0.9\nhorizon = 2\n");
    let out = dir.path().join("out.ini");
    let map = dir.path().join("map.csv");
    let o = cpb(&["transform", s(&cfg), "--regularize", "--out", s(&out), "--map", s(&map)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("gammas = "));
    let t = ModelConfig::parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let rates = t.rates.unwrap();
    assert!(validate_rates(&rates, rates.len() - 1).unwrap().catania);
    let rows = records(&std::fs::read_to_string(&map).unwrap());
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2]["event"], "horizon");
    assert_eq!(num(&rows[0]["mapped"]), 0.2);

    let bad = write(&dir, "bad.ini", "[rates]\npre = 1, 2\npost = 3, 2\n");
    assert_eq!(cpb(&["transform", s(&bad), "--regularize"]).status.code(), Some(3));
}

#[test]
fn inverse_speeds_restore_rates() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "aa.ini", ADDED_ARRIVAL);
    let gammas = [0.3, 2.7, 11.0];
    let fwd: Vec<String> = gammas.iter().map(|g| format!("{g:?}")).collect();
    let inv: Vec<String> = gammas.iter().map(|g| format!("{:?}", 1.0 / g)).collect();
    let mid = dir.path().join("mid.ini");
    let back = dir.path().join("back.ini");
    assert_eq!(cpb(&["transform", s(&cfg), "--gammas", &fwd.join(","), "--out", s(&mid)]).status.code(), Some(0));
    assert_eq!(cpb(&["transform", s(&mid), "--gammas", &inv.join(","), "--out", s(&back)]).status.code(), Some(0));
    let a = ModelConfig::parse(ADDED_ARRIVAL).unwrap().rates.unwrap();
    let b = ModelConfig::parse(&std::fs::read_to_string(&back).unwrap()).unwrap().rates.unwrap();
    for k in 0..5 {
        assert!((a.pre(k) - b.pre(k)).abs() <= 1e-14 * a.pre(k));
        assert!((a.post(k) - b.post(k)).abs() <= 1e-14 * a.post(k));
    }
}

#[test]
fn transform_requires_a_clock() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "aa.ini", ADDED_ARRIVAL);
    assert_eq!(cpb(&["transform", s(&cfg)]).status.code(), Some(2));
}
