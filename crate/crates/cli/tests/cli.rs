use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use powermap::features::parse_dataset_csv;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_powermap"));
    c.env_remove("POWERMAP_SEED").env_remove("POWERMAP_OUTPUT_DIR");
    c
}

fn run(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut c = bin();
    c.args(args);
    if let Some(d) = out_dir {
        c.env("POWERMAP_OUTPUT_DIR", d);
    }
    c.output().expect("binary runs")
}

fn ok(args: &[&str], out_dir: Option<&Path>) -> String {
    let o = run(args, out_dir);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(args: &[&str]) -> i32 {
    run(args, None).status.code().expect("exit code")
}

fn write(path: &Path, text: &str) -> PathBuf {
    fs::write(path, text).unwrap();
    path.to_path_buf()
}

const SMALL: &str = r#"{
  "seed": 11,
  "simulation": {"family": "REG", "k": 3, "sims": 60},
  "sampler": {"total": 150, "beta_domain": [0.05, 0.6]},
  "simulate": {"chunk": 40},
  "split": {"train_fraction": 0.3},
  "train": {"epochs": 40, "task": {"kind": "classify", "boundary": 0.8}},
  "baseline": {"max_iter": 200}
}"#;

fn with(base: &str, patch: impl FnOnce(&mut serde_json::Value)) -> String {
    let mut v: serde_json::Value = serde_json::from_str(base).unwrap();
    patch(&mut v);
    v.to_string()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap());
    }
    out
}

/// The full pipeline into `out`.
fn pipeline(tmp: &Path, out: &Path) {
    let cfg = write(&tmp.join("small.json"), SMALL);
    let c6 = write(&tmp.join("c6.json"), &with(SMALL, |v| v["train"]["task"]["boundary"] = 0.6.into()));
    let reg = write(&tmp.join("reg.json"), &with(SMALL, |v| v["train"]["task"] = serde_json::json!({"kind": "regress"})));
    let (cfg, c6, reg) = (cfg.to_str().unwrap(), c6.to_str().unwrap(), reg.to_str().unwrap());
    let o = |name: &str| out.join(name).to_string_lossy().into_owned();
    ok(&["sample", "--config", cfg], Some(out));
    ok(&["simulate", "--config", cfg], Some(out));
    ok(&["train", "--config", cfg], Some(out));
    ok(&["train", "--config", c6, "--out", &o("c6.json"), "--report", &o("c6_report.json")], Some(out));
    ok(&["train", "--config", reg, "--out", &o("reg.json"), "--report", &o("reg_report.json")], Some(out));
    ok(&["transfer", "--config", cfg, "--parent", &o("checkpoint.json")], Some(out));
    ok(&["baseline", "--config", cfg], Some(out));
    ok(&["eval", "--config", cfg, "--checkpoint", &o("checkpoint.json")], Some(out));
    ok(&["eval", "--config", cfg, "--c1", &o("checkpoint.json"), "--c2", &o("c6.json"), "--report", &o("cascade.json")], Some(out));
    ok(&["eval", "--config", reg, "--checkpoint", &o("reg.json"), "--report", &o("reg_eval.json")], Some(out));
    for kind in ["manifold", "cluster"] {
        ok(&["plot", "--config", cfg, "--kind", kind], Some(out));
    }
    for kind in ["trend", "cost"] {
        ok(&["plot", "--config", cfg, "--kind", kind, "--reports", &o("train_report.json"), &o("baseline_report.json")], Some(out));
    }
}

#[test]
fn every_command_reruns_byte_identically() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    pipeline(tmp.path(), &a);
    pipeline(tmp.path(), &b);
    let (fa, fb) = (files(&a), files(&b));
    let names: Vec<&String> = fa.keys().collect();
    for expected in [
        "points.csv",
        "points.manifest.json",
        "dataset.csv",
        "dataset.manifest.json",
        "checkpoint.json",
        "checkpoint.manifest.json",
        "train_report.json",
        "transfer_checkpoint.json",
        "transfer_report.json",
        "baseline_report.json",
        "cluster_assignments.csv",
        "eval_report.json",
        "cascade.json",
        "reg_eval.json",
        "manifold.svg",
        "manifold.csv",
        "cluster.svg",
        "trend.csv",
        "cost.svg",
    ] {
        assert!(fa.contains_key(expected), "missing {expected} in {names:?}");
    }
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        assert!(bytes == &fb[name], "{name} differs between reruns");
    }
    assert!(!fa.keys().any(|n| n.ends_with(".partial") || n.ends_with(".tmp")));

    // train and eval agree on the held-out split
    let train: serde_json::Value = serde_json::from_slice(&fa["train_report.json"]).unwrap();
    let eval: serde_json::Value = serde_json::from_slice(&fa["eval_report.json"]).unwrap();
    assert_eq!(train["metrics"]["f1"]["value"], eval["metrics"]["f1"]["value"]);
    // cascade C1 equals plain evaluation at its boundary
    let cascade: serde_json::Value = serde_json::from_slice(&fa["cascade.json"]).unwrap();
    assert_eq!(cascade[0]["metrics"]["f1"]["value"], train["metrics"]["f1"]["value"]);
    assert_eq!(train["call_ratio"], 0.3);
    let reg: serde_json::Value = serde_json::from_slice(&fa["reg_eval.json"]).unwrap();
    assert!(reg["metrics"]["js"]["value"].as_f64().unwrap() < reg["metrics"]["js_random"]["value"].as_f64().unwrap());
}

#[test]
fn seed_override_changes_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp.path().join("c.json"), SMALL);
    let out = tmp.path().join("o");
    let pts = |seed: Option<&str>| {
        let mut c = bin();
        c.args(["sample", "--config", cfg.to_str().unwrap()]).env("POWERMAP_OUTPUT_DIR", &out);
        if let Some(s) = seed {
            c.env("POWERMAP_SEED", s);
        }
        assert!(c.status().unwrap().success());
        fs::read(out.join("points.csv")).unwrap()
    };
    let base = pts(None);
    assert_eq!(pts(Some("11")), base);
    assert_ne!(pts(Some("12")), base);
}

#[test]
fn interrupted_simulation_resumes_identically() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp.path().join("c.json"), SMALL);
    let cfg = cfg.to_str().unwrap();
    let (full, cut) = (tmp.path().join("full"), tmp.path().join("cut"));
    ok(&["sample", "--config", cfg], Some(&full));
    ok(&["simulate", "--config", cfg], Some(&full));

    ok(&["sample", "--config", cfg], Some(&cut));
    let msg = ok(&["simulate", "--config", cfg, "--limit", "70"], Some(&cut));
    assert!(msg.contains("70/150"), "{msg}");
    let partial = cut.join("dataset.csv.partial");
    assert!(partial.exists() && !cut.join("dataset.csv").exists());
    // a torn final line is discarded on resume
    let mut text = fs::read_to_string(&partial).unwrap();
    text.push_str("0.12,0.3");
    fs::write(&partial, text).unwrap();
    ok(&["simulate", "--config", cfg, "--limit", "33"], Some(&cut));
    let msg = ok(&["simulate", "--config", cfg], Some(&cut));
    assert!(msg.contains("103 resumed"), "{msg}");
    for f in ["dataset.csv", "dataset.manifest.json"] {
        assert_eq!(fs::read(full.join(f)).unwrap(), fs::read(cut.join(f)).unwrap(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(cut.join("dataset.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["compute_calls"], 150);
    assert!(!partial.exists());
}

#[test]
fn stale_partial_is_ignored() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp.path().join("c.json"), SMALL);
    let other = write(&tmp.path().join("d.json"), &with(SMALL, |v| v["simulation"]["sims"] = 61.into()));
    let out = tmp.path().join("o");
    ok(&["sample", "--config", cfg.to_str().unwrap()], Some(&out));
    ok(&["simulate", "--config", other.to_str().unwrap(), "--limit", "40"], Some(&out));
    let msg = ok(&["simulate", "--config", cfg.to_str().unwrap()], Some(&out));
    assert!(msg.contains("(0 resumed)"), "{msg}");
}

#[test]
fn null_points_have_nominal_power() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp.path().join("c.json"), &with(SMALL, |v| v["simulation"]["sims"] = 1000.into()));
    let mut pts = String::from("beta_1,beta_2,beta_3,N\n");
    for i in 0..20 {
        pts.push_str(&format!("0,0,0,{}\n", 20 + 9 * i));
    }
    let p = write(&tmp.path().join("null.csv"), &pts);
    let out = tmp.path().join("null_data.csv");
    ok(&["simulate", "--config", cfg.to_str().unwrap(), "--points", p.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    let rows = parse_dataset_csv(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), 20);
    for r in rows {
        assert!((0.02..=0.08).contains(&r.power), "{}", r.power);
    }
}

#[test]
fn zero_points_give_header_only_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp.path().join("c.json"), &with(SMALL, |v| v["sampler"]["total"] = 0.into()));
    let out = tmp.path().join("p.csv");
    ok(&["sample", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(fs::read_to_string(&out).unwrap(), "beta_1,beta_2,beta_3,N\n");
    // nothing to simulate is a runtime failure
    let args = ["simulate", "--config", cfg.to_str().unwrap(), "--points", out.to_str().unwrap()];
    assert_eq!(run(&args, Some(tmp.path())).status.code(), Some(3));
}

#[test]
fn empty_dataset_plots() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp.path().join("c.json"), SMALL);
    let ds = write(&tmp.path().join("empty.csv"), "beta_1,beta_2,beta_3,N,scaled_weight,power\n");
    for kind in ["manifold", "cluster"] {
        let svg = tmp.path().join(format!("{kind}.svg"));
        ok(&["plot", "--config", cfg.to_str().unwrap(), "--kind", kind, "--dataset", ds.to_str().unwrap(), "--out", svg.to_str().unwrap()], None);
        let text = fs::read_to_string(&svg).unwrap();
        assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>") && !text.contains("<circle"));
        assert_eq!(fs::read_to_string(svg.with_extension("csv")).unwrap().lines().count(), 1);
    }
}

#[test]
fn trend_and_cost_plots_follow_reports() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp.path().join("c.json"), SMALL);
    let out = tmp.path().join("o");
    ok(&["sample", "--config", cfg.to_str().unwrap()], Some(&out));
    ok(&["simulate", "--config", cfg.to_str().unwrap()], Some(&out));
    let mut reports = Vec::new();
    for f in [0.1, 0.2, 0.4, 0.6, 0.8] {
        let c = write(&tmp.path().join(format!("f{f}.json")), &with(SMALL, |v| v["split"]["train_fraction"] = f.into()));
        let r = out.join(format!("r{f}.json")).to_string_lossy().into_owned();
        ok(&["train", "--config", c.to_str().unwrap(), "--report", &r], Some(&out));
        reports.push(r);
    }
    let mut args = vec!["plot", "--config", cfg.to_str().unwrap(), "--kind", "trend", "--reports"];
    args.extend(reports.iter().map(String::as_str));
    ok(&args, Some(&out));
    let trend = fs::read_to_string(out.join("trend.csv")).unwrap();
    assert_eq!(trend.lines().count(), 6);
    let xs: Vec<&str> = trend.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(xs, ["0.1", "0.2", "0.4", "0.6", "0.8"]);

    args[4] = "cost";
    ok(&args, Some(&out));
    let cost = fs::read_to_string(out.join("cost.csv")).unwrap();
    let calls: Vec<u64> = cost.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    // each row cost one simulation call
    assert_eq!(calls, [15, 30, 60, 90, 120]);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let p = |name: &str| tmp.path().join(name).to_string_lossy().into_owned();
    let good = write(&tmp.path().join("good.json"), SMALL);
    let good = good.to_str().unwrap();
    write(&tmp.path().join("garbage.json"), "{not json");
    write(&tmp.path().join("unknown.json"), r#"{"seed": 1, "colour": 3}"#);
    write(&tmp.path().join("badk.json"), r#"{"seed": 1, "simulation": {"family": "REG", "k": 2}}"#);
    write(&tmp.path().join("nosampler.json"), r#"{"seed": 1, "simulation": {"family": "REG", "k": 3}}"#);
    write(&tmp.path().join("lowN.json"), &with(SMALL, |v| v["sampler"]["n_domain"] = serde_json::json!([3, 50])));

    assert_eq!(code(&["sample", "--config", &p("missing.json")]), 2);
    assert_eq!(code(&["sample", "--config", &p("garbage.json")]), 2);
    assert_eq!(code(&["sample", "--config", &p("unknown.json")]), 2);
    assert_eq!(code(&["sample", "--config", &p("badk.json")]), 2);
    assert_eq!(code(&["sample", "--config", &p("nosampler.json")]), 2);
    assert_eq!(code(&["sample", "--config", &p("lowN.json")]), 2);
    assert_eq!(code(&["sample"]), 2);
    assert_eq!(code(&["frobnicate", "--config", good]), 2);
    assert_eq!(code(&["plot", "--config", good, "--kind", "pie"]), 2);
    assert_eq!(code(&["plot", "--config", good, "--kind", "trend"]), 2);
    assert_eq!(code(&["eval", "--config", good, "--dataset", &p("d.csv")]), 2);
    let mut env_seed = bin();
    env_seed.args(["sample", "--config", good, "--out", &p("x.csv")]).env("POWERMAP_SEED", "minus one");
    assert_eq!(env_seed.status().unwrap().code(), Some(2));

    // runtime failures
    assert_eq!(code(&["simulate", "--config", good, "--points", &p("nope.csv"), "--out", &p("d.csv")]), 3);
    write(&tmp.path().join("bad_points.csv"), "beta_1,N\n0.1,30\n");
    assert_eq!(code(&["simulate", "--config", good, "--points", &p("bad_points.csv"), "--out", &p("d.csv")]), 3);
    write(&tmp.path().join("broken.csv"), "beta_1,beta_2,beta_3,N,power\n0.1,0.2,x,30,0.5\n");
    assert_eq!(code(&["train", "--config", good, "--dataset", &p("broken.csv")]), 3);

    // a training split with one class names the boundary
    let mut ds = String::from("beta_1,beta_2,beta_3,N,power\n");
    for i in 0..30 {
        ds.push_str(&format!("0.{i:02},0.1,0.1,{},0.5\n", 20 + i));
    }
    write(&tmp.path().join("flat.csv"), &ds);
    let o = run(&["train", "--config", good, "--dataset", &p("flat.csv"), "--out", &p("ck.json")], None);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("boundary 0.8"));

    assert_eq!(code(&["transfer", "--config", good, "--parent", &p("nope.json"), "--dataset", &p("flat.csv")]), 3);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn wider_child_is_an_incompatible_transfer() {
    let tmp = TempDir::new().unwrap();
    let parent_cfg = write(&tmp.path().join("p.json"), SMALL);
    let child_cfg = write(
        &tmp.path().join("c.json"),
        &with(SMALL, |v| {
            v["simulation"]["k"] = 5.into();
            v["sampler"]["total"] = 60.into();
            v["simulation"]["sims"] = 20.into();
        }),
    );
    let (pd, cd) = (tmp.path().join("parent"), tmp.path().join("child"));
    for (cfg, dir) in [(&parent_cfg, &pd), (&child_cfg, &cd)] {
        ok(&["sample", "--config", cfg.to_str().unwrap()], Some(dir));
        ok(&["simulate", "--config", cfg.to_str().unwrap()], Some(dir));
    }
    ok(&["train", "--config", parent_cfg.to_str().unwrap()], Some(&pd));
    let parent = pd.join("checkpoint.json");
    let o = run(&["transfer", "--config", child_cfg.to_str().unwrap(), "--parent", parent.to_str().unwrap()], Some(&cd));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("incompatible transfer"));
}
