mod common;

use std::fs;

use common::*;
use gbt_trust_core::data::{load_csv, train_test_split, Table};
use gbt_trust_core::gbt::{deserialize_model, rmse};
use gbt_trust_core::rng::stream;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

#[test]
fn generate_writes_panel_sidecar_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let csv = panel(dir.path(), 3, 40, 1);
    let text = fs::read_to_string(&csv).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.ends_with("recovery,spread5"), "{header}");
    assert_eq!(text.lines().count(), 1 + 3 * 40);
    let gen = dir.path().join("gen");
    assert!(gen.join("lambda.csv").is_file());
    let m = read_json(&gen.join("manifest-generate.json"));
    assert_eq!(m["command"], "generate");
    assert_eq!(m["seeds"]["panel"], 1);
    assert_eq!(m["artifacts"].as_array().unwrap().len(), 2);
}

#[test]
fn generate_accepts_heavy_missingness() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = spec(2, 50, 3);
    spec["panel"]["missing_rate"] = json!(0.9);
    let p = write_json(&dir.path().join("spec.json"), &spec);
    let out = dir.path().join("gen");
    ok(&["generate", "--config", s(&p), "--out", s(&out)]);
    let text = fs::read_to_string(out.join("panel.csv")).unwrap();
    let empty = text
        .lines()
        .skip(1)
        .flat_map(|l| l.split(',').take(5).map(str::to_owned).collect::<Vec<_>>())
        .filter(|c| c.is_empty() || c == "NA")
        .count();
    assert!(empty > 0, "no missing covariates were written");
}

#[test]
fn generate_rejects_inverted_range_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = spec(2, 10, 0);
    spec["panel"]["covariates"][1]["low"] = json!(2.0);
    let p = write_json(&dir.path().join("spec.json"), &spec);
    let r = gbt(&["generate", "--config", s(&p), "--out", s(&dir.path().join("o"))]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("volatility"), "{}", r.stderr);
}

#[test]
fn train_holds_out_thirty_percent_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let csv = panel(dir.path(), 2, 100, 0);
    let cfg = write_json(
        &dir.path().join("cfg.json"),
        &json!({ "n_trees": 20, "bag_fraction": 1.0, "max_depth": 3 }),
    );
    let out = dir.path().join("train");
    let r = ok(&["train", "--data", s(&csv), "--config", s(&cfg), "--out", s(&out)]);
    assert!(r.stdout.contains("holdout_rmse="), "{}", r.stdout);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,gradient_norm,train_rmse,valid_rmse\n"));
    assert_eq!(trace.lines().count(), 21);
    let model = read_json(&out.join("model.json"));
    let root_rows = model.to_string();
    // every tree is fitted on the full 140-row training part
    assert!(root_rows.contains("\"n_rows\":140"), "training part is not 70%");
}

#[test]
fn train_without_holdout_has_no_valid_column() {
    let dir = tempfile::tempdir().unwrap();
    let csv = panel(dir.path(), 2, 50, 0);
    let cfg = small_config(dir.path(), 10);
    let out = dir.path().join("train");
    let r = ok(&["train", "--data", s(&csv), "--config", s(&cfg), "--holdout", "0", "--out", s(&out)]);
    assert!(!r.stdout.contains("holdout_rmse"));
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,gradient_norm,train_rmse\n"));
}

#[test]
fn train_rejects_bad_holdout_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let csv = panel(dir.path(), 2, 30, 0);
    let out = dir.path().join("t");
    let r = gbt(&["train", "--data", s(&csv), "--holdout", "1.5", "--out", s(&out)]);
    assert_eq!(r.code, 4, "{}", r.stderr);
    let bad = write_json(&dir.path().join("bad.json"), &json!({ "shrinkage": 0.0 }));
    let r = gbt(&["train", "--data", s(&csv), "--config", s(&bad), "--out", s(&out)]);
    assert_eq!(r.code, 4, "{}", r.stderr);
    let r = gbt(&["train", "--data", s(&csv), "--target", "nope", "--out", s(&out)]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    let r = gbt(&["train", "--data", s(&dir.path().join("missing.csv")), "--out", s(&out)]);
    assert_eq!(r.code, 2, "{}", r.stderr);
}

#[test]
fn train_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let csv = panel(dir.path(), 2, 60, 4);
    let cfg = small_config(dir.path(), 25);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["train", "--data", s(&csv), "--config", s(&cfg), "--seed", "9", "--out", s(&a)]);
    ok(&["train", "--data", s(&csv), "--config", s(&cfg), "--seed", "9", "--out", s(&b)]);
    for f in ["model.json", "trace.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn tune_full_grid_has_243_rows_and_ignores_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let csv = panel(dir.path(), 1, 60, 2);
    let grid = write_json(
        &dir.path().join("grid.json"),
        &json!({
            "shrinkage": [0.05, 0.1, 0.3],
            "max_depth": [1, 2, 3],
            "min_node_rows": [1, 3, 5],
            "bag_fraction": [0.7, 0.8, 1.0],
            "column_sample": [0.6, 0.8, 1.0]
        }),
    );
    let base = write_json(&dir.path().join("base.json"), &json!({ "n_trees": 3 }));
    let mut boards = Vec::new();
    for workers in ["1", "8"] {
        let out = dir.path().join(format!("tune{workers}"));
        ok(&[
            "tune", "--data", s(&csv), "--grid", s(&grid), "--config", s(&base), "--k", "3",
            "--workers", workers, "--out", s(&out),
        ]);
        let text = fs::read_to_string(out.join("leaderboard.csv")).unwrap();
        assert_eq!(text.lines().count(), 244);
        let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
        let wt = header.iter().position(|h| *h == "wall_time").unwrap();
        let stripped: Vec<String> = text
            .lines()
            .map(|l| {
                let mut c: Vec<&str> = l.split(',').collect();
                c.remove(wt);
                c.join(",")
            })
            .collect();
        boards.push((stripped, fs::read(out.join("best_config.json")).unwrap()));
    }
    assert_eq!(boards[0], boards[1]);
}

#[test]
fn tune_rejects_empty_grid() {
    let dir = tempfile::tempdir().unwrap();
    let csv = panel(dir.path(), 1, 30, 0);
    for grid in [json!({}), json!({ "shrinkage": [] }), json!({ "learning": [0.1] })] {
        let g = write_json(&dir.path().join("g.json"), &grid);
        let r = gbt(&["tune", "--data", s(&csv), "--grid", s(&g), "--out", s(&dir.path().join("t"))]);
        assert_eq!(r.code, 4, "{grid}: {}", r.stderr);
    }
}

fn trained(dir: &std::path::Path, firms: usize, periods: usize) -> (std::path::PathBuf, std::path::PathBuf) {
    let csv = panel(dir, firms, periods, 5);
    let cfg = small_config(dir, 40);
    let out = dir.join("train");
    ok(&["train", "--data", s(&csv), "--config", s(&cfg), "--out", s(&out)]);
    (csv, out.join("model.json"))
}

#[test]
fn explain_pdp_on_recovery_falls_and_embeds_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, model) = trained(dir.path(), 4, 100);
    let out = dir.path().join("ex");
    ok(&[
        "explain", "--model", s(&model), "--data", s(&csv), "--method", "pdp", "--feature",
        "recovery", "--out", s(&out),
    ]);
    let a = read_json(&out.join("explain-pdp-recovery.json"));
    assert_eq!(a["format"], "gbt-trust-explain/1");
    assert_eq!(a["method"], "pdp");
    let v: Vec<f64> = a["result"]["curve"]["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!(v.len() >= 10);
    assert!(v[0] > v[v.len() - 1], "recovery PDP does not fall: {v:?}");
    assert!(a["result"]["thresholds"].is_array());
    assert!(out.join("manifest-explain-pdp-recovery.json").is_file());
}

#[test]
fn explain_exact_shap_on_ten_features_is_efficient() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec10.json");
    let names: Vec<String> = (0..9).map(|i| format!("x{i}")).collect();
    let covs: Vec<_> = names.iter().map(|n| json!({ "name": n, "low": 0.0, "high": 1.0 })).collect();
    let mut coefs = vec![-4.0];
    coefs.extend((0..9).map(|i| 0.3 * i as f64 - 1.0));
    write_json(
        &spec_path,
        &json!({
            "model": { "coefficients": coefs, "feature_names": names },
            "panel": {
                "n_firms": 3, "n_periods": 100, "seed": 0, "covariates": covs,
                "recovery_range": [0.1, 0.7], "missing_rate": 0.0
            }
        }),
    );
    let gen = dir.path().join("gen");
    ok(&["generate", "--config", s(&spec_path), "--out", s(&gen)]);
    let csv = gen.join("panel.csv");
    let cfg = small_config(dir.path(), 30);
    let tr = dir.path().join("train");
    ok(&["train", "--data", s(&csv), "--config", s(&cfg), "--out", s(&tr)]);
    let out = dir.path().join("ex");
    ok(&[
        "explain", "--model", s(&tr.join("model.json")), "--data", s(&csv), "--method", "shap",
        "--row", "7", "--exact", "--background", "40", "--out", s(&out),
    ]);
    let a = read_json(&out.join("explain-shap-row7.json"));
    let r = &a["result"];
    let phi: Vec<f64> = r["phi"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(phi.len(), 10);
    let pred = r["prediction"].as_f64().unwrap();
    let base = r["baseline"].as_f64().unwrap();
    let gap = (phi.iter().sum::<f64>() - (pred - base)).abs();
    assert!(gap <= 1e-8 * pred.abs().max(1.0), "efficiency gap {gap}");
    assert_eq!(a["params"]["exact"], true);
}

#[test]
fn explain_argument_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, model) = trained(dir.path(), 2, 50);
    let out = dir.path().join("ex");
    let base = ["explain", "--model", s(&model), "--data", s(&csv), "--out", s(&out)];
    let with = |extra: &[&str]| {
        let mut a = base.to_vec();
        a.extend_from_slice(extra);
        gbt(&a)
    };
    let r = with(&["--method", "anchors"]);
    assert_eq!(r.code, 4);
    for m in ["vi", "pdp", "ice", "lime", "shap"] {
        assert!(r.stderr.contains(m), "method list lacks {m}: {}", r.stderr);
    }
    assert_eq!(with(&["--method", "pdp"]).code, 4);
    assert_eq!(with(&["--method", "pdp", "--feature", "colour"]).code, 4);
    assert_eq!(with(&["--method", "lime"]).code, 4);
    assert_eq!(with(&["--method", "shap", "--row", "100000"]).code, 4);

    // a model trained on other columns does not fit this table
    let other = dir.path().join("other.csv");
    let text = fs::read_to_string(&csv).unwrap().replacen("leverage", "gearing", 1);
    fs::write(&other, text).unwrap();
    let r = gbt(&[
        "explain", "--model", s(&model), "--data", s(&other), "--method", "vi", "--out", s(&out),
    ]);
    assert_eq!(r.code, 3, "{}", r.stderr);
}

#[test]
fn explain_vi_reports_both_modes() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, model) = trained(dir.path(), 2, 80);
    let out = dir.path().join("ex");
    ok(&["explain", "--model", s(&model), "--data", s(&csv), "--method", "vi", "--repeats", "2", "--out", s(&out)]);
    let a = read_json(&out.join("explain-vi.json"));
    assert_eq!(a["result"]["gain"]["mode"], "gain");
    assert_eq!(a["result"]["permutation"]["mode"], "permutation");
    assert_eq!(a["result"]["gain"]["entries"].as_array().unwrap().len(), 6);
}

#[test]
fn audit_lists_twelve_properties_and_recomputes_robustness() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    fs::create_dir(&runs).unwrap();
    let csv = panel(&runs, 3, 60, 8);
    let cfg = small_config(dir.path(), 30);
    let train = runs.join("train");
    ok(&["train", "--data", s(&csv), "--config", s(&cfg), "--seed", "3", "--out", s(&train)]);
    ok(&["summarize", "--data", s(&csv), "--out", s(&runs.join("sum"))]);
    let grid = write_json(&dir.path().join("grid.json"), &json!({ "max_depth": [1, 2] }));
    let base = write_json(&dir.path().join("base.json"), &json!({ "n_trees": 10 }));
    ok(&[
        "tune", "--data", s(&csv), "--grid", s(&grid), "--config", s(&base), "--k", "3", "--out",
        s(&runs.join("tune")),
    ]);
    let model = train.join("model.json");
    let ex = runs.join("ex");
    for extra in [
        vec!["--method", "vi", "--repeats", "2"],
        vec!["--method", "pdp", "--feature", "recovery"],
        vec!["--method", "ice", "--feature", "leverage"],
        vec!["--method", "lime", "--row", "2", "--samples", "500"],
        vec!["--method", "shap", "--row", "2", "--background", "20"],
    ] {
        let mut a = vec!["explain", "--model", s(&model), "--data", s(&csv), "--out", s(&ex)];
        a.extend(extra);
        ok(&a);
    }
    let out = dir.path().join("audit");
    ok(&["audit", "--dir", s(&runs), "--out", s(&out), "--noise", "0.01", "--seed", "11"]);
    let r = read_json(&out.join("audit.json"));
    let mut all = Vec::new();
    for g in ["value", "evaluation", "selection"] {
        for e in r[g].as_array().unwrap() {
            all.push((e["property"].as_str().unwrap().to_string(), e["status"].as_str().unwrap().to_string(), e.clone()));
        }
    }
    assert_eq!(all.len(), 12);
    let status = |p: &str| all.iter().find(|e| e.0 == p).map(|e| e.1.clone()).unwrap();
    for p in ["accuracy", "reliability", "reproducibility", "transparency", "explainability/interpretability", "robustness"] {
        assert_eq!(status(p), "evaluated", "{p}");
    }
    assert_eq!(status("usability"), "evidence only");
    for p in ["justice", "fairness", "availability", "security/privacy", "accountability"] {
        assert_eq!(status(p), "out of scope — not evaluated", "{p}");
    }
    let methods = &all.iter().find(|e| e.0 == "explainability/interpretability").unwrap().2["evidence"][0]["metrics"]["methods"];
    assert_eq!(methods, &json!(["ice", "lime", "pdp", "shap", "vi"]));

    // independent rerun of the noise experiment
    let robust = &all.iter().find(|e| e.0 == "robustness").unwrap().2["evidence"][0]["metrics"];
    let t = load_csv(&csv, "spread5").unwrap().table;
    let (_, hold) = train_test_split(&t, 1.0 - 0.3, 3).unwrap();
    let m = deserialize_model(&fs::read(&model).unwrap()).unwrap();
    let clean = rmse(&m.predict_table(&hold).unwrap(), hold.target()).unwrap();
    let d = hold.n_features();
    let mut sd = vec![0.0; d];
    for (j, s) in sd.iter_mut().enumerate() {
        let col: Vec<f64> = (0..hold.n_rows()).map(|i| hold.row(i)[j]).collect();
        let mu = col.iter().sum::<f64>() / col.len() as f64;
        *s = (col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / col.len() as f64).sqrt();
    }
    let mut rng = stream(11, &[0x0B05]);
    let mut rows = Vec::new();
    for i in 0..hold.n_rows() {
        let mut row = hold.row(i).to_vec();
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            row[j] += 0.01 * sd[j] * z;
        }
        rows.push(row);
    }
    let noisy = Table::from_rows(hold.feature_names().to_vec(), &rows, hold.target().to_vec(), "spread5").unwrap();
    let perturbed = rmse(&m.predict_table(&noisy).unwrap(), noisy.target()).unwrap();
    assert_eq!(robust["rmse"].as_f64().unwrap(), clean);
    assert_eq!(robust["rmse_delta"].as_f64().unwrap(), perturbed - clean);
}

#[test]
fn audit_of_empty_directory_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let r = gbt(&["audit", "--dir", s(dir.path())]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    let r = gbt(&["audit", "--dir", s(&dir.path().join("absent"))]);
    assert_eq!(r.code, 2, "{}", r.stderr);
}

#[test]
fn replay_reproduces_and_detects_changed_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = panel(dir.path(), 2, 40, 6);
    let cfg = small_config(dir.path(), 15);
    let train = dir.path().join("train");
    ok(&["train", "--data", s(&csv), "--config", s(&cfg), "--out", s(&train)]);
    let manifest = train.join("manifest-train.json");
    let again = dir.path().join("again");
    let r = ok(&["replay", "--manifest", s(&manifest), "--out", s(&again)]);
    assert!(r.stdout.contains("artifacts_matched=2"), "{}", r.stdout);
    assert_eq!(fs::read(train.join("model.json")).unwrap(), fs::read(again.join("model.json")).unwrap());

    // changing the recorded data breaks the chain
    let mut text = fs::read_to_string(&csv).unwrap();
    let first = text.lines().nth(1).unwrap().to_owned();
    text.push_str(&first);
    text.push('\n');
    fs::write(&csv, text).unwrap();
    let r = gbt(&["replay", "--manifest", s(&manifest), "--out", s(&dir.path().join("third"))]);
    assert_eq!(r.code, 1, "{}", r.stderr);

    let r = gbt(&["replay", "--manifest", s(&dir.path().join("none.json")), "--out", s(&again)]);
    assert_eq!(r.code, 2);
}

#[test]
fn thread_cap_env_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let r = gbt_in(dir.path(), &["audit", "--dir", "."], &[("GBT_TRUST_THREADS", "zero")]);
    assert_eq!(r.code, 4, "{}", r.stderr);
}
