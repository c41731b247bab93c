use robustdec::dec::{offset_dec_table, DecTable};
use robustdec::error::Error;
use robustdec::harness::{run_experiment, Scenario, CSV_HEADER};
use robustdec::oracle::{self, simplex_grid};
use robustdec::prob::{hellinger_project, Dist, ImpreciseBelief};
use std::path::{Path, PathBuf};

fn scenario(name: &str) -> Scenario {
    Scenario::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))).unwrap()
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("robustdec-harness-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

const SMALL_BANDIT: &str = r#"
name = "small"
kind = "robust-bandit"
rounds = 30
delta = 0.1

[bandit]
outcomes = ["0", "1"]
reward = [[0.0, 1.0], [0.0, 1.0]]
true_models = ["a"]

[[bandit.models]]
label = "a"
arms = [{ backend = "halfspace", g = [0.0, 1.0], c = 0.6 }, { backend = "singleton", dist = [0.5, 0.5] }]

[[bandit.models]]
label = "b"
arms = [{ backend = "singleton", dist = [0.6, 0.4] }, { backend = "full-simplex" }]
"#;

#[test]
fn bundled_scenarios_validate() {
    for name in ["rue_three_arm", "classical_bandit", "halfspace_bandit", "two_policy_toy", "linear_cover", "rmdp_small"] {
        scenario(name).validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn zero_rounds_give_an_empty_table_and_a_valid_summary() {
    let mut sc = Scenario::from_toml(SMALL_BANDIT).unwrap();
    sc.rounds = 0;
    let dir = scratch("zero");
    let exp = run_experiment(&sc, &dir, None, None).unwrap();
    let csv = std::fs::read_to_string(dir.join("small_seed0.csv")).unwrap();
    assert_eq!(csv, format!("{}\n", CSV_HEADER.join(",")));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("small_seed0.json")).unwrap()).unwrap();
    assert_eq!(json["T"], 0);
    assert_eq!(json["cum_regret"], 0.0);
    assert!(exp.aggregate.errors.is_empty());
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn summary_keys_come_in_report_order() {
    let sc = Scenario::from_toml(SMALL_BANDIT).unwrap();
    let dir = scratch("keys");
    run_experiment(&sc, &dir, Some(1), Some(7)).unwrap();
    let text = std::fs::read_to_string(dir.join("small_seed7.json")).unwrap();
    let keys = ["scenario", "seed", "T", "delta", "cum_regret", "theorem1_rhs", "beta_bound", "beta_empirical", "alpha_bound", "alpha_empirical", "violations"];
    let pos: Vec<usize> = keys.iter().map(|k| text.find(&format!("\"{k}\"")).unwrap_or_else(|| panic!("missing {k}"))).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn reruns_are_byte_identical() {
    let sc = Scenario::from_toml(SMALL_BANDIT).unwrap();
    let (d1, d2) = (scratch("rerun1"), scratch("rerun2"));
    run_experiment(&sc, &d1, Some(3), None).unwrap();
    run_experiment(&sc, &d2, Some(3), None).unwrap();
    for s in 0..3 {
        for ext in ["csv", "json"] {
            let f = format!("small_seed{s}.{ext}");
            assert_eq!(std::fs::read(d1.join(&f)).unwrap(), std::fs::read(d2.join(&f)).unwrap(), "{f}");
        }
    }
    std::fs::remove_dir_all(d1).unwrap();
    std::fs::remove_dir_all(d2).unwrap();
}

#[test]
fn cumulative_columns_are_prefix_sums() {
    let sc = Scenario::from_toml(SMALL_BANDIT).unwrap();
    let dir = scratch("prefix");
    run_experiment(&sc, &dir, Some(1), None).unwrap();
    let mut rdr = csv::Reader::from_path(dir.join("small_seed0.csv")).unwrap();
    let mut sum = 0.0;
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        sum += rec[4].parse::<f64>().unwrap();
        assert!((sum - rec[5].parse::<f64>().unwrap()).abs() <= 1e-9);
        rows += 1;
    }
    assert_eq!(rows, 30);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn schema_violations_name_the_offending_fields() {
    let bad = SMALL_BANDIT.replace("true_models = [\"a\"]", "true_models = [\"zzz\"]");
    match Scenario::from_toml(&bad).unwrap().validate() {
        Err(Error::Validation(list)) => assert!(list.iter().any(|m| m.contains("bandit.true_models") && m.contains("zzz")), "{list:?}"),
        other => panic!("{other:?}"),
    }
    let bad = SMALL_BANDIT.replace("dist = [0.6, 0.4]", "dist = [0.6, 0.3, 0.1]");
    match Scenario::from_toml(&bad).unwrap().validate() {
        Err(Error::Validation(list)) => assert!(list.iter().any(|m| m.contains("bandit.models[1]")), "{list:?}"),
        other => panic!("{other:?}"),
    }
    let bad = SMALL_BANDIT.replace("delta = 0.1", "delta = 0.1\nhorizon = 5");
    assert!(matches!(Scenario::from_toml(&bad), Err(Error::Validation(_))));
    let bad = SMALL_BANDIT.replace("delta = 0.1", "delta = 1.5\nseeds = 0");
    match Scenario::from_toml(&bad).unwrap().validate() {
        Err(Error::Validation(list)) => assert_eq!(list.len(), 2, "{list:?}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn rmdp_scenarios_reject_kernels_above_one() {
    let mut sc = scenario("rmdp_small");
    let rmdp = sc.rmdp.as_mut().unwrap();
    rmdp.kernel.cells.retain(|c| c.h != 0);
    rmdp.kernel.cells.push(robustdec::harness::CellSpec { h: 0, s: 0, a: 0, belief: robustdec::harness::BeliefSpec::Singleton { dist: vec![0.0, 0.0, 0.5, 0.5] } });
    for c in rmdp.kernel.cells.iter_mut().filter(|c| c.h == 2) {
        c.belief = robustdec::harness::BeliefSpec::Singleton { dist: vec![0.0, 1.0] };
    }
    match sc.validate() {
        Err(Error::Validation(list)) => assert!(list.iter().any(|m| m.contains("1-bounded")), "{list:?}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn simplex_grid_counts() {
    assert_eq!(simplex_grid(1, 10).len(), 1);
    assert_eq!(simplex_grid(2, 10).len(), 11);
    assert_eq!(simplex_grid(3, 10).len(), 66);
    assert!(simplex_grid(4, 5).iter().all(|p| (p.iter().sum::<f64>() - 1.0).abs() < 1e-12));
}

#[test]
fn dec_grid_oracle_brackets_the_lp() {
    let table = DecTable::new(vec![0.8, 0.6], vec![0.5, 0.55, 0.3], vec![vec![0.1, 0.4, 0.0], vec![0.3, 0.0, 0.2]]).unwrap();
    let (lp, _) = offset_dec_table(&table, 0.7).unwrap();
    let input = r#"{"maxf": [0.8, 0.6], "fbar": [0.5, 0.55, 0.3], "loss": [[0.1, 0.4, 0.0], [0.3, 0.0, 0.2]], "gamma": 0.7, "step": 0.005}"#;
    let v = oracle::run("dec-grid", input).unwrap();
    let grid = v["value"].as_f64().unwrap();
    assert!(lp <= grid + 1e-9 && grid - lp < 2e-3, "lp {lp} grid {grid}");
    assert!(oracle::run("dec-grid", r#"{"maxf": [1], "fbar": [0], "loss": [[0]]}"#).is_err());
}

#[test]
fn project_grid_oracle_matches_projection() {
    let target = Dist::new(vec![0.2, 0.5, 0.3]).unwrap();
    let belief = ImpreciseBelief::halfspace(vec![1.0, 0.0, 0.5], 0.55).unwrap();
    let exact = hellinger_project(&target, &belief).unwrap().dist_sq;
    let input = r#"{"target": [0.2, 0.5, 0.3], "belief": {"backend": "halfspace", "g": [1.0, 0.0, 0.5], "c": 0.55}, "step": 0.002}"#;
    let grid = oracle::run("project-grid", input).unwrap()["dist_sq"].as_f64().unwrap();
    assert!(exact <= grid + 1e-9 && grid - exact < 2e-3, "exact {exact} grid {grid}");
}

#[test]
fn traj_mc_oracle_agrees_with_the_exact_distribution() {
    let input = r#"{
        "horizon": 1, "states": 2, "actions": 2,
        "cells": [[0.3, 0.2, 0.4, 0.1], [0.5, 0.5], [0.9, 0.1], [0.2, 0.8], [0.6, 0.4]],
        "policy": [[0.7, 0.3], [0.1, 0.9]],
        "samples": 20000, "seed": 3
    }"#;
    let rows = oracle::run("traj-mc", input).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 16);
    let total: f64 = rows.iter().map(|r| r["exact"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(rows.iter().all(|r| r["z"].as_f64().unwrap().abs() < 4.5));
    assert!(oracle::run("nope", "{}").is_err());
}
