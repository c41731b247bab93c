use robustdec_web::{fuzzy_dec_json, project_json, simulate_json, MAX_DEMO_ROUNDS};
use serde_json::Value;

const TOY: &str = r#"
name = "toy"
kind = "robust-bandit"
rounds = 25
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
fn projection_onto_a_halfspace_lands_on_its_boundary() {
    let out: Value = serde_json::from_str(&project_json(r#"{"target": [0.8, 0.2], "belief": {"backend": "halfspace", "g": [0.0, 1.0], "c": 0.6}}"#).unwrap()).unwrap();
    let p = out["point"].as_array().unwrap();
    assert!((p[1].as_f64().unwrap() - 0.6).abs() < 1e-6);
    let want = 1.0 - (0.8f64 * 0.4).sqrt() - (0.2f64 * 0.6).sqrt();
    assert!((out["dist_sq"].as_f64().unwrap() - want).abs() < 1e-6);
}

#[test]
fn fuzzy_dec_of_a_single_model_with_zero_gap_is_zero() {
    let out: Value = serde_json::from_str(&fuzzy_dec_json(r#"{"maxf": [0.5], "fbar": [0.5, 0.2], "loss": [[0.0, 0.1]], "eps": 0.1}"#).unwrap()).unwrap();
    assert!(out["value"].as_f64().unwrap().abs() < 1e-9);
    assert!((out["p"][0].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn simulate_returns_summary_and_csv() {
    let out: Value = serde_json::from_str(&simulate_json(TOY, 4).unwrap()).unwrap();
    assert_eq!(out["summary"]["T"], 25);
    assert_eq!(out["summary"]["seed"], 4);
    let csv = out["csv"].as_str().unwrap();
    assert!(csv.starts_with("t,action,outcome,reward,inst_regret,cum_regret,inacc_ledger,opt_ledger,surviving,star,flags\n"));
    assert_eq!(csv.lines().count(), 26);
    assert_eq!(simulate_json(TOY, 4).unwrap(), simulate_json(TOY, 4).unwrap());
}

#[test]
fn bad_inputs_are_reported_not_panicked() {
    assert!(project_json(r#"{"target": [0.5, 0.5], "belief": {"backend": "halfspace", "g": [0.0, 1.0, 0.0], "c": 0.6}}"#).is_err());
    assert!(fuzzy_dec_json(r#"{"maxf": [0.5], "fbar": [0.5], "loss": [[0.0]], "eps": -1}"#).is_err());
    assert!(simulate_json("name = 3", 0).is_err());
    let long = TOY.replace("rounds = 25", &format!("rounds = {}", MAX_DEMO_ROUNDS + 1));
    assert!(simulate_json(&long, 0).unwrap_err().contains("at most"));
}
