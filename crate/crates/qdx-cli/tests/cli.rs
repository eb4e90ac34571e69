//! End-to-end checks of the command-line surface: JSON in, JSON out,
//! exit codes as documented.

use std::process::Command;

fn qdx() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qdx"))
}

fn write_temp(name: &str, content: &str) -> String {
    let dir = std::env::temp_dir().join("qdx-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path.to_string_lossy().into_owned()
}

fn two_slope_system() -> String {
    let sys = serde_json::json!({
        "diag": [
            {"type": "const", "mu": 0, "mat": [[[1.5, 0.3]]]},
            {"type": "const", "mu": 2, "mat": [[[1.0, 0.0]]]}
        ],
        "upper": {
            "0,1": {
                "rows": 1, "cols": 1,
                "entries": [[{"window": [0, 2], "coeffs": {"0": [0.7, -0.2], "2": [0.1, 0.4]}}]]
            }
        }
    });
    write_temp("sys.json", &sys.to_string())
}

#[test]
fn newton_subcommand() {
    let op = write_temp("op.json", "[[0,-1],[1,-1],[2,0]]");
    let out = qdx().args(["newton", "--op", &op]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["slopes"], serde_json::json!([[-1, 1], [0, 1]]));
    assert_eq!(v["mults"], serde_json::json!([1, 1]));
}

#[test]
fn gr_normalize_sum_alien_pipeline() {
    let sys = two_slope_system();

    let out = qdx().args(["gr", "--system", &sys]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["upper"].as_object().unwrap().is_empty());

    let out = qdx().args(["normalize", "--system", &sys, "--q", "4"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["certified"].as_bool().unwrap());
    assert!(v["residual"].as_f64().unwrap() < 1e-10);

    let out = qdx()
        .args(["sum", "--system", &sys, "--direction", "1.2,0.9", "--q", "4"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["numerators"]["0,1"].is_object());

    let out = qdx().args(["alien", "--system", &sys, "--all", "--q", "4"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 4, "δ² = 4 blocks for δ = 2");
    for b in v.as_array().unwrap() {
        assert!(b["N"].is_array());
        assert_eq!(b["delta"], 2);
    }

    let out = qdx()
        .args(["pipeline", "--input", &sys, "--steps", "newton,gr,normalize", "--q", "4"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let steps: Vec<&str> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["step"].as_str().unwrap())
        .collect();
    assert_eq!(steps, vec!["newton", "gr", "normalize"]);

    // empty steps echo the validated input
    let out = qdx().args(["pipeline", "--input", &sys, "--q", "4"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["step"], "echo");
}

#[test]
fn verify_exit_codes_and_determinism() {
    let out = qdx().args(["verify", "theta", "--q", "4"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out2 = qdx().args(["verify", "theta", "--q", "4"]).output().unwrap();
    assert_eq!(out.stdout, out2.stdout, "reports must be byte-identical for a fixed seed");

    // unknown suite → input error (2)
    let out = qdx().args(["verify", "bogus", "--q", "4"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // τ with |q| < 1 → input error (2)
    let out = qdx().args(["verify", "theta", "--tau", "0,0.22"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // bad q: dependent checks are skipped, suite still passes
    let out = qdx().args(["verify", "theta", "--q=-6.13370740623622,0"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let skipped = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["status"] == "skip");
    assert!(skipped, "expected a skipped good-q-dependent check");
}

#[test]
fn act_accepts_the_pure_group_element_format() {
    // (λ, t, k₁, k₂): λ acts trivially on symbols, t scales by t^δ,
    // γ₁ by γ₁(β)
    let out = qdx()
        .args([
            "act",
            "--element",
            r#"{"lambda":[0.5,0],"t":[2.0,0],"k1":0,"k2":0}"#,
            "--symbol",
            r#"{"kind":"graded","delta":3,"beta":{"rep":[1.1,0.2],"base_r":2},"l":0}"#,
            "--r",
            "2",
            "--q",
            "4",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["coeff"][0].as_f64().unwrap() - 8.0).abs() < 1e-12, "t^δ = 2³");
    assert_eq!(v["l"], 0);
}

#[test]
fn act_and_basis() {
    let out = qdx()
        .args([
            "act",
            "--element",
            r#"{"x":[1,3],"k1":0,"k2":0}"#,
            "--symbol",
            r#"{"kind":"graded","delta":2,"beta":{"rep":[1.1,0.2],"base_r":2},"l":1}"#,
            "--r",
            "2",
            "--q",
            "4",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // e^{2iπ·2/3} on a δ = 2 symbol
    let coeff = v["coeff"].as_array().unwrap();
    let re = coeff[0].as_f64().unwrap();
    let im = coeff[1].as_f64().unwrap();
    let want = (std::f64::consts::TAU * 2.0 / 3.0).cos();
    assert!((re - want).abs() < 1e-12 && (im - (std::f64::consts::TAU * 2.0 / 3.0).sin()).abs() < 1e-12);

    let out = qdx().args(["basis", "--a", "1.6,0.5", "--delta", "3", "--q", "4"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["entries"].as_array().unwrap().len(), 3);
    assert!(v["vandermonde_residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn ramify_paths() {
    let sys = two_slope_system();
    let out = qdx().args(["ramify", "--system", &sys, "--r", "2", "--q", "4"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["newton"][1]["slope"], serde_json::json!([4, 1]));

    // embed A' = z' at r = 2: ambient (0, 1; q' z, 0)
    let aprime = serde_json::json!({
        "rows": 1, "cols": 1,
        "entries": [[{"window": [1, 1], "coeffs": {"1": [1.0, 0.0]}}]]
    });
    let path = write_temp("aprime.json", &aprime.to_string());
    let out = qdx()
        .args(["ramify", "--system", &path, "--r", "2", "--embed", "--q", "4"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let amb = &v["ambient"]["entries"];
    assert_eq!(amb[0][1]["coeffs"]["0"], serde_json::json!([1.0, 0.0]));
    assert!((amb[1][0]["coeffs"]["1"][0].as_f64().unwrap() - 2.0).abs() < 1e-12);
}
