// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

use selfnorm::changepoint::{self, TestKind};
use selfnorm::inference::{self, CiMethod, MultiplierLaw};
use selfnorm::simgen::{self, ModelConfig};
use serde_json::Value;

fn selfnorm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selfnorm"))
        .args(args)
        .output()
        .expect("spawn selfnorm")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json report")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok: String = std::iter::once("v\n".to_string())
        .chain((0..40).map(|i| format!("{}\n", (i * 7 % 11) as f64)))
        .collect();
    let ok = write(dir.path(), "ok.csv", &ok);
    let flat = write(
        dir.path(),
        "flat.csv",
        &"v\n"
            .chars()
            .chain("2\n".repeat(40).chars())
            .collect::<String>(),
    );
    let bad = write(dir.path(), "bad.csv", "v\n1\n2\nNA\n4\n");

    assert_eq!(code(&selfnorm(&["ci", &ok, "-k", "5"])), 0);
    assert_eq!(code(&selfnorm(&["ci", &ok])), 2, "no block length");
    assert_eq!(
        code(&selfnorm(&["ci", &ok, "-k", "5", "--k-schedule", "4,5"])),
        2
    );
    assert_eq!(code(&selfnorm(&["frobnicate"])), 2);
    let out = selfnorm(&["ci", &bad, "-k", "2"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));
    assert_eq!(
        code(&selfnorm(&["ci", &ok, "-k", "30"])),
        4,
        "one block only"
    );
    assert_eq!(
        code(&selfnorm(&["ci", &ok, "-k", "5", "--alpha", "1.5"])),
        4
    );
    assert_eq!(code(&selfnorm(&["ci", &flat, "-k", "5"])), 5);
    assert_eq!(
        code(&selfnorm(&["ci", "/definitely/not/here.csv", "-k", "5"])),
        6
    );
}

#[test]
fn simulate_round_trip_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sim.csv");
    let csv = csv.to_str().unwrap();
    let out = selfnorm(&[
        "simulate",
        "--n",
        "150",
        "--profile",
        "A3",
        "--error",
        "b2",
        "--beta",
        "3",
        "--lambda",
        "0.8",
        "--change-at",
        "60",
        "--seed",
        "11",
        "--out",
        csv,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let cfg = ModelConfig {
        n: 150,
        profile: "A3".into(),
        sigma: None,
        error: "b2".into(),
        theta: None,
        beta: Some(3.0),
        burn_in: None,
        truncation: None,
        mu: 0.0,
        lambda: Some(0.8),
        change_at: Some(60),
        seed: 11,
    };
    let x = simgen::generate(&cfg.to_model().unwrap()).unwrap();

    let mut rdr = csv::Reader::from_path(csv).unwrap();
    let read: Vec<f64> = rdr
        .records()
        .map(|r| r.unwrap()[1].parse().unwrap())
        .collect();
    assert_eq!(read.len(), 150);
    for (a, b) in read.iter().zip(x.iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }

    let report = json(&selfnorm(&[
        "ci",
        csv,
        "-k",
        "10",
        "--method",
        "sn,wb",
        "--bootstrap",
        "299",
        "--seed",
        "5",
    ]));
    let runs = report["results"]["runs"].as_array().unwrap();
    for (run, method) in runs.iter().zip([CiMethod::SN, CiMethod::WB]) {
        let ci =
            inference::interval(method, &x, 0.05, 10, 299, MultiplierLaw::Rademacher, 5).unwrap();
        assert_eq!(run["lower"].as_f64().unwrap().to_bits(), ci.lower.to_bits());
        assert_eq!(run["upper"].as_f64().unwrap().to_bits(), ci.upper.to_bits());
    }
    assert_eq!(report["seed"], 5);
    assert_eq!(report["inputs"]["rows"], 150);

    let report = json(&selfnorm(&[
        "changepoint",
        csv,
        "-k",
        "10",
        "--bootstrap",
        "199",
        "--seed",
        "5",
    ]));
    let r = changepoint::run_test(TestKind::SN, &x, 0.1, 10, 199, MultiplierLaw::Rademacher, 5)
        .unwrap();
    let run = &report["results"]["runs"][0];
    assert_eq!(
        run["statistic"].as_f64().unwrap().to_bits(),
        r.statistic.to_bits()
    );
    assert_eq!(run["p_value"].as_f64().unwrap(), r.p_value);
    assert_eq!(run["j_hat"].as_u64().unwrap() as usize, r.j_hat);
    assert_eq!(run["j_hat_label"], r.j_hat.to_string());
}

#[test]
fn simulate_config_file_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "model.toml",
        "n = 30\nprofile = \"A1\"\nerror = \"b1\"\ntheta = 0.4\nseed = 9\n",
    );
    let a = json(&selfnorm(&[
        "simulate", "--config", &cfg, "--format", "json",
    ]));
    let b = json(&selfnorm(&[
        "simulate", "--config", &cfg, "--format", "json", "--seed", "9",
    ]));
    let c = json(&selfnorm(&[
        "simulate", "--config", &cfg, "--format", "json", "--seed", "10",
    ]));
    assert_eq!(a["results"]["values"], b["results"]["values"]);
    assert_ne!(a["results"]["values"], c["results"]["values"]);
    assert_eq!(c["seed"], 10);
    assert_eq!(
        code(&selfnorm(&["simulate", "--config", &cfg, "--n", "5"])),
        2
    );
}

#[test]
fn k_schedule_runs_each_block_length() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let csv = csv.to_str().unwrap();
    assert!(
        selfnorm(&["simulate", "--n", "120", "--seed", "2", "--out", csv])
            .status
            .success()
    );

    let sched = json(&selfnorm(&["lrv", csv, "--k-schedule", "6,8,10"]));
    let runs = sched["results"]["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    for (run, k) in runs.iter().zip([6, 8, 10]) {
        assert_eq!(run["k_n"], k);
        let single = json(&selfnorm(&["lrv", csv, "-k", &k.to_string()]));
        assert_eq!(single["results"]["runs"][0], *run);
    }
    assert!(
        sched.get("seed").is_none(),
        "lrv with fixed k draws nothing"
    );

    let auto = json(&selfnorm(&["ci", csv, "--auto-k", "--k-max", "20"]));
    let chosen = auto["results"]["block_length_selection"]["k_star"]
        .as_u64()
        .unwrap();
    assert!((4..=20).contains(&chosen));
    assert_eq!(auto["results"]["runs"][0]["k_n"].as_u64().unwrap(), chosen);
}

#[test]
fn scan_out_and_csv_format() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", &{
        let mut s = String::from("date,level\n");
        for i in 0..60 {
            s.push_str(&format!(
                "t{i},{}\n",
                if i < 30 {
                    (i % 3) as f64
                } else {
                    5.0 + (i % 4) as f64
                }
            ));
        }
        s
    });
    let scan = dir.path().join("scan.csv");
    let out = selfnorm(&[
        "changepoint",
        &data,
        "-k",
        "5",
        "--test",
        "t1",
        "--bootstrap",
        "99",
        "--scan-out",
        scan.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("k,test,statistic,j_hat,label,p_value,tau_hat\n"));
    assert!(text.contains(",30,t29,"), "{text}");
    let scan = std::fs::read_to_string(scan).unwrap();
    assert!(scan.starts_with("k,j,label,value\n"));
    assert_eq!(scan.lines().count(), 1 + (54 - 6 + 1));
}

#[test]
fn trend_reports_both_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let body: String = std::iter::once("y\n".to_string())
        .chain(
            (1..=50).map(|t| format!("{}\n", 2.0 + 0.5 * t as f64 + ((t * 13) % 7) as f64 - 3.0)),
        )
        .collect();
    let data = write(dir.path(), "t.csv", &body);
    let r = json(&selfnorm(&["trend", &data, "-k", "5", "--alpha", "0.1"]));
    let run = &r["results"]["runs"][0];
    for coef in ["beta0", "beta1"] {
        let lo = run[coef]["lower"].as_f64().unwrap();
        let hi = run[coef]["upper"].as_f64().unwrap();
        let pt = run[coef]["point"].as_f64().unwrap();
        assert!(lo < pt && pt < hi);
        assert_eq!(run[coef]["level"].as_f64().unwrap(), 0.9);
    }
    // Slope is per unit of rescaled time t/n.
    let slope = r["results"]["beta1_hat"].as_f64().unwrap() / 50.0;
    assert!((slope - 0.5).abs() < 0.05, "{slope}");
}

#[test]
fn experiment_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "exp.toml",
        "kind = \"coverage\"\nsigma_profiles = [\"A1\"]\nerror_models = [\"iid\"]\nk_values = [5]\nmethods = [\"SN\", \"ST\"]\nreplications = 20\nbootstrap_samples = 19\nn = 60\nmaster_seed = 4\n",
    );
    let a = json(&selfnorm(&["experiment", "--config", &spec]));
    let b = json(&selfnorm(&[
        "experiment",
        "--config",
        &spec,
        "--threads",
        "2",
    ]));
    assert_eq!(a["results"]["cells"], b["results"]["cells"]);
    assert_eq!(a["results"]["cells"].as_array().unwrap().len(), 2);
    assert_eq!(
        code(&selfnorm(&[
            "experiment",
            "--config",
            &spec,
            "--kind",
            "size"
        ])),
        2
    );
}
