//! End-to-end tests of the `qmetro` binary: output contracts, exit codes,
//! file handling, and byte-level determinism of report bundles.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qmetro::{synthesize_calibration, CollectiveGenerator, DensityMatrix, LocalAxis,
    NoiseModel, ProbabilityModel, PureState};
use qmetro_cli::tomography::save_density_matrix;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmetro"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn qfi_prints_the_reference_value_and_depth() {
    let out = run(&["qfi", "--state", "dicke:4:2", "--axes", "y"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("12.000000"));
    assert!(text.contains("optimized 12.000000"), "{text}");
    assert!(text.contains("depth 4"), "{text}");
}

#[test]
fn qfi_of_a_separable_probe_certifies_no_entanglement() {
    let out = run(&["qfi", "--state", "plus:4", "--axes", "z", "--restarts", "4"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("4.000000"));
    assert!(text.contains("depth 1"), "{text}");
}

#[test]
fn witness_reads_a_tomography_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("identity16.json");
    save_density_matrix(&path, &DensityMatrix::maximally_mixed(4).unwrap()).unwrap();
    let out = run(&["witness", "--state-file", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "0.604167");
}

#[test]
fn usage_errors_exit_with_code_2() {
    // Unknown subcommand.
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    // Missing required flag.
    let out = run(&["calibrate"]);
    assert_eq!(out.status.code(), Some(2));

    // Conflicting state sources.
    let out = run(&["qfi", "--state", "dicke:4:2", "--state-file", "x.json"]);
    assert_eq!(out.status.code(), Some(2));

    // Config mode rejects per-cell flags.
    let out = run(&["campaign", "--config", "c.json", "--theta0", "0.2pi"]);
    assert_eq!(out.status.code(), Some(2));

    // Estimate needs either an outcome file or a synthetic-sample spec.
    let out = run(&["estimate", "--state", "dicke:4:2"]);
    assert_eq!(out.status.code(), Some(2));

    // Malformed angle in a value position.
    let out = run(&["estimate", "--theta0", "sideways", "--m", "5"]);
    assert_eq!(out.status.code(), Some(2));

    // Malformed state spec.
    let out = run(&["qfi", "--state", "bell:2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_code_1_and_explain() {
    let out = run(&["witness", "--state-file", "/nonexistent/state.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error:"), "{}", stderr(&out));

    // A state file with a badly wrong trace is rejected by name and size.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut re = vec![vec![0.0; 16]; 16];
    for (i, row) in re.iter_mut().enumerate() {
        row[i] = 1.0 / 16.0;
    }
    re[0][0] += 0.1;
    let file = serde_json::json!({"dim": 16, "re": re, "im": vec![vec![0.0; 16]; 16]});
    fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
    let out = run(&["witness", "--state-file", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("trace deviation"), "{err}");
    assert!(err.contains("1.000e-1"), "magnitude missing: {err}");
}

#[test]
fn help_and_version_exit_zero() {
    assert!(run(&["--help"]).status.success());
    assert!(run(&["--version"]).status.success());
    assert!(run(&["campaign", "--help"]).status.success());
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    entries
}

#[test]
fn same_seed_campaigns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = run(&[
            "campaign",
            "--theta0",
            "0.2pi",
            "--m",
            "20",
            "--reps",
            "40",
            "--seed",
            "7",
            "--grid-points",
            "301",
            "--curve-points",
            "31",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        outputs.push((stdout(&out), read_dir_sorted(&out_dir)));
    }
    // The final stdout line names the output directory, which differs by
    // construction; everything before it must match.
    let head = |text: &str| -> String {
        text.lines().filter(|l| !l.starts_with("wrote ")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(head(&outputs[0].0), head(&outputs[1].0), "stdout must match");
    let (a, b) = (&outputs[0].1, &outputs[1].1);
    assert_eq!(
        a.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        b.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        "file lists must match"
    );
    for ((name, bytes_a), (_, bytes_b)) in a.iter().zip(b) {
        assert_eq!(bytes_a, bytes_b, "{name} differs between runs");
    }
    assert!(a.iter().any(|(n, _)| n == "campaign.csv"));
    assert!(a.iter().any(|(n, _)| n == "summary.json"));
}

#[test]
fn different_seeds_change_the_campaign_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = Vec::new();
    for (name, seed) in [("a", "7"), ("b", "8")] {
        let out_dir = dir.path().join(name);
        let out = run(&[
            "campaign", "--theta0", "0.2pi", "--m", "10", "--reps", "40", "--seed", seed,
            "--grid-points", "301", "--curve-points", "11", "--out", out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        rows.push(fs::read_to_string(out_dir.join("campaign.csv")).unwrap());
    }
    assert_ne!(rows[0], rows[1], "independent seeds should move the statistics");
}

#[test]
fn campaign_config_mode_runs_and_honours_output_override() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("bundle");
    let config = serde_json::json!({
        "theta0_list": [0.6283185307179586],
        "m_list": [5],
        "repetitions": 40,
        "grid_points": 301,
        "curve_points": 21,
        "restarts": 2,
        "output_dir": dir.path().join("ignored")
    });
    let config_path = dir.path().join("config.json");
    fs::write(&config_path, serde_json::to_string(&config).unwrap()).unwrap();
    let out = run(&[
        "campaign",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("qfi 12.000000"), "{text}");
    assert!(text.contains("cells 1"), "{text}");
    assert!(text.contains("failures 0"), "{text}");
    assert!(out_dir.join("summary.json").is_file());
    assert!(!dir.path().join("ignored").exists(), "--out must override the config");
}

#[test]
fn estimate_consumes_an_outcome_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("outcomes.csv");
    fs::write(&path, "mu\n0\n0\n1\n-1\n2\n-2\n0\n").unwrap();
    let out = run(&["estimate", "--state", "dicke:4:2", "--outcomes", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("events 7"), "{text}");
    assert!(text.contains("ml "), "{text}");
    assert!(text.contains("confidence "), "{text}");
}

#[test]
fn estimate_synthesizes_a_sample_deterministically() {
    let a = run(&["estimate", "--theta0", "0.2pi", "--m", "50", "--seed", "11"]);
    let b = run(&["estimate", "--theta0", "0.2pi", "--m", "50", "--seed", "11"]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("events 50"));
}

#[test]
fn estimate_rejects_outcomes_the_model_cannot_produce() {
    // A GHZ probe rotated about z never leaves its two-outcome support, so
    // observing an intermediate imbalance must be flagged as impossible.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("outcomes.csv");
    fs::write(&path, "mu\n1\n").unwrap();
    let out = run(&[
        "estimate", "--state", "ghz:4", "--axes", "z", "--outcomes", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("zero probability"), "{}", stderr(&out));
}

#[test]
fn calibrate_recovers_a_planted_offset_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let probe = PureState::dicke(4, 2).unwrap().density();
    let generator = CollectiveGenerator::uniform(4, LocalAxis::Y).unwrap();
    let model = ProbabilityModel::new(probe, generator).unwrap();
    let noisy = model
        .with_noise(NoiseModel::collective_tilt(0.05).with_white_noise(0.08))
        .unwrap();
    let thetas: Vec<f64> = (0..25).map(|i| 0.02 + 1.5 * i as f64 / 24.0).collect();
    let data = synthesize_calibration(&noisy, &thetas, 4000, 31).unwrap();

    let mut csv = String::from("theta,mu,count\n");
    let outcomes = noisy.measurement().outcomes().to_vec();
    for (i, &theta) in data.thetas().iter().enumerate() {
        for (k, &mu) in outcomes.iter().enumerate() {
            csv.push_str(&format!("{theta},{mu},{}\n", data.counts()[i][k]));
        }
    }
    let path = dir.path().join("calibration.csv");
    fs::write(&path, csv).unwrap();

    let out = run(&[
        "calibrate",
        "--data",
        path.to_str().unwrap(),
        "--family",
        "standard",
        "--noise-out",
        dir.path().join("noise.json").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let tilt: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("tilt "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((tilt - 0.05).abs() < 0.01, "fitted tilt {tilt}");
    let white: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("white_noise "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((white - 0.08).abs() < 0.02, "fitted white noise {white}");
    let noise: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("noise.json")).unwrap()).unwrap();
    assert!(noise.get("misalignment").is_some());
}

#[test]
fn curves_writes_files_that_pass_revalidation() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "curves", "--points", "21", "--white-noise", "0.1", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let curves = fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 1 + 21 * 5);
    let fisher = fs::read_to_string(dir.path().join("fisher.csv")).unwrap();
    assert_eq!(fisher.lines().count(), 22);
    assert!(fisher.starts_with("theta,f,flag\n"));
}

#[test]
fn report_merges_two_bundles() {
    let dir = tempfile::tempdir().unwrap();
    for (name, theta0) in [("a", "0.1pi"), ("b", "0.3pi")] {
        let out = run(&[
            "campaign", "--theta0", theta0, "--m", "5", "--reps", "40",
            "--grid-points", "301", "--curve-points", "11",
            "--out", dir.path().join(name).to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let merged = dir.path().join("merged");
    let out = run(&[
        "report",
        "--out",
        merged.to_str().unwrap(),
        dir.path().join("a").to_str().unwrap(),
        dir.path().join("b").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let campaign = fs::read_to_string(merged.join("campaign.csv")).unwrap();
    assert_eq!(campaign.lines().count(), 3, "header plus one row per bundle");
    let summaries: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(merged.join("summaries.json")).unwrap()).unwrap();
    assert_eq!(summaries.as_array().unwrap().len(), 2);
}
