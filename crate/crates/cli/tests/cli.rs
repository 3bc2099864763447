use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn cutlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cutlab"))
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .env_remove("CUTLAB_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// File contents without the provenance line.
fn body(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    let (first, rest) = text.split_once('\n').unwrap();
    assert!(first.starts_with("# cutlab ") && first.contains("config_sha256="), "{first}");
    rest.to_string()
}

fn header_hash(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    let first = text.lines().next().unwrap();
    first
        .split_whitespace()
        .find_map(|f| f.strip_prefix("config_sha256="))
        .unwrap()
        .to_string()
}

#[test]
fn regime_verdicts() {
    let dir = TempDir::new().unwrap();
    let o = cutlab(&["regime", "--gamma", "0.5", "--x0", "2", "--n", "3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["verdict"], "window_cutoff");
    assert_eq!(doc["thresholds"]["profile_gap"], 0.1);
    let stored: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("regime.json")).unwrap()).unwrap();
    assert_eq!(stored["verdict"], "window_cutoff");
    assert_eq!(stored["provenance"]["config_sha256"].as_str().unwrap().len(), 64);

    let o = cutlab(&["regime", "--gamma", "2", "--x0", "1", "--n", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["verdict"], "no_cutoff");
    assert!(doc["bracket"].is_null());
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let o = cutlab(&["spectrum", "--gamma", "1", "--bogus", "3"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    let o = cutlab(&["spectrum", "--gamma", "-1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = cutlab(&["spectrum"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gamma"));
    let o = cutlab(&["mc-validate", "--epsilon", "0.05"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = cutlab(&["regime", "--gamma", "1", "--x0", "2", "--n", "2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    // A grid far too coarse for the quartic-plus drift overflows the stencil.
    let o = cutlab(&["spectrum", "--gamma", "4", "--half-width", "50", "--n-points", "11"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("numerical failure"));
    let o = cutlab(&["mixing-time", "--gamma", "0.5", "--x0", "0", "--n", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = cutlab(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn eigensystem_cache() {
    let dir = TempDir::new().unwrap();
    let cache = dir.path().join("cache");
    let args = ["spectrum", "--gamma", "1", "--n-modes", "3", "--half-width", "12", "--n-points", "2401"];
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_cutlab"))
            .args(args)
            .arg("--output-dir")
            .arg(dir.path())
            .env("CUTLAB_CACHE_DIR", &cache)
            .output()
            .unwrap()
    };
    let first = run();
    assert!(stderr(&first).contains("cache miss"), "{}", stderr(&first));
    let reference = body(&dir.path().join("spectrum.csv"));
    let second = run();
    assert!(stderr(&second).contains("cache hit"), "{}", stderr(&second));
    assert_eq!(body(&dir.path().join("spectrum.csv")), reference);

    let file = fs::read_dir(&cache).unwrap().next().unwrap().unwrap().path();
    let mut record: Value = serde_json::from_str(&fs::read_to_string(&file).unwrap()).unwrap();
    record["solver_version"] = "an-older-solver".into();
    fs::write(&file, record.to_string()).unwrap();
    let bumped = run();
    assert!(stderr(&bumped).contains("another solver version"), "{}", stderr(&bumped));
    assert!(stderr(&run()).contains("cache hit"));

    let bytes = fs::read(&file).unwrap();
    fs::write(&file, &bytes[..bytes.len() / 3]).unwrap();
    let truncated = run();
    assert!(truncated.status.success());
    assert!(stderr(&truncated).contains("warning: cache file"), "{}", stderr(&truncated));
    assert_eq!(body(&dir.path().join("spectrum.csv")), reference);
    assert!(stderr(&run()).contains("cache hit"));
}

#[test]
fn outputs_are_reproducible_across_runs_and_threads() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["mc-validate", "--n-paths", "4000", "--step", "5e-3", "--seed", "7"];
    let mut one = args.to_vec();
    one.extend(["--threads", "1"]);
    let mut four = args.to_vec();
    four.extend(["--threads", "4"]);
    assert!(cutlab(&one, a.path()).status.success());
    assert!(cutlab(&four, b.path()).status.success());
    assert_eq!(body(&a.path().join("mc_validate.csv")), body(&b.path().join("mc_validate.csv")));

    let profile = ["cutoff-profile", "--gamma", "0.5", "--x0", "2", "--n", "2", "--epsilons", "1,0.1,0.01"];
    assert!(cutlab(&profile, a.path()).status.success());
    let first = body(&a.path().join("cutoff_profile.csv"));
    assert!(cutlab(&profile, a.path()).status.success());
    assert_eq!(body(&a.path().join("cutoff_profile.csv")), first);
    assert_eq!(first.lines().next(), Some("epsilon,r,distance_log"));
    assert_eq!(first.lines().count(), 1 + 3 * 41);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# mixing-time settings\ngamma = 0.5\nx0 = 2\nn = 2\netas = 0.1\nepsilons = 1, 0.1\n").unwrap();
    let out_file = dir.path().join("file");
    let o = cutlab(&["mixing-time", "--config", cfg.to_str().unwrap()], &out_file);
    assert!(o.status.success(), "{}", stderr(&o));
    let from_file = body(&out_file.join("mixing_time.csv"));
    assert_eq!(from_file.lines().count(), 3);

    let out_flags = dir.path().join("flags");
    let o = cutlab(
        &["mixing-time", "--gamma", "0.5", "--x0", "2", "--n", "2", "--etas", "0.1", "--epsilons", "1,0.1"],
        &out_flags,
    );
    assert!(o.status.success());
    assert_eq!(body(&out_flags.join("mixing_time.csv")), from_file);

    // Flags win over the file.
    let out_override = dir.path().join("override");
    let o = cutlab(&["mixing-time", "--config", cfg.to_str().unwrap(), "--x0", "-2"], &out_override);
    assert!(o.status.success());
    assert_ne!(header_hash(&out_override.join("mixing_time.csv")), header_hash(&out_file.join("mixing_time.csv")));
    // The distance is even in x₀.
    let taus = |text: &str| -> Vec<f64> {
        text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect()
    };
    for (a, b) in taus(&body(&out_override.join("mixing_time.csv"))).iter().zip(taus(&from_file)) {
        assert!((a / b - 1.0).abs() < 1e-9, "{a} vs {b}");
    }

    fs::write(&cfg, "gamma = 0.5\nfrobnicate = 1\n").unwrap();
    assert_eq!(cutlab(&["spectrum", "--config", cfg.to_str().unwrap()], dir.path()).status.code(), Some(1));
}

#[test]
fn wkb_table_matches_golden_file() {
    let dir = TempDir::new().unwrap();
    assert!(cutlab(&["wkb-table", "--n-max", "4"], dir.path()).status.success());
    let golden = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/wkb_table_n4.csv")).unwrap();
    assert_eq!(body(&dir.path().join("wkb_table.csv")), golden);
}

#[test]
fn phase_portrait_files() {
    let dir = TempDir::new().unwrap();
    let o = cutlab(
        &["phase-portrait", "--gamma", "0.5", "--theta0=-1.2,2", "--horizon", "200", "--rows", "50"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for j in 0..2 {
        let text = body(&dir.path().join(format!("phase_portrait_{j}.csv")));
        assert_eq!(text.lines().next(), Some("t,theta,log_r"));
        assert_eq!(text.lines().count(), 51);
        let last_t: f64 = text.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
        assert!((last_t - 200.0).abs() < 1e-9);
    }
}

#[test]
fn spectrum_rescales_with_epsilon() {
    let dir = TempDir::new().unwrap();
    let o = cutlab(&["spectrum", "--gamma", "0.5", "--n-modes", "2", "--epsilon", "0.125"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = body(&dir.path().join("spectrum.csv"));
    let row: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    let (scaled, base): (f64, f64) = (row[1].parse().unwrap(), row[2].parse().unwrap());
    // λ_{k,ε} = ε^{(γ-1)/(γ+1)} λ_k = 2 λ_k at γ = 1/2, ε = 1/8.
    assert!((scaled / base - 2.0).abs() < 1e-12);
    assert_eq!(&row[3..], ["odd", "1"]);
}
