//! End-to-end checks of the command-line interface: run, validate, resume
//! and inspect as real subprocesses.

use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
[target]
kind = "f1"
dimension = 1

[grid]
size = 250

[network]
depth = 1
width = 10
activation = "tanh"

[training]
schedule = [15, 30]
epochs_per_stage = 40

[run]
trials = 2
seed = 31
test_size = 200
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_christoffel"))
}

fn ok(output: Output) -> String {
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).unwrap()
}

fn strip_wall_time(text: &str) -> String {
    text.lines()
        .map(|l| l.rsplit_once(',').map(|(head, _)| head).unwrap_or(l))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn run_then_resume_reproduces_the_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(&config, CONFIG).unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");

    let stdout = ok(bin().args(["run"]).arg(&config).arg("--out-dir").arg(&out_a).output().unwrap());
    assert!(stdout.contains("8 stage records"), "{stdout}");

    ok(bin()
        .args(["resume"])
        .arg(out_a.join("manifest.toml"))
        .arg("--out-dir")
        .arg(&out_b)
        .output()
        .unwrap());

    let read = |dir: &Path, name: &str| std::fs::read_to_string(dir.join(name)).unwrap();
    assert_eq!(
        strip_wall_time(&read(&out_a, "stages.csv")),
        strip_wall_time(&read(&out_b, "stages.csv"))
    );
    assert_eq!(read(&out_a, "aggregate.csv"), read(&out_b, "aggregate.csv"));
    for name in ["samples_CAS_0.csv", "samples_MC_1.csv", "christoffel_0.csv"] {
        assert_eq!(read(&out_a, name), read(&out_b, name), "{name}");
    }
    assert_eq!(
        std::fs::read(out_a.join("checkpoint_CAS_0.bin")).unwrap(),
        std::fs::read(out_b.join("checkpoint_CAS_0.bin")).unwrap()
    );

    // Emitted records parse back bit-exactly.
    let records =
        christoffel::cli_io::results::parse_stages_csv(&read(&out_a, "stages.csv")).unwrap();
    assert_eq!(records.len(), 8);
    assert!(records.iter().all(|r| r.rel_error.is_finite()));
}

#[test]
fn validate_prints_a_normalized_config_that_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(&config, CONFIG).unwrap();
    let stdout = ok(bin().args(["validate"]).arg(&config).output().unwrap());
    assert!(stdout.contains("eps_tol"), "{stdout}");
    assert!(stdout.contains("precision = \"double\""), "{stdout}");
    let reparsed =
        christoffel::cli_io::config::parse_config_str(&stdout, dir.path()).unwrap();
    assert_eq!(reparsed.config.base_seed, 31);
    assert_eq!(reparsed.config.grid_size, 250);
}

#[test]
fn validate_rejects_bad_configs_with_a_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, CONFIG.replace("[15, 30]", "[30, 15]")).unwrap();
    let output = bin().args(["validate"]).arg(&config).output().unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("strictly increasing"), "{stderr}");
}

#[test]
fn inspect_summarizes_an_emitted_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(&config, CONFIG).unwrap();
    let out = dir.path().join("out");
    ok(bin().args(["run"]).arg(&config).arg("--out-dir").arg(&out).output().unwrap());
    let stdout =
        ok(bin().args(["inspect"]).arg(out.join("checkpoint_MC_0.bin")).output().unwrap());
    assert!(stdout.contains("precision:   double"), "{stdout}");
    assert!(stdout.contains("activation:  tanh"), "{stdout}");
    assert!(stdout.contains("adam step:   80"), "{stdout}");
}

#[test]
fn cli_overrides_reach_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(&config, CONFIG).unwrap();
    let out = dir.path().join("out");
    ok(bin()
        .args(["run"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out)
        .args(["--trials", "1", "--seed", "99", "--precision", "single", "--threads", "1"])
        .output()
        .unwrap());
    let manifest =
        christoffel::cli_io::manifest::read_manifest(&out.join("manifest.toml")).unwrap();
    assert_eq!(manifest.config.run.trials, Some(1));
    assert_eq!(manifest.config.run.seed, Some(99));
    assert_eq!(manifest.config.run.precision, Some("single".into()));
    // The seed override cascades into the derived seeds.
    assert_eq!(manifest.config.grid.seed, Some(99));
    let stages = std::fs::read_to_string(out.join("stages.csv")).unwrap();
    assert_eq!(stages.lines().count(), 1 + 4);
}
