//! Results emission: CSV files for external plotting plus the run manifest.
//!
//! Floats are printed as `{:.17e}`, which is enough digits to reproduce the
//! exact f64 on re-parse. Rows are sorted, so emitting the same suite twice
//! produces byte-identical files; only the manifest timestamp differs.

use crate::error::{Error, Result};
use crate::experiment_driver::{
    Method, PreparedExperiment, StageRecord, SuiteResult, TrialDiagnostics,
};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::RawConfig;
use super::manifest::write_manifest;

pub const STAGES_HEADER: &str =
    "method,trial,stage,m,n,rel_error,alpha_inv,final_loss,wall_time_s";
pub const AGGREGATE_HEADER: &str = "method,stage,m,trials,rel_error_mean,rel_error_median,\
                                    rel_error_std,n_mean,n_median,n_std,alpha_inv_mean,\
                                    alpha_inv_median,alpha_inv_std";

fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn stages_csv(records: &[StageRecord]) -> String {
    let mut rows: Vec<&StageRecord> = records.iter().collect();
    rows.sort_by_key(|r| (r.method.as_str(), r.trial, r.stage));
    let mut out = String::from(STAGES_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.method.as_str(),
            r.trial,
            r.stage,
            r.m,
            r.n,
            fmt(r.rel_error),
            fmt(r.alpha_inv),
            fmt(r.final_loss),
            fmt(r.wall_time_s)
        )
        .expect("write to string");
    }
    out
}

/// Parses an emitted stages.csv back into records, bit-exact.
pub fn parse_stages_csv(text: &str) -> Result<Vec<StageRecord>> {
    let err = |line: usize, msg: String| Error::Csv(format!("line {line}: {msg}"));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == STAGES_HEADER => {}
        _ => return Err(Error::Csv("missing stages header".into())),
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(err(line_no, format!("expected 9 fields, found {}", fields.len())));
        }
        let method: Method = fields[0]
            .parse()
            .map_err(|e: String| err(line_no, e))?;
        let int = |s: &str, what: &str| -> Result<u64> {
            s.parse().map_err(|_| err(line_no, format!("bad {what} {s:?}")))
        };
        let float = |s: &str, what: &str| -> Result<f64> {
            s.parse().map_err(|_| err(line_no, format!("bad {what} {s:?}")))
        };
        records.push(StageRecord {
            method,
            trial: int(fields[1], "trial")? as u32,
            stage: int(fields[2], "stage")? as u32,
            m: int(fields[3], "m")? as usize,
            n: int(fields[4], "n")? as usize,
            rel_error: float(fields[5], "rel_error")?,
            alpha_inv: float(fields[6], "alpha_inv")?,
            final_loss: float(fields[7], "final_loss")?,
            wall_time_s: float(fields[8], "wall_time_s")?,
        });
    }
    Ok(records)
}

fn aggregate_csv(result: &SuiteResult) -> String {
    let mut rows: Vec<_> = result.aggregates.iter().collect();
    rows.sort_by_key(|a| (a.method.as_str(), a.stage));
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for a in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            a.method.as_str(),
            a.stage,
            a.m,
            a.trials,
            fmt(a.rel_error_mean),
            fmt(a.rel_error_median),
            fmt(a.rel_error_std),
            fmt(a.n_mean),
            fmt(a.n_median),
            fmt(a.n_std),
            fmt(a.alpha_inv_mean),
            fmt(a.alpha_inv_median),
            fmt(a.alpha_inv_std)
        )
        .expect("write to string");
    }
    out
}

fn samples_csv(prep: &PreparedExperiment, diag: &TrialDiagnostics) -> String {
    let d = prep.grid.dimension();
    let mut out = String::from("stage,index,weight");
    for c in 1..=d {
        write!(out, ",coord_{c}").expect("write to string");
    }
    out.push('\n');
    for set in &diag.sample_sets {
        for (&idx, &w) in set.indices().iter().zip(set.weights()) {
            write!(out, "{},{},{}", set.stage(), idx, fmt(w)).expect("write to string");
            for v in prep.grid.point(idx) {
                write!(out, ",{}", fmt(*v)).expect("write to string");
            }
            out.push('\n');
        }
    }
    out
}

fn christoffel_csv(prep: &PreparedExperiment, values: &ndarray::Array1<f64>) -> String {
    let d = prep.grid.dimension();
    let mut out = String::from("index");
    for c in 1..=d {
        write!(out, ",coord_{c}").expect("write to string");
    }
    out.push_str(",christoffel\n");
    for (idx, v) in values.iter().enumerate() {
        write!(out, "{idx}").expect("write to string");
        for coord in prep.grid.point(idx) {
            write!(out, ",{}", fmt(*coord)).expect("write to string");
        }
        writeln!(out, ",{}", fmt(*v)).expect("write to string");
    }
    out
}

fn dictionary_csv(trace: &crate::experiment_driver::DictionaryTrace) -> String {
    let mut out = String::from("t");
    for &neuron in &trace.selected {
        write!(out, ",neuron_{neuron}").expect("write to string");
    }
    out.push('\n');
    for (row, &t) in trace.parameter.iter().enumerate() {
        write!(out, "{}", fmt(t)).expect("write to string");
        for col in 0..trace.traces.ncols() {
            write!(out, ",{}", fmt(trace.traces[[row, col]])).expect("write to string");
        }
        out.push('\n');
    }
    out
}

fn failures_csv(result: &SuiteResult) -> String {
    let mut rows: Vec<_> = result.failures.iter().collect();
    rows.sort_by_key(|f| (f.method.as_str(), f.trial, f.stage));
    let mut out = String::from("method,trial,stage,message\n");
    for f in rows {
        writeln!(out, "{},{},{},{}", f.method.as_str(), f.trial, f.stage, quote(&f.message))
            .expect("write to string");
    }
    out
}

/// Writes every results file for a completed suite into `out_dir`, creating
/// it if needed, and returns the paths written (sorted).
pub fn emit_results(
    prep: &PreparedExperiment,
    result: &SuiteResult,
    normalized: &RawConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut paths = Vec::new();
    let mut write = |name: String, bytes: &[u8]| -> Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, bytes)?;
        paths.push(path);
        Ok(())
    };

    write("stages.csv".into(), stages_csv(&result.records).as_bytes())?;
    write("aggregate.csv".into(), aggregate_csv(result).as_bytes())?;
    if !result.failures.is_empty() {
        write("failures.csv".into(), failures_csv(result).as_bytes())?;
    }
    for diag in &result.diagnostics {
        let tag = format!("{}_{}", diag.method.as_str(), diag.trial);
        write(format!("samples_{tag}.csv"), samples_csv(prep, diag).as_bytes())?;
        if let Some(values) = &diag.christoffel {
            write(
                format!("christoffel_{}.csv", diag.trial),
                christoffel_csv(prep, values).as_bytes(),
            )?;
        }
        if let Some(trace) = &diag.dictionary_trace {
            write(format!("dictionary_{}.csv", diag.trial), dictionary_csv(trace).as_bytes())?;
        }
        if prep.config.save_checkpoints {
            write(format!("checkpoint_{tag}.bin"), &diag.checkpoint)?;
        }
    }
    paths.push(write_manifest(out_dir, normalized)?);
    paths.sort();
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment_driver::{prepare, run_suite, tests::tiny_config};
    use std::collections::BTreeMap;
    use std::fs;

    fn dir_snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
        fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
            })
            .collect()
    }

    #[test]
    fn empty_suite_emits_headers_and_manifest() {
        let prep = prepare(tiny_config()).unwrap();
        let empty = SuiteResult {
            records: vec![],
            aggregates: vec![],
            diagnostics: vec![],
            failures: vec![],
        };
        let normalized = crate::cli_io::config::parse_config_str(
            "[target]\nkind = \"f1\"\ndimension = 1\n\
             [network]\ndepth = 0\nwidth = 8\nactivation = \"tanh\"\n\
             [training]\nschedule = [20, 40]\n",
            Path::new("."),
        )
        .unwrap()
        .normalized;
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_results(&prep, &empty, &normalized, dir.path()).unwrap();
        let names: Vec<_> =
            paths.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, vec!["aggregate.csv", "manifest.toml", "stages.csv"]);
        let stages = fs::read_to_string(dir.path().join("stages.csv")).unwrap();
        assert_eq!(stages.trim_end(), STAGES_HEADER);
        let agg = fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
        assert_eq!(agg.trim_end(), AGGREGATE_HEADER);
    }

    #[test]
    fn toy_suite_emits_counted_rows_and_all_diagnostics() {
        let prep = prepare(tiny_config()).unwrap();
        let result = run_suite(&prep).unwrap();
        let normalized = crate::cli_io::config::parse_config_str(
            "[target]\nkind = \"f1\"\ndimension = 1\n\
             [network]\ndepth = 0\nwidth = 8\nactivation = \"tanh\"\n\
             [training]\nschedule = [20, 40]\n",
            Path::new("."),
        )
        .unwrap()
        .normalized;
        let dir = tempfile::tempdir().unwrap();
        emit_results(&prep, &result, &normalized, dir.path()).unwrap();

        let stages = fs::read_to_string(dir.path().join("stages.csv")).unwrap();
        // 2 methods x 2 trials x 2 stages data rows plus a header.
        assert_eq!(stages.lines().count(), 1 + 8);

        // Sample files exist for every method and trial; adaptive trials
        // also carry Christoffel and dictionary traces.
        for trial in 0..2 {
            for method in ["CAS", "MC"] {
                let f = dir.path().join(format!("samples_{method}_{trial}.csv"));
                let text = fs::read_to_string(f).unwrap();
                // 40 cumulative samples per trial plus a header.
                assert_eq!(text.lines().count(), 1 + 40);
            }
            assert!(dir.path().join(format!("christoffel_{trial}.csv")).exists());
            assert!(dir.path().join(format!("dictionary_{trial}.csv")).exists());
        }
        assert!(!dir.path().join("failures.csv").exists());
    }

    #[test]
    fn reemission_is_byte_identical_outside_the_manifest() {
        let prep = prepare(tiny_config()).unwrap();
        let result = run_suite(&prep).unwrap();
        let normalized = crate::cli_io::config::parse_config_str(
            "[target]\nkind = \"f1\"\ndimension = 1\n\
             [network]\ndepth = 0\nwidth = 8\nactivation = \"tanh\"\n\
             [training]\nschedule = [20, 40]\n",
            Path::new("."),
        )
        .unwrap()
        .normalized;
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        emit_results(&prep, &result, &normalized, dir_a.path()).unwrap();
        emit_results(&prep, &result, &normalized, dir_b.path()).unwrap();
        let a = dir_snapshot(dir_a.path());
        let b = dir_snapshot(dir_b.path());
        assert_eq!(
            a.keys().collect::<Vec<_>>(),
            b.keys().collect::<Vec<_>>()
        );
        for (name, bytes) in &a {
            if name == "manifest.toml" {
                continue;
            }
            assert_eq!(bytes, &b[name], "{name} differs between emissions");
        }
    }

    #[test]
    fn stages_csv_round_trips_every_bit() {
        let records = vec![
            StageRecord {
                method: Method::Cas,
                trial: 3,
                stage: 2,
                m: 40,
                n: 7,
                rel_error: 0.123456789012345678,
                alpha_inv: f64::INFINITY,
                final_loss: 1e-300,
                wall_time_s: 0.25,
            },
            StageRecord {
                method: Method::Mc,
                trial: 0,
                stage: 1,
                m: 20,
                n: 5,
                rel_error: std::f64::consts::PI,
                alpha_inv: 1.0 + f64::EPSILON,
                final_loss: 4.9e-324,
                wall_time_s: 1e9,
            },
        ];
        let text = stages_csv(&records);
        let back = parse_stages_csv(&text).unwrap();
        assert_eq!(back.len(), 2);
        // Emission sorts by method, so the MC row is last.
        let cas = &back[0];
        let mc = &back[1];
        assert_eq!(cas.method, Method::Cas);
        assert_eq!(cas.trial, 3);
        assert_eq!(cas.rel_error.to_bits(), records[0].rel_error.to_bits());
        assert!(cas.alpha_inv.is_infinite());
        assert_eq!(cas.final_loss.to_bits(), records[0].final_loss.to_bits());
        assert_eq!(mc.method, Method::Mc);
        assert_eq!(mc.rel_error.to_bits(), records[1].rel_error.to_bits());
        assert_eq!(mc.alpha_inv.to_bits(), records[1].alpha_inv.to_bits());
        assert_eq!(mc.final_loss.to_bits(), records[1].final_loss.to_bits());
    }

    #[test]
    fn stages_parser_rejects_malformed_rows() {
        assert!(parse_stages_csv("").is_err());
        assert!(parse_stages_csv("method,trial\nCAS,0\n").is_err());
        let short = format!("{STAGES_HEADER}\nCAS,0,1,20\n");
        assert!(parse_stages_csv(&short).is_err());
        let bad_method = format!("{STAGES_HEADER}\nQMC,0,1,20,5,0.1,1.0,0.1,0.1\n");
        assert!(parse_stages_csv(&bad_method).is_err());
        let bad_num = format!("{STAGES_HEADER}\nCAS,0,1,20,5,zzz,1.0,0.1,0.1\n");
        assert!(parse_stages_csv(&bad_num).is_err());
    }

    #[test]
    fn failures_are_listed_when_present() {
        let prep = prepare(tiny_config()).unwrap();
        let result = SuiteResult {
            records: vec![],
            aggregates: vec![],
            diagnostics: vec![],
            failures: vec![crate::experiment_driver::TrialFailure {
                method: Method::Cas,
                trial: 1,
                stage: 2,
                message: "training diverged at global epoch 57".into(),
            }],
        };
        let normalized = crate::cli_io::config::parse_config_str(
            "[target]\nkind = \"f1\"\ndimension = 1\n\
             [network]\ndepth = 0\nwidth = 8\nactivation = \"tanh\"\n\
             [training]\nschedule = [20, 40]\n",
            Path::new("."),
        )
        .unwrap()
        .normalized;
        let dir = tempfile::tempdir().unwrap();
        emit_results(&prep, &result, &normalized, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("failures.csv")).unwrap();
        assert!(text.contains("CAS,1,2,\"training diverged at global epoch 57\""));
    }
}
