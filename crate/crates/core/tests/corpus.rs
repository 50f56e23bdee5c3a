//! The checked-in fuzz corpus seeds must stay valid inputs: each one
//! parses or decodes cleanly through the entry point its target exercises.

use std::fs;
use std::path::PathBuf;

fn corpus(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut files: Vec<PathBuf> =
        fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert!(!files.is_empty(), "no corpus seeds for {target}");
    files.into_iter().map(|p| (p.clone(), fs::read(&p).unwrap())).collect()
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).expect("text corpus seed")
}

#[test]
fn config_seeds_parse() {
    for (path, bytes) in corpus("fuzz_config") {
        let raw: christoffel::cli_io::config::RawConfig =
            text(&bytes).parse().unwrap_or_else(|e| panic!("{path:?}: {e}"));
        if raw.target.kind != "tabulated" {
            raw.resolve(std::path::Path::new("."))
                .unwrap_or_else(|e| panic!("{path:?}: {e}"));
        }
    }
}

#[test]
fn tabulated_seeds_parse() {
    for (path, bytes) in corpus("fuzz_tabulated_points") {
        christoffel::cli_io::tabulated::parse_points_csv(text(&bytes))
            .unwrap_or_else(|e| panic!("{path:?}: {e}"));
    }
    for (path, bytes) in corpus("fuzz_tabulated_values") {
        christoffel::cli_io::tabulated::parse_values_csv(text(&bytes))
            .unwrap_or_else(|e| panic!("{path:?}: {e}"));
    }
}

#[test]
fn checkpoint_seeds_decode() {
    for (path, bytes) in corpus("fuzz_checkpoint") {
        let ck = christoffel::checkpoint::decode(&bytes)
            .unwrap_or_else(|e| panic!("{path:?}: {e}"));
        assert!(ck.summary().parameter_count > 0);
    }
}

#[test]
fn manifest_seeds_parse() {
    for (path, bytes) in corpus("fuzz_manifest") {
        let manifest: christoffel::cli_io::manifest::Manifest =
            text(&bytes).parse().unwrap_or_else(|e| panic!("{path:?}: {e}"));
        assert!(!manifest.manifest.tool.is_empty());
    }
}

#[test]
fn stages_seeds_parse() {
    for (path, bytes) in corpus("fuzz_stages") {
        christoffel::cli_io::results::parse_stages_csv(text(&bytes))
            .unwrap_or_else(|e| panic!("{path:?}: {e}"));
    }
}
