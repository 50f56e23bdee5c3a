//! Config files must never panic the parser, no matter how mangled.
//! Tabulated targets are parsed but not resolved, since resolution reads
//! table files from disk.

#![no_main]

use christoffel::cli_io::config::RawConfig;
use libfuzzer_sys::fuzz_target;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(raw) = text.parse::<RawConfig>() {
            if raw.target.kind != "tabulated" {
                let _ = raw.resolve(Path::new("."));
            }
        }
    }
});
