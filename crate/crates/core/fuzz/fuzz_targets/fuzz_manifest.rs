#![no_main]

use christoffel::cli_io::manifest::Manifest;
use libfuzzer_sys::fuzz_target;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(manifest) = text.parse::<Manifest>() {
            if manifest.config.target.kind != "tabulated" {
                let _ = manifest.config.resolve(Path::new("."));
            }
        }
    }
});
