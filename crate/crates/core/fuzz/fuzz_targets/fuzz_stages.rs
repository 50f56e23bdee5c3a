#![no_main]

use christoffel::cli_io::results::parse_stages_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_stages_csv(text);
    }
});
