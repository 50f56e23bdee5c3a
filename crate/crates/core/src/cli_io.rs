//! Everything that crosses the process boundary: config files, tabulated
//! target tables, results CSVs, run manifests.
//!
//! All numeric output is decimal text with enough digits to round-trip an
//! f64 exactly; binary is reserved for checkpoints. Parsers here are strict:
//! unknown config keys, malformed headers, out-of-order indices and
//! non-finite values are rejected with the offending location.

pub mod config;
pub mod manifest;
pub mod results;
pub mod tabulated;
