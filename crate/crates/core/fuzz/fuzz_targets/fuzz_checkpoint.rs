//! The binary checkpoint decoder sees attacker-shaped input here: truncated
//! headers, inflated array counts and inconsistent dimensions must all be
//! rejected without panics or oversized allocations.

#![no_main]

use christoffel::checkpoint::decode;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = decode(data) {
        // A successfully decoded checkpoint must survive a summary pass.
        let _ = ck.summary();
    }
});
