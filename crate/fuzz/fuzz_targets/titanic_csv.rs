#![no_main]

use libfuzzer_sys::fuzz_target;
use psrf_core::samplers::titanic::parse_titanic;

fuzz_target!(|data: &[u8]| {
    if let Ok(parsed) = parse_titanic(data) {
        assert_eq!(parsed.design.len(), parsed.rows() * 10);
        assert_eq!(parsed.survived.len(), parsed.rows());
    }
});
