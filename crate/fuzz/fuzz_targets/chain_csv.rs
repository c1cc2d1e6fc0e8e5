#![no_main]

use libfuzzer_sys::fuzz_target;
use psrf_core::chains::{format_chain_csv, parse_chain_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    for header in [true, false] {
        if let Ok(chain) = parse_chain_csv(text, header) {
            assert!(chain.values().iter().all(|v| v.is_finite()));
            let again = parse_chain_csv(&format_chain_csv(&chain, None), false)
                .expect("formatted chains parse");
            assert_eq!(again, chain);
        }
    }
});
