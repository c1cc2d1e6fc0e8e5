#![no_main]

use libfuzzer_sys::fuzz_target;
use psrf_core::{BatchConfig, BatchPolicy};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(policy) = text.parse::<BatchPolicy>() {
        assert_eq!(policy.to_string().parse::<BatchPolicy>().ok(), Some(policy));
        for n in [2, 10, 1000] {
            if let Ok(bc) = BatchConfig::resolve(policy, n) {
                assert!(bc.batch_size * bc.batches <= n);
            }
        }
    }
});
