#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(gold) = a2t_core::humor::parse_gold_csv(data) {
        assert!(gold.values().all(|&l| l <= 2));
    }
});
