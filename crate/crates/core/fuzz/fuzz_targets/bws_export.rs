#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(selections) = a2t_core::annotation::parse_bws_export(data) {
        for s in selections {
            assert!(s.best.is_disjoint(&s.worst));
        }
    }
});
