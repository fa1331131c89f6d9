#![no_main]

use a2t_core::scoring::{parse_scores_csv, to_relative_ranking};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(scores) = parse_scores_csv(data) {
        for j in to_relative_ranking(&scores) {
            assert!(j.score_diff > 0.0);
        }
    }
});
