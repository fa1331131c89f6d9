#![no_main]

use a2t_core::scoring::{parse_rr_jsonl, write_rr_jsonl};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(judgments) = parse_rr_jsonl(data) else { return };
    let text = write_rr_jsonl(&judgments);
    assert_eq!(parse_rr_jsonl(text.as_bytes()).unwrap(), judgments);
});
