#![no_main]

use a2t_core::corpus::{parse_jsonl, write_jsonl};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(records) = parse_jsonl(data) else { return };
    let mut out = Vec::new();
    write_jsonl(&mut out, &records).unwrap();
    assert_eq!(parse_jsonl(out.as_slice()).unwrap(), records);
});
