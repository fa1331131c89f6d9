#![no_main]

use a2t_core::annotation::parse_log;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(parsed) = parse_log(data) else { return };
    assert!(parsed.valid_len <= data.len());
    // the valid prefix alone parses to the same entries, with no torn tail
    let prefix = parse_log(&data[..parsed.valid_len]).unwrap();
    assert!(!prefix.torn_tail);
    assert_eq!(prefix.entries, parsed.entries);
});
