#![no_main]

use a2t_core::pseudo::{parse_generations, write_generations};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(titles) = parse_generations(data) else { return };
    let text = write_generations(&titles);
    assert_eq!(parse_generations(text.as_bytes()).unwrap(), titles);
});
