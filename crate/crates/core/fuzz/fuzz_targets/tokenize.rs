#![no_main]

use a2t_core::corpus::{content_words, tokenize, Stopwords};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let tokens = tokenize(data);
    assert!(tokens.iter().all(|t| !t.is_empty()));
    let stop = Stopwords::parse("fuzz", data);
    let _ = content_words(data, &stop);
});
