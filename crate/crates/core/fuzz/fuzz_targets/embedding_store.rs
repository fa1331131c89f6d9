#![no_main]

use a2t_core::metric::EmbeddingStore;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(store) = EmbeddingStore::parse(data) else { return };
    for (_, v) in store.iter() {
        assert!(v.iter().all(|x| x.is_finite()));
    }
});
