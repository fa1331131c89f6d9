#![no_main]

use a2t_core::metric::TrainedMetric;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let Ok(m) = TrainedMetric::from_json(data) else { return };
    assert_eq!(TrainedMetric::from_json(&m.to_json()).unwrap(), m);
});
