#![no_main]

use a2t_core::humor::LabelMatrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(m) = LabelMatrix::parse_csv(data) else { return };
    let csv = m.to_csv().unwrap();
    assert_eq!(LabelMatrix::parse_csv(csv.as_bytes()).unwrap(), m);
    assert_eq!(m.sums().len(), m.titles());
});
