#![no_main]

use a2t_core::stats::MetricTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let Ok(mut table) = MetricTable::from_csv(data) else { return };
    let _ = table.render_text(3);
    if let Some(first) = table.columns.first().cloned() {
        let _ = table.sort_by_column(&first, true);
    }
});
