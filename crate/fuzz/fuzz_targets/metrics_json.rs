#![no_main]
use dmanull::metrics::NullMetrics;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = serde_json::from_str::<NullMetrics>(text) {
        let _ = m.to_json();
    }
});
