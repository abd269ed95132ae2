#![no_main]
use dmanull::measurement::SweepManifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = SweepManifest::from_json(text) {
        let back = SweepManifest::from_json(&m.to_json().unwrap()).expect("re-parse of emitted manifest");
        assert_eq!(back.entries.len(), m.entries.len());
    }
});
