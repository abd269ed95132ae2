#![no_main]
use dmanull::weights::BeamWeights;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(w) = BeamWeights::from_json(text) {
        let _ = w.compensated();
        let _ = w.response(0.3);
        BeamWeights::from_json(&w.to_json().unwrap()).expect("re-parse of emitted weights");
    }
});
