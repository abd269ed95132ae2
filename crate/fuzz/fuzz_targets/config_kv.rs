//! Experiment config files: parsing must not panic, and anything accepted
//! must survive a write/read round trip.

#![no_main]
use dmanull::config::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_kv(text) {
        let again = ExperimentConfig::from_kv(&cfg.to_kv()).expect("re-parse of emitted config");
        assert_eq!(again.to_kv(), cfg.to_kv());
        let _ = cfg.validate();
    }
});
