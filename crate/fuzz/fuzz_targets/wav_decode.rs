#![no_main]
use std::io::Cursor;

use dmanull::measurement::{decode_recording, Expected};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rec) = decode_recording(Cursor::new(data), Expected::default()) {
        let len = rec.len();
        assert!(rec.channels.iter().all(|c| c.len() == len));
        if rec.bit_depth != 32 {
            assert!(rec.channels.iter().flatten().all(|v| (-1.0..1.0).contains(v)));
        }
    }
});
