//! Offline processing of recorded angle sweeps: bandpass, Hilbert quadrature,
//! beamforming and tone-bin power, normalized to endfire.

pub mod fir;
mod manifest;
mod pipeline;
mod recording;

pub use manifest::{ManifestEntry, SweepManifest};
pub use pipeline::{
    bandpass_filter, bin_power, choose_dft_len, measured_beampattern, process_recording, MeasuredNull,
    MeasuredSweep, MeasurementConfig, TonePower,
};
pub use recording::{
    decode_recording, load_recording, save_recording, write_recording, Expected, Label, MeasurementRecording,
};
