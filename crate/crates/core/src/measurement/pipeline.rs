//! Per-angle processing of a recorded sweep into a measured beampattern.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fir::{convolve_valid, hilbert_taps, BandpassSpec};
use super::manifest::SweepManifest;
use super::recording::{load_recording, Expected, Label, MeasurementRecording};
use crate::beamformer::{beamform, ComplexChannel};
use crate::error::{Error, Result};
use crate::metrics::{find_nulls, null_width, power_db, Beampattern, WidthAt};
use crate::weights::BeamWeights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementConfig {
    pub half_bandwidth_hz: f64,
    pub transition_hz: f64,
    pub stopband_db: f64,
    pub hilbert_taps: usize,
    pub hilbert_beta: f64,
    /// Transform length for the tone bin; chosen from the data when absent.
    pub dft_len: Option<usize>,
    pub depths_db: Vec<f64>,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        MeasurementConfig {
            half_bandwidth_hz: 50.0,
            transition_hz: 400.0,
            stopband_db: 80.0,
            hilbert_taps: 2047,
            hilbert_beta: 10.0,
            dft_len: None,
            depths_db: vec![-10.0, -20.0, -30.0, -40.0, -50.0, -60.0],
        }
    }
}

impl MeasurementConfig {
    pub fn bandpass(&self, f0: f64) -> BandpassSpec {
        BandpassSpec {
            center_hz: f0,
            half_bandwidth_hz: self.half_bandwidth_hz,
            transition_hz: self.transition_hz,
            stopband_db: self.stopband_db,
        }
    }
}

/// Bandpass filter applied identically to every channel.
pub fn bandpass_filter(rec: &MeasurementRecording, f0: f64, half_bandwidth: f64) -> Result<MeasurementRecording> {
    let taps = BandpassSpec::around(f0, half_bandwidth).design(rec.sample_rate as f64)?;
    apply_taps(rec, &taps)
}

fn apply_taps(rec: &MeasurementRecording, taps: &[f64]) -> Result<MeasurementRecording> {
    let channels = rec.channels.iter().map(|c| convolve_valid(c, taps)).collect::<Result<_>>()?;
    Ok(MeasurementRecording { channels, ..rec.clone() })
}

/// Largest length in `[available / 2, available]` putting `f0` closest to a
/// bin centre.
pub fn choose_dft_len(available: usize, f0: f64, fs: f64) -> Result<usize> {
    if available < 16 {
        return Err(Error::param("dft_len", format!("only {available} usable samples")));
    }
    let mut best = (available, f64::INFINITY);
    for n in (available / 2..=available).rev() {
        let k = f0 * n as f64 / fs;
        let off = (k - k.round()).abs();
        if off < best.1 {
            best = (n, off);
            if off == 0.0 {
                break;
            }
        }
    }
    Ok(best.0)
}

/// Power of the component at DFT bin `k` of `u[..n]`, scaled so a unit
/// sinusoid on the bin reads 0.5.
pub fn bin_power(u: &[f64], k: usize) -> f64 {
    let n = u.len();
    let x: Complex64 = u
        .iter()
        .enumerate()
        .map(|(t, &v)| v * Complex64::from_polar(1.0, -TAU * ((k * t) % n) as f64 / n as f64))
        .sum();
    2.0 * x.norm_sqr() / (n * n) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TonePower {
    pub power: f64,
    /// Adjacent-bin power relative to the tone bin, dB.
    pub leakage_db: f64,
}

/// Filter, derive quadrature, beamform and read the tone bin for one recording.
pub fn process_recording(
    rec: &MeasurementRecording,
    weights: &BeamWeights,
    bandpass: &[f64],
    hilbert: &[f64],
    f0: f64,
    dft_len: Option<usize>,
) -> Result<TonePower> {
    if rec.num_channels() != weights.num_channels() {
        return Err(Error::ChannelCount { expected: weights.num_channels(), actual: rec.num_channels() });
    }
    let delay = (hilbert.len() - 1) / 2;
    let mut chans = Vec::with_capacity(rec.num_channels());
    for x in &rec.channels {
        let y = convolve_valid(x, bandpass)?;
        let q = convolve_valid(&y, hilbert)?;
        let i = y[delay..delay + q.len()].to_vec();
        chans.push(ComplexChannel::new(i, q)?);
    }
    let u = beamform(&chans, weights)?.0;
    let fs = rec.sample_rate as f64;
    let n = match dft_len {
        Some(n) if n <= u.len() && n > 0 => n,
        Some(n) => return Err(Error::param("dft_len", format!("{n} exceeds the {} usable samples", u.len()))),
        None => choose_dft_len(u.len(), f0, fs)?,
    };
    let u = &u[..n];
    let k = (f0 * n as f64 / fs).round() as usize;
    let power = bin_power(u, k);
    let side = bin_power(u, k - 1) + bin_power(u, k + 1);
    Ok(TonePower { power, leakage_db: power_db(side / power) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredNull {
    pub angle_deg: f64,
    /// Depth reported, never below the noise floor.
    pub depth_db: f64,
    pub raw_depth_db: f64,
    pub floor_limited: bool,
    pub widths: Vec<WidthAt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredSweep {
    pub pattern: Beampattern,
    pub noise_floor_db: f64,
    pub leakage_db: Vec<f64>,
    pub dft_len: usize,
    pub bandpass: BandpassSpec,
    pub bandpass_taps: usize,
    pub hilbert_taps: usize,
    pub hilbert_beta: f64,
    pub nulls: Vec<MeasuredNull>,
}

impl MeasuredSweep {
    /// `angle_deg,power_db` rows.
    pub fn to_csv(&self, header: &[(String, String)]) -> String {
        let mut out = String::new();
        for (k, v) in header {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out.push_str(&format!("# noise_floor_db = {}\n", self.noise_floor_db));
        out.push_str("angle_deg,power_db\n");
        for p in &self.pattern.points {
            out.push_str(&format!("{},{}\n", p.theta_deg, p.power_db));
        }
        out
    }

    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            noise_floor_db: f64,
            dft_len: usize,
            bandpass: &'a BandpassSpec,
            bandpass_taps: usize,
            hilbert_taps: usize,
            hilbert_beta: f64,
            max_leakage_db: f64,
            nulls: &'a [MeasuredNull],
        }
        Ok(serde_json::to_string_pretty(&Summary {
            noise_floor_db: self.noise_floor_db,
            dft_len: self.dft_len,
            bandpass: &self.bandpass,
            bandpass_taps: self.bandpass_taps,
            hilbert_taps: self.hilbert_taps,
            hilbert_beta: self.hilbert_beta,
            max_leakage_db: self.leakage_db.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            nulls: &self.nulls,
        })?)
    }
}

/// Runs every manifest entry through [`process_recording`], normalizes to
/// the 0 deg entry and measures the silence recording on the same scale.
pub fn measured_beampattern(manifest: &SweepManifest, weights: &BeamWeights, cfg: &MeasurementConfig) -> Result<MeasuredSweep> {
    manifest.validate()?;
    if weights.num_channels() != manifest.num_channels {
        return Err(Error::ChannelCount { expected: manifest.num_channels, actual: weights.num_channels() });
    }
    if (weights.f0_hz - manifest.f0_hz).abs() > 1e-9 * manifest.f0_hz {
        log::warn!("weights designed for {} Hz, sweep tone is {} Hz", weights.f0_hz, manifest.f0_hz);
    }
    let fs = manifest.sample_rate_hz as f64;
    let bp_spec = cfg.bandpass(manifest.f0_hz);
    let bandpass = bp_spec.design(fs)?;
    let hilbert = hilbert_taps(cfg.hilbert_taps, cfg.hilbert_beta, manifest.f0_hz, fs)?;
    let expected = Expected { sample_rate: Some(manifest.sample_rate_hz), num_channels: Some(manifest.num_channels) };

    let entries: Vec<_> = manifest.signal_entries().collect();
    if !entries.iter().any(|e| e.angle_deg == Some(0.0)) {
        return Err(Error::Manifest("no endfire (0 deg) entry".into()));
    }
    let silence = manifest.silence_entry().ok_or_else(|| Error::Manifest("no silence entry".into()))?;

    let mut recs = Vec::with_capacity(entries.len() + 1);
    for e in entries.iter().copied().chain(std::iter::once(silence)) {
        let mut r = load_recording(&manifest.resolve(&e.path), expected)?;
        r.source_angle_deg = e.angle_deg;
        r.label = e.label;
        recs.push(r);
    }
    let len = recs[0].len();
    if let Some(r) = recs.iter().find(|r| r.len() != len) {
        return Err(Error::LengthMismatch { expected: len, actual: r.len() });
    }
    let dft_len = match cfg.dft_len {
        Some(n) => n,
        None => {
            let usable = len.saturating_sub(bandpass.len() + hilbert.len() - 2);
            choose_dft_len(usable, manifest.f0_hz, fs)?
        }
    };

    let tones: Vec<TonePower> = recs
        .par_iter()
        .map(|r| process_recording(r, weights, &bandpass, &hilbert, manifest.f0_hz, Some(dft_len)))
        .collect::<Result<_>>()?;
    let (sig, sil) = tones.split_at(entries.len());
    let angles: Vec<f64> = entries.iter().map(|e| e.angle_deg.unwrap_or_default()).collect();
    let powers: Vec<f64> = sig.iter().map(|t| t.power).collect();
    let endfire = powers[angles.iter().position(|&a| a == 0.0).unwrap_or(0)];
    if !(endfire > 0.0) {
        return Err(Error::Manifest("endfire recording has no power at the tone".into()));
    }
    let pattern = Beampattern::with_reference(&angles, &powers, endfire, 0.0)?;
    let noise_floor_db = power_db(sil[0].power / endfire);

    let nulls = find_nulls(&pattern, None, 0.0)
        .into_iter()
        .map(|n| {
            let widths = cfg
                .depths_db
                .iter()
                .map(|&d| Ok(WidthAt { depth_db: d, width_deg: null_width(&pattern, n.angle_deg, d)? }))
                .collect::<Result<_>>()?;
            let floor_limited = n.depth_db <= noise_floor_db;
            Ok(MeasuredNull {
                angle_deg: n.angle_deg,
                depth_db: n.depth_db.max(noise_floor_db),
                raw_depth_db: n.depth_db,
                floor_limited,
                widths,
            })
        })
        .collect::<Result<_>>()?;

    Ok(MeasuredSweep {
        pattern,
        noise_floor_db,
        leakage_db: sig.iter().map(|t| t.leakage_db).collect(),
        dft_len,
        bandpass: bp_spec,
        bandpass_taps: bandpass.len(),
        hilbert_taps: hilbert.len(),
        hilbert_beta: cfg.hilbert_beta,
        nulls,
    })
}

impl Label {
    pub fn is_silence(&self) -> bool {
        matches!(self, Label::Silence)
    }
}
