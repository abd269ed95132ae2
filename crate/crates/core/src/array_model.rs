//! Free-field plane-wave model of a uniform linear microphone array driven
//! by a single tone.
//!
//! Mic 1 is the reference sensor. Mic `i` sees the tone delayed by
//! `(i - 1) * tau0`, where `tau0 = spacing * cos(theta) / c`, and scaled and
//! rotated by its own transfer function `G_i e^{j phi_i}` at the tone
//! frequency. Angles are radians here; conversion from degrees happens at
//! the crate's outer interfaces.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SOUND_SPEED: f64 = 343.0;

/// Incident tone `A cos(2 pi f0 t + phi_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub amplitude: f64,
    pub frequency: f64,
    pub initial_phase: f64,
}

impl SourceSpec {
    pub fn new(amplitude: f64, frequency: f64, initial_phase: f64) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::param("amplitude", format!("must be > 0, got {amplitude}")));
        }
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(Error::param("frequency", format!("must be > 0, got {frequency}")));
        }
        if !initial_phase.is_finite() {
            return Err(Error::param("initial_phase", "must be finite"));
        }
        Ok(SourceSpec { amplitude, frequency, initial_phase })
    }

    pub fn angular_frequency(&self) -> f64 {
        TAU * self.frequency
    }

    pub fn wavelength(&self, sound_speed: f64) -> f64 {
        sound_speed / self.frequency
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub num_mics: usize,
    pub spacing: f64,
    pub sound_speed: f64,
}

impl ArrayGeometry {
    pub fn new(num_mics: usize, spacing: f64, sound_speed: f64) -> Result<Self> {
        if num_mics < 2 {
            return Err(Error::param("num_mics", format!("need at least 2 mics, got {num_mics}")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::param("spacing", format!("must be > 0, got {spacing}")));
        }
        if !(sound_speed > 0.0 && sound_speed.is_finite()) {
            return Err(Error::param("sound_speed", format!("must be > 0, got {sound_speed}")));
        }
        Ok(ArrayGeometry { num_mics, spacing, sound_speed })
    }

    /// Geometry with the spacing given as a fraction of the wavelength at `f0`.
    pub fn with_spacing_in_wavelengths(
        num_mics: usize,
        fraction: f64,
        f0: f64,
        sound_speed: f64,
    ) -> Result<Self> {
        Self::new(num_mics, fraction * sound_speed / f0, sound_speed)
    }

    /// Spacing in wavelengths at `f0`.
    pub fn spacing_in_wavelengths(&self, f0: f64) -> f64 {
        self.spacing * f0 / self.sound_speed
    }

    /// Logs a warning when the spacing leaves the small-spacing regime.
    pub fn check_small_spacing(&self, f0: f64) -> bool {
        let ok = self.spacing <= 0.1 * self.sound_speed / f0;
        if !ok {
            log::warn!(
                "spacing {:.4} m is {:.3} wavelengths at {f0} Hz; differential model assumes << 1",
                self.spacing,
                self.spacing_in_wavelengths(f0)
            );
        }
        ok
    }
}

/// Per-mic transfer function `G_i e^{j phi_i}` at the tone frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicChannel {
    /// 1-based sensor index.
    pub index: usize,
    pub gain: f64,
    pub phase: f64,
}

impl MicChannel {
    pub fn new(index: usize, gain: f64, phase: f64) -> Result<Self> {
        if index == 0 {
            return Err(Error::param("index", "mic indices are 1-based"));
        }
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::param("gain", format!("must be > 0, got {gain}")));
        }
        if !phase.is_finite() {
            return Err(Error::param("phase", "must be finite"));
        }
        Ok(MicChannel { index, gain, phase: phase.rem_euclid(TAU) })
    }

    /// Matched channel: unit gain, zero phase.
    pub fn ideal(index: usize) -> Self {
        MicChannel { index, gain: 1.0, phase: 0.0 }
    }

    pub fn ideal_set(num_mics: usize) -> Vec<Self> {
        (1..=num_mics).map(Self::ideal).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub sample_rate: f64,
    pub num_samples: usize,
}

impl SamplingSpec {
    pub fn new(sample_rate: f64, num_samples: usize) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::param("sample_rate", format!("must be > 0, got {sample_rate}")));
        }
        if num_samples == 0 {
            return Err(Error::param("num_samples", "must be at least 1"));
        }
        Ok(SamplingSpec { sample_rate, num_samples })
    }

    pub fn check_tone(&self, f0: f64) -> Result<()> {
        if self.num_samples == 0 {
            return Err(Error::param("num_samples", "must be at least 1"));
        }
        if !(f0 < self.sample_rate / 2.0) {
            return Err(Error::param(
                "frequency",
                format!("{f0} Hz is not below Nyquist ({} Hz)", self.sample_rate / 2.0),
            ));
        }
        Ok(())
    }
}

pub fn deg_to_rad(deg: f64) -> f64 {
    deg * (PI / 180.0)
}

pub fn rad_to_deg(rad: f64) -> f64 {
    rad * (180.0 / PI)
}

/// `cos(theta)` with theta folded onto `[0, pi]` first, so `theta` and
/// `2 pi - theta` hit the same cosine evaluation.
pub fn axis_cosine(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(TAU);
    if t > PI {
        t = TAU - t;
    }
    t.cos()
}

/// Delay between adjacent sensors for a plane wave arriving at `theta`.
/// Sensor `i` is delayed by `(i - 1)` times this.
pub fn adjacent_delay(geom: &ArrayGeometry, theta: f64) -> f64 {
    geom.spacing * axis_cosine(theta) / geom.sound_speed
}

/// `e^{j omega0 n Ts}` for `n = 0..L`, shared by every channel with the same
/// tone and sampling grid.
#[derive(Debug, Clone)]
pub struct PhasorTable {
    pub frequency: f64,
    pub sampling: SamplingSpec,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl PhasorTable {
    pub fn new(frequency: f64, sampling: SamplingSpec) -> Result<Self> {
        sampling.check_tone(frequency)?;
        let fs = sampling.sample_rate;
        let (cos, sin) = (0..sampling.num_samples)
            .map(|n| {
                // Reduce to whole cycles before scaling by 2 pi.
                let cycles = (n as f64 * frequency).rem_euclid(fs) / fs;
                let (s, c) = (TAU * cycles).sin_cos();
                (c, s)
            })
            .unzip();
        Ok(PhasorTable { frequency, sampling, cos, sin })
    }

    pub fn len(&self) -> usize {
        self.cos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cos.is_empty()
    }
}

/// Constant part of mic `i`'s phase, `phi_s + phi_i - omega0 (i - 1) tau0`,
/// together with its amplitude `A G_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPhasor {
    pub amplitude: f64,
    pub cos: f64,
    pub sin: f64,
}

impl ChannelPhasor {
    pub fn new(src: &SourceSpec, geom: &ArrayGeometry, chan: &MicChannel, theta: f64) -> Self {
        let tau_i = (chan.index as f64 - 1.0) * adjacent_delay(geom, theta);
        let phase = src.initial_phase.rem_euclid(TAU) + chan.phase - src.angular_frequency() * tau_i;
        let (sin, cos) = phase.sin_cos();
        ChannelPhasor { amplitude: src.amplitude * chan.gain, cos, sin }
    }

    /// In-phase and quadrature samples at time index `n`.
    #[inline(always)]
    pub fn sample(&self, table: &PhasorTable, n: usize) -> (f64, f64) {
        self.sample_from(table.cos[n], table.sin[n])
    }

    /// Same as [`ChannelPhasor::sample`] given the table entries directly.
    #[inline(always)]
    pub fn sample_from(&self, bc: f64, bs: f64) -> (f64, f64) {
        (
            self.amplitude * (bc * self.cos - bs * self.sin),
            self.amplitude * (bs * self.cos + bc * self.sin),
        )
    }
}

/// Unquantized in-phase / quadrature sequences for one mic.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSignal {
    pub in_phase: Vec<f64>,
    pub quadrature: Vec<f64>,
}

pub fn synth_channel(
    src: &SourceSpec,
    geom: &ArrayGeometry,
    chan: &MicChannel,
    theta: f64,
    samp: &SamplingSpec,
) -> Result<ChannelSignal> {
    let table = PhasorTable::new(src.frequency, *samp)?;
    Ok(synth_channel_with(&table, src, geom, chan, theta))
}

/// Same as [`synth_channel`] with a prebuilt phasor table.
pub fn synth_channel_with(
    table: &PhasorTable,
    src: &SourceSpec,
    geom: &ArrayGeometry,
    chan: &MicChannel,
    theta: f64,
) -> ChannelSignal {
    let ph = ChannelPhasor::new(src, geom, chan, theta);
    let (in_phase, quadrature) = (0..table.len()).map(|n| ph.sample(table, n)).unzip();
    ChannelSignal { in_phase, quadrature }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_geom(m: usize) -> ArrayGeometry {
        ArrayGeometry::with_spacing_in_wavelengths(m, 0.04, 997.0, DEFAULT_SOUND_SPEED).unwrap()
    }

    #[test]
    fn delay_at_broadside_is_zero() {
        let g = reference_geom(2);
        assert!(adjacent_delay(&g, deg_to_rad(90.0)).abs() < 1e-20);
    }

    #[test]
    fn delay_at_endfire() {
        let g = ArrayGeometry::new(2, 13.76e-3, 343.0).unwrap();
        let tau = adjacent_delay(&g, 0.0);
        assert!((tau - 40.12e-6).abs() < 0.01e-6, "{tau}");
        let back = adjacent_delay(&g, PI);
        assert_eq!(back, -g.spacing / g.sound_speed);
    }

    #[test]
    fn reference_mic_is_plain_tone() {
        let src = SourceSpec::new(0.8, 997.0, 0.3).unwrap();
        let samp = SamplingSpec::new(44100.0, 512).unwrap();
        let s = synth_channel(&src, &reference_geom(2), &MicChannel::ideal(1), 0.7, &samp).unwrap();
        for n in 0..512 {
            let arg = TAU * 997.0 * n as f64 / 44100.0 + 0.3;
            assert!((s.in_phase[n] - 0.8 * arg.cos()).abs() < 1e-12);
            assert!((s.quadrature[n] - 0.8 * arg.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrature_is_ninety_degrees_behind() {
        // Correlating against a cos/sin reference recovers the phase of each
        // sequence; sin lags cos by pi/2.
        let src = SourceSpec::new(1.0, 997.0, 1.1).unwrap();
        let samp = SamplingSpec::new(44100.0, 44100).unwrap();
        let s = synth_channel(&src, &reference_geom(3), &MicChannel::new(3, 1.0, 0.4).unwrap(), 0.5, &samp)
            .unwrap();
        let phase_of = |x: &[f64]| {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, v) in x.iter().enumerate() {
                let a = TAU * 997.0 * n as f64 / 44100.0;
                re += v * a.cos();
                im -= v * a.sin();
            }
            im.atan2(re)
        };
        let d = (phase_of(&s.quadrature) - phase_of(&s.in_phase)).rem_euclid(TAU);
        assert!((d - 1.5 * PI).abs() < 1e-9, "{d}");
    }

    #[test]
    fn inter_channel_lag_at_endfire() {
        let src = SourceSpec::new(1.0, 997.0, 0.0).unwrap();
        let g = reference_geom(2);
        let p1 = ChannelPhasor::new(&src, &g, &MicChannel::ideal(1), 0.0);
        let p2 = ChannelPhasor::new(&src, &g, &MicChannel::ideal(2), 0.0);
        let lag = p1.sin.atan2(p1.cos) - p2.sin.atan2(p2.cos);
        assert!((lag - TAU * 0.04).abs() < 1e-12, "{lag}");
        assert!((lag - 0.2513).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_sampling() {
        let src = SourceSpec::new(1.0, 997.0, 0.0).unwrap();
        assert!(SamplingSpec::new(44100.0, 0).is_err());
        let samp = SamplingSpec::new(1900.0, 16).unwrap();
        assert!(synth_channel(&src, &reference_geom(2), &MicChannel::ideal(1), 0.0, &samp).is_err());
    }

    #[test]
    fn small_spacing_check() {
        assert!(reference_geom(2).check_small_spacing(997.0));
        let wide = ArrayGeometry::with_spacing_in_wavelengths(2, 0.3, 997.0, 343.0).unwrap();
        assert!(!wide.check_small_spacing(997.0));
    }
}
