use std::sync::Arc;

use num_complex::Complex64;

use crate::array_model::{
    synth_channel_with, ArrayGeometry, ChannelPhasor, MicChannel, PhasorTable, SamplingSpec, SourceSpec,
};
use crate::beamformer::ComplexChannel;
use crate::error::{Error, Result};
use crate::quantization::{round_half_away, step_size, QuantizerSpec};
use crate::weights::BeamWeights;

/// Everything needed to evaluate beamformer output power at one incidence
/// angle. `quantizer == None` is the ideal (unquantized) path.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub source: SourceSpec,
    pub geometry: ArrayGeometry,
    pub channels: Vec<MicChannel>,
    pub quantizer: Option<QuantizerSpec>,
    pub weights: BeamWeights,
    pub sampling: SamplingSpec,
    table: Arc<PhasorTable>,
    compensated: Vec<Complex64>,
}

impl Scenario {
    pub fn new(
        source: SourceSpec,
        geometry: ArrayGeometry,
        channels: Vec<MicChannel>,
        quantizer: Option<QuantizerSpec>,
        weights: BeamWeights,
        sampling: SamplingSpec,
    ) -> Result<Self> {
        if channels.len() != geometry.num_mics {
            return Err(Error::ChannelCount { expected: geometry.num_mics, actual: channels.len() });
        }
        if weights.num_channels() != geometry.num_mics {
            return Err(Error::ChannelCount {
                expected: geometry.num_mics,
                actual: weights.num_channels(),
            });
        }
        for (k, ch) in channels.iter().enumerate() {
            if ch.index != k + 1 {
                return Err(Error::param("channels", format!("channel {k} has index {}", ch.index)));
            }
        }
        let table = Arc::new(PhasorTable::new(source.frequency, sampling)?);
        let compensated = weights.compensated();
        Ok(Scenario { source, geometry, channels, quantizer, weights, sampling, table, compensated })
    }

    /// Copy with new source/mic phases, weights re-compensated for them.
    /// The phasor table is shared.
    pub fn with_phases(&self, source_phase: f64, mic_phases: &[f64]) -> Result<Self> {
        if mic_phases.len() != self.channels.len() {
            return Err(Error::ChannelCount { expected: self.channels.len(), actual: mic_phases.len() });
        }
        let channels = self
            .channels
            .iter()
            .zip(mic_phases)
            .map(|(ch, &p)| MicChannel::new(ch.index, ch.gain, p))
            .collect::<Result<Vec<_>>>()?;
        let weights = self.weights.with_channels(&channels)?;
        let compensated = weights.compensated();
        Ok(Scenario {
            source: SourceSpec { initial_phase: source_phase, ..self.source },
            channels,
            weights,
            compensated,
            ..self.clone()
        })
    }

    pub fn with_quantizer(&self, quantizer: Option<QuantizerSpec>) -> Self {
        Scenario { quantizer, ..self.clone() }
    }

    /// Quantized (or ideal) complex channels at `theta` (radians).
    pub fn channels_at(&self, theta: f64) -> Vec<ComplexChannel> {
        self.channels
            .iter()
            .map(|ch| {
                let sig = synth_channel_with(&self.table, &self.source, &self.geometry, ch, theta);
                ComplexChannel::from_signal(sig, self.quantizer.as_ref())
            })
            .collect()
    }

    /// Mean-square beamformer output at `theta` (radians). Fuses synthesis,
    /// quantization and beamforming; bit-identical to composing
    /// [`Scenario::channels_at`], [`crate::beamformer::beamform`] and
    /// [`crate::beamformer::output_power`].
    pub fn power_at(&self, theta: f64) -> f64 {
        let table = &*self.table;
        let len = table.len();
        let mut u = vec![0.0; len];
        for (ch, c) in self.channels.iter().zip(&self.compensated) {
            let ph = ChannelPhasor::new(&self.source, &self.geometry, ch, theta);
            let samples = table.cos.iter().zip(&table.sin).map(|(&bc, &bs)| ph.sample_from(bc, bs));
            match &self.quantizer {
                Some(q) => {
                    let step = step_size(q);
                    let (lo, hi) = (q.min_code(), q.max_code());
                    // Scaling by a power of two is exact either way; the
                    // multiply is much cheaper than the divide.
                    if is_power_of_two(step) {
                        let inv = 1.0 / step;
                        for (acc, (yi, yq)) in u.iter_mut().zip(samples) {
                            let yi = round_half_away(yi * inv).clamp(lo, hi) * step;
                            let yq = round_half_away(yq * inv).clamp(lo, hi) * step;
                            *acc += c.re * yi - c.im * yq;
                        }
                    } else {
                        for (acc, (yi, yq)) in u.iter_mut().zip(samples) {
                            let yi = round_half_away(yi / step).clamp(lo, hi) * step;
                            let yq = round_half_away(yq / step).clamp(lo, hi) * step;
                            *acc += c.re * yi - c.im * yq;
                        }
                    }
                }
                None => {
                    for (acc, (yi, yq)) in u.iter_mut().zip(samples) {
                        *acc += c.re * yi - c.im * yq;
                    }
                }
            }
        }
        u.iter().map(|v| v * v).sum::<f64>() / len as f64
    }

    pub fn power_at_deg(&self, theta_deg: f64) -> f64 {
        self.power_at(crate::array_model::deg_to_rad(theta_deg))
    }
}

fn is_power_of_two(x: f64) -> bool {
    x.is_normal() && x > 0.0 && x.to_bits() & ((1u64 << 52) - 1) == 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_model::{deg_to_rad, DEFAULT_SOUND_SPEED};
    use crate::beamformer::{beamform, output_power};
    use crate::weights::{design_weights, Pattern, PatternSpec};

    #[test]
    fn fused_kernel_matches_composed_path_bitwise() {
        let g = ArrayGeometry::with_spacing_in_wavelengths(3, 0.04, 997.0, DEFAULT_SOUND_SPEED).unwrap();
        let spec = PatternSpec::new(Pattern::Supercardioid, 2).unwrap();
        let w = design_weights(&spec, &g, 997.0, &MicChannel::ideal_set(3)).unwrap();
        let base = Scenario::new(
            SourceSpec::new(1.0, 997.0, 0.0).unwrap(),
            g,
            MicChannel::ideal_set(3),
            Some(QuantizerSpec::with_bits(12).unwrap()),
            w,
            SamplingSpec::new(44100.0, 2048).unwrap(),
        )
        .unwrap();
        let s = base.with_phases(1.7, &[0.3, 4.0, 2.2]).unwrap();
        for q in [None, Some(QuantizerSpec::with_bits(12).unwrap()), Some(QuantizerSpec::new(10, 1.3).unwrap())] {
            let s = s.with_quantizer(q);
            for deg in [0.0, 33.3, 106.0, 180.0, 250.0] {
                let th = deg_to_rad(deg);
                let composed = output_power(&beamform(&s.channels_at(th), &s.weights).unwrap()).unwrap();
                assert_eq!(composed.to_bits(), s.power_at(th).to_bits(), "{deg}");
            }
        }
    }
}
