//! Weighted sum of complex (in-phase + j quadrature) channels, reduced to its
//! real part, and the mean-square power of that output.

use crate::array_model::ChannelSignal;
use crate::error::{Error, Result};
use crate::quantization::{quantize_sequence, QuantizerSpec};
use crate::weights::BeamWeights;

/// `z_i[n] = y_in[n] + j y_qp[n]`, both components already quantized (or
/// both left ideal).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexChannel {
    pub in_phase: Vec<f64>,
    pub quadrature: Vec<f64>,
}

impl ComplexChannel {
    pub fn new(in_phase: Vec<f64>, quadrature: Vec<f64>) -> Result<Self> {
        if in_phase.len() != quadrature.len() {
            return Err(Error::LengthMismatch { expected: in_phase.len(), actual: quadrature.len() });
        }
        Ok(ComplexChannel { in_phase, quadrature })
    }

    /// Quantizes both components with the same spec; `None` keeps them ideal.
    pub fn from_signal(sig: ChannelSignal, quantizer: Option<&QuantizerSpec>) -> Self {
        match quantizer {
            Some(q) => ComplexChannel {
                in_phase: quantize_sequence(&sig.in_phase, q).samples,
                quadrature: quantize_sequence(&sig.quadrature, q).samples,
            },
            None => ComplexChannel { in_phase: sig.in_phase, quadrature: sig.quadrature },
        }
    }

    pub fn len(&self) -> usize {
        self.in_phase.len()
    }

    pub fn is_empty(&self) -> bool {
        self.in_phase.is_empty()
    }

    pub fn zeros(len: usize) -> Self {
        ComplexChannel { in_phase: vec![0.0; len], quadrature: vec![0.0; len] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformedOutput(pub Vec<f64>);

impl BeamformedOutput {
    pub fn samples(&self) -> &[f64] {
        &self.0
    }
}

/// `u[n] = sum_i Re{C_i z_i[n]}`, accumulated in channel order.
pub fn beamform(channels: &[ComplexChannel], weights: &BeamWeights) -> Result<BeamformedOutput> {
    if channels.len() != weights.num_channels() {
        return Err(Error::ChannelCount { expected: weights.num_channels(), actual: channels.len() });
    }
    let len = channels.first().map_or(0, ComplexChannel::len);
    for ch in channels {
        if ch.in_phase.len() != len || ch.quadrature.len() != len {
            return Err(Error::LengthMismatch { expected: len, actual: ch.len() });
        }
    }
    let mut u = vec![0.0; len];
    for (ch, c) in channels.iter().zip(weights.compensated()) {
        for ((acc, yi), yq) in u.iter_mut().zip(&ch.in_phase).zip(&ch.quadrature) {
            *acc += c.re * yi - c.im * yq;
        }
    }
    Ok(BeamformedOutput(u))
}

/// `(1/L) sum_n u[n]^2`.
pub fn output_power(u: &BeamformedOutput) -> Result<f64> {
    mean_square(&u.0)
}

pub(crate) fn mean_square(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{PI, TAU};

    use super::*;
    use crate::array_model::*;
    use crate::quantization::step_size;
    use crate::weights::{design_weights, Pattern, PatternSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const F0: f64 = 997.0;

    fn setup(p: Pattern, order: usize) -> (ArrayGeometry, BeamWeights) {
        let m = order + 1;
        let g = ArrayGeometry::with_spacing_in_wavelengths(m, 0.04, F0, DEFAULT_SOUND_SPEED).unwrap();
        let w = design_weights(&PatternSpec::new(p, order).unwrap(), &g, F0, &MicChannel::ideal_set(m))
            .unwrap();
        (g, w)
    }

    fn channels(
        src: &SourceSpec,
        g: &ArrayGeometry,
        mics: &[MicChannel],
        theta: f64,
        samp: &SamplingSpec,
        q: Option<&QuantizerSpec>,
    ) -> Vec<ComplexChannel> {
        mics.iter()
            .map(|m| ComplexChannel::from_signal(synth_channel(src, g, m, theta, samp).unwrap(), q))
            .collect()
    }

    #[test]
    fn zero_in_zero_out() {
        let (_, w) = setup(Pattern::Cardioid, 2);
        let u = beamform(&vec![ComplexChannel::zeros(64); 3], &w).unwrap();
        assert!(u.0.iter().all(|&v| v == 0.0));
        assert_eq!(output_power(&u).unwrap(), 0.0);
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let (_, w) = setup(Pattern::Dipole, 1);
        assert!(matches!(
            beamform(&[ComplexChannel::zeros(4)], &w),
            Err(Error::ChannelCount { .. })
        ));
        assert!(matches!(
            beamform(&[ComplexChannel::zeros(4), ComplexChannel::zeros(5)], &w),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(ComplexChannel::new(vec![0.0; 3], vec![0.0; 2]).is_err());
        assert!(matches!(output_power(&BeamformedOutput(vec![])), Err(Error::EmptySequence)));
    }

    #[test]
    fn ideal_output_is_weighted_tone_sum() {
        let (g, w) = setup(Pattern::Hypercardioid, 2);
        let src = SourceSpec::new(0.9, F0, 0.4).unwrap();
        let samp = SamplingSpec::new(44100.0, 256).unwrap();
        let theta = deg_to_rad(37.0);
        let u = beamform(&channels(&src, &g, &MicChannel::ideal_set(3), theta, &samp, None), &w).unwrap();
        let tau0 = adjacent_delay(&g, theta);
        for n in 0..256 {
            let t = n as f64 / 44100.0;
            let expect: f64 = w
                .channels
                .iter()
                .enumerate()
                .map(|(i, tap)| {
                    0.9 * tap.magnitude
                        * (TAU * F0 * (t - i as f64 * tau0) + 0.4 + tap.phase_rad).cos()
                })
                .sum();
            assert!((u.0[n] - expect).abs() < 1e-11, "{n}: {} vs {expect}", u.0[n]);
        }
    }

    #[test]
    fn dipole_broadside_cancels() {
        let (g, w) = setup(Pattern::Dipole, 1);
        let src = SourceSpec::new(1.0, F0, 1.3).unwrap();
        let samp = SamplingSpec::new(44100.0, 4096).unwrap();
        let u = beamform(&channels(&src, &g, &MicChannel::ideal_set(2), PI / 2.0, &samp, None), &w)
            .unwrap();
        let d = w.channels[0].magnitude;
        assert!(u.0.iter().all(|v| v.abs() < 1e-12 * d));
    }

    #[test]
    fn mean_square_of_unit_tone() {
        let l = 1 << 16;
        let u: Vec<f64> = (0..l).map(|n| (TAU * F0 * n as f64 / 44100.0).cos()).collect();
        let p = output_power(&BeamformedOutput(u)).unwrap();
        assert!((p - 0.5).abs() < 1.0 / l as f64 * 10.0, "{p}");
    }

    #[test]
    fn endfire_dipole_has_unit_amplitude() {
        // 44100 samples hold a whole number of 997 Hz cycles.
        let (g, w) = setup(Pattern::Dipole, 1);
        let l = 44100;
        let src = SourceSpec::new(1.0, F0, 0.0).unwrap();
        let samp = SamplingSpec::new(44100.0, l).unwrap();
        let u = beamform(&channels(&src, &g, &MicChannel::ideal_set(2), 0.0, &samp, None), &w).unwrap();
        let p = output_power(&u).unwrap();
        assert!((p - 0.5).abs() < 1.0 / l as f64, "{p}");
    }

    #[test]
    fn broadside_dipole_noise_matches_error_model() {
        // At the null only the four weighted error terms survive; their mean
        // power is 2 D^2 (Delta^2 / 12).
        let (g, w) = setup(Pattern::Dipole, 1);
        let q = QuantizerSpec::with_bits(16).unwrap();
        let samp = SamplingSpec::new(44100.0, 8192).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mics = [
            MicChannel::new(1, 1.0, rng.gen_range(0.0..TAU)).unwrap(),
            MicChannel::new(2, 1.0, rng.gen_range(0.0..TAU)).unwrap(),
        ];
        let w = w.with_channels(&mics).unwrap();
        let src = SourceSpec::new(1.0, F0, rng.gen_range(0.0..TAU)).unwrap();
        let u = beamform(&channels(&src, &g, &mics, PI / 2.0, &samp, Some(&q)), &w).unwrap();
        let p = output_power(&u).unwrap();
        let d = w.channels[0].magnitude;
        let model = 2.0 * d * d * step_size(&q).powi(2) / 12.0;
        assert!((p / model - 1.0).abs() < 0.10, "ratio {}", p / model);
    }

    #[test]
    fn linear_in_channels() {
        let (g, w) = setup(Pattern::Supercardioid, 1);
        let samp = SamplingSpec::new(44100.0, 300).unwrap();
        let mics = MicChannel::ideal_set(2);
        let a = channels(&SourceSpec::new(0.5, F0, 0.1).unwrap(), &g, &mics, 0.3, &samp, None);
        let b = channels(&SourceSpec::new(0.2, F0, 2.0).unwrap(), &g, &mics, 1.9, &samp, None);
        let sum: Vec<ComplexChannel> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| {
                ComplexChannel::new(
                    x.in_phase.iter().zip(&y.in_phase).map(|(p, q)| p + q).collect(),
                    x.quadrature.iter().zip(&y.quadrature).map(|(p, q)| p + q).collect(),
                )
                .unwrap()
            })
            .collect();
        let (ua, ub, us) =
            (beamform(&a, &w).unwrap(), beamform(&b, &w).unwrap(), beamform(&sum, &w).unwrap());
        for n in 0..300 {
            assert!((us.0[n] - ua.0[n] - ub.0[n]).abs() < 1e-12);
        }
    }

    #[test]
    fn power_ignores_source_phase() {
        let (g, w) = setup(Pattern::Cardioid, 1);
        let l = 8192;
        let samp = SamplingSpec::new(44100.0, l).unwrap();
        let mics = MicChannel::ideal_set(2);
        let pw = |ps: f64| {
            let src = SourceSpec::new(1.0, F0, ps).unwrap();
            output_power(&beamform(&channels(&src, &g, &mics, 0.8, &samp, None), &w).unwrap()).unwrap()
        };
        let (p0, p1) = (pw(0.0), pw(2.2));
        assert!((p0 - p1).abs() / p0 < 1.0 / l as f64, "{p0} {p1}");
    }
}
