//! Kaiser-windowed FIR designs and FFT convolution.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Zeroth-order modified Bessel function of the first kind (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..500 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser `beta` for a stopband attenuation of `atten_db`.
pub fn kaiser_beta(atten_db: f64) -> f64 {
    if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    }
}

pub fn kaiser_window(len: usize, beta: f64) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = bessel_i0(beta);
    let half = (len - 1) as f64 / 2.0;
    (0..len)
        .map(|n| {
            let r = (n as f64 - half) / half;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
        })
        .collect()
}

/// Odd tap count meeting `atten_db` with a transition of `transition_hz`.
pub fn kaiser_len(atten_db: f64, transition_hz: f64, fs: f64) -> usize {
    let dw = 2.0 * PI * transition_hz / fs;
    let n = ((atten_db - 7.95) / (2.285 * dw)).ceil().max(1.0) as usize + 1;
    n | 1
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Magnitude and phase of a filter's frequency response at `f` Hz.
pub fn response_at(taps: &[f64], f: f64, fs: f64) -> Complex64 {
    let w = 2.0 * PI * f / fs;
    taps.iter().enumerate().map(|(n, &h)| h * Complex64::from_polar(1.0, -w * n as f64)).sum()
}

/// Parameters of the bandpass used ahead of the quadrature stage.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BandpassSpec {
    pub center_hz: f64,
    pub half_bandwidth_hz: f64,
    pub transition_hz: f64,
    pub stopband_db: f64,
}

impl BandpassSpec {
    pub fn around(center_hz: f64, half_bandwidth_hz: f64) -> Self {
        BandpassSpec { center_hz, half_bandwidth_hz, transition_hz: 400.0, stopband_db: 80.0 }
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        let (f0, hb, tw) = (self.center_hz, self.half_bandwidth_hz, self.transition_hz);
        if !(hb > 0.0 && hb < f0) {
            return Err(Error::param("half_bandwidth", format!("need 0 < {hb} < f0 = {f0}")));
        }
        if !(f0 + hb < fs / 2.0) {
            return Err(Error::param("half_bandwidth", format!("upper edge {} Hz is above Nyquist", f0 + hb)));
        }
        if !(tw > 0.0 && f0 - hb - tw / 2.0 > 0.0 && f0 + hb + tw / 2.0 < fs / 2.0) {
            return Err(Error::param("transition", format!("{tw} Hz does not fit between the band and 0 / Nyquist")));
        }
        if !(self.stopband_db > 20.0) {
            return Err(Error::param("stopband", "must exceed 20 dB"));
        }
        Ok(())
    }

    /// Linear-phase taps scaled to unit gain at the centre frequency.
    pub fn design(&self, fs: f64) -> Result<Vec<f64>> {
        self.validate(fs)?;
        let len = kaiser_len(self.stopband_db, self.transition_hz, fs);
        let win = kaiser_window(len, kaiser_beta(self.stopband_db));
        let lo = (self.center_hz - self.half_bandwidth_hz - self.transition_hz / 2.0) / fs;
        let hi = (self.center_hz + self.half_bandwidth_hz + self.transition_hz / 2.0) / fs;
        let c = (len - 1) as f64 / 2.0;
        let mut taps: Vec<f64> = win
            .iter()
            .enumerate()
            .map(|(n, w)| {
                let t = n as f64 - c;
                w * (2.0 * hi * sinc(2.0 * hi * t) - 2.0 * lo * sinc(2.0 * lo * t))
            })
            .collect();
        let g = response_at(&taps, self.center_hz, fs).norm();
        taps.iter_mut().for_each(|h| *h /= g);
        Ok(taps)
    }
}

/// Windowed ideal Hilbert transformer (`2 / (pi n)` at odd offsets), scaled
/// to unit gain at `f0`. `len` must be odd.
pub fn hilbert_taps(len: usize, beta: f64, f0: f64, fs: f64) -> Result<Vec<f64>> {
    if len < 3 || len.is_multiple_of(2) {
        return Err(Error::param("hilbert_taps", format!("must be odd and >= 3, got {len}")));
    }
    let win = kaiser_window(len, beta);
    let c = (len - 1) / 2;
    let mut taps: Vec<f64> = (0..len)
        .map(|n| {
            let k = n as i64 - c as i64;
            if k % 2 == 0 {
                0.0
            } else {
                win[n] * 2.0 / (PI * k as f64)
            }
        })
        .collect();
    let g = response_at(&taps, f0, fs).norm();
    if !(g > 0.0) {
        return Err(Error::param("hilbert_taps", "zero gain at the tone frequency"));
    }
    taps.iter_mut().for_each(|h| *h /= g);
    Ok(taps)
}

/// Convolution keeping only the outputs where `h` fully overlaps `x`:
/// `y[n] = sum_k h[k] x[n + len(h) - 1 - k]`, length `len(x) - len(h) + 1`.
pub fn convolve_valid(x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    if h.is_empty() || x.len() < h.len() {
        return Err(Error::LengthMismatch { expected: h.len().max(1), actual: x.len() });
    }
    let full = x.len() + h.len() - 1;
    let n = full.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |v: &[f64]| {
        let mut b: Vec<Complex64> = v.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        b.resize(n, Complex64::new(0.0, 0.0));
        b
    };
    let (mut a, mut b) = (pad(x), pad(h));
    fwd.process(&mut a);
    fwd.process(&mut b);
    a.iter_mut().zip(&b).for_each(|(p, q)| *p *= q);
    inv.process(&mut a);
    let scale = 1.0 / n as f64;
    Ok(a[h.len() - 1..x.len()].iter().map(|c| c.re * scale).collect())
}
