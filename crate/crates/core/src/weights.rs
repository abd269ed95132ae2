//! Differential beamformer weight synthesis.
//!
//! The uncompensated weights `h_i = D_i e^{j psi_i}` solve an `(N+1)x(N+1)`
//! system: unit response toward endfire plus, for every null of multiplicity
//! `m`, zeros of the response and of its first `m - 1` derivatives with
//! respect to `cos(theta)`. Each channel's inverse transfer function is then
//! folded in to give the applied weights `C_i`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array_model::{adjacent_delay, axis_cosine, deg_to_rad, ArrayGeometry, MicChannel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    Dipole,
    Cardioid,
    Hypercardioid,
    Supercardioid,
}

impl Pattern {
    pub const ALL: [Pattern; 4] =
        [Pattern::Dipole, Pattern::Cardioid, Pattern::Hypercardioid, Pattern::Supercardioid];

    pub fn name(&self) -> &'static str {
        match self {
            Pattern::Dipole => "dipole",
            Pattern::Cardioid => "cardioid",
            Pattern::Hypercardioid => "hypercardioid",
            Pattern::Supercardioid => "supercardioid",
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dipole" => Ok(Pattern::Dipole),
            "cardioid" => Ok(Pattern::Cardioid),
            "hypercardioid" => Ok(Pattern::Hypercardioid),
            "supercardioid" => Ok(Pattern::Supercardioid),
            other => Err(format!("unknown pattern `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatternSpec {
    pub pattern: Pattern,
    pub order: usize,
}

impl PatternSpec {
    pub fn new(pattern: Pattern, order: usize) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::UnsupportedPattern { pattern: pattern.to_string(), order });
        }
        Ok(PatternSpec { pattern, order })
    }

    pub fn num_mics(&self) -> usize {
        self.order + 1
    }
}

impl fmt::Display for PatternSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (order {})", self.pattern, self.order)
    }
}

/// Where the doubled null of the third-order cardioid goes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cardioid3Layout {
    /// Double null at 90 degrees, single null at 180 degrees.
    #[default]
    DoubleAt90,
    /// Single null at 90 degrees, double null at 180 degrees.
    DoubleAt180,
}

impl fmt::Display for Cardioid3Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cardioid3Layout::DoubleAt90 => "double_at_90",
            Cardioid3Layout::DoubleAt180 => "double_at_180",
        })
    }
}

impl FromStr for Cardioid3Layout {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "double_at_90" | "90" => Ok(Cardioid3Layout::DoubleAt90),
            "double_at_180" | "180" => Ok(Cardioid3Layout::DoubleAt180),
            other => Err(format!("unknown cardioid3 layout `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullSpec {
    pub angle_deg: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullPlacement(pub Vec<NullSpec>);

impl NullPlacement {
    pub fn total_multiplicity(&self) -> usize {
        self.0.iter().map(|n| n.multiplicity).sum()
    }

    pub fn angles(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().map(|n| n.angle_deg)
    }

    fn validate(&self, order: usize) -> Result<()> {
        if self.total_multiplicity() != order {
            return Err(Error::param(
                "nulls",
                format!("total multiplicity {} != order {order}", self.total_multiplicity()),
            ));
        }
        for n in &self.0 {
            if n.multiplicity == 0 || !(n.angle_deg > 0.0 && n.angle_deg <= 180.0) {
                return Err(Error::param(
                    "nulls",
                    format!("null at {} deg x{} outside (0, 180]", n.angle_deg, n.multiplicity),
                ));
            }
        }
        Ok(())
    }
}

fn nulls(list: &[(f64, usize)]) -> NullPlacement {
    NullPlacement(
        list.iter().map(|&(angle_deg, multiplicity)| NullSpec { angle_deg, multiplicity }).collect(),
    )
}

pub fn null_angles(spec: &PatternSpec) -> Result<NullPlacement> {
    null_angles_with(spec, Cardioid3Layout::default())
}

/// Null sets for the canonical patterns of orders 1 to 3.
pub fn null_angles_with(spec: &PatternSpec, layout: Cardioid3Layout) -> Result<NullPlacement> {
    use Pattern::*;
    let placement = match (spec.pattern, spec.order) {
        (Dipole, n @ 1..=3) => nulls(&[(90.0, n)]),
        (Cardioid, 1) => nulls(&[(180.0, 1)]),
        (Hypercardioid, 1) => nulls(&[(120.0, 1)]),
        (Supercardioid, 1) => nulls(&[(135.0, 1)]),
        (Cardioid, 2) => nulls(&[(90.0, 1), (180.0, 1)]),
        (Hypercardioid, 2) => nulls(&[(72.0, 1), (144.0, 1)]),
        (Supercardioid, 2) => nulls(&[(106.0, 1), (153.0, 1)]),
        (Cardioid, 3) => match layout {
            Cardioid3Layout::DoubleAt90 => nulls(&[(90.0, 2), (180.0, 1)]),
            Cardioid3Layout::DoubleAt180 => nulls(&[(90.0, 1), (180.0, 2)]),
        },
        (Hypercardioid, 3) => nulls(&[(55.0, 1), (100.0, 1), (145.0, 1)]),
        (Supercardioid, 3) => nulls(&[(97.0, 1), (122.0, 1), (153.0, 1)]),
        (p, order) => return Err(Error::UnsupportedPattern { pattern: p.to_string(), order }),
    };
    Ok(placement)
}

/// One channel of a weight set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightTap {
    pub index: usize,
    /// `D_i`.
    pub magnitude: f64,
    /// `psi_i`, radians.
    pub phase_rad: f64,
    /// Channel gain `G_i` being compensated.
    pub gain: f64,
    /// Channel phase `phi_i` being compensated, radians.
    pub mic_phase_rad: f64,
}

impl WeightTap {
    pub fn uncompensated(&self) -> Complex64 {
        Complex64::from_polar(self.magnitude, self.phase_rad)
    }

    /// `C_i = (1 / G_i) e^{-j phi_i} D_i e^{j psi_i}`.
    pub fn compensated(&self) -> Complex64 {
        Complex64::from_polar(self.magnitude / self.gain, self.phase_rad - self.mic_phase_rad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamWeights {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<Pattern>,
    pub order: usize,
    pub f0_hz: f64,
    pub spacing_m: f64,
    pub sound_speed: f64,
    pub nulls: NullPlacement,
    pub channels: Vec<WeightTap>,
}

impl BeamWeights {
    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn compensated(&self) -> Vec<Complex64> {
        self.channels.iter().map(WeightTap::compensated).collect()
    }

    pub fn uncompensated(&self) -> Vec<Complex64> {
        self.channels.iter().map(WeightTap::uncompensated).collect()
    }

    /// Same design, compensating a different set of channel transfer functions.
    pub fn with_channels(&self, channels: &[MicChannel]) -> Result<BeamWeights> {
        if channels.len() != self.channels.len() {
            return Err(Error::ChannelCount { expected: self.channels.len(), actual: channels.len() });
        }
        let mut out = self.clone();
        for (tap, ch) in out.channels.iter_mut().zip(channels) {
            tap.gain = ch.gain;
            tap.mic_phase_rad = ch.phase;
        }
        Ok(out)
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::new(self.channels.len(), self.spacing_m, self.sound_speed)
    }

    /// Complex array response `sum_i h_i e^{-j omega0 (i-1) tau0}` of the
    /// uncompensated weights.
    pub fn response(&self, theta: f64) -> Complex64 {
        let geom = ArrayGeometry {
            num_mics: self.channels.len(),
            spacing: self.spacing_m,
            sound_speed: self.sound_speed,
        };
        let phase = std::f64::consts::TAU * self.f0_hz * adjacent_delay(&geom, theta);
        self.channels
            .iter()
            .enumerate()
            .map(|(i, t)| t.uncompensated() * Complex64::from_polar(1.0, -(i as f64) * phase))
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.len() < 2 {
            return Err(Error::param("channels", "need at least two weight taps"));
        }
        for (k, t) in self.channels.iter().enumerate() {
            if t.index != k + 1 {
                return Err(Error::param("channels", format!("tap {k} has index {}", t.index)));
            }
            if !(t.magnitude > 0.0 && t.magnitude.is_finite()) || !t.phase_rad.is_finite() {
                return Err(Error::param("channels", format!("tap {} has invalid D/psi", t.index)));
            }
            if !(t.gain > 0.0 && t.gain.is_finite()) || !t.mic_phase_rad.is_finite() {
                return Err(Error::param("channels", format!("tap {} has invalid G/phi", t.index)));
            }
        }
        self.geometry()?;
        if !(self.f0_hz > 0.0 && self.f0_hz.is_finite()) {
            return Err(Error::param("f0_hz", "must be > 0"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            #[serde(flatten)]
            weights: &'a BeamWeights,
            compensated: Vec<[f64; 2]>,
        }
        let compensated = self.compensated().iter().map(|c| [c.re, c.im]).collect();
        Ok(serde_json::to_string_pretty(&Doc { weights: self, compensated })?)
    }

    pub fn from_json(text: &str) -> Result<BeamWeights> {
        let w: BeamWeights = serde_json::from_str(text)?;
        w.validate()?;
        Ok(w)
    }

    pub fn load(path: &Path) -> Result<BeamWeights> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub fn design_weights(
    spec: &PatternSpec,
    geom: &ArrayGeometry,
    f0: f64,
    channels: &[MicChannel],
) -> Result<BeamWeights> {
    design_weights_with(spec, Cardioid3Layout::default(), geom, f0, channels)
}

pub fn design_weights_with(
    spec: &PatternSpec,
    layout: Cardioid3Layout,
    geom: &ArrayGeometry,
    f0: f64,
    channels: &[MicChannel],
) -> Result<BeamWeights> {
    let placement = null_angles_with(spec, layout)?;
    let mut w = design_for_nulls(&placement, geom, f0, channels)?;
    w.pattern = Some(spec.pattern);
    Ok(w)
}

/// Weights for an arbitrary null placement with total multiplicity `M - 1`.
pub fn design_for_nulls(
    placement: &NullPlacement,
    geom: &ArrayGeometry,
    f0: f64,
    channels: &[MicChannel],
) -> Result<BeamWeights> {
    let m = geom.num_mics;
    let order = m - 1;
    placement.validate(order)?;
    if channels.len() != m {
        return Err(Error::ChannelCount { expected: m, actual: channels.len() });
    }
    geom.check_small_spacing(f0);

    // Steering phase per unit cos(theta) between adjacent mics.
    let x = std::f64::consts::TAU * f0 * geom.spacing / geom.sound_speed;

    // Row for the k-th derivative with respect to u = cos(theta), scaled by
    // x^-k to keep the rows comparable in size.
    let row = |u: f64, k: usize| -> Vec<Complex64> {
        (0..m)
            .map(|i| {
                let i = i as f64;
                Complex64::new(0.0, -i).powu(k as u32) * Complex64::from_polar(1.0, -i * x * u)
            })
            .collect()
    };

    let mut seen: Vec<f64> = Vec::new();
    for n in &placement.0 {
        let u = axis_cosine(deg_to_rad(n.angle_deg));
        if seen.iter().any(|&v| (v - u).abs() < 1e-12) {
            return Err(Error::SingularDesign);
        }
        seen.push(u);
    }

    let mut rows = vec![row(1.0, 0)];
    let mut rhs = vec![Complex64::new(1.0, 0.0)];
    for n in &placement.0 {
        let u = axis_cosine(deg_to_rad(n.angle_deg));
        for k in 0..n.multiplicity {
            rows.push(row(u, k));
            rhs.push(Complex64::new(0.0, 0.0));
        }
    }
    let a = DMatrix::from_fn(m, m, |r, c| rows[r][c]);
    let b = DVector::from_vec(rhs);
    let h = a.clone().lu().solve(&b).ok_or(Error::SingularDesign)?;
    let residual = (&a * &h - &b).norm();
    if !h.iter().all(|c| c.re.is_finite() && c.im.is_finite()) || residual > 1e-9 {
        return Err(Error::SingularDesign);
    }

    // Gauge: rotate so the response referenced to the array centre is real at
    // endfire, then pick the sign that puts psi_1 in [0, pi).
    let mut rot = Complex64::from_polar(1.0, -(order as f64) * x / 2.0);
    let a1 = (h[0] * rot).arg();
    if !(0.0..PI).contains(&a1) {
        rot = -rot;
    }

    let mut taps = Vec::with_capacity(m);
    for (k, (hk, ch)) in h.iter().zip(channels).enumerate() {
        let w = hk * rot;
        let magnitude = w.norm();
        if !(magnitude > 0.0) {
            return Err(Error::SingularDesign);
        }
        taps.push(WeightTap {
            index: k + 1,
            magnitude,
            phase_rad: w.arg(),
            gain: ch.gain,
            mic_phase_rad: ch.phase,
        });
    }

    Ok(BeamWeights {
        pattern: None,
        order,
        f0_hz: f0,
        spacing_m: geom.spacing,
        sound_speed: geom.sound_speed,
        nulls: placement.clone(),
        channels: taps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_model::DEFAULT_SOUND_SPEED;

    fn geom(m: usize) -> ArrayGeometry {
        ArrayGeometry::with_spacing_in_wavelengths(m, 0.04, 997.0, DEFAULT_SOUND_SPEED).unwrap()
    }

    fn design(p: Pattern, order: usize) -> BeamWeights {
        let spec = PatternSpec::new(p, order).unwrap();
        design_weights(&spec, &geom(order + 1), 997.0, &MicChannel::ideal_set(order + 1)).unwrap()
    }

    #[test]
    fn table_null_sets() {
        let s = |p, o| null_angles(&PatternSpec::new(p, o).unwrap()).unwrap();
        assert_eq!(s(Pattern::Cardioid, 1), nulls(&[(180.0, 1)]));
        assert_eq!(s(Pattern::Hypercardioid, 2), nulls(&[(72.0, 1), (144.0, 1)]));
        assert_eq!(s(Pattern::Dipole, 3), nulls(&[(90.0, 3)]));
        for p in Pattern::ALL {
            for o in 1..=3 {
                assert_eq!(s(p, o).total_multiplicity(), o);
            }
        }
        assert!(PatternSpec::new(Pattern::Supercardioid, 4).is_err());
    }

    #[test]
    fn dipole_weights_match_closed_form() {
        let w = design(Pattern::Dipole, 1);
        let d = 1.0 / (2.0 * (PI * 0.04).sin());
        assert!((d - 3.98937).abs() < 1e-5);
        for t in &w.channels {
            assert!((t.magnitude - d).abs() < 1e-12, "{}", t.magnitude);
        }
        assert!((w.channels[0].phase_rad - PI / 2.0).abs() < 1e-12);
        assert!((w.channels[1].phase_rad + PI / 2.0).abs() < 1e-12);
        assert_eq!((w.channels[0].magnitude * 100.0).floor() / 100.0, 3.98);
    }

    #[test]
    fn unit_response_at_endfire_and_zero_at_nulls() {
        for p in Pattern::ALL {
            for o in 1..=3 {
                let w = design(p, o);
                assert!((w.response(0.0).norm() - 1.0).abs() < 1e-9, "{p} {o}");
                for a in w.nulls.angles() {
                    let r = w.response(deg_to_rad(a)).norm();
                    assert!(r < 1e-9, "{p} {o} null {a}: {r}");
                }
            }
        }
    }

    #[test]
    fn higher_multiplicity_flattens_the_null() {
        // A triple null leaves |R| ~ (delta theta)^3 next to it.
        let w = design(Pattern::Dipole, 3);
        let r1 = w.response(deg_to_rad(90.1)).norm();
        let r2 = w.response(deg_to_rad(90.2)).norm();
        assert!((r2 / r1 - 8.0).abs() < 0.05, "{}", r2 / r1);
    }

    #[test]
    fn compensation_identity_for_matched_channels() {
        let w = design(Pattern::Supercardioid, 2);
        for t in &w.channels {
            assert_eq!(t.compensated(), t.uncompensated());
        }
    }

    #[test]
    fn compensation_matches_eq_form() {
        let w = design(Pattern::Cardioid, 2);
        let ch = [
            MicChannel::new(1, 0.9, 0.3).unwrap(),
            MicChannel::new(2, 1.2, 5.0).unwrap(),
            MicChannel::new(3, 1.05, 2.0).unwrap(),
        ];
        let w2 = w.with_channels(&ch).unwrap();
        for (t, c) in w2.channels.iter().zip(&ch) {
            let expect = Complex64::from_polar(1.0 / c.gain, -c.phase) * t.uncompensated();
            assert!((t.compensated() - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_degenerate_and_mismatched_designs() {
        let g = geom(3);
        let dup = nulls(&[(90.0, 1), (90.0, 1)]);
        assert!(matches!(
            design_for_nulls(&dup, &g, 997.0, &MicChannel::ideal_set(3)),
            Err(Error::SingularDesign)
        ));
        let spec = PatternSpec::new(Pattern::Dipole, 1).unwrap();
        assert!(design_weights(&spec, &g, 997.0, &MicChannel::ideal_set(3)).is_err());
        assert!(design_weights(&spec, &geom(2), 997.0, &MicChannel::ideal_set(3)).is_err());
    }

    #[test]
    fn json_round_trip() {
        let w = design(Pattern::Hypercardioid, 3);
        let text = w.to_json().unwrap();
        assert!(text.contains("\"compensated\""));
        let back = BeamWeights::from_json(&text).unwrap();
        assert_eq!(back, w);
        assert!(BeamWeights::from_json("{\"order\": 1}").is_err());
    }
}
