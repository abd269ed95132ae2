//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Lists are comma separated, with `none` for an empty list.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::array_model::{ArrayGeometry, SamplingSpec, DEFAULT_SOUND_SPEED};
use crate::error::{Error, Result};
use crate::measurement::MeasurementConfig;
use crate::metrics::MonteCarloConfig;
use crate::weights::{Cardioid3Layout, Pattern, PatternSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Spacing {
    Wavelengths(f64),
    Meters(f64),
}

impl Spacing {
    pub fn meters(&self, f0: f64, sound_speed: f64) -> f64 {
        match *self {
            Spacing::Wavelengths(w) => w * sound_speed / f0,
            Spacing::Meters(m) => m,
        }
    }
}

impl fmt::Display for Spacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Spacing::Wavelengths(w) => write!(f, "{w}lambda"),
            Spacing::Meters(m) => write!(f, "{m}m"),
        }
    }
}

impl FromStr for Spacing {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let (num, ctor): (&str, fn(f64) -> Spacing) = if let Some(n) = s.strip_suffix("lambda") {
            (n, Spacing::Wavelengths)
        } else if let Some(n) = s.strip_suffix('m') {
            (n, Spacing::Meters)
        } else {
            return Err(format!("{s:?} needs a unit suffix, e.g. 0.04lambda or 0.01376m"));
        };
        let v: f64 = num.trim().parse().map_err(|_| format!("{s:?} is not a number"))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(format!("{s:?} must be positive"));
        }
        Ok(ctor(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Angle sweep written by the fixture generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureConfig {
    pub pattern: Pattern,
    pub order: usize,
    pub bits: u32,
    pub step_deg: f64,
    pub fine_step_deg: f64,
    /// Half-width of the finer sweep around each designed null; 0 disables it.
    pub fine_span_deg: f64,
    /// Samples per recording; 0 sizes them to give the analysis a whole second.
    pub samples: usize,
    /// RMS of additive noise in the silence recording, dB re full scale.
    pub silence_noise_db: Option<f64>,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            pattern: Pattern::Cardioid,
            order: 1,
            bits: 16,
            step_deg: 10.0,
            fine_step_deg: 1.0,
            fine_span_deg: 0.0,
            samples: 0,
            silence_noise_db: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub patterns: Vec<Pattern>,
    pub orders: Vec<usize>,
    pub bits: Vec<u32>,
    pub unquantized: bool,
    /// Bit depths of the null-width table.
    pub nw_bits: Vec<u32>,
    pub f0: f64,
    pub fs: f64,
    pub spacing: Spacing,
    pub sound_speed: f64,
    pub amplitude: f64,
    pub full_scale: f64,
    pub runs: usize,
    pub seed: u64,
    pub samples: usize,
    pub grid: f64,
    pub refine_tol: f64,
    pub depths: Vec<f64>,
    pub cardioid3: Cardioid3Layout,
    pub format: OutputFormat,
    pub fixture: FixtureConfig,
    pub measure: MeasurementConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            patterns: Pattern::ALL.to_vec(),
            orders: vec![1, 2, 3],
            bits: vec![12, 16, 20, 24],
            unquantized: true,
            nw_bits: vec![16],
            f0: 997.0,
            fs: 44100.0,
            spacing: Spacing::Wavelengths(0.04),
            sound_speed: DEFAULT_SOUND_SPEED,
            amplitude: 1.0,
            full_scale: 1.0,
            runs: 5000,
            seed: 1,
            samples: 8192,
            grid: 0.1,
            refine_tol: 0.001,
            depths: vec![-10.0, -20.0, -30.0, -40.0, -50.0, -60.0],
            cardioid3: Cardioid3Layout::default(),
            format: OutputFormat::Csv,
            fixture: FixtureConfig::default(),
            measure: MeasurementConfig::default(),
        }
    }
}

/// Every accepted key, in the order [`ExperimentConfig::to_pairs`] emits them.
pub const KEYS: &[&str] = &[
    "patterns",
    "orders",
    "bits",
    "unquantized",
    "nw_bits",
    "f0",
    "fs",
    "spacing",
    "sound_speed",
    "amplitude",
    "full_scale",
    "runs",
    "seed",
    "samples",
    "grid",
    "refine_tol",
    "depths",
    "cardioid3",
    "format",
    "fixture_pattern",
    "fixture_order",
    "fixture_bits",
    "fixture_step",
    "fixture_fine_step",
    "fixture_fine_span",
    "fixture_samples",
    "fixture_silence_noise_db",
    "measure_half_bandwidth",
    "measure_transition",
    "measure_stopband",
    "measure_hilbert_taps",
    "measure_hilbert_beta",
    "measure_dft_len",
];

fn err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), reason: reason.into() }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| err(key, format!("cannot parse {v:?}")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    let v = v.trim();
    if v.is_empty() || v.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    v.split(',').map(|p| num(key, p)).collect()
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    if xs.is_empty() {
        return "none".into();
    }
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn optional<T: FromStr>(key: &str, v: &str, none: &str) -> Result<Option<T>> {
    if v.trim().eq_ignore_ascii_case(none) {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

/// Parses `key = value` lines into ordered pairs; duplicate keys are errors.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(err(line, format!("line {}: expected key = value", lineno + 1)));
        };
        let k = k.trim();
        if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(err(k, format!("line {}: invalid key", lineno + 1)));
        }
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(err(k, format!("line {}: duplicate key", lineno + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_pairs(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Sets one key; the error names the key on any failure.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "patterns" => self.patterns = list(key, v)?,
            "orders" => self.orders = list(key, v)?,
            "bits" => self.bits = list(key, v)?,
            "unquantized" => self.unquantized = num(key, v)?,
            "nw_bits" => self.nw_bits = list(key, v)?,
            "f0" => self.f0 = num(key, v)?,
            "fs" => self.fs = num(key, v)?,
            "spacing" => self.spacing = v.parse().map_err(|e: String| err(key, e))?,
            "sound_speed" => self.sound_speed = num(key, v)?,
            "amplitude" => self.amplitude = num(key, v)?,
            "full_scale" => self.full_scale = num(key, v)?,
            "runs" => self.runs = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "samples" => self.samples = num(key, v)?,
            "grid" => self.grid = num(key, v)?,
            "refine_tol" => self.refine_tol = num(key, v)?,
            "depths" => self.depths = list(key, v)?,
            "cardioid3" => self.cardioid3 = num(key, v)?,
            "format" => {
                self.format = match v.to_ascii_lowercase().as_str() {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    _ => return Err(err(key, format!("{v:?} is not csv or json"))),
                }
            }
            "fixture_pattern" => self.fixture.pattern = num(key, v)?,
            "fixture_order" => self.fixture.order = num(key, v)?,
            "fixture_bits" => self.fixture.bits = num(key, v)?,
            "fixture_step" => self.fixture.step_deg = num(key, v)?,
            "fixture_fine_step" => self.fixture.fine_step_deg = num(key, v)?,
            "fixture_fine_span" => self.fixture.fine_span_deg = num(key, v)?,
            "fixture_samples" => self.fixture.samples = num(key, v)?,
            "fixture_silence_noise_db" => self.fixture.silence_noise_db = optional(key, v, "none")?,
            "measure_half_bandwidth" => self.measure.half_bandwidth_hz = num(key, v)?,
            "measure_transition" => self.measure.transition_hz = num(key, v)?,
            "measure_stopband" => self.measure.stopband_db = num(key, v)?,
            "measure_hilbert_taps" => self.measure.hilbert_taps = num(key, v)?,
            "measure_hilbert_beta" => self.measure.hilbert_beta = num(key, v)?,
            "measure_dft_len" => self.measure.dft_len = optional(key, v, "auto")?,
            _ => return Err(err(key, "unknown key")),
        }
        Ok(())
    }

    /// Every key with its resolved value; feeding these back through
    /// [`ExperimentConfig::set`] reproduces the configuration.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let f = &self.fixture;
        let m = &self.measure;
        let values = vec![
            join(&self.patterns),
            join(&self.orders),
            join(&self.bits),
            self.unquantized.to_string(),
            join(&self.nw_bits),
            self.f0.to_string(),
            self.fs.to_string(),
            self.spacing.to_string(),
            self.sound_speed.to_string(),
            self.amplitude.to_string(),
            self.full_scale.to_string(),
            self.runs.to_string(),
            self.seed.to_string(),
            self.samples.to_string(),
            self.grid.to_string(),
            self.refine_tol.to_string(),
            join(&self.depths),
            self.cardioid3.to_string(),
            match self.format {
                OutputFormat::Csv => "csv".into(),
                OutputFormat::Json => "json".into(),
            },
            f.pattern.to_string(),
            f.order.to_string(),
            f.bits.to_string(),
            f.step_deg.to_string(),
            f.fine_step_deg.to_string(),
            f.fine_span_deg.to_string(),
            f.samples.to_string(),
            f.silence_noise_db.map_or("none".into(), |v| v.to_string()),
            m.half_bandwidth_hz.to_string(),
            m.transition_hz.to_string(),
            m.stopband_db.to_string(),
            m.hilbert_taps.to_string(),
            m.hilbert_beta.to_string(),
            m.dft_len.map_or("auto".into(), |v| v.to_string()),
        ];
        KEYS.iter().map(|k| k.to_string()).zip(values).collect()
    }

    pub fn to_kv(&self) -> String {
        self.to_pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for &o in &self.orders {
            for &p in &self.patterns {
                PatternSpec::new(p, o).map_err(|_| err("orders", format!("unsupported pair ({p}, order {o})")))?;
            }
        }
        for (key, bits) in [("bits", &self.bits), ("nw_bits", &self.nw_bits)] {
            if let Some(b) = bits.iter().find(|b| !(1..=52).contains(*b)) {
                return Err(err(key, format!("{b} bits is outside 1..=52")));
            }
        }
        let positive = [
            ("f0", self.f0),
            ("fs", self.fs),
            ("sound_speed", self.sound_speed),
            ("amplitude", self.amplitude),
            ("full_scale", self.full_scale),
            ("refine_tol", self.refine_tol),
        ];
        if let Some((k, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(err(k, format!("must be positive, got {v}")));
        }
        if !(self.f0 < self.fs / 2.0) {
            return Err(err("f0", format!("{} Hz is not below Nyquist", self.f0)));
        }
        if self.amplitude > self.full_scale {
            return Err(err("amplitude", "exceeds full_scale"));
        }
        if self.runs == 0 {
            return Err(err("runs", "must be >= 1"));
        }
        if self.samples == 0 {
            return Err(err("samples", "must be >= 1"));
        }
        if !(self.grid > 0.0 && self.grid <= 90.0) {
            return Err(err("grid", "must be in (0, 90]"));
        }
        if let Some(d) = self.depths.iter().find(|d| !(**d < 0.0)) {
            return Err(err("depths", format!("{d} is not below 0 dB")));
        }
        let f = &self.fixture;
        PatternSpec::new(f.pattern, f.order).map_err(|e| err("fixture_order", e.to_string()))?;
        if !matches!(f.bits, 1..=24) {
            return Err(err("fixture_bits", "fixtures are written as 16- or 24-bit PCM; need 1..=24 bits"));
        }
        if !(f.step_deg > 0.0) {
            return Err(err("fixture_step", "must be > 0"));
        }
        if !(f.fine_step_deg > 0.0) {
            return Err(err("fixture_fine_step", "must be > 0"));
        }
        if !(f.fine_span_deg >= 0.0) {
            return Err(err("fixture_fine_span", "must be >= 0"));
        }
        Ok(())
    }

    pub fn geometry(&self, num_mics: usize) -> Result<ArrayGeometry> {
        ArrayGeometry::new(num_mics, self.spacing.meters(self.f0, self.sound_speed), self.sound_speed)
    }

    pub fn sampling(&self) -> Result<SamplingSpec> {
        SamplingSpec::new(self.fs, self.samples)
    }

    pub fn monte_carlo(&self, depths: Vec<f64>) -> Result<MonteCarloConfig> {
        Ok(MonteCarloConfig {
            runs: self.runs,
            seed: self.seed,
            sampling: self.sampling()?,
            grid_resolution_deg: self.grid,
            refine_tol_deg: self.refine_tol,
            depths_db: depths,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_setup() {
        let c = ExperimentConfig::default();
        assert_eq!((c.f0, c.fs, c.runs, c.samples), (997.0, 44100.0, 5000, 8192));
        assert_eq!(c.spacing, Spacing::Wavelengths(0.04));
        assert!((c.spacing.meters(c.f0, c.sound_speed) - 0.013761).abs() < 1e-6);
        assert_eq!(c.depths, vec![-10.0, -20.0, -30.0, -40.0, -50.0, -60.0]);
        c.validate().unwrap();
    }

    #[test]
    fn parses_and_round_trips() {
        let text = "# comment\n\npatterns = dipole, cardioid\nbits = none\nspacing = 0.01376m\nmeasure_dft_len = 4096\n";
        let c = ExperimentConfig::from_kv(text).unwrap();
        assert_eq!(c.patterns, vec![Pattern::Dipole, Pattern::Cardioid]);
        assert!(c.bits.is_empty());
        assert_eq!(c.spacing, Spacing::Meters(0.01376));
        assert_eq!(c.measure.dft_len, Some(4096));
        let back = ExperimentConfig::from_kv(&c.to_kv()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.to_pairs().len(), KEYS.len());
    }

    #[test]
    fn errors_name_the_key() {
        for (text, key) in [
            ("runs = many", "runs"),
            ("colour = red", "colour"),
            ("spacing = 0.04", "spacing"),
            ("seed = 1\nseed = 2", "seed"),
            ("patterns = dipole,octopole", "patterns"),
            ("format = xml", "format"),
        ] {
            match ExperimentConfig::from_kv(text) {
                Err(Error::Config { key: k, .. }) => assert_eq!(k, key, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(parse_pairs("no equals sign").is_err());
    }

    #[test]
    fn validation_names_unsupported_pairs() {
        let mut c = ExperimentConfig::default();
        c.orders = vec![4];
        c.patterns = vec![Pattern::Supercardioid];
        let e = c.validate().unwrap_err();
        assert!(e.to_string().contains("supercardioid") && e.to_string().contains('4'), "{e}");
        let mut c = ExperimentConfig::default();
        c.depths = vec![-10.0, 0.0];
        assert!(matches!(c.validate(), Err(Error::Config { key, .. }) if key == "depths"));
    }
}
