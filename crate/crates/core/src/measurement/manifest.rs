//! Sweep manifest: which recording belongs to which source angle.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::recording::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_deg: Option<f64>,
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepManifest {
    pub f0_hz: f64,
    pub sample_rate_hz: u32,
    pub num_channels: usize,
    /// Weight-set JSON used to beamform the sweep.
    pub weights: PathBuf,
    pub entries: Vec<ManifestEntry>,
    /// Resolved settings of whatever produced the sweep, kept alongside the recordings.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub config: BTreeMap<String, String>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl SweepManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: SweepManifest = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::from_json(&text)?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::Manifest(s));
        if !(self.f0_hz > 0.0 && self.f0_hz < self.sample_rate_hz as f64 / 2.0) {
            return bad(format!("f0_hz {} must lie in (0, Fs/2)", self.f0_hz));
        }
        if self.num_channels < 2 {
            return bad(format!("num_channels {} < 2", self.num_channels));
        }
        let silences = self.entries.iter().filter(|e| e.label == Label::Silence).count();
        if silences != 1 {
            return bad(format!("expected exactly one silence entry, found {silences}"));
        }
        let mut prev: Option<f64> = None;
        for e in self.signal_entries() {
            let Some(a) = e.angle_deg else {
                return bad(format!("signal entry {} has no angle_deg", e.path.display()));
            };
            if !(0.0..360.0).contains(&a) {
                return bad(format!("angle {a} outside [0, 360)"));
            }
            if prev.is_some_and(|p| a <= p) {
                return bad(format!("angles must be strictly increasing ({} then {a})", prev.unwrap()));
            }
            prev = Some(a);
        }
        if prev.is_none() {
            return bad("no signal entries".into());
        }
        Ok(())
    }

    pub fn signal_entries(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.label == Label::Signal)
    }

    pub fn silence_entry(&self) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.label == Label::Silence)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(entries: &str) -> String {
        format!(
            r#"{{"f0_hz": 997, "sample_rate_hz": 44100, "num_channels": 2, "weights": "w.json", "entries": [{entries}]}}"#
        )
    }

    #[test]
    fn parses_a_minimal_sweep() {
        let m = SweepManifest::from_json(&doc(
            r#"{"angle_deg": 0, "path": "a.wav", "label": "signal"},
               {"angle_deg": 90, "path": "b.wav", "label": "signal"},
               {"path": "s.wav", "label": "silence"}"#,
        ))
        .unwrap();
        assert_eq!(m.signal_entries().count(), 2);
        assert_eq!(m.silence_entry().unwrap().path, PathBuf::from("s.wav"));
        let back = SweepManifest::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_invalid_sweeps() {
        let sil = r#"{"path": "s.wav", "label": "silence"}"#;
        for entries in [
            r#"{"angle_deg": 0, "path": "a.wav", "label": "signal"}"#.to_string(),
            format!(r#"{{"angle_deg": 10, "path": "a.wav", "label": "signal"}}, {{"angle_deg": 10, "path": "b.wav", "label": "signal"}}, {sil}"#),
            format!(r#"{{"angle_deg": 360, "path": "a.wav", "label": "signal"}}, {sil}"#),
            format!(r#"{{"path": "a.wav", "label": "signal"}}, {sil}"#),
            format!(r#"{{"angle_deg": 0, "path": "a.wav", "label": "signal"}}, {sil}, {sil}"#),
            format!(r#"{{"angle_deg": 0, "path": "a.wav", "label": "noise"}}, {sil}"#),
        ] {
            assert!(SweepManifest::from_json(&doc(&entries)).is_err(), "{entries}");
        }
        assert!(SweepManifest::from_json("{}").is_err());
    }
}
