//! Table, pattern and fixture runs driven by an [`ExperimentConfig`].

use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::array_model::{deg_to_rad, synth_channel, MicChannel, SamplingSpec, SourceSpec};
use crate::config::{ExperimentConfig, OutputFormat};
use crate::error::{Error, Result};
use crate::measurement::fir::kaiser_len;
use crate::measurement::{save_recording, Label, ManifestEntry, SweepManifest};
use crate::metrics::{
    compute_beampattern, find_nulls, monte_carlo_metrics, AngleGrid, Beampattern, Scenario, FLOOR_DB,
};
use crate::quantization::{quantize_sequence, QuantizerSpec};
use crate::weights::{design_weights_with, null_angles_with, PatternSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Column {
    Bits(u32),
    Unquantized,
}

impl Column {
    pub fn bits(&self) -> Option<u32> {
        match self {
            Column::Bits(b) => Some(*b),
            Column::Unquantized => None,
        }
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Column::Bits(b) => write!(f, "b{b}"),
            Column::Unquantized => f.write_str("unquantized"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Cell {
    Value(f64),
    NotApplicable,
    Failed,
}

impl Cell {
    pub fn value(&self) -> Option<f64> {
        match self {
            Cell::Value(v) => Some(*v),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Value(v) if *v <= FLOOR_DB => format!("{v:.2}*"),
            Cell::Value(v) => format!("{v:.2}"),
            Cell::NotApplicable => "N.A.".into(),
            Cell::Failed => "ERR".into(),
        }
    }
}

/// Scenario for one (pattern, order) design at the configured geometry, with
/// ideal mics and zero source phase.
pub fn build_scenario(cfg: &ExperimentConfig, spec: &PatternSpec, bits: Option<u32>) -> Result<Scenario> {
    let m = spec.num_mics();
    let geom = cfg.geometry(m)?;
    let mics = MicChannel::ideal_set(m);
    let weights = design_weights_with(spec, cfg.cardioid3, &geom, cfg.f0, &mics)?;
    let quantizer = bits.map(|b| QuantizerSpec::new(b, cfg.full_scale)).transpose()?;
    Scenario::new(SourceSpec::new(cfg.amplitude, cfg.f0, 0.0)?, geom, mics, quantizer, weights, cfg.sampling()?)
}

fn columns(cfg: &ExperimentConfig, bits: &[u32]) -> Vec<Column> {
    let mut cols: Vec<Column> = bits.iter().map(|&b| Column::Bits(b)).collect();
    if cfg.unquantized {
        cols.push(Column::Unquantized);
    }
    cols
}

fn specs(cfg: &ExperimentConfig) -> Result<Vec<PatternSpec>> {
    let mut out = Vec::new();
    for &o in &cfg.orders {
        for &p in &cfg.patterns {
            out.push(PatternSpec::new(p, o)?);
        }
    }
    Ok(out)
}

/// Null angles of the unquantized design, in the order every table uses.
pub fn design_nulls(cfg: &ExperimentConfig, spec: &PatternSpec) -> Result<Vec<f64>> {
    let s = build_scenario(cfg, spec, None)?;
    let bp = compute_beampattern(&s, &AngleGrid::new(cfg.grid)?)?;
    Ok(find_nulls(&bp, Some(&s), cfg.refine_tol).into_iter().map(|n| n.angle_deg).collect())
}

fn header(cfg: &ExperimentConfig, command: &str) -> String {
    let mut out = format!("# command = {command}\n");
    for (k, v) in cfg.to_pairs() {
        out.push_str(&format!("# {k} = {v}\n"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NdRow {
    pub spec: PatternSpec,
    pub null_deg: f64,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NdTable {
    pub columns: Vec<Column>,
    pub rows: Vec<NdRow>,
    pub failures: Vec<String>,
}

impl NdTable {
    pub fn cell(&self, spec: PatternSpec, null_deg: f64, col: Column) -> Option<Cell> {
        let c = self.columns.iter().position(|&x| x == col)?;
        self.rows
            .iter()
            .find(|r| r.spec == spec && (r.null_deg - null_deg).abs() < 0.5)
            .map(|r| r.cells[c])
    }

    pub fn to_csv(&self, cfg: &ExperimentConfig) -> String {
        let mut out = header(cfg, "table-nd");
        out.push_str("pattern,order,null_deg");
        for c in &self.columns {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{},{:.3}", r.spec.pattern, r.spec.order, r.null_deg));
            for c in &r.cells {
                out.push(',');
                out.push_str(&c.render());
            }
            out.push('\n');
        }
        out
    }
}

/// Null depth per (pattern, order, null) and bit depth. Cells that fail are
/// marked and listed in `failures`; the rest are still computed.
pub fn run_table_nd(cfg: &ExperimentConfig) -> Result<NdTable> {
    cfg.validate()?;
    let cols = columns(cfg, &cfg.bits);
    let mc = cfg.monte_carlo(Vec::new())?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for spec in specs(cfg)? {
        let nulls = match design_nulls(cfg, &spec) {
            Ok(n) => n,
            Err(e) => {
                failures.push(format!("{spec}: {e}"));
                continue;
            }
        };
        let mut cells = vec![vec![Cell::Failed; cols.len()]; nulls.len()];
        for (c, col) in cols.iter().enumerate() {
            let res = build_scenario(cfg, &spec, col.bits()).and_then(|s| monte_carlo_metrics(&mc, &s));
            match res {
                Ok(m) if m.nulls.len() == nulls.len() => {
                    for (j, n) in m.nulls.iter().enumerate() {
                        cells[j][c] = Cell::Value(n.depth_db);
                    }
                }
                Ok(m) => failures.push(format!("{spec} {col}: found {} nulls, expected {}", m.nulls.len(), nulls.len())),
                Err(e) => failures.push(format!("{spec} {col}: {e}")),
            }
        }
        rows.extend(nulls.into_iter().zip(cells).map(|(null_deg, cells)| NdRow { spec, null_deg, cells }));
    }
    Ok(NdTable { columns: cols, rows, failures })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NwColumn {
    pub spec: PatternSpec,
    pub null_deg: f64,
    pub column: Column,
}

impl fmt::Display for NwColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o{}_{}_n{:.1}_{}", self.spec.order, self.spec.pattern, self.null_deg, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NwTable {
    pub depths: Vec<f64>,
    pub columns: Vec<NwColumn>,
    /// `cells[depth][column]`.
    pub cells: Vec<Vec<Cell>>,
    pub failures: Vec<String>,
}

impl NwTable {
    pub fn cell(&self, spec: PatternSpec, null_deg: f64, column: Column, depth: f64) -> Option<Cell> {
        let d = self.depths.iter().position(|&x| x == depth)?;
        let c = self
            .columns
            .iter()
            .position(|x| x.spec == spec && x.column == column && (x.null_deg - null_deg).abs() < 0.5)?;
        Some(self.cells[d][c])
    }

    pub fn to_csv(&self, cfg: &ExperimentConfig) -> String {
        let mut out = header(cfg, "table-nw");
        out.push_str("depth_db");
        for c in &self.columns {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
        for (d, row) in self.depths.iter().zip(&self.cells) {
            out.push_str(&format!("{d}"));
            for c in row {
                out.push(',');
                out.push_str(&match c {
                    Cell::Value(v) => format!("{v:.2}"),
                    other => other.render(),
                });
            }
            out.push('\n');
        }
        out
    }
}

/// Null width per depth, for every (order, pattern, null) and bit depth.
pub fn run_table_nw(cfg: &ExperimentConfig, depths: &[f64]) -> Result<NwTable> {
    cfg.validate()?;
    if let Some(&d) = depths.iter().find(|d| !(**d < 0.0)) {
        return Err(Error::InvalidDepth(d));
    }
    let cols = columns(cfg, &cfg.nw_bits);
    let mc = cfg.monte_carlo(depths.to_vec())?;
    let mut columns = Vec::new();
    let mut by_column: Vec<Vec<Cell>> = Vec::new();
    let mut failures = Vec::new();
    for spec in specs(cfg)? {
        let nulls = match design_nulls(cfg, &spec) {
            Ok(n) => n,
            Err(e) => {
                failures.push(format!("{spec}: {e}"));
                continue;
            }
        };
        for col in &cols {
            let res = build_scenario(cfg, &spec, col.bits()).and_then(|s| monte_carlo_metrics(&mc, &s));
            let per_null: Vec<Vec<Cell>> = match res {
                Ok(m) if m.nulls.len() == nulls.len() => m
                    .nulls
                    .iter()
                    .map(|n| {
                        n.widths.iter().map(|w| w.width_deg.map_or(Cell::NotApplicable, Cell::Value)).collect()
                    })
                    .collect(),
                Ok(m) => {
                    failures.push(format!("{spec} {col}: found {} nulls, expected {}", m.nulls.len(), nulls.len()));
                    vec![vec![Cell::Failed; depths.len()]; nulls.len()]
                }
                Err(e) => {
                    failures.push(format!("{spec} {col}: {e}"));
                    vec![vec![Cell::Failed; depths.len()]; nulls.len()]
                }
            };
            for (&null_deg, cells) in nulls.iter().zip(per_null) {
                columns.push(NwColumn { spec, null_deg, column: *col });
                by_column.push(cells);
            }
        }
    }
    let cells = (0..depths.len()).map(|d| by_column.iter().map(|c| c[d]).collect()).collect();
    Ok(NwTable { depths: depths.to_vec(), columns, cells, failures })
}

/// Source and mic phases for Monte Carlo run `run` of `seed`: `phi_s` first,
/// then `phi_1..phi_M`.
pub fn draw_phases(seed: u64, run: u64, num_mics: usize) -> (f64, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    let ps = rng.gen_range(0.0..TAU);
    (ps, (0..num_mics).map(|_| rng.gen_range(0.0..TAU)).collect())
}

/// Source phase and per-mic phases of one run.
pub type RunPhases = (f64, Vec<f64>);

/// The beampattern of one configuration on the grid. A quantized pattern
/// uses the phases of the first Monte Carlo run of the configured seed.
pub fn pattern_of(cfg: &ExperimentConfig, spec: &PatternSpec, bits: Option<u32>) -> Result<(Beampattern, Option<RunPhases>)> {
    cfg.validate()?;
    let mut s = build_scenario(cfg, spec, bits)?;
    let phases = if bits.is_some() {
        let (ps, phis) = draw_phases(cfg.seed, 0, spec.num_mics());
        s = s.with_phases(ps, &phis)?;
        Some((ps, phis))
    } else {
        None
    };
    Ok((compute_beampattern(&s, &AngleGrid::new(cfg.grid)?)?, phases))
}

/// Plot-ready `(theta_deg, power_db)` data with the resolved config in front.
pub fn emit_pattern(cfg: &ExperimentConfig, spec: &PatternSpec, bits: Option<u32>) -> Result<String> {
    let (bp, phases) = pattern_of(cfg, spec, bits)?;
    let bits_text = bits.map_or("unquantized".to_string(), |b| b.to_string());
    match cfg.format {
        OutputFormat::Csv => {
            let mut out = header(cfg, "pattern");
            out.push_str(&format!("# pattern_type = {}\n# order = {}\n# pattern_bits = {bits_text}\n", spec.pattern, spec.order));
            if let Some((ps, phis)) = &phases {
                out.push_str(&format!("# source_phase = {ps}\n# mic_phases = {}\n", join(phis)));
            }
            out.push_str("theta_deg,power_db\n");
            for p in &bp.points {
                out.push_str(&format!("{},{}\n", p.theta_deg, p.power_db));
            }
            Ok(out)
        }
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                config: std::collections::BTreeMap<String, String>,
                pattern: String,
                order: usize,
                bits: String,
                source_phase: Option<f64>,
                mic_phases: Option<&'a [f64]>,
                points: &'a [crate::metrics::BeamPoint],
            }
            Ok(serde_json::to_string_pretty(&Doc {
                config: cfg.to_pairs().into_iter().collect(),
                pattern: spec.pattern.to_string(),
                order: spec.order,
                bits: bits_text,
                source_phase: phases.as_ref().map(|p| p.0),
                mic_phases: phases.as_ref().map(|p| p.1.as_slice()),
                points: &bp.points,
            })?)
        }
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Angles of a fixture sweep: the coarse grid plus finer steps around each
/// designed null and its mirror image.
pub fn fixture_angles(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    let f = &cfg.fixture;
    let spec = PatternSpec::new(f.pattern, f.order)?;
    let mut angles: Vec<f64> = (0..).map(|k| k as f64 * f.step_deg).take_while(|&a| a < 360.0).collect();
    if f.fine_span_deg > 0.0 {
        let n = (f.fine_span_deg / f.fine_step_deg + 1e-9).floor() as i64;
        for null in null_angles_with(&spec, cfg.cardioid3)?.angles() {
            for centre in [null, 360.0 - null] {
                for j in -n..=n {
                    angles.push((centre + j as f64 * f.fine_step_deg).rem_euclid(360.0));
                }
            }
        }
    }
    angles.iter_mut().for_each(|a| *a = (*a * 1e6).round() / 1e6);
    angles.sort_by(f64::total_cmp);
    angles.dedup();
    Ok(angles)
}

/// Samples per fixture recording: the configured count, or enough for one
/// second of analysis after both FIR stages.
pub fn fixture_samples(cfg: &ExperimentConfig) -> usize {
    if cfg.fixture.samples > 0 {
        return cfg.fixture.samples;
    }
    let bp = kaiser_len(cfg.measure.stopband_db, cfg.measure.transition_hz, cfg.fs);
    cfg.fs.round() as usize + bp + cfg.measure.hilbert_taps - 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureReport {
    pub manifest: PathBuf,
    pub weights: PathBuf,
    pub signal_files: Vec<PathBuf>,
    pub silence_file: PathBuf,
    pub mic_phases: Vec<f64>,
}

/// Writes one quantized multichannel recording per sweep angle, a silence
/// recording, the compensated weight set and the sweep manifest into `dir`.
///
/// Mic phases are drawn once for the sweep and the source phase once per
/// angle; the weights compensate the mic phases.
pub fn synth_fixture(cfg: &ExperimentConfig, dir: &Path) -> Result<FixtureReport> {
    cfg.validate()?;
    let f = &cfg.fixture;
    let spec = PatternSpec::new(f.pattern, f.order)?;
    let m = spec.num_mics();
    let fs = cfg.fs.round();
    if fs != cfg.fs || fs > u32::MAX as f64 {
        return Err(Error::Config { key: "fs".into(), reason: "fixtures need an integer sample rate".into() });
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX);
    let mic_phases: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..TAU)).collect();
    let mics = mic_phases
        .iter()
        .enumerate()
        .map(|(i, &p)| MicChannel::new(i + 1, 1.0, p))
        .collect::<Result<Vec<_>>>()?;
    let geom = cfg.geometry(m)?;
    let weights = design_weights_with(&spec, cfg.cardioid3, &geom, cfg.f0, &mics)?;
    let weights_path = dir.join("weights.json");
    std::fs::write(&weights_path, weights.to_json()?).map_err(|e| Error::io(&weights_path, e))?;

    let q = QuantizerSpec::new(f.bits, cfg.full_scale)?;
    let container = if f.bits <= 16 { 16 } else { 24 };
    let samp = SamplingSpec::new(cfg.fs, fixture_samples(cfg))?;
    let write = |name: String, channels: Vec<Vec<f64>>| -> Result<PathBuf> {
        let path = dir.join(&name);
        let scaled: Vec<Vec<f64>> =
            channels.into_iter().map(|c| c.into_iter().map(|v| v / cfg.full_scale).collect()).collect();
        save_recording(&path, &scaled, fs as u32, container, false)?;
        Ok(path)
    };

    let mut entries = Vec::new();
    let mut signal_files = Vec::new();
    for angle in fixture_angles(cfg)? {
        let src = SourceSpec::new(cfg.amplitude, cfg.f0, rng.gen_range(0.0..TAU))?;
        let channels = mics
            .iter()
            .map(|mic| synth_channel(&src, &geom, mic, deg_to_rad(angle), &samp).map(|s| quantize_sequence(&s.in_phase, &q).samples))
            .collect::<Result<Vec<_>>>()?;
        let name = format!("angle_{angle:08.3}.wav");
        signal_files.push(write(name.clone(), channels)?);
        entries.push(ManifestEntry { angle_deg: Some(angle), path: name.into(), label: Label::Signal });
    }

    let silence: Vec<Vec<f64>> = match f.silence_noise_db {
        None => vec![vec![0.0; samp.num_samples]; m],
        Some(db) => {
            let sigma = 10f64.powf(db / 20.0) * cfg.full_scale;
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config { key: "fixture_silence_noise_db".into(), reason: e.to_string() })?;
            (0..m)
                .map(|_| {
                    let x: Vec<f64> = (0..samp.num_samples).map(|_| normal.sample(&mut rng)).collect();
                    quantize_sequence(&x, &q).samples
                })
                .collect()
        }
    };
    let silence_file = write("silence.wav".into(), silence)?;
    entries.push(ManifestEntry { angle_deg: None, path: "silence.wav".into(), label: Label::Silence });

    let manifest = SweepManifest {
        f0_hz: cfg.f0,
        sample_rate_hz: fs as u32,
        num_channels: m,
        weights: "weights.json".into(),
        entries,
        config: cfg.to_pairs().into_iter().collect(),
        base_dir: dir.to_path_buf(),
    };
    let manifest_path = dir.join("manifest.json");
    std::fs::write(&manifest_path, manifest.to_json()?).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(FixtureReport { manifest: manifest_path, weights: weights_path, signal_files, silence_file, mic_phases })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::Pattern;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.runs = 8;
        c.samples = 512;
        c.grid = 1.0;
        c
    }

    #[test]
    fn nd_table_shape_and_stars() {
        let mut c = small();
        c.patterns = vec![Pattern::Dipole, Pattern::Hypercardioid];
        c.orders = vec![1, 2];
        c.bits = vec![16];
        let t = run_table_nd(&c).unwrap();
        assert!(t.failures.is_empty(), "{:?}", t.failures);
        assert_eq!(t.columns, vec![Column::Bits(16), Column::Unquantized]);
        // dipole 1: one null; hyper 1: one; dipole 2: one (double); hyper 2: two.
        assert_eq!(t.rows.len(), 5);
        let csv = t.to_csv(&c);
        assert!(csv.starts_with("# command = table-nd\n"));
        assert!(csv.contains("pattern,order,null_deg,b16,unquantized\n"));
        let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
        assert!(data.iter().all(|l| l.ends_with('*')), "{csv}");
    }

    #[test]
    fn nw_table_marks_missing_lobes() {
        let mut c = small();
        c.patterns = vec![Pattern::Supercardioid];
        c.orders = vec![1];
        c.nw_bits = vec![];
        let t = run_table_nw(&c, &[-10.0, -30.0]).unwrap();
        assert_eq!(t.cell(PatternSpec::new(Pattern::Supercardioid, 1).unwrap(), 135.0, Column::Unquantized, -10.0), Some(Cell::NotApplicable));
        assert!(t.to_csv(&c).contains("N.A."));
        assert!(run_table_nw(&c, &[0.0]).is_err());
    }

    #[test]
    fn fixture_angle_grid() {
        let mut c = ExperimentConfig::default();
        assert_eq!(fixture_angles(&c).unwrap().len(), 36);
        c.fixture.fine_span_deg = 10.0;
        let a = fixture_angles(&c).unwrap();
        assert!(a.contains(&175.0) && a.contains(&180.0) && a.contains(&189.0));
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a.len(), 36 + 21 - 3);
    }

    #[test]
    fn pattern_rows_follow_the_grid() {
        let mut c = small();
        c.grid = 0.5;
        let spec = PatternSpec::new(Pattern::Dipole, 1).unwrap();
        let csv = emit_pattern(&c, &spec, Some(16)).unwrap();
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 720);
        assert!(csv.contains("# mic_phases = "));
        c.format = OutputFormat::Json;
        let json: serde_json::Value = serde_json::from_str(&emit_pattern(&c, &spec, None).unwrap()).unwrap();
        assert_eq!(json["points"].as_array().unwrap().len(), 720);
    }
}
