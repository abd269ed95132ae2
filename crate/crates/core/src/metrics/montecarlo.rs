use std::collections::HashMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::pattern::{
    check_depth, compute_beampattern, crossing_offset, find_nulls, power_db, walk, AngleGrid, Beampattern,
    FoundNull, Walk,
};
use super::scenario::Scenario;
use crate::array_model::SamplingSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub runs: usize,
    pub seed: u64,
    pub sampling: SamplingSpec,
    pub grid_resolution_deg: f64,
    pub refine_tol_deg: f64,
    /// Depths (dB, negative) at which null widths are measured.
    pub depths_db: Vec<f64>,
}

impl MonteCarloConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::param("runs", "must be >= 1"));
        }
        AngleGrid::new(self.grid_resolution_deg)?;
        if !(self.refine_tol_deg > 0.0) {
            return Err(Error::param("refine_tol", "must be > 0"));
        }
        self.depths_db.iter().try_for_each(|&d| check_depth(d))
    }
}

/// A null width or the absence of one; serialized as a number or `"N.A."`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthAt {
    pub depth_db: f64,
    #[serde(serialize_with = "ser_na", deserialize_with = "de_na")]
    pub width_deg: Option<f64>,
}

fn ser_na<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(w) => s.serialize_f64(*w),
        None => s.serialize_str("N.A."),
    }
}

fn de_na<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Cell {
        Num(f64),
        Text(String),
    }
    match Cell::deserialize(d)? {
        Cell::Num(w) => Ok(Some(w)),
        Cell::Text(t) if t == "N.A." => Ok(None),
        Cell::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"N.A.\", got {t:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullResult {
    pub angle_deg: f64,
    pub depth_db: f64,
    pub widths: Vec<WidthAt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullMetrics {
    pub runs: usize,
    pub seed: u64,
    pub nulls: Vec<NullResult>,
}

impl NullMetrics {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Metrics of a single already-computed beampattern.
pub fn null_metrics(bp: &Beampattern, scenario: Option<&Scenario>, tol_deg: f64, depths: &[f64]) -> Result<Vec<NullResult>> {
    depths.iter().try_for_each(|&d| check_depth(d))?;
    find_nulls(bp, scenario, tol_deg)
        .into_iter()
        .map(|n| {
            let widths = depths
                .iter()
                .map(|&d| Ok(WidthAt { depth_db: d, width_deg: super::pattern::null_width(bp, n.angle_deg, d)? }))
                .collect::<Result<_>>()?;
            Ok(NullResult { angle_deg: n.angle_deg, depth_db: n.depth_db, widths })
        })
        .collect()
}

/// Per-run output: linear null power and width per (null, depth).
struct RunResult {
    null_power: Vec<f64>,
    widths: Vec<Vec<Option<f64>>>,
}

/// Null depth and width averaged over random source and mic phases.
///
/// The unquantized scenario (as given) is swept once on the grid; its nulls,
/// maxima and width crossings guide every run. A run draws `phi_s` and then
/// `phi_1..phi_M` from its own stream, normalizes to the largest quantized
/// power among the guide's maxima, reads the null power at the refined guide
/// angle, and re-locates each width crossing on the quantized pattern starting
/// from the guide's crossing. Null powers are averaged linearly. A width is
/// N.A. when more than half the runs give N.A., else the mean of the finite
/// runs. Without a quantizer the pattern does not depend on the phases and a
/// single evaluation is returned.
pub fn monte_carlo_metrics(cfg: &MonteCarloConfig, scenario: &Scenario) -> Result<NullMetrics> {
    cfg.validate()?;
    if scenario.sampling != cfg.sampling {
        return Err(Error::param("sampling", "scenario and config sampling differ"));
    }
    let grid = AngleGrid::new(cfg.grid_resolution_deg)?;
    let guide_scn = scenario.with_quantizer(None);
    let guide = compute_beampattern(&guide_scn, &grid)?;
    let nulls = find_nulls(&guide, Some(&guide_scn), cfg.refine_tol_deg);

    if scenario.quantizer.is_none() {
        return Ok(NullMetrics {
            runs: 1,
            seed: cfg.seed,
            nulls: null_metrics(&guide, Some(&guide_scn), cfg.refine_tol_deg, &cfg.depths_db)?,
        });
    }

    let maxima = maxima_angles(&guide);
    let walks: Vec<Vec<[Walk; 2]>> = nulls
        .iter()
        .map(|nl| {
            cfg.depths_db
                .iter()
                .map(|&d| {
                    [true, false].map(|fwd| walk(guide.len(), nl.grid_index, fwd, d, &mut |k| guide.db(k)))
                })
                .collect()
        })
        .collect();
    let m = scenario.channels.len();

    let per_run: Vec<RunResult> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            let ps = rng.gen_range(0.0..TAU);
            let phis: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..TAU)).collect();
            let s = scenario.with_phases(ps, &phis)?;
            let reference = maxima.iter().map(|&a| s.power_at_deg(a)).fold(0.0, f64::max);
            if !(reference > 0.0) {
                return Err(Error::param("scenario", "zero output power at the pattern maximum"));
            }
            let mut cache: HashMap<usize, f64> = HashMap::new();
            let mut q = |k: usize| *cache.entry(k).or_insert_with(|| power_db(s.power_at_deg(guide.angle(k)) / reference));
            let mut null_power = Vec::with_capacity(nulls.len());
            let mut widths = Vec::with_capacity(nulls.len());
            for (nl, nl_walks) in nulls.iter().zip(&walks) {
                let p = s.power_at_deg(nl.angle_deg) / reference;
                null_power.push(p);
                let nd = power_db(p);
                let row = cfg
                    .depths_db
                    .iter()
                    .zip(nl_walks)
                    .map(|(&d, sides)| {
                        if nd > d {
                            return None;
                        }
                        let mut total = 0.0;
                        for (fwd, side) in [true, false].into_iter().zip(sides) {
                            total += guided_crossing(&guide, nl, fwd, d, *side, &mut q)?;
                        }
                        Some(total)
                    })
                    .collect();
                widths.push(row);
            }
            Ok(RunResult { null_power, widths })
        })
        .collect::<Result<_>>()?;

    let runs = per_run.len() as f64;
    let results = nulls
        .iter()
        .enumerate()
        .map(|(j, nl)| {
            let mean_power = per_run.iter().map(|r| r.null_power[j]).sum::<f64>() / runs;
            let widths = cfg
                .depths_db
                .iter()
                .enumerate()
                .map(|(k, &d)| {
                    let finite: Vec<f64> = per_run.iter().filter_map(|r| r.widths[j][k]).collect();
                    let width_deg = if 2 * finite.len() < per_run.len() {
                        None
                    } else {
                        Some(finite.iter().sum::<f64>() / finite.len() as f64)
                    };
                    WidthAt { depth_db: d, width_deg }
                })
                .collect();
            NullResult { angle_deg: nl.angle_deg, depth_db: power_db(mean_power), widths }
        })
        .collect();
    Ok(NullMetrics { runs: cfg.runs, seed: cfg.seed, nulls: results })
}

/// Grid angles of every local maximum within 0.01 dB of the global maximum.
fn maxima_angles(bp: &Beampattern) -> Vec<f64> {
    let n = bp.len();
    (0..n)
        .filter(|&k| {
            let v = bp.db(k);
            v >= -0.01 && v >= bp.db((k + n - 1) % n) && v >= bp.db((k + 1) % n)
        })
        .map(|k| bp.angle(k))
        .collect()
}

/// Offset of the `d` crossing on one side of a null, searched on the run's
/// pattern `q` starting from the guide's crossing pair.
fn guided_crossing(
    guide: &Beampattern,
    null: &FoundNull,
    forward: bool,
    d: f64,
    side: Walk,
    q: &mut impl FnMut(usize) -> f64,
) -> Option<f64> {
    let Walk::Crossing { inner, outer } = side else {
        return None;
    };
    let n = guide.len();
    let step = |k: usize, fwd: bool| if fwd { (k + 1) % n } else { (k + n - 1) % n };
    let (mut i, mut o) = (inner, outer);
    for _ in 0..n {
        let (qi, qo) = (q(i), q(o));
        if qo <= d {
            i = o;
            o = step(o, forward);
        } else if qi > d {
            if i == null.grid_index {
                return None;
            }
            o = i;
            i = step(i, !forward);
        } else {
            let origin = guide.angle(null.grid_index);
            return Some(crossing_offset(origin, forward, d, (guide.angle(i), qi), (guide.angle(o), qo)));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_model::{ArrayGeometry, MicChannel, SourceSpec, DEFAULT_SOUND_SPEED};
    use crate::quantization::QuantizerSpec;
    use crate::weights::{design_weights, Pattern, PatternSpec};

    fn scenario(p: Pattern, order: usize, bits: Option<u32>, samp: SamplingSpec) -> Scenario {
        let m = order + 1;
        let g = ArrayGeometry::with_spacing_in_wavelengths(m, 0.04, 997.0, DEFAULT_SOUND_SPEED).unwrap();
        let w = design_weights(&PatternSpec::new(p, order).unwrap(), &g, 997.0, &MicChannel::ideal_set(m)).unwrap();
        Scenario::new(
            SourceSpec::new(1.0, 997.0, 0.0).unwrap(),
            g,
            MicChannel::ideal_set(m),
            bits.map(|b| QuantizerSpec::with_bits(b).unwrap()),
            w,
            samp,
        )
        .unwrap()
    }

    fn cfg(runs: usize, samp: SamplingSpec, depths: Vec<f64>) -> MonteCarloConfig {
        MonteCarloConfig { runs, seed: 11, sampling: samp, grid_resolution_deg: 0.5, refine_tol_deg: 1e-3, depths_db: depths }
    }

    #[test]
    fn same_seed_same_result() {
        let samp = SamplingSpec::new(44100.0, 1024).unwrap();
        let s = scenario(Pattern::Cardioid, 1, Some(12), samp);
        let c = cfg(40, samp, vec![-20.0, -40.0]);
        let a = monte_carlo_metrics(&c, &s).unwrap();
        let b = monte_carlo_metrics(&c, &s).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn dipole_nd_tracks_error_model() {
        let samp = SamplingSpec::new(44100.0, 2048).unwrap();
        let s = scenario(Pattern::Dipole, 1, Some(12), samp);
        let m = monte_carlo_metrics(&cfg(200, samp, vec![]), &s).unwrap();
        assert_eq!(m.nulls.len(), 1);
        assert!((m.nulls[0].angle_deg - 90.0).abs() < 1e-3);
        assert!((m.nulls[0].depth_db + 59.0).abs() < 1.0, "{}", m.nulls[0].depth_db);
    }

    #[test]
    fn unquantized_is_single_evaluation() {
        let samp = SamplingSpec::new(44100.0, 1024).unwrap();
        let s = scenario(Pattern::Hypercardioid, 1, None, samp);
        let m = monte_carlo_metrics(&cfg(50, samp, vec![-10.0]), &s).unwrap();
        assert_eq!(m.runs, 1);
        assert!((m.nulls[0].angle_deg - 120.0).abs() < 0.01);
        assert!(m.nulls[0].depth_db < -190.0);
    }

    #[test]
    fn depth_below_nd_is_not_applicable() {
        let samp = SamplingSpec::new(44100.0, 1024).unwrap();
        let s = scenario(Pattern::Cardioid, 1, Some(8), samp);
        let m = monte_carlo_metrics(&cfg(20, samp, vec![-20.0, -80.0]), &s).unwrap();
        assert!(m.nulls[0].widths[0].width_deg.is_some());
        assert_eq!(m.nulls[0].widths[1].width_deg, None);
        assert!(m.to_json().unwrap().contains("\"N.A.\""));
    }

    #[test]
    fn json_round_trip() {
        let m = NullMetrics {
            runs: 3,
            seed: 1,
            nulls: vec![NullResult {
                angle_deg: 90.0,
                depth_db: -83.0,
                widths: vec![WidthAt { depth_db: -10.0, width_deg: Some(37.7) }, WidthAt { depth_db: -90.0, width_deg: None }],
            }],
        };
        let back: NullMetrics = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_bad_config() {
        let samp = SamplingSpec::new(44100.0, 64).unwrap();
        let s = scenario(Pattern::Dipole, 1, Some(12), samp);
        assert!(monte_carlo_metrics(&cfg(0, samp, vec![]), &s).is_err());
        assert!(matches!(monte_carlo_metrics(&cfg(1, samp, vec![0.0]), &s), Err(Error::InvalidDepth(_))));
    }
}
