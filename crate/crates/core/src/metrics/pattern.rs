use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use crate::error::{Error, Result};

/// Grid minima must sit at least this far below the maximum to count as nulls.
pub const NULL_THRESHOLD_DB: f64 = -10.0;

/// Normalized power ratio in dB. An exact zero maps to the smallest
/// positive double (about -3077 dB) so every value stays finite.
pub fn power_db(ratio: f64) -> f64 {
    10.0 * ratio.max(f64::MIN_POSITIVE).log10()
}

/// Uniform grid over `[0, 360)` degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    pub resolution_deg: f64,
}

impl AngleGrid {
    pub fn new(resolution_deg: f64) -> Result<Self> {
        if !(resolution_deg > 0.0 && resolution_deg <= 90.0) {
            return Err(Error::param("grid_resolution", format!("must be in (0, 90], got {resolution_deg}")));
        }
        Ok(AngleGrid { resolution_deg })
    }

    pub fn len(&self) -> usize {
        (360.0 / self.resolution_deg).round() as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Exact for resolutions that divide 360 evenly, e.g. `k / 10` at 0.1 deg.
    pub fn angle(&self, k: usize) -> f64 {
        360.0 * k as f64 / self.len() as f64
    }

    pub fn angles(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.angle(k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamPoint {
    pub theta_deg: f64,
    pub power_db: f64,
}

/// Power versus angle, normalized to a reference power. Points are sorted by
/// angle in `[0, 360)`; spacing need not be uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beampattern {
    pub points: Vec<BeamPoint>,
    /// Linear power that maps to 0 dB.
    pub reference_power: f64,
    pub max_angle_deg: f64,
}

impl Beampattern {
    /// Normalizes raw linear powers to their maximum.
    pub fn from_powers(angles: &[f64], powers: &[f64]) -> Result<Self> {
        if angles.len() != powers.len() {
            return Err(Error::LengthMismatch { expected: angles.len(), actual: powers.len() });
        }
        let (kmax, &pmax) = powers
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, &f64)>, (k, p)| match best {
                Some((_, b)) if *b >= *p => best,
                _ => Some((k, p)),
            })
            .ok_or(Error::EmptySequence)?;
        if !(pmax > 0.0 && pmax.is_finite()) {
            return Err(Error::param("beampattern", "no positive finite output power"));
        }
        Self::with_reference(angles, powers, pmax, angles[kmax])
    }

    /// Normalizes raw linear powers to an explicit reference.
    pub fn with_reference(angles: &[f64], powers: &[f64], reference_power: f64, max_angle_deg: f64) -> Result<Self> {
        if angles.len() != powers.len() {
            return Err(Error::LengthMismatch { expected: angles.len(), actual: powers.len() });
        }
        if !(reference_power > 0.0) {
            return Err(Error::param("reference_power", "must be > 0"));
        }
        let points = angles
            .iter()
            .zip(powers)
            .map(|(&theta_deg, &p)| BeamPoint { theta_deg, power_db: power_db(p / reference_power) })
            .collect();
        Ok(Beampattern { points, reference_power, max_angle_deg })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn db(&self, k: usize) -> f64 {
        self.points[k].power_db
    }

    pub fn angle(&self, k: usize) -> f64 {
        self.points[k].theta_deg
    }

    /// Index of the point closest to `theta_deg` on the circle.
    pub fn nearest_index(&self, theta_deg: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (k, p) in self.points.iter().enumerate() {
            let d = circular_gap(p.theta_deg, theta_deg);
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((k, d));
            }
        }
        best.map(|(k, _)| k)
    }

    /// Value at `theta_deg` by linear-in-dB interpolation between neighbours.
    pub fn interpolate_db(&self, theta_deg: f64) -> Option<f64> {
        let n = self.len();
        if n == 0 {
            return None;
        }
        let t = theta_deg.rem_euclid(360.0);
        let hi = self.points.partition_point(|p| p.theta_deg < t);
        let (a, b) = (self.points[(hi + n - 1) % n], self.points[hi % n]);
        let span = (b.theta_deg - a.theta_deg).rem_euclid(360.0);
        if span == 0.0 {
            return Some(a.power_db);
        }
        let f = (t - a.theta_deg).rem_euclid(360.0) / span;
        Some(a.power_db + f * (b.power_db - a.power_db))
    }
}

fn circular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

pub fn compute_beampattern(scenario: &Scenario, grid: &AngleGrid) -> Result<Beampattern> {
    let angles: Vec<f64> = grid.angles().collect();
    let powers: Vec<f64> = angles.par_iter().map(|&a| scenario.power_at_deg(a)).collect();
    Beampattern::from_powers(&angles, &powers)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoundNull {
    pub angle_deg: f64,
    pub depth_db: f64,
    pub grid_index: usize,
}

/// Golden-section minimization of `f` on `[a, b]` until the bracket is
/// narrower than `tol`. Returns the best point evaluated, seeded with `best`.
pub fn golden_min(
    mut f: impl FnMut(f64) -> f64,
    mut a: f64,
    mut b: f64,
    tol: f64,
    mut best: (f64, f64),
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for (x, fx) in [(c, fc), (d, fd)] {
        if fx < best.1 {
            best = (x, fx);
        }
    }
    let mut iters = 0;
    while (b - a).abs() > tol && iters < 200 {
        iters += 1;
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            if fc < best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            if fd < best.1 {
                best = (d, fd);
            }
        }
    }
    best
}

/// Local minima below [`NULL_THRESHOLD_DB`] in `[0, 180]` degrees; the other
/// half-plane mirrors it. With a scenario, each minimum is refined by
/// re-evaluating the scenario between its grid neighbours until the bracket
/// is narrower than `tol_deg`.
pub fn find_nulls(bp: &Beampattern, scenario: Option<&Scenario>, tol_deg: f64) -> Vec<FoundNull> {
    let n = bp.len();
    if n < 3 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for k in 0..n {
        let theta = bp.angle(k);
        if theta > 180.0 + 1e-9 {
            continue;
        }
        let (prev, cur, next) = (bp.db((k + n - 1) % n), bp.db(k), bp.db((k + 1) % n));
        if !(cur < prev && cur <= next && cur < NULL_THRESHOLD_DB) {
            continue;
        }
        let (angle_deg, depth_db) = match scenario {
            Some(s) => {
                let lo = theta - (theta - bp.angle((k + n - 1) % n)).rem_euclid(360.0);
                let hi = theta + (bp.angle((k + 1) % n) - theta).rem_euclid(360.0);
                let (x, fx) = golden_min(
                    |a| power_db(s.power_at_deg(a) / bp.reference_power),
                    lo,
                    hi,
                    tol_deg,
                    (theta, cur),
                );
                (x.rem_euclid(360.0), fx)
            }
            None => (theta, cur),
        };
        out.push(FoundNull { angle_deg, depth_db, grid_index: k });
    }
    out
}

/// Outcome of walking away from a null along one direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Walk {
    /// `value(inner) <= d < value(outer)`; the two indices are adjacent.
    Crossing { inner: usize, outer: usize },
    /// Reached a local maximum (or went all the way round) without rising above `d`.
    Unbounded,
}

pub(crate) fn walk(n: usize, start: usize, forward: bool, d: f64, value: &mut impl FnMut(usize) -> f64) -> Walk {
    let step = |k: usize| if forward { (k + 1) % n } else { (k + n - 1) % n };
    let mut k = start;
    let mut vk = value(k);
    let mut rising = false;
    for _ in 0..n {
        let j = step(k);
        let vj = value(j);
        if vj > d {
            return Walk::Crossing { inner: k, outer: j };
        }
        if vj > vk {
            rising = true;
        } else if vj < vk && rising {
            return Walk::Unbounded;
        }
        k = j;
        vk = vj;
    }
    Walk::Unbounded
}

/// Angular distance from `from` to `to` travelling in the given direction.
pub(crate) fn travel(from: f64, to: f64, forward: bool) -> f64 {
    if forward {
        (to - from).rem_euclid(360.0)
    } else {
        (from - to).rem_euclid(360.0)
    }
}

/// Offset of the `d` crossing from `origin_deg`, interpolated linearly in dB
/// between the inner and outer points.
pub(crate) fn crossing_offset(
    origin_deg: f64,
    forward: bool,
    d: f64,
    inner: (f64, f64),
    outer: (f64, f64),
) -> f64 {
    let oi = travel(origin_deg, inner.0, forward);
    let mut oo = travel(origin_deg, outer.0, forward);
    if oo < oi {
        oo += 360.0;
    }
    let t = if outer.1 == inner.1 { 0.0 } else { ((d - inner.1) / (outer.1 - inner.1)).clamp(0.0, 1.0) };
    oi + t * (oo - oi)
}

pub(crate) fn check_depth(d: f64) -> Result<()> {
    if !(d < 0.0) {
        return Err(Error::InvalidDepth(d));
    }
    Ok(())
}

/// Width in degrees of the contiguous region around `theta_null_deg` where
/// the pattern stays at or below `d` dB. `None` ("N.A.") when the region is
/// empty or is not bounded by a lobe rising above `d` on both sides.
pub fn null_width(bp: &Beampattern, theta_null_deg: f64, d: f64) -> Result<Option<f64>> {
    check_depth(d)?;
    let Some(k0) = bp.nearest_index(theta_null_deg) else {
        return Ok(None);
    };
    if bp.db(k0) > d {
        return Ok(None);
    }
    let n = bp.len();
    let origin = bp.angle(k0);
    let mut total = 0.0;
    for forward in [true, false] {
        match walk(n, k0, forward, d, &mut |k| bp.db(k)) {
            Walk::Crossing { inner, outer } => {
                let p = |k: usize| (bp.angle(k), bp.db(k));
                total += crossing_offset(origin, forward, d, p(inner), p(outer));
            }
            Walk::Unbounded => return Ok(None),
        }
    }
    Ok(Some(total))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// cos^2-shaped dipole-like pattern on a grid.
    fn cos2(res: f64) -> Beampattern {
        let g = AngleGrid::new(res).unwrap();
        let angles: Vec<f64> = g.angles().collect();
        let powers: Vec<f64> = angles.iter().map(|a| a.to_radians().cos().powi(2)).collect();
        Beampattern::from_powers(&angles, &powers).unwrap()
    }

    #[test]
    fn grid_is_exact() {
        let g = AngleGrid::new(0.1).unwrap();
        assert_eq!(g.len(), 3600);
        assert_eq!(g.angle(900), 90.0);
        assert_eq!(g.angle(1060), 106.0);
        assert!(AngleGrid::new(0.0).is_err());
    }

    #[test]
    fn normalization_pins_max_to_zero() {
        let bp = cos2(0.5);
        let max = bp.points.iter().map(|p| p.power_db).fold(f64::MIN, f64::max);
        assert_eq!(max, 0.0);
        assert_eq!(bp.max_angle_deg, 0.0);
    }

    #[test]
    fn finds_mirror_free_nulls() {
        let bp = cos2(0.1);
        let nulls = find_nulls(&bp, None, 1e-3);
        assert_eq!(nulls.len(), 1);
        assert_eq!(nulls[0].angle_deg, 90.0);
        assert!(nulls[0].depth_db < -200.0);
    }

    #[test]
    fn width_of_cos2_null() {
        let bp = cos2(0.1);
        // cos^2 = 0.1 at 90 +- asin(sqrt(0.1)).
        let expect = 2.0 * (0.1f64).sqrt().asin().to_degrees();
        let w = null_width(&bp, 90.0, -10.0).unwrap().unwrap();
        assert!((w - expect).abs() < 0.01, "{w} vs {expect}");
    }

    #[test]
    fn width_rejects_non_negative_depth() {
        let bp = cos2(1.0);
        assert!(matches!(null_width(&bp, 90.0, 0.0), Err(Error::InvalidDepth(_))));
        assert!(null_width(&bp, 90.0, 3.0).is_err());
    }

    #[test]
    fn unbounded_region_is_not_applicable() {
        // First-order supercardioid shape: the back lobe peaks near -15 dB,
        // so at -10 dB the region around 135 deg merges with its mirror.
        let g = AngleGrid::new(0.1).unwrap();
        let a = 2f64.sqrt() - 1.0;
        let angles: Vec<f64> = g.angles().collect();
        let powers: Vec<f64> =
            angles.iter().map(|t| (a + (1.0 - a) * t.to_radians().cos()).powi(2)).collect();
        let bp = Beampattern::from_powers(&angles, &powers).unwrap();
        assert_eq!(null_width(&bp, 135.0, -10.0).unwrap(), None);
        assert!(null_width(&bp, 135.0, -20.0).unwrap().is_some());
    }

    #[test]
    fn depth_below_null_is_not_applicable() {
        let g = AngleGrid::new(1.0).unwrap();
        let angles: Vec<f64> = g.angles().collect();
        let powers: Vec<f64> = angles.iter().map(|a| a.to_radians().cos().powi(2) + 1e-4).collect();
        let bp = Beampattern::from_powers(&angles, &powers).unwrap();
        assert_eq!(null_width(&bp, 90.0, -50.0).unwrap(), None);
        assert!(null_width(&bp, 90.0, -30.0).unwrap().is_some());
    }

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, fx) = golden_min(|x| (x - 1.234).powi(2), 0.0, 3.0, 1e-6, (0.0, 1.234f64.powi(2)));
        assert!((x - 1.234).abs() < 1e-6 && fx < 1e-12);
    }

    #[test]
    fn interpolation_wraps() {
        let bp = cos2(1.0);
        assert_eq!(bp.interpolate_db(0.0), Some(0.0));
        let v = bp.interpolate_db(359.5).unwrap();
        assert!(v < 0.0 && v > -0.01);
    }
}
