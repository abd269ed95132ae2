use std::f64::consts::PI;

use crate::array_model::{deg_to_rad, ArrayGeometry, MicChannel};
use crate::error::{Error, Result};
use crate::quantization::{step_size, QuantizerSpec};
use crate::weights::{design_weights, Pattern, PatternSpec};

/// Expected null depth of the first-order dipole under quantization.
///
/// At the null only the weighted rounding errors remain. With the mic phase
/// uniform on `[0, 2 pi)`, each I/Q pair contributes `D_i^2 (E[cos^2] + E[sin^2])
/// Delta^2 / 12`; the sum is divided by the unquantized endfire power.
pub fn dipole_nd_analytic(spec: &QuantizerSpec, geom: &ArrayGeometry, f0: f64) -> Result<f64> {
    if geom.num_mics != 2 {
        return Err(Error::UnsupportedPattern { pattern: "dipole".into(), order: geom.num_mics.saturating_sub(1) });
    }
    let w = design_weights(&PatternSpec::new(Pattern::Dipole, 1)?, geom, f0, &MicChannel::ideal_set(2))?;
    let (e_cos2, e_sin2) = (0.5, 0.5);
    let err_var = step_size(spec).powi(2) / 12.0;
    let noise: f64 = w.channels.iter().map(|t| t.magnitude.powi(2) * (e_cos2 + e_sin2) * err_var).sum();
    let endfire = w.response(deg_to_rad(0.0)).norm_sqr() / 2.0;
    if noise == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(10.0 * (noise / endfire).log10())
}

/// `10 log10(Delta^2 / (12 sin^2(pi delta / lambda)))`.
pub fn dipole_nd_closed_form(step: f64, spacing_wavelengths: f64) -> f64 {
    if step == 0.0 {
        return f64::NEG_INFINITY;
    }
    10.0 * (step * step / (12.0 * (PI * spacing_wavelengths).sin().powi(2))).log10()
}
