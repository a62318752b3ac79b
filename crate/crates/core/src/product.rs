//! Products of a regular function with a distribution, and measured Bony constants.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::besov::besov;
use crate::error::{invalid, Result, SfpeError};
use crate::field::{dealiased_pointwise, SpectralField};

/// `f * g` for scalar `f` and scalar or vector `g`, as the dealiased product
/// truncated to the resolved modes.
pub fn pointwise_product(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    if f.grid() != g.grid() {
        return Err(SfpeError::ShapeMismatch(format!("grid {:?} vs {:?}", f.grid(), g.grid())));
    }
    if f.components() != 1 {
        return Err(SfpeError::ComponentMismatch {
            expected: 1,
            got: f.components(),
        });
    }
    let grid = *f.grid();
    let comps = (0..g.components())
        .map(|c| dealiased_pointwise(&grid, &[f.component(0), g.component(c)], |v| v[0] * v[1]))
        .collect();
    SpectralField::from_coeffs(grid, comps)
}

/// One measured product constant; serialises to a CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BonyReport {
    pub gamma: f64,
    pub alpha: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub c_measured: f64,
    pub ensemble_size: usize,
    pub seed: u64,
}

/// `sup ||f g||_{-alpha} / (||f||_gamma ||g||_{-alpha})` over paired ensembles.
pub fn bony_constant(
    f_ensemble: &[SpectralField],
    g_ensemble: &[SpectralField],
    gamma: f64,
    alpha: f64,
    seed: u64,
) -> Result<BonyReport> {
    if !(alpha > 0.0 && gamma > alpha) {
        return Err(invalid(
            "gamma",
            format!("the product needs gamma > alpha > 0, got gamma = {gamma}, alpha = {alpha}"),
        ));
    }
    if f_ensemble.is_empty() || f_ensemble.len() != g_ensemble.len() {
        return Err(SfpeError::EmptyEnsemble);
    }
    let ratios = f_ensemble
        .par_iter()
        .zip(g_ensemble)
        .map(|(f, g)| {
            let den = besov(f, gamma) * besov(g, -alpha);
            if den == 0.0 {
                return Ok(0.0);
            }
            Ok(besov(&pointwise_product(f, g)?, -alpha) / den)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BonyReport {
        gamma,
        alpha,
        n: f_ensemble[0].grid().n(),
        c_measured: ratios.into_iter().fold(0.0, f64::max),
        ensemble_size: f_ensemble.len(),
        seed,
    })
}

/// Spread of a constant measured at several resolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub values: Vec<f64>,
    /// `(max - min) / min`
    pub relative_variation: f64,
    /// Strictly increasing with resolution by more than the tolerance overall:
    /// the signature of a violated regularity condition.
    pub grows_with_n: bool,
}

pub fn stability(values: &[f64], tolerance: f64) -> StabilityReport {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(0.0, f64::max);
    let variation = if min > 0.0 { (max - min) / min } else { f64::INFINITY };
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    StabilityReport {
        values: values.to_vec(),
        relative_variation: variation,
        grows_with_n: increasing && variation > tolerance,
    }
}

fn bandwidth(f: &SpectralField) -> usize {
    let g = f.grid();
    let mut k = 0;
    for c in 0..f.components() {
        for (i, z) in f.component(c).iter().enumerate() {
            if z.norm_sqr() > 0.0 {
                let m = g.mode(i);
                k = k.max(m[0].unsigned_abs().max(m[1].unsigned_abs()) as usize);
            }
        }
    }
    k
}

/// `||(Gamma l1) l2 - Gamma (l1 l2)||_{-alpha} / (||Gamma||_{-alpha} ||l1||_beta ||l2||_beta)`.
///
/// Both sides are formed on a grid wide enough to hold every intermediate
/// product without truncation, so the two groupings agree up to rounding.
pub fn associativity_check(
    gamma_field: &SpectralField,
    l1: &SpectralField,
    l2: &SpectralField,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    if !(alpha < beta) {
        return Err(invalid("alpha", format!("needs alpha < beta, got {alpha} >= {beta}")));
    }
    let grid = *gamma_field.grid();
    if l1.grid() != &grid || l2.grid() != &grid {
        return Err(SfpeError::ShapeMismatch("associativity inputs on different grids".into()));
    }
    let band = bandwidth(gamma_field) + bandwidth(l1) + bandwidth(l2);
    let wide = (2 * band + 2).next_power_of_two().max(grid.n());
    let (g, a, b) = (gamma_field.resample(wide)?, l1.resample(wide)?, l2.resample(wide)?);
    let left = pointwise_product(&b, &pointwise_product(&a, &g)?)?;
    let right = pointwise_product(&pointwise_product(&a, &b)?, &g)?;
    let diff = left.sub(&right)?;
    let den = besov(gamma_field, -alpha) * besov(l1, beta) * besov(l2, beta);
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(besov(&diff, -alpha) / den)
}
