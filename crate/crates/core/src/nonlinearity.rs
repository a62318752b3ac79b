//! The non-local nonlinearity `phi(f) = f F(K*f)` and the drift `g_w = F(K*w) b`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::besov::{besov, holder_norm};
use crate::error::{invalid, Result, SfpeError};
use crate::field::{check_probability_kernel, convolve, dealiased_pointwise, SpectralField, TimeField};

/// `sup |x (1+x^2)^{-5/2}| * 3`, attained at `x = 1/2`.
const CLAMP_SECOND_DERIVATIVE: f64 = 0.858_650_271_074_924_2;
/// `sup |2 tanh(x) sech^2(x)| = 4 / (3 sqrt 3)`, attained at `tanh^2 = 1/3`.
const TANH_SECOND_DERIVATIVE: f64 = 0.769_800_358_919_501;

/// The function `F` with its recorded constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    /// `F(x) = lambda`
    Constant { lambda: f64 },
    /// `F(x) = shift + b0 tanh(a x)`
    ScaledTanh {
        a: f64,
        b0: f64,
        #[serde(default)]
        shift: f64,
    },
    /// `F(x) = offset + amplitude x / sqrt(1 + x^2)`
    SmoothClamp { offset: f64, amplitude: f64 },
}

impl Default for NonlinearitySpec {
    fn default() -> Self {
        NonlinearitySpec::ScaledTanh {
            a: 1.0,
            b0: 1.0,
            shift: 0.0,
        }
    }
}

impl NonlinearitySpec {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            NonlinearitySpec::Constant { lambda } => lambda,
            NonlinearitySpec::ScaledTanh { a, b0, shift } => shift + b0 * (a * x).tanh(),
            NonlinearitySpec::SmoothClamp { offset, amplitude } => {
                offset + amplitude * x / (1.0 + x * x).sqrt()
            }
        }
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            NonlinearitySpec::Constant { .. } => 0.0,
            NonlinearitySpec::ScaledTanh { a, b0, .. } => {
                let c = (a * x).cosh();
                a * b0 / (c * c)
            }
            NonlinearitySpec::SmoothClamp { amplitude, .. } => amplitude * (1.0 + x * x).powf(-1.5),
        }
    }

    /// `F(x) - F(x - d)` without cancellation for small `d`.
    pub fn difference(&self, x: f64, d: f64) -> f64 {
        match *self {
            NonlinearitySpec::Constant { .. } => 0.0,
            NonlinearitySpec::ScaledTanh { a, b0, .. } => {
                let y = x - d;
                b0 * (a * d).sinh() / ((a * x).cosh() * (a * y).cosh())
            }
            NonlinearitySpec::SmoothClamp { amplitude, .. } => {
                let y = x - d;
                let (rx, ry) = ((1.0 + x * x).sqrt(), (1.0 + y * y).sqrt());
                let num = if x * y > 0.0 {
                    d * (x + y) / (x * ry + y * rx)
                } else {
                    x * ry - y * rx
                };
                amplitude * num / (rx * ry)
            }
        }
    }

    pub fn f_at_zero(&self) -> f64 {
        self.eval(0.0)
    }

    /// `||F'||_inf`
    pub fn f_prime_sup(&self) -> f64 {
        match *self {
            NonlinearitySpec::Constant { .. } => 0.0,
            NonlinearitySpec::ScaledTanh { a, b0, .. } => (a * b0).abs(),
            NonlinearitySpec::SmoothClamp { amplitude, .. } => amplitude.abs(),
        }
    }

    /// Lipschitz constant of `F'` (`||F''||_inf`).
    pub fn f_prime_lipschitz(&self) -> f64 {
        match *self {
            NonlinearitySpec::Constant { .. } => 0.0,
            NonlinearitySpec::ScaledTanh { a, b0, .. } => a * a * b0.abs() * TANH_SECOND_DERIVATIVE,
            NonlinearitySpec::SmoothClamp { amplitude, .. } => amplitude.abs() * CLAMP_SECOND_DERIVATIVE,
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match *self {
            NonlinearitySpec::Constant { lambda } => Some(lambda),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = match *self {
            NonlinearitySpec::Constant { lambda } => lambda.is_finite(),
            NonlinearitySpec::ScaledTanh { a, b0, shift } => a.is_finite() && b0.is_finite() && shift.is_finite(),
            NonlinearitySpec::SmoothClamp { offset, amplitude } => offset.is_finite() && amplitude.is_finite(),
        };
        if finite {
            Ok(())
        } else {
            Err(invalid("nonlinearity", "parameters must be finite"))
        }
    }
}

/// `F(K*f)` sampled on the padded grid and projected back.
pub fn compose_convolved(f: &SpectralField, kernel: &SpectralField, nl: &NonlinearitySpec) -> Result<SpectralField> {
    let kf = convolve(kernel, f)?;
    let g = *f.grid();
    if let Some(l) = nl.constant_value() {
        return Ok(SpectralField::constant(g, l));
    }
    let c = dealiased_pointwise(&g, &[kf.component(0)], |v| nl.eval(v[0]));
    SpectralField::from_coeffs(g, vec![c])
}

/// `(phi f)(x) = f(x) F((K*f)(x))`.
pub fn phi(f: &SpectralField, kernel: &SpectralField, nl: &NonlinearitySpec) -> Result<SpectralField> {
    if f.components() != 1 {
        return Err(SfpeError::ComponentMismatch {
            expected: 1,
            got: f.components(),
        });
    }
    let kf = convolve(kernel, f)?;
    if let Some(l) = nl.constant_value() {
        return Ok(f.scale(l));
    }
    let g = *f.grid();
    let c = dealiased_pointwise(&g, &[f.component(0), kf.component(0)], |v| v[0] * nl.eval(v[1]));
    SpectralField::from_coeffs(g, vec![c])
}

/// `g_w(t) = F(K*w(t)) b(t)` snapshot by snapshot.
pub fn assemble_gw(
    w: &TimeField,
    b: &TimeField,
    kernel: &SpectralField,
    nl: &NonlinearitySpec,
) -> Result<TimeField> {
    if w.times() != b.times() || w.grid() != b.grid() {
        return Err(SfpeError::ShapeMismatch("w and b must share grid and time grid".into()));
    }
    if w.components() != 1 {
        return Err(SfpeError::ComponentMismatch {
            expected: 1,
            got: w.components(),
        });
    }
    check_probability_kernel(kernel)?;
    if let Some(l) = nl.constant_value() {
        return Ok(b.scale(l));
    }
    let g = *b.grid();
    let snaps = w
        .snapshots()
        .par_iter()
        .zip(b.snapshots())
        .map(|(ws, bs)| {
            let kw = convolve(kernel, ws)?;
            let comps = (0..bs.components())
                .map(|c| dealiased_pointwise(&g, &[kw.component(0), bs.component(c)], |v| nl.eval(v[0]) * v[1]))
                .collect();
            SpectralField::from_coeffs(g, comps)
        })
        .collect::<Result<Vec<_>>>()?;
    TimeField::new(w.times().to_vec(), snaps)
}

/// Numerically measured norms of the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelNorms {
    pub sup: f64,
    /// Hölder seminorm `[K]_gamma`.
    pub seminorm: f64,
    /// `sup + seminorm`
    pub holder: f64,
    pub gamma: f64,
}

/// `g_w - g_{w - delta}`, evaluated from `delta` so that small differences
/// keep their relative accuracy.
pub fn assemble_gw_difference(
    w: &TimeField,
    delta: &TimeField,
    b: &TimeField,
    kernel: &SpectralField,
    nl: &NonlinearitySpec,
) -> Result<TimeField> {
    w.check_same_shape(delta)?;
    if w.times() != b.times() || w.grid() != b.grid() {
        return Err(SfpeError::ShapeMismatch("w and b must share grid and time grid".into()));
    }
    check_probability_kernel(kernel)?;
    let g = *b.grid();
    if nl.constant_value().is_some() {
        return TimeField::constant(b.times().to_vec(), SpectralField::zeros(g, b.components()));
    }
    let snaps = w
        .snapshots()
        .par_iter()
        .zip(delta.snapshots())
        .zip(b.snapshots())
        .map(|((ws, ds), bs)| {
            if ds.max_abs_coeff() == 0.0 {
                return Ok(SpectralField::zeros(g, bs.components()));
            }
            let kw = convolve(kernel, ws)?;
            let kd = convolve(kernel, ds)?;
            let comps = (0..bs.components())
                .map(|c| {
                    dealiased_pointwise(&g, &[kw.component(0), kd.component(0), bs.component(c)], |v| {
                        nl.difference(v[0], v[1]) * v[2]
                    })
                })
                .collect();
            SpectralField::from_coeffs(g, comps)
        })
        .collect::<Result<Vec<_>>>()?;
    TimeField::new(w.times().to_vec(), snaps)
}

pub fn kernel_norms(kernel: &SpectralField, gamma: f64) -> Result<KernelNorms> {
    check_probability_kernel(kernel)?;
    let r = holder_norm(kernel, gamma)?;
    let sup = r.holder_sup.unwrap_or(0.0);
    let seminorm = r.holder_seminorm.unwrap_or(0.0);
    Ok(KernelNorms {
        sup,
        seminorm,
        holder: sup + seminorm,
        gamma,
    })
}

/// The aggregate `C_{F,K}`: the largest of the constants appearing in the
/// growth, Lipschitz and L1 bounds, and at least 1.
pub fn c_fk(nl: &NonlinearitySpec, k: &KernelNorms) -> f64 {
    let f0 = nl.f_at_zero().abs();
    let d1 = nl.f_prime_sup();
    let d2 = nl.f_prime_lipschitz();
    [
        1.0,
        f0 + d1 * k.holder,
        2.0 * d1 + 0.5 * d2 * k.seminorm,
        f0 + d1 * k.sup,
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Ratios of the measured norms to the right-hand sides of the bounds on `phi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiBoundsReport {
    pub gamma: f64,
    pub c_fk: f64,
    /// `sup ||phi f||_gamma / (||f||_gamma (1 + ||f||_L1))`
    pub growth_ratio: f64,
    /// `sup ||phi f - phi g||_gamma / ((1 + ||f|| + ||g||)(1 + ||f+g||_L1) ||f-g||_gamma)`
    pub lipschitz_ratio: f64,
    /// `sup ||F(K*f) - F(K*g)||_gamma / ((1 + ||f+g||_L1) ||f-g||_gamma)`
    pub composition_ratio: f64,
    /// `sup ||phi f||_L1 / ||f||_L1`
    pub l1_ratio: f64,
    pub pairs: usize,
    pub skipped_pairs: usize,
}

pub fn phi_bounds_report(
    f_ensemble: &[SpectralField],
    g_ensemble: &[SpectralField],
    kernel: &SpectralField,
    nl: &NonlinearitySpec,
    gamma: f64,
) -> Result<PhiBoundsReport> {
    if f_ensemble.is_empty() || g_ensemble.is_empty() {
        return Err(SfpeError::EmptyEnsemble);
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid("gamma", format!("must lie in (0,1), got {gamma}")));
    }
    let kn = kernel_norms(kernel, gamma)?;
    let l1 = |f: &SpectralField| f.to_physical().l1_norm();
    let rows = f_ensemble
        .par_iter()
        .zip(g_ensemble)
        .map(|(f, g)| {
            let pf = phi(f, kernel, nl)?;
            let nf = besov(f, gamma);
            let growth = if nf > 0.0 { besov(&pf, gamma) / (nf * (1.0 + l1(f))) } else { 0.0 };
            let l1r = if l1(f) > 0.0 { l1(&pf) / l1(f) } else { 0.0 };
            let diff = f.sub(g)?;
            let nd = besov(&diff, gamma);
            if nd == 0.0 {
                return Ok((growth, l1r, None));
            }
            let ng = besov(g, gamma);
            let sum_l1 = l1(&f.add(g)?);
            let pg = phi(g, kernel, nl)?;
            let lip = besov(&pf.sub(&pg)?, gamma) / ((1.0 + nf + ng) * (1.0 + sum_l1) * nd);
            let cf = compose_convolved(f, kernel, nl)?;
            let cg = compose_convolved(g, kernel, nl)?;
            let comp = besov(&cf.sub(&cg)?, gamma) / ((1.0 + sum_l1) * nd);
            Ok((growth, l1r, Some((lip, comp))))
        })
        .collect::<Result<Vec<_>>>()?;
    let skipped = rows.iter().filter(|r| r.2.is_none()).count();
    let fold = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
    Ok(PhiBoundsReport {
        gamma,
        c_fk: c_fk(nl, &kn),
        growth_ratio: fold(&mut rows.iter().map(|r| r.0)),
        l1_ratio: fold(&mut rows.iter().map(|r| r.1)),
        lipschitz_ratio: fold(&mut rows.iter().filter_map(|r| r.2.map(|p| p.0))),
        composition_ratio: fold(&mut rows.iter().filter_map(|r| r.2.map(|p| p.1))),
        pairs: rows.len(),
        skipped_pairs: skipped,
    })
}
