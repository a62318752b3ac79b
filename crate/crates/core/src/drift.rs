//! Random drifts of prescribed negative regularity, mollification, initial
//! densities and interaction kernels.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SfpeError};
use crate::field::{Grid, SpectralField, TimeField};
use crate::io;
use crate::rng::{pack_counter, CounterRng};

fn default_eps_reg() -> f64 {
    0.05
}

/// Time dependence of a sampled drift.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeProfile {
    #[default]
    Static,
    /// `a(t) = 1 + sin(2 pi t / T) / 2`
    SmoothModulated,
}

impl TimeProfile {
    pub fn factor(&self, t: f64, horizon: f64) -> f64 {
        match self {
            TimeProfile::Static => 1.0,
            TimeProfile::SmoothModulated => 1.0 + 0.5 * (std::f64::consts::TAU * t / horizon).sin(),
        }
    }
}

/// Recipe for a Gaussian random drift `b` with
/// `b_k ~ amplitude * N_C(0,1) * |xi_k|^{-decay}`, `decay = d/2 - beta + eps_reg`
/// unless overridden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    pub beta: f64,
    #[serde(default = "default_eps_reg")]
    pub eps_reg: f64,
    /// Overrides the decay exponent of the coefficient law.
    #[serde(default)]
    pub decay_exponent: Option<f64>,
    /// Zeroes every mode with `|xi|` above this value.
    #[serde(default)]
    pub band_limit: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub time_profile: TimeProfile,
    pub amplitude: f64,
}

impl DriftSpec {
    pub fn new(beta: f64, seed: u64, amplitude: f64) -> Self {
        Self {
            beta,
            eps_reg: default_eps_reg(),
            decay_exponent: None,
            band_limit: None,
            seed,
            time_profile: TimeProfile::Static,
            amplitude,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 0.5) {
            return Err(invalid("beta", format!("must lie in (0, 1/2), got {}", self.beta)));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(invalid("amplitude", format!("must be non-negative, got {}", self.amplitude)));
        }
        if !self.eps_reg.is_finite() {
            return Err(invalid("eps_reg", "must be finite"));
        }
        if let Some(b) = self.band_limit {
            if !(b > 0.0) {
                return Err(invalid("band_limit", format!("must be positive, got {b}")));
            }
        }
        Ok(())
    }

    pub fn decay(&self, dim: usize) -> f64 {
        self.decay_exponent
            .unwrap_or(dim as f64 / 2.0 - self.beta + self.eps_reg)
    }
}

fn canonical(k: [i64; 2]) -> bool {
    k[0] > 0 || (k[0] == 0 && k[1] > 0)
}

/// Real Gaussian field with `c_k = N_C(0,1) |xi_k|^{-decay}` on `0 < |xi| <= band`,
/// zero mean, zero Nyquist modes. Each coefficient depends only on
/// `(seed, k, time_index, component, stream)`, so the shared modes of two
/// resolutions coincide.
pub fn sample_with_decay(
    grid: &Grid,
    components: usize,
    decay: f64,
    band: Option<f64>,
    seed: u64,
    time_index: i64,
    stream: u64,
) -> SpectralField {
    let rng = CounterRng::new(seed);
    let mut f = SpectralField::zeros(*grid, components);
    for c in 0..components {
        let coeffs = f.component_mut(c);
        for i in 0..grid.points() {
            let k = grid.mode(i);
            if !canonical(k) || grid.is_nyquist(i) {
                continue;
            }
            let xi = grid.xi_norm_sq(i).sqrt();
            if band.is_some_and(|b| xi > b) {
                continue;
            }
            let Some(j) = grid.index_of([-k[0], -k[1]]) else {
                continue;
            };
            let [z1, z2] = rng.normals(pack_counter(&[k[0], k[1], time_index, c as i64]), stream);
            let z = Complex64::new(z1, z2) * (std::f64::consts::FRAC_1_SQRT_2 * xi.powf(-decay));
            coeffs[i] = z;
            coeffs[j] = z.conj();
        }
    }
    f
}

/// Random field of nominal regularity `reg` (law `|xi|^{-(d/2 + reg) - eps}`).
pub fn sample_regular_field(
    grid: &Grid,
    components: usize,
    reg: f64,
    eps: f64,
    seed: u64,
    time_index: i64,
    stream: u64,
) -> SpectralField {
    let decay = grid.dim() as f64 / 2.0 + reg + eps;
    sample_with_decay(grid, components, decay, None, seed, time_index, stream)
}

/// The spatial profile `b(0)` (before time modulation), `d` components.
pub fn sample_drift_profile(spec: &DriftSpec, grid: &Grid) -> Result<SpectralField> {
    spec.validate()?;
    let f = sample_with_decay(grid, grid.dim(), spec.decay(grid.dim()), spec.band_limit, spec.seed, 0, 0);
    Ok(f.scale(spec.amplitude))
}

/// Drift on the time grid `times`.
pub fn sample_drift(spec: &DriftSpec, grid: &Grid, times: &[f64]) -> Result<TimeField> {
    let profile = sample_drift_profile(spec, grid)?;
    let horizon = *times.last().ok_or_else(|| invalid("time_grid", "empty"))?;
    let snaps = times
        .iter()
        .map(|&t| match spec.time_profile {
            TimeProfile::Static => profile.clone(),
            p => profile.scale(p.factor(t, horizon)),
        })
        .collect();
    TimeField::new(times.to_vec(), snaps)
}

/// Copy of `spec` whose amplitude makes `sup_t ||b(t)||_{C^{-alpha}} = target`.
pub fn calibrate_amplitude(spec: &DriftSpec, grid: &Grid, times: &[f64], alpha: f64, target: f64) -> Result<DriftSpec> {
    let mut unit = spec.clone();
    unit.amplitude = 1.0;
    let b = sample_drift(&unit, grid, times)?;
    let norm = b
        .snapshots()
        .iter()
        .map(|s| crate::besov::besov(s, -alpha))
        .fold(0.0, f64::max);
    if !(norm > 0.0) {
        return Err(invalid("amplitude", "drift vanishes, nothing to calibrate"));
    }
    unit.amplitude = target / norm;
    Ok(unit)
}

/// `p_{1/n} * f`: per-mode multiplier `exp(-|xi|^2 / (2n))`.
pub fn mollify_field(f: &SpectralField, n: usize) -> Result<SpectralField> {
    if n == 0 {
        return Err(invalid("n", "mollification index must be positive"));
    }
    f.heat_propagate(1.0 / n as f64)
}

pub fn mollify(b: &TimeField, n: usize) -> Result<TimeField> {
    b.map(|_, s| mollify_field(s, n))
}

/// Gaussian bump used in initial densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: Vec<f64>,
    pub width: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDensitySpec {
    GaussianBump { center: Vec<f64>, width: f64 },
    Mixture { bumps: Vec<Bump> },
}

impl InitialDensitySpec {
    fn bumps(&self) -> Vec<Bump> {
        match self {
            InitialDensitySpec::GaussianBump { center, width } => vec![Bump {
                center: center.clone(),
                width: *width,
                weight: 1.0,
            }],
            InitialDensitySpec::Mixture { bumps } => bumps.clone(),
        }
    }
}

/// Coefficients of the periodised Gaussian `N(center, width^2 I)` with unit mass.
fn periodic_gaussian(grid: &Grid, center: &[f64], width: f64) -> Result<SpectralField> {
    if center.len() != grid.dim() {
        return Err(invalid("center", format!("needs {} coordinates", grid.dim())));
    }
    if !(width >= 8.0 * grid.dx()) {
        return Err(invalid(
            "width",
            format!(
                "{width} resolves fewer than 8 grid points per standard deviation (dx = {})",
                grid.dx()
            ),
        ));
    }
    if width > grid.length() / 4.0 {
        return Err(invalid("width", format!("{width} is not small against L = {}", grid.length())));
    }
    let inv_vol = 1.0 / grid.volume();
    let mut f = SpectralField::zeros(*grid, 1);
    for (i, z) in f.component_mut(0).iter_mut().enumerate() {
        if grid.is_nyquist(i) {
            continue;
        }
        let xi = grid.xi(i);
        let phase = -(xi[0] * center[0] + if grid.dim() == 2 { xi[1] * center[1] } else { 0.0 });
        *z = Complex64::from_polar(inv_vol * (-0.5 * width * width * grid.xi_norm_sq(i)).exp(), phase);
    }
    Ok(f)
}

/// Clamps negative grid values from truncation and restores unit mass.
fn clamp_normalise(f: SpectralField) -> SpectralField {
    let phys = f.to_physical();
    let max = phys.max();
    let mut out = if phys.min() < -1e-12 * max {
        let mut p = phys;
        p.values[0].iter_mut().for_each(|v| *v = v.max(0.0));
        let mut s = SpectralField::from_physical(&p);
        s.drop_nyquist();
        s
    } else {
        f
    };
    let mass = out.integral();
    out = out.scale(1.0 / mass);
    out.component_mut(0)[0] = Complex64::new(1.0 / out.grid().volume(), 0.0);
    out
}

pub fn make_initial_density(spec: &InitialDensitySpec, grid: &Grid) -> Result<SpectralField> {
    let bumps = spec.bumps();
    if bumps.is_empty() {
        return Err(invalid("bumps", "mixture needs at least one bump"));
    }
    let total: f64 = bumps.iter().map(|b| b.weight).sum();
    if bumps.iter().any(|b| !(b.weight >= 0.0)) || !(total > 0.0) {
        return Err(invalid("weight", "mixture weights must be non-negative with positive sum"));
    }
    let mut acc = SpectralField::zeros(*grid, 1);
    for b in &bumps {
        acc = acc.axpy(b.weight / total, &periodic_gaussian(grid, &b.center, b.width)?)?;
    }
    Ok(clamp_normalise(acc))
}

/// Periodised Gaussian probability kernel centred at the origin.
pub fn make_kernel(grid: &Grid, sigma: f64) -> Result<SpectralField> {
    let center = vec![0.0; grid.dim()];
    Ok(clamp_normalise(periodic_gaussian(grid, &center, sigma)?))
}

/// Path of the JSON sidecar that accompanies a saved drift.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes the drift as a binary time field plus its spec as a JSON sidecar.
pub fn save_drift(path: &Path, spec: &DriftSpec, b: &TimeField) -> Result<()> {
    io::save_time_field(path, b)?;
    std::fs::write(sidecar_path(path), serde_json::to_vec_pretty(spec)?)?;
    Ok(())
}

pub fn load_drift(path: &Path) -> Result<(DriftSpec, TimeField)> {
    let spec: DriftSpec = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
    let b = io::load_time_field(path)?;
    if b.components() != b.grid().dim() {
        return Err(SfpeError::ComponentMismatch {
            expected: b.grid().dim(),
            got: b.components(),
        });
    }
    Ok((spec, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::besov::{besov, block_sups, gaussian_regularity_estimate};
    use crate::field::convolve;
    use approx::assert_relative_eq;
    use std::f64::consts::{PI, TAU};

    fn torus_second_moment(f: &SpectralField) -> f64 {
        let g = f.grid();
        let p = f.to_physical();
        p.values[0]
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let mut x = i as f64 * g.dx();
                if x >= g.length() / 2.0 {
                    x -= g.length();
                }
                x * x * v
            })
            .sum::<f64>()
            * g.dx()
    }

    #[test]
    fn calibration_hits_target_norm() {
        let g = Grid::new(1, 256, TAU).unwrap();
        let times = TimeField::uniform_times(1.0, 4);
        let mut spec = DriftSpec::new(0.3, 8, 5.0);
        spec.time_profile = TimeProfile::SmoothModulated;
        let c = calibrate_amplitude(&spec, &g, &times, 0.25, 1.0).unwrap();
        let b = sample_drift(&c, &g, &times).unwrap();
        let n = b.snapshots().iter().map(|s| besov(s, -0.25)).fold(0.0, f64::max);
        assert_relative_eq!(n, 1.0, max_relative = 1e-12);
        assert!(calibrate_amplitude(&DriftSpec::new(0.3, 8, 0.0), &g, &times, 0.25, 1.0).is_ok());
    }

    #[test]
    fn zero_amplitude_and_determinism() {
        let g = Grid::new(1, 256, 16.0 * PI).unwrap();
        let times = TimeField::uniform_times(0.5, 4);
        let z = sample_drift(&DriftSpec::new(0.3, 1, 0.0), &g, &times).unwrap();
        assert!(z.snapshots().iter().all(|s| s.max_abs_coeff() == 0.0));
        let a = sample_drift(&DriftSpec::new(0.3, 9, 1.0), &g, &times).unwrap();
        let b = sample_drift(&DriftSpec::new(0.3, 9, 1.0), &g, &times).unwrap();
        assert_eq!(a, b);
        assert!(a.snapshot(0).imaginary_residue() < 1e-12);
        assert!(DriftSpec::new(0.6, 1, 1.0).validate().is_err());
        assert!(DriftSpec::new(0.3, 1, -1.0).validate().is_err());
    }

    #[test]
    fn measured_regularity_near_minus_beta() {
        let g = Grid::new(1, 1024, TAU).unwrap();
        for seed in [2024, 1, 2, 3, 4] {
            let b = sample_drift_profile(&DriftSpec::new(0.3, seed, 1.0), &g).unwrap();
            let est = gaussian_regularity_estimate(&b, -1);
            assert!((est + 0.3).abs() <= 0.15, "seed {seed}: estimate {est}");
        }
    }

    #[test]
    fn doubling_resolution_keeps_shared_levels() {
        let spec = DriftSpec::new(0.3, 77, 1.0);
        let g = Grid::new(1, 256, 16.0 * PI).unwrap();
        let a = block_sups(&sample_drift_profile(&spec, &g).unwrap());
        let b = block_sups(&sample_drift_profile(&spec, &g.with_n(512).unwrap()).unwrap());
        assert_eq!(b.len(), a.len() + 1);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-10 * x.max(1e-300), "{x} vs {y}");
        }
    }

    #[test]
    fn mollification_converges_and_commutes() {
        let g = Grid::new(1, 512, 16.0 * PI).unwrap();
        let times = TimeField::uniform_times(0.5, 2);
        let b = sample_drift(&DriftSpec::new(0.3, 5, 1.0), &g, &times).unwrap();
        let mut prev = f64::INFINITY;
        for n in [4, 16, 64, 256] {
            let bn = mollify(&b, n).unwrap();
            let d = besov(&bn.snapshot(0).sub(b.snapshot(0)).unwrap(), -0.4);
            assert!(d < prev);
            prev = d;
            // smooth: finite norm at positive regularity
            assert!(besov(bn.snapshot(0), 1.5).is_finite());
        }
        assert!(mollify(&b, 0).is_err());
        let s = b.snapshot(0);
        let lhs = mollify_field(&s.heat_propagate(0.1).unwrap(), 8).unwrap();
        let rhs = mollify_field(s, 8).unwrap().heat_propagate(0.1).unwrap();
        assert!(lhs.sub(&rhs).unwrap().max_abs_coeff() < 1e-12 * s.max_abs_coeff());

        let m = SpectralField::real_mode(Grid::new(1, 32, TAU).unwrap(), [3, 0], Complex64::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(mollify_field(&m, 4).unwrap().component(0)[3].re, (-9.0f64 / 8.0).exp(), epsilon = 1e-15);
    }

    #[test]
    fn densities_and_kernels() {
        let g = Grid::new(1, 1024, 16.0 * PI).unwrap();
        let v0 = make_initial_density(
            &InitialDensitySpec::GaussianBump { center: vec![20.0], width: 1.0 },
            &g,
        )
        .unwrap();
        assert_relative_eq!(v0.integral(), 1.0, epsilon = 1e-10);
        assert!(v0.to_physical().min() >= -1e-12);
        let mix = make_initial_density(
            &InitialDensitySpec::Mixture {
                bumps: vec![
                    Bump { center: vec![10.0], width: 1.0, weight: 0.5 },
                    Bump { center: vec![30.0], width: 2.0, weight: 0.5 },
                ],
            },
            &g,
        )
        .unwrap();
        assert_relative_eq!(mix.integral(), 1.0, epsilon = 1e-10);

        let sigma = 0.8;
        let k = make_kernel(&g, sigma).unwrap();
        assert_relative_eq!(torus_second_moment(&k), sigma * sigma, max_relative = 1e-8);
        let kk = convolve(&k, &k).unwrap();
        assert_relative_eq!(torus_second_moment(&kk).sqrt(), sigma * 2f64.sqrt(), max_relative = 1e-8);
        assert!(make_kernel(&g, 0.1).is_err());
    }

    #[test]
    fn sidecar_round_trip() {
        let dir = std::env::temp_dir().join(format!("sfpe-drift-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let g = Grid::new(1, 64, TAU).unwrap();
        let spec = DriftSpec::new(0.3, 3, 1.0);
        let b = sample_drift(&spec, &g, &TimeField::uniform_times(1.0, 3)).unwrap();
        let p = dir.join("b.sfpe");
        save_drift(&p, &spec, &b).unwrap();
        let (s2, b2) = load_drift(&p).unwrap();
        assert_eq!(s2, spec);
        assert_eq!(b2, b);
        std::fs::remove_dir_all(&dir).ok();
    }
}
