//! Periodic band-limited fields on the d-torus `[0, L)^d`.
//!
//! A [`SpectralField`] stores, per component, the coefficients `c_k` of
//! `f(x) = sum_k c_k exp(i xi_k . x)` with `xi_k = 2 pi k / L`, for
//! `k in [-N/2, N/2)^d`, laid out in FFT order (row-major in 2-D). With this
//! normalisation `c_0` is the spatial mean and `c_0 L^d` the integral.
//!
//! Nyquist modes (`k_a = -N/2` on any axis) carry no derivative and are dropped
//! by the dealiased products, so fields built by the solvers keep them at zero.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SfpeError};
use crate::fft;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Geometry of the periodic grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(SfpeError::UnsupportedDim(dim));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(SfpeError::NotPowerOfTwo(n));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(invalid("period_L", format!("must be positive, got {length}")));
        }
        Ok(Self { dim, n, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Modes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Number of grid points (and of coefficients per component).
    pub fn points(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Cell volume `dx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    /// Torus volume `L^d`.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Frequency spacing `2 pi / L`.
    pub fn xi_unit(&self) -> f64 {
        std::f64::consts::TAU / self.length
    }

    /// Same torus at a different resolution.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(self.dim, n, self.length)
    }

    #[inline]
    pub fn signed(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Signed wavenumber vector of a flat coefficient index (second entry is 0 in 1-D).
    #[inline]
    pub fn mode(&self, flat: usize) -> [i64; 2] {
        match self.dim {
            1 => [self.signed(flat), 0],
            _ => [self.signed(flat / self.n), self.signed(flat % self.n)],
        }
    }

    /// Flat index of a wavenumber vector, `None` when it is not resolved.
    pub fn index_of(&self, k: [i64; 2]) -> Option<usize> {
        let h = (self.n / 2) as i64;
        let ok = |v: i64| (-h..h).contains(&v);
        match self.dim {
            1 => ok(k[0]).then(|| k[0].rem_euclid(self.n as i64) as usize),
            _ => (ok(k[0]) && ok(k[1])).then(|| {
                k[0].rem_euclid(self.n as i64) as usize * self.n
                    + k[1].rem_euclid(self.n as i64) as usize
            }),
        }
    }

    #[inline]
    pub fn is_nyquist(&self, flat: usize) -> bool {
        let h = -((self.n / 2) as i64);
        let k = self.mode(flat);
        k[0] == h || (self.dim == 2 && k[1] == h)
    }

    #[inline]
    pub fn xi(&self, flat: usize) -> [f64; 2] {
        let k = self.mode(flat);
        let u = self.xi_unit();
        [k[0] as f64 * u, k[1] as f64 * u]
    }

    #[inline]
    pub fn xi_norm_sq(&self, flat: usize) -> f64 {
        let x = self.xi(flat);
        x[0] * x[0] + x[1] * x[1]
    }

    /// Physical coordinates of a flat grid index.
    #[inline]
    pub fn position(&self, flat: usize) -> [f64; 2] {
        let dx = self.dx();
        match self.dim {
            1 => [flat as f64 * dx, 0.0],
            _ => [(flat / self.n) as f64 * dx, (flat % self.n) as f64 * dx],
        }
    }
}

/// Grid samples of a (possibly vector-valued) real field.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField {
    pub grid: Grid,
    pub values: Vec<Vec<f64>>,
}

impl PhysicalField {
    pub fn new(grid: Grid, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| v.len() != grid.points()) {
            return Err(SfpeError::ShapeMismatch(format!(
                "expected components of {} samples",
                grid.points()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn scalar(grid: Grid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, vec![values])
    }

    /// Max of |value| over all components and grid points.
    pub fn sup(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|c| c.iter())
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|c| c.iter())
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// Rectangle-rule integral of the first component (spectrally exact for
    /// band-limited integrands).
    pub fn integral(&self) -> f64 {
        self.values[0].iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// L1 norm of the first component by grid quadrature.
    pub fn l1_norm(&self) -> f64 {
        self.values[0].iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }
}

/// Band-limited field stored by its Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    comps: Vec<Vec<Complex64>>,
}

impl SpectralField {
    pub fn zeros(grid: Grid, components: usize) -> Self {
        Self {
            grid,
            comps: vec![vec![ZERO; grid.points()]; components.max(1)],
        }
    }

    pub fn from_coeffs(grid: Grid, comps: Vec<Vec<Complex64>>) -> Result<Self> {
        if comps.is_empty() || comps.iter().any(|c| c.len() != grid.points()) {
            return Err(SfpeError::ShapeMismatch(format!(
                "expected components of {} coefficients",
                grid.points()
            )));
        }
        Ok(Self { grid, comps })
    }

    /// Scalar field `f(x) = c_0` everywhere.
    pub fn constant(grid: Grid, value: f64) -> Self {
        let mut f = Self::zeros(grid, 1);
        f.comps[0][0] = Complex64::new(value, 0.0);
        f
    }

    /// Real scalar field `a e^{i xi_k x} + conj(a) e^{-i xi_k x}`.
    pub fn real_mode(grid: Grid, k: [i64; 2], amplitude: Complex64) -> Result<Self> {
        let mut f = Self::zeros(grid, 1);
        let i = grid
            .index_of(k)
            .ok_or_else(|| invalid("k", format!("mode {k:?} not resolved")))?;
        let j = grid
            .index_of([-k[0], -k[1]])
            .ok_or_else(|| invalid("k", format!("mode {k:?} has no resolved partner")))?;
        if i == j {
            f.comps[0][i] = Complex64::new(amplitude.re, 0.0);
        } else {
            f.comps[0][i] = amplitude;
            f.comps[0][j] = amplitude.conj();
        }
        Ok(f)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.comps.len()
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.comps[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.comps[c]
    }

    pub fn into_components(self) -> Vec<Vec<Complex64>> {
        self.comps
    }

    /// Component `c` as a standalone scalar field.
    pub fn scalar_component(&self, c: usize) -> SpectralField {
        SpectralField {
            grid: self.grid,
            comps: vec![self.comps[c].clone()],
        }
    }

    pub fn from_scalars(parts: Vec<SpectralField>) -> Result<Self> {
        let grid = *parts
            .first()
            .ok_or_else(|| SfpeError::ShapeMismatch("no components".into()))?
            .grid();
        let mut comps = Vec::with_capacity(parts.len());
        for p in parts {
            if p.grid != grid {
                return Err(SfpeError::ShapeMismatch("component grids differ".into()));
            }
            comps.extend(p.comps);
        }
        Ok(Self { grid, comps })
    }

    pub fn check_same_shape(&self, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid {
            return Err(SfpeError::ShapeMismatch(format!(
                "grid {:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        if self.comps.len() != other.comps.len() {
            return Err(SfpeError::ComponentMismatch {
                expected: self.comps.len(),
                got: other.comps.len(),
            });
        }
        Ok(())
    }

    fn require_scalar(&self) -> Result<()> {
        if self.comps.len() != 1 {
            return Err(SfpeError::ComponentMismatch {
                expected: 1,
                got: self.comps.len(),
            });
        }
        Ok(())
    }

    /// Inverse transform; returns the real parts.
    pub fn to_physical(&self) -> PhysicalField {
        let values = self
            .comps
            .iter()
            .map(|c| {
                let mut buf = c.clone();
                fft::inverse(self.grid.dim, self.grid.n, &mut buf);
                buf.into_iter().map(|z| z.re).collect()
            })
            .collect();
        PhysicalField {
            grid: self.grid,
            values,
        }
    }

    /// Largest imaginary part produced by the inverse transform, relative to
    /// the largest modulus. Near zero for fields representing real functions.
    pub fn imaginary_residue(&self) -> f64 {
        let mut max_im = 0.0f64;
        let mut max_abs = 0.0f64;
        for c in &self.comps {
            let mut buf = c.clone();
            fft::inverse(self.grid.dim, self.grid.n, &mut buf);
            for z in buf {
                max_im = max_im.max(z.im.abs());
                max_abs = max_abs.max(z.norm());
            }
        }
        if max_abs == 0.0 {
            0.0
        } else {
            max_im / max_abs
        }
    }

    pub fn from_physical(p: &PhysicalField) -> SpectralField {
        let scale = 1.0 / p.grid.points() as f64;
        let comps = p
            .values
            .iter()
            .map(|v| {
                let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                fft::forward(p.grid.dim, p.grid.n, &mut buf);
                buf.iter_mut().for_each(|z| *z *= scale);
                buf
            })
            .collect();
        SpectralField {
            grid: p.grid,
            comps,
        }
    }

    /// Multiplies every coefficient by `m(flat_index)`.
    pub fn map_modes(&self, m: impl Fn(usize) -> Complex64) -> SpectralField {
        let comps = self
            .comps
            .iter()
            .map(|c| c.iter().enumerate().map(|(i, z)| z * m(i)).collect())
            .collect();
        SpectralField {
            grid: self.grid,
            comps,
        }
    }

    /// Heat semigroup `P_t` generated by `Δ/2`: multiplier `exp(-t |xi|^2 / 2)`.
    pub fn heat_propagate(&self, t: f64) -> Result<SpectralField> {
        if !(t >= 0.0) {
            return Err(invalid("t", format!("heat time must be non-negative, got {t}")));
        }
        let g = self.grid;
        Ok(self.map_modes(|i| Complex64::new((-0.5 * t * g.xi_norm_sq(i)).exp(), 0.0)))
    }

    pub fn laplacian(&self) -> SpectralField {
        let g = self.grid;
        self.map_modes(|i| Complex64::new(-g.xi_norm_sq(i), 0.0))
    }

    /// Scalar to d-vector, multiplier `i xi_a` (zero on Nyquist modes).
    pub fn gradient(&self) -> Result<SpectralField> {
        self.require_scalar()?;
        let g = self.grid;
        let comps = (0..g.dim)
            .map(|a| {
                self.comps[0]
                    .iter()
                    .enumerate()
                    .map(|(i, z)| {
                        if g.is_nyquist(i) {
                            ZERO
                        } else {
                            z * Complex64::new(0.0, g.xi(i)[a])
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(SpectralField { grid: g, comps })
    }

    /// d-vector to scalar, `sum_a i xi_a f_a` (zero on Nyquist modes).
    pub fn divergence(&self) -> Result<SpectralField> {
        let g = self.grid;
        if self.comps.len() != g.dim {
            return Err(SfpeError::ComponentMismatch {
                expected: g.dim,
                got: self.comps.len(),
            });
        }
        let mut out = vec![ZERO; g.points()];
        for (a, comp) in self.comps.iter().enumerate() {
            for (i, z) in comp.iter().enumerate() {
                if !g.is_nyquist(i) {
                    out[i] += z * Complex64::new(0.0, g.xi(i)[a]);
                }
            }
        }
        Ok(SpectralField {
            grid: g,
            comps: vec![out],
        })
    }

    /// Mean of component `c` (the zero coefficient).
    pub fn mean(&self, c: usize) -> f64 {
        self.comps[c][0].re
    }

    /// Integral of the first component over the torus.
    pub fn integral(&self) -> f64 {
        self.comps[0][0].re * self.grid.volume()
    }

    /// Parseval L2 norm over all components.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self
            .comps
            .iter()
            .flat_map(|c| c.iter())
            .map(|z| z.norm_sqr())
            .sum();
        (s * self.grid.volume()).sqrt()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, z| m.max(z.norm()))
    }

    pub fn scale(&self, a: f64) -> SpectralField {
        self.map_modes(|_| Complex64::new(a, 0.0))
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &SpectralField) -> Result<SpectralField> {
        self.check_same_shape(other)?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q * a).collect())
            .collect();
        Ok(SpectralField {
            grid: self.grid,
            comps,
        })
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.axpy(-1.0, other)
    }

    /// Replaces `c_k` by `(c_k + conj(c_{-k})) / 2`, the projection onto real fields.
    pub fn hermitian_symmetrize(&mut self) {
        let g = self.grid;
        for comp in &mut self.comps {
            let src = comp.clone();
            for (i, z) in comp.iter_mut().enumerate() {
                let k = g.mode(i);
                *z = match g.index_of([-k[0], -k[1]]) {
                    Some(j) => 0.5 * (src[i] + src[j].conj()),
                    // Nyquist partner is itself modulo N; keep only the real part.
                    None => Complex64::new(src[i].re, 0.0),
                };
            }
        }
    }

    /// Zeroes every Nyquist mode.
    pub fn drop_nyquist(&mut self) {
        let g = self.grid;
        for comp in &mut self.comps {
            for (i, z) in comp.iter_mut().enumerate() {
                if g.is_nyquist(i) {
                    *z = ZERO;
                }
            }
        }
    }

    /// Same function on a grid with `n` modes per axis (zero-padding or truncation;
    /// Nyquist modes are dropped).
    pub fn resample(&self, n: usize) -> Result<SpectralField> {
        let target = self.grid.with_n(n)?;
        let mut out = SpectralField::zeros(target, self.comps.len());
        for (src, dst) in self.comps.iter().zip(out.comps.iter_mut()) {
            for (i, z) in src.iter().enumerate() {
                if self.grid.is_nyquist(i) {
                    continue;
                }
                if let Some(j) = target.index_of(self.grid.mode(i)) {
                    if !target.is_nyquist(j) {
                        dst[j] = *z;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Convolution on the torus, `(K * f)(x) = ∫ K(x - y) f(y) dy`, for a probability
/// density `K`. In coefficients: `(K*f)_k = L^d K_k f_k`.
pub fn convolve(kernel: &SpectralField, f: &SpectralField) -> Result<SpectralField> {
    check_probability_kernel(kernel)?;
    if kernel.grid != f.grid {
        return Err(SfpeError::ShapeMismatch("kernel and field grids differ".into()));
    }
    let vol = kernel.grid.volume();
    let k = &kernel.comps[0];
    let comps = f
        .comps
        .iter()
        .map(|c| c.iter().zip(k).map(|(z, kk)| z * kk * vol).collect())
        .collect();
    Ok(SpectralField {
        grid: f.grid,
        comps,
    })
}

/// Rejects kernels that are not (numerically) nonnegative with unit mass.
pub fn check_probability_kernel(kernel: &SpectralField) -> Result<()> {
    kernel.require_scalar()?;
    let integral = kernel.integral();
    let phys = kernel.to_physical();
    let min = phys.min();
    let max = phys.max();
    if (integral - 1.0).abs() > 1e-8 || min < -1e-10 * max.abs().max(1e-300) {
        return Err(SfpeError::Normalization { integral, min });
    }
    Ok(())
}

fn pad_into(grid: &Grid, src: &[Complex64], m: usize, dst: &mut [Complex64]) {
    let pg = Grid {
        dim: grid.dim,
        n: m,
        length: grid.length,
    };
    dst.iter_mut().for_each(|z| *z = ZERO);
    for (i, z) in src.iter().enumerate() {
        if grid.is_nyquist(i) {
            continue;
        }
        let j = pg.index_of(grid.mode(i)).expect("padded grid resolves all modes");
        dst[j] = *z;
    }
}

/// Evaluates `f` pointwise on the 3/2-padded grid from the given scalar
/// coefficient arrays and projects the result back onto the `|k| < N/2` modes.
///
/// For polynomial-quadratic `f` this is the exact truncated product.
pub fn dealiased_pointwise<F>(grid: &Grid, inputs: &[&[Complex64]], f: F) -> Vec<Complex64>
where
    F: Fn(&[f64]) -> f64,
{
    let m = grid.n * 3 / 2;
    let pts = m.pow(grid.dim as u32);
    let mut phys: Vec<Vec<f64>> = Vec::with_capacity(inputs.len());
    let mut buf = vec![ZERO; pts];
    for src in inputs {
        pad_into(grid, src, m, &mut buf);
        fft::inverse(grid.dim, m, &mut buf);
        phys.push(buf.iter().map(|z| z.re).collect());
    }
    let mut args = vec![0.0; inputs.len()];
    for (j, out) in buf.iter_mut().enumerate() {
        for (a, p) in args.iter_mut().zip(&phys) {
            *a = p[j];
        }
        *out = Complex64::new(f(&args), 0.0);
    }
    fft::forward(grid.dim, m, &mut buf);
    let scale = 1.0 / pts as f64;
    let pg = Grid {
        dim: grid.dim,
        n: m,
        length: grid.length,
    };
    (0..grid.points())
        .map(|i| {
            if grid.is_nyquist(i) {
                ZERO
            } else {
                buf[pg.index_of(grid.mode(i)).expect("resolved")] * scale
            }
        })
        .collect()
}

/// Samples of a scalar coefficient array on the `m`-point padded grid.
pub fn padded_values(grid: &Grid, coeffs: &[Complex64], m: usize) -> Vec<f64> {
    let mut buf = vec![ZERO; m.pow(grid.dim as u32)];
    pad_into(grid, coeffs, m, &mut buf);
    fft::inverse(grid.dim, m, &mut buf);
    buf.into_iter().map(|z| z.re).collect()
}

/// Time-indexed sequence of fields sharing one grid and component count.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeField {
    times: Vec<f64>,
    snapshots: Vec<SpectralField>,
}

impl TimeField {
    pub fn new(times: Vec<f64>, snapshots: Vec<SpectralField>) -> Result<Self> {
        if times.is_empty() || times.len() != snapshots.len() {
            return Err(SfpeError::ShapeMismatch(format!(
                "{} times for {} snapshots",
                times.len(),
                snapshots.len()
            )));
        }
        if times[0] != 0.0 {
            return Err(invalid("time_grid", "must start at 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("time_grid", "must be strictly increasing"));
        }
        let first = &snapshots[0];
        for s in &snapshots[1..] {
            first.check_same_shape(s)?;
        }
        Ok(Self { times, snapshots })
    }

    /// Uniform grid `t_i = i T / steps`, `i = 0..=steps`; the last node is `T` exactly.
    pub fn uniform_times(horizon: f64, steps: usize) -> Vec<f64> {
        let steps = steps.max(1);
        (0..=steps)
            .map(|i| {
                if i == steps {
                    horizon
                } else {
                    horizon * i as f64 / steps as f64
                }
            })
            .collect()
    }

    /// The same field at every node.
    pub fn constant(times: Vec<f64>, field: SpectralField) -> Result<Self> {
        let snapshots = vec![field; times.len()];
        Self::new(times, snapshots)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[SpectralField] {
        &self.snapshots
    }

    pub fn snapshot(&self, i: usize) -> &SpectralField {
        &self.snapshots[i]
    }

    pub fn into_snapshots(self) -> Vec<SpectralField> {
        self.snapshots
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn grid(&self) -> &Grid {
        self.snapshots[0].grid()
    }

    pub fn components(&self) -> usize {
        self.snapshots[0].components()
    }

    pub fn check_same_shape(&self, other: &TimeField) -> Result<()> {
        if self.times != other.times {
            return Err(SfpeError::ShapeMismatch("time grids differ".into()));
        }
        self.snapshots[0].check_same_shape(&other.snapshots[0])
    }

    pub fn map<F>(&self, f: F) -> Result<TimeField>
    where
        F: Fn(usize, &SpectralField) -> Result<SpectralField>,
    {
        let snaps = self
            .snapshots
            .iter()
            .enumerate()
            .map(|(i, s)| f(i, s))
            .collect::<Result<Vec<_>>>()?;
        TimeField::new(self.times.clone(), snaps)
    }

    pub fn add(&self, other: &TimeField) -> Result<TimeField> {
        self.check_same_shape(other)?;
        self.map(|i, s| s.add(&other.snapshots[i]))
    }

    pub fn sub(&self, other: &TimeField) -> Result<TimeField> {
        self.check_same_shape(other)?;
        self.map(|i, s| s.sub(&other.snapshots[i]))
    }

    pub fn scale(&self, a: f64) -> TimeField {
        TimeField {
            times: self.times.clone(),
            snapshots: self.snapshots.iter().map(|s| s.scale(a)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use approx::assert_relative_eq;

    fn grid1(n: usize) -> Grid {
        Grid::new(1, n, std::f64::consts::TAU).unwrap()
    }

    fn random_real(grid: Grid, seed: u64) -> SpectralField {
        let rng = CounterRng::new(seed);
        let mut f = SpectralField::zeros(grid, 1);
        for (i, z) in f.component_mut(0).iter_mut().enumerate() {
            let [a, b] = rng.normals(i as u64, 0);
            *z = Complex64::new(a, b);
        }
        f.hermitian_symmetrize();
        f.drop_nyquist();
        f
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(Grid::new(1, 48, 1.0), Err(SfpeError::NotPowerOfTwo(48))));
        assert!(Grid::new(3, 16, 1.0).is_err());
        assert!(Grid::new(1, 16, -1.0).is_err());
    }

    #[test]
    fn single_mode_samples_cosine_and_sine() {
        let g = grid1(16);
        let f = SpectralField::real_mode(g, [1, 0], Complex64::new(0.5, 0.0)).unwrap();
        let p = f.to_physical();
        for (j, v) in p.values[0].iter().enumerate() {
            assert_relative_eq!(*v, (j as f64 * g.dx()).cos(), epsilon = 1e-14);
        }
        let s = SpectralField::real_mode(g, [1, 0], Complex64::new(0.0, -0.5)).unwrap();
        for (j, v) in s.to_physical().values[0].iter().enumerate() {
            assert_relative_eq!(*v, (j as f64 * g.dx()).sin(), epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_field_is_zero_grid() {
        let p = SpectralField::zeros(grid1(8), 1).to_physical();
        assert!(p.values[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn round_trip_is_identity() {
        for g in [grid1(64), Grid::new(2, 16, 3.0).unwrap()] {
            let f = random_real(g, 11);
            let back = SpectralField::from_physical(&f.to_physical());
            let err = back.sub(&f).unwrap().max_abs_coeff();
            assert!(err <= 1e-12 * f.max_abs_coeff(), "err {err}");
            assert!(f.imaginary_residue() < 1e-12);
        }
    }

    #[test]
    fn heat_multiplier_and_semigroup() {
        let g = grid1(16);
        let f = SpectralField::real_mode(g, [1, 0], Complex64::new(1.0, 0.0)).unwrap();
        let h = f.heat_propagate(2.0).unwrap();
        assert_relative_eq!(h.component(0)[1].re, (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(f.heat_propagate(0.0).unwrap(), f);
        assert!(f.heat_propagate(-1e-3).is_err());

        let r = random_real(grid1(64), 5);
        let two = r.heat_propagate(0.3).unwrap().heat_propagate(0.4).unwrap();
        let one = r.heat_propagate(0.7).unwrap();
        assert!(two.sub(&one).unwrap().max_abs_coeff() < 1e-12);
        assert_eq!(one.component(0)[0], r.component(0)[0]);
    }

    #[test]
    fn gradient_of_sine_is_cosine() {
        let g = grid1(32);
        let sin = SpectralField::real_mode(g, [1, 0], Complex64::new(0.0, -0.5)).unwrap();
        let d = sin.gradient().unwrap();
        for (j, v) in d.to_physical().values[0].iter().enumerate() {
            assert_relative_eq!(*v, (j as f64 * g.dx()).cos(), epsilon = 1e-13);
        }
        let c = SpectralField::constant(g, 3.0).gradient().unwrap();
        assert_eq!(c.max_abs_coeff(), 0.0);
    }

    #[test]
    fn divergence_of_gradient_is_laplacian() {
        for g in [grid1(64), Grid::new(2, 16, 5.0).unwrap()] {
            let f = random_real(g, 2);
            let lhs = f.gradient().unwrap().divergence().unwrap();
            let err = lhs.sub(&f.laplacian()).unwrap().max_abs_coeff();
            assert!(err < 1e-12 * f.laplacian().max_abs_coeff());
        }
        let g = grid1(16);
        let f = SpectralField::zeros(g, 2);
        assert!(matches!(
            f.divergence(),
            Err(SfpeError::ComponentMismatch { .. })
        ));
    }

    #[test]
    fn parseval_consistency() {
        let g = Grid::new(1, 128, 7.0).unwrap();
        let f = random_real(g, 9);
        let p = f.to_physical();
        let phys_l2 = (p.values[0].iter().map(|v| v * v).sum::<f64>() * g.cell_volume()).sqrt();
        assert_relative_eq!(phys_l2, f.l2_norm(), max_relative = 1e-10);
    }

    #[test]
    fn dealiased_product_of_modes() {
        let g = grid1(32);
        let a = SpectralField::real_mode(g, [3, 0], Complex64::new(0.5, 0.0)).unwrap();
        let b = SpectralField::real_mode(g, [5, 0], Complex64::new(0.5, 0.0)).unwrap();
        let p = dealiased_pointwise(&g, &[a.component(0), b.component(0)], |v| v[0] * v[1]);
        // cos 3x cos 5x = (cos 2x + cos 8x) / 2
        for (i, z) in p.iter().enumerate() {
            let k = g.mode(i)[0].abs();
            let want = if k == 2 || k == 8 { 0.25 } else { 0.0 };
            assert!((z - Complex64::new(want, 0.0)).norm() < 1e-14, "k={k} {z}");
        }
    }

    #[test]
    fn resample_preserves_shared_modes() {
        let g = grid1(32);
        let f = random_real(g, 4);
        let up = f.resample(128).unwrap();
        let down = up.resample(32).unwrap();
        assert!(down.sub(&f).unwrap().max_abs_coeff() < 1e-15);
    }

    #[test]
    fn time_field_validation() {
        let g = grid1(8);
        let f = SpectralField::zeros(g, 1);
        assert!(TimeField::new(vec![0.1, 0.2], vec![f.clone(), f.clone()]).is_err());
        assert!(TimeField::new(vec![0.0, 0.0], vec![f.clone(), f.clone()]).is_err());
        let t = TimeField::uniform_times(0.5, 7);
        assert_eq!(*t.last().unwrap(), 0.5);
        assert!(TimeField::constant(t, f).is_ok());
    }
}
