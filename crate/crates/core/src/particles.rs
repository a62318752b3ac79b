//! Interacting particles for the mollified McKean SDE
//! `dX = F((K*mu_N)(X)) b_n(t, X) dt + dW` on the torus, kernel density
//! estimates of their marginals, and a Feynman-Kac Monte Carlo estimator for
//! the linear equation `d eta/dt = Δeta/2 - div(eta h)`.
//!
//! Every random number is drawn from the counter generator keyed by
//! `(particle, step)`, and every reduction runs over fixed-size chunks summed
//! in chunk order, so results do not depend on the thread count.

use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::mollify;
use crate::error::{invalid, Result, SfpeError};
use crate::field::{check_probability_kernel, convolve, padded_values, Grid, PhysicalField, SpectralField, TimeField};
use crate::interp::{Interpolator, TimeInterpolator};
use crate::nonlinearity::NonlinearitySpec;
use crate::rng::CounterRng;

const CHUNK: usize = 8192;
const CDF_TABLE: usize = 4096;
/// Counter word reserved for initial sampling; step counters stay below it.
const INIT_TAG: u64 = 1 << 63;

fn default_substeps() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleConfig {
    pub particles: usize,
    /// Euler steps; the step is `h = horizon / steps`.
    pub steps: usize,
    pub horizon: f64,
    /// Heat mollification level `n` of the drift; 0 uses the drift as given.
    pub mollification: usize,
    pub seed: u64,
    /// Record an ensemble every this many steps (0: final only).
    #[serde(default)]
    pub record_every: usize,
    /// Each Brownian increment is the sum of this many counter-keyed normals,
    /// so runs with steps `h` and `h / r` share their Brownian paths.
    #[serde(default = "default_substeps")]
    pub noise_substeps: usize,
}

impl ParticleConfig {
    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(invalid("particles", "must be positive"));
        }
        if self.steps == 0 {
            return Err(invalid("steps", "must be positive"));
        }
        if !(self.horizon > 0.0) {
            return Err(invalid("horizon", "must be positive"));
        }
        if self.noise_substeps == 0 {
            return Err(invalid("noise_substeps", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    pub grid: Grid,
    /// Row-major `N x d` positions in `[0, L)^d`.
    pub positions: Vec<f64>,
    pub time: f64,
    pub step: usize,
    pub time_step_h: f64,
    pub mollification_n: usize,
    pub seed: u64,
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.positions.len() / self.grid.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.positions[i * d..(i + 1) * d]
    }

    /// Ensemble at time 0 with the given positions.
    pub fn from_positions(grid: Grid, positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() || positions.len() % grid.dim() != 0 {
            return Err(SfpeError::EmptyEnsemble);
        }
        Ok(Self {
            grid,
            positions: positions.into_iter().map(|x| wrap(x, grid.length())).collect(),
            time: 0.0,
            step: 0,
            time_step_h: 0.0,
            mollification_n: 0,
            seed: 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub ensembles: Vec<ParticleEnsemble>,
    /// `h ||grad b_n||_inf`
    pub lipschitz_product: f64,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn last(&self) -> &ParticleEnsemble {
        self.ensembles.last().expect("trajectory holds the final ensemble")
    }
}

#[inline]
fn wrap(x: f64, l: f64) -> f64 {
    let y = x.rem_euclid(l);
    if y >= l {
        0.0
    } else {
        y
    }
}

/// Cloud-in-cell density on the grid: nonnegative, integral 1.
pub fn deposit(ensemble: &ParticleEnsemble) -> PhysicalField {
    let grid = ensemble.grid;
    let (d, n, dx) = (grid.dim(), grid.n(), grid.dx());
    let np = ensemble.len();
    let unit = 1.0 / (np as f64 * grid.cell_volume());
    let partial: Vec<Vec<f64>> = ensemble
        .positions
        .par_chunks(CHUNK * d)
        .map(|chunk| {
            let mut acc = vec![0.0; grid.points()];
            for p in chunk.chunks_exact(d) {
                let sx = p[0] / dx;
                let i = sx.floor();
                let fx = sx - i;
                let i0 = (i as usize) % n;
                let i1 = (i0 + 1) % n;
                if d == 1 {
                    acc[i0] += (1.0 - fx) * unit;
                    acc[i1] += fx * unit;
                } else {
                    let sy = p[1] / dx;
                    let j = sy.floor();
                    let fy = sy - j;
                    let j0 = (j as usize) % n;
                    let j1 = (j0 + 1) % n;
                    acc[i0 * n + j0] += (1.0 - fx) * (1.0 - fy) * unit;
                    acc[i0 * n + j1] += (1.0 - fx) * fy * unit;
                    acc[i1 * n + j0] += fx * (1.0 - fy) * unit;
                    acc[i1 * n + j1] += fx * fy * unit;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; grid.points()];
    for a in &partial {
        for (t, v) in total.iter_mut().zip(a) {
            *t += v;
        }
    }
    PhysicalField::scalar(grid, total).expect("deposit has one value per grid point")
}

/// `K * mu_N`, with the empirical measure deposited by cloud-in-cell.
pub fn empirical_convolution(kernel: &SpectralField, ensemble: &ParticleEnsemble) -> Result<SpectralField> {
    check_probability_kernel(kernel)?;
    if kernel.grid() != &ensemble.grid {
        return Err(SfpeError::ShapeMismatch("kernel and ensemble grids differ".into()));
    }
    convolve(kernel, &SpectralField::from_physical(&deposit(ensemble)))
}

struct InverseCdf {
    cdf: Vec<f64>,
    step: f64,
}

impl InverseCdf {
    fn new(v0: &SpectralField) -> Self {
        let grid = v0.grid();
        let m = CDF_TABLE.max(grid.n());
        let vals: Vec<f64> = padded_values(grid, v0.component(0), m).into_iter().map(|v| v.max(0.0)).collect();
        let step = grid.length() / m as f64;
        let mut cdf = Vec::with_capacity(m + 1);
        cdf.push(0.0);
        for i in 0..m {
            let next = vals[(i + 1) % m];
            cdf.push(cdf[i] + 0.5 * (vals[i] + next) * step);
        }
        let total = cdf[m];
        for c in cdf.iter_mut() {
            *c /= total;
        }
        Self { cdf, step }
    }

    fn sample(&self, u: f64) -> f64 {
        let j = (self.cdf.partition_point(|c| *c < u)).clamp(1, self.cdf.len() - 1) - 1;
        let (a, b) = (self.cdf[j], self.cdf[j + 1]);
        let frac = if b > a { ((u - a) / (b - a)).clamp(0.0, 1.0) } else { 0.5 };
        (j as f64 + frac) * self.step
    }
}

/// `n` i.i.d. draws from the density `v0`: inverse CDF in 1-D, rejection in 2-D.
pub fn sample_initial(v0: &SpectralField, n: usize, seed: u64) -> Result<ParticleEnsemble> {
    let grid = *v0.grid();
    let rng = CounterRng::new(seed);
    let l = grid.length();
    let positions: Vec<f64> = if grid.dim() == 1 {
        let table = InverseCdf::new(v0);
        (0..n as u64)
            .into_par_iter()
            .map(|p| wrap(table.sample(rng.uniforms(p, INIT_TAG)[0]), l))
            .collect()
    } else {
        let it = Interpolator::new(v0);
        let bound = 1.05 * it.sup(0);
        let pts: Vec<Result<[f64; 2]>> = (0..n as u64)
            .into_par_iter()
            .map(|p| {
                for attempt in 0..100_000u64 {
                    let xy = rng.uniforms(p, INIT_TAG | (attempt << 1));
                    let acc = rng.uniforms(p, INIT_TAG | (attempt << 1) | 1)[0];
                    let x = [xy[0] * l, xy[1] * l];
                    if acc * bound <= it.eval(0, &x) {
                        return Ok([wrap(x[0], l), wrap(x[1], l)]);
                    }
                }
                Err(invalid("v0", "rejection sampling made no progress"))
            })
            .collect();
        let mut flat = Vec::with_capacity(2 * n);
        for p in pts {
            flat.extend_from_slice(&p?);
        }
        flat
    };
    ParticleEnsemble::from_positions(grid, positions)
}

fn gradient_sup(b: &TimeField) -> Result<f64> {
    let mut sup = 0.0f64;
    for s in b.snapshots() {
        for c in 0..s.components() {
            let g = s.scalar_component(c).gradient()?;
            sup = sup.max(g.to_physical().sup());
        }
    }
    Ok(sup)
}

/// Euler-Maruyama for the particle system with drift `F((K*mu_N)(X)) b_n(t, X)`.
pub fn simulate_mckean(
    b: &TimeField,
    kernel: &SpectralField,
    nl: &NonlinearitySpec,
    v0: &SpectralField,
    cfg: &ParticleConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    nl.validate()?;
    check_probability_kernel(kernel)?;
    let grid = *v0.grid();
    if b.grid() != &grid || kernel.grid() != &grid {
        return Err(SfpeError::ShapeMismatch("drift, kernel and v0 grids differ".into()));
    }
    if b.components() != grid.dim() {
        return Err(SfpeError::ComponentMismatch {
            expected: grid.dim(),
            got: b.components(),
        });
    }
    if b.horizon() < cfg.horizon * (1.0 - 1e-12) {
        return Err(invalid("horizon", format!("drift ends at {} before {}", b.horizon(), cfg.horizon)));
    }
    let bn = if cfg.mollification > 0 {
        mollify(b, cfg.mollification)?
    } else {
        b.clone()
    };
    let h = cfg.step();
    let lip = h * gradient_sup(&bn)?;
    let mut warnings = Vec::new();
    if lip > 0.5 {
        let msg = format!("h ||grad b_n||_inf = {lip:.3} > 0.5: the step does not resolve the drift");
        warn!("{msg}");
        warnings.push(msg);
    }
    let drift = TimeInterpolator::new(bn.times(), bn.snapshots());
    let (d, l) = (grid.dim(), grid.length());
    let rng = CounterRng::new(cfg.seed);
    let r = cfg.noise_substeps as u64;
    let sub_sd = (h / r as f64).sqrt();
    let constant_f = nl.constant_value();

    let mut ens = sample_initial(v0, cfg.particles, cfg.seed)?;
    ens.time_step_h = h;
    ens.mollification_n = cfg.mollification;
    ens.seed = cfg.seed;
    let mut out = Vec::new();
    if cfg.record_every > 0 {
        out.push(ens.clone());
    }
    for step in 0..cfg.steps {
        let t = step as f64 * h;
        let conv = match constant_f {
            Some(_) => None,
            None => Some(Interpolator::new(&empirical_convolution(kernel, &ens)?)),
        };
        let loc = drift.locate(t);
        let blowups: Vec<Option<(usize, f64)>> = ens
            .positions
            .par_chunks_mut(CHUNK * d)
            .enumerate()
            .map(|(ci, chunk)| {
                for (k, p) in chunk.chunks_exact_mut(d).enumerate() {
                    let idx = (ci * CHUNK + k) as u64;
                    let f = match (&conv, constant_f) {
                        (_, Some(c)) => c,
                        (Some(it), None) => nl.eval(it.eval(0, p)),
                        (None, None) => unreachable!(),
                    };
                    let mut dw = [0.0; 2];
                    for j in 0..r {
                        let z = rng.normals(idx, step as u64 * r + j);
                        dw[0] += z[0];
                        dw[1] += z[1];
                    }
                    let mut disp2 = 0.0;
                    let mut step_vec = [0.0; 2];
                    for a in 0..d {
                        let s = f * drift.eval_at(loc, a, p) * h + sub_sd * dw[a];
                        step_vec[a] = s;
                        disp2 += s * s;
                    }
                    if !(disp2.sqrt() <= 0.25 * l) {
                        return Some((idx as usize, disp2.sqrt()));
                    }
                    for a in 0..d {
                        p[a] = wrap(p[a] + step_vec[a], l);
                    }
                }
                None
            })
            .collect();
        if let Some((_, disp)) = blowups.into_iter().flatten().next() {
            return Err(SfpeError::BlowUp {
                step,
                displacement: disp,
            });
        }
        ens.step = step + 1;
        ens.time = (step + 1) as f64 * h;
        if cfg.record_every > 0 && (step + 1) % cfg.record_every == 0 && step + 1 != cfg.steps {
            out.push(ens.clone());
        }
    }
    ens.time = cfg.horizon;
    out.push(ens);
    Ok(Trajectory {
        ensembles: out,
        lipschitz_product: lip,
        warnings,
    })
}

/// Silverman-type bandwidth from circular spread, floored at two grid cells.
pub fn default_bandwidth(ensemble: &ParticleEnsemble) -> f64 {
    let grid = ensemble.grid;
    let (d, l) = (grid.dim(), grid.length());
    let n = ensemble.len() as f64;
    let mut log_sd = 0.0;
    for a in 0..d {
        let (mut c, mut s) = (0.0, 0.0);
        for i in 0..ensemble.len() {
            let th = std::f64::consts::TAU * ensemble.point(i)[a] / l;
            c += th.cos();
            s += th.sin();
        }
        let r = ((c * c + s * s).sqrt() / n).clamp(1e-300, 1.0);
        let sd = l / std::f64::consts::TAU * (-2.0 * r.ln()).sqrt();
        log_sd += sd.max(grid.dx()).ln() / d as f64;
    }
    let silverman = if d == 1 {
        1.06 * log_sd.exp() * n.powf(-0.2)
    } else {
        log_sd.exp() * n.powf(-1.0 / 6.0)
    };
    silverman.max(2.0 * grid.dx())
}

/// Periodised Gaussian kernel density estimate; clamped at 0 on the grid and
/// renormalised to unit mass.
pub fn density_estimate(ensemble: &ParticleEnsemble, bandwidth: f64) -> Result<SpectralField> {
    let grid = ensemble.grid;
    if ensemble.is_empty() {
        return Err(SfpeError::EmptyEnsemble);
    }
    if !(bandwidth >= 2.0 * grid.dx()) {
        return Err(invalid(
            "bandwidth",
            format!("{bandwidth} is below two grid cells ({})", 2.0 * grid.dx()),
        ));
    }
    let np = ensemble.len() as f64;
    let vol = grid.volume();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.points()];
    if grid.dim() == 1 {
        // exact empirical Fourier coefficients for 0 <= k < N/2
        let half = grid.n() / 2;
        let xi1 = grid.xi_unit();
        let partial: Vec<Vec<Complex64>> = ensemble
            .positions
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = vec![Complex64::new(0.0, 0.0); half];
                for &x in chunk {
                    let z1 = Complex64::from_polar(1.0, -xi1 * x);
                    let mut z = Complex64::new(1.0, 0.0);
                    for a in acc.iter_mut() {
                        *a += z;
                        z *= z1;
                    }
                }
                acc
            })
            .collect();
        let n = grid.n();
        for k in 0..half {
            let mut s = Complex64::new(0.0, 0.0);
            for p in &partial {
                s += p[k];
            }
            let xi = k as f64 * xi1;
            let c = s / (np * vol) * (-0.5 * bandwidth * bandwidth * xi * xi).exp();
            coeffs[k] = c;
            if k > 0 {
                coeffs[n - k] = c.conj();
            }
        }
    } else {
        // cloud-in-cell deposit with its transfer function divided out
        let dep = SpectralField::from_physical(&deposit(ensemble));
        let dx = grid.dx();
        for (i, c) in coeffs.iter_mut().enumerate() {
            if grid.is_nyquist(i) {
                continue;
            }
            let xi = grid.xi(i);
            let sinc = |u: f64| if u == 0.0 { 1.0 } else { u.sin() / u };
            let transfer = (sinc(0.5 * xi[0] * dx) * sinc(0.5 * xi[1] * dx)).powi(2);
            *c = dep.component(0)[i] / transfer * (-0.5 * bandwidth * bandwidth * grid.xi_norm_sq(i)).exp();
        }
    }
    let raw = SpectralField::from_coeffs(grid, vec![coeffs])?;
    let mut phys = raw.to_physical();
    for v in phys.values[0].iter_mut() {
        *v = v.max(0.0);
    }
    let mass = phys.integral();
    for v in phys.values[0].iter_mut() {
        *v /= mass;
    }
    Ok(SpectralField::from_physical(&phys))
}

/// `∫ |f - g| dx` on the grid.
pub fn l1_distance(f: &SpectralField, g: &SpectralField) -> Result<f64> {
    Ok(f.sub(g)?.to_physical().l1_norm())
}

fn default_fk_steps() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeynmanKacConfig {
    pub paths: usize,
    #[serde(default = "default_fk_steps")]
    pub steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeynmanKacEstimate {
    pub point: Vec<f64>,
    pub time: f64,
    pub mean: f64,
    pub std_error: f64,
}

/// `eta(s, x) = E[eta0(Y_s) exp(-∫_0^s div h(s - r, Y_r) dr)]`, with
/// `dY_r = -h(s - r, Y_r) dr + dW_r`, `Y_0 = x`.
pub fn feynman_kac_solve(
    h: &TimeField,
    eta0: &SpectralField,
    time: f64,
    points: &[Vec<f64>],
    cfg: &FeynmanKacConfig,
) -> Result<Vec<FeynmanKacEstimate>> {
    let grid = *eta0.grid();
    if cfg.paths < 10_000 {
        return Err(invalid("paths", format!("at least 10^4 paths are needed, got {}", cfg.paths)));
    }
    if cfg.steps == 0 {
        return Err(invalid("steps", "must be positive"));
    }
    if h.grid() != &grid || h.components() != grid.dim() {
        return Err(SfpeError::ShapeMismatch("drift must be a vector field on the datum's grid".into()));
    }
    if !(time >= 0.0 && time <= h.horizon() * (1.0 + 1e-12)) {
        return Err(invalid("time", format!("{time} outside [0, {}]", h.horizon())));
    }
    let div: Vec<SpectralField> = h.snapshots().iter().map(|s| s.divergence()).collect::<Result<_>>()?;
    let hi = TimeInterpolator::new(h.times(), h.snapshots());
    let ci = TimeInterpolator::new(h.times(), &div);
    let e0 = Interpolator::new(eta0);
    let (d, l) = (grid.dim(), grid.length());
    let dt = time / cfg.steps as f64;
    let sd = dt.sqrt();
    let rng = CounterRng::new(cfg.seed);
    let mut out = Vec::with_capacity(points.len());
    for (pi, x0) in points.iter().enumerate() {
        if x0.len() != d {
            return Err(SfpeError::ShapeMismatch(format!("probe point has {} coordinates", x0.len())));
        }
        let base = pi as u64 * cfg.paths as u64;
        let chunks: Vec<Result<(f64, f64)>> = (0..cfg.paths)
            .collect::<Vec<_>>()
            .par_chunks(CHUNK)
            .map(|ids| {
                let (mut s1, mut s2) = (0.0, 0.0);
                for &p in ids {
                    let mut y = [x0[0], if d == 2 { x0[1] } else { 0.0 }];
                    let mut logw = 0.0;
                    let mut c_prev = ci.eval_at(ci.locate(time), 0, &y);
                    for r in 0..cfg.steps {
                        let tau = time - r as f64 * dt;
                        let loc = hi.locate(tau);
                        let z = rng.normals(base + p as u64, r as u64);
                        for a in 0..d {
                            let s = -hi.eval_at(loc, a, &y) * dt + sd * z[a];
                            if s.abs() > 0.25 * l {
                                return Err(SfpeError::BlowUp { step: r, displacement: s.abs() });
                            }
                            y[a] = wrap(y[a] + s, l);
                        }
                        let c_next = ci.eval_at(ci.locate((tau - dt).max(0.0)), 0, &y);
                        logw -= 0.5 * (c_prev + c_next) * dt;
                        c_prev = c_next;
                    }
                    let v = e0.eval(0, &y) * logw.exp();
                    s1 += v;
                    s2 += v * v;
                }
                Ok((s1, s2))
            })
            .collect();
        let (mut s1, mut s2) = (0.0, 0.0);
        for c in chunks {
            let (a, b) = c?;
            s1 += a;
            s2 += b;
        }
        let n = cfg.paths as f64;
        let mean = s1 / n;
        let var = ((s2 / n - mean * mean) * n / (n - 1.0)).max(0.0);
        out.push(FeynmanKacEstimate {
            point: x0.clone(),
            time,
            mean,
            std_error: (var / n).sqrt(),
        });
    }
    Ok(out)
}
