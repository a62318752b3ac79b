//! Mild-form solver for `dv/dt = Δv/2 - div(v g)` by Picard iteration.
//!
//! The time integral `D[h](t) = ∫_0^t P_{t-s} h(s) ds` is evaluated per Fourier
//! mode with `h` linear in time between nodes (exponential time differencing).
//! With `a = |xi|^2/2`, step `dt` and `z = a dt`:
//!
//! `D_{n+1} = e^{-z} D_n + dt [phi1(z) h_n + phi2(z) (h_{n+1} - h_n)]`,
//! `phi1(z) = (1 - e^{-z})/z`, `phi2(z) = (z - 1 + e^{-z})/z^2`.
//!
//! Since the map `v -> P v0 - D[div(v g)]` is affine, successive Picard
//! differences obey `delta_{k+1} = -D[div(delta_k g)]`. The iteration propagates
//! these differences directly and accumulates them, so the reported distances
//! between iterates carry no cancellation error however small they get.

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::besov::{besov, log_rho_weighted};
use crate::error::{invalid, Result, SfpeError};
use crate::field::{Grid, SpectralField, TimeField};
use crate::product::pointwise_product;

/// Weight `rho` of the time-weighted metric: the contraction recipe or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RhoRepr", into = "RhoRepr")]
pub enum Rho {
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RhoRepr {
    Value(f64),
    Text(String),
}

impl TryFrom<RhoRepr> for Rho {
    type Error = String;
    fn try_from(r: RhoRepr) -> std::result::Result<Self, String> {
        match r {
            RhoRepr::Value(v) if v >= 0.0 => Ok(Rho::Fixed(v)),
            RhoRepr::Value(v) => Err(format!("rho must be non-negative, got {v}")),
            RhoRepr::Text(s) if s == "auto" => Ok(Rho::Auto),
            RhoRepr::Text(s) => Err(format!("rho must be a number or \"auto\", got {s:?}")),
        }
    }
}

impl From<Rho> for RhoRepr {
    fn from(r: Rho) -> Self {
        match r {
            Rho::Auto => RhoRepr::Text("auto".into()),
            Rho::Fixed(v) => RhoRepr::Value(v),
        }
    }
}

fn default_tol() -> f64 {
    1e-9
}
fn default_iters() -> usize {
    200
}
fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Horizon `T`.
    pub horizon: f64,
    /// Number of time steps `M` (the grid has `M + 1` nodes).
    pub time_steps: usize,
    #[serde(default)]
    pub rho: Rho,
    #[serde(default = "default_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_iters")]
    pub max_picard_iters: usize,
    /// Measured aggregate of the product, Schauder and Bernstein constants.
    #[serde(default = "default_one")]
    pub bony_c: f64,
}

impl SolverConfig {
    pub fn new(alpha: f64, beta: f64, horizon: f64, time_steps: usize) -> Self {
        Self {
            alpha,
            beta,
            horizon,
            time_steps,
            rho: Rho::Auto,
            picard_tol: default_tol(),
            max_picard_iters: default_iters(),
            bony_c: 1.0,
        }
    }

    pub fn theta(&self) -> f64 {
        (self.alpha + self.beta + 1.0) / 2.0
    }

    pub fn times(&self) -> Vec<f64> {
        TimeField::uniform_times(self.horizon, self.time_steps)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.alpha && self.alpha < self.beta && self.beta < 0.5) {
            return Err(invalid(
                "alpha",
                format!("exponents need 0 < alpha < beta < 1/2, got alpha = {}, beta = {}", self.alpha, self.beta),
            ));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon", format!("must be positive, got {}", self.horizon)));
        }
        if self.time_steps == 0 {
            return Err(invalid("time_steps", "must be positive"));
        }
        if !(self.picard_tol > 0.0) {
            return Err(invalid("picard_tol", "must be positive"));
        }
        if !(self.bony_c > 0.0) {
            return Err(invalid("bony_c", "must be positive"));
        }
        Ok(())
    }
}

/// `rho = (2 c ||g|| Gamma(1-theta))^{1/(1-theta)}`, which makes
/// `c ||g|| rho^{theta-1} Gamma(1-theta) = 1/2`.
pub fn choose_rho(g_norm: f64, alpha: f64, beta: f64, c: f64) -> f64 {
    let theta = (alpha + beta + 1.0) / 2.0;
    (2.0 * c * g_norm * gamma(1.0 - theta)).powf(1.0 / (1.0 - theta))
}

fn phi1(z: f64) -> f64 {
    if z < 0.5 {
        let (mut term, mut sum) = (1.0, 0.0);
        for k in 1..=20 {
            sum += term;
            term *= -z / (k + 1) as f64;
        }
        sum
    } else {
        -(-z).exp_m1() / z
    }
}

fn phi2(z: f64) -> f64 {
    if z < 0.5 {
        let (mut term, mut sum) = (0.5, 0.0);
        for k in 1..=20 {
            sum += term;
            term *= -z / (k + 2) as f64;
        }
        sum
    } else {
        (z - 1.0 + (-z).exp()) / (z * z)
    }
}

struct StepCoeffs {
    decay: Vec<f64>,
    w1: Vec<f64>,
    w2: Vec<f64>,
}

/// Precomputed exponential-time-differencing weights for a grid and time grid.
pub struct Duhamel {
    grid: Grid,
    times: Vec<f64>,
    coeffs: Vec<StepCoeffs>,
    step_of: Vec<usize>,
}

impl Duhamel {
    pub fn new(grid: Grid, times: &[f64]) -> Self {
        let mut index: HashMap<u64, usize> = HashMap::new();
        let mut coeffs = Vec::new();
        let mut step_of = Vec::with_capacity(times.len().saturating_sub(1));
        for w in times.windows(2) {
            let dt = w[1] - w[0];
            let id = *index.entry(dt.to_bits()).or_insert_with(|| {
                let mut c = StepCoeffs {
                    decay: Vec::with_capacity(grid.points()),
                    w1: Vec::with_capacity(grid.points()),
                    w2: Vec::with_capacity(grid.points()),
                };
                for i in 0..grid.points() {
                    let z = 0.5 * grid.xi_norm_sq(i) * dt;
                    c.decay.push((-z).exp());
                    c.w1.push(dt * phi1(z));
                    c.w2.push(dt * phi2(z));
                }
                coeffs.push(c);
                coeffs.len() - 1
            });
            step_of.push(id);
        }
        Self {
            grid,
            times: times.to_vec(),
            coeffs,
            step_of,
        }
    }

    /// `D[h](t_n)` for every node `n`.
    pub fn integrate(&self, h: &[SpectralField]) -> Result<Vec<SpectralField>> {
        if h.len() != self.times.len() {
            return Err(SfpeError::ShapeMismatch(format!(
                "{} samples for {} time nodes",
                h.len(),
                self.times.len()
            )));
        }
        let comps = h[0].components();
        let mut out = Vec::with_capacity(h.len());
        let mut cur = SpectralField::zeros(self.grid, comps);
        out.push(cur.clone());
        for n in 0..h.len() - 1 {
            let c = &self.coeffs[self.step_of[n]];
            let mut next = SpectralField::zeros(self.grid, comps);
            for comp in 0..comps {
                let (h0, h1) = (h[n].component(comp), h[n + 1].component(comp));
                let d = cur.component(comp);
                for (i, z) in next.component_mut(comp).iter_mut().enumerate() {
                    *z = d[i] * c.decay[i] + h0[i] * c.w1[i] + (h1[i] - h0[i]) * c.w2[i];
                }
            }
            out.push(next.clone());
            cur = next;
        }
        Ok(out)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

/// `∫_0^{t} P_{t-s} h(s) ds` at node `t_index`, with `h` linear between nodes.
pub fn duhamel_integral(h: &TimeField, t_index: usize) -> Result<SpectralField> {
    if t_index >= h.len() {
        return Err(SfpeError::TimeIndexOutOfRange {
            index: t_index,
            len: h.len(),
        });
    }
    let d = Duhamel::new(*h.grid(), &h.times()[..=t_index]);
    Ok(d.integrate(&h.snapshots()[..=t_index])?.pop().expect("non-empty"))
}

/// `t -> P_t f` on a time grid.
pub fn heat_flow(f: &SpectralField, times: &[f64]) -> Result<TimeField> {
    let snaps = times
        .iter()
        .map(|&t| f.heat_propagate(t))
        .collect::<Result<Vec<_>>>()?;
    TimeField::new(times.to_vec(), snaps)
}

/// `-D[div(u g)]` at every node.
pub(crate) fn drift_response(u: &[SpectralField], g: &TimeField, duhamel: &Duhamel) -> Result<Vec<SpectralField>> {
    let h = u
        .par_iter()
        .zip(g.snapshots())
        .map(|(un, gn)| {
            if un.max_abs_coeff() == 0.0 {
                return Ok(SpectralField::zeros(*un.grid(), 1));
            }
            pointwise_product(un, gn)?.divergence()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(duhamel.integrate(&h)?.into_iter().map(|d| d.scale(-1.0)).collect())
}

/// Distances between successive iterates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PicardTrace {
    /// `ln d_{rho,beta}` per iteration.
    pub log_rho_distances: Vec<f64>,
    /// `d_{0,beta}` (plain sup in time) per iteration.
    pub plain_distances: Vec<f64>,
    pub converged: bool,
}

impl PicardTrace {
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.log_rho_distances
            .windows(2)
            .map(|w| {
                if w[0] == f64::NEG_INFINITY {
                    0.0
                } else {
                    (w[1] - w[0]).exp()
                }
            })
            .collect()
    }
}

/// Solves `u = source - D[div(u g)]`, stopping when the plain distance between
/// iterates falls below `tol`.
pub(crate) fn picard_affine(
    source: &TimeField,
    g: &TimeField,
    duhamel: &Duhamel,
    rho: f64,
    beta: f64,
    tol: f64,
    max_iters: usize,
) -> Result<(TimeField, PicardTrace)> {
    let mut u: Vec<SpectralField> = source.snapshots().to_vec();
    let mut prev: Vec<SpectralField> = u.clone();
    let mut trace = PicardTrace::default();
    let times = source.times();
    for _ in 0..max_iters {
        let delta = drift_response(&prev, g, duhamel)?;
        let norms: Vec<f64> = delta.par_iter().map(|d| besov(d, beta)).collect();
        let plain = norms.iter().cloned().fold(0.0, f64::max);
        if !plain.is_finite() {
            return Err(SfpeError::NonContraction(format!(
                "iterate difference became {plain} after {} iterations",
                trace.plain_distances.len()
            )));
        }
        for (un, dn) in u.iter_mut().zip(&delta) {
            *un = un.add(dn)?;
        }
        trace.log_rho_distances.push(log_rho_weighted(times, &norms, rho));
        trace.plain_distances.push(plain);
        if plain < tol {
            trace.converged = true;
            return Ok((TimeField::new(times.to_vec(), u)?, trace));
        }
        prev = delta;
    }
    Err(SfpeError::NoConvergence {
        iterations: max_iters,
        last: *trace.plain_distances.last().unwrap_or(&f64::NAN),
        history: trace.plain_distances,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterates: usize,
    /// `d_{rho,beta}` between successive iterates (0 where it underflows).
    pub residual_history: Vec<f64>,
    pub log_residual_history: Vec<f64>,
    /// Same distances with `rho = 0`.
    pub plain_history: Vec<f64>,
    pub contraction_ratios: Vec<f64>,
    pub mass_trace: Vec<f64>,
    pub min_value_trace: Vec<f64>,
    pub rho: f64,
    pub g_norm: f64,
    /// Set when the residual rose again after dropping below 1e-2.
    pub non_contraction: bool,
}

/// `sup_t ||g(t)||_{C^{-alpha}}`.
pub fn drift_norm(g: &TimeField, alpha: f64) -> f64 {
    g.snapshots()
        .par_iter()
        .map(|s| besov(s, -alpha))
        .reduce(|| 0.0, f64::max)
}

pub(crate) fn residual_flag(log_hist: &[f64]) -> bool {
    let thresh = 1e-2f64.ln();
    let mut below = false;
    for w in log_hist.windows(2) {
        below |= w[0] < thresh;
        if below && w[1] >= w[0] && w[0] > f64::NEG_INFINITY {
            return true;
        }
    }
    false
}

pub(crate) fn mass_and_min(v: &TimeField) -> (Vec<f64>, Vec<f64>) {
    v.snapshots()
        .par_iter()
        .map(|s| (s.integral(), s.to_physical().min()))
        .unzip()
}

fn check_inputs(g: &TimeField, v0: &SpectralField, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if g.grid() != v0.grid() {
        return Err(SfpeError::ShapeMismatch("drift and initial datum grids differ".into()));
    }
    if g.components() != g.grid().dim() {
        return Err(SfpeError::ComponentMismatch {
            expected: g.grid().dim(),
            got: g.components(),
        });
    }
    if v0.components() != 1 {
        return Err(SfpeError::ComponentMismatch {
            expected: 1,
            got: v0.components(),
        });
    }
    let want = cfg.times();
    if g.times().len() != want.len() || (g.horizon() - cfg.horizon).abs() > 1e-12 * cfg.horizon {
        return Err(SfpeError::ShapeMismatch(format!(
            "drift has {} nodes up to {}, solver expects {} up to {}",
            g.len(),
            g.horizon(),
            want.len(),
            cfg.horizon
        )));
    }
    Ok(())
}

/// Resolves the metric weight for a drift of norm `g_norm`.
pub fn resolve_rho(cfg: &SolverConfig, g_norm: f64) -> f64 {
    match cfg.rho {
        Rho::Fixed(r) => r,
        Rho::Auto => choose_rho(g_norm, cfg.alpha, cfg.beta, cfg.bony_c),
    }
}

/// Mild solution of the linear equation with drift `g`.
pub fn solve_linear(g: &TimeField, v0: &SpectralField, cfg: &SolverConfig) -> Result<(TimeField, SolveReport)> {
    check_inputs(g, v0, cfg)?;
    let duhamel = Duhamel::new(*v0.grid(), g.times());
    solve_linear_with(g, v0, cfg, &duhamel)
}

pub(crate) fn solve_linear_with(
    g: &TimeField,
    v0: &SpectralField,
    cfg: &SolverConfig,
    duhamel: &Duhamel,
) -> Result<(TimeField, SolveReport)> {
    let g_norm = drift_norm(g, cfg.alpha);
    let rho = resolve_rho(cfg, g_norm);
    let source = heat_flow(v0, g.times())?;
    let (v, trace) = picard_affine(&source, g, duhamel, rho, cfg.beta, cfg.picard_tol, cfg.max_picard_iters)?;
    let (mass_trace, min_value_trace) = mass_and_min(&v);
    let report = SolveReport {
        iterates: trace.plain_distances.len(),
        residual_history: trace.log_rho_distances.iter().map(|l| l.exp()).collect(),
        contraction_ratios: trace.contraction_ratios(),
        non_contraction: residual_flag(&trace.log_rho_distances),
        log_residual_history: trace.log_rho_distances,
        plain_history: trace.plain_distances,
        mass_trace,
        min_value_trace,
        rho,
        g_norm,
    };
    Ok((v, report))
}

/// Smooth periodic test functions with unit sup norm: the lowest Fourier modes
/// and Gaussian bumps modulated by a low mode.
pub fn test_bank(grid: &Grid) -> Vec<SpectralField> {
    let mut bank = Vec::new();
    let axes: &[[i64; 2]] = if grid.dim() == 1 { &[[1, 0]] } else { &[[1, 0], [0, 1]] };
    for ax in axes {
        for m in 1..=4 {
            let k = [ax[0] * m, ax[1] * m];
            for amp in [Complex64::new(0.5, 0.0), Complex64::new(0.0, -0.5)] {
                if let Ok(f) = SpectralField::real_mode(*grid, k, amp) {
                    bank.push(f);
                }
            }
        }
    }
    let l = grid.length();
    let width = l / 16.0;
    for (i, frac) in [0.25, 0.5, 0.7].into_iter().enumerate() {
        let center = [frac * l, (1.0 - frac) * l];
        let mut bump = SpectralField::zeros(*grid, 1);
        for (j, z) in bump.component_mut(0).iter_mut().enumerate() {
            if grid.is_nyquist(j) {
                continue;
            }
            let xi = grid.xi(j);
            let phase = -(xi[0] * center[0] + if grid.dim() == 2 { xi[1] * center[1] } else { 0.0 });
            *z = Complex64::from_polar((-0.5 * width * width * grid.xi_norm_sq(j)).exp(), phase);
        }
        let modulated = if i == 0 {
            bump
        } else {
            let m = SpectralField::real_mode(*grid, [i as i64, 0], Complex64::new(0.5, 0.0)).expect("low mode");
            pointwise_product(&bump, &m).expect("same grid")
        };
        let s = modulated.to_physical().sup();
        bank.push(modulated.scale(1.0 / s));
    }
    bank
}

/// `∫ f phi` for real fields.
fn pairing(f: &SpectralField, phi: &SpectralField, comp: usize) -> f64 {
    let vol = f.grid().volume();
    f.component(comp)
        .iter()
        .zip(phi.component(0))
        .map(|(a, b)| (a * b.conj()).re)
        .sum::<f64>()
        * vol
}

/// Cumulative integrals `∫_0^{t_n} y` on a uniform grid (composite Simpson,
/// with a 3/8 panel for odd counts and a three-point rule on the first step).
fn cumulative_simpson(y: &[f64], dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    for n in 1..y.len() {
        out[n] = if n == 1 {
            if y.len() > 2 {
                dt / 12.0 * (5.0 * y[0] + 8.0 * y[1] - y[2])
            } else {
                0.5 * dt * (y[0] + y[1])
            }
        } else {
            let simpson = |a: usize, b: usize| {
                (a..b)
                    .step_by(2)
                    .map(|i| dt / 3.0 * (y[i] + 4.0 * y[i + 1] + y[i + 2]))
                    .sum::<f64>()
            };
            if n % 2 == 0 {
                simpson(0, n)
            } else {
                simpson(0, n - 3) + 3.0 * dt / 8.0 * (y[n - 3] + 3.0 * y[n - 2] + 3.0 * y[n - 1] + y[n])
            }
        };
    }
    out
}

/// Max over the bank and the time grid of
/// `|<v(t),phi> - <v0,phi> - ∫_0^t (<v, Δphi>/2 + <v g, grad phi>) ds|`.
pub fn weak_residual(v: &TimeField, g: &TimeField, v0: &SpectralField, bank: &[SpectralField]) -> Result<f64> {
    v.check_same_shape(&TimeField::new(
        g.times().to_vec(),
        g.snapshots().iter().map(|s| s.scalar_component(0)).collect(),
    )?)?;
    let times = v.times();
    let dt = times[1] - times[0];
    if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt) {
        return Err(invalid("time_grid", "weak residual needs a uniform time grid"));
    }
    let products: Vec<SpectralField> = v
        .snapshots()
        .par_iter()
        .zip(g.snapshots())
        .map(|(a, b)| pointwise_product(a, b))
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for phi in bank {
        let lap = phi.laplacian();
        let grad = phi.gradient()?;
        let integrand: Vec<f64> = v
            .snapshots()
            .iter()
            .zip(&products)
            .map(|(vn, pn)| {
                let mut s = 0.5 * pairing(vn, &lap, 0);
                for a in 0..pn.components() {
                    s += pairing(pn, &grad.scalar_component(a), a);
                }
                s
            })
            .collect();
        let cum = cumulative_simpson(&integrand, dt);
        let base = pairing(v0, phi, 0);
        for (n, vn) in v.snapshots().iter().enumerate() {
            worst = worst.max((pairing(vn, phi, 0) - base - cum[n]).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassReport {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub min_value: Vec<f64>,
    pub max_value: Vec<f64>,
    /// Node indices with mass above `1 + 1e-6` or min below `-1e-6 max`.
    pub violations: Vec<usize>,
}

impl MassReport {
    pub fn flagged(&self) -> bool {
        !self.violations.is_empty()
    }

    pub fn max_mass_deviation(&self) -> f64 {
        self.mass.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max)
    }
}

pub fn positivity_mass_report(v: &TimeField) -> MassReport {
    let rows: Vec<(f64, f64, f64)> = v
        .snapshots()
        .par_iter()
        .map(|s| {
            let p = s.to_physical();
            (s.integral(), p.min(), p.max())
        })
        .collect();
    let violations = rows
        .iter()
        .enumerate()
        .filter(|(_, (m, lo, hi))| *m > 1.0 + 1e-6 || *lo < -1e-6 * hi.abs())
        .map(|(i, _)| i)
        .collect();
    MassReport {
        times: v.times().to_vec(),
        mass: rows.iter().map(|r| r.0).collect(),
        min_value: rows.iter().map(|r| r.1).collect(),
        max_value: rows.iter().map(|r| r.2).collect(),
        violations,
    }
}
