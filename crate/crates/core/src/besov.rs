//! Littlewood-Paley blocks with sharp annular cutoffs and the norms built on them.
//!
//! Block `j = -1` holds `|xi| < 1/2`; block `j >= 0` holds `2^{j-1} <= |xi| < 2^j`.
//! Weights are `2^{j gamma}` for `j >= 0` and 1 for the low block, so a constant
//! has norm equal to its modulus at every exponent.
//! The top block `J` is the block of the largest resolved frequency, and Nyquist
//! modes are assigned to it, so every coefficient lies in exactly one block.
//!
//! `||Delta_j f||_inf` is the sup of a trigonometric polynomial. It is evaluated on
//! a grid oversampled relative to the block's own bandwidth (8 points per
//! shortest wavelength, independent of N); in 1-D every near-maximal grid peak is
//! then polished by Newton's method on the exact polynomial. Block sups are thus
//! properties of the function, not of the resolution it is stored at.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SfpeError};
use crate::field::{Grid, SpectralField, TimeField};
use crate::fft;
use crate::rng::CounterRng;

const PEAK_FRACTION: f64 = 0.92;
const HOLDER_EXHAUSTIVE_MAX: usize = 512;
const HOLDER_RANDOM_PAIRS: u64 = 1_000_000;
const HOLDER_PAIR_SEED: u64 = 0x5EED_0F_4A1C;

/// Block index of a frequency modulus.
pub fn level_of_xi(xi: f64) -> i32 {
    if xi < 0.5 {
        -1
    } else {
        (xi.log2() + 1e-12).floor() as i32 + 1
    }
}

/// Largest block index present on `grid` (Nyquist modes excluded).
pub fn max_level(grid: &Grid) -> i32 {
    let h = (grid.n() / 2 - 1) as f64 * grid.xi_unit();
    let top = if grid.dim() == 1 { h } else { h * std::f64::consts::SQRT_2 };
    level_of_xi(top)
}

/// Block index of a flat coefficient index.
pub fn mode_level(grid: &Grid, flat: usize) -> i32 {
    level_of_xi(grid.xi_norm_sq(flat).sqrt()).min(max_level(grid))
}

/// Exponent and partition used for a Besov evaluation on a given grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub gamma: f64,
    pub max_level: i32,
}

impl BesovParams {
    pub fn new(grid: &Grid, gamma: f64) -> Self {
        Self {
            gamma,
            max_level: max_level(grid),
        }
    }

    /// Frequency range `[lo, hi)` of block `j` (the top block also takes the Nyquist modes).
    pub fn annulus(&self, j: i32) -> (f64, f64) {
        if j < 0 {
            (0.0, 0.5)
        } else {
            (2f64.powi(j - 1), 2f64.powi(j))
        }
    }

    pub fn levels(&self) -> impl Iterator<Item = i32> {
        -1..=self.max_level
    }
}

/// Norm evaluation result. `per_level[i]` belongs to block `j = i - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub besov_norm: f64,
    pub per_level: Vec<f64>,
    pub holder_sup: Option<f64>,
    pub holder_seminorm: Option<f64>,
    pub gamma: f64,
    pub rho: f64,
}

impl NormReport {
    /// `sup |f| + [f]_gamma` when the Hölder part was computed.
    pub fn holder_norm(&self) -> Option<f64> {
        Some(self.holder_sup? + self.holder_seminorm?)
    }
}

/// Sharp projection onto block `j`.
pub fn dyadic_block(f: &SpectralField, j: i32) -> Result<SpectralField> {
    let g = *f.grid();
    let top = max_level(&g);
    if j < -1 || j > top {
        return Err(SfpeError::LevelOutOfRange { level: j, max: top });
    }
    Ok(f.map_modes(|i| {
        if mode_level(&g, i) == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

struct BlockModes {
    ks: Vec<[i64; 2]>,
    cs: Vec<Complex64>,
}

fn split_blocks(grid: &Grid, coeffs: &[Complex64]) -> Vec<BlockModes> {
    let top = max_level(grid);
    let mut blocks: Vec<BlockModes> = (-1..=top)
        .map(|_| BlockModes {
            ks: Vec::new(),
            cs: Vec::new(),
        })
        .collect();
    for (i, c) in coeffs.iter().enumerate() {
        if c.re == 0.0 && c.im == 0.0 {
            continue;
        }
        let b = &mut blocks[(mode_level(grid, i) + 1) as usize];
        b.ks.push(grid.mode(i));
        b.cs.push(*c);
    }
    blocks
}

fn oversampled_size(kmax: i64, factor: i64) -> usize {
    ((factor * kmax).max(16) as usize).next_power_of_two()
}

/// Real part of the block polynomial and its first two derivatives at `x`.
fn eval_1d(b: &BlockModes, u: f64, x: f64) -> (f64, f64, f64) {
    let (mut p, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for (k, c) in b.ks.iter().zip(&b.cs) {
        let xi = k[0] as f64 * u;
        let (s, co) = (xi * x).sin_cos();
        // Re(c e^{i xi x}) and derivatives
        let re = c.re * co - c.im * s;
        let im = c.re * s + c.im * co;
        p += re;
        d1 -= xi * im;
        d2 -= xi * xi * re;
    }
    (p, d1, d2)
}

fn block_sup_1d(grid: &Grid, b: &BlockModes) -> f64 {
    if b.cs.is_empty() {
        return 0.0;
    }
    let kmax = b.ks.iter().map(|k| k[0].abs()).max().unwrap_or(0);
    if kmax == 0 {
        return b.cs.iter().map(|c| c.re).sum::<f64>().abs();
    }
    let m = oversampled_size(kmax, 8);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (k, c) in b.ks.iter().zip(&b.cs) {
        buf[k[0].rem_euclid(m as i64) as usize] += c;
    }
    fft::inverse(1, m, &mut buf);
    let vals: Vec<f64> = buf.iter().map(|z| z.re.abs()).collect();
    let gmax = vals.iter().cloned().fold(0.0, f64::max);
    if gmax == 0.0 {
        return 0.0;
    }
    let h = grid.length() / m as f64;
    let u = grid.xi_unit();
    let mut best = gmax;
    for i in 0..m {
        let v = vals[i];
        if v < PEAK_FRACTION * gmax || v < vals[(i + m - 1) % m] || v < vals[(i + 1) % m] {
            continue;
        }
        let x0 = i as f64 * h;
        let mut x = x0;
        let (p0, _, _) = eval_1d(b, u, x);
        let s = p0.signum();
        for _ in 0..12 {
            let (_, d1, d2) = eval_1d(b, u, x);
            let (g1, g2) = (s * d1, s * d2);
            let step = if g2 < 0.0 { -g1 / g2 } else { g1.signum() * 0.25 * h };
            let xn = (x + step).clamp(x0 - h, x0 + h);
            if (xn - x).abs() < 1e-15 * grid.length() {
                x = xn;
                break;
            }
            x = xn;
        }
        let (p, _, _) = eval_1d(b, u, x);
        best = best.max(p.abs());
    }
    best
}

fn block_sup_2d(b: &BlockModes) -> f64 {
    if b.cs.is_empty() {
        return 0.0;
    }
    let kmax = b.ks.iter().map(|k| k[0].abs().max(k[1].abs())).max().unwrap_or(0);
    let m = oversampled_size(kmax, 4);
    let mut buf = vec![Complex64::new(0.0, 0.0); m * m];
    for (k, c) in b.ks.iter().zip(&b.cs) {
        let i = k[0].rem_euclid(m as i64) as usize * m + k[1].rem_euclid(m as i64) as usize;
        buf[i] += c;
    }
    fft::inverse(2, m, &mut buf);
    buf.iter().fold(0.0, |a, z| a.max(z.re.abs()))
}

/// `||Delta_j f||_inf` for every block `j = -1..=J`, max over components.
pub fn block_sups(f: &SpectralField) -> Vec<f64> {
    let g = *f.grid();
    let levels = (max_level(&g) + 2) as usize;
    let mut out = vec![0.0f64; levels];
    for c in 0..f.components() {
        for (slot, b) in out.iter_mut().zip(split_blocks(&g, f.component(c))) {
            let s = if g.dim() == 1 {
                block_sup_1d(&g, &b)
            } else {
                block_sup_2d(&b)
            };
            *slot = slot.max(s);
        }
    }
    out
}

/// `2^{j gamma} * sup_j` for each block; the low block `j = -1` carries weight 1.
pub fn weight_levels(sups: &[f64], gamma: f64) -> Vec<f64> {
    sups.iter()
        .enumerate()
        .map(|(i, s)| 2f64.powf((i as f64 - 1.0).max(0.0) * gamma) * s)
        .collect()
}

pub fn norm_from_sups(sups: &[f64], gamma: f64) -> f64 {
    weight_levels(sups, gamma).into_iter().fold(0.0, f64::max)
}

/// `||f||_{C^gamma} = sup_j 2^{j gamma} ||Delta_j f||_inf`.
pub fn besov_norm(f: &SpectralField, gamma: f64) -> NormReport {
    let per_level = weight_levels(&block_sups(f), gamma);
    NormReport {
        besov_norm: per_level.iter().cloned().fold(0.0, f64::max),
        per_level,
        holder_sup: None,
        holder_seminorm: None,
        gamma,
        rho: 0.0,
    }
}

/// Shorthand for `besov_norm(f, gamma).besov_norm`.
pub fn besov(f: &SpectralField, gamma: f64) -> f64 {
    norm_from_sups(&block_sups(f), gamma)
}

fn torus_dist(a: [f64; 2], b: [f64; 2], l: f64) -> f64 {
    let d = |x: f64, y: f64| {
        let r = (x - y).abs();
        r.min(l - r)
    };
    let (p, q) = (d(a[0], b[0]), d(a[1], b[1]));
    (p * p + q * q).sqrt()
}

/// Grid sup plus Hölder seminorm over grid pairs (torus distance), together with
/// the Besov norm at the same exponent. Vector fields take the max over components.
pub fn holder_norm(f: &SpectralField, gamma: f64) -> Result<NormReport> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid("gamma", format!("Hölder exponent must lie in (0,1), got {gamma}")));
    }
    let g = *f.grid();
    let phys = f.to_physical();
    let pts = g.points();
    let pos: Vec<[f64; 2]> = (0..pts).map(|i| g.position(i)).collect();
    let ratio = |v: &[f64], i: usize, j: usize| {
        (v[i] - v[j]).abs() / torus_dist(pos[i], pos[j], g.length()).powf(gamma)
    };
    let mut semi = 0.0f64;
    for v in &phys.values {
        if pts <= HOLDER_EXHAUSTIVE_MAX {
            for i in 0..pts {
                for j in (i + 1)..pts {
                    semi = semi.max(ratio(v, i, j));
                }
            }
        } else {
            let rng = CounterRng::new(HOLDER_PAIR_SEED);
            for p in 0..HOLDER_RANDOM_PAIRS {
                let [a, b] = rng.words(p, 0);
                let (i, j) = ((a % pts as u64) as usize, (b % pts as u64) as usize);
                if i != j {
                    semi = semi.max(ratio(v, i, j));
                }
            }
        }
    }
    let mut report = besov_norm(f, gamma);
    report.holder_sup = Some(phys.sup());
    report.holder_seminorm = Some(semi);
    Ok(report)
}

/// Least-squares slope of `log2 ||Delta_j f||` against `j` over `j >= from_level`,
/// negated: the regularity exponent suggested by the resolved octaves.
pub fn regularity_estimate(sups: &[f64], from_level: i32) -> f64 {
    let pts: Vec<(f64, f64)> = sups
        .iter()
        .enumerate()
        .map(|(i, s)| (i as f64 - 1.0, *s))
        .filter(|(j, s)| *j >= from_level as f64 && *s > 0.0)
        .map(|(j, s)| (j, s.log2()))
        .collect();
    -linear_fit(&pts).0
}

/// Level-slope estimate for Gaussian random fields: each block sup is divided by
/// the expected extreme-value growth `sqrt(2 ln m_j)` of a block with `m_j`
/// nonzero coefficients before the regression, leaving the scaling of the
/// block amplitude itself. Blocks with fewer than four coefficients are skipped.
pub fn gaussian_regularity_estimate(f: &SpectralField, from_level: i32) -> f64 {
    let g = *f.grid();
    let sups = block_sups(f);
    let mut counts = vec![0usize; sups.len()];
    for i in 0..g.points() {
        if (0..f.components()).any(|c| f.component(c)[i].norm_sqr() > 0.0) {
            counts[(mode_level(&g, i) + 1) as usize] += 1;
        }
    }
    let pts: Vec<(f64, f64)> = sups
        .iter()
        .zip(&counts)
        .enumerate()
        .filter(|(i, (s, m))| *i as i32 - 1 >= from_level && **s > 0.0 && **m >= 4)
        .map(|(i, (s, m))| (i as f64 - 1.0, (s / (2.0 * (*m as f64).ln()).sqrt()).log2()))
        .collect();
    -linear_fit(&pts).0
}

/// Ordinary least squares `y = a x + b`; returns `(slope, intercept, r_squared)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

/// Besov norm of every snapshot.
pub fn time_norms(v: &TimeField, gamma: f64) -> Vec<f64> {
    v.snapshots().par_iter().map(|s| besov(s, gamma)).collect()
}

/// `ln max_i e^{-rho t_i} n_i`; `-inf` when every `n_i` is zero.
pub fn log_rho_weighted(times: &[f64], norms: &[f64], rho: f64) -> f64 {
    times
        .iter()
        .zip(norms)
        .map(|(t, n)| if *n > 0.0 { n.ln() - rho * t } else { f64::NEG_INFINITY })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `ln sup_t e^{-rho t} ||v(t)||_{C^gamma}`.
pub fn log_rho_norm(v: &TimeField, rho: f64, gamma: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(invalid("rho", format!("must be non-negative, got {rho}")));
    }
    Ok(log_rho_weighted(v.times(), &time_norms(v, gamma), rho))
}

/// `sup_t e^{-rho t} ||v(t)||_{C^gamma}` (may underflow to 0 for large rho; use
/// [`log_rho_norm`] to compare such values).
pub fn rho_norm(v: &TimeField, rho: f64, gamma: f64) -> Result<f64> {
    Ok(log_rho_norm(v, rho, gamma)?.exp())
}

pub fn log_rho_distance(v: &TimeField, w: &TimeField, rho: f64, gamma: f64) -> Result<f64> {
    log_rho_norm(&v.sub(w)?, rho, gamma)
}

/// `d_{rho,gamma}(v, w) = sup_t e^{-rho t} ||v(t) - w(t)||_{C^gamma}`.
pub fn rho_distance(v: &TimeField, w: &TimeField, rho: f64, gamma: f64) -> Result<f64> {
    Ok(log_rho_distance(v, w, rho, gamma)?.exp())
}

/// Measured constants of the two semigroup estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchauderReport {
    pub gamma: f64,
    pub theta: f64,
    pub t_grid: Vec<f64>,
    pub ensemble_size: usize,
    /// `sup t^theta ||P_t f||_{2 theta + gamma} / ||f||_gamma`
    pub smoothing: f64,
    /// `sup t^{-theta} ||P_t f - f||_gamma / ||f||_{2 theta + gamma}`
    pub difference: f64,
    pub smoothing_by_t: Vec<f64>,
    pub difference_by_t: Vec<f64>,
}

pub fn schauder_constants(
    ensemble: &[SpectralField],
    gamma: f64,
    theta: f64,
    t_grid: &[f64],
) -> Result<SchauderReport> {
    if ensemble.is_empty() {
        return Err(SfpeError::EmptyEnsemble);
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid("theta", format!("must lie in (0,1), got {theta}")));
    }
    if t_grid.iter().any(|t| !(*t > 0.0)) {
        return Err(invalid("t_grid", "times must be positive"));
    }
    let hi = 2.0 * theta + gamma;
    let rows: Vec<(Vec<f64>, Vec<f64>)> = ensemble
        .par_iter()
        .map(|f| {
            let base = block_sups(f);
            let n_lo = norm_from_sups(&base, gamma);
            let n_hi = norm_from_sups(&base, hi);
            let mut sm = Vec::with_capacity(t_grid.len());
            let mut df = Vec::with_capacity(t_grid.len());
            for &t in t_grid {
                let pf = f.heat_propagate(t).expect("t > 0");
                sm.push(if n_lo > 0.0 { t.powf(theta) * besov(&pf, hi) / n_lo } else { 0.0 });
                let diff = pf.sub(f).expect("same shape");
                df.push(if n_hi > 0.0 { besov(&diff, gamma) / (t.powf(theta) * n_hi) } else { 0.0 });
            }
            (sm, df)
        })
        .collect();
    let col_max = |pick: fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>| -> Vec<f64> {
        (0..t_grid.len())
            .map(|i| rows.iter().map(|r| pick(r)[i]).fold(0.0, f64::max))
            .collect()
    };
    let smoothing_by_t = col_max(|r| &r.0);
    let difference_by_t = col_max(|r| &r.1);
    Ok(SchauderReport {
        gamma,
        theta,
        t_grid: t_grid.to_vec(),
        ensemble_size: ensemble.len(),
        smoothing: smoothing_by_t.iter().cloned().fold(0.0, f64::max),
        difference: difference_by_t.iter().cloned().fold(0.0, f64::max),
        smoothing_by_t,
        difference_by_t,
    })
}

/// `sup ||grad g||_{C^gamma} / ||g||_{C^{gamma+1}}` over a scalar ensemble.
pub fn bernstein_constant(ensemble: &[SpectralField], gamma: f64) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(SfpeError::EmptyEnsemble);
    }
    let ratios = ensemble
        .par_iter()
        .map(|g| {
            let den = besov(g, gamma + 1.0);
            Ok(if den > 0.0 { besov(&g.gradient()?, gamma) / den } else { 0.0 })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::sample_regular_field;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn g1(n: usize) -> Grid {
        Grid::new(1, n, TAU).unwrap()
    }

    #[test]
    fn partition_examples() {
        let g = g1(64);
        let c = SpectralField::constant(g, 2.5);
        let sups = block_sups(&c);
        assert_relative_eq!(sups[0], 2.5);
        assert!(sups[1..].iter().all(|s| *s == 0.0));

        let m = SpectralField::real_mode(g, [4, 0], Complex64::new(0.5, 0.0)).unwrap();
        let sups = block_sups(&m);
        for (i, s) in sups.iter().enumerate() {
            let j = i as i32 - 1;
            if j == 3 {
                assert_relative_eq!(*s, 1.0, epsilon = 1e-12);
            } else {
                assert_eq!(*s, 0.0);
            }
        }
        assert_relative_eq!(besov_norm(&m, 0.4).besov_norm, 2f64.powf(1.2), epsilon = 1e-12);
        assert_relative_eq!(besov_norm(&c, -0.3).besov_norm, 2.5);
        assert_relative_eq!(besov_norm(&c, 0.7).besov_norm, 2.5);
    }

    #[test]
    fn every_mode_in_exactly_one_block() {
        for g in [g1(128), Grid::new(1, 64, 16.0 * std::f64::consts::PI).unwrap(), Grid::new(2, 16, 3.0).unwrap()] {
            let f = sample_regular_field(&g, 1, 0.3, 0.05, 3, 0, 0);
            let mut acc = SpectralField::zeros(g, 1);
            for j in -1..=max_level(&g) {
                acc = acc.add(&dyadic_block(&f, j).unwrap()).unwrap();
            }
            assert!(acc.sub(&f).unwrap().max_abs_coeff() <= 1e-12 * f.max_abs_coeff());
            assert!(matches!(
                dyadic_block(&f, max_level(&g) + 1),
                Err(SfpeError::LevelOutOfRange { .. })
            ));
        }
    }

    #[test]
    fn refined_sup_matches_dense_evaluation() {
        let g = g1(256);
        let f = sample_regular_field(&g, 1, -0.2, 0.05, 17, 0, 0);
        let sups = block_sups(&f);
        for j in [2, 5, 7] {
            let b = dyadic_block(&f, j).unwrap().resample(1 << 16).unwrap();
            let dense = b.to_physical().sup();
            let s = sups[(j + 1) as usize];
            assert!(s >= dense * (1.0 - 1e-9), "j={j} {s} < {dense}");
            assert!(s <= dense * (1.0 + 1e-5), "j={j} {s} >> {dense}");
        }
    }

    #[test]
    fn scaling_law_single_mode() {
        // f(2x) on the half-length torus has the same coefficients at doubled frequency.
        let a = SpectralField::real_mode(g1(64), [5, 0], Complex64::new(0.5, 0.0)).unwrap();
        let half = Grid::new(1, 64, TAU / 2.0).unwrap();
        let b = SpectralField::real_mode(half, [5, 0], Complex64::new(0.5, 0.0)).unwrap();
        let (sa, sb) = (block_sups(&a), block_sups(&b));
        for j in 0..sa.len() - 1 {
            assert_relative_eq!(sb[j + 1], sa[j], epsilon = 1e-12);
        }
    }

    #[test]
    fn holder_of_constant_and_sine() {
        let g = g1(256);
        let c = SpectralField::constant(g, -3.0);
        let r = holder_norm(&c, 0.5).unwrap();
        assert_relative_eq!(r.holder_sup.unwrap(), 3.0, epsilon = 1e-14);
        assert_eq!(r.holder_seminorm.unwrap(), 0.0);
        assert!(holder_norm(&c, 1.0).is_err());

        let s = SpectralField::real_mode(g, [1, 0], Complex64::new(0.0, -0.5)).unwrap();
        let rep = holder_norm(&s, 0.5).unwrap();
        let x: Vec<f64> = (0..256).map(|i| i as f64 * g.dx()).collect();
        let mut best = 0.0f64;
        for i in 0..256 {
            for j in 0..256 {
                if i != j {
                    let d = (x[i] - x[j]).abs().min(TAU - (x[i] - x[j]).abs());
                    best = best.max((x[i].sin() - x[j].sin()).abs() / d.sqrt());
                }
            }
        }
        assert_relative_eq!(rep.holder_seminorm.unwrap(), best, max_relative = 1e-12);
    }

    #[test]
    fn rho_norm_definitions() {
        let g = g1(32);
        let f = SpectralField::real_mode(g, [3, 0], Complex64::new(1.0, 0.0)).unwrap();
        let times = TimeField::uniform_times(1.0, 4);
        let v = TimeField::constant(times.clone(), f.clone()).unwrap();
        let plain = rho_norm(&v, 0.0, 0.2).unwrap();
        assert_relative_eq!(plain, besov(&f, 0.2), max_relative = 1e-14);
        let weighted = rho_norm(&v, 3.0, 0.2).unwrap();
        assert_relative_eq!(weighted, plain, max_relative = 1e-14);
        assert_eq!(rho_distance(&v, &v, 2.0, 0.2).unwrap(), 0.0);
        assert!(rho_norm(&v, -1.0, 0.2).is_err());
    }

    #[test]
    fn schauder_single_mode_closed_form() {
        let g = g1(64);
        let f = SpectralField::real_mode(g, [8, 0], Complex64::new(0.5, 0.0)).unwrap();
        let (gamma, theta, t) = (-0.25, 0.775, 0.01);
        let r = schauder_constants(&[f], gamma, theta, &[t]).unwrap();
        // single block j=4, |xi| = 8
        let j = 4.0;
        let want = t.powf(theta) * 2f64.powf(j * (2.0 * theta + gamma)) * (-0.5 * t * 64.0f64).exp()
            / 2f64.powf(j * gamma);
        assert_relative_eq!(r.smoothing, want, max_relative = 1e-12);
        let want_d = (1.0 - (-32.0 * t).exp()) * 2f64.powf(j * gamma)
            / (t.powf(theta) * 2f64.powf(j * (2.0 * theta + gamma)));
        assert_relative_eq!(r.difference, want_d, max_relative = 1e-12);
        assert!(matches!(
            schauder_constants(&[], gamma, theta, &[t]),
            Err(SfpeError::EmptyEnsemble)
        ));
    }

    #[test]
    fn heat_difference_vanishes_monotonically() {
        let g = g1(128);
        let f = sample_regular_field(&g, 1, 0.5, 0.05, 8, 0, 0);
        let mut prev = f64::INFINITY;
        let scale = besov(&f, 0.2);
        for t in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8] {
            let d = besov(&f.heat_propagate(t).unwrap().sub(&f).unwrap(), 0.2);
            assert!(d < prev);
            prev = d;
        }
        assert!(prev < 1e-3 * scale);
    }

    #[test]
    fn linear_fit_exact_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 * i as f64 - 1.0)).collect();
        let (a, b, r2) = linear_fit(&pts);
        assert_relative_eq!(a, 2.0, epsilon = 1e-14);
        assert_relative_eq!(b, -1.0, epsilon = 1e-14);
        assert_relative_eq!(r2, 1.0, epsilon = 1e-14);
    }
}
