//! Outer fixed point `v = tau(v)` for the non-local equation
//! `dv/dt = Δv/2 - div(v F(K*v) b)`, where `tau(w)` solves the linear equation
//! with the frozen drift `g_w = F(K*w) b`.
//!
//! After the first sweep the iteration is carried in correction form:
//! `delta_k = tau(w_k) - tau(w_{k-1})` solves
//! `u = -D[div(u g_{w_k})] - D[div(w_k (g_{w_k} - g_{w_{k-1}}))]`,
//! with the drift difference evaluated from `delta_{k-1}` directly.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::besov::{besov, linear_fit, log_rho_weighted};
use crate::drift::mollify;
use crate::error::{invalid, Result, SfpeError};
use crate::field::{check_probability_kernel, SpectralField, TimeField};
use crate::linear::{
    drift_norm, drift_response, heat_flow, mass_and_min, picard_affine, resolve_rho, solve_linear_with, Duhamel, Rho,
    SolveReport, SolverConfig,
};
use crate::nonlinearity::{assemble_gw, assemble_gw_difference, c_fk, kernel_norms, NonlinearitySpec};
use crate::special::mittag_leffler_series;

/// Working cap on the outer metric weight.
pub const RHO_CAP: f64 = 1e8;

fn default_outer_tol() -> f64 {
    1e-7
}
fn default_outer_iters() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearConfig {
    pub solver: SolverConfig,
    #[serde(default = "default_outer_tol")]
    pub outer_tol: f64,
    #[serde(default = "default_outer_iters")]
    pub max_outer_iters: usize,
    #[serde(default)]
    pub outer_rho: Rho,
    /// Overrides the constant computed from the kernel and `F`.
    #[serde(default)]
    pub c_fk: Option<f64>,
    /// Rerun from the frozen initial guess and report the distance.
    #[serde(default)]
    pub uniqueness_probe: bool,
}

impl NonlinearConfig {
    pub fn new(solver: SolverConfig) -> Self {
        Self {
            solver,
            outer_tol: default_outer_tol(),
            max_outer_iters: default_outer_iters(),
            outer_rho: Rho::Auto,
            c_fk: None,
            uniqueness_probe: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if !(self.outer_tol > 0.0) {
            return Err(invalid("outer_tol", "must be positive"));
        }
        if self.max_outer_iters == 0 {
            return Err(invalid("max_outer_iters", "must be positive"));
        }
        if let Some(c) = self.c_fk {
            if !(c > 0.0) {
                return Err(invalid("c_fk", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Starting point of the outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    /// `w(t) = P_t v0`
    #[default]
    HeatFlow,
    /// `w(t) = v0`
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessProbe {
    pub d_rho_beta: f64,
    pub log_d_rho_beta: f64,
    pub plain_distance: f64,
    pub probe_iterates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearReport {
    pub outer_iterates: usize,
    pub d_rho_beta_history: Vec<f64>,
    pub log_d_rho_beta_history: Vec<f64>,
    pub plain_history: Vec<f64>,
    pub contraction_ratios: Vec<f64>,
    /// Picard iterations of each inner solve.
    pub inner_iterations: Vec<usize>,
    /// Contraction ratios of each inner solve.
    pub inner_contraction_ratios: Vec<Vec<f64>>,
    #[serde(rename = "M0_bound")]
    pub m0_bound: f64,
    pub ln_m0_bound: f64,
    /// `max_t ||w_k(t)||_beta` per outer iterate.
    pub ball_trace: Vec<f64>,
    pub uniqueness_probe: Option<UniquenessProbe>,
    /// Metric weight used for `d_rho_beta`.
    pub rho: f64,
    /// `ln` of the contraction recipe value.
    pub ln_rho_recipe: f64,
    pub rho_capped: bool,
    pub b_norm: f64,
    pub c_fk: f64,
    pub v0_norm_beta: f64,
    /// Plain distance `||tau(v) - v||` for the returned `v`.
    pub fixed_point_residual: f64,
    pub log_fixed_point_residual_rho: f64,
    pub mass_trace: Vec<f64>,
    pub min_value_trace: Vec<f64>,
    /// Outer iterates leaving `S_L1` (mass above `1 + 1e-6` or min below `-1e-6 max`).
    pub s_l1_violations: usize,
}

fn theta_of(cfg: &SolverConfig) -> f64 {
    cfg.theta()
}

/// `ln M0(x)` with `M0(x) = c ||v0||_beta E_{1-theta}(C_FK x T^{1-theta} Gamma(1-theta))`.
pub fn ln_m0_bound(b_norm: f64, v0_norm_beta: f64, c_fk: f64, cfg: &SolverConfig) -> Result<f64> {
    let a = 1.0 - theta_of(cfg);
    let arg = c_fk * b_norm * cfg.horizon.powf(a) * gamma(a);
    Ok(cfg.bony_c.ln() + v0_norm_beta.ln() + mittag_leffler_series(arg, a)?.ln_value)
}

pub fn m0_bound(b_norm: f64, v0_norm_beta: f64, c_fk: f64, cfg: &SolverConfig) -> Result<f64> {
    Ok(ln_m0_bound(b_norm, v0_norm_beta, c_fk, cfg)?.exp())
}

/// `ln rho` with `rho^{theta-1} Gamma(1-theta) c C_FK ||b|| = 1/(6M + 2)`.
pub fn ln_outer_rho(ln_m: f64, b_norm: f64, c_fk: f64, cfg: &SolverConfig) -> f64 {
    let a = 1.0 - theta_of(cfg);
    // ln(6M + 2) for M = e^{ln_m}, safe for huge M
    let ln_6m2 = if ln_m > 30.0 {
        6f64.ln() + ln_m
    } else {
        (6.0 * ln_m.exp() + 2.0).ln()
    };
    (ln_6m2 + cfg.bony_c.ln() + c_fk.ln() + b_norm.ln() + ln_gamma(a)) / a
}

fn check_density(v0: &SpectralField) -> Result<()> {
    if v0.components() != 1 {
        return Err(SfpeError::ComponentMismatch {
            expected: 1,
            got: v0.components(),
        });
    }
    let p = v0.to_physical();
    let mass = v0.integral();
    if (mass - 1.0).abs() > 1e-10 || p.min() < -1e-12 * p.max().abs() {
        return Err(SfpeError::Normalization { integral: mass, min: p.min() });
    }
    Ok(())
}

/// Linear solve with drift `g_w`.
pub fn tau(
    w: &TimeField,
    b: &TimeField,
    kernel: &SpectralField,
    nl: &NonlinearitySpec,
    v0: &SpectralField,
    cfg: &SolverConfig,
) -> Result<(TimeField, SolveReport)> {
    if let Some(m) = w.snapshots().iter().map(|s| s.integral()).find(|m| *m > 1.0 + 1e-6) {
        return Err(invalid("w", format!("mass {m} exceeds 1 + 1e-6")));
    }
    let g = assemble_gw(w, b, kernel, nl)?;
    crate::linear::solve_linear(&g, v0, cfg)
}

struct Problem<'a> {
    b: &'a TimeField,
    kernel: &'a SpectralField,
    nl: &'a NonlinearitySpec,
    v0: &'a SpectralField,
    cfg: &'a NonlinearConfig,
    duhamel: Duhamel,
    rho: f64,
}

struct OuterRun {
    v: TimeField,
    log_hist: Vec<f64>,
    plain_hist: Vec<f64>,
    inner_iterations: Vec<usize>,
    inner_ratios: Vec<Vec<f64>>,
    ball_trace: Vec<f64>,
    residual_plain: f64,
    residual_log_rho: f64,
    violations: usize,
}

fn node_norms(f: &TimeField, beta: f64) -> Vec<f64> {
    f.snapshots().par_iter().map(|s| besov(s, beta)).collect()
}

fn violates_s_l1(w: &TimeField) -> bool {
    let (mass, min) = mass_and_min(w);
    let max: Vec<f64> = w.snapshots().par_iter().map(|s| s.to_physical().max()).collect();
    mass.iter()
        .zip(&min)
        .zip(&max)
        .any(|((m, lo), hi)| *m > 1.0 + 1e-6 || *lo < -1e-6 * hi.abs())
}

impl Problem<'_> {
    fn initial(&self, guess: InitialGuess) -> Result<TimeField> {
        let times = self.b.times();
        match guess {
            InitialGuess::HeatFlow => heat_flow(self.v0, times),
            InitialGuess::Frozen => TimeField::constant(times.to_vec(), self.v0.clone()),
        }
    }

    fn next_difference(&self, w: &TimeField, delta: &TimeField) -> Result<(TimeField, Option<Vec<f64>>, usize)> {
        let s_cfg = &self.cfg.solver;
        let dg = assemble_gw_difference(w, delta, self.b, self.kernel, self.nl)?;
        let source = drift_response(w.snapshots(), &dg, &self.duhamel)?;
        let source = TimeField::new(w.times().to_vec(), source)?;
        let scale = node_norms(&source, s_cfg.beta).into_iter().fold(0.0, f64::max);
        if scale == 0.0 {
            return Ok((source, None, 0));
        }
        let g = assemble_gw(w, self.b, self.kernel, self.nl)?;
        let rho = resolve_rho(s_cfg, drift_norm(&g, s_cfg.alpha));
        let (u, trace) = picard_affine(
            &source,
            &g,
            &self.duhamel,
            rho,
            s_cfg.beta,
            s_cfg.picard_tol * scale,
            s_cfg.max_picard_iters,
        )?;
        let n = trace.plain_distances.len();
        Ok((u, Some(trace.contraction_ratios()), n))
    }

    fn run(&self, guess: InitialGuess) -> Result<OuterRun> {
        let beta = self.cfg.solver.beta;
        let times = self.b.times().to_vec();
        let mut w = self.initial(guess)?;
        let g = assemble_gw(&w, self.b, self.kernel, self.nl)?;
        let (y, rep) = solve_linear_with(&g, self.v0, &self.cfg.solver, &self.duhamel)?;
        let mut run = OuterRun {
            v: w.clone(),
            log_hist: Vec::new(),
            plain_hist: Vec::new(),
            inner_iterations: vec![rep.iterates],
            inner_ratios: vec![rep.contraction_ratios],
            ball_trace: Vec::new(),
            residual_plain: 0.0,
            residual_log_rho: f64::NEG_INFINITY,
            violations: 0,
        };
        let mut delta = y.sub(&w)?;
        let mut converged = false;
        loop {
            let norms = node_norms(&delta, beta);
            let plain = norms.iter().cloned().fold(0.0, f64::max);
            let log_rho = log_rho_weighted(&times, &norms, self.rho);
            if converged {
                run.residual_plain = plain;
                run.residual_log_rho = log_rho;
                break;
            }
            if !plain.is_finite() || (run.plain_hist.len() > 2 && plain > 1e6 * run.plain_hist[0].max(1e-300)) {
                return Err(SfpeError::NonContraction(format!(
                    "outer iterate difference reached {plain} after {} iterations; \
                     try a larger rho or a smaller drift amplitude",
                    run.plain_hist.len()
                )));
            }
            run.log_hist.push(log_rho);
            run.plain_hist.push(plain);
            w = w.add(&delta)?;
            run.ball_trace.push(node_norms(&w, beta).into_iter().fold(0.0, f64::max));
            if violates_s_l1(&w) {
                run.violations += 1;
            }
            converged = plain < self.cfg.outer_tol;
            if !converged && run.plain_hist.len() >= self.cfg.max_outer_iters {
                return Err(SfpeError::NoConvergence {
                    iterations: run.plain_hist.len(),
                    last: plain,
                    history: run.plain_hist,
                });
            }
            let (next, ratios, iters) = self.next_difference(&w, &delta)?;
            run.inner_iterations.push(iters);
            run.inner_ratios.push(ratios.unwrap_or_default());
            delta = next;
        }
        run.v = w;
        Ok(run)
    }
}

fn ratios_from_logs(logs: &[f64]) -> Vec<f64> {
    logs.windows(2)
        .map(|w| if w[0] == f64::NEG_INFINITY { 0.0 } else { (w[1] - w[0]).exp() })
        .collect()
}

/// Fixed point of `tau` starting from `w(t) = P_t v0`.
pub fn solve_nonlinear(
    b: &TimeField,
    kernel: &SpectralField,
    nl: &NonlinearitySpec,
    v0: &SpectralField,
    cfg: &NonlinearConfig,
) -> Result<(TimeField, NonlinearReport)> {
    solve_nonlinear_from(b, kernel, nl, v0, cfg, InitialGuess::HeatFlow)
}

pub fn solve_nonlinear_from(
    b: &TimeField,
    kernel: &SpectralField,
    nl: &NonlinearitySpec,
    v0: &SpectralField,
    cfg: &NonlinearConfig,
    guess: InitialGuess,
) -> Result<(TimeField, NonlinearReport)> {
    cfg.validate()?;
    nl.validate()?;
    check_density(v0)?;
    check_probability_kernel(kernel)?;
    if b.grid() != v0.grid() || kernel.grid() != v0.grid() {
        return Err(SfpeError::ShapeMismatch("drift, kernel and v0 grids differ".into()));
    }
    let s = &cfg.solver;
    if b.times().len() != s.time_steps + 1 || (b.horizon() - s.horizon).abs() > 1e-12 * s.horizon {
        return Err(SfpeError::ShapeMismatch(format!(
            "drift has {} nodes up to {}, solver expects {} up to {}",
            b.len(),
            b.horizon(),
            s.time_steps + 1,
            s.horizon
        )));
    }
    let b_norm = drift_norm(b, s.alpha);
    let cfk = match cfg.c_fk {
        Some(c) => c,
        None => c_fk(nl, &kernel_norms(kernel, s.beta)?),
    };
    let v0_norm = besov(v0, s.beta);
    let ln_m0 = ln_m0_bound(b_norm, v0_norm, cfk, s)?;
    let ln_recipe = if b_norm > 0.0 {
        ln_outer_rho(ln_m0, b_norm, cfk, s)
    } else {
        f64::NEG_INFINITY
    };
    let (rho, capped) = match cfg.outer_rho {
        Rho::Fixed(r) => (r, false),
        Rho::Auto if ln_recipe > RHO_CAP.ln() => {
            warn!(
                "contraction recipe gives rho = e^{ln_recipe:.1} > {RHO_CAP:e}; the rho-metric certificate is vacuous \
                 at this horizon (consider splitting [0, T]); using rho = {RHO_CAP:e}"
            );
            (RHO_CAP, true)
        }
        Rho::Auto => (ln_recipe.exp(), false),
    };
    let problem = Problem {
        b,
        kernel,
        nl,
        v0,
        cfg,
        duhamel: Duhamel::new(*v0.grid(), b.times()),
        rho,
    };
    let run = problem.run(guess)?;
    let uniqueness_probe = if cfg.uniqueness_probe {
        let other_guess = match guess {
            InitialGuess::HeatFlow => InitialGuess::Frozen,
            InitialGuess::Frozen => InitialGuess::HeatFlow,
        };
        let other = problem.run(other_guess)?;
        let norms = node_norms(&run.v.sub(&other.v)?, s.beta);
        let log_d = log_rho_weighted(b.times(), &norms, rho);
        Some(UniquenessProbe {
            d_rho_beta: log_d.exp(),
            log_d_rho_beta: log_d,
            plain_distance: norms.into_iter().fold(0.0, f64::max),
            probe_iterates: other.plain_hist.len(),
        })
    } else {
        None
    };
    let (mass_trace, min_value_trace) = mass_and_min(&run.v);
    let report = NonlinearReport {
        outer_iterates: run.plain_hist.len(),
        d_rho_beta_history: run.log_hist.iter().map(|l| l.exp()).collect(),
        contraction_ratios: ratios_from_logs(&run.log_hist),
        log_d_rho_beta_history: run.log_hist,
        plain_history: run.plain_hist,
        inner_iterations: run.inner_iterations,
        inner_contraction_ratios: run.inner_ratios,
        m0_bound: ln_m0.exp(),
        ln_m0_bound: ln_m0,
        ball_trace: run.ball_trace,
        uniqueness_probe,
        rho,
        ln_rho_recipe: ln_recipe,
        rho_capped: capped,
        b_norm,
        c_fk: cfk,
        v0_norm_beta: v0_norm,
        fixed_point_residual: run.residual_plain,
        log_fixed_point_residual_rho: run.residual_log_rho,
        mass_trace,
        min_value_trace,
        s_l1_violations: run.violations,
    };
    Ok((run.v, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub levels: Vec<usize>,
    /// `||b - b_n||_{C_T C^{-alpha}}`
    pub drift_differences: Vec<f64>,
    /// `||v - v_n||_{C_T C^beta}`
    pub solution_differences: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Log-log regression of solution against drift differences.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Largest ratio: the measured Lipschitz factor.
    pub ell: f64,
    /// Set when a level's solve failed; the report then covers the levels before it.
    pub failure: Option<String>,
}

pub const DEFAULT_LEVELS: [usize; 4] = [4, 16, 64, 256];

/// Solves with `b` and with each `p_{1/n} * b` and regresses the solution
/// differences against the drift differences.
pub fn drift_continuity_experiment(
    b: &TimeField,
    kernel: &SpectralField,
    nl: &NonlinearitySpec,
    v0: &SpectralField,
    cfg: &NonlinearConfig,
    levels: &[usize],
) -> Result<ContinuityReport> {
    if levels.is_empty() {
        return Err(invalid("levels", "at least one mollification level is needed"));
    }
    let (beta, alpha) = (cfg.solver.beta, cfg.solver.alpha);
    let mut inner = cfg.clone();
    inner.uniqueness_probe = false;
    let (v, _) = solve_nonlinear(b, kernel, nl, v0, &inner)?;
    let runs: Vec<Result<(f64, f64)>> = levels
        .par_iter()
        .map(|&n| {
            let bn = mollify(b, n)?;
            let (vn, _) = solve_nonlinear(&bn, kernel, nl, v0, &inner)?;
            let db = drift_norm(&b.sub(&bn)?, alpha);
            let dv = node_norms(&v.sub(&vn)?, beta).into_iter().fold(0.0, f64::max);
            Ok((db, dv))
        })
        .collect();
    let mut report = ContinuityReport {
        levels: Vec::new(),
        drift_differences: Vec::new(),
        solution_differences: Vec::new(),
        ratios: Vec::new(),
        slope: f64::NAN,
        intercept: f64::NAN,
        r_squared: f64::NAN,
        ell: 0.0,
        failure: None,
    };
    for (&n, r) in levels.iter().zip(runs) {
        match r {
            Ok((db, dv)) => {
                report.levels.push(n);
                report.drift_differences.push(db);
                report.solution_differences.push(dv);
                let ratio = if db > 0.0 { dv / db } else { 0.0 };
                report.ratios.push(ratio);
                report.ell = report.ell.max(ratio);
            }
            Err(e) => {
                report.failure = Some(format!("level {n}: {e}"));
                break;
            }
        }
    }
    let pts: Vec<(f64, f64)> = report
        .drift_differences
        .iter()
        .zip(&report.solution_differences)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() >= 2 {
        let (s, i, r2) = linear_fit(&pts);
        report.slope = s;
        report.intercept = i;
        report.r_squared = r2;
    }
    Ok(report)
}
