//! Experiment drivers. Each writes its artifacts and returns the checks that
//! decide the exit status.

use std::path::PathBuf;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sfpe_core::besov::{besov, gaussian_regularity_estimate, schauder_constants, SchauderReport};
use sfpe_core::drift::{
    calibrate_amplitude, make_initial_density, make_kernel, mollify, sample_drift, sample_regular_field, DriftSpec,
};
use sfpe_core::linear::{positivity_mass_report, solve_linear, weak_residual, test_bank, MassReport, SolveReport};
use sfpe_core::nonlinear::{
    drift_continuity_experiment, ln_m0_bound, solve_nonlinear, ContinuityReport, NonlinearReport,
};
use sfpe_core::nonlinearity::{kernel_norms, phi, NonlinearitySpec};
use sfpe_core::oracle::fd_fokker_planck;
use sfpe_core::particles::{
    default_bandwidth, density_estimate, feynman_kac_solve, l1_distance, simulate_mckean, FeynmanKacConfig,
    ParticleConfig,
};
use sfpe_core::product::{bony_constant, stability, BonyReport, StabilityReport};
use sfpe_core::rng::CounterRng;
use sfpe_core::special::mittag_leffler_series;
use sfpe_core::{Grid, SpectralField, TimeField};

use crate::artifacts::ArtifactDir;
use crate::config::{DriftBlock, ExperimentConfig, ExperimentKind};
use crate::RunError;

pub const MASS_TOL: f64 = 1e-3;
pub const POSITIVITY_TOL: f64 = 1e-6;
pub const HEAT_FLOW_TOL: f64 = 1e-10;
pub const CONTRACTION_MAX: f64 = 0.7;
pub const OUTER_ITERATION_BUDGET: usize = 30;
pub const UNIQUENESS_TOL: f64 = 1e-7;
pub const DEGENERACY_TOL: f64 = 1e-9;
pub const FD_TOL: f64 = 1e-3;
pub const FK_SIGMAS: f64 = 3.0;
pub const SLOPE_RANGE: (f64, f64) = (0.8, 1.2);
pub const R_SQUARED_MIN: f64 = 0.95;
pub const BONY_VARIATION: f64 = 0.25;
pub const SCHAUDER_VARIATION: f64 = 0.2;
pub const ML_EXP_TOL: f64 = 1e-12;
pub const PARTICLE_L1_TOL: f64 = 0.05;
pub const MAX_NOISE_INVERSIONS: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("<= {max:e}"),
            passed: value <= max,
        }
    }

    pub fn at_least(name: &str, value: f64, min: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!(">= {min:e}"),
            passed: value >= min,
        }
    }

    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: format!("in [{lo}, {hi}]"),
            passed: value >= lo && value <= hi,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearRun {
    pub report: SolveReport,
    pub mass: MassReport,
    pub drift_norm: f64,
    pub weak_residual: f64,
    /// Largest per-mode relative deviation from the heat multiplier (zero drift only).
    pub heat_flow_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonlinearRun {
    pub report: NonlinearReport,
    pub mass: MassReport,
    /// `||v - v_lin||_{C_T C^beta}` against the linear solve with `g = lambda b`.
    pub degeneracy_distance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParticleRow {
    pub particles: usize,
    pub l1_to_pde: f64,
    pub l1_to_unmollified_pde: f64,
    pub bandwidth: f64,
    pub lipschitz_product: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParticlesRun {
    pub mollification: usize,
    pub steps: usize,
    pub rows: Vec<ParticleRow>,
    pub inversions: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MittagLefflerRow {
    pub x: f64,
    pub value: f64,
    pub abs_error_vs_exp: f64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct M0Row {
    pub b_norm: f64,
    pub ln_m0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BesovRun {
    pub schauder: Vec<SchauderReport>,
    pub smoothing_stability: StabilityReport,
    pub difference_stability: StabilityReport,
    pub mittag_leffler: Vec<MittagLefflerRow>,
    pub m0_curve: Vec<M0Row>,
    /// Regularity estimate of the configured drift at time 0 (sampled drifts only).
    pub drift_regularity: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductRun {
    pub bony: Vec<BonyReport>,
    pub bony_stability: StabilityReport,
    pub f_at_zero: f64,
    pub f_prime_sup: f64,
    pub kernel_sup: f64,
    pub l1_ratios: Vec<f64>,
    pub l1_bound: f64,
    pub l1_violations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeRow {
    pub x: f64,
    pub y: Option<f64>,
    pub fk_mean: f64,
    pub fk_std_error: f64,
    pub spectral: f64,
    pub z_score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FkRun {
    pub linear: SolveReport,
    pub fd_sup_error: f64,
    pub fd_nodes_compared: usize,
    pub probes: Vec<ProbeRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Report {
    SolveLinear(LinearRun),
    SolveNonlinear(NonlinearRun),
    Particles(ParticlesRun),
    VerifyBesov(BesovRun),
    VerifyProduct(ProductRun),
    ContinuityExperiment(ContinuityReport),
    FkCrosscheck(FkRun),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutcome {
    pub output: PathBuf,
    pub checks: Vec<Check>,
    pub report: Report,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Fields shared by every experiment.
pub struct Inputs {
    pub grid: Grid,
    pub v0: SpectralField,
    pub kernel: SpectralField,
    pub b: TimeField,
    pub times: Vec<f64>,
}

impl Inputs {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self, RunError> {
        let grid = cfg.grid()?;
        let times = cfg.solver_config().times();
        let v0 = make_initial_density(&cfg.initial_spec(), &grid)?;
        let kernel = make_kernel(&grid, cfg.kernel.sigma)?;
        let b = build_drift(cfg, &grid, &times)?;
        Ok(Self {
            grid,
            v0,
            kernel,
            b,
            times,
        })
    }
}

pub fn build_drift(cfg: &ExperimentConfig, grid: &Grid, times: &[f64]) -> Result<TimeField, RunError> {
    let d = grid.dim();
    let field = match &cfg.drift {
        DriftBlock::Zero => TimeField::constant(times.to_vec(), SpectralField::zeros(*grid, d))?,
        DriftBlock::Sampled {
            beta,
            eps_reg,
            decay_exponent,
            band_limit,
            seed,
            time_profile,
            amplitude,
            calibrate_to,
            mollify: level,
            scale,
        } => {
            let mut spec = DriftSpec {
                beta: *beta,
                eps_reg: *eps_reg,
                decay_exponent: *decay_exponent,
                band_limit: *band_limit,
                seed: seed.unwrap_or(cfg.seed),
                time_profile: *time_profile,
                amplitude: *amplitude,
            };
            if let Some(target) = calibrate_to {
                spec = calibrate_amplitude(&spec, grid, times, cfg.exponents.alpha, *target)?;
            }
            let b = sample_drift(&spec, grid, times)?.scale(*scale);
            match level {
                Some(n) => mollify(&b, *n)?,
                None => b,
            }
        }
        DriftBlock::Modes { modes, scale } => {
            let mut parts = vec![SpectralField::zeros(*grid, 1); d];
            for m in modes {
                let k = [m.k[0], if d == 2 { m.k[1] } else { 0 }];
                let term = SpectralField::real_mode(*grid, k, Complex64::new(m.re, m.im))?;
                parts[m.component] = parts[m.component].add(&term)?;
            }
            let f = SpectralField::from_scalars(parts)?;
            TimeField::constant(times.to_vec(), f)?.scale(*scale)
        }
    };
    Ok(field)
}

pub fn execute(cfg: &ExperimentConfig, out: &ArtifactDir) -> Result<RunOutcome, RunError> {
    out.text("config.toml", &cfg.to_toml())?;
    let (report, checks) = match cfg.experiment {
        ExperimentKind::SolveLinear => run_linear(cfg, out)?,
        ExperimentKind::SolveNonlinear => run_nonlinear(cfg, out)?,
        ExperimentKind::Particles => run_particles(cfg, out)?,
        ExperimentKind::VerifyBesov => run_besov(cfg, out)?,
        ExperimentKind::VerifyProduct => run_product(cfg, out)?,
        ExperimentKind::ContinuityExperiment => run_continuity(cfg, out)?,
        ExperimentKind::FkCrosscheck => run_fk(cfg, out)?,
    };
    out.json("report.json", &report)?;
    out.json("checks.json", &checks)?;
    Ok(RunOutcome {
        output: out.path().to_path_buf(),
        checks,
        report,
    })
}

#[derive(Serialize)]
struct MassRow {
    time: f64,
    mass: f64,
    min: f64,
    max: f64,
}

fn mass_rows(m: &MassReport) -> Vec<MassRow> {
    (0..m.times.len())
        .map(|i| MassRow {
            time: m.times[i],
            mass: m.mass[i],
            min: m.min_value[i],
            max: m.max_value[i],
        })
        .collect()
}

#[derive(Serialize)]
struct ContractionRow {
    iteration: usize,
    log_d_rho_beta: f64,
    d_plain: f64,
    ratio: Option<f64>,
}

fn contraction_rows(log_d: &[f64], plain: &[f64], ratios: &[f64]) -> Vec<ContractionRow> {
    (0..log_d.len())
        .map(|i| ContractionRow {
            iteration: i + 1,
            log_d_rho_beta: log_d[i],
            d_plain: plain.get(i).copied().unwrap_or(f64::NAN),
            ratio: if i == 0 { None } else { ratios.get(i - 1).copied() },
        })
        .collect()
}

fn mass_checks(m: &MassReport) -> Vec<Check> {
    let worst_negative = m
        .min_value
        .iter()
        .zip(&m.max_value)
        .map(|(lo, hi)| lo / hi.abs().max(f64::MIN_POSITIVE))
        .fold(f64::INFINITY, f64::min);
    vec![
        Check::at_most("mass_conservation", m.max_mass_deviation(), MASS_TOL),
        Check::at_least("positivity", worst_negative, -POSITIVITY_TOL),
    ]
}

/// Largest per-mode relative error of `v(t)` against `exp(-t |xi|^2 / 2) v0`,
/// over modes whose expected coefficient is a normal float.
pub fn heat_flow_error(v: &TimeField, v0: &SpectralField) -> f64 {
    let g = *v0.grid();
    let mut worst = 0.0f64;
    for (t, s) in v.times().iter().zip(v.snapshots()) {
        for (i, (got, init)) in s.component(0).iter().zip(v0.component(0)).enumerate() {
            let want = init * (-0.5 * t * g.xi_norm_sq(i)).exp();
            if want.norm() >= f64::MIN_POSITIVE {
                worst = worst.max((got - want).norm() / want.norm());
            } else if got.norm() >= f64::MIN_POSITIVE {
                worst = f64::INFINITY;
            }
        }
    }
    worst
}

fn run_linear(cfg: &ExperimentConfig, out: &ArtifactDir) -> Result<(Report, Vec<Check>), RunError> {
    let inp = Inputs::build(cfg)?;
    let scfg = cfg.solver_config();
    let (v, report) = solve_linear(&inp.b, &inp.v0, &scfg)?;
    let mass = positivity_mass_report(&v);
    let residual = weak_residual(&v, &inp.b, &inp.v0, &test_bank(&inp.grid))?;
    let zero = matches!(cfg.drift, DriftBlock::Zero);
    let heat = zero.then(|| heat_flow_error(&v, &inp.v0));
    out.time_field("solution.bin", &v)?;
    out.time_field("drift.bin", &inp.b)?;
    out.csv("mass_trace.csv", &mass_rows(&mass))?;
    out.csv(
        "contraction.csv",
        &contraction_rows(&report.log_residual_history, &report.plain_history, &report.contraction_ratios),
    )?;
    let mut checks = mass_checks(&mass);
    if let Some(e) = heat {
        checks.push(Check::at_most("heat_flow_exactness", e, HEAT_FLOW_TOL));
    }
    let run = LinearRun {
        drift_norm: report.g_norm,
        report,
        mass,
        weak_residual: residual,
        heat_flow_error: heat,
    };
    Ok((Report::SolveLinear(run), checks))
}

/// Largest ratio after the first, or 0 when there is none.
fn late_ratio(r: &[f64]) -> f64 {
    r.iter().skip(1).cloned().fold(0.0, f64::max)
}

fn run_nonlinear(cfg: &ExperimentConfig, out: &ArtifactDir) -> Result<(Report, Vec<Check>), RunError> {
    let inp = Inputs::build(cfg)?;
    let ncfg = cfg.nonlinear_config();
    let (v, report) = solve_nonlinear(&inp.b, &inp.kernel, &cfg.nonlinearity, &inp.v0, &ncfg)?;
    let mass = positivity_mass_report(&v);
    let degeneracy = match cfg.nonlinearity.constant_value() {
        Some(lambda) => {
            let (vl, _) = solve_linear(&inp.b.scale(lambda), &inp.v0, &ncfg.solver)?;
            let diff = v.sub(&vl)?;
            Some(
                diff.snapshots()
                    .par_iter()
                    .map(|s| besov(s, cfg.exponents.beta))
                    .reduce(|| 0.0, f64::max),
            )
        }
        None => None,
    };
    out.time_field("solution.bin", &v)?;
    out.time_field("drift.bin", &inp.b)?;
    out.csv("mass_trace.csv", &mass_rows(&mass))?;
    out.csv(
        "contraction.csv",
        &contraction_rows(&report.log_d_rho_beta_history, &report.plain_history, &report.contraction_ratios),
    )?;
    #[derive(Serialize)]
    struct InnerRow {
        outer: usize,
        step: usize,
        ratio: f64,
    }
    let inner: Vec<InnerRow> = report
        .inner_contraction_ratios
        .iter()
        .enumerate()
        .flat_map(|(o, rs)| {
            rs.iter().enumerate().map(move |(s, r)| InnerRow {
                outer: o + 1,
                step: s + 1,
                ratio: *r,
            })
        })
        .collect();
    out.csv("inner_contraction.csv", &inner)?;

    let mut checks = mass_checks(&mass);
    checks.push(Check::at_most(
        "outer_iterations",
        report.outer_iterates as f64,
        OUTER_ITERATION_BUDGET as f64,
    ));
    checks.push(Check::at_most(
        "outer_contraction",
        late_ratio(&report.contraction_ratios),
        CONTRACTION_MAX,
    ));
    checks.push(Check::at_most(
        "inner_contraction",
        report
            .inner_contraction_ratios
            .iter()
            .map(|r| late_ratio(r))
            .fold(0.0, f64::max),
        CONTRACTION_MAX,
    ));
    if let Some(p) = &report.uniqueness_probe {
        checks.push(Check::at_most("uniqueness_d_rho_beta", p.d_rho_beta, UNIQUENESS_TOL));
        checks.push(Check::at_most("uniqueness_plain", p.plain_distance, UNIQUENESS_TOL));
    }
    if let Some(d) = degeneracy {
        checks.push(Check::at_most("degeneracy_collapse", d, DEGENERACY_TOL));
    }
    let run = NonlinearRun {
        report,
        mass,
        degeneracy_distance: degeneracy,
    };
    Ok((Report::SolveNonlinear(run), checks))
}

fn run_continuity(cfg: &ExperimentConfig, out: &ArtifactDir) -> Result<(Report, Vec<Check>), RunError> {
    let inp = Inputs::build(cfg)?;
    let mut ncfg = cfg.nonlinear_config();
    ncfg.uniqueness_probe = false;
    let r = drift_continuity_experiment(
        &inp.b,
        &inp.kernel,
        &cfg.nonlinearity,
        &inp.v0,
        &ncfg,
        &cfg.continuity.levels,
    )?;
    #[derive(Serialize)]
    struct Row {
        level: usize,
        drift_difference: f64,
        solution_difference: f64,
        ratio: f64,
    }
    let rows: Vec<Row> = (0..r.levels.len())
        .map(|i| Row {
            level: r.levels[i],
            drift_difference: r.drift_differences[i],
            solution_difference: r.solution_differences[i],
            ratio: r.ratios[i],
        })
        .collect();
    out.csv("continuity.csv", &rows)?;
    #[derive(Serialize)]
    struct Fit {
        slope: f64,
        intercept: f64,
        r_squared: f64,
    }
    out.csv(
        "regression.csv",
        &[Fit {
            slope: r.slope,
            intercept: r.intercept,
            r_squared: r.r_squared,
        }],
    )?;
    let checks = vec![
        Check::at_most("levels_failed", if r.failure.is_some() { 1.0 } else { 0.0 }, 0.0),
        Check::within("continuity_slope", r.slope, SLOPE_RANGE.0, SLOPE_RANGE.1),
        Check::at_least("continuity_r_squared", r.r_squared, R_SQUARED_MIN),
    ];
    Ok((Report::ContinuityExperiment(r), checks))
}

fn default_probes(grid: &Grid) -> Vec<Vec<f64>> {
    let c = grid.length() / 2.0;
    [-3.0, -1.5, 0.0, 1.5, 3.0]
        .iter()
        .map(|d| vec![c + d; grid.dim()])
        .collect()
}

fn run_fk(cfg: &ExperimentConfig, out: &ArtifactDir) -> Result<(Report, Vec<Check>), RunError> {
    let inp = Inputs::build(cfg)?;
    let scfg = cfg.solver_config();
    let fd_steps = cfg.oracle.fd_steps;
    if fd_steps % scfg.time_steps != 0 {
        return Err(RunError::Config(crate::config::ConfigError::Invalid(format!(
            "oracle.fd_steps ({fd_steps}) must be a multiple of solver.time_steps ({})",
            scfg.time_steps
        ))));
    }
    let (v, linear) = solve_linear(&inp.b, &inp.v0, &scfg)?;
    let fd = fd_fokker_planck(&inp.b, &inp.v0, scfg.horizon, fd_steps, fd_steps / scfg.time_steps)?;
    let mut fd_err = 0.0f64;
    for (s, vals) in v.snapshots().iter().zip(&fd.values) {
        let p = s.to_physical();
        for (a, b) in p.values[0].iter().zip(vals) {
            fd_err = fd_err.max((a - b).abs());
        }
    }
    let probes = if cfg.oracle.probes.is_empty() {
        default_probes(&inp.grid)
    } else {
        cfg.oracle.probes.clone()
    };
    let fk_cfg = FeynmanKacConfig {
        paths: cfg.oracle.fk_paths,
        steps: cfg.oracle.fk_steps,
        seed: cfg.seed,
    };
    let est = feynman_kac_solve(&inp.b, &inp.v0, scfg.horizon, &probes, &fk_cfg)?;
    let terminal = sfpe_core::interp::Interpolator::new(v.snapshot(v.len() - 1));
    let rows: Vec<ProbeRow> = est
        .iter()
        .map(|e| {
            let s = terminal.eval(0, &e.point);
            ProbeRow {
                x: e.point[0],
                y: e.point.get(1).copied(),
                fk_mean: e.mean,
                fk_std_error: e.std_error,
                spectral: s,
                z_score: (e.mean - s) / e.std_error,
            }
        })
        .collect();
    out.time_field("solution.bin", &v)?;
    out.csv("feynman_kac.csv", &rows)?;
    let fd_final: Vec<f64> = fd.values.last().cloned().unwrap_or_default();
    out.raw("fd_terminal.f64", &fd_final)?;
    let worst_z = rows.iter().map(|r| r.z_score.abs()).fold(0.0, f64::max);
    let checks = vec![
        Check::at_most("finite_difference_sup", fd_err, FD_TOL),
        Check::at_most("feynman_kac_max_z", worst_z, FK_SIGMAS),
    ];
    let run = FkRun {
        linear,
        fd_sup_error: fd_err,
        fd_nodes_compared: fd.values.len(),
        probes: rows,
    };
    Ok((Report::FkCrosscheck(run), checks))
}

fn run_particles(cfg: &ExperimentConfig, out: &ArtifactDir) -> Result<(Report, Vec<Check>), RunError> {
    let inp = Inputs::build(cfg)?;
    let pb = &cfg.particles;
    let mut ncfg = cfg.nonlinear_config();
    ncfg.uniqueness_probe = false;
    let bn = if pb.mollification > 0 {
        mollify(&inp.b, pb.mollification)?
    } else {
        inp.b.clone()
    };
    let (vn, _) = solve_nonlinear(&bn, &inp.kernel, &cfg.nonlinearity, &inp.v0, &ncfg)?;
    let vn_t = vn.snapshot(vn.len() - 1).clone();
    let rough_t = if pb.mollification > 0 {
        let (v, _) = solve_nonlinear(&inp.b, &inp.kernel, &cfg.nonlinearity, &inp.v0, &ncfg)?;
        v.snapshot(v.len() - 1).clone()
    } else {
        vn_t.clone()
    };
    out.field("pde_terminal.bin", &vn_t, ncfg.solver.horizon)?;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut kdes = Vec::new();
    for &n in &pb.counts {
        let pc = ParticleConfig {
            particles: n,
            steps: pb.steps,
            horizon: ncfg.solver.horizon,
            mollification: pb.mollification,
            seed: cfg.seed,
            record_every: pb.record_every,
            noise_substeps: pb.noise_substeps,
        };
        let tr = simulate_mckean(&inp.b, &inp.kernel, &cfg.nonlinearity, &inp.v0, &pc)?;
        warnings.extend(tr.warnings.iter().cloned());
        let e = tr.last();
        let bw = pb.bandwidth.unwrap_or_else(|| default_bandwidth(e));
        let kde = density_estimate(e, bw)?;
        rows.push(ParticleRow {
            particles: n,
            l1_to_pde: l1_distance(&kde, &vn_t)?,
            l1_to_unmollified_pde: l1_distance(&kde, &rough_t)?,
            bandwidth: bw,
            lipschitz_product: tr.lipschitz_product,
        });
        out.field(&format!("kde_n{n}.bin"), &kde, e.time)?;
        if pb.persist {
            for ens in &tr.ensembles {
                out.raw(&format!("ensemble_n{n}_step{}.f64", ens.step), &ens.positions)?;
            }
        }
        kdes.push(kde);
    }
    if inp.grid.dim() == 1 {
        let pde = vn_t.to_physical();
        let cols: Vec<Vec<f64>> = kdes.iter().map(|k| k.to_physical().values[0].clone()).collect();
        let mut w = csv::Writer::from_path(out.file("marginal.csv"))?;
        let mut header = vec!["x".to_string(), "pde".to_string()];
        header.extend(pb.counts.iter().map(|n| format!("kde_n{n}")));
        w.write_record(&header)?;
        for i in 0..inp.grid.n() {
            let mut rec = vec![(i as f64 * inp.grid.dx()).to_string(), pde.values[0][i].to_string()];
            rec.extend(cols.iter().map(|c| c[i].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    out.csv("particle_l1.csv", &rows)?;
    let inversions = rows.windows(2).filter(|w| w[1].l1_to_pde > w[0].l1_to_pde).count();
    let mut checks = vec![Check::at_most(
        "particle_l1",
        rows.last().map(|r| r.l1_to_pde).unwrap_or(f64::INFINITY),
        PARTICLE_L1_TOL,
    )];
    if rows.len() > 1 {
        checks.push(Check::at_most(
            "particle_noise_inversions",
            inversions as f64,
            MAX_NOISE_INVERSIONS as f64,
        ));
    }
    let run = ParticlesRun {
        mollification: pb.mollification,
        steps: pb.steps,
        rows,
        inversions,
        warnings,
    };
    Ok((Report::Particles(run), checks))
}

fn dyadic_times(horizon: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| horizon * 2f64.powi(-(i as i32))).collect()
}

fn run_besov(cfg: &ExperimentConfig, out: &ArtifactDir) -> Result<(Report, Vec<Check>), RunError> {
    let base = cfg.grid()?;
    let vb = &cfg.verification;
    let scfg = cfg.solver_config();
    let alpha = cfg.exponents.alpha;
    let theta = scfg.theta();
    let ts = dyadic_times(scfg.horizon, 12);
    let mut schauder = Vec::new();
    for &n in &vb.resolutions {
        let g = base.with_n(n)?;
        let ens: Vec<SpectralField> = (0..vb.ensemble_size as u64)
            .map(|i| sample_regular_field(&g, 1, -alpha, vb.margin, cfg.seed, 0, i))
            .collect();
        schauder.push(schauder_constants(&ens, -alpha, theta, &ts)?);
    }
    let sm: Vec<f64> = schauder.iter().map(|r| r.smoothing).collect();
    let df: Vec<f64> = schauder.iter().map(|r| r.difference).collect();
    let smoothing_stability = stability(&sm, SCHAUDER_VARIATION);
    let difference_stability = stability(&df, SCHAUDER_VARIATION);

    let ml: Vec<MittagLefflerRow> = [0.0, 0.5, 1.0, 2.0]
        .iter()
        .map(|&x| {
            let s = mittag_leffler_series(x, 1.0)?;
            Ok(MittagLefflerRow {
                x,
                value: s.value(),
                abs_error_vs_exp: (s.value() - x.exp()).abs(),
                tail_bound: s.tail_bound,
            })
        })
        .collect::<Result<_, RunError>>()?;
    let v0 = make_initial_density(&cfg.initial_spec(), &base)?;
    let kernel = make_kernel(&base, cfg.kernel.sigma)?;
    let kn = kernel_norms(&kernel, cfg.exponents.beta)?;
    let cfk = cfg.solver.c_fk.unwrap_or_else(|| sfpe_core::nonlinearity::c_fk(&cfg.nonlinearity, &kn));
    let v0n = besov(&v0, cfg.exponents.beta);
    let m0_curve: Vec<M0Row> = (1..=10)
        .map(|i| {
            let x = 0.1 * i as f64;
            Ok(M0Row {
                b_norm: x,
                ln_m0: ln_m0_bound(x, v0n, cfk, &scfg)?,
            })
        })
        .collect::<Result<_, RunError>>()?;
    let drift_regularity = match cfg.drift {
        DriftBlock::Sampled { .. } => {
            let b = build_drift(cfg, &base, &scfg.times())?;
            Some(gaussian_regularity_estimate(b.snapshot(0), 2))
        }
        _ => None,
    };

    #[derive(Serialize)]
    struct SchauderRow {
        n: usize,
        smoothing: f64,
        difference: f64,
    }
    let rows: Vec<SchauderRow> = vb
        .resolutions
        .iter()
        .zip(&schauder)
        .map(|(n, r)| SchauderRow {
            n: *n,
            smoothing: r.smoothing,
            difference: r.difference,
        })
        .collect();
    out.csv("schauder.csv", &rows)?;
    out.csv("mittag_leffler.csv", &ml)?;
    out.csv("m0_curve.csv", &m0_curve)?;

    let exp_err = ml.iter().map(|r| r.abs_error_vs_exp).fold(0.0, f64::max);
    let tail_rel = ml
        .iter()
        .map(|r| r.tail_bound / r.value)
        .fold(0.0, f64::max);
    let monotone_breaks = m0_curve.windows(2).filter(|w| !(w[1].ln_m0 > w[0].ln_m0)).count();
    let checks = vec![
        Check::at_most("schauder_variation", smoothing_stability.relative_variation, SCHAUDER_VARIATION),
        Check::at_most("mittag_leffler_exp", exp_err, ML_EXP_TOL),
        Check::at_most("mittag_leffler_tail", tail_rel, ML_EXP_TOL),
        Check::at_most("m0_monotone_breaks", monotone_breaks as f64, 0.0),
    ];
    let run = BesovRun {
        schauder,
        smoothing_stability,
        difference_stability,
        mittag_leffler: ml,
        m0_curve,
        drift_regularity,
    };
    Ok((Report::VerifyBesov(run), checks))
}

/// `sup |F'|` sampled on a dense grid.
fn sampled_derivative_sup(nl: &NonlinearitySpec) -> f64 {
    (-200_000..=200_000)
        .map(|i| nl.derivative(i as f64 * 1e-4).abs())
        .fold(0.0, f64::max)
}

/// Nonnegative random fields with masses drawn from `(0, 1]`.
fn nonnegative_ensemble(grid: &Grid, gamma: f64, margin: f64, count: usize, seed: u64) -> Vec<SpectralField> {
    let rng = CounterRng::new(seed);
    (0..count as u64)
        .map(|i| {
            let s = sample_regular_field(grid, 1, gamma, margin, seed, 0, 1_000_000 + i);
            let s = s.scale(0.9 / s.to_physical().sup());
            let f = SpectralField::constant(*grid, 1.0).add(&s).expect("same grid");
            let mass = 1.0 - rng.uniforms(i, 7)[0];
            f.scale(mass / f.integral())
        })
        .collect()
}

fn run_product(cfg: &ExperimentConfig, out: &ArtifactDir) -> Result<(Report, Vec<Check>), RunError> {
    let base = cfg.grid()?;
    let vb = &cfg.verification;
    let alpha = cfg.exponents.alpha;
    let mut bony = Vec::new();
    for &n in &vb.resolutions {
        let g = base.with_n(n)?;
        let count = vb.ensemble_size as u64;
        let f: Vec<SpectralField> = (0..count)
            .map(|i| sample_regular_field(&g, 1, vb.gamma, vb.margin, cfg.seed, 0, 2 * i))
            .collect();
        let h: Vec<SpectralField> = (0..count)
            .map(|i| sample_regular_field(&g, 1, -alpha, vb.margin, cfg.seed, 0, 2 * i + 1))
            .collect();
        bony.push(bony_constant(&f, &h, vb.gamma, alpha, cfg.seed)?);
    }
    let bony_stability = stability(&bony.iter().map(|r| r.c_measured).collect::<Vec<_>>(), BONY_VARIATION);

    let kernel = make_kernel(&base, cfg.kernel.sigma)?;
    let nl = &cfg.nonlinearity;
    let f0 = nl.eval(0.0).abs();
    let d1 = sampled_derivative_sup(nl);
    let ksup = kernel.to_physical().max();
    let bound = f0 + d1 * ksup;
    let ens = nonnegative_ensemble(&base, vb.gamma, vb.margin, vb.ensemble_size, cfg.seed);
    let ratios: Vec<f64> = ens
        .par_iter()
        .map(|f| {
            let l1 = f.to_physical().l1_norm();
            Ok(phi(f, &kernel, nl)?.to_physical().l1_norm() / l1)
        })
        .collect::<Result<_, RunError>>()?;
    let violations = ratios.iter().filter(|r| **r > bound).count();

    out.csv("bony.csv", &bony)?;
    #[derive(Serialize)]
    struct L1Row {
        index: usize,
        ratio: f64,
        bound: f64,
    }
    let rows: Vec<L1Row> = ratios
        .iter()
        .enumerate()
        .map(|(index, r)| L1Row { index, ratio: *r, bound })
        .collect();
    out.csv("phi_l1.csv", &rows)?;
    let checks = vec![
        Check::at_most("bony_variation", bony_stability.relative_variation, BONY_VARIATION),
        Check::at_most("phi_l1_violations", violations as f64, 0.0),
    ];
    let run = ProductRun {
        bony,
        bony_stability,
        f_at_zero: f0,
        f_prime_sup: d1,
        kernel_sup: ksup,
        l1_ratios: ratios,
        l1_bound: bound,
        l1_violations: violations,
    };
    Ok((Report::VerifyProduct(run), checks))
}
