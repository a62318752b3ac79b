//! Acceptance suite: one PASS/FAIL line per criterion. Every shipped
//! configuration is run into a scratch directory and the deciding value is
//! recomputed from the artifacts here rather than read from the run's checks.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use serde::Deserialize;
use sfpe_cli::experiments::{build_drift, Inputs};
use sfpe_cli::{compare, run, ExperimentConfig, Report, RunOutcome};
use sfpe_core::besov::{besov, log_rho_distance};
use sfpe_core::drift::{make_initial_density, make_kernel};
use sfpe_core::io::{load_field, load_time_field};
use sfpe_core::linear::{solve_linear, Rho};
use sfpe_core::nonlinear::{ln_m0_bound, solve_nonlinear_from, InitialGuess};
use sfpe_core::nonlinearity::{c_fk, kernel_norms, NonlinearitySpec};
use sfpe_core::oracle::fd_fokker_planck;
use sfpe_core::special::{mittag_leffler_partial, mittag_leffler_series};
use sfpe_core::{SpectralField, TimeField};

type Outcome = Result<(bool, String), String>;

struct Scratch(tempfile::TempDir);

impl Scratch {
    fn dir(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

fn config(name: &str) -> Result<ExperimentConfig, String> {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&p).map_err(|e| e.to_string())
}

fn execute(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome, String> {
    run(cfg, out).map_err(|e| e.to_string())
}

fn csv_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(|e| e.to_string())
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

/// Rectangle-rule values of a scalar field on its grid.
fn values(f: &SpectralField) -> Vec<f64> {
    f.to_physical().values[0].clone()
}

fn sup_beta(v: &TimeField, beta: f64) -> f64 {
    v.snapshots().iter().map(|s| besov(s, beta)).fold(0.0, f64::max)
}

/// Direct evaluation of the trigonometric sum of a 1D field at `x`.
fn fourier_eval(f: &SpectralField, x: f64) -> f64 {
    let g = f.grid();
    let mut acc = 0.0;
    for (i, c) in f.component(0).iter().enumerate() {
        let xi = g.xi(i)[0];
        acc += (c * Complex64::from_polar(1.0, xi * x)).re;
    }
    acc
}

fn spread(v: &[f64]) -> f64 {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / lo
}

fn c01_heat_flow(s: &Scratch) -> Outcome {
    let cfg = config("heat_flow.toml")?;
    let out = s.dir("heat_flow");
    execute(&cfg, &out)?;
    let v = load_time_field(&out.join("solution.bin")).map_err(e)?;
    let v0 = make_initial_density(&cfg.initial_spec(), &cfg.grid().map_err(e)?).map_err(e)?;
    let g = *v0.grid();
    let mut worst = 0.0f64;
    let mut modes = 0usize;
    for (t, snap) in v.times().iter().zip(v.snapshots()) {
        for (i, (got, init)) in snap.component(0).iter().zip(v0.component(0)).enumerate() {
            let xi = g.xi(i)[0];
            let want = init * (-0.5 * t * xi * xi).exp();
            if want.norm() < f64::MIN_POSITIVE {
                continue;
            }
            modes += 1;
            worst = worst.max((got - want).norm() / want.norm());
        }
    }
    Ok((worst <= 1e-10, format!("max per-mode relative error {worst:.3e} over {modes} modes (<= 1e-10)")))
}

struct NonlinearArtifacts {
    cfg: ExperimentConfig,
    dir: PathBuf,
    outcome: RunOutcome,
}

fn nonlinear_run(s: &Scratch) -> Result<NonlinearArtifacts, String> {
    let cfg = config("nonlinear_tanh.toml")?;
    let dir = s.dir("nonlinear_tanh");
    let outcome = execute(&cfg, &dir)?;
    Ok(NonlinearArtifacts { cfg, dir, outcome })
}

fn c02_mass(nl: &NonlinearArtifacts) -> Outcome {
    let b = load_time_field(&nl.dir.join("drift.bin")).map_err(e)?;
    let calibrated = b
        .snapshots()
        .iter()
        .map(|s| besov(s, -nl.cfg.exponents.alpha))
        .fold(0.0, f64::max);
    let v = load_time_field(&nl.dir.join("solution.bin")).map_err(e)?;
    let dx = v.grid().dx();
    let (mut mass_dev, mut worst_neg) = (0.0f64, f64::INFINITY);
    for snap in v.snapshots() {
        let p = values(snap);
        let mass: f64 = p.iter().sum::<f64>() * dx;
        let lo = p.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        mass_dev = mass_dev.max((mass - 1.0).abs());
        worst_neg = worst_neg.min(lo / hi);
    }
    let ok = mass_dev <= 1e-3 && worst_neg >= -1e-6 && (calibrated - 1.0).abs() <= 0.05;
    Ok((
        ok,
        format!(
            "||b||_(-alpha) {calibrated:.4}, max |mass-1| {mass_dev:.3e} (<= 1e-3), min/max {worst_neg:.3e} (>= -1e-6)"
        ),
    ))
}

#[derive(Deserialize)]
struct ContractionRow {
    iteration: usize,
    log_d_rho_beta: f64,
}

#[derive(Deserialize)]
struct InnerRow {
    outer: usize,
    step: usize,
    ratio: f64,
}

fn c03_contraction(nl: &NonlinearArtifacts) -> Outcome {
    let auto = nl.cfg.solver.rho == Rho::Auto && nl.cfg.solver.outer_rho == Rho::Auto;
    let rows: Vec<ContractionRow> = csv_rows(&nl.dir.join("contraction.csv"))?;
    let iterates = rows.iter().map(|r| r.iteration).max().unwrap_or(0);
    // ratio k = d_{k+1} / d_k; from the third iterate on means k >= 2
    let outer = rows
        .windows(2)
        .skip(1)
        .map(|w| {
            if w[0].log_d_rho_beta == f64::NEG_INFINITY {
                0.0
            } else {
                (w[1].log_d_rho_beta - w[0].log_d_rho_beta).exp()
            }
        })
        .fold(0.0, f64::max);
    let inner: Vec<InnerRow> = csv_rows(&nl.dir.join("inner_contraction.csv"))?;
    let inner_max = inner.iter().filter(|r| r.step >= 2).map(|r| r.ratio).fold(0.0, f64::max);
    let solves = inner.iter().map(|r| r.outer).max().unwrap_or(0);
    let ok = auto && iterates <= 30 && outer <= 0.7 && inner_max <= 0.7;
    Ok((
        ok,
        format!(
            "rho auto {auto}, {iterates} outer iterates (<= 30), outer ratio {outer:.3e}, inner ratio {inner_max:.3e} over {solves} solves (<= 0.7)"
        ),
    ))
}

fn c04_uniqueness(nl: &NonlinearArtifacts) -> Outcome {
    let Report::SolveNonlinear(run) = &nl.outcome.report else {
        return Err("unexpected report".into());
    };
    let inp = Inputs::build(&nl.cfg).map_err(e)?;
    let from_heat = load_time_field(&nl.dir.join("solution.bin")).map_err(e)?;
    let (from_frozen, _) = solve_nonlinear_from(
        &inp.b,
        &inp.kernel,
        &nl.cfg.nonlinearity,
        &inp.v0,
        &nl.cfg.nonlinear_config(),
        InitialGuess::Frozen,
    )
    .map_err(e)?;
    let beta = nl.cfg.exponents.beta;
    let d_rho = log_rho_distance(&from_heat, &from_frozen, run.report.rho, beta).map_err(e)?.exp();
    let plain = sup_beta(&from_heat.sub(&from_frozen).map_err(e)?, beta);
    let ok = d_rho <= 1e-7 && plain <= 1e-7;
    Ok((
        ok,
        format!("d_(rho,beta) {d_rho:.3e} at rho {:.3e}, unweighted {plain:.3e} (<= 1e-7)", run.report.rho),
    ))
}

fn c05_degeneracy(s: &Scratch) -> Outcome {
    let cfg = config("degeneracy.toml")?;
    let NonlinearitySpec::Constant { lambda } = cfg.nonlinearity else {
        return Err("degeneracy config must use a constant nonlinearity".into());
    };
    let out = s.dir("degeneracy");
    execute(&cfg, &out)?;
    let b = load_time_field(&out.join("drift.bin")).map_err(e)?;
    let v = load_time_field(&out.join("solution.bin")).map_err(e)?;
    let v0 = make_initial_density(&cfg.initial_spec(), b.grid()).map_err(e)?;
    let (vl, _) = solve_linear(&b.scale(lambda), &v0, &cfg.solver_config()).map_err(e)?;
    let d = sup_beta(&v.sub(&vl).map_err(e)?, cfg.exponents.beta);
    Ok((d <= 1e-9, format!("||v_F - v_lin||_(C_T C^beta) {d:.3e} (<= 1e-9), lambda {lambda}")))
}

#[derive(Deserialize)]
struct ProbeRow {
    x: f64,
    fk_mean: f64,
    fk_std_error: f64,
}

fn c06_oracles(s: &Scratch) -> Outcome {
    let cfg = config("fk_crosscheck.toml")?;
    let out = s.dir("fk_crosscheck");
    execute(&cfg, &out)?;
    let v = load_time_field(&out.join("solution.bin")).map_err(e)?;
    let scfg = cfg.solver_config();
    let grid = cfg.grid().map_err(e)?;
    let b = build_drift(&cfg, &grid, &scfg.times()).map_err(e)?;
    let v0 = make_initial_density(&cfg.initial_spec(), &grid).map_err(e)?;
    let m = cfg.oracle.fd_steps;
    let fd = fd_fokker_planck(&b, &v0, scfg.horizon, m, m / scfg.time_steps).map_err(e)?;
    if fd.values.len() != v.len() {
        return Err(format!("{} finite-difference records for {} nodes", fd.values.len(), v.len()));
    }
    let mut fd_err = 0.0f64;
    for (snap, vals) in v.snapshots().iter().zip(&fd.values) {
        for (a, b) in values(snap).iter().zip(vals) {
            fd_err = fd_err.max((a - b).abs());
        }
    }
    let probes: Vec<ProbeRow> = csv_rows(&out.join("feynman_kac.csv"))?;
    let terminal = v.snapshot(v.len() - 1);
    let z = probes
        .iter()
        .map(|p| ((p.fk_mean - fourier_eval(terminal, p.x)) / p.fk_std_error).abs())
        .fold(0.0, f64::max);
    let ok = grid.n() == 512 && m == 2000 && cfg.oracle.fk_paths >= 100_000 && probes.len() == 5;
    Ok((
        ok && fd_err <= 1e-3 && z <= 3.0,
        format!(
            "FD sup error {fd_err:.3e} (<= 1e-3, N={}, M={m}); FK max |z| {z:.3} (<= 3) at {} probes, {} paths",
            grid.n(),
            probes.len(),
            cfg.oracle.fk_paths
        ),
    ))
}

#[derive(Deserialize)]
struct ContinuityRow {
    level: usize,
    drift_difference: f64,
    solution_difference: f64,
}

fn c07_continuity(s: &Scratch) -> Outcome {
    let cfg = config("continuity.toml")?;
    let out = s.dir("continuity");
    execute(&cfg, &out)?;
    let rows: Vec<ContinuityRow> = csv_rows(&out.join("continuity.csv"))?;
    let levels: Vec<usize> = rows.iter().map(|r| r.level).collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.drift_difference.ln(), r.solution_difference.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    let ok = levels == [4, 16, 64, 256] && (0.8..=1.2).contains(&slope) && r2 >= 0.95;
    Ok((ok, format!("levels {levels:?}, slope {slope:.4} (in [0.8, 1.2]), R^2 {r2:.4} (>= 0.95)")))
}

#[derive(Deserialize)]
struct BonyRow {
    gamma: f64,
    alpha: f64,
    #[serde(rename = "N")]
    n: usize,
    c_measured: f64,
    ensemble_size: usize,
}

#[derive(Deserialize)]
struct L1Row {
    ratio: f64,
}

struct ProductArtifacts {
    cfg: ExperimentConfig,
    dir: PathBuf,
}

fn product_run(s: &Scratch) -> Result<ProductArtifacts, String> {
    let cfg = config("product.toml")?;
    let dir = s.dir("product");
    execute(&cfg, &dir)?;
    Ok(ProductArtifacts { cfg, dir })
}

fn c08_bony(p: &ProductArtifacts) -> Outcome {
    let rows: Vec<BonyRow> = csv_rows(&p.dir.join("bony.csv"))?;
    let ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    let setup = rows
        .iter()
        .all(|r| r.ensemble_size == 100 && (r.gamma - 0.3).abs() < 1e-15 && (r.alpha - 0.25).abs() < 1e-15);
    let c: Vec<f64> = rows.iter().map(|r| r.c_measured).collect();
    let var = spread(&c);
    Ok((
        setup && ns == [256, 512, 1024] && var <= 0.25,
        format!("constants {c:.4?} at N {ns:?}, relative variation {var:.4} (<= 0.25)"),
    ))
}

fn c10_phi_bound(p: &ProductArtifacts) -> Outcome {
    let (a, b0, shift) = match p.cfg.nonlinearity {
        NonlinearitySpec::ScaledTanh { a, b0, shift } => (a, b0, shift),
        other => return Err(format!("closed-form constants not available for {other:?}")),
    };
    let sigma = p.cfg.kernel.sigma;
    let length = p.cfg.grid.length;
    let f0 = (shift + b0 * 0.0f64.tanh()).abs();
    let fp = (a * b0).abs();
    // periodised Gaussian peak; images beyond two periods are below f64 resolution
    let ksup: f64 = (-2..=2)
        .map(|m| (-(m as f64 * length).powi(2) / (2.0 * sigma * sigma)).exp())
        .sum::<f64>()
        / (2.0 * PI * sigma * sigma).sqrt();
    let bound = f0 + fp * ksup;
    let rows: Vec<L1Row> = csv_rows(&p.dir.join("phi_l1.csv"))?;
    let violations = rows.iter().filter(|r| r.ratio > bound).count();
    let worst = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok((
        rows.len() == 100 && violations == 0,
        format!(
            "{violations} violations in {} fields; largest ||phi f||_1/||f||_1 {worst:.4} vs |F(0)| + ||F'|| ||K|| = {bound:.4}",
            rows.len()
        ),
    ))
}

#[derive(Deserialize)]
struct SchauderRow {
    n: usize,
    smoothing: f64,
}

#[derive(Deserialize)]
struct M0Row {
    b_norm: f64,
    ln_m0: f64,
}

struct BesovArtifacts {
    cfg: ExperimentConfig,
    dir: PathBuf,
}

fn besov_run(s: &Scratch) -> Result<BesovArtifacts, String> {
    let cfg = config("besov.toml")?;
    let dir = s.dir("besov");
    execute(&cfg, &dir)?;
    Ok(BesovArtifacts { cfg, dir })
}

fn c09_schauder(b: &BesovArtifacts) -> Outcome {
    let rows: Vec<SchauderRow> = csv_rows(&b.dir.join("schauder.csv"))?;
    let ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    let c: Vec<f64> = rows.iter().map(|r| r.smoothing).collect();
    let var = spread(&c);
    let ex = &b.cfg.exponents;
    let theta = (ex.alpha + ex.beta + 1.0) / 2.0;
    let theta_ok = (b.cfg.solver_config().theta() - theta).abs() < 1e-15;
    Ok((
        theta_ok && ns == [256, 512, 1024] && var <= 0.2,
        format!("sup t^theta ratios {c:.4?} at N {ns:?} (theta {theta}), relative variation {var:.4} (<= 0.2)"),
    ))
}

fn c11_particles(s: &Scratch) -> Outcome {
    let cfg = config("particles.toml")?;
    let out = s.dir("particles");
    execute(&cfg, &out)?;
    let (pde, _) = load_field(&out.join("pde_terminal.bin")).map_err(e)?;
    let target = values(&pde);
    let dx = pde.grid().dx();
    let mut l1 = Vec::new();
    for n in &cfg.particles.counts {
        let (kde, t) = load_field(&out.join(format!("kde_n{n}.bin"))).map_err(e)?;
        if (t - cfg.solver.horizon).abs() > 1e-12 {
            return Err(format!("kde for N={n} recorded at t={t}"));
        }
        let d: f64 = values(&kde).iter().zip(&target).map(|(a, b)| (a - b).abs()).sum::<f64>() * dx;
        l1.push(d);
    }
    let inversions = l1.windows(2).filter(|w| w[1] > w[0]).count();
    let last = *l1.last().ok_or("no particle counts")?;
    let setup = cfg.particles.counts == [1_000, 10_000, 100_000]
        && cfg.particles.steps == 2000
        && cfg.particles.mollification == 64;
    Ok((
        setup && last <= 0.05 && inversions <= 1,
        format!(
            "L1 {l1:.4?} at N {:?}, terminal {last:.4} (<= 0.05), {inversions} inversions (<= 1), h = T/{}",
            cfg.particles.counts, cfg.particles.steps
        ),
    ))
}

fn c12_mittag_leffler(b: &BesovArtifacts) -> Outcome {
    let mut exp_err = 0.0f64;
    let mut uncertified = 0;
    for x in [0.0f64, 0.5, 1.0, 2.0] {
        let s = mittag_leffler_series(x, 1.0).map_err(e)?;
        exp_err = exp_err.max((s.value() - x.exp()).abs());
        // omitted terms x^k / k! for k >= terms, summed explicitly
        let mut term = (1..=s.terms).fold(1.0, |t, k| t * x / k as f64);
        let mut remainder = 0.0;
        for k in s.terms + 1..s.terms + 200 {
            remainder += term;
            term *= x / k as f64;
        }
        let head = mittag_leffler_partial(x, 1.0, s.terms.saturating_sub(1));
        if remainder > s.tail_bound * (1.0 + 1e-12) || (head - s.value()).abs() > 1e-15 * head {
            uncertified += 1;
        }
    }
    let cfg = &b.cfg;
    let grid = cfg.grid().map_err(e)?;
    let v0 = make_initial_density(&cfg.initial_spec(), &grid).map_err(e)?;
    let kernel = make_kernel(&grid, cfg.kernel.sigma).map_err(e)?;
    let cfk = c_fk(&cfg.nonlinearity, &kernel_norms(&kernel, cfg.exponents.beta).map_err(e)?);
    let v0n = besov(&v0, cfg.exponents.beta);
    let direct: Vec<f64> = (1..=10)
        .map(|i| ln_m0_bound(0.1 * i as f64, v0n, cfk, &cfg.solver_config()))
        .collect::<Result<_, _>>()
        .map_err(e)?;
    let written: Vec<M0Row> = csv_rows(&b.dir.join("m0_curve.csv"))?;
    let agree = written.len() == 10
        && written
            .iter()
            .zip(&direct)
            .enumerate()
            .all(|(i, (r, d))| r.ln_m0 == *d && (r.b_norm - 0.1 * (i + 1) as f64).abs() < 1e-15);
    let breaks = direct.windows(2).filter(|w| !(w[1] > w[0])).count();
    Ok((
        exp_err <= 1e-12 && uncertified == 0 && breaks == 0 && agree,
        format!(
            "max |E_1(x) - e^x| {exp_err:.2e} (<= 1e-12), {uncertified} uncertified tails, m0 curve {breaks} monotonicity breaks"
        ),
    ))
}

fn c13_reproducibility(s: &Scratch) -> Outcome {
    let cfg = config("reproducibility.toml")?;
    let mut dirs = Vec::new();
    for threads in [1usize, 2, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(e)?;
        let out = s.dir(&format!("repro_t{threads}"));
        pool.install(|| execute(&cfg, &out))?;
        dirs.push(out);
    }
    let names: Vec<String> = {
        let mut v: Vec<String> = std::fs::read_dir(&dirs[0])
            .map_err(e)?
            .filter_map(|d| d.ok())
            .map(|d| d.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".bin") || n.ends_with(".f64"))
            .collect();
        v.sort();
        v
    };
    let mut differing = Vec::new();
    for d in &dirs[1..] {
        for n in &names {
            let a = std::fs::read(dirs[0].join(n)).map_err(e)?;
            let b = std::fs::read(d.join(n)).map_err(e)?;
            if a != b {
                differing.push(format!("{}:{n}", d.display()));
            }
        }
        if !compare(&dirs[0], d).map_err(e)?.identical {
            differing.push(format!("{} (compare)", d.display()));
        }
    }
    Ok((
        differing.is_empty() && !names.is_empty(),
        format!("{} binary files at 1, 2, 8 threads; differing: {differing:?}", names.len()),
    ))
}

fn report(id: usize, title: &str, outcome: Outcome, started: Instant, failures: &mut usize) {
    let secs = started.elapsed().as_secs_f64();
    let (ok, detail) = match outcome {
        Ok(x) => x,
        Err(msg) => (false, format!("error: {msg}")),
    };
    if !ok {
        *failures += 1;
    }
    println!(
        "{} {id:>2} {title:<34} {detail} [{secs:.1}s]",
        if ok { "PASS" } else { "FAIL" }
    );
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters are not meaningful for a single driver
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let scratch = Scratch(tempfile::tempdir().expect("scratch directory"));
    let mut failures = 0;

    let t = Instant::now();
    report(1, "heat-flow exactness", c01_heat_flow(&scratch), t, &mut failures);

    let t = Instant::now();
    match nonlinear_run(&scratch) {
        Ok(nl) => {
            report(2, "mass conservation and positivity", c02_mass(&nl), t, &mut failures);
            report(3, "contraction certification", c03_contraction(&nl), t, &mut failures);
            let t = Instant::now();
            report(4, "uniqueness probe", c04_uniqueness(&nl), t, &mut failures);
        }
        Err(msg) => {
            for (id, title) in [(2, "mass conservation and positivity"), (3, "contraction certification"), (4, "uniqueness probe")] {
                report(id, title, Err(msg.clone()), t, &mut failures);
            }
        }
    }

    let t = Instant::now();
    report(5, "degeneracy collapse", c05_degeneracy(&scratch), t, &mut failures);
    let t = Instant::now();
    report(6, "linear oracle equivalence", c06_oracles(&scratch), t, &mut failures);
    let t = Instant::now();
    report(7, "drift continuity", c07_continuity(&scratch), t, &mut failures);

    let t = Instant::now();
    let product = product_run(&scratch);
    let besov_art = besov_run(&scratch);
    match &product {
        Ok(p) => report(8, "Bony constant stability", c08_bony(p), t, &mut failures),
        Err(msg) => report(8, "Bony constant stability", Err(msg.clone()), t, &mut failures),
    }
    match &besov_art {
        Ok(b) => report(9, "Schauder constant stability", c09_schauder(b), t, &mut failures),
        Err(msg) => report(9, "Schauder constant stability", Err(msg.clone()), t, &mut failures),
    }
    match &product {
        Ok(p) => report(10, "phi L1 bound", c10_phi_bound(p), t, &mut failures),
        Err(msg) => report(10, "phi L1 bound", Err(msg.clone()), t, &mut failures),
    }

    let t = Instant::now();
    report(11, "particle/PDE agreement", c11_particles(&scratch), t, &mut failures);

    let t = Instant::now();
    match &besov_art {
        Ok(b) => report(12, "Mittag-Leffler correctness", c12_mittag_leffler(b), t, &mut failures),
        Err(msg) => report(12, "Mittag-Leffler correctness", Err(msg.clone()), t, &mut failures),
    }

    let t = Instant::now();
    report(13, "reproducibility across threads", c13_reproducibility(&scratch), t, &mut failures);

    if failures == 0 {
        println!("acceptance: all 13 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} of 13 criteria failed");
        ExitCode::FAILURE
    }
}
