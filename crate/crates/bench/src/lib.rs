//! Shared fixtures for the criterion benches.

use sfpe_core::drift::{calibrate_amplitude, make_initial_density, make_kernel, sample_drift, DriftSpec, InitialDensitySpec};
use sfpe_core::linear::SolverConfig;
use sfpe_core::nonlinear::NonlinearConfig;
use sfpe_core::{Grid, SpectralField, TimeField};

pub const ALPHA: f64 = 0.25;
pub const BETA: f64 = 0.3;

/// A rough calibrated drift, Gaussian kernel and bump initial density on a 1D grid.
/// Needs `n >= 512` on the default torus so the unit kernel is resolved.
pub struct Problem {
    pub grid: Grid,
    pub v0: SpectralField,
    pub kernel: SpectralField,
    pub b: TimeField,
    pub solver: SolverConfig,
}

impl Problem {
    pub fn new(n: usize, time_steps: usize) -> Self {
        let grid = Grid::new(1, n, 16.0 * std::f64::consts::PI).expect("grid");
        let solver = SolverConfig::new(ALPHA, BETA, 0.5, time_steps);
        let times = solver.times();
        let mut spec = DriftSpec::new(BETA, 7, 1.0);
        spec.band_limit = Some(8.0);
        let spec = calibrate_amplitude(&spec, &grid, &times, ALPHA, 1.0).expect("calibration");
        let b = sample_drift(&spec, &grid, &times).expect("drift");
        let v0 = make_initial_density(
            &InitialDensitySpec::GaussianBump {
                center: vec![grid.length() / 2.0],
                width: 2.0,
            },
            &grid,
        )
        .expect("initial density");
        let kernel = make_kernel(&grid, 1.0).expect("kernel");
        Self { grid, v0, kernel, b, solver }
    }

    pub fn nonlinear(&self) -> NonlinearConfig {
        let mut cfg = NonlinearConfig::new(self.solver.clone());
        cfg.uniqueness_probe = false;
        cfg
    }
}
