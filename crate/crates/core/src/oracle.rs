//! Reference solver for the 1-D linear equation `d eta/dt = eta''/2 - (eta h)'`
//! on the periodic grid: fourth-order central differences in space, classical
//! RK4 in time. Shares nothing with the spectral solvers beyond grid sampling.

use crate::error::{invalid, Result, SfpeError};
use crate::field::{SpectralField, TimeField};

#[derive(Debug, Clone)]
pub struct FdSolution {
    pub times: Vec<f64>,
    /// Grid values at each recorded time.
    pub values: Vec<Vec<f64>>,
}

struct Drift {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl Drift {
    fn at(&self, t: f64, out: &mut [f64]) {
        let last = self.times.len() - 1;
        let (k, w) = if self.values.len() == 1 || t <= self.times[0] {
            (0, 0.0)
        } else if t >= self.times[last] {
            (last, 0.0)
        } else {
            let k = self.times.partition_point(|s| *s <= t) - 1;
            (k, (t - self.times[k]) / (self.times[k + 1] - self.times[k]))
        };
        let a = &self.values[k.min(self.values.len() - 1)];
        if w == 0.0 {
            out.copy_from_slice(a);
        } else {
            let b = &self.values[k + 1];
            for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                *o = (1.0 - w) * x + w * y;
            }
        }
    }
}

fn rhs(eta: &[f64], h: &[f64], dx: f64, flux: &mut [f64], out: &mut [f64]) {
    let n = eta.len();
    for i in 0..n {
        flux[i] = eta[i] * h[i];
    }
    let (c1, c2) = (1.0 / (12.0 * dx), 1.0 / (12.0 * dx * dx));
    for i in 0..n {
        let (m2, m1, p1, p2) = ((i + n - 2) % n, (i + n - 1) % n, (i + 1) % n, (i + 2) % n);
        let lap = (-eta[p2] + 16.0 * eta[p1] - 30.0 * eta[i] + 16.0 * eta[m1] - eta[m2]) * c2;
        let div = (-flux[p2] + 8.0 * flux[p1] - 8.0 * flux[m1] + flux[m2]) * c1;
        out[i] = 0.5 * lap - div;
    }
}

/// Integrates to `horizon` in `steps` RK4 steps, recording every `record_every` steps.
pub fn fd_fokker_planck(
    h: &TimeField,
    eta0: &SpectralField,
    horizon: f64,
    steps: usize,
    record_every: usize,
) -> Result<FdSolution> {
    let grid = *eta0.grid();
    if grid.dim() != 1 || h.components() != 1 || h.grid() != &grid {
        return Err(SfpeError::ShapeMismatch("reference solver is one-dimensional".into()));
    }
    if steps == 0 || record_every == 0 || !(horizon > 0.0) {
        return Err(invalid("steps", "steps, cadence and horizon must be positive"));
    }
    let drift = Drift {
        times: h.times().to_vec(),
        values: h.snapshots().iter().map(|s| s.to_physical().values[0].clone()).collect(),
    };
    let n = grid.n();
    let dx = grid.dx();
    let dt = horizon / steps as f64;
    let mut eta = eta0.to_physical().values[0].clone();
    let mut sol = FdSolution {
        times: vec![0.0],
        values: vec![eta.clone()],
    };
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut tmp, mut flux, mut hv) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for s in 0..steps {
        let t = s as f64 * dt;
        drift.at(t, &mut hv);
        rhs(&eta, &hv, dx, &mut flux, &mut k1);
        drift.at(t + 0.5 * dt, &mut hv);
        for i in 0..n {
            tmp[i] = eta[i] + 0.5 * dt * k1[i];
        }
        rhs(&tmp, &hv, dx, &mut flux, &mut k2);
        for i in 0..n {
            tmp[i] = eta[i] + 0.5 * dt * k2[i];
        }
        rhs(&tmp, &hv, dx, &mut flux, &mut k3);
        drift.at(t + dt, &mut hv);
        for i in 0..n {
            tmp[i] = eta[i] + dt * k3[i];
        }
        rhs(&tmp, &hv, dx, &mut flux, &mut k4);
        for i in 0..n {
            eta[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if (s + 1) % record_every == 0 || s + 1 == steps {
            sol.times.push((s + 1) as f64 * dt);
            sol.values.push(eta.clone());
        }
    }
    Ok(sol)
}
