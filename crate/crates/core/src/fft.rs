//! Thin wrapper over `rustfft` with a process-wide plan cache and 2-D support.
//!
//! Conventions: `forward` computes `X_k = sum_j x_j e^{-2 pi i jk/n}` and
//! `inverse` computes `x_j = sum_k X_k e^{+2 pi i jk/n}`; neither normalises.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

type PlanKey = (usize, bool);

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<PlanKey, Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

fn transform(dim: usize, n: usize, data: &mut [Complex64], inverse: bool) {
    debug_assert_eq!(data.len(), n.pow(dim as u32));
    let p = plan(n, inverse);
    match dim {
        1 => p.process(data),
        2 => {
            // rows are contiguous
            p.process(data);
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for c in 0..n {
                for r in 0..n {
                    col[r] = data[r * n + c];
                }
                p.process(&mut col);
                for r in 0..n {
                    data[r * n + c] = col[r];
                }
            }
        }
        _ => unreachable!("dimension validated by Grid"),
    }
}

pub(crate) fn forward(dim: usize, n: usize, data: &mut [Complex64]) {
    transform(dim, n, data, false);
}

pub(crate) fn inverse(dim: usize, n: usize, data: &mut [Complex64]) {
    transform(dim, n, data, true);
}
