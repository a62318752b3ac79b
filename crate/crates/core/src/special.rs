//! Mittag-Leffler function `E_a(x) = sum_k x^k / Gamma(a k + 1)` for `x >= 0`.
//!
//! Terms are formed in log space so arguments whose sum overflows `f64` still
//! yield a usable logarithm. For `k` large enough the term ratio
//! `r_k = x Gamma(a(k-1)+1) / Gamma(ak+1)` is decreasing in `k` (log-convexity of
//! Gamma), so once `r_{k+1} < 1` the remainder after term `k` is bounded by
//! `t_{k+1} / (1 - r_{k+2})`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};

const REL_TAIL: f64 = 1e-16;
const MAX_TERMS: usize = 10_000_000;
/// Above this value of `x^{1/a}` the leading asymptotic term is used.
const ASYMPTOTIC_FROM: f64 = 2e5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MittagLefflerSeries {
    /// `ln E_a(x)`
    pub ln_value: f64,
    /// Terms summed.
    pub terms: usize,
    /// Certified bound on the omitted remainder.
    pub tail_bound: f64,
}

impl MittagLefflerSeries {
    /// `E_a(x)`, `+inf` when it exceeds `f64::MAX`.
    pub fn value(&self) -> f64 {
        self.ln_value.exp()
    }
}

fn ln_term(k: usize, x_ln: f64, a: f64) -> f64 {
    k as f64 * x_ln - ln_gamma(a * k as f64 + 1.0)
}

pub fn mittag_leffler_series(x: f64, a: f64) -> Result<MittagLefflerSeries> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(invalid("a", format!("parameter must lie in (0, 1], got {a}")));
    }
    if !(x >= 0.0 && x.is_finite()) {
        return Err(invalid("x", format!("argument must be finite and non-negative, got {x}")));
    }
    if x == 0.0 {
        return Ok(MittagLefflerSeries {
            ln_value: 0.0,
            terms: 1,
            tail_bound: 0.0,
        });
    }
    let xl = x.ln();
    let z = (xl / a).exp();
    if z > ASYMPTOTIC_FROM {
        // E_a(x) = exp(x^{1/a}) / a - sum_{k>=1} x^{-k} / Gamma(1 - ak); the
        // algebraic part is below 1/x in modulus.
        return Ok(MittagLefflerSeries {
            ln_value: z - a.ln(),
            terms: 0,
            tail_bound: 1.0 / x,
        });
    }
    // running sum as shift + ln(acc)
    let mut shift = 0.0f64;
    let mut acc = 1.0f64;
    let mut k = 0usize;
    loop {
        k += 1;
        let lt = ln_term(k, xl, a);
        if lt > shift {
            acc = acc * (shift - lt).exp() + 1.0;
            shift = lt;
        } else {
            acc += (lt - shift).exp();
        }
        let ln_next = ln_term(k + 1, xl, a);
        let ln_r = ln_term(k + 2, xl, a) - ln_next;
        if ln_r < 0.0 {
            let ln_tail = ln_next - (-ln_r.exp()).ln_1p();
            let ln_sum = shift + acc.ln();
            if ln_tail - ln_sum < REL_TAIL.ln() {
                return Ok(MittagLefflerSeries {
                    ln_value: ln_sum,
                    terms: k + 1,
                    tail_bound: ln_tail.exp(),
                });
            }
        }
        if k >= MAX_TERMS {
            return Err(invalid("x", format!("series did not settle within {MAX_TERMS} terms")));
        }
    }
}

pub fn mittag_leffler(x: f64, a: f64) -> Result<f64> {
    Ok(mittag_leffler_series(x, a)?.value())
}

/// Partial sum `sum_{k<=n} x^k / Gamma(ak+1)` in plain arithmetic.
pub fn mittag_leffler_partial(x: f64, a: f64, n: usize) -> f64 {
    (0..=n)
        .map(|k| if k == 0 { 1.0 } else { ln_term(k, x.ln(), a).exp() })
        .sum()
}
