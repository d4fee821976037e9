//! `I1(x) / I0(x)` without evaluating either Bessel function directly.
//!
//! Both functions overflow an `f64` near `x = 713`, while their ratio tends to 1.
//! For moderate arguments the ratio is the value of Gauss's continued fraction
//! `I1/I0 = x / (2 + x (I2/I1))`, `I(nu+1)/I(nu) = x / (2(nu+1) + x I(nu+2)/I(nu+1))`,
//! evaluated bottom-up from a depth where the tail is negligible. For large
//! arguments the Hankel expansions of `e^{-x} sqrt(2 pi x) I_nu(x)` are summed
//! until their terms stop shrinking.

use crate::error::{Error, Result};

const ASYMPTOTIC_FROM: f64 = 30.0;

/// `I1(x) / I0(x)` for finite `x >= 0`. The result lies in `[0, 1)`.
pub fn bessel_ratio(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::invalid(format!(
            "bessel_ratio needs a finite x >= 0, got {x}"
        )));
    }
    Ok(ratio(x))
}

/// Unchecked variant for the inner loops. `+inf` maps to 1.
pub(crate) fn ratio(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else if x < ASYMPTOTIC_FROM {
        continued_fraction(x)
    } else {
        hankel(x)
    }
}

fn continued_fraction(x: f64) -> f64 {
    // The tail ratios I(nu+1)/I(nu) fall below x / (2 nu), so starting at
    // nu ~ 2x + 40 leaves a truncation error far below 1 ulp.
    let depth = (2.0 * x) as usize + 40;
    let mut r = 0.0;
    for nu in (1..=depth).rev() {
        r = x / (2.0 * nu as f64 + x * r);
    }
    r
}

fn hankel(x: f64) -> f64 {
    hankel_sum(0.0, x).map_or(1.0, |s0| {
        let s1 = hankel_sum(1.0, x).unwrap_or(s0);
        s1 / s0
    })
}

/// `sum_k (-1)^k a_k(nu) / x^k`, stopped at the smallest term.
fn hankel_sum(nu: f64, x: f64) -> Option<f64> {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (8.0 * k as f64 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum.is_finite().then_some(sum)
}
