//! Modified Bessel function of the first kind, real order, by direct
//! power-series summation.
//!
//! The series is summed with the term recurrence
//! `t_{n+1} = t_n * (x/2)^2 / ((n+1)(nu+n+1))`, which sidesteps overflow of
//! the individual Gamma factors. Truncation: terms below 1e-16 of the
//! partial sum, capped at 500 terms. Supported argument range is [0, 100];
//! large-argument asymptotics are deliberately out of scope.

use crate::error::{Error, Result};
use crate::special::gamma::{gamma, rgamma};

/// Largest supported series argument.
pub const BESSEL_X_MAX: f64 = 100.0;

const MAX_TERMS: usize = 500;
const TERM_EPS: f64 = 1e-16;

/// I_nu(x) for x in [0, 100].
///
/// At nonpositive-integer values of `nu + n + 1` the reciprocal-Gamma
/// convention 1/Γ = 0 drops the corresponding leading terms.
pub fn bessel_i(nu: f64, x: f64) -> Result<f64> {
    if x.is_nan() || nu.is_nan() {
        return Err(Error::Domain("bessel_i: NaN argument".into()));
    }
    if x < 0.0 {
        return Err(Error::Domain(format!(
            "bessel_i requires x >= 0, got x = {x}"
        )));
    }
    if x > BESSEL_X_MAX {
        return Err(Error::Range(format!(
            "bessel_i argument {x} outside the supported range [0, {BESSEL_X_MAX}]"
        )));
    }
    if x == 0.0 {
        // Only the n = 0 term can survive at x = 0.
        return Ok(if nu == 0.0 {
            1.0
        } else if nu > 0.0 || nu == nu.round() {
            0.0
        } else {
            f64::INFINITY
        });
    }

    // Skip terms annihilated by 1/Γ(nonpositive integer).
    let n0 = if nu + 1.0 > 0.0 || nu != nu.round() {
        0
    } else {
        (-nu) as usize
    };

    let half = 0.5 * x;
    let q = half * half;
    let mut term = half.powf(2.0 * n0 as f64 + nu) * rgamma(nu + n0 as f64 + 1.0);
    for k in 1..=n0 {
        term /= k as f64;
    }
    let mut sum = term;
    for n in n0..n0 + MAX_TERMS {
        term *= q / ((n as f64 + 1.0) * (nu + n as f64 + 1.0));
        if !term.is_finite() {
            return Err(Error::Range(format!(
                "bessel_i series term overflowed at x = {x}; supported range is [0, {BESSEL_X_MAX}]"
            )));
        }
        sum += term;
        if term.abs() <= TERM_EPS * sum.abs() {
            break;
        }
    }
    Ok(sum)
}

/// The limit of I_nu(x) / x^nu as x -> 0+, namely (1/2)^nu / Γ(nu + 1).
pub fn bessel_small_x_limit(nu: f64) -> Result<f64> {
    if !(nu > -1.0) {
        return Err(Error::Domain(format!(
            "bessel_small_x_limit requires nu > -1, got {nu}"
        )));
    }
    Ok(0.5_f64.powf(nu) / gamma(nu + 1.0))
}

/// Find a witness x̄ > 0 below which I_nu(x) < 2 (1/2)^nu x^nu / Γ(nu+1)
/// holds, where nu = delta/2 - 1.
///
/// Brackets by doubling from 1e-3, then 60 bisection steps; the smaller
/// (conservative) endpoint of the final bracket is returned.
pub fn find_xbar(delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!(
            "find_xbar requires delta > 0, got {delta}"
        )));
    }
    let nu = 0.5 * delta - 1.0;
    let bound_coeff = 2.0 * bessel_small_x_limit(nu)?;
    let below = |x: f64| -> Result<bool> { Ok(bessel_i(nu, x)? < bound_coeff * x.powf(nu)) };

    let mut lo = 1e-3;
    if !below(lo)? {
        return Err(Error::Numeric(format!(
            "small-x inequality already fails at x = {lo} for delta = {delta}"
        )));
    }
    let mut hi = lo;
    loop {
        hi *= 2.0;
        if hi > 90.0 {
            return Err(Error::Range(format!(
                "no bracket for xbar below x = 90 at delta = {delta}"
            )));
        }
        if !below(hi)? {
            break;
        }
        lo = hi;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if below(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
