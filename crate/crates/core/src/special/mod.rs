//! Squared-Bessel transition density, distribution function, and the
//! small-time/large-time tail estimates built on the modified Bessel series.

pub mod bessel;
pub mod gamma;

pub use bessel::{bessel_i, bessel_small_x_limit, find_xbar, BESSEL_X_MAX};
pub use gamma::{gamma, ln_gamma, rgamma};

use crate::diffusion::classify::{self, ConvergenceVerdict};
use crate::error::{Error, Result};
use crate::quad;

/// Absolute tolerance for density quadratures.
const CDF_TOL: f64 = 1e-10;

/// Parameter set for the squared-Bessel transition law at elapsed time `t`
/// started from `x0_sq`.
#[derive(Debug, Clone, Copy)]
pub struct DensitySpec {
    /// Dimension δ = 2μ + 1 > 0.
    pub delta: f64,
    /// Bessel index ν(δ) = δ/2 − 1.
    pub nu: f64,
    /// Elapsed time.
    pub t: f64,
    /// Initial squared value.
    pub x0_sq: f64,
}

impl DensitySpec {
    pub fn new(delta: f64, t: f64, x0_sq: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::Argument(format!("delta must be > 0, got {delta}")));
        }
        if !(t > 0.0) {
            return Err(Error::Argument(format!("t must be > 0, got {t}")));
        }
        if !(x0_sq >= 0.0) {
            return Err(Error::Argument(format!("x0_sq must be >= 0, got {x0_sq}")));
        }
        Ok(Self {
            delta,
            nu: 0.5 * delta - 1.0,
            t,
            x0_sq,
        })
    }

    /// Dimension from the drift lower-bound constant: δ = 2μ + 1.
    pub fn from_mu(mu: f64, t: f64, x0_sq: f64) -> Result<Self> {
        Self::new(2.0 * mu + 1.0, t, x0_sq)
    }

    /// Upper integration limit beyond which the remaining mass is
    /// negligible at the 1e-6 level.
    ///
    /// The noncentral tail exponent is y/2t − |x0|√y/t (the Bessel factor
    /// grows like e^{|x0|√y/t}); the quadratic-root term keeps that
    /// exponent at least ~25 at the cutoff.
    pub fn effective_infinity(&self) -> f64 {
        let x0 = self.x0_sq.sqrt();
        let noncentral = {
            let s = x0 + (self.x0_sq + 50.0 * self.t).sqrt();
            s * s
        };
        (50.0 * self.t * self.delta)
            .max(noncentral)
            .max(50.0 * self.x0_sq)
            .max(50.0)
    }

    pub fn with_time(&self, t: f64) -> Result<Self> {
        Self::new(self.delta, t, self.x0_sq)
    }
}

/// Transition density q_t(x0², y) of the squared-Bessel process of
/// dimension δ.
pub fn sqbessel_density(spec: &DensitySpec, y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!(
            "sqbessel_density requires y > 0, got {y}"
        )));
    }
    let t = spec.t;
    if spec.x0_sq == 0.0 {
        let d2 = 0.5 * spec.delta;
        let val = (2.0 * t).powf(-d2) * rgamma(d2) * y.powf(d2 - 1.0) * (-y / (2.0 * t)).exp();
        return Ok(val);
    }
    let x0 = spec.x0_sq.sqrt();
    let arg = x0 * y.sqrt() / t;
    let bess = bessel_i(spec.nu, arg)?;
    let val = 0.5 / t
        * (y / spec.x0_sq).powf(0.5 * spec.nu)
        * (-(spec.x0_sq + y) / (2.0 * t)).exp()
        * bess;
    Ok(val.max(0.0))
}

/// P[Z(t) <= c] by adaptive quadrature of the density.
///
/// For δ < 2 the integrable singularity y^{δ/2−1} at the origin is removed
/// exactly by the substitution y = u^{2/δ}.
pub fn sqbessel_cdf(spec: &DensitySpec, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Domain(format!(
            "sqbessel_cdf requires c > 0, got {c}"
        )));
    }
    let spec = *spec;
    let q = if spec.delta < 2.0 {
        let p = 2.0 / spec.delta;
        let upper = c.powf(0.5 * spec.delta);
        quad::integrate(
            move |u| {
                let y = u.powf(p);
                match sqbessel_density(&spec, y) {
                    Ok(d) => d * p * u.powf(p - 1.0),
                    Err(_) => f64::NAN,
                }
            },
            0.0,
            upper,
            CDF_TOL,
        )?
    } else {
        quad::integrate(
            move |y| sqbessel_density(&spec, y).unwrap_or(f64::NAN),
            0.0,
            c,
            CDF_TOL,
        )?
    };
    if !q.value.is_finite() {
        return Err(Error::Numeric(
            "sqbessel_cdf integrand produced a non-finite value".into(),
        ));
    }
    Ok(q.value.max(0.0))
}

/// The threshold data behind the explicit tail bound: the Bessel small-x
/// witness x̄_δ, the time t_{δ,c} = |x0|√c / x̄_δ past which the bound is
/// valid, and the constant (1/2)^{δ/2−1} Γ(δ/2)^{−1} c^{δ/2} / (δ/2).
#[derive(Debug, Clone, Copy)]
pub struct TailBoundSpec {
    pub c: f64,
    pub t_min: f64,
    pub xbar: f64,
    pub coefficient: f64,
}

impl TailBoundSpec {
    pub fn new(spec: &DensitySpec, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Argument(format!("c must be > 0, got {c}")));
        }
        let xbar = find_xbar(spec.delta)?;
        let t_min = if spec.x0_sq == 0.0 {
            0.0
        } else {
            spec.x0_sq.sqrt() * c.sqrt() / xbar
        };
        let d2 = 0.5 * spec.delta;
        let coefficient = 0.5_f64.powf(d2 - 1.0) * rgamma(d2) * c.powf(d2) / d2;
        Ok(Self {
            c,
            t_min,
            xbar,
            coefficient,
        })
    }

    /// The bound at elapsed time `t`; the x0 = 0 form carries an extra 1/2.
    pub fn at(&self, spec: &DensitySpec, t: f64) -> f64 {
        let base = self.coefficient * t.powf(-0.5 * spec.delta);
        if spec.x0_sq == 0.0 {
            0.5 * base
        } else {
            base
        }
    }
}

/// Explicit upper bound for P[Z(t) <= c], valid for t >= t_{δ,c}.
pub fn step_a_tail_bound(spec: &DensitySpec, c: f64) -> Result<f64> {
    let tb = TailBoundSpec::new(spec, c)?;
    if spec.t < tb.t_min {
        return Err(Error::Precondition(format!(
            "tail bound requires t >= t_min = {:.6e}, got t = {:.6e}",
            tb.t_min, spec.t
        )));
    }
    Ok(tb.at(spec, spec.t))
}

/// Classify ∫_{e−1}^∞ (1+t)^{−1} P[Z(t) <= c] dt by geometric checkpoints.
///
/// Convergence of this integral for every c > 0 is what makes the
/// exponential functional of the transformed process vanish.
pub fn step_a_integral_finite(delta: f64, x0_sq: f64, c: f64) -> Result<ConvergenceVerdict> {
    if !(c > 0.0) {
        return Err(Error::Argument(format!("c must be > 0, got {c}")));
    }
    // Validate parameters once up front.
    DensitySpec::new(delta, 1.0, x0_sq)?;
    let t0 = std::f64::consts::E - 1.0;
    classify::classify_improper_integral(
        move |t| {
            let spec = match DensitySpec::new(delta, t, x0_sq) {
                Ok(s) => s,
                Err(_) => return f64::NAN,
            };
            match sqbessel_cdf(&spec, c) {
                Ok(p) => p / (1.0 + t),
                Err(_) => f64::NAN,
            }
        },
        t0,
        classify::DEFAULT_OCTAVES,
    )
}
