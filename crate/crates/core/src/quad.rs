//! Globally adaptive Gauss–Kronrod quadrature (7–15 pair).
//!
//! The embedded 7-point Gauss rule provides the error estimate for the
//! 15-point Kronrod value on each subinterval; the subinterval with the
//! largest estimated error is bisected until the requested absolute
//! tolerance is met.

use crate::error::{Error, Result};

/// Kronrod abscissae for the 7-15 pair, positive half.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

/// 7-point Gauss weights, matching the odd-index abscissae above.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// 15-point Kronrod weights.
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub abs_error: f64,
    pub subdivisions: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * res_abs;
        if min_err > scaled {
            scaled = min_err;
        }
    }
    scaled
}

fn kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);

    let mut res_gauss = f_center * WG[3];
    let mut res_kronrod = f_center * WGK[7];
    let mut res_abs = res_kronrod.abs();

    let mut fv1 = [0.0_f64; 7];
    let mut fv2 = [0.0_f64; 7];

    for (j, wg) in WG.iter().enumerate().take(3) {
        let idx = 2 * j + 1;
        let dx = half * XGK[idx];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[idx] = f1;
        fv2[idx] = f2;
        res_gauss += wg * (f1 + f2);
        res_kronrod += WGK[idx] * (f1 + f2);
        res_abs += WGK[idx] * (f1.abs() + f2.abs());
    }
    for j in 0..4 {
        let idx = 2 * j;
        if idx == 7 {
            continue;
        }
        let dx = half * XGK[idx];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[idx] = f1;
        fv2[idx] = f2;
        res_kronrod += WGK[idx] * (f1 + f2);
        res_abs += WGK[idx] * (f1.abs() + f2.abs());
    }

    let mean = 0.5 * res_kronrod;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let err = (res_kronrod - res_gauss) * half;
    Segment {
        a,
        b,
        value: res_kronrod * half,
        error: rescale_error(err, res_abs * half.abs(), res_asc * half.abs()),
    }
}

/// Integrate `f` over `[a, b]` to the given absolute tolerance.
///
/// Direction is honored: `a > b` yields the negated integral. Fails with a
/// numeric error carrying the achieved estimate when the subdivision budget
/// runs out before the tolerance is met.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<Quadrature> {
    integrate_auto(f, a, b, abs_tol, 0.0, 2000)
}

pub fn integrate_with<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_segments: usize,
) -> Result<Quadrature> {
    integrate_auto(f, a, b, abs_tol, 0.0, max_segments)
}

/// Adaptive integration targeting `abs_tol + rel_tol * |integral|`; the
/// relative part keeps steeply growing integrands (exponential scale
/// densities) feasible.
pub fn integrate_auto<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Result<Quadrature> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Argument(format!(
            "integration limits must be finite, got [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            abs_error: 0.0,
            subdivisions: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let check_finite = |seg: &Segment| -> Result<()> {
        if seg.value.is_finite() {
            Ok(())
        } else {
            Err(Error::Numeric(format!(
                "integrand produced a non-finite contribution on [{}, {}]",
                seg.a, seg.b
            )))
        }
    };

    let first = kronrod_15(&f, lo, hi);
    check_finite(&first)?;
    let mut segments = vec![first];
    loop {
        let total_err: f64 = segments.iter().map(|s| s.error).sum();
        let total_val: f64 = segments.iter().map(|s| s.value).sum();
        let target = abs_tol + rel_tol * total_val.abs();
        if total_err <= target {
            break;
        }
        if segments.len() >= max_segments {
            return Err(Error::Numeric(format!(
                "quadrature on [{lo}, {hi}] did not reach tolerance {target:.3e}; \
                 achieved error estimate {total_err:.3e} after {} segments",
                segments.len()
            )));
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("segment list is nonempty");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval exhausted at machine precision; keep its estimate.
            segments.push(seg);
            let total_err: f64 = segments.iter().map(|s| s.error).sum();
            if total_err <= target {
                break;
            }
            return Err(Error::Numeric(format!(
                "quadrature on [{lo}, {hi}] stalled at machine precision; \
                 achieved error estimate {total_err:.3e}"
            )));
        }
        let left = kronrod_15(&f, seg.a, mid);
        check_finite(&left)?;
        let right = kronrod_15(&f, mid, seg.b);
        check_finite(&right)?;
        segments.push(left);
        segments.push(right);
    }

    let value: f64 = segments.iter().map(|s| s.value).sum();
    let abs_error: f64 = segments.iter().map(|s| s.error).sum();
    Ok(Quadrature {
        value: sign * value,
        abs_error,
        subdivisions: segments.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        // The 15-point Kronrod rule integrates degree-22 polynomials exactly.
        let q = integrate(|x| x.powi(10), 0.0, 1.0, 1e-12).unwrap();
        assert!((q.value - 1.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn sine_over_half_period() {
        let q = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert!((q.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_tail() {
        let q = integrate(|y| (-y).exp(), 0.0, 50.0, 1e-12).unwrap();
        assert!((q.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_limits_negate() {
        let fwd = integrate(|x| x * x, 0.0, 2.0, 1e-12).unwrap();
        let bwd = integrate(|x| x * x, 2.0, 0.0, 1e-12).unwrap();
        assert_eq!(fwd.value, -bwd.value);
    }

    #[test]
    fn empty_interval_is_zero() {
        let q = integrate(|x| x.exp(), 3.0, 3.0, 1e-12).unwrap();
        assert_eq!(q.value, 0.0);
    }

    #[test]
    fn oscillatory_needs_subdivision() {
        let q = integrate(|x| (40.0 * x).sin().powi(2), 0.0, 1.0, 1e-11).unwrap();
        let exact = 0.5 - (80.0_f64.sin()) / 160.0;
        assert!((q.value - exact).abs() < 1e-10);
        assert!(q.subdivisions > 1);
    }

    #[test]
    fn non_finite_limit_rejected() {
        assert!(integrate(|x| x, 0.0, f64::INFINITY, 1e-9).is_err());
    }
}
