//! Counter-based 64-bit generator and Gaussian increments by inverse-CDF
//! transform.
//!
//! The generator is the splitmix64 mixing function applied to
//! `seed + k * GOLDEN`, i.e. a pure function of (seed, counter): streams are
//! reproducible, splittable by seed, and independent of how work is
//! scheduled. Gaussians come from the inverse normal CDF rather than
//! rejection sampling so the number of uniforms consumed per variate is
//! fixed on every platform.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Deterministic counter-based generator.
#[derive(Debug, Clone)]
pub struct CounterRng {
    seed: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        let mut z = self.seed.wrapping_add(self.counter.wrapping_mul(GOLDEN));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform variate in the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }

    /// Standard normal variate.
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        normal_inv_cdf(self.uniform())
    }
}

/// Seed for path `j` of an ensemble run.
#[inline]
pub fn path_seed(seed: u64, path: u64) -> u64 {
    seed ^ path
}

// Acklam's rational approximation to the inverse normal CDF
// (~1.15e-9 relative accuracy, far below every statistical tolerance here).
#[allow(clippy::excessive_precision)]
const PPF_A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const PPF_B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const PPF_C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const PPF_D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];
const PPF_LOW: f64 = 0.02425;

/// Inverse of the standard normal CDF on (0, 1).
pub fn normal_inv_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    if p < PPF_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((PPF_C[0] * q + PPF_C[1]) * q + PPF_C[2]) * q + PPF_C[3]) * q + PPF_C[4]) * q
            + PPF_C[5])
            / ((((PPF_D[0] * q + PPF_D[1]) * q + PPF_D[2]) * q + PPF_D[3]) * q + 1.0)
    } else if p <= 1.0 - PPF_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((PPF_A[0] * r + PPF_A[1]) * r + PPF_A[2]) * r + PPF_A[3]) * r + PPF_A[4]) * r
            + PPF_A[5])
            * q
            / (((((PPF_B[0] * r + PPF_B[1]) * r + PPF_B[2]) * r + PPF_B[3]) * r + PPF_B[4]) * r
                + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((PPF_C[0] * q + PPF_C[1]) * q + PPF_C[2]) * q + PPF_C[3]) * q + PPF_C[4]) * q
            + PPF_C[5])
            / ((((PPF_D[0] * q + PPF_D[1]) * q + PPF_D[2]) * q + PPF_D[3]) * q + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;

    #[test]
    fn replay_is_bit_identical() {
        let mut a = CounterRng::new(42);
        let first: Vec<u64> = (0..100).map(|_| a.next_u64()).collect();
        let mut b = CounterRng::new(42);
        let second: Vec<u64> = (0..100).map(|_| b.next_u64()).collect();
        assert_eq!(first, second);
    }

    #[test]
    fn different_seeds_differ() {
        let mut a = CounterRng::new(1);
        let mut b = CounterRng::new(2);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn uniforms_are_strictly_inside_unit_interval() {
        let mut rng = CounterRng::new(7);
        for _ in 0..10_000 {
            let u = rng.uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    /// The forward normal CDF by quadrature is an oracle independent of the
    /// rational approximation it checks.
    fn normal_cdf_by_quadrature(x: f64) -> f64 {
        let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        0.5 + quad::integrate(phi, 0.0, x, 1e-13).unwrap().value
    }

    #[test]
    fn inverse_cdf_round_trip() {
        for k in 1..40 {
            let p = k as f64 / 40.0;
            let x = normal_inv_cdf(p);
            let back = normal_cdf_by_quadrature(x);
            assert!(
                (back - p).abs() < 1e-8,
                "round trip failed at p = {p}: x = {x}, back = {back}"
            );
        }
        // Tail branches.
        for &p in &[1e-6, 1e-3, 0.02, 0.98, 1.0 - 1e-3, 1.0 - 1e-6] {
            let back = normal_cdf_by_quadrature(normal_inv_cdf(p));
            assert!((back - p).abs() < 1e-8, "tail round trip failed at p = {p}");
        }
    }

    #[test]
    fn inverse_cdf_is_monotone() {
        let mut prev = f64::NEG_INFINITY;
        for k in 1..1000 {
            let x = normal_inv_cdf(k as f64 / 1000.0);
            assert!(x > prev);
            prev = x;
        }
    }

    #[test]
    fn moments_of_normal_stream() {
        // Mean within 3 SE of 0 and second moment within 3 SE of 1 over 1e5 draws.
        let n = 100_000;
        let mut rng = CounterRng::new(2024);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let z = rng.standard_normal();
            sum += z;
            sum_sq += z * z;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = sum_sq / nf - mean * mean;
        assert!(mean.abs() < 3.0 / nf.sqrt(), "mean = {mean}");
        // Var[z²] = 2 for a standard normal.
        assert!((var - 1.0).abs() < 3.0 * (2.0_f64 / nf).sqrt(), "var = {var}");
    }
}
