//! Explicit Euler–Maruyama steppers.
//!
//! Square-root processes use full truncation: coefficients are evaluated at
//! max(state, 0) and the state is clipped to 0 after each step. All coupled
//! processes consume the same increment stream, with the squared family
//! driven by γ(X)·dW so the comparison ordering is a pathwise property.

use super::rng::CounterRng;
use super::{step_count, CoupledTriple, PathGrid, TimeChange, MAX_STORED_STEPS};
use crate::error::{Error, Result};
use crate::model::ModelSpec;

#[inline]
fn kahan_add(sum: &mut f64, comp: &mut f64, term: f64) {
    let y = term - *comp;
    let t = *sum + y;
    *comp = (t - *sum) - y;
    *sum = t;
}

#[inline]
fn sign_convention(x: f64) -> f64 {
    // γ(x) = x/|x| with γ(0) = 1.
    if x == 0.0 {
        1.0
    } else {
        x.signum()
    }
}

#[inline]
fn gsq_lower(spec: &ModelSpec, z_l: f64) -> f64 {
    let g = spec.diffusion(z_l.max(0.0).sqrt());
    g * g
}

fn check_finite(x: f64, step: usize, what: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Simulation {
            step,
            what: format!("{what} became non-finite"),
        })
    }
}

fn ensure_storable(n: usize) -> Result<()> {
    if n > MAX_STORED_STEPS {
        return Err(Error::Argument(format!(
            "{n} steps exceed the {MAX_STORED_STEPS}-step storage limit; \
             use the streaming interface for long horizons"
        )));
    }
    Ok(())
}

/// Stream the primary path X, calling `observe(k, t_k, x_k)` at every grid
/// point including the initial one.
pub fn stream_primary(
    spec: &ModelSpec,
    horizon: f64,
    dt: f64,
    seed: u64,
    mut observe: impl FnMut(usize, f64, f64),
) -> Result<()> {
    let n = step_count(horizon, dt)?;
    let sqrt_dt = dt.sqrt();
    let mut rng = CounterRng::new(seed);
    let mut x = spec.x0;
    observe(0, 0.0, x);
    for k in 0..n {
        let t = k as f64 * dt;
        let dw = sqrt_dt * rng.standard_normal();
        x = x + spec.drift(x, t) * dt + spec.diffusion(x) * dw;
        check_finite(x, k + 1, "primary state X")?;
        observe(k + 1, (k + 1) as f64 * dt, x);
    }
    Ok(())
}

/// Euler–Maruyama path of the primary SDE, materialized with its driver.
pub fn simulate_primary(spec: &ModelSpec, horizon: f64, dt: f64, seed: u64) -> Result<PathGrid> {
    let n = step_count(horizon, dt)?;
    ensure_storable(n)?;
    let sqrt_dt = dt.sqrt();
    let mut rng = CounterRng::new(seed);
    let mut t = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    let mut dw_out = Vec::with_capacity(n);
    let mut x = spec.x0;
    t.push(0.0);
    values.push(x);
    for k in 0..n {
        let tk = k as f64 * dt;
        let dw = sqrt_dt * rng.standard_normal();
        x = x + spec.drift(x, tk) * dt + spec.diffusion(x) * dw;
        check_finite(x, k + 1, "primary state X")?;
        dw_out.push(dw);
        t.push((k + 1) as f64 * dt);
        values.push(x);
    }
    Ok(PathGrid {
        dt,
        t,
        values,
        dw: dw_out,
        seed,
    })
}

/// One observed grid point of a coupled simulation.
#[derive(Debug, Clone, Copy)]
pub struct CoupledStep {
    pub index: usize,
    pub t: f64,
    pub x: f64,
    /// Euler state of the squared dynamics on the shared driver; tracks x²
    /// within the ordering tolerance.
    pub z: f64,
    pub z_l: f64,
    pub z_u: f64,
    /// Compensated running sum of g²(√Z_L) terms; θ(t_k) = dt · gsq_sum.
    pub gsq_sum: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CoupledStats {
    pub steps: usize,
    pub clips_lower: u64,
    pub clips_mid: u64,
    pub clips_upper: u64,
}

/// Stream the coupled triple (Z_L, Z = X², Z_u) on one driver.
pub fn stream_coupled(
    spec: &ModelSpec,
    horizon: f64,
    dt: f64,
    seed: u64,
    mut observe: impl FnMut(&CoupledStep),
) -> Result<CoupledStats> {
    let n = step_count(horizon, dt)?;
    let sqrt_dt = dt.sqrt();
    let two_rho = 2.0 * spec.rho;
    let delta = spec.delta();
    let mut rng = CounterRng::new(seed);
    let mut stats = CoupledStats {
        steps: n,
        ..Default::default()
    };

    let mut x = spec.x0;
    let mut z = spec.x0 * spec.x0;
    let mut z_l = spec.x0 * spec.x0;
    let mut z_u = 1.0 + spec.x0 * spec.x0;
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;

    observe(&CoupledStep {
        index: 0,
        t: 0.0,
        x,
        z,
        z_l,
        z_u,
        gsq_sum: 0.0,
    });

    for k in 0..n {
        let t = k as f64 * dt;
        let dw = sqrt_dt * rng.standard_normal();
        let dwp = sign_convention(x) * dw;

        // Left-endpoint clock term from the current lower state.
        let gsq_l = gsq_lower(spec, z_l);
        kahan_add(&mut sum, &mut comp, gsq_l);

        let root_l = z_l.max(0.0).sqrt();
        let g_l = spec.diffusion(root_l);
        z_l += delta * (g_l * g_l) * dt + 2.0 * root_l * g_l * dwp;
        if z_l < 0.0 {
            z_l = 0.0;
            stats.clips_lower += 1;
        }

        // Squared dynamics on the same driver: drift 2Xf + g², diffusion
        // 2√z g(√z), with X entering only through the drift term.
        let root_z = z.max(0.0).sqrt();
        let g_z = spec.diffusion(root_z);
        z += (2.0 * x * spec.drift(x, t) + g_z * g_z) * dt + 2.0 * root_z * g_z * dwp;
        if z < 0.0 {
            z = 0.0;
            stats.clips_mid += 1;
        }

        let root_u = z_u.max(0.0).sqrt();
        let g_u = spec.diffusion(root_u);
        z_u += (two_rho + g_u * g_u) * dt + 2.0 * root_u * g_u * dwp;
        if z_u < 0.0 {
            z_u = 0.0;
            stats.clips_upper += 1;
        }

        x = x + spec.drift(x, t) * dt + spec.diffusion(x) * dw;

        check_finite(x, k + 1, "primary state X")?;
        check_finite(z, k + 1, "squared state Z")?;
        check_finite(z_l, k + 1, "lower comparison Z_L")?;
        check_finite(z_u, k + 1, "upper comparison Z_u")?;

        observe(&CoupledStep {
            index: k + 1,
            t: (k + 1) as f64 * dt,
            x,
            z,
            z_l,
            z_u,
            gsq_sum: sum,
        });
    }
    Ok(stats)
}

/// Materialized coupled triple.
pub fn simulate_coupled(
    spec: &ModelSpec,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<CoupledTriple> {
    let n = step_count(horizon, dt)?;
    ensure_storable(n)?;
    let mut t = Vec::with_capacity(n + 1);
    let mut x_path = Vec::with_capacity(n + 1);
    let mut z_l = Vec::with_capacity(n + 1);
    let mut z = Vec::with_capacity(n + 1);
    let mut z_u = Vec::with_capacity(n + 1);
    stream_coupled(spec, horizon, dt, seed, |step| {
        t.push(step.t);
        x_path.push(step.x);
        z_l.push(step.z_l);
        z.push(step.z);
        z_u.push(step.z_u);
    })?;

    // Reconstruct the driver so the grid is complete.
    let sqrt_dt = dt.sqrt();
    let mut rng = CounterRng::new(seed);
    let dw: Vec<f64> = (0..n).map(|_| sqrt_dt * rng.standard_normal()).collect();

    Ok(CoupledTriple {
        grid: PathGrid {
            dt,
            t,
            values: x_path,
            dw,
            seed,
        },
        z_l,
        z,
        z_u,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SqbesselStats {
    pub steps: usize,
    /// Number of post-step clips to zero.
    pub clips: u64,
}

/// Stream a full-truncation Euler path of the squared Bessel process of
/// dimension `delta` (dZ = δ dt + 2√Z dW).
pub fn stream_sqbessel(
    delta: f64,
    x0_sq: f64,
    horizon: f64,
    dt: f64,
    seed: u64,
    mut observe: impl FnMut(usize, f64, f64),
) -> Result<SqbesselStats> {
    if !(delta > 0.0) {
        return Err(Error::Argument(format!("delta must be > 0, got {delta}")));
    }
    if !(x0_sq >= 0.0) {
        return Err(Error::Argument(format!("x0_sq must be >= 0, got {x0_sq}")));
    }
    let n = step_count(horizon, dt)?;
    let sqrt_dt = dt.sqrt();
    let mut rng = CounterRng::new(seed);
    let mut stats = SqbesselStats {
        steps: n,
        ..Default::default()
    };
    let mut z = x0_sq;
    observe(0, 0.0, z);
    for k in 0..n {
        let dw = sqrt_dt * rng.standard_normal();
        z += delta * dt + 2.0 * z.max(0.0).sqrt() * dw;
        if z < 0.0 {
            z = 0.0;
            stats.clips += 1;
        }
        check_finite(z, k + 1, "squared Bessel state")?;
        observe(k + 1, (k + 1) as f64 * dt, z);
    }
    Ok(stats)
}

/// Materialized squared-Bessel path.
pub fn simulate_sqbessel(
    delta: f64,
    x0_sq: f64,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<PathGrid> {
    let n = step_count(horizon, dt)?;
    ensure_storable(n)?;
    let mut t = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    stream_sqbessel(delta, x0_sq, horizon, dt, seed, |_, tk, z| {
        t.push(tk);
        values.push(z);
    })?;
    let sqrt_dt = dt.sqrt();
    let mut rng = CounterRng::new(seed);
    let dw: Vec<f64> = (0..n).map(|_| sqrt_dt * rng.standard_normal()).collect();
    Ok(PathGrid {
        dt,
        t,
        values,
        dw,
        seed,
    })
}

/// Clock θ from a lower-comparison path by the left-endpoint rule.
pub fn time_change_of(z_l: &[f64], spec: &ModelSpec, dt: f64) -> Result<TimeChange> {
    if z_l.is_empty() {
        return Err(Error::Argument("time change needs a nonempty path".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Argument(format!("dt must be positive, got {dt}")));
    }
    let mut sums = Vec::with_capacity(z_l.len());
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    sums.push(0.0);
    for &state in &z_l[..z_l.len() - 1] {
        kahan_add(&mut sum, &mut comp, gsq_lower(spec, state));
        sums.push(sum);
    }
    Ok(TimeChange::from_sums(dt, sums))
}

/// U(s) = e^{-s} Z̃(e^s - 1) on a uniform grid in the transformed time,
/// by monotone interpolation of the source path.
pub fn u_transform(ztilde: &PathGrid, ds: f64, horizon: f64) -> Result<PathGrid> {
    if !(ds > 0.0) {
        return Err(Error::Argument(format!("ds must be positive, got {ds}")));
    }
    if !(horizon >= 0.0) {
        return Err(Error::Argument(format!(
            "horizon must be nonnegative, got {horizon}"
        )));
    }
    let max_horizon = (1.0 + ztilde.horizon()).ln();
    if horizon > max_horizon + 1e-12 {
        return Err(Error::Range(format!(
            "requested transformed horizon {horizon} exceeds log(1 + T) = {max_horizon}"
        )));
    }
    let n = (horizon / ds).floor() as usize;
    let mut t = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let s = j as f64 * ds;
        let tau = (s.exp() - 1.0).min(ztilde.horizon());
        values.push((-s).exp() * ztilde.interpolate(tau)?);
        t.push(s);
    }
    Ok(PathGrid {
        dt: ds,
        t,
        values,
        dw: Vec::new(),
        seed: ztilde.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{families, ModelConstants, ModelSpec};

    fn driftless_unit(x0: f64) -> ModelSpec {
        families::brownian_control(1.0, x0)
    }

    #[test]
    fn driftless_path_is_cumulative_sum_of_driver() {
        let spec = driftless_unit(0.0);
        let path = simulate_primary(&spec, 1.0, 1e-3, 99).unwrap();
        let mut acc = 0.0;
        for (k, &dw) in path.dw.iter().enumerate() {
            acc = acc + 0.0 * path.dt + 1.0 * dw;
            assert_eq!(acc, path.values[k + 1], "deviation at step {k}");
        }
    }

    #[test]
    fn scaled_driver_is_affine() {
        let spec = families::brownian_control(2.0, 5.0);
        let path = simulate_primary(&spec, 1.0, 1e-3, 7).unwrap();
        let sum: f64 = path.dw.iter().sum();
        let expected = 5.0 + 2.0 * sum;
        assert!((path.last_value() - expected).abs() < 1e-10);
    }

    #[test]
    fn replay_is_bit_identical_and_matches_stream() {
        let spec = families::reference_model();
        let a = simulate_primary(&spec, 2.0, 1e-3, 1234).unwrap();
        let b = simulate_primary(&spec, 2.0, 1e-3, 1234).unwrap();
        assert_eq!(a, b);

        let mut streamed = Vec::new();
        stream_primary(&spec, 2.0, 1e-3, 1234, |_, _, x| streamed.push(x)).unwrap();
        assert_eq!(a.values, streamed);
    }

    #[test]
    fn grid_shape_invariants() {
        let spec = families::reference_model();
        let path = simulate_primary(&spec, 1.0, 0.01, 5).unwrap();
        assert_eq!(path.values.len(), path.t.len());
        assert_eq!(path.dw.len(), path.t.len() - 1);
        assert!((path.horizon() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coupled_initial_gap_is_one() {
        let spec = families::reference_model().with_x0(1.5);
        let triple = simulate_coupled(&spec, 0.1, 0.01, 3).unwrap();
        assert_eq!(triple.z_u[0] - triple.z[0], 1.0);
        assert_eq!(triple.z_l[0], 1.5 * 1.5);
        assert_eq!(triple.z[0], 1.5 * 1.5);
    }

    #[test]
    fn gamma_at_zero_is_plus_one() {
        // x0 = 0 makes γ(X_0) = +1, so the first upper update must use +dW_0.
        let spec = families::reference_model();
        let triple = simulate_coupled(&spec, 0.1, 0.01, 11).unwrap();
        let dt = 0.01;
        let dw0 = triple.grid.dw[0];
        let g1 = spec.diffusion(1.0);
        let expected = 1.0 + (2.0 * spec.rho + g1 * g1) * dt + 2.0 * 1.0 * g1 * dw0;
        assert_eq!(triple.z_u[1], expected.max(0.0));
    }

    #[test]
    fn matched_drift_collapses_z_onto_lower() {
        // f = 0, mu = 0, g = 1, x0 = 0: the squared state and the lower
        // comparison follow the identical recursion, so they agree exactly.
        let spec = ModelSpec::new(
            |_, _| 0.0,
            |_| 1.0,
            ModelConstants {
                rho: 1.0,
                mu: 0.0,
                sigma: 1.0,
                k1_sq: 1.0,
                k2_sq: 1.0,
                x0: 0.0,
            },
        )
        .unwrap();
        let triple = simulate_coupled(&spec, 1.0, 1e-4, 314).unwrap();
        assert_eq!(triple.z, triple.z_l);
    }

    #[test]
    fn squared_state_converges_to_primary_square() {
        // z is the Euler path of the squared dynamics; its gap to x² is the
        // O(√dt) strong discretization error and shrinks with the step.
        let spec = families::reference_model();
        let mut worsts = Vec::new();
        for dt in [1e-2, 1e-3, 1e-4] {
            let mut worst = 0.0_f64;
            for seed in [2u64, 77, 901] {
                let triple = simulate_coupled(&spec, 5.0, dt, seed).unwrap();
                for (x, z) in triple.grid.values.iter().zip(&triple.z) {
                    worst = worst.max((x * x - z).abs());
                }
            }
            worsts.push(worst);
        }
        assert!(worsts[0] > worsts[1] && worsts[1] > worsts[2], "{worsts:?}");
        assert!(
            worsts[2] <= 20.0 * 1e-4_f64.sqrt(),
            "gap {} too large at dt = 1e-4",
            worsts[2]
        );
    }

    #[test]
    fn coupled_ordering_holds_on_sample_paths() {
        let spec = families::reference_model();
        let dt = 1e-3;
        let tol = super::super::ordering_tolerance(dt);
        for seed in 0..20 {
            let triple = simulate_coupled(&spec, 5.0, dt, seed).unwrap();
            assert_eq!(
                triple.ordering_violations(tol),
                0,
                "ordering violated at seed {seed}"
            );
        }
    }

    #[test]
    fn sqbessel_stays_nonnegative() {
        let path = simulate_sqbessel(0.5, 0.0, 5.0, 1e-3, 17).unwrap();
        assert!(path.values.iter().all(|&z| z >= 0.0));
    }

    #[test]
    fn sqbessel_mean_matches_linear_growth() {
        // E Z(t) = x0² + δ t: the martingale part drops out in expectation.
        let (delta, x0_sq, t) = (2.0, 1.0, 1.0);
        let n_paths = 2000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for j in 0..n_paths {
            let mut last = 0.0;
            stream_sqbessel(delta, x0_sq, t, 1e-2, super::super::path_seed(900, j), |_, _, z| {
                last = z;
            })
            .unwrap();
            sum += last;
            sum_sq += last * last;
        }
        let nf = n_paths as f64;
        let mean = sum / nf;
        let se = ((sum_sq / nf - mean * mean) / nf).sqrt();
        let expected = x0_sq + delta * t;
        assert!(
            (mean - expected).abs() < 3.0 * se + 0.05,
            "mean {mean} vs {expected} (se {se})"
        );
    }

    #[test]
    fn time_change_exact_for_constant_diffusion() {
        let spec = families::brownian_control(2.0, 0.0);
        let z_l = vec![0.3; 101];
        let dt = 0.01;
        let tc = time_change_of(&z_l, &spec, dt).unwrap();
        for (k, &theta) in tc.theta.iter().enumerate() {
            assert_eq!(theta, 4.0 * (k as f64 * dt), "theta at k = {k}");
        }
        assert_eq!(tc.bounds_violations(4.0, 4.0), 0);
        // Round trip through the inverse clock.
        for (k, &theta) in tc.theta.iter().enumerate() {
            assert!((tc.tau_of(theta) - k as f64 * dt).abs() <= dt);
        }
    }

    #[test]
    fn time_change_bounds_hold_on_simulated_paths() {
        let spec = families::reference_model();
        for seed in 0..10 {
            let triple = simulate_coupled(&spec, 5.0, 1e-3, seed).unwrap();
            let tc = time_change_of(&triple.z_l, &spec, 1e-3).unwrap();
            assert_eq!(tc.bounds_violations(spec.k1_sq, spec.k2_sq), 0);
            for pair in tc.theta.windows(2) {
                assert!(pair[1] > pair[0], "theta must be strictly increasing");
            }
        }
    }

    #[test]
    fn u_transform_initial_value_and_constant_path() {
        let source = PathGrid {
            dt: 0.01,
            t: (0..=1000).map(|k| k as f64 * 0.01).collect(),
            values: vec![3.0; 1001],
            dw: vec![0.0; 1000],
            seed: 0,
        };
        let u = u_transform(&source, 0.05, 2.0).unwrap();
        assert_eq!(u.values[0], 3.0);
        for (s, val) in u.t.iter().zip(&u.values) {
            assert!((val - 3.0 * (-s).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn u_transform_horizon_guard() {
        let source = simulate_sqbessel(1.0, 0.0, 10.0, 0.01, 4).unwrap();
        // log(1 + 10) ≈ 2.398.
        assert!(u_transform(&source, 0.01, 2.3).is_ok());
        assert!(matches!(
            u_transform(&source, 0.01, 3.0),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn step_arguments_validated() {
        let spec = families::reference_model();
        assert!(simulate_primary(&spec, 0.5, 1.0, 0).is_err());
        assert!(simulate_primary(&spec, 1.0, 0.0, 0).is_err());
    }
}
