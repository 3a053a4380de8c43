//! Subcommand implementations.
//!
//! Exit-code contract: 0 success, 1 validation failure (bad arguments,
//! hypothesis violations, failed preconditions), 2 numeric failure
//! (quadrature, simulation, I/O), 64 usage errors.

use crate::config::ExperimentConfig;
use motoo_lab_core::diffusion::{
    self, AutonomousDiffusion, ConvergenceVerdict, EnvelopeFamily,
};
use motoo_lab_core::error::Error;
use motoo_lab_core::model::{self, families};
use motoo_lab_core::sim;
use motoo_lab_core::special::{DensitySpec, TailBoundSpec};
use motoo_lab_core::stats;
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Numeric(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Argument(_) | Error::Domain(_) | Error::Precondition(_) => {
                CliError::Validation(e.to_string())
            }
            Error::Range(_)
            | Error::Numeric(_)
            | Error::Evaluation { .. }
            | Error::Simulation { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numeric(format!("i/o error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Minimal `--key value` / `--key=value` / `--switch` parser.
pub struct Flags {
    values: BTreeMap<String, String>,
    switches: BTreeSet<String>,
}

impl Flags {
    pub fn parse(args: &[String], known: &[&str], known_switches: &[&str]) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        let mut switches = BTreeSet::new();
        let mut i = 0;
        while i < args.len() {
            let arg = &args[i];
            let Some(stripped) = arg.strip_prefix("--") else {
                return Err(CliError::Usage(format!("unexpected argument {arg:?}")));
            };
            let (key, inline) = match stripped.split_once('=') {
                Some((k, v)) => (k.to_string(), Some(v.to_string())),
                None => (stripped.to_string(), None),
            };
            if known_switches.contains(&key.as_str()) {
                if inline.is_some() {
                    return Err(CliError::Usage(format!("--{key} takes no value")));
                }
                switches.insert(key);
                i += 1;
                continue;
            }
            if !known.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("unknown flag --{key}")));
            }
            let value = match inline {
                Some(v) => v,
                None => {
                    i += 1;
                    args.get(i)
                        .cloned()
                        .ok_or_else(|| CliError::Usage(format!("--{key} needs a value")))?
                }
            };
            values.insert(key, value);
            i += 1;
        }
        Ok(Self { values, switches })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> CliResult<&str> {
        self.get(key)
            .ok_or_else(|| CliError::Usage(format!("missing required flag --{key}")))
    }

    pub fn get_f64(&self, key: &str) -> CliResult<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("--{key} {v:?} is not a number")))
            })
            .transpose()
    }

    pub fn require_f64(&self, key: &str) -> CliResult<f64> {
        self.get_f64(key)?
            .ok_or_else(|| CliError::Usage(format!("missing required flag --{key}")))
    }

    pub fn get_usize(&self, key: &str) -> CliResult<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| CliError::Usage(format!("--{key} {v:?} is not an integer")))
            })
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> CliResult<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| CliError::Usage(format!("--{key} {v:?} is not an integer")))
            })
            .transpose()
    }

    pub fn has(&self, key: &str) -> bool {
        self.switches.contains(key)
    }
}

/// Lossless binary64 text form: 17 significant digits.
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn log_run(subcommand: &str, seed: u64, resolved: &str) {
    let single_line = resolved.replace('\n', "; ");
    eprintln!("run: subcommand={subcommand} seed={seed} config: {single_line}");
}

fn load_config(flags: &Flags, key: &str) -> CliResult<ExperimentConfig> {
    let path = flags.require(key)?;
    let cfg = ExperimentConfig::load(path)?;
    if !cfg.family_is_known() {
        return Err(CliError::Usage(format!(
            "unknown model family '{}'; known families: {}",
            cfg.family,
            families::NAMES.join(", ")
        )));
    }
    Ok(cfg)
}

fn write_output(path: Option<&str>, content: &str) -> CliResult<()> {
    match path {
        Some(p) => {
            std::fs::write(p, content)?;
            Ok(())
        }
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
            Ok(())
        }
    }
}

/// Environment override for the worker count.
fn env_workers() -> CliResult<Option<usize>> {
    match std::env::var("MOTOO_LAB_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("MOTOO_LAB_THREADS={v:?} is not an integer"))),
        Err(_) => Ok(None),
    }
}

// ---------------------------------------------------------------- validate

pub fn cmd_validate(args: &[String]) -> CliResult<()> {
    let flags = Flags::parse(args, &["config", "tol"], &[])?;
    let cfg = load_config(&flags, "config")?;
    let tol = flags.get_f64("tol")?.unwrap_or(model::DEFAULT_VALIDATION_TOL);
    log_run("validate", cfg.seed, &cfg.serialize());

    let spec = cfg.build_model()?;
    let report = model::validate_model(
        &spec,
        &model::default_x_grid(),
        &model::default_t_grid(),
        tol,
    )?;
    let mut out = String::new();
    for check in &report.checks {
        let status = if check.advisory {
            "info"
        } else if check.pass {
            "pass"
        } else {
            "FAIL"
        };
        out.push_str(&format!(
            "{status}  {:<28} worst_violation={}  [{}]\n",
            check.name,
            fmt17(check.worst_violation),
            check.grid
        ));
    }
    print!("{out}");
    if report.passed() {
        println!("model validation: PASS (tol = {tol:e})");
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "model validation failed at tol = {tol:e}"
        )))
    }
}

// ---------------------------------------------------------------- classify

fn verdict_json(v: &ConvergenceVerdict) -> serde_json::Value {
    json!({
        "verdict": v.verdict.to_string(),
        "partial_total": finite_or_null(v.total()),
        "tail_ratio": finite_or_null(v.diagnostic.tail_ratio),
        "fitted_decay": finite_or_null(v.diagnostic.fitted_decay),
        "checkpoints": v.checkpoints.iter().map(|c| json!([c.t, finite_or_null(c.partial)])).collect::<Vec<_>>(),
    })
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

pub fn cmd_classify(args: &[String]) -> CliResult<()> {
    let flags = Flags::parse(
        args,
        &["generator", "c", "rho", "sigma", "delta", "envelope", "a", "t0", "out"],
        &[],
    )?;
    let name = flags.require("generator")?;
    let c = flags.get_f64("c")?.unwrap_or(1.0);
    let d = match name {
        "bm" => AutonomousDiffusion::brownian(),
        "inverse_drift" => {
            let rho = flags.get_f64("rho")?.unwrap_or(1.0);
            let sigma = flags.get_f64("sigma")?.unwrap_or(1.0);
            AutonomousDiffusion::inverse_drift(rho, sigma)
        }
        "cir" => {
            let delta = flags.get_f64("delta")?.unwrap_or(2.0);
            AutonomousDiffusion::cir(delta)
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown generator '{other}'; known: bm, inverse_drift, cir"
            )))
        }
    };
    log_run("classify", 0, &format!("generator={name} c={c}"));

    let mut scale_probes = Vec::new();
    for k in [-8i32, -6, -4, -2, 2, 4, 6, 8] {
        let x = c * 10f64.powi(k);
        let value = diffusion::scale_function(&d, c, x).ok();
        scale_probes.push(json!({
            "x": x,
            "s": value.map_or(serde_json::Value::Null, finite_or_null),
        }));
    }
    let speed = diffusion::speed_measure_total(&d, c)?;
    let (feller_zero, feller_inf) = diffusion::feller_explosion_test(&d, c)?;

    let motoo = match flags.get("envelope") {
        None => serde_json::Value::Null,
        Some(env_name) => {
            let a = flags.require_f64("a")?;
            let t0 = flags.get_f64("t0")?.unwrap_or(10.0);
            let envelope = match env_name {
                "log" => EnvelopeFamily::LogT { a },
                "sqrt_loglog" => EnvelopeFamily::SqrtTLogLog { a },
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown envelope '{other}'; known: log, sqrt_loglog"
                    )))
                }
            };
            let verdict = diffusion::motoo_classify(&d, c, |t| envelope.eval(t), t0)?;
            json!({
                "family": env_name,
                "a": a,
                "t0": t0,
                "classification": verdict_json(&verdict),
            })
        }
    };

    let report = json!({
        "generator": name,
        "c": c,
        "scale_probes": scale_probes,
        "speed_measure": verdict_json(&speed),
        "feller": {
            "at_zero": verdict_json(&feller_zero),
            "at_infinity": verdict_json(&feller_inf),
        },
        "motoo": motoo,
    });
    let text = format!("{}\n", serde_json::to_string_pretty(&report).expect("valid json"));
    write_output(flags.get("out"), &text)
}

// ---------------------------------------------------------------- density

pub fn cmd_density(args: &[String]) -> CliResult<()> {
    let flags = Flags::parse(args, &["delta", "t", "x0", "grid", "out"], &[])?;
    let delta = flags.require_f64("delta")?;
    let t = flags.require_f64("t")?;
    let x0 = flags.get_f64("x0")?.unwrap_or(0.0);
    let grid = flags.get("grid").unwrap_or("0:5:0.1");
    let parts: Vec<&str> = grid.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "--grid expects lo:hi:step, got {grid:?}"
        )));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::Usage("bad grid lower bound".into()))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::Usage("bad grid upper bound".into()))?;
    let step: f64 = parts[2]
        .parse()
        .map_err(|_| CliError::Usage("bad grid step".into()))?;
    if !(step > 0.0 && hi >= lo) {
        return Err(CliError::Usage(format!("degenerate grid {grid:?}")));
    }
    log_run("density", 0, &format!("delta={delta} t={t} x0={x0} grid={grid}"));

    let spec = DensitySpec::new(delta, t, x0 * x0)?;
    let mut out = String::from("y,density,cdf,tail_bound\n");
    let n = ((hi - lo) / step).round() as usize;
    for i in 0..=n {
        let y = lo + i as f64 * step;
        if y <= 0.0 {
            continue;
        }
        let density = motoo_lab_core::special::sqbessel_density(&spec, y)?;
        let cdf = motoo_lab_core::special::sqbessel_cdf(&spec, y)?;
        let bound = TailBoundSpec::new(&spec, y).ok().and_then(|tb| {
            if spec.t >= tb.t_min {
                Some(tb.at(&spec, spec.t))
            } else {
                None
            }
        });
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt17(y),
            fmt17(density),
            fmt17(cdf),
            bound.map_or_else(|| "nan".to_string(), fmt17)
        ));
    }
    write_output(flags.get("out"), &out)
}

// ---------------------------------------------------------------- simulate

pub fn cmd_simulate(args: &[String]) -> CliResult<()> {
    let flags = Flags::parse(
        args,
        &["model", "T", "dt", "paths", "seed", "every", "out"],
        &["coupled"],
    )?;
    let cfg = load_config(&flags, "model")?;
    let horizon = flags.get_f64("T")?.unwrap_or(cfg.horizon);
    let dt = flags.get_f64("dt")?.unwrap_or(cfg.dt);
    let n_paths = flags.get_usize("paths")?.unwrap_or(cfg.paths);
    let seed = flags.get_u64("seed")?.unwrap_or(cfg.seed);
    let every = flags.get_usize("every")?.unwrap_or(cfg.every).max(1);
    let coupled = flags.has("coupled");
    let out_path = flags
        .get("out")
        .map(str::to_string)
        .or_else(|| cfg.out.clone());

    let mut resolved = cfg.clone();
    resolved.horizon = horizon;
    resolved.dt = dt;
    resolved.paths = n_paths;
    resolved.seed = seed;
    resolved.every = every;
    log_run("simulate", seed, &resolved.serialize());

    let spec = cfg.build_model()?;
    let mut out = String::new();
    if coupled {
        out.push_str("path,t,X,z_l,z,z_u,theta\n");
    } else {
        out.push_str("path,t,X\n");
    }
    for p in 0..n_paths {
        let path_seed = sim::path_seed(seed, p as u64);
        if coupled {
            let triple = sim::simulate_coupled(&spec, horizon, dt, path_seed)?;
            let tc = sim::time_change_of(&triple.z_l, &spec, dt)?;
            for k in (0..triple.grid.len()).step_by(every) {
                out.push_str(&format!(
                    "{p},{},{},{},{},{},{}\n",
                    fmt17(triple.grid.t[k]),
                    fmt17(triple.grid.values[k]),
                    fmt17(triple.z_l[k]),
                    fmt17(triple.z[k]),
                    fmt17(triple.z_u[k]),
                    fmt17(tc.theta[k]),
                ));
            }
        } else {
            let path = sim::simulate_primary(&spec, horizon, dt, path_seed)?;
            for k in (0..path.len()).step_by(every) {
                out.push_str(&format!(
                    "{p},{},{}\n",
                    fmt17(path.t[k]),
                    fmt17(path.values[k])
                ));
            }
        }
    }
    write_output(out_path.as_deref(), &out)
}

// ---------------------------------------------------------------- lil-report

pub fn cmd_lil_report(args: &[String]) -> CliResult<()> {
    let flags = Flags::parse(args, &["config", "out", "workers"], &[])?;
    let cfg = load_config(&flags, "config")?;
    let workers = match flags.get_usize("workers")? {
        Some(w) => Some(w),
        None => env_workers()?,
    };
    log_run("lil-report", cfg.seed, &cfg.serialize());

    let spec = cfg.build_model()?;
    let ens_cfg = cfg.ensemble_config(workers);
    let report = stats::ensemble_report(&spec, &ens_cfg)?;

    let summary = json!({
        "model": {
            "family": cfg.family,
            "params": cfg.params,
            "rho": cfg.rho,
            "mu": cfg.mu,
            "sigma": cfg.sigma,
            "k1_sq": cfg.k1_sq,
            "k2_sq": cfg.k2_sq,
            "x0": cfg.x0,
        },
        "run": {
            "T": report.horizon,
            "dt": report.dt,
            "paths": report.n_paths,
            "seed": report.seed,
            "checkpoints": report.checkpoints,
            "thresholds": report.thresholds,
            "fc_horizons": report.fc_horizons,
        },
        "results": {
            "median_normalized_sup": finite_or_null(report.median_normalized_sup),
            "per_path_normalized_sup": report.paths.iter()
                .map(|p| finite_or_null(p.lil.normalized_sup())).collect::<Vec<_>>(),
            "total_ordering_violations": report.total_ordering_violations,
            "total_theta_violations": report.total_theta_violations,
            "occupation_medians": report.occupation_medians,
            "gsq_average_medians": report.gsq_average_medians,
            "fc_medians": report.fc_medians,
        },
    });
    let json_text = format!(
        "{}\n",
        serde_json::to_string_pretty(&summary).expect("valid json")
    );

    let mut csv = String::from("checkpoint,gsq_average_median");
    for c in &report.thresholds {
        csv.push_str(&format!(",occupation_median_c_{c}"));
    }
    csv.push('\n');
    for (j, cp) in report.checkpoints.iter().enumerate() {
        csv.push_str(&fmt17(*cp));
        csv.push(',');
        csv.push_str(&fmt17(report.gsq_average_medians[j]));
        for i in 0..report.thresholds.len() {
            csv.push(',');
            csv.push_str(&fmt17(report.occupation_medians[i][j]));
        }
        csv.push('\n');
    }

    let prefix = flags
        .get("out")
        .map(str::to_string)
        .or_else(|| cfg.out.clone());
    match prefix {
        Some(prefix) => {
            std::fs::write(format!("{prefix}.json"), &json_text)?;
            std::fs::write(format!("{prefix}.csv"), &csv)?;
            println!("wrote {prefix}.json and {prefix}.csv");
            Ok(())
        }
        None => {
            print!("{json_text}");
            Ok(())
        }
    }
}
