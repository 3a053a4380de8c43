//! Flat INI-style experiment configuration.
//!
//! Three sections: `[model]` holds the coefficient family name, its numeric
//! parameters, and the certified constants; `[run]` holds horizon, step,
//! path count, seed, checkpoints, thresholds, and envelope parameter;
//! `[output]` holds the output prefix, thinning, and format. Keys are
//! `key = value` lines, `#` starts a comment. No expression language:
//! coefficient families are code-registered, values are plain numbers.

use motoo_lab_core::error::{Error, Result};
use motoo_lab_core::model::{families, ModelConstants, ModelSpec};
use motoo_lab_core::stats::EnsembleConfig;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub family: String,
    pub params: BTreeMap<String, f64>,
    pub rho: f64,
    pub mu: f64,
    pub sigma: f64,
    pub k1_sq: f64,
    pub k2_sq: f64,
    pub x0: f64,

    pub horizon: f64,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    pub checkpoints: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub fc_horizons: Vec<f64>,
    pub fc_threshold: f64,
    pub lil_t_start: f64,
    pub envelope_a: f64,
    pub workers: usize,

    pub out: Option<String>,
    pub every: usize,
    pub format: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            family: "rational".into(),
            params: BTreeMap::new(),
            rho: 1.0,
            mu: 0.0,
            sigma: 1.0,
            k1_sq: 1.0,
            k2_sq: 4.0,
            x0: 0.0,
            horizon: 1000.0,
            dt: 0.01,
            paths: 8,
            seed: 1,
            checkpoints: Vec::new(),
            thresholds: vec![1.0, 10.0],
            fc_horizons: Vec::new(),
            fc_threshold: 1.0,
            lil_t_start: 16.0,
            envelope_a: 1.0,
            workers: 0,
            out: None,
            every: 1,
            format: "csv".into(),
        }
    }
}

fn parse_f64(section: &str, key: &str, value: &str) -> Result<f64> {
    value.trim().parse::<f64>().map_err(|_| {
        Error::Argument(format!("[{section}] {key} = {value:?} is not a number"))
    })
}

fn parse_list(section: &str, key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64(section, key, s))
        .collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Argument(format!(
                    "config line {}: expected 'key = value', got {raw:?}",
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            match section.as_str() {
                "model" => match key {
                    "family" => cfg.family = value.to_string(),
                    "rho" => cfg.rho = parse_f64(&section, key, value)?,
                    "mu" => cfg.mu = parse_f64(&section, key, value)?,
                    "sigma" => cfg.sigma = parse_f64(&section, key, value)?,
                    "k1_sq" => cfg.k1_sq = parse_f64(&section, key, value)?,
                    "k2_sq" => cfg.k2_sq = parse_f64(&section, key, value)?,
                    "x0" => cfg.x0 = parse_f64(&section, key, value)?,
                    other => {
                        cfg.params
                            .insert(other.to_string(), parse_f64(&section, key, value)?);
                    }
                },
                "run" => match key {
                    "T" => cfg.horizon = parse_f64(&section, key, value)?,
                    "dt" => cfg.dt = parse_f64(&section, key, value)?,
                    "paths" => {
                        cfg.paths = value.parse().map_err(|_| {
                            Error::Argument(format!("[run] paths = {value:?} is not an integer"))
                        })?
                    }
                    "seed" => {
                        cfg.seed = value.parse().map_err(|_| {
                            Error::Argument(format!("[run] seed = {value:?} is not an integer"))
                        })?
                    }
                    "checkpoints" => cfg.checkpoints = parse_list(&section, key, value)?,
                    "thresholds" => cfg.thresholds = parse_list(&section, key, value)?,
                    "fc_horizons" => cfg.fc_horizons = parse_list(&section, key, value)?,
                    "fc_threshold" => cfg.fc_threshold = parse_f64(&section, key, value)?,
                    "lil_t_start" => cfg.lil_t_start = parse_f64(&section, key, value)?,
                    "envelope_a" => cfg.envelope_a = parse_f64(&section, key, value)?,
                    "workers" => {
                        cfg.workers = value.parse().map_err(|_| {
                            Error::Argument(format!("[run] workers = {value:?} is not an integer"))
                        })?
                    }
                    other => {
                        return Err(Error::Argument(format!("unknown [run] key '{other}'")))
                    }
                },
                "output" => match key {
                    "out" => cfg.out = Some(value.to_string()),
                    "every" => {
                        cfg.every = value.parse().map_err(|_| {
                            Error::Argument(format!("[output] every = {value:?} is not an integer"))
                        })?
                    }
                    "format" => cfg.format = value.to_string(),
                    other => {
                        return Err(Error::Argument(format!("unknown [output] key '{other}'")))
                    }
                },
                other => {
                    return Err(Error::Argument(format!(
                        "unknown config section '[{other}]'"
                    )))
                }
            }
        }
        if cfg.every == 0 {
            return Err(Error::Argument("[output] every must be >= 1".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Argument(format!("cannot read config {path}: {e}")))?;
        Self::parse(&text)
    }

    /// Canonical serialization; `parse(serialize(parse(x)))` is a fixed point.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str("[model]\n");
        out.push_str(&format!("family = {}\n", self.family));
        for (k, v) in &self.params {
            out.push_str(&format!("{k} = {v:e}\n"));
        }
        out.push_str(&format!("rho = {:e}\n", self.rho));
        out.push_str(&format!("mu = {:e}\n", self.mu));
        out.push_str(&format!("sigma = {:e}\n", self.sigma));
        out.push_str(&format!("k1_sq = {:e}\n", self.k1_sq));
        out.push_str(&format!("k2_sq = {:e}\n", self.k2_sq));
        out.push_str(&format!("x0 = {:e}\n", self.x0));
        out.push_str("\n[run]\n");
        out.push_str(&format!("T = {:e}\n", self.horizon));
        out.push_str(&format!("dt = {:e}\n", self.dt));
        out.push_str(&format!("paths = {}\n", self.paths));
        out.push_str(&format!("seed = {}\n", self.seed));
        let join = |xs: &[f64]| {
            xs.iter()
                .map(|x| format!("{x:e}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        if !self.checkpoints.is_empty() {
            out.push_str(&format!("checkpoints = {}\n", join(&self.checkpoints)));
        }
        if !self.thresholds.is_empty() {
            out.push_str(&format!("thresholds = {}\n", join(&self.thresholds)));
        }
        if !self.fc_horizons.is_empty() {
            out.push_str(&format!("fc_horizons = {}\n", join(&self.fc_horizons)));
        }
        out.push_str(&format!("fc_threshold = {:e}\n", self.fc_threshold));
        out.push_str(&format!("lil_t_start = {:e}\n", self.lil_t_start));
        out.push_str(&format!("envelope_a = {:e}\n", self.envelope_a));
        out.push_str(&format!("workers = {}\n", self.workers));
        out.push_str("\n[output]\n");
        if let Some(out_path) = &self.out {
            out.push_str(&format!("out = {out_path}\n"));
        }
        out.push_str(&format!("every = {}\n", self.every));
        out.push_str(&format!("format = {}\n", self.format));
        out
    }

    pub fn family_is_known(&self) -> bool {
        families::NAMES.contains(&self.family.as_str())
    }

    pub fn build_model(&self) -> Result<ModelSpec> {
        families::build(
            &self.family,
            &self.params,
            ModelConstants {
                rho: self.rho,
                mu: self.mu,
                sigma: self.sigma,
                k1_sq: self.k1_sq,
                k2_sq: self.k2_sq,
                x0: self.x0,
            },
        )
    }

    /// Ensemble parameters for the report run; `workers` may be overridden
    /// by flag or environment.
    pub fn ensemble_config(&self, workers: Option<usize>) -> EnsembleConfig {
        let mut cfg = EnsembleConfig::new(self.horizon, self.dt, self.paths, self.seed);
        if !self.checkpoints.is_empty() {
            cfg.checkpoints = self.checkpoints.clone();
        }
        cfg.thresholds = self.thresholds.clone();
        cfg.fc_horizons = self.fc_horizons.clone();
        cfg.fc_threshold = self.fc_threshold;
        cfg.lil_t_start = self.lil_t_start;
        cfg.workers = workers.unwrap_or(self.workers);
        cfg
    }
}
