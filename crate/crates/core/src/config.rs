//! TOML configuration for the command-line tool.
//!
//! Every section is optional and falls back to its defaults. `key=value` overrides address
//! fields by dotted path (`generator.seed=7`, `sweep.alphas=[0.5, 1.0]`) and are applied on top of
//! the file; a path that is not a documented key is rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controller::ControllerConfig;
use crate::error::{Error, Result};
use crate::model::SlotExposureModel;
use crate::simulator::generator::GeneratorConfig;
use crate::simulator::run::{CalibrationConfig, StrategyFamily};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExposureConfig {
    /// Geometric decay `q_l = kappa^(l-1)`, used unless `q` is given.
    pub kappa: f64,
    /// Explicit non-increasing exposure probabilities, one per slot.
    pub q: Option<Vec<f64>>,
}

impl Default for ExposureConfig {
    fn default() -> Self {
        ExposureConfig { kappa: 0.95, q: None }
    }
}

impl ExposureConfig {
    pub fn model(&self, page_length: usize) -> Result<SlotExposureModel> {
        match &self.q {
            Some(q) => {
                if q.len() != page_length {
                    return Err(Error::config(
                        "exposure.q",
                        format!("has {} entries, page length is {page_length}", q.len()),
                    ));
                }
                SlotExposureModel::new(q.clone()).map_err(|e| Error::config("exposure.q", e.to_string()))
            }
            None => SlotExposureModel::geometric(page_length, self.kappa)
                .map_err(|e| Error::config("exposure.kappa", e.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    /// Without the controller HCA2E keeps its calibrated threshold for the whole run.
    pub enabled: bool,
    pub learning_rate: f64,
    pub window_size: usize,
    pub rho_min: f64,
    pub rho_max_factor: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let d = ControllerConfig::default();
        ControllerSection {
            enabled: true,
            learning_rate: d.learning_rate,
            window_size: d.window_size,
            rho_min: d.rho_min,
            rho_max_factor: d.rho_max_factor,
        }
    }
}

impl ControllerSection {
    pub fn config(&self, m_star: f64) -> Option<ControllerConfig> {
        self.enabled.then_some(ControllerConfig {
            target_m_star: m_star,
            learning_rate: self.learning_rate,
            window_size: self.window_size,
            rho_min: self.rho_min,
            rho_max_factor: self.rho_max_factor,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Request log to replay; `<out>/requests.jsonl` when unset.
    pub log: Option<PathBuf>,
    pub strategies: Vec<String>,
    pub alpha: f64,
    pub m_stars: Vec<f64>,
    pub beam_sizes: Vec<usize>,
    /// Keys the simulated users.
    pub user_seed: u64,
    pub write_events: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            log: None,
            strategies: ["fixed", "wpo", "gea", "hca2e"].map(String::from).to_vec(),
            alpha: 0.5,
            m_stars: vec![0.10],
            beam_sizes: vec![1, 3, 5, 7],
            user_seed: 7,
            write_events: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub log: Option<PathBuf>,
    pub alphas: Vec<f64>,
    pub strategies: Vec<String>,
    pub beam_sizes: Vec<usize>,
    pub m_stars: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            log: None,
            alphas: (1..=10).map(|i| i as f64 / 10.0).collect(),
            strategies: ["fixed", "wpo", "gea", "hca2e"].map(String::from).to_vec(),
            beam_sizes: vec![5],
            m_stars: vec![0.10],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub generator: GeneratorConfig,
    pub exposure: ExposureConfig,
    pub controller: ControllerSection,
    pub calibration: CalibrationConfig,
    pub run: RunSection,
    pub sweep: SweepSection,
}

/// Keys that are valid but absent from the serialized defaults.
const OPTIONAL_KEYS: &[&str] = &["exposure.q", "run.log", "sweep.log"];

fn families(names: &[String], beam_sizes: &[usize], key: &str) -> Result<Vec<StrategyFamily>> {
    let mut out = Vec::new();
    for name in names {
        if name == "hca2e" {
            for &b in beam_sizes {
                out.push(StrategyFamily::Hca2e { beam_size: b });
            }
        } else {
            out.push(StrategyFamily::parse(name, 0).map_err(|e| match e {
                Error::Config { reason, .. } => Error::config(key, reason),
                other => other,
            })?);
        }
    }
    Ok(out)
}

impl Config {
    /// Loads `path` (or the defaults) and applies `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut root = match toml::Value::try_from(Config::default()).expect("defaults serialize") {
            toml::Value::Table(t) => t,
            _ => unreachable!("config serializes to a table"),
        };
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::config("--config", format!("{}: {e}", p.display())))?;
            let file = text
                .parse::<toml::Table>()
                .map_err(|e| Error::config("--config", e.to_string()))?;
            merge(&mut root, file);
        }
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        let cfg: Config = toml::Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("config", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.exposure.model(self.generator.page_length)?;
        let ctl = &self.controller;
        ControllerConfig {
            target_m_star: 0.5,
            learning_rate: ctl.learning_rate,
            window_size: ctl.window_size,
            rho_min: ctl.rho_min,
            rho_max_factor: ctl.rho_max_factor,
        }
        .validate()?;
        let cal = &self.calibration;
        if cal.requests == 0 {
            return Err(Error::config("calibration.requests", "must be > 0"));
        }
        if !(cal.gea_gap_decay > 0.0 && cal.gea_gap_decay <= 1.0) {
            return Err(Error::config("calibration.gea_gap_decay", "must lie in (0, 1]"));
        }
        if !(cal.beta_tolerance > 0.0 && cal.rho_rel_tolerance > 0.0) {
            return Err(Error::config("calibration", "tolerances must be > 0"));
        }
        let m_star_ok = |m: &f64| *m > 0.0 && *m < 1.0;
        for (key, ms) in [("run.m_stars", &self.run.m_stars), ("sweep.m_stars", &self.sweep.m_stars)] {
            if ms.is_empty() || !ms.iter().all(m_star_ok) {
                return Err(Error::config(key, "needs at least one target, each in (0, 1)"));
            }
        }
        if !(self.run.alpha > 0.0 && self.run.alpha <= 1.0) {
            return Err(Error::config("run.alpha", "must lie in (0, 1]"));
        }
        if self.sweep.alphas.is_empty() || !self.sweep.alphas.iter().all(|a| *a > 0.0 && *a <= 1.0) {
            return Err(Error::config("sweep.alphas", "needs at least one alpha, each in (0, 1]"));
        }
        for (key, bs) in [("run.beam_sizes", &self.run.beam_sizes), ("sweep.beam_sizes", &self.sweep.beam_sizes)] {
            if bs.is_empty() || bs.contains(&0) {
                return Err(Error::config(key, "needs at least one beam size, each >= 1"));
            }
        }
        self.run_families()?;
        self.sweep_families()?;
        Ok(())
    }

    pub fn exposure_model(&self) -> Result<SlotExposureModel> {
        self.exposure.model(self.generator.page_length)
    }

    pub fn run_families(&self) -> Result<Vec<StrategyFamily>> {
        families(&self.run.strategies, &self.run.beam_sizes, "run.strategies")
    }

    pub fn sweep_families(&self) -> Result<Vec<StrategyFamily>> {
        families(&self.sweep.strategies, &self.sweep.beam_sizes, "sweep.strategies")
    }

    /// Hex SHA-256 of the canonical JSON rendering of the effective configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Recursively overlays `top` onto `base`; non-table values replace.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn known_key(path: &[&str]) -> bool {
    if OPTIONAL_KEYS.contains(&path.join(".").as_str()) {
        return true;
    }
    let defaults = toml::Value::try_from(Config::default()).expect("defaults serialize");
    let mut node = &defaults;
    for part in path {
        match node.get(part) {
            Some(next) => node = next,
            None => return false,
        }
    }
    true
}

/// Applies one `dotted.key=value` override. Values are parsed as TOML, falling back to a bare
/// string.
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment, "override must look like key=value"))?;
    let key = key.trim();
    let path: Vec<&str> = key.split('.').collect();
    if path.iter().any(|p| p.is_empty()) || !known_key(&path) {
        return Err(Error::config(key, "unknown configuration key"));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut table = root;
    for part in parents {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("`{part}` is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}
