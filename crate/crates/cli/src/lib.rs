//! Config-driven experiment runner: one CSV of trial rows and one JSON
//! summary per experiment.

pub mod experiments;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use walkcount::meter::MeterSnapshot;

/// Top level of a config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default, rename = "experiment")]
    pub experiments: Vec<ExperimentConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub params: toml::Table,
    #[serde(default)]
    pub thresholds: toml::Table,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).context("config is not valid TOML for this runner")?;
        for e in &config.experiments {
            if experiments::lookup(&e.name).is_none() {
                bail!("unknown experiment `{}`; known: {}", e.name, experiments::NAMES.join(", "));
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }
}

/// Typed access to an experiment's parameters and thresholds.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub name: String,
    pub seed: u64,
    pub trials: Option<usize>,
    params: toml::Table,
    thresholds: toml::Table,
}

fn as_f64(v: &toml::Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}

impl Ctx {
    pub fn new(cfg: &ExperimentConfig, global_seed: Option<u64>) -> Self {
        Self {
            name: cfg.name.clone(),
            seed: global_seed.or(cfg.seed).unwrap_or(0),
            trials: cfg.trials,
            params: cfg.params.clone(),
            thresholds: cfg.thresholds.clone(),
        }
    }

    /// A context with no overrides, so every default applies.
    pub fn defaults(name: &str, seed: u64) -> Self {
        Self { name: name.into(), seed, trials: None, params: toml::Table::new(), thresholds: toml::Table::new() }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<toml::Value>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = Some(trials);
        self
    }

    pub fn trials(&self, default: usize) -> usize {
        self.trials.unwrap_or(default)
    }

    fn number(&self, table: &toml::Table, key: &str, default: f64) -> Result<f64> {
        match table.get(key) {
            None => Ok(default),
            Some(v) => as_f64(v).with_context(|| format!("{}: `{key}` must be a number", self.name)),
        }
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        self.number(&self.params, key, default)
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_integer()
                .filter(|i| *i >= 0)
                .map(|i| i as usize)
                .with_context(|| format!("{}: `{key}` must be a nonnegative integer", self.name)),
        }
    }

    pub fn threshold(&self, key: &str, default: f64) -> Result<f64> {
        self.number(&self.thresholds, key, default)
    }

    pub fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.params.get(key) {
            None => Ok(default.to_vec()),
            Some(toml::Value::Array(a)) => a
                .iter()
                .map(|v| as_f64(v).with_context(|| format!("{}: `{key}` must hold numbers", self.name)))
                .collect(),
            Some(v) => as_f64(v).map(|x| vec![x]).with_context(|| format!("{}: `{key}` must be a list", self.name)),
        }
    }

    pub fn usize_list(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        let d: Vec<f64> = default.iter().map(|&x| x as f64).collect();
        self.f64_list(key, &d)?
            .into_iter()
            .map(|x| {
                if x >= 0.0 && x.fract() == 0.0 {
                    Ok(x as usize)
                } else {
                    bail!("{}: `{key}` must hold nonnegative integers, got {x}", self.name)
                }
            })
            .collect()
    }

    pub fn str_list(&self, key: &str, default: &[&str]) -> Result<Vec<String>> {
        match self.params.get(key) {
            None => Ok(default.iter().map(|s| s.to_string()).collect()),
            Some(toml::Value::Array(a)) => a
                .iter()
                .map(|v| {
                    v.as_str().map(str::to_string).with_context(|| format!("{}: `{key}` must hold strings", self.name))
                })
                .collect(),
            Some(toml::Value::String(s)) => Ok(vec![s.clone()]),
            Some(_) => bail!("{}: `{key}` must be a list of strings", self.name),
        }
    }

    pub fn params_json(&self) -> Value {
        serde_json::to_value(&self.params).unwrap_or(Value::Null)
    }

    pub fn thresholds_json(&self) -> Value {
        serde_json::to_value(&self.thresholds).unwrap_or(Value::Null)
    }
}

/// One CSV line.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub experiment: String,
    pub trial: usize,
    pub seed: u64,
    /// `key=value` pairs joined by `;`.
    pub parameters: String,
    pub outputs: String,
    pub setup: u64,
    pub update: u64,
    pub checking: u64,
    pub oracle: u64,
    pub applications: u64,
    pub modeled: u64,
    pub pass: bool,
}

impl Row {
    pub fn new(ctx: &Ctx, trial: usize, seed: u64) -> Self {
        Row {
            experiment: ctx.name.clone(),
            trial,
            seed,
            parameters: String::new(),
            outputs: String::new(),
            setup: 0,
            update: 0,
            checking: 0,
            oracle: 0,
            applications: 0,
            modeled: 0,
            pass: true,
        }
    }

    pub fn param(mut self, key: &str, value: impl std::fmt::Display) -> Self {
        push_pair(&mut self.parameters, key, value);
        self
    }

    pub fn output(mut self, key: &str, value: impl std::fmt::Display) -> Self {
        push_pair(&mut self.outputs, key, value);
        self
    }

    pub fn meter(mut self, m: &MeterSnapshot) -> Self {
        self.setup = m.setup;
        self.update = m.update;
        self.checking = m.checking;
        self.oracle = m.oracle_evaluations;
        self.applications = m.applications;
        self.modeled = m.modeled.values().sum();
        self
    }

    pub fn pass(mut self, pass: bool) -> Self {
        self.pass = pass;
        self
    }
}

fn push_pair(s: &mut String, key: &str, value: impl std::fmt::Display) {
    if !s.is_empty() {
        s.push(';');
    }
    s.push_str(&format!("{key}={value}"));
}

/// What an experiment hands back to the runner.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub rows: Vec<Row>,
    pub metrics: Map<String, Value>,
    pub pass: bool,
}

impl Outcome {
    pub fn metric(&mut self, key: &str, value: impl Serialize) {
        self.metrics.insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub seed: u64,
    pub trials: usize,
    pub params: Value,
    pub thresholds: Value,
    pub pass: bool,
    pub failed_trials: usize,
    pub metrics: Map<String, Value>,
    pub csv: PathBuf,
}

pub struct RunOptions {
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub filter: Vec<String>,
}

/// Runs every selected experiment, writing `<name>.csv` and `<name>.json`
/// under `out_dir`.
pub fn run(config: &Config, opts: &RunOptions) -> Result<Vec<Summary>> {
    let selected: Vec<&ExperimentConfig> = config
        .experiments
        .iter()
        .filter(|e| opts.filter.is_empty() || opts.filter.iter().any(|f| e.name.contains(f.as_str())))
        .collect();
    if !selected.is_empty() {
        fs::create_dir_all(&opts.out_dir).with_context(|| format!("creating {}", opts.out_dir.display()))?;
    }
    let mut summaries = Vec::new();
    for (i, cfg) in selected.iter().enumerate() {
        let ctx = Ctx::new(cfg, opts.seed.or(cfg.seed).or(config.seed));
        let f = experiments::lookup(&cfg.name).expect("validated at load");
        let outcome = f(&ctx).with_context(|| format!("experiment `{}`", cfg.name))?;
        let stem = if selected[..i].iter().any(|e| e.name == cfg.name) {
            format!("{}-{i}", cfg.name)
        } else {
            cfg.name.clone()
        };
        let csv_path = opts.out_dir.join(format!("{stem}.csv"));
        let mut w = csv::Writer::from_path(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
        for row in &outcome.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        let summary = Summary {
            experiment: cfg.name.clone(),
            seed: ctx.seed,
            trials: outcome.rows.len(),
            params: ctx.params_json(),
            thresholds: ctx.thresholds_json(),
            pass: outcome.pass,
            failed_trials: outcome.rows.iter().filter(|r| !r.pass).count(),
            metrics: outcome.metrics,
            csv: csv_path,
        };
        let json_path = opts.out_dir.join(format!("{stem}.json"));
        fs::write(&json_path, serde_json::to_string_pretty(&summary)?)
            .with_context(|| format!("writing {}", json_path.display()))?;
        summaries.push(summary);
    }
    Ok(summaries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let c = Config::parse(
            r#"
seed = 5
[[experiment]]
name = "corollary5-bound"
trials = 3
[experiment.params]
k = [2, 3]
[experiment.thresholds]
slack = 1e-9
"#,
        )
        .unwrap();
        assert_eq!(c.seed, Some(5));
        let ctx = Ctx::new(&c.experiments[0], c.experiments[0].seed.or(c.seed));
        assert_eq!(ctx.seed, 5);
        assert_eq!(ctx.usize_list("k", &[4]).unwrap(), vec![2, 3]);
        assert_eq!(ctx.threshold("slack", 0.0).unwrap(), 1e-9);
        assert_eq!(ctx.f64("missing", 0.5).unwrap(), 0.5);
    }

    #[test]
    fn rejects_unknown_names_and_keys() {
        assert!(Config::parse("[[experiment]]\nname = \"nope\"\n").is_err());
        assert!(Config::parse("[[experiment]]\nname = \"mr-formula\"\nbogus = 1\n").is_err());
        let c = Config::parse("[[experiment]]\nname = \"mr-formula\"\n[experiment.params]\nk = \"x\"\n").unwrap();
        assert!(Ctx::new(&c.experiments[0], None).usize_list("k", &[]).is_err());
    }

    #[test]
    fn row_pairs() {
        let ctx = Ctx::defaults("x", 1);
        let r = Row::new(&ctx, 0, 9).param("k", 2).param("chain", "K3").output("dev", 0.5);
        assert_eq!(r.parameters, "k=2;chain=K3");
        assert_eq!(r.outputs, "dev=0.5");
    }
}
