//! Pipeline configuration.
//!
//! Values are resolved in order: built-in desk-scale defaults, the TOML
//! file, environment variables, then `--set` overrides. The environment
//! variable for `section.key` is `SECSTAB_SECTION_KEY` (upper case), and
//! `SECSTAB_STAGES` for the top-level stage list.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use secstab_core::secular::SecularConfig;
use secstab_core::TruncationPolicy;
use serde::{Deserialize, Serialize};

pub const ENV_PREFIX: &str = "SECSTAB_";

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Orbits,
    Expansion,
    Secular,
    Birkhoff,
    Stability,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Orbits, Stage::Expansion, Stage::Secular, Stage::Birkhoff, Stage::Stability];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Orbits => "orbits",
            Stage::Expansion => "expansion",
            Stage::Secular => "secular",
            Stage::Birkhoff => "birkhoff",
            Stage::Stability => "stability",
        }
    }

    pub fn upstream(self) -> Option<Stage> {
        let i = Stage::ALL.iter().position(|&s| s == self).unwrap();
        i.checked_sub(1).map(|j| Stage::ALL[j])
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s.trim())
            .with_context(|| format!("unknown stage '{s}' (expected one of orbits, expansion, secular, birkhoff, stability)"))
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    /// Detected from the column count.
    Auto,
    Elements,
    StateVectors,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Ephemeris table, resolved relative to the working directory.
    pub path: PathBuf,
    pub format: InputFormat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitsConfig {
    /// Averaging window for the reference semi-major axes, in years. Zero
    /// takes the osculating values of the input.
    pub mean_window: f64,
    /// Integrator step, in years.
    pub dt: f64,
    /// Sampling interval of the stored trajectory, in years.
    pub sample_dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionConfig {
    /// Degree of the Keplerian part in the fast actions.
    pub max_deg_l: u32,
    /// Degree cap in the secular variables (full-scale value: 18).
    pub max_deg_sec: u32,
    /// Cap on |k|₁ of the Fourier harmonics (full-scale value: 16).
    pub max_harm: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecularSection {
    /// Fourier cut of the terms removed by the two normalization steps.
    pub k_f: u32,
    /// Degree cap of the first generating functions (full-scale value: 6); the
    /// effective value is also bounded by `max_deg_sec / 2`.
    pub gen_deg_cap: u32,
    /// Degree cap of the resonant generating function (full-scale value: 9); also
    /// bounded by `max_deg_sec`.
    pub res_gen_deg_cap: u32,
    /// Three-body angle kept in the reduction.
    pub k_star: [i32; 3],
    /// Orders in the masses kept by the normalization steps.
    pub max_mu_order: usize,
    pub divisor_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BirkhoffConfig {
    /// Highest normalization order (full-scale value: 30).
    pub r_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    /// Safety factor of the polydisk radii.
    pub c: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    /// Number of logarithmically spaced ρ₀ samples.
    pub rho_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Stages to run; must be a prefix of the pipeline order.
    pub stages: Vec<Stage>,
    pub input: InputConfig,
    pub orbits: OrbitsConfig,
    pub expansion: ExpansionConfig,
    pub secular: SecularSection,
    pub birkhoff: BirkhoffConfig,
    pub stability: StabilityConfig,
    pub output: OutputConfig,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig { path: PathBuf::from("data/reference_elements.txt"), format: InputFormat::Auto }
    }
}

impl Default for OrbitsConfig {
    fn default() -> Self {
        OrbitsConfig { mean_window: 1e5, dt: 0.25, sample_dt: 10.0 }
    }
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig { max_deg_l: 2, max_deg_sec: 8, max_harm: 10 }
    }
}

impl Default for SecularSection {
    fn default() -> Self {
        let d = SecularConfig::for_degree(18);
        SecularSection {
            k_f: d.k_f,
            gen_deg_cap: d.gen_deg,
            res_gen_deg_cap: d.res_gen_deg,
            k_star: d.k_star,
            max_mu_order: d.max_mu_order,
            divisor_tol: d.divisor_tol,
        }
    }
}

impl Default for BirkhoffConfig {
    fn default() -> Self {
        BirkhoffConfig { r_max: 20 }
    }
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig { c: secstab_core::stability::DEFAULT_C, rho_min: 0.3, rho_max: 1.2, rho_points: 40 }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            stages: Stage::ALL.to_vec(),
            input: InputConfig::default(),
            orbits: OrbitsConfig::default(),
            expansion: ExpansionConfig::default(),
            secular: SecularSection::default(),
            birkhoff: BirkhoffConfig::default(),
            stability: StabilityConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Resolves defaults, `file`, the environment `env` and `sets`
    /// (`section.key=value`), then validates.
    pub fn resolve<I>(file: Option<&Path>, env: I, sets: &[String]) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table = toml::Table::try_from(PipelineConfig::default())?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let user: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
            merge(&mut table, user);
        }
        let keys = known_keys(&table);
        for (name, value) in env {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
            if let Some(key) = keys.iter().find(|k| env_name(k) == rest) {
                set_key(&mut table, key, &value).with_context(|| format!("environment variable {name}"))?;
            }
        }
        for s in sets {
            let (key, value) = s.split_once('=').with_context(|| format!("override '{s}' is not of the form key=value"))?;
            let key = key.trim();
            if !keys.iter().any(|k| k == key) {
                bail!("unknown configuration key '{key}'");
            }
            set_key(&mut table, key, value.trim())?;
        }
        let cfg: PipelineConfig = table.try_into().context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() || self.stages.iter().enumerate().any(|(i, &s)| Stage::ALL[i] != s) {
            bail!(
                "stages {:?} must be a non-empty prefix of orbits, expansion, secular, birkhoff, stability",
                self.stages.iter().map(|s| s.name()).collect::<Vec<_>>()
            );
        }
        let positive = [
            ("orbits.dt", self.orbits.dt),
            ("orbits.sample_dt", self.orbits.sample_dt),
            ("secular.divisor_tol", self.secular.divisor_tol),
            ("stability.c", self.stability.c),
            ("stability.rho_min", self.stability.rho_min),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{k} must be positive and finite, got {v}");
            }
        }
        if !(self.orbits.mean_window >= 0.0 && self.orbits.mean_window.is_finite()) {
            bail!("orbits.mean_window must be non-negative, got {}", self.orbits.mean_window);
        }
        let counts = [
            ("expansion.max_deg_l", self.expansion.max_deg_l as usize),
            ("expansion.max_deg_sec", self.expansion.max_deg_sec as usize),
            ("expansion.max_harm", self.expansion.max_harm as usize),
            ("secular.k_f", self.secular.k_f as usize),
            ("secular.gen_deg_cap", self.secular.gen_deg_cap as usize),
            ("secular.res_gen_deg_cap", self.secular.res_gen_deg_cap as usize),
            ("secular.max_mu_order", self.secular.max_mu_order),
            ("birkhoff.r_max", self.birkhoff.r_max),
            ("stability.rho_points", self.stability.rho_points),
        ];
        for (k, v) in counts {
            if v == 0 {
                bail!("{k} must be positive");
            }
        }
        if self.stability.rho_points < 2 || !(self.stability.rho_max > self.stability.rho_min) {
            bail!("the ρ₀ grid needs rho_max > rho_min and at least 2 points");
        }
        if self.secular.k_star == [0; 3] {
            bail!("secular.k_star must be nonzero");
        }
        Ok(())
    }

    pub fn policy(&self) -> TruncationPolicy {
        TruncationPolicy::new(self.expansion.max_deg_l, self.expansion.max_deg_sec, self.expansion.max_harm)
    }

    pub fn secular_config(&self) -> SecularConfig {
        let s = &self.secular;
        let d = self.expansion.max_deg_sec;
        SecularConfig {
            k_f: s.k_f,
            gen_deg: s.gen_deg_cap.min(d / 2),
            k_star: s.k_star,
            res_gen_deg: s.res_gen_deg_cap.min(d),
            max_mu_order: s.max_mu_order,
            divisor_tol: s.divisor_tol,
        }
    }

    pub fn rho_grid(&self) -> Vec<f64> {
        let s = &self.stability;
        secstab_core::stability::log_grid(s.rho_min, s.rho_max, s.rho_points)
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Dotted names of every leaf key.
fn known_keys(t: &toml::Table) -> Vec<String> {
    let mut out = Vec::new();
    for (k, v) in t {
        match v {
            toml::Value::Table(sub) => out.extend(sub.keys().map(|s| format!("{k}.{s}"))),
            _ => out.push(k.clone()),
        }
    }
    out
}

fn env_name(key: &str) -> String {
    key.replace('.', "_").to_uppercase()
}

/// Parses `raw` as a TOML value, falling back to a bare string. The stage
/// list also accepts `orbits,expansion`.
fn parse_value(key: &str, raw: &str) -> toml::Value {
    if key == "stages" && !raw.trim_start().starts_with('[') {
        return toml::Value::Array(raw.split(',').map(|s| toml::Value::String(s.trim().to_string())).collect());
    }
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_key(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let value = parse_value(key, raw);
    match key.split_once('.') {
        Some((sec, k)) => {
            let sub = table.get_mut(sec).and_then(|v| v.as_table_mut()).with_context(|| format!("no section '{sec}'"))?;
            let value = match (sub.get(k), value) {
                (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
                (_, v) => v,
            };
            sub.insert(k.to_string(), value);
        }
        None => {
            table.insert(key.to_string(), value);
        }
    }
    Ok(())
}

/// The defaults as a commented TOML document.
pub fn default_toml() -> String {
    let body = toml::to_string_pretty(&PipelineConfig::default()).expect("defaults serialize");
    format!(
        "# secstab pipeline configuration (desk-scale defaults).\n\
         # Full-scale values: expansion.max_deg_sec = 18, expansion.max_harm = 16,\n\
         # secular.k_f = 8, secular.gen_deg_cap = 6, secular.res_gen_deg_cap = 9,\n\
         # birkhoff.r_max = 30, stability.c = 2.\n\
         # Every key can be overridden by SECSTAB_<SECTION>_<KEY> or --set section.key=value.\n\n{body}"
    )
}
