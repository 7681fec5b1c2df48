//! Configuration documents.
//!
//! A configuration is TOML restricted to flat key-value sections:
//! `[cavity]`, `[oscillator]`, `[trap]`, `[environment]`, `[grid]` and an
//! optional `[optimizer]`. Lengths are in m, powers in W, temperatures in K
//! and frequencies in Hz (keys ending in `_Hz`). Dimensionless ratios may be
//! given in ppm by suffixing the key with `_ppm`. Unknown keys are rejected.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::constants::hz_to_rad;
use crate::error::{Error, Result};
use crate::grid::{FrequencyGrid, Spacing};
use crate::thermal::CantileverGeometry;

const SECTIONS: &[(&str, &[&str])] = &[
    (
        "cavity",
        &[
            "L",
            "T_f",
            "T_f_ppm",
            "epsilon",
            "epsilon_ppm",
            "lambda_control",
            "P_c",
            "delta_Hz",
            "include_lower_sideband",
            "input_squeezing_db",
            "epsilon_sweep",
            "epsilon_sweep_ppm",
        ],
    ),
    (
        "oscillator",
        &[
            "m",
            "omega_m0_Hz",
            "Q_m0",
            "omega_m_eff_Hz",
            "Q_m_eff",
            "cantilever_l",
            "cantilever_b",
            "cantilever_h",
            "rho",
            "Y",
        ],
    ),
    (
        "trap",
        &[
            "enabled",
            "P_trap",
            "lambda_trap",
            "T_s",
            "T_s_ppm",
            "delta_t_Hz",
            "compensate_damping",
        ],
    ),
    (
        "environment",
        &["T", "kappa0", "n_exp", "absorption", "absorption_ppm", "bath"],
    ),
    ("grid", &["f_min_Hz", "f_max_Hz", "count", "spacing"]),
    (
        "optimizer",
        &[
            "P_trap_min",
            "P_trap_max",
            "T_f_min",
            "T_f_max",
            "T_min",
            "T_max",
            "gamma_opt_target_Hz",
            "coarse_points",
            "refine_rounds",
            "refine_points",
            "scaling_eps_min",
            "scaling_eps_max",
            "scaling_L_min",
            "scaling_L_max",
            "scaling_points",
        ],
    ),
];

const REQUIRED_SECTIONS: &[&str] = &["cavity", "oscillator", "trap", "environment", "grid"];

/// Sections accepted under a second name in `--override` keys.
const SECTION_ALIASES: &[(&str, &str)] = &[("thermal", "environment")];

/// Keys that name the same quantity in different units.
const UNIT_SIBLINGS: &[(&str, &str)] = &[
    ("T_f", "T_f_ppm"),
    ("epsilon", "epsilon_ppm"),
    ("T_s", "T_s_ppm"),
    ("absorption", "absorption_ppm"),
    ("epsilon_sweep", "epsilon_sweep_ppm"),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterCavityParams {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "T_f")]
    pub t_f: f64,
    pub epsilon: f64,
    pub lambda_control: f64,
    #[serde(rename = "P_c")]
    pub p_c: f64,
    /// Offset of the control detuning from the mechanical frequency, in Hz.
    #[serde(rename = "delta_Hz")]
    pub delta_hz: f64,
    pub include_lower_sideband: bool,
    pub input_squeezing_db: f64,
    pub epsilon_sweep: Vec<f64>,
}

impl FilterCavityParams {
    /// δ in rad/s.
    pub fn delta(&self) -> f64 {
        hz_to_rad(self.delta_hz)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscillatorParams {
    pub m: f64,
    #[serde(rename = "omega_m0_Hz")]
    pub omega_m0_hz: f64,
    #[serde(rename = "Q_m0")]
    pub q_m0: f64,
    /// Forces the effective mechanical frequency instead of the trap result.
    #[serde(rename = "omega_m_eff_Hz", skip_serializing_if = "Option::is_none")]
    pub omega_m_eff_hz: Option<f64>,
    /// Forces the effective quality factor.
    #[serde(rename = "Q_m_eff", skip_serializing_if = "Option::is_none")]
    pub q_m_eff: Option<f64>,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub cantilever: Option<CantileverGeometry>,
}

impl OscillatorParams {
    pub fn omega_m0(&self) -> f64 {
        hz_to_rad(self.omega_m0_hz)
    }

    pub fn gamma_m(&self) -> f64 {
        self.omega_m0() / self.q_m0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrapParams {
    pub enabled: bool,
    #[serde(rename = "P_trap")]
    pub p_trap: f64,
    pub lambda_trap: f64,
    #[serde(rename = "T_s")]
    pub t_s: f64,
    /// Trap detuning Δ_t in Hz; `None` means resonant with the doublet (Δ_t = ω_s).
    #[serde(rename = "delta_t_Hz", skip_serializing_if = "Option::is_none")]
    pub delta_t_hz: Option<f64>,
    /// Retune Δ_t so the optical damping vanishes.
    pub compensate_damping: bool,
}

impl TrapParams {
    pub fn is_active(&self) -> bool {
        self.enabled && self.p_trap > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bath {
    /// Thermal noise at the environment temperature.
    Environment,
    /// Thermal noise at the absorption-heated hotspot temperature.
    Hotspot,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvironmentParams {
    #[serde(rename = "T")]
    pub temperature: f64,
    pub kappa0: f64,
    pub n_exp: f64,
    pub absorption: f64,
    pub bath: Bath,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridParams {
    #[serde(rename = "f_min_Hz")]
    pub f_min_hz: f64,
    #[serde(rename = "f_max_Hz")]
    pub f_max_hz: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl GridParams {
    pub fn to_grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::from_hz(self.f_min_hz, self.f_max_hz, self.count, self.spacing)
    }
}

/// Search box and sweep settings for the design optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSettings {
    #[serde(rename = "P_trap_min", default = "defaults::p_trap_min")]
    pub p_trap_min: f64,
    #[serde(rename = "P_trap_max", default = "defaults::p_trap_max")]
    pub p_trap_max: f64,
    #[serde(rename = "T_f_min", default = "defaults::t_f_min")]
    pub t_f_min: f64,
    #[serde(rename = "T_f_max", default = "defaults::t_f_max")]
    pub t_f_max: f64,
    /// Temperature bounds; when absent the configured `environment.T` is held fixed.
    #[serde(rename = "T_min", default, skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(rename = "T_max", default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(rename = "gamma_opt_target_Hz", default = "defaults::gamma_opt_target_hz")]
    pub gamma_opt_target_hz: f64,
    #[serde(default = "defaults::coarse_points")]
    pub coarse_points: usize,
    #[serde(default = "defaults::refine_rounds")]
    pub refine_rounds: usize,
    #[serde(default = "defaults::refine_points")]
    pub refine_points: usize,
    #[serde(default = "defaults::scaling_eps_min")]
    pub scaling_eps_min: f64,
    #[serde(default = "defaults::scaling_eps_max")]
    pub scaling_eps_max: f64,
    #[serde(rename = "scaling_L_min", default = "defaults::scaling_l_min")]
    pub scaling_l_min: f64,
    #[serde(rename = "scaling_L_max", default = "defaults::scaling_l_max")]
    pub scaling_l_max: f64,
    #[serde(default = "defaults::scaling_points")]
    pub scaling_points: usize,
}

mod defaults {
    pub fn p_trap_min() -> f64 {
        1e-6
    }
    pub fn p_trap_max() -> f64 {
        1.0
    }
    pub fn t_f_min() -> f64 {
        1e-6
    }
    pub fn t_f_max() -> f64 {
        1e-2
    }
    pub fn gamma_opt_target_hz() -> f64 {
        100.0
    }
    pub fn coarse_points() -> usize {
        25
    }
    pub fn refine_rounds() -> usize {
        6
    }
    pub fn refine_points() -> usize {
        11
    }
    pub fn scaling_eps_min() -> f64 {
        1e-6
    }
    pub fn scaling_eps_max() -> f64 {
        1e-4
    }
    pub fn scaling_l_min() -> f64 {
        0.1
    }
    pub fn scaling_l_max() -> f64 {
        2.0
    }
    pub fn scaling_points() -> usize {
        5
    }
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        toml::from_str("").expect("all optimizer keys have defaults")
    }
}

/// All user-supplied physical parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemConfig {
    pub cavity: FilterCavityParams,
    pub oscillator: OscillatorParams,
    pub trap: TrapParams,
    pub environment: EnvironmentParams,
    pub grid: GridParams,
    pub optimizer: OptimizerSettings,
}

impl SystemConfig {
    /// Parses and validates a configuration document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::with_overrides::<&str>(text, &[])
    }

    /// Parses a document, applies `KEY=VALUE` overrides, then validates.
    pub fn with_overrides<S: AsRef<str>>(text: &str, overrides: &[S]) -> Result<Self> {
        let mut doc: Table = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        check_keys(&doc)?;
        apply_overrides(&mut doc, overrides)?;
        check_keys(&doc)?;
        resolve(&doc)
    }

    /// Serializes with canonical (non-ppm) keys. Reloading reproduces every field exactly.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn frequency_grid(&self) -> Result<FrequencyGrid> {
        self.grid.to_grid()
    }

    /// Re-validates after programmatic edits.
    pub fn validate(&self) -> Result<()> {
        resolve(&toml::Table::try_from(self).map_err(|e| Error::Parse(e.to_string()))?).map(|_| ())
    }
}

fn allowed_keys(section: &str) -> Option<&'static [&'static str]> {
    SECTIONS
        .iter()
        .find(|(name, _)| *name == section)
        .map(|(_, keys)| *keys)
}

fn check_keys(doc: &Table) -> Result<()> {
    for (section, value) in doc {
        let keys = allowed_keys(section).ok_or_else(|| Error::UnknownKey(format!("[{section}]")))?;
        let table = value
            .as_table()
            .ok_or_else(|| Error::Parse(format!("`{section}` must be a section")))?;
        for key in table.keys() {
            if !keys.contains(&key.as_str()) {
                return Err(Error::UnknownKey(format!("{section}.{key}")));
            }
        }
    }
    Ok(())
}

fn resolve_override_key(key: &str) -> Result<(String, String)> {
    if let Some((section, name)) = key.split_once('.') {
        let section = SECTION_ALIASES
            .iter()
            .find(|(alias, _)| *alias == section)
            .map_or(section, |(_, canonical)| canonical);
        let keys = allowed_keys(section).ok_or_else(|| Error::UnknownKey(key.to_string()))?;
        if !keys.contains(&name) {
            return Err(Error::UnknownKey(key.to_string()));
        }
        return Ok((section.to_string(), name.to_string()));
    }
    let hits: Vec<&str> = SECTIONS
        .iter()
        .filter(|(_, keys)| keys.contains(&key))
        .map(|(s, _)| *s)
        .collect();
    match hits.as_slice() {
        [section] => Ok((section.to_string(), key.to_string())),
        [] => Err(Error::UnknownKey(key.to_string())),
        _ => Err(Error::Parse(format!(
            "override key `{key}` is ambiguous; qualify it as section.{key}"
        ))),
    }
}

fn parse_override_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn apply_overrides<S: AsRef<str>>(doc: &mut Table, overrides: &[S]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for item in overrides {
        let item = item.as_ref();
        let (key, raw) = item
            .split_once('=')
            .filter(|(k, v)| !k.trim().is_empty() && !v.trim().is_empty())
            .ok_or_else(|| Error::MalformedOverride(item.to_string()))?;
        let (section, name) = resolve_override_key(key.trim())?;
        let canonical = format!("{section}.{name}");
        if !seen.insert(canonical.clone()) {
            return Err(Error::DuplicateOverride(canonical));
        }
        let table = doc
            .entry(section.clone())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Parse(format!("`{section}` must be a section")))?;
        for (a, b) in UNIT_SIBLINGS {
            if name == *a {
                table.remove(*b);
            } else if name == *b {
                table.remove(*a);
            }
        }
        table.insert(name, parse_override_value(raw.trim()));
    }
    Ok(())
}

struct SectionReader<'a> {
    name: &'static str,
    table: Option<&'a Table>,
}

impl<'a> SectionReader<'a> {
    fn new(doc: &'a Table, name: &'static str) -> Self {
        Self {
            name,
            table: doc.get(name).and_then(Value::as_table),
        }
    }

    fn raw(&self, key: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn type_error(&self, key: &str, want: &str) -> Error {
        Error::Parse(format!("`{}.{key}` must be {want}", self.name))
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(self.type_error(key, "a number")),
        }
    }

    fn f64(&self, key: &str) -> Result<f64> {
        self.opt_f64(key)?.ok_or_else(|| self.missing(key))
    }

    /// Reads `key` or `key_ppm` (scaled by 1e-6); exactly one must be present.
    fn ratio(&self, key: &str) -> Result<Option<f64>> {
        let ppm_key = format!("{key}_ppm");
        match (self.opt_f64(key)?, self.opt_f64(&ppm_key)?) {
            (Some(_), Some(_)) => Err(Error::ConflictingKeys(
                format!("{}.{key}", self.name),
                format!("{}.{ppm_key}", self.name),
            )),
            (Some(v), None) => Ok(Some(v)),
            (None, Some(p)) => Ok(Some(p / 1e6)),
            (None, None) => Ok(None),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(self.type_error(key, "true or false")),
        }
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let ppm_key = format!("{key}_ppm");
        let read = |k: &str| -> Result<Option<Vec<f64>>> {
            match self.raw(k) {
                None => Ok(None),
                Some(Value::Array(items)) => items
                    .iter()
                    .map(|v| match v {
                        Value::Float(x) => Ok(*x),
                        Value::Integer(i) => Ok(*i as f64),
                        _ => Err(self.type_error(k, "an array of numbers")),
                    })
                    .collect::<Result<Vec<_>>>()
                    .map(Some),
                Some(_) => Err(self.type_error(k, "an array of numbers")),
            }
        };
        match (read(key)?, read(&ppm_key)?) {
            (Some(_), Some(_)) => Err(Error::ConflictingKeys(
                format!("{}.{key}", self.name),
                format!("{}.{ppm_key}", self.name),
            )),
            (Some(v), None) => Ok(Some(v)),
            (None, Some(p)) => Ok(Some(p.into_iter().map(|x| x / 1e6).collect())),
            (None, None) => Ok(None),
        }
    }

    fn missing(&self, key: &str) -> Error {
        Error::MissingField {
            section: self.name.to_string(),
            key: key.to_string(),
        }
    }
}

fn require(cond: bool, field: &str, value: f64, reason: &str) -> Result<()> {
    if cond && value.is_finite() {
        Ok(())
    } else {
        Err(Error::range(field, value, reason))
    }
}

fn resolve(doc: &Table) -> Result<SystemConfig> {
    for section in REQUIRED_SECTIONS {
        if !doc.contains_key(*section) {
            return Err(Error::MissingField {
                section: section.to_string(),
                key: "*".to_string(),
            });
        }
    }

    let s = SectionReader::new(doc, "cavity");
    let length = s.f64("L")?;
    let t_f = s.ratio("T_f")?.ok_or_else(|| s.missing("T_f"))?;
    let epsilon = s.ratio("epsilon")?.ok_or_else(|| s.missing("epsilon"))?;
    let cavity = FilterCavityParams {
        length,
        t_f,
        epsilon,
        lambda_control: s.f64("lambda_control")?,
        p_c: s.f64("P_c")?,
        delta_hz: s.f64("delta_Hz")?,
        include_lower_sideband: s.bool_or("include_lower_sideband", true)?,
        input_squeezing_db: s.opt_f64("input_squeezing_db")?.unwrap_or(10.0),
        epsilon_sweep: s.list("epsilon_sweep")?.unwrap_or_default(),
    };
    require(cavity.length > 0.0, "cavity.L", cavity.length, "must be positive")?;
    require(
        cavity.t_f > 0.0 && cavity.t_f < 1.0,
        "cavity.T_f",
        cavity.t_f,
        "must lie in (0, 1)",
    )?;
    require(
        cavity.epsilon >= 0.0 && cavity.epsilon < cavity.t_f,
        "cavity.epsilon",
        cavity.epsilon,
        "must satisfy 0 <= epsilon < T_f",
    )?;
    require(
        cavity.lambda_control > 0.0,
        "cavity.lambda_control",
        cavity.lambda_control,
        "must be positive",
    )?;
    require(cavity.p_c >= 0.0, "cavity.P_c", cavity.p_c, "must be non-negative")?;
    require(true, "cavity.delta_Hz", cavity.delta_hz, "must be finite")?;
    require(
        cavity.input_squeezing_db >= 0.0,
        "cavity.input_squeezing_db",
        cavity.input_squeezing_db,
        "must be non-negative",
    )?;
    for &e in &cavity.epsilon_sweep {
        require(
            e >= 0.0 && e < cavity.t_f,
            "cavity.epsilon_sweep",
            e,
            "entries must satisfy 0 <= epsilon < T_f",
        )?;
    }

    let s = SectionReader::new(doc, "oscillator");
    let geometry_keys = ["cantilever_l", "cantilever_b", "cantilever_h", "rho", "Y"];
    let present = geometry_keys.iter().filter(|k| s.raw(k).is_some()).count();
    let cantilever = match present {
        0 => None,
        5 => {
            let g = CantileverGeometry {
                l: s.f64("cantilever_l")?,
                b: s.f64("cantilever_b")?,
                h: s.f64("cantilever_h")?,
                rho: s.f64("rho")?,
                youngs_modulus: s.f64("Y")?,
            };
            g.validate()?;
            Some(g)
        }
        _ => {
            let absent = geometry_keys.iter().find(|k| s.raw(k).is_none()).unwrap();
            return Err(s.missing(absent));
        }
    };
    let oscillator = OscillatorParams {
        m: s.f64("m")?,
        omega_m0_hz: s.f64("omega_m0_Hz")?,
        q_m0: s.f64("Q_m0")?,
        omega_m_eff_hz: s.opt_f64("omega_m_eff_Hz")?,
        q_m_eff: s.opt_f64("Q_m_eff")?,
        cantilever,
    };
    require(oscillator.m > 0.0, "oscillator.m", oscillator.m, "must be positive")?;
    require(
        oscillator.omega_m0_hz > 0.0,
        "oscillator.omega_m0_Hz",
        oscillator.omega_m0_hz,
        "must be positive",
    )?;
    require(
        oscillator.q_m0 > 1.0,
        "oscillator.Q_m0",
        oscillator.q_m0,
        "must exceed 1",
    )?;
    if let Some(f) = oscillator.omega_m_eff_hz {
        require(f > 0.0, "oscillator.omega_m_eff_Hz", f, "must be positive")?;
    }
    if let Some(q) = oscillator.q_m_eff {
        require(q > 1.0, "oscillator.Q_m_eff", q, "must exceed 1")?;
    }

    let s = SectionReader::new(doc, "trap");
    let trap = TrapParams {
        enabled: s.bool_or("enabled", true)?,
        p_trap: s.f64("P_trap")?,
        lambda_trap: s.f64("lambda_trap")?,
        t_s: s.ratio("T_s")?.ok_or_else(|| s.missing("T_s"))?,
        delta_t_hz: s.opt_f64("delta_t_Hz")?,
        compensate_damping: s.bool_or("compensate_damping", false)?,
    };
    require(trap.p_trap >= 0.0, "trap.P_trap", trap.p_trap, "must be non-negative")?;
    require(
        trap.lambda_trap > 0.0,
        "trap.lambda_trap",
        trap.lambda_trap,
        "must be positive",
    )?;
    require(
        trap.t_s > 0.0 && trap.t_s < 1.0,
        "trap.T_s",
        trap.t_s,
        "must lie in (0, 1)",
    )?;
    if let Some(d) = trap.delta_t_hz {
        require(d > 0.0, "trap.delta_t_Hz", d, "must be positive")?;
    }

    let s = SectionReader::new(doc, "environment");
    let bath = match s.raw("bath") {
        None => Bath::Environment,
        Some(Value::String(name)) => match name.as_str() {
            "environment" => Bath::Environment,
            "hotspot" => Bath::Hotspot,
            _ => return Err(s.type_error("bath", "\"environment\" or \"hotspot\"")),
        },
        Some(_) => return Err(s.type_error("bath", "\"environment\" or \"hotspot\"")),
    };
    let environment = EnvironmentParams {
        temperature: s.f64("T")?,
        kappa0: s.f64("kappa0")?,
        n_exp: s.opt_f64("n_exp")?.unwrap_or(2.0),
        absorption: s.ratio("absorption")?.unwrap_or(0.0),
        bath,
    };
    require(
        environment.temperature > 0.0,
        "environment.T",
        environment.temperature,
        "must be positive",
    )?;
    require(
        environment.kappa0 > 0.0,
        "environment.kappa0",
        environment.kappa0,
        "must be positive",
    )?;
    require(
        environment.n_exp > -1.0,
        "environment.n_exp",
        environment.n_exp,
        "must exceed -1",
    )?;
    require(
        (0.0..=1.0).contains(&environment.absorption),
        "environment.absorption",
        environment.absorption,
        "must lie in [0, 1]",
    )?;
    if environment.bath == Bath::Hotspot && oscillator.cantilever.is_none() {
        return Err(Error::MissingField {
            section: "oscillator".into(),
            key: "cantilever_l".into(),
        });
    }

    let s = SectionReader::new(doc, "grid");
    let count = s.f64("count")?;
    require(
        count >= 2.0 && count.fract() == 0.0,
        "grid.count",
        count,
        "must be an integer >= 2",
    )?;
    let spacing = match s.raw("spacing") {
        None => Spacing::Log,
        Some(Value::String(v)) if v == "log" => Spacing::Log,
        Some(Value::String(v)) if v == "lin" => Spacing::Lin,
        Some(_) => return Err(s.type_error("spacing", "\"log\" or \"lin\"")),
    };
    let grid = GridParams {
        f_min_hz: s.f64("f_min_Hz")?,
        f_max_hz: s.f64("f_max_Hz")?,
        count: count as usize,
        spacing,
    };
    grid.to_grid()?;

    let optimizer = match doc.get("optimizer") {
        None => OptimizerSettings::default(),
        Some(v) => v
            .clone()
            .try_into::<OptimizerSettings>()
            .map_err(|e| Error::Parse(format!("[optimizer]: {e}")))?,
    };
    validate_optimizer(&optimizer)?;

    Ok(SystemConfig {
        cavity,
        oscillator,
        trap,
        environment,
        grid,
        optimizer,
    })
}

fn validate_optimizer(o: &OptimizerSettings) -> Result<()> {
    let bounds = [
        ("optimizer.P_trap", o.p_trap_min, o.p_trap_max),
        ("optimizer.T_f", o.t_f_min, o.t_f_max),
        ("optimizer.scaling_eps", o.scaling_eps_min, o.scaling_eps_max),
        ("optimizer.scaling_L", o.scaling_l_min, o.scaling_l_max),
    ];
    for (name, lo, hi) in bounds {
        require(lo > 0.0, &format!("{name}_min"), lo, "must be positive")?;
        require(hi >= lo, &format!("{name}_max"), hi, "must be >= the minimum")?;
    }
    require(o.t_f_max < 1.0, "optimizer.T_f_max", o.t_f_max, "must be below 1")?;
    match (o.t_min, o.t_max) {
        (None, None) => {}
        (Some(lo), Some(hi)) => {
            require(lo > 0.0, "optimizer.T_min", lo, "must be positive")?;
            require(hi >= lo, "optimizer.T_max", hi, "must be >= T_min")?;
        }
        (Some(_), None) => {
            return Err(Error::MissingField {
                section: "optimizer".into(),
                key: "T_max".into(),
            })
        }
        (None, Some(_)) => {
            return Err(Error::MissingField {
                section: "optimizer".into(),
                key: "T_min".into(),
            })
        }
    }
    require(
        o.gamma_opt_target_hz > 0.0,
        "optimizer.gamma_opt_target_Hz",
        o.gamma_opt_target_hz,
        "must be positive",
    )?;
    require(
        o.coarse_points >= 2,
        "optimizer.coarse_points",
        o.coarse_points as f64,
        "must be >= 2",
    )?;
    require(
        o.refine_points >= 3 && o.refine_points % 2 == 1,
        "optimizer.refine_points",
        o.refine_points as f64,
        "must be an odd number >= 3",
    )?;
    require(
        o.scaling_points >= 1,
        "optimizer.scaling_points",
        o.scaling_points as f64,
        "must be >= 1",
    )?;
    Ok(())
}

/// Example parameter set of the reference design, as a configuration document.
pub const TABLE_I: &str = r#"# Reference design: 50 cm optomechanical filter cavity with optical dilution
[cavity]
L = 0.5
T_f_ppm = 250
epsilon_ppm = 10
lambda_control = 1064e-9
P_c = 1e-4
delta_Hz = 100
input_squeezing_db = 10
epsilon_sweep_ppm = [0, 1, 5, 10, 20]

[oscillator]
m = 500e-12
omega_m0_Hz = 200
Q_m0 = 1e8
cantilever_l = 1.5e-3
cantilever_b = 0.3e-3
cantilever_h = 0.37e-6
rho = 2329
Y = 130e9

[trap]
P_trap = 1.6e-3
lambda_trap = 532e-9
T_s_ppm = 3000

[environment]
T = 1.0
kappa0 = 10
n_exp = 2
absorption_ppm = 10

[grid]
f_min_Hz = 1
f_max_Hz = 10000
count = 401
spacing = "log"
"#;

#[cfg(test)]
mod tests {
    use super::*;

    fn table_i() -> SystemConfig {
        SystemConfig::from_toml_str(TABLE_I).unwrap()
    }

    #[test]
    fn loads_reference_design() {
        let c = table_i();
        assert_eq!(c.cavity.length, 0.5);
        assert_eq!(c.cavity.t_f, 2.5e-4);
        assert_eq!(c.cavity.epsilon, 1e-5);
        assert_eq!(c.cavity.lambda_control, 1064e-9);
        assert_eq!(c.cavity.p_c, 1e-4);
        assert_eq!(c.oscillator.m, 5e-10);
        assert_eq!(c.oscillator.q_m0, 1e8);
        assert_eq!(c.trap.p_trap, 1.6e-3);
        assert_eq!(c.trap.t_s, 3e-3);
        assert_eq!(c.trap.lambda_trap, 532e-9);
        assert_eq!(c.environment.temperature, 1.0);
        assert_eq!(c.environment.absorption, 1e-5);
        assert_eq!(c.cavity.epsilon_sweep, vec![0.0, 1e-6, 5e-6, 1e-5, 2e-5]);
        assert!(c.trap.is_active());
    }

    #[test]
    fn hz_keys_become_angular() {
        let c = table_i();
        assert_eq!(c.oscillator.omega_m0(), 2.0 * std::f64::consts::PI * 200.0);
    }

    #[test]
    fn zero_transmissivity_is_a_range_error() {
        let err = SystemConfig::with_overrides(TABLE_I, &["T_f_ppm=0"]).unwrap_err();
        assert!(matches!(err, Error::Range { ref field, value, .. } if field == "cavity.T_f" && value == 0.0));
    }

    #[test]
    fn missing_key_is_named() {
        let text = TABLE_I.replace("P_c = 1e-4\n", "");
        let err = SystemConfig::from_toml_str(&text).unwrap_err();
        assert_eq!(
            err,
            Error::MissingField {
                section: "cavity".into(),
                key: "P_c".into()
            }
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = TABLE_I.replace("[trap]\n", "[trap]\nfinesse = 3\n");
        assert_eq!(
            SystemConfig::from_toml_str(&text).unwrap_err(),
            Error::UnknownKey("trap.finesse".into())
        );
        let text = format!("{TABLE_I}\n[detector]\nx = 1\n");
        assert!(matches!(SystemConfig::from_toml_str(&text), Err(Error::UnknownKey(_))));
    }

    #[test]
    fn loss_must_stay_below_transmissivity() {
        assert!(SystemConfig::with_overrides(TABLE_I, &["epsilon_ppm=250"]).is_err());
        assert!(SystemConfig::with_overrides(TABLE_I, &["epsilon=0"]).is_ok());
    }

    #[test]
    fn ppm_and_plain_key_conflict() {
        let text = TABLE_I.replace("T_f_ppm = 250", "T_f_ppm = 250\nT_f = 2.5e-4");
        assert!(matches!(
            SystemConfig::from_toml_str(&text),
            Err(Error::ConflictingKeys(..))
        ));
    }

    #[test]
    fn overrides_replace_unit_siblings() {
        let c = SystemConfig::with_overrides(TABLE_I, &["epsilon=0", "thermal.T=0.001"]).unwrap();
        assert_eq!(c.cavity.epsilon, 0.0);
        assert_eq!(c.environment.temperature, 0.001);
    }

    #[test]
    fn duplicate_and_malformed_overrides() {
        assert_eq!(
            SystemConfig::with_overrides(TABLE_I, &["T=1", "environment.T=2"]).unwrap_err(),
            Error::DuplicateOverride("environment.T".into())
        );
        assert!(matches!(
            SystemConfig::with_overrides(TABLE_I, &["T"]),
            Err(Error::MalformedOverride(_))
        ));
        assert!(matches!(
            SystemConfig::with_overrides(TABLE_I, &["nonsense=1"]),
            Err(Error::UnknownKey(_))
        ));
    }

    #[test]
    fn overrides_commute_for_distinct_keys() {
        let a = SystemConfig::with_overrides(TABLE_I, &["T=2", "P_c=2e-4", "bath=hotspot"]).unwrap();
        let b = SystemConfig::with_overrides(TABLE_I, &["bath=hotspot", "P_c=2e-4", "T=2"]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.environment.bath, Bath::Hotspot);
    }

    #[test]
    fn serialization_round_trips_exactly() {
        let c = SystemConfig::with_overrides(TABLE_I, &["delta_t_Hz=2.0915e7", "Q_m_eff=2e10"]).unwrap();
        let text = c.to_toml_string();
        let back = SystemConfig::from_toml_str(&text).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn partial_cantilever_geometry_is_an_error() {
        let text = TABLE_I.replace("rho = 2329\n", "");
        assert_eq!(
            SystemConfig::from_toml_str(&text).unwrap_err(),
            Error::MissingField {
                section: "oscillator".into(),
                key: "rho".into()
            }
        );
    }
}
