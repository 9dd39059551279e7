//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ddsim::bloch_rd::{RdCase, RdParameters};
use ddsim::{EnsembleConfig, ErrorParameters, InitialState, Variant};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Pdd,
    Sdd,
    Cdd,
    Cpmg,
    RdTable,
    VerifyAnalysis,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Pdd,
        Experiment::Sdd,
        Experiment::Cdd,
        Experiment::Cpmg,
        Experiment::RdTable,
        Experiment::VerifyAnalysis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Pdd => "pdd",
            Experiment::Sdd => "sdd",
            Experiment::Cdd => "cdd",
            Experiment::Cpmg => "cpmg",
            Experiment::RdTable => "rd-table",
            Experiment::VerifyAnalysis => "verify-analysis",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s.trim())
            .ok_or_else(|| CliError::UnknownExperiment(s.to_string()))
    }
}

/// Every accepted key with its default value.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("variant", "XY"),
    ("cycles", "100"),
    ("levels", "4"),
    ("states", "x,y,z"),
    ("tau", "11e-6"),
    ("b", "0.05"),
    ("epsilon0", "0.3"),
    ("n0", "-0.12"),
    ("m_x", "0"),
    ("n_y", "0"),
    ("p_x", "0"),
    ("p_y", "0"),
    ("gamma_e", "auto"),
    ("coupling", "shared"),
    ("ensemble", "10000"),
    ("seed", "1"),
    ("workers", "1"),
    ("output", "out"),
    ("z_substitution", "true"),
    ("sdd_reduced", "false"),
    ("cpmg_pulses", "2"),
    ("t_p", "0.18e-6"),
    ("b_p", "auto"),
    ("tau_r", "2e-6"),
    ("rd_cases", "A,B,C"),
    ("rd_ensemble", "2000"),
    ("rd_dt", "auto"),
    ("rd_delay_dt", "20e-9"),
    ("analysis_scale", "0.1"),
    ("analysis_draws", "4"),
];

/// Keys that do not influence any numeric result and are left out of the
/// config hash.
const UNHASHED: &[&str] = &["output", "workers"];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub variant: Variant,
    pub cycles: usize,
    pub levels: u32,
    pub states: Vec<InitialState>,
    pub params: ErrorParameters,
    pub ensemble: EnsembleConfig,
    pub output: PathBuf,
    pub z_substitution: bool,
    pub sdd_reduced: bool,
    pub cpmg_pulses: usize,
    pub rd: RdParameters,
    pub rd_cases: Vec<RdCase>,
    pub rd_ensemble: usize,
    pub analysis_scale: f64,
    pub analysis_draws: u64,
}

fn err(key: &str, reason: impl fmt::Display) -> CliError {
    CliError::Config {
        key: key.to_string(),
        reason: reason.to_string(),
    }
}

/// `--rd-ensemble` and `rd_ensemble` name the same key.
pub fn normalize_key(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('-', "_")
}

fn check_known(key: &str) -> Result<(), CliError> {
    if DEFAULTS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        Err(err(key, "unknown key"))
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(line, format!("line {}: expected `key = value`", i + 1)))?;
        let key = normalize_key(k);
        check_known(&key)?;
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Splits `--key value` / `--key=value` pairs.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        if !arg.starts_with("--") {
            return Err(err(arg, "expected a `--key value` override"));
        }
        let (key, value) = match arg.split_once('=') {
            Some((k, v)) => (normalize_key(k), v.to_string()),
            None => {
                let key = normalize_key(arg);
                let value = it.next().ok_or_else(|| err(&key, "missing value"))?;
                (key, value.clone())
            }
        };
        check_known(&key)?;
        out.push((key, value));
    }
    Ok(out)
}

fn get<'a>(raw: &'a BTreeMap<String, String>, key: &str) -> &'a str {
    raw.get(key).map(String::as_str).unwrap_or("")
}

fn num<T: FromStr>(raw: &BTreeMap<String, String>, key: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    get(raw, key).parse::<T>().map_err(|e| err(key, e))
}

fn finite(raw: &BTreeMap<String, String>, key: &str) -> Result<f64, CliError> {
    let v: f64 = num(raw, key)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(err(key, "must be finite"))
    }
}

fn auto_or(raw: &BTreeMap<String, String>, key: &str) -> Result<Option<f64>, CliError> {
    if get(raw, key) == "auto" {
        Ok(None)
    } else {
        finite(raw, key).map(Some)
    }
}

fn boolean(raw: &BTreeMap<String, String>, key: &str) -> Result<bool, CliError> {
    match get(raw, key).to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(err(key, format!("expected true or false, got `{other}`"))),
    }
}

fn list<T: FromStr>(raw: &BTreeMap<String, String>, key: &str) -> Result<Vec<T>, CliError>
where
    T::Err: fmt::Display,
{
    let items = get(raw, key)
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| err(key, e)))
        .collect::<Result<Vec<_>, _>>()?;
    if items.is_empty() {
        return Err(err(key, "empty list"));
    }
    Ok(items)
}

/// Maps a core validation error back to the key that caused it.
fn core_err(e: ddsim::Error) -> CliError {
    match e {
        ddsim::Error::InvalidParameter { name, reason } => err(name, reason),
        other => CliError::Sim(other),
    }
}

impl ExperimentConfig {
    /// Defaults, then the config file entries, then the overrides.
    pub fn resolve(
        experiment: Experiment,
        file_entries: &[(String, String)],
        overrides: &[(String, String)],
    ) -> Result<Self, CliError> {
        let mut raw: BTreeMap<String, String> =
            DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        for (k, v) in file_entries.iter().chain(overrides) {
            check_known(k)?;
            raw.insert(k.clone(), v.clone());
        }

        let gamma_e = auto_or(&raw, "gamma_e")?.unwrap_or(ddsim::GAMMA_E);
        let params = ErrorParameters {
            b: finite(&raw, "b")?,
            epsilon0: finite(&raw, "epsilon0")?,
            n0: finite(&raw, "n0")?,
            m_x: finite(&raw, "m_x")?,
            n_y: finite(&raw, "n_y")?,
            p_x: finite(&raw, "p_x")?,
            p_y: finite(&raw, "p_y")?,
            gamma_e,
            tau: finite(&raw, "tau")?,
            t_p: finite(&raw, "t_p")?,
            coupling: get(&raw, "coupling").parse().map_err(|e| err("coupling", e))?,
        };
        params.validate().map_err(core_err)?;

        let ensemble = EnsembleConfig {
            size: num(&raw, "ensemble")?,
            seed: num(&raw, "seed")?,
            workers: num(&raw, "workers")?,
        };
        ensemble.validate().map_err(core_err)?;

        let tau_r: f64 = num(&raw, "tau_r")?;
        if !(tau_r > 0.0) {
            return Err(err("tau_r", "must be > 0 (inf disables damping)"));
        }
        let mut rd = RdParameters::new(tau_r, params.t_p, gamma_e);
        if let Some(b_p) = auto_or(&raw, "b_p")? {
            rd.b_p_mean = b_p;
        }
        if let Some(dt) = auto_or(&raw, "rd_dt")? {
            rd.dt = dt;
        }
        rd.delay_dt = finite(&raw, "rd_delay_dt")?;
        rd.validate().map_err(core_err)?;

        let cycles: usize = num(&raw, "cycles")?;
        if cycles == 0 {
            return Err(err("cycles", "must be >= 1"));
        }
        let levels: u32 = num(&raw, "levels")?;
        if !(1..=ddsim::sequence::MAX_CDD_LEVEL).contains(&levels) {
            return Err(err("levels", format!("must be in 1..={}", ddsim::sequence::MAX_CDD_LEVEL)));
        }
        let cpmg_pulses: usize = num(&raw, "cpmg_pulses")?;
        if cpmg_pulses == 0 {
            return Err(err("cpmg_pulses", "must be >= 1"));
        }
        let rd_ensemble: usize = num(&raw, "rd_ensemble")?;
        if rd_ensemble == 0 {
            return Err(err("rd_ensemble", "must be >= 1"));
        }
        let analysis_scale = finite(&raw, "analysis_scale")?;
        if !(analysis_scale > 0.0) {
            return Err(err("analysis_scale", "must be > 0"));
        }
        let analysis_draws: u64 = num(&raw, "analysis_draws")?;
        if analysis_draws == 0 {
            return Err(err("analysis_draws", "must be >= 1"));
        }
        let output = PathBuf::from(get(&raw, "output"));
        if output.as_os_str().is_empty() {
            return Err(err("output", "empty path"));
        }

        Ok(Self {
            experiment,
            variant: get(&raw, "variant").parse().map_err(|e| err("variant", e))?,
            cycles,
            levels,
            states: list(&raw, "states")?,
            params,
            ensemble,
            output,
            z_substitution: boolean(&raw, "z_substitution")?,
            sdd_reduced: boolean(&raw, "sdd_reduced")?,
            cpmg_pulses,
            rd,
            rd_cases: list(&raw, "rd_cases")?,
            rd_ensemble,
            analysis_scale,
            analysis_draws,
        })
    }

    /// The resolved configuration in canonical form, as written into the
    /// manifest. Equal values spelled differently resolve identically.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        fn join<T: fmt::Display>(items: &[T]) -> String {
            items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
        }
        let p = &self.params;
        let entries: Vec<(&str, String)> = vec![
            ("experiment", self.experiment.to_string()),
            ("variant", self.variant.to_string()),
            ("cycles", self.cycles.to_string()),
            ("levels", self.levels.to_string()),
            ("states", join(&self.states)),
            ("tau", p.tau.to_string()),
            ("b", p.b.to_string()),
            ("epsilon0", p.epsilon0.to_string()),
            ("n0", p.n0.to_string()),
            ("m_x", p.m_x.to_string()),
            ("n_y", p.n_y.to_string()),
            ("p_x", p.p_x.to_string()),
            ("p_y", p.p_y.to_string()),
            ("gamma_e", p.gamma_e.to_string()),
            ("coupling", p.coupling.to_string()),
            ("ensemble", self.ensemble.size.to_string()),
            ("seed", self.ensemble.seed.to_string()),
            ("workers", self.ensemble.workers.to_string()),
            ("output", self.output.display().to_string()),
            ("z_substitution", self.z_substitution.to_string()),
            ("sdd_reduced", self.sdd_reduced.to_string()),
            ("cpmg_pulses", self.cpmg_pulses.to_string()),
            ("t_p", p.t_p.to_string()),
            ("b_p", self.rd.b_p_mean.to_string()),
            ("tau_r", self.rd.tau_r.to_string()),
            ("rd_cases", join(&self.rd_cases)),
            ("rd_ensemble", self.rd_ensemble.to_string()),
            ("rd_dt", self.rd.dt.to_string()),
            ("rd_delay_dt", self.rd.delay_dt.to_string()),
            ("analysis_scale", self.analysis_scale.to_string()),
            ("analysis_draws", self.analysis_draws.to_string()),
        ];
        entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// First 16 hex digits of SHA-256 over the resolved `key = value`
    /// lines, excluding keys that cannot change the numbers.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.resolved() {
            if UNHASHED.contains(&k.as_str()) {
                continue;
            }
            h.update(format!("{k} = {v}\n").as_bytes());
        }
        let digest = h.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
