//! Experiment execution and artifact writing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use ddsim::analysis::{self, ConvergenceReport, FirstOrderFormula};
use ddsim::bloch_rd::run_rd_table;
use ddsim::error_model::realization;
use ddsim::sequence::{build_cdd, build_cpmg, build_pdd, build_sdd};
use ddsim::simulator::run_ensemble_states;
use ddsim::{EnsembleConfig, ErrorRealization, FidelityRecord, Variant};
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig};
use crate::{io_err, CliError};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

pub const FIDELITY_HEADER: &str = "sequence,variant,level_or_cycle,initial_state,fidelity,stderr,M,seed,config_hash";
pub const RD_HEADER: &str = "level,case,F_plus_z,F_minus_z,stderr_plus_z,stderr_minus_z,M,seed,config_hash";
pub const ANALYSIS_HEADER: &str = "check,draw,expected_order,at_least,min_ratio,max_ratio,passed,seed,config_hash";

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    /// `false` when a verification experiment found a failing check.
    pub checks_passed: bool,
}

#[derive(Serialize)]
struct Manifest {
    schema_version: u32,
    experiment: String,
    version: &'static str,
    created_unix: u64,
    config_hash: String,
    config: BTreeMap<String, String>,
    outputs: Vec<String>,
    checks_passed: bool,
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let hash = cfg.config_hash();
    let seed = cfg.ensemble.seed;
    let mut extra: Vec<(String, String)> = Vec::new();
    let mut checks_passed = true;
    let csv = match cfg.experiment {
        Experiment::Pdd => {
            let mut prog = build_pdd(cfg.variant, cfg.params.tau)?;
            if cfg.variant == Variant::Xz && cfg.z_substitution {
                prog = prog.with_z_substitution();
            }
            let recs = run_ensemble_states(&prog, &cfg.states, &cfg.params, &cfg.ensemble, cfg.cycles)?;
            fidelity_csv(&recs, &cfg.variant.to_string(), seed, &hash)
        }
        Experiment::Sdd => {
            let prog = build_sdd(cfg.params.tau, cfg.sdd_reduced)?;
            let recs = run_ensemble_states(&prog, &cfg.states, &cfg.params, &cfg.ensemble, cfg.cycles)?;
            fidelity_csv(&recs, "XY", seed, &hash)
        }
        Experiment::Cpmg => {
            let prog = build_cpmg(cfg.cpmg_pulses, cfg.params.tau)?;
            let recs = run_ensemble_states(&prog, &cfg.states, &cfg.params, &cfg.ensemble, cfg.cycles)?;
            fidelity_csv(&recs, "-", seed, &hash)
        }
        Experiment::Cdd => {
            let mut recs = Vec::new();
            for level in 1..=cfg.levels {
                let prog = build_cdd(cfg.variant, level, cfg.params.tau, cfg.z_substitution)?;
                for mut r in run_ensemble_states(&prog, &cfg.states, &cfg.params, &cfg.ensemble, 1)? {
                    r.index = level as u64;
                    recs.push(r);
                }
            }
            fidelity_csv(&recs, &cfg.variant.to_string(), seed, &hash)
        }
        Experiment::RdTable => {
            let ensemble = EnsembleConfig {
                size: cfg.rd_ensemble,
                ..cfg.ensemble
            };
            let levels: Vec<u32> = (1..=cfg.levels).collect();
            let rows = run_rd_table(&cfg.params, &cfg.rd, &levels, &cfg.rd_cases, &ensemble)?;
            let mut s = format!("{RD_HEADER}\n");
            for r in rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{}",
                    r.level, r.case, r.f_plus_z, r.f_minus_z, r.stderr_plus_z, r.stderr_minus_z, ensemble.size, seed, hash
                );
            }
            s
        }
        Experiment::VerifyAnalysis => {
            let reports = verify_analysis(cfg)?;
            checks_passed = reports.iter().all(|(_, r)| r.passed);
            let mut s = format!("{ANALYSIS_HEADER}\n");
            let mut jsonl = String::new();
            for (draw, r) in &reports {
                let min = r.ratios.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = r.ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{}",
                    r.label.replace(',', ";"),
                    draw,
                    r.expected_order,
                    r.at_least,
                    min,
                    max,
                    r.passed,
                    seed,
                    hash
                );
                let line = serde_json::json!({ "draw": draw, "report": r });
                let _ = writeln!(jsonl, "{line}");
            }
            extra.push((format!("{}.jsonl", cfg.experiment), jsonl));
            s
        }
    };

    std::fs::create_dir_all(&cfg.output).map_err(io_err(&cfg.output))?;
    let mut files = Vec::new();
    let csv_name = format!("{}.csv", cfg.experiment);
    for (name, body) in std::iter::once((csv_name, csv)).chain(extra) {
        let path = cfg.output.join(&name);
        std::fs::write(&path, body).map_err(io_err(&path))?;
        files.push(path);
    }
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        experiment: cfg.experiment.to_string(),
        version: env!("CARGO_PKG_VERSION"),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        config_hash: hash,
        config: cfg.resolved(),
        outputs: files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
        checks_passed,
    };
    let path = cfg.output.join(format!("{}.manifest.json", cfg.experiment));
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, body + "\n").map_err(io_err(&path))?;
    files.push(path);
    Ok(RunOutput { files, checks_passed })
}

fn fidelity_csv(recs: &[FidelityRecord], variant: &str, seed: u64, hash: &str) -> String {
    let mut s = format!("{FIDELITY_HEADER}\n");
    for r in recs {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.sequence, variant, r.index, r.initial_state, r.fidelity, r.stderr, r.ensemble_size, seed, hash
        );
    }
    s
}

/// Runs every order-of-error check on `analysis_draws` sampled
/// realizations, each scaled down by `analysis_scale`.
fn verify_analysis(cfg: &ExperimentConfig) -> Result<Vec<(u64, ConvergenceReport)>, CliError> {
    let p = &cfg.params;
    let (g, tau) = (p.gamma_e, p.tau);
    let levels: Vec<u32> = (1..=cfg.levels).collect();
    let mut out = Vec::new();
    for draw in 0..cfg.analysis_draws {
        let real = realization(p, cfg.ensemble.seed, draw).scaled(cfg.analysis_scale);
        let mut push = |r: ConvergenceReport| out.push((draw, r));
        for f in [FirstOrderFormula::XyPdd, FirstOrderFormula::XzPddSubstituted, FirstOrderFormula::XzPddDirect] {
            push(analysis::verify_first_order(f, &real, g, tau)?);
        }
        let half = analysis::verify_half_period(&real, g, tau)?;
        push(half.half_axis);
        push(half.full_transverse);
        push(analysis::cdd_invariance_sweep(Variant::Xy, &levels, &real, g, tau, false, 2)?);
        if cfg.levels >= 2 {
            let unit_phase = real.with_detuning(1.0 / (g * tau));
            push(analysis::cdd_invariance_sweep(Variant::Xz, &[1, 2], &unit_phase, g, tau, false, 1)?);
            push(analysis::cdd_invariance_sweep(Variant::Xz, &[1, 2], &unit_phase, g, tau, true, 2)?);
        }
        if cfg.levels >= 3 {
            push(analysis::cdd_invariance_sweep(Variant::Xz, &levels[1..], &real, g, tau, false, 2)?);
        }
        let no_inplane = ErrorRealization {
            m_x: 0.0,
            n_y: 0.0,
            ..real
        };
        push(analysis::sdd_residual_sweep(&no_inplane, g, tau, 3)?);
        push(analysis::convergence_sweep_at_least("reduced-sdd vs -1 - i eps_y sigma_y", 2, |s| {
            Ok(analysis::verify_reduced_sdd(&real.scaled(s), g, tau)?.reduced_discrepancy)
        })?);
    }
    Ok(out)
}
