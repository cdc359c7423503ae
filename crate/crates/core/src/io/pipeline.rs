//! End-to-end commands: run one scenario, sweep functions, rebuild a report
//! from a sweep directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, IoError, SimError};
use crate::harmonics::HarmonicResult;
use crate::metrics::{DeviceNames, MetricOptions, RunDigest};
use crate::qsts::{harmonic_snapshot, run_series, sweep_functions, RunResult, Scenario};

use super::bundle::{read_digest, write_run_bundle};
use super::report::{build_comparison, write_comparison, ComparisonTable};
use super::scenario::LoadedScenario;
use super::{read_text, write_text};

pub const BASELINE_DIR: &str = "baseline";
const MANIFEST: &str = "sweep.toml";

#[derive(Debug, Serialize, Deserialize)]
struct SweepManifest {
    runs: Vec<String>,
}

fn snapshots(
    scenario: &Scenario,
    run: &RunResult,
    timesteps: &[usize],
    loaded: &LoadedScenario,
) -> Result<Vec<(usize, HarmonicResult)>, Error> {
    timesteps
        .iter()
        .map(|&t| {
            if t >= run.len() {
                return Err(SimError::InvalidScenario(format!(
                    "harmonic snapshot at timestep {t} is past the end of the run ({} steps)",
                    run.len()
                ))
                .into());
            }
            Ok((t, harmonic_snapshot(scenario, run, t, &loaded.spectrum)?))
        })
        .collect()
}

/// Summary of a single run with no baseline comparison.
#[derive(Debug, Serialize)]
struct RunSummary {
    schema: &'static str,
    label: String,
    steps: usize,
    total_taps: u32,
    total_switches: u32,
    loss_energy_kwh: f64,
    peak_loss_kw: f64,
    violations: usize,
    flagged_power_flow: usize,
    flagged_control: usize,
}

/// Runs the scenario and writes its bundle into `out`.
pub fn run_to_dir(loaded: &LoadedScenario, harmonics: &[usize], out: &Path) -> Result<RunResult, Error> {
    let scenario = &loaded.scenario;
    let run = run_series(scenario)?;
    let snaps = snapshots(scenario, &run, harmonics, loaded)?;
    write_run_bundle(out, &scenario.network, &run, &snaps)?;
    let digest = RunDigest::from_run(&run, &scenario.network);
    let mask = vec![true; digest.len()];
    let losses = crate::metrics::loss_summary(&digest.p_loss_kw, &mask, digest.dt_s);
    let summary = RunSummary {
        schema: "qsts-run-report/1",
        label: run.label.clone(),
        steps: run.len(),
        total_taps: digest.regulator_ops.iter().flatten().sum(),
        total_switches: digest.capacitor_ops.iter().sum(),
        loss_energy_kwh: losses.energy_kwh,
        peak_loss_kw: losses.peak_kw,
        violations: digest.violations,
        flagged_power_flow: digest.flagged_power_flow,
        flagged_control: digest.flagged_control,
    };
    write_text(&out.join("report.toml"), &toml::to_string(&summary).expect("summary serializes"))?;
    Ok(run)
}

pub struct SweepOutput {
    pub baseline: RunResult,
    pub runs: Vec<RunResult>,
    pub table: ComparisonTable,
}

/// Baseline plus one run per configured function, each in its own directory,
/// then the comparison files at the top of `out`.
pub fn sweep_to_dir(
    loaded: &LoadedScenario,
    harmonics: &[usize],
    out: &Path,
    options: MetricOptions,
) -> Result<SweepOutput, Error> {
    let scenario = &loaded.scenario;
    let result = sweep_functions(scenario, &loaded.sweep)?;
    let net = &scenario.network;
    let baseline_scenario = scenario.baseline();
    let snaps = snapshots(&baseline_scenario, &result.baseline, harmonics, loaded)?;
    write_run_bundle(&out.join(BASELINE_DIR), net, &result.baseline, &snaps)?;
    let mut labels = Vec::new();
    let mut runs = Vec::new();
    for (config, run) in result.runs {
        let s = scenario.with_function(config);
        let snaps = snapshots(&s, &run, harmonics, loaded)?;
        write_run_bundle(&out.join(&run.label), net, &run, &snaps)?;
        labels.push(run.label.clone());
        runs.push(run);
    }
    let manifest = SweepManifest { runs: labels };
    write_text(&out.join(MANIFEST), &toml::to_string(&manifest).expect("manifest serializes"))?;

    let names = DeviceNames::of(net);
    let base_digest = RunDigest::from_run(&result.baseline, net);
    let digests: Vec<RunDigest> = runs.iter().map(|r| RunDigest::from_run(r, net)).collect();
    let table = build_comparison(&names, &base_digest, &digests, options)?;
    write_comparison(out, &table, &base_digest, &digests)?;
    Ok(SweepOutput {
        baseline: result.baseline,
        runs,
        table,
    })
}

fn run_dirs(results: &Path) -> Result<Vec<PathBuf>, IoError> {
    let manifest_path = results.join(MANIFEST);
    if manifest_path.exists() {
        let text = read_text(&manifest_path)?;
        let m: SweepManifest =
            toml::from_str(&text).map_err(|e| IoError::parse(manifest_path.display().to_string(), e.to_string()))?;
        return Ok(m.runs.iter().map(|l| results.join(l)).collect());
    }
    let mut dirs = Vec::new();
    let entries = std::fs::read_dir(results).map_err(|e| IoError::io(results, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| IoError::io(results, e))?;
        let path = entry.path();
        if path.join("run.toml").exists() && entry.file_name() != BASELINE_DIR {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Rebuilds the comparison purely from the CSV bundles under `results` and
/// writes it into `out`.
pub fn report_from_dir(results: &Path, out: &Path, options: MetricOptions) -> Result<ComparisonTable, Error> {
    let baseline_dir = results.join(BASELINE_DIR);
    if !baseline_dir.join("run.toml").exists() {
        return Err(IoError::MissingBaseline(results.to_path_buf()).into());
    }
    let (meta, baseline) = read_digest(&baseline_dir)?;
    let names = DeviceNames {
        regulators: meta.regulators.clone(),
        capacitors: meta.capacitors.clone(),
    };
    let mut runs = Vec::new();
    for dir in run_dirs(results)? {
        let (m, d) = read_digest(&dir)?;
        if m.regulators != meta.regulators || m.capacitors != meta.capacitors {
            return Err(IoError::parse(
                dir.display().to_string(),
                "device list differs from the baseline bundle",
            )
            .into());
        }
        runs.push(d);
    }
    let table = build_comparison(&names, &baseline, &runs, options)?;
    write_comparison(out, &table, &baseline, &runs)?;
    Ok(table)
}
