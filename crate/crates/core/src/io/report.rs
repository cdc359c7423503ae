//! Sweep comparison table, report file and plot data.

use std::path::Path;

use serde::Serialize;

use crate::error::{IoError, MetricsError};
use crate::metrics::{impact_report, DeviceNames, ImpactReport, MetricOptions, RunDigest};
use crate::phase::Phase;

use super::write_text;

/// Baseline row first, then one row per function in sweep order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub names: DeviceNames,
    pub rows: Vec<ImpactReport>,
}

/// Compares every run against the baseline. Loss means are taken over the
/// timesteps where the first PV run had power available.
pub fn build_comparison(
    names: &DeviceNames,
    baseline: &RunDigest,
    runs: &[RunDigest],
    options: MetricOptions,
) -> Result<ComparisonTable, MetricsError> {
    let mask = runs.first().map(|r| r.generating.clone()).unwrap_or_else(|| baseline.generating.clone());
    let mut rows = vec![impact_report(names, baseline, baseline, &mask, options)?];
    // Exclusion depends only on the baseline, so one warning covers every row.
    for name in &rows[0].excluded {
        log::warn!("'{name}' has no baseline operations; left out of the impact index");
    }
    for r in runs {
        rows.push(impact_report(names, r, baseline, &mask, options)?);
    }
    Ok(ComparisonTable {
        names: names.clone(),
        rows,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn comparison_csv(table: &ComparisonTable) -> String {
    let mut header = vec!["function".to_string()];
    for r in &table.names.regulators {
        for p in Phase::ALL {
            header.push(format!("{r}_{}_taps", p.letter()));
        }
    }
    header.push("total_taps".into());
    for c in &table.names.capacitors {
        header.push(format!("{c}_switches"));
    }
    header.push("total_switches".into());
    for r in &table.names.regulators {
        header.push(format!("{r}_dcf"));
    }
    for c in &table.names.capacitors {
        header.push(format!("{c}_dcf"));
    }
    header.extend(
        [
            "cii",
            "mean_loss_kw",
            "baseline_mean_loss_kw",
            "loss_reduction_pct",
            "loss_energy_kwh",
            "violations",
            "flagged_power_flow",
            "flagged_control",
        ]
        .map(String::from),
    );
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(&header).expect("in-memory csv write");
    for row in &table.rows {
        let mut rec = vec![row.label.clone()];
        for ops in &row.regulator_phase_ops {
            rec.extend(ops.iter().map(|n| n.to_string()));
        }
        rec.push(row.total_taps.to_string());
        rec.extend(row.capacitors.iter().map(|f| f.ops_with.to_string()));
        rec.push(row.total_switches.to_string());
        rec.extend(row.regulators.iter().map(|f| opt(f.dcf)));
        rec.extend(row.capacitors.iter().map(|f| opt(f.dcf)));
        rec.push(row.cii.to_string());
        rec.push(row.losses.mean_kw.to_string());
        rec.push(row.baseline_losses.mean_kw.to_string());
        rec.push(row.loss_reduction_pct.to_string());
        rec.push(row.losses.energy_kwh.to_string());
        rec.push(row.violations.to_string());
        rec.push(row.flagged_power_flow.to_string());
        rec.push(row.flagged_control.to_string());
        w.write_record(&rec).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8")
}

#[derive(Debug, Serialize)]
struct ReportEntry<'a> {
    function: &'a str,
    cii: f64,
    total_taps: u32,
    total_switches: u32,
    mean_loss_kw: f64,
    loss_reduction_pct: f64,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    excluded_from_cii: &'a [String],
}

#[derive(Debug, Serialize)]
struct ReportFile<'a> {
    schema: &'static str,
    baseline_mean_loss_kw: f64,
    #[serde(rename = "run")]
    runs: Vec<ReportEntry<'a>>,
}

pub fn report_toml(table: &ComparisonTable) -> String {
    let file = ReportFile {
        schema: "qsts-report/1",
        baseline_mean_loss_kw: table.rows.first().map(|r| r.losses.mean_kw).unwrap_or(0.0),
        runs: table
            .rows
            .iter()
            .map(|r| ReportEntry {
                function: &r.label,
                cii: r.cii,
                total_taps: r.total_taps,
                total_switches: r.total_switches,
                mean_loss_kw: r.losses.mean_kw,
                loss_reduction_pct: r.loss_reduction_pct,
                excluded_from_cii: &r.excluded,
            })
            .collect(),
    };
    toml::to_string(&file).expect("report serializes")
}

/// `time_h` plus one real-loss column per run, baseline first.
pub fn loss_plot_csv(baseline: &RunDigest, runs: &[RunDigest]) -> String {
    let all: Vec<&RunDigest> = std::iter::once(baseline).chain(runs).collect();
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["timestep".to_string(), "time_h".to_string()];
    header.extend(all.iter().map(|d| d.label.clone()));
    w.write_record(&header).expect("in-memory csv write");
    for t in 0..baseline.len() {
        let mut rec = vec![t.to_string(), (t as f64 * baseline.dt_s / 3600.0).to_string()];
        rec.extend(all.iter().map(|d| d.p_loss_kw.get(t).map(|p| p.to_string()).unwrap_or_default()));
        w.write_record(&rec).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8")
}

pub fn cii_plot_csv(table: &ComparisonTable) -> String {
    #[derive(Serialize)]
    struct Bar<'a> {
        function: &'a str,
        cii: f64,
        total_taps: u32,
    }
    super::to_csv(table.rows.iter().map(|r| Bar {
        function: &r.label,
        cii: r.cii,
        total_taps: r.total_taps,
    }))
}

/// Writes `comparison.csv`, `report.toml` and the plot data into `dir`.
pub fn write_comparison(
    dir: &Path,
    table: &ComparisonTable,
    baseline: &RunDigest,
    runs: &[RunDigest],
) -> Result<(), IoError> {
    write_text(&dir.join("comparison.csv"), &comparison_csv(table))?;
    write_text(&dir.join("report.toml"), &report_toml(table))?;
    write_text(&dir.join("plots").join("losses.csv"), &loss_plot_csv(baseline, runs))?;
    write_text(&dir.join("plots").join("cii.csv"), &cii_plot_csv(table))?;
    Ok(())
}
