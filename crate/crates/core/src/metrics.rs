//! Device cost factors, the circuit impact index and loss summaries.
//!
//! A device cost factor (DCF) is the ratio of a device's switching
//! operations with a given inverter function to its operations in the no-PV
//! baseline over the same period. The circuit impact index (CII) is the mean
//! DCF over regulators. Maintenance cost per operation cancels out of the
//! ratio when it is the same in both runs.

use crate::error::MetricsError;
use crate::feeder::Network;
use crate::qsts::RunResult;

/// Ratio of operations; `None` when the baseline count is zero.
pub fn device_cost_factor(ops_with: u32, ops_baseline: u32) -> Option<f64> {
    (ops_baseline > 0).then(|| ops_with as f64 / ops_baseline as f64)
}

/// Cost-weighted form of the device cost factor: sum of operation-weighted
/// maintenance costs with the function over the same sum in the baseline.
pub fn scaled_omc(ops_with: &[u32], omc_with: &[f64], ops_baseline: &[u32], omc_baseline: &[f64]) -> Option<f64> {
    let num: f64 = ops_with.iter().zip(omc_with).map(|(&n, &c)| n as f64 * c).sum();
    let den: f64 = ops_baseline.iter().zip(omc_baseline).map(|(&n, &c)| n as f64 * c).sum();
    (den > 0.0).then(|| num / den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceFactor {
    pub device: String,
    pub ops_with: u32,
    pub ops_baseline: u32,
    pub dcf: Option<f64>,
}

/// Mean of the defined cost factors. Undefined factors are left out and
/// returned by name so callers can warn about them.
pub fn circuit_impact_index(factors: &[DeviceFactor]) -> Result<(f64, Vec<String>), MetricsError> {
    let defined: Vec<f64> = factors.iter().filter_map(|f| f.dcf).collect();
    let excluded: Vec<String> = factors.iter().filter(|f| f.dcf.is_none()).map(|f| f.device.clone()).collect();
    if defined.is_empty() {
        return match factors.first() {
            None => Err(MetricsError::EmptyList),
            Some(f) => Err(MetricsError::UndefinedBaseline(f.device.clone())),
        };
    }
    Ok((defined.iter().sum::<f64>() / defined.len() as f64, excluded))
}

/// Losses over a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSummary {
    /// Energy lost over all converged timesteps, kWh.
    pub energy_kwh: f64,
    /// Mean real loss over the timesteps in the averaging mask, kW.
    pub mean_kw: f64,
    pub peak_kw: f64,
    pub timesteps: usize,
}

/// Real losses per timestep (NaN where unconverged) summarised over `mask`.
pub fn loss_summary(p_loss_kw: &[f64], mask: &[bool], dt_s: f64) -> LossSummary {
    let h = dt_s / 3600.0;
    let mut energy = 0.0;
    let mut sum = 0.0;
    let mut count = 0;
    let mut peak: f64 = 0.0;
    for (t, &p) in p_loss_kw.iter().enumerate() {
        if !p.is_finite() {
            continue;
        }
        energy += p * h;
        peak = peak.max(p);
        if mask.get(t).copied().unwrap_or(false) {
            sum += p;
            count += 1;
        }
    }
    LossSummary {
        energy_kwh: energy,
        mean_kw: if count > 0 { sum / count as f64 } else { 0.0 },
        peak_kw: peak,
        timesteps: count,
    }
}

/// Everything the impact report needs from one run. Built either from an
/// in-memory run or from a bundle on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDigest {
    pub label: String,
    pub dt_s: f64,
    pub regulator_ops: Vec<[u32; 3]>,
    pub capacitor_ops: Vec<u32>,
    pub p_loss_kw: Vec<f64>,
    /// Timesteps where any PV unit had power available.
    pub generating: Vec<bool>,
    pub violations: usize,
    pub flagged_power_flow: usize,
    pub flagged_control: usize,
}

impl RunDigest {
    pub fn from_run(run: &RunResult, network: &Network) -> Self {
        RunDigest {
            label: run.label.clone(),
            dt_s: run.dt_s,
            regulator_ops: run.log.regulator_totals(network.regulators.len()),
            capacitor_ops: run.log.capacitor_totals(network.capacitors.len()),
            p_loss_kw: run.timesteps.iter().map(|t| t.losses.0).collect(),
            generating: run.timesteps.iter().map(|t| t.p_avail_kw.iter().any(|&p| p > 0.0)).collect(),
            violations: run.timesteps.iter().map(|t| t.violations.len()).sum(),
            flagged_power_flow: run.flagged_power_flow(),
            flagged_control: run.flagged_control(),
        }
    }

    pub fn len(&self) -> usize {
        self.p_loss_kw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_loss_kw.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MetricOptions {
    /// Average capacitor cost factors into the impact index as well.
    pub include_capacitors_in_cii: bool,
}

/// Impact of one inverter function against the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactReport {
    pub label: String,
    pub regulator_phase_ops: Vec<[u32; 3]>,
    pub regulators: Vec<DeviceFactor>,
    pub capacitors: Vec<DeviceFactor>,
    pub cii: f64,
    /// Devices left out of the index because their baseline count is zero.
    pub excluded: Vec<String>,
    pub losses: LossSummary,
    pub baseline_losses: LossSummary,
    /// Reduction of mean generating-hours loss relative to the baseline, %.
    pub loss_reduction_pct: f64,
    pub total_taps: u32,
    pub total_switches: u32,
    pub violations: usize,
    pub flagged_power_flow: usize,
    pub flagged_control: usize,
}

pub fn device_factors(names: &[String], with: &[u32], baseline: &[u32]) -> Vec<DeviceFactor> {
    names
        .iter()
        .zip(with.iter().zip(baseline))
        .map(|(device, (&w, &b))| DeviceFactor {
            device: device.clone(),
            ops_with: w,
            ops_baseline: b,
            dcf: device_cost_factor(w, b),
        })
        .collect()
}

/// Device ids the report is keyed by.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceNames {
    pub regulators: Vec<String>,
    pub capacitors: Vec<String>,
}

impl DeviceNames {
    pub fn of(network: &Network) -> Self {
        DeviceNames {
            regulators: network.regulators.iter().map(|r| r.id.clone()).collect(),
            capacitors: network.capacitors.iter().map(|c| c.id.clone()).collect(),
        }
    }
}

/// `mask` selects the timesteps averaged for the loss comparison; callers
/// normally pass the PV run's generating timesteps for both runs.
pub fn impact_report(
    names: &DeviceNames,
    run: &RunDigest,
    baseline: &RunDigest,
    mask: &[bool],
    options: MetricOptions,
) -> Result<ImpactReport, MetricsError> {
    if run.len() != baseline.len() {
        return Err(MetricsError::DurationMismatch {
            with: run.len(),
            baseline: baseline.len(),
        });
    }
    let sum3 = |v: &[[u32; 3]]| -> Vec<u32> { v.iter().map(|p| p.iter().sum()).collect() };
    let regulators = device_factors(&names.regulators, &sum3(&run.regulator_ops), &sum3(&baseline.regulator_ops));
    let capacitors = device_factors(&names.capacitors, &run.capacitor_ops, &baseline.capacitor_ops);
    let mut pool = regulators.clone();
    if options.include_capacitors_in_cii {
        pool.extend(capacitors.iter().cloned());
    }
    let (cii, excluded) = circuit_impact_index(&pool)?;
    for name in &excluded {
        log::debug!("{}: '{name}' has no baseline operations; left out of the impact index", run.label);
    }
    let losses = loss_summary(&run.p_loss_kw, mask, run.dt_s);
    let baseline_losses = loss_summary(&baseline.p_loss_kw, mask, baseline.dt_s);
    let loss_reduction_pct = if baseline_losses.mean_kw > 0.0 {
        (baseline_losses.mean_kw - losses.mean_kw) / baseline_losses.mean_kw * 100.0
    } else {
        0.0
    };
    Ok(ImpactReport {
        label: run.label.clone(),
        regulator_phase_ops: run.regulator_ops.clone(),
        total_taps: regulators.iter().map(|f| f.ops_with).sum(),
        total_switches: capacitors.iter().map(|f| f.ops_with).sum(),
        regulators,
        capacitors,
        cii,
        excluded,
        losses,
        baseline_losses,
        loss_reduction_pct,
        violations: run.violations,
        flagged_power_flow: run.flagged_power_flow,
        flagged_control: run.flagged_control,
    })
}
