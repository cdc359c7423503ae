//! Legacy voltage-control devices: regulator tap decisions, capacitor bank
//! switching, daily operation budgets and the action log.

use serde::{Deserialize, Serialize};

use crate::feeder::{CapacitorBank, Network, RegulatorBank};
use crate::io::feeder_file::CapacitorMode;
use crate::phase::{Phase, PhaseSet};
use crate::power_flow::Solution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TapAction {
    pub regulator: usize,
    pub phase: Phase,
    pub delta_taps: i32,
    pub resulting_position: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwitchAction {
    pub capacitor: usize,
    /// `None` when the whole bank switches as one unit.
    pub phase: Option<Phase>,
    pub new_state: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoteKind {
    /// The daily operation budget prevented a needed action.
    BudgetExhausted,
    /// The tap is already at its end stop.
    LimitClamped,
    /// Switching on would exceed the node's reactive limit.
    NodeCapBinding,
}

impl NoteKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoteKind::BudgetExhausted => "budget_exhausted",
            NoteKind::LimitClamped => "limit_clamped",
            NoteKind::NodeCapBinding => "node_cap_binding",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeviceNote {
    pub device: DeviceRef,
    pub phase: Option<Phase>,
    pub kind: NoteKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DeviceRef {
    Regulator(usize),
    Capacitor(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoggedAction {
    Tap { delta: i32, position: i32 },
    Switch { on: bool },
    Note { kind: NoteKind },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub timestep: usize,
    pub device: DeviceRef,
    pub phase: Option<Phase>,
    pub action: LoggedAction,
}

impl LogEntry {
    /// Number of switching operations this entry represents.
    pub fn operations(&self) -> u32 {
        match self.action {
            LoggedAction::Tap { delta, .. } => delta.unsigned_abs(),
            LoggedAction::Switch { .. } => 1,
            LoggedAction::Note { .. } => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Bound {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViolationRecord {
    pub timestep: usize,
    pub bus: usize,
    pub phase: Phase,
    pub v_pu: f64,
    pub bound: Bound,
}

/// Operations used so far in the current simulated day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DailyCounters {
    pub day: u64,
    pub regulator_taps: Vec<[u32; 3]>,
    pub capacitor_switches: Vec<u32>,
}

impl DailyCounters {
    pub fn new(network: &Network) -> Self {
        DailyCounters {
            day: 0,
            regulator_taps: vec![[0; 3]; network.regulators.len()],
            capacitor_switches: vec![0; network.capacitors.len()],
        }
    }

    /// Clears the counters when `day` differs from the current day.
    pub fn roll_over(&mut self, day: u64) {
        if day != self.day {
            self.day = day;
            self.regulator_taps.iter_mut().for_each(|c| *c = [0; 3]);
            self.capacitor_switches.iter_mut().for_each(|c| *c = 0);
        }
    }

    pub fn record_tap(&mut self, a: &TapAction) {
        self.regulator_taps[a.regulator][a.phase.index()] += a.delta_taps.unsigned_abs();
    }

    pub fn record_switch(&mut self, a: &SwitchAction) {
        self.capacitor_switches[a.capacitor] += 1;
    }
}

/// Append-only record of device operations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeviceActionLog {
    pub entries: Vec<LogEntry>,
}

impl DeviceActionLog {
    pub fn push_tap(&mut self, timestep: usize, a: &TapAction) {
        self.entries.push(LogEntry {
            timestep,
            device: DeviceRef::Regulator(a.regulator),
            phase: Some(a.phase),
            action: LoggedAction::Tap {
                delta: a.delta_taps,
                position: a.resulting_position,
            },
        });
    }

    pub fn push_switch(&mut self, timestep: usize, a: &SwitchAction) {
        self.entries.push(LogEntry {
            timestep,
            device: DeviceRef::Capacitor(a.capacitor),
            phase: a.phase,
            action: LoggedAction::Switch { on: a.new_state },
        });
    }

    pub fn push_note(&mut self, timestep: usize, note: &DeviceNote) {
        self.entries.push(LogEntry {
            timestep,
            device: note.device,
            phase: note.phase,
            action: LoggedAction::Note { kind: note.kind },
        });
    }

    pub fn is_empty(&self) -> bool {
        self.entries.iter().all(|e| e.operations() == 0)
    }

    /// Total tap operations per regulator and phase.
    pub fn regulator_totals(&self, regulators: usize) -> Vec<[u32; 3]> {
        let mut out = vec![[0; 3]; regulators];
        for e in &self.entries {
            if let (DeviceRef::Regulator(r), Some(p)) = (e.device, e.phase) {
                out[r][p.index()] += e.operations();
            }
        }
        out
    }

    pub fn capacitor_totals(&self, capacitors: usize) -> Vec<u32> {
        let mut out = vec![0; capacitors];
        for e in &self.entries {
            if let DeviceRef::Capacitor(c) = e.device {
                out[c] += e.operations();
            }
        }
        out
    }

    /// Replays the tap entries from `initial` positions.
    pub fn replay_taps(&self, initial: &[[i32; 3]]) -> Vec<[i32; 3]> {
        let mut taps = initial.to_vec();
        for e in &self.entries {
            if let (DeviceRef::Regulator(r), Some(p), LoggedAction::Tap { delta, .. }) = (e.device, e.phase, e.action) {
                taps[r][p.index()] += delta;
            }
        }
        taps
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegulatorDecision {
    pub actions: Vec<TapAction>,
    pub notes: Vec<DeviceNote>,
}

/// Tap moves needed to bring each regulated phase voltage back into band.
///
/// The move is `ceil((|v - setpoint| - bandwidth / 2) / step)` taps towards
/// the band, limited by the end stops and by the remaining daily budget.
pub fn regulator_decide(
    solution: &Solution,
    network: &Network,
    regulator: usize,
    taps: &[i32; 3],
    counters: &DailyCounters,
) -> RegulatorDecision {
    let reg: &RegulatorBank = &network.regulators[regulator];
    let mut out = RegulatorDecision::default();
    for p in reg.phases.iter() {
        let k = p.index();
        let v = solution.vmag_pu(reg.to, p);
        let dev = v - reg.setpoint_pu;
        let half = reg.bandwidth_pu / 2.0;
        if dev.abs() <= half {
            continue;
        }
        let needed = ((dev.abs() - half) / reg.step_pu - 1e-9).ceil().max(1.0) as i32;
        let direction = if dev > 0.0 { -1 } else { 1 };
        let target = (taps[k] + direction * needed).clamp(reg.tap_min, reg.tap_max);
        let mut delta = target - taps[k];
        let note = |kind| DeviceNote {
            device: DeviceRef::Regulator(regulator),
            phase: Some(p),
            kind,
        };
        if delta == 0 {
            out.notes.push(note(NoteKind::LimitClamped));
            continue;
        }
        let remaining = reg.daily_tap_limit.saturating_sub(counters.regulator_taps[regulator][k]);
        if remaining == 0 {
            out.notes.push(note(NoteKind::BudgetExhausted));
            continue;
        }
        if delta.unsigned_abs() > remaining {
            delta = delta.signum() * remaining as i32;
            out.notes.push(note(NoteKind::BudgetExhausted));
        }
        out.actions.push(TapAction {
            regulator,
            phase: p,
            delta_taps: delta,
            resulting_position: taps[k] + delta,
        });
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CapacitorDecision {
    pub actions: Vec<SwitchAction>,
    pub notes: Vec<DeviceNote>,
}

/// Reactive injection (kVAR, rated) of every bank currently on at `bus`.
pub fn node_injection_kvar(network: &Network, bus: usize, states: &[[bool; 3]]) -> f64 {
    network
        .capacitors
        .iter()
        .zip(states)
        .filter(|(c, _)| c.bus == bus)
        .map(|(c, s)| c.phases.iter().filter(|p| s[p.index()]).map(|p| c.kvar[p.index()]).sum::<f64>())
        .sum()
}

/// Voltage-threshold switching with a hysteresis gap between the on and off
/// thresholds. Ganged banks act on the mean phase voltage.
pub fn capacitor_decide(
    solution: &Solution,
    network: &Network,
    capacitor: usize,
    states: &[[bool; 3]],
    counters: &DailyCounters,
) -> CapacitorDecision {
    let bank: &CapacitorBank = &network.capacitors[capacitor];
    let mut out = CapacitorDecision::default();
    if bank.mode == CapacitorMode::Fixed {
        return out;
    }
    let state = states[capacitor];
    let mut used = counters.capacitor_switches[capacitor];
    let mut node_kvar = node_injection_kvar(network, bank.bus, states);
    let groups: Vec<(Option<Phase>, PhaseSet)> = if bank.per_phase_switching {
        bank.phases.iter().map(|p| (Some(p), PhaseSet::single(p))).collect()
    } else {
        vec![(None, bank.phases)]
    };
    for (phase, set) in groups {
        let v = solution.mean_vmag_pu(bank.bus, set.iter());
        let is_on = set.iter().all(|p| state[p.index()]);
        let kvar: f64 = set.iter().map(|p| bank.kvar[p.index()]).sum();
        let note = |kind| DeviceNote {
            device: DeviceRef::Capacitor(capacitor),
            phase,
            kind,
        };
        let new_state = if !is_on && v < bank.on_threshold_pu {
            true
        } else if is_on && v > bank.off_threshold_pu {
            false
        } else {
            continue;
        };
        if used >= bank.daily_switch_limit {
            out.notes.push(note(NoteKind::BudgetExhausted));
            continue;
        }
        if new_state && node_kvar + kvar > bank.q_max_node_kvar + 1e-9 {
            out.notes.push(note(NoteKind::NodeCapBinding));
            continue;
        }
        used += 1;
        node_kvar += if new_state { kvar } else { -kvar };
        out.actions.push(SwitchAction {
            capacitor,
            phase,
            new_state,
        });
    }
    out
}

/// One record per (bus, phase) outside its closed voltage band.
pub fn check_voltage_limits(solution: &Solution, network: &Network, timestep: usize) -> Vec<ViolationRecord> {
    let mut out = Vec::new();
    for (i, bus) in network.buses.iter().enumerate() {
        for p in bus.phases.iter() {
            let v = solution.vmag_pu(i, p);
            let bound = if v > bus.v_max_pu {
                Bound::Upper
            } else if v < bus.v_min_pu {
                Bound::Lower
            } else {
                continue;
            };
            out.push(ViolationRecord {
                timestep,
                bus: i,
                phase: p,
                v_pu: v,
                bound,
            });
        }
    }
    out
}

/// Applies switch actions to bank states.
pub fn apply_switches(network: &Network, states: &mut [[bool; 3]], actions: &[SwitchAction]) {
    for a in actions {
        let bank = &network.capacitors[a.capacitor];
        match a.phase {
            Some(p) => states[a.capacitor][p.index()] = a.new_state,
            None => {
                for p in bank.phases.iter() {
                    states[a.capacitor][p.index()] = a.new_state;
                }
            }
        }
    }
}
