//! Static feeder model: buses, series elements and shunt devices, validated
//! into a radial network rooted at the source bus.

use std::collections::{BTreeMap, VecDeque};

use num_complex::Complex64;

use crate::error::NetworkError;
use crate::inverter::InverterFunctionConfig;
use crate::io::feeder_file::{
    BusSpec, CapacitorMode, CapacitorSpec, FeederDescription, LineSpec, LoadSpec, PvSpec,
    RegulatorSpec, FEEDER_SCHEMA,
};
use crate::phase::{Phase, PhaseMatrix, PhaseSet};

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: String,
    pub phases: PhaseSet,
    /// Line-to-neutral base voltage in kV.
    pub base_kv: f64,
    pub v_min_pu: f64,
    pub v_max_pu: f64,
    pub distance_km: Option<f64>,
}

impl Bus {
    pub fn base_volts(&self) -> f64 {
        self.base_kv * 1e3
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSegment {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub phases: PhaseSet,
    /// Total series impedance in ohms, ordered by `phases`.
    pub z: PhaseMatrix,
    pub length_km: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorBank {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub phases: PhaseSet,
    pub setpoint_pu: f64,
    pub bandwidth_pu: f64,
    pub tap_min: i32,
    pub tap_max: i32,
    pub step_pu: f64,
    pub daily_tap_limit: u32,
    pub is_substation_ltc: bool,
    /// Initial tap per phase, indexed by `Phase::index`.
    pub initial_taps: [i32; 3],
}

impl RegulatorBank {
    /// Voltage ratio of the ideal autotransformer at `tap`.
    pub fn ratio(&self, tap: i32) -> f64 {
        1.0 + tap as f64 * self.step_pu
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacitorBank {
    pub id: String,
    pub bus: usize,
    pub phases: PhaseSet,
    /// Rated kVAR per phase, indexed by `Phase::index`.
    pub kvar: [f64; 3],
    pub mode: CapacitorMode,
    pub on_threshold_pu: f64,
    pub off_threshold_pu: f64,
    pub daily_switch_limit: u32,
    pub q_max_node_kvar: f64,
    pub per_phase_switching: bool,
    pub initially_on: bool,
}

impl CapacitorBank {
    pub fn total_kvar(&self) -> f64 {
        self.phases.iter().map(|p| self.kvar[p.index()]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadPoint {
    pub id: String,
    pub bus: usize,
    pub phases: PhaseSet,
    pub kw: [f64; 3],
    pub kvar: [f64; 3],
    pub profile: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PvUnit {
    pub id: String,
    pub bus: usize,
    pub phases: PhaseSet,
    pub p_rated_kw: f64,
    pub s_inverter_kva: f64,
    pub temp_coeff_per_degc: f64,
    pub function: Option<InverterFunctionConfig>,
}

/// A series element of the radial tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Line(usize),
    Regulator(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub name: String,
    pub buses: Vec<Bus>,
    pub lines: Vec<LineSegment>,
    pub regulators: Vec<RegulatorBank>,
    pub capacitors: Vec<CapacitorBank>,
    pub loads: Vec<LoadPoint>,
    pub pv_units: Vec<PvUnit>,
    pub source: usize,
    pub source_pu: f64,
    bus_index: BTreeMap<String, usize>,
    parent: Vec<Option<Branch>>,
    children: Vec<Vec<Branch>>,
    order: Vec<usize>,
}

impl Network {
    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.bus_index.get(id).copied()
    }

    /// Series element feeding `bus` (None for the source).
    pub fn parent_branch(&self, bus: usize) -> Option<Branch> {
        self.parent[bus]
    }

    pub fn child_branches(&self, bus: usize) -> &[Branch] {
        &self.children[bus]
    }

    pub fn branch_ends(&self, b: Branch) -> (usize, usize) {
        match b {
            Branch::Line(i) => (self.lines[i].from, self.lines[i].to),
            Branch::Regulator(i) => (self.regulators[i].from, self.regulators[i].to),
        }
    }

    pub fn branch_phases(&self, b: Branch) -> PhaseSet {
        match b {
            Branch::Line(i) => self.lines[i].phases,
            Branch::Regulator(i) => self.regulators[i].phases,
        }
    }

    pub fn branch_id(&self, b: Branch) -> &str {
        match b {
            Branch::Line(i) => &self.lines[i].id,
            Branch::Regulator(i) => &self.regulators[i].id,
        }
    }

    /// Topological order from the source; children of a bus are visited in
    /// bus-id order (breadth first).
    pub fn downstream_order(&self) -> &[usize] {
        &self.order
    }

    pub fn downstream_ids(&self) -> Vec<&str> {
        self.order.iter().map(|&i| self.buses[i].id.as_str()).collect()
    }

    pub fn line_index(&self, id: &str) -> Option<usize> {
        self.lines.iter().position(|l| l.id == id)
    }

    pub fn regulator_index(&self, id: &str) -> Option<usize> {
        self.regulators.iter().position(|r| r.id == id)
    }

    pub fn initial_taps(&self) -> Vec<[i32; 3]> {
        self.regulators.iter().map(|r| r.initial_taps).collect()
    }

    pub fn initial_cap_states(&self) -> Vec<[bool; 3]> {
        self.capacitors
            .iter()
            .map(|c| {
                let on = c.mode == CapacitorMode::Fixed || c.initially_on;
                let mut s = [false; 3];
                for p in c.phases.iter() {
                    s[p.index()] = on;
                }
                s
            })
            .collect()
    }

    /// Source voltage phasors in volts.
    pub fn source_voltage(&self) -> [Complex64; 3] {
        let bus = &self.buses[self.source];
        let mut v = [Complex64::new(0.0, 0.0); 3];
        for p in bus.phases.iter() {
            v[p.index()] = Complex64::from_polar(self.source_pu * bus.base_volts(), p.nominal_angle());
        }
        v
    }

    /// Reconstructs a description that builds back into this network.
    pub fn to_description(&self) -> FeederDescription {
        let bus_id = |i: usize| self.buses[i].id.clone();
        let per_phase = |set: PhaseSet, arr: &[f64; 3]| set.iter().map(|p| arr[p.index()]).collect();
        FeederDescription {
            schema: FEEDER_SCHEMA.to_string(),
            name: self.name.clone(),
            source_bus: bus_id(self.source),
            source_pu: self.source_pu,
            buses: self
                .buses
                .iter()
                .map(|b| BusSpec {
                    id: b.id.clone(),
                    phases: b.phases,
                    base_kv: b.base_kv,
                    v_min_pu: b.v_min_pu,
                    v_max_pu: b.v_max_pu,
                    distance_km: b.distance_km,
                })
                .collect(),
            lines: self
                .lines
                .iter()
                .map(|l| LineSpec {
                    id: l.id.clone(),
                    from: bus_id(l.from),
                    to: bus_id(l.to),
                    phases: l.phases,
                    length_km: l.length_km,
                    r: l.z.resistance_rows(),
                    x: l.z.reactance_rows(),
                })
                .collect(),
            regulators: self
                .regulators
                .iter()
                .map(|r| RegulatorSpec {
                    id: r.id.clone(),
                    from: bus_id(r.from),
                    to: bus_id(r.to),
                    phases: r.phases,
                    setpoint_pu: r.setpoint_pu,
                    bandwidth_pu: r.bandwidth_pu,
                    tap_min: r.tap_min,
                    tap_max: r.tap_max,
                    step_pu: r.step_pu,
                    daily_tap_limit: r.daily_tap_limit,
                    substation_ltc: r.is_substation_ltc,
                    initial_taps: r.phases.iter().map(|p| r.initial_taps[p.index()]).collect(),
                })
                .collect(),
            capacitors: self
                .capacitors
                .iter()
                .map(|c| CapacitorSpec {
                    id: c.id.clone(),
                    bus: bus_id(c.bus),
                    phases: c.phases,
                    kvar: per_phase(c.phases, &c.kvar),
                    mode: c.mode,
                    on_pu: c.on_threshold_pu,
                    off_pu: c.off_threshold_pu,
                    daily_switch_limit: c.daily_switch_limit,
                    q_max_node_kvar: c.q_max_node_kvar,
                    per_phase_switching: c.per_phase_switching,
                    initially_on: c.initially_on,
                })
                .collect(),
            loads: self
                .loads
                .iter()
                .map(|l| LoadSpec {
                    id: l.id.clone(),
                    bus: bus_id(l.bus),
                    phases: l.phases,
                    kw: per_phase(l.phases, &l.kw),
                    kvar: per_phase(l.phases, &l.kvar),
                    profile: l.profile.clone(),
                })
                .collect(),
            pv_units: self
                .pv_units
                .iter()
                .map(|p| PvSpec {
                    id: p.id.clone(),
                    bus: bus_id(p.bus),
                    phases: p.phases,
                    p_rated_kw: p.p_rated_kw,
                    s_inverter_kva: p.s_inverter_kva,
                    temp_coeff_per_degc: p.temp_coeff_per_degc,
                    function: p.function.clone(),
                })
                .collect(),
        }
    }
}

fn positive(owner: &str, field: &str, v: f64) -> Result<(), NetworkError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(NetworkError::NonPositiveRating {
            owner: owner.to_string(),
            field: field.to_string(),
        })
    }
}

fn invalid(owner: &str, field: &str, detail: impl Into<String>) -> NetworkError {
    NetworkError::InvalidValue {
        owner: owner.to_string(),
        field: field.to_string(),
        detail: detail.into(),
    }
}

fn spread(owner: &str, field: &str, set: PhaseSet, values: &[f64]) -> Result<[f64; 3], NetworkError> {
    if values.len() != set.len() {
        return Err(invalid(
            owner,
            field,
            format!("{} values for {} phases", values.len(), set.len()),
        ));
    }
    let mut out = [0.0; 3];
    for (p, v) in set.iter().zip(values) {
        if !v.is_finite() {
            return Err(invalid(owner, field, "not finite"));
        }
        out[p.index()] = *v;
    }
    Ok(out)
}

struct Builder<'a> {
    desc: &'a FeederDescription,
    index: BTreeMap<String, usize>,
}

impl Builder<'_> {
    fn bus(&self, kind: &str, owner: &str, id: &str) -> Result<usize, NetworkError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| NetworkError::DanglingReference {
                kind: kind.to_string(),
                owner: owner.to_string(),
                bus: id.to_string(),
            })
    }

    fn check_phases(
        &self,
        owner: &str,
        phases: PhaseSet,
        bus: usize,
    ) -> Result<(), NetworkError> {
        if phases.is_empty() {
            return Err(NetworkError::PhaseMismatch {
                owner: owner.to_string(),
                detail: "no phases".into(),
            });
        }
        let b = &self.desc.buses[bus];
        if !phases.is_subset_of(b.phases) {
            return Err(NetworkError::PhaseMismatch {
                owner: owner.to_string(),
                detail: format!("phases {phases} not all present on bus '{}' ({})", b.id, b.phases),
            });
        }
        Ok(())
    }
}

/// Validates a parsed description into a radial network.
pub fn build_network(desc: &FeederDescription) -> Result<Network, NetworkError> {
    let mut index = BTreeMap::new();
    let mut buses = Vec::with_capacity(desc.buses.len());
    for (i, b) in desc.buses.iter().enumerate() {
        if b.phases.is_empty() {
            return Err(NetworkError::PhaseMismatch {
                owner: b.id.clone(),
                detail: "bus has no phases".into(),
            });
        }
        positive(&b.id, "base_kv", b.base_kv)?;
        if !(b.v_min_pu > 0.0 && b.v_min_pu < b.v_max_pu) {
            return Err(invalid(&b.id, "v_min_pu", "need 0 < v_min_pu < v_max_pu"));
        }
        index.insert(b.id.clone(), i);
        buses.push(Bus {
            id: b.id.clone(),
            phases: b.phases,
            base_kv: b.base_kv,
            v_min_pu: b.v_min_pu,
            v_max_pu: b.v_max_pu,
            distance_km: b.distance_km,
        });
    }
    let builder = Builder { desc, index };
    let source = builder.bus("source", "feeder", &desc.source_bus)?;
    positive("feeder", "source_pu", desc.source_pu)?;

    let series_check = |id: &str, from: &str, to: &str, phases: PhaseSet| {
        let f = builder.bus("branch", id, from)?;
        let t = builder.bus("branch", id, to)?;
        if f == t {
            return Err(NetworkError::CycleDetected {
                branch: id.to_string(),
                bus: from.to_string(),
            });
        }
        builder.check_phases(id, phases, f)?;
        builder.check_phases(id, phases, t)?;
        if (buses[f].base_kv - buses[t].base_kv).abs() > 1e-9 * buses[f].base_kv {
            return Err(NetworkError::BaseVoltageMismatch { branch: id.to_string() });
        }
        Ok((f, t))
    };

    let mut lines = Vec::with_capacity(desc.lines.len());
    for l in &desc.lines {
        let (from, to) = series_check(&l.id, &l.from, &l.to, l.phases)?;
        let z = PhaseMatrix::from_parts(&l.r, &l.x)
            .filter(|z| z.dim() == l.phases.len())
            .ok_or_else(|| invalid(&l.id, "r/x", "impedance must be square with one row per phase"))?;
        if !z.is_symmetric(1e-9) {
            return Err(invalid(&l.id, "r/x", "impedance matrix is not symmetric"));
        }
        if !z.is_diagonally_dominant() {
            return Err(invalid(&l.id, "r/x", "impedance matrix is not diagonally dominant"));
        }
        if (0..z.dim()).any(|i| z.get(i, i).re < 0.0) {
            return Err(invalid(&l.id, "r", "negative self resistance"));
        }
        lines.push(LineSegment {
            id: l.id.clone(),
            from,
            to,
            phases: l.phases,
            z,
            length_km: l.length_km,
        });
    }

    let mut regulators = Vec::with_capacity(desc.regulators.len());
    for r in &desc.regulators {
        let (from, to) = series_check(&r.id, &r.from, &r.to, r.phases)?;
        positive(&r.id, "step_pu", r.step_pu)?;
        positive(&r.id, "bandwidth_pu", r.bandwidth_pu)?;
        positive(&r.id, "setpoint_pu", r.setpoint_pu)?;
        if r.tap_min >= r.tap_max || r.tap_min > 0 || r.tap_max < 0 {
            return Err(invalid(&r.id, "tap_min", "need tap_min <= 0 <= tap_max, tap_min < tap_max"));
        }
        if 1.0 + r.tap_min as f64 * r.step_pu <= 0.0 {
            return Err(invalid(&r.id, "tap_min", "ratio at lowest tap must stay positive"));
        }
        let mut initial_taps = [0; 3];
        if !r.initial_taps.is_empty() {
            if r.initial_taps.len() != r.phases.len() {
                return Err(invalid(&r.id, "initial_taps", "one entry per phase required"));
            }
            for (p, t) in r.phases.iter().zip(&r.initial_taps) {
                if *t < r.tap_min || *t > r.tap_max {
                    return Err(invalid(&r.id, "initial_taps", format!("tap {t} out of range")));
                }
                initial_taps[p.index()] = *t;
            }
        }
        regulators.push(RegulatorBank {
            id: r.id.clone(),
            from,
            to,
            phases: r.phases,
            setpoint_pu: r.setpoint_pu,
            bandwidth_pu: r.bandwidth_pu,
            tap_min: r.tap_min,
            tap_max: r.tap_max,
            step_pu: r.step_pu,
            daily_tap_limit: r.daily_tap_limit,
            is_substation_ltc: r.substation_ltc,
            initial_taps,
        });
    }

    let mut capacitors = Vec::with_capacity(desc.capacitors.len());
    for c in &desc.capacitors {
        let bus = builder.bus("capacitor", &c.id, &c.bus)?;
        builder.check_phases(&c.id, c.phases, bus)?;
        let kvar = spread(&c.id, "kvar", c.phases, &c.kvar)?;
        for p in c.phases.iter() {
            positive(&c.id, "kvar", kvar[p.index()])?;
        }
        positive(&c.id, "q_max_node_kvar", c.q_max_node_kvar)?;
        if c.mode == CapacitorMode::Switched && c.on_pu >= c.off_pu {
            return Err(invalid(&c.id, "on_pu", "switch-on threshold must be below switch-off threshold"));
        }
        let bank = CapacitorBank {
            id: c.id.clone(),
            bus,
            phases: c.phases,
            kvar,
            mode: c.mode,
            on_threshold_pu: c.on_pu,
            off_threshold_pu: c.off_pu,
            daily_switch_limit: c.daily_switch_limit,
            q_max_node_kvar: c.q_max_node_kvar,
            per_phase_switching: c.per_phase_switching,
            initially_on: c.initially_on,
        };
        if bank.total_kvar() > bank.q_max_node_kvar {
            return Err(invalid(&c.id, "kvar", "bank rating exceeds the node reactive limit"));
        }
        capacitors.push(bank);
    }
    // Fixed banks are always on; together they must respect every node cap.
    for c in &capacitors {
        let fixed_on_node: f64 = capacitors
            .iter()
            .filter(|o| o.bus == c.bus && o.mode == CapacitorMode::Fixed)
            .map(|o| o.total_kvar())
            .sum();
        if fixed_on_node > c.q_max_node_kvar {
            return Err(invalid(&c.id, "q_max_node_kvar", "fixed banks on this node exceed the cap"));
        }
    }

    let mut loads = Vec::with_capacity(desc.loads.len());
    for l in &desc.loads {
        let bus = builder.bus("load", &l.id, &l.bus)?;
        builder.check_phases(&l.id, l.phases, bus)?;
        let kw = spread(&l.id, "kw", l.phases, &l.kw)?;
        let kvar = spread(&l.id, "kvar", l.phases, &l.kvar)?;
        if kw.iter().any(|v| *v < 0.0) {
            return Err(invalid(&l.id, "kw", "load kW must be non-negative"));
        }
        loads.push(LoadPoint {
            id: l.id.clone(),
            bus,
            phases: l.phases,
            kw,
            kvar,
            profile: l.profile.clone(),
        });
    }

    let mut pv_units = Vec::with_capacity(desc.pv_units.len());
    for p in &desc.pv_units {
        let bus = builder.bus("pv", &p.id, &p.bus)?;
        builder.check_phases(&p.id, p.phases, bus)?;
        positive(&p.id, "p_rated_kw", p.p_rated_kw)?;
        positive(&p.id, "s_inverter_kva", p.s_inverter_kva)?;
        if let Some(f) = &p.function {
            f.validate().map_err(|e| invalid(&p.id, "function", e.to_string()))?;
        }
        pv_units.push(PvUnit {
            id: p.id.clone(),
            bus,
            phases: p.phases,
            p_rated_kw: p.p_rated_kw,
            s_inverter_kva: p.s_inverter_kva,
            temp_coeff_per_degc: p.temp_coeff_per_degc,
            function: p.function.clone(),
        });
    }

    let (parent, children, order) = orient_tree(&buses, source, &mut lines, &regulators)?;

    Ok(Network {
        name: desc.name.clone(),
        buses,
        lines,
        regulators,
        capacitors,
        loads,
        pv_units,
        source,
        source_pu: desc.source_pu,
        bus_index: builder.index,
        parent,
        children,
        order,
    })
}

type Tree = (Vec<Option<Branch>>, Vec<Vec<Branch>>, Vec<usize>);

/// Checks radiality with a union-find pass, then orients every branch away
/// from the source. Lines found pointing upstream are flipped; a regulator
/// pointing upstream is rejected.
fn orient_tree(
    buses: &[Bus],
    source: usize,
    lines: &mut [LineSegment],
    regulators: &[RegulatorBank],
) -> Result<Tree, NetworkError> {
    let n = buses.len();
    let mut uf: Vec<usize> = (0..n).collect();
    fn find(uf: &mut [usize], mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    let mut edges: Vec<(Branch, usize, usize)> = Vec::new();
    edges.extend(lines.iter().enumerate().map(|(i, l)| (Branch::Line(i), l.from, l.to)));
    edges.extend(regulators.iter().enumerate().map(|(i, r)| (Branch::Regulator(i), r.from, r.to)));
    let mut adjacency: Vec<Vec<(Branch, usize)>> = vec![Vec::new(); n];
    for &(b, f, t) in &edges {
        let (rf, rt) = (find(&mut uf, f), find(&mut uf, t));
        if rf == rt {
            let id = match b {
                Branch::Line(i) => lines[i].id.clone(),
                Branch::Regulator(i) => regulators[i].id.clone(),
            };
            return Err(NetworkError::CycleDetected {
                branch: id,
                bus: buses[t].id.clone(),
            });
        }
        uf[rf] = rt;
        adjacency[f].push((b, t));
        adjacency[t].push((b, f));
    }

    let mut parent = vec![None; n];
    let mut children: Vec<Vec<Branch>> = vec![Vec::new(); n];
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([source]);
    visited[source] = true;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        let mut next: Vec<(Branch, usize)> =
            adjacency[u].iter().copied().filter(|(_, v)| !visited[*v]).collect();
        next.sort_by(|a, b| buses[a.1].id.cmp(&buses[b.1].id));
        for (b, v) in next {
            match b {
                Branch::Line(i) => {
                    if lines[i].from != u {
                        lines[i].from = u;
                        lines[i].to = v;
                    }
                }
                Branch::Regulator(i) => {
                    if regulators[i].from != u {
                        return Err(invalid(
                            &regulators[i].id,
                            "from",
                            "regulator is oriented towards the source",
                        ));
                    }
                }
            }
            visited[v] = true;
            parent[v] = Some(b);
            children[u].push(b);
            queue.push_back(v);
        }
    }
    if let Some(i) = visited.iter().position(|v| !v) {
        return Err(NetworkError::Disconnected { bus: buses[i].id.clone() });
    }
    Ok((parent, children, order))
}

/// Convenience accessor used by the solvers: phase letter and the position of
/// that phase inside a branch's impedance matrix.
pub fn phase_positions(set: PhaseSet) -> impl Iterator<Item = (usize, Phase)> {
    set.iter().enumerate()
}
