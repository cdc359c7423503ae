//! Smart-inverter control functions as discrete-time state machines.
//!
//! Every function maps (terminal voltage, available DC power, frequency,
//! controller memory) to an (active, reactive) output pair that respects the
//! inverter's apparent-power rating. Reactive power is positive when the
//! inverter injects (capacitive) and negative when it absorbs.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::InverterError;

/// Ordered `(x, y)` breakpoints with strictly increasing `x`.
/// Evaluation interpolates linearly and holds the end values outside the
/// breakpoint range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct PiecewiseLinearCurve {
    points: Vec<(f64, f64)>,
}

impl PiecewiseLinearCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, InverterError> {
        if points.len() < 2 {
            return Err(InverterError::InvalidCurve("at least two breakpoints required".into()));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(InverterError::InvalidCurve("breakpoints must be finite".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(InverterError::InvalidCurve("x values must be strictly increasing".into()));
        }
        Ok(PiecewiseLinearCurve { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let pts = &self.points;
        let first = pts[0];
        let last = pts[pts.len() - 1];
        if x <= first.0 {
            return first.1;
        }
        if x >= last.0 {
            return last.1;
        }
        let i = pts.partition_point(|(px, _)| *px < x);
        let (x1, y1) = pts[i];
        if x1 == x {
            return y1;
        }
        let (x0, y0) = pts[i - 1];
        let t = (x - x0) / (x1 - x0);
        y0 + t * (y1 - y0)
    }

    /// Same shape moved along the x axis by `dx`.
    pub fn shifted(&self, dx: f64) -> Self {
        PiecewiseLinearCurve {
            points: self.points.iter().map(|(x, y)| (x + dx, *y)).collect(),
        }
    }

    /// Volt-VAR default in (pu V, fraction of inverter kVA).
    pub fn default_volt_var() -> Self {
        Self::new(vec![(0.92, 0.44), (0.98, 0.0), (1.02, 0.0), (1.08, -0.44)]).unwrap()
    }

    /// Volt-Watt default in (pu V, fraction of rated kW).
    pub fn default_volt_watt() -> Self {
        Self::new(vec![(1.03, 1.0), (1.06, 0.0)]).unwrap()
    }

    /// Frequency-Watt default in (Hz, fraction of rated kW).
    pub fn default_freq_watt() -> Self {
        Self::new(vec![(60.02, 1.0), (60.5, 0.0)]).unwrap()
    }

    /// Watt-PF default in (fraction of rated kW, power factor).
    pub fn default_watt_pf() -> Self {
        Self::new(vec![(0.5, 1.0), (1.0, 0.9)]).unwrap()
    }
}

impl TryFrom<Vec<(f64, f64)>> for PiecewiseLinearCurve {
    type Error = InverterError;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        Self::new(points)
    }
}

impl From<PiecewiseLinearCurve> for Vec<(f64, f64)> {
    fn from(c: PiecewiseLinearCurve) -> Self {
        c.points
    }
}

/// Free-function form of [`PiecewiseLinearCurve::evaluate`].
pub fn evaluate_curve(curve: &PiecewiseLinearCurve, x: f64) -> f64 {
    curve.evaluate(x)
}

/// Which quantity keeps its value when the kVA rating binds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KvaPrecedence {
    WattPriority,
    VarPriority,
}

fn watt_priority() -> KvaPrecedence {
    KvaPrecedence::WattPriority
}
fn var_priority() -> KvaPrecedence {
    KvaPrecedence::VarPriority
}
fn vv_curve() -> PiecewiseLinearCurve {
    PiecewiseLinearCurve::default_volt_var()
}
fn vv_down_curve() -> PiecewiseLinearCurve {
    PiecewiseLinearCurve::default_volt_var().shifted(-DEFAULT_HYSTERESIS_OFFSET_PU)
}
fn vw_curve() -> PiecewiseLinearCurve {
    PiecewiseLinearCurve::default_volt_watt()
}
fn fw_curve() -> PiecewiseLinearCurve {
    PiecewiseLinearCurve::default_freq_watt()
}
fn wpf_curve() -> PiecewiseLinearCurve {
    PiecewiseLinearCurve::default_watt_pf()
}
fn tau_adapt() -> f64 {
    600.0
}
fn tau_lpf() -> f64 {
    300.0
}
fn ramp() -> f64 {
    0.10
}
fn gen_limit() -> f64 {
    0.80
}
fn k_q() -> f64 {
    2.0
}
fn deadband() -> f64 {
    0.02
}
fn window() -> f64 {
    10.0
}

pub const DEFAULT_HYSTERESIS_OFFSET_PU: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InverterFunctionConfig {
    ConstantPf {
        pf: f64,
        #[serde(default = "watt_priority")]
        precedence: KvaPrecedence,
    },
    VoltVar {
        #[serde(default = "vv_curve")]
        curve: PiecewiseLinearCurve,
        #[serde(default = "var_priority")]
        precedence: KvaPrecedence,
    },
    VoltVarHysteresis {
        /// Followed while the voltage pushes reactive output down.
        #[serde(default = "vv_curve")]
        up_curve: PiecewiseLinearCurve,
        /// Followed on the way back; shifted towards lower voltage.
        #[serde(default = "vv_down_curve")]
        down_curve: PiecewiseLinearCurve,
        #[serde(default = "var_priority")]
        precedence: KvaPrecedence,
    },
    VoltVarAdaptive {
        #[serde(default = "vv_curve")]
        curve: PiecewiseLinearCurve,
        #[serde(default = "tau_adapt")]
        tau_adapt_s: f64,
        #[serde(default = "var_priority")]
        precedence: KvaPrecedence,
    },
    VoltVarLpf {
        #[serde(default = "vv_curve")]
        curve: PiecewiseLinearCurve,
        #[serde(default = "tau_lpf")]
        tau_lpf_s: f64,
        #[serde(default = "var_priority")]
        precedence: KvaPrecedence,
    },
    VoltWatt {
        #[serde(default = "vw_curve")]
        curve: PiecewiseLinearCurve,
    },
    VoltWattRateLimit {
        #[serde(default = "vw_curve")]
        curve: PiecewiseLinearCurve,
        /// Fraction of rated power per minute.
        #[serde(default = "ramp")]
        r_up_per_min: f64,
        #[serde(default = "ramp")]
        r_down_per_min: f64,
    },
    FreqWatt {
        #[serde(default = "fw_curve")]
        curve: PiecewiseLinearCurve,
        #[serde(default)]
        storage: bool,
    },
    MaxGenLimit {
        #[serde(default = "gen_limit")]
        fraction: f64,
    },
    DynReactiveCurrent {
        /// Per-unit reactive current per per-unit voltage deviation.
        #[serde(default = "k_q")]
        k_q: f64,
        #[serde(default = "deadband")]
        deadband_pu: f64,
        #[serde(default = "window")]
        window_min: f64,
        #[serde(default = "var_priority")]
        precedence: KvaPrecedence,
    },
    WattPf {
        #[serde(default = "wpf_curve")]
        curve: PiecewiseLinearCurve,
        #[serde(default = "watt_priority")]
        precedence: KvaPrecedence,
    },
}

impl InverterFunctionConfig {
    pub fn constant_pf(pf: f64) -> Self {
        InverterFunctionConfig::ConstantPf {
            pf,
            precedence: KvaPrecedence::WattPriority,
        }
    }

    pub fn volt_var() -> Self {
        InverterFunctionConfig::VoltVar {
            curve: vv_curve(),
            precedence: var_priority(),
        }
    }

    pub fn volt_var_hysteresis() -> Self {
        InverterFunctionConfig::VoltVarHysteresis {
            up_curve: vv_curve(),
            down_curve: vv_down_curve(),
            precedence: var_priority(),
        }
    }

    pub fn volt_var_adaptive() -> Self {
        InverterFunctionConfig::VoltVarAdaptive {
            curve: vv_curve(),
            tau_adapt_s: tau_adapt(),
            precedence: var_priority(),
        }
    }

    pub fn volt_var_lpf() -> Self {
        InverterFunctionConfig::VoltVarLpf {
            curve: vv_curve(),
            tau_lpf_s: tau_lpf(),
            precedence: var_priority(),
        }
    }

    pub fn volt_watt() -> Self {
        InverterFunctionConfig::VoltWatt { curve: vw_curve() }
    }

    pub fn volt_watt_rate_limit() -> Self {
        InverterFunctionConfig::VoltWattRateLimit {
            curve: vw_curve(),
            r_up_per_min: ramp(),
            r_down_per_min: ramp(),
        }
    }

    pub fn max_gen_limit(fraction: f64) -> Self {
        InverterFunctionConfig::MaxGenLimit { fraction }
    }

    pub fn dyn_reactive_current() -> Self {
        InverterFunctionConfig::DynReactiveCurrent {
            k_q: k_q(),
            deadband_pu: deadband(),
            window_min: window(),
            precedence: var_priority(),
        }
    }

    /// The nine functions compared in the sweep, with their default settings.
    pub fn study_set() -> Vec<InverterFunctionConfig> {
        vec![
            Self::volt_watt(),
            Self::volt_watt_rate_limit(),
            Self::volt_var(),
            Self::volt_var_adaptive(),
            Self::volt_var_hysteresis(),
            Self::volt_var_lpf(),
            Self::max_gen_limit(0.80),
            Self::constant_pf(0.8),
            Self::dyn_reactive_current(),
        ]
    }

    /// Short stable identifier used for file and directory names.
    pub fn tag(&self) -> &'static str {
        match self {
            InverterFunctionConfig::ConstantPf { .. } => "constant_pf",
            InverterFunctionConfig::VoltVar { .. } => "volt_var",
            InverterFunctionConfig::VoltVarHysteresis { .. } => "volt_var_hysteresis",
            InverterFunctionConfig::VoltVarAdaptive { .. } => "volt_var_adaptive",
            InverterFunctionConfig::VoltVarLpf { .. } => "volt_var_lpf",
            InverterFunctionConfig::VoltWatt { .. } => "volt_watt",
            InverterFunctionConfig::VoltWattRateLimit { .. } => "volt_watt_rate_limit",
            InverterFunctionConfig::FreqWatt { .. } => "freq_watt",
            InverterFunctionConfig::MaxGenLimit { .. } => "max_gen_limit",
            InverterFunctionConfig::DynReactiveCurrent { .. } => "dyn_reactive_current",
            InverterFunctionConfig::WattPf { .. } => "watt_pf",
        }
    }

    /// Tag plus the distinguishing parameter, e.g. `constant_pf_0.8`.
    pub fn label(&self) -> String {
        match self {
            InverterFunctionConfig::ConstantPf { pf, .. } => format!("constant_pf_{pf}"),
            InverterFunctionConfig::MaxGenLimit { fraction } => format!("max_gen_limit_{fraction}"),
            other => other.tag().to_string(),
        }
    }

    /// True when the output depends only on the present inputs.
    pub fn is_stateless(&self) -> bool {
        matches!(
            self,
            InverterFunctionConfig::ConstantPf { .. }
                | InverterFunctionConfig::MaxGenLimit { .. }
                | InverterFunctionConfig::WattPf { .. }
                | InverterFunctionConfig::VoltVar { .. }
                | InverterFunctionConfig::VoltWatt { .. }
                | InverterFunctionConfig::FreqWatt { .. }
        )
    }

    pub fn validate(&self) -> Result<(), InverterError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(InverterError::InvalidParameter {
                    name: name.into(),
                    detail: format!("must be positive, got {v}"),
                })
            }
        };
        match self {
            InverterFunctionConfig::ConstantPf { pf, .. } => check_pf(*pf),
            InverterFunctionConfig::VoltVarAdaptive { tau_adapt_s, .. } => positive("tau_adapt_s", *tau_adapt_s),
            InverterFunctionConfig::VoltVarLpf { tau_lpf_s, .. } => positive("tau_lpf_s", *tau_lpf_s),
            InverterFunctionConfig::VoltWattRateLimit {
                r_up_per_min,
                r_down_per_min,
                ..
            } => {
                positive("r_up_per_min", *r_up_per_min)?;
                positive("r_down_per_min", *r_down_per_min)
            }
            InverterFunctionConfig::MaxGenLimit { fraction } => {
                if (0.0..=1.0).contains(fraction) {
                    Ok(())
                } else {
                    Err(InverterError::InvalidParameter {
                        name: "fraction".into(),
                        detail: format!("must lie in [0, 1], got {fraction}"),
                    })
                }
            }
            InverterFunctionConfig::DynReactiveCurrent {
                k_q,
                deadband_pu,
                window_min,
                ..
            } => {
                positive("k_q", *k_q)?;
                positive("window_min", *window_min)?;
                if *deadband_pu < 0.0 {
                    return Err(InverterError::InvalidParameter {
                        name: "deadband_pu".into(),
                        detail: "must be non-negative".into(),
                    });
                }
                Ok(())
            }
            InverterFunctionConfig::WattPf { curve, .. } => {
                for (_, pf) in curve.points() {
                    check_pf(*pf)?;
                }
                // A sign change between breakpoints crosses zero.
                if curve.points().windows(2).any(|w| w[0].1 * w[1].1 < 0.0) {
                    return Err(InverterError::ZeroPowerFactor);
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn check_pf(pf: f64) -> Result<(), InverterError> {
    if pf == 0.0 {
        return Err(InverterError::ZeroPowerFactor);
    }
    if !(-1.0..=1.0).contains(&pf) {
        return Err(InverterError::InvalidParameter {
            name: "pf".into(),
            detail: format!("must lie in [-1, 1], got {pf}"),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HysteresisBranch {
    Rising,
    Falling,
}

/// Controller memory carried between timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct InverterState {
    pub q_prev: f64,
    pub p_prev: f64,
    pub v_avg: f64,
    pub v_ref_adaptive: f64,
    pub hysteresis_branch: HysteresisBranch,
    /// Last hysteresis output as a fraction of inverter kVA.
    pub q_hysteresis: f64,
    pub v_prev: f64,
    /// Recent terminal voltages for the moving average (oldest first).
    pub v_history: VecDeque<f64>,
    pub initialized: bool,
}

impl Default for InverterState {
    fn default() -> Self {
        InverterState {
            q_prev: 0.0,
            p_prev: 0.0,
            v_avg: 1.0,
            v_ref_adaptive: 1.0,
            hysteresis_branch: HysteresisBranch::Rising,
            q_hysteresis: 0.0,
            v_prev: 1.0,
            v_history: VecDeque::new(),
            initialized: false,
        }
    }
}

impl InverterState {
    /// Fills the voltage memories with the first observed voltage.
    fn primed(&self, v_pu: f64) -> InverterState {
        let mut s = self.clone();
        if !s.initialized {
            s.v_avg = v_pu;
            s.v_ref_adaptive = v_pu;
            s.v_prev = v_pu;
            s.initialized = true;
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverterRating {
    pub p_rated_kw: f64,
    pub s_rated_kva: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverterInputs {
    pub v_pu: f64,
    pub p_avail_kw: f64,
    pub freq_hz: f64,
    pub dt_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InverterOutput {
    pub p_kw: f64,
    pub q_kvar: f64,
}

/// Available PV power with a linear temperature derating, capped at rating.
pub fn pv_available_power(irradiance_w_m2: f64, temp_c: f64, p_rated_kw: f64, temp_coeff: f64) -> f64 {
    let g = irradiance_w_m2.max(0.0);
    let derate = (1.0 + temp_coeff * (temp_c - 25.0)).max(0.0);
    (p_rated_kw * (g / 1000.0) * derate).min(p_rated_kw)
}

/// Pulls `(p, q)` onto the kVA circle when it lies outside.
pub fn apply_kva_limit(p: f64, q: f64, s_rated: f64, precedence: KvaPrecedence) -> (f64, f64) {
    if p.hypot(q) <= s_rated {
        return (p, q);
    }
    match precedence {
        KvaPrecedence::WattPriority => {
            let p = p.clamp(-s_rated, s_rated);
            let q_room = (s_rated * s_rated - p * p).max(0.0).sqrt();
            (p, q.clamp(-q_room, q_room))
        }
        KvaPrecedence::VarPriority => {
            let q = q.clamp(-s_rated, s_rated);
            let p_room = (s_rated * s_rated - q * q).max(0.0).sqrt();
            (p.clamp(-p_room, p_room), q)
        }
    }
}

/// Fixed power factor. Positive `pf` injects vars, negative absorbs.
///
/// With var priority the power factor itself is held when the rating binds,
/// so both P and Q shrink along the PF line.
pub fn step_constant_pf(
    p_avail: f64,
    pf: f64,
    s_rated: f64,
    precedence: KvaPrecedence,
) -> Result<(f64, f64), InverterError> {
    check_pf(pf)?;
    let p = p_avail.max(0.0);
    let q = p * pf.abs().acos().tan() * pf.signum();
    let s = p.hypot(q);
    if s <= s_rated {
        return Ok((p, q));
    }
    Ok(match precedence {
        KvaPrecedence::WattPriority => apply_kva_limit(p, q, s_rated, precedence),
        KvaPrecedence::VarPriority => (p * s_rated / s, q * s_rated / s),
    })
}

pub fn step_max_gen_limit(p_avail: f64, limit_fraction: f64, p_rated: f64) -> (f64, f64) {
    (p_avail.max(0.0).min(limit_fraction * p_rated), 0.0)
}

pub fn step_watt_pf(
    p_avail: f64,
    curve: &PiecewiseLinearCurve,
    rating: InverterRating,
    precedence: KvaPrecedence,
) -> Result<(f64, f64), InverterError> {
    let pf = curve.evaluate(p_avail / rating.p_rated_kw);
    step_constant_pf(p_avail, pf, rating.s_rated_kva, precedence)
}

/// Volt-VAR family: plain, hysteresis, adaptive set-point and low-pass filtered.
pub fn step_volt_var(
    inputs: InverterInputs,
    rating: InverterRating,
    config: &InverterFunctionConfig,
    state: &InverterState,
) -> (InverterOutput, InverterState) {
    let v = inputs.v_pu;
    let mut next = state.primed(v);
    let s = rating.s_rated_kva;
    let p = inputs.p_avail_kw.max(0.0);
    let (q, precedence) = match config {
        InverterFunctionConfig::VoltVar { curve, precedence } => (curve.evaluate(v) * s, *precedence),
        InverterFunctionConfig::VoltVarHysteresis {
            up_curve,
            down_curve,
            precedence,
        } => {
            let a = up_curve.evaluate(v);
            let b = down_curve.evaluate(v);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let q_frac = next.q_hysteresis.clamp(lo, hi);
            if v > next.v_prev {
                next.hysteresis_branch = HysteresisBranch::Rising;
            } else if v < next.v_prev {
                next.hysteresis_branch = HysteresisBranch::Falling;
            }
            next.q_hysteresis = q_frac;
            (q_frac * s, *precedence)
        }
        InverterFunctionConfig::VoltVarAdaptive {
            curve,
            tau_adapt_s,
            precedence,
        } => {
            let alpha = (inputs.dt_s / tau_adapt_s).min(1.0);
            next.v_ref_adaptive += alpha * (v - next.v_ref_adaptive);
            (curve.evaluate(v - next.v_ref_adaptive + 1.0) * s, *precedence)
        }
        InverterFunctionConfig::VoltVarLpf {
            curve,
            tau_lpf_s,
            precedence,
        } => {
            let target = curve.evaluate(v) * s;
            let alpha = (inputs.dt_s / tau_lpf_s).min(1.0);
            (state.q_prev + alpha * (target - state.q_prev), *precedence)
        }
        other => panic!("step_volt_var called with {}", other.tag()),
    };
    let (p, q) = apply_kva_limit(p, q, s, precedence);
    next.v_prev = v;
    next.p_prev = p;
    next.q_prev = q;
    (InverterOutput { p_kw: p, q_kvar: q }, next)
}

/// Volt-Watt curtailment, optionally with a rise/fall rate limit.
pub fn step_volt_watt(
    inputs: InverterInputs,
    rating: InverterRating,
    config: &InverterFunctionConfig,
    state: &InverterState,
) -> (InverterOutput, InverterState) {
    let mut next = state.primed(inputs.v_pu);
    let p_avail = inputs.p_avail_kw.max(0.0);
    let (curve, ramp) = match config {
        InverterFunctionConfig::VoltWatt { curve } => (curve, None),
        InverterFunctionConfig::VoltWattRateLimit {
            curve,
            r_up_per_min,
            r_down_per_min,
        } => (curve, Some((*r_up_per_min, *r_down_per_min))),
        other => panic!("step_volt_watt called with {}", other.tag()),
    };
    let p_cap = curve.evaluate(inputs.v_pu) * rating.p_rated_kw;
    let mut p = p_avail.min(p_cap);
    if let Some((up, down)) = ramp {
        let dt_min = inputs.dt_s / 60.0;
        let lo = state.p_prev - down * rating.p_rated_kw * dt_min;
        let hi = state.p_prev + up * rating.p_rated_kw * dt_min;
        // Availability wins over the fall limit: output cannot exceed the
        // power the array is producing.
        p = p.clamp(lo, hi).min(p_avail);
    }
    let (p, q) = apply_kva_limit(p.max(0.0), 0.0, rating.s_rated_kva, KvaPrecedence::WattPriority);
    next.v_prev = inputs.v_pu;
    next.p_prev = p;
    next.q_prev = q;
    (InverterOutput { p_kw: p, q_kvar: q }, next)
}

pub fn step_freq_watt(
    inputs: InverterInputs,
    rating: InverterRating,
    curve: &PiecewiseLinearCurve,
    storage: bool,
    state: &InverterState,
) -> (InverterOutput, InverterState) {
    let mut next = state.primed(inputs.v_pu);
    let target = curve.evaluate(inputs.freq_hz) * rating.p_rated_kw;
    let mut p = inputs.p_avail_kw.max(0.0).min(target);
    if !storage {
        p = p.max(0.0);
    }
    let (p, q) = apply_kva_limit(p, 0.0, rating.s_rated_kva, KvaPrecedence::WattPriority);
    next.p_prev = p;
    next.q_prev = q;
    (InverterOutput { p_kw: p, q_kvar: q }, next)
}

/// Reactive current proportional to the deviation of the terminal voltage
/// from its recent moving average, outside a dead-band.
pub fn step_dyn_reactive_current(
    inputs: InverterInputs,
    rating: InverterRating,
    k_q: f64,
    deadband_pu: f64,
    window_min: f64,
    precedence: KvaPrecedence,
    state: &InverterState,
) -> (InverterOutput, InverterState) {
    let v = inputs.v_pu;
    let mut next = state.primed(v);
    let v_avg = if next.v_history.is_empty() {
        next.v_avg
    } else {
        next.v_history.iter().sum::<f64>() / next.v_history.len() as f64
    };
    let dv = v - v_avg;
    let iq = if dv.abs() <= deadband_pu {
        0.0
    } else {
        -k_q * (dv - deadband_pu * dv.signum())
    };
    let q = iq * v * rating.s_rated_kva;
    let (p, q) = apply_kva_limit(inputs.p_avail_kw.max(0.0), q, rating.s_rated_kva, precedence);

    let samples = ((window_min * 60.0 / inputs.dt_s).round() as usize).max(1);
    next.v_history.push_back(v);
    while next.v_history.len() > samples {
        next.v_history.pop_front();
    }
    next.v_avg = next.v_history.iter().sum::<f64>() / next.v_history.len() as f64;
    next.v_prev = v;
    next.p_prev = p;
    next.q_prev = q;
    (InverterOutput { p_kw: p, q_kvar: q }, next)
}

/// Dispatches to the configured function.
pub fn step(
    config: &InverterFunctionConfig,
    rating: InverterRating,
    inputs: InverterInputs,
    state: &InverterState,
) -> Result<(InverterOutput, InverterState), InverterError> {
    let stateless = |p: f64, q: f64| {
        let mut next = state.primed(inputs.v_pu);
        next.v_prev = inputs.v_pu;
        next.p_prev = p;
        next.q_prev = q;
        (InverterOutput { p_kw: p, q_kvar: q }, next)
    };
    Ok(match config {
        InverterFunctionConfig::ConstantPf { pf, precedence } => {
            let (p, q) = step_constant_pf(inputs.p_avail_kw, *pf, rating.s_rated_kva, *precedence)?;
            stateless(p, q)
        }
        InverterFunctionConfig::WattPf { curve, precedence } => {
            let (p, q) = step_watt_pf(inputs.p_avail_kw, curve, rating, *precedence)?;
            stateless(p, q)
        }
        InverterFunctionConfig::MaxGenLimit { fraction } => {
            let (p, q) = step_max_gen_limit(inputs.p_avail_kw, *fraction, rating.p_rated_kw);
            let (p, q) = apply_kva_limit(p, q, rating.s_rated_kva, KvaPrecedence::WattPriority);
            stateless(p, q)
        }
        InverterFunctionConfig::VoltVar { .. }
        | InverterFunctionConfig::VoltVarHysteresis { .. }
        | InverterFunctionConfig::VoltVarAdaptive { .. }
        | InverterFunctionConfig::VoltVarLpf { .. } => step_volt_var(inputs, rating, config, state),
        InverterFunctionConfig::VoltWatt { .. } | InverterFunctionConfig::VoltWattRateLimit { .. } => {
            step_volt_watt(inputs, rating, config, state)
        }
        InverterFunctionConfig::FreqWatt { curve, storage } => {
            step_freq_watt(inputs, rating, curve, *storage, state)
        }
        InverterFunctionConfig::DynReactiveCurrent {
            k_q,
            deadband_pu,
            window_min,
            precedence,
        } => step_dyn_reactive_current(inputs, rating, *k_q, *deadband_pu, *window_min, *precedence, state),
    })
}
