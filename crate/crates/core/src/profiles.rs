//! Uniformly sampled input series and the bundled synthetic day generator.
//!
//! The synthetic cloudy day is a clear-sky bell with square-wave cloud
//! passages of random length and depth plus a little multiplicative noise,
//! drawn from a ChaCha stream so that a seed fixes the whole day.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ProfileError;

pub const DEFAULT_SEED: u64 = 8500;
pub const DAY_S: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub name: String,
    pub dt_s: f64,
    pub values: Vec<f64>,
}

impl Profile {
    pub fn new(name: impl Into<String>, dt_s: f64, values: Vec<f64>) -> Result<Self, ProfileError> {
        let name = name.into();
        if !(dt_s > 0.0 && dt_s.is_finite()) {
            return Err(ProfileError::Invalid {
                name,
                detail: format!("time step must be positive, got {dt_s}"),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ProfileError::Invalid {
                name,
                detail: format!("sample {i} is not finite"),
            });
        }
        Ok(Profile { name, dt_s, values })
    }

    pub fn constant(name: impl Into<String>, dt_s: f64, value: f64, len: usize) -> Self {
        Profile {
            name: name.into(),
            dt_s,
            values: vec![value; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, t: usize) -> f64 {
        self.values[t]
    }

    /// Checks that the series covers `steps` samples at `dt_s`.
    pub fn check_covers(&self, dt_s: f64, steps: usize) -> Result<(), ProfileError> {
        if (self.dt_s - dt_s).abs() > 1e-9 * dt_s {
            return Err(ProfileError::Invalid {
                name: self.name.clone(),
                detail: format!("time step {} s does not match scenario step {} s", self.dt_s, dt_s),
            });
        }
        if self.values.len() < steps {
            return Err(ProfileError::TooShort {
                name: self.name.clone(),
                have: self.values.len(),
                need: steps,
            });
        }
        Ok(())
    }
}

/// All time series a scenario needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    /// Plane-of-array irradiance, W/m².
    pub irradiance: Profile,
    /// Module temperature, °C.
    pub temperature: Profile,
    /// System frequency, Hz; nominal 60 Hz when absent.
    pub frequency: Option<Profile>,
    /// Load multipliers keyed by profile name; `default` applies to any load
    /// whose profile name is not present.
    pub loads: BTreeMap<String, Profile>,
}

impl ProfileSet {
    pub fn load_multiplier(&self, name: &str, t: usize) -> f64 {
        self.loads
            .get(name)
            .or_else(|| self.loads.get("default"))
            .map(|p| p.at(t))
            .unwrap_or(1.0)
    }

    pub fn frequency_at(&self, t: usize) -> f64 {
        self.frequency.as_ref().map(|p| p.at(t)).unwrap_or(60.0)
    }

    pub fn check_covers(&self, dt_s: f64, steps: usize) -> Result<(), ProfileError> {
        self.irradiance.check_covers(dt_s, steps)?;
        self.temperature.check_covers(dt_s, steps)?;
        if let Some(f) = &self.frequency {
            f.check_covers(dt_s, steps)?;
        }
        for p in self.loads.values() {
            p.check_covers(dt_s, steps)?;
        }
        Ok(())
    }

    /// Flat conditions: constant irradiance, 25 °C and unit load multiplier.
    pub fn flat(dt_s: f64, steps: usize, irradiance: f64) -> Self {
        ProfileSet {
            irradiance: Profile::constant("irradiance", dt_s, irradiance, steps),
            temperature: Profile::constant("temperature", dt_s, 25.0, steps),
            frequency: None,
            loads: BTreeMap::from([("default".to_string(), Profile::constant("default", dt_s, 1.0, steps))]),
        }
    }
}

fn hours(t: usize, dt_s: f64) -> f64 {
    (t as f64 * dt_s / 3600.0) % 24.0
}

const SUNRISE_H: f64 = 6.5;
const SUNSET_H: f64 = 19.0;
const CLOUDY_FROM_H: f64 = 9.0;
const CLOUDY_TO_H: f64 = 16.0;

fn clear_sky(h: f64) -> f64 {
    if h <= SUNRISE_H || h >= SUNSET_H {
        return 0.0;
    }
    let x = (h - SUNRISE_H) / (SUNSET_H - SUNRISE_H);
    1000.0 * (PI * x).sin().powf(1.2)
}

/// Cloudy-day irradiance: clear-sky envelope cut by square-wave clouds.
pub fn synthetic_irradiance(seed: u64, dt_s: f64, steps: usize) -> Profile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(steps);
    let mut cloud_left_s = 0.0;
    let mut clear_left_s = rng.gen_range(120.0..480.0);
    let mut depth = 1.0;
    for t in 0..steps {
        let h = hours(t, dt_s);
        let mut g = clear_sky(h);
        if (CLOUDY_FROM_H..CLOUDY_TO_H).contains(&h) {
            if cloud_left_s > 0.0 {
                g *= depth;
                cloud_left_s -= dt_s;
                if cloud_left_s <= 0.0 {
                    clear_left_s = rng.gen_range(120.0..480.0);
                }
            } else {
                clear_left_s -= dt_s;
                if clear_left_s <= 0.0 {
                    cloud_left_s = rng.gen_range(60.0..240.0);
                    depth = rng.gen_range(0.15..0.4);
                }
            }
        }
        let noise = 1.0 + 0.02 * (rng.gen::<f64>() - 0.5);
        values.push((g * noise).max(0.0));
    }
    Profile {
        name: "irradiance".into(),
        dt_s,
        values,
    }
}

/// Module temperature: 18 °C overnight rising to about 45 °C mid-afternoon.
pub fn synthetic_temperature(dt_s: f64, steps: usize) -> Profile {
    let values = (0..steps)
        .map(|t| {
            let h = hours(t, dt_s);
            let x = ((h - 7.0) / 13.0).clamp(0.0, 1.0);
            18.0 + 27.0 * (PI * x).sin().powi(2)
        })
        .collect();
    Profile {
        name: "temperature".into(),
        dt_s,
        values,
    }
}

/// Residential-style load multiplier with morning and evening peaks.
pub fn synthetic_load(seed: u64, dt_s: f64, steps: usize) -> Profile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_10ad);
    let bump = |h: f64, centre: f64, width: f64| (-((h - centre) / width).powi(2)).exp();
    let values = (0..steps)
        .map(|t| {
            let h = hours(t, dt_s);
            let base = 0.45 + 0.25 * bump(h, 8.0, 1.8) + 0.25 * bump(h, 13.5, 3.0) + 0.5 * bump(h, 19.0, 2.2);
            base * (1.0 + 0.01 * (rng.gen::<f64>() - 0.5))
        })
        .collect();
    Profile {
        name: "default".into(),
        dt_s,
        values,
    }
}

/// Irradiance switching between zero and `peak` every `period_steps`.
pub fn oscillating_irradiance(dt_s: f64, steps: usize, period_steps: usize, peak: f64) -> Profile {
    let period = period_steps.max(1);
    let values = (0..steps).map(|t| if (t / period).is_multiple_of(2) { peak } else { 0.0 }).collect();
    Profile {
        name: "irradiance".into(),
        dt_s,
        values,
    }
}

/// Complete synthetic day for the bundled scenarios.
pub fn synthetic_day(seed: u64, dt_s: f64) -> ProfileSet {
    let steps = (DAY_S / dt_s).round() as usize;
    ProfileSet {
        irradiance: synthetic_irradiance(seed, dt_s, steps),
        temperature: synthetic_temperature(dt_s, steps),
        frequency: None,
        loads: BTreeMap::from([("default".to_string(), synthetic_load(seed, dt_s, steps))]),
    }
}
