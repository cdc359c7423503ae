//! Input series as two-column CSV: `timestamp,value`, with timestamps in
//! seconds, strictly increasing and uniformly spaced.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, IoError};
use crate::profiles::Profile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Sample {
    #[serde(alias = "time_s")]
    timestamp: f64,
    value: f64,
}

pub fn parse_profile(text: &str, name: &str) -> Result<Profile, Error> {
    let rows: Vec<Sample> = super::parse_csv(text, &format!("profile '{name}'"))?;
    if rows.len() < 2 {
        return Err(IoError::parse(format!("profile '{name}'"), "at least two samples are required").into());
    }
    let dt = rows[1].timestamp - rows[0].timestamp;
    for (i, w) in rows.windows(2).enumerate() {
        if ((w[1].timestamp - w[0].timestamp) - dt).abs() > 1e-6 * dt.abs().max(1.0) {
            return Err(IoError::parse(
                format!("profile '{name}'"),
                format!("row {}: samples must be uniformly spaced", i + 2),
            )
            .into());
        }
    }
    Ok(Profile::new(name, dt, rows.into_iter().map(|r| r.value).collect())?)
}

pub fn read_profile(path: &Path, name: &str) -> Result<Profile, Error> {
    let text = super::read_text(path)?;
    parse_profile(&text, name)
}

pub fn profile_to_csv(profile: &Profile) -> String {
    super::to_csv(profile.values.iter().enumerate().map(|(i, &value)| Sample {
        timestamp: i as f64 * profile.dt_s,
        value,
    }))
}
