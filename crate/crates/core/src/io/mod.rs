//! File formats: feeder and scenario descriptions (TOML), input profiles and
//! result bundles (CSV), and the sweep/report pipeline built on them.
//!
//! CSV files are comma separated with a header row, `.` decimals and LF line
//! endings. Floats are written in shortest round-trip form so every file reads
//! back to the exact values that were written.

use std::fs;
use std::path::Path;

use crate::error::{Error, IoError};
use crate::feeder::{build_network, Network};

pub mod bundle;
pub mod feeder_file;
pub mod pipeline;
pub mod profiles_csv;
pub mod report;
pub mod scenario;

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| IoError::io(parent, e))?;
        }
    }
    fs::write(path, text).map_err(|e| IoError::io(path, e))
}

pub fn load_feeder(path: &Path) -> Result<Network, Error> {
    let text = read_text(path)?;
    let desc = feeder_file::FeederDescription::from_toml_str(&text).map_err(|e| match e {
        IoError::Parse { what, message } => IoError::Parse {
            what: format!("{what} {}", path.display()),
            message,
        },
        other => other,
    })?;
    Ok(build_network(&desc)?)
}

/// Serialises rows to CSV text with a header.
pub(crate) fn to_csv<T: serde::Serialize>(rows: impl IntoIterator<Item = T>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}

/// Reads CSV rows; errors name the file and the record.
pub(crate) fn from_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let text = read_text(path)?;
    parse_csv(&text, &path.display().to_string())
}

pub(crate) fn parse_csv<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<Vec<T>, IoError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| IoError::parse(what, e.to_string()))
}
