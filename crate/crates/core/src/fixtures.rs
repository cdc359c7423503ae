//! Feeders bundled with the crate.

use crate::feeder::{build_network, Network};
use crate::io::feeder_file::FeederDescription;

pub const DESK_FEEDER_TOML: &str = include_str!("../fixtures/desk8500-mini.toml");

/// Small networks (at most six buses), by name.
pub const SMALL_FEEDERS: &[(&str, &str)] = &[
    ("two_bus", include_str!("../fixtures/two_bus.toml")),
    ("three_bus_mutual", include_str!("../fixtures/three_bus_mutual.toml")),
    ("four_bus_regulator", include_str!("../fixtures/four_bus_regulator.toml")),
    ("five_bus_lateral", include_str!("../fixtures/five_bus_lateral.toml")),
    ("six_bus_pv", include_str!("../fixtures/six_bus_pv.toml")),
];

fn parse(text: &str) -> Network {
    let desc = FeederDescription::from_toml_str(text).expect("bundled feeder parses");
    build_network(&desc).expect("bundled feeder is valid")
}

pub fn desk_feeder() -> Network {
    parse(DESK_FEEDER_TOML)
}

pub fn small_feeder(name: &str) -> Option<Network> {
    SMALL_FEEDERS.iter().find(|(n, _)| *n == name).map(|(_, text)| parse(text))
}

pub fn small_feeders() -> Vec<(&'static str, Network)> {
    SMALL_FEEDERS.iter().map(|(n, text)| (*n, parse(text))).collect()
}
