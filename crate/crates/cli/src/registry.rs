//! Bundled example problems with their pinned settings.

use crate::config::{self, Overrides, ProblemSpec, RawConfig};
use crate::error::CliError;

const ENTRIES: &[(&str, &str)] = &[
    ("ex1", include_str!("../configs/ex1.json")),
    ("ex2", include_str!("../configs/ex2.json")),
    ("nl1", include_str!("../configs/nl1.json")),
    ("nl2", include_str!("../configs/nl2.json")),
    ("nl3", include_str!("../configs/nl3.json")),
    ("bvp_p", include_str!("../configs/bvp_p.json")),
    ("bvp_airy", include_str!("../configs/bvp_airy.json")),
    ("laplace_disc", include_str!("../configs/laplace_disc.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    ENTRIES.iter().map(|(n, _)| *n)
}

/// Raw JSON of a registry entry.
pub fn source(name: &str) -> Result<&'static str, CliError> {
    ENTRIES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| {
            let known: Vec<&str> = names().collect();
            CliError::Validation(format!(
                "unknown example `{name}` (registry: {})",
                known.join(", ")
            ))
        })
}

pub fn description(name: &str) -> Result<String, CliError> {
    Ok(RawConfig::from_json(source(name)?)?
        .description
        .unwrap_or_default())
}

pub fn load(name: &str, overrides: &Overrides) -> Result<ProblemSpec, CliError> {
    config::load(source(name)?, overrides)
}

/// Validates every entry; returns the name and outcome of each.
pub fn self_test() -> Vec<(&'static str, Result<ProblemSpec, CliError>)> {
    names().map(|n| (n, load(n, &Overrides::default()))).collect()
}
