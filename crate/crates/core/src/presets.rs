//! Built-in example problems, embedded from the workspace `presets/` directory.

use crate::config::ProblemConfig;
use crate::error::{Error, Result};

pub const NAMES: [&str; 7] = ["ex2", "example2", "ex3", "exnew", "schnakenberg", "2dex", "grayscott"];

/// Raw TOML text of a preset.
pub fn source(name: &str) -> Option<&'static str> {
    Some(match name {
        "ex2" => include_str!("../../../presets/ex2.toml"),
        "example2" => include_str!("../../../presets/example2.toml"),
        "ex3" => include_str!("../../../presets/ex3.toml"),
        "exnew" => include_str!("../../../presets/exnew.toml"),
        "schnakenberg" => include_str!("../../../presets/schnakenberg.toml"),
        "2dex" => include_str!("../../../presets/2dex.toml"),
        "grayscott" => include_str!("../../../presets/grayscott.toml"),
        _ => return None,
    })
}

pub fn load(name: &str) -> Result<ProblemConfig> {
    let src = source(name)
        .ok_or_else(|| Error::Config(format!("unknown preset '{name}' (available: {})", NAMES.join(", "))))?;
    ProblemConfig::from_str(src, &format!("preset:{name}"))
}
