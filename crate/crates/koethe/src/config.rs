use std::path::Path;

use koethe_core::catalog::SpaceConfig;
use koethe_core::verdict::Outcome;
use koethe_core::weights::WeightFamily;

use crate::error::CliError;

pub fn load(path: &Path) -> Result<SpaceConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Builds the family and rejects it when an axiom provably fails on the prefix.
pub fn build_validated(config: &SpaceConfig, depth: usize) -> Result<WeightFamily, CliError> {
    let family = config.build().map_err(|e| CliError::Config(format!("{}: {e}", config.name)))?;
    let axioms = family.axioms_check(depth.min(4096));
    if axioms.outcome == Outcome::Fails {
        let detail = axioms.witness.map(|w| w.detail).unwrap_or_default();
        return Err(CliError::Config(format!("{}: not a Köthe set: {detail}", config.name)));
    }
    Ok(family)
}
