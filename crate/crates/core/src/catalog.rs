//! Space configurations and the shipped example catalog.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::classifier::Dimension;
use crate::error::Result;
use crate::verdict::Outcome;
use crate::weights::{Builtin, FamilyDoc, WeightFamily};

pub const DEFAULT_DEPTH: usize = 10_000;
pub const DEFAULT_LEVEL_BUDGET: u64 = 8;
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Analysis {
    pub depth: usize,
    pub level_budget: u64,
    pub epsilon: f64,
}

impl Default for Analysis {
    fn default() -> Analysis {
        Analysis { depth: DEFAULT_DEPTH, level_budget: DEFAULT_LEVEL_BUDGET, epsilon: DEFAULT_EPSILON }
    }
}

/// Expected results shipped with a catalog entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    /// `[dg, db, wdg, wdb]`.
    pub dimensions: [Dimension; 4],
    /// `[U, N, B, M]` when pinned.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub conditions: Option<[Outcome; 4]>,
}

/// One space per JSON file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpaceConfig {
    pub name: String,
    #[serde(flatten)]
    pub family: FamilyDoc,
    #[serde(default)]
    pub analysis: Analysis,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub expected: Option<Expected>,
}

impl SpaceConfig {
    pub fn builtin(b: Builtin) -> Result<SpaceConfig> {
        let fam = crate::weights::make_builtin(&b)?;
        Ok(SpaceConfig {
            name: file_stem(&b.id()),
            family: FamilyDoc::from(&fam),
            analysis: Analysis::default(),
            expected: None,
        })
    }

    pub fn build(&self) -> Result<WeightFamily> {
        self.family.build()
    }
}

/// `hadamard_disk(1/2)` → `hadamard_disk_1_2`.
pub fn file_stem(id: &str) -> String {
    let mut out = String::new();
    for c in id.chars() {
        match c {
            'a'..='z' | 'A'..='Z' | '0'..='9' => out.push(c),
            _ if !out.ends_with('_') => out.push('_'),
            _ => {}
        }
    }
    out.trim_end_matches('_').to_string()
}

/// The example families with their expected classifications.
pub fn golden_catalog() -> Vec<SpaceConfig> {
    use Dimension::*;
    use Outcome::*;
    let rows: [(&str, [Dimension; 4], Option<[Outcome; 4]>); 11] = [
        ("l1", [Two; 4], Some([Fails, Fails, Holds, Holds])),
        ("finite_dim(64)", [Zero; 4], Some([Holds; 4])),
        ("s", [One; 4], Some([Fails, Holds, Holds, Holds])),
        ("entire", [One; 4], Some([Fails, Holds, Holds, Holds])),
        ("power_series(inf, i)", [One; 4], Some([Fails, Holds, Holds, Holds])),
        ("power_series(1, sqrt(i))", [Zero; 4], Some([Holds; 4])),
        ("power_series(inf, log(i+1))", [One; 4], Some([Fails, Holds, Holds, Holds])),
        ("hadamard_disk(1)", [Zero; 4], Some([Holds; 4])),
        ("hadamard_disk(2)", [Infinite; 4], Some([Fails, Holds, Fails, Holds])),
        ("hadamard_disk(1/2)", [Dimension::Unknown; 4], None),
        ("matrix_example", [Two, Two, One, One], Some([Fails, Holds, Holds, Fails])),
    ];
    rows.into_iter()
        .map(|(id, dimensions, conditions)| {
            let mut c = SpaceConfig::builtin(Builtin::from_id(id).expect("catalog ids parse")).expect("catalog builds");
            // not an algebra: classification is refused, so nothing is expected
            if conditions.is_some() {
                c.expected = Some(Expected { dimensions, conditions });
            }
            c
        })
        .collect()
}
