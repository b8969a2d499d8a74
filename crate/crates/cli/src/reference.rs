//! Bundled reference dataset for `reproduce`.

use std::collections::BTreeMap;

use ini::Ini;

use crate::error::{CliError, CliResult};

/// Raw text of the bundled dataset.
pub const BUNDLED: &str = include_str!("../data/reference_values.ini");

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    values: BTreeMap<(String, String), f64>,
}

impl ReferenceSet {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled reference dataset parses")
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Validation(format!("reference dataset: {e}")))?;
        let mut values = BTreeMap::new();
        for (section, props) in ini.iter() {
            let section = section.unwrap_or_default();
            for (key, raw) in props.iter() {
                let v: f64 = raw
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Validation(format!("reference dataset: [{section}] {key} = `{raw}` is not a number")))?;
                if values.insert((section.to_string(), key.to_string()), v).is_some() {
                    return Err(CliError::Validation(format!("reference dataset: duplicate [{section}] {key}")));
                }
            }
        }
        Ok(Self { values })
    }

    /// Value of `[section] key`; panics when absent, since every lookup
    /// names an entry of the bundled file.
    pub fn get(&self, section: &str, key: &str) -> f64 {
        *self
            .values
            .get(&(section.to_string(), key.to_string()))
            .unwrap_or_else(|| panic!("reference dataset has no [{section}] {key}"))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
