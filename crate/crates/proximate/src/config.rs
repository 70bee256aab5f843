//! Settings layering: built-in defaults, then command-line flags, then a
//! TOML config file, each overriding the one before.

use std::path::Path;

use proximate_core::panel::{MissingPolicy, StandardizeMode};
use proximate_core::proximate::MSearch;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Overlay the keys of the TOML file at `config` onto `flags`. Flags that
/// were not given serialize as null and are dropped first, so a file key
/// always wins and an absent key leaves the flag alone.
pub fn layered<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> Result<T, CliError> {
    let mut merged = match serde_json::to_value(flags)? {
        serde_json::Value::Object(map) => map.into_iter().filter(|(_, v)| !v.is_null()).collect(),
        _ => serde_json::Map::new(),
    };
    if let Some(path) = config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let table: toml::Table = toml::from_str(&text)?;
        for (key, value) in table {
            merged.insert(key.replace('-', "_"), serde_json::to_value(value)?);
        }
    }
    serde_json::from_value(serde_json::Value::Object(merged))
        .map_err(|e| CliError::Input(format!("invalid settings: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Standardize {
    None,
    Demean,
    Zscore,
}

impl From<Standardize> for StandardizeMode {
    fn from(s: Standardize) -> Self {
        match s {
            Standardize::None => StandardizeMode::None,
            Standardize::Demean => StandardizeMode::Demean,
            Standardize::Zscore => StandardizeMode::ZScore,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Missing {
    DropUnit,
    DropPeriod,
    Fail,
}

impl From<Missing> for MissingPolicy {
    fn from(m: Missing) -> Self {
        match m {
            Missing::DropUnit => MissingPolicy::DropUnit,
            Missing::DropPeriod => MissingPolicy::DropPeriod,
            Missing::Fail => MissingPolicy::Fail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Search {
    Linear,
    Bisection,
}

impl From<Search> for MSearch {
    fn from(s: Search) -> Self {
        match s {
            Search::Linear => MSearch::Linear,
            Search::Bisection => MSearch::Bisection,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rotate {
    None,
    Varimax,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    #[serde(deny_unknown_fields)]
    struct S {
        a: Option<usize>,
        b: Option<f64>,
        c: Option<Missing>,
    }

    #[test]
    fn file_overrides_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "b = 2.5\nc = \"drop-period\"\n").unwrap();
        let flags = S {
            a: Some(3),
            b: Some(1.0),
            c: None,
        };
        let got = layered(&flags, Some(&path)).unwrap();
        assert_eq!(
            got,
            S {
                a: Some(3),
                b: Some(2.5),
                c: Some(Missing::DropPeriod)
            }
        );
        assert_eq!(layered(&flags, None).unwrap(), flags);
    }

    #[test]
    fn unknown_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "zzz = 1\n").unwrap();
        let flags = S {
            a: None,
            b: None,
            c: None,
        };
        assert!(matches!(layered(&flags, Some(&path)), Err(CliError::Input(_))));
    }
}
