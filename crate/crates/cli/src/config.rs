//! `key = value` run configuration with per-command sections.
//!
//! Lookup order for a setting: command-line flag, the command's section,
//! the unnamed leading section, the built-in default.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{Context, Result};
use ini::Ini;

use crate::UsageError;

#[derive(Debug, Default)]
pub struct Settings {
    ini: Option<Ini>,
    section: String,
}

impl Settings {
    pub fn load(path: Option<&Path>, section: &str) -> Result<Self> {
        let ini = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                Some(Ini::load_from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", p.display())))?)
            }
            None => None,
        };
        Ok(Self { ini, section: section.to_string() })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        let ini = self.ini.as_ref()?;
        ini.section(Some(self.section.as_str()))
            .and_then(|s| s.get(key))
            .or_else(|| ini.general_section().get(key))
    }

    pub fn lookup<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            Some(v) => v
                .trim()
                .parse()
                .map(Some)
                .map_err(|e| UsageError(format!("config key {key} = {v:?}: {e}")).into()),
            None => Ok(None),
        }
    }

    pub fn pick<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.lookup(flag, key)?.unwrap_or(default))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(text: &str, section: &str) -> Settings {
        Settings { ini: Some(Ini::load_from_str(text).unwrap()), section: section.into() }
    }

    #[test]
    fn flag_beats_section_beats_general() {
        let s = settings("ls = 3\nq = 1.5\n[forecast]\nls = 5\n", "forecast");
        assert_eq!(s.pick(Some(9usize), "ls", 2).unwrap(), 9);
        assert_eq!(s.pick(None, "ls", 2usize).unwrap(), 5);
        assert_eq!(s.pick(None, "q", 0.1f64).unwrap(), 1.5);
        assert_eq!(s.pick(None, "eta1", 0.25f64).unwrap(), 0.25);
    }

    #[test]
    fn other_sections_are_ignored() {
        let s = settings("[pmbcs]\nls = 7\n", "forecast");
        assert_eq!(s.pick(None, "ls", 2usize).unwrap(), 2);
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let s = settings("ls = many\n", "forecast");
        let e = s.pick(None, "ls", 2usize).unwrap_err();
        assert!(e.downcast_ref::<UsageError>().is_some());
    }
}
