//! `key = value` config files. Flags given on the command line win over
//! anything read here.

use std::path::Path;

use toml::{Table, Value};

use crate::CliError;

pub struct ConfigFile {
    table: Table,
    source: String,
}

impl ConfigFile {
    pub fn empty() -> Self {
        Self {
            table: Table::new(),
            source: String::new(),
        }
    }

    pub fn load(path: &Path, allowed: &[&str]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
        let table: Table = text
            .parse()
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        if let Some(k) = table.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(CliError::Usage(format!(
                "config {}: unknown key `{k}` (allowed: {})",
                path.display(),
                allowed.join(", ")
            )));
        }
        Ok(Self {
            table,
            source: path.display().to_string(),
        })
    }

    fn bad(&self, key: &str, want: &str) -> CliError {
        CliError::Usage(format!("config {}: `{key}` must be {want}", self.source))
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(_) => Err(self.bad(key, "a non-negative integer")),
        }
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>, CliError> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(self.bad(key, "a non-negative integer")),
        }
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(*f)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(self.bad(key, "a number")),
        }
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>, CliError> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(self.bad(key, "true or false")),
        }
    }

    pub fn string(&self, key: &str) -> Result<Option<String>, CliError> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(self.bad(key, "a string")),
        }
    }
}
