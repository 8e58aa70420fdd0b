//! TOML run configs with `--set key=value` overrides.
//!
//! `seed` and `out` are global keys shared by every command; everything
//! else is deserialized into the command's own struct, which rejects
//! unknown keys. Relative paths in the file resolve against the file's
//! directory, relative paths given with `--set` against the working
//! directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::CliError;
use crate::RunArgs;

pub struct Loaded {
    pub table: Table,
    pub seed: u64,
    pub out: PathBuf,
    /// SHA-256 of the effective config (overrides applied, `seed` and `out`
    /// removed), as lowercase hex.
    pub hash: String,
    base: PathBuf,
    overridden: BTreeSet<String>,
}

fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

fn set_dotted(table: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| CliError::config(format!("empty override key `{key}`")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

pub fn load(args: &RunArgs, command: &str) -> Result<Loaded, CliError> {
    let (mut table, base) = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
                message: format!("cannot read: {e}"),
                path: Some(path.clone()),
            })?;
            let table: Table = text.parse().map_err(|e: toml::de::Error| CliError::Config {
                message: e.message().to_string(),
                path: Some(path.clone()),
            })?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (table, base)
        }
        None => (Table::new(), PathBuf::new()),
    };
    let mut overridden = BTreeSet::new();
    for item in args.set.iter().chain(&args.overrides) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("override `{item}` is not KEY=VALUE")))?;
        set_dotted(&mut table, k.trim(), parse_value(v.trim()))?;
        overridden.insert(k.trim().to_string());
    }

    let seed = match table.remove("seed") {
        None => 0,
        Some(Value::Integer(s)) if s >= 0 => s as u64,
        Some(v) => return Err(CliError::config(format!("`seed` must be a non-negative integer, found {v}"))),
    };
    let seed = args.seed.unwrap_or(seed);
    let out_value = table.remove("out");
    let out = match (&args.out, out_value) {
        (Some(o), _) => o.clone(),
        (None, Some(Value::String(s))) => {
            if overridden.contains("out") {
                PathBuf::from(s)
            } else {
                base.join(s)
            }
        }
        (None, Some(v)) => return Err(CliError::config(format!("`out` must be a path, found {v}"))),
        (None, None) => PathBuf::from("out").join(command.replace(' ', "-")),
    };

    let canonical = serde_json::to_string(&table).expect("TOML tables serialize to JSON");
    let hash = hex::encode(Sha256::digest(canonical.as_bytes()));
    Ok(Loaded {
        table,
        seed,
        out,
        hash,
        base,
        overridden,
    })
}

impl Loaded {
    pub fn parse<T: DeserializeOwned>(&self) -> Result<T, CliError> {
        Value::Table(self.table.clone()).try_into().map_err(|e: toml::de::Error| CliError::Config {
            message: e.message().to_string(),
            path: None,
        })
    }

    /// Resolves a path read from key `key`.
    pub fn path(&self, key: &str, p: &Path) -> PathBuf {
        if p.is_absolute() || self.overridden.contains(key) {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// Rejects `table.seed`, which would silently diverge from the run seed.
    pub fn reject_nested_seed(&self, table: &str) -> Result<(), CliError> {
        if self.table.get(table).and_then(|t| t.get("seed")).is_some() {
            return Err(CliError::config(format!("`{table}.seed` is not allowed; set the top-level `seed`")));
        }
        Ok(())
    }

    pub fn create_out(&self) -> Result<&Path, CliError> {
        std::fs::create_dir_all(&self.out).map_err(|e| rigforge_core::Error::io(&self.out, e))?;
        Ok(&self.out)
    }
}
