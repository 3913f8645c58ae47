//! Output files: CSV with a `# config:` header line and JSON objects carrying a `config`
//! field. Floats use the shortest representation that parses back to the same value.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use levymor::{DMatrix, SystemRecord};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Shortest round-trip decimal; scientific outside `[1e-4, 1e16)`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(config: &RunConfig, header: &[&str]) -> Self {
        let cfg = serde_json::to_string(config).expect("config serializes");
        Self {
            text: format!("# config: {cfg}\n{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, first: impl std::fmt::Display, rest: &[f64]) {
        write!(self.text, "{first}").unwrap();
        for v in rest {
            write!(self.text, ",{}", fmt_f64(*v)).unwrap();
        }
        self.text.push('\n');
    }

    pub fn write(&self, dir: &Path, name: &str) -> CliResult<PathBuf> {
        write_text(dir, name, &self.text)
    }
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Writes `value` as pretty JSON with a leading `config` field.
pub fn write_json<T: Serialize>(
    dir: &Path,
    name: &str,
    config: &RunConfig,
    value: &T,
) -> CliResult<PathBuf> {
    #[derive(Serialize)]
    struct WithConfig<'a, T> {
        config: &'a RunConfig,
        #[serde(flatten)]
        value: &'a T,
    }
    let text = serde_json::to_string_pretty(&WithConfig { config, value })
        .map_err(|e| CliError::Invalid(format!("serializing {name}: {e}")))?;
    write_text(dir, name, &(text + "\n"))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// System file contents; a `config` field written alongside is ignored on reading.
pub fn read_system(path: &Path) -> CliResult<SystemRecord> {
    read_json(path)
}

pub fn row_major(x: &DMatrix<f64>) -> Vec<f64> {
    x.transpose().iter().copied().collect()
}
