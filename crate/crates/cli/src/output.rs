use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::input::CliError;

fn target(dir: &Path, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
    Ok(dir.join(name))
}

pub fn pretty<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let path = target(dir, name)?;
    fs::write(&path, pretty(value)?).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

pub fn write_csv(dir: &Path, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(target(dir, name)?)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|source| CliError::Io { path: name.to_string(), source })
}

pub fn print<T: Serialize>(value: &T) -> Result<(), CliError> {
    print!("{}", pretty(value)?);
    Ok(())
}
