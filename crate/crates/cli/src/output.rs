//! Output files: each write goes to a temporary name in the target directory
//! and is renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use kappa_core::VERSION;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub struct Writer {
    dir: PathBuf,
    format: Format,
    echo: Value,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Writer {
    pub fn new(dir: &Path, format: Format, spec: &impl Serialize) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let echo = serde_json::to_value(spec).map_err(|e| CliError::Input(format!("spec echo: {e}")))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            echo,
        })
    }

    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &target).map_err(io_err(&target))?;
        Ok(target)
    }

    /// `{"version", "spec", "result"}`, pretty-printed.
    pub fn write_json(&self, name: &str, result: &impl Serialize) -> Result<PathBuf, CliError> {
        let result = serde_json::to_value(result).map_err(|e| CliError::Input(format!("{name}: {e}")))?;
        let doc = json!({ "version": VERSION, "spec": self.echo, "result": result });
        let mut text = serde_json::to_string_pretty(&doc).expect("json values serialize");
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// CSV preceded by `#` lines carrying the version and the compact spec echo.
    pub fn write_csv(&self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let text = format!("# kappa {VERSION}\n# spec: {}\n{body}", self.echo);
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes `{stem}.csv` or `{stem}.json` according to the format.
    pub fn write_table(&self, stem: &str, csv: &str, result: &impl Serialize) -> Result<PathBuf, CliError> {
        match self.format {
            Format::Csv => self.write_csv(&format!("{stem}.csv"), csv),
            Format::Json => self.write_json(&format!("{stem}.json"), result),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let w = Writer::new(dir.path(), Format::Csv, &json!({"name": "t"})).unwrap();
        let p = w.write_csv("a.csv", "x,y\n1,2\n").unwrap();
        let text = fs::read_to_string(p).unwrap();
        assert!(text.starts_with(&format!("# kappa {VERSION}\n# spec: {{\"name\":\"t\"}}\nx,y\n")));
        let p = w.write_json("a.json", &json!([1, 2])).unwrap();
        let v: Value = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(v["version"], VERSION);
        assert_eq!(v["spec"]["name"], "t");
        assert_eq!(v["result"], json!([1, 2]));
        // no temporary files left behind
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 2);
    }
}
