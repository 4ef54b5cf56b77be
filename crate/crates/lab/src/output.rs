use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::config::ExperimentConfig;
use crate::error::{LabError, LabResult};

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// A buffered output file that starts with the `#` config block.
pub struct Output {
    path: PathBuf,
    writer: BufWriter<File>,
}

impl Output {
    pub fn create(dir: &Path, name: &str, config: &ExperimentConfig) -> LabResult<Self> {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(LabError::io(parent.display().to_string()))?;
        }
        let file = File::create(&path).map_err(LabError::io(path.display().to_string()))?;
        let mut out = Output {
            writer: BufWriter::new(file),
            path,
        };
        out.line(&format!("# {VERSION}"))?;
        for (k, v) in config.echo() {
            out.line(&format!("# {k} = {v}"))?;
        }
        Ok(out)
    }

    pub fn line(&mut self, text: &str) -> LabResult<()> {
        writeln!(self.writer, "{text}").map_err(LabError::io(self.path.display().to_string()))
    }

    pub fn writer(&mut self) -> &mut BufWriter<File> {
        &mut self.writer
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn finish(mut self) -> LabResult<PathBuf> {
        self.writer
            .flush()
            .map_err(LabError::io(self.path.display().to_string()))?;
        Ok(self.path)
    }
}

/// Writes `fields` as a flat JSON object after the config block.
pub fn write_json(dir: &Path, name: &str, config: &ExperimentConfig, fields: Map<String, Value>) -> LabResult<PathBuf> {
    let mut out = Output::create(dir, name, config)?;
    let text = serde_json::to_string_pretty(&Value::Object(fields)).expect("JSON values serialize");
    out.line(&text)?;
    out.finish()
}

/// Strips the `#` block from a file produced by [`Output`].
pub fn strip_header(text: &str) -> String {
    text.lines()
        .skip_while(|l| l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

/// JSON number, or `null` for non-finite values.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}
