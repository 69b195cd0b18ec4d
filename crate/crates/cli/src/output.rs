//! Report files. Every JSON report is wrapped in an [`Envelope`] carrying the
//! resolved config, a version stamp and the operation behind each result key.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;

pub const VERSION: &str = concat!("entrodecay ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub version: &'static str,
    pub task: &'static str,
    pub config: &'a ExperimentConfig,
    /// Result key → library operation that produced it.
    pub sources: BTreeMap<&'static str, &'static str>,
    pub pass: bool,
    pub result: &'a T,
}

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> io::Result<Self> {
        fs::create_dir_all(path)?;
        Ok(Self(path.to_path_buf()))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> io::Result<PathBuf> {
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(path)
    }

    pub fn csv<F>(&self, name: &str, write: F) -> io::Result<PathBuf>
    where
        F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    {
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(&path)?);
        write(&mut w)?;
        w.flush()?;
        Ok(path)
    }
}

/// One thresholded quantity in a pass/fail report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    /// `"<="` or `">="`.
    pub relation: &'static str,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            value,
            relation: "<=",
            threshold,
            pass: value <= threshold,
        }
    }

    pub fn at_least(name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            value,
            relation: ">=",
            threshold,
            pass: value >= threshold,
        }
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}
