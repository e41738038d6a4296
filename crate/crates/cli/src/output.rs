//! Output envelopes. JSON results are wrapped with the tool version, the seed
//! and the full config; CSV files carry the same data as `#` comment lines
//! ahead of the header row. Nothing time- or host-dependent is written.

use crate::config::RunConfig;
use mpholes::error::Error;
use serde::Serialize;
use std::io::Write;

#[derive(Serialize)]
pub struct Meta<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a RunConfig,
}

impl<'a> Meta<'a> {
    pub fn new(command: &'a str, config: &'a RunConfig) -> Self {
        Meta { tool: "mpholes", version: mpholes::VERSION, command, seed: config.seed, config }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    #[serde(flatten)]
    meta: &'a Meta<'a>,
    result: &'a T,
}

pub struct Csv {
    pub notes: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Csv { notes: Vec::new(), header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

fn to_io(e: impl std::fmt::Display) -> Error {
    Error::Invalid(format!("writing output: {e}"))
}

pub fn json_string<T: Serialize>(meta: &Meta, result: &T) -> Result<String, Error> {
    let mut s = serde_json::to_string_pretty(&Envelope { meta, result }).map_err(to_io)?;
    s.push('\n');
    Ok(s)
}

pub fn csv_string(meta: &Meta, csv: &Csv) -> Result<String, Error> {
    let mut out = Vec::new();
    writeln!(out, "# tool: {} {}", meta.tool, meta.version).map_err(to_io)?;
    writeln!(out, "# command: {}", meta.command).map_err(to_io)?;
    writeln!(out, "# seed: {}", meta.seed).map_err(to_io)?;
    writeln!(out, "# config: {}", serde_json::to_string(meta.config).map_err(to_io)?).map_err(to_io)?;
    for (k, v) in &csv.notes {
        writeln!(out, "# {k}: {v}").map_err(to_io)?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&csv.header).map_err(to_io)?;
        for r in &csv.rows {
            w.write_record(r).map_err(to_io)?;
        }
        w.flush().map_err(to_io)?;
    }
    String::from_utf8(out).map_err(to_io)
}

/// Writes to `<out>/<name>` when an output directory is set, else to stdout.
pub fn emit(cfg: &RunConfig, name: &str, text: &str) -> Result<(), Error> {
    match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(to_io)?;
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(to_io)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).map_err(to_io)
        }
    }
}
