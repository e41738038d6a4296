use clap::Args;
use mpholes::error::Error;
use mpholes::holes::HoleFile;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Everything a run depends on. The same keys are accepted in a `--config` file;
/// flags given on the command line win over the file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub gamma: f64,
    pub t: Option<f64>,
    pub t_grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
    /// Path to a hole file, or the JSON itself.
    pub hole: Option<String>,
    /// Hole family for `survivor`; same format as `hole`.
    pub holes: Option<String>,
    pub n_max: Option<usize>,
    /// Grid nodes on Y for the discretized operators.
    pub m: usize,
    /// Renewal levels of the tower.
    pub l_max: usize,
    pub depth: usize,
    /// Branch prefix every counted cylinder must start with.
    pub prefix: String,
    pub order: usize,
    pub max_order: usize,
    pub word_budget: u64,
    pub checkpoints: Vec<usize>,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            gamma: 0.5,
            t: None,
            t_grid: Vec::new(),
            eps_grid: Vec::new(),
            hole: None,
            holes: None,
            n_max: None,
            m: mpholes::spectra::DEFAULT_M,
            l_max: mpholes::spectra::DEFAULT_LEVELS,
            depth: 16,
            prefix: String::new(),
            order: 4,
            max_order: 5,
            word_budget: 20_000_000,
            checkpoints: vec![50, 100, 200],
            out: None,
            seed: 0,
        }
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct Flags {
    /// Intermittency parameter, 0 < gamma < 1 [default: 0.5]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Potential exponent t in [0, 1]
    #[arg(long)]
    pub t: Option<f64>,
    /// Comma-separated t values for sweep and survivor
    #[arg(long, value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
    /// Comma-separated hole sizes; needs an interval hole file
    #[arg(long, value_delimiter = ',')]
    pub eps_grid: Option<Vec<f64>>,
    /// Hole file path or inline hole JSON
    #[arg(long)]
    pub hole: Option<String>,
    /// Hole family file (interval or markov-family)
    #[arg(long)]
    pub holes: Option<String>,
    /// Return branches kept before the tail is lumped [default: depends on gamma]
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Collocation nodes on Y [default: 512]
    #[arg(long)]
    pub m: Option<usize>,
    /// Tower levels for full-system iteration [default: 400]
    #[arg(long)]
    pub l_max: Option<usize>,
    /// Cylinder depth for escape and the non-swallowing horizon [default: 16]
    #[arg(long)]
    pub depth: Option<usize>,
    /// Restrict escape cylinders to this start word, e.g. RRR
    #[arg(long)]
    pub prefix: Option<String>,
    /// Starting determinant order [default: 4]
    #[arg(long)]
    pub order: Option<usize>,
    /// Largest determinant order for adaptive roots [default: 5]
    #[arg(long)]
    pub max_order: Option<usize>,
    /// Periodic-orbit budget per enumeration [default: 20000000]
    #[arg(long)]
    pub word_budget: Option<u64>,
    /// Averaging checkpoints for the intermediate regime [default: 50,100,200]
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<usize>>,
    /// Output directory; results go to standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for every random choice [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

macro_rules! take {
    ($cfg:ident, $flags:ident, $($f:ident),*) => {
        $(if let Some(v) = $flags.$f { $cfg.$f = v; })*
    };
}

impl RunConfig {
    pub fn load(file: Option<&PathBuf>, flags: Flags) -> Result<RunConfig, Error> {
        let mut cfg = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Invalid(format!("config {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("config {}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        take!(cfg, flags, gamma, t_grid, eps_grid, m, l_max, depth, prefix, order, max_order, word_budget, checkpoints, seed);
        if flags.t.is_some() {
            cfg.t = flags.t;
        }
        if flags.hole.is_some() {
            cfg.hole = flags.hole;
        }
        if flags.holes.is_some() {
            cfg.holes = flags.holes;
        }
        if flags.n_max.is_some() {
            cfg.n_max = flags.n_max;
        }
        if flags.out.is_some() {
            cfg.out = flags.out;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::Invalid(m));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        for &t in self.t.iter().chain(&self.t_grid) {
            if !(0.0..=1.0).contains(&t) {
                return bad(format!("t must lie in [0, 1], got {t}"));
            }
        }
        for &e in &self.eps_grid {
            if !(e > 0.0 && e < 0.5) {
                return bad(format!("epsilon must lie in (0, 1/2), got {e}"));
            }
        }
        if !(16..=8192).contains(&self.m) {
            return bad(format!("m must lie in 16..=8192, got {}", self.m));
        }
        if !(1..=20_000).contains(&self.l_max) {
            return bad(format!("l_max must lie in 1..=20000, got {}", self.l_max));
        }
        if !(1..=25).contains(&self.depth) {
            return bad(format!("depth must lie in 1..=25, got {}", self.depth));
        }
        if !(1..=8).contains(&self.order) || self.max_order < self.order || self.max_order > 8 {
            return bad(format!("need 1 <= order <= max_order <= 8, got {} and {}", self.order, self.max_order));
        }
        if let Some(n) = self.n_max {
            if !(16..=200_000).contains(&n) {
                return bad(format!("n_max must lie in 16..=200000, got {n}"));
            }
        }
        if self.checkpoints.is_empty() || self.checkpoints.contains(&0) {
            return bad("checkpoints must be positive".into());
        }
        Ok(())
    }

    pub fn t(&self) -> Result<f64, Error> {
        self.t.ok_or_else(|| Error::Invalid("--t is required".into()))
    }

    pub fn t_values(&self) -> Result<Vec<f64>, Error> {
        if !self.t_grid.is_empty() {
            return Ok(self.t_grid.clone());
        }
        Ok(vec![self.t()?])
    }

    pub fn hole_file(&self) -> Result<Option<HoleFile>, Error> {
        self.hole.as_deref().map(read_hole).transpose()
    }

    pub fn family_file(&self) -> Result<HoleFile, Error> {
        match self.holes.as_deref().or(self.hole.as_deref()) {
            Some(s) => read_hole(s),
            None => Err(Error::Invalid("--holes is required".into())),
        }
    }
}

/// Inline JSON when the argument starts with `{`, a path otherwise.
fn read_hole(s: &str) -> Result<HoleFile, Error> {
    let text = if s.trim_start().starts_with('{') {
        s.to_string()
    } else {
        std::fs::read_to_string(s).map_err(|e| Error::Invalid(format!("hole file {s}: {e}")))?
    };
    HoleFile::parse(&text)
}
