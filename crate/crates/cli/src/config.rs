//! Run configuration shared by every subcommand.
//!
//! Flags and config-file entries use one flat key space: a file line
//! `k-first = 4` is equivalent to `--k-first 4`. Settings are resolved as
//! defaults, then the file, then flags.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use comspec::corpus::Layout;
use comspec::embedding::ProviderSpec;
use comspec::experiment::{simplex_tenths, Grid, Objective};
use comspec::rouge::{Metric, ReportKind};
use comspec::scoring::Hyperparams;
use comspec::selection::Budget;
use comspec::variants::{Method, VariantSpec};

/// Invalid flags or config contents; reported with the input-error exit code.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(ConfigError(msg.into()))
}

pub const KEYS: &[&str] = &[
    "input",
    "layout",
    "method",
    "budget-words",
    "budget-bytes",
    "embedder",
    "seed",
    "k-first",
    "delta",
    "alpha",
    "beta",
    "gamma",
    "max-nodes",
    "metrics",
    "report",
    "out",
    "workers",
    "summaries",
    "dump-tree",
    "grid-delta",
    "grid-alpha",
    "grid-beta",
    "grid-gamma",
    "grid-k",
    "objective",
];

/// Inclusive range in tenths, written `lo:hi` with values in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TenthsRange(pub u8, pub u8);

impl TenthsRange {
    pub const FULL: TenthsRange = TenthsRange(0, 10);

    fn contains(self, v: u8) -> bool {
        (self.0..=self.1).contains(&v)
    }
}

fn tenths(s: &str) -> Result<u8> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| invalid(format!("{s:?} is not a number")))?;
    let t = (v * 10.0).round();
    if !(0.0..=10.0).contains(&t) || (v * 10.0 - t).abs() > 1e-9 {
        bail!(invalid(format!("{s:?} is not a multiple of 0.1 in [0, 1]")));
    }
    Ok(t as u8)
}

fn split_range(s: &str) -> Result<(&str, &str)> {
    match s.split_once(':') {
        Some(pair) => Ok(pair),
        None => Ok((s, s)),
    }
}

impl std::str::FromStr for TenthsRange {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (lo, hi) = split_range(s)?;
        let (lo, hi) = (tenths(lo)?, tenths(hi)?);
        if lo > hi {
            bail!(invalid(format!("empty range {s:?}")));
        }
        Ok(TenthsRange(lo, hi))
    }
}

impl fmt::Display for TenthsRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}",
            f64::from(self.0) / 10.0,
            f64::from(self.1) / 10.0
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridRanges {
    pub delta: TenthsRange,
    pub alpha: TenthsRange,
    pub beta: TenthsRange,
    pub gamma: TenthsRange,
    pub k: (usize, usize),
}

impl Default for GridRanges {
    fn default() -> Self {
        GridRanges {
            delta: TenthsRange::FULL,
            alpha: TenthsRange::FULL,
            beta: TenthsRange::FULL,
            gamma: TenthsRange::FULL,
            k: (2, 4),
        }
    }
}

impl GridRanges {
    pub fn grid(&self) -> Grid {
        Grid {
            deltas: (self.delta.0..=self.delta.1).collect(),
            weights: simplex_tenths()
                .into_iter()
                .filter(|&(a, b, g)| {
                    self.alpha.contains(a) && self.beta.contains(b) && self.gamma.contains(g)
                })
                .collect(),
            ks: (self.k.0..=self.k.1).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub layout: Layout,
    pub method: Method,
    pub budget: Option<Budget>,
    pub embedder: ProviderSpec,
    pub seed: u64,
    pub hp: Hyperparams,
    pub max_nodes: Option<usize>,
    pub metrics: Vec<Metric>,
    pub report: ReportKind,
    pub out: Option<PathBuf>,
    /// 0 uses every available core.
    pub workers: usize,
    pub summaries: Option<PathBuf>,
    pub dump_tree: bool,
    pub grid: GridRanges,
    pub objective: Objective,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            layout: Layout::TopicDirs,
            method: Method::OursFinal,
            budget: None,
            embedder: ProviderSpec::Builtin(512),
            seed: 0,
            hp: Hyperparams::default(),
            max_nodes: None,
            metrics: Metric::ALL.to_vec(),
            report: ReportKind::Recall,
            out: None,
            workers: 0,
            summaries: None,
            dump_tree: false,
            grid: GridRanges::default(),
            objective: Objective::default(),
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_pairs(text: &str, origin: &str) -> Result<BTreeMap<String, String>> {
    let mut pairs = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| invalid(format!("{origin}:{}: expected key = value", i + 1)))?;
        let key = key.trim().trim_start_matches("--");
        if !KEYS.contains(&key) {
            bail!(invalid(format!("{origin}:{}: unknown key {key:?}", i + 1)));
        }
        if pairs
            .insert(key.to_string(), value.trim().to_string())
            .is_some()
        {
            bail!(invalid(format!("{origin}:{}: {key} set twice", i + 1)));
        }
    }
    Ok(pairs)
}

pub fn read_pairs(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
    parse_pairs(&text, &path.display().to_string())
}

/// Lays `flags` over `file`. A budget flag replaces a budget of either unit.
pub fn overlay(
    mut file: BTreeMap<String, String>,
    flags: BTreeMap<String, String>,
) -> BTreeMap<String, String> {
    if flags.contains_key("budget-words") || flags.contains_key("budget-bytes") {
        file.remove("budget-words");
        file.remove("budget-bytes");
    }
    file.extend(flags);
    file
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| invalid(format!("invalid value {value:?} for {key}")))
}

fn core<T>(key: &str, r: comspec::Result<T>) -> Result<T> {
    r.map_err(|e| invalid(format!("{key}: {e}")))
}

impl RunConfig {
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = RunConfig::default();
        if pairs.contains_key("budget-words") && pairs.contains_key("budget-bytes") {
            bail!(invalid(
                "budget-words and budget-bytes are mutually exclusive"
            ));
        }
        for (key, value) in pairs {
            let v = value.as_str();
            match key.as_str() {
                "input" => c.input = Some(PathBuf::from(v)),
                "layout" => c.layout = core(key, v.parse())?,
                "method" => c.method = core(key, v.parse())?,
                "budget-words" => c.budget = Some(Budget::words(parse(key, v)?)),
                "budget-bytes" => c.budget = Some(Budget::bytes(parse(key, v)?)),
                "embedder" => c.embedder = core(key, v.parse())?,
                "seed" => c.seed = parse(key, v)?,
                "k-first" => c.hp.k_first = parse(key, v)?,
                "delta" => c.hp.delta = parse(key, v)?,
                "alpha" => c.hp.alpha = parse(key, v)?,
                "beta" => c.hp.beta = parse(key, v)?,
                "gamma" => c.hp.gamma = parse(key, v)?,
                "max-nodes" => c.max_nodes = Some(parse(key, v)?),
                "metrics" => c.metrics = core(key, Metric::parse_list(v))?,
                "report" => c.report = core(key, v.parse())?,
                "out" => c.out = Some(PathBuf::from(v)),
                "workers" => c.workers = parse(key, v)?,
                "summaries" => c.summaries = Some(PathBuf::from(v)),
                "dump-tree" => c.dump_tree = parse(key, v)?,
                "grid-delta" => c.grid.delta = v.parse()?,
                "grid-alpha" => c.grid.alpha = v.parse()?,
                "grid-beta" => c.grid.beta = v.parse()?,
                "grid-gamma" => c.grid.gamma = v.parse()?,
                "grid-k" => {
                    let (lo, hi) = split_range(v)?;
                    c.grid.k = (parse(key, lo)?, parse(key, hi)?);
                }
                "objective" => {
                    let (metric, kind) = v.split_once(':').unwrap_or((v, "recall"));
                    c.objective = Objective {
                        metric: core(key, metric.parse())?,
                        kind: core(key, kind.parse())?,
                    };
                }
                other => bail!(invalid(format!("unknown key {other:?}"))),
            }
        }
        core("hyperparameters", c.hp.validate())?;
        Ok(c)
    }

    /// Every setting as `key = value` pairs, readable by [`parse_pairs`].
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if let Some(p) = &self.input {
            out.push(("input", p.display().to_string()));
        }
        out.push(("layout", self.layout.to_string()));
        out.push(("method", self.method.to_string()));
        match self.budget {
            Some(b) if b.unit == comspec::selection::BudgetUnit::Words => {
                out.push(("budget-words", b.limit.to_string()))
            }
            Some(b) => out.push(("budget-bytes", b.limit.to_string())),
            None => {}
        }
        out.push(("embedder", self.embedder.to_string()));
        out.push(("seed", self.seed.to_string()));
        out.push(("k-first", self.hp.k_first.to_string()));
        out.push(("delta", self.hp.delta.to_string()));
        out.push(("alpha", self.hp.alpha.to_string()));
        out.push(("beta", self.hp.beta.to_string()));
        out.push(("gamma", self.hp.gamma.to_string()));
        if let Some(n) = self.max_nodes {
            out.push(("max-nodes", n.to_string()));
        }
        let metrics: Vec<String> = self.metrics.iter().map(Metric::to_string).collect();
        out.push(("metrics", metrics.join(",")));
        out.push(("report", self.report.to_string()));
        if let Some(p) = &self.out {
            out.push(("out", p.display().to_string()));
        }
        out.push(("workers", self.workers.to_string()));
        if let Some(p) = &self.summaries {
            out.push(("summaries", p.display().to_string()));
        }
        out.push(("dump-tree", self.dump_tree.to_string()));
        out.push(("grid-delta", self.grid.delta.to_string()));
        out.push(("grid-alpha", self.grid.alpha.to_string()));
        out.push(("grid-beta", self.grid.beta.to_string()));
        out.push(("grid-gamma", self.grid.gamma.to_string()));
        out.push(("grid-k", format!("{}:{}", self.grid.k.0, self.grid.k.1)));
        out.push((
            "objective",
            format!("{}:{}", self.objective.metric, self.objective.kind),
        ));
        out
    }

    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn require_input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| invalid("--input is required"))
    }

    pub fn require_out(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| invalid("--out is required"))
    }

    pub fn require_budget(&self) -> Result<Budget> {
        let budget = self.budget.ok_or_else(|| {
            invalid("a budget is required (--budget-words N or --budget-bytes N)")
        })?;
        core("budget", budget.validate())?;
        Ok(budget)
    }

    pub fn variant_spec(&self) -> Result<VariantSpec> {
        Ok(VariantSpec {
            max_nodes: self.max_nodes,
            ..VariantSpec::new(self.method, self.hp, self.require_budget()?, self.seed)
        })
    }

    /// Writes the resolved configuration into the output directory.
    pub fn echo(&self, dir: &Path) -> Result<()> {
        let path = dir.join("run_config.txt");
        fs::write(&path, self.to_text()).with_context(|| format!("writing {}", path.display()))
    }
}
