//! Run configuration as flat `key = value` text.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::builder::{CfVariant, DEFAULT_K_SIM};
use crate::error::{Error, Result};
use crate::estimators::ScoreAttribution;
use crate::tasks::cf::SyntheticCf;
use crate::tasks::{LambdaSchedule, TrainConfig};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Raw,
}

/// Everything a CLI run needs. Built from defaults, then a config file, then
/// command-line overrides.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub data: Option<PathBuf>,
    pub data_format: DataFormat,
    pub raw_n: usize,
    pub raw_dim: usize,
    /// Use only the first `max_items` rows.
    pub max_items: Option<usize>,
    /// Rescale vectors so the mean distance between distinct items is 1.
    pub normalize: bool,
    pub interactions: Option<PathBuf>,
    /// Generator used when no interaction file is given.
    pub synthetic: SyntheticCf,
    pub k: usize,
    pub r: usize,
    pub k_sim: usize,
    pub variant: CfVariant,
    pub anchors: usize,
    pub links_per_anchor: usize,
    pub out: PathBuf,
    /// Input graph for `eval`, `stats` and `embed-anchors`.
    pub graph: Option<PathBuf>,
    pub runs: usize,
    pub er_min_vertices: usize,
    pub er_max_vertices: usize,
    pub er_p: f64,
    pub baseline_dim: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            data: None,
            data_format: DataFormat::Csv,
            raw_n: 0,
            raw_dim: 0,
            max_items: None,
            normalize: true,
            interactions: None,
            synthetic: SyntheticCf::default(),
            k: 32,
            r: 32,
            k_sim: DEFAULT_K_SIM,
            variant: CfVariant::Normal,
            anchors: 0,
            links_per_anchor: 16,
            out: PathBuf::from("out"),
            graph: None,
            runs: 100,
            er_min_vertices: 10,
            er_max_vertices: 25,
            er_p: 0.25,
            baseline_dim: 8,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected true or false, got {value:?}"
        ))),
    }
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "none" || value == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn opt_text<T: ToString>(v: &Option<T>, none: &str) -> String {
    v.as_ref().map_or_else(|| none.to_string(), T::to_string)
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

fn parse_path(value: &str) -> Option<PathBuf> {
    (value != "none").then(|| PathBuf::from(value))
}

impl RunConfig {
    /// Sets one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "lambda" => t.lambda = parse(key, value)?,
            "lambda_schedule" => {
                t.lambda_schedule = match value {
                    "constant" => LambdaSchedule::Constant,
                    "ramp" => LambdaSchedule::default(),
                    _ => {
                        return Err(Error::Config(format!(
                            "{key}: expected constant or ramp, got {value:?}"
                        )))
                    }
                }
            }
            "lambda_ramp_start" | "lambda_ramp_fraction" => {
                let x: f64 = parse(key, value)?;
                let (mut start, mut fraction) = match t.lambda_schedule {
                    LambdaSchedule::Ramp { start, fraction } => (start, fraction),
                    LambdaSchedule::Constant => (0.0, 1.0 / 3.0),
                };
                if key == "lambda_ramp_start" {
                    start = x;
                } else {
                    fraction = x;
                }
                t.lambda_schedule = LambdaSchedule::Ramp { start, fraction };
            }
            "batch_pairs" => t.batch_pairs = parse(key, value)?,
            "batch_sources" => t.batch_sources = parse(key, value)?,
            "batch_users" => t.batch_users = parse(key, value)?,
            "negatives" => t.n_negatives = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "lr" => t.hyper.lr = parse(key, value)?,
            "beta1" => t.hyper.beta1 = parse(key, value)?,
            "beta2" => t.hyper.beta2 = parse(key, value)?,
            "eps" => t.hyper.eps = parse(key, value)?,
            "lr_final_fraction" => t.lr_final_fraction = parse(key, value)?,
            "d_max" => t.d_max = parse_opt(key, value)?,
            "n_samples" => t.n_samples = parse(key, value)?,
            "use_baseline" => t.use_baseline = parse_bool(key, value)?,
            "attribution" => {
                t.attribution = match value {
                    "whole_trace" => ScoreAttribution::WholeTrace,
                    "per_target" => ScoreAttribution::PerTarget,
                    _ => {
                        return Err(Error::Config(format!(
                            "{key}: expected whole_trace or per_target, got {value:?}"
                        )))
                    }
                }
            }
            "param_budget" => t.param_budget = parse_opt(key, value)?,
            "budget_growth" => t.budget_growth = parse(key, value)?,
            "budget_interval" => t.budget_interval = parse(key, value)?,
            "finetune_epochs" => t.finetune_epochs = parse(key, value)?,
            "data" => self.data = parse_path(value),
            "data_format" => {
                self.data_format = match value {
                    "csv" => DataFormat::Csv,
                    "raw" => DataFormat::Raw,
                    _ => {
                        return Err(Error::Config(format!(
                            "{key}: expected csv or raw, got {value:?}"
                        )))
                    }
                }
            }
            "raw_n" => self.raw_n = parse(key, value)?,
            "raw_dim" => self.raw_dim = parse(key, value)?,
            "max_items" => self.max_items = parse_opt(key, value)?,
            "normalize" => self.normalize = parse_bool(key, value)?,
            "interactions" => self.interactions = parse_path(value),
            "synthetic_users" => self.synthetic.n_users = parse(key, value)?,
            "synthetic_items" => self.synthetic.n_items = parse(key, value)?,
            "synthetic_clusters" => self.synthetic.n_clusters = parse(key, value)?,
            "synthetic_per_user" => self.synthetic.interactions_per_user = parse(key, value)?,
            "synthetic_in_cluster" => self.synthetic.in_cluster = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "r" => self.r = parse(key, value)?,
            "k_sim" => self.k_sim = parse(key, value)?,
            "variant" => {
                self.variant = value
                    .parse()
                    .map_err(|e: Error| Error::Config(e.to_string()))?
            }
            "anchors" => self.anchors = parse(key, value)?,
            "links_per_anchor" => self.links_per_anchor = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "graph" => self.graph = parse_path(value),
            "runs" => self.runs = parse(key, value)?,
            "er_min_vertices" => self.er_min_vertices = parse(key, value)?,
            "er_max_vertices" => self.er_max_vertices = parse(key, value)?,
            "er_p" => self.er_p = parse(key, value)?,
            "baseline_dim" => self.baseline_dim = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: no + 1,
                msg: format!("expected key = value, found {line:?}"),
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Parse {
                    line: no + 1,
                    msg: e.to_string(),
                })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        RunConfig::from_text(&std::fs::read_to_string(path)?)
    }

    /// Every key with its current value; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let (schedule, start, fraction) = match t.lambda_schedule {
            LambdaSchedule::Constant => ("constant", None, None),
            LambdaSchedule::Ramp { start, fraction } => ("ramp", Some(start), Some(fraction)),
        };
        let attribution = match t.attribution {
            ScoreAttribution::WholeTrace => "whole_trace",
            ScoreAttribution::PerTarget => "per_target",
        };
        let mut entries: Vec<(&str, String)> = vec![
            ("lambda", t.lambda.to_string()),
            ("lambda_schedule", schedule.into()),
        ];
        if let (Some(s), Some(f)) = (start, fraction) {
            entries.push(("lambda_ramp_start", s.to_string()));
            entries.push(("lambda_ramp_fraction", f.to_string()));
        }
        entries.extend([
            ("batch_pairs", t.batch_pairs.to_string()),
            ("batch_sources", t.batch_sources.to_string()),
            ("batch_users", t.batch_users.to_string()),
            ("negatives", t.n_negatives.to_string()),
            ("epochs", t.epochs.to_string()),
            ("seed", t.seed.to_string()),
            ("lr", t.hyper.lr.to_string()),
            ("beta1", t.hyper.beta1.to_string()),
            ("beta2", t.hyper.beta2.to_string()),
            ("eps", t.hyper.eps.to_string()),
            ("lr_final_fraction", t.lr_final_fraction.to_string()),
            ("d_max", opt_text(&t.d_max, "auto")),
            ("n_samples", t.n_samples.to_string()),
            ("use_baseline", t.use_baseline.to_string()),
            ("attribution", attribution.into()),
            ("param_budget", opt_text(&t.param_budget, "none")),
            ("budget_growth", t.budget_growth.to_string()),
            ("budget_interval", t.budget_interval.to_string()),
            ("finetune_epochs", t.finetune_epochs.to_string()),
            ("data", path_text(&self.data)),
            (
                "data_format",
                if self.data_format == DataFormat::Csv {
                    "csv"
                } else {
                    "raw"
                }
                .into(),
            ),
            ("raw_n", self.raw_n.to_string()),
            ("raw_dim", self.raw_dim.to_string()),
            ("max_items", opt_text(&self.max_items, "none")),
            ("normalize", self.normalize.to_string()),
            ("interactions", path_text(&self.interactions)),
            ("synthetic_users", self.synthetic.n_users.to_string()),
            ("synthetic_items", self.synthetic.n_items.to_string()),
            ("synthetic_clusters", self.synthetic.n_clusters.to_string()),
            (
                "synthetic_per_user",
                self.synthetic.interactions_per_user.to_string(),
            ),
            (
                "synthetic_in_cluster",
                self.synthetic.in_cluster.to_string(),
            ),
            ("k", self.k.to_string()),
            ("r", self.r.to_string()),
            ("k_sim", self.k_sim.to_string()),
            ("variant", self.variant.to_string()),
            ("anchors", self.anchors.to_string()),
            ("links_per_anchor", self.links_per_anchor.to_string()),
            ("out", self.out.display().to_string()),
            ("graph", path_text(&self.graph)),
            ("runs", self.runs.to_string()),
            ("er_min_vertices", self.er_min_vertices.to_string()),
            ("er_max_vertices", self.er_max_vertices.to_string()),
            ("er_p", self.er_p.to_string()),
            ("baseline_dim", self.baseline_dim.to_string()),
        ]);
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.train.validate().map_err(cfg)?;
        if self.k + self.r == 0 {
            return Err(Error::Config("k + r must be at least 1".into()));
        }
        if self.data_format == DataFormat::Raw
            && self.data.is_some()
            && (self.raw_n == 0 || self.raw_dim == 0)
        {
            return Err(Error::Config("raw data needs raw_n and raw_dim".into()));
        }
        if self.er_min_vertices < 2 || self.er_min_vertices > self.er_max_vertices {
            return Err(Error::Config(
                "need 2 <= er_min_vertices <= er_max_vertices".into(),
            ));
        }
        if !(self.er_p > 0.0 && self.er_p <= 1.0) {
            return Err(Error::Config("er_p must be in (0, 1]".into()));
        }
        if self.runs == 0 || self.baseline_dim == 0 || self.links_per_anchor == 0 {
            return Err(Error::Config(
                "runs, baseline_dim and links_per_anchor must be at least 1".into(),
            ));
        }
        if let Some(0) = self.max_items {
            return Err(Error::Config("max_items must be at least 1".into()));
        }
        Ok(())
    }
}
