//! Experiment configuration read from TOML or JSON, with command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum WalkKind {
    Ctrw,
    #[default]
    Ctqw,
    Chiral,
    Rotating,
    Qsw,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    #[default]
    Log,
    Linear,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    None,
    /// JSON array with one value per vertex.
    File { path: PathBuf },
    /// Standard normal values; the seed defaults to the experiment seed.
    Gaussian { seed: Option<u64> },
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Omega {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AllKeyword {
    All,
}

#[derive(Deserialize)]
#[serde(untagged, expecting = "\"all\" or a list of [source, target] pairs")]
enum RawPairs {
    Keyword(AllKeyword),
    List(Vec<(usize, usize)>),
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(from = "RawPairs")]
pub enum Pairs {
    /// Every ordered pair with the target reachable from the source.
    #[default]
    All,
    List(Vec<(usize, usize)>),
}

impl From<RawPairs> for Pairs {
    fn from(raw: RawPairs) -> Self {
        match raw {
            RawPairs::Keyword(AllKeyword::All) => Pairs::All,
            RawPairs::List(v) => Pairs::List(v),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: Option<PathBuf>,
    #[serde(default)]
    pub kind: WalkKind,
    #[serde(default)]
    pub potential: PotentialSpec,
    pub omega: Option<Omega>,
    #[serde(default)]
    pub pairs: Pairs,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub points: Option<usize>,
    #[serde(default)]
    pub grid: GridKind,
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    pub realizations: Option<usize>,
    pub output_dir: Option<PathBuf>,
    /// Initial vertex of the density-matrix evolution.
    #[serde(default)]
    pub initial_vertex: usize,
    /// Density-matrix entries to export; all populations when absent.
    pub units: Option<Vec<(usize, usize)>>,
}

/// Command-line values that replace the corresponding config fields.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub graph: Option<PathBuf>,
    pub kind: Option<WalkKind>,
    pub omega: Option<Vec<f64>>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub points: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses `path` as JSON for a `.json` extension and as TOML otherwise.
    /// Relative paths inside the file are taken relative to its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        let mut cfg = Self::parse(&text, is_json).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(g) = cfg.graph.as_mut() {
            rebase(g);
        }
        if let PotentialSpec::File { path } = &mut cfg.potential {
            rebase(path);
        }
        Ok(cfg)
    }

    pub fn parse(text: &str, json: bool) -> Result<Self, String> {
        if json {
            crate::io::from_json(text).map_err(|e| e.to_string())
        } else {
            toml::from_str(text).map_err(|e| e.to_string())
        }
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(g) = o.graph {
            self.graph = Some(g);
        }
        if let Some(k) = o.kind {
            self.kind = k;
        }
        if let Some(w) = o.omega {
            self.omega = Some(match w.as_slice() {
                [x] => Omega::Scalar(*x),
                _ => Omega::Vector(w),
            });
        }
        self.t_min = o.t_min.or(self.t_min);
        self.t_max = o.t_max.or(self.t_max);
        self.points = o.points.or(self.points);
        self.tol = o.tol.or(self.tol);
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = o.output_dir {
            self.output_dir = Some(d);
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |field: &str, msg: String| Err(CliError::Input(format!("{field}: {msg}")));
        if self.graph.is_none() {
            return bad("graph", "no graph file given".into());
        }
        if let Some(p) = self.points {
            if p < 2 {
                return bad("points", format!("need at least 2, got {p}"));
            }
        }
        if let Some(r) = self.realizations {
            if r < 1 {
                return bad("realizations", "need at least 1".into());
            }
        }
        for (field, v) in [("t_min", self.t_min), ("t_max", self.t_max)] {
            if let Some(t) = v {
                if !t.is_finite() || t < 0.0 {
                    return bad(field, format!("must be finite and nonnegative, got {t}"));
                }
            }
        }
        if self.grid == GridKind::Log && self.t_min == Some(0.0) {
            return bad("t_min", "must be positive for a log grid".into());
        }
        if let (Some(lo), Some(hi)) = (self.t_min, self.t_max) {
            if hi <= lo {
                return bad("t_max", format!("must exceed t_min ({hi} <= {lo})"));
            }
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0) {
                return bad("tol", format!("must be positive, got {tol}"));
            }
        }
        match &self.omega {
            Some(Omega::Scalar(w)) if !w.is_finite() => bad("omega", format!("must be finite, got {w}")),
            Some(Omega::Vector(v)) if v.iter().any(|w| !w.is_finite()) => bad("omega", "non-finite frequency".into()),
            _ => Ok(()),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}
