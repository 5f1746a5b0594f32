use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::combinatorics::{EnsembleKind, MeanderConvention};
use crate::curve::{CurveKind, Symmetry};
use crate::error::{Error, Result};
use crate::measure::{MeasureKind, MeasureParams};
use crate::walks::Boundary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    Measure,
    Curves,
    Walks,
    Permuton,
    Augment,
    Tm,
    Graph,
    Geometry,
    Embed,
    Reconstruct,
    Recover,
    Ensembles,
    Verify,
}

impl Pipeline {
    pub const ALL: [Pipeline; 13] = [
        Pipeline::Measure,
        Pipeline::Curves,
        Pipeline::Walks,
        Pipeline::Permuton,
        Pipeline::Augment,
        Pipeline::Tm,
        Pipeline::Graph,
        Pipeline::Geometry,
        Pipeline::Embed,
        Pipeline::Reconstruct,
        Pipeline::Recover,
        Pipeline::Ensembles,
        Pipeline::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Measure => "measure",
            Pipeline::Curves => "curves",
            Pipeline::Walks => "walks",
            Pipeline::Permuton => "permuton",
            Pipeline::Augment => "augment",
            Pipeline::Tm => "tm",
            Pipeline::Graph => "graph",
            Pipeline::Geometry => "geometry",
            Pipeline::Embed => "embed",
            Pipeline::Reconstruct => "reconstruct",
            Pipeline::Recover => "recover",
            Pipeline::Ensembles => "ensembles",
            Pipeline::Verify => "verify",
        }
    }
}

impl FromStr for Pipeline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Pipeline::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown pipeline {s:?}")))
    }
}

/// Where the reconstruction chain takes its intersection set from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TmSource {
    /// Geometric oracle on the first curve.
    Oracle,
    /// Augmented support of the curve pair.
    Support,
}

impl FromStr for TmSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(TmSource::Oracle),
            "support" => Ok(TmSource::Support),
            _ => Err(Error::Config(format!("unknown tm source {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub pipeline: Pipeline,
    pub depth: u32,
    /// Walk length, or ensemble size parameter.
    pub n: usize,
    pub measure: MeasureKind,
    pub sigma: f64,
    pub gamma: f64,
    pub curve1: CurveKind,
    pub sym1: Symmetry,
    pub curve2: CurveKind,
    pub sym2: Symmetry,
    pub frame: bool,
    pub tm_source: TmSource,
    pub planted: f64,
    pub delta: f64,
    pub eps_cells: f64,
    pub boundary: Boundary,
    pub ensemble: EnsembleKind,
    pub convention: MeanderConvention,
    pub seed: u64,
    pub tol: f64,
    pub walks: usize,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            pipeline: Pipeline::Reconstruct,
            depth: 3,
            n: 4,
            measure: MeasureKind::Lebesgue,
            sigma: MeasureParams::default().sigma,
            gamma: MeasureParams::default().gamma,
            curve1: CurveKind::Hilbert,
            sym1: Symmetry::Identity,
            curve2: CurveKind::Hilbert,
            sym2: Symmetry::Rot90,
            frame: true,
            tm_source: TmSource::Support,
            planted: 0.0,
            delta: 0.0,
            eps_cells: 2.0,
            boundary: Boundary::Free,
            ensemble: EnsembleKind::Meandric,
            convention: MeanderConvention::LineRows,
            seed: 0,
            tol: 1e-10,
            walks: 0,
            threads: None,
            out: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("bad value {value:?} for {key}"))),
    }
}

impl RunConfig {
    pub fn params(&self) -> MeasureParams {
        MeasureParams {
            sigma: self.sigma,
            gamma: self.gamma,
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "pipeline" => self.pipeline = v.parse()?,
            "depth" => self.depth = parse(key, v)?,
            "n" => self.n = parse(key, v)?,
            "measure" => self.measure = v.parse()?,
            "sigma" => self.sigma = parse(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "curve1" => self.curve1 = v.parse()?,
            "sym1" => self.sym1 = v.parse()?,
            "curve2" => self.curve2 = v.parse()?,
            "sym2" => self.sym2 = v.parse()?,
            "frame" => self.frame = parse_bool(key, v)?,
            "tm_source" => self.tm_source = v.parse()?,
            "planted" => self.planted = parse(key, v)?,
            "delta" => self.delta = parse(key, v)?,
            "eps_cells" => self.eps_cells = parse(key, v)?,
            "boundary" => self.boundary = v.parse()?,
            "ensemble" => {
                self.ensemble = match v {
                    "meandric" => EnsembleKind::Meandric,
                    "baxter" => EnsembleKind::Baxter,
                    "all" => EnsembleKind::All,
                    _ => return Err(Error::Config(format!("bad value {v:?} for ensemble"))),
                }
            }
            "convention" => self.convention = v.parse()?,
            "seed" => self.seed = parse(key, v)?,
            "tol" => self.tol = parse(key, v)?,
            "walks" => self.walks = parse(key, v)?,
            "threads" => self.threads = Some(parse(key, v)?),
            "out" => self.out = PathBuf::from(v),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn apply_overrides<'a, I: IntoIterator<Item = &'a str>>(&mut self, items: I) -> Result<()> {
        for item in items {
            let (k, v) = item.split_once('=').ok_or_else(|| Error::Config(format!("expected key=value, got {item:?}")))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.planted) {
            return Err(Error::Config(format!("planted fraction {} outside [0, 1]", self.planted)));
        }
        if !(0.0..0.5).contains(&self.delta) {
            return Err(Error::Config(format!("delta {} outside [0, 0.5)", self.delta)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol {} must be positive", self.tol)));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        Ok(())
    }
}
