//! Run configuration: a flat TOML file of string, number and bool values.
//!
//! A file names a scenario; when the name matches a preset the preset
//! supplies every value the file leaves out.  `seed` has no default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baker::BakerSystem;
use crate::classify::ClassifyConfig;
use crate::error::{Error, Result};
use crate::fibre::ArctanFamily;
use crate::graphs::GraphKind;
use crate::grid::Interval;

pub const PRESETS: [&str; 4] = ["fig1a", "fig1b", "fig1c", "fig2"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub seed: Option<u64>,
    pub r: f64,
    pub eps: f64,
    pub a: f64,
    /// `J = [-m, m]`.
    pub m: f64,
    pub i_lo: f64,
    pub i_hi: f64,
    pub hypothesis_grid: usize,
    /// Run even when the hypothesis certificate fails.
    pub allow_uncertified: bool,
    pub grid: usize,
    pub depth: usize,
    pub tol: f64,
    pub max_period: usize,
    pub band: f64,
    pub coincidence_tol: f64,
    pub exponent_samples: usize,
    pub fibre_step: f64,
    pub steps: u64,
    pub burn_in: u64,
    pub max_rows: u64,
    pub y0: f64,
    /// Start of a second trajectory, written next to the first.
    pub y0_alt: Option<f64>,
    pub levelset_nx: usize,
    pub levelset_ny: usize,
    pub levelset_y: f64,
    pub fibre_count: usize,
    pub fibre_y: f64,
    pub dimension_order: usize,
    pub dimension_graph: String,
    pub dimension_check: bool,
    pub output_dir: String,
}

impl ScenarioConfig {
    pub fn base(name: &str) -> Self {
        let c = ClassifyConfig::default();
        ScenarioConfig {
            scenario: name.to_string(),
            seed: None,
            r: 1.1,
            eps: 0.018,
            a: 0.5,
            m: c.m,
            i_lo: c.i.lo,
            i_hi: c.i.hi,
            hypothesis_grid: 1000,
            allow_uncertified: false,
            grid: c.grid,
            depth: c.depth,
            tol: c.tol,
            max_period: c.max_period,
            band: c.band,
            coincidence_tol: c.coincidence_tol,
            exponent_samples: c.exponent_samples,
            fibre_step: c.fibre_step,
            steps: 10_000_000,
            burn_in: 1000,
            max_rows: 1_000_000,
            y0: -1.0,
            y0_alt: None,
            levelset_nx: 400,
            levelset_ny: 400,
            levelset_y: 1.0,
            fibre_count: 4,
            fibre_y: 0.6,
            dimension_order: 10,
            dimension_graph: "all".into(),
            dimension_check: true,
            output_dir: format!("out/{name}"),
        }
    }

    /// Preset for one of [`PRESETS`], or the plain defaults under `name`.
    pub fn preset(name: &str) -> Self {
        let mut c = Self::base(name);
        match name {
            "fig1a" => {
                c.eps = 0.018;
                c.y0 = 1.0;
                c.y0_alt = Some(-1.0);
            }
            "fig1b" => {
                c.eps = 0.019;
                c.y0 = 1.0;
                c.y0_alt = Some(-1.0);
            }
            "fig1c" => c.eps = 0.04,
            "fig2" => c.eps = 0.08,
            _ => {}
        }
        c
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let name = match user.get("scenario") {
            Some(toml::Value::String(s)) => s.clone(),
            Some(_) => return Err(Error::Config("scenario must be a string".into())),
            None => return Err(Error::Config("scenario is required".into())),
        };
        let mut merged = toml::Table::try_from(Self::preset(&name)).map_err(|e| Error::Config(e.to_string()))?;
        for (k, v) in user {
            if matches!(v, toml::Value::Array(_) | toml::Value::Table(_) | toml::Value::Datetime(_)) {
                return Err(Error::Config(format!("{k}: only string, number and bool values are allowed")));
            }
            // integers are accepted where a float is expected
            let v = match (merged.get(&k), v) {
                (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
                (_, v) => v,
            };
            merged.insert(k, v);
        }
        let cfg: ScenarioConfig = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Config("seed is mandatory".into()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.seed()?;
        if self.scenario.is_empty() || self.scenario.contains(['/', '\\']) {
            return bad("scenario must be a plain name".into());
        }
        if !(self.r > 0.0 && self.r.is_finite()) || !self.eps.is_finite() || self.eps.abs() > 1.0 {
            return bad("need r > 0 and |eps| <= 1".into());
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return bad("a must lie in (0, 1)".into());
        }
        if !(self.m > 0.0) || !(self.i_lo < self.i_hi) || self.i_lo < -self.m || self.i_hi > self.m {
            return bad("need -m <= i_lo < i_hi <= m".into());
        }
        if self.hypothesis_grid < 100 || self.grid < 16 || self.depth < 10 {
            return bad("hypothesis_grid >= 100, grid >= 16 and depth >= 10 required".into());
        }
        if !(self.tol > 0.0) || self.max_period == 0 || self.max_period > crate::classify::MAX_PINCH_PERIOD {
            return bad(format!("tol > 0 and 1 <= max_period <= {}", crate::classify::MAX_PINCH_PERIOD));
        }
        if !(self.fibre_step > 0.0 && self.fibre_step <= 1e-3) {
            return bad("fibre_step must lie in (0, 1e-3]".into());
        }
        if self.steps == 0 || self.burn_in >= self.steps || self.max_rows == 0 {
            return bad("need steps > burn_in and max_rows > 0".into());
        }
        if self.levelset_nx < 2 || self.levelset_ny < 2 || !(self.levelset_y > 0.0) {
            return bad("level-set grid needs at least 2 x 2 nodes and levelset_y > 0".into());
        }
        if self.dimension_order == 0 || self.dimension_order > crate::dimension::MAX_ORDER {
            return bad(format!("dimension_order must lie in 1..={}", crate::dimension::MAX_ORDER));
        }
        self.dimension_graphs()?;
        if self.exponent_samples < 100 {
            return bad("exponent_samples >= 100 required".into());
        }
        Ok(())
    }

    pub fn dimension_graphs(&self) -> Result<Vec<GraphKind>> {
        if self.dimension_graph == "all" {
            return Ok(vec![GraphKind::Upper, GraphKind::Lower, GraphKind::Middle]);
        }
        self.dimension_graph.split(',').map(|s| s.trim().parse()).collect()
    }

    pub fn family(&self) -> Result<ArctanFamily> {
        ArctanFamily::new(self.r, self.eps)
    }

    pub fn system(&self) -> Result<BakerSystem> {
        BakerSystem::new(self.a)
    }

    pub fn i(&self) -> Interval {
        Interval { lo: self.i_lo, hi: self.i_hi }
    }

    pub fn j(&self) -> Interval {
        Interval { lo: -self.m, hi: self.m }
    }

    pub fn classify_config(&self) -> ClassifyConfig {
        ClassifyConfig {
            grid: self.grid,
            depth: self.depth,
            m: self.m,
            i: self.i(),
            tol: self.tol,
            max_period: self.max_period,
            seed: self.seed.unwrap_or(0),
            fibre_step: self.fibre_step,
            band: self.band,
            exponent_samples: self.exponent_samples,
            coincidence_tol: self.coincidence_tol,
        }
    }

    pub fn output_path(&self) -> PathBuf {
        PathBuf::from(&self.output_dir)
    }
}
