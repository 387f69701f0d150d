//! Run settings: a TOML file merged under command-line flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use qpart_core::allocators::{Method, DEFAULT_ENUM_CAP};
use qpart_core::community::EdgeWeighting;
use qpart_core::secure::DEFAULT_THRESHOLD_FACTOR;
use qpart_core::DEFAULT_ALPHA;

/// Every tunable, all optional so that a file and the flags can be layered.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub backend: Option<String>,
    pub calibration_seed: Option<u64>,
    pub method: Option<String>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub enum_cap: Option<usize>,
    pub max_leaf: Option<usize>,
    pub raw_error_weights: Option<bool>,
    pub threshold_factor: Option<f64>,
    pub crosstalk: Option<PathBuf>,
    pub crosstalk_random: Option<String>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("failed to read {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
    }

    /// Values in `self` win over values in `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        Settings {
            backend: self.backend.or(lower.backend),
            calibration_seed: self.calibration_seed.or(lower.calibration_seed),
            method: self.method.or(lower.method),
            alpha: self.alpha.or(lower.alpha),
            gamma: self.gamma.or(lower.gamma),
            seed: self.seed.or(lower.seed),
            seeds: self.seeds.or(lower.seeds),
            enum_cap: self.enum_cap.or(lower.enum_cap),
            max_leaf: self.max_leaf.or(lower.max_leaf),
            raw_error_weights: self.raw_error_weights.or(lower.raw_error_weights),
            threshold_factor: self.threshold_factor.or(lower.threshold_factor),
            crosstalk: self.crosstalk.or(lower.crosstalk),
            crosstalk_random: self.crosstalk_random.or(lower.crosstalk_random),
        }
    }
}

/// Random crosstalk request, `k=K,count=C,seed=S`. `k` may be an inclusive
/// range `A..B`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RandomCrosstalk {
    pub ks: Vec<usize>,
    pub count: usize,
    pub seed: u64,
}

impl FromStr for RandomCrosstalk {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut ks = None;
        let mut count = 1;
        let mut seed = 0;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .with_context(|| format!("expected key=value in crosstalk spec, got `{part}`"))?;
            match key.trim() {
                "k" => ks = Some(parse_range(value.trim())?),
                "count" => count = value.trim().parse().with_context(|| format!("bad count `{value}`"))?,
                "seed" => seed = value.trim().parse().with_context(|| format!("bad seed `{value}`"))?,
                other => bail!("unknown crosstalk key `{other}` (expected k, count, seed)"),
            }
        }
        let ks = ks.context("crosstalk spec needs k=")?;
        if count == 0 {
            bail!("crosstalk count must be at least 1");
        }
        Ok(RandomCrosstalk { ks, count, seed })
    }
}

fn parse_range(s: &str) -> Result<Vec<usize>> {
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.parse().with_context(|| format!("bad range start `{a}`"))?;
        let b: usize = b.parse().with_context(|| format!("bad range end `{b}`"))?;
        if a > b {
            bail!("empty range {s}");
        }
        Ok((a..=b).collect())
    } else {
        Ok(vec![s.parse().with_context(|| format!("bad k `{s}`"))?])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CrosstalkSource {
    File(PathBuf),
    Random(RandomCrosstalk),
}

/// Fully resolved settings, recorded verbatim in every manifest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub backend: Option<String>,
    pub calibration_seed: u64,
    pub method: Option<Method>,
    pub alpha: f64,
    pub gamma: f64,
    pub seeds: Vec<u64>,
    pub enum_cap: usize,
    pub max_leaf: usize,
    pub weighting: EdgeWeighting,
    pub threshold_factor: f64,
    /// True when the threshold was set explicitly and overrides loaded models.
    pub threshold_overridden: bool,
    pub crosstalk: Option<CrosstalkSource>,
    pub outputs: Vec<PathBuf>,
}

impl RunConfig {
    pub fn resolve(flags: Settings, file: Option<&Path>) -> Result<Self> {
        let s = match file {
            Some(p) => flags.over(Settings::load(p)?),
            None => flags,
        };
        let method = s
            .method
            .as_deref()
            .map(|m| Method::from_str(m).map_err(|e| anyhow::anyhow!("{e}")))
            .transpose()?;
        let seeds = match (s.seeds, s.seed) {
            (Some(list), _) => list,
            (None, Some(seed)) => vec![seed],
            (None, None) => vec![0],
        };
        let crosstalk = match (s.crosstalk, s.crosstalk_random) {
            (Some(_), Some(_)) => bail!("--crosstalk and --crosstalk-random are mutually exclusive"),
            (Some(p), None) => Some(CrosstalkSource::File(p)),
            (None, Some(r)) => Some(CrosstalkSource::Random(r.parse()?)),
            (None, None) => None,
        };
        let cfg = RunConfig {
            backend: s.backend,
            calibration_seed: s.calibration_seed.unwrap_or(0),
            method,
            alpha: s.alpha.unwrap_or(DEFAULT_ALPHA),
            gamma: s.gamma.unwrap_or(1.0),
            seeds,
            enum_cap: s.enum_cap.unwrap_or(DEFAULT_ENUM_CAP),
            max_leaf: s.max_leaf.unwrap_or(4),
            weighting: if s.raw_error_weights.unwrap_or(false) {
                EdgeWeighting::RawError
            } else {
                EdgeWeighting::Fidelity
            },
            threshold_factor: s.threshold_factor.unwrap_or(DEFAULT_THRESHOLD_FACTOR),
            threshold_overridden: s.threshold_factor.is_some(),
            crosstalk,
            outputs: Vec::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            bail!("alpha must be a non-negative number, got {}", self.alpha);
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            bail!("gamma must be positive, got {}", self.gamma);
        }
        if self.enum_cap == 0 {
            bail!("enum-cap must be at least 1");
        }
        if self.max_leaf == 0 {
            bail!("max-leaf must be at least 1");
        }
        if !(self.threshold_factor.is_finite() && self.threshold_factor > 0.0) {
            bail!("threshold-factor must be positive, got {}", self.threshold_factor);
        }
        if self.seeds.is_empty() {
            bail!("at least one seed is required");
        }
        Ok(())
    }

    pub fn backend(&self) -> Result<&str> {
        self.backend.as_deref().context("--backend is required")
    }
}
