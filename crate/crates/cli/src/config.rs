//! JSON experiment configuration: schema, validation, and conversion into
//! the engine's native types. Rationals travel as "num/den" strings and
//! elements in their per-family text encodings, so exactness survives the
//! file format.

use serde::Deserialize;
use thiserror::Error;

use hj_core::bound::{BoundParams, TailVariant};
use hj_core::fuzz::FuzzLimits;
use hj_core::mc::{McScenario, SamplableLaw};
use hj_core::prob::{FiniteDistribution, Scenario};
use hj_core::report::rat_from_string;
use hj_core::scalar::Scalar;
use hj_core::semigroup::{SemigroupFamily, SemigroupInstance};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Axioms,
    Evaluate,
    ProofCheck,
    Mc,
    Fuzz,
    Sweep,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Axioms => "axioms",
            Mode::Evaluate => "evaluate",
            Mode::ProofCheck => "proof-check",
            Mode::Mc => "mc",
            Mode::Fuzz => "fuzz",
            Mode::Sweep => "sweep",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportPoint {
    pub element: String,
    pub prob: String,
}

/// One step law. Externally tagged: `{"finite": {...}}`,
/// `{"gaussian": {...}}`, or `{"arc": {...}}`.
#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawSpec {
    Finite {
        support: Vec<SupportPoint>,
    },
    Gaussian {
        mean: Vec<f64>,
        scale: f64,
    },
    Arc {
        half_width: f64,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub sizes: Vec<usize>,
    pub thresholds: Vec<String>,
    pub s: String,
}

/// Grid of parameter points: per-block candidate threshold lists crossed
/// with candidate allowances, at a fixed block shape.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub sizes: Vec<usize>,
    pub thresholds: Vec<Vec<String>>,
    pub s: Vec<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzSpec {
    pub min_vars: Option<usize>,
    pub max_vars: Option<usize>,
    pub max_support: Option<usize>,
    pub max_blocks: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub semigroup: Option<SemigroupFamily>,
    #[serde(default)]
    pub variables: Vec<LawSpec>,
    #[serde(default)]
    pub z0: Option<String>,
    #[serde(default)]
    pub z1: Option<String>,
    #[serde(default)]
    pub params: Option<ParamsSpec>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub variant: Option<TailVariant>,
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub samples: Option<u64>,
    #[serde(default)]
    pub level: Option<f64>,
    #[serde(default)]
    pub trials: Option<u64>,
    #[serde(default)]
    pub count: Option<u64>,
    #[serde(default)]
    pub fuzz: Option<FuzzSpec>,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub format: Option<ReportFormat>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn instance(&self) -> Result<SemigroupInstance, ConfigError> {
        let family = self
            .semigroup
            .clone()
            .ok_or_else(|| invalid(format!("mode {} needs a semigroup", self.mode)))?;
        SemigroupInstance::new(family).map_err(|e| invalid(e.to_string()))
    }

    fn anchor(
        &self,
        sg: &SemigroupInstance,
        name: &str,
        value: &Option<String>,
    ) -> Result<hj_core::semigroup::Element, ConfigError> {
        let text = value
            .as_ref()
            .ok_or_else(|| invalid(format!("mode {} needs anchor {name}", self.mode)))?;
        sg.parse_element(text)
            .map_err(|e| invalid(format!("anchor {name}: {e}")))
    }

    fn finite_law(
        &self,
        sg: &SemigroupInstance,
        index: usize,
        points: &[SupportPoint],
    ) -> Result<FiniteDistribution, ConfigError> {
        let mut pairs = Vec::with_capacity(points.len());
        for point in points {
            let element = sg
                .parse_element(&point.element)
                .map_err(|e| invalid(format!("variable {index}: {e}")))?;
            let prob = rat_from_string(&point.prob)
                .map_err(|e| invalid(format!("variable {index}: {e}")))?;
            pairs.push((element, prob));
        }
        FiniteDistribution::new(pairs).map_err(|e| invalid(format!("variable {index}: {e}")))
    }

    /// An enumerable scenario; every law must be finite.
    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        let sg = self.instance()?;
        if self.variables.is_empty() {
            return Err(invalid(format!("mode {} needs variables", self.mode)));
        }
        let mut laws = Vec::with_capacity(self.variables.len());
        for (i, law) in self.variables.iter().enumerate() {
            match law {
                LawSpec::Finite { support } => laws.push(self.finite_law(&sg, i, support)?),
                _ => {
                    return Err(invalid(format!(
                        "variable {i}: mode {} needs finite laws (mc handles the rest)",
                        self.mode
                    )))
                }
            }
        }
        let z0 = self.anchor(&sg, "z0", &self.z0)?;
        let z1 = match &self.z1 {
            Some(_) => self.anchor(&sg, "z1", &self.z1)?,
            None => z0.clone(),
        };
        let mut sc = Scenario::new(sg, laws, z0, z1).map_err(|e| invalid(e.to_string()))?;
        if let Some(budget) = self.budget {
            sc = sc.with_budget(budget);
        }
        Ok(sc)
    }

    /// A samplable scenario; laws may be finite, normal, or arc.
    pub fn mc_scenario(&self) -> Result<McScenario, ConfigError> {
        let sg = self.instance()?;
        if self.variables.is_empty() {
            return Err(invalid(format!("mode {} needs variables", self.mode)));
        }
        let mut laws = Vec::with_capacity(self.variables.len());
        for (i, law) in self.variables.iter().enumerate() {
            laws.push(match law {
                LawSpec::Finite { support } => {
                    SamplableLaw::Finite(self.finite_law(&sg, i, support)?)
                }
                LawSpec::Gaussian { mean, scale } => SamplableLaw::Gaussian {
                    mean: mean.clone(),
                    scale: *scale,
                },
                LawSpec::Arc { half_width } => SamplableLaw::Arc {
                    half_width: *half_width,
                },
            });
        }
        let z0 = self.anchor(&sg, "z0", &self.z0)?;
        let z1 = match &self.z1 {
            Some(_) => self.anchor(&sg, "z1", &self.z1)?,
            None => z0.clone(),
        };
        McScenario::new(sg, laws, z0, z1).map_err(|e| invalid(e.to_string()))
    }

    fn parse_scalar(text: &str, what: &str) -> Result<Scalar, ConfigError> {
        text.parse::<Scalar>()
            .map_err(|e| invalid(format!("{what}: {e}")))
    }

    fn params_from(sizes: &[usize], thresholds: &[Scalar], s: Scalar) -> Result<BoundParams, ConfigError> {
        BoundParams::new(sizes.to_vec(), thresholds.to_vec(), s)
            .map_err(|e| invalid(e.to_string()))
    }

    pub fn bound_params(&self) -> Result<BoundParams, ConfigError> {
        let spec = self
            .params
            .as_ref()
            .ok_or_else(|| invalid(format!("mode {} needs params", self.mode)))?;
        let thresholds = spec
            .thresholds
            .iter()
            .enumerate()
            .map(|(i, t)| Self::parse_scalar(t, &format!("threshold {}", i + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        let s = Self::parse_scalar(&spec.s, "allowance s")?;
        Self::params_from(&spec.sizes, &thresholds, s)
    }

    /// All parameter points of the grid, in row-major order (thresholds
    /// vary fastest in the last block, then the allowance list).
    pub fn grid_points(&self) -> Result<Vec<BoundParams>, ConfigError> {
        let Some(grid) = &self.grid else {
            return Ok(vec![self.bound_params()?]);
        };
        if grid.sizes.is_empty() {
            return Err(invalid("grid needs at least one block size"));
        }
        if grid.thresholds.len() != grid.sizes.len() {
            return Err(invalid(format!(
                "grid has {} block sizes but {} threshold lists",
                grid.sizes.len(),
                grid.thresholds.len()
            )));
        }
        if grid.thresholds.iter().any(|list| list.is_empty()) || grid.s.is_empty() {
            return Err(invalid("grid threshold and allowance lists must be non-empty"));
        }
        let lists: Vec<Vec<Scalar>> = grid
            .thresholds
            .iter()
            .enumerate()
            .map(|(i, list)| {
                list.iter()
                    .map(|t| Self::parse_scalar(t, &format!("grid threshold for block {}", i + 1)))
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        let allowances: Vec<Scalar> = grid
            .s
            .iter()
            .map(|s| Self::parse_scalar(s, "grid allowance"))
            .collect::<Result<_, _>>()?;

        let mut points = Vec::new();
        let mut pick = vec![0usize; lists.len()];
        loop {
            let thresholds: Vec<Scalar> = pick
                .iter()
                .zip(&lists)
                .map(|(&i, list)| list[i].clone())
                .collect();
            for s in &allowances {
                points.push(Self::params_from(&grid.sizes, &thresholds, s.clone())?);
            }
            let mut slot = lists.len();
            loop {
                if slot == 0 {
                    return Ok(points);
                }
                slot -= 1;
                pick[slot] += 1;
                if pick[slot] < lists[slot].len() {
                    break;
                }
                pick[slot] = 0;
            }
        }
    }

    pub fn fuzz_limits(&self) -> FuzzLimits {
        let defaults = FuzzLimits::default();
        let spec = self.fuzz.clone().unwrap_or_default();
        FuzzLimits {
            min_vars: spec.min_vars.unwrap_or(defaults.min_vars),
            max_vars: spec.max_vars.unwrap_or(defaults.max_vars),
            max_support: spec.max_support.unwrap_or(defaults.max_support),
            max_blocks: spec.max_blocks.unwrap_or(defaults.max_blocks),
        }
    }
}
