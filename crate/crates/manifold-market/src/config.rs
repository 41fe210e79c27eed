//! Run configuration: strict TOML parsing of the manifold, market, dynamics,
//! quadrature, and output blocks.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dynamics::SimOptions;
use crate::error::{ModelError, Result};
use crate::geometry::ManifoldModel;
use crate::market::MarketConfig;

/// Default quadrature resolution when the config omits the block.
pub const DEFAULT_RESOLUTION: usize = 512;

/// The manifold block is parsed flat so unknown keys are rejected; the keys
/// that apply depend on `kind` and are validated in [`ManifoldBlock::build`].
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldBlock {
    pub kind: String,
    pub alpha: Option<f64>,
    pub radius: Option<f64>,
    pub dim: Option<usize>,
    pub radii: Option<Vec<f64>>,
    pub factors: Option<Vec<ManifoldBlock>>,
}

impl ManifoldBlock {
    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        let present: [(&str, bool); 5] = [
            ("alpha", self.alpha.is_some()),
            ("radius", self.radius.is_some()),
            ("dim", self.dim.is_some()),
            ("radii", self.radii.is_some()),
            ("factors", self.factors.is_some()),
        ];
        for (key, set) in present {
            if set && !allowed.contains(&key) {
                return Err(ModelError::Config(format!(
                    "manifold kind '{}' does not take key '{key}'",
                    self.kind
                )));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<ManifoldModel> {
        match self.kind.as_str() {
            "segment" => {
                self.check_keys(&["alpha"])?;
                ManifoldModel::segment(self.alpha.unwrap_or(1.0))
            }
            "circle" => {
                self.check_keys(&["radius"])?;
                ManifoldModel::circle(self.radius.unwrap_or(1.0))
            }
            "hypercube" => {
                self.check_keys(&["dim"])?;
                let dim = self
                    .dim
                    .ok_or_else(|| ModelError::Config("hypercube needs 'dim'".into()))?;
                ManifoldModel::hypercube(dim)
            }
            "torus" => {
                self.check_keys(&["radii"])?;
                let radii = self
                    .radii
                    .clone()
                    .ok_or_else(|| ModelError::Config("torus needs 'radii'".into()))?;
                ManifoldModel::torus(radii)
            }
            "product" => {
                self.check_keys(&["factors"])?;
                let blocks = self
                    .factors
                    .as_ref()
                    .ok_or_else(|| ModelError::Config("product needs 'factors'".into()))?;
                let factors = blocks.iter().map(|b| b.build()).collect::<Result<Vec<_>>>()?;
                ManifoldModel::product(factors)
            }
            other => Err(ModelError::Config(format!("unknown manifold kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarketBlock {
    n: usize,
    beta: f64,
    c: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DynamicsBlock {
    lambda_p: Option<f64>,
    lambda_y: Option<f64>,
    max_iters: Option<usize>,
    tol: Option<f64>,
    record_every: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadratureBlock {
    resolution: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputBlock {
    directory: Option<PathBuf>,
    formats: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    manifold: ManifoldBlock,
    market: MarketBlock,
    #[serde(default)]
    dynamics: DynamicsBlock,
    #[serde(default)]
    quadrature: QuadratureBlock,
    #[serde(default)]
    output: OutputBlock,
}

/// A fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifold: ManifoldModel,
    pub market: MarketConfig,
    pub sim_options: SimOptions,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Parse and validate a TOML document.  Unknown keys anywhere are
    /// rejected.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| ModelError::Config(e.to_string()))?;
        let manifold = raw.manifold.build()?;

        if let Some(formats) = &raw.output.formats {
            for f in formats {
                if f != "csv" {
                    return Err(ModelError::Config(format!("unsupported output format '{f}'")));
                }
            }
        }

        let resolution = raw.quadrature.resolution.unwrap_or(DEFAULT_RESOLUTION);
        let seed = raw.quadrature.seed.unwrap_or(0);
        let market = match (raw.dynamics.lambda_p, raw.dynamics.lambda_y) {
            (Some(lp), Some(ly)) => MarketConfig::new(
                raw.market.n,
                raw.market.beta,
                raw.market.c,
                lp,
                ly,
                resolution,
                seed,
            )?,
            (None, None) => MarketConfig::with_auto_rates(
                &manifold,
                raw.market.n,
                raw.market.beta,
                raw.market.c,
                resolution,
                seed,
            )?,
            _ => {
                return Err(ModelError::Config(
                    "set both lambda_p and lambda_y, or neither (auto-scaled)".into(),
                ))
            }
        };

        let defaults = SimOptions::default();
        let sim_options = SimOptions {
            max_iters: raw.dynamics.max_iters.unwrap_or(defaults.max_iters),
            tol: raw.dynamics.tol.unwrap_or(defaults.tol),
            record_every: raw.dynamics.record_every.unwrap_or(defaults.record_every),
        };
        if sim_options.max_iters < 1 || !(sim_options.tol > 0.0) {
            return Err(ModelError::Config(
                "dynamics needs max_iters >= 1 and tol > 0".into(),
            ));
        }

        Ok(Self {
            manifold,
            market,
            sim_options,
            output_dir: raw.output.directory.unwrap_or_else(|| PathBuf::from(".")),
        })
    }

    /// Read and parse a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ModelError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    /// Replace the run seed (the global `--seed` flag).
    pub fn override_seed(&mut self, seed: u64) {
        self.market.seed = seed;
    }
}
