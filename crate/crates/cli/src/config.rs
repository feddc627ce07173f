use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use hdch::dynamics::{InitialData, SolverConfig};
use hdch::fixtures::{self, ExpCosine, Mode};
use hdch::sequences::{self, build_profile, BumpProfile, SequenceParams};
use hdch::{chdf, Error, GridSpec, Result, VectorField};

use crate::Common;

/// Reads the configuration file named by `--config`, or the defaults.
pub fn load<T: DeserializeOwned + Default>(common: &Common) -> Result<T> {
    match &common.config {
        None => Ok(T::default()),
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pair {
    U,
    V,
}

/// Initial velocity for `simulate` and `convergence`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Zero {},
    /// `(sin x_1, 0, …)`.
    Sine {},
    Modes {
        modes: Vec<Mode>,
    },
    /// One exp-cosine term per component; the momentum form starts from the
    /// exact `(1-Δ)u_0` sampled on the grid.
    ExpCosine {
        components: Vec<ExpCosine>,
    },
    /// A CHDF file with `d` components on the configured grid.
    File {
        path: PathBuf,
    },
    /// `u_0^n` or `v_0^n`.
    Sequence {
        n: u32,
        s: f64,
        pair: Pair,
        #[serde(default)]
        rho: Option<f64>,
        #[serde(default)]
        plateau: Option<f64>,
    },
}

impl InitialSpec {
    pub fn build(&self, grid: &GridSpec) -> Result<InitialData> {
        Ok(match self {
            InitialSpec::Zero {} => InitialData::Velocity(VectorField::zeros(*grid)),
            InitialSpec::Sine {} => InitialData::Velocity(fixtures::sine_fixture(grid)?),
            InitialSpec::Modes { modes } => InitialData::Velocity(fixtures::modes_field(grid, modes)?),
            InitialSpec::ExpCosine { components } => {
                let (u, _) = fixtures::exp_cosine_pair(grid, components)?;
                InitialData::Velocity(u)
            }
            InitialSpec::File { path } => {
                let (file_grid, comps) = chdf::read_file(path, grid.dealias_fraction)?;
                grid.ensure_same(&file_grid)?;
                InitialData::Velocity(VectorField::new(comps)?)
            }
            InitialSpec::Sequence { n, s, pair, rho, plateau } => {
                let (r0, p0) = BumpProfile::default_radii(grid.dim);
                let profile = build_profile(rho.unwrap_or(r0), plateau.unwrap_or(p0), grid, None)?;
                let params = SequenceParams::new(*n, *s, *grid, profile)?;
                InitialData::Velocity(match pair {
                    Pair::U => sequences::make_u0n(&params),
                    Pair::V => sequences::make_v0n(&params),
                })
            }
        })
    }

    /// Data for the momentum form: the exact momentum when it is known in
    /// closed form, the spectral `(1-Δ)u_0` otherwise.
    pub fn build_momentum(&self, grid: &GridSpec) -> Result<InitialData> {
        match self {
            InitialSpec::ExpCosine { components } => {
                let (_, m) = fixtures::exp_cosine_pair(grid, components)?;
                Ok(InitialData::Momentum(m))
            }
            other => other.build(grid),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub grid: GridSpec,
    pub solver: SolverConfig,
    pub initial: InitialSpec,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::new(2, 64, 2.0 * PI).expect("valid default grid"),
            solver: SolverConfig::adaptive(0.1).with_samples(vec![0.0, 0.05, 0.1]),
            initial: InitialSpec::Sine {},
        }
    }
}

fn default_s() -> f64 {
    3.0
}
fn default_two() -> f64 {
    2.0
}
fn default_dealias() -> f64 {
    hdch::grid::DEFAULT_DEALIAS_FRACTION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesovConfig {
    #[serde(default)]
    pub field: Option<PathBuf>,
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default = "default_two", with = "hdch::serde_ext::extended_f64")]
    pub p: f64,
    #[serde(default = "default_two", with = "hdch::serde_ext::extended_f64")]
    pub r: f64,
    /// Dealias fraction assumed for the stored grid; it sets the cutoff of
    /// the resolution check.
    #[serde(default = "default_dealias")]
    pub dealias_fraction: f64,
}

impl Default for BesovConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}
