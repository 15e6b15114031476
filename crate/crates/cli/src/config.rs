//! Flat experiment configuration shared by every subcommand.

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::path::Path;

/// Every knob is optional; each subcommand applies its own documented default.
/// The same keys (snake_case) are accepted in a JSON config file.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Subcommand name; when present in a file it must match the command run.
    #[arg(skip)]
    pub command: Option<String>,

    /// Matrix size N.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of columns p (overrides gamma).
    #[arg(long)]
    pub p: Option<usize>,
    /// Aspect ratio p/N.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Entry law: gaussian, potential or two-point.
    #[arg(long)]
    pub law: Option<String>,
    /// Potential V of a tilted law, e.g. "x^4/10".
    #[arg(long)]
    pub v: Option<String>,
    /// Growth exponent of the potential.
    #[arg(long)]
    pub k: Option<u32>,
    /// Centre and rescale samples of a tilted law.
    #[arg(long)]
    pub standardize: Option<bool>,
    /// Target entry variance E|Y_ij|^2.
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Write the sampled matrix as binary next to the spectrum.
    #[arg(long)]
    pub export_matrix: Option<bool>,

    /// Gaussian-component exponent (a^2 = N^(lambda - 1)).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Add a Gaussian component of exponent lambda to two-point samples.
    #[arg(long)]
    pub gauss_divisible: Option<bool>,
    /// Bulk point where a statistic or kernel is centred.
    #[arg(long)]
    pub u: Option<f64>,
    /// Reference bulk point of the kernel critical points.
    #[arg(long)]
    pub u_star: Option<f64>,
    /// Kernel evaluation abscissas u.
    #[arg(long, value_delimiter = ',')]
    pub u_grid: Option<Vec<f64>>,
    /// Kernel evaluation abscissas v (default: u + tau / (N rho(u))).
    #[arg(long, value_delimiter = ',')]
    pub v_grid: Option<Vec<f64>>,
    /// Offsets tau in unfolded units.
    #[arg(long, value_delimiter = ',')]
    pub tau_grid: Option<Vec<f64>>,
    /// Matrix sizes of a trend run.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Independent spectra per size in a trend run.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Divisor placing the contour endpoints at Re = eps / divisor.
    #[arg(long)]
    pub endpoint_divisor: Option<f64>,

    /// Monte-Carlo trials.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Base seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Spacing or gap arguments s.
    #[arg(long, value_delimiter = ',')]
    pub s_grid: Option<Vec<f64>>,
    /// Largest s of the default s grid.
    #[arg(long)]
    pub s_max: Option<f64>,
    /// Step of the default s grid.
    #[arg(long)]
    pub s_step: Option<f64>,
    /// Gauss-Legendre nodes of the Fredholm determinant.
    #[arg(long)]
    pub order: Option<usize>,

    /// Test function: box or bump.
    #[arg(long)]
    pub function: Option<String>,
    /// Lower edge of the box test function.
    #[arg(long)]
    pub box_lo: Option<f64>,
    /// Upper edge of the box test function.
    #[arg(long)]
    pub box_hi: Option<f64>,
    /// Radius of the bump test function.
    #[arg(long)]
    pub radius: Option<f64>,

    /// Imaginary part of the spectral argument.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Deviation thresholds of the tail table.
    #[arg(long, value_delimiter = ',')]
    pub delta_grid: Option<Vec<f64>>,
    /// Points of the bulk grid.
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Bulk margin as a fraction of the support width.
    #[arg(long)]
    pub bulk_frac: Option<f64>,

    /// Orders compared across Bessel regimes.
    #[arg(long, value_delimiter = ',')]
    pub orders: Option<Vec<u32>>,
    /// Moduli of the Bessel test arguments.
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    /// Arguments (angles) of the Bessel test arguments.
    #[arg(long, value_delimiter = ',')]
    pub angles: Option<Vec<f64>>,
    /// Orders compared against the uniform large-order expansion.
    #[arg(long, value_delimiter = ',')]
    pub large_orders: Option<Vec<u32>>,
    /// Ratios z / nu used with the large orders.
    #[arg(long, value_delimiter = ',')]
    pub ratios: Option<Vec<f64>>,

    /// Smallest Ornstein-Uhlenbeck time.
    #[arg(long)]
    pub t: Option<f64>,
    /// Number of doublings of t listed above the smallest time.
    #[arg(long)]
    pub halvings: Option<u32>,

    /// Override of the primary check-mode tolerance.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Field-wise merge: values set in `flags` win over `self`.
    pub fn overridden_by(self, flags: &ExperimentConfig) -> Result<Self> {
        let mut base = to_map(&self)?;
        for (k, v) in to_map(flags)? {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
        Ok(serde_json::from_value(Value::Object(base))?)
    }

    pub fn check_command(&self, name: &str) -> Result<()> {
        match &self.command {
            Some(c) if c != name => bail!("config is for command `{c}`, not `{name}`"),
            _ => Ok(()),
        }
    }
}

fn to_map(c: &ExperimentConfig) -> Result<Map<String, Value>> {
    match serde_json::to_value(c)? {
        Value::Object(m) => Ok(m),
        _ => unreachable!("config serializes to an object"),
    }
}

/// Resolves knobs against defaults and records every value used.
pub struct Resolver<'a> {
    pub cfg: &'a ExperimentConfig,
    pub used: Map<String, Value>,
}

impl<'a> Resolver<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Self {
        Resolver { cfg, used: Map::new() }
    }

    pub fn get<T: Serialize + Clone>(&mut self, key: &str, value: &Option<T>, default: T) -> T {
        let v = value.clone().unwrap_or(default);
        self.record(key, &v);
        v
    }

    pub fn record<T: Serialize>(&mut self, key: &str, value: &T) {
        self.used.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }
}
