//! Run parameters. One flat record serves as both the flag set and the JSON
//! config schema; flags win over the config file, which wins over defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::run::CliError;

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Master seed; every stage derives its own seed from it
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: $VIC_OUT_ROOT/<command>, else runs/<command>)
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Input CSV with a header row
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Outcome column: name or 1-based index (default: y)
    #[arg(long)]
    pub outcome: Option<String>,
    /// Dataset kind: auto, continuous or binary
    #[arg(long)]
    pub kind: Option<String>,
    /// Synthetic Gaussian spec JSON {corr_xx, corr_xy, n, seed}
    #[arg(long)]
    pub synthetic: Option<PathBuf>,
    /// Binary cell counts JSON {"pattern": [count_pos, count_neg], ...}
    #[arg(long)]
    pub cells: Option<PathBuf>,
    /// Standardize features and outcome before fitting
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub normalize: Option<bool>,

    /// Rashomon factor
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Ridge penalty
    #[arg(long)]
    pub c: Option<f64>,
    /// Boundary points of the linear cloud
    #[arg(long)]
    pub boundary: Option<usize>,
    /// Interior points of the linear cloud
    #[arg(long)]
    pub interior: Option<usize>,

    /// Logistic sampler: draws per round
    #[arg(long)]
    pub n_per_round: Option<usize>,
    /// Logistic sampler: box half-width in standard errors
    #[arg(long)]
    pub box_scale: Option<f64>,
    /// Calibrate the box to about 75% survival before sampling
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub calibrate_box: Option<bool>,
    /// Logistic sampler: ellipsoid enlargement per round
    #[arg(long)]
    pub r: Option<f64>,
    /// Logistic sampler: ellipsoid rounds after the box
    #[arg(long)]
    pub m_rounds: Option<usize>,
    /// Logistic sampler: enlargement of the survival diagnostic
    #[arg(long)]
    pub r_bar: Option<f64>,
    /// Logistic sampler: radius = U^(1/k)
    #[arg(long)]
    pub radial_exponent: Option<f64>,
    /// Permutations per reliance estimate
    #[arg(long)]
    pub n_shuffles: Option<usize>,
    /// Tuning grid for r
    #[arg(long, value_delimiter = ',')]
    pub r_candidates: Option<Vec<f64>>,
    /// Tuning grid for M
    #[arg(long, value_delimiter = ',')]
    pub m_candidates: Option<Vec<usize>>,
    /// Largest survival change that counts as stable
    #[arg(long)]
    pub plateau_threshold: Option<f64>,

    /// Trees split on at most this many features
    #[arg(long)]
    pub max_features: Option<usize>,
    /// Also flip empty cells
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub include_empty: Option<bool>,

    /// Existing cloud CSV (with its JSON sidecar)
    #[arg(long)]
    pub cloud: Option<PathBuf>,
    /// VID features: names or 1-based indices (default: all)
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// VID format: svg or csv
    #[arg(long)]
    pub format: Option<String>,
    /// Color the VID by k-means with this many clusters (0: none)
    #[arg(long)]
    pub clusters: Option<usize>,

    /// Tested feature: name or 1-based index
    #[arg(long)]
    pub feature: Option<String>,
    /// Reliance under the null hypothesis
    #[arg(long)]
    pub null_value: Option<f64>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr, $($f:ident),+ $(,)?) => {
        Params { $($f: $hi.$f.or($lo.$f)),+ }
    };
}

impl Params {
    /// `self` where set, otherwise `lower`.
    pub fn over(self, lower: Params) -> Params {
        overlay!(
            self,
            lower,
            seed,
            out,
            data,
            outcome,
            kind,
            synthetic,
            cells,
            normalize,
            epsilon,
            c,
            boundary,
            interior,
            n_per_round,
            box_scale,
            calibrate_box,
            r,
            m_rounds,
            r_bar,
            radial_exponent,
            n_shuffles,
            r_candidates,
            m_candidates,
            plateau_threshold,
            max_features,
            include_empty,
            cloud,
            features,
            format,
            clusters,
            feature,
            null_value,
        )
    }

    pub fn from_file(path: &Path) -> Result<Params, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn epsilon(&self) -> Result<f64, CliError> {
        let eps = self.epsilon.unwrap_or(0.05);
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(CliError::config("epsilon", format!("must be > 0, got {eps}")));
        }
        Ok(eps)
    }
}
