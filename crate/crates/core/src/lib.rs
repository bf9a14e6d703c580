//! Variable importance clouds: the model reliance of every model in a
//! Rashomon set, for ridge regression, logistic regression and decision
//! tables on binary features.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cloud;
pub mod data;
pub mod ellipsoid;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod linear;
pub mod logistic;
pub mod reliance;
pub mod sampling;
pub mod tree;
pub mod vic_linear;
pub mod vid;

pub use cloud::{Provenance, ReliancePoint, VicCloud};
pub use data::{
    covariance_of, gen_binary, gen_gaussian, load_csv, load_csv_with, normalize, write_csv, CellCounts, ColumnRef,
    CovarianceStructure, Dataset, DatasetKind, GaussianSpec, KindHint,
};
pub use ellipsoid::Ellipsoid;
pub use error::{Error, ErrorClass, Result};
pub use inference::{empirical_mr_quadratic, mr_wald_statistic, sandwich_variance, RelianceTest};
pub use linear::{best_ridge, contains_linear, rashomon_ellipsoid_linear, ridge_loss, RidgeSpec};
pub use logistic::{
    calibrate_box_scale, fit_logistic, fit_pca_ellipsoid, logistic_loss, sample_rashomon_logistic, tune_sampler,
    LogisticFit, SamplerConfig, SamplerReport, TuneResult,
};
pub use reliance::{
    mr_binary_exact, mr_empirical_permute, mr_linear, mr_vector, LinearModel, LogisticModel, MRVector, ModelClass,
    Predictor, RelianceSource, Variant,
};
pub use tree::{
    best_tree, enumerate_tree_class, enumerate_trees, mr_shift_single_flip, tabulate_cells, CellTable, FlipTree,
    TreeModel, TreeRashomon, TreeSetConfig,
};
pub use vic_linear::{
    approx_error_bound, jacobian_mr, mr_inverse_approx, vic_center_radii_uncorrelated, vic_ellipsoid_approx,
    vic_forward_map, JacobianMR,
};
pub use vid::{bounds_table, cluster_kmeans, project_pairs, render_vid, BoundsTable, Format, VidGrid};
