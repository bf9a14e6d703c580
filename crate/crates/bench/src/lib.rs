//! Fixtures shared by the benchmarks in `benches/`.

use nalgebra::{DMatrix, DVector};
use vic_core::{gen_gaussian, CovarianceStructure, Dataset, DatasetKind, RidgeSpec};

/// Two uncorrelated features with moments `(0.4, 0.5)` against the outcome.
pub fn ridge_spec() -> RidgeSpec {
    let cov = CovarianceStructure::from_correlations(&[vec![1.0, 0.2], vec![0.2, 1.0]], &[0.4, 0.5])
        .expect("valid correlations");
    RidgeSpec::new(cov, 0.0, 0.05).expect("valid spec")
}

/// Gaussian features with labels from a fixed logistic model.
pub fn logistic_data(n: usize, p: usize) -> Dataset {
    let corr: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|k| if i == k { 1.0 } else { 0.2 }).collect())
        .collect();
    let g = gen_gaussian(&corr, &vec![0.0; p], n, 1).expect("valid correlations");
    let mut state = 0x853c49e6748fea9bu64;
    let y = DVector::from_fn(n, |i, _| {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let u = (state >> 11) as f64 / (1u64 << 53) as f64;
        let z: f64 = 0.2
            + (0..p)
                .map(|j| (j as f64 + 1.0).recip() * g.features()[(i, j)])
                .sum::<f64>();
        if u < 1.0 / (1.0 + (-z).exp()) {
            1.0
        } else {
            -1.0
        }
    });
    Dataset::new(
        g.features().clone(),
        y,
        g.names().to_vec(),
        "y",
        DatasetKind::Continuous,
    )
    .expect("valid dataset")
}

/// Binary features where the outcome follows the first feature with 30% noise.
pub fn binary_data(n: usize, p: usize) -> Dataset {
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let x = DMatrix::from_fn(n, p, |_, _| (next() & 1) as f64);
    let y = DVector::from_fn(n, |i, _| {
        let noisy = next() % 10 < 3;
        if (x[(i, 0)] > 0.5) != noisy {
            1.0
        } else {
            -1.0
        }
    });
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    Dataset::new(x, y, names, "y", DatasetKind::BinaryPm1).expect("valid dataset")
}
