//! Logistic regression and an ellipsoidal approximation of its Rashomon set.
//!
//! The sampler draws coefficients in a box around the fitted model, keeps the
//! ones inside the Rashomon set, fits an ellipsoid to them and repeats from an
//! inflated copy of that ellipsoid.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{Provenance, ReliancePoint, VicCloud};
use crate::data::Dataset;
use crate::ellipsoid::Ellipsoid;
use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::reliance::{mr_empirical_permute, LogisticModel, MRVector, ModelClass, Variant};
use crate::sampling::{self, SeededRng};

/// `log(1 + e^z)` without overflow.
pub fn log1p_exp(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_outcome(d: &Dataset) -> Result<()> {
    if let Some(i) = d.outcome().iter().position(|y| *y != 1.0 && *y != -1.0) {
        return Err(Error::Data(format!(
            "logistic outcome must be -1 or +1, row {} has {}",
            i + 1,
            d.outcome()[i]
        )));
    }
    Ok(())
}

/// `y_i (b_0 + x_i^T b_{1..})` for every row.
fn margins(beta: &DVector<f64>, d: &Dataset) -> DVector<f64> {
    let slope = beta.rows(1, d.p());
    let z = d.features() * slope;
    DVector::from_fn(d.n(), |i, _| d.outcome()[i] * (z[i] + beta[0]))
}

/// `sum_i log(1 + exp(-y_i b^T x_i))` with the intercept in `beta[0]`.
pub fn logistic_loss(beta: &DVector<f64>, d: &Dataset) -> Result<f64> {
    check_len(d.p() + 1, beta.len())?;
    check_outcome(d)?;
    Ok(loss_unchecked(beta, d))
}

fn loss_unchecked(beta: &DVector<f64>, d: &Dataset) -> f64 {
    margins(beta, d).iter().map(|m| log1p_exp(-m)).sum()
}

fn gradient_hessian(beta: &DVector<f64>, d: &Dataset) -> (DVector<f64>, DMatrix<f64>) {
    let q = d.p() + 1;
    let m = margins(beta, d);
    let x = d.features();
    let mut g = DVector::zeros(q);
    let mut h = DMatrix::zeros(q, q);
    let mut row = DVector::zeros(q);
    for i in 0..d.n() {
        row[0] = 1.0;
        for j in 0..d.p() {
            row[j + 1] = x[(i, j)];
        }
        let s = sigmoid(-m[i]);
        g.axpy(-d.outcome()[i] * s, &row, 1.0);
        h.ger(s * (1.0 - s), &row, &row, 1.0);
    }
    (g, h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    #[serde(with = "dvec")]
    pub beta: DVector<f64>,
    pub loss: f64,
    /// Square roots of the diagonal of the inverse Hessian.
    #[serde(with = "dvec")]
    pub standard_errors: DVector<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Norm above which the iterates are taken to diverge.
const DIVERGENCE_NORM: f64 = 1e4;

/// Newton's method with step halving. Converged when the per-observation
/// gradient norm is below `tol`.
pub fn fit_logistic(d: &Dataset, tol: f64, max_iter: usize) -> Result<LogisticFit> {
    check_outcome(d)?;
    let q = d.p() + 1;
    let n = d.n() as f64;
    let mut beta = DVector::zeros(q);
    let mut loss = loss_unchecked(&beta, d);
    for it in 0..=max_iter {
        let (g, h) = gradient_hessian(&beta, d);
        let gnorm = g.norm() / n;
        if gnorm < tol {
            let cov = linalg::inverse(&h, "logistic Hessian")?;
            return Ok(LogisticFit {
                standard_errors: cov.diagonal().map(f64::sqrt),
                beta,
                loss,
                iterations: it,
                gradient_norm: gnorm,
            });
        }
        if it == max_iter {
            return Err(Error::NoConvergence {
                iterations: max_iter,
                gradient_norm: gnorm,
            });
        }
        let step = match linalg::solve(&h, &g, "logistic Hessian") {
            Ok(s) => s,
            // a singular Hessian far from the origin means the margins saturate
            Err(_) if beta.norm() > 10.0 => return Err(Error::Separation),
            Err(e) => return Err(e),
        };
        let mut t = 1.0;
        let mut next = &beta - &step;
        let mut next_loss = loss_unchecked(&next, d);
        // rounding makes the loss flat near the optimum; accept ties there
        let tie = 1e-12 * loss.abs();
        while next_loss > loss + tie && t > 1e-10 {
            t *= 0.5;
            next = &beta - &step * t;
            next_loss = loss_unchecked(&next, d);
        }
        beta = next;
        loss = next_loss.min(loss);
        if margins(&beta, d).iter().all(|m| *m > 0.0) || beta.norm() > DIVERGENCE_NORM {
            return Err(Error::Separation);
        }
    }
    unreachable!("loop returns on its last iteration")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Draws per round.
    pub n_per_round: usize,
    /// Half-width of the initial box in units of standard errors.
    pub box_scale: f64,
    pub r: f64,
    pub m_rounds: usize,
    /// Scale of the diagnostic ellipsoid.
    pub r_bar: f64,
    pub seed: u64,
    /// Radius drawn as `U^(1/radial_exponent)`; 1 is the uniform radial law,
    /// the dimension gives uniform points in the ball.
    pub radial_exponent: f64,
    /// Permutations per feature for survivor reliance.
    pub n_shuffles: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_per_round: 500,
            box_scale: 1.0,
            r: 1.2,
            m_rounds: 3,
            r_bar: 1.5,
            seed: 0,
            radial_exponent: 1.0,
            n_shuffles: 20,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_round < 10 {
            return Err(Error::config("n_per_round", "must be >= 10"));
        }
        if !(self.box_scale > 0.0) || !self.box_scale.is_finite() {
            return Err(Error::config("box_scale", "must be > 0"));
        }
        if !(self.r > 1.0) || !self.r.is_finite() {
            return Err(Error::config("r", "must be > 1"));
        }
        if !(self.r <= self.r_bar) || !self.r_bar.is_finite() {
            return Err(Error::config("r_bar", "must be >= r"));
        }
        if self.m_rounds < 1 {
            return Err(Error::config("m_rounds", "must be >= 1"));
        }
        if !(self.radial_exponent > 0.0) {
            return Err(Error::config("radial_exponent", "must be > 0"));
        }
        if self.n_shuffles < 1 {
            return Err(Error::config("n_shuffles", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub retained_count: usize,
    /// Ellipsoid fitted to this round's survivors.
    pub ellipsoid: Ellipsoid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerReport {
    /// Round 0 is the box round, rounds 1..=M sample from ellipsoids.
    pub rounds: Vec<RoundReport>,
    pub survival_rate: f64,
    pub final_ellipsoid: Ellipsoid,
    pub fit: LogisticFit,
    pub threshold: f64,
}

impl SamplerReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "rounds": self.rounds.iter().map(|r| serde_json::json!({
                "retained_count": r.retained_count,
                "ellipsoid": r.ellipsoid.to_json(),
            })).collect::<Vec<_>>(),
            "survival_rate": self.survival_rate,
            "final_ellipsoid": self.final_ellipsoid.to_json(),
            "best_loss": self.fit.loss,
            "threshold": self.threshold,
            "beta_hat": self.fit.beta.iter().collect::<Vec<_>>(),
            "standard_errors": self.fit.standard_errors.iter().collect::<Vec<_>>(),
        })
    }
}

/// Convergence tolerance used by the sampler's own fit.
pub const FIT_TOL: f64 = 1e-10;
pub const FIT_MAX_ITER: usize = 100;

/// Stream index of the diagnostic draw; distinct from every sampling round.
const DIAGNOSTIC_ROUND: u32 = u32::MAX;

fn box_draw(rng: &mut SeededRng, fit: &LogisticFit, scale: f64) -> DVector<f64> {
    DVector::from_fn(fit.beta.len(), |k, _| {
        let u: f64 = rng.random();
        fit.beta[k] + scale * fit.standard_errors[k] * (2.0 * u - 1.0)
    })
}

fn ellipsoid_draw(rng: &mut SeededRng, e: &Ellipsoid, radial_exponent: f64) -> DVector<f64> {
    let dir = sampling::unit_sphere(rng, e.dim());
    let u: f64 = rng.random();
    e.from_unit(&(dir * u.powf(1.0 / radial_exponent)))
}

/// Sampling state after some number of rounds. A run with `M` rounds is a
/// prefix of any longer run with the same seed, which lets tuning share work.
struct Rounds<'a> {
    d: &'a Dataset,
    cfg: &'a SamplerConfig,
    fit: LogisticFit,
    threshold: f64,
    rounds: Vec<RoundReport>,
    survivors: Vec<DVector<f64>>,
}

impl<'a> Rounds<'a> {
    fn start(d: &'a Dataset, epsilon: f64, cfg: &'a SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::config("epsilon", "must be >= 0"));
        }
        let fit = fit_logistic(d, FIT_TOL, FIT_MAX_ITER)?;
        let threshold = (1.0 + epsilon) * fit.loss;
        let mut state = Rounds {
            d,
            cfg,
            fit,
            threshold,
            rounds: Vec::with_capacity(cfg.m_rounds + 1),
            survivors: Vec::new(),
        };
        state.step()?;
        Ok(state)
    }

    fn keep(&self, b: &DVector<f64>) -> bool {
        loss_unchecked(b, self.d) <= self.threshold
    }

    /// Draws the next round: the box first, then enlarged ellipsoids.
    fn step(&mut self) -> Result<()> {
        let round = self.rounds.len();
        let proposal = self.rounds.last().map(|r| r.ellipsoid.scaled(self.cfg.r)).transpose()?;
        let survivors: Vec<DVector<f64>> = (0..self.cfg.n_per_round)
            .map(|i| {
                let mut rng = sampling::candidate_rng(self.cfg.seed, round as u32, i as u32);
                match &proposal {
                    None => box_draw(&mut rng, &self.fit, self.cfg.box_scale),
                    Some(e) => ellipsoid_draw(&mut rng, e, self.cfg.radial_exponent),
                }
            })
            .filter(|b| self.keep(b))
            .collect();
        if survivors.is_empty() {
            return Err(Error::AllEliminated { round: round + 1 });
        }
        let ellipsoid = fit_pca_ellipsoid(&survivors)?;
        self.rounds.push(RoundReport {
            retained_count: survivors.len(),
            ellipsoid,
        });
        self.survivors = survivors;
        Ok(())
    }

    /// Share of draws from the last ellipsoid enlarged by `r_bar` that survive.
    fn survival_rate(&self) -> Result<f64> {
        let last = &self.rounds.last().expect("at least one round").ellipsoid;
        let diagnostic = last.scaled(self.cfg.r_bar)?;
        let alive = (0..self.cfg.n_per_round)
            .filter(|&i| {
                let mut rng = sampling::candidate_rng(self.cfg.seed, DIAGNOSTIC_ROUND, i as u32);
                self.keep(&ellipsoid_draw(&mut rng, &diagnostic, self.cfg.radial_exponent))
            })
            .count();
        Ok(alive as f64 / self.cfg.n_per_round as f64)
    }

    fn finish(self) -> Result<(Vec<DVector<f64>>, SamplerReport)> {
        let survival_rate = self.survival_rate()?;
        let final_ellipsoid = self.rounds.last().expect("at least one round").ellipsoid.clone();
        let report = SamplerReport {
            rounds: self.rounds,
            survival_rate,
            final_ellipsoid,
            fit: self.fit,
            threshold: self.threshold,
        };
        Ok((self.survivors, report))
    }
}

/// Survivors of the final round plus the per-round record.
fn run_sampler(d: &Dataset, epsilon: f64, cfg: &SamplerConfig) -> Result<(Vec<DVector<f64>>, SamplerReport)> {
    let mut state = Rounds::start(d, epsilon, cfg)?;
    for _ in 0..cfg.m_rounds {
        state.step()?;
    }
    state.finish()
}

/// Approximate logistic Rashomon set and its reliance cloud (ratio variant).
///
/// Permutations for feature `j` are shared by all survivors, so differences
/// between points are not blurred by permutation noise.
pub fn sample_rashomon_logistic(d: &Dataset, epsilon: f64, cfg: &SamplerConfig) -> Result<(VicCloud, SamplerReport)> {
    let (survivors, report) = run_sampler(d, epsilon, cfg)?;
    let mr_seed = sampling::mix(cfg.seed, 0x4d52);
    let mut points = Vec::with_capacity(survivors.len());
    for beta in survivors {
        let model = LogisticModel {
            beta: beta.iter().copied().collect(),
        };
        let values: Result<Vec<f64>> = (0..d.p())
            .map(|j| {
                let seed = sampling::mix(mr_seed, j as u64);
                mr_empirical_permute(&model, d, j, cfg.n_shuffles, seed, Variant::Ratio)
            })
            .collect();
        let loss = loss_unchecked(&beta, d);
        points.push(ReliancePoint {
            beta: model.beta,
            mr: MRVector {
                values: values?,
                variant: Variant::Ratio,
                model_loss: loss,
            },
            loss,
        });
    }
    let mut param_names = vec!["beta_intercept".to_string()];
    param_names.extend(d.names().iter().map(|n| format!("beta_{n}")));
    let provenance = Provenance {
        model_class: ModelClass::Logistic,
        variant: Variant::Ratio,
        epsilon,
        c: None,
        seed: Some(cfg.seed),
        best_loss: report.fit.loss,
        threshold: report.threshold,
        feature_names: d.names().to_vec(),
        param_names,
        settings: serde_json::to_value(cfg).expect("config serializes"),
    };
    Ok((VicCloud::new(points, provenance)?, report))
}

/// Center at the mean, axes along the sample principal components, radii the
/// largest absolute projection on each axis. If box corners still fall outside,
/// all radii grow by a common factor until every point is enclosed.
pub fn fit_pca_ellipsoid(points: &[DVector<f64>]) -> Result<Ellipsoid> {
    let first = points
        .first()
        .ok_or_else(|| Error::Degenerate("no points to fit".into()))?;
    let q = first.len();
    for pt in points {
        check_len(q, pt.len())?;
    }
    if points.len() < q + 1 {
        return Err(Error::Degenerate(format!(
            "{} points cannot span {q} dimensions",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean = points.iter().fold(DVector::zeros(q), |acc, p| acc + p) / n;
    let mut cov = DMatrix::zeros(q, q);
    for pt in points {
        let d = pt - &mean;
        cov.ger(1.0 / (n - 1.0), &d, &d, 1.0);
    }
    let (values, vectors) = linalg::sorted_eigen(&cov);
    let top = values[q - 1];
    if !(values[0] >= 1e-12 * top) || !(top > 0.0) {
        return Err(Error::Degenerate(format!(
            "points are rank deficient (eigenvalues {:e} .. {:e})",
            values[0], top
        )));
    }
    let proj: Vec<DVector<f64>> = points.iter().map(|p| vectors.transpose() * (p - &mean)).collect();
    let radii = DVector::from_fn(q, |k, _| proj.iter().map(|w| w[k].abs()).fold(0.0, f64::max));
    let worst = proj
        .iter()
        .map(|w| w.component_div(&radii).norm_squared())
        .fold(0.0, f64::max);
    let radii = if worst > 1.0 { radii * worst.sqrt() } else { radii };
    Ellipsoid::new(mean, radii, vectors)
}

/// Target fraction of box draws surviving the first elimination.
pub const BOX_TARGET: f64 = 0.75;
/// Accepted absolute deviation from [`BOX_TARGET`].
pub const BOX_WINDOW: f64 = 0.075;

/// Box-round survival at a given scale. Draws depend only on the seed, so the
/// rate is non-increasing in `scale` (the Rashomon set is convex and contains
/// the fitted model).
pub fn box_survival(d: &Dataset, epsilon: f64, cfg: &SamplerConfig, fit: &LogisticFit, scale: f64) -> f64 {
    let threshold = (1.0 + epsilon) * fit.loss;
    let alive = (0..cfg.n_per_round)
        .filter(|&i| {
            let mut rng = sampling::candidate_rng(cfg.seed, 0, i as u32);
            loss_unchecked(&box_draw(&mut rng, fit, scale), d) <= threshold
        })
        .count();
    alive as f64 / cfg.n_per_round as f64
}

/// Bisection for a box scale whose initial survival is within
/// `BOX_TARGET +/- BOX_WINDOW`.
pub fn calibrate_box_scale(d: &Dataset, epsilon: f64, cfg: &SamplerConfig) -> Result<f64> {
    cfg.validate()?;
    if !(epsilon > 0.0) {
        return Err(Error::config("epsilon", "must be > 0 to calibrate the box"));
    }
    let fit = fit_logistic(d, FIT_TOL, FIT_MAX_ITER)?;
    let rate = |s: f64| box_survival(d, epsilon, cfg, &fit, s);
    let ok = |v: f64| (v - BOX_TARGET).abs() <= BOX_WINDOW;
    let (mut lo, mut hi) = (cfg.box_scale, cfg.box_scale);
    for _ in 0..60 {
        if rate(lo) >= BOX_TARGET {
            break;
        }
        lo *= 0.5;
    }
    for _ in 0..60 {
        if rate(hi) <= BOX_TARGET {
            break;
        }
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = (lo * hi).sqrt();
        let v = rate(mid);
        if ok(v) {
            return Ok(mid);
        }
        if v > BOX_TARGET {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence {
        iterations: 100,
        gradient_norm: f64::NAN,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub r: f64,
    pub m: usize,
    pub survival_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub chosen_r: f64,
    pub chosen_m: usize,
    pub table: Vec<TuneRow>,
}

impl TuneResult {
    pub fn table_csv(&self) -> String {
        let mut out = String::from("r,M,survival_rate\n");
        for row in &self.table {
            out.push_str(&format!("{},{},{}\n", row.r, row.m, row.survival_rate));
        }
        out
    }

    pub fn survival(&self, r: f64, m: usize) -> Option<f64> {
        self.table
            .iter()
            .find(|row| row.r == r && row.m == m)
            .map(|row| row.survival_rate)
    }
}

/// Default plateau threshold: 2 percentage points.
pub const PLATEAU_THRESHOLD: f64 = 0.02;

/// First index from which all consecutive changes stay below `threshold`.
fn plateau_start(rates: &[f64], threshold: f64) -> Option<usize> {
    if rates.len() < 2 {
        return None;
    }
    let mut start = 0;
    for k in 1..rates.len() {
        if (rates[k] - rates[k - 1]).abs() >= threshold {
            start = k;
        }
    }
    (start + 1 < rates.len()).then_some(start)
}

/// Runs the sampler on the `(r, M)` grid and picks the smallest `r` at which the
/// survival rate (at the largest `M`) has stabilized, then the smallest `M` at
/// which it is stable across `M` for that `r`.
pub fn tune_sampler(
    d: &Dataset,
    epsilon: f64,
    r_candidates: &[f64],
    m_candidates: &[usize],
    r_bar: f64,
    base_cfg: &SamplerConfig,
    threshold: f64,
) -> Result<TuneResult> {
    let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
    if r_candidates.is_empty() || !sorted(r_candidates) {
        return Err(Error::config(
            "r_candidates",
            "must be non-empty and strictly ascending",
        ));
    }
    let m_f: Vec<f64> = m_candidates.iter().map(|m| *m as f64).collect();
    if m_candidates.is_empty() || !sorted(&m_f) {
        return Err(Error::config(
            "m_candidates",
            "must be non-empty and strictly ascending",
        ));
    }
    let r_max = *r_candidates.last().expect("non-empty");
    if !(r_bar >= r_max) {
        return Err(Error::config("r_bar", format!("must be >= max r candidate {r_max}")));
    }
    let mut table = Vec::with_capacity(r_candidates.len() * m_candidates.len());
    for &r in r_candidates {
        let cfg = SamplerConfig {
            r,
            m_rounds: *m_candidates.last().expect("non-empty"),
            r_bar,
            ..base_cfg.clone()
        };
        // each M is a prefix of the longest run
        let mut state = Rounds::start(d, epsilon, &cfg)?;
        for &m in m_candidates {
            while state.rounds.len() < m + 1 {
                state.step()?;
            }
            table.push(TuneRow {
                r,
                m,
                survival_rate: state.survival_rate()?,
            });
        }
    }
    let nm = m_candidates.len();
    let at_max_m: Vec<f64> = (0..r_candidates.len())
        .map(|i| table[i * nm + nm - 1].survival_rate)
        .collect();
    let ri = plateau_start(&at_max_m, threshold).ok_or_else(|| {
        Error::NoPlateau(format!(
            "survival by r at M={}: {at_max_m:?}; more draws per round reduce the noise",
            m_candidates[nm - 1]
        ))
    })?;
    let by_m: Vec<f64> = (0..nm).map(|k| table[ri * nm + k].survival_rate).collect();
    let mi = if nm == 1 {
        0
    } else {
        plateau_start(&by_m, threshold)
            .ok_or_else(|| Error::NoPlateau(format!("survival by M at r={}: {by_m:?}", r_candidates[ri])))?
    };
    Ok(TuneResult {
        chosen_r: r_candidates[ri],
        chosen_m: m_candidates[mi],
        table,
    })
}

mod dvec {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}
