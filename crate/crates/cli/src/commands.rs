//! Subcommand bodies. Each reads its inputs through the run context so the
//! manifest records every input hash, stage seed and artifact.

use std::path::Path;

use nalgebra::DVector;
use serde_json::json;
use vic_core::logistic::{FIT_MAX_ITER, FIT_TOL, PLATEAU_THRESHOLD};
use vic_core::reliance::mr_linear_vector;
use vic_core::vic_linear::rashomon_half_widths;
use vic_core::{
    approx_error_bound, best_ridge, bounds_table, calibrate_box_scale, cluster_kmeans, covariance_of,
    enumerate_tree_class, fit_logistic, gen_binary, load_csv_with, mr_wald_statistic, normalize, project_pairs,
    rashomon_ellipsoid_linear, render_vid, sample_rashomon_logistic, tune_sampler, vic_center_radii_uncorrelated,
    vic_ellipsoid_approx, vic_forward_map, CellCounts, ColumnRef, CovarianceStructure, Dataset, DatasetKind, Format,
    GaussianSpec, KindHint, RidgeSpec, SamplerConfig, TreeSetConfig, VicCloud,
};

use crate::run::{CliError, Run, StageExt};

type Res<T> = Result<T, CliError>;

fn outcome_ref(s: &str) -> Res<ColumnRef> {
    if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) {
        let k: usize = s
            .parse()
            .map_err(|_| CliError::config("outcome", format!("bad index {s}")))?;
        if k == 0 {
            return Err(CliError::config("outcome", "indices are 1-based"));
        }
        return Ok(ColumnRef::Index(k - 1));
    }
    Ok(ColumnRef::Name(s.to_string()))
}

fn kind_hint(s: Option<&str>) -> Res<KindHint> {
    match s.unwrap_or("auto") {
        "auto" => Ok(KindHint::Auto),
        "continuous" => Ok(KindHint::Continuous),
        "binary" => Ok(KindHint::Binary),
        other => Err(CliError::config(
            "kind",
            format!("expected auto, continuous or binary, got {other:?}"),
        )),
    }
}

/// Feature by name, else by 1-based index.
fn feature_index(names: &[String], s: &str, field: &str) -> Res<usize> {
    if let Some(j) = names.iter().position(|n| n == s) {
        return Ok(j);
    }
    match s.parse::<usize>() {
        Ok(k) if (1..=names.len()).contains(&k) => Ok(k - 1),
        _ => Err(CliError::config(
            field,
            format!("unknown feature {s:?}; have {}", names.join(", ")),
        )),
    }
}

fn gaussian_spec(run: &mut Run, path: &Path) -> Res<GaussianSpec> {
    let text = run.read_input(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::config("synthetic", format!("{}: {e}", path.display())))
}

fn cell_counts(run: &mut Run, path: &Path) -> Res<CellCounts> {
    let text = run.read_input(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::config("cells", format!("{}: {e}", path.display())))
}

/// The dataset named by `data`, `synthetic` or `cells`, in that order.
fn dataset(run: &mut Run) -> Res<Dataset> {
    let p = run.params.clone();
    let d = if let Some(path) = &p.data {
        run.hash_input(path)?;
        let outcome = outcome_ref(p.outcome.as_deref().unwrap_or("y"))?;
        load_csv_with(path, outcome, kind_hint(p.kind.as_deref())?).stage("data")?
    } else if let Some(path) = &p.synthetic {
        gaussian_spec(run, path)?.generate().stage("data")?
    } else if let Some(path) = &p.cells {
        let cells = cell_counts(run, path)?;
        let seed = run.seed("gen");
        gen_binary(&cells, seed).stage("data")?
    } else {
        return Err(CliError::config(
            "data",
            "one of --data, --synthetic or --cells is required",
        ));
    };
    if p.normalize.unwrap_or(false) {
        return normalize(&d).stage("data");
    }
    Ok(d)
}

/// Second moments for the linear class: population moments of a synthetic
/// spec, otherwise empirical moments of the data.
fn linear_moments(run: &mut Run) -> Res<(CovarianceStructure, Vec<String>)> {
    if run.params.data.is_none() {
        if let Some(path) = run.params.synthetic.clone() {
            let spec = gaussian_spec(run, &path)?;
            let names = (1..=spec.corr_xy.len()).map(|j| format!("x{j}")).collect();
            return Ok((spec.covariance().stage("data")?, names));
        }
    }
    let d = dataset(run)?;
    Ok((covariance_of(&d), d.names().to_vec()))
}

fn ridge_spec(run: &mut Run) -> Res<(RidgeSpec, Vec<String>)> {
    let (cov, names) = linear_moments(run)?;
    let eps = run.params.epsilon()?;
    let c = run.params.c.unwrap_or(0.0);
    Ok((RidgeSpec::new(cov, c, eps).stage("linear_rashomon")?, names))
}

fn vec_json(v: &DVector<f64>) -> serde_json::Value {
    json!(v.iter().collect::<Vec<_>>())
}

fn named(names: &[String], v: &DVector<f64>) -> serde_json::Value {
    serde_json::Value::Object(names.iter().cloned().zip(v.iter().map(|x| json!(x))).collect())
}

fn write_cloud(run: &mut Run, cloud: &VicCloud) -> Res<()> {
    cloud.write(run.path("cloud.csv")).stage("output")?;
    run.track("cloud.csv")?;
    run.track("cloud.json")?;
    run.say(format!("cloud: {} points", cloud.len()));
    Ok(())
}

/// Renames a cloud's features and parameters after the dataset's columns.
fn with_names(cloud: VicCloud, names: &[String]) -> Res<VicCloud> {
    let mut prov = cloud.provenance().clone();
    prov.feature_names = names.to_vec();
    if prov.param_names.len() == names.len() {
        prov.param_names = names.iter().map(|n| format!("beta_{n}")).collect();
    }
    VicCloud::new(cloud.points().to_vec(), prov).stage("vic_linear")
}

fn sampler_config(run: &mut Run) -> SamplerConfig {
    let p = &run.params;
    let d = SamplerConfig::default();
    let cfg = SamplerConfig {
        n_per_round: p.n_per_round.unwrap_or(d.n_per_round),
        box_scale: p.box_scale.unwrap_or(d.box_scale),
        r: p.r.unwrap_or(d.r),
        m_rounds: p.m_rounds.unwrap_or(d.m_rounds),
        r_bar: p.r_bar.unwrap_or(d.r_bar),
        radial_exponent: p.radial_exponent.unwrap_or(d.radial_exponent),
        n_shuffles: p.n_shuffles.unwrap_or(d.n_shuffles),
        seed: d.seed,
    };
    SamplerConfig {
        seed: run.seed("sample"),
        ..cfg
    }
}

fn calibrated(run: &mut Run, d: &Dataset, eps: f64, cfg: SamplerConfig) -> Res<SamplerConfig> {
    if !run.params.calibrate_box.unwrap_or(false) {
        return Ok(cfg);
    }
    let box_scale = calibrate_box_scale(d, eps, &cfg).stage("logistic_rashomon")?;
    run.say(format!("calibrated box_scale {box_scale}"));
    Ok(SamplerConfig { box_scale, ..cfg })
}

fn load_cloud(run: &mut Run) -> Res<VicCloud> {
    let path = run
        .params
        .cloud
        .clone()
        .ok_or_else(|| CliError::config("cloud", "--cloud is required"))?;
    run.hash_input(&path)?;
    run.hash_input(&VicCloud::sidecar_path(&path))?;
    VicCloud::read(&path).stage("cloud")
}

pub fn ingest(run: &mut Run) -> Res<()> {
    let d = dataset(run)?;
    let path = run.path("data.csv");
    vic_core::write_csv(&d, &path).stage("output")?;
    run.track("data.csv")?;
    let cov = covariance_of(&d);
    run.write_json("covariance.json", &cov.to_json())?;
    let kind = match d.kind() {
        DatasetKind::Continuous => "continuous",
        DatasetKind::BinaryPm1 => "binary_pm1",
    };
    run.write_json(
        "summary.json",
        &json!({"n": d.n(), "p": d.p(), "kind": kind, "features": d.names(), "outcome": d.outcome_name()}),
    )?;
    run.say(format!("dataset: n = {}, p = {}, kind {kind}", d.n(), d.p()));
    Ok(())
}

pub fn gen(run: &mut Run) -> Res<()> {
    if run.params.synthetic.is_none() && run.params.cells.is_none() {
        return Err(CliError::config("synthetic", "gen needs --synthetic or --cells"));
    }
    if run.params.data.is_some() {
        return Err(CliError::config("data", "gen generates data; drop --data"));
    }
    let d = dataset(run)?;
    vic_core::write_csv(&d, run.path("data.csv")).stage("output")?;
    run.track("data.csv")?;
    if let Some(path) = run.params.synthetic.clone() {
        let spec = gaussian_spec(run, &path)?;
        run.write_json("population_moments.json", &spec.covariance().stage("data")?.to_json())?;
    }
    run.say(format!("generated n = {}, p = {}", d.n(), d.p()));
    Ok(())
}

pub fn fit_linear(run: &mut Run) -> Res<()> {
    let (spec, names) = ridge_spec(run)?;
    let beta = best_ridge(&spec.cov, spec.c).stage("linear_rashomon")?;
    let loss = spec.best_loss().stage("linear_rashomon")?;
    let mr = mr_linear_vector(&beta, &spec.cov).stage("reliance")?;
    run.write_json(
        "fit.json",
        &json!({
            "features": names,
            "beta": named(&names, &beta),
            "best_loss": loss,
            "threshold": spec.threshold().stage("linear_rashomon")?,
            "c": spec.c,
            "epsilon": spec.epsilon,
            "mr_diff": named(&names, &mr),
        }),
    )?;
    run.say(format!("ridge fit: loss {loss}"));
    Ok(())
}

pub fn fit_logistic_cmd(run: &mut Run) -> Res<()> {
    let d = dataset(run)?;
    let fit = fit_logistic(&d, FIT_TOL, FIT_MAX_ITER).stage("logistic_rashomon")?;
    let mut params = vec!["intercept".to_string()];
    params.extend(d.names().iter().cloned());
    run.write_json(
        "fit.json",
        &json!({
            "params": params,
            "beta": vec_json(&fit.beta),
            "standard_errors": vec_json(&fit.standard_errors),
            "loss": fit.loss,
            "iterations": fit.iterations,
            "gradient_norm": fit.gradient_norm,
        }),
    )?;
    run.say(format!(
        "logistic fit: loss {} after {} iterations",
        fit.loss, fit.iterations
    ));
    Ok(())
}

pub fn rashomon_linear(run: &mut Run) -> Res<()> {
    let (spec, names) = ridge_spec(run)?;
    let e = rashomon_ellipsoid_linear(&spec).stage("linear_rashomon")?;
    let mut body = e.to_json();
    body["features"] = json!(names);
    body["best_loss"] = json!(spec.best_loss().stage("linear_rashomon")?);
    body["threshold"] = json!(spec.threshold().stage("linear_rashomon")?);
    body["half_widths"] = vec_json(&e.bounding_half_widths());
    run.write_json("rashomon_ellipsoid.json", &body)?;
    run.say(format!("Rashomon ellipsoid radii {:?}", e.radii().as_slice()));
    Ok(())
}

pub fn vic(run: &mut Run) -> Res<()> {
    let (spec, names) = ridge_spec(run)?;
    let n_boundary = run.params.boundary.unwrap_or(2000);
    let n_interior = run.params.interior.unwrap_or(0);
    let seed = run.seed("vic");
    let cloud = vic_forward_map(&spec, n_boundary, n_interior, seed).stage("vic_linear")?;
    let cloud = with_names(cloud, &names)?;
    write_cloud(run, &cloud)?;

    let beta_star = best_ridge(&spec.cov, spec.c).stage("linear_rashomon")?;
    let approx = vic_ellipsoid_approx(&beta_star, &spec).stage("vic_linear")?;
    let l = rashomon_half_widths(&spec).stage("vic_linear")?;
    let bounds: Result<Vec<f64>, CliError> = (0..spec.p())
        .map(|j| approx_error_bound(j, &l, &spec.cov).stage("vic_linear"))
        .collect();
    let mut body = json!({
        "features": names,
        "approximate": approx.to_json(),
        "error_bounds": bounds?,
    });
    if let Ok(exact) = vic_center_radii_uncorrelated(&spec.cov, spec.c, spec.epsilon) {
        body["closed_form"] = exact.to_json();
    }
    run.write_json("vic_ellipsoid.json", &body)?;
    Ok(())
}

pub fn rashomon_logistic(run: &mut Run) -> Res<()> {
    let d = dataset(run)?;
    let eps = run.params.epsilon()?;
    let cfg = sampler_config(run);
    let cfg = calibrated(run, &d, eps, cfg)?;
    let (cloud, report) = sample_rashomon_logistic(&d, eps, &cfg).stage("logistic_rashomon")?;
    write_cloud(run, &cloud)?;
    let mut body = report.to_json();
    body["config"] = serde_json::to_value(&cfg).expect("config serializes");
    run.write_json("sampler.json", &body)?;
    run.say(format!("survival rate {}", report.survival_rate));
    Ok(())
}

pub fn rashomon_tree(run: &mut Run) -> Res<()> {
    let d = dataset(run)?;
    let d = if d.kind() == DatasetKind::BinaryPm1 {
        d
    } else {
        Dataset::new(
            d.features().clone(),
            d.outcome().clone(),
            d.names().to_vec(),
            d.outcome_name(),
            DatasetKind::BinaryPm1,
        )
        .stage("data")?
    };
    let mut cfg = TreeSetConfig {
        epsilon: run.params.epsilon()?,
        ..TreeSetConfig::default()
    };
    if let Some(n) = run.params.max_features {
        cfg.n_max = n;
    }
    if let Some(e) = run.params.include_empty {
        cfg.options.include_empty = e;
    }
    let set = enumerate_tree_class(&d, &cfg).stage("tree_rashomon")?;
    run.write("trees.csv", set.to_csv().as_bytes())?;
    write_cloud(run, &set.to_cloud().stage("tree_rashomon")?)?;
    run.say(format!("{} trees within loss {}", set.trees.len(), set.threshold));
    Ok(())
}

fn vid_of(run: &mut Run, cloud: &VicCloud, default_clusters: usize) -> Res<()> {
    let names = cloud.provenance().feature_names.clone();
    let features = match run.params.features.clone() {
        Some(list) => list
            .iter()
            .map(|s| feature_index(&names, s, "features"))
            .collect::<Res<Vec<_>>>()?,
        None => (0..names.len()).collect(),
    };
    let mut grid = project_pairs(cloud, &features).stage("vid")?;
    let k = run.params.clusters.unwrap_or(default_clusters).min(cloud.len());
    if k > 0 {
        let seed = run.seed("kmeans");
        let labels = cluster_kmeans(cloud, k, seed).stage("vid")?;
        grid = grid.with_clusters(labels).stage("vid")?;
    }
    let (format, name) = match run.params.format.as_deref().unwrap_or("svg") {
        "svg" => (Format::Svg, "vid.svg"),
        "csv" => (Format::Csv, "vid.csv"),
        other => {
            return Err(CliError::config(
                "format",
                format!("expected svg or csv, got {other:?}"),
            ))
        }
    };
    render_vid(&grid, run.path(name), format).stage("vid")?;
    run.track(name)?;
    run.say(format!("{name}: {} panels", grid.panels.len()));
    Ok(())
}

fn bounds_of(run: &mut Run, cloud: &VicCloud) -> Res<()> {
    let table = bounds_table(cloud).stage("vid")?;
    run.write("bounds.csv", table.to_csv().as_bytes())?;
    run.say(table.to_text());
    Ok(())
}

pub fn vid(run: &mut Run) -> Res<()> {
    let cloud = load_cloud(run)?;
    vid_of(run, &cloud, 0)
}

pub fn bounds(run: &mut Run) -> Res<()> {
    let cloud = load_cloud(run)?;
    bounds_of(run, &cloud)
}

pub fn tune(run: &mut Run) -> Res<()> {
    let d = dataset(run)?;
    let eps = run.params.epsilon()?;
    let cfg = sampler_config(run);
    let cfg = calibrated(run, &d, eps, cfg)?;
    let rs = run
        .params
        .r_candidates
        .clone()
        .unwrap_or_else(|| vec![1.05, 1.1, 1.2, 1.3, 1.4, 1.5]);
    let ms = run.params.m_candidates.clone().unwrap_or_else(|| vec![1, 2, 3, 4, 5]);
    let r_max = rs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let r_bar = run.params.r_bar.unwrap_or(r_max.max(cfg.r_bar));
    let threshold = run.params.plateau_threshold.unwrap_or(PLATEAU_THRESHOLD);
    let t = tune_sampler(&d, eps, &rs, &ms, r_bar, &cfg, threshold).stage("logistic_rashomon")?;
    run.write("tune.csv", t.table_csv().as_bytes())?;
    run.write_json(
        "tune.json",
        &json!({"chosen_r": t.chosen_r, "chosen_m": t.chosen_m, "r_bar": r_bar, "box_scale": cfg.box_scale}),
    )?;
    run.say(format!("chosen r = {}, M = {}", t.chosen_r, t.chosen_m));
    Ok(())
}

pub fn test(run: &mut Run) -> Res<()> {
    let d = dataset(run)?;
    let feature = run
        .params
        .feature
        .clone()
        .ok_or_else(|| CliError::config("feature", "--feature is required"))?;
    let j = feature_index(d.names(), &feature, "feature")?;
    let t = mr_wald_statistic(&d, j, run.params.null_value.unwrap_or(0.0)).stage("inference")?;
    run.write_json("test.json", &serde_json::to_value(&t).expect("test serializes"))?;
    run.say(format!("{}: Z = {:.4}, p = {:.3e}", t.feature, t.z_stat, t.p_value));
    Ok(())
}

pub fn linear(run: &mut Run) -> Res<()> {
    vic(run)?;
    let cloud = VicCloud::read(run.path("cloud.csv")).stage("cloud")?;
    vid_of(run, &cloud, 0)?;
    bounds_of(run, &cloud)
}

pub fn logistic(run: &mut Run) -> Res<()> {
    rashomon_logistic(run)?;
    let cloud = VicCloud::read(run.path("cloud.csv")).stage("cloud")?;
    vid_of(run, &cloud, 0)?;
    bounds_of(run, &cloud)
}

pub fn tree(run: &mut Run) -> Res<()> {
    rashomon_tree(run)?;
    let cloud = VicCloud::read(run.path("cloud.csv")).stage("cloud")?;
    vid_of(run, &cloud, 3)?;
    bounds_of(run, &cloud)
}
