//! Variable importance diagrams: pairwise projections of a reliance cloud,
//! per-feature bounds, clustering and file export.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{fmt_num, write_file, VicCloud};
use crate::error::{check_index, check_len, Error, Result};
use crate::sampling;

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    /// Feature on the vertical axis.
    pub row: usize,
    /// Feature on the horizontal axis.
    pub col: usize,
    /// `(mr[col], mr[row])` per cloud point.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VidGrid {
    pub features: Vec<usize>,
    pub feature_names: Vec<String>,
    /// Row-major: for each row feature, the other features in order.
    pub panels: Vec<Panel>,
    pub clusters: Option<Vec<usize>>,
}

pub fn project_pairs(cloud: &VicCloud, features: &[usize]) -> Result<VidGrid> {
    if cloud.is_empty() {
        return Err(Error::Data("cannot project an empty cloud".into()));
    }
    if features.len() < 2 {
        return Err(Error::config("features", "need at least two features"));
    }
    for (k, &j) in features.iter().enumerate() {
        check_index(j, cloud.p())?;
        if features[..k].contains(&j) {
            return Err(Error::config("features", format!("feature {j} repeated")));
        }
    }
    let mut panels = Vec::with_capacity(features.len() * (features.len() - 1));
    for &row in features {
        for &col in features.iter().filter(|&&c| c != row) {
            panels.push(Panel {
                row,
                col,
                points: cloud
                    .points()
                    .iter()
                    .map(|p| (p.mr.values[col], p.mr.values[row]))
                    .collect(),
            });
        }
    }
    Ok(VidGrid {
        features: features.to_vec(),
        feature_names: features
            .iter()
            .map(|&j| cloud.provenance().feature_names[j].clone())
            .collect(),
        panels,
        clusters: None,
    })
}

impl VidGrid {
    pub fn panel(&self, row: usize, col: usize) -> Option<&Panel> {
        self.panels.iter().find(|p| p.row == row && p.col == col)
    }

    pub fn n_points(&self) -> usize {
        self.panels.first().map_or(0, |p| p.points.len())
    }

    pub fn with_clusters(mut self, labels: Vec<usize>) -> Result<Self> {
        check_len(self.n_points(), labels.len())?;
        self.clusters = Some(labels);
        Ok(self)
    }

    fn name_of(&self, feature: usize) -> &str {
        let k = self
            .features
            .iter()
            .position(|&f| f == feature)
            .expect("panel feature is selected");
        &self.feature_names[k]
    }

    /// Common `[lo, hi]` for a feature across all panels, padded by 5%.
    fn axis_range(&self, feature: usize) -> (f64, f64) {
        let vals = self.panels.iter().flat_map(|p| {
            let xs = (p.col == feature).then(|| p.points.iter().map(|q| q.0));
            let ys = (p.row == feature).then(|| p.points.iter().map(|q| q.1));
            xs.into_iter().flatten().chain(ys.into_iter().flatten())
        });
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let span = hi - lo;
        let pad = if span > 0.0 {
            0.05 * span
        } else {
            0.05 * lo.abs().max(1.0)
        };
        (lo - pad, hi + pad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub feature: String,
    pub upper: f64,
    pub lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsTable {
    pub rows: Vec<Bound>,
}

impl BoundsTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,upper,lower\n");
        for b in &self.rows {
            let _ = writeln!(out, "{},{},{}", b.feature, fmt_num(b.upper), fmt_num(b.lower));
        }
        out
    }

    /// Fixed-width text table with two decimals.
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|b| b.feature.len()).max().unwrap_or(0).max(7);
        let mut out = format!("{:<width$}  {:>8}  {:>8}\n", "feature", "upper", "lower");
        for b in &self.rows {
            let _ = writeln!(out, "{:<width$}  {:>8.2}  {:>8.2}", b.feature, b.upper, b.lower);
        }
        out
    }
}

/// Per-feature range of reliance over the cloud, highest upper bound first.
pub fn bounds_table(cloud: &VicCloud) -> Result<BoundsTable> {
    if cloud.is_empty() {
        return Err(Error::Data("cannot bound an empty cloud".into()));
    }
    let mut rows: Vec<Bound> = cloud
        .provenance()
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col = cloud.mr_column(j);
            Bound {
                feature: name.clone(),
                upper: col.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                lower: col.iter().copied().fold(f64::INFINITY, f64::min),
            }
        })
        .collect();
    rows.sort_by(|a, b| b.upper.total_cmp(&a.upper).then_with(|| a.feature.cmp(&b.feature)));
    Ok(BoundsTable { rows })
}

/// Reliance profile of the model that relies least on one feature, next to the
/// lowest-loss model of the cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tradeoff {
    pub feature: String,
    pub benchmark_loss: f64,
    pub benchmark_mr: Vec<f64>,
    pub least_loss: f64,
    pub least_mr: Vec<f64>,
}

pub fn tradeoff(cloud: &VicCloud, j: usize) -> Result<Tradeoff> {
    check_index(j, cloud.p())?;
    let pts = cloud.points();
    let bench = pts
        .iter()
        .min_by(|a, b| a.loss.total_cmp(&b.loss))
        .ok_or_else(|| Error::Data("empty cloud".into()))?;
    let least = pts
        .iter()
        .min_by(|a, b| {
            a.mr.values[j]
                .total_cmp(&b.mr.values[j])
                .then(a.loss.total_cmp(&b.loss))
        })
        .expect("non-empty");
    Ok(Tradeoff {
        feature: cloud.provenance().feature_names[j].clone(),
        benchmark_loss: bench.loss,
        benchmark_mr: bench.mr.values.clone(),
        least_loss: least.loss,
        least_mr: least.mr.values.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after each centroid update.
    pub wcss_history: Vec<f64>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (k, c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

/// k-means++ seeding followed by Lloyd iterations until assignments repeat.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans> {
    if k == 0 || k > points.len() {
        return Err(Error::config("k", format!("must be in 1..={}, got {k}", points.len())));
    }
    let dim = points[0].len();
    for p in points {
        check_len(dim, p.len())?;
    }
    let mut rng = sampling::rng(seed);
    let mut chosen = vec![rng.random_range(0..points.len())];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = d2.iter().rposition(|d| *d > 0.0).expect("positive total");
            for (i, d) in d2.iter().enumerate() {
                if *d > 0.0 && target < *d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            (0..points.len()).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, &points[next]));
        }
    }
    let mut centroids: Vec<Vec<f64>> = chosen.iter().map(|&i| points[i].clone()).collect();
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    let mut wcss_history = Vec::new();
    for _ in 0..1000 {
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points
                .iter()
                .zip(&labels)
                .filter(|(_, l)| **l == c)
                .map(|(p, _)| p)
                .collect();
            if !members.is_empty() {
                *centroid = (0..dim)
                    .map(|t| members.iter().map(|m| m[t]).sum::<f64>() / members.len() as f64)
                    .collect();
            }
        }
        wcss_history.push(points.iter().zip(&labels).map(|(p, &l)| dist2(p, &centroids[l])).sum());
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    Ok(KMeans {
        labels,
        centroids,
        wcss_history,
    })
}

pub fn cluster_kmeans(cloud: &VicCloud, k: usize, seed: u64) -> Result<Vec<usize>> {
    let pts: Vec<Vec<f64>> = cloud.points().iter().map(|p| p.mr.values.clone()).collect();
    Ok(kmeans(&pts, k, seed)?.labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Svg,
}

pub const CSV_HEADER: &str = "row_feature,col_feature,x,y,cluster";

/// Long format, one line per point per panel; `cluster` is empty when unset.
pub fn render_csv(grid: &VidGrid) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for panel in &grid.panels {
        let (rname, cname) = (grid.name_of(panel.row), grid.name_of(panel.col));
        for (k, (x, y)) in panel.points.iter().enumerate() {
            let cluster = grid.clusters.as_ref().map(|c| c[k].to_string()).unwrap_or_default();
            let _ = writeln!(out, "{rname},{cname},{},{},{cluster}", fmt_num(*x), fmt_num(*y));
        }
    }
    out
}

/// One parsed line of [`render_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct VidRow {
    pub row_feature: String,
    pub col_feature: String,
    pub x: f64,
    pub y: f64,
    pub cluster: Option<usize>,
}

pub fn parse_vid_csv(text: &str) -> Result<Vec<VidRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Data(format!("expected header {CSV_HEADER:?}")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            check_len(5, f.len())?;
            let num = |s: &str, column: &str| {
                s.parse::<f64>().map_err(|_| Error::NonNumeric {
                    row: i + 2,
                    column: column.into(),
                    value: s.into(),
                })
            };
            Ok(VidRow {
                row_feature: f[0].into(),
                col_feature: f[1].into(),
                x: num(f[2], "x")?,
                y: num(f[3], "y")?,
                cluster: if f[4].is_empty() {
                    None
                } else {
                    Some(num(f[4], "cluster")? as usize)
                },
            })
        })
        .collect()
}

pub const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

const PANEL: f64 = 160.0;
const GAP: f64 = 48.0;
const MARGIN: f64 = 56.0;

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Grid of scatter panels: one row per feature, the other features as columns.
pub fn render_svg(grid: &VidGrid) -> String {
    let nrow = grid.features.len();
    let ncol = nrow - 1;
    let width = 2.0 * MARGIN + ncol as f64 * PANEL + (ncol - 1) as f64 * GAP;
    let height = 2.0 * MARGIN + nrow as f64 * PANEL + (nrow - 1) as f64 * GAP;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let ranges: Vec<(f64, f64)> = grid.features.iter().map(|&f| grid.axis_range(f)).collect();
    let range_of = |f: usize| ranges[grid.features.iter().position(|&g| g == f).expect("selected")];
    for (idx, panel) in grid.panels.iter().enumerate() {
        let (r, c) = (idx / ncol, idx % ncol);
        let x0 = MARGIN + c as f64 * (PANEL + GAP);
        let y0 = MARGIN + r as f64 * (PANEL + GAP);
        let (xlo, xhi) = range_of(panel.col);
        let (ylo, yhi) = range_of(panel.row);
        let (cname, rname) = (xml_escape(grid.name_of(panel.col)), xml_escape(grid.name_of(panel.row)));
        let _ = writeln!(
            s,
            r#"<g id="panel-{}-{}" transform="translate({x0:.2},{y0:.2})">"#,
            r + 1,
            c + 1
        );
        let _ = writeln!(
            s,
            r##"<rect x="0" y="0" width="{PANEL:.0}" height="{PANEL:.0}" fill="none" stroke="#333333" stroke-width="0.8"/>"##
        );
        for (k, (x, y)) in panel.points.iter().enumerate() {
            let px = (x - xlo) / (xhi - xlo) * PANEL;
            let py = PANEL - (y - ylo) / (yhi - ylo) * PANEL;
            let color = grid
                .clusters
                .as_ref()
                .map_or(PALETTE[0], |l| PALETTE[l[k] % PALETTE.len()]);
            let _ = writeln!(
                s,
                r#"<circle cx="{px:.2}" cy="{py:.2}" r="1.5" fill="{color}" fill-opacity="0.6"/>"#
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="0" y="{:.0}" text-anchor="start">{xlo:.3}</text>"#,
            PANEL + 12.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{PANEL:.0}" y="{:.0}" text-anchor="end">{xhi:.3}</text>"#,
            PANEL + 12.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.0}" y="{:.0}" text-anchor="middle">{cname}</text>"#,
            PANEL / 2.0,
            PANEL + 26.0
        );
        let _ = writeln!(s, r#"<text x="-4" y="{PANEL:.0}" text-anchor="end">{ylo:.3}</text>"#);
        let _ = writeln!(s, r#"<text x="-4" y="8" text-anchor="end">{yhi:.3}</text>"#);
        let _ = writeln!(
            s,
            r#"<text transform="translate(-30,{:.0}) rotate(-90)" text-anchor="middle">{rname}</text>"#,
            PANEL / 2.0
        );
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_vid(grid: &VidGrid, out_path: impl AsRef<Path>, format: Format) -> Result<()> {
    let body = match format {
        Format::Csv => render_csv(grid),
        Format::Svg => render_svg(grid),
    };
    write_file(out_path.as_ref(), body.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{Provenance, ReliancePoint};
    use crate::data::CovarianceStructure;
    use crate::linear::RidgeSpec;
    use crate::reliance::{MRVector, ModelClass, Variant};
    use crate::vic_linear::{vic_center_radii_uncorrelated, vic_forward_map};

    fn cloud_of(points: Vec<Vec<f64>>) -> VicCloud {
        let p = points[0].len();
        let names: Vec<String> = (1..=p).map(|k| format!("f{k}")).collect();
        VicCloud::new(
            points
                .into_iter()
                .map(|values| ReliancePoint {
                    beta: vec![],
                    mr: MRVector {
                        values,
                        variant: Variant::Ratio,
                        model_loss: 1.0,
                    },
                    loss: 1.0,
                })
                .collect(),
            Provenance {
                model_class: ModelClass::Tree,
                variant: Variant::Ratio,
                epsilon: 0.1,
                c: None,
                seed: None,
                best_loss: 1.0,
                threshold: 1.1,
                feature_names: names,
                param_names: vec![],
                settings: serde_json::Value::Null,
            },
        )
        .unwrap()
    }

    #[test]
    fn panel_counts_and_mirror() {
        let c = cloud_of(vec![vec![1.0, 2.0, 3.0, 4.0], vec![1.5, 2.5, 3.5, 4.5]]);
        let g = project_pairs(&c, &[0, 1, 2, 3]).unwrap();
        assert_eq!(g.panels.len(), 12);
        let g2 = project_pairs(&c, &[0, 1]).unwrap();
        assert_eq!(g2.panels.len(), 2);
        let a = g.panel(0, 2).unwrap();
        let b = g.panel(2, 0).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            assert_eq!((p.0, p.1), (q.1, q.0));
        }
        assert_eq!(a.points[0], (3.0, 1.0));
        assert!(project_pairs(&c, &[0, 4]).is_err());
        let one = cloud_of(vec![vec![1.0, 2.0]]);
        assert!(project_pairs(&one, &[0, 1])
            .unwrap()
            .panels
            .iter()
            .all(|p| p.points.len() == 1));
    }

    #[test]
    fn bounds_sorted_by_upper_then_name() {
        let c = cloud_of(vec![vec![1.0, 1.3, 1.3], vec![1.0, 1.2, 1.1]]);
        let t = bounds_table(&c).unwrap();
        let names: Vec<&str> = t.rows.iter().map(|b| b.feature.as_str()).collect();
        assert_eq!(names, ["f2", "f3", "f1"]);
        assert_eq!((t.rows[2].upper, t.rows[2].lower), (1.0, 1.0));
        assert!(t.to_csv().starts_with("feature,upper,lower\nf2,1.3,1.2\n"));
        let one = cloud_of(vec![vec![0.5, 0.7]]);
        assert!(bounds_table(&one).unwrap().rows.iter().all(|b| b.upper == b.lower));
    }

    #[test]
    fn bounds_match_closed_form_extremes() {
        let cov = CovarianceStructure::from_correlations(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.4, 0.5]).unwrap();
        let spec = RidgeSpec::new(cov.clone(), 0.0, 0.05).unwrap();
        let cloud = vic_forward_map(&spec, 2000, 0, 1).unwrap();
        let e = vic_center_radii_uncorrelated(&cov, 0.0, 0.05).unwrap();
        let t = bounds_table(&cloud).unwrap();
        for b in &t.rows {
            let j = if b.feature == "x1" { 0 } else { 1 };
            let (c, r) = (e.center()[j], e.radii()[j]);
            assert!((b.upper - (c + r)).abs() < 0.01 * r && (b.lower - (c - r)).abs() < 0.01 * r);
        }
    }

    #[test]
    fn kmeans_examples() {
        let mut pts = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.01;
            pts.push(vec![t, -t]);
            pts.push(vec![10.0 + t, 10.0 - t]);
        }
        let km = kmeans(&pts, 2, 3).unwrap();
        for (i, l) in km.labels.iter().enumerate() {
            assert_eq!(*l, km.labels[i % 2]);
        }
        assert_ne!(km.labels[0], km.labels[1]);
        assert!(km.wcss_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));

        let all = kmeans(&pts, pts.len(), 1).unwrap();
        assert_eq!(*all.wcss_history.last().unwrap(), 0.0);
        let one = kmeans(&pts, 1, 1).unwrap();
        assert!(one.labels.iter().all(|l| *l == 0));
        assert!((one.centroids[0][0] - (5.0 + 0.095)).abs() < 1e-12);
        assert!(kmeans(&pts, 41, 1).is_err());
        assert_eq!(kmeans(&pts, 3, 9).unwrap(), kmeans(&pts, 3, 9).unwrap());
    }

    #[test]
    fn csv_round_trip_and_svg_determinism() {
        let c = cloud_of(vec![
            vec![1.0, 2.0, 0.1],
            vec![1.5, 2.5, 1.0 / 3.0],
            vec![1.25, 2.0, 0.2],
        ]);
        let labels = cluster_kmeans(&c, 2, 4).unwrap();
        let g = project_pairs(&c, &[0, 1, 2]).unwrap().with_clusters(labels).unwrap();
        let csv = render_csv(&g);
        let rows = parse_vid_csv(&csv).unwrap();
        assert_eq!(rows.len(), 6 * 3);
        let panel = g.panel(2, 0).unwrap();
        let parsed: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.row_feature == "f3" && r.col_feature == "f1")
            .map(|r| (r.x, r.y))
            .collect();
        assert_eq!(parsed, panel.points);
        let svg = render_svg(&g);
        assert_eq!(svg, render_svg(&g));
        assert_eq!(svg.matches("<g id=\"panel-").count(), 6);
        assert_eq!(svg.matches("<circle").count(), 18);
    }
}
