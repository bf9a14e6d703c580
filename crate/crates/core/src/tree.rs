//! Exact Rashomon sets of decision trees on binary features.
//!
//! A tree that splits on a feature subset of size `m` is a decision table over
//! the `2^m` cells. The best table predicts the majority label in each cell, and
//! any other table costs the sum of the gaps `|count_pos - count_neg|` of the
//! cells it flips, so Rashomon members are flip sets with small total gap.
//!
//! Patterns are integers whose bit `k` is the value of `feature_subset[k]`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::cloud::{Provenance, ReliancePoint, VicCloud};
use crate::data::{Dataset, DatasetKind};
use crate::error::{check_index, Error, Result};
use crate::reliance::{BinaryShuffle, MRVector, ModelClass, Predictor, Variant};

/// Largest supported subset size.
pub const MAX_SUBSET: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Cell {
    pub count_pos: usize,
    pub count_neg: usize,
}

impl Cell {
    pub fn gap(&self) -> usize {
        self.count_pos.abs_diff(self.count_neg)
    }

    /// Majority label; ties go to +1.
    pub fn majority(&self) -> f64 {
        if self.count_pos >= self.count_neg {
            1.0
        } else {
            -1.0
        }
    }

    pub fn total(&self) -> usize {
        self.count_pos + self.count_neg
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Misclassified rows when the cell predicts `label`.
    pub fn errors(&self, label: f64) -> usize {
        if label > 0.0 {
            self.count_neg
        } else {
            self.count_pos
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellTable {
    feature_subset: Vec<usize>,
    cells: Vec<Cell>,
    n: usize,
    best_loss: usize,
}

impl CellTable {
    pub fn feature_subset(&self) -> &[usize] {
        &self.feature_subset
    }

    pub fn m(&self) -> usize {
        self.feature_subset.len()
    }

    /// Cells indexed by pattern.
    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, pattern: u32) -> Result<&Cell> {
        self.cells.get(pattern as usize).ok_or(Error::Index {
            index: pattern as usize,
            len: self.cells.len(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `L* = sum_cells min(count_pos, count_neg)`.
    pub fn best_loss(&self) -> usize {
        self.best_loss
    }

    pub fn pattern_of(&self, x: &[f64]) -> u32 {
        self.feature_subset
            .iter()
            .enumerate()
            .fold(0u32, |acc, (k, &j)| if x[j] > 0.5 { acc | (1 << k) } else { acc })
    }

    /// `0`/`1` string whose k-th character is `feature_subset[k]`.
    pub fn pattern_string(&self, pattern: u32) -> String {
        (0..self.m())
            .map(|k| if pattern >> k & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    pub fn parse_pattern(&self, s: &str) -> Result<u32> {
        if s.len() != self.m() || !s.chars().all(|c| c == '0' || c == '1') {
            return Err(Error::config(
                "pattern",
                format!("{s:?} is not a {}-bit pattern", self.m()),
            ));
        }
        Ok(s.chars()
            .enumerate()
            .fold(0u32, |acc, (k, c)| if c == '1' { acc | (1 << k) } else { acc }))
    }

    /// Position of dataset feature `j` within the subset.
    pub fn position(&self, j: usize) -> Result<usize> {
        self.feature_subset.iter().position(|&f| f == j).ok_or_else(|| {
            Error::config(
                "feature",
                format!("feature {j} is not in the subset {:?}", self.feature_subset),
            )
        })
    }

    /// Labels of the table that flips `flipped` away from the majority rule.
    pub fn labels(&self, flipped: &[u32]) -> Vec<f64> {
        let mut labels: Vec<f64> = self.cells.iter().map(Cell::majority).collect();
        for &c in flipped {
            labels[c as usize] = -labels[c as usize];
        }
        labels
    }

    /// Row-by-row 0-1 loss of an arbitrary labelling.
    pub fn loss_of_labels(&self, labels: &[f64]) -> usize {
        self.cells.iter().zip(labels).map(|(c, l)| c.errors(*l)).sum()
    }

    /// Exact shuffled loss of feature `subset[k]` for a labelling.
    ///
    /// Forcing the feature to `v` sends the rows of cell `c` to `c` with bit `k`
    /// set to `v`; the shuffled loss mixes the two forced losses by the
    /// empirical frequency of the feature.
    pub fn shuffle(&self, labels: &[f64], k: usize) -> BinaryShuffle {
        let bit = 1u32 << k;
        let mut l0 = 0usize;
        let mut l1 = 0usize;
        let mut ones = 0usize;
        for (c, cell) in self.cells.iter().enumerate() {
            let c = c as u32;
            l0 += cell.errors(labels[(c & !bit) as usize]);
            l1 += cell.errors(labels[(c | bit) as usize]);
            if c & bit != 0 {
                ones += cell.total();
            }
        }
        BinaryShuffle {
            l0: l0 as f64,
            l1: l1 as f64,
            p1: ones as f64 / self.n as f64,
            original: self.loss_of_labels(labels) as f64,
        }
    }

    /// Whether the labelling depends on every feature of the subset.
    pub fn uses_all_features(&self, labels: &[f64]) -> bool {
        (0..self.m()).all(|k| {
            let bit = 1u32 << k;
            (0..self.cells.len() as u32).any(|c| c & bit == 0 && labels[c as usize] != labels[(c | bit) as usize])
        })
    }
}

pub fn tabulate_cells(d: &Dataset, feature_subset: &[usize]) -> Result<CellTable> {
    if d.kind() != DatasetKind::BinaryPm1 {
        return Err(Error::Data(
            "tree enumeration requires binary features and a -1/+1 outcome".into(),
        ));
    }
    if feature_subset.len() > MAX_SUBSET {
        return Err(Error::config(
            "feature_subset",
            format!("{} features exceeds the limit of {MAX_SUBSET}", feature_subset.len()),
        ));
    }
    for (k, &j) in feature_subset.iter().enumerate() {
        check_index(j, d.p())?;
        if feature_subset[..k].contains(&j) {
            return Err(Error::config("feature_subset", format!("feature {j} repeated")));
        }
    }
    let mut table = CellTable {
        feature_subset: feature_subset.to_vec(),
        cells: vec![Cell::default(); 1 << feature_subset.len()],
        n: d.n(),
        best_loss: 0,
    };
    let x = d.features();
    for i in 0..d.n() {
        let pattern =
            feature_subset.iter().enumerate().fold(
                0usize,
                |acc, (k, &j)| if x[(i, j)] > 0.5 { acc | (1 << k) } else { acc },
            );
        if d.outcome()[i] > 0.0 {
            table.cells[pattern].count_pos += 1;
        } else {
            table.cells[pattern].count_neg += 1;
        }
    }
    table.best_loss = table.cells.iter().map(|c| c.count_pos.min(c.count_neg)).sum();
    Ok(table)
}

/// A table given by the cells it flips away from the majority rule.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlipTree {
    pub loss: usize,
    /// Flipped patterns, ascending.
    pub flipped: Vec<u32>,
}

pub fn best_tree(table: &CellTable) -> FlipTree {
    FlipTree {
        loss: table.best_loss(),
        flipped: Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnumOptions {
    /// Also flip cells with no observations (loss-neutral).
    pub include_empty: bool,
    /// Refuse to produce more trees than this.
    pub max_trees: usize,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions {
            include_empty: false,
            max_trees: 1_000_000,
        }
    }
}

/// Trees with loss at most `(1 + epsilon) L*` of this table.
pub fn enumerate_trees(table: &CellTable, epsilon: f64) -> Result<Vec<FlipTree>> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::config("epsilon", "must be >= 0"));
    }
    enumerate_trees_within(
        table,
        (1.0 + epsilon) * table.best_loss() as f64,
        EnumOptions::default(),
    )
}

/// All flip sets with `L* + sum of gaps <= max_loss`, sorted by loss and then
/// by flipped patterns.
///
/// Best-first search over subsets of the gap-sorted cells: a subset's children
/// add one cell ranked after its last member, so every subset is reached once
/// and in non-decreasing total gap.
pub fn enumerate_trees_within(table: &CellTable, max_loss: f64, opts: EnumOptions) -> Result<Vec<FlipTree>> {
    let best = table.best_loss();
    let tol = 1e-9 * max_loss.abs().max(1.0);
    let budget = max_loss - best as f64 + tol;
    if budget < 0.0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<(usize, u32)> = table
        .cells()
        .iter()
        .enumerate()
        .filter(|(_, c)| opts.include_empty || !c.is_empty())
        .map(|(p, c)| (c.gap(), p as u32))
        .collect();
    order.sort_unstable();

    let mut out = Vec::new();
    let mut heap: BinaryHeap<Reverse<(usize, Vec<usize>)>> = BinaryHeap::new();
    heap.push(Reverse((0, Vec::new())));
    while let Some(Reverse((extra, members))) = heap.pop() {
        if out.len() >= opts.max_trees {
            return Err(Error::config(
                "max_trees",
                format!("more than {} trees in the Rashomon set", opts.max_trees),
            ));
        }
        let start = members.last().map_or(0, |&i| i + 1);
        for (next, &(gap, _)) in order.iter().enumerate().skip(start) {
            let e = extra + gap;
            if e as f64 > budget {
                break;
            }
            let mut child = members.clone();
            child.push(next);
            heap.push(Reverse((e, child)));
        }
        let mut flipped: Vec<u32> = members.iter().map(|&i| order[i].1).collect();
        flipped.sort_unstable();
        out.push(FlipTree {
            loss: best + extra,
            flipped,
        });
    }
    out.sort();
    Ok(out)
}

/// A decision table as a [`Predictor`] on full feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    pub feature_subset: Vec<usize>,
    pub labels: Vec<f64>,
}

impl TreeModel {
    pub fn new(table: &CellTable, tree: &FlipTree) -> Self {
        TreeModel {
            feature_subset: table.feature_subset().to_vec(),
            labels: table.labels(&tree.flipped),
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let pattern =
            self.feature_subset
                .iter()
                .enumerate()
                .fold(0usize, |acc, (k, &j)| if x[j] > 0.5 { acc | (1 << k) } else { acc });
        self.labels[pattern]
    }
}

impl Predictor for TreeModel {
    fn class(&self) -> ModelClass {
        ModelClass::Tree
    }

    fn loss_row(&self, x: &[f64], y: f64) -> f64 {
        if self.predict(x) == y {
            0.0
        } else {
            1.0
        }
    }
}

/// Ratio reliance of a table on every one of the dataset's `p` features;
/// features outside the subset get exactly 1.
pub fn tree_reliance(table: &CellTable, tree: &FlipTree, p: usize) -> Result<Vec<f64>> {
    if tree.loss == 0 {
        return Err(Error::ZeroLoss("ratio reliance of a tree with zero loss".into()));
    }
    let labels = table.labels(&tree.flipped);
    let mut out = vec![1.0; p];
    for (k, &j) in table.feature_subset().iter().enumerate() {
        check_index(j, p)?;
        let s = table.shuffle(&labels, k);
        out[j] = s.shuffled() / s.original;
    }
    Ok(out)
}

/// Interval for the change in ratio reliance on feature `j` when the best table
/// flips the single cell `cell`:
/// `((q - mr*) e +/- q e') / (L* + e)` with `e` the cell's gap, `e'` the gap of
/// the cell differing only in `j`, and `q` the frequency of the cell's value of
/// `j`. The exact change is one of the endpoints (the sign depends on whether
/// the two cells share their majority label).
pub fn mr_shift_single_flip(table: &CellTable, cell: u32, j: usize, mr_star_j: f64) -> Result<(f64, f64)> {
    let k = table.position(j)?;
    let c = table.cell(cell)?;
    let bit = 1u32 << k;
    let sibling = table.cell(cell ^ bit)?;
    let l_star = table.best_loss() as f64;
    let e = c.gap() as f64;
    if l_star + e == 0.0 {
        return Err(Error::ZeroLoss("flipped tree has zero loss".into()));
    }
    let same: usize = table
        .cells()
        .iter()
        .enumerate()
        .filter(|(p, _)| (*p as u32 & bit) == (cell & bit))
        .map(|(_, c)| c.total())
        .sum();
    let q = same as f64 / table.n() as f64;
    let e2 = sibling.gap() as f64;
    let mid = (q - mr_star_j) * e;
    let lo = (mid - q * e2) / (l_star + e);
    let hi = (mid + q * e2) / (l_star + e);
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeSetConfig {
    /// Largest number of features a tree may split on.
    pub n_max: usize,
    pub epsilon: f64,
    pub options: EnumOptions,
}

impl Default for TreeSetConfig {
    fn default() -> Self {
        TreeSetConfig {
            n_max: 4,
            epsilon: 0.05,
            options: EnumOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTree {
    pub feature_subset: Vec<usize>,
    pub flipped: Vec<u32>,
    /// `0`/`1` per cell, 1 where the cell is flipped.
    pub flip_mask: String,
    pub loss: usize,
    pub mr: Vec<f64>,
}

/// Rashomon set of all tables on at most `n_max` features.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeRashomon {
    pub best_loss: usize,
    pub threshold: f64,
    pub trees: Vec<ClassTree>,
    pub feature_names: Vec<String>,
    pub config: TreeSetConfig,
}

fn subsets(p: usize, n_max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..n_max.min(p) {
        let mut next = Vec::new();
        for s in &frontier {
            let start = s.last().map_or(0, |&j: &usize| j + 1);
            for j in start..p {
                let mut t = s.clone();
                t.push(j);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Enumerates every feature subset of size `<= n_max` against the global best
/// loss. A table is kept only under the smallest subset it depends on, so no
/// decision function is listed twice.
pub fn enumerate_tree_class(d: &Dataset, cfg: &TreeSetConfig) -> Result<TreeRashomon> {
    if !(cfg.epsilon >= 0.0) || !cfg.epsilon.is_finite() {
        return Err(Error::config("epsilon", "must be >= 0"));
    }
    if cfg.n_max > MAX_SUBSET {
        return Err(Error::config("n_max", format!("must be <= {MAX_SUBSET}")));
    }
    let tables: Vec<CellTable> = subsets(d.p(), cfg.n_max)
        .iter()
        .map(|s| tabulate_cells(d, s))
        .collect::<Result<_>>()?;
    let best_loss = tables
        .iter()
        .map(CellTable::best_loss)
        .min()
        .expect("the empty subset is always present");
    let threshold = (1.0 + cfg.epsilon) * best_loss as f64;
    let mut trees = Vec::new();
    for table in &tables {
        for tree in enumerate_trees_within(table, threshold, cfg.options)? {
            let labels = table.labels(&tree.flipped);
            if !table.uses_all_features(&labels) {
                continue;
            }
            let mask = (0..table.cells().len() as u32)
                .map(|c| if tree.flipped.contains(&c) { '1' } else { '0' })
                .collect();
            trees.push(ClassTree {
                feature_subset: table.feature_subset().to_vec(),
                mr: tree_reliance(table, &tree, d.p())?,
                flipped: tree.flipped,
                flip_mask: mask,
                loss: tree.loss,
            });
        }
    }
    trees.sort_by(|a, b| (a.loss, &a.feature_subset, &a.flipped).cmp(&(b.loss, &b.feature_subset, &b.flipped)));
    Ok(TreeRashomon {
        best_loss,
        threshold,
        trees,
        feature_names: d.names().to_vec(),
        config: *cfg,
    })
}

impl TreeRashomon {
    /// `subset, flip_mask, loss, mr_...` per tree; subsets are `+`-joined names.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("subset,flip_mask,loss");
        for n in &self.feature_names {
            out.push_str(&format!(",mr_{n}"));
        }
        out.push('\n');
        for t in &self.trees {
            let subset: Vec<&str> = t
                .feature_subset
                .iter()
                .map(|&j| self.feature_names[j].as_str())
                .collect();
            out.push_str(&format!("{},{},{}", subset.join("+"), t.flip_mask, t.loss));
            for v in &t.mr {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_cloud(&self) -> Result<VicCloud> {
        let points = self
            .trees
            .iter()
            .map(|t| ReliancePoint {
                beta: Vec::new(),
                mr: MRVector {
                    values: t.mr.clone(),
                    variant: Variant::Ratio,
                    model_loss: t.loss as f64,
                },
                loss: t.loss as f64,
            })
            .collect();
        VicCloud::new(
            points,
            Provenance {
                model_class: ModelClass::Tree,
                variant: Variant::Ratio,
                epsilon: self.config.epsilon,
                c: None,
                seed: None,
                best_loss: self.best_loss as f64,
                threshold: self.threshold,
                feature_names: self.feature_names.clone(),
                param_names: Vec::new(),
                settings: serde_json::to_value(self.config).expect("config serializes"),
            },
        )
    }
}
