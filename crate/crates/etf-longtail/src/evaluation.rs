//! Scoring, Many/Medium/Few breakdowns, boundary-angle difference heatmaps,
//! and deterministic hyperparameter sweeps.
//!
//! Batch classification, heatmap cells, and sweep points are data-parallel;
//! every aggregation is order-independent, so results are identical with and
//! without the `parallel` feature (explicit `*_serial` entry points exist for
//! benchmarking the two paths against each other).

use crate::adjust::{
    ala_boundary_angle, boundary_angle_from_factors, mla_boundary_angle, AdjustmentSpec,
    ClassStats, Method, PreparedClassifier,
};
use crate::bounds::optimal_angle_matrix;
use crate::error::{Error, Result};
use crate::etf::EtfClassifier;
use crate::sim::{FeatureSet, SetKind};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Absolute count thresholds splitting classes into Many/Medium/Few:
/// Many when n_k > many_min, Medium when medium_min <= n_k <= many_min,
/// Few otherwise.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct GroupThresholds {
    pub many_min: u64,
    pub medium_min: u64,
}

impl GroupThresholds {
    pub fn new(many_min: u64, medium_min: u64) -> Result<Self> {
        if !(many_min > medium_min && medium_min >= 1) {
            return Err(Error::Config(format!(
                "thresholds must satisfy many_min > medium_min >= 1, got {many_min}/{medium_min}"
            )));
        }
        Ok(GroupThresholds { many_min, medium_min })
    }

    /// Defaults for datasets with thousand-sample head classes.
    pub fn cifar100lt() -> Self {
        GroupThresholds { many_min: 1000, medium_min: 200 }
    }

    /// Preset for hundred-sample head classes.
    pub fn cifar10lt() -> Self {
        GroupThresholds { many_min: 100, medium_min: 20 }
    }

    pub fn group_of(&self, n_k: f64) -> Group {
        if n_k > self.many_min as f64 {
            Group::Many
        } else if n_k >= self.medium_min as f64 {
            Group::Medium
        } else {
            Group::Few
        }
    }
}

impl Default for GroupThresholds {
    fn default() -> Self {
        Self::cifar100lt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Many,
    Medium,
    Few,
}

/// Accuracy breakdown for one method/gamma. `overall` is the unweighted mean
/// of per-class accuracies; group entries are means over member classes and
/// None when a group has no members (serialized as null).
#[derive(Debug, Clone, serde::Serialize)]
pub struct EvalReport {
    pub method: String,
    pub gamma: f64,
    pub overall: f64,
    pub many: Option<f64>,
    pub medium: Option<f64>,
    pub few: Option<f64>,
    pub per_class: Vec<f64>,
}

/// K x K matrix of boundary angles or angle differences; the diagonal and
/// undefined cells are NaN. CSV output writes the literal token "NaN" there.
#[derive(Debug, Clone)]
pub struct BoundaryMatrix {
    size: usize,
    values: Vec<f64>,
}

impl BoundaryMatrix {
    pub fn nan(size: usize) -> Self {
        BoundaryMatrix { size, values: vec![f64::NAN; size * size] }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.size + j] = v;
    }

    /// Largest absolute finite entry, None if every entry is NaN.
    pub fn max_abs_finite(&self) -> Option<f64> {
        self.values
            .iter()
            .filter(|v| v.is_finite())
            .map(|v| v.abs())
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }

    pub fn count_nan_off_diagonal(&self) -> usize {
        let mut n = 0;
        for i in 0..self.size {
            for j in 0..self.size {
                if i != j && self.get(i, j).is_nan() {
                    n += 1;
                }
            }
        }
        n
    }

    /// K rows of K comma-separated values; NaN cells emit "NaN".
    pub fn write_csv(&self, w: &mut impl std::io::Write) -> Result<()> {
        for i in 0..self.size {
            for j in 0..self.size {
                if j > 0 {
                    write!(w, ",")?;
                }
                let v = self.get(i, j);
                if v.is_nan() {
                    write!(w, "NaN")?;
                } else {
                    write!(w, "{v}")?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Predictions for every row of a feature set under one prepared rule.
pub fn classify_batch(
    set: &FeatureSet,
    etf: &EtfClassifier,
    rule: &PreparedClassifier,
) -> Vec<u32> {
    #[cfg(feature = "parallel")]
    {
        (0..set.len())
            .into_par_iter()
            .map(|i| rule.classify_logits(&etf.logits(set.row(i))) as u32)
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        classify_batch_serial(set, etf, rule)
    }
}

/// Sequential twin of [`classify_batch`]; same output, one thread.
pub fn classify_batch_serial(
    set: &FeatureSet,
    etf: &EtfClassifier,
    rule: &PreparedClassifier,
) -> Vec<u32> {
    (0..set.len())
        .map(|i| rule.classify_logits(&etf.logits(set.row(i))) as u32)
        .collect()
}

/// Scores one adjustment method on a balanced test set.
pub fn evaluate(
    test: &FeatureSet,
    etf: &EtfClassifier,
    spec: &AdjustmentSpec,
    stats: &ClassStats,
    thresholds: &GroupThresholds,
) -> Result<EvalReport> {
    if test.kind != SetKind::Test {
        return Err(Error::Contract("evaluate expects a test-split feature set".into()));
    }
    check_dims(test, etf, stats)?;
    let rule = PreparedClassifier::new(etf.psi(), spec, stats)?;
    let preds = classify_batch(test, etf, &rule);
    report_from_predictions(&preds, test, spec, stats, thresholds)
}

fn check_dims(test: &FeatureSet, etf: &EtfClassifier, stats: &ClassStats) -> Result<()> {
    if test.num_classes != etf.num_classes()
        || test.feature_dim != etf.feature_dim()
        || stats.num_classes() != etf.num_classes()
    {
        return Err(Error::Contract(format!(
            "dimension mismatch: test {}x{}, classifier {}x{}, stats {}",
            test.num_classes,
            test.feature_dim,
            etf.num_classes(),
            etf.feature_dim(),
            stats.num_classes()
        )));
    }
    Ok(())
}

fn report_from_predictions(
    preds: &[u32],
    test: &FeatureSet,
    spec: &AdjustmentSpec,
    stats: &ClassStats,
    thresholds: &GroupThresholds,
) -> Result<EvalReport> {
    let k = test.num_classes;
    let mut hits = vec![0u64; k];
    let mut rows = vec![0u64; k];
    for (i, &label) in test.labels.iter().enumerate() {
        rows[label as usize] += 1;
        if preds[i] == label {
            hits[label as usize] += 1;
        }
    }
    if let Some(c) = rows.iter().position(|&r| r == 0) {
        return Err(Error::Contract(format!(
            "test split has no rows for class {c}; per-class accuracy undefined"
        )));
    }
    let per_class: Vec<f64> = hits
        .iter()
        .zip(&rows)
        .map(|(&h, &r)| h as f64 / r as f64)
        .collect();
    let overall = per_class.iter().sum::<f64>() / k as f64;
    let group_mean = |g: Group| -> Option<f64> {
        let members: Vec<f64> = (0..k)
            .filter(|&c| thresholds.group_of(stats.counts()[c]) == g)
            .map(|c| per_class[c])
            .collect();
        if members.is_empty() {
            None
        } else {
            Some(members.iter().sum::<f64>() / members.len() as f64)
        }
    };
    Ok(EvalReport {
        method: spec.method.name().to_string(),
        gamma: spec.gamma,
        overall,
        many: group_mean(Group::Many),
        medium: group_mean(Group::Medium),
        few: group_mean(Group::Few),
        per_class,
    })
}

/// Which MLA boundary-angle closed form feeds the heatmap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlaBoundaryForm {
    /// The small-angle arctan display (heatmap default).
    Display,
    /// The exact factor-balance solution.
    Exact,
}

/// Angle-difference heatmaps against the one-vs-one optimum:
/// delta_mla[k][k'] = theta_x - theta*, delta_ala[k][k'] = theta_+ - theta*.
/// NaN propagates from theta_+ where its arcsin argument leaves [-1, 1];
/// diagonals are NaN.
pub fn boundary_heatmaps(
    stats: &ClassStats,
    psi: f64,
    gamma_1v1: f64,
    gamma_mla: f64,
    gamma_ala: f64,
    f_norm: f64,
    mla_form: MlaBoundaryForm,
) -> Result<(BoundaryMatrix, BoundaryMatrix)> {
    if !f_norm.is_finite() || f_norm <= 0.0 {
        return Err(Error::Contract(format!("feature norm must be positive, got {f_norm}")));
    }
    let k = stats.num_classes();
    let star = optimal_angle_matrix(stats, psi, gamma_1v1)?.angles;
    let counts = stats.counts();
    let mut dx = BoundaryMatrix::nan(k);
    let mut da = BoundaryMatrix::nan(k);
    let cells: Vec<(usize, usize, f64, f64)> = {
        let cell = |a: usize, b: usize| -> (usize, usize, f64, f64) {
            let tstar = star.get(a, b);
            let tx = match mla_form {
                MlaBoundaryForm::Display => {
                    mla_boundary_angle(counts[a], counts[b], psi, gamma_mla)
                }
                MlaBoundaryForm::Exact => boundary_angle_from_factors(
                    counts[a].powf(-gamma_mla),
                    counts[b].powf(-gamma_mla),
                    psi,
                ),
            };
            let ta = ala_boundary_angle(counts[a], counts[b], psi, gamma_ala, f_norm);
            (a, b, tx - tstar, ta - tstar)
        };
        let pairs: Vec<(usize, usize)> = (0..k)
            .flat_map(|a| (0..k).filter(move |&b| b != a).map(move |b| (a, b)))
            .collect();
        #[cfg(feature = "parallel")]
        {
            pairs.into_par_iter().map(|(a, b)| cell(a, b)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            pairs.into_iter().map(|(a, b)| cell(a, b)).collect()
        }
    };
    for (a, b, vx, va) in cells {
        dx.set(a, b, vx);
        da.set(a, b, va);
    }
    Ok((dx, da))
}

/// One sweep point: the report for the swept method plus the fraction of
/// test rows on which MLA(gamma) and one-vs-one(gamma) agree.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepPoint {
    pub gamma: f64,
    pub overall: f64,
    pub many: Option<f64>,
    pub medium: Option<f64>,
    pub few: Option<f64>,
    pub agreement_mla_1v1: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepResult {
    pub method: String,
    pub points: Vec<SweepPoint>,
    /// Gamma maximizing overall accuracy, ties to the smallest gamma.
    pub best_gamma: f64,
    pub best_overall: f64,
}

/// Formats an optional value for CSV output; undefined cells emit the
/// literal token "NaN".
pub fn csv_cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x}"),
        _ => "NaN".to_string(),
    }
}

impl SweepResult {
    /// One header line plus one row per grid point; undefined groups emit
    /// the literal token "NaN". Byte-identical across reruns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,overall,many,medium,few,agreement_mla_1v1\n");
        for p in &self.points {
            out.push_str(&format!(
                "{:.2},{},{},{},{},{}\n",
                p.gamma,
                csv_cell(Some(p.overall)),
                csv_cell(p.many),
                csv_cell(p.medium),
                csv_cell(p.few),
                csv_cell(Some(p.agreement_mla_1v1)),
            ));
        }
        out
    }
}

/// The standard tuning grid: 0.00, 0.05, ..., 2.00 (41 points).
pub fn default_gamma_grid() -> Vec<f64> {
    // integer ratios land on the shortest-printing doubles (0.3, not 0.30000000000000004)
    (0..=40).map(|i| (i * 5) as f64 / 100.0).collect()
}

/// Evaluates the method at every gamma on the grid. Logits are computed once;
/// each grid point reuses them, so the sweep is deterministic and cheap.
pub fn sweep(
    test: &FeatureSet,
    etf: &EtfClassifier,
    method: Method,
    grid: &[f64],
    stats: &ClassStats,
    thresholds: &GroupThresholds,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::Config("gamma grid must be nonempty".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("gamma grid must be strictly increasing".into()));
    }
    if test.kind != SetKind::Test {
        return Err(Error::Contract("sweep expects a test-split feature set".into()));
    }
    check_dims(test, etf, stats)?;

    let logits = all_logits(test, etf);
    let k = etf.num_classes();
    let psi = etf.psi();

    let eval_point = |&gamma: &f64| -> Result<SweepPoint> {
        let spec = AdjustmentSpec::new(method, gamma, None)?;
        let rule = PreparedClassifier::new(psi, &spec, stats)?;
        let mla_rule = PreparedClassifier::new(
            psi,
            &AdjustmentSpec::new(Method::Mla, gamma, None)?,
            stats,
        )?;
        let voter_rule = PreparedClassifier::new(
            psi,
            &AdjustmentSpec::new(Method::OneVsOne, gamma, None)?,
            stats,
        )?;
        let mut preds = Vec::with_capacity(test.len());
        let mut agree = 0u64;
        for row in logits.chunks(k) {
            preds.push(rule.classify_logits(row) as u32);
            let m = mla_rule.classify_logits(row);
            let v = voter_rule.classify_logits(row);
            if m == v {
                agree += 1;
            }
        }
        let report = report_from_predictions(&preds, test, &spec, stats, thresholds)?;
        Ok(SweepPoint {
            gamma,
            overall: report.overall,
            many: report.many,
            medium: report.medium,
            few: report.few,
            agreement_mla_1v1: agree as f64 / test.len() as f64,
        })
    };

    #[cfg(feature = "parallel")]
    let points: Vec<SweepPoint> = grid.par_iter().map(eval_point).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let points: Vec<SweepPoint> = grid.iter().map(eval_point).collect::<Result<_>>()?;

    let mut best = 0usize;
    for (i, p) in points.iter().enumerate().skip(1) {
        if p.overall > points[best].overall {
            best = i;
        }
    }
    Ok(SweepResult {
        method: method.name().to_string(),
        best_gamma: points[best].gamma,
        best_overall: points[best].overall,
        points,
    })
}

/// Row-major N x K logit matrix for a whole feature set.
pub fn all_logits(set: &FeatureSet, etf: &EtfClassifier) -> Vec<f64> {
    let k = etf.num_classes();
    #[cfg(feature = "parallel")]
    {
        let mut out = vec![0.0; set.len() * k];
        out.par_chunks_mut(k)
            .enumerate()
            .for_each(|(i, chunk)| chunk.copy_from_slice(&etf.logits(set.row(i))));
        out
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut out = Vec::with_capacity(set.len() * k);
        for i in 0..set.len() {
            out.extend_from_slice(&etf.logits(set.row(i)));
        }
        out
    }
}

/// Fraction of rows on which two methods decide identically.
pub fn agreement(
    test: &FeatureSet,
    etf: &EtfClassifier,
    spec_a: &AdjustmentSpec,
    spec_b: &AdjustmentSpec,
    stats: &ClassStats,
) -> Result<f64> {
    check_dims(test, etf, stats)?;
    let rule_a = PreparedClassifier::new(etf.psi(), spec_a, stats)?;
    let rule_b = PreparedClassifier::new(etf.psi(), spec_b, stats)?;
    let pa = classify_batch(test, etf, &rule_a);
    let pb = classify_batch(test, etf, &rule_b);
    let same = pa.iter().zip(&pb).filter(|(a, b)| a == b).count();
    Ok(same as f64 / test.len() as f64)
}
