//! Change-history defect risk.
//!
//! A linear probability model is fitted by ordinary least squares of the 0/1
//! bug label on standardised change metrics. Its clamped prediction is the
//! component's change-risk score. Accuracy is estimated with repeated,
//! seeded k-fold cross-validation.

use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexSet;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::table;
use crate::{Error, Result};

pub const METRIC_COUNT: usize = 11;

pub const METRIC_NAMES: [&str; METRIC_COUNT] = [
    "modification_count",
    "loc_added",
    "max_loc_added",
    "ave_loc_added",
    "loc_deleted",
    "max_loc_deleted",
    "ave_loc_deleted",
    "code_churn",
    "max_code_churn",
    "ave_code_churn",
    "age_weeks",
];

/// Index of the `code_churn` column in [`METRIC_NAMES`].
pub const CODE_CHURN: usize = 7;

pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_REPEATS: usize = 100;
pub const CLASSIFY_THRESHOLD: f64 = 0.5;

/// The eleven change metrics of one method, in [`METRIC_NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangeMetrics(pub [f64; METRIC_COUNT]);

impl ChangeMetrics {
    pub fn get(&self, name: &str) -> Option<f64> {
        METRIC_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.0[i])
    }

    /// Checks non-negativity and `max_* >= ave_*` for each family.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (name, v) in METRIC_NAMES.iter().zip(self.0) {
            if !v.is_finite() || v < 0.0 {
                return Err(format!(
                    "{name} must be a finite non-negative number, got {v}"
                ));
            }
        }
        for (max, ave) in [(2, 3), (5, 6), (8, 9)] {
            if self.0[max] + 1e-9 < self.0[ave] {
                return Err(format!(
                    "{} ({}) is below {} ({})",
                    METRIC_NAMES[max], self.0[max], METRIC_NAMES[ave], self.0[ave]
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeMetricsRecord {
    pub component_id: String,
    pub metrics: ChangeMetrics,
    /// Known bug label; required for training rows.
    pub label: Option<bool>,
}

/// Reads the change-metrics CSV. Columns are matched by header name; the
/// `buggy` column is optional and its cells may be empty.
pub fn load_change_metrics<R: Read>(
    input: R,
    source_name: &str,
) -> Result<Vec<ChangeMetricsRecord>> {
    let mut rdr = table::reader(input, true);
    let headers = rdr
        .headers()
        .map_err(|e| table::csv_error(source_name, e))?
        .clone();
    let header_line = table::line_of(&headers).max(1);
    let column = |name: &str| headers.iter().position(|h| h == name);
    let id_col = column("component_id")
        .ok_or_else(|| Error::parse(source_name, header_line, "missing column `component_id`"))?;
    let mut metric_cols = [0usize; METRIC_COUNT];
    for (slot, name) in metric_cols.iter_mut().zip(METRIC_NAMES) {
        *slot = column(name).ok_or_else(|| {
            Error::parse(source_name, header_line, format!("missing column `{name}`"))
        })?;
    }
    let label_col = column("buggy");

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| table::csv_error(source_name, e))?;
        let line = table::line_of(&record);
        if record.len() != headers.len() {
            return Err(Error::parse(
                source_name,
                line,
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        let component_id = record[id_col].to_string();
        if component_id.is_empty() {
            return Err(Error::parse(source_name, line, "empty component_id"));
        }
        let mut values = [0.0; METRIC_COUNT];
        for (k, &col) in metric_cols.iter().enumerate() {
            values[k] = record[col].parse().map_err(|_| {
                Error::parse(
                    source_name,
                    line,
                    format!("{} is not a number: `{}`", METRIC_NAMES[k], &record[col]),
                )
            })?;
        }
        let metrics = ChangeMetrics(values);
        metrics
            .validate()
            .map_err(|msg| Error::parse(source_name, line, msg))?;
        let label = match label_col.map(|c| &record[c]) {
            None | Some("") => None,
            Some("1") | Some("true") => Some(true),
            Some("0") | Some("false") => Some(false),
            Some(other) => {
                return Err(Error::parse(
                    source_name,
                    line,
                    format!("buggy must be 0/1/true/false, got `{other}`"),
                ))
            }
        };
        out.push(ChangeMetricsRecord {
            component_id,
            metrics,
            label,
        });
    }
    Ok(out)
}

pub fn read_change_metrics(path: &Path) -> Result<Vec<ChangeMetricsRecord>> {
    load_change_metrics(table::open(path)?, &path.display().to_string())
}

pub fn write_change_metrics<W: Write>(
    mut out: W,
    seed: u64,
    records: &[ChangeMetricsRecord],
) -> Result<()> {
    let name = "change metrics";
    out.write_all(table::header_line(seed).as_bytes())
        .map_err(|e| Error::io(name, e))?;
    let mut wtr = table::writer(out);
    let mut header = vec!["component_id"];
    header.extend(METRIC_NAMES);
    header.push("buggy");
    wtr.write_record(&header)
        .map_err(|e| table::write_error(name, e))?;
    for r in records {
        let mut row = vec![r.component_id.clone()];
        row.extend(r.metrics.0.iter().map(f64::to_string));
        row.push(match r.label {
            Some(true) => "1".into(),
            Some(false) => "0".into(),
            None => String::new(),
        });
        wtr.write_record(&row)
            .map_err(|e| table::write_error(name, e))?;
    }
    wtr.flush().map_err(|e| Error::io(name, e))
}

/// Labels of every record; fails if any is unlabelled.
pub fn labels_of(records: &[ChangeMetricsRecord]) -> Result<Vec<bool>> {
    records
        .iter()
        .map(|r| {
            r.label.ok_or_else(|| {
                Error::Invalid(format!("component `{}` has no bug label", r.component_id))
            })
        })
        .collect()
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
    }
}

fn metric_column(records: &[ChangeMetricsRecord], k: usize) -> Vec<f64> {
    records.iter().map(|r| r.metrics.0[k]).collect()
}

fn as_targets(labels: &[bool]) -> Vec<f64> {
    labels.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

/// Pearson correlation of each metric with the 0/1 label; zero-variance → 0.
pub fn metric_correlations(
    records: &[ChangeMetricsRecord],
    labels: &[bool],
) -> Result<[f64; METRIC_COUNT]> {
    check_lengths(records, labels.len())?;
    if records.len() < 2 {
        return Err(Error::Invalid(
            "correlations need at least 2 records".into(),
        ));
    }
    Ok(correlations_with(records, &as_targets(labels)))
}

fn correlations_with(records: &[ChangeMetricsRecord], targets: &[f64]) -> [f64; METRIC_COUNT] {
    let mut out = [0.0; METRIC_COUNT];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = pearson(&metric_column(records, k), targets);
    }
    out
}

fn check_lengths(records: &[ChangeMetricsRecord], n: usize) -> Result<()> {
    if records.len() != n {
        return Err(Error::Invalid(format!(
            "{} records but {n} labels",
            records.len()
        )));
    }
    Ok(())
}

/// Per-metric mean and (population) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: [f64; METRIC_COUNT],
    pub std: [f64; METRIC_COUNT],
}

impl Standardization {
    fn fit(records: &[ChangeMetricsRecord]) -> Self {
        let n = records.len() as f64;
        let mut mean = [0.0; METRIC_COUNT];
        let mut std = [0.0; METRIC_COUNT];
        for k in 0..METRIC_COUNT {
            let col = metric_column(records, k);
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            mean[k] = m;
            std[k] = var.sqrt();
        }
        Self { mean, std }
    }

    /// Standardised metric; a zero-variance metric standardises to 0.
    pub fn apply(&self, metrics: &ChangeMetrics) -> [f64; METRIC_COUNT] {
        let mut z = [0.0; METRIC_COUNT];
        for (k, zk) in z.iter_mut().enumerate() {
            if self.std[k] > 0.0 {
                *zk = (metrics.0[k] - self.mean[k]) / self.std[k];
            }
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// Coefficients on standardised metrics, [`METRIC_NAMES`] order.
    pub coefficients: [f64; METRIC_COUNT],
    pub intercept: f64,
    pub standardization: Standardization,
    /// Correlation of each raw metric with the fitted target.
    pub metric_correlations: [f64; METRIC_COUNT],
    /// Numerical rank of the design matrix (intercept included).
    pub rank: usize,
}

impl LinearModel {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        METRIC_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.coefficients[i])
    }

    /// Unclamped linear prediction.
    pub fn predict_linear(&self, metrics: &ChangeMetrics) -> f64 {
        let z = self.standardization.apply(metrics);
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(z)
                .map(|(b, x)| b * x)
                .sum::<f64>()
    }

    /// Coefficients and intercept on the raw metric scale.
    pub fn raw_coefficients(&self) -> ([f64; METRIC_COUNT], f64) {
        let s = &self.standardization;
        let mut raw = [0.0; METRIC_COUNT];
        let mut intercept = self.intercept;
        for (k, rk) in raw.iter_mut().enumerate() {
            if s.std[k] > 0.0 {
                *rk = self.coefficients[k] / s.std[k];
                intercept -= *rk * s.mean[k];
            }
        }
        (raw, intercept)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let by_name = |vals: &[f64; METRIC_COUNT]| {
            METRIC_NAMES
                .iter()
                .zip(vals)
                .map(|(n, v)| (n.to_string(), serde_json::json!(v)))
                .collect::<serde_json::Map<_, _>>()
        };
        serde_json::json!({
            "tool_version": crate::VERSION,
            "intercept": self.intercept,
            "coefficients": by_name(&self.coefficients),
            "metric_correlations": by_name(&self.metric_correlations),
            "standardization": {
                "mean": by_name(&self.standardization.mean),
                "std": by_name(&self.standardization.std),
            },
            "rank": self.rank,
        })
    }
}

/// Clamped risk in [0, 1].
pub fn predict_risk(model: &LinearModel, metrics: &ChangeMetrics) -> f64 {
    let v = model.predict_linear(metrics);
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Least-squares fit of the 0/1 label on standardised metrics + intercept.
/// A rank-deficient design gets the minimum-norm solution and a warning.
pub fn fit_linear_model(records: &[ChangeMetricsRecord], labels: &[bool]) -> Result<LinearModel> {
    check_lengths(records, labels.len())?;
    let model = fit_least_squares(records, &as_targets(labels))?;
    if model.rank < METRIC_COUNT + 1 {
        warn!(
            rank = model.rank,
            records = records.len(),
            "rank-deficient change-metrics design; using minimum-norm solution"
        );
    }
    Ok(model)
}

/// Least-squares fit against arbitrary real targets.
pub fn fit_least_squares(records: &[ChangeMetricsRecord], targets: &[f64]) -> Result<LinearModel> {
    check_lengths(records, targets.len())?;
    if records.is_empty() {
        return Err(Error::Invalid("cannot fit a model to zero records".into()));
    }
    let standardization = Standardization::fit(records);
    let n = records.len();
    let p = METRIC_COUNT + 1;
    let mut design = DMatrix::<f64>::zeros(n, p);
    for (row, r) in records.iter().enumerate() {
        design[(row, 0)] = 1.0;
        for (k, z) in standardization.apply(&r.metrics).into_iter().enumerate() {
            design[(row, k + 1)] = z;
        }
    }
    let y = DVector::from_column_slice(targets);

    let svd = design.svd(true, true);
    let max_sv = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = max_sv * n.max(p) as f64 * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let beta = if max_sv == 0.0 {
        DVector::zeros(p)
    } else {
        svd.solve(&y, tol)
            .map_err(|e| Error::Invariant(format!("least-squares solve failed: {e}")))?
    };

    let mut coefficients = [0.0; METRIC_COUNT];
    for k in 0..METRIC_COUNT {
        coefficients[k] = beta[k + 1];
    }
    Ok(LinearModel {
        coefficients,
        intercept: beta[0],
        standardization,
        metric_correlations: correlations_with(records, targets),
        rank,
    })
}

/// Per-component change-risk scores in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct RiskScores {
    pub components: IndexSet<String>,
    pub scores: Vec<f64>,
}

impl RiskScores {
    pub fn get(&self, component_id: &str) -> Option<f64> {
        self.components
            .get_index_of(component_id)
            .map(|i| self.scores[i])
    }

    /// Scores every record; the first record wins for repeated component ids.
    pub fn from_model(model: &LinearModel, records: &[ChangeMetricsRecord]) -> Self {
        let mut out = RiskScores {
            components: IndexSet::new(),
            scores: Vec::new(),
        };
        for r in records {
            if out.components.insert(r.component_id.clone()) {
                out.scores.push(predict_risk(model, &r.metrics));
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut out: W, seed: u64) -> Result<()> {
        let name = "risk scores";
        out.write_all(table::header_line(seed).as_bytes())
            .map_err(|e| Error::io(name, e))?;
        let mut wtr = table::writer(out);
        wtr.write_record(["component_id", "i_score"])
            .map_err(|e| table::write_error(name, e))?;
        for (c, s) in self.components.iter().zip(&self.scores) {
            wtr.write_record([c, &s.to_string()])
                .map_err(|e| table::write_error(name, e))?;
        }
        wtr.flush().map_err(|e| Error::io(name, e))
    }

    pub fn read_csv<R: Read>(input: R, source_name: &str) -> Result<Self> {
        let mut rdr = table::reader(input, true);
        let headers = rdr
            .headers()
            .map_err(|e| table::csv_error(source_name, e))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["component_id", "i_score"] {
            return Err(Error::parse(
                source_name,
                table::line_of(&headers).max(1),
                "header must be `component_id,i_score`",
            ));
        }
        let mut out = RiskScores {
            components: IndexSet::new(),
            scores: Vec::new(),
        };
        for record in rdr.records() {
            let record = record.map_err(|e| table::csv_error(source_name, e))?;
            let line = table::line_of(&record);
            if record.len() != 2 {
                return Err(Error::parse(source_name, line, "expected 2 fields"));
            }
            let v: f64 = record[1]
                .parse()
                .ok()
                .filter(|v: &f64| (0.0..=1.0).contains(v))
                .ok_or_else(|| {
                    Error::parse(
                        source_name,
                        line,
                        format!("i_score must be in [0, 1], got `{}`", &record[1]),
                    )
                })?;
            if !out.components.insert(record[0].to_string()) {
                return Err(Error::parse(source_name, line, "duplicate component"));
            }
            out.scores.push(v);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvConfig {
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: DEFAULT_FOLDS,
            repeats: DEFAULT_REPEATS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    /// Mean percentage of correctly classified records over repeats.
    pub pc: f64,
    /// Mean true-positive count per repeat, rounded.
    pub tp: u64,
    /// Mean false-positive count per repeat, rounded.
    pub fp: u64,
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl CvReport {
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["tool_version"] = serde_json::json!(crate::VERSION);
        v
    }
}

/// Seeded shuffle of `0..n` dealt round-robin into `folds` folds.
pub fn fold_partition(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![Vec::with_capacity(n / folds.max(1) + 1); folds];
    for (pos, i) in idx.into_iter().enumerate() {
        out[pos % folds].push(i);
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
struct RepeatTally {
    correct: usize,
    tp: usize,
    fp: usize,
}

/// Repeated k-fold cross-validation; repeat `r` shuffles with `seed + r`.
/// Repeats run in parallel and are aggregated in repeat order.
pub fn cross_validate(
    records: &[ChangeMetricsRecord],
    labels: &[bool],
    config: &CvConfig,
) -> Result<CvReport> {
    check_lengths(records, labels.len())?;
    if config.folds < 2 {
        return Err(Error::Invalid(
            "cross-validation needs at least 2 folds".into(),
        ));
    }
    if config.repeats == 0 {
        return Err(Error::Invalid(
            "cross-validation needs at least 1 repeat".into(),
        ));
    }
    if records.len() < config.folds {
        return Err(Error::Invalid(format!(
            "{} records is fewer than {} folds",
            records.len(),
            config.folds
        )));
    }
    let targets = as_targets(labels);
    let tallies: Vec<Result<RepeatTally>> = (0..config.repeats)
        .into_par_iter()
        .map(|r| {
            let seed = config.seed.wrapping_add(r as u64);
            run_repeat(records, labels, &targets, config.folds, seed)
        })
        .collect();

    let n = records.len() as f64;
    let (mut pc_sum, mut tp_sum, mut fp_sum) = (0.0, 0usize, 0usize);
    for t in tallies {
        let t = t?;
        pc_sum += 100.0 * t.correct as f64 / n;
        tp_sum += t.tp;
        fp_sum += t.fp;
    }
    let reps = config.repeats as f64;
    Ok(CvReport {
        pc: pc_sum / reps,
        tp: (tp_sum as f64 / reps).round() as u64,
        fp: (fp_sum as f64 / reps).round() as u64,
        folds: config.folds,
        repeats: config.repeats,
        seed: config.seed,
    })
}

fn run_repeat(
    records: &[ChangeMetricsRecord],
    labels: &[bool],
    targets: &[f64],
    folds: usize,
    seed: u64,
) -> Result<RepeatTally> {
    let mut tally = RepeatTally::default();
    let partition = fold_partition(records.len(), folds, seed);
    let mut held_out = vec![false; records.len()];
    for fold in &partition {
        for &i in fold {
            held_out[i] = true;
        }
        let (train, train_y): (Vec<ChangeMetricsRecord>, Vec<f64>) = records
            .iter()
            .zip(targets)
            .enumerate()
            .filter(|(i, _)| !held_out[*i])
            .map(|(_, (r, &y))| (r.clone(), y))
            .unzip();
        let model = fit_least_squares(&train, &train_y)?;
        for &i in fold {
            let predicted = predict_risk(&model, &records[i].metrics) >= CLASSIFY_THRESHOLD;
            match (predicted, labels[i]) {
                (true, true) => {
                    tally.tp += 1;
                    tally.correct += 1;
                }
                (true, false) => tally.fp += 1,
                (false, false) => tally.correct += 1,
                (false, true) => {}
            }
        }
        for &i in fold {
            held_out[i] = false;
        }
    }
    Ok(tally)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "component_id,modification_count,loc_added,max_loc_added,ave_loc_added,loc_deleted,max_loc_deleted,ave_loc_deleted,code_churn,max_code_churn,ave_code_churn,age_weeks,buggy";

    fn rec(id: &str, m: [f64; METRIC_COUNT], label: bool) -> ChangeMetricsRecord {
        ChangeMetricsRecord {
            component_id: id.into(),
            metrics: ChangeMetrics(m),
            label: Some(label),
        }
    }

    /// Metrics whose only varying column is `code_churn` (index 7).
    fn churn_only(churn: f64) -> [f64; METRIC_COUNT] {
        [1.0, 2.0, 2.0, 2.0, 1.0, 1.0, 1.0, churn, 9e3, 1.0, 10.0]
    }

    #[test]
    fn header_only_file_is_empty() {
        assert!(load_change_metrics(HEADER.as_bytes(), "m")
            .unwrap()
            .is_empty());
    }

    #[test]
    fn rows_load_in_order() {
        let text = format!(
            "{HEADER}\nm1,1,2,2,2,1,1,1,3,3,3,4,1\nm2,0,0,0,0,0,0,0,0,0,0,1,0\nm3,2,4,3,2,0,0,0,4,3,2,9,\n"
        );
        let recs = load_change_metrics(text.as_bytes(), "m").unwrap();
        let ids: Vec<_> = recs.iter().map(|r| r.component_id.as_str()).collect();
        assert_eq!(ids, ["m1", "m2", "m3"]);
        assert_eq!(recs[0].label, Some(true));
        assert_eq!(recs[2].label, None);
        assert_eq!(recs[2].metrics.get("age_weeks"), Some(9.0));
    }

    #[test]
    fn max_below_ave_is_rejected_at_row() {
        let text = format!("{HEADER}\nm1,1,2,2,2,1,1,1,3,3,3,4,1\nm2,1,5,1,3,0,0,0,5,5,5,1,0\n");
        match load_change_metrics(text.as_bytes(), "m") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("max_loc_added"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn load_errors() {
        let missing = "component_id,loc_added\nm1,3\n";
        assert!(load_change_metrics(missing.as_bytes(), "m").is_err());
        let negative = format!("{HEADER}\nm1,-1,2,2,2,1,1,1,3,3,3,4,1\n");
        assert!(matches!(
            load_change_metrics(negative.as_bytes(), "m"),
            Err(Error::Parse { line: 2, .. })
        ));
        let bad_label = format!("{HEADER}\nm1,1,2,2,2,1,1,1,3,3,3,4,maybe\n");
        assert!(load_change_metrics(bad_label.as_bytes(), "m").is_err());
    }

    #[test]
    fn correlation_edge_cases() {
        let labels = [true, false, true, false, false];
        let recs: Vec<_> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let mut m = churn_only(if l { 1.0 } else { 0.0 });
                m[0] = if l { 0.0 } else { 1.0 };
                rec(&format!("m{i}"), m, l)
            })
            .collect();
        let c = metric_correlations(&recs, &labels).unwrap();
        assert!((c[CODE_CHURN] - 1.0).abs() < 1e-12);
        assert!((c[0] + 1.0).abs() < 1e-12);
        assert_eq!(c[10], 0.0);
        assert!(metric_correlations(&recs[..1], &labels[..1]).is_err());
    }

    #[test]
    fn constant_target_fits_zero_model() {
        let recs: Vec<_> = (0..20)
            .map(|i| rec("m", churn_only(i as f64), false))
            .collect();
        let labels = vec![false; 20];
        let m = fit_linear_model(&recs, &labels).unwrap();
        assert!(m.coefficients.iter().all(|&b| b == 0.0));
        assert_eq!(m.intercept, 0.0);
    }

    #[test]
    fn intercept_is_label_mean() {
        let recs: Vec<_> = (0..30)
            .map(|i| rec("m", churn_only((i * 7 % 13) as f64), i % 2 == 0))
            .collect();
        let labels: Vec<bool> = recs.iter().map(|r| r.label.unwrap()).collect();
        let m = fit_linear_model(&recs, &labels).unwrap();
        assert!((m.intercept - 0.5).abs() < 1e-9);
    }

    #[test]
    fn prediction_at_training_mean_is_intercept() {
        let recs: Vec<_> = (0..25)
            .map(|i| {
                let mut m = churn_only(i as f64);
                m[10] = (i * i % 11) as f64;
                rec("m", m, i % 3 == 0)
            })
            .collect();
        let labels = labels_of(&recs).unwrap();
        let m = fit_linear_model(&recs, &labels).unwrap();
        let at_mean = ChangeMetrics(m.standardization.mean);
        assert!((m.predict_linear(&at_mean) - m.intercept).abs() < 1e-12);
    }

    #[test]
    fn clamping_and_constant_model() {
        let recs: Vec<_> = (0..3)
            .map(|i| rec("m", churn_only(i as f64), false))
            .collect();
        let mut m = fit_linear_model(&recs, &[false; 3]).unwrap();
        m.intercept = 0.3;
        assert_eq!(predict_risk(&m, &ChangeMetrics(churn_only(1e6))), 0.3);
        m.intercept = 1.7;
        assert_eq!(predict_risk(&m, &recs[0].metrics), 1.0);
        m.intercept = -0.2;
        assert_eq!(predict_risk(&m, &recs[0].metrics), 0.0);
    }

    #[test]
    fn folds_cover_disjointly() {
        let parts = fold_partition(23, 10, 5);
        let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn cv_all_negative_labels() {
        let recs: Vec<_> = (0..20)
            .map(|i| rec("m", churn_only(i as f64), false))
            .collect();
        let cfg = CvConfig {
            folds: 10,
            repeats: 3,
            seed: 1,
        };
        let r = cross_validate(&recs, &[false; 20], &cfg).unwrap();
        assert_eq!((r.tp, r.fp, r.pc), (0, 0, 100.0));
    }

    #[test]
    fn cv_rejects_too_few_records() {
        let recs: Vec<_> = (0..5)
            .map(|i| rec("m", churn_only(i as f64), false))
            .collect();
        assert!(cross_validate(&recs, &[false; 5], &CvConfig::default()).is_err());
    }

    #[test]
    fn risk_csv_round_trip() {
        let mut scores = RiskScores {
            components: IndexSet::new(),
            scores: vec![],
        };
        for (c, s) in [("m2", 0.25), ("m1", 1.0)] {
            scores.components.insert(c.into());
            scores.scores.push(s);
        }
        let mut buf = Vec::new();
        scores.write_csv(&mut buf, 9).unwrap();
        assert_eq!(RiskScores::read_csv(buf.as_slice(), "r").unwrap(), scores);
        let bad = "component_id,i_score\nm1,1.5\n";
        assert!(RiskScores::read_csv(bad.as_bytes(), "r").is_err());
    }

    #[test]
    fn metrics_csv_round_trip() {
        let recs = vec![
            rec("m1", churn_only(4.5), true),
            ChangeMetricsRecord {
                component_id: "m2".into(),
                metrics: ChangeMetrics(churn_only(0.0)),
                label: None,
            },
        ];
        let mut buf = Vec::new();
        write_change_metrics(&mut buf, 0, &recs).unwrap();
        assert_eq!(load_change_metrics(buf.as_slice(), "m").unwrap(), recs);
    }
}
