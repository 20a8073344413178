//! Fault-detection scoring of test orderings.
//!
//! For an ordering of `n` executed tests and `m` faults,
//!
//! ```text
//! APFD  = 1 - (TF_1 + ... + TF_m) / (n m) + 1 / (2n)
//! NAPFD = p - (TF_1 + ... + TF_m) / (n m) + p / (2n)
//! ```
//!
//! where `TF_i` is the 1-based position of the first test revealing fault
//! `i`. For NAPFD only a budgeted prefix is executed, `m` counts the faults
//! the full suite detects, `p` is the detected fraction of those within the
//! prefix, and faults missed by the prefix contribute `TF_i = 0`.

use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexSet;
use serde::Serialize;
use tracing::warn;

use crate::prioritize::{order_random, PrioritizedSuite, Technique};
use crate::table;
use crate::{Error, Result};

pub const DEFAULT_BUDGETS: [u32; 10] = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100];
pub const DEFAULT_RANDOM_RUNS: usize = 10;

/// Boolean test × fault detection.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FaultMatrix {
    tests: IndexSet<String>,
    faults: IndexSet<String>,
    /// Test-major.
    cells: Vec<bool>,
}

impl FaultMatrix {
    pub fn new(tests: &[&str], faults: &[&str]) -> Result<Self> {
        let mut t = IndexSet::new();
        for id in tests {
            if id.is_empty() || !t.insert(id.to_string()) {
                return Err(Error::Invalid(format!("empty or duplicate test id `{id}`")));
            }
        }
        let mut f = IndexSet::new();
        for id in faults {
            if id.is_empty() || !f.insert(id.to_string()) {
                return Err(Error::Invalid(format!(
                    "empty or duplicate fault id `{id}`"
                )));
            }
        }
        let cells = vec![false; t.len() * f.len()];
        Ok(Self {
            tests: t,
            faults: f,
            cells,
        })
    }

    pub fn set(&mut self, test: usize, fault: usize, detects: bool) {
        self.cells[test * self.faults.len() + fault] = detects;
    }

    /// Marks detection by id; both ids must exist.
    pub fn set_by_id(&mut self, test: &str, fault: &str, detects: bool) -> Result<()> {
        let t = self
            .tests
            .get_index_of(test)
            .ok_or_else(|| Error::Invalid(format!("unknown test `{test}`")))?;
        let f = self
            .faults
            .get_index_of(fault)
            .ok_or_else(|| Error::Invalid(format!("unknown fault `{fault}`")))?;
        self.set(t, f, detects);
        Ok(())
    }

    pub fn detects(&self, test: usize, fault: usize) -> bool {
        self.cells[test * self.faults.len() + fault]
    }

    pub fn tests(&self) -> &IndexSet<String> {
        &self.tests
    }

    pub fn faults(&self) -> &IndexSet<String> {
        &self.faults
    }

    /// The same matrix with fault columns in another order.
    pub fn with_fault_order(&self, order: &[usize]) -> Self {
        let faults: IndexSet<String> = order.iter().map(|&f| self.faults[f].clone()).collect();
        let mut out = Self {
            tests: self.tests.clone(),
            faults,
            cells: vec![false; self.cells.len()],
        };
        for t in 0..self.tests.len() {
            for (new_f, &old_f) in order.iter().enumerate() {
                out.set(t, new_f, self.detects(t, old_f));
            }
        }
        out
    }

    pub fn read_csv<R: Read>(input: R, source_name: &str) -> Result<Self> {
        let t = table::read_bool_table(input, source_name, "test_id")?;
        Ok(Self {
            tests: t.rows,
            faults: t.cols,
            cells: t.cells,
        })
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::read_csv(table::open(path)?, &path.display().to_string())
    }

    pub fn write_csv<W: Write>(&self, out: W, seed: u64) -> Result<()> {
        table::write_bool_table(out, seed, "test_id", &self.tests, &self.faults, |t, f| {
            self.detects(t, f)
        })
    }
}

/// Maps an ordering onto fault-matrix test indices; it must be a permutation.
fn resolve_order(order: &[String], fm: &FaultMatrix) -> Result<Vec<usize>> {
    if order.len() != fm.tests.len() {
        return Err(Error::Invalid(format!(
            "ordering has {} tests but the fault matrix has {}",
            order.len(),
            fm.tests.len()
        )));
    }
    let mut seen = vec![false; order.len()];
    order
        .iter()
        .map(|id| {
            let t = fm
                .tests
                .get_index_of(id)
                .ok_or_else(|| Error::Invalid(format!("test `{id}` is not in the fault matrix")))?;
            if std::mem::replace(&mut seen[t], true) {
                return Err(Error::Invalid(format!(
                    "test `{id}` appears twice in the ordering"
                )));
            }
            Ok(t)
        })
        .collect()
}

/// 1-based position of the first detecting test per fault, or `None`.
fn first_detections(order: &[usize], fm: &FaultMatrix) -> Vec<Option<usize>> {
    (0..fm.faults.len())
        .map(|f| order.iter().position(|&t| fm.detects(t, f)).map(|p| p + 1))
        .collect()
}

/// Classic APFD over the full ordering. Every fault must be detected.
pub fn apfd(order: &PrioritizedSuite, fm: &FaultMatrix) -> Result<f64> {
    let idx = resolve_order(&order.order, fm)?;
    let n = idx.len();
    let m = fm.faults.len();
    if n == 0 || m == 0 {
        return Err(Error::Invalid(
            "APFD needs at least one test and one fault".into(),
        ));
    }
    let mut sum = 0usize;
    for (f, tf) in first_detections(&idx, fm).into_iter().enumerate() {
        sum += tf.ok_or_else(|| {
            Error::Invalid(format!(
                "fault `{}` is detected by no test; use NAPFD",
                fm.faults[f]
            ))
        })?;
    }
    let (n, m) = (n as f64, m as f64);
    Ok(1.0 - sum as f64 / (n * m) + 1.0 / (2.0 * n))
}

/// Prefix length for a budget fraction: `ceil(fraction · total)`, at least 1.
/// Products within 1e-9 of an integer are treated as that integer.
pub fn budget_prefix_len(total: usize, fraction: f64) -> usize {
    let x = fraction * total as f64;
    let nearest = x.round();
    let n = if (x - nearest).abs() <= 1e-9 * x.max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    (n as usize).clamp(1, total.max(1))
}

/// NAPFD of the first `ceil(fraction · total)` tests. Returns 0 (with a
/// warning) when the full suite detects no fault.
pub fn napfd(order: &PrioritizedSuite, fm: &FaultMatrix, budget_fraction: f64) -> Result<f64> {
    if !(budget_fraction > 0.0 && budget_fraction <= 1.0) {
        return Err(Error::Invalid(format!(
            "budget fraction {budget_fraction} is outside (0, 1]"
        )));
    }
    let idx = resolve_order(&order.order, fm)?;
    if idx.is_empty() {
        return Err(Error::Invalid("NAPFD needs at least one test".into()));
    }
    Ok(napfd_indices(
        &idx,
        fm,
        budget_prefix_len(idx.len(), budget_fraction),
    ))
}

fn napfd_indices(idx: &[usize], fm: &FaultMatrix, n: usize) -> f64 {
    let first = first_detections(idx, fm);
    let m = first.iter().filter(|p| p.is_some()).count();
    if m == 0 {
        warn!("the full suite detects no fault; NAPFD defined as 0");
        return 0.0;
    }
    let within: Vec<usize> = first
        .iter()
        .flatten()
        .copied()
        .filter(|&p| p <= n)
        .collect();
    let p = within.len() as f64 / m as f64;
    let sum: usize = within.iter().sum();
    let (nf, mf) = (n as f64, m as f64);
    p - sum as f64 / (nf * mf) + p / (2.0 * nf)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetRow {
    pub technique: Technique,
    pub budget_percent: u32,
    pub napfd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetReport {
    pub application: String,
    pub budgets: Vec<u32>,
    pub random_runs: usize,
    /// Base seed of the random technique, when one was evaluated.
    pub random_seed: Option<u64>,
    pub rows: Vec<BudgetRow>,
}

impl BudgetReport {
    pub fn value(&self, technique: Technique, budget_percent: u32) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.technique == technique && r.budget_percent == budget_percent)
            .map(|r| r.napfd)
    }

    /// One row per budget with a column per technique; techniques that were
    /// not evaluated are left empty.
    pub fn write_csv<W: Write>(&self, mut out: W, seed: u64) -> Result<()> {
        let name = "budget report";
        out.write_all(table::header_line(seed).as_bytes())
            .map_err(|e| Error::io(name, e))?;
        let mut wtr = table::writer(out);
        let cols = [
            Technique::Ch,
            Technique::Mfm,
            Technique::Random,
            Technique::Greedy,
            Technique::Hcf,
        ];
        wtr.write_record([
            "application",
            "budget_percent",
            "t_ch",
            "t_mfm",
            "t_r",
            "t_g",
            "t_hcf",
        ])
        .map_err(|e| table::write_error(name, e))?;
        for &b in &self.budgets {
            let mut row = vec![self.application.clone(), b.to_string()];
            row.extend(cols.iter().map(|&t| {
                self.value(t, b)
                    .map(|v| format!("{v:.6}"))
                    .unwrap_or_default()
            }));
            wtr.write_record(&row)
                .map_err(|e| table::write_error(name, e))?;
        }
        wtr.flush().map_err(|e| Error::io(name, e))
    }

    pub fn to_json(&self, seed: u64) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["tool_version"] = serde_json::json!(crate::VERSION);
        v["seed"] = serde_json::json!(seed);
        v
    }
}

/// NAPFD of each suite at each budget percentage. A random suite is scored
/// as the mean over `random_runs` permutations seeded `seed + run`, where
/// `seed` is the suite's own seed.
pub fn budget_sweep(
    application: &str,
    suites: &[PrioritizedSuite],
    fm: &FaultMatrix,
    budgets: &[u32],
    random_runs: usize,
) -> Result<BudgetReport> {
    for &b in budgets {
        if b == 0 || b > 100 {
            return Err(Error::Invalid(format!("budget {b}% is outside 1..=100")));
        }
    }
    let mut rows = Vec::new();
    let mut random_seed = None;
    for suite in suites {
        let orders: Vec<Vec<usize>> = if suite.technique == Technique::Random {
            let base = suite.seed.ok_or_else(|| {
                Error::Invalid("random suite has no seed to derive runs from".into())
            })?;
            if random_runs == 0 {
                return Err(Error::Invalid("random_runs must be at least 1".into()));
            }
            random_seed = Some(base);
            (0..random_runs)
                .map(|run| {
                    let order = order_random(fm.tests(), base.wrapping_add(run as u64));
                    resolve_order(&order, fm)
                })
                .collect::<Result<_>>()?
        } else {
            vec![resolve_order(&suite.order, fm)?]
        };
        if orders[0].is_empty() {
            return Err(Error::Invalid("cannot sweep an empty suite".into()));
        }
        for &b in budgets {
            let mut sum = 0.0;
            for idx in &orders {
                let n = budget_prefix_len(idx.len(), b as f64 / 100.0);
                sum += napfd_indices(idx, fm, n);
            }
            rows.push(BudgetRow {
                technique: suite.technique,
                budget_percent: b,
                napfd: sum / orders.len() as f64,
            });
        }
    }
    Ok(BudgetReport {
        application: application.to_string(),
        budgets: budgets.to_vec(),
        random_runs,
        random_seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn suite(order: &[&str]) -> PrioritizedSuite {
        PrioritizedSuite {
            technique: Technique::Hcf,
            order: order.iter().map(|s| s.to_string()).collect(),
            scores: vec![0.0; order.len()],
            seed: None,
        }
    }

    /// Fault matrix from `(test, detected faults)`.
    fn faults(rows: &[(&str, &[&str])], fault_ids: &[&str]) -> FaultMatrix {
        let tests: Vec<&str> = rows.iter().map(|r| r.0).collect();
        let mut fm = FaultMatrix::new(&tests, fault_ids).unwrap();
        for (t, fs) in rows {
            for f in *fs {
                fm.set_by_id(t, f, true).unwrap();
            }
        }
        fm
    }

    #[test]
    fn apfd_examples() {
        let fm = faults(
            &[
                ("a", &["f1"]),
                ("b", &[]),
                ("c", &["f2"]),
                ("d", &[]),
                ("e", &[]),
            ],
            &["f1", "f2"],
        );
        let v = apfd(&suite(&["a", "b", "c", "d", "e"]), &fm).unwrap();
        assert!((v - 0.7).abs() < 1e-15);

        let best = faults(
            &[("a", &["f1", "f2"]), ("b", &[]), ("c", &[])],
            &["f1", "f2"],
        );
        let v = apfd(&suite(&["a", "b", "c"]), &best).unwrap();
        assert!((v - (1.0 - 1.0 / 6.0)).abs() < 1e-15);

        let one = faults(&[("a", &["f1"])], &["f1"]);
        assert_eq!(apfd(&suite(&["a"]), &one).unwrap(), 0.5);
    }

    #[test]
    fn apfd_rejects_undetected_fault() {
        let fm = faults(&[("a", &["f1"])], &["f1", "f2"]);
        assert!(apfd(&suite(&["a"]), &fm).is_err());
    }

    #[test]
    fn napfd_hand_instance() {
        let fm = faults(
            &[("t1", &[]), ("t2", &[]), ("t3", &["f1", "f2"]), ("t4", &[])],
            &["f1", "f2"],
        );
        let s = suite(&["t1", "t2", "t3", "t4"]);
        assert_eq!(napfd(&s, &fm, 0.5).unwrap(), 0.0);
        assert_eq!(napfd(&s, &fm, 0.75).unwrap(), 1.0 / 6.0);
    }

    #[test]
    fn napfd_nothing_detected_is_zero() {
        let fm = faults(&[("a", &[]), ("b", &[])], &["f1"]);
        assert_eq!(napfd(&suite(&["a", "b"]), &fm, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn napfd_full_budget_matches_apfd() {
        let fm = faults(
            &[
                ("a", &[]),
                ("b", &["f2"]),
                ("c", &["f1", "f3"]),
                ("d", &["f3"]),
            ],
            &["f1", "f2", "f3"],
        );
        let s = suite(&["d", "a", "c", "b"]);
        assert_eq!(napfd(&s, &fm, 1.0).unwrap(), apfd(&s, &fm).unwrap());
    }

    #[test]
    fn napfd_argument_checks() {
        let fm = faults(&[("a", &["f1"]), ("b", &[])], &["f1"]);
        assert!(napfd(&suite(&["a", "b"]), &fm, 0.0).is_err());
        assert!(napfd(&suite(&["a", "b"]), &fm, 1.5).is_err());
        assert!(napfd(&suite(&["a"]), &fm, 1.0).is_err());
        assert!(napfd(&suite(&["a", "a"]), &fm, 1.0).is_err());
        assert!(napfd(&suite(&["a", "zz"]), &fm, 1.0).is_err());
    }

    #[test]
    fn prefix_lengths() {
        assert_eq!(budget_prefix_len(10, 0.3), 3);
        assert_eq!(budget_prefix_len(40, 0.1), 4);
        assert_eq!(budget_prefix_len(543, 0.1), 55);
        assert_eq!(budget_prefix_len(4, 0.75), 3);
        assert_eq!(budget_prefix_len(3, 0.01), 1);
        assert_eq!(budget_prefix_len(7, 1.0), 7);
    }

    #[test]
    fn sweep_single_technique_best_case() {
        let fm = faults(
            &[("a", &["f1"]), ("b", &[]), ("c", &[]), ("d", &[])],
            &["f1"],
        );
        let r = budget_sweep("app", &[suite(&["a", "b", "c", "d"])], &fm, &[100], 10).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].napfd, 1.0 - 1.0 / 8.0);
    }

    #[test]
    fn sweep_identical_suites_identical_rows() {
        let fm = faults(&[("a", &[]), ("b", &["f1"]), ("c", &["f2"])], &["f1", "f2"]);
        let mut other = suite(&["c", "a", "b"]);
        let first = suite(&["c", "a", "b"]);
        other.technique = Technique::Ch;
        let r = budget_sweep("app", &[first, other], &fm, &DEFAULT_BUDGETS, 10).unwrap();
        for &b in &DEFAULT_BUDGETS {
            assert_eq!(r.value(Technique::Hcf, b), r.value(Technique::Ch, b));
        }
    }

    #[test]
    fn sweep_random_mean_is_reproducible() {
        let fm = faults(
            &[
                ("a", &[]),
                ("b", &["f1"]),
                ("c", &["f2"]),
                ("d", &[]),
                ("e", &["f1"]),
            ],
            &["f1", "f2"],
        );
        let mut random = suite(&[]);
        random.technique = Technique::Random;
        random.seed = Some(17);
        random.order = order_random(fm.tests(), 17);
        let a = budget_sweep("app", &[random.clone()], &fm, &DEFAULT_BUDGETS, 10).unwrap();
        let b = budget_sweep("app", &[random], &fm, &DEFAULT_BUDGETS, 10).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.random_seed, Some(17));
    }

    #[test]
    fn report_csv_layout() {
        let fm = faults(&[("a", &["f1"]), ("b", &[])], &["f1"]);
        let r = budget_sweep("demo", &[suite(&["a", "b"])], &fm, &[50, 100], 10).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf, 4).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[1],
            "application,budget_percent,t_ch,t_mfm,t_r,t_g,t_hcf"
        );
        assert_eq!(lines[2], "demo,50,,,,,0.500000");
        assert_eq!(lines[3], "demo,100,,,,,0.750000");
    }

    #[test]
    fn fault_csv_round_trip() {
        let fm = faults(&[("a", &["f2"]), ("b", &["f1", "f2"])], &["f1", "f2"]);
        let mut buf = Vec::new();
        fm.write_csv(&mut buf, 0).unwrap();
        assert_eq!(FaultMatrix::read_csv(buf.as_slice(), "fm").unwrap(), fm);
    }
}
