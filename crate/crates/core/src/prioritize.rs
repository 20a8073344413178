//! Component risk combination and test-suite ordering.
//!
//! The hybrid score of a component is `r = f · i`, the product of its scaled
//! access frequency and its change risk. Tests are ordered by the total risk
//! they cover, with tests that add no new risky coverage deferred to the end.
//! Four baselines (change-history only, usage only, random, greedy coverage
//! count) share the same coverage input.

use std::cmp::Ordering;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexSet;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tracing::warn;

use crate::cf::FrequencyScores;
use crate::change_risk::RiskScores;
use crate::table;
use crate::{Error, Result};

/// Boolean component × test coverage.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoverageMatrix {
    components: IndexSet<String>,
    tests: IndexSet<String>,
    /// Test-major: `cells[t * n_components + c]`.
    cells: Vec<bool>,
}

impl CoverageMatrix {
    pub fn new(components: &[&str], tests: &[&str]) -> Result<Self> {
        let components = unique(components, "component")?;
        let tests = unique(tests, "test")?;
        let cells = vec![false; components.len() * tests.len()];
        Ok(Self {
            components,
            tests,
            cells,
        })
    }

    /// Builds coverage from `(test, covered components)` lists; component
    /// order follows first appearance.
    pub fn from_tests(tests: &[(&str, &[&str])]) -> Result<Self> {
        let mut components = IndexSet::new();
        for (_, covered) in tests {
            for c in *covered {
                components.insert(c.to_string());
            }
        }
        let comp_refs: Vec<&str> = components.iter().map(String::as_str).collect();
        let test_ids: Vec<&str> = tests.iter().map(|(t, _)| *t).collect();
        let mut cov = Self::new(&comp_refs, &test_ids)?;
        for (t, (_, covered)) in tests.iter().enumerate() {
            for c in *covered {
                let ci = cov.components.get_index_of(*c).expect("registered above");
                cov.set(ci, t, true);
            }
        }
        Ok(cov)
    }

    pub fn set(&mut self, component: usize, test: usize, covered: bool) {
        let n = self.components.len();
        self.cells[test * n + component] = covered;
    }

    pub fn covers(&self, test: usize, component: usize) -> bool {
        self.cells[test * self.components.len() + component]
    }

    pub fn components(&self) -> &IndexSet<String> {
        &self.components
    }

    pub fn tests(&self) -> &IndexSet<String> {
        &self.tests
    }

    /// Component indices covered by a test.
    pub fn covered_by(&self, test: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.components.len();
        self.cells[test * n..(test + 1) * n]
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(c, _)| c)
    }

    /// Reads the `component_id,<test_id>...` layout.
    pub fn read_csv<R: Read>(input: R, source_name: &str) -> Result<Self> {
        let t = table::read_bool_table(input, source_name, "component_id")?;
        let (nc, nt) = (t.rows.len(), t.cols.len());
        let mut cells = vec![false; nc * nt];
        for c in 0..nc {
            for k in 0..nt {
                cells[k * nc + c] = t.cells[c * nt + k];
            }
        }
        Ok(Self {
            components: t.rows,
            tests: t.cols,
            cells,
        })
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::read_csv(table::open(path)?, &path.display().to_string())
    }

    pub fn write_csv<W: Write>(&self, out: W, seed: u64) -> Result<()> {
        table::write_bool_table(
            out,
            seed,
            "component_id",
            &self.components,
            &self.tests,
            |c, t| self.covers(t, c),
        )
    }
}

fn unique(ids: &[&str], what: &str) -> Result<IndexSet<String>> {
    let mut set = IndexSet::new();
    for id in ids {
        if id.is_empty() || !set.insert(id.to_string()) {
            return Err(Error::Invalid(format!(
                "empty or duplicate {what} id `{id}`"
            )));
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskRow {
    pub f: f64,
    pub i: f64,
    pub r: f64,
}

/// Per-component `(f, i, r)` with `r = f · i`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComponentRiskTable {
    components: IndexSet<String>,
    rows: Vec<RiskRow>,
}

impl ComponentRiskTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces a row, computing `r = f · i`.
    pub fn insert(&mut self, component_id: &str, f: f64, i: f64) {
        let row = RiskRow { f, i, r: f * i };
        let (idx, fresh) = self.components.insert_full(component_id.to_string());
        if fresh {
            self.rows.push(row);
        } else {
            self.rows[idx] = row;
        }
    }

    /// Builds a table straight from combined risks; f is set to 1 and i to r.
    pub fn from_risks(risks: &[(&str, f64)]) -> Self {
        let mut t = Self::new();
        for (c, r) in risks {
            t.insert(c, 1.0, *r);
        }
        t
    }

    pub fn components(&self) -> &IndexSet<String> {
        &self.components
    }

    pub fn rows(&self) -> &[RiskRow] {
        &self.rows
    }

    pub fn get(&self, component_id: &str) -> Option<RiskRow> {
        self.components
            .get_index_of(component_id)
            .map(|i| self.rows[i])
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Multiplies every i (and therefore r) by `k`.
    pub fn scale_risk(&self, k: f64) -> Self {
        let mut t = Self::new();
        for (c, row) in self.components.iter().zip(&self.rows) {
            t.insert(c, row.f, row.i * k);
        }
        t
    }

    pub fn write_csv<W: Write>(&self, mut out: W, seed: u64) -> Result<()> {
        let name = "risk table";
        out.write_all(table::header_line(seed).as_bytes())
            .map_err(|e| Error::io(name, e))?;
        let mut wtr = table::writer(out);
        wtr.write_record(["component_id", "f", "i", "r"])
            .map_err(|e| table::write_error(name, e))?;
        for (c, row) in self.components.iter().zip(&self.rows) {
            wtr.write_record([
                c,
                &row.f.to_string(),
                &row.i.to_string(),
                &row.r.to_string(),
            ])
            .map_err(|e| table::write_error(name, e))?;
        }
        wtr.flush().map_err(|e| Error::io(name, e))
    }

    /// Reads `component_id,f,i,r`; `r` must equal `f · i`.
    pub fn read_csv<R: Read>(input: R, source_name: &str) -> Result<Self> {
        let mut rdr = table::reader(input, true);
        let headers = rdr
            .headers()
            .map_err(|e| table::csv_error(source_name, e))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["component_id", "f", "i", "r"] {
            return Err(Error::parse(
                source_name,
                table::line_of(&headers).max(1),
                "header must be `component_id,f,i,r`",
            ));
        }
        let mut t = Self::new();
        for record in rdr.records() {
            let record = record.map_err(|e| table::csv_error(source_name, e))?;
            let line = table::line_of(&record);
            if record.len() != 4 {
                return Err(Error::parse(source_name, line, "expected 4 fields"));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(source_name, line, format!("bad number `{s}`")))
            };
            let (f, i, r) = (num(&record[1])?, num(&record[2])?, num(&record[3])?);
            if (f * i - r).abs() > 1e-12 * r.abs().max(1.0) {
                return Err(Error::parse(source_name, line, "r must equal f * i"));
            }
            if t.get(&record[0]).is_some() || record[0].is_empty() {
                return Err(Error::parse(
                    source_name,
                    line,
                    "empty or duplicate component",
                ));
            }
            t.insert(&record[0], f, i);
        }
        Ok(t)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::read_csv(table::open(path)?, &path.display().to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedScores {
    pub table: ComponentRiskTable,
    /// Components with a change-risk score but no frequency score (f = 0).
    pub missing_frequency: Vec<String>,
    /// Components with a frequency score but no change-risk score (i = 0).
    pub missing_risk: Vec<String>,
}

/// `r = f_scaled · i`. Components known to only one side get 0 on the other.
pub fn combine_scores(f: &FrequencyScores, i: &RiskScores) -> CombinedScores {
    let mut table = ComponentRiskTable::new();
    let mut missing_risk = Vec::new();
    for (idx, c) in f.components.iter().enumerate() {
        let risk = i.get(c).unwrap_or_else(|| {
            missing_risk.push(c.clone());
            0.0
        });
        table.insert(c, f.scaled[idx], risk);
    }
    let mut missing_frequency = Vec::new();
    for (c, &risk) in i.components.iter().zip(&i.scores) {
        if table.get(c).is_none() {
            missing_frequency.push(c.clone());
            table.insert(c, 0.0, risk);
        }
    }
    CombinedScores {
        table,
        missing_frequency,
        missing_risk,
    }
}

fn by_score_desc(scores: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    |&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    }
}

/// The `n` highest-r components, ties by index. `n` above the table size
/// returns everything.
pub fn top_n_components(table: &ComponentRiskTable, n: usize) -> Vec<String> {
    if n > table.len() {
        warn!(
            requested = n,
            available = table.len(),
            "top-n exceeds component count"
        );
    }
    let r: Vec<f64> = table.rows.iter().map(|row| row.r).collect();
    let mut idx: Vec<usize> = (0..r.len()).collect();
    idx.sort_by(by_score_desc(&r));
    idx.into_iter()
        .take(n)
        .map(|i| table.components[i].clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Technique {
    Hcf,
    Ch,
    Mfm,
    Random,
    Greedy,
}

impl Technique {
    pub const ALL: [Technique; 5] = [
        Technique::Ch,
        Technique::Mfm,
        Technique::Random,
        Technique::Greedy,
        Technique::Hcf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Hcf => "hcf",
            Self::Ch => "ch",
            Self::Mfm => "mfm",
            Self::Random => "random",
            Self::Greedy => "greedy",
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hcf" => Ok(Self::Hcf),
            "ch" => Ok(Self::Ch),
            "mfm" => Ok(Self::Mfm),
            "random" | "r" => Ok(Self::Random),
            "greedy" | "g" => Ok(Self::Greedy),
            other => Err(Error::Invalid(format!("unknown technique `{other}`"))),
        }
    }
}

/// How component scores turn into a test order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrderingStrategy {
    /// Highest total covered score first among tests that still add newly
    /// covered scoring components; the rest follow by total score.
    #[default]
    DeferredTotal,
    /// Plain descending total covered score.
    Total,
    /// Highest score of not-yet-covered components first; the rest follow
    /// by total score.
    Additional,
}

impl FromStr for OrderingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deferred-total" => Ok(Self::DeferredTotal),
            "total" => Ok(Self::Total),
            "additional" => Ok(Self::Additional),
            other => Err(Error::Invalid(format!(
                "unknown ordering strategy `{other}` (expected deferred-total, total or additional)"
            ))),
        }
    }
}

impl OrderingStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::DeferredTotal => "deferred-total",
            Self::Total => "total",
            Self::Additional => "additional",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrioritizedSuite {
    pub technique: Technique,
    pub order: Vec<String>,
    /// Score each placed test was selected on (total covered score for the
    /// score-driven techniques, covered count for greedy, 0 for random).
    pub scores: Vec<f64>,
    pub seed: Option<u64>,
}

impl PrioritizedSuite {
    pub fn write_csv<W: Write>(&self, mut out: W, header_seed: u64) -> Result<()> {
        write_suites(&mut out, header_seed, std::slice::from_ref(self))
    }

    pub fn read_csv<R: Read>(input: R, source_name: &str) -> Result<Self> {
        let mut suites = read_suites(input, source_name)?;
        if suites.len() != 1 {
            return Err(Error::parse(
                source_name,
                0,
                format!("expected one technique, found {}", suites.len()),
            ));
        }
        Ok(suites.remove(0))
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::read_csv(table::open(path)?, &path.display().to_string())
    }
}

/// Writes `rank,test_id,technique,seed` rows for several suites.
pub fn write_suites<W: Write>(
    mut out: W,
    header_seed: u64,
    suites: &[PrioritizedSuite],
) -> Result<()> {
    let name = "suite";
    out.write_all(table::header_line(header_seed).as_bytes())
        .map_err(|e| Error::io(name, e))?;
    let mut wtr = table::writer(out);
    wtr.write_record(["rank", "test_id", "technique", "seed"])
        .map_err(|e| table::write_error(name, e))?;
    for s in suites {
        let seed = s.seed.map(|v| v.to_string()).unwrap_or_default();
        for (rank, t) in s.order.iter().enumerate() {
            wtr.write_record([&(rank + 1).to_string(), t, s.technique.as_str(), &seed])
                .map_err(|e| table::write_error(name, e))?;
        }
    }
    wtr.flush().map_err(|e| Error::io(name, e))
}

/// Reads suites back; rows group by technique in file order and ranks must
/// run 1..n within each group.
pub fn read_suites<R: Read>(input: R, source_name: &str) -> Result<Vec<PrioritizedSuite>> {
    let mut rdr = table::reader(input, true);
    let headers = rdr
        .headers()
        .map_err(|e| table::csv_error(source_name, e))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["rank", "test_id", "technique", "seed"] {
        return Err(Error::parse(
            source_name,
            table::line_of(&headers).max(1),
            "header must be `rank,test_id,technique,seed`",
        ));
    }
    let mut suites: Vec<PrioritizedSuite> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| table::csv_error(source_name, e))?;
        let line = table::line_of(&record);
        if record.len() != 4 {
            return Err(Error::parse(source_name, line, "expected 4 fields"));
        }
        let technique: Technique = record[2]
            .parse()
            .map_err(|e: Error| Error::parse(source_name, line, e.to_string()))?;
        let seed = match &record[3] {
            "" => None,
            s => Some(
                s.parse::<u64>()
                    .map_err(|_| Error::parse(source_name, line, format!("bad seed `{s}`")))?,
            ),
        };
        let rank: usize = record[0]
            .parse()
            .map_err(|_| Error::parse(source_name, line, "bad rank"))?;
        let suite = match suites.iter_mut().find(|s| s.technique == technique) {
            Some(s) => s,
            None => {
                suites.push(PrioritizedSuite {
                    technique,
                    order: Vec::new(),
                    scores: Vec::new(),
                    seed,
                });
                suites.last_mut().expect("just pushed")
            }
        };
        if rank != suite.order.len() + 1 {
            return Err(Error::parse(
                source_name,
                line,
                "ranks must be consecutive from 1",
            ));
        }
        if suite.order.iter().any(|t| t == &record[1]) {
            return Err(Error::parse(source_name, line, "duplicate test in suite"));
        }
        suite.order.push(record[1].to_string());
        suite.scores.push(0.0);
    }
    Ok(suites)
}

/// Orders tests from per-coverage-component scores. Returns test indices and
/// the total covered score of each placed test.
pub fn order_by_component_scores(
    scores: &[f64],
    cov: &CoverageMatrix,
    strategy: OrderingStrategy,
) -> (Vec<usize>, Vec<f64>) {
    let nt = cov.tests.len();
    let totals: Vec<f64> = (0..nt)
        .map(|t| cov.covered_by(t).map(|c| scores[c]).sum())
        .collect();

    let mut placed = vec![false; nt];
    let mut order = Vec::with_capacity(nt);
    if strategy != OrderingStrategy::Total {
        let mut covered = vec![false; cov.components.len()];
        loop {
            let mut best: Option<(usize, f64)> = None;
            for t in (0..nt).filter(|&t| !placed[t]) {
                let gain: Vec<f64> = cov
                    .covered_by(t)
                    .filter(|&c| !covered[c] && scores[c] > 0.0)
                    .map(|c| scores[c])
                    .collect();
                if gain.is_empty() {
                    continue;
                }
                let key = match strategy {
                    OrderingStrategy::Additional => gain.iter().sum::<f64>(),
                    _ => totals[t],
                };
                if best.is_none_or(|(_, b)| key > b) {
                    best = Some((t, key));
                }
            }
            let Some((t, _)) = best else { break };
            placed[t] = true;
            order.push(t);
            for c in cov.covered_by(t) {
                covered[c] = true;
            }
        }
    }
    let mut rest: Vec<usize> = (0..nt).filter(|&t| !placed[t]).collect();
    rest.sort_by(by_score_desc(&totals));
    order.extend(rest);
    let placed_totals = order.iter().map(|&t| totals[t]).collect();
    (order, placed_totals)
}

/// Component ids of the coverage matrix that the risk table does not score.
pub fn unscored_components(table: &ComponentRiskTable, cov: &CoverageMatrix) -> Vec<String> {
    cov.components
        .iter()
        .filter(|c| table.get(c).is_none())
        .cloned()
        .collect()
}

fn coverage_scores(
    table: &ComponentRiskTable,
    cov: &CoverageMatrix,
    pick: fn(&RiskRow) -> f64,
) -> Vec<f64> {
    cov.components
        .iter()
        .map(|c| table.get(c).map(|row| pick(&row)).unwrap_or(0.0))
        .collect()
}

fn suite_from(
    cov: &CoverageMatrix,
    technique: Technique,
    order: Vec<usize>,
    scores: Vec<f64>,
    seed: Option<u64>,
) -> PrioritizedSuite {
    PrioritizedSuite {
        technique,
        order: order.into_iter().map(|t| cov.tests[t].clone()).collect(),
        scores,
        seed,
    }
}

/// Hybrid ordering on `r` with the default strategy.
pub fn order_tests_hcf(table: &ComponentRiskTable, cov: &CoverageMatrix) -> PrioritizedSuite {
    order_tests_hcf_with(table, cov, OrderingStrategy::default())
}

pub fn order_tests_hcf_with(
    table: &ComponentRiskTable,
    cov: &CoverageMatrix,
    strategy: OrderingStrategy,
) -> PrioritizedSuite {
    let unscored = unscored_components(table, cov);
    if !unscored.is_empty() {
        warn!(
            count = unscored.len(),
            "covered components without a risk score score 0"
        );
    }
    let scores = coverage_scores(table, cov, |row| row.r);
    let (order, totals) = order_by_component_scores(&scores, cov, strategy);
    suite_from(cov, Technique::Hcf, order, totals, None)
}

/// Seeded uniform permutation. Tests are sorted by id before shuffling so
/// the result depends only on the test set and the seed.
pub fn order_random(tests: &IndexSet<String>, seed: u64) -> Vec<String> {
    let mut ids: Vec<String> = tests.iter().cloned().collect();
    ids.sort();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    ids
}

/// Inputs shared by every technique.
#[derive(Debug, Clone, Copy)]
pub struct OrderingInputs<'a> {
    pub table: &'a ComponentRiskTable,
    pub coverage: &'a CoverageMatrix,
    pub strategy: OrderingStrategy,
    pub seed: u64,
}

/// Control orderings: `ch` on i, `mfm` on f, `greedy` on covered count,
/// `random` from the seed.
pub fn order_tests_baseline(
    kind: Technique,
    inputs: &OrderingInputs<'_>,
) -> Result<PrioritizedSuite> {
    let cov = inputs.coverage;
    match kind {
        Technique::Hcf => Err(Error::Invalid("hcf is not a baseline technique".into())),
        Technique::Ch | Technique::Mfm => {
            let pick: fn(&RiskRow) -> f64 = if kind == Technique::Ch {
                |r| r.i
            } else {
                |r| r.f
            };
            let scores = coverage_scores(inputs.table, cov, pick);
            let (order, totals) = order_by_component_scores(&scores, cov, inputs.strategy);
            Ok(suite_from(cov, kind, order, totals, None))
        }
        Technique::Greedy => {
            let counts: Vec<f64> = (0..cov.tests.len())
                .map(|t| cov.covered_by(t).count() as f64)
                .collect();
            let mut order: Vec<usize> = (0..counts.len()).collect();
            order.sort_by(by_score_desc(&counts));
            let placed = order.iter().map(|&t| counts[t]).collect();
            Ok(suite_from(cov, kind, order, placed, None))
        }
        Technique::Random => Ok(PrioritizedSuite {
            technique: kind,
            scores: vec![0.0; cov.tests.len()],
            order: order_random(&cov.tests, inputs.seed),
            seed: Some(inputs.seed),
        }),
    }
}

/// Any of the five techniques.
pub fn prioritize(kind: Technique, inputs: &OrderingInputs<'_>) -> Result<PrioritizedSuite> {
    match kind {
        Technique::Hcf => Ok(order_tests_hcf_with(
            inputs.table,
            inputs.coverage,
            inputs.strategy,
        )),
        other => order_tests_baseline(other, inputs),
    }
}
