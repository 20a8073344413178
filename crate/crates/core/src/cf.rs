//! Item-based collaborative filtering over the access-frequency matrix.
//!
//! Each component's observed counts are mean-centred (blanks become 0), items
//! are compared with Pearson correlation over the centred columns, and every
//! missing cell is filled with a similarity-weighted sum over the component's
//! top-N positively correlated neighbours. The completed matrix then yields a
//! per-component access-frequency score.

use std::cmp::Ordering;
use std::io::Write;
use std::str::FromStr;

use indexmap::IndexSet;
use rayon::prelude::*;
use tracing::warn;

use crate::table;
use crate::telemetry::RatingMatrix;
use crate::{Error, Result};

pub const DEFAULT_NEIGHBORS: usize = 2;

/// Which users a similarity sums over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SimilarityKind {
    /// All users, with unobserved cells contributing 0 after centring.
    #[default]
    AdjustedCosine,
    /// Only users who rated both components.
    CoRated,
}

impl FromStr for SimilarityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adjusted-cosine" => Ok(Self::AdjustedCosine),
            "co-rated" => Ok(Self::CoRated),
            other => Err(Error::Invalid(format!(
                "unknown similarity `{other}` (expected adjusted-cosine or co-rated)"
            ))),
        }
    }
}

impl SimilarityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::AdjustedCosine => "adjusted-cosine",
            Self::CoRated => "co-rated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CfConfig {
    pub neighbors: usize,
    pub similarity: SimilarityKind,
}

impl Default for CfConfig {
    fn default() -> Self {
        Self {
            neighbors: DEFAULT_NEIGHBORS,
            similarity: SimilarityKind::default(),
        }
    }
}

/// Dense mean-centred ratings, stored column (component) major.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredMatrix {
    users: IndexSet<String>,
    components: IndexSet<String>,
    values: Vec<f64>,
    observed: Vec<bool>,
    means: Vec<f64>,
}

impl CenteredMatrix {
    pub fn users(&self) -> &IndexSet<String> {
        &self.users
    }

    pub fn components(&self) -> &IndexSet<String> {
        &self.components
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Centred values of one component over all users.
    pub fn column(&self, component: usize) -> &[f64] {
        let n = self.n_users();
        &self.values[component * n..(component + 1) * n]
    }

    pub fn value(&self, user: usize, component: usize) -> f64 {
        self.values[component * self.n_users() + user]
    }

    pub fn is_observed(&self, user: usize, component: usize) -> bool {
        self.observed[component * self.n_users() + user]
    }

    /// Mean over observed ratings; 0 for a component nobody rated.
    pub fn mean(&self, component: usize) -> f64 {
        self.means[component]
    }
}

pub fn mean_center(matrix: &RatingMatrix) -> CenteredMatrix {
    let (nu, nc) = (matrix.n_users(), matrix.n_components());
    let mut sums = vec![0.0; nc];
    let mut counts = vec![0usize; nc];
    for (_, c, n) in matrix.observed() {
        sums[c] += n as f64;
        counts[c] += 1;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .enumerate()
        .map(|(c, (&s, &k))| {
            if k == 0 {
                warn!(component = %matrix.components()[c], "component has no observed ratings");
                0.0
            } else {
                s / k as f64
            }
        })
        .collect();

    let mut values = vec![0.0; nu * nc];
    let mut observed = vec![false; nu * nc];
    for (u, c, n) in matrix.observed() {
        values[c * nu + u] = n as f64 - means[c];
        observed[c * nu + u] = true;
    }
    CenteredMatrix {
        users: matrix.users().clone(),
        components: matrix.components().clone(),
        values,
        observed,
        means,
    }
}

/// Pearson correlation of two components over all users (blanks are 0 after
/// centring). A zero-norm column has similarity 0 with everything.
pub fn pearson_similarity(centered: &CenteredMatrix, i: usize, j: usize) -> f64 {
    let (x, y) = (centered.column(i), centered.column(j));
    let (mut dot, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        dot += a * b;
        xx += a * a;
        yy += b * b;
    }
    ratio(dot, xx, yy)
}

/// Pearson correlation restricted to users who rated both components.
pub fn co_rated_similarity(centered: &CenteredMatrix, i: usize, j: usize) -> f64 {
    let (mut dot, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for u in 0..centered.n_users() {
        if centered.is_observed(u, i) && centered.is_observed(u, j) {
            let (a, b) = (centered.value(u, i), centered.value(u, j));
            dot += a * b;
            xx += a * a;
            yy += b * b;
        }
    }
    ratio(dot, xx, yy)
}

fn ratio(dot: f64, xx: f64, yy: f64) -> f64 {
    if xx == 0.0 || yy == 0.0 {
        return 0.0;
    }
    (dot / (xx.sqrt() * yy.sqrt())).clamp(-1.0, 1.0)
}

/// Symmetric component × component similarity table.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTable {
    n: usize,
    values: Vec<f64>,
}

impl SimilarityTable {
    /// Computes every pair, rows in parallel. Each entry is computed
    /// independently so the result does not depend on the thread count.
    pub fn compute(centered: &CenteredMatrix, kind: SimilarityKind) -> Self {
        let n = centered.n_components();
        let sim = match kind {
            SimilarityKind::AdjustedCosine => pearson_similarity,
            SimilarityKind::CoRated => co_rated_similarity,
        };
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (i + 1..n).map(|j| sim(centered, i, j)).collect())
            .collect();
        let mut values = vec![0.0; n * n];
        for (i, row) in upper.iter().enumerate() {
            let self_sim = sim(centered, i, i);
            values[i * n + i] = if self_sim > 0.0 { 1.0 } else { 0.0 };
            for (k, &v) in row.iter().enumerate() {
                let j = i + 1 + k;
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Self { n, values }
    }

    /// Builds a table from explicit off-diagonal entries; unspecified pairs are 0.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize, f64)]) -> Self {
        let mut values = vec![0.0; n * n];
        for &(i, j, v) in pairs {
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
        Self { n, values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub component: usize,
    pub similarity: f64,
}

/// Up to N strictly positive neighbours, best first, ties by index.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    pub component: usize,
    pub neighbors: Vec<Neighbor>,
}

pub fn top_n_neighbors(sims: &SimilarityTable, component: usize, n: usize) -> NeighborSet {
    let mut candidates: Vec<Neighbor> = (0..sims.len())
        .filter(|&j| j != component)
        .map(|j| Neighbor {
            component: j,
            similarity: sims.get(component, j),
        })
        .filter(|nb| nb.similarity > 0.0)
        .collect();
    candidates.sort_by(|a, b| {
        b.similarity
            .partial_cmp(&a.similarity)
            .unwrap_or(Ordering::Equal)
            .then(a.component.cmp(&b.component))
    });
    candidates.truncate(n);
    NeighborSet {
        component,
        neighbors: candidates,
    }
}

/// Weighted sum of the user's centred ratings over the neighbour set, in
/// centred space. Empty set predicts 0.
pub fn predict_missing(user: usize, neighbors: &NeighborSet, centered: &CenteredMatrix) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for nb in &neighbors.neighbors {
        num += nb.similarity * centered.value(user, nb.component);
        den += nb.similarity;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellSource {
    Observed,
    Predicted,
}

impl CellSource {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Observed => "observed",
            Self::Predicted => "predicted",
        }
    }
}

/// Dense user × component matrix with every missing cell predicted.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedMatrix {
    users: IndexSet<String>,
    components: IndexSet<String>,
    /// Column (component) major.
    values: Vec<f64>,
    sources: Vec<CellSource>,
}

impl CompletedMatrix {
    pub fn users(&self) -> &IndexSet<String> {
        &self.users
    }

    pub fn components(&self) -> &IndexSet<String> {
        &self.components
    }

    pub fn value(&self, user: usize, component: usize) -> f64 {
        self.values[component * self.users.len() + user]
    }

    pub fn source(&self, user: usize, component: usize) -> CellSource {
        self.sources[component * self.users.len() + user]
    }

    pub fn column(&self, component: usize) -> &[f64] {
        let n = self.users.len();
        &self.values[component * n..(component + 1) * n]
    }

    pub fn write_csv<W: Write>(&self, mut out: W, seed: u64) -> Result<()> {
        let name = "completed matrix";
        out.write_all(table::header_line(seed).as_bytes())
            .map_err(|e| Error::io(name, e))?;
        let mut wtr = table::writer(out);
        wtr.write_record(["user_id", "component_id", "value", "flag"])
            .map_err(|e| table::write_error(name, e))?;
        for (u, user) in self.users.iter().enumerate() {
            for (c, comp) in self.components.iter().enumerate() {
                wtr.write_record([
                    user.as_str(),
                    comp.as_str(),
                    &self.value(u, c).to_string(),
                    self.source(u, c).as_str(),
                ])
                .map_err(|e| table::write_error(name, e))?;
            }
        }
        wtr.flush().map_err(|e| Error::io(name, e))
    }
}

/// Fills every missing cell with `max(0, prediction + component mean)`.
pub fn complete_matrix(matrix: &RatingMatrix, config: &CfConfig) -> Result<CompletedMatrix> {
    if matrix.is_empty() {
        return Err(Error::Invalid(
            "cannot complete an empty rating matrix".into(),
        ));
    }
    if config.neighbors == 0 {
        return Err(Error::Invalid("neighbor count must be at least 1".into()));
    }
    let centered = mean_center(matrix);
    let sims = SimilarityTable::compute(&centered, config.similarity);
    Ok(complete_with(matrix, &centered, &sims, config.neighbors))
}

/// Completion against precomputed centring and similarities.
pub fn complete_with(
    matrix: &RatingMatrix,
    centered: &CenteredMatrix,
    sims: &SimilarityTable,
    neighbors: usize,
) -> CompletedMatrix {
    let (nu, nc) = (matrix.n_users(), matrix.n_components());
    let mut values = vec![0.0; nu * nc];
    let mut sources = vec![CellSource::Predicted; nu * nc];
    for c in 0..nc {
        let set = top_n_neighbors(sims, c, neighbors);
        for u in 0..nu {
            let idx = c * nu + u;
            match matrix.get(u, c) {
                Some(n) => {
                    values[idx] = n as f64;
                    sources[idx] = CellSource::Observed;
                }
                None => {
                    values[idx] = (predict_missing(u, &set, centered) + centered.mean(c)).max(0.0);
                }
            }
        }
    }
    CompletedMatrix {
        users: matrix.users().clone(),
        components: matrix.components().clone(),
        values,
        sources,
    }
}

/// Per-component access-frequency scores.
///
/// `raw` is the column sum of the completed matrix divided by the number of
/// components; `scaled` is a min-max rescale of `raw` into [0, 1], with 0.5
/// everywhere when all raw values are equal.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyScores {
    pub components: IndexSet<String>,
    pub raw: Vec<f64>,
    pub scaled: Vec<f64>,
}

impl FrequencyScores {
    pub fn scaled_of(&self, component_id: &str) -> Option<f64> {
        self.components
            .get_index_of(component_id)
            .map(|i| self.scaled[i])
    }

    /// Component ids ordered by descending raw score, ties by index.
    pub fn ranking(&self) -> Vec<&str> {
        let mut idx: Vec<usize> = (0..self.raw.len()).collect();
        idx.sort_by(|&a, &b| {
            self.raw[b]
                .partial_cmp(&self.raw[a])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        idx.into_iter()
            .map(|i| self.components[i].as_str())
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W, seed: u64) -> Result<()> {
        let name = "frequency scores";
        out.write_all(table::header_line(seed).as_bytes())
            .map_err(|e| Error::io(name, e))?;
        let mut wtr = table::writer(out);
        wtr.write_record(["component_id", "f_raw", "f_scaled"])
            .map_err(|e| table::write_error(name, e))?;
        for (i, comp) in self.components.iter().enumerate() {
            wtr.write_record([comp, &self.raw[i].to_string(), &self.scaled[i].to_string()])
                .map_err(|e| table::write_error(name, e))?;
        }
        wtr.flush().map_err(|e| Error::io(name, e))
    }

    pub fn read_csv<R: std::io::Read>(input: R, source_name: &str) -> Result<Self> {
        let mut rdr = table::reader(input, true);
        let headers = rdr
            .headers()
            .map_err(|e| table::csv_error(source_name, e))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["component_id", "f_raw", "f_scaled"] {
            return Err(Error::parse(
                source_name,
                table::line_of(&headers).max(1),
                "header must be `component_id,f_raw,f_scaled`",
            ));
        }
        let mut out = FrequencyScores {
            components: IndexSet::new(),
            raw: Vec::new(),
            scaled: Vec::new(),
        };
        for record in rdr.records() {
            let record = record.map_err(|e| table::csv_error(source_name, e))?;
            let line = table::line_of(&record);
            if record.len() != 3 {
                return Err(Error::parse(source_name, line, "expected 3 fields"));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(source_name, line, format!("bad number `{s}`")))
            };
            let (raw, scaled) = (num(&record[1])?, num(&record[2])?);
            if !(0.0..=1.0).contains(&scaled) {
                return Err(Error::parse(source_name, line, "f_scaled outside [0, 1]"));
            }
            if !out.components.insert(record[0].to_string()) {
                return Err(Error::parse(source_name, line, "duplicate component"));
            }
            out.raw.push(raw);
            out.scaled.push(scaled);
        }
        Ok(out)
    }
}

pub fn frequency_scores(completed: &CompletedMatrix) -> FrequencyScores {
    let nc = completed.components.len();
    let raw: Vec<f64> = (0..nc)
        .map(|c| completed.column(c).iter().sum::<f64>() / nc as f64)
        .collect();
    FrequencyScores {
        components: completed.components.clone(),
        scaled: min_max(&raw),
        raw,
    }
}

fn min_max(raw: &[f64]) -> Vec<f64> {
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return vec![0.5; raw.len()];
    }
    raw.iter()
        .map(|&v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
        .collect()
}
