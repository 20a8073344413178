//! The `riskrec` command-line driver.
//!
//! Each subcommand is one pipeline stage over file artifacts in an output
//! directory; `pipeline` runs them all in order. Settings come from flags and
//! from an optional TOML manifest (`--config riskrec.toml`), flags winning.
//! Relative paths in a manifest resolve against the manifest's directory.
//!
//! | stage        | reads                                   | writes                                   |
//! |--------------|-----------------------------------------|------------------------------------------|
//! | `ingest`     | sessions, component map                 | `ratings.csv`                            |
//! | `complete`   | `ratings.csv`                           | `completed.csv`, `frequency.csv`         |
//! | `risk`       | change metrics                          | `risk.csv`, `model.json`, `cv_report.json` |
//! | `score`      | `frequency.csv`, `risk.csv`             | `risk_table.csv`                         |
//! | `prioritize` | `risk_table.csv`, coverage              | `suite_<technique>.csv`                  |
//! | `evaluate`   | `suite_<technique>.csv`, faults         | `report.csv`, `report.json`              |
//! | `synth`      | nothing                                 | the five pipeline inputs                 |
//!
//! All randomness derives from one base seed: a stage named `s` uses
//! [`derive_seed`]`(seed, s)`. The stage names in use are `risk.cv` and
//! `prioritize.random`. `synth` uses the base seed unchanged.
//!
//! Exit codes: 0 on success, 1 on bad input or usage, 2 on an internal
//! invariant violation.

use std::ffi::OsString;
use std::fs;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use tracing::warn;

use crate::cf::{complete_matrix, frequency_scores, CfConfig, FrequencyScores, SimilarityKind};
use crate::change_risk::{
    cross_validate, fit_linear_model, read_change_metrics, write_change_metrics, CvConfig,
    RiskScores, DEFAULT_FOLDS, DEFAULT_REPEATS,
};
use crate::evaluation::{budget_sweep, FaultMatrix, DEFAULT_BUDGETS, DEFAULT_RANDOM_RUNS};
use crate::prioritize::{
    combine_scores, prioritize, unscored_components, ComponentRiskTable, CoverageMatrix,
    OrderingInputs, OrderingStrategy, PrioritizedSuite, Technique,
};
use crate::synth::{synth_generate, SynthConfig};
use crate::telemetry::{
    build_rating_matrix, map_interactions, read_session_log, write_session_log, ComponentMap,
    RatingMatrix,
};
use crate::{table, Error, Result};

pub const RATINGS_FILE: &str = "ratings.csv";
pub const COMPLETED_FILE: &str = "completed.csv";
pub const FREQUENCY_FILE: &str = "frequency.csv";
pub const RISK_FILE: &str = "risk.csv";
pub const MODEL_FILE: &str = "model.json";
pub const CV_REPORT_FILE: &str = "cv_report.json";
pub const RISK_TABLE_FILE: &str = "risk_table.csv";
pub const REPORT_CSV_FILE: &str = "report.csv";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const SESSIONS_FILE: &str = "sessions.log";
pub const COMPONENT_MAP_FILE: &str = "component_map.csv";
pub const CHANGE_METRICS_FILE: &str = "change_metrics.csv";
pub const COVERAGE_FILE: &str = "coverage.csv";
pub const FAULTS_FILE: &str = "faults.csv";

pub fn suite_file(technique: Technique) -> String {
    format!("suite_{}.csv", technique.as_str())
}

/// Seed for a named stage: FNV-1a of the name mixed into `base`, finished
/// with the SplitMix64 mixer.
pub fn derive_seed(base: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = base ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Manifest keys, all optional. Command-line flags are collected into the same
/// shape and laid over the manifest.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub sessions: Option<PathBuf>,
    pub component_map: Option<PathBuf>,
    pub change_metrics: Option<PathBuf>,
    pub coverage: Option<PathBuf>,
    pub faults: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
    pub frequency: Option<PathBuf>,
    pub risk: Option<PathBuf>,
    pub risk_table: Option<PathBuf>,
    pub n_neighbors: Option<usize>,
    pub budgets: Option<Vec<u32>>,
    pub seed: Option<u64>,
    pub random_runs: Option<usize>,
    pub folds: Option<usize>,
    pub repeats: Option<usize>,
    pub similarity: Option<String>,
    pub strategy: Option<String>,
    pub application: Option<String>,
}

macro_rules! overlay {
    ($top:expr, $base:expr, $($f:ident),*) => {
        Manifest { $($f: $top.$f.or($base.$f),)* }
    };
}

impl Manifest {
    pub fn read_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Manifest = toml::from_str(&text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start].matches('\n').count() as u64 + 1)
                .unwrap_or(0);
            Error::parse(&path.display().to_string(), line, e.message())
        })?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut m.sessions,
            &mut m.component_map,
            &mut m.change_metrics,
            &mut m.coverage,
            &mut m.faults,
            &mut m.out_dir,
            &mut m.ratings,
            &mut m.frequency,
            &mut m.risk,
            &mut m.risk_table,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(m)
    }

    /// Fields set in `self` win over `base`.
    pub fn over(self, base: Manifest) -> Manifest {
        overlay!(
            self,
            base,
            sessions,
            component_map,
            change_metrics,
            coverage,
            faults,
            out_dir,
            ratings,
            frequency,
            risk,
            risk_table,
            n_neighbors,
            budgets,
            seed,
            random_runs,
            folds,
            repeats,
            similarity,
            strategy,
            application
        )
    }
}

/// Fully resolved settings with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub sessions: Option<PathBuf>,
    pub component_map: Option<PathBuf>,
    pub change_metrics: Option<PathBuf>,
    pub coverage: Option<PathBuf>,
    pub faults: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub ratings: Option<PathBuf>,
    pub frequency: Option<PathBuf>,
    pub risk: Option<PathBuf>,
    pub risk_table: Option<PathBuf>,
    pub n_neighbors: usize,
    pub budgets: Vec<u32>,
    pub seed: u64,
    pub random_runs: usize,
    pub folds: usize,
    pub repeats: usize,
    pub similarity: SimilarityKind,
    pub strategy: OrderingStrategy,
    pub application: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sessions: None,
            component_map: None,
            change_metrics: None,
            coverage: None,
            faults: None,
            out_dir: PathBuf::from("out"),
            ratings: None,
            frequency: None,
            risk: None,
            risk_table: None,
            n_neighbors: crate::cf::DEFAULT_NEIGHBORS,
            budgets: DEFAULT_BUDGETS.to_vec(),
            seed: 0,
            random_runs: DEFAULT_RANDOM_RUNS,
            folds: DEFAULT_FOLDS,
            repeats: DEFAULT_REPEATS,
            similarity: SimilarityKind::default(),
            strategy: OrderingStrategy::default(),
            application: "app".to_string(),
        }
    }
}

impl PipelineConfig {
    pub fn from_manifest(m: Manifest) -> Result<Self> {
        let d = Self::default();
        let cfg = Self {
            sessions: m.sessions,
            component_map: m.component_map,
            change_metrics: m.change_metrics,
            coverage: m.coverage,
            faults: m.faults,
            out_dir: m.out_dir.unwrap_or(d.out_dir),
            ratings: m.ratings,
            frequency: m.frequency,
            risk: m.risk,
            risk_table: m.risk_table,
            n_neighbors: m.n_neighbors.unwrap_or(d.n_neighbors),
            budgets: m.budgets.unwrap_or(d.budgets),
            seed: m.seed.unwrap_or(d.seed),
            random_runs: m.random_runs.unwrap_or(d.random_runs),
            folds: m.folds.unwrap_or(d.folds),
            repeats: m.repeats.unwrap_or(d.repeats),
            similarity: m
                .similarity
                .as_deref()
                .map(str::parse)
                .transpose()?
                .unwrap_or(d.similarity),
            strategy: m
                .strategy
                .as_deref()
                .map(str::parse)
                .transpose()?
                .unwrap_or(d.strategy),
            application: m.application.unwrap_or(d.application),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_neighbors == 0 {
            return Err(Error::Invalid("n_neighbors must be at least 1".into()));
        }
        if self.budgets.is_empty() || self.budgets.iter().any(|&b| b == 0 || b > 100) {
            return Err(Error::Invalid(
                "budgets must be a non-empty list of percentages in 1..=100".into(),
            ));
        }
        if self.random_runs == 0 {
            return Err(Error::Invalid("random_runs must be at least 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::Invalid("folds must be at least 2".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Invalid("repeats must be at least 1".into()));
        }
        if self.application.is_empty() || self.application.contains([',', '\n']) {
            return Err(Error::Invalid(
                "application name must be non-empty without commas".into(),
            ));
        }
        Ok(())
    }

    fn out(&self, file: &str) -> PathBuf {
        self.out_dir.join(file)
    }

    fn input(&self, explicit: &Option<PathBuf>, produced: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.out(produced))
    }
}

fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| {
        Error::Invalid(format!(
            "missing --{} (or `{key}` in the manifest)",
            key.replace('_', "-")
        ))
    })
}

fn write_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let mut out = table::create(path)?;
    f(&mut out)?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    write_file(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))
    })
}

fn ensure_out_dir(cfg: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))
}

pub fn stage_ingest(cfg: &PipelineConfig) -> Result<String> {
    let sessions = read_session_log(required(&cfg.sessions, "sessions")?)?;
    let map = ComponentMap::read_file(required(&cfg.component_map, "component_map")?)?;
    let mapped = map_interactions(&sessions, &map);
    if mapped.unmapped > 0 {
        warn!(
            unmapped = mapped.unmapped,
            "interactions without a component mapping were dropped"
        );
    }
    let ratings = build_rating_matrix(&mapped.events);
    ensure_out_dir(cfg)?;
    write_file(&cfg.out(RATINGS_FILE), |o| ratings.write_csv(o, cfg.seed))?;
    Ok(format!(
        "ingest: {} sessions, {} events ({} unmapped) -> {} users x {} components",
        sessions.len(),
        mapped.events.len(),
        mapped.unmapped,
        ratings.n_users(),
        ratings.n_components()
    ))
}

pub fn stage_complete(cfg: &PipelineConfig) -> Result<String> {
    let ratings = RatingMatrix::read_file(&cfg.input(&cfg.ratings, RATINGS_FILE))?;
    let cf = CfConfig {
        neighbors: cfg.n_neighbors,
        similarity: cfg.similarity,
    };
    let completed = complete_matrix(&ratings, &cf)?;
    let freq = frequency_scores(&completed);
    ensure_out_dir(cfg)?;
    write_file(&cfg.out(COMPLETED_FILE), |o| {
        completed.write_csv(o, cfg.seed)
    })?;
    write_file(&cfg.out(FREQUENCY_FILE), |o| freq.write_csv(o, cfg.seed))?;
    let cells = ratings.n_users() * ratings.n_components();
    Ok(format!(
        "complete: predicted {} of {} cells with {} neighbors ({})",
        cells - ratings.observed_count(),
        cells,
        cfg.n_neighbors,
        cfg.similarity.as_str()
    ))
}

pub fn stage_risk(cfg: &PipelineConfig) -> Result<String> {
    let records = read_change_metrics(required(&cfg.change_metrics, "change_metrics")?)?;
    let labeled: Vec<_> = records
        .iter()
        .filter(|r| r.label.is_some())
        .cloned()
        .collect();
    let labels: Vec<bool> = labeled.iter().map(|r| r.label.unwrap_or(false)).collect();
    if labeled.len() < cfg.folds {
        return Err(Error::Invalid(format!(
            "{} labelled change-metric rows cannot fill {} cross-validation folds",
            labeled.len(),
            cfg.folds
        )));
    }
    let model = fit_linear_model(&labeled, &labels)?;
    let scores = RiskScores::from_model(&model, &records);
    let cv_seed = derive_seed(cfg.seed, "risk.cv");
    let report = cross_validate(
        &labeled,
        &labels,
        &CvConfig {
            folds: cfg.folds,
            repeats: cfg.repeats,
            seed: cv_seed,
        },
    )?;
    ensure_out_dir(cfg)?;
    write_file(&cfg.out(RISK_FILE), |o| scores.write_csv(o, cfg.seed))?;
    let mut model_json = model.to_json();
    model_json["seed"] = serde_json::json!(cfg.seed);
    write_json(&cfg.out(MODEL_FILE), &model_json)?;
    let mut cv_json = report.to_json();
    cv_json["base_seed"] = serde_json::json!(cfg.seed);
    write_json(&cfg.out(CV_REPORT_FILE), &cv_json)?;
    Ok(format!(
        "risk: fitted on {} labelled rows, scored {} components; {}x{}-fold CV PC={:.2}% TP={} FP={}",
        labeled.len(),
        scores.components.len(),
        report.repeats,
        report.folds,
        report.pc,
        report.tp,
        report.fp
    ))
}

pub fn stage_score(cfg: &PipelineConfig) -> Result<String> {
    let freq_path = cfg.input(&cfg.frequency, FREQUENCY_FILE);
    let freq =
        FrequencyScores::read_csv(table::open(&freq_path)?, &freq_path.display().to_string())?;
    let risk_path = cfg.input(&cfg.risk, RISK_FILE);
    let risk = RiskScores::read_csv(table::open(&risk_path)?, &risk_path.display().to_string())?;
    let combined = combine_scores(&freq, &risk);
    if !combined.missing_frequency.is_empty() {
        warn!(components = ?combined.missing_frequency, "no usage data; frequency set to 0");
    }
    if !combined.missing_risk.is_empty() {
        warn!(components = ?combined.missing_risk, "no change history; risk set to 0");
    }
    ensure_out_dir(cfg)?;
    write_file(&cfg.out(RISK_TABLE_FILE), |o| {
        combined.table.write_csv(o, cfg.seed)
    })?;
    Ok(format!(
        "score: {} components ({} without usage, {} without history)",
        combined.table.len(),
        combined.missing_frequency.len(),
        combined.missing_risk.len()
    ))
}

pub fn stage_prioritize(cfg: &PipelineConfig) -> Result<String> {
    let table = ComponentRiskTable::read_file(&cfg.input(&cfg.risk_table, RISK_TABLE_FILE))?;
    let coverage = CoverageMatrix::read_file(required(&cfg.coverage, "coverage")?)?;
    let unscored = unscored_components(&table, &coverage);
    if !unscored.is_empty() {
        warn!(components = ?unscored, "covered components without a score count as 0");
    }
    let inputs = OrderingInputs {
        table: &table,
        coverage: &coverage,
        strategy: cfg.strategy,
        seed: derive_seed(cfg.seed, "prioritize.random"),
    };
    ensure_out_dir(cfg)?;
    let mut hcf_head = Vec::new();
    for technique in Technique::ALL {
        let suite = prioritize(technique, &inputs)?;
        if suite.order.len() != coverage.tests().len() {
            return Err(Error::Invariant(format!("{technique} ordering lost tests")));
        }
        if technique == Technique::Hcf {
            hcf_head = suite.order.iter().take(5).cloned().collect();
        }
        write_file(&cfg.out(&suite_file(technique)), |o| {
            suite.write_csv(o, cfg.seed)
        })?;
    }
    Ok(format!(
        "prioritize: {} tests x {} techniques; hcf starts {}",
        coverage.tests().len(),
        Technique::ALL.len(),
        hcf_head.join(",")
    ))
}

pub fn stage_evaluate(cfg: &PipelineConfig) -> Result<String> {
    let fm = FaultMatrix::read_file(required(&cfg.faults, "faults")?)?;
    let mut suites: Vec<PrioritizedSuite> = Vec::new();
    for technique in Technique::ALL {
        let path = cfg.out(&suite_file(technique));
        if path.exists() {
            suites.push(PrioritizedSuite::read_file(&path)?);
        }
    }
    if suites.is_empty() {
        return Err(Error::Invalid(format!(
            "no suite_<technique>.csv files in {}",
            cfg.out_dir.display()
        )));
    }
    let report = budget_sweep(
        &cfg.application,
        &suites,
        &fm,
        &cfg.budgets,
        cfg.random_runs,
    )?;
    write_file(&cfg.out(REPORT_CSV_FILE), |o| report.write_csv(o, cfg.seed))?;
    write_json(&cfg.out(REPORT_JSON_FILE), &report.to_json(cfg.seed))?;
    let first = cfg.budgets[0];
    let hcf = report
        .value(Technique::Hcf, first)
        .map(|v| format!("; hcf NAPFD@{first}%={v:.4}"))
        .unwrap_or_default();
    Ok(format!(
        "evaluate: {} suites x {} budgets over {} faults{hcf}",
        suites.len(),
        cfg.budgets.len(),
        fm.faults().len()
    ))
}

pub fn stage_synth(out_dir: &Path, synth: &SynthConfig) -> Result<String> {
    let p = synth_generate(synth)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let seed = synth.seed;
    write_file(&out_dir.join(SESSIONS_FILE), |o| {
        write_session_log(o, seed, &p.sessions)
    })?;
    write_file(&out_dir.join(COMPONENT_MAP_FILE), |o| {
        p.component_map.write_csv(o, seed)
    })?;
    write_file(&out_dir.join(CHANGE_METRICS_FILE), |o| {
        write_change_metrics(o, seed, &p.change_metrics)
    })?;
    write_file(&out_dir.join(COVERAGE_FILE), |o| {
        p.coverage.write_csv(o, seed)
    })?;
    write_file(&out_dir.join(FAULTS_FILE), |o| p.faults.write_csv(o, seed))?;
    Ok(format!(
        "synth: {} users, {} components, {} tests, {} faults (correlation {}) -> {}",
        synth.users,
        synth.components,
        synth.tests,
        synth.faults,
        synth.churn_usage_fault_correlation,
        out_dir.display()
    ))
}

/// Checks every pipeline input exists, then runs the stages in order.
/// Returns the per-stage summary lines.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Vec<String>> {
    for (path, key) in [
        (&cfg.sessions, "sessions"),
        (&cfg.component_map, "component_map"),
        (&cfg.change_metrics, "change_metrics"),
        (&cfg.coverage, "coverage"),
        (&cfg.faults, "faults"),
    ] {
        let p = required(path, key)?;
        if !p.is_file() {
            return Err(Error::io(
                p,
                std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
            ));
        }
    }
    let staged = PipelineConfig {
        ratings: None,
        frequency: None,
        risk: None,
        risk_table: None,
        ..cfg.clone()
    };
    let stages: [fn(&PipelineConfig) -> Result<String>; 6] = [
        stage_ingest,
        stage_complete,
        stage_risk,
        stage_score,
        stage_prioritize,
        stage_evaluate,
    ];
    stages.iter().map(|stage| stage(&staged)).collect()
}

#[derive(Debug, Parser)]
#[command(
    name = "riskrec",
    version,
    about = "Usage- and change-risk-driven regression test prioritization"
)]
struct Cli {
    /// TOML manifest with default settings.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the usage rating matrix from session logs.
    Ingest {
        /// Session log (session_id,user_id,interaction_key per line)
        #[arg(long)]
        sessions: Option<PathBuf>,
        /// CSV mapping interaction keys to component ids
        #[arg(long)]
        component_map: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Complete the rating matrix and derive frequency scores.
    Complete {
        /// Defaults to ratings.csv in the output directory.
        #[arg(long)]
        ratings: Option<PathBuf>,
        /// Neighbours used per prediction (default 2)
        #[arg(long)]
        n_neighbors: Option<usize>,
        /// adjusted-cosine or co-rated.
        #[arg(long)]
        similarity: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Fit the change-risk model, score components and cross-validate.
    Risk {
        /// Per-component change metrics CSV
        #[arg(long)]
        change_metrics: Option<PathBuf>,
        /// Cross-validation folds (default 10)
        #[arg(long)]
        folds: Option<usize>,
        /// Cross-validation repeats (default 100)
        #[arg(long)]
        repeats: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Combine frequency and change risk into r = f * i.
    Score {
        /// Defaults to frequency.csv in the output directory
        #[arg(long)]
        frequency: Option<PathBuf>,
        /// Defaults to risk.csv in the output directory
        #[arg(long)]
        risk: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Order the test suite with every technique.
    Prioritize {
        /// Defaults to risk_table.csv in the output directory
        #[arg(long)]
        risk_table: Option<PathBuf>,
        /// Component-by-test coverage CSV
        #[arg(long)]
        coverage: Option<PathBuf>,
        /// deferred-total, total or additional.
        #[arg(long)]
        strategy: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Score the suites with NAPFD over execution budgets.
    Evaluate {
        /// Test-by-fault detection CSV
        #[arg(long)]
        faults: Option<PathBuf>,
        /// Comma-separated percentages.
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<u32>>,
        /// Shuffles averaged for the random baseline (default 10)
        #[arg(long)]
        random_runs: Option<usize>,
        /// Label written in the report (default `app`)
        #[arg(long)]
        application: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a seeded synthetic project.
    Synth {
        /// Number of users
        #[arg(long, default_value_t = SynthConfig::default().users)]
        users: usize,
        /// Number of components
        #[arg(long, default_value_t = SynthConfig::default().components)]
        components: usize,
        /// Number of tests
        #[arg(long, default_value_t = SynthConfig::default().tests)]
        tests: usize,
        /// Number of seeded faults
        #[arg(long, default_value_t = SynthConfig::default().faults)]
        faults: usize,
        /// How strongly usage and churn predict fault placement, in [0, 1]
        #[arg(long, default_value_t = SynthConfig::default().churn_usage_fault_correlation)]
        correlation: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Run every stage from session logs to the budget report.
    Pipeline {
        /// Session log (session_id,user_id,interaction_key per line)
        #[arg(long)]
        sessions: Option<PathBuf>,
        /// CSV mapping interaction keys to component ids
        #[arg(long)]
        component_map: Option<PathBuf>,
        /// Per-component change metrics CSV
        #[arg(long)]
        change_metrics: Option<PathBuf>,
        /// Component-by-test coverage CSV
        #[arg(long)]
        coverage: Option<PathBuf>,
        /// Test-by-fault detection CSV
        #[arg(long)]
        faults: Option<PathBuf>,
        /// Neighbours used per prediction (default 2)
        #[arg(long)]
        n_neighbors: Option<usize>,
        /// adjusted-cosine or co-rated
        #[arg(long)]
        similarity: Option<String>,
        /// Cross-validation folds (default 10)
        #[arg(long)]
        folds: Option<usize>,
        /// Cross-validation repeats (default 100)
        #[arg(long)]
        repeats: Option<usize>,
        /// deferred-total, total or additional
        #[arg(long)]
        strategy: Option<String>,
        /// Comma-separated percentages
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<u32>>,
        /// Shuffles averaged for the random baseline (default 10)
        #[arg(long)]
        random_runs: Option<usize>,
        /// Label written in the report (default `app`)
        #[arg(long)]
        application: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Output directory (default `out`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Base seed for every random choice (default 0).
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn manifest(self) -> Manifest {
        Manifest {
            out_dir: self.out_dir,
            seed: self.seed,
            ..Manifest::default()
        }
    }
}

fn flags_of(command: Command) -> (Manifest, Option<SynthConfig>) {
    match command {
        Command::Ingest {
            sessions,
            component_map,
            common,
        } => (
            Manifest {
                sessions,
                component_map,
                ..common.manifest()
            },
            None,
        ),
        Command::Complete {
            ratings,
            n_neighbors,
            similarity,
            common,
        } => (
            Manifest {
                ratings,
                n_neighbors,
                similarity,
                ..common.manifest()
            },
            None,
        ),
        Command::Risk {
            change_metrics,
            folds,
            repeats,
            common,
        } => (
            Manifest {
                change_metrics,
                folds,
                repeats,
                ..common.manifest()
            },
            None,
        ),
        Command::Score {
            frequency,
            risk,
            common,
        } => (
            Manifest {
                frequency,
                risk,
                ..common.manifest()
            },
            None,
        ),
        Command::Prioritize {
            risk_table,
            coverage,
            strategy,
            common,
        } => (
            Manifest {
                risk_table,
                coverage,
                strategy,
                ..common.manifest()
            },
            None,
        ),
        Command::Evaluate {
            faults,
            budgets,
            random_runs,
            application,
            common,
        } => (
            Manifest {
                faults,
                budgets,
                random_runs,
                application,
                ..common.manifest()
            },
            None,
        ),
        Command::Synth {
            users,
            components,
            tests,
            faults,
            correlation,
            common,
        } => {
            let synth = SynthConfig {
                users,
                components,
                tests,
                faults,
                churn_usage_fault_correlation: correlation,
                seed: 0,
            };
            (common.manifest(), Some(synth))
        }
        Command::Pipeline {
            sessions,
            component_map,
            change_metrics,
            coverage,
            faults,
            n_neighbors,
            similarity,
            folds,
            repeats,
            strategy,
            budgets,
            random_runs,
            application,
            common,
        } => (
            Manifest {
                sessions,
                component_map,
                change_metrics,
                coverage,
                faults,
                n_neighbors,
                similarity,
                folds,
                repeats,
                strategy,
                budgets,
                random_runs,
                application,
                ..common.manifest()
            },
            None,
        ),
    }
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => tracing::Level::ERROR,
        (false, 0) => tracing::Level::WARN,
        (false, 1) => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(level)
        .with_target(false)
        .with_ansi(std::io::stderr().is_terminal())
        .try_init();
}

fn execute(cli: Cli) -> Result<Vec<String>> {
    let is_pipeline = matches!(cli.command, Command::Pipeline { .. });
    let stage = match &cli.command {
        Command::Ingest { .. } => stage_ingest,
        Command::Complete { .. } => stage_complete,
        Command::Risk { .. } => stage_risk,
        Command::Score { .. } => stage_score,
        Command::Prioritize { .. } => stage_prioritize,
        Command::Evaluate { .. } => stage_evaluate,
        Command::Synth { .. } | Command::Pipeline { .. } => stage_ingest,
    };
    let (flags, synth) = flags_of(cli.command);
    let manifest = match &cli.config {
        Some(path) => flags.over(Manifest::read_file(path)?),
        None => flags,
    };
    let cfg = PipelineConfig::from_manifest(manifest)?;
    if let Some(synth) = synth {
        let synth = SynthConfig {
            seed: cfg.seed,
            ..synth
        };
        return Ok(vec![stage_synth(&cfg.out_dir, &synth)?]);
    }
    if is_pipeline {
        run_pipeline(&cfg)
    } else {
        Ok(vec![stage(&cfg)?])
    }
}

/// Runs the tool on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_logging(cli.verbose, cli.quiet);
    match execute(cli) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                1
            } else {
                2
            }
        }
    }
}
