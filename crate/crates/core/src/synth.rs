//! Seeded synthetic projects for end-to-end experiments.
//!
//! Every component gets two latent traits drawn uniformly from [0, 1): how
//! popular it is with users and how much it churns. Usage counts follow
//! popularity, change metrics follow churn, and historical bug labels follow
//! churn. Seeded faults are placed in the components with the highest
//! propensity
//!
//! ```text
//! propensity = ρ · popularity · churn + (1 − ρ) · noise
//! ```
//!
//! so at ρ = 0 placement is independent of both traits.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::change_risk::{ChangeMetrics, ChangeMetricsRecord, METRIC_COUNT};
use crate::evaluation::FaultMatrix;
use crate::prioritize::CoverageMatrix;
use crate::telemetry::{
    build_rating_matrix, map_interactions, ComponentMap, Interaction, RatingMatrix, Session,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub users: usize,
    pub components: usize,
    pub tests: usize,
    pub faults: usize,
    /// ρ in [0, 1].
    pub churn_usage_fault_correlation: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            users: 20,
            components: 50,
            tests: 40,
            faults: 10,
            churn_usage_fault_correlation: 0.8,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.components == 0 || self.tests == 0 || self.faults == 0 {
            return Err(Error::Invalid(
                "synthetic counts must all be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.churn_usage_fault_correlation) {
            return Err(Error::Invalid(
                "churn_usage_fault_correlation must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Latent traits behind a generated project, exposed for statistical checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Latents {
    pub popularity: Vec<f64>,
    pub churn: Vec<f64>,
    /// Component hosting each fault.
    pub fault_hosts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthProject {
    pub sessions: Vec<Session>,
    pub component_map: ComponentMap,
    pub ratings: RatingMatrix,
    pub change_metrics: Vec<ChangeMetricsRecord>,
    pub coverage: CoverageMatrix,
    pub faults: FaultMatrix,
    pub latents: Latents,
}

pub fn component_id(i: usize) -> String {
    format!("m{i:04}")
}

pub fn test_id(i: usize) -> String {
    format!("t{i:04}")
}

pub fn fault_id(i: usize) -> String {
    format!("f{i:03}")
}

fn user_id(i: usize) -> String {
    format!("u{i:03}")
}

fn interaction_for(component: usize) -> Interaction {
    Interaction::new(
        &format!("frm{}", component / 4),
        &format!("ctl{component}"),
        "Click",
    )
    .expect("generated parts are valid")
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthProject> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let nc = cfg.components;
    let popularity: Vec<f64> = (0..nc).map(|_| rng.gen()).collect();
    let churn: Vec<f64> = (0..nc).map(|_| rng.gen()).collect();

    let sessions = generate_sessions(cfg, &popularity, &mut rng);
    let mut component_map = ComponentMap::new();
    for c in 0..nc {
        component_map.insert(&interaction_for(c), &component_id(c))?;
    }
    let ratings = build_rating_matrix(&map_interactions(&sessions, &component_map).events);

    let change_metrics = (0..nc)
        .map(|c| {
            let metrics = generate_metrics(churn[c], &mut rng);
            let label = rng.gen::<f64>() < 0.05 + 0.9 * churn[c];
            ChangeMetricsRecord {
                component_id: component_id(c),
                metrics,
                label: Some(label),
            }
        })
        .collect();

    let component_ids: Vec<String> = (0..nc).map(component_id).collect();
    let test_ids: Vec<String> = (0..cfg.tests).map(test_id).collect();
    let comp_refs: Vec<&str> = component_ids.iter().map(String::as_str).collect();
    let test_refs: Vec<&str> = test_ids.iter().map(String::as_str).collect();
    let mut coverage = CoverageMatrix::new(&comp_refs, &test_refs)?;
    let all: Vec<usize> = (0..nc).collect();
    for t in 0..cfg.tests {
        let width = rng.gen_range(1..=5usize.min(nc));
        for &c in all.choose_multiple(&mut rng, width) {
            coverage.set(c, t, true);
        }
    }

    let rho = cfg.churn_usage_fault_correlation;
    let propensity: Vec<f64> = (0..nc)
        .map(|c| rho * popularity[c] * churn[c] + (1.0 - rho) * rng.gen::<f64>())
        .collect();
    let mut ranked: Vec<usize> = (0..nc).collect();
    ranked.sort_by(|&a, &b| propensity[b].total_cmp(&propensity[a]).then(a.cmp(&b)));
    let fault_hosts: Vec<usize> = (0..cfg.faults).map(|f| ranked[f % nc]).collect();

    let fault_ids: Vec<String> = (0..cfg.faults).map(fault_id).collect();
    let fault_refs: Vec<&str> = fault_ids.iter().map(String::as_str).collect();
    let mut faults = FaultMatrix::new(&test_refs, &fault_refs)?;
    for (f, &host) in fault_hosts.iter().enumerate() {
        for t in 0..cfg.tests {
            if coverage.covers(t, host) {
                faults.set(t, f, true);
            }
        }
    }

    Ok(SynthProject {
        sessions,
        component_map,
        ratings,
        change_metrics,
        coverage,
        faults,
        latents: Latents {
            popularity,
            churn,
            fault_hosts,
        },
    })
}

/// Each user touches a component with probability rising in its popularity,
/// with more accesses for popular components and active users. A user's
/// interactions are shuffled and split over one to three sessions.
fn generate_sessions(cfg: &SynthConfig, popularity: &[f64], rng: &mut ChaCha8Rng) -> Vec<Session> {
    let mut sessions = Vec::new();
    for u in 0..cfg.users {
        let activity = rng.gen_range(0.5..1.5);
        let mut touched: Vec<usize> = Vec::new();
        for (c, &pop) in popularity.iter().enumerate() {
            if rng.gen::<f64>() < 0.1 + 0.7 * pop {
                let count = 1 + (rng.gen::<f64>() * 10.0 * pop * activity) as usize;
                touched.extend(std::iter::repeat_n(c, count));
            }
        }
        if touched.is_empty() {
            touched.push(rng.gen_range(0..popularity.len()));
        }
        touched.shuffle(rng);
        let n_sessions = rng.gen_range(1..=3usize).min(touched.len());
        let per = touched.len().div_ceil(n_sessions);
        for (k, chunk) in touched.chunks(per).enumerate() {
            sessions.push(Session {
                session_id: format!("s{u:03}-{k}"),
                user_id: user_id(u),
                interactions: chunk.iter().map(|&c| interaction_for(c)).collect(),
            });
        }
    }
    sessions
}

/// Builds a per-change history whose size and line counts grow with churn,
/// then summarises it into the eleven metrics.
fn generate_metrics(churn: f64, rng: &mut ChaCha8Rng) -> ChangeMetrics {
    let modifications = 1 + (churn * 20.0 + rng.gen::<f64>() * 3.0) as usize;
    let (mut added, mut deleted) = (Vec::new(), Vec::new());
    for _ in 0..modifications {
        added.push(rng.gen_range(0..=(5 + (60.0 * churn) as u32)) as f64);
        deleted.push(rng.gen_range(0..=(3 + (40.0 * churn) as u32)) as f64);
    }
    let churns: Vec<f64> = added.iter().zip(&deleted).map(|(a, d)| a + d).collect();
    let summary = |v: &[f64]| {
        let sum: f64 = v.iter().sum();
        let max = v.iter().copied().fold(0.0, f64::max);
        (sum, max, sum / v.len() as f64)
    };
    let (a_sum, a_max, a_ave) = summary(&added);
    let (d_sum, d_max, d_ave) = summary(&deleted);
    let (c_sum, c_max, c_ave) = summary(&churns);
    let age = rng.gen_range(1..=200u32) as f64;
    let values: [f64; METRIC_COUNT] = [
        modifications as f64,
        a_sum,
        a_max,
        a_ave,
        d_sum,
        d_max,
        d_ave,
        c_sum,
        c_max,
        c_ave,
        age,
    ];
    ChangeMetrics(values)
}
