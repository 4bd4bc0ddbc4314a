//! Replicated simulation studies: configuration, execution and output files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixtures::{fixture, sachs_candidates};
use crate::metrics::{aggregate, AggregateRow, MeanSe, MetricsRow};
use crate::network::CategoricalNetwork;
use crate::oed::{
    run_sequential, ExperimentLog, InterventionValue, OedConfig, PosteriorMethod, SelectionPolicy,
};
use crate::graph::ENUMERATION_LIMIT;
use crate::posterior::McmcConfig;
pub use crate::seed::derive_seed;

pub const STUDY_VERSION: u32 = 1;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "CAUSAL_OED_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TruthSpec {
    Fixture(String),
    File { network_file: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosteriorChoice {
    Mcmc,
    Exact { v_limit: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub version: u32,
    pub name: String,
    pub truth: TruthSpec,
    pub policies: Vec<SelectionPolicy>,
    pub n_sim: usize,
    pub n_exp: usize,
    pub n_obs: usize,
    pub n_intv: usize,
    pub posterior: PosteriorChoice,
    pub mcmc: McmcConfig,
    /// All nodes when absent.
    pub candidates: Option<Vec<usize>>,
    /// Restrict candidates to the five Sachs intervention targets.
    pub sachs_candidates: bool,
    pub allow_repeat: bool,
    pub master_seed: u64,
    pub entropy_tolerance: Option<f64>,
    pub intervention_value: InterventionValue,
    pub output_dir: Option<PathBuf>,
    /// Directory relative network files resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            version: STUDY_VERSION,
            name: "study".into(),
            truth: TruthSpec::Fixture(String::new()),
            policies: vec![SelectionPolicy::Entropy(crate::oed::PartitionScheme::Mec)],
            n_sim: 50,
            n_exp: 7,
            n_obs: 1000,
            n_intv: 1000,
            posterior: PosteriorChoice::Mcmc,
            mcmc: McmcConfig::default(),
            candidates: None,
            sachs_candidates: false,
            allow_repeat: false,
            master_seed: 0,
            entropy_tolerance: None,
            intervention_value: InterventionValue::default(),
            output_dir: None,
            base_dir: None,
        }
    }
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            let message = e.to_string();
            if message.starts_with("unknown field") {
                Error::Validation(vec![message])
            } else {
                Error::Parse {
                    line: e.line(),
                    column: e.column(),
                    message,
                }
            }
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load_truth(&self) -> Result<CategoricalNetwork> {
        match &self.truth {
            TruthSpec::Fixture(name) => fixture(name),
            TruthSpec::File { network_file } => {
                let path = match &self.base_dir {
                    Some(dir) if network_file.is_relative() => dir.join(network_file),
                    _ => network_file.clone(),
                };
                CategoricalNetwork::load(path)
            }
        }
    }

    pub fn resolved_candidates(&self, num_nodes: usize) -> Vec<usize> {
        if self.sachs_candidates {
            return sachs_candidates();
        }
        let mut c = self
            .candidates
            .clone()
            .unwrap_or_else(|| (0..num_nodes).collect());
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn oed_config(&self, num_nodes: usize) -> OedConfig {
        OedConfig {
            candidates: self.resolved_candidates(num_nodes),
            allow_repeat: self.allow_repeat,
            entropy_tolerance: self.entropy_tolerance,
            max_experiments: self.n_exp,
            n_obs: self.n_obs,
            n_intv: self.n_intv,
            intervention_value: self.intervention_value.clone(),
        }
    }

    pub fn posterior_method(&self) -> PosteriorMethod {
        match self.posterior {
            PosteriorChoice::Mcmc => PosteriorMethod::Mcmc(self.mcmc.clone()),
            PosteriorChoice::Exact { v_limit } => PosteriorMethod::Exact { v_limit },
        }
    }

    /// Checks everything short of running; loads the truth to do so.
    pub fn validate(&self) -> Result<CategoricalNetwork> {
        let mut problems = Vec::new();
        if self.version != STUDY_VERSION {
            problems.push(format!("version {} unsupported, expected {STUDY_VERSION}", self.version));
        }
        if self.n_sim == 0 {
            problems.push("n_sim must be at least 1".into());
        }
        if self.n_exp == 0 {
            problems.push("n_exp must be at least 1".into());
        }
        if self.n_obs == 0 || self.n_intv == 0 {
            problems.push("n_obs and n_intv must be at least 1".into());
        }
        if self.policies.is_empty() {
            problems.push("policies must not be empty".into());
        }
        if matches!(&self.truth, TruthSpec::Fixture(name) if name.is_empty()) {
            problems.push("truth is required".into());
        }
        if let PosteriorChoice::Mcmc = self.posterior {
            if let Err(Error::Validation(p)) = self.mcmc.validate() {
                problems.extend(p);
            }
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }

        let truth = self.load_truth()?;
        let v = truth.num_nodes();
        if self.sachs_candidates && v != crate::fixtures::SACHS_NAMES.len() {
            problems.push("sachs_candidates requires the 11-node Sachs truth".into());
        }
        let candidates = self.resolved_candidates(v);
        if let Some(c) = candidates.iter().find(|&&c| c >= v) {
            problems.push(format!("candidate {c} out of range for {v} nodes"));
        }
        for p in &self.policies {
            if let SelectionPolicy::FixedSequence(seq) = p {
                if let Some(n) = seq.iter().find(|n| !candidates.contains(n)) {
                    problems.push(format!("fixed sequence node {n} is not a candidate"));
                }
                if !self.allow_repeat && has_duplicates(seq) {
                    problems.push("fixed sequence repeats a node while allow_repeat is off".into());
                }
            }
        }
        if let InterventionValue::Fixed(k) = self.intervention_value {
            if let Some(c) = candidates.iter().find(|&&c| c < v && k >= truth.arities()[c]) {
                problems.push(format!("intervention state {k} out of range for node {c}"));
            }
        }
        if let PosteriorChoice::Exact { v_limit } = self.posterior {
            if v > v_limit.min(ENUMERATION_LIMIT) {
                problems.push(format!("exact posterior limited to {v_limit} nodes, truth has {v}"));
            }
        }
        if problems.is_empty() {
            Ok(truth)
        } else {
            Err(Error::Validation(problems))
        }
    }
}

fn has_duplicates(seq: &[usize]) -> bool {
    let mut s = seq.to_vec();
    s.sort_unstable();
    s.windows(2).any(|w| w[0] == w[1])
}

/// Reads and validates a study file. Relative network paths resolve against
/// the file's directory.
pub fn load_study(path: impl AsRef<Path>) -> Result<StudyConfig> {
    let path = path.as_ref();
    let mut cfg = StudyConfig::from_json(&fs::read_to_string(path)?)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf);
    cfg.validate()?;
    Ok(cfg)
}

/// One finished `(policy, sim_index)` run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub policy: SelectionPolicy,
    pub sim_index: usize,
    pub log: ExperimentLog,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyResult {
    pub runs: Vec<RunResult>,
    /// Per policy, in config order.
    pub aggregates: Vec<(String, Vec<AggregateRow>)>,
}

fn thread_count(explicit: Option<usize>) -> Option<usize> {
    explicit
        .or_else(|| std::env::var(THREADS_ENV).ok()?.trim().parse().ok())
        .filter(|&n| n > 0)
}

/// Runs every `(policy, sim_index)` pair. Results do not depend on the
/// thread count; `threads` overrides the environment cap.
pub fn execute_study(cfg: &StudyConfig, threads: Option<usize>) -> Result<StudyResult> {
    let truth = cfg.validate()?;
    let oed = cfg.oed_config(truth.num_nodes());
    let method = cfg.posterior_method();
    let jobs: Vec<(usize, usize)> = (0..cfg.policies.len())
        .flat_map(|p| (0..cfg.n_sim).map(move |s| (p, s)))
        .collect();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(threads) {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let runs: Vec<RunResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, s)| {
                let policy = &cfg.policies[p];
                let seed = derive_seed(cfg.master_seed, s as u64, "sim");
                let log = run_sequential(&truth, policy, &oed, &method, seed)?;
                Ok(RunResult {
                    policy: policy.clone(),
                    sim_index: s,
                    log,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let aggregates = cfg
        .policies
        .iter()
        .map(|policy| {
            let rows: Vec<Vec<MetricsRow>> = runs
                .iter()
                .filter(|r| &r.policy == policy)
                .map(|r| r.log.metrics())
                .collect();
            (policy.name(), aggregate(rows.iter().map(Vec::as_slice)))
        })
        .collect();
    Ok(StudyResult { runs, aggregates })
}

pub const METRICS_HEADER: [&str; 9] = [
    "study",
    "policy",
    "scheme",
    "sim_index",
    "experiment",
    "chosen_node",
    "hamming",
    "tpr",
    "entropy_nats",
];

pub const AGGREGATE_HEADER: [&str; 12] = [
    "study",
    "policy",
    "experiment",
    "n_sim",
    "hamming_mean",
    "hamming_se",
    "tpr_mean",
    "tpr_se",
    "entropy_mean",
    "entropy_se",
    "degenerate",
    "tpr_n",
];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_metrics_csv<W: Write>(cfg: &StudyConfig, result: &StudyResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for run in &result.runs {
        for rec in &run.log.records {
            let m = &rec.metrics;
            w.write_record([
                cfg.name.clone(),
                run.policy.name(),
                run.policy.scheme_label().to_string(),
                run.sim_index.to_string(),
                rec.experiment.to_string(),
                rec.chosen_node.to_string(),
                m.hamming.to_string(),
                opt(m.tpr),
                m.posterior_entropy.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(cfg: &StudyConfig, result: &StudyResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER)?;
    for (policy, rows) in &result.aggregates {
        for a in rows {
            let tpr: Option<MeanSe> = a.tpr;
            w.write_record([
                cfg.name.clone(),
                policy.clone(),
                a.experiment.to_string(),
                a.n_sim.to_string(),
                a.hamming.mean.to_string(),
                a.hamming.se.to_string(),
                opt(tpr.map(|t| t.mean)),
                opt(tpr.map(|t| t.se)),
                a.entropy.mean.to_string(),
                a.entropy.se.to_string(),
                a.degenerate.to_string(),
                tpr.map_or(0, |t| t.n).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Status<'a> {
    status: &'a str,
    error: Option<String>,
}

fn write_status(out_dir: &Path, status: &str, error: Option<String>) -> Result<()> {
    let text = serde_json::to_string_pretty(&Status { status, error })?;
    fs::write(out_dir.join("status.json"), text + "\n")?;
    Ok(())
}

/// Runs the study and writes `config.json`, `metrics.csv`, `aggregate.csv`,
/// `logs/<policy>_sim<index>.json` and `status.json` under `out_dir`.
///
/// On failure `status.json` records the error and any other files present
/// are incomplete.
pub fn run_study(cfg: &StudyConfig, out_dir: &Path, threads: Option<usize>) -> Result<StudyResult> {
    fs::create_dir_all(out_dir)?;
    write_status(out_dir, "running", None)?;
    let outcome = execute_study(cfg, threads).and_then(|result| {
        write_outputs(cfg, &result, out_dir)?;
        Ok(result)
    });
    match &outcome {
        Ok(_) => write_status(out_dir, "complete", None)?,
        Err(e) => write_status(out_dir, "failed", Some(e.to_string()))?,
    }
    outcome
}

fn write_outputs(cfg: &StudyConfig, result: &StudyResult, out_dir: &Path) -> Result<()> {
    fs::write(out_dir.join("config.json"), cfg.to_json()? + "\n")?;
    write_metrics_csv(cfg, result, fs::File::create(out_dir.join("metrics.csv"))?)?;
    write_aggregate_csv(cfg, result, fs::File::create(out_dir.join("aggregate.csv"))?)?;
    let logs = out_dir.join("logs");
    fs::create_dir_all(&logs)?;
    for run in &result.runs {
        let file = format!("{}_sim{:03}.json", run.policy.name().replace(':', "_"), run.sim_index);
        fs::write(logs.join(file), serde_json::to_string_pretty(&run.log)? + "\n")?;
    }
    Ok(())
}
