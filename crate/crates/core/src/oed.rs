//! Experiment selection: partition schemes, the entropy and pairwise-child
//! criteria, baseline policies and the sequential design loop.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dag, MecKey, NodeId, NodeSet};
use crate::metrics::{plugin_entropy, MetricsRow};
use crate::network::{CategoricalNetwork, InterventionMode, InterventionSpec, InterventionalDataset};
use crate::posterior::{
    edge_probabilities, exact_posterior_cached, mcmc_sample_cached, GraphPrior, McmcConfig,
    PosteriorSamples,
};
use crate::score::{BDeuConfig, FamilyScoreCache};
use crate::seed::derive_seed;

/// What an intervention on `e` can reveal about a graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PartitionScheme {
    #[serde(rename = "mec")]
    Mec,
    #[serde(rename = "cs")]
    ChildSet,
    #[serde(rename = "ds")]
    DescendantSet,
    #[serde(rename = "ps")]
    ParentSet,
}

impl PartitionScheme {
    pub const ALL: [PartitionScheme; 4] = [
        PartitionScheme::Mec,
        PartitionScheme::ChildSet,
        PartitionScheme::DescendantSet,
        PartitionScheme::ParentSet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PartitionScheme::Mec => "mec",
            PartitionScheme::ChildSet => "cs",
            PartitionScheme::DescendantSet => "ds",
            PartitionScheme::ParentSet => "ps",
        }
    }
}

impl FromStr for PartitionScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PartitionScheme::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown partition scheme {s:?}")))
    }
}

impl fmt::Display for PartitionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Canonical value of a partition function.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PartitionKey {
    Mec(MecKey),
    Mask(NodeSet),
}

pub fn partition_value(scheme: PartitionScheme, g: &Dag, e: NodeId) -> PartitionKey {
    match scheme {
        PartitionScheme::Mec => PartitionKey::Mec(g.surgery(e).mec_key()),
        PartitionScheme::ChildSet => PartitionKey::Mask(g.children(e)),
        PartitionScheme::DescendantSet => PartitionKey::Mask(g.descendants(e)),
        PartitionScheme::ParentSet => PartitionKey::Mask(g.parents(e)),
    }
}

/// Plug-in entropy, in nats, of the partition the samples induce under `e`.
pub fn criterion_entropy(samples: &PosteriorSamples, scheme: PartitionScheme, e: NodeId) -> f64 {
    let mut mass: BTreeMap<PartitionKey, f64> = BTreeMap::new();
    for (g, w) in samples.graphs().iter().zip(samples.weights()) {
        *mass.entry(partition_value(scheme, g, e)).or_default() += w;
    }
    if mass.len() <= 1 {
        return 0.0;
    }
    let total = samples.total_weight();
    plugin_entropy(mass.into_values().map(|w| w / total))
}

fn binary_entropy(p: f64) -> f64 {
    plugin_entropy([p, 1.0 - p])
}

/// Sum over `v != e` of the binary entropy of `p(e -> v)`.
pub fn pwc_score(samples: &PosteriorSamples, e: NodeId) -> f64 {
    pwc_from_edges(&edge_probabilities(samples), e)
}

fn pwc_from_edges(probs: &[Vec<f64>], e: NodeId) -> f64 {
    probs[e]
        .iter()
        .enumerate()
        .filter(|&(v, _)| v != e)
        .map(|(_, &p)| binary_entropy(p))
        .sum()
}

/// Serialized as a scheme name, `"pwc"`, `"random"` or `{"fixed": [..]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PolicyRepr", into = "PolicyRepr")]
pub enum SelectionPolicy {
    Entropy(PartitionScheme),
    PairwiseChild,
    Random,
    FixedSequence(Vec<NodeId>),
}

impl SelectionPolicy {
    pub fn name(&self) -> String {
        match self {
            SelectionPolicy::Entropy(s) => s.name().to_string(),
            SelectionPolicy::PairwiseChild => "pwc".into(),
            SelectionPolicy::Random => "random".into(),
            SelectionPolicy::FixedSequence(seq) => {
                let parts: Vec<String> = seq.iter().map(|n| n.to_string()).collect();
                format!("fixed:{}", parts.join("-"))
            }
        }
    }

    /// Scheme column for logs; empty for policies without one.
    pub fn scheme_label(&self) -> &'static str {
        match self {
            SelectionPolicy::Entropy(s) => s.name(),
            SelectionPolicy::PairwiseChild => "pwc",
            SelectionPolicy::Random | SelectionPolicy::FixedSequence(_) => "",
        }
    }

    fn is_scored(&self) -> bool {
        matches!(self, SelectionPolicy::Entropy(_) | SelectionPolicy::PairwiseChild)
    }
}

impl FromStr for SelectionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pwc" => Ok(SelectionPolicy::PairwiseChild),
            "random" => Ok(SelectionPolicy::Random),
            other => other
                .parse()
                .map(SelectionPolicy::Entropy)
                .map_err(|_| Error::InvalidArgument(format!("unknown policy {other:?}"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum PolicyRepr {
    Name(String),
    Fixed { fixed: Vec<NodeId> },
}

impl TryFrom<PolicyRepr> for SelectionPolicy {
    type Error = Error;

    fn try_from(r: PolicyRepr) -> Result<Self> {
        match r {
            PolicyRepr::Name(s) => s.parse(),
            PolicyRepr::Fixed { fixed } => Ok(SelectionPolicy::FixedSequence(fixed)),
        }
    }
}

impl From<SelectionPolicy> for PolicyRepr {
    fn from(p: SelectionPolicy) -> Self {
        match p {
            SelectionPolicy::FixedSequence(fixed) => PolicyRepr::Fixed { fixed },
            other => PolicyRepr::Name(other.name()),
        }
    }
}

/// How an intervened node's value is assigned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionValue {
    /// Clamp to one state.
    Fixed(usize),
    /// Uniform over the node's states.
    Uniform,
    /// The network's own intervention distribution for the node.
    Network,
}

impl Default for InterventionValue {
    fn default() -> Self {
        InterventionValue::Fixed(0)
    }
}

impl InterventionValue {
    pub fn spec(&self, net: &CategoricalNetwork, e: NodeId) -> InterventionSpec {
        let mode = match self {
            InterventionValue::Fixed(k) => InterventionMode::Fixed(*k),
            InterventionValue::Uniform => {
                let r = net.arities()[e];
                InterventionMode::Distribution(vec![1.0 / r as f64; r])
            }
            InterventionValue::Network => {
                InterventionMode::Distribution(net.intervention_dist(e).to_vec())
            }
        };
        InterventionSpec::single(e, mode)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OedConfig {
    /// Sorted, distinct candidate nodes.
    pub candidates: Vec<NodeId>,
    pub allow_repeat: bool,
    /// Stop once the posterior entropy estimate drops below this many nats.
    pub entropy_tolerance: Option<f64>,
    pub max_experiments: usize,
    pub n_obs: usize,
    pub n_intv: usize,
    pub intervention_value: InterventionValue,
}

impl OedConfig {
    /// Every node a candidate, 7 experiments of 1000 rows each.
    pub fn new(num_nodes: usize) -> Self {
        OedConfig {
            candidates: (0..num_nodes).collect(),
            allow_repeat: false,
            entropy_tolerance: None,
            max_experiments: 7,
            n_obs: 1000,
            n_intv: 1000,
            intervention_value: InterventionValue::default(),
        }
    }

    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        let mut problems = Vec::new();
        if self.max_experiments == 0 {
            problems.push("max_experiments must be at least 1".to_string());
        }
        if self.n_obs == 0 || self.n_intv == 0 {
            problems.push("n_obs and n_intv must be at least 1".to_string());
        }
        if self.candidates.windows(2).any(|w| w[0] >= w[1]) {
            problems.push("candidates must be sorted and distinct".to_string());
        }
        if let Some(&c) = self.candidates.iter().find(|&&c| c >= num_nodes) {
            problems.push(format!("candidate {c} out of range for {num_nodes} nodes"));
        }
        if matches!(self.entropy_tolerance, Some(t) if t.is_nan()) {
            problems.push("entropy_tolerance must be a number".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    fn eligible(&self, history: &[NodeId]) -> Vec<NodeId> {
        self.candidates
            .iter()
            .copied()
            .filter(|c| self.allow_repeat || !history.contains(c))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub node: NodeId,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub node: NodeId,
    /// Empty for unscored policies.
    pub scores: Vec<CandidateScore>,
    /// Every eligible score was zero, so the smallest index was taken.
    pub collapsed: bool,
}

/// Criterion values for `nodes`, in the given order.
pub fn score_candidates(
    samples: &PosteriorSamples,
    policy: &SelectionPolicy,
    nodes: &[NodeId],
) -> Result<Vec<CandidateScore>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no posterior samples to score".into()));
    }
    match policy {
        SelectionPolicy::Entropy(scheme) => Ok(nodes
            .iter()
            .map(|&node| CandidateScore {
                node,
                score: criterion_entropy(samples, *scheme, node),
            })
            .collect()),
        SelectionPolicy::PairwiseChild => {
            let probs = edge_probabilities(samples);
            Ok(nodes
                .iter()
                .map(|&node| CandidateScore {
                    node,
                    score: pwc_from_edges(&probs, node),
                })
                .collect())
        }
        _ => Err(Error::InvalidArgument(format!(
            "policy {} has no criterion",
            policy.name()
        ))),
    }
}

/// First maximum wins, so ties go to the smallest node when `scores` is sorted.
fn argmax(scores: &[CandidateScore]) -> CandidateScore {
    let mut best = scores[0];
    for s in &scores[1..] {
        if s.score > best.score {
            best = *s;
        }
    }
    best
}

pub fn select_next<R: Rng + ?Sized>(
    samples: &PosteriorSamples,
    policy: &SelectionPolicy,
    cfg: &OedConfig,
    history: &[NodeId],
    rng: &mut R,
) -> Result<Selection> {
    let eligible = cfg.eligible(history);
    let pick = |node| Selection {
        node,
        scores: Vec::new(),
        collapsed: false,
    };
    match policy {
        SelectionPolicy::FixedSequence(seq) => {
            let next = if cfg.allow_repeat {
                seq.get(history.len()).copied()
            } else {
                seq.iter().copied().find(|n| !history.contains(n))
            };
            match next {
                Some(n) if cfg.candidates.contains(&n) => Ok(pick(n)),
                Some(n) => Err(Error::InvalidArgument(format!(
                    "fixed sequence node {n} is not a candidate"
                ))),
                None => Err(Error::Exhausted),
            }
        }
        _ if eligible.is_empty() => Err(Error::Exhausted),
        SelectionPolicy::Random => Ok(pick(eligible[rng.random_range(0..eligible.len())])),
        _ => {
            let scores = score_candidates(samples, policy, &eligible)?;
            let best = argmax(&scores);
            Ok(Selection {
                node: best.node,
                collapsed: scores.iter().all(|s| s.score == 0.0),
                scores,
            })
        }
    }
}

/// How the posterior is obtained each round. Both use a uniform graph prior.
#[derive(Clone, Debug, PartialEq)]
pub enum PosteriorMethod {
    /// The configured seed is replaced per experiment.
    Mcmc(McmcConfig),
    Exact { v_limit: usize },
}

impl PosteriorMethod {
    pub fn sample(&self, data: &InterventionalDataset, seed: u64) -> Result<PosteriorSamples> {
        let mut cache = FamilyScoreCache::new(data, BDeuConfig::default());
        match self {
            PosteriorMethod::Mcmc(cfg) => {
                let cfg = McmcConfig {
                    seed,
                    ..cfg.clone()
                };
                mcmc_sample_cached(&mut cache, &GraphPrior::Uniform, &cfg)
            }
            PosteriorMethod::Exact { v_limit } => {
                exact_posterior_cached(&mut cache, &GraphPrior::Uniform, *v_limit)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EntropyTolerance,
    MaxExperiments,
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    /// 1 is the observational round.
    pub experiment: usize,
    /// `-1` for the observational round.
    pub chosen_node: i64,
    /// Scores behind this round's choice.
    pub scores: Vec<CandidateScore>,
    pub collapsed: bool,
    pub dataset_size: usize,
    pub data_seed: u64,
    pub posterior_seed: u64,
    pub metrics: MetricsRow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentLog {
    pub policy: String,
    pub seed: u64,
    pub records: Vec<ExperimentRecord>,
    pub stop_reason: StopReason,
}

impl ExperimentLog {
    pub fn metrics(&self) -> Vec<MetricsRow> {
        self.records.iter().map(|r| r.metrics.clone()).collect()
    }

    /// Intervened nodes in order.
    pub fn interventions(&self) -> Vec<NodeId> {
        self.records
            .iter()
            .filter(|r| r.chosen_node >= 0)
            .map(|r| r.chosen_node as NodeId)
            .collect()
    }
}

/// One adaptive design run against a known truth.
///
/// Data, posterior and policy randomness come from separate streams derived
/// from `seed`, so runs that share a seed share their observational data.
pub fn run_sequential(
    truth: &CategoricalNetwork,
    policy: &SelectionPolicy,
    cfg: &OedConfig,
    method: &PosteriorMethod,
    seed: u64,
) -> Result<ExperimentLog> {
    cfg.validate(truth.num_nodes())?;
    if let SelectionPolicy::FixedSequence(seq) = policy {
        if let Some(&n) = seq.iter().find(|n| !cfg.candidates.contains(n)) {
            return Err(Error::InvalidArgument(format!(
                "fixed sequence node {n} is not a candidate"
            )));
        }
    }
    if let InterventionValue::Fixed(k) = cfg.intervention_value {
        if let Some(&c) = cfg.candidates.iter().find(|&&c| k >= truth.arities()[c]) {
            return Err(Error::InvalidArgument(format!(
                "fixed intervention state {k} out of range for node {c}"
            )));
        }
    }

    let mut policy_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, "policy"));
    let mut data = InterventionalDataset::new(truth.arities().to_vec());
    let mut spec = InterventionSpec::observational();
    let mut size = cfg.n_obs;
    let mut selection: Option<Selection> = None;
    let mut history: Vec<NodeId> = Vec::new();
    let mut records = Vec::new();

    let mut experiment = 0;
    let stop_reason = 'rounds: loop {
        experiment += 1;
        let index = experiment as u64;
        let data_seed = derive_seed(seed, index, "data");
        let posterior_seed = derive_seed(seed, index, "mcmc");
        let mut rng = ChaCha8Rng::seed_from_u64(data_seed);
        truth.sample_into(&mut data, &spec, size, &mut rng)?;

        let samples = method.sample(&data, posterior_seed)?;
        let metrics = MetricsRow::evaluate(experiment, &samples, truth.dag())?;
        let entropy = metrics.posterior_entropy;
        let (chosen_node, scores, collapsed) = match selection.take() {
            Some(s) => (s.node as i64, s.scores, s.collapsed),
            None => (-1, Vec::new(), false),
        };
        records.push(ExperimentRecord {
            experiment,
            chosen_node,
            scores,
            collapsed,
            dataset_size: data.len(),
            data_seed,
            posterior_seed,
            metrics,
        });

        if matches!(cfg.entropy_tolerance, Some(tol) if entropy < tol) {
            break 'rounds StopReason::EntropyTolerance;
        }
        if experiment >= cfg.max_experiments {
            break 'rounds StopReason::MaxExperiments;
        }
        let next = match select_next(&samples, policy, cfg, &history, &mut policy_rng) {
            Ok(s) => s,
            Err(Error::Exhausted) => break 'rounds StopReason::Exhausted,
            Err(e) => return Err(e),
        };
        history.push(next.node);
        spec = cfg.intervention_value.spec(truth, next.node);
        size = cfg.n_intv;
        selection = Some(next);
    };

    Ok(ExperimentLog {
        policy: policy.name(),
        seed,
        records,
        stop_reason,
    })
}

/// Ranks eligible candidates for the next experiment on existing data.
///
/// Under no-repeat, nodes already manipulated somewhere in `data` are
/// ineligible. Highest score first; ties by node index.
pub fn recommend(
    data: &InterventionalDataset,
    policy: &SelectionPolicy,
    cfg: &OedConfig,
    method: &PosteriorMethod,
    seed: u64,
) -> Result<Vec<CandidateScore>> {
    if !policy.is_scored() {
        return Err(Error::InvalidArgument(format!(
            "policy {} cannot rank candidates",
            policy.name()
        )));
    }
    if data.is_empty() {
        return Err(Error::InvalidDataset("no rows to learn from".into()));
    }
    cfg.validate(data.num_nodes())?;
    let history: Vec<NodeId> = data.manipulated_nodes().iter().collect();
    let eligible = cfg.eligible(&history);
    if eligible.is_empty() {
        return Err(Error::Exhausted);
    }
    let samples = method.sample(data, seed)?;
    let mut scores = score_candidates(&samples, policy, &eligible)?;
    scores.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.node.cmp(&b.node)));
    Ok(scores)
}
