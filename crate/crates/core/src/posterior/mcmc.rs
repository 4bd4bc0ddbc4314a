//! Metropolis-Hastings over DAGs.
//!
//! Each iteration picks one of two kernels. The local kernel proposes a
//! uniformly chosen single-edge addition, deletion or reversal among those
//! that keep the graph acyclic, and corrects by the neighbourhood sizes at
//! both ends. The global kernel is an independence proposal that draws every
//! edge from its modular-prior marginal; cyclic draws are rejected. Each
//! kernel is reversible on its own, so the mixture is too.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{is_acyclic, Dag, NodeId, NodeSet};
use crate::network::InterventionalDataset;
use crate::score::{BDeuConfig, FamilyScoreCache};

use super::dp::dp_edge_marginals_cached;
use super::{GraphPrior, PosteriorSamples, Provenance, SamplerKind};

/// Proposal marginals are clamped to `[EPS, 1 - EPS]`.
const PROPOSAL_EPS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcConfig {
    pub n_iterations: usize,
    pub burn_in: usize,
    pub global_move_prob: f64,
    /// Parent cap for the edge-marginal DP behind the global proposal.
    pub max_parents: usize,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            n_iterations: 250_000,
            burn_in: 150_000,
            global_move_prob: 0.1,
            max_parents: 5,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.burn_in >= self.n_iterations {
            problems.push(format!(
                "mcmc.burn_in ({}) must be smaller than mcmc.n_iterations ({})",
                self.burn_in, self.n_iterations
            ));
        }
        if !(0.0..=1.0).contains(&self.global_move_prob) {
            problems.push(format!(
                "mcmc.global_move_prob ({}) must lie in [0, 1]",
                self.global_move_prob
            ));
        }
        if self.max_parents == 0 {
            problems.push("mcmc.max_parents must be at least 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Move {
    Add(NodeId, NodeId),
    Delete(NodeId, NodeId),
    Reverse(NodeId, NodeId),
}

impl Move {
    fn apply(self, parents: &mut [NodeSet]) {
        match self {
            Move::Add(u, v) => parents[v].insert(u),
            Move::Delete(u, v) => parents[v].remove(u),
            Move::Reverse(u, v) => {
                parents[v].remove(u);
                parents[u].insert(v);
            }
        }
    }
}

/// Descendant masks of an acyclic parent-mask vector.
fn descendant_masks(parents: &[NodeSet]) -> Vec<NodeSet> {
    let n = parents.len();
    let mut children = vec![NodeSet::EMPTY; n];
    for (v, pa) in parents.iter().enumerate() {
        for u in pa.iter() {
            children[u].insert(v);
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut placed = NodeSet::EMPTY;
    while order.len() < n {
        for v in 0..n {
            if !placed.contains(v) && parents[v].is_subset(placed) {
                placed.insert(v);
                order.push(v);
            }
        }
    }
    let mut desc = vec![NodeSet::EMPTY; n];
    for &v in order.iter().rev() {
        let mut d = children[v];
        for c in children[v].iter() {
            d = d.union(desc[c]);
        }
        desc[v] = d;
    }
    desc
}

/// Visits every single-edge change that keeps the graph acyclic.
fn for_each_move(parents: &[NodeSet], mut visit: impl FnMut(Move)) {
    let n = parents.len();
    let desc = descendant_masks(parents);
    for v in 0..n {
        for u in 0..n {
            if u == v {
                continue;
            }
            if parents[v].contains(u) {
                visit(Move::Delete(u, v));
                // u -> v reverses cleanly unless another path u ~> v exists
                if parents[v].without(u).intersection(desc[u]).is_empty() {
                    visit(Move::Reverse(u, v));
                }
            } else if !desc[v].contains(u) {
                visit(Move::Add(u, v));
            }
        }
    }
}

fn count_moves(parents: &[NodeSet]) -> usize {
    let mut count = 0;
    for_each_move(parents, |_| count += 1);
    count
}

struct GlobalProposal {
    n: usize,
    probs: Vec<f64>,
    log_on: Vec<f64>,
    log_off: Vec<f64>,
}

impl GlobalProposal {
    fn new(n: usize, marginals: &super::EdgeMarginals) -> Self {
        let mut probs = vec![0.0; n * n];
        let mut log_on = vec![0.0; n * n];
        let mut log_off = vec![0.0; n * n];
        for u in 0..n {
            for v in (0..n).filter(|&v| v != u) {
                let p = marginals.get(u, v).clamp(PROPOSAL_EPS, 1.0 - PROPOSAL_EPS);
                probs[u * n + v] = p;
                log_on[u * n + v] = p.ln();
                log_off[u * n + v] = (1.0 - p).ln();
            }
        }
        GlobalProposal {
            n,
            probs,
            log_on,
            log_off,
        }
    }

    fn log_density(&self, parents: &[NodeSet]) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for v in 0..n {
            for u in (0..n).filter(|&u| u != v) {
                total += if parents[v].contains(u) {
                    self.log_on[u * n + v]
                } else {
                    self.log_off[u * n + v]
                };
            }
        }
        total
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<NodeSet> {
        let n = self.n;
        let mut parents = vec![NodeSet::EMPTY; n];
        for (v, pa) in parents.iter_mut().enumerate() {
            for u in (0..n).filter(|&u| u != v) {
                if rng.random::<f64>() < self.probs[u * n + v] {
                    pa.insert(u);
                }
            }
        }
        parents
    }
}

/// Samples `p(G | D) ∝ p(D | G) p(G)` starting from the empty graph.
pub fn mcmc_sample(
    data: &InterventionalDataset,
    prior: &GraphPrior,
    cfg: &McmcConfig,
) -> Result<PosteriorSamples> {
    let mut cache = FamilyScoreCache::new(data, BDeuConfig::default());
    mcmc_sample_cached(&mut cache, prior, cfg)
}

pub fn mcmc_sample_cached(
    cache: &mut FamilyScoreCache<'_>,
    prior: &GraphPrior,
    cfg: &McmcConfig,
) -> Result<PosteriorSamples> {
    cfg.validate()?;
    if matches!(prior, GraphPrior::Modular { .. }) {
        return Err(Error::InvalidArgument(
            "the modular prior is only used inside the edge-marginal DP".into(),
        ));
    }
    let n = cache.data().num_nodes();
    let global = if cfg.global_move_prob > 0.0 && n > 1 {
        let cap = cfg.max_parents.min(n - 1);
        Some(GlobalProposal::new(n, &dp_edge_marginals_cached(cache, cap)?))
    } else {
        None
    };

    let log_prior = |parents: &[NodeSet]| -> Result<f64> {
        match prior {
            GraphPrior::Uniform => Ok(0.0),
            _ => prior.log_weight(&Dag::from_parent_sets_unchecked(parents.to_vec())),
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut parents = vec![NodeSet::EMPTY; n];
    let mut families: Vec<f64> = (0..n).map(|v| cache.family(v, parents[v])).collect();
    let mut current_prior = log_prior(&parents)?;
    let mut moves = Vec::new();
    for_each_move(&parents, |m| moves.push(m));
    let mut current_q = global.as_ref().map_or(0.0, |g| g.log_density(&parents));

    let mut counts: HashMap<Vec<NodeSet>, u64> = HashMap::new();
    let mut run = 0u64;
    let mut accepted = 0usize;
    let mut proposal = parents.clone();

    for t in 0..cfg.n_iterations {
        let use_global = match &global {
            Some(_) => rng.random::<f64>() < cfg.global_move_prob,
            None => false,
        };
        let mut accept_state = false;
        if use_global {
            let g = global.as_ref().expect("global proposal present");
            let candidate = g.draw(&mut rng);
            let u: f64 = rng.random();
            if is_acyclic(&candidate) {
                let new_families: Vec<f64> =
                    (0..n).map(|v| cache.family(v, candidate[v])).collect();
                let new_prior = log_prior(&candidate)?;
                let new_q = g.log_density(&candidate);
                let log_ratio = new_families.iter().sum::<f64>() + new_prior
                    - families.iter().sum::<f64>()
                    - current_prior
                    + current_q
                    - new_q;
                if u.ln() < log_ratio {
                    proposal = candidate;
                    families = new_families;
                    current_prior = new_prior;
                    current_q = new_q;
                    accept_state = true;
                }
            }
        } else if !moves.is_empty() {
            let mv = moves[rng.random_range(0..moves.len())];
            let u: f64 = rng.random();
            proposal.copy_from_slice(&parents);
            mv.apply(&mut proposal);
            let (touched, len) = match mv {
                Move::Add(_, v) | Move::Delete(_, v) => ([v, v], 1),
                Move::Reverse(a, b) => ([a, b], 2),
            };
            let mut delta = 0.0;
            let mut updated = [(0usize, 0.0f64); 2];
            for (slot, &v) in touched[..len].iter().enumerate() {
                let s = cache.family(v, proposal[v]);
                delta += s - families[v];
                updated[slot] = (v, s);
            }
            let new_prior = log_prior(&proposal)?;
            let reverse_moves = count_moves(&proposal);
            let log_ratio = delta + new_prior - current_prior + (moves.len() as f64).ln()
                - (reverse_moves as f64).ln();
            if u.ln() < log_ratio {
                for &(v, s) in &updated[..len] {
                    families[v] = s;
                }
                current_prior = new_prior;
                if let Some(g) = &global {
                    current_q = g.log_density(&proposal);
                }
                accept_state = true;
            }
        }

        if accept_state {
            accepted += 1;
            if proposal != parents {
                if run > 0 {
                    *counts.entry(parents.clone()).or_insert(0) += run;
                    run = 0;
                }
                std::mem::swap(&mut parents, &mut proposal);
                moves.clear();
                for_each_move(&parents, |m| moves.push(m));
            }
        }
        proposal.clone_from(&parents);
        if t >= cfg.burn_in {
            run += 1;
        }
    }
    if run > 0 {
        *counts.entry(parents).or_insert(0) += run;
    }

    let samples = counts
        .into_iter()
        .map(|(p, c)| (Dag::from_parent_sets_unchecked(p), c as f64))
        .collect();
    PosteriorSamples::from_weights(
        samples,
        Provenance {
            kind: SamplerKind::Mcmc,
            seed: Some(cfg.seed),
            n_iterations: cfg.n_iterations,
            burn_in: cfg.burn_in,
            acceptance_rate: Some(accepted as f64 / cfg.n_iterations as f64),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_moves(parents: &[NodeSet]) -> usize {
        let n = parents.len();
        let mut count = 0;
        for u in 0..n {
            for v in (0..n).filter(|&v| v != u) {
                let mut p = parents.to_vec();
                if parents[v].contains(u) {
                    count += 1;
                    p[v].remove(u);
                    p[u].insert(v);
                    if is_acyclic(&p) {
                        count += 1;
                    }
                } else if !parents[u].contains(v) {
                    p[v].insert(u);
                    if is_acyclic(&p) {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    #[test]
    fn move_counts_match_brute_force() {
        for g in crate::graph::enumerate_dags(4).unwrap() {
            assert_eq!(count_moves(g.parent_sets()), brute_force_moves(g.parent_sets()));
        }
    }

    #[test]
    fn visits_all_two_node_dags() {
        let data = InterventionalDataset::new(vec![2, 2]);
        let cfg = McmcConfig {
            n_iterations: 200,
            burn_in: 0,
            global_move_prob: 0.0,
            max_parents: 1,
            seed: 3,
        };
        let s = mcmc_sample(&data, &GraphPrior::Uniform, &cfg).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.total_weight(), 200.0);
    }

    #[test]
    fn same_seed_same_chain() {
        let net = crate::network::CategoricalNetwork::random(&[2; 4], 0.5, 8).unwrap();
        let data = net
            .generate_dataset(&crate::network::InterventionSpec::observational(), 100, 1)
            .unwrap();
        let cfg = McmcConfig {
            n_iterations: 3000,
            burn_in: 1000,
            seed: 11,
            ..McmcConfig::default()
        };
        let a = mcmc_sample(&data, &GraphPrior::Uniform, &cfg).unwrap();
        let b = mcmc_sample(&data, &GraphPrior::Uniform, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let cfg = McmcConfig {
            n_iterations: 10,
            burn_in: 10,
            ..McmcConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Validation(_))));
        let data = InterventionalDataset::new(vec![2, 2]);
        let err = mcmc_sample(
            &data,
            &GraphPrior::Modular { max_parents: 1 },
            &McmcConfig {
                n_iterations: 10,
                burn_in: 0,
                ..McmcConfig::default()
            },
        );
        assert!(err.is_err());
    }
}
