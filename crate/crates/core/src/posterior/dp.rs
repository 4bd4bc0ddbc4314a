//! Exact edge marginals under an order-modular prior.
//!
//! The prior is uniform over node orders and flat over parent sets of size
//! at most `K`, with each parent set drawn from the node's predecessors.
//! Marginals come from subset sums over node sets: a zeta transform of the
//! family scores, forward and backward sums over order prefixes and
//! suffixes, and a superset transform per node. Everything runs in log
//! space.

use crate::error::{Error, Result};
use crate::graph::{NodeId, NodeSet};
use crate::network::InterventionalDataset;
use crate::score::{BDeuConfig, FamilyScoreCache};

use super::log_add_exp;

/// Largest node count the subset tables support.
pub const DP_NODE_LIMIT: usize = 20;

/// `p(u -> v | D)` under the modular prior.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMarginals {
    num_nodes: usize,
    probs: Vec<f64>,
    log_evidence: f64,
}

impl EdgeMarginals {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn get(&self, u: NodeId, v: NodeId) -> f64 {
        self.probs[u * self.num_nodes + v]
    }

    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        self.probs
            .chunks(self.num_nodes.max(1))
            .map(|row| row.to_vec())
            .collect()
    }

    /// Log of the sum over compatible (order, graph) pairs of the prior
    /// weight times the marginal likelihood, with unit weight per pair.
    pub fn log_evidence(&self) -> f64 {
        self.log_evidence
    }
}

pub fn dp_edge_marginals(data: &InterventionalDataset, max_parents: usize) -> Result<EdgeMarginals> {
    let mut cache = FamilyScoreCache::new(data, BDeuConfig::default());
    dp_edge_marginals_cached(&mut cache, max_parents)
}

pub fn dp_edge_marginals_cached(
    cache: &mut FamilyScoreCache<'_>,
    max_parents: usize,
) -> Result<EdgeMarginals> {
    let n = cache.data().num_nodes();
    if n > DP_NODE_LIMIT {
        return Err(Error::Limit {
            what: "edge-marginal DP size",
            value: n,
            limit: DP_NODE_LIMIT,
        });
    }
    if max_parents == 0 {
        return Err(Error::InvalidArgument("parent cap must be at least 1".into()));
    }
    let size = 1usize << n;
    let full = size - 1;
    let neg = f64::NEG_INFINITY;

    // admissible families per node, in increasing mask order
    let families: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|v| {
            (0..size)
                .filter(|&s| s & (1 << v) == 0 && (s as u32).count_ones() as usize <= max_parents)
                .map(|s| (s, cache.family(v, NodeSet::from_bits(s as u32))))
                .collect()
        })
        .collect();

    // alpha[v][U]: log sum of family scores over parent sets inside U
    let mut alpha = vec![vec![neg; size]; n];
    for v in 0..n {
        let a = &mut alpha[v];
        for &(s, score) in &families[v] {
            a[s] = score;
        }
        for b in 0..n {
            let bit = 1 << b;
            for s in 0..size {
                if s & bit != 0 {
                    a[s] = log_add_exp(a[s], a[s ^ bit]);
                }
            }
        }
    }

    // forward[S]: orders of S placed first; backward[T]: orders of T placed last
    let mut forward = vec![neg; size];
    let mut backward = vec![neg; size];
    forward[0] = 0.0;
    backward[0] = 0.0;
    for s in 1..size {
        let mut f = neg;
        let mut b = neg;
        for v in NodeSet::from_bits(s as u32).iter() {
            let rest = s ^ (1 << v);
            f = log_add_exp(f, alpha[v][rest] + forward[rest]);
            b = log_add_exp(b, alpha[v][full ^ s] + backward[rest]);
        }
        forward[s] = f;
        backward[s] = b;
    }
    let log_evidence = forward[full];
    if !log_evidence.is_finite() {
        return Err(Error::Undefined("edge marginals with zero evidence"));
    }

    let mut probs = vec![0.0; n * n];
    let mut gamma = vec![neg; size];
    for v in 0..n {
        let own = 1 << v;
        // gamma[U]: v's predecessors are exactly U, summed over both sides
        for (u_set, g) in gamma.iter_mut().enumerate() {
            *g = if u_set & own != 0 {
                neg
            } else {
                forward[u_set] + backward[full ^ u_set ^ own]
            };
        }
        // superset sums: gamma[S] becomes the total over U ⊇ S
        for b in (0..n).filter(|&b| b != v) {
            let bit = 1 << b;
            for s in 0..size {
                if s & bit == 0 && s & own == 0 {
                    gamma[s] = log_add_exp(gamma[s], gamma[s | bit]);
                }
            }
        }
        let mut numer = vec![neg; n];
        for &(s, score) in &families[v] {
            let term = score + gamma[s];
            for u in NodeSet::from_bits(s as u32).iter() {
                numer[u] = log_add_exp(numer[u], term);
            }
        }
        for u in (0..n).filter(|&u| u != v) {
            probs[u * n + v] = (numer[u] - log_evidence).exp().clamp(0.0, 1.0);
        }
    }
    Ok(EdgeMarginals {
        num_nodes: n,
        probs,
        log_evidence,
    })
}
