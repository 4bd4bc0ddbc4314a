use crate::error::{Error, Result};
use crate::graph::{for_each_dag, ENUMERATION_LIMIT};
use crate::network::InterventionalDataset;
use crate::score::{BDeuConfig, FamilyScoreCache};

use super::{GraphPrior, PosteriorSamples, Provenance, SamplerKind};

/// Default node limit for exhaustive posteriors (29,281 DAGs at five nodes).
pub const EXACT_DEFAULT_LIMIT: usize = 5;

/// `p(G | D)` over every DAG, normalised.
pub fn exact_posterior(
    data: &InterventionalDataset,
    prior: &GraphPrior,
    v_limit: usize,
) -> Result<PosteriorSamples> {
    let mut cache = FamilyScoreCache::new(data, BDeuConfig::default());
    exact_posterior_cached(&mut cache, prior, v_limit)
}

pub fn exact_posterior_cached(
    cache: &mut FamilyScoreCache<'_>,
    prior: &GraphPrior,
    v_limit: usize,
) -> Result<PosteriorSamples> {
    let v = cache.data().num_nodes();
    let limit = v_limit.min(ENUMERATION_LIMIT);
    if v > limit {
        return Err(Error::Limit {
            what: "exact posterior size",
            value: v,
            limit,
        });
    }
    let mut graphs = Vec::new();
    let mut log_weights = Vec::new();
    let mut failure = None;
    for_each_dag(v, limit, |g| {
        if failure.is_some() {
            return;
        }
        match prior.log_weight(g) {
            Ok(lp) => {
                graphs.push(g.clone());
                log_weights.push(cache.log_marginal_likelihood(g) + lp);
            }
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Undefined("a posterior where every graph has zero weight"));
    }
    let scaled: Vec<f64> = log_weights.iter().map(|lw| (lw - max).exp()).collect();
    let z: f64 = scaled.iter().sum();
    let entries = graphs
        .into_iter()
        .zip(scaled)
        .map(|(g, w)| (g, w / z))
        .collect();
    PosteriorSamples::from_weights(
        entries,
        Provenance {
            kind: SamplerKind::Exact,
            seed: None,
            n_iterations: 0,
            burn_in: 0,
            acceptance_rate: None,
        },
    )
}
