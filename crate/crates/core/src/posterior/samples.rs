use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Dag;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Exact,
    Mcmc,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub kind: SamplerKind,
    pub seed: Option<u64>,
    pub n_iterations: usize,
    pub burn_in: usize,
    /// MCMC acceptance rate over all iterations.
    pub acceptance_rate: Option<f64>,
}

/// A weighted multiset of DAGs, sorted by graph.
///
/// MCMC output carries integer visit counts as weights; exact output carries
/// probabilities normalised to one.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSamples {
    num_nodes: usize,
    graphs: Vec<Dag>,
    weights: Vec<f64>,
    total: f64,
    provenance: Provenance,
}

impl PosteriorSamples {
    pub fn from_weights(entries: Vec<(Dag, f64)>, provenance: Provenance) -> Result<Self> {
        let num_nodes = entries
            .first()
            .map(|(g, _)| g.num_nodes())
            .ok_or(Error::Undefined("an empty posterior sample"))?;
        let mut merged: HashMap<Dag, f64> = HashMap::with_capacity(entries.len());
        for (g, w) in entries {
            if g.num_nodes() != num_nodes {
                return Err(Error::Dimension {
                    expected: num_nodes,
                    found: g.num_nodes(),
                });
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!("invalid sample weight {w}")));
            }
            *merged.entry(g).or_insert(0.0) += w;
        }
        let mut sorted: Vec<(Dag, f64)> = merged.into_iter().filter(|(_, w)| *w > 0.0).collect();
        if sorted.is_empty() {
            return Err(Error::Undefined("a posterior sample with zero total weight"));
        }
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        let (graphs, weights): (Vec<_>, Vec<_>) = sorted.into_iter().unzip();
        let total = weights.iter().sum();
        Ok(PosteriorSamples {
            num_nodes,
            graphs,
            weights,
            total,
            provenance,
        })
    }

    pub fn from_counts(counts: HashMap<Dag, u64>, provenance: Provenance) -> Result<Self> {
        Self::from_weights(
            counts.into_iter().map(|(g, c)| (g, c as f64)).collect(),
            provenance,
        )
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of distinct graphs.
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn total_weight(&self) -> f64 {
        self.total
    }

    pub fn graphs(&self) -> &[Dag] {
        &self.graphs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `(graph, probability)` pairs in graph order.
    pub fn iter(&self) -> impl Iterator<Item = (&Dag, f64)> + '_ {
        let total = self.total;
        self.graphs
            .iter()
            .zip(&self.weights)
            .map(move |(g, w)| (g, w / total))
    }

    pub fn probability(&self, g: &Dag) -> f64 {
        self.graphs
            .binary_search(g)
            .map(|i| self.weights[i] / self.total)
            .unwrap_or(0.0)
    }

    /// Every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let weights: Vec<f64> = self.weights.iter().map(|w| w * factor).collect();
        PosteriorSamples {
            total: weights.iter().sum(),
            weights,
            graphs: self.graphs.clone(),
            num_nodes: self.num_nodes,
            provenance: self.provenance.clone(),
        }
    }
}

/// `p(u -> v)` for every ordered pair, as a row-major `V × V` matrix.
pub fn edge_probabilities(samples: &PosteriorSamples) -> Vec<Vec<f64>> {
    let v = samples.num_nodes();
    let mut probs = vec![vec![0.0; v]; v];
    for (g, &weight) in samples.graphs().iter().zip(samples.weights()) {
        for (u, w) in g.edges() {
            probs[u][w] += weight;
        }
    }
    let total = samples.total_weight();
    for p in probs.iter_mut().flatten() {
        *p = (*p / total).min(1.0);
    }
    probs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov() -> Provenance {
        Provenance {
            kind: SamplerKind::Mcmc,
            seed: None,
            n_iterations: 0,
            burn_in: 0,
            acceptance_rate: None,
        }
    }

    #[test]
    fn identical_samples_give_binary_edge_probabilities() {
        let g = Dag::from_edges(3, &[(0, 1), (2, 1)]).unwrap();
        let s = PosteriorSamples::from_weights(vec![(g, 7.0)], prov()).unwrap();
        for row in edge_probabilities(&s) {
            assert!(row.iter().all(|&p| p == 0.0 || p == 1.0));
        }
    }

    #[test]
    fn edge_fraction_by_count() {
        let a = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let b = Dag::empty(2);
        let s = PosteriorSamples::from_weights(
            vec![(a.clone(), 1.0), (a.clone(), 1.0), (b, 1.0), (a, 1.0)],
            prov(),
        )
        .unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(edge_probabilities(&s)[0][1], 0.75);
    }

    #[test]
    fn exact_uniform_over_two_node_dags() {
        let dags = crate::graph::enumerate_dags(2).unwrap();
        let s = PosteriorSamples::from_weights(
            dags.into_iter().map(|g| (g, 1.0 / 3.0)).collect(),
            prov(),
        )
        .unwrap();
        assert!((edge_probabilities(&s)[0][1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_empty() {
        assert!(PosteriorSamples::from_weights(vec![], prov()).is_err());
    }
}
