//! Structure-recovery metrics and their aggregation across replicates.
//!
//! Hamming distance counts directed false positives plus false negatives, so
//! a reversed edge costs 2.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dag, DirectedGraph};
use crate::posterior::{edge_probabilities, PosteriorSamples};

/// Edges with posterior probability at least one half. May contain cycles.
pub fn median_probability_graph(edge_probs: &[Vec<f64>]) -> Result<DirectedGraph> {
    let n = edge_probs.len();
    let mut edges = Vec::new();
    for (u, row) in edge_probs.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: row.len(),
            });
        }
        for (v, &p) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!(
                    "edge probability {p} outside [0, 1]"
                )));
            }
            if u != v && p >= 0.5 {
                edges.push((u, v));
            }
        }
    }
    DirectedGraph::new(n, edges)
}

fn check_dims(est: &DirectedGraph, truth: &Dag) -> Result<()> {
    if est.num_nodes() != truth.num_nodes() {
        return Err(Error::Dimension {
            expected: truth.num_nodes(),
            found: est.num_nodes(),
        });
    }
    Ok(())
}

pub fn hamming(est: &DirectedGraph, truth: &Dag) -> Result<usize> {
    check_dims(est, truth)?;
    let false_pos = est.edges().iter().filter(|&&(u, v)| !truth.has_edge(u, v)).count();
    let false_neg = truth
        .edges()
        .into_iter()
        .filter(|&(u, v)| !est.has_edge(u, v))
        .count();
    Ok(false_pos + false_neg)
}

/// Fraction of true edges present in `est`.
pub fn tpr(est: &DirectedGraph, truth: &Dag) -> Result<f64> {
    check_dims(est, truth)?;
    let true_edges = truth.edges();
    if true_edges.is_empty() {
        return Err(Error::Undefined("the true positive rate of an edgeless truth"));
    }
    let hits = true_edges.iter().filter(|&&(u, v)| est.has_edge(u, v)).count();
    Ok(hits as f64 / true_edges.len() as f64)
}

/// Plug-in entropy, in nats, of the distinct sampled graphs.
pub fn posterior_entropy_estimate(samples: &PosteriorSamples) -> f64 {
    plugin_entropy(samples.iter().map(|(_, p)| p))
}

/// `-Σ p ln p`, skipping zero entries.
pub fn plugin_entropy(probs: impl IntoIterator<Item = f64>) -> f64 {
    let h: f64 = probs
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    h.max(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub experiment: usize,
    pub hamming: usize,
    /// `None` when the truth has no edges.
    pub tpr: Option<f64>,
    pub posterior_entropy: f64,
    pub n_distinct_graphs: usize,
}

impl MetricsRow {
    pub fn evaluate(experiment: usize, samples: &PosteriorSamples, truth: &Dag) -> Result<Self> {
        let mpg = median_probability_graph(&edge_probabilities(samples))?;
        let tpr = match tpr(&mpg, truth) {
            Ok(t) => Some(t),
            Err(Error::Undefined(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(MetricsRow {
            experiment,
            hamming: hamming(&mpg, truth)?,
            tpr,
            posterior_entropy: posterior_entropy_estimate(samples),
            n_distinct_graphs: samples.len(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; zero when `n == 1`.
    pub se: f64,
    pub n: usize,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n == 1 {
            0.0
        } else {
            let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        };
        Some(MeanSe { mean, se, n })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub experiment: usize,
    pub n_sim: usize,
    pub hamming: MeanSe,
    pub tpr: Option<MeanSe>,
    pub entropy: MeanSe,
    /// Set when only one replicate reached this experiment.
    pub degenerate: bool,
}

/// Mean and standard error per experiment index across replicate runs.
///
/// Runs that stopped early only contribute to the experiments they reached.
pub fn aggregate<'a>(runs: impl IntoIterator<Item = &'a [MetricsRow]>) -> Vec<AggregateRow> {
    let mut by_exp: BTreeMap<usize, Vec<&MetricsRow>> = BTreeMap::new();
    for run in runs {
        for row in run {
            by_exp.entry(row.experiment).or_default().push(row);
        }
    }
    by_exp
        .into_iter()
        .map(|(experiment, rows)| {
            let hamming: Vec<f64> = rows.iter().map(|r| r.hamming as f64).collect();
            let tprs: Vec<f64> = rows.iter().filter_map(|r| r.tpr).collect();
            let entropy: Vec<f64> = rows.iter().map(|r| r.posterior_entropy).collect();
            AggregateRow {
                experiment,
                n_sim: rows.len(),
                hamming: MeanSe::of(&hamming).expect("nonempty"),
                tpr: MeanSe::of(&tprs),
                entropy: MeanSe::of(&entropy).expect("nonempty"),
                degenerate: rows.len() == 1,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::{Provenance, SamplerKind};

    fn truth() -> Dag {
        Dag::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap()
    }

    fn samples(entries: Vec<(Dag, f64)>) -> PosteriorSamples {
        PosteriorSamples::from_weights(
            entries,
            Provenance {
                kind: SamplerKind::Mcmc,
                seed: None,
                n_iterations: 0,
                burn_in: 0,
                acceptance_rate: None,
            },
        )
        .unwrap()
    }

    #[test]
    fn median_graph_examples() {
        let zeros = vec![vec![0.0; 3]; 3];
        assert!(median_probability_graph(&zeros).unwrap().edges().is_empty());
        let mut half = zeros.clone();
        half[0][1] = 0.5;
        assert!(median_probability_graph(&half).unwrap().has_edge(0, 1));
        let mut both = zeros;
        both[0][1] = 0.6;
        both[1][0] = 0.6;
        assert_eq!(median_probability_graph(&both).unwrap().edges().len(), 2);
    }

    #[test]
    fn hamming_examples() {
        let t = truth();
        assert_eq!(hamming(&DirectedGraph::from(&t), &t).unwrap(), 0);
        let mut edges = t.edges();
        edges.push((1, 3));
        assert_eq!(hamming(&DirectedGraph::new(4, edges).unwrap(), &t).unwrap(), 1);
        let reversed = [(1, 0), (1, 2), (2, 3), (0, 3)];
        assert_eq!(hamming(&DirectedGraph::new(4, reversed).unwrap(), &t).unwrap(), 2);
        assert!(matches!(
            hamming(&DirectedGraph::new(3, []).unwrap(), &t),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn tpr_examples() {
        let t = truth();
        assert_eq!(tpr(&DirectedGraph::from(&t), &t).unwrap(), 1.0);
        assert_eq!(tpr(&DirectedGraph::new(4, []).unwrap(), &t).unwrap(), 0.0);
        let est = DirectedGraph::new(4, [(0, 1), (1, 2), (2, 3), (3, 1), (2, 0)]).unwrap();
        assert_eq!(tpr(&est, &t).unwrap(), 0.75);
        assert!(matches!(
            tpr(&est, &Dag::empty(4)),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn entropy_examples() {
        let g = truth();
        assert_eq!(posterior_entropy_estimate(&samples(vec![(g.clone(), 5.0)])), 0.0);
        let s = samples(vec![(g, 3.0), (Dag::empty(4), 3.0)]);
        assert!((posterior_entropy_estimate(&s) - 2f64.ln()).abs() < 1e-15);
        let all: Vec<_> = crate::graph::enumerate_dags(3)
            .unwrap()
            .into_iter()
            .map(|g| (g, 1.0 / 25.0))
            .collect();
        assert!((posterior_entropy_estimate(&samples(all)) - 25f64.ln()).abs() < 1e-12);
    }

    fn row(experiment: usize, hamming: usize) -> MetricsRow {
        MetricsRow {
            experiment,
            hamming,
            tpr: Some(0.5),
            posterior_entropy: 1.0,
            n_distinct_graphs: 2,
        }
    }

    #[test]
    fn aggregate_examples() {
        let a = vec![row(1, 2)];
        let b = vec![row(1, 4)];
        let agg = aggregate([a.as_slice(), b.as_slice()]);
        assert_eq!(agg[0].hamming.mean, 3.0);
        assert_eq!(agg[0].hamming.se, 1.0);
        assert_eq!(agg[0].tpr.unwrap().se, 0.0);
        assert!(!agg[0].degenerate);

        let single = aggregate([a.as_slice()]);
        assert_eq!(single[0].hamming.se, 0.0);
        assert!(single[0].degenerate);
    }
}
