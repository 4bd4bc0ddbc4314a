//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use causal_oed::graph::{Dag, NodeSet};
use causal_oed::network::{num_parent_configs, parent_config_index, CategoricalNetwork, InterventionalDataset};
use causal_oed::posterior::PosteriorSamples;
use causal_oed::score::{log_marginal_likelihood, BDeuConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

pub type Edges = Vec<(usize, usize)>;

fn acyclic(n: usize, adj: &[Vec<bool>]) -> bool {
    let mut indeg: Vec<usize> = (0..n).map(|v| (0..n).filter(|&u| adj[u][v]).count()).collect();
    let mut stack: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(u) = stack.pop() {
        seen += 1;
        for v in 0..n {
            if adj[u][v] {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    stack.push(v);
                }
            }
        }
    }
    seen == n
}

/// Every DAG on `n` nodes by scanning all off-diagonal adjacency matrices.
pub fn brute_force_dags(n: usize) -> Vec<Edges> {
    let slots: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v)))
        .collect();
    let mut out = Vec::new();
    for bits in 0u64..(1 << slots.len()) {
        let mut adj = vec![vec![false; n]; n];
        let mut edges = Vec::new();
        for (k, &(u, v)) in slots.iter().enumerate() {
            if bits >> k & 1 == 1 {
                adj[u][v] = true;
                edges.push((u, v));
            }
        }
        if acyclic(n, &adj) {
            edges.sort();
            out.push(edges);
        }
    }
    out
}

/// Skeleton and v-structures straight from the edge list.
pub fn brute_mec(n: usize, edges: &[(usize, usize)]) -> (BTreeSet<(usize, usize)>, BTreeSet<(usize, usize, usize)>) {
    let has = |a: usize, b: usize| edges.contains(&(a, b));
    let skeleton: BTreeSet<_> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    let mut vs = BTreeSet::new();
    for y in 0..n {
        for x in 0..n {
            for z in (x + 1)..n {
                if x != y && z != y && has(x, y) && has(z, y) && !has(x, z) && !has(z, x) {
                    vs.insert((x, y, z));
                }
            }
        }
    }
    (skeleton, vs)
}

pub fn to_dag(n: usize, edges: &[(usize, usize)]) -> Dag {
    Dag::from_edges(n, edges).unwrap()
}

/// Rows with uniform states; each row manipulates each node with
/// probability `p_manip`.
pub fn random_dataset(rng: &mut ChaCha8Rng, arities: &[usize], rows: usize, p_manip: f64) -> InterventionalDataset {
    let mut data = InterventionalDataset::new(arities.to_vec());
    for _ in 0..rows {
        let states: Vec<usize> = arities.iter().map(|&r| rng.random_range(0..r)).collect();
        let manip: NodeSet = (0..arities.len()).filter(|_| rng.random_bool(p_manip)).collect();
        data.push_row(&states, manip).unwrap();
    }
    data
}

/// Rows copied along a random chain with noise, so scores are far from flat.
pub fn correlated_dataset(seed: u64, n: usize, rows: usize) -> InterventionalDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = InterventionalDataset::new(vec![2; n]);
    let flip: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.45)).collect();
    for _ in 0..rows {
        let mut s = vec![0usize; n];
        s[0] = rng.random_range(0..2);
        for i in 1..n {
            let parent = rng.random_range(0..i);
            s[i] = if rng.random_bool(flip[i]) { 1 - s[parent] } else { s[parent] };
        }
        data.push_row(&s, NodeSet::EMPTY).unwrap();
    }
    data
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Edge marginals summing over every (order, graph) pair where each node's
/// parents precede it and number at most `k`. Returns `(probs, log evidence)`.
pub fn order_graph_oracle(data: &InterventionalDataset, k: usize) -> (Vec<Vec<f64>>, f64) {
    let n = data.num_nodes();
    let dags = brute_force_dags(n);
    let cfg = BDeuConfig::default();
    let scored: Vec<(Edges, f64)> = dags
        .into_iter()
        .filter(|e| (0..n).all(|v| e.iter().filter(|&&(_, b)| b == v).count() <= k))
        .map(|e| {
            let s = log_marginal_likelihood(data, &to_dag(n, &e), &cfg);
            (e, s)
        })
        .collect();
    let mut terms: Vec<(f64, &Edges)> = Vec::new();
    for order in permutations(n) {
        let pos: Vec<usize> = {
            let mut p = vec![0; n];
            for (i, &v) in order.iter().enumerate() {
                p[v] = i;
            }
            p
        };
        for (e, s) in &scored {
            if e.iter().all(|&(a, b)| pos[a] < pos[b]) {
                terms.push((*s, e));
            }
        }
    }
    let max = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut probs = vec![vec![0.0; n]; n];
    for (s, e) in &terms {
        let w = (s - max).exp();
        z += w;
        for &(a, b) in e.iter() {
            probs[a][b] += w;
        }
    }
    for row in probs.iter_mut() {
        for p in row.iter_mut() {
            *p /= z;
        }
    }
    (probs, max + z.ln())
}

/// Total-variation distance between a sample set and a reference map.
pub fn tv_distance(samples: &PosteriorSamples, reference: &HashMap<Dag, f64>) -> f64 {
    let mut keys: BTreeSet<&Dag> = reference.keys().collect();
    keys.extend(samples.graphs().iter());
    0.5 * keys
        .into_iter()
        .map(|g| (samples.probability(g) - reference.get(g).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

pub fn as_map(samples: &PosteriorSamples) -> HashMap<Dag, f64> {
    samples.iter().map(|(g, p)| (g.clone(), p)).collect()
}

/// DAGs with up to `max_n` nodes: a shuffled order with random forward edges.
pub fn arb_dag(max_n: usize) -> impl Strategy<Value = Dag> {
    (1..=max_n)
        .prop_flat_map(|n| {
            (
                Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
                proptest::collection::vec(any::<bool>(), n * n),
            )
        })
        .prop_map(|(order, bits)| {
            let n = order.len();
            let mut edges = Vec::new();
            for a in 0..n {
                for b in (a + 1)..n {
                    if bits[a * n + b] {
                        edges.push((order[a], order[b]));
                    }
                }
            }
            Dag::from_edges(n, &edges).unwrap()
        })
}

/// Posterior draw of CPTs for `g` given observational `d0`.
pub fn draw_parameters(g: &Dag, d0: &InterventionalDataset, rng: &mut ChaCha8Rng) -> CategoricalNetwork {
    let arities = d0.arities().to_vec();
    let n = g.num_nodes();
    let mut cpt = Vec::with_capacity(n);
    for i in 0..n {
        let r = arities[i];
        let q = num_parent_configs(g.parents(i), &arities);
        let mut counts = vec![vec![0.0; r]; q];
        for row in 0..d0.len() {
            let states = d0.row(row);
            counts[parent_config_index(&states, g.parents(i), &arities)][states[i]] += 1.0;
        }
        let alpha = 1.0 / (r * q) as f64;
        let rows = counts
            .into_iter()
            .map(|c| {
                let draws: Vec<f64> = c
                    .iter()
                    .map(|&x| Gamma::new(alpha + x, 1.0).unwrap().sample(rng))
                    .collect();
                let s: f64 = draws.iter().sum();
                draws.iter().map(|x| x / s).collect()
            })
            .collect();
        cpt.push(rows);
    }
    let intervention = arities.iter().map(|&r| vec![1.0 / r as f64; r]).collect();
    CategoricalNetwork::new(g.clone(), arities, cpt, intervention).unwrap()
}

/// Binary fork 0 <- 1 -> 2 with strong dependence.
pub fn strong_fork() -> CategoricalNetwork {
    CategoricalNetwork::new(
        Dag::from_edges(3, &[(1, 0), (1, 2)]).unwrap(),
        vec![2; 3],
        vec![
            vec![vec![0.85, 0.15], vec![0.15, 0.85]],
            vec![vec![0.5, 0.5]],
            vec![vec![0.8, 0.2], vec![0.2, 0.8]],
        ],
        vec![vec![0.5, 0.5]; 3],
    )
    .unwrap()
}
