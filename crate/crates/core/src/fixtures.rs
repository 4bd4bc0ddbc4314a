//! Named ground-truth networks shipped as JSON under `fixtures/`.
//!
//! The builders here regenerate the files (see the `generate_fixtures`
//! example); a test keeps both in sync. asia8 carries the usual published
//! Asia CPTs. sachs11 uses the common 17-arc consensus structure with
//! synthetic ternary CPTs, since no real intervention mechanics are modelled.
//! tree8 and random10 are reconstructions of networks known only from
//! drawings, not exact copies.
//!
//! PKC was both activated and inhibited in the original experiments. Here it
//! is a single candidate clamped like any other node, so the two conditions
//! are not distinguished.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Dag, NodeId};
use crate::network::{num_parent_configs, CategoricalNetwork};

pub const FIXTURE_NAMES: [&str; 5] = ["chain8", "tree8", "asia8", "random10", "sachs11"];

pub const RANDOM10_SEED: u64 = 10;
pub const RANDOM10_EDGE_PROB: f64 = 0.3;

const CHAIN8: &str = include_str!("../fixtures/chain8.json");
const TREE8: &str = include_str!("../fixtures/tree8.json");
const ASIA8: &str = include_str!("../fixtures/asia8.json");
const RANDOM10: &str = include_str!("../fixtures/random10.json");
const SACHS11: &str = include_str!("../fixtures/sachs11.json");

pub const SACHS_NAMES: [&str; 11] = [
    "Raf", "Mek", "Plcg", "PIP2", "PIP3", "Erk", "Akt", "PKA", "PKC", "P38", "Jnk",
];

/// Nodes targeted in the original flow-cytometry interventions.
pub const SACHS_CANDIDATES: [&str; 5] = ["Mek", "PIP2", "Akt", "PKA", "PKC"];

/// Loads a shipped fixture. `random10:<seed>` builds a fresh random network.
pub fn fixture(name: &str) -> Result<CategoricalNetwork> {
    let text = match name {
        "chain8" => CHAIN8,
        "tree8" => TREE8,
        "asia8" => ASIA8,
        "random10" => RANDOM10,
        "sachs11" => SACHS11,
        other => {
            return match other.strip_prefix("random10:").map(str::parse::<u64>) {
                Some(Ok(seed)) => build_random10(seed),
                _ => Err(Error::UnknownFixture(other.to_string())),
            }
        }
    };
    CategoricalNetwork::from_json(text)
}

/// Node indices of the Sachs intervention targets, ascending.
pub fn sachs_candidates() -> Vec<NodeId> {
    let mut ids: Vec<NodeId> = SACHS_CANDIDATES
        .iter()
        .map(|c| SACHS_NAMES.iter().position(|n| n == c).expect("known name"))
        .collect();
    ids.sort_unstable();
    ids
}

/// Builds a fixture from scratch, as written to the shipped files.
pub fn build(name: &str) -> Result<CategoricalNetwork> {
    match name {
        "chain8" => {
            let edges: Vec<_> = (0..7).map(|i| (i, i + 1)).collect();
            strong_network(Dag::from_edges(8, &edges)?, vec![2; 8], 8)
        }
        "tree8" => {
            let edges = [(0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (2, 6), (6, 7)];
            strong_network(Dag::from_edges(8, &edges)?, vec![2; 8], 81)
        }
        "asia8" => build_asia(),
        "random10" => build_random10(RANDOM10_SEED),
        "sachs11" => build_sachs(),
        other => Err(Error::UnknownFixture(other.to_string())),
    }
}

fn build_random10(seed: u64) -> Result<CategoricalNetwork> {
    CategoricalNetwork::random(&[2; 10], RANDOM10_EDGE_PROB, seed)
}

/// CPT rows that favour one state per parent configuration, so every edge
/// carries a clearly detectable dependence.
fn strong_network(dag: Dag, arities: Vec<usize>, seed: u64) -> Result<CategoricalNetwork> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dag.num_nodes();
    let mut cpt = Vec::with_capacity(n);
    for i in 0..n {
        let r = arities[i];
        let q = num_parent_configs(dag.parents(i), &arities);
        let rows = (0..q)
            .map(|j| {
                if q == 1 {
                    let mut w: Vec<f64> = (0..r).map(|_| rng.random_range(0.5..1.5)).collect();
                    let s: f64 = w.iter().sum();
                    w.iter_mut().for_each(|x| *x /= s);
                    return round_row(w);
                }
                let peak = rng.random_range(0.75..0.9);
                let favoured = j % r;
                let rest = (1.0 - peak) / (r - 1) as f64;
                round_row((0..r).map(|k| if k == favoured { peak } else { rest }).collect())
            })
            .collect();
        cpt.push(rows);
    }
    let intervention = arities.iter().map(|&r| vec![1.0 / r as f64; r]).collect();
    CategoricalNetwork::new(dag, arities, cpt, intervention)
}

/// Rounds to three decimals and puts the remainder on the last state, so the
/// shipped JSON stays readable and rows still sum to one.
fn round_row(row: Vec<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = row.iter().map(|p| (p * 1000.0).round() / 1000.0).collect();
    let last = out.len() - 1;
    let head: f64 = out[..last].iter().sum();
    out[last] = ((1.0 - head) * 1000.0).round() / 1000.0;
    out
}

fn binary(p_yes: f64) -> Vec<f64> {
    round_row(vec![1.0 - p_yes, p_yes])
}

fn build_asia() -> Result<CategoricalNetwork> {
    // 0 asia, 1 tub, 2 smoke, 3 lung, 4 bronc, 5 either, 6 xray, 7 dysp
    // state 1 is "yes"
    let edges = [(0, 1), (2, 3), (2, 4), (1, 5), (3, 5), (5, 6), (4, 7), (5, 7)];
    let dag = Dag::from_edges(8, &edges)?;
    let cpt = vec![
        vec![binary(0.01)],
        vec![binary(0.01), binary(0.05)],
        vec![binary(0.5)],
        vec![binary(0.01), binary(0.1)],
        vec![binary(0.3), binary(0.6)],
        // index = tub + 2 * lung
        vec![binary(0.0), binary(1.0), binary(1.0), binary(1.0)],
        vec![binary(0.05), binary(0.98)],
        // index = bronc + 2 * either
        vec![binary(0.1), binary(0.8), binary(0.7), binary(0.9)],
    ];
    let names = ["asia", "tub", "smoke", "lung", "bronc", "either", "xray", "dysp"];
    CategoricalNetwork::new(dag, vec![2; 8], cpt, vec![vec![0.5, 0.5]; 8])?
        .with_names(names.iter().map(|s| s.to_string()).collect())
}

fn build_sachs() -> Result<CategoricalNetwork> {
    let id = |name: &str| SACHS_NAMES.iter().position(|n| *n == name).expect("known name");
    let arcs = [
        ("Raf", "Mek"),
        ("Plcg", "PIP2"),
        ("Plcg", "PIP3"),
        ("PIP3", "PIP2"),
        ("Erk", "Akt"),
        ("PKA", "Akt"),
        ("PKA", "Erk"),
        ("PKA", "Jnk"),
        ("PKA", "Mek"),
        ("PKA", "P38"),
        ("PKA", "Raf"),
        ("PKC", "Jnk"),
        ("PKC", "Mek"),
        ("PKC", "P38"),
        ("PKC", "PKA"),
        ("PKC", "Raf"),
        ("Mek", "Erk"),
    ];
    let edges: Vec<_> = arcs.iter().map(|(u, v)| (id(u), id(v))).collect();
    let dag = Dag::from_edges(11, &edges)?;
    strong_network(dag, vec![3; 11], 11)?
        .with_names(SACHS_NAMES.iter().map(|s| s.to_string()).collect())
}
