use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::{Dag, NodeSet};

/// Structure prior `p(G)`, up to a constant.
#[derive(Clone, Debug, Default)]
pub enum GraphPrior {
    #[default]
    Uniform,
    /// Explicit log weights; graphs missing from the table take `fallback`
    /// or are an error when there is none.
    TableLookup {
        log_weights: HashMap<Dag, f64>,
        fallback: Option<f64>,
    },
    /// The graph marginal of a uniform order prior with flat weights on
    /// parent sets of size at most `max_parents`: proportional to the number
    /// of node orders the graph is consistent with.
    Modular { max_parents: usize },
}

impl GraphPrior {
    pub fn log_weight(&self, g: &Dag) -> Result<f64> {
        match self {
            GraphPrior::Uniform => Ok(0.0),
            GraphPrior::TableLookup {
                log_weights,
                fallback,
            } => log_weights
                .get(g)
                .copied()
                .or(*fallback)
                .ok_or_else(|| Error::InvalidArgument(format!("prior table has no entry for {g:?}"))),
            GraphPrior::Modular { max_parents } => {
                if g.parent_sets().iter().any(|p| p.len() > *max_parents) {
                    Ok(f64::NEG_INFINITY)
                } else {
                    Ok(count_linear_extensions(g).ln())
                }
            }
        }
    }
}

/// Number of node orders in which every node follows its parents.
pub fn count_linear_extensions(g: &Dag) -> f64 {
    let n = g.num_nodes();
    let size = 1usize << n;
    let mut ways = vec![0.0f64; size];
    ways[0] = 1.0;
    for bits in 1..size {
        let set = NodeSet::from_bits(bits as u32);
        ways[bits] = set
            .iter()
            .filter(|&v| g.parents(v).is_subset(set.without(v)))
            .map(|v| ways[set.without(v).bits() as usize])
            .sum();
    }
    ways[size - 1]
}
