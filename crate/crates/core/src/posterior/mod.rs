//! Posterior distributions over DAGs: exhaustive enumeration for small
//! graphs, exact edge marginals under an order-modular prior, and
//! Metropolis-Hastings structure sampling.

mod dp;
mod exact;
mod mcmc;
mod prior;
mod samples;

pub use dp::{dp_edge_marginals, dp_edge_marginals_cached, EdgeMarginals, DP_NODE_LIMIT};
pub use exact::{exact_posterior, exact_posterior_cached, EXACT_DEFAULT_LIMIT};
pub use mcmc::{mcmc_sample, mcmc_sample_cached, McmcConfig};
pub use prior::{count_linear_extensions, GraphPrior};
pub use samples::{edge_probabilities, PosteriorSamples, Provenance, SamplerKind};

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}
