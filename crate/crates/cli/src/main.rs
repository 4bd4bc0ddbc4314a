use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use causal_oed::fixtures::fixture;
use causal_oed::metrics::{median_probability_graph, posterior_entropy_estimate};
use causal_oed::oed::{recommend, OedConfig, PosteriorMethod, SelectionPolicy};
use causal_oed::graph::ENUMERATION_LIMIT;
use causal_oed::posterior::{edge_probabilities, McmcConfig};
use causal_oed::score::{log_marginal_likelihood, BDeuConfig};
use causal_oed::study::{load_study, run_study};
use causal_oed::{
    CategoricalNetwork, Dag, InterventionMode, InterventionSpec, InterventionalDataset,
};

#[derive(Parser)]
#[command(name = "causal-oed", version, about = "Entropy-based intervention design for causal networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct PosteriorArgs {
    /// MCMC iterations, burn-in included
    #[arg(long, default_value_t = 250_000)]
    mcmc_iters: usize,
    #[arg(long, default_value_t = 150_000)]
    burn_in: usize,
    /// Probability of a global (edge-marginal) proposal per iteration
    #[arg(long, default_value_t = 0.1)]
    global_move_prob: f64,
    #[arg(long, default_value_t = 5)]
    max_parents: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Enumerate every DAG instead of sampling (at most 6 nodes)
    #[arg(long)]
    exact: bool,
}

impl PosteriorArgs {
    fn method(&self) -> PosteriorMethod {
        if self.exact {
            PosteriorMethod::Exact {
                v_limit: ENUMERATION_LIMIT,
            }
        } else {
            PosteriorMethod::Mcmc(McmcConfig {
                n_iterations: self.mcmc_iters,
                burn_in: self.burn_in,
                global_move_prob: self.global_move_prob,
                max_parents: self.max_parents,
                seed: self.seed,
            })
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated simulation study from a JSON config
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's output_dir
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; overrides CAUSAL_OED_THREADS
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Rank candidate interventions for existing data
    Recommend {
        #[arg(long)]
        data: PathBuf,
        /// Expected node count; checked against the CSV header
        #[arg(long)]
        network_nodes: Option<usize>,
        /// mec, cs, ds, ps or pwc
        #[arg(long, default_value = "mec")]
        scheme: String,
        /// Comma-separated node indices; all nodes when omitted
        #[arg(long, value_delimiter = ',')]
        candidates: Option<Vec<usize>>,
        /// Allow nodes already manipulated in the data
        #[arg(long)]
        allow_repeat: bool,
        #[command(flatten)]
        posterior: PosteriorArgs,
    },
    /// BDeu log marginal likelihood of a graph
    Score {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        /// Add the intervention-distribution term for manipulated rows
        #[arg(long)]
        intervention_term: bool,
    },
    /// Posterior edge probabilities and summary
    Posterior {
        #[arg(long)]
        data: PathBuf,
        /// Number of highest-probability graphs to list
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[command(flatten)]
        posterior: PosteriorArgs,
    },
    /// Markov equivalence class key of a graph
    Mec {
        #[arg(long)]
        graph: PathBuf,
        /// Cut the incoming edges of this node first
        #[arg(long)]
        intervene: Option<usize>,
    },
    /// Print a shipped network fixture as JSON
    Fixture { name: String },
    /// Sample a dataset from a network
    Generate {
        /// Network JSON file
        #[arg(long, conflicts_with = "fixture")]
        network: Option<PathBuf>,
        #[arg(long)]
        fixture: Option<String>,
        #[arg(long)]
        rows: usize,
        /// Node to intervene on; observational when omitted
        #[arg(long)]
        intervene: Option<usize>,
        /// State the intervened node is clamped to
        #[arg(long, default_value_t = 0)]
        value: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_data(path: &Path) -> Result<InterventionalDataset> {
    InterventionalDataset::load_csv(path, None)
        .with_context(|| format!("reading dataset {}", path.display()))
}

fn load_graph(path: &Path) -> Result<Dag> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing graph {}", path.display()))
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            config,
            out,
            threads,
        } => {
            let cfg = load_study(&config)
                .with_context(|| format!("loading study {}", config.display()))?;
            let Some(out) = out.or_else(|| cfg.output_dir.clone()) else {
                bail!("no output directory: pass --out or set output_dir");
            };
            let result = run_study(&cfg, &out, threads)?;
            eprintln!(
                "{} runs written to {}",
                result.runs.len(),
                out.display()
            );
        }
        Command::Recommend {
            data,
            network_nodes,
            scheme,
            candidates,
            allow_repeat,
            posterior,
        } => {
            let data = load_data(&data)?;
            if let Some(v) = network_nodes {
                if v != data.num_nodes() {
                    bail!("dataset has {} nodes, expected {v}", data.num_nodes());
                }
            }
            let policy: SelectionPolicy = scheme.parse()?;
            let mut cfg = OedConfig::new(data.num_nodes());
            if let Some(mut c) = candidates {
                c.sort_unstable();
                c.dedup();
                cfg.candidates = c;
            }
            cfg.allow_repeat = allow_repeat;
            let ranking = recommend(&data, &policy, &cfg, &posterior.method(), posterior.seed)?;
            let rows: Vec<_> = ranking
                .iter()
                .map(|c| json!({"node": c.node, "score": c.score}))
                .collect();
            print_json(&json!({"policy": policy.name(), "ranking": rows}))?;
        }
        Command::Score {
            data,
            graph,
            intervention_term,
        } => {
            let data = load_data(&data)?;
            let g = load_graph(&graph)?;
            if g.num_nodes() != data.num_nodes() {
                bail!("graph has {} nodes, dataset has {}", g.num_nodes(), data.num_nodes());
            }
            let cfg = BDeuConfig {
                include_intervention_term: intervention_term,
            };
            print_json(&json!({
                "log_marginal_likelihood": log_marginal_likelihood(&data, &g, &cfg),
                "rows": data.len(),
            }))?;
        }
        Command::Posterior {
            data,
            top,
            posterior,
        } => {
            let data = load_data(&data)?;
            let samples = posterior.method().sample(&data, posterior.seed)?;
            let probs = edge_probabilities(&samples);
            let mpg = median_probability_graph(&probs)?;
            let mut ranked: Vec<_> = samples.iter().collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
            let top: Vec<_> = ranked
                .iter()
                .take(top)
                .map(|(g, p)| json!({"edges": g.edges(), "probability": p}))
                .collect();
            print_json(&json!({
                "num_nodes": data.num_nodes(),
                "rows": data.len(),
                "sampler": samples.provenance(),
                "distinct_graphs": samples.len(),
                "entropy_nats": posterior_entropy_estimate(&samples),
                "edge_probabilities": probs,
                "median_probability_graph": mpg.edges(),
                "top_graphs": top,
            }))?;
        }
        Command::Mec { graph, intervene } => {
            let mut g = load_graph(&graph)?;
            if let Some(e) = intervene {
                if e >= g.num_nodes() {
                    bail!("node {e} out of range for {} nodes", g.num_nodes());
                }
                g = g.surgery(e);
            }
            print_json(&serde_json::to_value(g.mec_key())?)?;
        }
        Command::Fixture { name } => {
            println!("{}", fixture(&name)?.to_json()?);
        }
        Command::Generate {
            network,
            fixture: name,
            rows,
            intervene,
            value,
            seed,
            out,
        } => {
            let net = match (network, name) {
                (Some(path), None) => CategoricalNetwork::load(&path)
                    .with_context(|| format!("loading network {}", path.display()))?,
                (None, Some(name)) => fixture(&name)?,
                _ => bail!("pass exactly one of --network or --fixture"),
            };
            let spec = match intervene {
                Some(e) => InterventionSpec::single(e, InterventionMode::Fixed(value)),
                None => InterventionSpec::observational(),
            };
            let data = net.generate_dataset(&spec, rows, seed)?;
            match out {
                Some(path) => data.write_csv(fs::File::create(&path)?)?,
                None => data.write_csv(std::io::stdout().lock())?,
            }
        }
    }
    Ok(())
}
