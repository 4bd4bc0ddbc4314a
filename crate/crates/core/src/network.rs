//! Categorical causal networks, edge-breaking interventions and datasets.
//!
//! Parent configurations use a mixed-radix index: parents in ascending node
//! order, lowest-indexed parent as the least significant digit. CPT row `j`
//! in network files follows the same convention.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dag, NodeId, NodeSet};

const SUM_TOLERANCE: f64 = 1e-12;

/// Mixed-radix index of the parents' joint state.
pub fn parent_config_index(states: &[usize], parents: NodeSet, arities: &[usize]) -> usize {
    let mut j = 0;
    let mut radix = 1;
    for p in parents.iter() {
        j += states[p] * radix;
        radix *= arities[p];
    }
    j
}

/// Number of joint parent states, `q_i`.
pub fn num_parent_configs(parents: NodeSet, arities: &[usize]) -> usize {
    parents.iter().map(|p| arities[p]).product()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalNetwork {
    dag: Dag,
    arities: Vec<usize>,
    cpt: Vec<Vec<Vec<f64>>>,
    intervention_dist: Vec<Vec<f64>>,
    names: Option<Vec<String>>,
}

impl CategoricalNetwork {
    pub fn new(
        dag: Dag,
        arities: Vec<usize>,
        cpt: Vec<Vec<Vec<f64>>>,
        intervention_dist: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = dag.num_nodes();
        let bad = |msg: String| Err(Error::InvalidNetwork(msg));
        if arities.len() != n || cpt.len() != n || intervention_dist.len() != n {
            return bad(format!("expected per-node entries for {n} nodes"));
        }
        for i in 0..n {
            let r = arities[i];
            if !(2..=u8::MAX as usize).contains(&r) {
                return bad(format!("node {i} has arity {r}; arities must lie in 2..=255"));
            }
            let q = num_parent_configs(dag.parents(i), &arities);
            if cpt[i].len() != q {
                return bad(format!("node {i}: expected {q} CPT rows, found {}", cpt[i].len()));
            }
            for (j, row) in cpt[i].iter().enumerate() {
                check_distribution(row, r).map_err(|m| {
                    Error::InvalidNetwork(format!("node {i}, CPT row {j}: {m}"))
                })?;
            }
            check_distribution(&intervention_dist[i], r).map_err(|m| {
                Error::InvalidNetwork(format!("node {i}, intervention distribution: {m}"))
            })?;
        }
        Ok(CategoricalNetwork {
            dag,
            arities,
            cpt,
            intervention_dist,
            names: None,
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_nodes() {
            return Err(Error::InvalidNetwork("one name per node required".into()));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn num_nodes(&self) -> usize {
        self.dag.num_nodes()
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn cpt(&self, i: NodeId) -> &[Vec<f64>] {
        &self.cpt[i]
    }

    pub fn intervention_dist(&self, i: NodeId) -> &[f64] {
        &self.intervention_dist[i]
    }

    /// Draws one row under `spec`. Manipulated nodes come from the spec, the
    /// rest from their CPTs in topological order.
    pub fn draw_row<R: Rng + ?Sized>(&self, spec: &InterventionSpec, rng: &mut R) -> Vec<usize> {
        let mut states = vec![0; self.num_nodes()];
        for i in self.dag.topological_order() {
            states[i] = match spec.mode(i) {
                Some(InterventionMode::Fixed(k)) => *k,
                Some(InterventionMode::Distribution(p)) => sample_categorical(p, rng),
                None => {
                    let j = parent_config_index(&states, self.dag.parents(i), &self.arities);
                    sample_categorical(&self.cpt[i][j], rng)
                }
            };
        }
        states
    }

    /// Log probability of `states` with `manipulated` nodes drawn from their
    /// stored intervention distributions.
    pub fn log_joint(&self, states: &[usize], manipulated: NodeSet) -> f64 {
        (0..self.num_nodes())
            .map(|i| {
                if manipulated.contains(i) {
                    self.intervention_dist[i][states[i]].ln()
                } else {
                    self.log_cpd(states, i)
                }
            })
            .sum()
    }

    /// Log probability of `states` under the intervention described by `spec`.
    pub fn log_joint_under(&self, states: &[usize], spec: &InterventionSpec) -> f64 {
        (0..self.num_nodes())
            .map(|i| match spec.mode(i) {
                Some(InterventionMode::Fixed(k)) => {
                    if states[i] == *k {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                }
                Some(InterventionMode::Distribution(p)) => p[states[i]].ln(),
                None => self.log_cpd(states, i),
            })
            .sum()
    }

    fn log_cpd(&self, states: &[usize], i: NodeId) -> f64 {
        let j = parent_config_index(states, self.dag.parents(i), &self.arities);
        self.cpt[i][j][states[i]].ln()
    }

    /// Appends `n` rows drawn under `spec` to `data`.
    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        data: &mut InterventionalDataset,
        spec: &InterventionSpec,
        n: usize,
        rng: &mut R,
    ) -> Result<()> {
        spec.validate(self)?;
        let manipulated = spec.targets();
        for _ in 0..n {
            let row = self.draw_row(spec, rng);
            data.push_row(&row, manipulated)?;
        }
        Ok(())
    }

    pub fn generate_dataset(
        &self,
        spec: &InterventionSpec,
        n: usize,
        seed: u64,
    ) -> Result<InterventionalDataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = InterventionalDataset::new(self.arities.clone());
        self.sample_into(&mut data, spec, n, &mut rng)?;
        Ok(data)
    }

    /// Random network: uniform node order, each forward edge kept with
    /// probability `edge_prob`, CPT and intervention rows from a flat Dirichlet.
    pub fn random(arities: &[usize], edge_prob: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&edge_prob) {
            return Err(Error::InvalidArgument(format!(
                "edge probability {edge_prob} outside [0, 1]"
            )));
        }
        let n = arities.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<NodeId> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut parents = vec![NodeSet::EMPTY; n];
        for (a, &u) in order.iter().enumerate() {
            for &v in &order[a + 1..] {
                if rng.random::<f64>() < edge_prob {
                    parents[v].insert(u);
                }
            }
        }
        let dag = Dag::from_parent_sets(parents)?;
        Self::with_flat_dirichlet(dag, arities.to_vec(), &mut rng)
    }

    /// Fills CPT and intervention rows of `dag` with flat Dirichlet draws.
    pub fn with_flat_dirichlet<R: Rng + ?Sized>(
        dag: Dag,
        arities: Vec<usize>,
        rng: &mut R,
    ) -> Result<Self> {
        let n = dag.num_nodes();
        let cpt = (0..n)
            .map(|i| {
                let q = num_parent_configs(dag.parents(i), &arities);
                (0..q).map(|_| flat_dirichlet(arities[i], rng)).collect()
            })
            .collect();
        let intervention_dist = (0..n).map(|i| flat_dirichlet(arities[i], rng)).collect();
        Self::new(dag, arities, cpt, intervention_dist)
    }

    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            num_nodes: self.num_nodes(),
            edges: self.dag.edges().into_iter().map(|(u, v)| [u, v]).collect(),
            arities: self.arities.clone(),
            cpt: self.cpt.clone(),
            intervention_dist: self.intervention_dist.clone(),
            names: self.names.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn check_distribution(p: &[f64], arity: usize) -> std::result::Result<(), String> {
    if p.len() != arity {
        return Err(format!("expected {arity} probabilities, found {}", p.len()));
    }
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err("probabilities must be finite and nonnegative".into());
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(format!("probabilities sum to {total}"));
    }
    Ok(())
}

fn flat_dirichlet<R: Rng + ?Sized>(arity: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..arity).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    let mut p: Vec<f64> = draws.iter().map(|x| x / total).collect();
    // absorb rounding so rows sum to one well inside tolerance
    let head: f64 = p[..arity - 1].iter().sum();
    p[arity - 1] = (1.0 - head).max(0.0);
    p
}

pub(crate) fn sample_categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &pk) in p.iter().enumerate() {
        acc += pk;
        if u < acc {
            return k;
        }
    }
    // u landed in the rounding gap; return the last state with mass
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}

/// JSON network file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub num_nodes: usize,
    pub edges: Vec<[NodeId; 2]>,
    pub arities: Vec<usize>,
    pub cpt: Vec<Vec<Vec<f64>>>,
    pub intervention_dist: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
}

impl TryFrom<NetworkFile> for CategoricalNetwork {
    type Error = Error;

    fn try_from(file: NetworkFile) -> Result<Self> {
        let edges: Vec<_> = file.edges.iter().map(|&[u, v]| (u, v)).collect();
        let dag = Dag::from_edges(file.num_nodes, &edges)?;
        let net = CategoricalNetwork::new(dag, file.arities, file.cpt, file.intervention_dist)?;
        match file.names {
            Some(names) => net.with_names(names),
            None => Ok(net),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionMode {
    Fixed(usize),
    Distribution(Vec<f64>),
}

/// The nodes set externally and how. No targets means observational.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InterventionSpec {
    targets: Vec<(NodeId, InterventionMode)>,
}

impl InterventionSpec {
    pub fn observational() -> Self {
        Self::default()
    }

    pub fn single(node: NodeId, mode: InterventionMode) -> Self {
        InterventionSpec {
            targets: vec![(node, mode)],
        }
    }

    pub fn new(mut targets: Vec<(NodeId, InterventionMode)>) -> Result<Self> {
        targets.sort_by_key(|(i, _)| *i);
        if targets.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument("intervention targets must be distinct".into()));
        }
        Ok(InterventionSpec { targets })
    }

    pub fn targets(&self) -> NodeSet {
        self.targets.iter().map(|(i, _)| *i).collect()
    }

    pub fn mode(&self, node: NodeId) -> Option<&InterventionMode> {
        self.targets.iter().find(|(i, _)| *i == node).map(|(_, m)| m)
    }

    pub fn is_observational(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn validate(&self, net: &CategoricalNetwork) -> Result<()> {
        for (i, mode) in &self.targets {
            let i = *i;
            if i >= net.num_nodes() {
                return Err(Error::NodeOutOfRange {
                    node: i,
                    num_nodes: net.num_nodes(),
                });
            }
            let r = net.arities()[i];
            match mode {
                InterventionMode::Fixed(k) if *k >= r => {
                    return Err(Error::InvalidArgument(format!(
                        "fixed state {k} out of range for node {i} with arity {r}"
                    )))
                }
                InterventionMode::Distribution(p) => check_distribution(p, r).map_err(|m| {
                    Error::InvalidArgument(format!("intervention on node {i}: {m}"))
                })?,
                _ => {}
            }
        }
        Ok(())
    }
}

/// Rows of node states, each with the set of manipulated nodes.
///
/// Stored column-major with `u8` states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterventionalDataset {
    arities: Vec<usize>,
    columns: Vec<Vec<u8>>,
    manipulated: Vec<NodeSet>,
}

impl InterventionalDataset {
    pub fn new(arities: Vec<usize>) -> Self {
        let columns = vec![Vec::new(); arities.len()];
        InterventionalDataset {
            arities,
            columns,
            manipulated: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.arities.len()
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    pub fn len(&self) -> usize {
        self.manipulated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manipulated.is_empty()
    }

    pub fn column(&self, i: NodeId) -> &[u8] {
        &self.columns[i]
    }

    pub fn manipulated(&self, n: usize) -> NodeSet {
        self.manipulated[n]
    }

    pub fn manipulated_sets(&self) -> &[NodeSet] {
        &self.manipulated
    }

    pub fn state(&self, n: usize, i: NodeId) -> usize {
        self.columns[i][n] as usize
    }

    pub fn row(&self, n: usize) -> Vec<usize> {
        self.columns.iter().map(|c| c[n] as usize).collect()
    }

    pub fn push_row(&mut self, states: &[usize], manipulated: NodeSet) -> Result<()> {
        if states.len() != self.num_nodes() {
            return Err(Error::Dimension {
                expected: self.num_nodes(),
                found: states.len(),
            });
        }
        if !manipulated.is_subset(NodeSet::full(self.num_nodes())) {
            return Err(Error::InvalidDataset("manipulated set names unknown nodes".into()));
        }
        for (i, (&s, &r)) in states.iter().zip(&self.arities).enumerate() {
            if s >= r {
                return Err(Error::InvalidDataset(format!(
                    "state {s} of node {i} exceeds arity {r}"
                )));
            }
        }
        for (col, &s) in self.columns.iter_mut().zip(states) {
            col.push(s as u8);
        }
        self.manipulated.push(manipulated);
        Ok(())
    }

    pub fn extend(&mut self, other: &InterventionalDataset) -> Result<()> {
        if other.arities != self.arities {
            return Err(Error::InvalidDataset("arities differ".into()));
        }
        for (col, extra) in self.columns.iter_mut().zip(&other.columns) {
            col.extend_from_slice(extra);
        }
        self.manipulated.extend_from_slice(&other.manipulated);
        Ok(())
    }

    /// Rows in the given order.
    pub fn permuted(&self, order: &[usize]) -> Self {
        InterventionalDataset {
            arities: self.arities.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| order.iter().map(|&n| c[n]).collect())
                .collect(),
            manipulated: order.iter().map(|&n| self.manipulated[n]).collect(),
        }
    }

    /// Nodes manipulated by at least one row.
    pub fn manipulated_nodes(&self) -> NodeSet {
        self.manipulated
            .iter()
            .fold(NodeSet::EMPTY, |acc, &m| acc.union(m))
    }

    /// CSV with columns `X0..X{V-1}` and `target` (-1 when observational).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.num_nodes()).map(|i| format!("X{i}")).collect();
        header.push("target".into());
        w.write_record(&header)?;
        for n in 0..self.len() {
            let target = match self.manipulated[n].len() {
                0 => -1,
                1 => self.manipulated[n].iter().next().unwrap() as i64,
                _ => {
                    return Err(Error::InvalidDataset(format!(
                        "row {n} manipulates several nodes; the CSV format holds one target"
                    )))
                }
            };
            let mut record: Vec<String> = self.row(n).iter().map(|s| s.to_string()).collect();
            record.push(target.to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV format. Without explicit arities each node's arity is
    /// its largest observed state plus one, and at least 2.
    pub fn read_csv<R: Read>(reader: R, arities: Option<Vec<usize>>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let v = header.len().checked_sub(1).ok_or_else(|| {
            Error::InvalidDataset("missing columns".into())
        })?;
        for (i, name) in header.iter().take(v).enumerate() {
            if name.trim() != format!("X{i}") {
                return Err(Error::InvalidDataset(format!(
                    "column {i} should be X{i}, found `{name}`"
                )));
            }
        }
        if header.get(v).map(str::trim) != Some("target") {
            return Err(Error::InvalidDataset("last column must be `target`".into()));
        }
        let mut rows = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record?;
            let parse = |s: &str| -> Result<i64> {
                s.trim().parse::<i64>().map_err(|_| {
                    Error::InvalidDataset(format!("row {}: `{s}` is not an integer", line + 1))
                })
            };
            let states = record
                .iter()
                .take(v)
                .map(|s| {
                    let x = parse(s)?;
                    usize::try_from(x).map_err(|_| {
                        Error::InvalidDataset(format!("row {}: negative state", line + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let target = parse(&record[v])?;
            let manipulated = match target {
                -1 => NodeSet::EMPTY,
                t if t >= 0 && (t as usize) < v => NodeSet::singleton(t as usize),
                t => {
                    return Err(Error::InvalidDataset(format!(
                        "row {}: target {t} out of range",
                        line + 1
                    )))
                }
            };
            rows.push((states, manipulated));
        }
        let arities = match arities {
            Some(a) if a.len() != v => {
                return Err(Error::Dimension {
                    expected: v,
                    found: a.len(),
                })
            }
            Some(a) => a,
            None => (0..v)
                .map(|i| rows.iter().map(|(s, _)| s[i] + 1).max().unwrap_or(2).max(2))
                .collect(),
        };
        let mut data = InterventionalDataset::new(arities);
        for (states, m) in rows {
            data.push_row(&states, m)?;
        }
        Ok(data)
    }

    pub fn load_csv(path: impl AsRef<Path>, arities: Option<Vec<usize>>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, arities)
    }
}
