//! Finite Markov chains, labeled graphs and the state-pair cost matrices
//! built from node labels.
//!
//! A [`MarkovChain`] is immutable once validated: every kernel row is a
//! probability vector, the initial distribution sums to one, and optional
//! labels share a single dimension. Graphs become chains through
//! [`graph_to_chain`], which turns weighted out-edges into a random walk.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums and the initial mass may deviate from one by at most this much;
/// smaller deviations are renormalized and recorded.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Residual bound accepted for a computed stationary distribution.
pub const STATIONARY_RESIDUAL: f64 = 1e-10;

/// A finite, time-homogeneous Markov chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovChain {
    kernel: Array2<f64>,
    initial: Array1<f64>,
    labels: Option<Vec<Vec<f64>>>,
    renormalized: bool,
}

impl MarkovChain {
    /// Validates and builds a chain. See [`validate_chain`].
    pub fn new(
        kernel: Array2<f64>,
        initial: Array1<f64>,
        labels: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        validate_chain(kernel, initial, labels)
    }

    pub fn n_states(&self) -> usize {
        self.kernel.nrows()
    }

    pub fn kernel(&self) -> &Array2<f64> {
        &self.kernel
    }

    pub fn initial(&self) -> &Array1<f64> {
        &self.initial
    }

    pub fn labels(&self) -> Option<&[Vec<f64>]> {
        self.labels.as_deref()
    }

    /// True when validation rescaled a row or the initial vector.
    pub fn was_renormalized(&self) -> bool {
        self.renormalized
    }

    /// Indices `j` with `kernel[i, j] > 0`.
    pub fn support(&self, state: usize) -> Vec<usize> {
        self.kernel
            .row(state)
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    /// Same chain with a different initial distribution.
    pub fn with_initial(&self, initial: Array1<f64>) -> Result<Self> {
        validate_chain(self.kernel.clone(), initial, self.labels.clone())
    }

    /// Same chain with a different kernel (labels and initial kept).
    pub fn with_kernel(&self, kernel: Array2<f64>) -> Result<Self> {
        validate_chain(kernel, self.initial.clone(), self.labels.clone())
    }

    /// Same chain started from its stationary distribution.
    pub fn stationary(&self) -> Result<Self> {
        let mu = stationary_distribution(self)?;
        self.with_initial(mu)
    }

    /// L1 norm of `initialᵀ·kernel − initialᵀ`.
    pub fn balance_residual(&self) -> f64 {
        let pushed = self.initial.dot(&self.kernel);
        (&pushed - &self.initial).mapv(f64::abs).sum()
    }
}

fn check_probability_vector(values: &mut [f64], what: &str) -> Result<bool> {
    for (idx, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NegativeEntry {
                location: format!("{what}[{idx}]"),
                value: v,
            });
        }
        if v < 0.0 {
            return Err(Error::NegativeEntry {
                location: format!("{what}[{idx}]"),
                value: v,
            });
        }
        if v > 1.0 + ROW_SUM_TOLERANCE {
            return Err(Error::NegativeEntry {
                location: format!("{what}[{idx}] (above 1)"),
                value: v,
            });
        }
    }
    let sum: f64 = values.iter().sum();
    let deviation = (sum - 1.0).abs();
    if deviation > ROW_SUM_TOLERANCE {
        return Ok(false);
    }
    if deviation > 0.0 {
        values.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(true)
}

/// Validates a kernel, initial distribution and optional labels.
///
/// Rows whose sum deviates from one by at most [`ROW_SUM_TOLERANCE`] are
/// renormalized (and the chain records it); larger deviations are rejected.
pub fn validate_chain(
    kernel: Array2<f64>,
    initial: Array1<f64>,
    labels: Option<Vec<Vec<f64>>>,
) -> Result<MarkovChain> {
    let n = kernel.nrows();
    if n == 0 || kernel.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "kernel must be square and non-empty, got {}x{}",
            kernel.nrows(),
            kernel.ncols()
        )));
    }
    if initial.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial has length {}, kernel has {n} states",
            initial.len()
        )));
    }
    if let Some(labels) = &labels {
        if labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {n} states",
                labels.len()
            )));
        }
        if let Some(first) = labels.first() {
            if let Some(bad) = labels.iter().find(|l| l.len() != first.len()) {
                return Err(Error::LabelDimensionMismatch(first.len(), bad.len()));
            }
        }
    }

    let before = kernel.clone();
    let mut kernel = kernel;
    for (i, mut row) in kernel.rows_mut().into_iter().enumerate() {
        let slice = row.as_slice_mut().expect("standard layout row");
        if !check_probability_vector(slice, &format!("kernel[{i}]"))? {
            return Err(Error::RowSumViolation {
                row: i,
                sum: before.row(i).sum(),
                tolerance: ROW_SUM_TOLERANCE,
            });
        }
    }
    let before_initial = initial.clone();
    let mut initial = initial.as_standard_layout().to_owned();
    let init_slice = initial.as_slice_mut().expect("contiguous");
    if !check_probability_vector(init_slice, "initial")? {
        return Err(Error::MarginalNotNormalized(before_initial.sum()));
    }
    let renormalized = kernel != before || initial != before_initial;
    if renormalized {
        log::debug!("chain renormalized within tolerance {ROW_SUM_TOLERANCE}");
    }
    Ok(MarkovChain {
        kernel,
        initial,
        labels,
        renormalized,
    })
}

/// A directed graph with optional edge weights and node labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledGraph {
    pub node_count: usize,
    pub edges: Vec<(usize, usize, Option<f64>)>,
    pub labels: Option<Vec<Vec<f64>>>,
}

impl LabeledGraph {
    pub fn new(node_count: usize) -> Self {
        Self {
            node_count,
            ..Default::default()
        }
    }

    pub fn with_edge(mut self, src: usize, dst: usize) -> Self {
        self.edges.push((src, dst, None));
        self
    }

    pub fn with_weighted_edge(mut self, src: usize, dst: usize, weight: f64) -> Self {
        self.edges.push((src, dst, Some(weight)));
        self
    }

    /// Adds `a -> b` and `b -> a`.
    pub fn with_undirected_edge(self, a: usize, b: usize) -> Self {
        self.with_edge(a, b).with_edge(b, a)
    }

    pub fn with_labels(mut self, labels: Vec<Vec<f64>>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_count == 0 {
            return Err(Error::DimensionMismatch("graph has no nodes".into()));
        }
        for &(s, d, w) in &self.edges {
            if s >= self.node_count || d >= self.node_count {
                return Err(Error::DimensionMismatch(format!(
                    "edge ({s}, {d}) out of range for {} nodes",
                    self.node_count
                )));
            }
            if let Some(w) = w {
                if !(w > 0.0 && w.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "edge ({s}, {d}) has non-positive weight {w}"
                    )));
                }
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.node_count {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} nodes",
                    labels.len(),
                    self.node_count
                )));
            }
        }
        Ok(())
    }
}

/// What to do with nodes that have no out-edges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DanglingPolicy {
    #[default]
    SelfLoop,
    UniformJump,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub enum InitialPolicy {
    #[default]
    Uniform,
    Provided(Vec<f64>),
    Stationary,
}

/// Converts a graph into the (optionally lazy) weighted random walk on it.
pub fn graph_to_chain(
    graph: &LabeledGraph,
    dangling: DanglingPolicy,
    lazy_prob: f64,
    initial_policy: &InitialPolicy,
) -> Result<MarkovChain> {
    graph.validate()?;
    if !(0.0..1.0).contains(&lazy_prob) {
        return Err(Error::InvalidParameter(format!(
            "lazy_prob must lie in [0, 1), got {lazy_prob}"
        )));
    }
    let n = graph.node_count;
    let mut weights = Array2::<f64>::zeros((n, n));
    for &(s, d, w) in &graph.edges {
        weights[[s, d]] += w.unwrap_or(1.0);
    }
    let mut kernel = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let total: f64 = weights.row(i).sum();
        if total > 0.0 {
            for j in 0..n {
                kernel[[i, j]] = (1.0 - lazy_prob) * weights[[i, j]] / total;
            }
            kernel[[i, i]] += lazy_prob;
        } else {
            match dangling {
                DanglingPolicy::SelfLoop => kernel[[i, i]] = 1.0,
                DanglingPolicy::UniformJump => {
                    let share = (1.0 - lazy_prob) / n as f64;
                    kernel.row_mut(i).fill(share);
                    kernel[[i, i]] += lazy_prob;
                }
            }
        }
    }
    let uniform = Array1::from_elem(n, 1.0 / n as f64);
    let labels = graph.labels.clone();
    match initial_policy {
        InitialPolicy::Uniform => validate_chain(kernel, uniform, labels),
        InitialPolicy::Provided(v) => validate_chain(kernel, Array1::from(v.clone()), labels),
        InitialPolicy::Stationary => {
            let chain = validate_chain(kernel, uniform, labels)?;
            chain
                .stationary()
                .map_err(|e| Error::StationaryUnavailable(Box::new(e)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Manhattan,
    Hamming,
    Discrete,
}

impl Metric {
    fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::Hamming => a.iter().zip(b).filter(|(x, y)| x != y).count() as f64,
            Metric::Discrete => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "manhattan" => Ok(Metric::Manhattan),
            "hamming" => Ok(Metric::Hamming),
            "discrete" => Ok(Metric::Discrete),
            other => Err(Error::Parse(format!("unknown metric '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub metric: Metric,
    pub scale: f64,
}

impl CostSpec {
    pub fn new(metric: Metric) -> Self {
        Self { metric, scale: 1.0 }
    }

    pub fn scaled(metric: Metric, scale: f64) -> Self {
        Self { metric, scale }
    }
}

/// `C[i, j] = scale * metric(label_x(i), label_y(j))`.
///
/// With the discrete metric and unlabeled chains of equal size the states
/// themselves are compared (`C = scale * (1 - I)`).
pub fn cost_matrix(x: &MarkovChain, y: &MarkovChain, spec: CostSpec) -> Result<Array2<f64>> {
    if !(spec.scale > 0.0 && spec.scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "cost scale must be positive, got {}",
            spec.scale
        )));
    }
    let (n, m) = (x.n_states(), y.n_states());
    match (x.labels(), y.labels()) {
        (Some(lx), Some(ly)) => {
            let dx = lx.first().map_or(0, Vec::len);
            let dy = ly.first().map_or(0, Vec::len);
            if dx != dy {
                return Err(Error::LabelDimensionMismatch(dx, dy));
            }
            Ok(Array2::from_shape_fn((n, m), |(i, j)| {
                spec.scale * spec.metric.eval(&lx[i], &ly[j])
            }))
        }
        (None, None) if spec.metric == Metric::Discrete && n == m => {
            Ok(Array2::from_shape_fn((n, m), |(i, j)| {
                if i == j {
                    0.0
                } else {
                    spec.scale
                }
            }))
        }
        _ => Err(Error::MissingLabels),
    }
}

/// Solves `μᵀ K = μᵀ`, `Σ μ = 1` directly.
///
/// The balance equations are stacked with the normalization row and solved
/// by SVD; a second vanishing singular value means the stationary vector is
/// not unique and the chain is rejected.
pub fn stationary_distribution(chain: &MarkovChain) -> Result<Array1<f64>> {
    let n = chain.n_states();
    let k = chain.kernel();
    let mut a = DMatrix::<f64>::zeros(n + 1, n);
    for i in 0..n {
        for j in 0..n {
            // row i of (Kᵀ - I)
            a[(i, j)] = k[[j, i]] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n, j)] = 1.0;
    }
    let mut b = nalgebra::DVector::<f64>::zeros(n + 1);
    b[n] = 1.0;

    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-10 * smax.max(1.0) {
        return Err(Error::NonUniqueStationary);
    }
    let sol = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::PreconditionViolated(e.to_string()))?;
    let mut mu = Array1::from_iter(sol.iter().map(|&v| v.max(0.0)));
    let total = mu.sum();
    mu.mapv_inplace(|v| v / total);

    let residual = (&mu.dot(k) - &mu).mapv(f64::abs).sum();
    if residual > STATIONARY_RESIDUAL {
        return Err(Error::PreconditionViolated(format!(
            "stationary residual {residual:.3e} exceeds {STATIONARY_RESIDUAL:e}"
        )));
    }
    Ok(mu)
}

/// Structural diagnostics of a kernel's positive-entry digraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StructureReport {
    pub irreducible: bool,
    pub aperiodic: bool,
    pub max_out_degree: usize,
    pub support_sizes: Vec<usize>,
    /// States whose only transition is to themselves.
    pub dangling: Vec<usize>,
}

impl StructureReport {
    /// Whether the depth-infinity WL recursion is guaranteed to collapse.
    pub fn wl_infinity_eligible(&self) -> bool {
        self.irreducible && self.aperiodic
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn structure_check(chain: &MarkovChain) -> StructureReport {
    let n = chain.n_states();
    let k = chain.kernel();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    let support_sizes: Vec<usize> = (0..n)
        .map(|i| k.row(i).iter().filter(|&&p| p > 0.0).count())
        .collect();
    for i in 0..n {
        for j in 0..n {
            if k[[i, j]] > 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let components = tarjan_scc(&graph);
    let irreducible = components.len() == 1;

    // Period of each strongly connected class: gcd over internal edges of
    // level(u) + 1 - level(v) for BFS levels from a class root.
    let mut component_of = vec![0usize; n];
    for (c, comp) in components.iter().enumerate() {
        for node in comp {
            component_of[node.index()] = c;
        }
    }
    let mut aperiodic = true;
    for (c, comp) in components.iter().enumerate() {
        let members: Vec<usize> = comp.iter().map(|v| v.index()).collect();
        let has_internal_edge = members
            .iter()
            .any(|&u| (0..n).any(|v| k[[u, v]] > 0.0 && component_of[v] == c));
        if !has_internal_edge {
            continue;
        }
        let mut level = vec![usize::MAX; n];
        let root = members[0];
        level[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if k[[u, v]] > 0.0 && component_of[v] == c && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let mut period = 0usize;
        for &u in &members {
            for v in 0..n {
                if k[[u, v]] > 0.0 && component_of[v] == c {
                    let diff = (level[u] + 1).abs_diff(level[v]);
                    period = gcd(period, diff);
                }
            }
        }
        if period != 1 {
            aperiodic = false;
        }
    }

    let dangling = (0..n)
        .filter(|&i| support_sizes[i] == 1 && k[[i, i]] > 0.0)
        .collect();
    StructureReport {
        irreducible,
        aperiodic,
        max_out_degree: support_sizes.iter().copied().max().unwrap_or(0),
        support_sizes,
        dangling,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn validates_trivial_chains() {
        let c = MarkovChain::new(array![[1.0]], array![1.0], None).unwrap();
        assert_eq!(c.n_states(), 1);
        let c = MarkovChain::new(array![[0.5, 0.5], [0.5, 0.5]], array![1.0, 0.0], None).unwrap();
        assert!(!c.was_renormalized());
    }

    #[test]
    fn rejects_bad_row_sum() {
        let err = MarkovChain::new(array![[0.6, 0.6], [0.5, 0.5]], array![0.5, 0.5], None);
        assert!(matches!(err, Err(Error::RowSumViolation { row: 0, .. })));
    }

    #[test]
    fn rejects_negative_and_mismatch() {
        let err = MarkovChain::new(array![[1.5, -0.5], [0.5, 0.5]], array![0.5, 0.5], None);
        assert!(matches!(err, Err(Error::NegativeEntry { .. })));
        let err = MarkovChain::new(array![[1.0]], array![0.5, 0.5], None);
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
        let err = MarkovChain::new(array![[0.5, 0.5]], array![1.0], None);
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn renormalizes_small_deviation() {
        let c = MarkovChain::new(
            array![[0.5, 0.5 + 5e-10], [0.5, 0.5]],
            array![0.5, 0.5],
            None,
        )
        .unwrap();
        assert!(c.was_renormalized());
        assert!((c.kernel().row(0).sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn label_dimensions_must_agree() {
        let err = MarkovChain::new(
            array![[0.5, 0.5], [0.5, 0.5]],
            array![0.5, 0.5],
            Some(vec![vec![0.0], vec![1.0, 2.0]]),
        );
        assert!(matches!(err, Err(Error::LabelDimensionMismatch(1, 2))));
    }

    #[test]
    fn two_cycle_graph() {
        let g = LabeledGraph::new(2).with_edge(0, 1).with_edge(1, 0);
        let c = graph_to_chain(&g, DanglingPolicy::SelfLoop, 0.0, &InitialPolicy::Uniform).unwrap();
        assert_eq!(c.kernel(), &array![[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(c.initial(), &array![0.5, 0.5]);
    }

    #[test]
    fn dangling_policies() {
        let g = LabeledGraph::new(3).with_edge(0, 1).with_edge(1, 0);
        let c = graph_to_chain(&g, DanglingPolicy::SelfLoop, 0.0, &InitialPolicy::Uniform).unwrap();
        assert_eq!(c.kernel().row(2).to_vec(), vec![0.0, 0.0, 1.0]);
        let c = graph_to_chain(
            &g,
            DanglingPolicy::UniformJump,
            0.0,
            &InitialPolicy::Uniform,
        )
        .unwrap();
        for &p in c.kernel().row(2) {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn undirected_triangle_and_laziness() {
        let g = LabeledGraph::new(3)
            .with_undirected_edge(0, 1)
            .with_undirected_edge(1, 2)
            .with_undirected_edge(2, 0);
        let c = graph_to_chain(&g, DanglingPolicy::SelfLoop, 0.0, &InitialPolicy::Uniform).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 0.0 } else { 0.5 };
                assert_eq!(c.kernel()[[i, j]], expected);
            }
        }
        let lazy =
            graph_to_chain(&g, DanglingPolicy::SelfLoop, 0.2, &InitialPolicy::Uniform).unwrap();
        assert!((lazy.kernel()[[0, 0]] - 0.2).abs() < 1e-15);
        assert!((lazy.kernel()[[0, 1]] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn weighted_walk_and_stationary_initial() {
        let g = LabeledGraph::new(2)
            .with_weighted_edge(0, 0, 9.0)
            .with_weighted_edge(0, 1, 1.0)
            .with_weighted_edge(1, 0, 1.0)
            .with_weighted_edge(1, 1, 1.0);
        let c = graph_to_chain(
            &g,
            DanglingPolicy::SelfLoop,
            0.0,
            &InitialPolicy::Stationary,
        )
        .unwrap();
        assert!((c.initial()[0] - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_initial_fails_on_reducible_graph() {
        let g = LabeledGraph::new(2);
        let err = graph_to_chain(
            &g,
            DanglingPolicy::SelfLoop,
            0.0,
            &InitialPolicy::Stationary,
        );
        assert!(matches!(err, Err(Error::StationaryUnavailable(_))));
    }

    #[test]
    fn graph_validation() {
        let g = LabeledGraph::new(2).with_edge(0, 2);
        assert!(g.validate().is_err());
        let g = LabeledGraph::new(2).with_weighted_edge(0, 1, 0.0);
        assert!(g.validate().is_err());
    }

    fn labeled(labels: Vec<Vec<f64>>) -> MarkovChain {
        let n = labels.len();
        MarkovChain::new(
            Array2::from_elem((n, n), 1.0 / n as f64),
            Array1::from_elem(n, 1.0 / n as f64),
            Some(labels),
        )
        .unwrap()
    }

    #[test]
    fn euclidean_and_hamming_costs() {
        let x = labeled(vec![vec![0.0], vec![1.0]]);
        let c = cost_matrix(&x, &x, CostSpec::new(Metric::Euclidean)).unwrap();
        assert_eq!(c, array![[0.0, 1.0], [1.0, 0.0]]);
        let a = labeled(vec![vec![0.0, 1.0]]);
        let b = labeled(vec![vec![1.0, 1.0]]);
        let c = cost_matrix(&a, &b, CostSpec::new(Metric::Hamming)).unwrap();
        assert_eq!(c, array![[1.0]]);
        let c = cost_matrix(&a, &b, CostSpec::scaled(Metric::Manhattan, 2.0)).unwrap();
        assert_eq!(c, array![[2.0]]);
    }

    #[test]
    fn discrete_cost_on_unlabeled_chains() {
        let x = MarkovChain::new(array![[0.5, 0.5], [0.5, 0.5]], array![0.5, 0.5], None).unwrap();
        let c = cost_matrix(&x, &x, CostSpec::new(Metric::Discrete)).unwrap();
        assert_eq!(c, array![[0.0, 1.0], [1.0, 0.0]]);
        assert!(matches!(
            cost_matrix(&x, &x, CostSpec::new(Metric::Euclidean)),
            Err(Error::MissingLabels)
        ));
    }

    #[test]
    fn cost_label_dimension_mismatch() {
        let a = labeled(vec![vec![0.0]]);
        let b = labeled(vec![vec![0.0, 1.0]]);
        assert!(matches!(
            cost_matrix(&a, &b, CostSpec::new(Metric::Euclidean)),
            Err(Error::LabelDimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn stationary_examples() {
        let c = MarkovChain::new(array![[0.0, 1.0], [1.0, 0.0]], array![1.0, 0.0], None).unwrap();
        let mu = stationary_distribution(&c).unwrap();
        assert!((mu[0] - 0.5).abs() < 1e-12 && (mu[1] - 0.5).abs() < 1e-12);

        let c = MarkovChain::new(array![[0.9, 0.1], [0.5, 0.5]], array![1.0, 0.0], None).unwrap();
        let mu = stationary_distribution(&c).unwrap();
        // 0.1 mu0 = 0.5 mu1 and mu0 + mu1 = 1
        assert!((mu[0] - 5.0 / 6.0).abs() < 1e-12);
        assert!((mu[1] - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_rejects_reducible() {
        let c = MarkovChain::new(array![[1.0, 0.0], [0.0, 1.0]], array![0.5, 0.5], None).unwrap();
        assert!(matches!(
            stationary_distribution(&c),
            Err(Error::NonUniqueStationary)
        ));
    }

    #[test]
    fn stationary_accepts_transient_states() {
        // one closed class {1} plus transient state 0
        let c = MarkovChain::new(array![[0.5, 0.5], [0.0, 1.0]], array![1.0, 0.0], None).unwrap();
        let mu = stationary_distribution(&c).unwrap();
        assert!(mu[0].abs() < 1e-12 && (mu[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn structure_examples() {
        let c = MarkovChain::new(array![[0.0, 1.0], [1.0, 0.0]], array![1.0, 0.0], None).unwrap();
        let r = structure_check(&c);
        assert!(r.irreducible && !r.aperiodic);

        let c = MarkovChain::new(array![[0.5, 0.5], [0.5, 0.5]], array![1.0, 0.0], None).unwrap();
        let r = structure_check(&c);
        assert!(r.irreducible && r.aperiodic);
        assert_eq!(r.max_out_degree, 2);

        let c = MarkovChain::new(array![[1.0, 0.0], [0.0, 1.0]], array![1.0, 0.0], None).unwrap();
        let r = structure_check(&c);
        assert!(!r.irreducible);
        assert_eq!(r.dangling, vec![0, 1]);
    }

    #[test]
    fn three_cycle_with_chord_is_aperiodic() {
        // cycles of length 3 and 2 through state 0
        let c = MarkovChain::new(
            array![[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [1.0, 0.0, 0.0]],
            array![1.0, 0.0, 0.0],
            None,
        )
        .unwrap();
        let r = structure_check(&c);
        assert!(r.irreducible && r.aperiodic);
        assert_eq!(r.support_sizes, vec![2, 2, 1]);
    }
}
