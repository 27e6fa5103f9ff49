//! PageRank on the eigenvector circuit.
//!
//! Page indices are 0-based in memory and 1-based in edge-list files. A link
//! from page `j` to page `i` sets the citation entry `C[i][j] = 1`; the column
//! of page `j` therefore lists its outgoing links.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::circuit::{EigenSystem, OpAmpParams};
use crate::error::{Error, Result};
use crate::fdsim::{self, SimConfig, Trace};
use crate::linalg::{self, LinearMap, Matrix, SquareCoefficients, Vector};

/// Default random-walk probability.
pub const DEFAULT_P: f64 = 0.85;

/// Transition matrices up to this size are applied densely.
pub const DENSE_LIMIT: usize = 64;

/// Sparse boolean web graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CitationMatrix {
    n: usize,
    /// `(to, from)` pairs, sorted and unique.
    links: Vec<(usize, usize)>,
}

impl CitationMatrix {
    /// Builds from 0-based `(to, from)` pairs; duplicates collapse.
    pub fn new<I: IntoIterator<Item = (usize, usize)>>(n: usize, links: I) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("citation matrix needs at least one page"));
        }
        let set: BTreeSet<(usize, usize)> = links.into_iter().collect();
        if let Some(&(to, from)) = set.iter().find(|&&(t, f)| t >= n || f >= n) {
            return Err(Error::IndexOutOfRange {
                index: to.max(from),
                len: n,
            });
        }
        Ok(Self {
            n,
            links: set.into_iter().collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Unique links as 0-based `(to, from)` pairs.
    pub fn links(&self) -> &[(usize, usize)] {
        &self.links
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn contains(&self, to: usize, from: usize) -> bool {
        self.links.binary_search(&(to, from)).is_ok()
    }

    /// Number of outgoing links of each page (column sums of `C`).
    pub fn out_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(_, from) in &self.links {
            d[from] += 1;
        }
        d
    }

    /// Principal submatrix on the first `n` pages.
    pub fn subset(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n {
            return Err(Error::IndexOutOfRange { index: n, len: self.n });
        }
        Ok(Self {
            n,
            links: self
                .links
                .iter()
                .copied()
                .filter(|&(t, f)| t < n && f < n)
                .collect(),
        })
    }
}

/// Parses an edge list: one `from to` pair of 1-based page numbers per line,
/// optional `n <count>` header, blank lines and `#` comments ignored.
pub fn parse_edge_list(text: &str) -> Result<CitationMatrix> {
    let mut declared: Option<usize> = None;
    let mut links = Vec::new();
    let mut max_index = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message| Error::Parse { line: line_no, message };
        let mut tokens = line.split_whitespace();
        let first = tokens.next().unwrap_or_default();
        let second = tokens
            .next()
            .ok_or_else(|| parse_err(format!("expected two fields, found `{line}`")))?;
        if tokens.next().is_some() {
            return Err(parse_err(format!("expected two fields, found `{line}`")));
        }
        let number = |tok: &str| {
            tok.parse::<usize>()
                .map_err(|_| parse_err(format!("`{tok}` is not a non-negative integer")))
        };
        if first == "n" {
            if declared.is_some() {
                return Err(parse_err("duplicate `n` header".into()));
            }
            declared = Some(number(second)?);
            continue;
        }
        let (from, to) = (number(first)?, number(second)?);
        if from == 0 || to == 0 {
            return Err(parse_err("page numbers start at 1".into()));
        }
        max_index = max_index.max(from).max(to);
        links.push((to - 1, from - 1, line_no));
    }
    let n = match declared {
        Some(n) => {
            if let Some(&(_, _, line)) = links.iter().find(|&&(t, f, _)| t >= n || f >= n) {
                return Err(Error::Parse {
                    line,
                    message: format!("page number exceeds declared count {n}"),
                });
            }
            n
        }
        None => max_index,
    };
    CitationMatrix::new(n, links.into_iter().map(|(t, f, _)| (t, f)))
}

/// Column-stochastic PageRank matrix
///
/// ```text
/// T_ij = p C_ij / sum_i C_ij + sigma   if column j has links
///      = 1 / n                        otherwise
/// ```
///
/// with `sigma = (1 - p) / n`. Stored as the citation structure plus two
/// rank-one terms; small matrices also keep a dense copy.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    n: usize,
    p: f64,
    sigma: f64,
    out_degree: Vec<usize>,
    /// Incoming links per row, CSR style.
    row_ptr: Vec<usize>,
    sources: Vec<usize>,
    dense: Option<Matrix>,
}

/// Builds the transition matrix for random-walk probability `p`.
pub fn transition_matrix(c: &CitationMatrix, p: f64) -> Result<TransitionMatrix> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument("p must lie in (0, 1)"));
    }
    let n = c.n();
    let out_degree = c.out_degrees();
    let mut row_ptr = vec![0; n + 1];
    for &(to, _) in c.links() {
        row_ptr[to + 1] += 1;
    }
    for i in 0..n {
        row_ptr[i + 1] += row_ptr[i];
    }
    // links are sorted by (to, from), so sources come out grouped by row
    let sources = c.links().iter().map(|&(_, from)| from).collect();
    let mut t = TransitionMatrix {
        n,
        p,
        sigma: (1.0 - p) / n as f64,
        out_degree,
        row_ptr,
        sources,
        dense: None,
    };
    if n <= DENSE_LIMIT {
        t.dense = Some(t.materialize());
    }
    Ok(t)
}

impl TransitionMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn is_dangling(&self, page: usize) -> bool {
        self.out_degree[page] == 0
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let d = self.out_degree[j];
        if d == 0 {
            return 1.0 / self.n as f64;
        }
        let linked = self.sources[self.row_ptr[i]..self.row_ptr[i + 1]]
            .binary_search(&j)
            .is_ok();
        if linked {
            self.p / d as f64 + self.sigma
        } else {
            self.sigma
        }
    }

    fn materialize(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] = self.entry(i, j);
            }
        }
        m
    }

    /// Applies the sparse + rank-one form regardless of size.
    pub fn apply_structured(&self, x: &[f64], y: &mut [f64]) {
        let inv_n = 1.0 / self.n as f64;
        let mut linked_mass = 0.0;
        let mut dangling_mass = 0.0;
        for (xj, &d) in x.iter().zip(&self.out_degree) {
            if d == 0 {
                dangling_mass += xj;
            } else {
                linked_mass += xj;
            }
        }
        let offset = self.sigma * linked_mass + inv_n * dangling_mass;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &j in &self.sources[self.row_ptr[i]..self.row_ptr[i + 1]] {
                acc += x[j] / self.out_degree[j] as f64;
            }
            *yi = self.p * acc + offset;
        }
    }

    /// Sum of every column; all equal one up to rounding.
    pub fn column_sums(&self) -> Vec<f64> {
        let dense = self.to_dense();
        (0..self.n)
            .map(|j| (0..self.n).map(|i| dense[(i, j)]).sum())
            .collect()
    }
}

impl LinearMap for TransitionMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match &self.dense {
            Some(m) => m.apply(x, y),
            None => self.apply_structured(x, y),
        }
    }

    fn norm_inf(&self) -> f64 {
        // entries are positive, so absolute row sums are row sums
        self.row_sums().into_iter().fold(0.0, f64::max)
    }
}

impl SquareCoefficients for TransitionMatrix {
    fn row_sums(&self) -> Vec<f64> {
        let mut ones = vec![1.0; self.n];
        let x = ones.clone();
        self.apply_structured(&x, &mut ones);
        ones
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.entry(i, i)).collect()
    }

    fn min_entry(&self) -> f64 {
        let inv_n = 1.0 / self.n as f64;
        self.out_degree
            .iter()
            .map(|&d| match d {
                0 => inv_n,
                d if d < self.n => self.sigma,
                d => self.sigma + self.p / d as f64,
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn to_dense(&self) -> Matrix {
        match &self.dense {
            Some(m) => m.clone(),
            None => self.materialize(),
        }
    }
}

/// Importance scores and ranking produced by the circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct RankResult {
    /// Non-negative scores summing to one.
    pub scores: Vector,
    /// 0-based page indices by descending score, ties by index.
    pub order: Vec<usize>,
    pub computing_time: Option<f64>,
    /// Solution error against the power-iteration eigenvector.
    pub epsilon: f64,
}

/// Ranking by descending score; equal scores keep ascending page order.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Power-iteration scores of `t`, normalized to sum one.
pub fn oracle_scores(t: &TransitionMatrix) -> Result<Vector> {
    let (pair, _) = linalg::power_iteration_op(t, 1e-12, 1_000_000)?;
    let sum: f64 = pair.vector.iter().sum();
    Ok(Vector::from_vec_unchecked(
        pair.vector.iter().map(|v| v / sum).collect(),
    ))
}

/// Ranks pages with the circuit: `lambda_max = 1` exactly, `lambda_G = 1 - delta`.
pub fn rank(
    t: &TransitionMatrix,
    delta: f64,
    cfg: &SimConfig,
    params: OpAmpParams,
) -> Result<RankResult> {
    rank_with_trace(t, delta, cfg, params).map(|(r, _)| r)
}

/// As [`rank`], also returning the simulation trace.
pub fn rank_with_trace(
    t: &TransitionMatrix,
    delta: f64,
    cfg: &SimConfig,
    params: OpAmpParams,
) -> Result<(RankResult, Trace)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument("delta must lie in (0, 1)"));
    }
    let sys = EigenSystem::uniform(t, 1.0, delta, params)?;
    let trace = fdsim::simulate(&sys, cfg)?;
    let (oracle, _) = linalg::power_iteration_op(t, 1e-12, 1_000_000)?;
    let epsilon = linalg::solution_error(&trace.steady_state, &oracle.vector)?;
    let sum: f64 = trace.steady_state.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::ZeroVector);
    }
    let scores: Vec<f64> = trace.steady_state.iter().map(|v| v / sum).collect();
    let order = ranking(&scores);
    Ok((
        RankResult {
            scores: Vector::from_vec_unchecked(scores),
            order,
            computing_time: trace.computing_time,
            epsilon,
        },
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_pages() -> CitationMatrix {
        // page 2 links to page 1
        parse_edge_list("2 1\n").unwrap()
    }

    #[test]
    fn edge_list_direction() {
        let c = two_pages();
        assert_eq!(c.n(), 2);
        assert!(c.contains(0, 1));
        assert!(!c.contains(1, 0));
    }

    #[test]
    fn edge_list_header_comments_and_duplicates() {
        let c = parse_edge_list("# graph\nn 3\n\n1 2\n1 2\n3 3\n").unwrap();
        assert_eq!(c.n(), 3);
        assert_eq!(c.link_count(), 2);
        assert!(c.contains(2, 2));
        let empty = parse_edge_list("n 3\n").unwrap();
        assert_eq!(empty.n(), 3);
        assert_eq!(empty.link_count(), 0);
    }

    #[test]
    fn edge_list_errors_carry_line_numbers() {
        let err = parse_edge_list("1 2\n0 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_edge_list("1 2\n\n1 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = parse_edge_list("1 2 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_edge_list("n 2\n1 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(parse_edge_list("").is_err());
    }

    #[test]
    fn two_page_transition_matrix() {
        let t = transition_matrix(&two_pages(), 0.85).unwrap();
        assert!((t.sigma() - 0.075).abs() < 1e-15);
        assert_eq!(t.entry(0, 0), 0.5);
        assert_eq!(t.entry(1, 0), 0.5);
        assert!((t.entry(0, 1) - 0.925).abs() < 1e-15);
        assert!((t.entry(1, 1) - 0.075).abs() < 1e-15);
    }

    #[test]
    fn all_dangling_is_uniform() {
        let c = CitationMatrix::new(4, []).unwrap();
        let t = transition_matrix(&c, 0.85).unwrap();
        let d = t.to_dense();
        assert!(d.as_slice().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn transition_rejects_bad_p() {
        assert!(transition_matrix(&two_pages(), 1.0).is_err());
        assert!(transition_matrix(&two_pages(), 0.0).is_err());
        assert!(CitationMatrix::new(0, []).is_err());
    }

    #[test]
    fn subset_extremes() {
        let c = parse_edge_list("1 2\n2 3\n3 1\n1 1\n").unwrap();
        assert_eq!(c.subset(3).unwrap(), c);
        let one = c.subset(1).unwrap();
        assert_eq!(one.n(), 1);
        assert_eq!(one.links(), &[(0, 0)]);
        assert!(c.subset(0).is_err());
        assert!(c.subset(4).is_err());
    }

    #[test]
    fn ranking_breaks_ties_by_index() {
        assert_eq!(ranking(&[0.2, 0.4, 0.2, 0.2]), vec![1, 0, 2, 3]);
    }

    #[test]
    fn two_page_rank() {
        let t = transition_matrix(&two_pages(), 0.85).unwrap();
        let r = rank(&t, 0.003, &SimConfig::default(), OpAmpParams::default()).unwrap();
        assert_eq!(r.order, vec![0, 1]);
        // fixed point of T v = v: v1 / v2 = 0.925 / 0.5
        let exact = 1.85 / 2.85;
        assert!((r.scores[0] - exact).abs() < 2e-3, "{}", r.scores[0]);
        assert!((r.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let oracle = oracle_scores(&t).unwrap();
        assert!((oracle[0] - exact).abs() < 1e-10);
    }

    #[test]
    fn uniform_rank_for_all_dangling() {
        let t = transition_matrix(&CitationMatrix::new(5, []).unwrap(), 0.85).unwrap();
        let r = rank(&t, 0.01, &SimConfig::default(), OpAmpParams::default()).unwrap();
        for s in r.scores.iter() {
            assert!((s - 0.2).abs() < 1e-12);
        }
        assert_eq!(r.order, vec![0, 1, 2, 3, 4]);
    }
}
