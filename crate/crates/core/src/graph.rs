//! Bipartite revealed-entry graphs and their row-side projection.
//!
//! Row `i` and column `j` of the n×n target matrix are separate vertices; an
//! edge `(i, j)` means entry `M_ij` is revealed. Indices are 0-based in the API
//! and 1-based in the edge-list file format.
//!
//! The five generated families live on the 2n bipartite vertices:
//!
//! * `line`: the alternating path r1–c1–r2–c2–…–rn–cn.
//! * `star`: hub r1 joined to every column, every other row joined to c1.
//! * `grid2d` / `grid3d`: a w×h (or a×b×c) lattice with exactly 2n sites. The
//!   box is the most compact one (smallest longest side, then largest shortest
//!   side), every side must be at least 2 and the longest side may be at most
//!   twice the shortest. Sites with even coordinate sum are rows, odd sum are
//!   columns, each numbered in lexicographic site order (last axis slowest).
//!   Sizes that do not fit are rejected rather than rounded.
//! * `complete`: every entry revealed (K_{n,n}).
//!
//! These topologies are one reasonable reading of the family names; nothing
//! downstream depends on the particular labeling.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Line,
    Star,
    Grid2d,
    Grid3d,
    Complete,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Line,
        Family::Star,
        Family::Grid2d,
        Family::Grid3d,
        Family::Complete,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Line => "line",
            Family::Star => "star",
            Family::Grid2d => "grid2d",
            Family::Grid3d => "grid3d",
            Family::Complete => "complete",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

/// Bipartite graph of revealed entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevealedGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    row_nbrs: Vec<Vec<usize>>,
    col_nbrs: Vec<Vec<usize>>,
}

impl RevealedGraph {
    /// Builds a graph from 0-based `(row, col)` pairs.
    ///
    /// Only well-formedness is checked here (n ≥ 1, indices in range, no
    /// duplicates). Degree and connectivity requirements are checked by
    /// [`RevealedGraph::require_valid_mask`].
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({}, {}) out of range for n = {n}",
                    i + 1,
                    j + 1
                )));
            }
            if !set.insert((i, j)) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate edge ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut row_nbrs = vec![Vec::new(); n];
        let mut col_nbrs = vec![Vec::new(); n];
        for &(i, j) in &edges {
            row_nbrs[i].push(j);
            col_nbrs[j].push(i);
        }
        for c in &mut col_nbrs {
            c.sort_unstable();
        }
        Ok(RevealedGraph {
            n,
            edges,
            row_nbrs,
            col_nbrs,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sorted 0-based `(row, col)` pairs.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Columns revealed in row `i`.
    pub fn row_neighbors(&self, i: usize) -> &[usize] {
        &self.row_nbrs[i]
    }

    /// Rows revealed in column `j`.
    pub fn col_neighbors(&self, j: usize) -> &[usize] {
        &self.col_nbrs[j]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.row_nbrs
            .get(i)
            .is_some_and(|cols| cols.binary_search(&j).is_ok())
    }

    /// The n×n 0/1 adjacency matrix `A`.
    pub fn adjacency(&self) -> Matrix {
        let mut a = Matrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
        }
        a
    }

    fn neighbors_of(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.n;
        let (list, offset) = if v < n {
            (&self.row_nbrs[v], n)
        } else {
            (&self.col_nbrs[v - n], 0)
        };
        list.iter().map(move |&w| w + offset)
    }

    fn degree_of(&self, v: usize) -> usize {
        if v < self.n {
            self.row_nbrs[v].len()
        } else {
            self.col_nbrs[v - self.n].len()
        }
    }

    /// BFS distances from bipartite vertex `src` (rows `0..n`, columns `n..2n`).
    fn bfs(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; 2 * self.n];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(v) = queue.pop_front() {
            let dv = dist[v].unwrap_or(0);
            for w in self.neighbors_of(v) {
                if dist[w].is_none() {
                    dist[w] = Some(dv + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// True iff the bipartite graph on all 2n vertices is connected.
    pub fn is_connected(&self) -> bool {
        self.bfs(0).iter().all(Option::is_some)
    }

    pub fn max_degree(&self) -> usize {
        (0..2 * self.n).map(|v| self.degree_of(v)).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        (0..2 * self.n).map(|v| self.degree_of(v)).min().unwrap_or(0)
    }

    /// Maximum degree `Δ` and diameter `d` of the bipartite graph.
    pub fn stats(&self) -> Result<GraphStats> {
        let mut diameter = 0;
        for v in 0..2 * self.n {
            for d in self.bfs(v) {
                diameter = diameter.max(d.ok_or(Error::Disconnected)?);
            }
        }
        Ok(GraphStats {
            max_degree: self.max_degree(),
            diameter,
        })
    }

    /// Checks the preconditions every completion run needs: every row and
    /// column has a revealed entry and the graph is connected.
    pub fn require_valid_mask(&self) -> Result<()> {
        for i in 0..self.n {
            if self.row_nbrs[i].is_empty() {
                return Err(Error::IsolatedNode(format!("row {}", i + 1)));
            }
            if self.col_nbrs[i].is_empty() {
                return Err(Error::IsolatedNode(format!("column {}", i + 1)));
            }
        }
        if !self.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(())
    }

    /// Rows sharing at least one column neighbor, including each row with itself.
    pub fn project_rows(&self) -> RowProjectionGraph {
        let mut edges = BTreeSet::new();
        for rows in &self.col_nbrs {
            for (a, &i1) in rows.iter().enumerate() {
                for &i2 in &rows[a..] {
                    edges.insert((i1.min(i2), i1.max(i2)));
                }
            }
        }
        RowProjectionGraph { n: self.n, edges }
    }

    /// Parses the edge-list text format: a header line `n <value>` followed
    /// by one 1-based `i j` pair per line. Blank lines and `#` comments are
    /// ignored.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .enumerate()
            .filter(|(_, l)| !l.is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let mut parts = header.split_whitespace();
        let n = match (parts.next(), parts.next(), parts.next()) {
            (Some("n"), Some(v), None) => v
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad n `{v}`: {e}")))?,
            _ => return Err(Error::Parse(format!("expected `n <value>`, got `{header}`"))),
        };
        let mut edges = Vec::new();
        for (lineno, line) in lines {
            let nums: Vec<&str> = line.split_whitespace().collect();
            let [i, j] = nums.as_slice() else {
                return Err(Error::Parse(format!(
                    "line {}: expected `i j`, got `{line}`",
                    lineno + 1
                )));
            };
            let parse = |s: &str| -> Result<usize> {
                match s.parse::<usize>() {
                    Ok(0) | Err(_) => Err(Error::Parse(format!(
                        "line {}: `{s}` is not a 1-based index",
                        lineno + 1
                    ))),
                    Ok(v) => Ok(v - 1),
                }
            };
            edges.push((parse(i)?, parse(j)?));
        }
        RevealedGraph::new(n, edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n {}\n", self.n);
        for &(i, j) in &self.edges {
            out.push_str(&format!("{} {}\n", i + 1, j + 1));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub max_degree: usize,
    pub diameter: usize,
}

/// Row graph `G_P`: rows `i1`, `i2` are adjacent iff they share a column.
/// Self-loops are explicit, matching the positive diagonal of the
/// consensus matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowProjectionGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl RowProjectionGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Unordered pairs stored as `(min, max)`.
    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn contains(&self, i1: usize, i2: usize) -> bool {
        self.edges.contains(&(i1.min(i2), i1.max(i2)))
    }

    pub fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Generates one of the named topologies on 2n bipartite vertices.
pub fn generate_family(family: Family, n: usize) -> Result<RevealedGraph> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let edges: Vec<(usize, usize)> = match family {
        Family::Line => (0..n)
            .map(|i| (i, i))
            .chain((1..n).map(|i| (i, i - 1)))
            .collect(),
        Family::Star => (0..n)
            .map(|j| (0, j))
            .chain((1..n).map(|i| (i, 0)))
            .collect(),
        Family::Complete => (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect(),
        Family::Grid2d => {
            let dims = lattice_dims::<2>(2 * n).ok_or_else(|| Error::DimensionIncompatible {
                family: "grid2d",
                n,
                reason: format!("2n = {} has no w×h box with 2 ≤ w ≤ h ≤ 2w", 2 * n),
            })?;
            lattice_edges(&dims)
        }
        Family::Grid3d => {
            let dims = lattice_dims::<3>(2 * n).ok_or_else(|| Error::DimensionIncompatible {
                family: "grid3d",
                n,
                reason: format!("2n = {} has no a×b×c box with 2 ≤ a ≤ b ≤ c ≤ 2a", 2 * n),
            })?;
            lattice_edges(&dims)
        }
    };
    RevealedGraph::new(n, edges)
}

/// Side lengths (ascending) of the most compact D-dimensional box holding
/// exactly `size` sites, or `None` when no box satisfies the convention.
pub fn lattice_dims<const D: usize>(size: usize) -> Option<[usize; D]> {
    fn search<const D: usize>(
        remaining: usize,
        depth: usize,
        min_side: usize,
        cur: &mut [usize; D],
        best: &mut Option<[usize; D]>,
    ) {
        if depth == D - 1 {
            if remaining >= min_side {
                cur[depth] = remaining;
                let better = match best {
                    None => true,
                    Some(b) => (cur[D - 1], std::cmp::Reverse(cur[0])) < (b[D - 1], std::cmp::Reverse(b[0])),
                };
                if better {
                    *best = Some(*cur);
                }
            }
            return;
        }
        let mut s = min_side;
        while s.pow((D - depth) as u32) <= remaining {
            if remaining % s == 0 {
                cur[depth] = s;
                search(remaining / s, depth + 1, s, cur, best);
            }
            s += 1;
        }
    }
    let mut best = None;
    search(size, 0, 2, &mut [0; D], &mut best);
    best.filter(|b| b[D - 1] <= 2 * b[0])
}

fn lattice_edges(dims: &[usize]) -> Vec<(usize, usize)> {
    let total: usize = dims.iter().product();
    let coords = |mut idx: usize| -> Vec<usize> {
        dims.iter()
            .map(|&d| {
                let c = idx % d;
                idx /= d;
                c
            })
            .collect()
    };
    // rank within parity class, in site order
    let mut label = vec![0usize; total];
    let mut counts = [0usize; 2];
    for (site, slot) in label.iter_mut().enumerate() {
        let parity = coords(site).iter().sum::<usize>() % 2;
        *slot = counts[parity];
        counts[parity] += 1;
    }
    let mut edges = Vec::new();
    let mut stride = 1;
    for &d in dims {
        for site in 0..total {
            if (site / stride) % d + 1 < d {
                let other = site + stride;
                let (even, odd) = if coords(site).iter().sum::<usize>() % 2 == 0 {
                    (site, other)
                } else {
                    (other, site)
                };
                edges.push((label[even], label[odd]));
            }
        }
        stride *= d;
    }
    edges
}
