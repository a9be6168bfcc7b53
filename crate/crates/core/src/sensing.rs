//! Sparse-Bernoulli sensing matrices and their bipartite graphs.
//!
//! The matrix `Φ ∈ {0, ±1}^{M×N}` is stored as an edge list with two indexed
//! views, one per endpoint, because belief propagation walks the edges both
//! from the signal side and from the measurement side.

use std::io::{BufRead, Write};

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::model::rng_from_seed;

/// One nonzero entry `φ_{row,col} = sign`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub row: usize,
    pub col: usize,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingGraph {
    n: usize,
    m: usize,
    col_weight: usize,
    seed: u64,
    /// Sorted by `(col, row)`; the position is the edge id.
    edges: Vec<Edge>,
    row_adj: Vec<Vec<usize>>,
    col_adj: Vec<Vec<usize>>,
}

/// Column-subselected graph plus the reindexing `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSubgraph {
    pub graph: SensingGraph,
    /// `columns[h(i)] = i` for every selected original column `i`.
    pub columns: Vec<usize>,
}

impl SensingGraph {
    /// Random graph with exactly `l` distinct rows per column and
    /// equiprobable signs.
    pub fn generate(n: usize, m: usize, l: usize, seed: u64) -> Result<Self> {
        if l == 0 || l > m {
            return Err(Error::InvalidParameter(format!(
                "column weight {l} must satisfy 1 <= l <= m = {m}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("graph needs at least one column".into()));
        }
        let mut rng = rng_from_seed(seed);
        let mut edges = Vec::with_capacity(n * l);
        for col in 0..n {
            for row in sample(&mut rng, m, l).iter() {
                let sign = if rng.random_bool(0.5) { 1 } else { -1 };
                edges.push(Edge { row, col, sign });
            }
        }
        let mut g = Self::from_edges(n, m, edges)?;
        g.seed = seed;
        Ok(g)
    }

    /// Builds a graph from explicit entries. Column weights may differ; the
    /// recorded column weight is the largest one.
    pub fn from_edges(n: usize, m: usize, mut edges: Vec<Edge>) -> Result<Self> {
        for e in &edges {
            if e.row >= m || e.col >= n {
                return Err(Error::InvalidParameter(format!(
                    "entry ({}, {}) outside {m}x{n}",
                    e.row, e.col
                )));
            }
            if e.sign != 1 && e.sign != -1 {
                return Err(Error::InvalidParameter(format!("entry sign {} not ±1", e.sign)));
            }
        }
        edges.sort_by_key(|e| (e.col, e.row));
        if edges.windows(2).any(|w| w[0].col == w[1].col && w[0].row == w[1].row) {
            return Err(Error::InvalidParameter("duplicate matrix entry".into()));
        }
        let mut row_adj = vec![Vec::new(); m];
        let mut col_adj = vec![Vec::new(); n];
        for (id, e) in edges.iter().enumerate() {
            row_adj[e.row].push(id);
            col_adj[e.col].push(id);
        }
        let col_weight = col_adj.iter().map(Vec::len).max().unwrap_or(0);
        Ok(Self {
            n,
            m,
            col_weight,
            seed: 0,
            edges,
            row_adj,
            col_adj,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn col_weight(&self) -> usize {
        self.col_weight
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> Edge {
        self.edges[id]
    }

    /// Edge ids incident to measurement `row`, in increasing column order.
    pub fn row_edges(&self, row: usize) -> &[usize] {
        &self.row_adj[row]
    }

    /// Edge ids incident to signal element `col`, in increasing row order.
    pub fn col_edges(&self, col: usize) -> &[usize] {
        &self.col_adj[col]
    }

    /// `(col, sign)` pairs of a row.
    pub fn row_neighbors(&self, row: usize) -> impl Iterator<Item = (usize, i8)> + '_ {
        self.row_adj[row].iter().map(|&e| (self.edges[e].col, self.edges[e].sign))
    }

    /// `(row, sign)` pairs of a column.
    pub fn col_neighbors(&self, col: usize) -> impl Iterator<Item = (usize, i8)> + '_ {
        self.col_adj[col].iter().map(|&e| (self.edges[e].row, self.edges[e].sign))
    }

    pub fn is_regular(&self) -> bool {
        self.col_adj.iter().all(|c| c.len() == self.col_weight)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        Ok((0..self.m)
            .map(|j| {
                self.row_neighbors(j)
                    .map(|(i, s)| f64::from(s) * x[i])
                    .sum()
            })
            .collect())
    }

    /// `Φᵀy`.
    pub fn matvec_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.m, y.len())?;
        Ok((0..self.n)
            .map(|i| {
                self.col_neighbors(i)
                    .map(|(j, s)| f64::from(s) * y[j])
                    .sum()
            })
            .collect())
    }

    /// Row-major dense copy of the matrix.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n]; self.m];
        for e in &self.edges {
            dense[e.row][e.col] = f64::from(e.sign);
        }
        dense
    }

    /// Keeps the columns whose state is set, reindexed in increasing order.
    pub fn submatrix_on_support(&self, states: &[bool]) -> Result<SupportSubgraph> {
        check_len(self.n, states.len())?;
        let columns: Vec<usize> = (0..self.n).filter(|&i| states[i]).collect();
        if columns.is_empty() {
            return Err(Error::EmptySupport);
        }
        let mut h = vec![usize::MAX; self.n];
        for (k, &i) in columns.iter().enumerate() {
            h[i] = k;
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| states[e.col])
            .map(|e| Edge {
                row: e.row,
                col: h[e.col],
                sign: e.sign,
            })
            .collect();
        let mut graph = Self::from_edges(columns.len(), self.m, edges)?;
        graph.seed = self.seed;
        Ok(SupportSubgraph { graph, columns })
    }

    /// `‖Φx̂ - z‖₂`.
    pub fn residual_norm(&self, x_hat: &[f64], z: &[f64]) -> Result<f64> {
        check_len(self.m, z.len())?;
        let fit = self.matvec(x_hat)?;
        Ok(fit
            .iter()
            .zip(z)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt())
    }

    /// Text form: header `n m l seed`, then one `j i sign` line per entry
    /// sorted by `(j, i)`.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {} {} {}", self.n, self.m, self.col_weight, self.seed)?;
        let mut sorted = self.edges.clone();
        sorted.sort();
        for e in sorted {
            writeln!(out, "{} {} {}", e.row, e.col, e.sign)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing header line".into()))??;
        let head: Vec<u64> = header
            .split_whitespace()
            .map(|t| t.parse::<u64>().map_err(|e| Error::Parse(format!("header: {e}"))))
            .collect::<Result<_>>()?;
        let [n, m, l, seed] = head[..] else {
            return Err(Error::Parse(format!("header must have 4 fields: '{header}'")));
        };
        let mut edges = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let parse_err = |what: &str| Error::Parse(format!("line {}: bad {what}", lineno + 2));
            if f.len() != 3 {
                return Err(parse_err("entry"));
            }
            edges.push(Edge {
                row: f[0].parse().map_err(|_| parse_err("row"))?,
                col: f[1].parse().map_err(|_| parse_err("column"))?,
                sign: f[2].parse().map_err(|_| parse_err("sign"))?,
            });
        }
        let mut g = Self::from_edges(n as usize, m as usize, edges)?;
        if g.col_weight != l as usize {
            return Err(Error::Parse(format!(
                "header column weight {l} disagrees with entries ({})",
                g.col_weight
            )));
        }
        g.seed = seed;
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Hand-built N=6, M=4, L=2 topology.
    pub(crate) fn toy() -> SensingGraph {
        let e = |row, col, sign| Edge { row, col, sign };
        SensingGraph::from_edges(
            6,
            4,
            vec![
                e(0, 0, 1),
                e(1, 0, -1),
                e(0, 1, 1),
                e(2, 1, 1),
                e(1, 2, -1),
                e(3, 2, 1),
                e(2, 3, -1),
                e(3, 3, -1),
                e(0, 4, 1),
                e(3, 4, 1),
                e(1, 5, 1),
                e(2, 5, -1),
            ],
        )
        .unwrap()
    }

    fn dense_matvec(d: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        d.iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    #[test]
    fn generate_shapes() {
        let g = SensingGraph::generate(1024, 512, 4, 9).unwrap();
        assert!(g.is_regular());
        assert_eq!(g.col_weight(), 4);
        assert_eq!(g.edges().len(), 4096);
        let mean_row = (0..512).map(|j| g.row_edges(j).len()).sum::<usize>() as f64 / 512.0;
        assert_eq!(mean_row, 8.0);

        let full = SensingGraph::generate(10, 5, 5, 1).unwrap();
        assert!((0..5).all(|j| full.row_edges(j).len() == 10));

        let small = SensingGraph::generate(6, 4, 2, 3).unwrap();
        assert!(small.is_regular());
        assert_eq!(small.edges().len(), 12);

        assert!(SensingGraph::generate(6, 4, 5, 3).is_err());
        assert!(SensingGraph::generate(6, 4, 0, 3).is_err());
    }

    #[test]
    fn matvec_examples() {
        let g = toy();
        assert_eq!(g.matvec(&[0.0; 6]).unwrap(), vec![0.0; 4]);
        let mut e2 = vec![0.0; 6];
        e2[2] = 1.0;
        assert_eq!(g.matvec(&e2).unwrap(), vec![0.0, -1.0, 0.0, 1.0]);
        let x = [0.5, -1.25, 2.0, 3.5, -0.75, 1.0];
        // Row 0: x0 + x1 + x4; row 1: -x0 - x2 + x5; row 2: x1 - x3 - x5; row 3: x2 - x3 + x4.
        let expected = vec![-1.5, -1.5, -5.75, -2.25];
        assert_eq!(g.matvec(&x).unwrap(), expected);
        assert_eq!(dense_matvec(&g.to_dense(), &x), expected);
        assert!(g.matvec(&[1.0; 5]).is_err());
    }

    #[test]
    fn submatrix_examples() {
        let g = toy();
        let all = g.submatrix_on_support(&[true; 6]).unwrap();
        assert_eq!(all.graph.edges(), g.edges());
        assert_eq!(all.columns, (0..6).collect::<Vec<_>>());
        assert!(matches!(g.submatrix_on_support(&[false; 6]), Err(Error::EmptySupport)));
        let sub = g
            .submatrix_on_support(&[true, false, true, false, false, false])
            .unwrap();
        assert_eq!(sub.columns, vec![0, 2]);
        assert_eq!(sub.graph.n(), 2);
        assert_eq!(sub.graph.m(), 4);
        assert_eq!(sub.graph.matvec(&[1.0, 0.0]).unwrap(), vec![1.0, -1.0, 0.0, 0.0]);
        assert_eq!(sub.graph.matvec(&[0.0, 1.0]).unwrap(), vec![0.0, -1.0, 0.0, 1.0]);
    }

    #[test]
    fn residual_examples() {
        let g = toy();
        let x = [1.0, 0.0, -2.0, 0.0, 0.5, 0.0];
        let z = g.matvec(&x).unwrap();
        assert_eq!(g.residual_norm(&x, &z).unwrap(), 0.0);
        let zn = (z.iter().map(|v| v * v).sum::<f64>()).sqrt();
        assert_eq!(g.residual_norm(&[0.0; 6], &z).unwrap(), zn);
        let y = [1.0, 2.0, 3.0, 4.0];
        let fit = dense_matvec(&g.to_dense(), &x);
        let oracle = fit.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!((g.residual_norm(&x, &y).unwrap() - oracle).abs() < 1e-14);
    }

    #[test]
    fn text_format_round_trip() {
        let g = SensingGraph::generate(40, 20, 3, 77).unwrap();
        let mut buf = Vec::new();
        g.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("40 20 3 77\n"));
        let back = SensingGraph::read_text(&buf[..]).unwrap();
        assert_eq!(back, g);
        let mut again = Vec::new();
        back.write_text(&mut again).unwrap();
        assert_eq!(again, buf);
        assert!(SensingGraph::read_text(&b"1 2 3\n"[..]).is_err());
        assert!(SensingGraph::read_text(&b"2 2 1 0\n0 0 1\n0 0 -1\n"[..]).is_err());
    }
}
