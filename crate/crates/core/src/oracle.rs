//! Independent reference computations for validating the engine: brute-force
//! marginalization on small cycle-free graphs, a dense-inverse MMSE check and
//! a Monte Carlo check of the measurement density.
//!
//! The `selftest` subcommand and the test suites both run these.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bp::{self, MeasurementModel};
use crate::density::{ConvMode, DiscreteDensity, ValueGrid};
use crate::error::{check_len, Error, Result};
use crate::estimation;
use crate::model::{self, derive_seed, rng_from_seed, PriorParams};
use crate::sensing::{Edge, SensingGraph};

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Random cycle-free bipartite graph. Columns get one to three edges; an edge
/// is only added when its endpoints are not yet connected.
pub fn random_forest_graph(n: usize, m: usize, seed: u64) -> Result<SensingGraph> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter("forest needs n, m >= 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    // Union-find over columns 0..n and rows n..n+m.
    let mut parent: Vec<usize> = (0..n + m).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    let mut edges = Vec::new();
    for col in 0..n {
        let want = rng.random_range(1..=3usize.min(m));
        let mut rows: Vec<usize> = (0..m).collect();
        for k in (1..m).rev() {
            rows.swap(k, rng.random_range(0..=k));
        }
        let mut placed = 0;
        for row in rows {
            if placed == want {
                break;
            }
            let (rc, rr) = (find(&mut parent, col), find(&mut parent, n + row));
            if rc == rr {
                continue;
            }
            parent[rc] = rr;
            let sign = if rng.random_bool(0.5) { 1 } else { -1 };
            edges.push(Edge { row, col, sign });
            placed += 1;
        }
    }
    SensingGraph::from_edges(n, m, edges)
}

/// Longest shortest path, in edges, over all connected node pairs. Errors on
/// graphs with cycles.
pub fn tree_diameter(graph: &SensingGraph) -> Result<usize> {
    let (n, m) = (graph.n(), graph.m());
    if graph.edges().len() + connected_components(graph) != n + m {
        return Err(Error::InvalidParameter("graph has a cycle".into()));
    }
    let neighbors = |v: usize| -> Vec<usize> {
        if v < n {
            graph.col_neighbors(v).map(|(r, _)| n + r).collect()
        } else {
            graph.row_neighbors(v - n).map(|(c, _)| c).collect()
        }
    };
    let mut best = 0;
    for start in 0..n + m {
        let mut dist = vec![usize::MAX; n + m];
        dist[start] = 0;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for w in neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    best = best.max(dist[w]);
                    queue.push_back(w);
                }
            }
        }
    }
    Ok(best)
}

fn connected_components(graph: &SensingGraph) -> usize {
    let (n, m) = (graph.n(), graph.m());
    let mut parent: Vec<usize> = (0..n + m).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            v = parent[v];
        }
        v
    }
    let mut count = n + m;
    for e in graph.edges() {
        let (a, b) = (find(&mut parent, e.col), find(&mut parent, n + e.row));
        if a != b {
            parent[a] = b;
            count -= 1;
        }
    }
    count
}

/// Exact posterior marginals of the circular discrete model by enumerating
/// every grid configuration: prior pmf per element times, per row, the
/// Gaussian weight of the residual `z_j - Σ φ x` with its lattice part wrapped
/// into the grid span.
pub fn exhaustive_posteriors(
    graph: &SensingGraph,
    prior: &DiscreteDensity,
    z: &[f64],
    sigma_n: f64,
) -> Result<Vec<DiscreteDensity>> {
    check_len(graph.m(), z.len())?;
    let grid = *prior.grid();
    let nd = grid.len();
    let n = graph.n();
    let configs = (nd as u64)
        .checked_pow(n as u32)
        .filter(|c| *c <= 1 << 26)
        .ok_or_else(|| Error::InvalidParameter("too many configurations to enumerate".into()))?;
    let c = grid.zero_index() as i64;
    let wrap = |e: f64| {
        // Lattice part of the residual folded into the grid index range.
        let (t, r) = grid.lattice_round(e);
        ((t + c).rem_euclid(nd as i64) - c) as f64 * grid.step() + r
    };
    let rows: Vec<Vec<(usize, f64)>> = (0..graph.m())
        .map(|j| graph.row_neighbors(j).map(|(c, s)| (c, f64::from(s))).collect())
        .collect();
    let mut marg = vec![vec![0.0; nd]; n];
    let mut idx = vec![0usize; n];
    for _ in 0..configs {
        let mut w: f64 = idx.iter().map(|&k| prior.mass()[k]).product();
        if w > 0.0 {
            for (j, row) in rows.iter().enumerate() {
                let sum: f64 = row.iter().map(|&(c, s)| s * grid.point(idx[c])).sum();
                let e = wrap(z[j] - sum);
                w *= if sigma_n > 0.0 {
                    (-0.5 * (e / sigma_n).powi(2)).exp()
                } else {
                    f64::from(u8::from(e.abs() < 0.5 * grid.step()))
                };
            }
            for (i, &k) in idx.iter().enumerate() {
                marg[i][k] += w;
            }
        }
        for d in idx.iter_mut() {
            *d += 1;
            if *d < nd {
                break;
            }
            *d = 0;
        }
    }
    marg.into_iter()
        .map(|mass| DiscreteDensity::from_mass(grid, mass)?.normalized())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExhaustiveReport {
    pub instances: usize,
    pub max_tv: f64,
    pub degenerate: usize,
}

/// BP on random forests against exhaustive marginalization (`N ≤ 5`,
/// `M ≤ 4`, 16-point grid), running diameter-many sweeps per instance.
pub fn exhaustive_check(instances: usize, seed: u64) -> Result<ExhaustiveReport> {
    let grid = ValueGrid::for_signal(16, 1.0)?;
    let mut report = ExhaustiveReport {
        instances,
        max_tv: 0.0,
        degenerate: 0,
    };
    for t in 0..instances {
        let s = derive_seed(seed, &[t as u64]);
        let mut rng = rng_from_seed(s);
        let n = rng.random_range(2..=5);
        let m = rng.random_range(1..=4);
        let q = rng.random_range(0.2..0.6);
        let sigma_n = rng.random_range(0.3..1.0);
        let params = PriorParams::new(q, 1.0, sigma_n)?;
        let graph = random_forest_graph(n, m, derive_seed(s, &[1]))?;
        let signal = model::generate_signal(n, &params, &grid, derive_seed(s, &[2]));
        let meas = model::sense(&signal, &graph, sigma_n, derive_seed(s, &[3]))?;
        let prior = DiscreteDensity::spike_slab_prior(grid, &params)?;

        let exact = exhaustive_posteriors(&graph, &prior, &meas.z, sigma_n)?;
        let model = MeasurementModel::new(grid, &meas.z, sigma_n, ConvMode::Circular)?;
        let mut msgs = bp::init_messages(&graph, &grid);
        for _ in 0..tree_diameter(&graph)?.max(1) {
            bp::run_iteration(&graph, &prior, &model, &mut msgs, 0.0)?;
        }
        report.degenerate += msgs.counters.degenerate;
        let post = msgs.posteriors.expect("posteriors computed by a sweep");
        for (p, e) in post.iter().zip(&exact) {
            report.max_tv = report.max_tv.max(total_variation(p.mass(), e.mass()));
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmseReport {
    pub instances: usize,
    pub max_rel_diff: f64,
    pub max_gradient: f64,
}

/// Structured MMSE solve against the dense-inverse oracle on random
/// supports of size at most 16.
pub fn dense_mmse_check(instances: usize, seed: u64) -> Result<MmseReport> {
    let mut report = MmseReport {
        instances,
        max_rel_diff: 0.0,
        max_gradient: 0.0,
    };
    for t in 0..instances {
        let s = derive_seed(seed, &[t as u64]);
        let mut rng = rng_from_seed(s);
        let k = rng.random_range(1..=16);
        let m = rng.random_range(4..=24);
        let l = rng.random_range(1..=m.min(4));
        let prior = PriorParams::new(0.1, rng.random_range(1.0..10.0), rng.random_range(0.5..2.0))?;
        let graph = SensingGraph::generate(k, m, l, derive_seed(s, &[1]))?;
        let z: Vec<f64> = (0..m)
            .map(|_| {
                let w: f64 = StandardNormal.sample(&mut rng);
                10.0 * w
            })
            .collect();
        let fast = estimation::mmse_on_support(&graph, &z, &prior)?;
        let slow = estimation::mmse_oracle_dense(&graph, &z, &prior)?;
        let diff = fast.iter().zip(&slow).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = slow.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        report.max_rel_diff = report.max_rel_diff.max(diff / scale);
        let grad = estimation::objective_gradient(&graph, &z, &prior, &fast)?;
        report.max_gradient = grad.iter().fold(report.max_gradient, |acc, g| acc.max(g.abs()));
    }
    Ok(report)
}

/// Monte Carlo check of one row's measurement density.
///
/// For a random row with mixed signs, fixes `x_i` and draws the other
/// neighbors from their signal messages plus Gaussian noise; the histogram
/// of `z_j` over lattice bins (wrapped into the grid span) is compared with
/// the engine's likelihood evaluated at every lattice value of `z_j`.
/// Returns the total variation distance per configuration.
pub fn measurement_density_check(configs: usize, draws: usize, seed: u64) -> Result<Vec<f64>> {
    let grid = ValueGrid::for_signal(64, 10.0)?;
    let nd = grid.len();
    let c = grid.zero_index() as i64;
    let mut out = Vec::with_capacity(configs);
    for t in 0..configs {
        let s = derive_seed(seed, &[t as u64]);
        let mut rng = rng_from_seed(s);
        let w = rng.random_range(2..=6);
        let mut signs: Vec<i8> = (0..w).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
        // Guarantee both signs appear among the other neighbors.
        if w >= 3 {
            signs[1] = 1;
            signs[2] = -1;
        }
        let edges: Vec<Edge> = signs
            .iter()
            .enumerate()
            .map(|(col, &sign)| Edge { row: 0, col, sign })
            .collect();
        let graph = SensingGraph::from_edges(w, 1, edges)?;
        let sigma_n = rng.random_range(1.0..3.0) * grid.step();
        let a: Vec<DiscreteDensity> = (0..w)
            .map(|_| {
                let q = rng.random_range(0.1..0.6);
                let sigma = rng.random_range(3.0..10.0);
                let mean = rng.random_range(-5.0..5.0);
                let slab = DiscreteDensity::gaussian(grid, mean, sigma)?;
                let mut mass: Vec<f64> = slab.mass().iter().map(|m| q * m).collect();
                mass[c as usize] += 1.0 - q;
                Ok(DiscreteDensity::from_mass_unchecked(grid, mass))
            })
            .collect::<Result<_>>()?;
        let fixed = rng.random_range(0..nd);
        let x_i = grid.point(fixed);

        // Engine: likelihood of every lattice measurement value.
        let mut computed = vec![0.0; nd];
        for (u, slot) in computed.iter_mut().enumerate() {
            let z = [grid.point(u)];
            let model = MeasurementModel::new(grid, &z, sigma_n, ConvMode::Circular)?;
            *slot = bp::row_likelihoods(&graph, 0, &a, &model)[0][fixed];
        }
        let total: f64 = computed.iter().sum();
        computed.iter_mut().for_each(|v| *v /= total);

        // Monte Carlo histogram.
        let cdfs: Vec<Vec<f64>> = a
            .iter()
            .map(|d| {
                d.mass()
                    .iter()
                    .scan(0.0, |acc, m| {
                        *acc += m;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        let mut hist = vec![0.0; nd];
        for _ in 0..draws {
            let mut z = f64::from(signs[0]) * x_i;
            for k in 1..w {
                let u: f64 = rng.random::<f64>() * cdfs[k][nd - 1];
                let idx = cdfs[k].partition_point(|v| *v < u).min(nd - 1);
                z += f64::from(signs[k]) * grid.point(idx);
            }
            let noise: f64 = StandardNormal.sample(&mut rng);
            z += sigma_n * noise;
            let (lattice, _) = grid.lattice_round(z);
            hist[(lattice + c).rem_euclid(nd as i64) as usize] += 1.0;
        }
        hist.iter_mut().for_each(|v| *v /= draws as f64);
        out.push(total_variation(&computed, &hist));
    }
    Ok(out)
}
