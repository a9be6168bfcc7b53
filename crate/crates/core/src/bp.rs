//! Belief propagation over the sensing graph with discretized density
//! messages.
//!
//! Signal messages `a_{i→j}` are the prior times every incoming measurement
//! message except the one from `j`. Measurement messages `b_{j→i}` are the
//! likelihood `f(z_j | x_i)`: the distribution of the other terms of row `j`
//! (signed neighbor messages convolved with the noise density) evaluated at
//! `z_j - φ_ij·x_i`. Posteriors multiply the prior with all incoming
//! measurement messages.
//!
//! Each phase of a sweep is data-parallel over nodes; a sweep is flooding,
//! so all `a` are computed from the previous `b` before any `b` changes.
//!
//! `z_j` rarely falls on the grid. It is split into a lattice shift `s_j`
//! and a sub-bin remainder `r_j`; the shift is applied as an index offset and
//! the remainder is folded into a per-row noise pmf sampled at
//! `tΔ + r_j`, which keeps the discrete likelihood exact for on-grid signals.

use std::io::Write;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::density::{ConvMode, DiscreteDensity, SpectralPlan, ValueGrid};
use crate::error::{check_len, Error, Result};
use crate::sensing::SensingGraph;

/// Noise pmf and lattice shift of one measurement.
#[derive(Debug, Clone)]
pub struct RowNoise {
    pub shift: i64,
    pub noise: DiscreteDensity,
    pub out_of_range: bool,
    spectrum: Option<Vec<Complex64>>,
}

/// Per-row noise terms for a measurement vector, plus the convolution mode.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    grid: ValueGrid,
    mode: ConvMode,
    rows: Vec<RowNoise>,
    plan: SpectralPlan,
}

impl MeasurementModel {
    pub fn new(grid: ValueGrid, z: &[f64], sigma_n: f64, mode: ConvMode) -> Result<Self> {
        if !(sigma_n.is_finite() && sigma_n >= 0.0) {
            return Err(Error::InvalidParameter(format!("sigma_n {sigma_n} must be non-negative")));
        }
        let plan = SpectralPlan::new(grid.len());
        let c = grid.zero_index() as i64;
        let rows = z
            .iter()
            .map(|&zj| {
                if !zj.is_finite() {
                    return Err(Error::InvalidParameter("measurement is not finite".into()));
                }
                let (mut shift, rem) = grid.lattice_round(zj);
                let out_of_range = shift < -c || shift > c - 1;
                if out_of_range && mode == ConvMode::Linear {
                    shift = shift.clamp(-c, c - 1);
                }
                let noise = if sigma_n > 0.0 {
                    DiscreteDensity::gaussian(grid, -rem, sigma_n)?
                } else {
                    DiscreteDensity::delta_at(grid, -rem).0
                };
                let spectrum = match mode {
                    ConvMode::Circular => Some(plan.forward(noise.mass())),
                    ConvMode::Linear => None,
                };
                Ok(RowNoise {
                    shift,
                    noise,
                    out_of_range,
                    spectrum,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            mode,
            rows,
            plan,
        })
    }

    pub fn grid(&self) -> &ValueGrid {
        &self.grid
    }

    pub fn mode(&self) -> ConvMode {
        self.mode
    }

    pub fn rows(&self) -> &[RowNoise] {
        &self.rows
    }

    /// Rows whose measurement lies outside the grid span (wrapped in circular
    /// mode, clamped in linear mode).
    pub fn range_warnings(&self) -> usize {
        self.rows.iter().filter(|r| r.out_of_range).count()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BpCounters {
    /// Messages or posteriors whose product vanished and were repaired.
    pub degenerate: usize,
}

/// All messages of one BP run, indexed by edge id.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageSet {
    pub a: Option<Vec<DiscreteDensity>>,
    pub b: Vec<DiscreteDensity>,
    pub posteriors: Option<Vec<DiscreteDensity>>,
    pub counters: BpCounters,
}

/// Uniform measurement messages on every edge; nothing else set.
pub fn init_messages(graph: &SensingGraph, grid: &ValueGrid) -> MessageSet {
    MessageSet {
        a: None,
        b: vec![DiscreteDensity::uniform(*grid); graph.edges().len()],
        posteriors: None,
        counters: BpCounters::default(),
    }
}

fn product_of(prior: &DiscreteDensity, parts: impl Iterator<Item = usize>, b: &[DiscreteDensity]) -> Vec<f64> {
    let mut acc = prior.mass().to_vec();
    for e in parts {
        acc.iter_mut().zip(b[e].mass()).for_each(|(x, y)| *x *= y);
    }
    acc
}

/// Normalizes `mass`, falling back to `fallback` when nothing survived.
fn normalized_or(grid: ValueGrid, mass: Vec<f64>, fallback: &DiscreteDensity) -> (DiscreteDensity, bool) {
    match DiscreteDensity::from_mass_unchecked(grid, mass).normalized() {
        Ok(d) => (d, false),
        Err(_) => (fallback.clone(), true),
    }
}

/// `a_{i→j} = η[prior × Π_{k≠j} b_{k→i}]` on every edge. With `damping > 0`
/// the new message is blended with the previous one.
pub fn update_signal_messages(
    graph: &SensingGraph,
    prior: &DiscreteDensity,
    msgs: &mut MessageSet,
    damping: f64,
) -> Result<()> {
    check_len(graph.edges().len(), msgs.b.len())?;
    let grid = *prior.grid();
    let b = &msgs.b;
    let per_col: Vec<Vec<(usize, DiscreteDensity, bool)>> = (0..graph.n())
        .into_par_iter()
        .map(|i| {
            let edges = graph.col_edges(i);
            edges
                .iter()
                .map(|&e| {
                    let mass = product_of(prior, edges.iter().copied().filter(|&o| o != e), b);
                    let (d, bad) = normalized_or(grid, mass, prior);
                    (e, d, bad)
                })
                .collect()
        })
        .collect();
    let (mut a, blend) = match msgs.a.take() {
        Some(old) if damping > 0.0 && old.len() == graph.edges().len() => (old, true),
        _ => (vec![prior.clone(); graph.edges().len()], false),
    };
    for (e, d, bad) in per_col.into_iter().flatten() {
        msgs.counters.degenerate += usize::from(bad);
        if blend {
            let mixed: Vec<f64> = d
                .mass()
                .iter()
                .zip(a[e].mass())
                .map(|(new, old)| (1.0 - damping) * new + damping * old)
                .collect();
            a[e] = DiscreteDensity::from_mass_unchecked(grid, mixed);
        } else {
            a[e] = d;
        }
    }
    msgs.a = Some(a);
    Ok(())
}

/// Unnormalized likelihoods `f(z_j | x_i)` over the grid for every edge of
/// `row`, in row order.
pub fn row_likelihoods(
    graph: &SensingGraph,
    row: usize,
    a: &[DiscreteDensity],
    model: &MeasurementModel,
) -> Vec<Vec<f64>> {
    let grid = model.grid;
    let n = grid.len() as i64;
    let c = grid.zero_index() as i64;
    let noise = &model.rows[row];
    let edges = graph.row_edges(row);
    let signs: Vec<i8> = edges.iter().map(|&e| graph.edge(e).sign).collect();
    let w = edges.len();
    match model.mode {
        ConvMode::Circular => {
            let plan = &model.plan;
            let specs: Vec<Vec<Complex64>> = edges
                .iter()
                .zip(&signs)
                .map(|(&e, &s)| plan.forward(a[e].signed(s).mass()))
                .collect();
            let mut prefix = Vec::with_capacity(w + 1);
            prefix.push(noise.spectrum.clone().expect("circular model carries spectra"));
            for p in 0..w {
                let next: Vec<Complex64> = prefix[p].iter().zip(&specs[p]).map(|(x, y)| x * y).collect();
                prefix.push(next);
            }
            let mut suffix = vec![vec![Complex64::new(1.0, 0.0); grid.len()]; w + 1];
            for p in (0..w).rev() {
                suffix[p] = specs[p].iter().zip(&suffix[p + 1]).map(|(x, y)| x * y).collect();
            }
            (0..w)
                .map(|p| {
                    let spec: Vec<Complex64> =
                        prefix[p].iter().zip(&suffix[p + 1]).map(|(x, y)| x * y).collect();
                    let h = plan.inverse_centered(spec);
                    let sign = i64::from(signs[p]);
                    (0..n)
                        .map(|k| h[(noise.shift - sign * (k - c)).rem_euclid(n) as usize])
                        .collect()
                })
                .collect()
        }
        ConvMode::Linear => {
            let signed: Vec<DiscreteDensity> =
                edges.iter().zip(&signs).map(|(&e, &s)| a[e].signed(s)).collect();
            let conv = |x: &DiscreteDensity, y: &DiscreteDensity| {
                x.convolve_direct(y).expect("densities share the grid")
            };
            let mut prefix = Vec::with_capacity(w + 1);
            prefix.push(noise.noise.clone());
            for p in 0..w {
                let next = conv(&prefix[p], &signed[p]);
                prefix.push(next);
            }
            let mut suffix = vec![DiscreteDensity::delta_index(grid, c as usize); w + 1];
            for p in (0..w).rev() {
                suffix[p] = conv(&signed[p], &suffix[p + 1]);
            }
            (0..w)
                .map(|p| {
                    let h = conv(&prefix[p], &suffix[p + 1]);
                    let sign = i64::from(signs[p]);
                    (0..n)
                        .map(|k| {
                            let idx = (noise.shift - sign * (k - c) + c).clamp(0, n - 1);
                            h.mass()[idx as usize]
                        })
                        .collect()
                })
                .collect()
        }
    }
}

/// `b_{j→i} ∝ f(z_j | x_i)` on every edge, normalized. Vanishing likelihoods
/// are replaced by the uniform message.
pub fn update_measurement_messages(
    graph: &SensingGraph,
    model: &MeasurementModel,
    msgs: &mut MessageSet,
) -> Result<()> {
    check_len(graph.m(), model.rows.len())?;
    let a = msgs
        .a
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("signal messages not computed yet".into()))?;
    let grid = model.grid;
    let uniform = DiscreteDensity::uniform(grid);
    let per_row: Vec<Vec<(usize, DiscreteDensity, bool)>> = (0..graph.m())
        .into_par_iter()
        .map(|j| {
            row_likelihoods(graph, j, a, model)
                .into_iter()
                .zip(graph.row_edges(j))
                .map(|(mass, &e)| {
                    let (d, bad) = normalized_or(grid, mass, &uniform);
                    (e, d, bad)
                })
                .collect()
        })
        .collect();
    for (e, d, bad) in per_row.into_iter().flatten() {
        msgs.counters.degenerate += usize::from(bad);
        msgs.b[e] = d;
    }
    Ok(())
}

/// Posterior of every signal element from all incoming measurement messages.
pub fn compute_posteriors(graph: &SensingGraph, prior: &DiscreteDensity, msgs: &mut MessageSet) -> Result<()> {
    check_len(graph.edges().len(), msgs.b.len())?;
    let grid = *prior.grid();
    let b = &msgs.b;
    let results: Vec<(DiscreteDensity, bool)> = (0..graph.n())
        .into_par_iter()
        .map(|i| normalized_or(grid, product_of(prior, graph.col_edges(i).iter().copied(), b), prior))
        .collect();
    let mut posteriors = Vec::with_capacity(results.len());
    for (d, bad) in results {
        msgs.counters.degenerate += usize::from(bad);
        posteriors.push(d);
    }
    msgs.posteriors = Some(posteriors);
    Ok(())
}

/// One flooding sweep: signal messages, measurement messages, posteriors.
pub fn run_iteration(
    graph: &SensingGraph,
    prior: &DiscreteDensity,
    model: &MeasurementModel,
    msgs: &mut MessageSet,
    damping: f64,
) -> Result<()> {
    update_signal_messages(graph, prior, msgs, damping)?;
    update_measurement_messages(graph, model, msgs)?;
    compute_posteriors(graph, prior, msgs)
}

/// Appends `iteration,node,x_k,mass` rows for every posterior.
pub fn write_posteriors_csv<W: Write>(
    mut out: W,
    iteration: usize,
    posteriors: &[DiscreteDensity],
    header: bool,
) -> Result<()> {
    if header {
        writeln!(out, "iteration,node,x_k,mass")?;
    }
    for (node, p) in posteriors.iter().enumerate() {
        for (x, m) in p.grid().points().iter().zip(p.mass()) {
            writeln!(out, "{iteration},{node},{x},{m}")?;
        }
    }
    Ok(())
}
