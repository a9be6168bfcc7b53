//! The outer reconstruction loop: belief propagation, support detection and
//! MMSE estimation, repeated until the residual reaches the noise floor.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use crate::bp::{self, MeasurementModel};
use crate::density::{ConvMode, DiscreteDensity, ValueGrid};
use crate::detection;
use crate::error::{check_len, Error, Result};
use crate::estimation;
use crate::model::PriorParams;
use crate::sensing::SensingGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct CsBsdConfig {
    /// Residual tolerance; `None` uses [`stopping_epsilon_default`].
    pub epsilon: Option<f64>,
    pub max_iters: usize,
    pub n_d: usize,
    pub conv_mode: ConvMode,
    /// Blend factor for signal messages, 0 disables damping.
    pub damping: f64,
    /// Run all `max_iters` sweeps regardless of the residual.
    pub fixed_iterations: bool,
    /// Only stop once the detected support repeats between two consecutive
    /// sweeps, in addition to the residual test.
    pub require_stable_support: bool,
    /// Return the iterate with the smallest residual instead of the last one.
    pub keep_best: bool,
    /// Skip the per-sweep MMSE solve and estimate once after the last
    /// sweep. Implies `fixed_iterations`; the residual trace then holds only
    /// the final residual.
    pub defer_mmse: bool,
    /// Keep the full estimate of every iteration in the result.
    pub record_iterates: bool,
    /// Write per-iteration posteriors as CSV to this path.
    pub debug_dump: Option<PathBuf>,
}

impl Default for CsBsdConfig {
    fn default() -> Self {
        Self {
            epsilon: None,
            max_iters: 10,
            n_d: 64,
            conv_mode: ConvMode::Circular,
            damping: 0.0,
            fixed_iterations: false,
            require_stable_support: false,
            keep_best: false,
            defer_mmse: false,
            record_iterates: false,
            debug_dump: None,
        }
    }
}

impl CsBsdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if let Some(eps) = self.epsilon {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(Error::InvalidParameter(format!("epsilon {eps} must be non-negative")));
            }
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidParameter(format!("damping {} outside [0,1)", self.damping)));
        }
        Ok(())
    }
}

/// Anomaly counters accumulated over one reconstruction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Warnings {
    /// Measurements outside the grid span (wrapped or clamped).
    pub range_clamps: usize,
    /// Degenerate messages or posteriors replaced during BP.
    pub degenerate: usize,
    /// Iterations whose detected support was empty.
    pub empty_support: usize,
    /// Iterations whose detected support exceeded the measurement count.
    pub overcomplete: usize,
    /// Detections where the posterior sat entirely on the spike.
    pub spike_only: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconResult {
    pub estimate: Vec<f64>,
    pub states: Vec<bool>,
    pub iterations_run: usize,
    pub residual_trace: Vec<f64>,
    /// Set when BP had to repair degenerate messages.
    pub diverged: bool,
    pub warnings: Warnings,
    /// Per-iteration estimates, filled when requested.
    pub iterates: Vec<Vec<f64>>,
}

/// Noise-floor residual `√M·σ_n` with 10% headroom.
pub fn stopping_epsilon_default(m: usize, sigma_n: f64) -> f64 {
    1.1 * (m as f64).sqrt() * sigma_n
}

pub fn cs_bsd(z: &[f64], graph: &SensingGraph, prior: &PriorParams, config: &CsBsdConfig) -> Result<ReconResult> {
    config.validate()?;
    check_len(graph.m(), z.len())?;
    let grid = ValueGrid::for_signal(config.n_d, prior.sigma_x())?;
    let prior_pmf = DiscreteDensity::spike_slab_prior(grid, prior)?;
    let weights = detection::build_weights(&grid, prior)?;
    let model = MeasurementModel::new(grid, z, prior.sigma_n(), config.conv_mode)?;
    let eps = config
        .epsilon
        .unwrap_or_else(|| stopping_epsilon_default(graph.m(), prior.sigma_n()));
    let fixed = config.fixed_iterations || config.defer_mmse;

    let mut dump = match &config.debug_dump {
        Some(path) => Some(BufWriter::new(File::create(path)?)),
        None => None,
    };
    let mut warnings = Warnings {
        range_clamps: model.range_warnings(),
        ..Warnings::default()
    };
    let mut msgs = bp::init_messages(graph, &grid);
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut current: Option<estimation::SupportEstimate> = None;
    let mut best: Option<(f64, estimation::SupportEstimate)> = None;
    let mut iterations_run = 0;
    let mut previous_states: Option<Vec<bool>> = None;

    for iter in 1..=config.max_iters {
        bp::run_iteration(graph, &prior_pmf, &model, &mut msgs, config.damping)?;
        iterations_run = iter;
        let posteriors = msgs.posteriors.as_ref().expect("posteriors computed by a sweep");
        if let Some(out) = dump.as_mut() {
            bp::write_posteriors_csv(out, iter, posteriors, iter == 1)?;
        }
        let det = detection::detect_states(posteriors, &weights)?;
        warnings.spike_only += det.spike_only;
        if config.defer_mmse && iter < config.max_iters {
            continue;
        }
        let k = det.states.iter().filter(|s| **s).count();
        if k == 0 {
            warnings.empty_support += 1;
        }
        if k > graph.m() {
            warnings.overcomplete += 1;
        }
        let est = estimation::estimate_on_states(graph, z, prior, &det.states)?;
        let residual = graph.residual_norm(&est.full_estimate, z)?;
        trace.push(residual);
        if config.record_iterates {
            iterates.push(est.full_estimate.clone());
        }
        if config.keep_best && best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, est.clone()));
        }
        let stable = !config.require_stable_support || previous_states.as_ref() == Some(&est.states);
        previous_states = Some(est.states.clone());
        current = Some(est);
        if !fixed && residual <= eps && stable {
            break;
        }
    }
    warnings.degenerate = msgs.counters.degenerate;

    let chosen = match best {
        Some((_, est)) if config.keep_best => est,
        _ => current.expect("at least one estimate is computed"),
    };
    Ok(ReconResult {
        estimate: chosen.full_estimate,
        states: chosen.states,
        iterations_run,
        residual_trace: trace,
        diverged: warnings.degenerate > 0,
        warnings,
        iterates,
    })
}

/// MMSE estimate with the true support handed in; no BP.
pub fn oracle_mmse(z: &[f64], graph: &SensingGraph, prior: &PriorParams, true_states: &[bool]) -> Result<ReconResult> {
    check_len(graph.m(), z.len())?;
    let est = estimation::estimate_on_states(graph, z, prior, true_states)?;
    let residual = graph.residual_norm(&est.full_estimate, z)?;
    let k = true_states.iter().filter(|s| **s).count();
    let warnings = Warnings {
        empty_support: usize::from(k == 0),
        overcomplete: usize::from(k > graph.m()),
        ..Warnings::default()
    };
    Ok(ReconResult {
        estimate: est.full_estimate,
        states: est.states,
        iterations_run: 1,
        residual_trace: vec![residual],
        diverged: false,
        warnings,
        iterates: Vec::new(),
    })
}
