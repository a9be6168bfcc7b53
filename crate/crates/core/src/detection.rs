//! Bayesian hypothesis test turning posteriors into support states.
//!
//! For each element the test compares the prior-stripped posterior odds
//!
//! ```text
//!   Σ_k w0[k]·post[k]  /  Σ_k w1[k]·post[k]   against   γ = q/(1-q)
//! ```
//!
//! with `w0 = f(x|s=0)/f(x)` and `w1 = f(x|s=1)/f(x)` evaluated bin by bin on
//! the same discretization as the prior density. `w0` is nonzero only at the
//! zero bin, so the numerator is a single-bin read.

use crate::density::{DiscreteDensity, ValueGrid};
use crate::error::{Error, Result};
use crate::model::PriorParams;

const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BhtWeights {
    pub w0: Vec<f64>,
    pub w1: Vec<f64>,
    pub gamma: f64,
    zero_index: usize,
}

/// Detected states plus the number of elements whose denominator vanished
/// (posterior entirely on the spike).
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub states: Vec<bool>,
    pub spike_only: usize,
}

pub fn build_weights(grid: &ValueGrid, prior: &PriorParams) -> Result<BhtWeights> {
    let q = prior.q();
    let slab = DiscreteDensity::gaussian(*grid, 0.0, prior.sigma_x())?;
    let zero = grid.zero_index();
    let mut w0 = vec![0.0; grid.len()];
    let mut w1 = vec![0.0; grid.len()];
    for (k, &s) in slab.mass().iter().enumerate() {
        let spike = if k == zero { 1.0 } else { 0.0 };
        let mix = q * s + (1.0 - q) * spike;
        w0[k] = spike / mix;
        w1[k] = s / mix;
    }
    Ok(BhtWeights {
        w0,
        w1,
        gamma: q / (1.0 - q),
        zero_index: zero,
    })
}

impl BhtWeights {
    /// Prior-stripped posterior odds of "zero" versus "nonzero". Infinite
    /// when the posterior carries no mass off the spike.
    pub fn ratio(&self, posterior: &DiscreteDensity) -> f64 {
        let mass = posterior.mass();
        let num = self.w0[self.zero_index] * mass[self.zero_index];
        let den: f64 = self.w1.iter().zip(mass).map(|(w, p)| w * p).sum();
        if den > 0.0 {
            num / den
        } else {
            f64::INFINITY
        }
    }

    /// `true` (nonzero) when the ratio falls strictly below γ. Ratios equal
    /// to γ up to round-off count as ties and resolve to zero.
    pub fn decide(&self, ratio: f64) -> bool {
        ratio < self.gamma * (1.0 - TIE_TOLERANCE)
    }
}

pub fn detect_states(posteriors: &[DiscreteDensity], weights: &BhtWeights) -> Result<Detection> {
    let mut spike_only = 0;
    let mut states = Vec::with_capacity(posteriors.len());
    for p in posteriors {
        if p.mass().len() != weights.w0.len() {
            return Err(Error::GridMismatch);
        }
        let r = weights.ratio(p);
        if r.is_infinite() {
            spike_only += 1;
        }
        states.push(weights.decide(r));
    }
    Ok(Detection { states, spike_only })
}

/// Raw odds per element, for logging.
pub fn detection_rationale_report(posteriors: &[DiscreteDensity], weights: &BhtWeights) -> Vec<f64> {
    posteriors.iter().map(|p| weights.ratio(p)).collect()
}
