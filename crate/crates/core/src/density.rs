//! Discretized probability densities on a shared uniform value grid.
//!
//! Every density is a probability mass function over `n_d` grid points
//! `x_k = (k - n_d/2)·Δ`, so the value zero sits exactly on index `n_d/2`.
//! Convolution comes in two flavours: a direct linear convolution that piles
//! out-of-range mass onto the boundary bins, and a transform-based circular
//! convolution in which sums wrap modulo the grid span.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::model::PriorParams;

/// Uniform grid shared by all densities of one reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueGrid {
    n_d: usize,
    half_range: f64,
    step: f64,
}

impl ValueGrid {
    pub fn new(n_d: usize, half_range: f64) -> Result<Self> {
        if n_d < 2 || !n_d.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "grid size {n_d} must be a power of two >= 2"
            )));
        }
        if !(half_range.is_finite() && half_range > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid half range {half_range} must be positive"
            )));
        }
        Ok(Self {
            n_d,
            half_range,
            step: 2.0 * half_range / n_d as f64,
        })
    }

    /// Grid spanning `±3σ_x`, the clipping bound of the signal ensemble.
    pub fn for_signal(n_d: usize, sigma_x: f64) -> Result<Self> {
        Self::new(n_d, 3.0 * sigma_x)
    }

    pub fn len(&self) -> usize {
        self.n_d
    }

    pub fn is_empty(&self) -> bool {
        self.n_d == 0
    }

    pub fn half_range(&self) -> f64 {
        self.half_range
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn zero_index(&self) -> usize {
        self.n_d / 2
    }

    pub fn point(&self, k: usize) -> f64 {
        (k as f64 - self.zero_index() as f64) * self.step
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_d).map(|k| self.point(k)).collect()
    }

    /// Splits `value` into the nearest lattice offset `s` (ties toward the
    /// lower point) and the remainder `value - s·Δ`.
    pub fn lattice_round(&self, value: f64) -> (i64, f64) {
        let s = (value / self.step - 0.5).ceil() as i64;
        (s, value - s as f64 * self.step)
    }

    /// Index of the grid point nearest to `value`, clamped to the grid.
    /// The flag reports whether clamping happened.
    pub fn nearest_index(&self, value: f64) -> (usize, bool) {
        let (s, _) = self.lattice_round(value);
        let idx = s + self.zero_index() as i64;
        if idx < 0 {
            (0, true)
        } else if idx >= self.n_d as i64 {
            (self.n_d - 1, true)
        } else {
            (idx as usize, false)
        }
    }
}

/// Convolution realization used for measurement messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvMode {
    /// Transform-based circular convolution; sums wrap modulo the grid span.
    #[default]
    Circular,
    /// Direct linear convolution with boundary accumulation.
    Linear,
}

impl fmt::Display for ConvMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvMode::Circular => write!(f, "circular"),
            ConvMode::Linear => write!(f, "linear"),
        }
    }
}

impl FromStr for ConvMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "circular" | "fft" => Ok(ConvMode::Circular),
            "linear" | "direct" => Ok(ConvMode::Linear),
            other => Err(Error::Parse(format!("unknown convolution mode '{other}'"))),
        }
    }
}

/// Probability mass over the points of a [`ValueGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDensity {
    grid: ValueGrid,
    mass: Vec<f64>,
}

impl DiscreteDensity {
    pub fn from_mass(grid: ValueGrid, mass: Vec<f64>) -> Result<Self> {
        crate::error::check_len(grid.len(), mass.len())?;
        if mass.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidParameter(
                "density weights must be finite and non-negative".into(),
            ));
        }
        Ok(Self { grid, mass })
    }

    pub(crate) fn from_mass_unchecked(grid: ValueGrid, mass: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), mass.len());
        Self { grid, mass }
    }

    pub fn uniform(grid: ValueGrid) -> Self {
        let w = 1.0 / grid.len() as f64;
        Self {
            grid,
            mass: vec![w; grid.len()],
        }
    }

    pub fn delta_index(grid: ValueGrid, k: usize) -> Self {
        let mut mass = vec![0.0; grid.len()];
        mass[k] = 1.0;
        Self { grid, mass }
    }

    /// Unit mass on the grid point nearest to `value`. The flag is set when
    /// `value` lies outside the grid and was clamped to a boundary point.
    pub fn delta_at(grid: ValueGrid, value: f64) -> (Self, bool) {
        let (k, clamped) = grid.nearest_index(value);
        (Self::delta_index(grid, k), clamped)
    }

    /// Grid-sampled Gaussian pmf. Weights are computed relative to the
    /// largest one so very narrow kernels never underflow to all zeros.
    pub fn gaussian(grid: ValueGrid, mean: f64, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gaussian sigma {sigma} must be positive"
            )));
        }
        if !mean.is_finite() {
            return Err(Error::InvalidParameter("gaussian mean must be finite".into()));
        }
        let exps: Vec<f64> = grid
            .points()
            .iter()
            .map(|x| -0.5 * ((x - mean) / sigma).powi(2))
            .collect();
        let top = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mass = exps.iter().map(|e| (e - top).exp()).collect();
        Self { grid, mass }.normalized()
    }

    /// Spike-and-slab mixture `q·slab + (1-q)·δ(0)` where the slab is the
    /// normalized grid-sampled `N(0, σ_x²)`. Accepts the closed interval
    /// `q ∈ [0, 1]` so the pure-spike and pure-slab limits are reachable.
    pub fn spike_slab(grid: ValueGrid, q: f64, sigma_x: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidParameter(format!("sparsity rate {q} outside [0,1]")));
        }
        let slab = Self::gaussian(grid, 0.0, sigma_x)?;
        let mut mass: Vec<f64> = slab.mass.iter().map(|m| q * m).collect();
        mass[grid.zero_index()] += 1.0 - q;
        Ok(Self { grid, mass })
    }

    pub fn spike_slab_prior(grid: ValueGrid, prior: &PriorParams) -> Result<Self> {
        Self::spike_slab(grid, prior.q(), prior.sigma_x())
    }

    pub fn grid(&self) -> &ValueGrid {
        &self.grid
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass_mut(&mut self) -> &mut [f64] {
        &mut self.mass
    }

    pub fn into_mass(self) -> Vec<f64> {
        self.mass
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let total = self.total();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::DegenerateMessage);
        }
        let inv = 1.0 / total;
        self.mass.iter_mut().for_each(|m| *m *= inv);
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Pointwise product, left unnormalized.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        let mass = self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| a * b)
            .collect();
        Ok(Self {
            grid: self.grid,
            mass,
        })
    }

    /// Circular reflection about the zero index: `x → -x`.
    pub fn mirror(&self) -> Self {
        let n = self.grid.len();
        let mass = (0..n).map(|k| self.mass[(n - k) % n]).collect();
        Self {
            grid: self.grid,
            mass,
        }
    }

    /// Mirrors when `sign` is negative, clones otherwise.
    pub fn signed(&self, sign: i8) -> Self {
        if sign < 0 {
            self.mirror()
        } else {
            self.clone()
        }
    }

    /// Linear convolution of the value distributions. Sums falling outside the
    /// grid are accumulated onto the nearest boundary bin.
    pub fn convolve_direct(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        let n = self.grid.len() as i64;
        let c = self.grid.zero_index() as i64;
        let mut out = vec![0.0; n as usize];
        for (ka, &ma) in self.mass.iter().enumerate() {
            if ma == 0.0 {
                continue;
            }
            for (kb, &mb) in other.mass.iter().enumerate() {
                let k = (ka as i64 + kb as i64 - c).clamp(0, n - 1);
                out[k as usize] += ma * mb;
            }
        }
        Ok(Self {
            grid: self.grid,
            mass: out,
        })
    }

    /// Circular convolution through the discrete Fourier transform.
    pub fn convolve_fft(&self, other: &Self) -> Result<Self> {
        Self::convolve_fft_many(&[self, other])
    }

    /// Circular convolution of any number of densities: one product of
    /// transforms followed by a single inverse transform.
    pub fn convolve_fft_many(parts: &[&Self]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("nothing to convolve".into()))?;
        for p in parts {
            first.same_grid(p)?;
        }
        let plan = SpectralPlan::new(first.grid.len());
        let mut acc = plan.forward(&first.mass);
        for p in &parts[1..] {
            let spec = plan.forward(&p.mass);
            acc.iter_mut().zip(&spec).for_each(|(a, b)| *a *= b);
        }
        Ok(Self {
            grid: first.grid,
            mass: plan.inverse(acc),
        })
    }

    pub fn convolve(&self, other: &Self, mode: ConvMode) -> Result<Self> {
        match mode {
            ConvMode::Circular => self.convolve_fft(other),
            ConvMode::Linear => self.convolve_direct(other),
        }
    }

    /// Mean and variance of a normalized density.
    pub fn moments(&self) -> Result<(f64, f64)> {
        let total = self.total();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized(total));
        }
        let pts = self.grid.points();
        let mean: f64 = pts.iter().zip(&self.mass).map(|(x, m)| x * m).sum();
        let var = pts
            .iter()
            .zip(&self.mass)
            .map(|(x, m)| (x - mean).powi(2) * m)
            .sum();
        Ok((mean, var))
    }

    /// Dumps `x_k,mass` rows for plotting.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x_k,mass")?;
        for (x, m) in self.grid.points().iter().zip(&self.mass) {
            writeln!(out, "{x},{m}")?;
        }
        Ok(())
    }
}

/// Cached forward/inverse transforms for one grid size.
///
/// Transforms operate in the centered layout, where position `t` holds the
/// mass of value `t·Δ` (indices modulo `n_d`), so products of spectra are
/// circular convolutions of value distributions with zero at position 0.
#[derive(Clone)]
pub struct SpectralPlan {
    n_d: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralPlan").field("n_d", &self.n_d).finish()
    }
}

impl SpectralPlan {
    pub fn new(n_d: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n_d,
            forward: planner.plan_fft_forward(n_d),
            inverse: planner.plan_fft_inverse(n_d),
        }
    }

    pub fn len(&self) -> usize {
        self.n_d
    }

    pub fn is_empty(&self) -> bool {
        self.n_d == 0
    }

    /// Spectrum of a grid-layout mass vector.
    pub fn forward(&self, mass: &[f64]) -> Vec<Complex64> {
        let c = self.n_d / 2;
        let mut buf: Vec<Complex64> = (0..self.n_d)
            .map(|t| Complex64::new(mass[(t + c) % self.n_d], 0.0))
            .collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse transform back to the centered layout. Round-off negatives are
    /// clipped to zero.
    pub fn inverse_centered(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.inverse.process(&mut spec);
        let scale = 1.0 / self.n_d as f64;
        spec.iter().map(|v| (v.re * scale).max(0.0)).collect()
    }

    /// Inverse transform back to the grid layout.
    pub fn inverse(&self, spec: Vec<Complex64>) -> Vec<f64> {
        let centered = self.inverse_centered(spec);
        let c = self.n_d / 2;
        (0..self.n_d).map(|k| centered[(k + c) % self.n_d]).collect()
    }
}
