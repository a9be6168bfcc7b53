//! Problem instances and scalar metrics.
//!
//! A trial consists of a quantized sparse signal, a sensing graph and a noise
//! realization. Metrics follow the usual Monte Carlo conventions: each
//! function returns the single-trial value, averaging is done by the caller.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::density::ValueGrid;
use crate::error::{check_len, Error, Result};
use crate::estimation;
use crate::sensing::SensingGraph;

/// Spike-and-slab prior and noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorParams {
    q: f64,
    sigma_x: f64,
    sigma_n: f64,
}

impl PriorParams {
    pub fn new(q: f64, sigma_x: f64, sigma_n: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter(format!("sparsity rate {q} outside (0,1)")));
        }
        if !(sigma_x.is_finite() && sigma_x > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma_x {sigma_x} must be positive")));
        }
        if !(sigma_n.is_finite() && sigma_n >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma_n {sigma_n} must be non-negative"
            )));
        }
        Ok(Self { q, sigma_x, sigma_n })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn sigma_x(&self) -> f64 {
        self.sigma_x
    }

    pub fn sigma_n(&self) -> f64 {
        self.sigma_n
    }

    /// Same prior with a different noise level.
    pub fn with_sigma_n(&self, sigma_n: f64) -> Result<Self> {
        Self::new(self.q, self.sigma_x, sigma_n)
    }
}

/// Ground-truth sparse vector together with its support states.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal {
    pub values: Vec<f64>,
    pub states: Vec<bool>,
}

impl SparseSignal {
    /// Builds a signal from values; states follow the nonzero pattern.
    pub fn from_values(values: Vec<f64>) -> Self {
        let states = values.iter().map(|v| *v != 0.0).collect();
        Self { values, states }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn support_size(&self) -> usize {
        self.states.iter().filter(|s| **s).count()
    }

    pub fn support_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.states)
            .filter(|(_, s)| **s)
            .map(|(v, _)| *v)
            .collect()
    }
}

/// Noisy measurements. The noise realization is kept for test oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub z: Vec<f64>,
    pub noise: Vec<f64>,
}

/// Per-trial metrics bundle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub ser: f64,
    pub mse: f64,
    pub mse_star: f64,
    pub snr_db: f64,
    pub snr_limit_db: f64,
    pub mar: f64,
}

/// Mixes a master seed with stream indices into an independent 64-bit seed.
pub fn derive_seed(master: u64, stream: &[u64]) -> u64 {
    fn splitmix(mut x: u64) -> u64 {
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^ (x >> 31)
    }
    stream
        .iter()
        .fold(splitmix(master), |acc, s| splitmix(acc ^ splitmix(*s)))
}

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws a sparse signal: each element is nonzero with probability `q`;
/// nonzero values come from `N(0, σ_x²)`, are clipped to `±3σ_x` and snapped
/// to the grid. Draws that snap onto the zero point are redrawn so that the
/// support pattern keeps its Bernoulli(q) law.
pub fn generate_signal(n: usize, prior: &PriorParams, grid: &ValueGrid, seed: u64) -> SparseSignal {
    let mut rng = rng_from_seed(seed);
    let bound = 3.0 * prior.sigma_x;
    let zero = grid.zero_index();
    let values = (0..n)
        .map(|_| {
            if !rng.random_bool(prior.q) {
                return 0.0;
            }
            loop {
                let raw: f64 = StandardNormal.sample(&mut rng);
                let v = (raw * prior.sigma_x).clamp(-bound, bound);
                let (k, _) = grid.nearest_index(v);
                if k != zero {
                    break grid.point(k);
                }
            }
        })
        .collect();
    SparseSignal::from_values(values)
}

/// `z = Φx₀ + n` with `n ~ N(0, σ_n² I)`.
pub fn sense(
    signal: &SparseSignal,
    graph: &SensingGraph,
    sigma_n: f64,
    seed: u64,
) -> Result<Measurement> {
    if !(sigma_n.is_finite() && sigma_n >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma_n {sigma_n} must be non-negative")));
    }
    let clean = graph.matvec(&signal.values)?;
    let mut rng = rng_from_seed(seed);
    let noise: Vec<f64> = (0..graph.m())
        .map(|_| {
            let w: f64 = StandardNormal.sample(&mut rng);
            sigma_n * w
        })
        .collect();
    let z = clean.iter().zip(&noise).map(|(c, n)| c + n).collect();
    Ok(Measurement { z, noise })
}

fn energy(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Realized SNR `10·log₁₀(‖Φx₀‖² / (M σ_n²))`. Returns `+∞` when `σ_n = 0`.
pub fn snr_db(graph: &SensingGraph, signal: &SparseSignal, sigma_n: f64) -> Result<f64> {
    if !(sigma_n >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma_n {sigma_n} must be non-negative")));
    }
    let power = energy(&graph.matvec(&signal.values)?);
    if sigma_n == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (power / (graph.m() as f64 * sigma_n * sigma_n)).log10())
}

/// Noise level that puts this realization exactly at `target_db`.
pub fn sigma_for_target_snr(graph: &SensingGraph, signal: &SparseSignal, target_db: f64) -> Result<f64> {
    if !target_db.is_finite() {
        return Err(Error::InvalidParameter("target SNR must be finite".into()));
    }
    let power = energy(&graph.matvec(&signal.values)?);
    if power == 0.0 {
        return Err(Error::ZeroSignal);
    }
    Ok((power / (graph.m() as f64 * 10f64.powf(target_db / 10.0))).sqrt())
}

/// Fraction of mismatched states.
pub fn ser(detected: &[bool], truth: &[bool]) -> Result<f64> {
    check_len(truth.len(), detected.len())?;
    if truth.is_empty() {
        return Err(Error::InvalidParameter("empty state vectors".into()));
    }
    let errors = detected.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / truth.len() as f64)
}

/// Normalized squared error `‖x̂ - x₀‖² / ‖x₀‖²`.
pub fn mse(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    check_len(truth.len(), estimate.len())?;
    let norm = energy(truth);
    if norm == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let err: f64 = estimate.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(err / norm)
}

/// Error of the support-aware MMSE estimator:
/// `Tr[(I/σ_x² + Φ_suppᵀΦ_supp/σ_n²)⁻¹] / ‖x₀,supp‖²`.
pub fn mse_star(graph_supp: &SensingGraph, prior: &PriorParams, x0_supp: &[f64]) -> Result<f64> {
    check_len(graph_supp.n(), x0_supp.len())?;
    if x0_supp.is_empty() {
        return Err(Error::EmptySupport);
    }
    let norm = energy(x0_supp);
    if norm == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let trace = estimation::posterior_covariance_trace(graph_supp, prior)?;
    Ok(trace / norm)
}

/// Minimum-to-average ratio of the nonzero energies.
pub fn mar(values: &[f64]) -> Result<f64> {
    let nz: Vec<f64> = values.iter().filter(|v| **v != 0.0).map(|v| v * v).collect();
    if nz.is_empty() {
        return Err(Error::ZeroSignal);
    }
    let min = nz.iter().cloned().fold(f64::INFINITY, f64::min);
    let avg = nz.iter().sum::<f64>() / nz.len() as f64;
    Ok((min / avg).min(1.0))
}

/// Linear-scale support-recovery SNR limit
/// `2k·ln(n-k) / ((m-k+1)·MAR)` for ML recovery with i.i.d. Gaussian sensing.
pub fn snr_limit(n: usize, m: usize, k: usize, mar: f64) -> Result<f64> {
    if k == 0 || n <= k {
        return Err(Error::InvalidParameter(format!("need n > k >= 1 (n={n}, k={k})")));
    }
    if m < k {
        return Err(Error::InvalidParameter(format!("need m >= k (m={m}, k={k})")));
    }
    if !(mar > 0.0 && mar <= 1.0) {
        return Err(Error::InvalidParameter(format!("MAR {mar} outside (0,1]")));
    }
    Ok(2.0 * k as f64 * ((n - k) as f64).ln() / ((m - k + 1) as f64 * mar))
}

/// [`snr_limit`] in decibels; a zero limit maps to `-∞`.
pub fn snr_limit_db(n: usize, m: usize, k: usize, mar: f64) -> Result<f64> {
    Ok(10.0 * snr_limit(n, m, k, mar)?.log10())
}
