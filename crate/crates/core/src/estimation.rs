//! MMSE value estimation on a detected support.
//!
//! With the support fixed, signal and noise are jointly Gaussian and the
//! estimate is the ridge solution
//! `x̂ = (I/σ_x² + ΦᵀΦ/σ_n²)⁻¹ Φᵀz/σ_n²`, computed here through a Cholesky
//! factorization of the regularized Gram matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::model::PriorParams;
use crate::sensing::SensingGraph;

/// Support states, values on the support and the re-embedded estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportEstimate {
    pub states: Vec<bool>,
    pub values_supp: Vec<f64>,
    pub full_estimate: Vec<f64>,
}

/// Dense symmetric matrix in row-major order.
#[derive(Debug, Clone)]
struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }
}

/// Lower-triangular Cholesky factor.
#[derive(Debug, Clone)]
struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    fn factor(a: &SymMatrix) -> Result<Self> {
        let n = a.n;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a.at(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = a.at(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Ok(Self { n, l })
    }

    fn forward(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    fn backward(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    fn solve(&self, mut b: Vec<f64>) -> Vec<f64> {
        self.forward(&mut b);
        self.backward(&mut b);
        b
    }

    /// `Tr(A⁻¹) = ‖L⁻¹‖_F²`.
    fn inverse_trace(&self) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            self.forward(&mut col);
            total += col.iter().map(|v| v * v).sum::<f64>();
        }
        total
    }
}

/// `I·ridge + ΦᵀΦ·scale`, accumulated row by row over the sparse entries.
fn regularized_gram(graph: &SensingGraph, ridge: f64, scale: f64) -> SymMatrix {
    let k = graph.n();
    let mut data = vec![0.0; k * k];
    for j in 0..graph.m() {
        let row: Vec<(usize, i8)> = graph.row_neighbors(j).collect();
        for &(a, sa) in &row {
            for &(b, sb) in &row {
                data[a * k + b] += scale * f64::from(sa * sb);
            }
        }
    }
    for i in 0..k {
        data[i * k + i] += ridge;
    }
    SymMatrix { n: k, data }
}

fn require_positive_noise(prior: &PriorParams) -> Result<f64> {
    let s = prior.sigma_n();
    if s > 0.0 {
        Ok(s * s)
    } else {
        Err(Error::InvalidParameter("noise level must be positive".into()))
    }
}

/// MMSE estimate on the columns of `graph_supp`.
///
/// With `σ_n = 0` the estimator degenerates to the minimum-norm
/// least-squares solution, which is returned instead.
pub fn mmse_on_support(graph_supp: &SensingGraph, z: &[f64], prior: &PriorParams) -> Result<Vec<f64>> {
    check_len(graph_supp.m(), z.len())?;
    if graph_supp.n() == 0 {
        return Err(Error::EmptySupport);
    }
    if prior.sigma_n() == 0.0 {
        return least_squares_min_norm(graph_supp, z);
    }
    let var_n = prior.sigma_n().powi(2);
    let gram = regularized_gram(graph_supp, 1.0 / prior.sigma_x().powi(2), 1.0 / var_n);
    let chol = Cholesky::factor(&gram)?;
    let rhs: Vec<f64> = graph_supp
        .matvec_transpose(z)?
        .into_iter()
        .map(|v| v / var_n)
        .collect();
    Ok(chol.solve(rhs))
}

/// `Tr[(I/σ_x² + ΦᵀΦ/σ_n²)⁻¹]`, the summed posterior variance.
pub fn posterior_covariance_trace(graph_supp: &SensingGraph, prior: &PriorParams) -> Result<f64> {
    if graph_supp.n() == 0 {
        return Err(Error::EmptySupport);
    }
    let var_n = require_positive_noise(prior)?;
    let gram = regularized_gram(graph_supp, 1.0 / prior.sigma_x().powi(2), 1.0 / var_n);
    Ok(Cholesky::factor(&gram)?.inverse_trace())
}

fn dense(graph: &SensingGraph) -> DMatrix<f64> {
    let rows = graph.to_dense();
    DMatrix::from_fn(graph.m(), graph.n(), |r, c| rows[r][c])
}

fn least_squares_min_norm(graph_supp: &SensingGraph, z: &[f64]) -> Result<Vec<f64>> {
    let phi = dense(graph_supp);
    let svd = phi.svd(true, true);
    let x = svd
        .solve(&DVector::from_column_slice(z), 1e-12)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(x.iter().copied().collect())
}

/// Reference estimate from an explicitly inverted dense system. Intended for
/// cross-checking [`mmse_on_support`] at small support sizes.
pub fn mmse_oracle_dense(graph_supp: &SensingGraph, z: &[f64], prior: &PriorParams) -> Result<Vec<f64>> {
    check_len(graph_supp.m(), z.len())?;
    if graph_supp.n() == 0 {
        return Err(Error::EmptySupport);
    }
    let var_n = require_positive_noise(prior)?;
    let phi = dense(graph_supp);
    let k = graph_supp.n();
    let system = DMatrix::<f64>::identity(k, k) / prior.sigma_x().powi(2)
        + phi.transpose() * &phi / var_n;
    let inverse = system.try_inverse().ok_or(Error::NotPositiveDefinite)?;
    let x = inverse * phi.transpose() * DVector::from_column_slice(z) / var_n;
    Ok(x.iter().copied().collect())
}

/// Scatters support values back to full length: `x̂_i = values[h(i)]` on
/// the support, zero elsewhere.
pub fn embed(states: &[bool], values_supp: &[f64]) -> Result<Vec<f64>> {
    let k = states.iter().filter(|s| **s).count();
    check_len(k, values_supp.len())?;
    let mut it = values_supp.iter();
    Ok(states
        .iter()
        .map(|&s| if s { *it.next().unwrap() } else { 0.0 })
        .collect())
}

/// Detection-directed estimate for a given state vector. An empty support
/// yields the all-zero estimate.
pub fn estimate_on_states(
    graph: &SensingGraph,
    z: &[f64],
    prior: &PriorParams,
    states: &[bool],
) -> Result<SupportEstimate> {
    check_len(graph.n(), states.len())?;
    let values_supp = if states.iter().any(|s| *s) {
        let sub = graph.submatrix_on_support(states)?;
        mmse_on_support(&sub.graph, z, prior)?
    } else {
        Vec::new()
    };
    let full_estimate = embed(states, &values_supp)?;
    Ok(SupportEstimate {
        states: states.to_vec(),
        values_supp,
        full_estimate,
    })
}

/// Gradient of `‖z - Φx‖²/σ_n² + ‖x‖²/σ_x²` at `x`.
pub fn objective_gradient(graph_supp: &SensingGraph, z: &[f64], prior: &PriorParams, x: &[f64]) -> Result<Vec<f64>> {
    let var_n = require_positive_noise(prior)?;
    let resid: Vec<f64> = graph_supp
        .matvec(x)?
        .iter()
        .zip(z)
        .map(|(a, b)| a - b)
        .collect();
    let back = graph_supp.matvec_transpose(&resid)?;
    Ok(back
        .iter()
        .zip(x)
        .map(|(g, v)| 2.0 * g / var_n + 2.0 * v / prior.sigma_x().powi(2))
        .collect())
}
