//! Maps fitted sufficient predictors to a response prediction: a calibrated log link for
//! the simulation protocol and a post-hoc kernel ridge regressor for real data.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, NtsdrError, Result};
use crate::kernel::{kernel_matrix, kernel_row, KernelSpec};
use crate::linalg::{Mat, Vector};

/// Smallest admissible log argument.
const LOG_FLOOR: f64 = 1e-6;

/// `Ŷ = α + β log(τ + z)` with `z = wᵀ predictors`; `tau = None` is the linear link
/// `Ŷ = α + β z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLink {
    pub weights: Vec<f64>,
    pub tau: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
}

/// Least squares `y ≈ X c` via the normal equations with a tiny ridge for stability.
fn least_squares(x: &Mat, y: &Vector) -> Vector {
    let xtx = x.tr_mul(x);
    let scale = xtx.diagonal().amax().max(1e-300);
    let reg = &xtx + Mat::identity(x.ncols(), x.ncols()) * (scale * 1e-10);
    reg.cholesky()
        .map(|c| c.solve(&x.tr_mul(y)))
        .unwrap_or_else(|| crate::linalg::pinv(x, 1e-12) * y)
}

fn simple_fit(t: &[f64], y: &Vector) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.mean();
    let stt: f64 = t.iter().map(|v| (v - mt).powi(2)).sum();
    let sty: f64 = t.iter().zip(y.iter()).map(|(a, b)| (a - mt) * (b - my)).sum();
    let beta = if stt > 0.0 { sty / stt } else { 0.0 };
    let alpha = my - beta * mt;
    let sse = t.iter().zip(y.iter()).map(|(a, b)| (b - alpha - beta * a).powi(2)).sum();
    (alpha, beta, sse)
}

impl LogLink {
    /// Fits the index by OLS, then `(α, β)` by OLS for each `τ` on a log grid above
    /// `−min z`, keeping the smallest training error (the linear link competes as well).
    pub fn fit(predictors: &Mat, y: &[f64]) -> Result<Self> {
        check_dim("link training rows", predictors.nrows(), y.len())?;
        let n = y.len();
        if n < 3 {
            return Err(NtsdrError::InvalidArgument("link calibration needs at least 3 samples".into()));
        }
        let k = predictors.ncols();
        let design = Mat::from_fn(n, k + 1, |a, c| if c == 0 { 1.0 } else { predictors[(a, c - 1)] });
        let yv = Vector::from_column_slice(y);
        let coef = least_squares(&design, &yv);
        let weights: Vec<f64> = coef.iter().skip(1).copied().collect();
        let z: Vec<f64> = (0..n)
            .map(|a| (0..k).map(|c| predictors[(a, c)] * weights[c]).sum())
            .collect();
        let (alpha, beta, mut best_sse) = simple_fit(&z, &yv);
        let mut best = LogLink {
            weights: weights.clone(),
            tau: None,
            alpha,
            beta,
        };
        let zmin = z.iter().copied().fold(f64::INFINITY, f64::min);
        let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let spread = zmax - zmin;
        if spread > 0.0 && spread.is_finite() {
            for e in 0..=40 {
                let tau = -zmin + spread * 10f64.powf(-4.0 + 0.125 * e as f64);
                let t: Vec<f64> = z.iter().map(|v| (tau + v).max(LOG_FLOOR).ln()).collect();
                let (alpha, beta, sse) = simple_fit(&t, &yv);
                if sse < best_sse {
                    best_sse = sse;
                    best = LogLink {
                        weights: weights.clone(),
                        tau: Some(tau),
                        alpha,
                        beta,
                    };
                }
            }
        }
        Ok(best)
    }

    pub fn index(&self, predictors: &Mat) -> Result<Vec<f64>> {
        check_dim("link predictor columns", self.weights.len(), predictors.ncols())?;
        Ok(predictors
            .row_iter()
            .map(|r| r.iter().zip(&self.weights).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn predict(&self, predictors: &Mat) -> Result<Vec<f64>> {
        Ok(self
            .index(predictors)?
            .into_iter()
            .map(|z| match self.tau {
                Some(tau) => self.alpha + self.beta * (tau + z).max(LOG_FLOOR).ln(),
                None => self.alpha + self.beta * z,
            })
            .collect())
    }
}

/// Kernel ridge regression of `Y` on the sufficient predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRidge {
    pub kernel: KernelSpec,
    pub lambda: f64,
    pub mean: f64,
    pub train: Vec<Vec<f64>>,
    pub dual: Vec<f64>,
}

impl KernelRidge {
    /// `dual = (K + nλ I)⁻¹ (y − ȳ)` with a median-type Gaussian bandwidth scaled by `rho`.
    pub fn fit(predictors: &Mat, y: &[f64], rho: f64, lambda: f64) -> Result<Self> {
        check_dim("regressor training rows", predictors.nrows(), y.len())?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(NtsdrError::validation("lambda", format!("must be positive, got {lambda}")));
        }
        let n = y.len();
        let points: Vec<Vector> = predictors.row_iter().map(|r| r.transpose()).collect();
        let kernel = KernelSpec::from_points(&points, rho)?;
        let k = kernel_matrix(&points, &kernel)?;
        let mean = y.iter().sum::<f64>() / n as f64;
        let yc = Vector::from_iterator(n, y.iter().map(|v| v - mean));
        let sys = k + Mat::identity(n, n) * (n as f64 * lambda);
        let dual = sys
            .cholesky()
            .ok_or_else(|| NtsdrError::Singular("kernel ridge system".into()))?
            .solve(&yc);
        Ok(KernelRidge {
            kernel,
            lambda,
            mean,
            train: points.iter().map(|p| p.iter().copied().collect()).collect(),
            dual: dual.iter().copied().collect(),
        })
    }

    pub fn predict(&self, predictors: &Mat) -> Result<Vec<f64>> {
        let points: Vec<Vector> = self.train.iter().map(|p| Vector::from_column_slice(p)).collect();
        let dual = Vector::from_column_slice(&self.dual);
        predictors
            .row_iter()
            .map(|r| {
                let x: Vec<f64> = r.iter().copied().collect();
                Ok(self.mean + kernel_row(&x, &points, &self.kernel)?.dot(&dual))
            })
            .collect()
    }
}
