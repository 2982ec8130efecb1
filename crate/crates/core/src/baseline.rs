//! Generalized sliced inverse regression on vectorized predictors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NtsdrError, Result};
use crate::feature::{check_shapes, SampleSet};
use crate::kernel::{kernel_matrix, kernel_row, KernelSpec};
use crate::linalg::{Mat, Spectrum, Vector};

/// Relative eigenvalue floor below which `G_X` directions are treated as null.
const NULL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsirModel {
    pub d: usize,
    /// `d × n` coefficients over the centered `κ_X` basis at the training points.
    pub coef: Mat,
    /// Leading eigenvalues of the whitened problem.
    pub eigenvalues: Vec<f64>,
    pub eps: f64,
    pub kernel_x: KernelSpec,
    pub kernel_y: KernelSpec,
    pub p: usize,
    pub q: usize,
    pub training: Vec<Vector>,
    /// Column means of the training `K_X`, used to center new rows.
    pub col_means: Vector,
}

fn vectorize(x: &Mat) -> Vector {
    Vector::from_column_slice(x.as_slice())
}

/// Fits `d` predictor functions maximizing `‖A_Y f‖² / (‖f‖² + ε λ_max ‖f‖²_H)` over
/// `f = G_X c`, where `A = G (G + ε λ_max I)⁻¹`.
pub fn fit_gsir(samples: &SampleSet, d: usize, rho_x: f64, rho_y: f64, eps: f64) -> Result<GsirModel> {
    let n = samples.n();
    if d == 0 || d > n - 1 {
        return Err(NtsdrError::InvalidArgument(format!(
            "GSIR needs 1 <= d <= n - 1 = {}, got {d}",
            n - 1
        )));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(NtsdrError::validation("eps", format!("must be positive, got {eps}")));
    }
    let xs: Vec<Vector> = samples.xs.iter().map(vectorize).collect();
    let ys: Vec<Vector> = samples.y.iter().map(|&v| Vector::from_element(1, v)).collect();
    let kernel_x = KernelSpec::from_points(&xs, rho_x)?;
    let kernel_y = KernelSpec::from_points(&ys, rho_y)?;
    let k_x = kernel_matrix(&xs, &kernel_x)?;
    let k_y = kernel_matrix(&ys, &kernel_y)?;
    let q = crate::kernel::centering_projector(n);
    let g_x = &q * &k_x * &q;
    let g_y = &q * &k_y * &q;
    let sx = Spectrum::new(&g_x)?;
    let sy = Spectrum::new(&g_y)?;
    let a_y = sy.hat(eps)?;
    let floor = NULL_FLOOR * sx.lambda_max;
    let shift = eps * sx.lambda_max;
    let half_hat = sx.apply_fn(|l| if l > floor { (l / (l + shift)).sqrt() } else { 0.0 });
    let m = &half_hat * (&a_y * &a_y) * &half_hat;
    let eig = ((&m + m.transpose()) * 0.5).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    // c = V (Λ² + ε λ_max Λ)^{-1/2} Vᵀ β on the non-null eigenspace.
    let whiten = sx.apply_fn(|l| if l > floor { 1.0 / (l * (l + shift)).sqrt() } else { 0.0 });
    let mut coef = Mat::zeros(d, n);
    let mut eigenvalues = Vec::with_capacity(d);
    for (k, &idx) in order.iter().take(d).enumerate() {
        let beta = eig.eigenvectors.column(idx);
        let mut c = &whiten * beta;
        let f = &g_x * &c;
        let scale = (f.norm_squared() / n as f64).sqrt();
        if scale <= 0.0 {
            return Err(NtsdrError::DegenerateSignal(format!("GSIR component {} has zero variance", k + 1)));
        }
        c /= scale;
        if let Some(first) = c.iter().copied().find(|v| v.abs() > 1e-12) {
            if first < 0.0 {
                c.neg_mut();
            }
        }
        coef.set_row(k, &c.transpose());
        eigenvalues.push(eig.eigenvalues[idx]);
    }
    let col_means = Vector::from_fn(n, |b, _| k_x.column(b).mean());
    Ok(GsirModel {
        d,
        coef,
        eigenvalues,
        eps,
        kernel_x,
        kernel_y,
        p: samples.p(),
        q: samples.q(),
        training: xs,
        col_means,
    })
}

/// `n_new × d` predictor values.
pub fn evaluate_gsir(model: &GsirModel, xs: &[Mat]) -> Result<Mat> {
    check_shapes(xs, model.p, model.q)?;
    let rows: Vec<Vector> = xs
        .par_iter()
        .map(|x| {
            let k = kernel_row(vectorize(x).as_slice(), &model.training, &model.kernel_x)?;
            Ok(&model.coef * (k - &model.col_means))
        })
        .collect::<Result<_>>()?;
    Ok(Mat::from_fn(xs.len(), model.d, |a, k| rows[a][k]))
}

/// Kernel ridge GCV for the response features: `‖G_Y − A_X G_Y‖² / (n − tr A_X)²`.
pub fn gcv_gsir(samples: &SampleSet, rho_x: f64, rho_y: f64, eps: f64) -> Result<f64> {
    let n = samples.n();
    let xs: Vec<Vector> = samples.xs.iter().map(vectorize).collect();
    let ys: Vec<Vector> = samples.y.iter().map(|&v| Vector::from_element(1, v)).collect();
    let q = crate::kernel::centering_projector(n);
    let g_x = &q * kernel_matrix(&xs, &KernelSpec::from_points(&xs, rho_x)?)? * &q;
    let g_y = &q * kernel_matrix(&ys, &KernelSpec::from_points(&ys, rho_y)?)? * &q;
    let sx = Spectrum::new(&g_x)?;
    let a_x = sx.hat(eps)?;
    let num = (&g_y - &a_x * &g_y).norm_squared();
    Ok(crate::tuning::gcv_ratio(num, n as f64 - sx.trace_hat(eps), 1.0, 0.0))
}

/// Fits at the `ε` in `eps_grid` minimizing [`gcv_gsir`]; ties go to the larger value.
pub fn tune_gsir(samples: &SampleSet, d: usize, rho_x: f64, rho_y: f64, eps_grid: &[f64]) -> Result<GsirModel> {
    let mut grid = eps_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut best: Option<(f64, f64)> = None;
    for &eps in &grid {
        let score = match gcv_gsir(samples, rho_x, rho_y, eps) {
            Ok(s) if s.is_finite() => s,
            Ok(_) => continue,
            Err(e) => {
                log::warn!("GSIR eps = {eps:e}: {e}");
                continue;
            }
        };
        if best.is_none_or(|(_, b)| score <= b) {
            best = Some((eps, score));
        }
    }
    let (eps, _) = best.ok_or_else(|| NtsdrError::TuningFailure("no finite GSIR GCV score".into()))?;
    fit_gsir(samples, d, rho_x, rho_y, eps)
}
