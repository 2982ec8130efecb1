//! Dense helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{NtsdrError, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Condition number above which small systems are rejected.
pub const MAX_CONDITION: f64 = 1e14;

/// Applies `I_r ⊗ Q_n` to a vector of length `r·n`.
pub fn block_center(v: &Vector, n: usize) -> Vector {
    let mut out = v.clone();
    for block in out.as_mut_slice().chunks_mut(n) {
        let mean = block.iter().sum::<f64>() / n as f64;
        block.iter_mut().for_each(|x| *x -= mean);
    }
    out
}

/// In place `M ← M (I_r ⊗ Q_n)`: centers every row within each column block.
pub fn block_center_rows(m: &mut Mat, n: usize) {
    let cols = m.ncols();
    for start in (0..cols).step_by(n) {
        let mut means = Vector::zeros(m.nrows());
        for c in start..start + n {
            means += m.column(c);
        }
        means /= n as f64;
        for c in start..start + n {
            let mut col = m.column_mut(c);
            col -= &means;
        }
    }
}

/// In place `M ← (I_r ⊗ Q_n) M`.
pub fn block_center_cols(m: &mut Mat, n: usize) {
    for mut col in m.column_iter_mut() {
        for block in col.as_mut_slice().chunks_mut(n) {
            let mean = block.iter().sum::<f64>() / n as f64;
            block.iter_mut().for_each(|x| *x -= mean);
        }
    }
}

/// `(I_r ⊗ Q_n) M (I_r ⊗ Q_n)`.
pub fn block_center_both(m: &Mat, n: usize) -> Mat {
    let mut out = m.clone();
    block_center_cols(&mut out, n);
    block_center_rows(&mut out, n);
    out
}

/// Symmetric eigendecomposition cached for repeated spectral functions.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vector,
    pub vectors: Mat,
    pub lambda_max: f64,
}

impl Spectrum {
    pub fn new(a: &Mat) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(NtsdrError::InvalidArgument(format!(
                "spectrum of non-square {}x{} matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(NtsdrError::NonFinite("matrix passed to eigensolver".into()));
        }
        let eig = a.clone().symmetric_eigen();
        let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        Ok(Spectrum {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
            lambda_max,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V diag(f(λ)) Vᵀ`, symmetrized.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> Mat {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[j]);
        }
        let m = scaled * self.vectors.transpose();
        (&m + m.transpose()) * 0.5
    }

    fn shifted(&self, eps: f64, context: &str) -> Result<Vec<f64>> {
        let shift = eps * self.lambda_max;
        let floor = self.lambda_max * 1e-14;
        let out: Vec<f64> = self.values.iter().map(|&l| l + shift).collect();
        if self.lambda_max <= 0.0 || out.iter().any(|&v| v <= floor) {
            return Err(NtsdrError::Singular(format!(
                "{context}: regularized matrix not positive definite (eps = {eps:e})"
            )));
        }
        Ok(out)
    }

    /// `(A + ε λ_max I)⁻¹`.
    pub fn regularized_inverse(&self, eps: f64) -> Result<Mat> {
        self.shifted(eps, "regularized inverse")?;
        let shift = eps * self.lambda_max;
        Ok(self.apply_fn(|l| 1.0 / (l + shift)))
    }

    /// `(A + ε λ_max I)^{-1/2}`.
    pub fn regularized_inverse_sqrt(&self, eps: f64) -> Result<Mat> {
        self.shifted(eps, "inverse square root")?;
        let shift = eps * self.lambda_max;
        Ok(self.apply_fn(|l| 1.0 / (l + shift).sqrt()))
    }

    /// `(A + ε λ_max I)^{1/2}`.
    pub fn regularized_sqrt(&self, eps: f64) -> Result<Mat> {
        self.shifted(eps, "square root")?;
        let shift = eps * self.lambda_max;
        Ok(self.apply_fn(|l| (l + shift).sqrt()))
    }

    /// `A (A + ε λ_max I)⁻¹`.
    pub fn hat(&self, eps: f64) -> Result<Mat> {
        self.shifted(eps, "hat matrix")?;
        let shift = eps * self.lambda_max;
        Ok(self.apply_fn(|l| l / (l + shift)))
    }

    /// `(A + ε λ_max I)⁻¹ A (A + ε λ_max I)⁻¹`.
    pub fn sandwich(&self, eps: f64) -> Result<Mat> {
        self.shifted(eps, "sandwich")?;
        let shift = eps * self.lambda_max;
        Ok(self.apply_fn(|l| l / ((l + shift) * (l + shift))))
    }

    /// `tr{A (A + ε λ_max I)⁻¹}`.
    pub fn trace_hat(&self, eps: f64) -> f64 {
        let shift = eps * self.lambda_max;
        self.values
            .iter()
            .map(|&l| {
                let l = l.max(0.0);
                if l + shift > 0.0 {
                    l / (l + shift)
                } else {
                    0.0
                }
            })
            .sum()
    }
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
pub fn lambda_max_power(a: &Mat, tol: f64, max_iter: usize) -> f64 {
    let m = a.nrows();
    if m == 0 {
        return 0.0;
    }
    // Irregular start so centered (1-annihilating) matrices are not missed.
    let mut v = Vector::from_fn(m, |i, _| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_75).fract());
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = a * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - lambda).abs() <= tol * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Tychonoff regularization `A + ε λ_max(A) I` with λ_max from power iteration.
pub fn tychonoff(a: &Mat, eps: f64) -> Mat {
    let lmax = lambda_max_power(a, 1e-6, 200);
    let mut out = a.clone();
    for i in 0..out.nrows() {
        out[(i, i)] += eps * lmax;
    }
    out
}

/// Solves `A X = B` for a small symmetric positive definite `A`.
pub fn solve_spd(a: &Mat, b: &Mat, context: &str) -> Result<Mat> {
    let inv = inverse_spd(a, context)?;
    Ok(inv * b)
}

/// Inverse of a small symmetric positive definite matrix with a conditioning check.
pub fn inverse_spd(a: &Mat, context: &str) -> Result<Mat> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(NtsdrError::NonFinite(format!("{context}: system matrix")));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if lmax <= 0.0 {
        return Err(NtsdrError::Singular(format!("{context}: zero system matrix")));
    }
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(NtsdrError::IllConditioned {
            context: context.to_string(),
            condition,
        });
    }
    let mut scaled = eig.eigenvectors.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col /= eig.eigenvalues[j];
    }
    let inv = scaled * eig.eigenvectors.transpose();
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Lower Cholesky factor of a small SPD matrix, or an error if not SPD.
pub fn cholesky_lower(a: &Mat, context: &str) -> Result<Mat> {
    let sym = (a + a.transpose()) * 0.5;
    sym.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| NtsdrError::Singular(format!("{context}: not positive definite")))
}

/// Moore-Penrose pseudo-inverse via SVD with relative cutoff.
pub fn pinv(a: &Mat, rel_tol: f64) -> Mat {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = smax * rel_tol;
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    let mut sinv = Mat::zeros(vt.nrows(), u.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cut {
            sinv[(i, i)] = 1.0 / s;
        }
    }
    vt.transpose() * sinv * u.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_psd(m: usize, seed: u64) -> Mat {
        let mut state = seed;
        let a = Mat::from_fn(m, m, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        });
        &a * a.transpose()
    }

    #[test]
    fn block_center_matches_kronecker_projector() {
        let (r, n) = (3, 4);
        let q = crate::kernel::centering_projector(n);
        let p = Mat::identity(r, r).kronecker(&q);
        let m = random_psd(r * n, 3);
        let dense = &p * &m * &p;
        assert_abs_diff_eq!(block_center_both(&m, n), dense, epsilon = 1e-12);
        let v = m.column(2).into_owned();
        assert_abs_diff_eq!(block_center(&v, n), &p * &v, epsilon = 1e-12);
    }

    #[test]
    fn spectral_functions_agree_with_direct_inverse() {
        let a = random_psd(6, 9);
        let spec = Spectrum::new(&a).unwrap();
        let eps = 0.01;
        let reg = &a + Mat::identity(6, 6) * (eps * spec.lambda_max);
        let direct = reg.clone().try_inverse().unwrap();
        assert_abs_diff_eq!(spec.regularized_inverse(eps).unwrap(), direct, epsilon = 1e-6);
        let w = spec.regularized_inverse_sqrt(eps).unwrap();
        assert_abs_diff_eq!(&w * &w, spec.regularized_inverse(eps).unwrap(), epsilon = 1e-8);
        let hat = &a * spec.regularized_inverse(eps).unwrap();
        assert_abs_diff_eq!(hat.trace(), spec.trace_hat(eps), epsilon = 1e-8);
    }

    #[test]
    fn tychonoff_shifts_by_top_eigenvalue() {
        let a = random_psd(5, 2);
        let spec = Spectrum::new(&a).unwrap();
        let t = tychonoff(&a, 0.1);
        assert!(((t - &a)[(0, 0)] - 0.1 * spec.lambda_max).abs() < 1e-5 * spec.lambda_max);
    }

    #[test]
    fn power_iteration_finds_top_eigenvalue() {
        let a = random_psd(8, 5);
        let spec = Spectrum::new(&a).unwrap();
        let lmax = lambda_max_power(&a, 1e-12, 10_000);
        assert!((lmax - spec.lambda_max).abs() < 1e-6 * spec.lambda_max);
    }

    #[test]
    fn inverse_spd_rejects_singular() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            inverse_spd(&a, "test"),
            Err(NtsdrError::IllConditioned { .. })
        ));
        assert!(matches!(
            inverse_spd(&Mat::zeros(2, 2), "test"),
            Err(NtsdrError::Singular(_))
        ));
    }

    #[test]
    fn pinv_of_projector_is_itself() {
        let q = crate::kernel::centering_projector(4);
        assert_abs_diff_eq!(pinv(&q, 1e-12), q, epsilon = 1e-12);
    }
}
