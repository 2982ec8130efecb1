//! Gaussian kernels, the pairwise-distance bandwidth rule, and centering projectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, NtsdrError, Result};
use crate::linalg::{Mat, Vector};

/// Point count above which the bandwidth rule subsamples pairs.
pub const PAIR_SUBSAMPLE_THRESHOLD: usize = 4000;
const BANDWIDTH_SEED: u64 = 0x6b65_726e_656c;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub gamma: f64,
    pub rho: f64,
}

impl KernelSpec {
    pub fn gaussian(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(NtsdrError::InvalidArgument(format!(
                "kernel gamma must be positive and finite, got {gamma}"
            )));
        }
        Ok(KernelSpec {
            family: KernelFamily::Gaussian,
            gamma,
            rho: 1.0,
        })
    }

    /// Gaussian kernel with gamma from [`bandwidth_heuristic`].
    pub fn from_points(points: &[Vector], rho: f64) -> Result<Self> {
        let gamma = bandwidth_heuristic(points, rho)?;
        Ok(KernelSpec {
            family: KernelFamily::Gaussian,
            gamma,
            rho,
        })
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self.family {
            KernelFamily::Gaussian => gaussian_kernel(x, y, self.gamma),
        }
    }

    #[inline]
    fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian => (-self.gamma * sq_dist(x, y)).exp(),
        }
    }
}

#[inline]
fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `exp(-γ‖x − y‖²)`.
pub fn gaussian_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    check_dim("gaussian kernel", x.len(), y.len())?;
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(NtsdrError::InvalidArgument(format!(
            "kernel gamma must be positive, got {gamma}"
        )));
    }
    Ok((-gamma * sq_dist(x, y)).exp())
}

/// `ρ / (2σ²)` where σ² is the mean squared distance over unordered pairs.
///
/// Above [`PAIR_SUBSAMPLE_THRESHOLD`] points, 4000 pairs are drawn with a fixed seed.
pub fn bandwidth_heuristic(points: &[Vector], rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(NtsdrError::InvalidArgument(format!(
            "bandwidth multiplier must be positive, got {rho}"
        )));
    }
    if !(0.1..=10.0).contains(&rho) {
        log::warn!("bandwidth multiplier {rho} outside the usual range (0.1, 10)");
    }
    let m = points.len();
    if m < 2 {
        return Err(NtsdrError::InvalidArgument(
            "bandwidth rule needs at least two points".into(),
        ));
    }
    let dim = points[0].len();
    for p in points {
        check_dim("bandwidth points", dim, p.len())?;
    }
    let sigma2 = if m > PAIR_SUBSAMPLE_THRESHOLD {
        let mut rng = ChaCha8Rng::seed_from_u64(BANDWIDTH_SEED);
        let draws = PAIR_SUBSAMPLE_THRESHOLD;
        let mut total = 0.0;
        for _ in 0..draws {
            let i = rng.random_range(0..m);
            let mut j = rng.random_range(0..m - 1);
            if j >= i {
                j += 1;
            }
            total += sq_dist(points[i].as_slice(), points[j].as_slice());
        }
        total / draws as f64
    } else {
        let mut total = 0.0;
        for i in 0..m {
            for j in (i + 1)..m {
                total += sq_dist(points[i].as_slice(), points[j].as_slice());
            }
        }
        total / (m * (m - 1) / 2) as f64
    };
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(NtsdrError::DegenerateData(
            "all points identical; squared-distance scale is zero".into(),
        ));
    }
    Ok(rho / (2.0 * sigma2))
}

/// Symmetric kernel matrix of a point list.
pub fn kernel_matrix(points: &[Vector], spec: &KernelSpec) -> Result<Mat> {
    let m = points.len();
    if m == 0 {
        return Err(NtsdrError::InvalidArgument("empty point list".into()));
    }
    let dim = points[0].len();
    for p in points {
        check_dim("kernel matrix points", dim, p.len())?;
    }
    let mut k = Mat::zeros(m, m);
    for i in 0..m {
        k[(i, i)] = spec.eval_unchecked(points[i].as_slice(), points[i].as_slice());
        for j in (i + 1)..m {
            let v = spec.eval_unchecked(points[i].as_slice(), points[j].as_slice());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Kernel values `κ(x, p)` for every training point `p`.
pub fn kernel_row(x: &[f64], points: &[Vector], spec: &KernelSpec) -> Result<Vector> {
    if let Some(first) = points.first() {
        check_dim("kernel evaluation point", first.len(), x.len())?;
    }
    Ok(Vector::from_iterator(
        points.len(),
        points.iter().map(|p| spec.eval_unchecked(x, p.as_slice())),
    ))
}

/// `Q_m = I_m − 1 1ᵀ / m`.
pub fn centering_projector(m: usize) -> Mat {
    let inv = 1.0 / m as f64;
    Mat::from_fn(m, m, |i, j| if i == j { 1.0 - inv } else { -inv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pts(v: &[&[f64]]) -> Vec<Vector> {
        v.iter().map(|p| Vector::from_row_slice(p)).collect()
    }

    #[test]
    fn gaussian_values() {
        assert_eq!(gaussian_kernel(&[0.3, -2.0], &[0.3, -2.0], 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(
            gaussian_kernel(&[1.0, 0.0], &[0.0, 0.0], 0.5).unwrap(),
            (-0.5f64).exp(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            gaussian_kernel(&[1.0, 1.0], &[-1.0, -1.0], 0.125).unwrap(),
            (-1.0f64).exp(),
            epsilon = 1e-15
        );
        assert!(gaussian_kernel(&[1.0], &[1.0, 2.0], 1.0).is_err());
        assert!(gaussian_kernel(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn bandwidth_examples() {
        assert_abs_diff_eq!(
            bandwidth_heuristic(&pts(&[&[0.0], &[2.0]]), 1.0).unwrap(),
            0.125,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            bandwidth_heuristic(&pts(&[&[0.0], &[1.0], &[2.0]]), 2.0).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert!(matches!(
            bandwidth_heuristic(&pts(&[&[0.0], &[0.0], &[0.0]]), 1.0),
            Err(NtsdrError::DegenerateData(_))
        ));
        assert!(bandwidth_heuristic(&pts(&[&[0.0]]), 1.0).is_err());
    }

    #[test]
    fn bandwidth_subsampling_is_close_and_deterministic() {
        let points: Vec<Vector> = (0..4500)
            .map(|i| Vector::from_row_slice(&[(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]))
            .collect();
        let a = bandwidth_heuristic(&points, 1.0).unwrap();
        let b = bandwidth_heuristic(&points, 1.0).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let mut total = 0.0;
        let m = points.len();
        for i in 0..m {
            for j in (i + 1)..m {
                total += (&points[i] - &points[j]).norm_squared();
            }
        }
        let exact = 1.0 / (2.0 * total / (m * (m - 1) / 2) as f64);
        assert!((a - exact).abs() / exact < 0.1);
    }

    #[test]
    fn kernel_matrix_examples() {
        let spec = KernelSpec::gaussian(0.25).unwrap();
        assert_eq!(kernel_matrix(&pts(&[&[3.0]]), &spec).unwrap(), Mat::from_element(1, 1, 1.0));
        assert_eq!(
            kernel_matrix(&pts(&[&[1.0, 2.0], &[1.0, 2.0]]), &spec).unwrap(),
            Mat::from_element(2, 2, 1.0)
        );
        let k = kernel_matrix(&pts(&[&[0.0], &[2.0]]), &spec).unwrap();
        let e = (-1.0f64).exp();
        assert_abs_diff_eq!(k, Mat::from_row_slice(2, 2, &[1.0, e, e, 1.0]), epsilon = 1e-15);
    }

    #[test]
    fn centering_projector_examples() {
        assert_eq!(centering_projector(1), Mat::zeros(1, 1));
        assert_eq!(
            centering_projector(2),
            Mat::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5])
        );
    }

    proptest! {
        #[test]
        fn projector_is_idempotent_and_kills_ones(m in 1usize..40) {
            let q = centering_projector(m);
            let ones = Vector::from_element(m, 1.0);
            prop_assert!((&q * &q - &q).amax() < 1e-12);
            prop_assert!((&q * ones).amax() < 1e-12);
            prop_assert!((&q - q.transpose()).amax() == 0.0);
        }

        #[test]
        fn kernel_matrix_symmetric_psd(
            raw in proptest::collection::vec(-3.0f64..3.0, 6..60),
            gamma in 0.05f64..5.0,
        ) {
            let points: Vec<Vector> = raw.chunks_exact(3).map(Vector::from_row_slice).collect();
            let spec = KernelSpec::gaussian(gamma).unwrap();
            let k = kernel_matrix(&points, &spec).unwrap();
            prop_assert_eq!((&k - k.transpose()).amax(), 0.0);
            let min_eig = k.symmetric_eigenvalues().min();
            prop_assert!(min_eig >= -1e-10);
            for i in 0..points.len() {
                prop_assert_eq!(k[(i, i)], 1.0);
            }
        }

        #[test]
        fn bandwidth_scale_covariance(
            raw in proptest::collection::vec(-3.0f64..3.0, 4..40),
            c in 0.1f64..10.0,
        ) {
            let points: Vec<Vector> = raw.chunks_exact(2).map(Vector::from_row_slice).collect();
            let scaled: Vec<Vector> = points.iter().map(|p| p * c).collect();
            if let (Ok(g1), Ok(g2)) = (bandwidth_heuristic(&points, 1.0), bandwidth_heuristic(&scaled, 1.0)) {
                prop_assert!((g2 * c * c - g1).abs() <= 1e-9 * g1);
            }
        }
    }
}
