//! Coordinate forms of the regression image `s(Y)`, the operators `T_{s(Y)}` and the
//! CP iteration matrices, built from the diagonal structure `Diag(1_r ⊗ G_Y e_a)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_index, NtsdrError, Result};
use crate::feature::GramSet;
use crate::linalg::{block_center_both, block_center_cols, Mat, Vector};

/// Ridge fractions: `η` for building `s(Y)`, `ε` for the estimator steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizationParams {
    pub eta_u: f64,
    pub eta_v: f64,
    pub eps_u: f64,
    pub eps_v: f64,
}

impl RegularizationParams {
    pub fn new(eta_u: f64, eta_v: f64, eps_u: f64, eps_v: f64) -> Result<Self> {
        for (name, v) in [
            ("eta_u", eta_u),
            ("eta_v", eta_v),
            ("eps_u", eps_u),
            ("eps_v", eps_v),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(NtsdrError::validation(
                    name,
                    format!("must be finite and non-negative, got {v}"),
                ));
            }
        }
        Ok(RegularizationParams {
            eta_u,
            eta_v,
            eps_u,
            eps_v,
        })
    }

    pub fn uniform(eta: f64, eps: f64) -> Result<Self> {
        Self::new(eta, eta, eps, eps)
    }
}

impl Default for RegularizationParams {
    fn default() -> Self {
        RegularizationParams {
            eta_u: 1e-3,
            eta_v: 1e-3,
            eps_u: 1e-3,
            eps_v: 1e-3,
        }
    }
}

/// An element of `H_U ⊗ H_V`: rows index the V basis, columns the U basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMatrix {
    pub m: Mat,
}

impl CoordinateMatrix {
    /// `tr(M₁ᵀ G_V M₂ G_U)`.
    pub fn inner(&self, other: &CoordinateMatrix, g_u: &Mat, g_v: &Mat) -> f64 {
        let t = g_v * &other.m * g_u;
        self.m.component_mul(&t).sum()
    }

    /// Rank-one element `g ⊗ f` (V coordinate `g`, U coordinate `f`).
    pub fn rank_one(f: &Vector, g: &Vector) -> Self {
        CoordinateMatrix { m: g * f.transpose() }
    }
}

/// `d_a = 1_r ⊗ G_Y e_a`.
pub fn diag_structure(a: usize, gram: &GramSet) -> Result<Vector> {
    check_index(a, gram.n)?;
    let n = gram.n;
    Ok(Vector::from_fn(gram.rn(), |c, _| gram.g_y[(c % n, a)]))
}

/// All `d_a` as columns of an `rn × n` matrix.
pub fn diag_structures(gram: &GramSet) -> Mat {
    let n = gram.n;
    Mat::from_fn(gram.rn(), n, |c, a| gram.g_y[(c % n, a)])
}

/// `(I_r ⊗ Q_n) Diag(d_a) (I_r ⊗ Q_n)`.
pub fn centered_diag(a: usize, gram: &GramSet) -> Result<Mat> {
    let d = diag_structure(a, gram)?;
    Ok(block_center_both(&Mat::from_diagonal(&d), gram.n))
}

/// `S_b = r⁻¹ G_V(η_V)⁻¹ Diag(d_b) G_U(η_U)⁻¹`.
pub fn s_coordinates(b: usize, gram: &GramSet, reg: &RegularizationParams) -> Result<CoordinateMatrix> {
    let d = diag_structure(b, gram)?;
    let inv_u = gram.spectrum_u.regularized_inverse(reg.eta_u)?;
    let inv_v = gram.spectrum_v.regularized_inverse(reg.eta_v)?;
    Ok(CoordinateMatrix {
        m: scaled_sandwich(&inv_v, &d, &inv_u, 1.0 / gram.r as f64),
    })
}

/// `c · L Diag(d) R`.
fn scaled_sandwich(left: &Mat, d: &Vector, right: &Mat, c: f64) -> Mat {
    let mut scaled = left.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= d[j] * c;
    }
    scaled * right
}

/// `r⁻¹ G_U(ε_U)⁻¹ (I⊗Q) Diag(d_a) (I⊗Q)`: maps V coordinates to U coordinates.
pub fn t_operator_coords(a: usize, gram: &GramSet, reg: &RegularizationParams) -> Result<Mat> {
    let inv = gram.spectrum_u.regularized_inverse(reg.eps_u)?;
    let mut t = inv * centered_diag(a, gram)? / gram.r as f64;
    // The exact result lies in range(I⊗Q); drop roundoff amplified by tiny ridges.
    block_center_cols(&mut t, gram.n);
    Ok(t)
}

/// Adjoint of [`t_operator_coords`]: `r⁻¹ G_V(ε_V)⁻¹ (I⊗Q) Diag(d_a) (I⊗Q)`.
pub fn t_operator_adjoint_coords(a: usize, gram: &GramSet, reg: &RegularizationParams) -> Result<Mat> {
    let inv = gram.spectrum_v.regularized_inverse(reg.eps_v)?;
    let mut t = inv * centered_diag(a, gram)? / gram.r as f64;
    block_center_cols(&mut t, gram.n);
    Ok(t)
}

/// `Γ_a = n⁻¹ r⁻² (I⊗Q) Diag(d_a) (I⊗Q)`.
pub fn gamma_matrix(a: usize, gram: &GramSet) -> Result<Mat> {
    let scale = 1.0 / (gram.n as f64 * (gram.r * gram.r) as f64);
    Ok(centered_diag(a, gram)? * scale)
}

/// All `Γ_a`; `n` dense `rn × rn` matrices.
pub fn gamma_matrices(gram: &GramSet) -> Vec<Mat> {
    (0..gram.n)
        .map(|a| gamma_matrix(a, gram).expect("index in range"))
        .collect()
}

/// Matrix `Ŝ` with `Ŝ[a, b] = ⟨s(Y_b), F(X_a) − E_n F⟩`.
///
/// `Ŝ = r⁻¹ Q_n Eᵀ (A_V ∘ A_U) E G_Y` with `A = G G(η)⁻¹` and `E = 1_r ⊗ I_n`.
pub fn s_f_matrix(gram: &GramSet, reg: &RegularizationParams) -> Result<Mat> {
    let a_u = gram.spectrum_u.hat(reg.eta_u)?;
    let a_v = gram.spectrum_v.hat(reg.eta_v)?;
    Ok(s_f_matrix_from_hats(gram, &a_u, &a_v))
}

pub(crate) fn s_f_matrix_from_hats(gram: &GramSet, a_u: &Mat, a_v: &Mat) -> Mat {
    let n = gram.n;
    let r = gram.r;
    let mut folded = Mat::zeros(n, n);
    for i in 0..r {
        for j in 0..r {
            let bu = a_u.view((i * n, j * n), (n, n));
            let bv = a_v.view((i * n, j * n), (n, n));
            folded += bu.component_mul(&bv);
        }
    }
    &gram.q_n * folded * &gram.g_y / r as f64
}

/// `⟨s(Y_b), F(X_a) − E_n F⟩`.
pub fn s_f_inner(a: usize, b: usize, gram: &GramSet, reg: &RegularizationParams) -> Result<f64> {
    check_index(a, gram.n)?;
    check_index(b, gram.n)?;
    Ok(s_f_matrix(gram, reg)?[(a, b)])
}

/// `Σ_a r⁻² tr(Diag(d_a) P C_V P Diag(d_a) P C_U P)`: the summed squared norm of the
/// coordinate matrices `r⁻¹ L P Diag(d_a) P R` whenever `C_U = R G_U Rᵀ`, `C_V = Lᵀ G_V L`.
pub(crate) fn structured_norm_total(c_u: &Mat, c_v: &Mat, g_y: &Mat, n: usize, r: usize) -> f64 {
    let cu = block_center_both(c_u, n);
    let cv = block_center_both(c_v, n);
    let c = cu.component_mul(&cv);
    let mut folded = Mat::zeros(n, n);
    for i in 0..r {
        for j in 0..r {
            folded += c.view((i * n, j * n), (n, n));
        }
    }
    (g_y * folded * g_y).trace() / (r * r) as f64
}

/// Regularized Gram metric `Ĝ = G + ε λ_max I` used by the estimator steps, with its
/// inverse and the diagonal structures `d_a`.
#[derive(Debug, Clone)]
pub struct EstimatorMetric {
    pub n: usize,
    pub r: usize,
    pub ghat_u: Mat,
    pub ghat_v: Mat,
    pub inv_u: Mat,
    pub inv_v: Mat,
    /// `d_a` as columns (`rn × n`).
    pub d: Mat,
    /// Centered response Gram `G_Y`.
    pub g_y: Mat,
}

impl EstimatorMetric {
    pub fn new(gram: &GramSet, eps_u: f64, eps_v: f64) -> Result<Self> {
        if !(eps_u > 0.0 && eps_v > 0.0) {
            return Err(NtsdrError::validation(
                "eps",
                format!("estimator ridge must be positive, got ({eps_u}, {eps_v})"),
            ));
        }
        let rn = gram.rn();
        let shift_u = eps_u * gram.spectrum_u.lambda_max;
        let shift_v = eps_v * gram.spectrum_v.lambda_max;
        let ghat_u = &gram.g_u + Mat::identity(rn, rn) * shift_u;
        let ghat_v = &gram.g_v + Mat::identity(rn, rn) * shift_v;
        Ok(EstimatorMetric {
            n: gram.n,
            r: gram.r,
            inv_u: gram.spectrum_u.regularized_inverse(eps_u)?,
            inv_v: gram.spectrum_v.regularized_inverse(eps_v)?,
            ghat_u,
            ghat_v,
            d: diag_structures(gram),
            g_y: gram.g_y.clone(),
        })
    }

    pub fn rn(&self) -> usize {
        self.r * self.n
    }

    /// `Σ_a ‖Ŝ_a‖²` in the `Ĝ` metric, where `Ĝ_V Ŝ_a Ĝ_U = r⁻¹ (I⊗Q) Diag(d_a) (I⊗Q)`.
    pub fn target_norm_total(&self) -> f64 {
        structured_norm_total(&self.inv_u, &self.inv_v, &self.g_y, self.n, self.r)
    }

    /// Dense `Ŝ_a` coordinates (test and diagnostic use).
    pub fn target_coordinates(&self, a: usize) -> CoordinateMatrix {
        let cd = block_center_both(&Mat::from_diagonal(&self.d.column(a).into_owned()), self.n);
        CoordinateMatrix {
            m: &self.inv_v * cd * &self.inv_u / self.r as f64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature::{build_grams, extract_features, feature_coordinate, KernelTriple};
    use crate::kernel::centering_projector;
    use crate::linalg::pinv;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_gram(n: usize, p: usize, q: usize, seed: u64) -> GramSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Mat> = (0..n)
            .map(|_| Mat::from_fn(p, q, |_, _| StandardNormal.sample(&mut rng)))
            .collect();
        let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let f = extract_features(&xs).unwrap();
        let specs = KernelTriple::heuristic(&f, &y, [1.0; 3]).unwrap();
        build_grams(&f, &y, &specs).unwrap()
    }

    /// Dense Δ: column `a` is `Σ_i e_{ia,ia}` in the `(ia, jb)` vec ordering (jb fast).
    fn dense_delta(n: usize, r: usize) -> Mat {
        let rn = r * n;
        let mut d = Mat::zeros(rn * rn, n);
        for a in 0..n {
            for i in 0..r {
                let c = i * n + a;
                d[(c * rn + c, a)] = 1.0;
            }
        }
        d
    }

    fn unvec(v: &Vector, rn: usize) -> Mat {
        Mat::from_column_slice(rn, rn, v.as_slice())
    }

    #[test]
    fn diag_structure_hand_case() {
        let g = 0.7;
        let gy = Mat::from_row_slice(2, 2, &[g, -g, -g, g]);
        let gram = GramSet::from_centered(Mat::identity(4, 4), Mat::identity(4, 4), gy, 2, 2).unwrap();
        assert_eq!(
            diag_structure(0, &gram).unwrap(),
            Vector::from_row_slice(&[g, -g, g, -g])
        );
        assert!(diag_structure(2, &gram).is_err());
    }

    #[test]
    fn diag_structure_matches_dense_delta() {
        let gram = random_gram(3, 2, 3, 1);
        let delta = dense_delta(3, 2);
        let mut total = Vector::zeros(6);
        for a in 0..3 {
            let dense = unvec(&(&delta * gram.g_y.column(a)), 6);
            let d = diag_structure(a, &gram).unwrap();
            assert_eq!(dense, Mat::from_diagonal(&d));
            total += d;
        }
        assert!(total.amax() < 1e-12);
    }

    #[test]
    fn s_coordinates_identity_grams() {
        let gy = centering_projector(3) * 2.0;
        let gram = GramSet::from_centered(Mat::identity(6, 6), Mat::identity(6, 6), gy, 3, 2).unwrap();
        let reg = RegularizationParams::uniform(1e-12, 1e-3).unwrap();
        for b in 0..3 {
            let s = s_coordinates(b, &gram, &reg).unwrap();
            let d = diag_structure(b, &gram).unwrap();
            assert_abs_diff_eq!(s.m, Mat::from_diagonal(&d) / 2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn s_coordinates_match_dense_kronecker_and_sum_to_zero() {
        let gram = random_gram(2, 1, 2, 5);
        let reg = RegularizationParams::uniform(0.05, 1e-3).unwrap();
        let inv_u = gram.spectrum_u.regularized_inverse(0.05).unwrap();
        let inv_v = gram.spectrum_v.regularized_inverse(0.05).unwrap();
        let delta = dense_delta(2, 1);
        let mut total = Mat::zeros(2, 2);
        for b in 0..2 {
            let dense = inv_u.kronecker(&inv_v) * (&delta * gram.g_y.column(b)) / 1.0;
            let s = s_coordinates(b, &gram, &reg).unwrap();
            assert_abs_diff_eq!(s.m, unvec(&dense, 2), epsilon = 1e-10);
            total += s.m;
        }
        assert!(total.amax() < 1e-10);
        let zero_eta = RegularizationParams::uniform(0.0, 1e-3).unwrap();
        let singular = GramSet::from_centered(Mat::zeros(2, 2), Mat::zeros(2, 2), gram.g_y.clone(), 2, 1).unwrap();
        assert!(s_coordinates(0, &singular, &zero_eta).is_err());
    }

    #[test]
    fn t_operator_zero_column_gives_zero() {
        let gram = GramSet::from_centered(Mat::identity(3, 3), Mat::identity(3, 3), Mat::zeros(3, 3), 3, 1).unwrap();
        let reg = RegularizationParams::default();
        assert_eq!(t_operator_coords(1, &gram, &reg).unwrap(), Mat::zeros(3, 3));
    }

    fn synthetic_centered_gram(n: usize, r: usize, seed: u64) -> GramSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rn = r * n;
        let mut mk = || {
            let a = Mat::from_fn(rn, rn, |_, _| StandardNormal.sample(&mut rng));
            block_center_both(&(&a * a.transpose() + Mat::identity(rn, rn)), n)
        };
        let gu = mk();
        let gv = mk();
        let b = Mat::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let gy = block_center_both(&(&b * b.transpose()), n);
        GramSet::from_centered(gu, gv, gy, n, r).unwrap()
    }

    #[test]
    fn t_operator_matches_pseudoinverse_formula() {
        let gram = synthetic_centered_gram(3, 1, 2);
        let reg = RegularizationParams::new(1e-3, 1e-3, 1e-10, 1e-10).unwrap();
        let p = centering_projector(3);
        for a in 0..3 {
            let d = diag_structure(a, &gram).unwrap();
            let dense = pinv(&gram.g_u, 1e-12) * &p * Mat::from_diagonal(&d) * &p;
            assert_abs_diff_eq!(t_operator_coords(a, &gram, &reg).unwrap(), dense, epsilon = 1e-6);
        }
    }

    #[test]
    fn t_operator_adjoint_identity() {
        let gram = random_gram(4, 2, 3, 3);
        let reg = RegularizationParams::uniform(1e-3, 1e-2).unwrap();
        let gu_hat = crate::linalg::tychonoff(&gram.g_u, 0.0)
            + Mat::identity(8, 8) * (reg.eps_u * gram.spectrum_u.lambda_max);
        let gv_hat = gram.g_v.clone() + Mat::identity(8, 8) * (reg.eps_v * gram.spectrum_v.lambda_max);
        let f = Vector::from_fn(8, |i, _| (i as f64).cos());
        let g = Vector::from_fn(8, |i, _| (i as f64 * 1.3).sin());
        for a in 0..4 {
            let t = t_operator_coords(a, &gram, &reg).unwrap();
            let ts = t_operator_adjoint_coords(a, &gram, &reg).unwrap();
            let lhs = f.dot(&(&gu_hat * (&t * &g)));
            let rhs = (&ts * &f).dot(&(&gv_hat * &g));
            assert!((lhs - rhs).abs() < 1e-8 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn gamma_two_sample_hand_case_and_sum() {
        let gy = Mat::from_row_slice(2, 2, &[0.4, -0.4, -0.4, 0.4]);
        let gram = GramSet::from_centered(Mat::identity(2, 2), Mat::identity(2, 2), gy, 2, 1).unwrap();
        let q = centering_projector(2);
        let gammas = gamma_matrices(&gram);
        for (a, ga) in gammas.iter().enumerate() {
            let d = Mat::from_diagonal(&gram.g_y.column(a).into_owned());
            assert_abs_diff_eq!(*ga, &q * d * &q * 0.5, epsilon = 1e-15);
            assert_eq!(*ga, ga.transpose());
        }
        let total = gammas.iter().fold(Mat::zeros(2, 2), |acc, g| acc + g);
        assert!(total.amax() < 1e-15);
    }

    #[test]
    fn gamma_matches_unsimplified_formula() {
        let gram = random_gram(3, 2, 2, 7);
        let (n, r) = (3, 2);
        let pu = &gram.g_u * pinv(&gram.g_u, 1e-10);
        let pv = &gram.g_v * pinv(&gram.g_v, 1e-10);
        for a in 0..n {
            let d = Mat::from_diagonal(&diag_structure(a, &gram).unwrap());
            let dense = &pu * d.transpose() * &pv / (n as f64 * (r * r) as f64);
            assert_abs_diff_eq!(gamma_matrix(a, &gram).unwrap(), dense, epsilon = 1e-8);
        }
    }

    #[test]
    fn s_f_inner_matches_dense_kronecker() {
        let gram = random_gram(2, 1, 3, 11);
        let reg = RegularizationParams::uniform(0.02, 1e-3).unwrap();
        let guv = gram.g_u.kronecker(&gram.g_v);
        let rn = gram.rn();
        for b in 0..2 {
            let s = s_coordinates(b, &gram, &reg).unwrap();
            let svec = Vector::from_column_slice(s.m.as_slice());
            let mut col_sum = 0.0;
            for a in 0..2 {
                let mut fvec = Vector::zeros(rn * rn);
                for (c, v) in feature_coordinate(a, &gram).unwrap() {
                    fvec[c * rn + c] = v;
                }
                let dense = svec.dot(&(&guv * fvec));
                let got = s_f_inner(a, b, &gram, &reg).unwrap();
                assert!((dense - got).abs() < 1e-10);
                col_sum += got;
            }
            assert!(col_sum.abs() < 1e-10);
        }
    }

    #[test]
    fn s_f_matrix_zero_column() {
        let gram = synthetic_centered_gram(3, 2, 4);
        let mut gy = gram.g_y.clone();
        gy.column_mut(1).fill(0.0);
        let g2 = GramSet::from_centered(gram.g_u.clone(), gram.g_v.clone(), gy, 3, 2).unwrap();
        let s = s_f_matrix(&g2, &RegularizationParams::default()).unwrap();
        assert!(s.column(1).amax() == 0.0);
    }

    #[test]
    fn inner_product_identity() {
        let gram = random_gram(3, 2, 2, 13);
        let rn = gram.rn();
        let m1 = CoordinateMatrix { m: Mat::from_fn(rn, rn, |i, j| ((i * 7 + j) as f64).sin()) };
        let m2 = CoordinateMatrix { m: Mat::from_fn(rn, rn, |i, j| ((i + 3 * j) as f64).cos()) };
        let v1 = Vector::from_column_slice(m1.m.as_slice());
        let v2 = Vector::from_column_slice(m2.m.as_slice());
        let dense = v1.dot(&(gram.g_u.kronecker(&gram.g_v) * v2));
        assert!((dense - m1.inner(&m2, &gram.g_u, &gram.g_v)).abs() < 1e-8);
    }

    #[test]
    fn regularization_validation() {
        assert!(RegularizationParams::new(-1.0, 0.0, 0.0, 0.0).is_err());
        assert!(RegularizationParams::new(0.0, f64::NAN, 0.0, 0.0).is_err());
    }
}
