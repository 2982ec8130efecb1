//! Sign-normalized SVD features, RKHS bases over them, and Gram matrices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_index, NtsdrError, Result};
use crate::kernel::{centering_projector, kernel_matrix, kernel_row, KernelSpec};
use crate::linalg::{block_center, block_center_both, Mat, Spectrum, Vector};

/// Singular values below this fraction of the largest are dropped.
pub const RANK_TOL: f64 = 1e-10;
const SIGN_TOL: f64 = 1e-12;

/// Matrix-valued predictors with scalar responses.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub xs: Vec<Mat>,
    pub y: Vec<f64>,
}

impl SampleSet {
    pub fn new(xs: Vec<Mat>, y: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 {
            return Err(NtsdrError::InvalidArgument(format!(
                "need at least two samples, got {}",
                xs.len()
            )));
        }
        check_dim("responses", xs.len(), y.len())?;
        check_shapes(&xs, xs[0].nrows(), xs[0].ncols())?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(NtsdrError::NonFinite("response".into()));
        }
        Ok(SampleSet { xs, y })
    }

    pub fn n(&self) -> usize {
        self.xs.len()
    }

    pub fn p(&self) -> usize {
        self.xs[0].nrows()
    }

    pub fn q(&self) -> usize {
        self.xs[0].ncols()
    }
}

/// Checks every matrix is `p × q` with finite entries.
pub fn check_shapes(xs: &[Mat], p: usize, q: usize) -> Result<()> {
    for (a, x) in xs.iter().enumerate() {
        if x.nrows() != p || x.ncols() != q {
            return Err(NtsdrError::Sample {
                index: a,
                source: Box::new(NtsdrError::InvalidArgument(format!(
                    "expected {p}x{q} matrix, got {}x{}",
                    x.nrows(),
                    x.ncols()
                ))),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(NtsdrError::Sample {
                index: a,
                source: Box::new(NtsdrError::NonFinite("predictor entry".into())),
            });
        }
    }
    Ok(())
}

/// `x = Σ λ_i u_i v_iᵀ` with the first component of each `u_i` positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedSvd {
    pub lambda: Vec<f64>,
    pub u0: Vec<Vector>,
    pub v0: Vec<Vector>,
    pub effective_rank: usize,
}

pub fn signed_svd(x: &Mat) -> Result<SignedSvd> {
    let (p, q) = x.shape();
    let r = p.min(q);
    if r == 0 || x.iter().all(|v| *v == 0.0) {
        return Err(NtsdrError::DegenerateData("zero predictor matrix".into()));
    }
    let svd = x.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let vt = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let lambda1 = svd.singular_values[order[0]];

    let mut out = SignedSvd {
        lambda: Vec::with_capacity(r),
        u0: Vec::with_capacity(r),
        v0: Vec::with_capacity(r),
        effective_rank: 0,
    };
    for (pos, &k) in order.iter().enumerate() {
        let lam = svd.singular_values[k];
        if lam < RANK_TOL * lambda1 {
            log::warn!("rank-deficient predictor: factor {} dropped", pos + 1);
            out.lambda.push(0.0);
            out.u0.push(Vector::zeros(p));
            out.v0.push(Vector::zeros(q));
            continue;
        }
        if pos + 1 < r {
            let next = svd.singular_values[order[pos + 1]];
            if lam - next < RANK_TOL * lambda1 && next >= RANK_TOL * lambda1 {
                log::warn!("tied singular values at factor {}", pos + 1);
            }
        }
        let mut uk: Vector = u.column(k).into_owned();
        let mut vk: Vector = vt.row(k).transpose().into_owned();
        let pivot = if uk[0].abs() >= SIGN_TOL {
            uk[0]
        } else {
            log::warn!("zero leading component in left factor {}", pos + 1);
            uk.iter().copied().find(|c| c.abs() >= SIGN_TOL).unwrap_or(1.0)
        };
        if pivot < 0.0 {
            uk.neg_mut();
            vk.neg_mut();
        }
        out.lambda.push(lam);
        out.u0.push(uk);
        out.v0.push(vk);
        out.effective_rank += 1;
    }
    Ok(out)
}

/// Scaled factors `λ^{1/2}u⁰`, `λ^{1/2}v⁰` of one matrix.
pub fn scaled_factors(x: &Mat) -> Result<(Vec<Vector>, Vec<Vector>, Vec<f64>)> {
    let svd = signed_svd(x)?;
    let u = svd
        .u0
        .iter()
        .zip(&svd.lambda)
        .map(|(u, l)| u * l.sqrt())
        .collect();
    let v = svd
        .v0
        .iter()
        .zip(&svd.lambda)
        .map(|(v, l)| v * l.sqrt())
        .collect();
    Ok((u, v, svd.lambda))
}

/// Scaled factor vectors for all samples; composite index `(i, a) ↦ i·n + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFeatureSet {
    pub n: usize,
    pub r: usize,
    pub p: usize,
    pub q: usize,
    /// `lambda[a][i]`.
    pub lambda: Vec<Vec<f64>>,
    pub u: Vec<Vector>,
    pub v: Vec<Vector>,
    pub effective_rank: Vec<usize>,
}

impl SvdFeatureSet {
    #[inline]
    pub fn index(&self, i: usize, a: usize) -> usize {
        i * self.n + a
    }

    pub fn rn(&self) -> usize {
        self.r * self.n
    }
}

pub fn extract_features(xs: &[Mat]) -> Result<SvdFeatureSet> {
    if xs.is_empty() {
        return Err(NtsdrError::InvalidArgument("no samples".into()));
    }
    let (p, q) = xs[0].shape();
    check_shapes(xs, p, q)?;
    let n = xs.len();
    let r = p.min(q);
    let per_sample: Vec<_> = xs
        .par_iter()
        .enumerate()
        .map(|(a, x)| {
            signed_svd(x).map_err(|e| NtsdrError::Sample {
                index: a,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut u = vec![Vector::zeros(p); r * n];
    let mut v = vec![Vector::zeros(q); r * n];
    let mut lambda = Vec::with_capacity(n);
    let mut effective_rank = Vec::with_capacity(n);
    for (a, svd) in per_sample.iter().enumerate() {
        for i in 0..r {
            let s = svd.lambda[i].sqrt();
            u[i * n + a] = &svd.u0[i] * s;
            v[i * n + a] = &svd.v0[i] * s;
        }
        lambda.push(svd.lambda.clone());
        effective_rank.push(svd.effective_rank);
    }
    Ok(SvdFeatureSet {
        n,
        r,
        p,
        q,
        lambda,
        u,
        v,
        effective_rank,
    })
}

/// Kernels on the U-factor, V-factor and response spaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelTriple {
    pub u: KernelSpec,
    pub v: KernelSpec,
    pub y: KernelSpec,
}

impl KernelTriple {
    /// Bandwidths from the pairwise-distance rule with the given multipliers.
    pub fn heuristic(features: &SvdFeatureSet, y: &[f64], rho: [f64; 3]) -> Result<Self> {
        let ys: Vec<Vector> = y.iter().map(|&v| Vector::from_element(1, v)).collect();
        Ok(KernelTriple {
            u: KernelSpec::from_points(&features.u, rho[0])?,
            v: KernelSpec::from_points(&features.v, rho[1])?,
            y: KernelSpec::from_points(&ys, rho[2])?,
        })
    }
}

/// Kernel and centered Gram matrices with cached eigendecompositions of `G_U`, `G_V`.
#[derive(Debug, Clone)]
pub struct GramSet {
    pub n: usize,
    pub r: usize,
    pub k_u: Mat,
    pub k_v: Mat,
    pub k_y: Mat,
    pub g_u: Mat,
    pub g_v: Mat,
    pub g_y: Mat,
    pub q_n: Mat,
    pub spectrum_u: Spectrum,
    pub spectrum_v: Spectrum,
}

impl GramSet {
    /// Centers raw kernel matrices.
    pub fn from_kernels(k_u: Mat, k_v: Mat, k_y: Mat, n: usize, r: usize) -> Result<Self> {
        check_dim("U kernel matrix", r * n, k_u.nrows())?;
        check_dim("V kernel matrix", r * n, k_v.nrows())?;
        check_dim("response kernel matrix", n, k_y.nrows())?;
        let q_n = centering_projector(n);
        let g_u = block_center_both(&k_u, n);
        let g_v = block_center_both(&k_v, n);
        let g_y = block_center_both(&k_y, n);
        Self::assemble(k_u, k_v, k_y, g_u, g_v, g_y, q_n, n, r)
    }

    /// Uses the supplied matrices as both kernel and centered Gram (synthetic problems).
    pub fn from_centered(g_u: Mat, g_v: Mat, g_y: Mat, n: usize, r: usize) -> Result<Self> {
        check_dim("U Gram matrix", r * n, g_u.nrows())?;
        check_dim("V Gram matrix", r * n, g_v.nrows())?;
        check_dim("response Gram matrix", n, g_y.nrows())?;
        let q_n = centering_projector(n);
        Self::assemble(
            g_u.clone(),
            g_v.clone(),
            g_y.clone(),
            g_u,
            g_v,
            g_y,
            q_n,
            n,
            r,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        k_u: Mat,
        k_v: Mat,
        k_y: Mat,
        g_u: Mat,
        g_v: Mat,
        g_y: Mat,
        q_n: Mat,
        n: usize,
        r: usize,
    ) -> Result<Self> {
        let spectrum_u = Spectrum::new(&g_u)?;
        let spectrum_v = Spectrum::new(&g_v)?;
        Ok(GramSet {
            n,
            r,
            k_u,
            k_v,
            k_y,
            g_u,
            g_v,
            g_y,
            q_n,
            spectrum_u,
            spectrum_v,
        })
    }

    pub fn rn(&self) -> usize {
        self.r * self.n
    }
}

pub fn build_grams(features: &SvdFeatureSet, y: &[f64], specs: &KernelTriple) -> Result<GramSet> {
    check_dim("responses", features.n, y.len())?;
    let ys: Vec<Vector> = y.iter().map(|&v| Vector::from_element(1, v)).collect();
    let k_u = kernel_matrix(&features.u, &specs.u)?;
    let k_v = kernel_matrix(&features.v, &specs.v)?;
    let k_y = kernel_matrix(&ys, &specs.y)?;
    GramSet::from_kernels(k_u, k_v, k_y, features.n, features.r)
}

/// Nonzeros of the coordinate of `F(X_a) − E_n F`: entry `(c, value)` sits at position `(c, c)`.
pub fn feature_coordinate(a: usize, gram: &GramSet) -> Result<Vec<(usize, f64)>> {
    let n = gram.n;
    check_index(a, n)?;
    let mut out = Vec::with_capacity(gram.rn());
    for i in 0..gram.r {
        for b in 0..n {
            out.push((i * n + b, gram.q_n[(b, a)]));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    U,
    V,
}

/// Centered basis values `κ(x, P_{ia}) − n⁻¹ Σ_b κ(x, P_{ib})` over all `rn` basis indices.
pub fn centered_basis_values(
    point: &[f64],
    points: &[Vector],
    n: usize,
    spec: &KernelSpec,
) -> Result<Vector> {
    let raw = kernel_row(point, points, spec)?;
    Ok(block_center(&raw, n))
}

/// Value at `point` of the function with coordinate `coord` in the centered basis.
pub fn evaluate_basis_function(
    coord: &Vector,
    mode: Mode,
    point: &[f64],
    training: &SvdFeatureSet,
    spec: &KernelSpec,
) -> Result<f64> {
    check_dim("basis coordinate", training.rn(), coord.len())?;
    let (points, dim) = match mode {
        Mode::U => (&training.u, training.p),
        Mode::V => (&training.v, training.q),
    };
    check_dim("evaluation point", dim, point.len())?;
    Ok(coord.dot(&centered_basis_values(point, points, training.n, spec)?))
}

/// Everything needed to evaluate fitted functions on new predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingBasis {
    pub n: usize,
    pub r: usize,
    pub p: usize,
    pub q: usize,
    pub u: Vec<Vector>,
    pub v: Vec<Vector>,
    pub kernels: KernelTriple,
}

impl TrainingBasis {
    pub fn new(features: &SvdFeatureSet, kernels: KernelTriple) -> Self {
        TrainingBasis {
            n: features.n,
            r: features.r,
            p: features.p,
            q: features.q,
            u: features.u.clone(),
            v: features.v.clone(),
            kernels,
        }
    }

    /// Per-sample `rn × r` matrices of centered basis values at the factors of each `x`.
    pub fn basis_columns(&self, xs: &[Mat]) -> Result<Vec<(Mat, Mat)>> {
        check_shapes(xs, self.p, self.q)?;
        xs.par_iter()
            .enumerate()
            .map(|(a, x)| {
                self.basis_columns_one(x).map_err(|e| NtsdrError::Sample {
                    index: a,
                    source: Box::new(e),
                })
            })
            .collect()
    }

    fn basis_columns_one(&self, x: &Mat) -> Result<(Mat, Mat)> {
        let (uf, vf, _) = scaled_factors(x)?;
        let rn = self.r * self.n;
        let mut phi_u = Mat::zeros(rn, self.r);
        let mut phi_v = Mat::zeros(rn, self.r);
        for i in 0..self.r {
            phi_u.set_column(
                i,
                &centered_basis_values(uf[i].as_slice(), &self.u, self.n, &self.kernels.u)?,
            );
            phi_v.set_column(
                i,
                &centered_basis_values(vf[i].as_slice(), &self.v, self.n, &self.kernels.v)?,
            );
        }
        Ok((phi_u, phi_v))
    }
}

/// Features, bandwidths and Grams of a training set, computed once and shared by fits.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub features: SvdFeatureSet,
    pub kernels: KernelTriple,
    pub gram: GramSet,
    pub y: Vec<f64>,
}

impl PreparedData {
    pub fn new(samples: &SampleSet, rho: [f64; 3]) -> Result<Self> {
        let features = extract_features(&samples.xs)?;
        let kernels = KernelTriple::heuristic(&features, &samples.y, rho)?;
        Self::with_kernels(features, kernels, samples.y.clone())
    }

    pub fn with_kernels(features: SvdFeatureSet, kernels: KernelTriple, y: Vec<f64>) -> Result<Self> {
        let gram = build_grams(&features, &y, &kernels)?;
        Ok(PreparedData {
            features,
            kernels,
            gram,
            y,
        })
    }

    pub fn basis(&self) -> TrainingBasis {
        TrainingBasis::new(&self.features, self.kernels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_matrix(p: usize, q: usize, rng: &mut ChaCha8Rng) -> Mat {
        Mat::from_fn(p, q, |_, _| StandardNormal.sample(rng))
    }

    fn reconstruct(svd: &SignedSvd, p: usize, q: usize) -> Mat {
        let mut m = Mat::zeros(p, q);
        for i in 0..svd.lambda.len() {
            m += &svd.u0[i] * svd.v0[i].transpose() * svd.lambda[i];
        }
        m
    }

    #[test]
    fn signed_svd_diagonal() {
        let svd = signed_svd(&Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(svd.lambda[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(svd.lambda[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(svd.u0[0], Vector::from_row_slice(&[1.0, 0.0]), epsilon = 1e-14);
        assert_abs_diff_eq!(svd.u0[1], Vector::from_row_slice(&[0.0, 1.0]), epsilon = 1e-14);
        assert_abs_diff_eq!(svd.v0[0], Vector::from_row_slice(&[1.0, 0.0]), epsilon = 1e-14);
        assert_abs_diff_eq!(svd.v0[1], Vector::from_row_slice(&[0.0, 1.0]), epsilon = 1e-14);
    }

    #[test]
    fn signed_svd_negative_scalar() {
        let svd = signed_svd(&Mat::from_element(1, 1, -3.0)).unwrap();
        assert_abs_diff_eq!(svd.lambda[0], 3.0, epsilon = 1e-14);
        assert_eq!(svd.u0[0][0], 1.0);
        assert_eq!(svd.v0[0][0], -1.0);
    }

    #[test]
    fn signed_svd_random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = normal_matrix(3, 2, &mut rng);
        let svd = signed_svd(&x).unwrap();
        assert!((reconstruct(&svd, 3, 2) - &x).norm() < 1e-10);
        assert!(svd.u0.iter().all(|u| u[0] > 0.0));
        assert!(svd.lambda[0] >= svd.lambda[1]);
    }

    #[test]
    fn signed_svd_rank_deficient_drops_factor() {
        let x = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let svd = signed_svd(&x).unwrap();
        assert_eq!(svd.effective_rank, 1);
        assert_eq!(svd.lambda[1], 0.0);
        assert_eq!(svd.u0[1].norm(), 0.0);
        assert!((reconstruct(&svd, 2, 2) - &x).norm() < 1e-12);
    }

    #[test]
    fn signed_svd_zero_leading_component_uses_next() {
        let x = Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -2.0]);
        let svd = signed_svd(&x).unwrap();
        assert_eq!(svd.effective_rank, 1);
        assert!(svd.u0[0][1] > 0.0);
        assert!((reconstruct(&svd, 2, 2) - &x).norm() < 1e-12);
    }

    #[test]
    fn signed_svd_zero_matrix_errors() {
        assert!(signed_svd(&Mat::zeros(2, 3)).is_err());
    }

    #[test]
    fn extract_features_examples() {
        let f = extract_features(&[
            Mat::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.0]),
            Mat::identity(2, 2),
        ])
        .unwrap();
        assert_abs_diff_eq!(f.u[f.index(0, 0)], Vector::from_row_slice(&[2.0, 0.0]), epsilon = 1e-14);
        assert_abs_diff_eq!(f.v[f.index(0, 0)], Vector::from_row_slice(&[2.0, 0.0]), epsilon = 1e-14);
        assert_eq!(f.effective_rank, vec![1, 2]);
        for i in 0..2 {
            let mut e = Vector::zeros(2);
            e[i] = 1.0;
            assert_abs_diff_eq!(f.u[f.index(i, 1)], e, epsilon = 1e-14);
            assert_abs_diff_eq!(f.v[f.index(i, 1)], e, epsilon = 1e-14);
        }
    }

    #[test]
    fn extract_features_reports_sample_index() {
        let err = extract_features(&[Mat::identity(2, 2), Mat::zeros(2, 2)]).unwrap_err();
        assert!(matches!(err, NtsdrError::Sample { index: 1, .. }));
    }

    #[test]
    fn two_sample_gram_by_hand() {
        let k = 0.3;
        let k_u = Mat::from_row_slice(2, 2, &[1.0, k, k, 1.0]);
        let g = GramSet::from_kernels(k_u.clone(), k_u, Mat::identity(2, 2), 2, 1).unwrap();
        let expected = Mat::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]) * ((1.0 - k) / 2.0);
        assert_abs_diff_eq!(g.g_u, expected, epsilon = 1e-15);
    }

    #[test]
    fn identity_response_kernel_gives_projector() {
        let k = Mat::identity(3, 3);
        let g = GramSet::from_kernels(k.clone(), k.clone(), k, 3, 1).unwrap();
        assert_abs_diff_eq!(g.g_y, centering_projector(3), epsilon = 1e-15);
    }

    fn small_problem(n: usize, p: usize, q: usize, seed: u64) -> (SvdFeatureSet, GramSet, KernelTriple) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Mat> = (0..n).map(|_| normal_matrix(p, q, &mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let f = extract_features(&xs).unwrap();
        let specs = KernelTriple::heuristic(&f, &y, [1.0; 3]).unwrap();
        let g = build_grams(&f, &y, &specs).unwrap();
        (f, g, specs)
    }

    #[test]
    fn grams_annihilate_block_constants() {
        let (_, g, _) = small_problem(6, 3, 2, 4);
        let n = g.n;
        for i in 0..g.r {
            for row in 0..g.rn() {
                let s: f64 = (0..n).map(|b| g.g_u[(row, i * n + b)]).sum();
                assert!(s.abs() < 1e-10);
                let s: f64 = (0..n).map(|b| g.g_v[(row, i * n + b)]).sum();
                assert!(s.abs() < 1e-10);
            }
        }
        assert!(g.spectrum_u.values.min() > -1e-10);
    }

    #[test]
    fn feature_coordinate_examples() {
        let k = Mat::identity(2, 2);
        let g = GramSet::from_kernels(k.clone(), k.clone(), k, 2, 1).unwrap();
        assert_eq!(feature_coordinate(0, &g).unwrap(), vec![(0, 0.5), (1, -0.5)]);
        assert!(feature_coordinate(2, &g).is_err());

        let k6 = Mat::identity(6, 6);
        let g = GramSet::from_kernels(k6.clone(), k6, Mat::identity(3, 3), 3, 2).unwrap();
        let mut total = [0.0; 6];
        for a in 0..3 {
            let c = feature_coordinate(a, &g).unwrap();
            assert_eq!(c.len(), 6);
            for (pos, val) in &c {
                assert_eq!(*val, g.q_n[(pos % 3, a)]);
                total[*pos] += val;
            }
        }
        assert!(total.iter().all(|t| t.abs() < 1e-15));
    }

    #[test]
    fn basis_function_in_sample_consistency() {
        let (f, g, specs) = small_problem(5, 3, 2, 8);
        let coord = Vector::from_fn(f.rn(), |i, _| (i as f64 * 0.7).sin());
        let mut pk = g.k_u.clone();
        crate::linalg::block_center_cols(&mut pk, f.n);
        let expected = pk.transpose() * &coord;
        for c in 0..f.rn() {
            let val =
                evaluate_basis_function(&coord, Mode::U, f.u[c].as_slice(), &f, &specs.u).unwrap();
            assert!((val - expected[c]).abs() < 1e-12);
        }
        let zero = Vector::zeros(f.rn());
        assert_eq!(
            evaluate_basis_function(&zero, Mode::V, f.v[0].as_slice(), &f, &specs.v).unwrap(),
            0.0
        );
        assert!(evaluate_basis_function(&coord, Mode::U, &[0.0], &f, &specs.u).is_err());
    }

    #[test]
    fn basis_function_far_point_vanishes() {
        let (f, _, specs) = small_problem(4, 2, 2, 2);
        let mut coord = Vector::zeros(f.rn());
        coord[3] = 1.0;
        let val = evaluate_basis_function(&coord, Mode::U, &[1e4, 1e4], &f, &specs.u).unwrap();
        assert!(val.abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn reconstruction_and_sign(seed in 0u64..10_000, p in 1usize..6, q in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = normal_matrix(p, q, &mut rng);
            let svd = signed_svd(&x).unwrap();
            prop_assert!((reconstruct(&svd, p, q) - &x).norm() <= 1e-8 * x.norm());
            for (u, l) in svd.u0.iter().zip(&svd.lambda) {
                if *l > 0.0 { prop_assert!(u[0] > 0.0); }
            }
            for w in svd.lambda.windows(2) { prop_assert!(w[0] >= w[1]); }
            let again = signed_svd(&x).unwrap();
            prop_assert_eq!(svd, again);
            let (u, v, lam) = scaled_factors(&x).unwrap();
            for i in 0..lam.len() {
                prop_assert!((u[i].norm() * v[i].norm() - lam[i]).abs() < 1e-10 * lam[0]);
            }
        }
    }
}
