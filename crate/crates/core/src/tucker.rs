//! Tucker-form estimator: alternating closed-form updates of `(f, g, h)`.
//!
//! All three steps minimize the shared objective
//! `J = n⁻¹ Σ_a ‖Ŝ_a − Σ_{kl} h_{kl}(Y_a) f_k g_l‖²` in the regularized metric
//! `Ĝ = G + ε λ_max I`, where `Ĝ_V Ŝ_a Ĝ_U = r⁻¹ (I⊗Q) Diag(d_a) (I⊗Q)`.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, NtsdrError, Result};
use crate::feature::{GramSet, PreparedData, SampleSet, TrainingBasis};
use crate::linalg::{block_center_rows, cholesky_lower, inverse_spd, Mat, Vector};
use crate::operator::{EstimatorMetric, RegularizationParams};

#[derive(Debug, Clone, PartialEq)]
pub struct TuckerConfig {
    pub s: usize,
    pub t: usize,
    pub reg: RegularizationParams,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl TuckerConfig {
    pub fn new(s: usize, t: usize) -> Self {
        TuckerConfig {
            s,
            t,
            reg: RegularizationParams::default(),
            seed: 0,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuckerModel {
    pub s: usize,
    pub t: usize,
    /// `s × rn`; row `k` is the coordinate of `f_k`.
    pub f_coef: Mat,
    /// `t × rn`; row `l` is the coordinate of `g_l`.
    pub g_coef: Mat,
    /// `H(Y_a)`, one `s × t` matrix per training sample.
    pub h_vals: Vec<Mat>,
    pub reg: RegularizationParams,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub training: TrainingBasis,
}

fn check_h(h_vals: &[Mat], n: usize, rows: usize, cols: usize) -> Result<()> {
    check_dim("number of H matrices", n, h_vals.len())?;
    for h in h_vals {
        if h.nrows() != rows || h.ncols() != cols {
            return Err(NtsdrError::InvalidArgument(format!(
                "H matrix is {}x{}, expected {rows}x{cols}",
                h.nrows(),
                h.ncols()
            )));
        }
    }
    Ok(())
}

/// Solves for one side given the other: returns `A⁻¹ r⁻¹ Σ_a H_a O P D_a P Ĝ_self⁻¹` with
/// `A = Σ_a H_a O Ĝ_other Oᵀ H_aᵀ`. `h[a]` is `out × other_rows`.
fn solve_side(
    other: &Mat,
    h: &[Mat],
    ghat_other: &Mat,
    inv_self: &Mat,
    metric: &EstimatorMetric,
    context: &str,
) -> Result<Mat> {
    let n = metric.n;
    let rn = metric.rn();
    check_dim(context, rn, other.ncols())?;
    let out = h[0].nrows();
    let m = other.nrows();
    if h.iter().all(|ha| ha.iter().all(|v| *v == 0.0)) {
        return Ok(Mat::zeros(out, rn));
    }
    // hg[(k, j)][b] = Σ_a G_Y[b, a] H_a[k, j]
    let mut hs = Mat::zeros(out * m, n);
    for (a, ha) in h.iter().enumerate() {
        for k in 0..out {
            for j in 0..m {
                hs[(k * m + j, a)] = ha[(k, j)];
            }
        }
    }
    let hg = hs * &metric.g_y;
    let mut op = other.clone();
    block_center_rows(&mut op, n);
    let mut x = Mat::zeros(out, rn);
    for c in 0..rn {
        let b = c % n;
        for k in 0..out {
            let mut acc = 0.0;
            for j in 0..m {
                acc += op[(j, c)] * hg[(k * m + j, b)];
            }
            x[(k, c)] = acc;
        }
    }
    block_center_rows(&mut x, n);
    let rhs = x * inv_self / metric.r as f64;

    let inner = other * ghat_other * other.transpose();
    let mut a_mat = Mat::zeros(out, out);
    for ha in h {
        a_mat += ha * &inner * ha.transpose();
    }
    let mut sol = inverse_spd(&a_mat, context)? * rhs;
    block_center_rows(&mut sol, n);
    Ok(sol)
}

/// Exact minimizer over `f` with `(g, h)` fixed.
pub fn update_f(g_coef: &Mat, h_vals: &[Mat], metric: &EstimatorMetric) -> Result<Mat> {
    let s = h_vals.first().map(|h| h.nrows()).unwrap_or(0);
    check_h(h_vals, metric.n, s, g_coef.nrows())?;
    solve_side(g_coef, h_vals, &metric.ghat_v, &metric.inv_u, metric, "f update")
}

/// Exact minimizer over `g` with `(f, h)` fixed.
pub fn update_g(f_coef: &Mat, h_vals: &[Mat], metric: &EstimatorMetric) -> Result<Mat> {
    let t = h_vals.first().map(|h| h.ncols()).unwrap_or(0);
    check_h(h_vals, metric.n, f_coef.nrows(), t)?;
    let ht: Vec<Mat> = h_vals.iter().map(|h| h.transpose()).collect();
    solve_side(f_coef, &ht, &metric.ghat_u, &metric.inv_v, metric, "g update")
}

/// `B_a[k, l] = ⟨f_k g_l, Ŝ_a⟩ = r⁻¹ (P g_l)ᵀ Diag(d_a) (P f_k)`, returned as an `st × n`
/// matrix with row `k·t + l`.
pub(crate) fn projections(f_coef: &Mat, g_coef: &Mat, metric: &EstimatorMetric) -> Mat {
    let n = metric.n;
    let rn = metric.rn();
    let (s, t) = (f_coef.nrows(), g_coef.nrows());
    let mut fp = f_coef.clone();
    block_center_rows(&mut fp, n);
    let mut gp = g_coef.clone();
    block_center_rows(&mut gp, n);
    let mut z = Mat::zeros(s * t, n);
    for k in 0..s {
        for l in 0..t {
            for c in 0..rn {
                z[(k * t + l, c % n)] += fp[(k, c)] * gp[(l, c)];
            }
        }
    }
    z * &metric.g_y / metric.r as f64
}

fn unstack(b: &Mat, a: usize, s: usize, t: usize) -> Mat {
    Mat::from_fn(s, t, |k, l| b[(k * t + l, a)])
}

/// Exact minimizer over `h(Y_a)` for every sample with `(f, g)` fixed.
pub fn update_h(f_coef: &Mat, g_coef: &Mat, metric: &EstimatorMetric) -> Result<Vec<Mat>> {
    check_dim("f coefficients", metric.rn(), f_coef.ncols())?;
    check_dim("g coefficients", metric.rn(), g_coef.ncols())?;
    let (s, t) = (f_coef.nrows(), g_coef.nrows());
    let af_inv = inverse_spd(&(f_coef * &metric.ghat_u * f_coef.transpose()), "h update (f block)")?;
    let ag_inv = inverse_spd(&(g_coef * &metric.ghat_v * g_coef.transpose()), "h update (g block)")?;
    let b = projections(f_coef, g_coef, metric);
    Ok((0..metric.n)
        .map(|a| &af_inv * unstack(&b, a, s, t) * &ag_inv)
        .collect())
}

/// `J / n` for the current blocks.
pub fn objective(f_coef: &Mat, g_coef: &Mat, h_vals: &[Mat], metric: &EstimatorMetric) -> f64 {
    objective_with_norm(f_coef, g_coef, h_vals, metric, metric.target_norm_total())
}

fn objective_with_norm(
    f_coef: &Mat,
    g_coef: &Mat,
    h_vals: &[Mat],
    metric: &EstimatorMetric,
    norm_total: f64,
) -> f64 {
    let (s, t) = (f_coef.nrows(), g_coef.nrows());
    let af = f_coef * &metric.ghat_u * f_coef.transpose();
    let ag = g_coef * &metric.ghat_v * g_coef.transpose();
    let b = projections(f_coef, g_coef, metric);
    let mut total = norm_total;
    for (a, h) in h_vals.iter().enumerate() {
        let ba = unstack(&b, a, s, t);
        total -= 2.0 * h.component_mul(&ba).sum();
        total += h.component_mul(&(&af * h * &ag)).sum();
    }
    total / metric.n as f64
}

/// Rows `w ⊗ c` for the leading eigenvectors `w` of `Q (Q ∘ G_Y²) Q`, the common diagonal
/// block of `Σ_a Γ_aᵀ Γ_a`, paired with an orthonormal basis `c` of `ℝ^r` starting at `1/√r`.
pub(crate) fn response_eigen_init(gram_y: &Mat, n: usize, r: usize, count: usize) -> Mat {
    let q = crate::kernel::centering_projector(n);
    let m = &q * q.component_mul(&(gram_y * gram_y)) * &q;
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut seed = Mat::identity(r, r);
    seed.column_mut(0).fill(1.0);
    let basis = seed.qr().q();
    let mut out = Mat::zeros(count, r * n);
    let mut row = 0;
    'outer: for &w in &order {
        for m_idx in 0..r {
            if row == count {
                break 'outer;
            }
            let mut wv: Vector = eig.eigenvectors.column(w).into_owned();
            if let Some(first) = wv.iter().copied().find(|x| x.abs() > 1e-12) {
                if first < 0.0 {
                    wv.neg_mut();
                }
            }
            let c = basis.column(m_idx);
            let sign = if c[0] < 0.0 { -1.0 } else { 1.0 };
            for i in 0..r {
                for b in 0..n {
                    out[(row, i * n + b)] = sign * c[i] * wv[b];
                }
            }
            row += 1;
        }
    }
    out
}

/// Fits from raw samples with bandwidth multipliers `rho = [ρ_U, ρ_V, ρ_Y]`.
pub fn fit_tucker(samples: &SampleSet, cfg: &TuckerConfig, rho: [f64; 3]) -> Result<TuckerModel> {
    let data = PreparedData::new(samples, rho)?;
    fit_tucker_prepared(&data, cfg)
}

pub fn fit_tucker_prepared(data: &PreparedData, cfg: &TuckerConfig) -> Result<TuckerModel> {
    fit_tucker_gram(&data.gram, data.basis(), cfg)
}

pub fn fit_tucker_gram(gram: &GramSet, training: TrainingBasis, cfg: &TuckerConfig) -> Result<TuckerModel> {
    let rn = gram.rn();
    if cfg.s == 0 || cfg.t == 0 {
        return Err(NtsdrError::validation("s/t", "dimensions must be at least 1"));
    }
    if cfg.s * cfg.t > rn {
        return Err(NtsdrError::validation(
            "s/t",
            format!("s·t = {} exceeds rn = {rn}", cfg.s * cfg.t),
        ));
    }
    if cfg.max_iter == 0 {
        return Err(NtsdrError::validation("max_iter", "must be at least 1"));
    }
    let metric = EstimatorMetric::new(gram, cfg.reg.eps_u, cfg.reg.eps_v)?;
    let norm_total = metric.target_norm_total();
    let n = gram.n;

    let mut g = response_eigen_init(&gram.g_y, n, gram.r, cfg.t);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut h: Vec<Mat> = (0..n)
        .map(|_| Mat::from_fn(cfg.s, cfg.t, |_, _| StandardNormal.sample(&mut rng)))
        .collect();
    let mut f = update_f(&g, &h, &metric)?;

    let mut trace = vec![objective_with_norm(&f, &g, &h, &metric, norm_total)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        h = update_h(&f, &g, &metric)?;
        f = update_f(&g, &h, &metric)?;
        g = update_g(&f, &h, &metric)?;
        iterations += 1;
        let obj = objective_with_norm(&f, &g, &h, &metric, norm_total);
        if !obj.is_finite() {
            return Err(NtsdrError::NonFinite(format!(
                "Tucker objective at iteration {iterations} (previous {:?})",
                trace.last()
            )));
        }
        let prev = *trace.last().expect("trace nonempty");
        trace.push(obj);
        let scale = prev.abs().max(f64::MIN_POSITIVE);
        if (prev - obj) / scale < cfg.tol {
            converged = true;
            break;
        }
    }

    let (f, g, h) = orthonormalize(f, g, h, &metric);
    Ok(TuckerModel {
        s: cfg.s,
        t: cfg.t,
        f_coef: f,
        g_coef: g,
        h_vals: h,
        reg: cfg.reg,
        objective_trace: trace,
        iterations,
        converged,
        training,
    })
}

/// Makes rows of `f`, `g` orthonormal in the `Ĝ` metric; `H` is counter-transformed so
/// the fitted element `Σ h_{kl} f_k g_l` is unchanged.
fn orthonormalize(f: Mat, g: Mat, h: Vec<Mat>, metric: &EstimatorMetric) -> (Mat, Mat, Vec<Mat>) {
    let af = &f * &metric.ghat_u * f.transpose();
    let ag = &g * &metric.ghat_v * g.transpose();
    match (cholesky_lower(&af, "f Gram"), cholesky_lower(&ag, "g Gram")) {
        (Ok(l), Ok(m)) => {
            let (Some(li), Some(mi)) = (l.clone().try_inverse(), m.clone().try_inverse()) else {
                log::warn!("skipping orthonormalization: triangular factor not invertible");
                return (f, g, h);
            };
            let f2 = &li * f;
            let g2 = &mi * g;
            let lt = l.transpose();
            let h2 = h.iter().map(|ha| &lt * ha * &m).collect();
            (f2, g2, h2)
        }
        _ => {
            log::warn!("skipping orthonormalization: coefficient Gram not positive definite");
            (f, g, h)
        }
    }
}

impl TuckerModel {
    pub fn rn(&self) -> usize {
        self.training.r * self.training.n
    }

    /// Coordinates of the fitted element `Σ_{kl} h_{kl}(Y_a) f_k g_l` (V rows, U columns).
    pub fn fitted_coordinates(&self, a: usize) -> Mat {
        self.g_coef.transpose() * self.h_vals[a].transpose() * &self.f_coef
    }
}

/// Per-sample `s × t` sufficient predictors `Σ_i f_k(U_i(x)) g_l(V_i(x))`.
pub fn evaluate_tucker(model: &TuckerModel, xs: &[Mat]) -> Result<Vec<Mat>> {
    let cols = model.training.basis_columns(xs)?;
    Ok(cols
        .iter()
        .map(|(phi_u, phi_v)| (&model.f_coef * phi_u) * (&model.g_coef * phi_v).transpose())
        .collect())
}

/// In-sample predictors from the training Grams, without re-running any SVD.
pub fn in_sample_tucker(model: &TuckerModel, gram: &GramSet) -> Result<Vec<Mat>> {
    check_dim("training size", model.training.n, gram.n)?;
    let n = gram.n;
    let mut fp = model.f_coef.clone();
    block_center_rows(&mut fp, n);
    let mut gp = model.g_coef.clone();
    block_center_rows(&mut gp, n);
    let fk = fp * &gram.k_u;
    let gk = gp * &gram.k_v;
    Ok((0..n)
        .map(|a| {
            let mut m = Mat::zeros(model.s, model.t);
            for i in 0..gram.r {
                let c = i * n + a;
                m += fk.column(c) * gk.column(c).transpose();
            }
            m
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature::{build_grams, extract_features, KernelTriple, SvdFeatureSet};
    use crate::operator::CoordinateMatrix;
    use approx::assert_abs_diff_eq;
    use rand_distr::Normal;

    pub(crate) fn problem(n: usize, p: usize, q: usize, seed: u64) -> (SampleSet, PreparedData) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Mat> = (0..n)
            .map(|_| Mat::from_fn(p, q, |_, _| StandardNormal.sample(&mut rng)))
            .collect();
        let noise = Normal::new(0.0, 0.1).unwrap();
        let y: Vec<f64> = xs
            .iter()
            .map(|x| (x[(0, 0)] * x[(0, 1.min(q - 1))]).tanh() + noise.sample(&mut rng))
            .collect();
        let samples = SampleSet::new(xs, y).unwrap();
        let data = PreparedData::new(&samples, [1.0; 3]).unwrap();
        (samples, data)
    }

    fn dense_objective(f: &Mat, g: &Mat, h: &[Mat], metric: &EstimatorMetric) -> f64 {
        let mut total = 0.0;
        for (a, ha) in h.iter().enumerate() {
            let target = metric.target_coordinates(a);
            let fit = CoordinateMatrix { m: g.transpose() * ha.transpose() * f };
            let diff = CoordinateMatrix { m: target.m - fit.m };
            total += diff.inner(&diff, &metric.ghat_u, &metric.ghat_v);
        }
        total / metric.n as f64
    }

    fn random_blocks(s: usize, t: usize, rn: usize, n: usize, seed: u64) -> (Mat, Mat, Vec<Mat>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |r, c| Mat::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
        let f = draw(s, rn);
        let g = draw(t, rn);
        let h = (0..n).map(|_| draw(s, t)).collect();
        (f, g, h)
    }

    #[test]
    fn objective_matches_dense_evaluation() {
        let (_, data) = problem(6, 3, 2, 1);
        let metric = EstimatorMetric::new(&data.gram, 1e-2, 1e-2).unwrap();
        let (f, g, h) = random_blocks(2, 2, data.gram.rn(), 6, 3);
        let fast = objective(&f, &g, &h, &metric);
        let dense = dense_objective(&f, &g, &h, &metric);
        assert!((fast - dense).abs() < 1e-8 * dense.abs().max(1.0));
    }

    fn perturbation_check(
        metric: &EstimatorMetric,
        base: (&Mat, &Mat, &[Mat]),
        which: usize,
        seed: u64,
    ) {
        let (f, g, h) = base;
        let j0 = objective(f, g, h, metric);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, 1e-3).unwrap();
        for _ in 0..200 {
            let j = match which {
                0 => {
                    let fp = f + Mat::from_fn(f.nrows(), f.ncols(), |_, _| d.sample(&mut rng));
                    objective(&fp, g, h, metric)
                }
                1 => {
                    let gp = g + Mat::from_fn(g.nrows(), g.ncols(), |_, _| d.sample(&mut rng));
                    objective(f, &gp, h, metric)
                }
                _ => {
                    let hp: Vec<Mat> = h
                        .iter()
                        .map(|m| m + Mat::from_fn(m.nrows(), m.ncols(), |_, _| d.sample(&mut rng)))
                        .collect();
                    objective(f, g, &hp, metric)
                }
            };
            assert!(j0 <= j + 1e-8, "step {which}: {j0} > {j}");
        }
    }

    #[test]
    fn closed_form_steps_beat_perturbations() {
        let (_, data) = problem(8, 3, 3, 2);
        let metric = EstimatorMetric::new(&data.gram, 1e-2, 1e-2).unwrap();
        let (_, g, h) = random_blocks(2, 2, data.gram.rn(), 8, 5);
        let f1 = update_f(&g, &h, &metric).unwrap();
        perturbation_check(&metric, (&f1, &g, &h), 0, 1);
        let g1 = update_g(&f1, &h, &metric).unwrap();
        perturbation_check(&metric, (&f1, &g1, &h), 1, 2);
        let h1 = update_h(&f1, &g1, &metric).unwrap();
        perturbation_check(&metric, (&f1, &g1, &h1), 2, 3);
    }

    #[test]
    fn zero_inputs() {
        let (_, data) = problem(5, 2, 2, 4);
        let metric = EstimatorMetric::new(&data.gram, 1e-2, 1e-2).unwrap();
        let rn = data.gram.rn();
        let zeros: Vec<Mat> = (0..5).map(|_| Mat::zeros(1, 1)).collect();
        let g = Mat::from_element(1, rn, 1.0);
        assert_eq!(update_f(&g, &zeros, &metric).unwrap(), Mat::zeros(1, rn));
        assert_eq!(update_g(&g, &zeros, &metric).unwrap(), Mat::zeros(1, rn));
        assert!(update_h(&Mat::zeros(1, rn), &g, &metric).is_err());
        assert!(update_h(&g, &Mat::zeros(1, rn), &metric).is_err());
    }

    #[test]
    fn scalar_h_step_matches_ratio() {
        let (_, data) = problem(6, 3, 2, 7);
        let metric = EstimatorMetric::new(&data.gram, 1e-2, 1e-2).unwrap();
        let (f, g, _) = random_blocks(1, 1, data.gram.rn(), 6, 8);
        let h = update_h(&f, &g, &metric).unwrap();
        let fg = CoordinateMatrix::rank_one(&f.row(0).transpose(), &g.row(0).transpose());
        let norm = fg.inner(&fg, &metric.ghat_u, &metric.ghat_v);
        for (a, h_a) in h.iter().enumerate() {
            let s = metric.target_coordinates(a);
            let expect = fg.inner(&s, &metric.ghat_u, &metric.ghat_v) / norm;
            assert!((h_a[(0, 0)] - expect).abs() < 1e-10 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn scalar_f_step_matches_grid_minimum() {
        // n = 3, r = 1: two free centered directions for f; grid over them.
        let (_, data) = problem(3, 1, 2, 9);
        let metric = EstimatorMetric::new(&data.gram, 1e-2, 1e-2).unwrap();
        let g = Mat::from_row_slice(1, 3, &[0.8, -0.3, -0.5]);
        let h: Vec<Mat> = [1.2, -0.4, 0.7].iter().map(|&v| Mat::from_element(1, 1, v)).collect();
        let f_star = update_f(&g, &h, &metric).unwrap();
        let j_star = objective(&f_star, &g, &h, &metric);
        let b1 = Vector::from_row_slice(&[1.0, -1.0, 0.0]) / 2f64.sqrt();
        let b2 = Vector::from_row_slice(&[1.0, 1.0, -2.0]) / 6f64.sqrt();
        let c1 = f_star.row(0).transpose().dot(&b1);
        let c2 = f_star.row(0).transpose().dot(&b2);
        let span = 2.0 * (c1.abs() + c2.abs()).max(1.0);
        let steps = 400;
        let mut best = f64::INFINITY;
        let mut best_at = (0.0, 0.0);
        for i in 0..=steps {
            for j in 0..=steps {
                let x = -span + 2.0 * span * i as f64 / steps as f64;
                let y = -span + 2.0 * span * j as f64 / steps as f64;
                let v = &b1 * x + &b2 * y;
                let f = Mat::from_row_slice(1, 3, v.as_slice());
                let val = objective(&f, &g, &h, &metric);
                if val < best {
                    best = val;
                    best_at = (x, y);
                }
            }
        }
        let cell = 2.0 * span / steps as f64;
        assert!(j_star <= best + 1e-12);
        assert!((best_at.0 - c1).abs() <= cell && (best_at.1 - c2).abs() <= cell);
    }

    fn swap_features(f: &SvdFeatureSet) -> SvdFeatureSet {
        let mut out = f.clone();
        std::mem::swap(&mut out.u, &mut out.v);
        std::mem::swap(&mut out.p, &mut out.q);
        out
    }

    #[test]
    fn role_swap_symmetry() {
        let (samples, data) = problem(6, 3, 3, 12);
        let f = extract_features(&samples.xs).unwrap();
        let swapped = swap_features(&f);
        let kernels = KernelTriple { u: data.kernels.v, v: data.kernels.u, y: data.kernels.y };
        let gram_s = build_grams(&swapped, &samples.y, &kernels).unwrap();
        let metric = EstimatorMetric::new(&data.gram, 1e-2, 2e-2).unwrap();
        let metric_s = EstimatorMetric::new(&gram_s, 2e-2, 1e-2).unwrap();
        let (fc, _, h) = random_blocks(2, 3, data.gram.rn(), 6, 1);
        let g = update_g(&fc, &h, &metric).unwrap();
        let ht: Vec<Mat> = h.iter().map(|m| m.transpose()).collect();
        let f_s = update_f(&fc, &ht, &metric_s).unwrap();
        assert_abs_diff_eq!(g, f_s, epsilon = 1e-8 * g.amax().max(1.0));
    }

    #[test]
    fn fit_is_monotone_deterministic_and_orthonormal() {
        let (_, data) = problem(12, 3, 3, 3);
        let mut cfg = TuckerConfig::new(2, 2);
        cfg.reg = RegularizationParams::uniform(1e-3, 1e-2).unwrap();
        cfg.seed = 17;
        let m1 = fit_tucker_prepared(&data, &cfg).unwrap();
        let m2 = fit_tucker_prepared(&data, &cfg).unwrap();
        assert_eq!(m1.f_coef, m2.f_coef);
        for w in m1.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-8);
        }
        let metric = EstimatorMetric::new(&data.gram, 1e-2, 1e-2).unwrap();
        let af = &m1.f_coef * &metric.ghat_u * m1.f_coef.transpose();
        assert_abs_diff_eq!(af, Mat::identity(2, 2), epsilon = 1e-8);
        let last = *m1.objective_trace.last().unwrap();
        let h = update_h(&m1.f_coef, &m1.g_coef, &metric).unwrap();
        let direct = objective(&m1.f_coef, &m1.g_coef, &m1.h_vals, &metric);
        assert!((direct - last).abs() < 1e-8 * last.abs().max(1.0));
        assert!(objective(&m1.f_coef, &m1.g_coef, &h, &metric) <= last + 1e-8);
    }

    #[test]
    fn infinite_tolerance_runs_one_sweep() {
        let (_, data) = problem(8, 2, 3, 5);
        let mut cfg = TuckerConfig::new(1, 1);
        cfg.tol = f64::INFINITY;
        let m = fit_tucker_prepared(&data, &cfg).unwrap();
        assert_eq!(m.iterations, 1);
        assert!(m.objective_trace.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn invalid_dimensions_rejected() {
        let (_, data) = problem(4, 2, 2, 1);
        assert!(fit_tucker_prepared(&data, &TuckerConfig::new(0, 1)).is_err());
        assert!(fit_tucker_prepared(&data, &TuckerConfig::new(3, 3)).is_err());
    }

    #[test]
    fn out_of_sample_matches_in_sample() {
        let (samples, data) = problem(10, 3, 2, 21);
        let m = fit_tucker_prepared(&data, &TuckerConfig::new(2, 1)).unwrap();
        let oos = evaluate_tucker(&m, &samples.xs).unwrap();
        let ins = in_sample_tucker(&m, &data.gram).unwrap();
        for (a, b) in oos.iter().zip(&ins) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
        let mut zero = m.clone();
        zero.f_coef.fill(0.0);
        assert!(evaluate_tucker(&zero, &samples.xs[..2]).unwrap().iter().all(|v| v.amax() == 0.0));
        let dup = evaluate_tucker(&m, &[samples.xs[3].clone(), samples.xs[3].clone()]).unwrap();
        assert_eq!(dup[0], dup[1]);
        assert_eq!(dup[0], oos[3]);
    }
}
