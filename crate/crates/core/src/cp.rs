//! CP-form estimator: pairs `(f_k, g_k)` maximizing `M(f, g) = Σ_a (fᵀ Γ_a g)²`, extracted
//! one at a time by alternating leading-eigenvector steps and deflation.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, NtsdrError, Result};
use crate::feature::{GramSet, PreparedData, SampleSet, TrainingBasis};
use crate::linalg::{block_center, block_center_both, block_center_cols, block_center_rows, inverse_spd, Mat, Vector};
use crate::operator::{t_operator_adjoint_coords, t_operator_coords, EstimatorMetric, RegularizationParams};
use crate::tucker::{projections, response_eigen_init};

/// Pairs whose value falls below this fraction of the first are discarded.
pub const TRUNCATION_RATIO: f64 = 1e-12;

/// A family of `n` matrices `Γ_a`, accessed through products.
pub trait GammaSet {
    fn count(&self) -> usize;
    /// `(rows, cols)` of each `Γ_a`.
    fn dims(&self) -> (usize, usize);
    /// Columns `Γ_a y`.
    fn apply(&self, y: &Vector) -> Mat;
    /// Columns `Γ_aᵀ x`.
    fn apply_t(&self, x: &Vector) -> Mat;

    /// Leading left singular vector of `[Γ_1 y, …, Γ_n y]`.
    fn top_left(&self, y: &Vector) -> Option<Vector> {
        top_left_singular(&self.apply(y))
    }

    /// Leading left singular vector of `[Γ_1ᵀ x, …, Γ_nᵀ x]`.
    fn top_right(&self, x: &Vector) -> Option<Vector> {
        top_left_singular(&self.apply_t(x))
    }

    /// `M(f, g) = Σ_a (fᵀ Γ_a g)²`.
    fn value(&self, f: &Vector, g: &Vector) -> f64 {
        self.apply(g).tr_mul(f).norm_squared()
    }
}

/// Explicit matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGammas {
    pub mats: Vec<Mat>,
}

impl GammaSet for DenseGammas {
    fn count(&self) -> usize {
        self.mats.len()
    }

    fn dims(&self) -> (usize, usize) {
        self.mats.first().map(|m| m.shape()).unwrap_or((0, 0))
    }

    fn apply(&self, y: &Vector) -> Mat {
        let (rows, _) = self.dims();
        let mut z = Mat::zeros(rows, self.mats.len());
        for (a, m) in self.mats.iter().enumerate() {
            z.set_column(a, &(m * y));
        }
        z
    }

    fn apply_t(&self, x: &Vector) -> Mat {
        let (_, cols) = self.dims();
        let mut z = Mat::zeros(cols, self.mats.len());
        for (a, m) in self.mats.iter().enumerate() {
            z.set_column(a, &(m.tr_mul(x)));
        }
        z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DeflationMode {
    /// Oblique projector in the Gram metric; keeps RKHS orthonormality exact.
    #[default]
    Gram,
    /// Euclidean projector on coordinate vectors.
    Euclidean,
}

/// `Q = I − A Bᵀ`.
#[derive(Debug, Clone)]
struct Projector {
    a: Mat,
    bt: Mat,
}

impl Projector {
    fn new(prev: &Mat, metric: &Mat, mode: DeflationMode, context: &str) -> Result<Option<Self>> {
        if prev.ncols() == 0 {
            return Ok(None);
        }
        let bt = match mode {
            DeflationMode::Gram => {
                let mp = metric * prev;
                inverse_spd(&prev.tr_mul(&mp), context)? * mp.transpose()
            }
            DeflationMode::Euclidean => inverse_spd(&prev.tr_mul(prev), context)? * prev.transpose(),
        };
        Ok(Some(Projector { a: prev.clone(), bt }))
    }

    fn apply(&self, v: &Vector) -> Vector {
        v - &self.a * (&self.bt * v)
    }

    fn apply_t_cols(&self, z: &Mat) -> Mat {
        z - self.bt.transpose() * self.a.tr_mul(z)
    }

    fn matrix(&self) -> Mat {
        Mat::identity(self.a.nrows(), self.a.nrows()) - &self.a * &self.bt
    }
}

/// `Q_Fᵀ Γ_a Q_G` with projectors built from previous pairs (columns of `f_prev`, `g_prev`).
pub fn deflate(
    gammas: &DenseGammas,
    f_prev: &Mat,
    g_prev: &Mat,
    metric_u: &Mat,
    metric_v: &Mat,
    mode: DeflationMode,
) -> Result<DenseGammas> {
    let pf = Projector::new(f_prev, metric_u, mode, "deflation (f block)")?;
    let pg = Projector::new(g_prev, metric_v, mode, "deflation (g block)")?;
    let mats = gammas
        .mats
        .iter()
        .map(|m| {
            let left = match &pf {
                Some(p) => p.matrix().transpose() * m,
                None => m.clone(),
            };
            match &pg {
                Some(p) => left * p.matrix(),
                None => left,
            }
        })
        .collect();
    Ok(DenseGammas { mats })
}

/// Leading pair of a [`GammaSet`] in its own Euclidean coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadingPair {
    pub f: Vector,
    pub g: Vector,
    pub value: f64,
    pub iterations: usize,
    /// `M(f, g)` after every alternation.
    pub values: Vec<f64>,
}

/// Top left singular vector of `z`.
fn top_left_singular(z: &Mat) -> Option<Vector> {
    let (rows, cols) = z.shape();
    let v = if rows <= cols {
        let eig = (z * z.transpose()).symmetric_eigen();
        let k = eig.eigenvalues.imax();
        if eig.eigenvalues[k] <= 0.0 {
            return None;
        }
        eig.eigenvectors.column(k).into_owned()
    } else {
        let eig = z.tr_mul(z).symmetric_eigen();
        let k = eig.eigenvalues.imax();
        if eig.eigenvalues[k] <= 0.0 {
            return None;
        }
        let u = z * eig.eigenvectors.column(k);
        let norm = u.norm();
        if norm == 0.0 {
            return None;
        }
        u / norm
    };
    Some(sign_normalize(v))
}

fn sign_normalize(mut v: Vector) -> Vector {
    let norm = v.norm();
    if norm > 0.0 {
        v /= norm;
    }
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
    v
}

/// Power iteration on `Σ_a Γ_aᵀ Γ_a`, started from a fixed vector.
fn default_init(gammas: &impl GammaSet) -> Result<Vector> {
    let (_, cols) = gammas.dims();
    let mut v = Vector::from_fn(cols, |i, _| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_75).fract());
    v /= v.norm();
    for _ in 0..200 {
        let z = gammas.apply(&v);
        let mut w = Vector::zeros(cols);
        for (a, col) in z.column_iter().enumerate() {
            let x = col.into_owned();
            let zt = gammas.apply_t(&x);
            w += zt.column(a);
        }
        let norm = w.norm();
        if norm == 0.0 {
            return Err(NtsdrError::DegenerateSignal("all Γ_a are zero".into()));
        }
        let next = w / norm;
        let done = (&next - &v).norm() < 1e-10;
        v = next;
        if done {
            break;
        }
    }
    Ok(sign_normalize(v))
}

/// Alternates `f ← top eigenvector of Σ Γ_a g gᵀ Γ_aᵀ` and `g ← top eigenvector of
/// Σ Γ_aᵀ f fᵀ Γ_a` until `M` changes by less than `tol` relatively.
pub fn leading_pair(
    gammas: &impl GammaSet,
    init: Option<&Vector>,
    max_iter: usize,
    tol: f64,
) -> Result<LeadingPair> {
    let (_, cols) = gammas.dims();
    let mut g = match init {
        Some(v) => {
            check_dim("leading pair initial vector", cols, v.len())?;
            let norm = v.norm();
            if norm == 0.0 {
                default_init(gammas)?
            } else {
                v / norm
            }
        }
        None => default_init(gammas)?,
    };
    let mut values = Vec::new();
    let mut f = Vector::zeros(gammas.dims().0);
    let mut iterations = 0;
    while iterations < max_iter.max(1) {
        f = match gammas.top_left(&g) {
            Some(v) => v,
            None if iterations == 0 => {
                // Start orthogonal to the signal: restart from the default vector.
                let alt = default_init(gammas)?;
                if (&alt - &g).norm() < 1e-12 {
                    return Err(NtsdrError::DegenerateSignal("all Γ_a are zero".into()));
                }
                g = alt;
                iterations += 1;
                continue;
            }
            None => return Err(NtsdrError::DegenerateSignal("Γ_a g vanished".into())),
        };
        g = gammas
            .top_right(&f)
            .ok_or_else(|| NtsdrError::DegenerateSignal("Γ_aᵀ f vanished".into()))?;
        let value = pair_value(gammas, &f, &g);
        iterations += 1;
        let prev = values.last().copied();
        values.push(value);
        if let Some(prev) = prev {
            if (value - prev).abs() <= tol * value.abs() {
                break;
            }
        }
    }
    let value = *values
        .last()
        .ok_or_else(|| NtsdrError::DegenerateSignal("no admissible start vector".into()))?;
    Ok(LeadingPair {
        f,
        g,
        value,
        iterations,
        values,
    })
}

/// `M(f, g) = Σ_a (fᵀ Γ_a g)²`.
pub fn pair_value<G: GammaSet + ?Sized>(gammas: &G, f: &Vector, g: &Vector) -> f64 {
    gammas.value(f, g)
}

/// Columns `Γ_a v` for a raw coordinate vector.
fn gamma_columns(metric: &EstimatorMetric, v: &Vector) -> Mat {
    let n = metric.n;
    let rn = metric.rn();
    let scale = 1.0 / (n as f64 * (metric.r * metric.r) as f64);
    let pv = block_center(v, n);
    let mut z = Mat::zeros(rn, n);
    for a in 0..n {
        for c in 0..rn {
            z[(c, a)] = scale * pv[c] * metric.g_y[(c % n, a)];
        }
    }
    block_center_cols(&mut z, n);
    z
}

fn response_factor(g_y: &Mat) -> Mat {
    let eig = g_y.clone().symmetric_eigen();
    let cutoff = 1e-13 * eig.eigenvalues.amax();
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i].abs() > cutoff)
        .collect();
    Mat::from_fn(g_y.nrows(), keep.len(), |r, k| {
        eig.eigenvectors[(r, keep[k])] * eig.eigenvalues[keep[k]]
    })
}

/// Whitened, deflated `Γ̃_a = W_U Q_Fᵀ Γ_a Q_G W_V` with `Γ_a = n⁻¹r⁻² P Diag(d_a) P`,
/// never formed explicitly.
///
/// With `A_U = W_U Q_Fᵀ P`, the columns `Γ̃_a y` are `c A_U Diag(x) E G_Y` for
/// `x = P Q_G W_V y` and `E = 1_r ⊗ I_n`, so their `n × n` Gram only needs `A_Uᵀ A_U`.
struct WhitenedGammas<'a> {
    metric: &'a EstimatorMetric,
    w_u: &'a Mat,
    w_v: &'a Mat,
    left: Option<Projector>,
    right: Option<Projector>,
    a_u: Mat,
    a_v: Mat,
    m_u: Mat,
    m_v: Mat,
    /// `V Λ` over the numerically nonzero eigenpairs of `G_Y`; `G_Y = (VΛ) Λ⁻¹ (VΛ)ᵀ`.
    gy_factor: Mat,
}

impl<'a> WhitenedGammas<'a> {
    fn new(metric: &'a EstimatorMetric, w_u: &'a Mat, w_v: &'a Mat, left: Option<Projector>, right: Option<Projector>) -> Self {
        // With Q = I − a bᵀ: A = (W − (W b) aᵀ) P and AᵀA = P Q W² Qᵀ P, using W² = Ĝ⁻¹.
        let side = |w: &Mat, inv: &Mat, q: &Option<Projector>| {
            let (mut a, mut m) = (w.clone(), inv.clone());
            if let Some(q) = q {
                let wb = w * q.bt.transpose();
                a -= &wb * q.a.transpose();
                let xb = inv * q.bt.transpose();
                let bxb = &q.bt * &xb;
                let corr = &q.a * xb.transpose();
                m -= &corr + corr.transpose();
                m += &q.a * bxb * q.a.transpose();
            }
            block_center_rows(&mut a, metric.n);
            (a, block_center_both(&m, metric.n))
        };
        let (a_u, m_u) = side(w_u, &metric.inv_u, &left);
        let (a_v, m_v) = side(w_v, &metric.inv_v, &right);
        WhitenedGammas {
            gy_factor: response_factor(&metric.g_y),
            metric,
            w_u,
            w_v,
            left,
            right,
            a_u,
            a_v,
            m_u,
            m_v,
        }
    }

    fn scale(&self) -> f64 {
        1.0 / (self.metric.n as f64 * (self.metric.r * self.metric.r) as f64)
    }

    /// `P Q W y` for the input side of a product.
    fn input(&self, y: &Vector, w: &Mat, q: &Option<Projector>) -> Vector {
        let mut v = w * y;
        if let Some(q) = q {
            v = q.apply(&v);
        }
        block_center(&v, self.metric.n)
    }

    /// Leading left singular vector of `c A Diag(x) E G_Y` via its `n × n` Gram.
    fn top_from_gram(&self, x: &Vector, a: &Mat, m: &Mat) -> Option<Vector> {
        let n = self.metric.n;
        let rn = self.metric.rn();
        let mut folded = Mat::zeros(n, n);
        let xs = x.as_slice();
        for j in 0..rn {
            let xj = xs[j];
            if xj == 0.0 {
                continue;
            }
            let col = m.column(j);
            let b = j % n;
            let out = &mut folded.as_mut_slice()[b * n..(b + 1) * n];
            for (xb, cb) in xs.chunks(n).zip(col.as_slice().chunks(n)) {
                for ((o, xi), ci) in out.iter_mut().zip(xb).zip(cb) {
                    *o += xi * xj * ci;
                }
            }
        }
        // The Gram `c² G_Y C G_Y` has its nonzero spectrum in range(G_Y); solve it there.
        let l = &self.gy_factor;
        if l.ncols() == 0 {
            return None;
        }
        let c = self.scale();
        let k = l.tr_mul(&(folded * l)) * (c * c);
        let eig = k.symmetric_eigen();
        let top = eig.eigenvalues.imax();
        if eig.eigenvalues[top] <= 0.0 {
            return None;
        }
        let gv = l * eig.eigenvectors.column(top);
        let w = Vector::from_fn(rn, |i, _| x[i] * gv[i % n] * c);
        let u = a * w;
        let norm = u.norm();
        if norm == 0.0 {
            return None;
        }
        Some(sign_normalize(u / norm))
    }
}

impl GammaSet for WhitenedGammas<'_> {
    fn count(&self) -> usize {
        self.metric.n
    }

    fn dims(&self) -> (usize, usize) {
        (self.metric.rn(), self.metric.rn())
    }

    fn apply(&self, y: &Vector) -> Mat {
        let mut v = self.w_v * y;
        if let Some(q) = &self.right {
            v = q.apply(&v);
        }
        let mut z = gamma_columns(self.metric, &v);
        if let Some(q) = &self.left {
            z = q.apply_t_cols(&z);
        }
        self.w_u * z
    }

    fn apply_t(&self, x: &Vector) -> Mat {
        let mut v = self.w_u * x;
        if let Some(q) = &self.left {
            v = q.apply(&v);
        }
        let mut z = gamma_columns(self.metric, &v);
        if let Some(q) = &self.right {
            z = q.apply_t_cols(&z);
        }
        self.w_v * z
    }

    fn top_left(&self, y: &Vector) -> Option<Vector> {
        let x = self.input(y, self.w_v, &self.right);
        self.top_from_gram(&x, &self.a_u, &self.m_u)
    }

    fn top_right(&self, x: &Vector) -> Option<Vector> {
        let x = self.input(x, self.w_u, &self.left);
        self.top_from_gram(&x, &self.a_v, &self.m_v)
    }

    fn value(&self, f: &Vector, g: &Vector) -> f64 {
        let n = self.metric.n;
        let x = self.input(g, self.w_v, &self.right);
        let af = self.a_u.tr_mul(f);
        let mut folded = Vector::zeros(n);
        for i in 0..self.metric.rn() {
            folded[i % n] += af[i] * x[i];
        }
        let row = self.metric.g_y.tr_mul(&folded) * self.scale();
        row.norm_squared()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpConfig {
    pub d: usize,
    pub reg: RegularizationParams,
    pub max_iter: usize,
    pub tol: f64,
    pub deflation: DeflationMode,
}

impl CpConfig {
    pub fn new(d: usize) -> Self {
        CpConfig {
            d,
            reg: RegularizationParams::default(),
            max_iter: 200,
            tol: 1e-8,
            deflation: DeflationMode::Gram,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CpModel {
    pub d: usize,
    /// `rn × d`; column `k` is the coordinate of `f_k`.
    pub f_coefs: Mat,
    pub g_coefs: Mat,
    /// `d × n`; `u_k(Y_a)`.
    pub u_vals: Mat,
    /// Attained `M(f_k, g_k)` per pair.
    pub eigenvalue_trace: Vec<f64>,
    pub iterations: Vec<usize>,
    pub reg: RegularizationParams,
    pub deflation: DeflationMode,
    pub training: TrainingBasis,
}

pub fn fit_cp(samples: &SampleSet, cfg: &CpConfig, rho: [f64; 3]) -> Result<CpModel> {
    let data = PreparedData::new(samples, rho)?;
    fit_cp_prepared(&data, cfg)
}

pub fn fit_cp_prepared(data: &PreparedData, cfg: &CpConfig) -> Result<CpModel> {
    fit_cp_gram(&data.gram, data.basis(), cfg)
}

pub fn fit_cp_gram(gram: &GramSet, training: TrainingBasis, cfg: &CpConfig) -> Result<CpModel> {
    let rn = gram.rn();
    if cfg.d == 0 {
        return Err(NtsdrError::validation("d", "number of pairs must be at least 1"));
    }
    if cfg.d + 1 > rn {
        return Err(NtsdrError::validation("d", format!("d = {} must be below rn = {rn}", cfg.d)));
    }
    let metric = EstimatorMetric::new(gram, cfg.reg.eps_u, cfg.reg.eps_v)?;
    let w_u = gram.spectrum_u.regularized_inverse_sqrt(cfg.reg.eps_u)?;
    let w_v = gram.spectrum_v.regularized_inverse_sqrt(cfg.reg.eps_v)?;
    let sqrt_v = gram.spectrum_v.regularized_sqrt(cfg.reg.eps_v)?;
    let candidates = response_eigen_init(&gram.g_y, gram.n, gram.r, (cfg.d + 2).min(rn));

    let mut f_cols: Vec<Vector> = Vec::new();
    let mut g_cols: Vec<Vector> = Vec::new();
    let mut values = Vec::new();
    let mut iterations = Vec::new();
    for k in 0..cfg.d {
        let f_prev = stack_columns(rn, &f_cols);
        let g_prev = stack_columns(rn, &g_cols);
        let left = Projector::new(&f_prev, &metric.ghat_u, cfg.deflation, "deflation (f block)")?;
        let right = Projector::new(&g_prev, &metric.ghat_v, cfg.deflation, "deflation (g block)")?;
        let op = WhitenedGammas::new(&metric, &w_u, &w_v, left.clone(), right.clone());
        let start = initial_vector(&candidates, k, &sqrt_v, &g_prev, &metric.ghat_v);
        let pair = match leading_pair(&op, start.as_ref(), cfg.max_iter, cfg.tol) {
            Ok(p) => p,
            Err(NtsdrError::DegenerateSignal(msg)) if k > 0 => {
                log::warn!("stopping after {k} pairs: {msg}");
                break;
            }
            Err(e) => return Err(e),
        };
        let mut f = &w_u * &pair.f;
        let mut g = &w_v * &pair.g;
        if let Some(q) = &left {
            f = q.apply(&f);
        }
        if let Some(q) = &right {
            g = q.apply(&g);
        }
        f = block_center(&f, gram.n);
        g = block_center(&g, gram.n);
        let nf = f.dot(&(&metric.ghat_u * &f)).sqrt();
        let ng = g.dot(&(&metric.ghat_v * &g)).sqrt();
        if !(nf > 0.0 && ng > 0.0) {
            if k == 0 {
                return Err(NtsdrError::DegenerateSignal("leading pair has zero norm".into()));
            }
            log::warn!("stopping after {k} pairs: deflated pair vanished");
            break;
        }
        f /= nf;
        g /= ng;
        let value = gamma_columns(&metric, &g).tr_mul(&f).norm_squared();
        if k > 0 && value < TRUNCATION_RATIO * values[0] {
            log::warn!("requested d = {} but pair {} carries no signal; truncating", cfg.d, k + 1);
            break;
        }
        if k == 0 && value <= 0.0 {
            return Err(NtsdrError::DegenerateSignal("leading pair value is zero".into()));
        }
        f_cols.push(f);
        g_cols.push(g);
        values.push(value);
        iterations.push(pair.iterations);
    }
    let d = f_cols.len();
    let f_coefs = stack_columns(rn, &f_cols);
    let g_coefs = stack_columns(rn, &g_cols);
    let u_vals = cp_scores(&f_coefs, &g_coefs, &metric);
    Ok(CpModel {
        d,
        f_coefs,
        g_coefs,
        u_vals,
        eigenvalue_trace: values,
        iterations,
        reg: cfg.reg,
        deflation: cfg.deflation,
        training,
    })
}

fn stack_columns(rows: usize, cols: &[Vector]) -> Mat {
    Mat::from_fn(rows, cols.len(), |i, k| cols[k][i])
}

/// Whitened start vector for pair `k`, kept orthogonal to earlier `g` pairs.
fn initial_vector(candidates: &Mat, k: usize, sqrt_v: &Mat, g_prev: &Mat, ghat_v: &Mat) -> Option<Vector> {
    for row in (k..candidates.nrows()).chain(0..k) {
        let g0 = candidates.row(row).transpose();
        let mut y = sqrt_v * g0;
        if g_prev.ncols() > 0 {
            let yp = sqrt_v * g_prev;
            let coef = inverse_spd(&yp.tr_mul(&yp), "start vector").ok()? * yp.tr_mul(&y);
            y -= yp * coef;
        }
        let _ = ghat_v;
        if y.norm() > 1e-8 {
            return Some(y);
        }
    }
    None
}

/// `u_k(Y_a) = ⟨f_k g_k, Ŝ_a⟩ / ‖f_k g_k‖²`.
fn cp_scores(f_coefs: &Mat, g_coefs: &Mat, metric: &EstimatorMetric) -> Mat {
    let d = f_coefs.ncols();
    let mut u = Mat::zeros(d, metric.n);
    for k in 0..d {
        let f = Mat::from_row_slice(1, f_coefs.nrows(), f_coefs.column(k).as_slice());
        let g = Mat::from_row_slice(1, g_coefs.nrows(), g_coefs.column(k).as_slice());
        let nf = (&f * &metric.ghat_u * f.transpose())[(0, 0)];
        let ng = (&g * &metric.ghat_v * g.transpose())[(0, 0)];
        let b = projections(&f, &g, metric);
        u.set_row(k, &(b.row(0) / (nf * ng)));
    }
    u
}

/// Per-sample `d`-vectors `Σ_i f_k(U_i(x)) g_k(V_i(x))`.
pub fn evaluate_cp(model: &CpModel, xs: &[Mat]) -> Result<Vec<Vector>> {
    let cols = model.training.basis_columns(xs)?;
    Ok(cols
        .iter()
        .map(|(phi_u, phi_v)| {
            let fu = model.f_coefs.tr_mul(phi_u);
            let gv = model.g_coefs.tr_mul(phi_v);
            Vector::from_fn(model.d, |k, _| fu.row(k).dot(&gv.row(k)))
        })
        .collect())
}

/// In-sample predictors from the training Grams.
pub fn in_sample_cp(model: &CpModel, gram: &GramSet) -> Result<Vec<Vector>> {
    check_dim("training size", model.training.n, gram.n)?;
    let n = gram.n;
    let mut fp = model.f_coefs.transpose();
    block_center_rows(&mut fp, n);
    let mut gp = model.g_coefs.transpose();
    block_center_rows(&mut gp, n);
    let fk = fp * &gram.k_u;
    let gk = gp * &gram.k_v;
    Ok((0..n)
        .map(|a| {
            Vector::from_fn(model.d, |k, _| {
                (0..gram.r).map(|i| fk[(k, i * n + a)] * gk[(k, i * n + a)]).sum()
            })
        })
        .collect())
}

/// One sweep of the rank-one alternating updates: `u ← ⟨fg, Ŝ⟩/‖fg‖²`,
/// `f ← Σ u_a T_a g / (Σ u_a² ‖g‖²)`, `g ← Σ u_a T_a* f / (Σ u_a² ‖f‖²)`.
pub fn rank_one_sweep(
    f: &Vector,
    g: &Vector,
    gram: &GramSet,
    reg: &RegularizationParams,
) -> Result<(Vector, Vector, Vector)> {
    let metric = EstimatorMetric::new(gram, reg.eps_u, reg.eps_v)?;
    let n = gram.n;
    let norm_f = f.dot(&(&metric.ghat_u * f));
    let norm_g = g.dot(&(&metric.ghat_v * g));
    let fm = Mat::from_row_slice(1, f.len(), f.as_slice());
    let gm = Mat::from_row_slice(1, g.len(), g.as_slice());
    let b = projections(&fm, &gm, &metric);
    let u = Vector::from_fn(n, |a, _| b[(0, a)] / (norm_f * norm_g));
    let uu = u.norm_squared();
    let mut f_new = Vector::zeros(f.len());
    for a in 0..n {
        f_new += t_operator_coords(a, gram, reg)? * g * u[a];
    }
    f_new /= uu * norm_g;
    let norm_f_new = f_new.dot(&(&metric.ghat_u * &f_new));
    let mut g_new = Vector::zeros(g.len());
    for a in 0..n {
        g_new += t_operator_adjoint_coords(a, gram, reg)? * &f_new * u[a];
    }
    g_new /= uu * norm_f_new;
    Ok((u, f_new, g_new))
}
