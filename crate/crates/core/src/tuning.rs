//! Generalized cross-validation for the ridge fractions and a two-stage grid search.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cp::{fit_cp_prepared, CpConfig, CpModel};
use crate::error::{NtsdrError, Result};
use crate::feature::{GramSet, PreparedData, SampleSet};
use crate::linalg::{block_center_rows, pinv, Mat};
use crate::model::FittedModel;
use crate::operator::{s_f_matrix, structured_norm_total, RegularizationParams};
use crate::tucker::{fit_tucker_prepared, TuckerConfig, TuckerModel};

/// Denominators below this magnitude make a score `+∞`.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

/// Realization of the centered response kernel `κ_Y^c(Y_a, Y_b)` in the `η` criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ResponseCentering {
    /// `(Q_n K_Y)_{ab}`.
    #[default]
    Single,
    /// `(G_Y)_{ab}`.
    Double,
}

/// `numerator / (tr_u·tr_v − total)²`, or `+∞` when the denominator vanishes.
pub fn gcv_ratio(numerator: f64, trace_u: f64, trace_v: f64, total: f64) -> f64 {
    let denom = (trace_u * trace_v - total).powi(2);
    if denom.abs() < DENOMINATOR_FLOOR || !denom.is_finite() {
        f64::INFINITY
    } else {
        numerator.max(0.0) / denom
    }
}

/// Criterion for `(η_U, η_V)`: `Σ_{a,b} (κ_Y^c(Y_a, Y_b) − Ŝ_{ab})²` over
/// `[tr(A_U) tr(A_V) − (nr)²]²` with `A = G G(η)⁻¹`.
pub fn gcv_r(eta_u: f64, eta_v: f64, gram: &GramSet, centering: ResponseCentering) -> Result<f64> {
    let reg = RegularizationParams::new(eta_u, eta_v, 0.0, 0.0)?;
    let s_hat = s_f_matrix(gram, &reg)?;
    let target = match centering {
        ResponseCentering::Single => &gram.q_n * &gram.k_y,
        ResponseCentering::Double => gram.g_y.clone(),
    };
    let numerator = (target - s_hat).norm_squared();
    let total = (gram.n * gram.r) as f64;
    Ok(gcv_ratio(
        numerator,
        gram.spectrum_u.trace_hat(eta_u),
        gram.spectrum_v.trace_hat(eta_v),
        total * total,
    ))
}

/// `E_n ‖s(Y) − proj s(Y)‖²` in the unregularized Gram metric, where the projection is onto
/// the span of `f_k g_l` over `pairs` and `s(Y)` is built with the `η` fractions.
fn span_residual(
    f: &Mat,
    g: &Mat,
    pairs: &[(usize, usize)],
    gram: &GramSet,
    reg: &RegularizationParams,
) -> Result<f64> {
    let n = gram.n;
    let rn = gram.rn();
    let a_u = gram.spectrum_u.hat(reg.eta_u)?;
    let a_v = gram.spectrum_v.hat(reg.eta_v)?;
    let mut xf = f * a_u;
    block_center_rows(&mut xf, n);
    let mut yg = g * a_v;
    block_center_rows(&mut yg, n);
    let mut z = Mat::zeros(pairs.len(), n);
    for (p, &(k, l)) in pairs.iter().enumerate() {
        for c in 0..rn {
            z[(p, c % n)] += xf[(k, c)] * yg[(l, c)];
        }
    }
    let b = z * &gram.g_y / gram.r as f64;
    let fgf = f * &gram.g_u * f.transpose();
    let ggg = g * &gram.g_v * g.transpose();
    let m = Mat::from_fn(pairs.len(), pairs.len(), |p, q| {
        fgf[(pairs[p].0, pairs[q].0)] * ggg[(pairs[p].1, pairs[q].1)]
    });
    let m_inv = pinv(&m, 1e-12);
    let explained = (b.transpose() * m_inv).component_mul(&b.transpose()).sum();
    let total = structured_norm_total(
        &gram.spectrum_u.sandwich(reg.eta_u)?,
        &gram.spectrum_v.sandwich(reg.eta_v)?,
        &gram.g_y,
        n,
        gram.r,
    );
    Ok(((total - explained) / n as f64).max(0.0))
}

fn estimator_gcv(residual: f64, gram: &GramSet, reg: &RegularizationParams) -> f64 {
    let r = gram.r as f64;
    let n1 = (gram.n - 1) as f64;
    gcv_ratio(
        residual,
        gram.spectrum_u.trace_hat(reg.eps_u),
        gram.spectrum_v.trace_hat(reg.eps_v),
        r * r * n1 * n1,
    )
}

/// Criterion for `(ε_U, ε_V)` given a Tucker fit at those values.
pub fn gcv_tucker(model: &TuckerModel, gram: &GramSet) -> Result<f64> {
    let pairs: Vec<(usize, usize)> = (0..model.s)
        .flat_map(|k| (0..model.t).map(move |l| (k, l)))
        .collect();
    let residual = span_residual(&model.f_coef, &model.g_coef, &pairs, gram, &model.reg)?;
    Ok(estimator_gcv(residual, gram, &model.reg))
}

/// Criterion for `(ε_U, ε_V)` given a CP fit at those values.
pub fn gcv_cp(model: &CpModel, gram: &GramSet) -> Result<f64> {
    let pairs: Vec<(usize, usize)> = (0..model.d).map(|k| (k, k)).collect();
    let f = model.f_coefs.transpose();
    let g = model.g_coefs.transpose();
    let residual = span_residual(&f, &g, &pairs, gram, &model.reg)?;
    Ok(estimator_gcv(residual, gram, &model.reg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningGrid {
    pub eta_grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
    /// Bandwidth multipliers `[ρ_U, ρ_V, ρ_Y]`.
    pub rho: [f64; 3],
    #[serde(default)]
    pub centering: ResponseCentering,
}

impl Default for TuningGrid {
    fn default() -> Self {
        let grid: Vec<f64> = (1..=6).rev().map(|k| 10f64.powi(-k)).collect();
        TuningGrid {
            eta_grid: grid.clone(),
            eps_grid: grid,
            rho: [1.0; 3],
            centering: ResponseCentering::Single,
        }
    }
}

fn normalize_grid(name: &str, values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(NtsdrError::validation(name, "grid must not be empty"));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(NtsdrError::validation(name, format!("grid values must be positive, got {v}")));
    }
    let mut out = values.to_vec();
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

impl TuningGrid {
    /// Validated grid, sorted ascending without duplicates.
    pub fn new(eta_grid: &[f64], eps_grid: &[f64], rho: [f64; 3]) -> Result<Self> {
        let grid = TuningGrid {
            eta_grid: eta_grid.to_vec(),
            eps_grid: eps_grid.to_vec(),
            rho,
            centering: ResponseCentering::Single,
        };
        grid.normalized()
    }

    pub fn normalized(&self) -> Result<Self> {
        for (i, r) in self.rho.iter().enumerate() {
            if !(r.is_finite() && *r > 0.0) {
                return Err(NtsdrError::validation("rho", format!("entry {i} must be positive, got {r}")));
            }
        }
        Ok(TuningGrid {
            eta_grid: normalize_grid("eta_grid", &self.eta_grid)?,
            eps_grid: normalize_grid("eps_grid", &self.eps_grid)?,
            rho: self.rho,
            centering: self.centering,
        })
    }
}

#[derive(Debug, Clone)]
pub enum Method {
    Tucker(TuckerConfig),
    Cp(CpConfig),
}

impl Method {
    fn fit(&self, data: &PreparedData, reg: RegularizationParams) -> Result<FittedModel> {
        match self {
            Method::Tucker(cfg) => {
                let mut cfg = cfg.clone();
                cfg.reg = reg;
                Ok(FittedModel::Tucker(fit_tucker_prepared(data, &cfg)?))
            }
            Method::Cp(cfg) => {
                let mut cfg = cfg.clone();
                cfg.reg = reg;
                Ok(FittedModel::Cp(fit_cp_prepared(data, &cfg)?))
            }
        }
    }
}

/// GCV score of a fitted model at its own ridge fractions.
pub fn gcv_model(model: &FittedModel, gram: &GramSet) -> Result<f64> {
    match model {
        FittedModel::Tucker(m) => gcv_tucker(m, gram),
        FittedModel::Cp(m) => gcv_cp(m, gram),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Eta,
    Eps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub stage: Stage,
    pub u: f64,
    pub v: f64,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct TuningResult {
    pub reg: RegularizationParams,
    pub gcv_r: f64,
    pub gcv_estimator: f64,
    pub model: FittedModel,
    pub evaluations: Vec<GridPoint>,
}

type Scores<T> = BTreeMap<(usize, usize), (f64, Option<T>)>;

/// Diagonal sweep, then the 3×3 neighbourhood of the best diagonal point. Returns the
/// winning index pair; ties go to larger regularization.
fn search_2d<T: Send>(
    len: usize,
    eval: impl Fn(usize, usize) -> (f64, Option<T>) + Sync,
) -> (Scores<T>, Option<(usize, usize)>) {
    let mut seen: Scores<T> = BTreeMap::new();
    let diag: Vec<_> = (0..len).into_par_iter().map(|i| ((i, i), eval(i, i))).collect();
    seen.extend(diag);
    let Some((ci, _)) = best_of(&seen) else {
        return (seen, None);
    };
    let lo = ci.0.saturating_sub(1);
    let hi = (ci.0 + 1).min(len - 1);
    let local: Vec<(usize, usize)> = (lo..=hi)
        .flat_map(|i| (lo..=hi).map(move |j| (i, j)))
        .filter(|k| !seen.contains_key(k))
        .collect();
    let extra: Vec<_> = local.into_par_iter().map(|(i, j)| ((i, j), eval(i, j))).collect();
    seen.extend(extra);
    let best = best_of(&seen).map(|(k, _)| k);
    (seen, best)
}

fn best_of<T>(seen: &BTreeMap<(usize, usize), (f64, Option<T>)>) -> Option<((usize, usize), f64)> {
    let mut best: Option<((usize, usize), f64)> = None;
    for (&(i, j), (score, _)) in seen {
        if !score.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some(((bi, bj), bs)) => *score < bs || (*score == bs && (i + j, i) > (bi + bj, bi)),
        };
        if better {
            best = Some(((i, j), *score));
        }
    }
    best
}

fn score_or_inf<T>(result: Result<(f64, T)>, what: &str) -> (f64, Option<T>) {
    match result {
        Ok((s, t)) if s.is_finite() && s >= 0.0 => (s, Some(t)),
        Ok(_) => (f64::INFINITY, None),
        Err(e) => {
            log::warn!("{what}: {e}; excluded from the search");
            (f64::INFINITY, None)
        }
    }
}

/// Two-stage search: `(η_U, η_V)` by [`gcv_r`], then `(ε_U, ε_V)` by the estimator
/// criterion with a fresh fit per grid point.
pub fn grid_search(method: &Method, grid: &TuningGrid, samples: &SampleSet) -> Result<TuningResult> {
    let grid = grid.normalized()?;
    let data = PreparedData::new(samples, grid.rho)?;
    grid_search_prepared(method, &grid, &data)
}

pub fn grid_search_prepared(method: &Method, grid: &TuningGrid, data: &PreparedData) -> Result<TuningResult> {
    let grid = grid.normalized()?;
    let gram = &data.gram;
    let etas = &grid.eta_grid;
    let (eta_scores, best) = search_2d(etas.len(), |i, j| {
        score_or_inf(
            gcv_r(etas[i], etas[j], gram, grid.centering).map(|s| (s, ())),
            "eta grid point",
        )
    });
    let (ei, ej) = best.ok_or_else(|| NtsdrError::TuningFailure("every eta grid point scored +inf".into()))?;
    let (eta_u, eta_v) = (etas[ei], etas[ej]);
    let gcv_r_best = eta_scores[&(ei, ej)].0;

    let epss = &grid.eps_grid;
    let (mut eps_scores, best) = search_2d(epss.len(), |i, j| {
        let fitted = RegularizationParams::new(eta_u, eta_v, epss[i], epss[j])
            .and_then(|reg| method.fit(data, reg))
            .and_then(|m| gcv_model(&m, gram).map(|s| (s, m)));
        score_or_inf(fitted, "eps grid point")
    });
    let (pi, pj) = best.ok_or_else(|| NtsdrError::TuningFailure("every eps grid point scored +inf".into()))?;
    let mut evaluations: Vec<GridPoint> = eta_scores
        .iter()
        .map(|(&(i, j), (s, _))| GridPoint {
            stage: Stage::Eta,
            u: etas[i],
            v: etas[j],
            score: *s,
        })
        .collect();
    evaluations.extend(eps_scores.iter().map(|(&(i, j), (s, _))| GridPoint {
        stage: Stage::Eps,
        u: epss[i],
        v: epss[j],
        score: *s,
    }));
    let (score, model) = eps_scores.remove(&(pi, pj)).expect("best point was evaluated");
    Ok(TuningResult {
        reg: model.as_ref().expect("finite score has a model").reg(),
        gcv_r: gcv_r_best,
        gcv_estimator: score,
        model: model.expect("finite score has a model"),
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::block_center_both;
    use crate::tucker::fit_tucker_gram;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, StandardNormal};

    fn problem(n: usize, p: usize, q: usize, seed: u64) -> (SampleSet, PreparedData) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Mat> = (0..n)
            .map(|_| Mat::from_fn(p, q, |_, _| StandardNormal.sample(&mut rng)))
            .collect();
        let noise = Normal::new(0.0, 0.1).unwrap();
        let y: Vec<f64> = xs
            .iter()
            .map(|x| x[(0, 0)].powi(3) * x[(p - 1, q - 1)] + noise.sample(&mut rng))
            .collect();
        let samples = SampleSet::new(xs, y).unwrap();
        let data = PreparedData::new(&samples, [1.0; 3]).unwrap();
        (samples, data)
    }

    #[test]
    fn ratio_guards() {
        assert_eq!(gcv_ratio(1.0, 3.0, 3.0, 9.0), f64::INFINITY);
        assert_eq!(gcv_ratio(2.0, 0.0, 0.0, 4.0), 2.0 / 16.0);
        assert_eq!(gcv_ratio(-1e-18, 1.0, 1.0, 4.0), 0.0);
    }

    #[test]
    fn gcv_r_large_eta_limit() {
        let (_, data) = problem(6, 2, 2, 1);
        let gram = &data.gram;
        let total = (gram.n * gram.r) as f64;
        let expected = gram.g_y.norm_squared() / total.powi(4);
        let got = gcv_r(1e12, 1e12, gram, ResponseCentering::Double).unwrap();
        assert!((got - expected).abs() < 1e-9 * expected, "{got} vs {expected}");
    }

    /// Hand assembly for n = 3, r = 1 with explicit Grams.
    #[test]
    fn gcv_r_hand_case() {
        let k_u = Mat::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.5, 1.0, 0.3, 0.2, 0.3, 1.0]);
        let k_v = Mat::from_row_slice(3, 3, &[1.0, 0.1, 0.4, 0.1, 1.0, 0.6, 0.4, 0.6, 1.0]);
        let k_y = Mat::from_row_slice(3, 3, &[1.0, 0.7, 0.05, 0.7, 1.0, 0.2, 0.05, 0.2, 1.0]);
        let gram = GramSet::from_kernels(k_u.clone(), k_v.clone(), k_y.clone(), 3, 1).unwrap();
        let q = Mat::identity(3, 3) - Mat::from_element(3, 3, 1.0 / 3.0);
        let (eta_u, eta_v) = (0.05, 0.2);
        let hat = |k: &Mat, eta: f64| {
            let g = &q * k * &q;
            let lmax = g.clone().symmetric_eigen().eigenvalues.max();
            let inv = (&g + Mat::identity(3, 3) * eta * lmax).try_inverse().unwrap();
            (&g * &inv, g)
        };
        let (a_u, _) = hat(&k_u, eta_u);
        let (a_v, _) = hat(&k_v, eta_v);
        let g_y = &q * &k_y * &q;
        // Ŝ_ab = Σ_c Q_ac A_U[c,·]∘A_V[c,·] applied to column b of G_Y, element by element.
        let mut s = Mat::zeros(3, 3);
        for a in 0..3 {
            for b in 0..3 {
                let mut acc = 0.0;
                for c in 0..3 {
                    for e in 0..3 {
                        acc += q[(a, c)] * a_u[(c, e)] * a_v[(c, e)] * g_y[(e, b)];
                    }
                }
                s[(a, b)] = acc;
            }
        }
        let target = &q * &k_y;
        let num: f64 = (0..3)
            .flat_map(|a| (0..3).map(move |b| (a, b)))
            .map(|(a, b)| (target[(a, b)] - s[(a, b)]).powi(2))
            .sum();
        let den = (a_u.trace() * a_v.trace() - 9.0).powi(2);
        let got = gcv_r(eta_u, eta_v, &gram, ResponseCentering::Single).unwrap();
        assert!((got - num / den).abs() < 1e-10 * (num / den).max(1.0));
    }

    #[test]
    fn gcv_r_numerator_is_matrix_identity() {
        let (_, data) = problem(5, 2, 2, 2);
        let gram = &data.gram;
        let reg = RegularizationParams::new(1e-2, 3e-2, 0.0, 0.0).unwrap();
        let s_hat = s_f_matrix(gram, &reg).unwrap();
        let num = (&gram.g_y - &s_hat).norm_squared();
        let total = (gram.n * gram.r) as f64;
        let den = (gram.spectrum_u.trace_hat(1e-2) * gram.spectrum_v.trace_hat(3e-2) - total * total).powi(2);
        let got = gcv_r(1e-2, 3e-2, gram, ResponseCentering::Double).unwrap();
        assert!((got - num / den).abs() < 1e-12 * got);
        assert!(gcv_r(1e-2, 3e-2, gram, ResponseCentering::Single).unwrap() >= got);
    }

    /// Dense residual oracle: explicit coordinate matrices and least squares in the G metric.
    fn dense_span_residual(f: &Mat, g: &Mat, pairs: &[(usize, usize)], gram: &GramSet, reg: &RegularizationParams) -> f64 {
        let n = gram.n;
        let rn = gram.rn();
        let inv_u = gram.spectrum_u.regularized_inverse(reg.eta_u).unwrap();
        let inv_v = gram.spectrum_v.regularized_inverse(reg.eta_v).unwrap();
        let inner = |x: &Mat, y: &Mat| (x.transpose() * &gram.g_v * y * &gram.g_u).trace();
        let basis: Vec<Mat> = pairs
            .iter()
            .map(|&(k, l)| g.row(l).transpose() * f.row(k))
            .collect();
        let m = Mat::from_fn(basis.len(), basis.len(), |p, q| inner(&basis[p], &basis[q]));
        let mut total = 0.0;
        for a in 0..n {
            let d = Mat::from_fn(rn, rn, |i, j| if i == j { gram.g_y[(i % n, a)] } else { 0.0 });
            let s = &inv_v * block_center_both(&d, n) * &inv_u / gram.r as f64;
            let b = crate::linalg::Vector::from_fn(basis.len(), |p, _| inner(&basis[p], &s));
            let coef = pinv(&m, 1e-12) * &b;
            let mut resid = s.clone();
            for (p, bm) in basis.iter().enumerate() {
                resid -= bm * coef[p];
            }
            total += inner(&resid, &resid);
        }
        total / n as f64
    }

    #[test]
    fn tucker_and_cp_gcv_match_dense_oracle() {
        let (_, data) = problem(5, 2, 2, 3);
        let gram = &data.gram;
        let reg = RegularizationParams::new(1e-2, 2e-2, 1e-2, 1e-2).unwrap();
        let mut cfg = TuckerConfig::new(2, 2);
        cfg.reg = reg;
        let tm = fit_tucker_gram(gram, data.basis(), &cfg).unwrap();
        let pairs: Vec<(usize, usize)> = (0..2).flat_map(|k| (0..2).map(move |l| (k, l))).collect();
        let fast = span_residual(&tm.f_coef, &tm.g_coef, &pairs, gram, &reg).unwrap();
        let slow = dense_span_residual(&tm.f_coef, &tm.g_coef, &pairs, gram, &reg);
        assert!((fast - slow).abs() < 1e-10 * slow.max(1e-300), "{fast} vs {slow}");
        let r = gram.r as f64;
        let n1 = (gram.n - 1) as f64;
        let den = (gram.spectrum_u.trace_hat(1e-2) * gram.spectrum_v.trace_hat(1e-2) - r * r * n1 * n1).powi(2);
        assert!((gcv_tucker(&tm, gram).unwrap() - fast / den).abs() < 1e-12 * fast / den);

        let mut cc = CpConfig::new(2);
        cc.reg = reg;
        let cm = fit_cp_prepared(&data, &cc).unwrap();
        let f = cm.f_coefs.transpose();
        let g = cm.g_coefs.transpose();
        let cp_pairs = [(0, 0), (1, 1)];
        let fast = span_residual(&f, &g, &cp_pairs, gram, &reg).unwrap();
        let slow = dense_span_residual(&f, &g, &cp_pairs, gram, &reg);
        assert!((fast - slow).abs() < 1e-10 * slow, "{fast} vs {slow}");
        assert!(gcv_cp(&cm, gram).unwrap() >= 0.0);
    }

    #[test]
    fn full_span_gives_zero_residual() {
        // n = 3, r = 1: the centered coordinate space is 2-D, so s = t = 2 spans everything.
        let (_, data) = problem(3, 1, 2, 4);
        let gram = &data.gram;
        assert_eq!(gram.rn(), 3);
        let reg = RegularizationParams::uniform(1e-2, 1e-2).unwrap();
        let basis = crate::kernel::centering_projector(3);
        let f = basis.rows(0, 2).into_owned() + Mat::from_fn(2, 3, |i, j| 1e-3 * (i + j) as f64);
        let f = {
            let mut f = f;
            block_center_rows(&mut f, 3);
            f
        };
        let pairs = [(0, 0), (0, 1), (1, 0), (1, 1)];
        let res = span_residual(&f, &f, &pairs, gram, &reg).unwrap();
        let scale = structured_norm_total(
            &gram.spectrum_u.sandwich(1e-2).unwrap(),
            &gram.spectrum_v.sandwich(1e-2).unwrap(),
            &gram.g_y,
            3,
            1,
        );
        assert!(res < 1e-10 * scale.max(1.0));
        let den_limit = gcv_ratio(res, 0.0, 0.0, 4.0);
        assert!(den_limit < 1e-10);
    }

    #[test]
    fn grid_validation_and_normalization() {
        let g = TuningGrid::new(&[1e-2, 1e-4, 1e-2], &[1e-3], [1.0; 3]).unwrap();
        assert_eq!(g.eta_grid, vec![1e-4, 1e-2]);
        assert!(TuningGrid::new(&[], &[1e-3], [1.0; 3]).is_err());
        assert!(TuningGrid::new(&[-1.0], &[1e-3], [1.0; 3]).is_err());
        assert!(TuningGrid::new(&[1e-2], &[1e-3], [0.0, 1.0, 1.0]).is_err());
        let d = TuningGrid::default();
        assert_eq!(d.eta_grid.len(), 6);
        assert!(d.eta_grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn search_prefers_larger_on_ties_and_finds_minimum() {
        let (seen, best) = search_2d::<()>(4, |_, _| (1.0, Some(())));
        assert_eq!(best, Some((3, 3)));
        assert!(seen.len() <= 4 + 3);
        let (_, best) = search_2d::<()>(5, |i, j| (((i as f64 - 2.0).powi(2) + (j as f64 - 3.0).powi(2)), Some(())));
        assert_eq!(best, Some((2, 3)));
        let (_, best) = search_2d::<()>(3, |_, _| (f64::INFINITY, None));
        assert_eq!(best, None);
    }

    #[test]
    fn grid_search_singleton_and_order_invariance() {
        let (samples, _) = problem(12, 3, 3, 5);
        let method = Method::Tucker(TuckerConfig::new(1, 1));
        let single = TuningGrid::new(&[1e-3], &[1e-2], [1.0; 3]).unwrap();
        let res = grid_search(&method, &single, &samples).unwrap();
        assert_eq!(res.reg, RegularizationParams::new(1e-3, 1e-3, 1e-2, 1e-2).unwrap());

        let two = TuningGrid::new(&[1e-3], &[1e-6, 1e-2], [1.0; 3]).unwrap();
        let res = grid_search(&method, &two, &samples).unwrap();
        let eps_scores: Vec<&GridPoint> = res.evaluations.iter().filter(|p| p.stage == Stage::Eps).collect();
        let min = eps_scores.iter().map(|p| p.score).fold(f64::INFINITY, f64::min);
        assert_eq!(res.gcv_estimator, min);

        let shuffled = TuningGrid::new(&[1e-3, 1e-3], &[1e-2, 1e-6, 1e-2], [1.0; 3]).unwrap();
        let again = grid_search(&method, &shuffled, &samples).unwrap();
        assert_eq!(again.reg, res.reg);
        assert_eq!(again.gcv_estimator, res.gcv_estimator);
    }

    #[test]
    fn grid_search_cp_runs() {
        let (samples, _) = problem(10, 2, 3, 6);
        let grid = TuningGrid::new(&[1e-3, 1e-1], &[1e-3, 1e-1], [1.0; 3]).unwrap();
        let res = grid_search(&Method::Cp(CpConfig::new(1)), &grid, &samples).unwrap();
        assert!(res.gcv_estimator.is_finite());
        assert_eq!(res.model.n_predictors(), 1);
    }
}
