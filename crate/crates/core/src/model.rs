//! A fitted estimator of either form, evaluated as a flat predictor matrix.

use crate::cp::{evaluate_cp, in_sample_cp, CpModel};
use crate::error::Result;
use crate::feature::{GramSet, TrainingBasis};
use crate::linalg::{Mat, Vector};
use crate::operator::RegularizationParams;
use crate::tucker::{evaluate_tucker, in_sample_tucker, TuckerModel};

#[derive(Debug, Clone)]
pub enum FittedModel {
    Tucker(TuckerModel),
    Cp(CpModel),
}

impl FittedModel {
    pub fn method_name(&self) -> &'static str {
        match self {
            FittedModel::Tucker(_) => "tucker",
            FittedModel::Cp(_) => "cp",
        }
    }

    /// Number of predictor columns: `s·t` for Tucker, `d` for CP.
    pub fn n_predictors(&self) -> usize {
        match self {
            FittedModel::Tucker(m) => m.s * m.t,
            FittedModel::Cp(m) => m.d,
        }
    }

    pub fn reg(&self) -> RegularizationParams {
        match self {
            FittedModel::Tucker(m) => m.reg,
            FittedModel::Cp(m) => m.reg,
        }
    }

    pub fn training(&self) -> &TrainingBasis {
        match self {
            FittedModel::Tucker(m) => &m.training,
            FittedModel::Cp(m) => &m.training,
        }
    }

    /// `n_new × K` sufficient predictors; Tucker entries ordered `(k, l)` with `l` fastest.
    pub fn predict(&self, xs: &[Mat]) -> Result<Mat> {
        match self {
            FittedModel::Tucker(m) => Ok(flatten_tucker(&evaluate_tucker(m, xs)?)),
            FittedModel::Cp(m) => Ok(flatten_cp(&evaluate_cp(m, xs)?, m.d)),
        }
    }

    /// Training-sample predictors computed from the Grams.
    pub fn predict_in_sample(&self, gram: &GramSet) -> Result<Mat> {
        match self {
            FittedModel::Tucker(m) => Ok(flatten_tucker(&in_sample_tucker(m, gram)?)),
            FittedModel::Cp(m) => Ok(flatten_cp(&in_sample_cp(m, gram)?, m.d)),
        }
    }
}

impl FittedModel {
    /// Per-factor interaction features `f̂_k(U_i(x)) ĝ_l(V_i(x))`: rows `(sample, i)` with
    /// `i` fastest; columns `(k, l)` with `l` fastest for Tucker, `k` for CP.
    pub fn structure_features(&self, xs: &[Mat]) -> Result<Mat> {
        let training = self.training();
        let r = training.r;
        let cols = training.basis_columns(xs)?;
        let k = self.n_predictors();
        let mut out = Mat::zeros(xs.len() * r, k);
        for (a, (phi_u, phi_v)) in cols.iter().enumerate() {
            match self {
                FittedModel::Tucker(m) => {
                    let fu = &m.f_coef * phi_u;
                    let gv = &m.g_coef * phi_v;
                    for i in 0..r {
                        for kk in 0..m.s {
                            for l in 0..m.t {
                                out[(a * r + i, kk * m.t + l)] = fu[(kk, i)] * gv[(l, i)];
                            }
                        }
                    }
                }
                FittedModel::Cp(m) => {
                    let fu = m.f_coefs.tr_mul(phi_u);
                    let gv = m.g_coefs.tr_mul(phi_v);
                    for i in 0..r {
                        for kk in 0..m.d {
                            out[(a * r + i, kk)] = fu[(kk, i)] * gv[(kk, i)];
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

fn flatten_tucker(per_sample: &[Mat]) -> Mat {
    let k = per_sample.first().map(|m| m.len()).unwrap_or(0);
    Mat::from_fn(per_sample.len(), k, |a, c| {
        let m = &per_sample[a];
        m[(c / m.ncols(), c % m.ncols())]
    })
}

fn flatten_cp(per_sample: &[Vector], d: usize) -> Mat {
    Mat::from_fn(per_sample.len(), d, |a, k| per_sample[a][k])
}
