//! Distance correlation, Pearson correlation and replicate summaries.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, NtsdrError, Result};
use crate::linalg::Mat;

/// Doubly-centered Euclidean distance matrix of the rows of `m`.
fn centered_distances(m: &Mat) -> Mat {
    let n = m.nrows();
    let mut d = Mat::zeros(n, n);
    for a in 0..n {
        for b in (a + 1)..n {
            let dist = (m.row(a) - m.row(b)).norm();
            d[(a, b)] = dist;
            d[(b, a)] = dist;
        }
    }
    let row_means: Vec<f64> = (0..n).map(|a| d.row(a).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for a in 0..n {
        for b in 0..n {
            d[(a, b)] += grand - row_means[a] - row_means[b];
        }
    }
    d
}

/// Biased (V-statistic) distance correlation between the row samples of `a` and `b`.
pub fn distance_correlation(a: &Mat, b: &Mat) -> Result<f64> {
    check_dim("distance correlation sample size", a.nrows(), b.nrows())?;
    if a.nrows() < 2 {
        return Err(NtsdrError::InvalidArgument(
            "distance correlation needs at least 2 samples".into(),
        ));
    }
    if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
        return Err(NtsdrError::NonFinite("distance correlation input".into()));
    }
    let da = centered_distances(a);
    let db = centered_distances(b);
    let vab = da.component_mul(&db).sum();
    let vaa = da.norm_squared();
    let vbb = db.norm_squared();
    if vaa <= 0.0 || vbb <= 0.0 {
        return Ok(0.0);
    }
    Ok((vab.max(0.0) / (vaa * vbb).sqrt()).sqrt().min(1.0))
}

/// Distance correlation between a single pair of scalar samples.
pub fn distance_correlation_vec(a: &[f64], b: &[f64]) -> Result<f64> {
    distance_correlation(
        &Mat::from_column_slice(a.len(), 1, a),
        &Mat::from_column_slice(b.len(), 1, b),
    )
}

/// Distance correlation between stacked interaction features; rows are `(sample, factor)`.
pub fn structure_dcor(s_true: &Mat, s_est: &Mat) -> Result<f64> {
    check_dim("structure feature rows", s_true.nrows(), s_est.nrows())?;
    distance_correlation(s_true, s_est)
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim("pearson sample size", a.len(), b.len())?;
    if a.len() < 2 {
        return Err(NtsdrError::InvalidArgument("pearson correlation needs at least 2 samples".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(NtsdrError::InvalidArgument(
            "pearson correlation undefined for zero variance".into(),
        ));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Mean and standard deviation over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub mean: f64,
    pub sd: f64,
    pub n_reps: usize,
    pub per_rep: Vec<f64>,
}

impl ScoreReport {
    /// Sample standard deviation (`n − 1` denominator; 0 for a single replicate).
    pub fn from_values(per_rep: Vec<f64>) -> Result<Self> {
        if per_rep.is_empty() {
            return Err(NtsdrError::InvalidArgument("score report needs at least one value".into()));
        }
        let n = per_rep.len();
        let mean = per_rep.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (per_rep.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Ok(ScoreReport {
            mean,
            sd,
            n_reps: n,
            per_rep,
        })
    }
}

impl std::fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.3}({:.3})", self.mean, self.sd)
    }
}
