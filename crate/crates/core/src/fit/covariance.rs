use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

// singular values of the column-normalized Jacobian below this fraction of
// the largest one are treated as degenerate
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    pub matrix: DMatrix<f64>,
    /// Residual variance `|r|^2 / (N - k)`.
    pub sigma2: f64,
    pub rank: usize,
    /// Unit parameter-space directions excluded from the pseudo-inverse.
    pub degenerate_directions: Vec<Vec<f64>>,
}

impl Covariance {
    pub fn sigmas(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    pub fn correlation(&self) -> DMatrix<f64> {
        let s = self.sigmas();
        let k = s.len();
        DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                1.0
            } else if s[i] > 0.0 && s[j] > 0.0 {
                (self.matrix[(i, j)] / (s[i] * s[j])).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        })
    }

    pub fn is_full_rank(&self) -> bool {
        self.degenerate_directions.is_empty()
    }
}

/// `sigma^2 (J^T J)^+` for a (weighted) Jacobian and residual vector.
///
/// Columns are normalized before the SVD so the rank decision does not
/// depend on parameter units; directions with vanishing singular values are
/// reported and left out of the pseudo-inverse.
pub fn covariance(jacobian: &DMatrix<f64>, residuals: &[f64]) -> Result<Covariance> {
    let (n, k) = jacobian.shape();
    if residuals.len() != n {
        return Err(Error::InvalidInput(format!(
            "residual length {} does not match Jacobian rows {n}",
            residuals.len()
        )));
    }
    if n <= k {
        return Err(Error::InsufficientData { points: n, params: k });
    }
    let sigma2 = residuals.iter().map(|r| r * r).sum::<f64>() / (n - k) as f64;
    let scale: Vec<f64> = (0..k)
        .map(|j| {
            let c = jacobian.column(j).norm();
            if c > 0.0 {
                c
            } else {
                1.0
            }
        })
        .collect();
    let mut normalized = jacobian.clone();
    for (j, s) in scale.iter().enumerate() {
        normalized.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = normalized.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let s_max = svd.singular_values.max();
    let mut inner = DMatrix::<f64>::zeros(k, k);
    let mut degenerate = Vec::new();
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let v: DVector<f64> = v_t.row(i).transpose();
        if s > RANK_TOL * s_max && s > 0.0 {
            rank += 1;
            inner += &v * v.transpose() / (s * s);
        } else {
            let d = DVector::from_fn(k, |j, _| v[j] / scale[j]);
            let d = &d / d.norm();
            degenerate.push(d.iter().copied().collect());
        }
    }
    let matrix = DMatrix::from_fn(k, k, |i, j| sigma2 * inner[(i, j)] / (scale[i] * scale[j]));
    Ok(Covariance {
        matrix: 0.5 * (&matrix + matrix.transpose()),
        sigma2,
        rank,
        degenerate_directions: degenerate,
    })
}
