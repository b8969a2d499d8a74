use nalgebra::DMatrix;

use super::{Bound, Model};
use crate::{Error, Result};

/// Finite-difference step for a parameter value.
pub fn fd_step(p: f64) -> f64 {
    (1e-6 * p.abs()).max(1e-9)
}

pub(crate) fn evaluate(model: &dyn Model, x: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    let y = model.predict(x, p);
    if y.iter().any(|v| !v.is_finite()) {
        let names = model.param_names();
        let params = names
            .iter()
            .zip(p)
            .map(|(n, v)| format!("{n}={v:e}"))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(Error::NonFinite {
            model: model.name().to_string(),
            params,
        });
    }
    Ok(y)
}

/// Finite-difference Jacobian of `model` at `p` (rows: outputs, columns:
/// parameters).
///
/// Each column combines central differences at the step `h` from
/// [`fd_step`] and at `h/2` by Richardson extrapolation, cancelling the
/// leading `h^2` truncation term; this matters for sharp features such as a
/// resonance a few parts in 1e4 wide. When `bounds` is given, a step that
/// would leave the box is replaced by a one-sided difference (extrapolated
/// the same way) so the model is never evaluated outside it.
pub fn numeric_jacobian(model: &dyn Model, x: &[f64], p: &[f64], bounds: Option<&[Bound]>) -> Result<DMatrix<f64>> {
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite parameters {p:?}")));
    }
    let mut center: Option<Vec<f64>> = None;
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p.len());
    for j in 0..p.len() {
        let h = fd_step(p[j]);
        let b = bounds.map(|b| b[j]).unwrap_or(Bound::FREE);
        let up_ok = p[j] + h <= b.hi;
        let down_ok = p[j] - h >= b.lo;
        // evaluates the model with parameter j set to p[j] + d, returning the
        // offset actually realized after rounding
        let at = |d: f64| -> Result<(f64, Vec<f64>)> {
            let mut shifted = p.to_vec();
            shifted[j] = p[j] + d;
            Ok((shifted[j] - p[j], evaluate(model, x, &shifted)?))
        };
        let col = if up_ok && down_ok {
            let diff = |d: f64| -> Result<Vec<f64>> {
                let (hp, fp) = at(d)?;
                let (hm, fm) = at(-d)?;
                Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (hp - hm)).collect())
            };
            let coarse = diff(h)?;
            let fine = diff(0.5 * h)?;
            fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect()
        } else {
            if center.is_none() {
                center = Some(evaluate(model, x, p)?);
            }
            let f0 = center.as_ref().expect("set above");
            // step toward the interior, shortened if the box is narrower than h
            let step = if up_ok {
                h
            } else if down_ok {
                -h
            } else if b.hi - p[j] >= p[j] - b.lo {
                b.hi - p[j]
            } else {
                b.lo - p[j]
            };
            if step == 0.0 {
                vec![0.0; f0.len()]
            } else {
                let diff = |d: f64| -> Result<Vec<f64>> {
                    let (taken, fs) = at(d)?;
                    Ok(fs.iter().zip(f0).map(|(a, b)| (a - b) / taken).collect())
                };
                let coarse = diff(step)?;
                let fine = diff(0.5 * step)?;
                fine.iter().zip(&coarse).map(|(f, c)| 2.0 * f - c).collect()
            }
        };
        cols.push(col);
    }
    let rows = cols.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows, p.len(), |i, j| cols[j][i]))
}

/// Largest column-wise relative difference `|J_a - J_n| / |J_a|` between
/// the analytic and numeric Jacobians; `None` for models without one.
pub fn jacobian_mismatch(model: &dyn Model, x: &[f64], p: &[f64]) -> Result<Option<f64>> {
    let Some(analytic) = model.jacobian(x, p) else {
        return Ok(None);
    };
    let numeric = numeric_jacobian(model, x, p, None)?;
    let mut worst = 0.0f64;
    for j in 0..p.len() {
        let a = analytic.column(j);
        let diff = (a - numeric.column(j)).norm();
        let scale = a.norm();
        let rel = if scale > 0.0 { diff / scale } else { diff };
        worst = worst.max(rel);
    }
    Ok(Some(worst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::models::{FnModel, HahnModel};

    #[test]
    fn linear_model_is_exact_to_rounding() {
        // truncation vanishes for a linear model; what remains is the
        // rounding of f, about eps |f| / h
        let m = FnModel::new("line", &["a", "b"], |x, p| p[0] + p[1] * x);
        let x = [0.0, 1.0, 2.5, -4.0];
        let p = [0.3, -1.7];
        let j = numeric_jacobian(&m, &x, &p, None).unwrap();
        let f_max = m.predict(&x, &p).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (i, xi) in x.iter().enumerate() {
            for (c, exact) in [1.0, *xi].iter().enumerate() {
                let bound = 8.0 * f64::EPSILON * f_max / fd_step(p[c]);
                assert!((j[(i, c)] - exact).abs() <= bound);
            }
        }
    }

    #[test]
    fn hahn_t2_column_matches_derivative() {
        let m = HahnModel;
        let (a0, t2, n) = (1.0, 0.38e-3, 2.11);
        // 2t = T2
        let x = [0.5 * t2];
        let j = numeric_jacobian(&m, &x, &[a0, t2, n], None).unwrap();
        let analytic = a0 * (-1.0f64).exp() * n / t2;
        assert!(((j[(0, 1)] - analytic) / analytic).abs() < 1e-6);
    }

    #[test]
    fn ignored_parameter_gives_zero_column() {
        let m = FnModel::new("ignores b", &["a", "b"], |x, p| p[0] * x);
        let j = numeric_jacobian(&m, &[1.0, 2.0], &[1.0, 5.0], None).unwrap();
        assert_eq!(j.column(1).norm(), 0.0);
    }

    #[test]
    fn never_leaves_bounds() {
        use std::sync::Mutex;
        let seen = std::sync::Arc::new(Mutex::new(Vec::new()));
        let log = seen.clone();
        let m = FnModel::new("sqrt", &["a"], move |x, p| {
            log.lock().unwrap().push(p[0]);
            p[0].sqrt() * x
        });
        let b = [Bound::new(0.0, 1.0).unwrap()];
        for p in [0.0, 1e-12, 0.5, 1.0] {
            numeric_jacobian(&m, &[1.0], &[p], Some(&b)).unwrap();
        }
        assert!(seen.lock().unwrap().iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn non_finite_output_names_parameters() {
        let m = FnModel::new("log", &["scale"], |x, p| (p[0] * x).ln());
        let err = numeric_jacobian(&m, &[1.0], &[-1.0], None).unwrap_err();
        assert!(err.to_string().contains("scale="), "{err}");
    }
}
