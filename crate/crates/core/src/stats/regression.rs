//! Fully standardized multiple linear regression.
//!
//! The response and every predictor are Z-normalized with sample standard
//! deviations, then fit by least squares without an intercept (it is zero by
//! construction). Coefficients are therefore directly comparable in magnitude.

use serde::Serialize;

use super::descriptive::{norm_params, NormParams};
use super::special::two_sided_p;
use crate::error::{Error, Result};

/// Reciprocal condition (|R_kk| / |R_11| after pivoting) below which the
/// design is treated as rank deficient.
pub const RCOND_LIMIT: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub df_residual: usize,
    pub n: usize,
    pub response_norm: NormParams,
    pub predictor_norms: Vec<NormParams>,
    /// Fitted standardized response, input order.
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl RegressionFit {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Least-squares solution of X b ≈ y for a column-major X, via Householder QR
/// with column pivoting. Returns the coefficients and diag((XᵀX)⁻¹).
fn solve_least_squares(
    columns: &[Vec<f64>],
    y: &[f64],
    names: &[String],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = columns.len();
    let mut a: Vec<Vec<f64>> = columns.to_vec();
    let mut qty = y.to_vec();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut diag = vec![0.0; k];

    for j in 0..k {
        // pivot: largest remaining column norm
        let norm_below = |col: &Vec<f64>| col[j..].iter().map(|v| v * v).sum::<f64>();
        let p = (j..k)
            .max_by(|&l, &r| {
                norm_below(&a[l])
                    .total_cmp(&norm_below(&a[r]))
                    .then(r.cmp(&l))
            })
            .expect("nonempty range");
        a.swap(j, p);
        perm.swap(j, p);

        let alpha_sq = norm_below(&a[j]);
        let alpha = alpha_sq.sqrt();
        let r_jj = if a[j][j] > 0.0 { -alpha } else { alpha };
        diag[j] = r_jj;
        if alpha == 0.0 {
            continue;
        }
        // v = x − r_jj e_j, stored in a[j][j..]
        a[j][j] -= r_jj;
        let v_norm_sq: f64 = a[j][j..].iter().map(|v| v * v).sum();
        if v_norm_sq == 0.0 {
            continue;
        }
        let (head, tail) = a.split_at_mut(j + 1);
        let v = &head[j][j..];
        for col in tail.iter_mut() {
            let s: f64 =
                v.iter().zip(&col[j..]).map(|(vi, ci)| vi * ci).sum::<f64>() * 2.0 / v_norm_sq;
            for (ci, vi) in col[j..].iter_mut().zip(v) {
                *ci -= s * vi;
            }
        }
        let s: f64 = v.iter().zip(&qty[j..]).map(|(vi, yi)| vi * yi).sum::<f64>() * 2.0 / v_norm_sq;
        for (yi, vi) in qty[j..].iter_mut().zip(v) {
            *yi -= s * vi;
        }
    }

    // R: diag on the diagonal, a[c][r] above it
    let r = |row: usize, col: usize| if row == col { diag[col] } else { a[col][row] };
    let lead = diag[0].abs();
    if let Some(j) = (0..k).find(|&j| lead == 0.0 || diag[j].abs() < RCOND_LIMIT * lead) {
        let mut offending = vec![perm[j]];
        if j > 0 && lead > 0.0 {
            // express the dependent column through the earlier pivots
            let mut z = vec![0.0; j];
            for i in (0..j).rev() {
                let s: f64 = (i + 1..j).map(|l| r(i, l) * z[l]).sum();
                z[i] = (r(i, j) - s) / r(i, i);
            }
            offending.extend((0..j).filter(|&i| z[i].abs() > 1e-8).map(|i| perm[i]));
        }
        offending.sort_unstable();
        return Err(Error::Collinear {
            columns: offending.into_iter().map(|i| names[i].clone()).collect(),
        });
    }
    // back substitution R b = Qᵀy
    let mut b = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|l| r(i, l) * b[l]).sum();
        b[i] = (qty[i] - s) / r(i, i);
    }
    // R⁻¹ column by column; (XᵀX)⁻¹ = R⁻¹ R⁻ᵀ
    let mut rinv = vec![vec![0.0; k]; k];
    for c in 0..k {
        for i in (0..=c).rev() {
            let rhs = if i == c { 1.0 } else { 0.0 };
            let s: f64 = (i + 1..=c).map(|l| r(i, l) * rinv[l][c]).sum();
            rinv[i][c] = (rhs - s) / r(i, i);
        }
    }
    let inv_diag: Vec<f64> = (0..k)
        .map(|i| rinv[i].iter().map(|v| v * v).sum())
        .collect();

    let mut coef = vec![0.0; k];
    let mut var = vec![0.0; k];
    for (pos, &orig) in perm.iter().enumerate() {
        coef[orig] = b[pos];
        var[orig] = inv_diag[pos];
    }
    Ok((coef, var))
}

/// Standardized regression of `y` on `columns` (one vector per predictor).
pub fn ols_standardized(
    y: &[f64],
    columns: &[Vec<f64>],
    names: &[String],
) -> Result<RegressionFit> {
    let n = y.len();
    let k = columns.len();
    if names.len() != k {
        return Err(Error::usage(format!(
            "{k} predictor columns but {} names",
            names.len()
        )));
    }
    if k == 0 {
        return Err(Error::usage("regression needs at least one predictor"));
    }
    if let Some((name, col)) = names.iter().zip(columns).find(|(_, c)| c.len() != n) {
        return Err(Error::usage(format!(
            "predictor {name} has {} rows, response has {n}",
            col.len()
        )));
    }
    if n < k + 2 {
        return Err(Error::InsufficientData {
            rows: n,
            predictors: k,
            needed: k + 2,
        });
    }

    let response_norm =
        norm_params(y).map_err(|e| Error::DegenerateScale(format!("response: {}", strip(&e))))?;
    let zy: Vec<f64> = y.iter().map(|&v| response_norm.z(v)).collect();
    let mut predictor_norms = Vec::with_capacity(k);
    let mut zx = Vec::with_capacity(k);
    for (name, col) in names.iter().zip(columns) {
        let p = norm_params(col)
            .map_err(|e| Error::DegenerateScale(format!("predictor {name}: {}", strip(&e))))?;
        zx.push(col.iter().map(|&v| p.z(v)).collect::<Vec<f64>>());
        predictor_norms.push(p);
    }

    let (coefficients, inv_diag) = solve_least_squares(&zx, &zy, names)?;

    let fitted: Vec<f64> = (0..n)
        .map(|i| coefficients.iter().zip(&zx).map(|(b, c)| b * c[i]).sum())
        .collect();
    let residuals: Vec<f64> = zy.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let tss: f64 = zy.iter().map(|v| v * v).sum();
    let df_residual = n - k - 1;
    let sigma2 = rss / df_residual as f64;

    let std_errors: Vec<f64> = inv_diag.iter().map(|v| (sigma2 * v).sqrt()).collect();
    let t_stats: Vec<f64> = coefficients
        .iter()
        .zip(&std_errors)
        .map(|(&b, &se)| match (b, se) {
            (b, se) if se > 0.0 => b / se,
            (b, _) if b == 0.0 => 0.0,
            (b, _) => f64::INFINITY.copysign(b),
        })
        .collect();
    let p_values = t_stats
        .iter()
        .map(|&t| two_sided_p(t, df_residual as f64))
        .collect();

    Ok(RegressionFit {
        names: names.to_vec(),
        coefficients,
        std_errors,
        t_stats,
        p_values,
        r_squared: (1.0 - rss / tss).clamp(0.0, 1.0),
        df_residual,
        n,
        response_norm,
        predictor_norms,
        fitted,
        residuals,
    })
}

fn strip(e: &Error) -> String {
    match e {
        Error::DegenerateScale(m) => m.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::USER_MEASUREMENTS;

    fn names(ns: &[&str]) -> Vec<String> {
        ns.iter().map(|s| s.to_string()).collect()
    }

    fn col(i: usize) -> Vec<f64> {
        USER_MEASUREMENTS
            .iter()
            .map(|r| match i {
                2 => r.2,
                3 => r.3,
                4 => r.4,
                _ => r.5,
            })
            .collect()
    }

    #[test]
    fn two_predictor_fit_on_user_table() {
        let fit = ols_standardized(&col(2), &[col(3), col(5)], &names(&["kappa", "rep"])).unwrap();
        assert!(
            (fit.coefficients[0] - 0.40).abs() < 0.005,
            "{:?}",
            fit.coefficients
        );
        assert!((fit.coefficients[1] + 0.78).abs() < 0.005);
        assert!((fit.r_squared - 0.92).abs() < 0.005);
        assert_eq!(fit.df_residual, 13);
        assert!(fit.p_values[0] < 0.0003);
        assert!(fit.p_values[1] < 0.0001);
    }

    #[test]
    fn three_predictor_fit_flags_utterances() {
        let fit = ols_standardized(
            &col(2),
            &[col(3), col(4), col(5)],
            &names(&["kappa", "utt", "rep"]),
        )
        .unwrap();
        assert!(fit.p_values[0] < 0.02);
        assert!(fit.p_values[2] < 0.02);
        assert!(fit.p_values[1] > 0.05);
    }

    #[test]
    fn response_equal_to_predictor() {
        let x = vec![3.0, 1.0, 4.0, 1.5, 9.0, 2.6];
        let noise = vec![0.3, -1.0, 0.2, 0.9, 0.1, -0.4];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 7.0).collect();
        let fit = ols_standardized(&y, &[x, noise], &names(&["x", "noise"])).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!(fit.coefficients[1].abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_columns_are_named() {
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0, 7.0];
        let b = vec![2.0, 1.0, 0.0, 3.0, 1.0, 1.0];
        let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - y).collect();
        let y = vec![1.0, 3.0, 2.0, 5.0, 4.0, 6.0];
        let err = ols_standardized(&y, &[a, b, c], &names(&["a", "b", "c"])).unwrap_err();
        match err {
            Error::Collinear { columns } => assert_eq!(columns, names(&["a", "b", "c"])),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let err = ols_standardized(
            &[1.0, 2.0, 4.0],
            &[vec![1.0, 0.0, 2.0], vec![5.0, 3.0, 1.0]],
            &names(&["a", "b"]),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientData {
                rows: 3,
                predictors: 2,
                needed: 4
            }
        ));
    }

    #[test]
    fn constant_predictor_is_degenerate() {
        let err = ols_standardized(&[1.0, 2.0, 4.0, 3.0], &[vec![1.0; 4]], &names(&["flat"]))
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateScale(ref m) if m.contains("flat")));
    }
}
