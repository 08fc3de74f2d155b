use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean and sample (n − 1) standard deviation defining a Z-score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormParams {
    pub mean: f64,
    pub std: f64,
    /// Pool size; absent when the parameters were supplied rather than computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

impl NormParams {
    /// Externally supplied parameters (e.g. a published pool).
    pub fn given(mean: f64, std: f64) -> Result<Self> {
        if !(std.is_finite() && std > 0.0 && mean.is_finite()) {
            return Err(Error::DegenerateScale(format!(
                "standard deviation {std} must be positive"
            )));
        }
        Ok(NormParams { mean, std, n: None })
    }

    pub fn z(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Σ (x − mean)², summed in index order.
fn centered_ss(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m) * (x - m)).sum()
}

pub fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (centered_ss(xs, m) / (xs.len() as f64 - 1.0)).sqrt()
}

pub fn norm_params(xs: &[f64]) -> Result<NormParams> {
    if xs.len() < 2 {
        return Err(Error::DegenerateScale(format!(
            "need at least 2 values, got {}",
            xs.len()
        )));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateScale("non-finite value".into()));
    }
    let m = mean(xs);
    let std = (centered_ss(xs, m) / (xs.len() as f64 - 1.0)).sqrt();
    if !(std > 0.0) || xs.iter().all(|&x| x == xs[0]) {
        return Err(Error::DegenerateScale("all values are equal".into()));
    }
    Ok(NormParams {
        mean: m,
        std,
        n: Some(xs.len()),
    })
}

pub fn z_score(x: f64, p: &NormParams) -> f64 {
    p.z(x)
}

/// Z-scores of a series against its own parameters.
pub fn standardize(xs: &[f64]) -> Result<(Vec<f64>, NormParams)> {
    let p = norm_params(xs)?;
    Ok((xs.iter().map(|&x| p.z(x)).collect(), p))
}

pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::usage(format!(
            "series lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    let px = norm_params(xs)?;
    let py = norm_params(ys)?;
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - px.mean) * (y - py.mean))
        .sum();
    let sxx = centered_ss(xs, px.mean);
    let syy = centered_ss(ys, py.mean);
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::USER_MEASUREMENTS;

    fn column(f: impl Fn(&(u32, &str, f64, f64, f64, f64)) -> f64) -> Vec<f64> {
        USER_MEASUREMENTS.iter().map(f).collect()
    }

    #[test]
    fn utterance_column_parameters() {
        let p = norm_params(&column(|r| r.4)).unwrap();
        assert!((p.mean - 38.625).abs() < 1e-12);
        // sample std of the 16 values, checked against numpy (ddof=1)
        assert!((p.std - 18.927493230747).abs() < 1e-9);
        assert_eq!(p.n, Some(16));
    }

    #[test]
    fn repair_column_parameters() {
        let p = norm_params(&column(|r| r.5)).unwrap();
        // 296.5 / 16
        assert!((p.mean - 18.53125).abs() < 1e-12);
        assert!((p.std - 12.30).abs() < 5e-3);
    }

    #[test]
    fn symmetric_series_mean() {
        assert_eq!(norm_params(&[0.0, 0.0, 1.0, 1.0]).unwrap().mean, 0.5);
    }

    #[test]
    fn user_z_scores() {
        let p = norm_params(&column(|r| r.4)).unwrap();
        assert!((z_score(23.0, &p) - -0.83).abs() < 0.005);
        assert!((z_score(10.0, &p) - -1.51).abs() < 0.005);
        assert_eq!(z_score(p.mean, &p), 0.0);
    }

    #[test]
    fn degenerate_series() {
        assert!(matches!(
            norm_params(&[3.0]),
            Err(Error::DegenerateScale(_))
        ));
        assert!(matches!(
            norm_params(&[2.0, 2.0, 2.0]),
            Err(Error::DegenerateScale(_))
        ));
        assert!(NormParams::given(4.0, 0.0).is_err());
        assert!(pearson_r(&[1.0, 2.0], &[5.0, 5.0]).is_err());
    }

    #[test]
    fn correlation() {
        let r = pearson_r(&column(|r| r.4), &column(|r| r.5)).unwrap();
        assert!((r - 0.91).abs() < 0.01, "{r}");
        let xs = [1.0, 4.0, 2.0, 8.0];
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson_r(&xs, &xs).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson_r(&xs, &neg).unwrap() + 1.0).abs() < 1e-15);
    }
}
