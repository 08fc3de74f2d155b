use serde::Serialize;

use super::descriptive::mean;
use super::special::two_sided_p;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    pub p_two_sided: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// Pooled-variance two-sample t-test, df = n1 + n2 − 2.
pub fn two_sample_t(xs: &[f64], ys: &[f64]) -> Result<TTest> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(Error::DegenerateScale(format!(
            "each sample needs at least 2 values (got {} and {})",
            xs.len(),
            ys.len()
        )));
    }
    let (n1, n2) = (xs.len() as f64, ys.len() as f64);
    let (m1, m2) = (mean(xs), mean(ys));
    let ss1: f64 = xs.iter().map(|x| (x - m1) * (x - m1)).sum();
    let ss2: f64 = ys.iter().map(|y| (y - m2) * (y - m2)).sum();
    let df = xs.len() + ys.len() - 2;
    let pooled = (ss1 + ss2) / df as f64;
    let se = (pooled * (1.0 / n1 + 1.0 / n2)).sqrt();
    let diff = m1 - m2;

    if se == 0.0 {
        return Ok(if diff == 0.0 {
            TTest {
                t: 0.0,
                df,
                p_two_sided: 1.0,
                diagnostic: None,
            }
        } else {
            TTest {
                t: f64::INFINITY.copysign(diff),
                df,
                p_two_sided: 0.0,
                diagnostic: Some("pooled variance is zero but the means differ".into()),
            }
        });
    }
    let t = diff / se;
    Ok(TTest {
        t,
        df,
        p_two_sided: two_sided_p(t, df as f64),
        diagnostic: None,
    })
}
