//! Shared helpers: independent oracles and random corpus generation.
#![allow(dead_code)]

use std::collections::BTreeMap;

use dialogue_eval::avm::{AttributeDef, AvmSchema, Corpus, Dialogue, ScenarioKey, Speaker, Utterance, UNRESOLVED};
use rand::Rng;

pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Mean and sample standard deviation, two-pass.
pub fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    (m, (ss / (n - 1.0)).sqrt())
}

/// Solves A x = b for square A by Gauss-Jordan elimination with partial
/// pivoting; also returns A⁻¹.
pub fn gauss_jordan(a: &[Vec<f64>], b: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = a.len();
    // augmented [A | b | I]
    let mut m: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut row = a[i].clone();
            row.push(b[i]);
            row.extend((0..k).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let d = m[col][col];
        for v in m[col].iter_mut() {
            *v /= d;
        }
        for r in 0..k {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    let pivot_row = m[col].clone();
                    for (v, p) in m[r].iter_mut().zip(&pivot_row) {
                        *v -= f * p;
                    }
                }
            }
        }
    }
    let x = m.iter().map(|row| row[k]).collect();
    let inv = m.iter().map(|row| row[k + 1..].to_vec()).collect();
    (x, inv)
}

pub struct OracleFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub r_squared: f64,
}

/// Standardized no-intercept regression through the normal equations.
pub fn ols_oracle(y: &[f64], columns: &[Vec<f64>]) -> OracleFit {
    let n = y.len();
    let k = columns.len();
    let z = |v: &[f64]| {
        let (m, s) = moments(v);
        v.iter().map(|x| (x - m) / s).collect::<Vec<f64>>()
    };
    let zy = z(y);
    let zx: Vec<Vec<f64>> = columns.iter().map(|c| z(c)).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let xtx: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| dot(&zx[i], &zx[j])).collect()).collect();
    let xty: Vec<f64> = (0..k).map(|i| dot(&zx[i], &zy)).collect();
    let (beta, inv) = gauss_jordan(&xtx, &xty);
    let resid: Vec<f64> = (0..n)
        .map(|r| zy[r] - (0..k).map(|j| beta[j] * zx[j][r]).sum::<f64>())
        .collect();
    let rss = dot(&resid, &resid);
    let sigma2 = rss / (n - k - 1) as f64;
    OracleFit {
        std_errors: (0..k).map(|i| (sigma2 * inv[i][i]).sqrt()).collect(),
        coefficients: beta,
        r_squared: 1.0 - rss / dot(&zy, &zy),
    }
}

/// Standard normal CDF by composite Simpson integration of the density.
pub fn normal_cdf(x: f64) -> f64 {
    let steps = 20_000;
    let h = x.abs() / steps as f64;
    let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(0.0) + f(x.abs());
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    let half = s * h / 3.0;
    if x >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// κ straight from (observed label, key label) pairs over one label space.
pub fn kappa_oracle(pairs: &[(usize, usize)], labels: usize) -> (f64, f64, f64) {
    let t = pairs.len() as f64;
    let agree = pairs.iter().filter(|(o, k)| o == k).count() as f64 / t;
    let mut col = vec![0.0; labels];
    for &(_, k) in pairs {
        col[k] += 1.0;
    }
    let chance = col.iter().map(|c| (c / t) * (c / t)).sum::<f64>();
    (agree, chance, (agree - chance) / (1.0 - chance))
}

/// Three attributes with 3, 2 and 4 values, two of them sharing a value name.
pub fn small_schema() -> AvmSchema {
    AvmSchema::new(vec![
        AttributeDef::new("colour", "C", ["red", "green", "blue"]),
        AttributeDef::new("size", "S", ["small", "large"]),
        AttributeDef::new("shade", "H", ["red", "pale", "dark", "mid"]),
    ])
    .unwrap()
}

/// A random corpus over [`small_schema`]: one scenario per dialogue, mostly
/// correct observations with some wrong, foreign-attribute and unresolved ones,
/// and utterances with random tags and repair events.
pub fn random_corpus<R: Rng>(rng: &mut R, dialogues: usize, agent: &str, prefix: &str) -> Corpus {
    let schema = small_schema();
    let abbrevs: Vec<String> = schema.attributes.iter().map(|a| a.abbrev.clone()).collect();
    let mut scenarios = Vec::new();
    let mut ds = Vec::new();
    for i in 0..dialogues {
        let id = format!("{prefix}{i:03}");
        let mut key = BTreeMap::new();
        let mut observed = BTreeMap::new();
        for (a, attr) in schema.attributes.iter().enumerate() {
            let kv = rng.gen_range(0..attr.values.len());
            key.insert(abbrevs[a].clone(), attr.values[kv].clone());
            let obs = match rng.gen_range(0..10) {
                0..=5 => attr.values[kv].clone(),
                6 | 7 => attr.values[rng.gen_range(0..attr.values.len())].clone(),
                8 => {
                    let other = (a + 1) % schema.attributes.len();
                    let oa = &schema.attributes[other];
                    format!("{}:{}", oa.abbrev, oa.values[rng.gen_range(0..oa.values.len())])
                }
                _ => UNRESOLVED.to_string(),
            };
            observed.insert(abbrevs[a].clone(), obs);
        }
        scenarios.push(ScenarioKey { id: id.clone(), assignments: key });
        ds.push(Dialogue {
            id: id.clone(),
            agent: agent.into(),
            user: format!("{prefix}u{i:03}"),
            scenario: id,
            satisfaction: Some(rng.gen_range(1..=7) as f64),
            observed,
            utterances: random_utterances(rng, &abbrevs),
        });
    }
    Corpus { schema, scenarios, dialogues: ds }
}

pub fn random_utterances<R: Rng>(rng: &mut R, abbrevs: &[String]) -> Vec<Utterance> {
    let n = rng.gen_range(1..14);
    (0..n)
        .map(|i| {
            let mut tags: Vec<&str> = abbrevs.iter().filter(|_| rng.gen_bool(0.45)).map(String::as_str).collect();
            if tags.is_empty() {
                tags.push(&abbrevs[rng.gen_range(0..abbrevs.len())]);
            }
            let speaker = if i % 2 == 0 { Speaker::Agent } else { Speaker::User };
            let mut u = Utterance::new(speaker, format!("utterance {i}"), &tags);
            for _ in 0..rng.gen_range(0..3) {
                let targets: Vec<&str> = tags.iter().copied().filter(|_| rng.gen_bool(0.6)).collect();
                if !targets.is_empty() {
                    u = u.with_event("repair", &targets);
                }
            }
            u
        })
        .collect()
}
