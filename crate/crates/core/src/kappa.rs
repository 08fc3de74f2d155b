//! Confusion matrices over AVM values and the Kappa task-success measure.

use std::collections::BTreeSet;
use std::ops::{Add, Range};

use serde::Serialize;

use crate::avm::{compare_to_key, normalize, AvmSchema, Corpus, Dialogue, Observed};
use crate::error::{Error, Result};
use crate::segment::Segment;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttributeBlock {
    pub name: String,
    pub abbrev: String,
    pub labels: Range<usize>,
}

/// Square count matrix over every value label of the schema.
/// Rows are observed (data) values, columns are key values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    /// Extra data row for observations left unresolved, indexed by key column.
    pub unresolved: Vec<u64>,
    /// Label ranges of each attribute, schema order.
    pub attribute_blocks: Vec<AttributeBlock>,
    /// Columns that count towards T, P(A) and P(E).
    pub columns: Range<usize>,
}

impl ConfusionMatrix {
    pub fn zeros(schema: &AvmSchema) -> Self {
        let n = schema.label_count();
        ConfusionMatrix {
            labels: schema.labels().map(|l| schema.label_name(l)).collect(),
            counts: vec![vec![0; n]; n],
            unresolved: vec![0; n],
            attribute_blocks: (0..schema.len())
                .map(|a| AttributeBlock {
                    name: schema.attribute(a).name.clone(),
                    abbrev: schema.attribute(a).abbrev.clone(),
                    labels: schema.block(a),
                })
                .collect(),
            columns: 0..n,
        }
    }

    /// Wraps a full count table (rows = data, columns = key) laid out in schema label order.
    pub fn from_counts(schema: &AvmSchema, counts: Vec<Vec<u64>>) -> Result<Self> {
        let mut m = Self::zeros(schema);
        let n = m.labels.len();
        if counts.len() != n || counts.iter().any(|r| r.len() != n) {
            return Err(Error::invalid(format!("count table must be {n}x{n}")));
        }
        m.counts = counts;
        Ok(m)
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    /// t_i: sum of column i including the unresolved row.
    pub fn column_sum(&self, col: usize) -> u64 {
        self.counts.iter().map(|r| r[col]).sum::<u64>() + self.unresolved[col]
    }

    /// T over the scoped columns.
    pub fn total(&self) -> u64 {
        self.columns.clone().map(|c| self.column_sum(c)).sum()
    }

    pub fn diagonal(&self) -> u64 {
        self.columns.clone().map(|c| self.counts[c][c]).sum()
    }

    pub fn off_diagonal(&self) -> u64 {
        self.total() - self.diagonal()
    }

    pub fn block(&self, attribute: &str) -> Option<Range<usize>> {
        let wanted = normalize(attribute);
        self.attribute_blocks
            .iter()
            .find(|b| normalize(&b.name) == wanted || normalize(&b.abbrev) == wanted)
            .map(|b| b.labels.clone())
    }

    fn add_observation(&mut self, schema: &AvmSchema, observed: Observed, key_col: usize) {
        match observed {
            Observed::Value(label) => self.counts[schema.label_index(label)][key_col] += 1,
            Observed::Unresolved => self.unresolved[key_col] += 1,
        }
    }

    /// Comma-separated export with label headers; the unresolved row is written last.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["data\\key".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in self.labels.iter().zip(&self.counts) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(u64::to_string));
            w.write_record(&rec)?;
        }
        let mut rec = vec![crate::avm::UNRESOLVED.to_string()];
        rec.extend(self.unresolved.iter().map(u64::to_string));
        w.write_record(&rec)?;
        let mut rec = vec!["sum".to_string()];
        rec.extend((0..self.size()).map(|c| self.column_sum(c).to_string()));
        w.write_record(&rec)?;
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

impl Add for &ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(self, rhs: &ConfusionMatrix) -> ConfusionMatrix {
        assert_eq!(
            self.labels, rhs.labels,
            "matrices over different label sets"
        );
        let mut out = self.clone();
        for (row, other) in out.counts.iter_mut().zip(&rhs.counts) {
            for (c, o) in row.iter_mut().zip(other) {
                *c += o;
            }
        }
        for (c, o) in out.unresolved.iter_mut().zip(&rhs.unresolved) {
            *c += o;
        }
        out
    }
}

/// Which (dialogue, attribute) observations go into a matrix.
/// Empty selectors select everything.
#[derive(Debug, Clone, Default)]
pub struct ScopeFilter {
    pub agents: BTreeSet<String>,
    pub users: BTreeSet<String>,
    pub scenarios: BTreeSet<String>,
    pub dialogues: BTreeSet<String>,
    pub attributes: BTreeSet<String>,
    /// Attribute set of a segment; intersected with `attributes`.
    pub segment_attributes: Option<BTreeSet<usize>>,
}

fn norm_set<I: IntoIterator<Item = S>, S: AsRef<str>>(items: I) -> BTreeSet<String> {
    items.into_iter().map(|s| normalize(s.as_ref())).collect()
}

impl ScopeFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn agents<I: IntoIterator<Item = S>, S: AsRef<str>>(mut self, items: I) -> Self {
        self.agents.extend(norm_set(items));
        self
    }

    pub fn users<I: IntoIterator<Item = S>, S: AsRef<str>>(mut self, items: I) -> Self {
        self.users.extend(norm_set(items));
        self
    }

    pub fn scenarios<I: IntoIterator<Item = S>, S: AsRef<str>>(mut self, items: I) -> Self {
        self.scenarios.extend(norm_set(items));
        self
    }

    pub fn dialogues<I: IntoIterator<Item = S>, S: AsRef<str>>(mut self, items: I) -> Self {
        self.dialogues.extend(norm_set(items));
        self
    }

    pub fn attributes<I: IntoIterator<Item = S>, S: AsRef<str>>(mut self, items: I) -> Self {
        self.attributes.extend(norm_set(items));
        self
    }

    /// Only attributes of the segment contribute.
    pub fn within_segment(mut self, segment: &Segment) -> Self {
        self.segment_attributes = Some(segment.attributes.clone());
        self
    }

    pub fn selects(&self, d: &Dialogue) -> bool {
        let hit = |set: &BTreeSet<String>, v: &str| set.is_empty() || set.contains(&normalize(v));
        hit(&self.agents, &d.agent)
            && hit(&self.users, &d.user)
            && hit(&self.scenarios, &d.scenario)
            && hit(&self.dialogues, &d.id)
    }

    fn attribute_mask(&self, schema: &AvmSchema) -> Result<Vec<bool>> {
        let mut mask = vec![self.attributes.is_empty(); schema.len()];
        for a in &self.attributes {
            mask[schema.require_attribute(a)?] = true;
        }
        if let Some(seg) = &self.segment_attributes {
            for (i, m) in mask.iter_mut().enumerate() {
                *m &= seg.contains(&i);
            }
        }
        Ok(mask)
    }
}

/// Counts every selected (dialogue, attribute) observation against its key.
pub fn build_confusion(corpus: &Corpus, scope: &ScopeFilter) -> Result<ConfusionMatrix> {
    let schema = &corpus.schema;
    let mask = scope.attribute_mask(schema)?;
    let mut m = ConfusionMatrix::zeros(schema);
    for d in corpus.dialogues.iter().filter(|d| scope.selects(d)) {
        let key = corpus.key_for(d)?;
        for entry in compare_to_key(schema, d, key)?.entries {
            if mask[entry.attribute] {
                m.add_observation(schema, entry.observed, schema.label_index(entry.key));
            }
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaResult {
    pub p_a: f64,
    pub p_e: f64,
    pub kappa: f64,
    pub t_total: u64,
}

fn nonempty(m: &ConfusionMatrix) -> Result<f64> {
    match m.total() {
        0 => Err(Error::UndefinedMeasure(
            "confusion matrix is empty (T = 0)".into(),
        )),
        t => Ok(t as f64),
    }
}

/// Observed agreement: diagonal mass over T.
pub fn p_agreement(m: &ConfusionMatrix) -> Result<f64> {
    let t = nonempty(m)?;
    Ok(m.diagonal() as f64 / t)
}

/// Chance agreement estimated from the key (column) distribution.
pub fn p_chance(m: &ConfusionMatrix) -> Result<f64> {
    let t = nonempty(m)?;
    // Σ t_i² / T² in integers so P(E) and P(A) round identically
    let squares: u128 = m
        .columns
        .clone()
        .map(|c| (m.column_sum(c) as u128).pow(2))
        .sum();
    Ok(squares as f64 / (t * t))
}

pub fn kappa(m: &ConfusionMatrix) -> Result<KappaResult> {
    let p_a = p_agreement(m)?;
    let p_e = p_chance(m)?;
    // P(E) == 1 exactly when one column holds all of T
    let t_total = m.total();
    if m.columns.clone().any(|c| m.column_sum(c) == t_total) {
        return Err(Error::DegenerateChance { attribute: None });
    }
    let kappa = if m.off_diagonal() == 0 {
        1.0
    } else {
        (p_a - p_e) / (1.0 - p_e)
    };
    Ok(KappaResult {
        p_a,
        p_e,
        kappa,
        t_total,
    })
}

/// Keeps every row but only the columns of one attribute.
pub fn restrict_to_attribute(m: &ConfusionMatrix, attribute: &str) -> Result<ConfusionMatrix> {
    let block = m
        .block(attribute)
        .ok_or_else(|| Error::usage(format!("unknown attribute {attribute:?}")))?;
    let mut out = m.clone();
    out.columns = block;
    Ok(out)
}

/// Kappa of each attribute block with observations in scope, in schema order.
pub fn attribute_kappas(m: &ConfusionMatrix) -> Result<Vec<(String, KappaResult)>> {
    m.attribute_blocks
        .iter()
        .filter(|b| m.columns.start <= b.labels.start && b.labels.end <= m.columns.end)
        .filter(|b| b.labels.clone().any(|c| m.column_sum(c) > 0))
        .map(|AttributeBlock { name, .. }| {
            let sub = restrict_to_attribute(m, name)?;
            let k = kappa(&sub).map_err(|e| match e {
                Error::DegenerateChance { .. } => Error::DegenerateChance {
                    attribute: Some(name.clone()),
                },
                Error::UndefinedMeasure(msg) => {
                    Error::UndefinedMeasure(format!("attribute {name}: {msg}"))
                }
                other => other,
            })?;
            Ok((name.clone(), k))
        })
        .collect()
}

/// Unweighted mean of the per-attribute kappas.
pub fn average_attribute_kappa(m: &ConfusionMatrix) -> Result<f64> {
    let per = attribute_kappas(m)?;
    if per.is_empty() {
        return Err(Error::UndefinedMeasure(
            "no attribute blocks in scope".into(),
        ));
    }
    Ok(per.iter().map(|(_, k)| k.kappa).sum::<f64>() / per.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::avm::{AttributeDef, Dialogue, ScenarioKey};
    use crate::fixtures;

    fn agent_a() -> ConfusionMatrix {
        ConfusionMatrix::from_counts(&fixtures::train_schema(), fixtures::agent_a_counts()).unwrap()
    }

    fn agent_b() -> ConfusionMatrix {
        ConfusionMatrix::from_counts(&fixtures::train_schema(), fixtures::agent_b_counts()).unwrap()
    }

    fn perfect() -> ConfusionMatrix {
        let schema = fixtures::train_schema();
        let n = schema.label_count();
        let counts = (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| if r == c { 3 + r as u64 } else { 0 })
                    .collect()
            })
            .collect();
        ConfusionMatrix::from_counts(&schema, counts).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn agent_a_matrix_from_fixture_corpus_equals_table() {
        let m = build_confusion(&fixtures::agent_a_corpus(), &ScopeFilter::all()).unwrap();
        assert_eq!(m.counts, fixtures::agent_a_counts());
        assert_eq!(m.unresolved.iter().sum::<u64>(), 0);
        let m = build_confusion(&fixtures::agent_b_corpus(), &ScopeFilter::all()).unwrap();
        assert_eq!(m.counts, fixtures::agent_b_counts());
    }

    #[test]
    fn one_matching_dialogue_fills_four_diagonal_cells() {
        let corpus = fixtures::train_dialogues();
        let m = build_confusion(&corpus, &ScopeFilter::all().dialogues(["D1"])).unwrap();
        assert_eq!(m.total(), 4);
        assert_eq!(m.diagonal(), 4);
        let names: Vec<&str> = (0..m.size())
            .filter(|&i| m.counts[i][i] == 1)
            .map(|i| m.labels[i].as_str())
            .collect();
        assert_eq!(names, ["DC:Torino", "AC:Milano", "DR:evening", "DT:8pm"]);
    }

    #[test]
    fn attribute_scope_keeps_rows_and_column_sums() {
        let m = build_confusion(
            &fixtures::agent_b_corpus(),
            &ScopeFilter::all().attributes(["depart-city"]),
        )
        .unwrap();
        assert_eq!(m.size(), 14);
        let sums: Vec<u64> = (0..14).map(|c| m.column_sum(c)).collect();
        assert_eq!(sums, [30, 30, 25, 15, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        // cross-attribute rows survive: the agent B matrix has AC/DR rows in DC columns
        assert!(m.counts[4..].iter().any(|r| r[..4].iter().any(|&c| c > 0)));
        let full = restrict_to_attribute(&agent_b(), "DC").unwrap();
        assert_eq!(kappa(&m).unwrap(), kappa(&full).unwrap());
    }

    #[test]
    fn golden_agreement_values() {
        assert!(close(p_agreement(&agent_a()).unwrap(), 0.795, 1e-12));
        assert!(close(p_agreement(&agent_b()).unwrap(), 0.59, 1e-12));
        assert_eq!(p_agreement(&perfect()).unwrap(), 1.0);
    }

    #[test]
    fn golden_chance_values() {
        // Σ t_i² / T² = 12700 / 160000
        assert!(close(p_chance(&agent_a()).unwrap(), 0.079375, 1e-12));
        assert!(close(p_chance(&agent_b()).unwrap(), 0.079375, 1e-12));
        let dc = restrict_to_attribute(&agent_a(), "depart-city").unwrap();
        assert!(close(p_chance(&dc).unwrap(), 0.265, 1e-12));
    }

    #[test]
    fn uniform_key_columns_give_one_over_n() {
        let schema =
            AvmSchema::new(vec![AttributeDef::new("x", "X", ["a", "b", "c", "d", "e"])]).unwrap();
        let counts = (0..5)
            .map(|r| (0..5).map(|c| if r == c { 7 } else { 0 }).collect())
            .collect();
        let m = ConfusionMatrix::from_counts(&schema, counts).unwrap();
        assert!(close(p_chance(&m).unwrap(), 0.2, 1e-15));
    }

    #[test]
    fn golden_kappa_values() {
        let a = kappa(&agent_a()).unwrap();
        assert_eq!(a.t_total, 400);
        assert!(close(a.kappa, 0.777, 5e-4), "{}", a.kappa);
        let b = kappa(&agent_b()).unwrap();
        assert!(close(b.kappa, 0.555, 5e-4), "{}", b.kappa);
        assert_eq!(kappa(&perfect()).unwrap().kappa, 1.0);
    }

    #[test]
    fn depart_city_restrictions() {
        let a = kappa(&restrict_to_attribute(&agent_a(), "depart-city").unwrap()).unwrap();
        assert!(close(a.p_a, 0.78, 1e-12));
        assert!(close(a.p_e, 0.265, 1e-12));
        // (0.78 - 0.265) / 0.735
        assert!(close(a.kappa, 0.515 / 0.735, 1e-12));
        let b = kappa(&restrict_to_attribute(&agent_b(), "DC").unwrap()).unwrap();
        // diagonal 16 + 20 + 9 + 6 = 51 over T = 100
        assert!(close(b.kappa, 0.245 / 0.735, 1e-12));
        for attr in ["DC", "AC", "DR", "DT"] {
            let p = restrict_to_attribute(&perfect(), attr).unwrap();
            assert_eq!(kappa(&p).unwrap().kappa, 1.0);
        }
        assert!(restrict_to_attribute(&agent_a(), "XX")
            .unwrap_err()
            .is_usage());
    }

    #[test]
    fn averaged_attribute_kappa() {
        assert_eq!(average_attribute_kappa(&perfect()).unwrap(), 1.0);
        // per-block kappas hand-computed from the agent A matrix (all rows, block columns):
        // DC: P(A) 78/100, P(E) 0.265
        // AC: P(A) 77/100, P(E) (625+625+900+400)/10000 = 0.255
        // DR: P(A) 85/100, P(E) 0.5
        // DT: P(A) 78/100, P(E) 0.25
        let expected = ((0.78 - 0.265) / 0.735
            + (0.77 - 0.255) / 0.745
            + (0.85 - 0.5) / 0.5
            + (0.78 - 0.25) / 0.75)
            / 4.0;
        assert!(close(
            average_attribute_kappa(&agent_a()).unwrap(),
            expected,
            1e-12
        ));
    }

    #[test]
    fn averaged_kappa_of_perfect_and_chance_blocks_is_half() {
        let schema = AvmSchema::new(vec![
            AttributeDef::new("x", "X", ["a", "b"]),
            AttributeDef::new("y", "Y", ["c", "d"]),
        ])
        .unwrap();
        // X perfect; Y rows proportional to t_i t_j / T (t = 2, 2) → κ = 0
        let counts = vec![
            vec![2, 0, 0, 0],
            vec![0, 2, 0, 0],
            vec![0, 0, 1, 1],
            vec![0, 0, 1, 1],
        ];
        let m = ConfusionMatrix::from_counts(&schema, counts).unwrap();
        let per = attribute_kappas(&m).unwrap();
        assert_eq!(per[0].1.kappa, 1.0);
        assert_eq!(per[1].1.kappa, 0.0);
        assert_eq!(average_attribute_kappa(&m).unwrap(), 0.5);
    }

    #[test]
    fn empty_scope_is_undefined() {
        let m = build_confusion(
            &fixtures::agent_a_corpus(),
            &ScopeFilter::all().agents(["nobody"]),
        )
        .unwrap();
        assert_eq!(m.total(), 0);
        assert!(matches!(p_agreement(&m), Err(Error::UndefinedMeasure(_))));
        assert!(matches!(p_chance(&m), Err(Error::UndefinedMeasure(_))));
        assert!(matches!(kappa(&m), Err(Error::UndefinedMeasure(_))));
    }

    #[test]
    fn single_key_value_is_degenerate() {
        let schema = AvmSchema::new(vec![AttributeDef::new("x", "X", ["a", "b"])]).unwrap();
        let m = ConfusionMatrix::from_counts(&schema, vec![vec![3, 0], vec![2, 0]]).unwrap();
        assert!(matches!(
            kappa(&m),
            Err(Error::DegenerateChance { attribute: None })
        ));
        let err = average_attribute_kappa(&m).unwrap_err();
        assert!(matches!(err, Error::DegenerateChance { attribute: Some(ref a) } if a == "x"));
    }

    #[test]
    fn unresolved_observations_count_against_agreement() {
        let schema = fixtures::train_schema();
        let key = fixtures::train_key();
        let mut d: Dialogue = fixtures::train_dialogues().dialogues.remove(0);
        d.observed
            .insert("DT".into(), crate::avm::UNRESOLVED.into());
        let corpus = Corpus {
            schema,
            scenarios: vec![key],
            dialogues: vec![d],
        };
        let m = build_confusion(&corpus, &ScopeFilter::all()).unwrap();
        assert_eq!(m.total(), 4);
        assert_eq!(m.diagonal(), 3);
        assert_eq!(m.unresolved[13], 1);
        let csv = m.to_csv().unwrap();
        assert!(csv.lines().any(|l| l.starts_with(crate::avm::UNRESOLVED)));
    }

    #[test]
    fn csv_export_has_label_header() {
        let csv = agent_a().to_csv().unwrap();
        let first = csv.lines().next().unwrap();
        assert!(first.starts_with("data\\key,DC:Milano,DC:Roma"));
        let sum_line = csv.lines().last().unwrap();
        assert_eq!(sum_line, "sum,30,30,25,15,25,25,30,20,50,50,25,25,25,25");
    }

    #[test]
    fn scenario_key_values_must_come_from_own_attribute() {
        let schema = fixtures::train_schema();
        let bad = ScenarioKey {
            id: "x".into(),
            assignments: [
                ("DC", "morning"),
                ("AC", "Roma"),
                ("DR", "evening"),
                ("DT", "6am"),
            ]
            .iter()
            .map(|(a, v)| (a.to_string(), v.to_string()))
            .collect(),
        };
        assert!(bad.resolve(&schema).is_err());
    }
}
