//! Dialogue cost measures over whole dialogues and attribute-defined scopes.
//!
//! Efficiency costs count whole utterances. Qualitative event costs use 1/N
//! attribution: an event on an utterance tagged with N attributes contributes
//! 1/N for every target attribute inside the scope.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::avm::{attribute_set, normalize, AvmSchema, Corpus, Dialogue};
use crate::error::{Error, Result};
use crate::segment::Segment;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type", content = "key")]
pub enum CostKind {
    /// Number of utterances in scope.
    Utterances,
    /// Number of qualitative events of the given kind, with 1/N attribution.
    Events(String),
    /// Sum of a precomputed per-utterance annotation (elapsed time, ...).
    Annotation(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostMeasure {
    pub name: String,
    pub kind: CostKind,
}

impl CostMeasure {
    pub fn utterances(name: &str) -> Self {
        CostMeasure {
            name: name.into(),
            kind: CostKind::Utterances,
        }
    }

    pub fn events(name: &str, kind: &str) -> Self {
        CostMeasure {
            name: name.into(),
            kind: CostKind::Events(kind.into()),
        }
    }

    pub fn annotation(name: &str, key: &str) -> Self {
        CostMeasure {
            name: name.into(),
            kind: CostKind::Annotation(key.into()),
        }
    }
}

impl fmt::Display for CostMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            CostKind::Utterances => write!(f, "{}=utterances", self.name),
            CostKind::Events(k) => write!(f, "{}=events:{k}", self.name),
            CostKind::Annotation(k) => write!(f, "{}=annotation:{k}", self.name),
        }
    }
}

/// `NAME[=KIND]` where KIND is `utterances`, `events:<kind>` or
/// `annotation:<key>`. Without a kind, `utt` means utterances, `rep` means
/// repair events and any other name counts events of that name.
impl FromStr for CostMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, kind) = match s.split_once('=') {
            Some((n, k)) => (n.trim(), Some(k.trim())),
            None => (s.trim(), None),
        };
        if name.is_empty() {
            return Err(Error::usage(format!("bad measure {s:?}")));
        }
        let measure = match kind {
            None => match name {
                "utt" => CostMeasure::utterances(name),
                "rep" => CostMeasure::events(name, "repair"),
                other => CostMeasure::events(name, other),
            },
            Some("utterances") => CostMeasure::utterances(name),
            Some(k) => match k.split_once(':') {
                Some(("events", ev)) if !ev.is_empty() => CostMeasure::events(name, ev),
                Some(("annotation", key)) if !key.is_empty() => CostMeasure::annotation(name, key),
                _ => return Err(Error::usage(format!("bad measure kind {k:?}"))),
            },
        };
        Ok(measure)
    }
}

/// Checks measure names are unique.
pub fn check_measures(measures: &[CostMeasure]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for m in measures {
        if !seen.insert(m.name.as_str()) {
            return Err(Error::usage(format!("measure {} listed twice", m.name)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub enum CostScope<'a> {
    Whole,
    Segment(&'a Segment),
    /// Every utterance tagged with at least one of the attributes; costs are
    /// attributed to those attributes only.
    Attributes(&'a BTreeSet<usize>),
}

struct Resolved {
    utterances: Vec<usize>,
    attributes: BTreeSet<usize>,
}

fn resolve_scope(
    schema: &AvmSchema,
    dialogue: &Dialogue,
    scope: CostScope<'_>,
) -> Result<Resolved> {
    let n = dialogue.utterances.len();
    match scope {
        CostScope::Whole => Ok(Resolved {
            utterances: (0..n).collect(),
            attributes: schema.all_attributes(),
        }),
        CostScope::Segment(seg) => {
            if normalize(&seg.dialogue) != normalize(&dialogue.id) || seg.span.end > n {
                return Err(Error::usage(format!(
                    "segment {} of dialogue {} does not belong to dialogue {}",
                    seg.id, seg.dialogue, dialogue.id
                )));
            }
            Ok(Resolved {
                utterances: seg.span.clone().collect(),
                attributes: seg.attributes.clone(),
            })
        }
        CostScope::Attributes(attrs) => {
            if let Some(&bad) = attrs.iter().find(|&&a| a >= schema.len()) {
                return Err(Error::usage(format!(
                    "attribute index {bad} outside the schema"
                )));
            }
            let tags = dialogue.tag_sets(schema)?;
            let utterances = (0..n).filter(|&i| !tags[i].is_disjoint(attrs)).collect();
            Ok(Resolved {
                utterances,
                attributes: attrs.clone(),
            })
        }
    }
}

/// Whole utterances in scope.
pub fn efficiency_cost(
    schema: &AvmSchema,
    dialogue: &Dialogue,
    scope: CostScope<'_>,
) -> Result<f64> {
    Ok(resolve_scope(schema, dialogue, scope)?.utterances.len() as f64)
}

/// Σ over utterances u in scope, over events e of `event_kind` on u, of
/// |targets(e) ∩ A(scope)| / |tags(u)|.
pub fn qualitative_cost(
    schema: &AvmSchema,
    dialogue: &Dialogue,
    event_kind: &str,
    scope: CostScope<'_>,
) -> Result<f64> {
    let scope = resolve_scope(schema, dialogue, scope)?;
    let wanted = normalize(event_kind);
    let mut total = 0.0;
    for &i in &scope.utterances {
        let u = &dialogue.utterances[i];
        let invalid =
            |e: String| Error::invalid(format!("dialogue {} utterance {i}: {e}", dialogue.id));
        let tags = u.tag_set(schema).map_err(invalid)?;
        if tags.is_empty() {
            return Err(invalid("utterance has no attribute tags".into()));
        }
        for ev in u.events.iter().filter(|e| normalize(&e.kind) == wanted) {
            let targets = attribute_set(schema, &ev.targets).map_err(invalid)?;
            let hits = targets.intersection(&scope.attributes).count();
            total += hits as f64 / tags.len() as f64;
        }
    }
    Ok(total)
}

pub fn annotation_cost(
    schema: &AvmSchema,
    dialogue: &Dialogue,
    key: &str,
    scope: CostScope<'_>,
) -> Result<f64> {
    let scope = resolve_scope(schema, dialogue, scope)?;
    Ok(scope
        .utterances
        .iter()
        .filter_map(|&i| dialogue.utterances[i].annotations.get(key))
        .sum())
}

pub fn measure_cost(
    schema: &AvmSchema,
    dialogue: &Dialogue,
    measure: &CostMeasure,
    scope: CostScope<'_>,
) -> Result<f64> {
    match &measure.kind {
        CostKind::Utterances => efficiency_cost(schema, dialogue, scope),
        CostKind::Events(kind) => qualitative_cost(schema, dialogue, kind, scope),
        CostKind::Annotation(key) => annotation_cost(schema, dialogue, key, scope),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostRow {
    pub dialogue: String,
    pub agent: String,
    pub user: String,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostTable {
    pub measures: Vec<String>,
    pub rows: Vec<CostRow>,
    pub warnings: Vec<String>,
}

impl CostTable {
    pub fn to_csv(&self, precise: bool) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![
            "dialogue".to_string(),
            "agent".to_string(),
            "user".to_string(),
        ];
        header.extend(self.measures.iter().cloned());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.dialogue.clone(), row.agent.clone(), row.user.clone()];
            rec.extend(
                self.measures
                    .iter()
                    .map(|m| crate::report::fmt_num(row.values[m], precise)),
            );
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Whole-dialogue value of every measure for every dialogue, corpus order.
/// An event kind that never occurs in the corpus yields zeros and a warning.
pub fn cost_table(corpus: &Corpus, measures: &[CostMeasure]) -> Result<CostTable> {
    check_measures(measures)?;
    let mut warnings = Vec::new();
    for m in measures {
        if let CostKind::Events(kind) = &m.kind {
            let wanted = normalize(kind);
            let seen = corpus
                .dialogues
                .iter()
                .flat_map(|d| &d.utterances)
                .flat_map(|u| &u.events)
                .any(|e| normalize(&e.kind) == wanted);
            if !seen {
                let msg = format!(
                    "measure {}: event kind {kind:?} never occurs in the corpus",
                    m.name
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }
    let rows = corpus
        .dialogues
        .iter()
        .map(|d| {
            let values = measures
                .iter()
                .map(|m| {
                    Ok((
                        m.name.clone(),
                        measure_cost(&corpus.schema, d, m, CostScope::Whole)?,
                    ))
                })
                .collect::<Result<_>>()?;
            Ok(CostRow {
                dialogue: d.id.clone(),
                agent: d.agent.clone(),
                user: d.user.clone(),
                values,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CostTable {
        measures: measures.iter().map(|m| m.name.clone()).collect(),
        rows,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::avm::{Speaker, Utterance};
    use crate::fixtures;
    use crate::segment::{derive_structure, segments_for_attributes};

    fn d1() -> (AvmSchema, Dialogue) {
        let c = fixtures::train_dialogues();
        (c.schema.clone(), c.dialogues[0].clone())
    }

    fn d2() -> (AvmSchema, Dialogue) {
        let c = fixtures::train_dialogues();
        (c.schema.clone(), c.dialogues[1].clone())
    }

    #[test]
    fn utterance_counts() {
        let (s, d) = d1();
        assert_eq!(efficiency_cost(&s, &d, CostScope::Whole).unwrap(), 23.0);
        let (s, d) = d2();
        assert_eq!(efficiency_cost(&s, &d, CostScope::Whole).unwrap(), 10.0);
    }

    #[test]
    fn s4_costs() {
        let (s, d) = d1();
        let root = derive_structure(&s, &d).unwrap();
        let ac: BTreeSet<usize> = [s.attribute_index("AC").unwrap()].into();
        let s4 = segments_for_attributes(&root, &ac)[0];
        assert_eq!(
            efficiency_cost(&s, &d, CostScope::Segment(s4)).unwrap(),
            2.0
        );
        assert_eq!(
            qualitative_cost(&s, &d, "repair", CostScope::Segment(s4)).unwrap(),
            2.0
        );
    }

    #[test]
    fn repair_counts_with_attribution() {
        let (s, d) = d1();
        assert_eq!(
            qualitative_cost(&s, &d, "repair", CostScope::Whole).unwrap(),
            10.0
        );
        let (s, d) = d2();
        assert_eq!(
            qualitative_cost(&s, &d, "repair", CostScope::Whole).unwrap(),
            0.5
        );
    }

    #[test]
    fn attribute_scopes_split_a_shared_utterance() {
        let (s, d) = d2();
        let dc: BTreeSet<usize> = [0].into();
        let dr: BTreeSet<usize> = [2].into();
        assert_eq!(
            qualitative_cost(&s, &d, "repair", CostScope::Attributes(&dc)).unwrap(),
            0.5
        );
        // U2's repair targets depart-city only
        assert_eq!(
            qualitative_cost(&s, &d, "repair", CostScope::Attributes(&dr)).unwrap(),
            0.0
        );
        // greeting (3) + U1 + B2 + U2 + B3 (2) + U3 mention depart-city
        assert_eq!(
            efficiency_cost(&s, &d, CostScope::Attributes(&dc)).unwrap(),
            9.0
        );
    }

    #[test]
    fn two_events_of_one_kind_on_one_utterance_are_summed() {
        let (s, mut d) = d2();
        d.utterances = vec![Utterance::new(Speaker::User, "x", &["DC", "AC"])
            .with_event("repair", &["DC"])
            .with_event("repair", &["DC", "AC"])];
        assert_eq!(
            qualitative_cost(&s, &d, "repair", CostScope::Whole).unwrap(),
            1.5
        );
    }

    #[test]
    fn unknown_event_kind_is_zero_with_warning() {
        let corpus = fixtures::train_dialogues();
        let table = cost_table(
            &corpus,
            &["utt".parse().unwrap(), "inappropriate".parse().unwrap()],
        )
        .unwrap();
        assert_eq!(table.rows[0].values["inappropriate"], 0.0);
        assert_eq!(table.warnings.len(), 1);
        assert!(table.warnings[0].contains("inappropriate"));
    }

    #[test]
    fn foreign_segment_is_a_usage_error() {
        let corpus = fixtures::train_dialogues();
        let root = derive_structure(&corpus.schema, &corpus.dialogues[0]).unwrap();
        let err = efficiency_cost(
            &corpus.schema,
            &corpus.dialogues[1],
            CostScope::Segment(&root.children[0]),
        )
        .unwrap_err();
        assert!(err.is_usage());
    }

    #[test]
    fn annotations_sum_over_scope() {
        let (s, mut d) = d1();
        for (i, u) in d.utterances.iter_mut().enumerate() {
            u.annotations.insert("secs".into(), i as f64 * 0.5);
        }
        let m: CostMeasure = "time=annotation:secs".parse().unwrap();
        // 0.5 * (0 + 1 + ... + 22)
        assert_eq!(measure_cost(&s, &d, &m, CostScope::Whole).unwrap(), 126.5);
    }

    #[test]
    fn measure_spec_parsing() {
        assert_eq!(
            "utt".parse::<CostMeasure>().unwrap(),
            CostMeasure::utterances("utt")
        );
        assert_eq!(
            "rep".parse::<CostMeasure>().unwrap(),
            CostMeasure::events("rep", "repair")
        );
        assert_eq!(
            "c=events:inappropriate".parse::<CostMeasure>().unwrap(),
            CostMeasure::events("c", "inappropriate")
        );
        assert!("c=bogus".parse::<CostMeasure>().is_err());
        assert!("=utterances".parse::<CostMeasure>().is_err());
        assert!(
            check_measures(&[CostMeasure::utterances("a"), CostMeasure::events("a", "x")]).is_err()
        );
    }

    #[test]
    fn whole_count_is_root_children_plus_root_own() {
        let (s, d) = d1();
        let root = derive_structure(&s, &d).unwrap();
        let kids: f64 = root
            .children
            .iter()
            .map(|c| efficiency_cost(&s, &d, CostScope::Segment(c)).unwrap())
            .sum();
        assert_eq!(
            kids + root.own_utterances().len() as f64,
            efficiency_cost(&s, &d, CostScope::Whole).unwrap()
        );
    }
}
