//! Attribute-value matrix task representation: schema, scenario keys,
//! tagged dialogues and corpora.
//!
//! Value labels are local to their attribute (both city attributes of the
//! train domain carry "Milano"). A label is globally identified by its
//! attribute and value, written `ABBREV:value` when it has to be
//! distinguished, e.g. `AC:Milano`. In an observed AVM a bare value is looked
//! up in the attribute's own domain first; failing that it must be the
//! qualified form or occur in exactly one other attribute's domain, which is
//! how cross-attribute confusions are recorded.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Reserved observed value for an attribute whose value was never conveyed.
pub const UNRESOLVED: &str = "⊥-unresolved";

/// NFC-normalizes and trims a label or identifier for comparison.
pub fn normalize(s: &str) -> String {
    s.trim().nfc().collect()
}

fn same(a: &str, b: &str) -> bool {
    a == b || normalize(a) == normalize(b)
}

/// Who acquires the attribute's value. Stored, never used in computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfoFlow {
    ToAgent,
    ToUser,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeDef {
    pub name: String,
    pub abbrev: String,
    pub values: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<InfoFlow>,
}

impl AttributeDef {
    pub fn new<S: Into<String>>(name: S, abbrev: S, values: impl IntoIterator<Item = S>) -> Self {
        AttributeDef {
            name: name.into(),
            abbrev: abbrev.into(),
            values: values.into_iter().map(Into::into).collect(),
            flow: None,
        }
    }

    pub fn with_flow(mut self, flow: InfoFlow) -> Self {
        self.flow = Some(flow);
        self
    }

    fn answers_to(&self, ident: &str) -> bool {
        same(&self.name, ident) || same(&self.abbrev, ident)
    }
}

/// A value of some attribute in the schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label {
    pub attribute: usize,
    pub value: usize,
}

/// What a dialogue ended up with for one attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observed {
    Value(Label),
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvmSchema {
    pub attributes: Vec<AttributeDef>,
}

impl AvmSchema {
    /// Builds a schema, rejecting it if any invariant is violated.
    pub fn new(attributes: Vec<AttributeDef>) -> Result<Self> {
        let schema = AvmSchema { attributes };
        match schema.violations().first() {
            None => Ok(schema),
            Some(v) => Err(Error::invalid(v.clone())),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.attributes.is_empty() {
            out.push("schema has no attributes".to_string());
        }
        let mut idents: BTreeMap<String, usize> = BTreeMap::new();
        for (i, attr) in self.attributes.iter().enumerate() {
            for ident in [&attr.name, &attr.abbrev] {
                let key = normalize(ident);
                if key.is_empty() {
                    out.push(format!("attribute #{i} has an empty name or abbreviation"));
                    continue;
                }
                if key.contains(':') {
                    out.push(format!("attribute identifier {key:?} must not contain ':'"));
                }
                match idents.get(&key) {
                    // name == abbrev on the same attribute is harmless
                    Some(&j) if j == i => {}
                    Some(_) => out.push(format!("attribute identifier {key:?} is not unique")),
                    None => {
                        idents.insert(key, i);
                    }
                }
            }
            if attr.values.is_empty() {
                out.push(format!("attribute {} has no values", attr.name));
            }
            let mut seen = BTreeSet::new();
            for v in &attr.values {
                let key = normalize(v);
                if key.is_empty() {
                    out.push(format!("attribute {} has an empty value label", attr.name));
                } else if key == UNRESOLVED {
                    out.push(format!(
                        "attribute {} uses the reserved label {UNRESOLVED}",
                        attr.name
                    ));
                } else if !seen.insert(key.clone()) {
                    out.push(format!("attribute {} repeats value {key:?}", attr.name));
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attribute(&self, index: usize) -> &AttributeDef {
        &self.attributes[index]
    }

    /// Finds an attribute by full name or abbreviation.
    pub fn attribute_index(&self, ident: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.answers_to(ident))
    }

    pub fn require_attribute(&self, ident: &str) -> Result<usize> {
        self.attribute_index(ident)
            .ok_or_else(|| Error::usage(format!("unknown attribute {ident:?}")))
    }

    pub fn all_attributes(&self) -> BTreeSet<usize> {
        (0..self.len()).collect()
    }

    /// Total number of value labels across all attributes.
    pub fn label_count(&self) -> usize {
        self.attributes.iter().map(|a| a.values.len()).sum()
    }

    /// Index range of an attribute's labels in the global (schema-ordered) label list.
    pub fn block(&self, attribute: usize) -> Range<usize> {
        let start: usize = self.attributes[..attribute]
            .iter()
            .map(|a| a.values.len())
            .sum();
        start..start + self.attributes[attribute].values.len()
    }

    pub fn label_index(&self, label: Label) -> usize {
        self.block(label.attribute).start + label.value
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.attributes
            .iter()
            .enumerate()
            .flat_map(|(attribute, a)| {
                (0..a.values.len()).map(move |value| Label { attribute, value })
            })
    }

    /// `ABBREV:value`, unique across the schema.
    pub fn label_name(&self, label: Label) -> String {
        let attr = &self.attributes[label.attribute];
        format!("{}:{}", attr.abbrev, attr.values[label.value])
    }

    fn value_in(&self, attribute: usize, text: &str) -> Option<Label> {
        self.attributes[attribute]
            .values
            .iter()
            .position(|v| same(v, text))
            .map(|value| Label { attribute, value })
    }

    /// Resolves a value that must come from `attribute`'s own domain (scenario keys).
    pub fn resolve_key_value(&self, attribute: usize, text: &str) -> Result<Label, String> {
        if let Some(label) = self.value_in(attribute, text) {
            return Ok(label);
        }
        match self.resolve_qualified(text) {
            Some(label) if label.attribute == attribute => Ok(label),
            _ => Err(format!(
                "{text:?} is not a value of {}",
                self.attributes[attribute].name
            )),
        }
    }

    /// Resolves an observed value for `attribute`. Values of other attributes are
    /// legal (cross-attribute confusion).
    pub fn resolve_observed(&self, attribute: usize, text: &str) -> Result<Observed, String> {
        if same(text, UNRESOLVED) {
            return Ok(Observed::Unresolved);
        }
        if let Some(label) = self.value_in(attribute, text) {
            return Ok(Observed::Value(label));
        }
        if let Some(label) = self.resolve_qualified(text) {
            return Ok(Observed::Value(label));
        }
        let hits: Vec<Label> = (0..self.len())
            .filter_map(|a| self.value_in(a, text))
            .collect();
        match hits.as_slice() {
            [label] => Ok(Observed::Value(*label)),
            [] => Err(format!("{text:?} is not a value of any attribute")),
            _ => Err(format!(
                "{text:?} is ambiguous across attributes; qualify it as ABBREV:value"
            )),
        }
    }

    fn resolve_qualified(&self, text: &str) -> Option<Label> {
        let (prefix, value) = text.split_once(':')?;
        let attribute = self.attribute_index(prefix)?;
        self.value_in(attribute, value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioKey {
    pub id: String,
    /// attribute (name or abbreviation) → value
    #[serde(rename = "key")]
    pub assignments: BTreeMap<String, String>,
}

impl ScenarioKey {
    /// Key labels in schema attribute order.
    pub fn resolve(&self, schema: &AvmSchema) -> Result<Vec<Label>> {
        let by_attr = resolve_assignments(schema, &self.assignments)
            .map_err(|e| Error::invalid(format!("scenario {}: {e}", self.id)))?;
        by_attr
            .into_iter()
            .enumerate()
            .map(|(attr, text)| {
                schema
                    .resolve_key_value(attr, text)
                    .map_err(|e| Error::invalid(format!("scenario {}: {e}", self.id)))
            })
            .collect()
    }
}

/// Maps an attribute-keyed map onto schema order, requiring totality.
fn resolve_assignments<'a>(
    schema: &AvmSchema,
    map: &'a BTreeMap<String, String>,
) -> Result<Vec<&'a str>, String> {
    let mut slots: Vec<Option<&str>> = vec![None; schema.len()];
    for (ident, value) in map {
        let attr = schema
            .attribute_index(ident)
            .ok_or_else(|| format!("unknown attribute {ident:?}"))?;
        if slots[attr].replace(value.as_str()).is_some() {
            return Err(format!(
                "attribute {} assigned twice",
                schema.attribute(attr).name
            ));
        }
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| format!("no value for {}", schema.attribute(i).name)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Agent,
    User,
}

/// A qualitative event (repair, inappropriate utterance, ...) on an utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualEvent {
    pub kind: String,
    pub targets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Utterance {
    pub speaker: Speaker,
    pub text: String,
    pub tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<QualEvent>,
    /// Precomputed scalar measures (e.g. elapsed seconds) summed by annotation costs.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub annotations: BTreeMap<String, f64>,
}

impl Utterance {
    pub fn new(speaker: Speaker, text: impl Into<String>, tags: &[&str]) -> Self {
        Utterance {
            speaker,
            text: text.into(),
            tags: tags.iter().map(|t| t.to_string()).collect(),
            events: Vec::new(),
            annotations: BTreeMap::new(),
        }
    }

    pub fn with_event(mut self, kind: &str, targets: &[&str]) -> Self {
        self.events.push(QualEvent {
            kind: kind.to_string(),
            targets: targets.iter().map(|t| t.to_string()).collect(),
        });
        self
    }

    pub fn tag_set(&self, schema: &AvmSchema) -> Result<BTreeSet<usize>, String> {
        attribute_set(schema, &self.tags)
    }
}

pub(crate) fn attribute_set(
    schema: &AvmSchema,
    idents: &[String],
) -> Result<BTreeSet<usize>, String> {
    idents
        .iter()
        .map(|t| {
            schema
                .attribute_index(t)
                .ok_or_else(|| format!("unknown attribute {t:?}"))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dialogue {
    pub id: String,
    pub agent: String,
    pub user: String,
    pub scenario: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub satisfaction: Option<f64>,
    pub observed: BTreeMap<String, String>,
    #[serde(default)]
    pub utterances: Vec<Utterance>,
}

impl Dialogue {
    /// Observed AVM in schema attribute order.
    pub fn resolve_observed(&self, schema: &AvmSchema) -> Result<Vec<Observed>> {
        let texts = resolve_assignments(schema, &self.observed)
            .map_err(|e| Error::invalid(format!("dialogue {}: {e}", self.id)))?;
        texts
            .into_iter()
            .enumerate()
            .map(|(attr, text)| {
                schema
                    .resolve_observed(attr, text)
                    .map_err(|e| Error::invalid(format!("dialogue {}: {e}", self.id)))
            })
            .collect()
    }

    /// Tag sets of every utterance, in order.
    pub fn tag_sets(&self, schema: &AvmSchema) -> Result<Vec<BTreeSet<usize>>> {
        self.utterances
            .iter()
            .enumerate()
            .map(|(i, u)| {
                u.tag_set(schema)
                    .map_err(|e| Error::invalid(format!("dialogue {} utterance {i}: {e}", self.id)))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corpus {
    pub schema: AvmSchema,
    #[serde(default)]
    pub scenarios: Vec<ScenarioKey>,
    #[serde(default)]
    pub dialogues: Vec<Dialogue>,
}

impl Corpus {
    pub fn key(&self, scenario: &str) -> Option<&ScenarioKey> {
        self.scenarios.iter().find(|k| same(&k.id, scenario))
    }

    pub fn dialogue(&self, id: &str) -> Option<&Dialogue> {
        self.dialogues.iter().find(|d| same(&d.id, id))
    }

    pub fn key_for(&self, dialogue: &Dialogue) -> Result<&ScenarioKey> {
        self.key(&dialogue.scenario).ok_or_else(|| {
            Error::invalid(format!(
                "dialogue {}: unknown scenario {:?}",
                dialogue.id, dialogue.scenario
            ))
        })
    }

    /// Agents in order of first appearance.
    pub fn agents(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for d in &self.dialogues {
            if !out.contains(&d.agent) {
                out.push(d.agent.clone());
            }
        }
        out
    }

    /// Combines two corpora over the same schema. Shared scenario ids must carry
    /// identical keys; dialogue ids must stay unique.
    pub fn merge(mut self, other: Corpus) -> Result<Corpus> {
        if self.schema != other.schema {
            return Err(Error::usage("cannot merge corpora with different schemas"));
        }
        for key in other.scenarios {
            match self.key(&key.id) {
                Some(existing) if *existing != key => {
                    return Err(Error::usage(format!(
                        "scenario {} has different keys in the merged corpora",
                        key.id
                    )))
                }
                Some(_) => {}
                None => self.scenarios.push(key),
            }
        }
        for d in other.dialogues {
            if self.dialogue(&d.id).is_some() {
                return Err(Error::usage(format!("duplicate dialogue id {}", d.id)));
            }
            self.dialogues.push(d);
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dialogue: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub utterance: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(s) = &self.scenario {
            write!(f, "scenario {s}: ")?;
        }
        if let Some(d) = &self.dialogue {
            write!(f, "dialogue {d}")?;
            match self.utterance {
                Some(u) => write!(f, " utterance {u}: ")?,
                None => write!(f, ": ")?,
            }
        }
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(
        &mut self,
        scenario: Option<&str>,
        dialogue: Option<&str>,
        utterance: Option<usize>,
        message: String,
    ) {
        self.violations.push(Violation {
            scenario: scenario.map(str::to_string),
            dialogue: dialogue.map(str::to_string),
            utterance,
            message,
        });
    }
}

/// Checks every corpus invariant; violations are returned as data.
pub fn validate_corpus(corpus: &Corpus) -> ValidationReport {
    let mut report = ValidationReport::default();
    let schema_problems = corpus.schema.violations();
    let schema_ok = schema_problems.is_empty();
    for msg in schema_problems {
        report.push(None, None, None, format!("schema: {msg}"));
    }
    if !schema_ok {
        return report;
    }
    let schema = &corpus.schema;

    let mut key_ids = BTreeSet::new();
    for key in &corpus.scenarios {
        if !key_ids.insert(normalize(&key.id)) {
            report.push(
                Some(&key.id),
                None,
                None,
                "duplicate scenario id".to_string(),
            );
        }
        match resolve_assignments(schema, &key.assignments) {
            Err(e) => report.push(Some(&key.id), None, None, e),
            Ok(texts) => {
                for (attr, text) in texts.into_iter().enumerate() {
                    if let Err(e) = schema.resolve_key_value(attr, text) {
                        report.push(Some(&key.id), None, None, e);
                    }
                }
            }
        }
    }

    let mut dialogue_ids = BTreeSet::new();
    for d in &corpus.dialogues {
        let id = Some(d.id.as_str());
        if !dialogue_ids.insert(normalize(&d.id)) {
            report.push(None, id, None, "duplicate dialogue id".to_string());
        }
        if corpus.key(&d.scenario).is_none() {
            report.push(None, id, None, format!("unknown scenario {:?}", d.scenario));
        }
        if let Some(s) = d.satisfaction {
            if !s.is_finite() {
                report.push(None, id, None, "satisfaction is not finite".to_string());
            }
        }
        match resolve_assignments(schema, &d.observed) {
            Err(e) => report.push(None, id, None, format!("observed: {e}")),
            Ok(texts) => {
                for (attr, text) in texts.into_iter().enumerate() {
                    if let Err(e) = schema.resolve_observed(attr, text) {
                        report.push(
                            None,
                            id,
                            None,
                            format!("observed {}: {e}", schema.attribute(attr).name),
                        );
                    }
                }
            }
        }
        for (i, u) in d.utterances.iter().enumerate() {
            if u.tags.is_empty() {
                report.push(
                    None,
                    id,
                    Some(i),
                    "utterance has no attribute tags".to_string(),
                );
            }
            if let Err(e) = u.tag_set(schema) {
                report.push(None, id, Some(i), format!("tag: {e}"));
            }
            for ev in &u.events {
                if normalize(&ev.kind).is_empty() {
                    report.push(None, id, Some(i), "event with empty kind".to_string());
                }
                if ev.targets.is_empty() {
                    report.push(
                        None,
                        id,
                        Some(i),
                        format!("{} event has no targets", ev.kind),
                    );
                }
                if let Err(e) = attribute_set(schema, &ev.targets) {
                    report.push(None, id, Some(i), format!("{} event target: {e}", ev.kind));
                }
            }
            for (name, v) in &u.annotations {
                if !v.is_finite() {
                    report.push(
                        None,
                        id,
                        Some(i),
                        format!("annotation {name} is not finite"),
                    );
                }
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeMatch {
    pub attribute: usize,
    pub key: Label,
    pub observed: Observed,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchVector {
    pub entries: Vec<AttributeMatch>,
}

impl MatchVector {
    pub fn all_match(&self) -> bool {
        self.entries.iter().all(|e| e.matched)
    }

    pub fn mismatches(&self) -> impl Iterator<Item = &AttributeMatch> {
        self.entries.iter().filter(|e| !e.matched)
    }
}

/// Compares a dialogue's observed AVM to its scenario key, attribute by attribute.
pub fn compare_to_key(
    schema: &AvmSchema,
    dialogue: &Dialogue,
    key: &ScenarioKey,
) -> Result<MatchVector> {
    if !same(&dialogue.scenario, &key.id) {
        return Err(Error::usage(format!(
            "dialogue {} runs scenario {:?}, not {:?}",
            dialogue.id, dialogue.scenario, key.id
        )));
    }
    let keys = key.resolve(schema)?;
    let observed = dialogue.resolve_observed(schema)?;
    let entries = keys
        .into_iter()
        .zip(observed)
        .enumerate()
        .map(|(attribute, (key, observed))| AttributeMatch {
            attribute,
            key,
            observed,
            matched: observed == Observed::Value(key),
        })
        .collect();
    Ok(MatchVector { entries })
}
