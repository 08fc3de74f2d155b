//! Task-defined discourse structure derived from AVM attribute tags.
//!
//! Scanning a parent span left to right, an utterance whose tag set equals the
//! parent's attribute set stays with the parent. An utterance whose tag set is
//! a strict subset opens a child segment, which extends over the following
//! utterances as long as their tag sets are subsets of the child's set. Each
//! child is segmented the same way until every utterance in a span carries
//! exactly the span's attribute set.

use std::collections::BTreeSet;
use std::ops::Range;

use serde::Serialize;

use crate::avm::{AvmSchema, Dialogue};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub id: String,
    /// Id of the dialogue the segment was derived from.
    pub dialogue: String,
    /// Attribute indices in schema order.
    pub attributes: BTreeSet<usize>,
    /// Utterance indices.
    pub span: Range<usize>,
    pub children: Vec<Segment>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.span.len()
    }

    pub fn is_empty(&self) -> bool {
        self.span.is_empty()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(Segment::depth).max().unwrap_or(0)
    }

    /// Pre-order traversal; siblings are disjoint so this is also span order.
    pub fn iter(&self) -> impl Iterator<Item = &Segment> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let next = stack.pop()?;
            stack.extend(next.children.iter().rev());
            Some(next)
        })
    }

    /// Utterance indices held by this segment itself, outside every child.
    pub fn own_utterances(&self) -> Vec<usize> {
        self.span
            .clone()
            .filter(|i| !self.children.iter().any(|c| c.span.contains(i)))
            .collect()
    }

    /// Abbreviations of the segment's attributes, in schema order.
    pub fn attribute_names(&self, schema: &AvmSchema) -> Vec<String> {
        self.attributes
            .iter()
            .map(|&a| schema.attribute(a).abbrev.clone())
            .collect()
    }

    /// Indented one-line-per-segment rendering.
    pub fn render(&self, schema: &AvmSchema) -> String {
        let mut out = String::new();
        self.render_into(schema, 0, &mut out);
        out
    }

    fn render_into(&self, schema: &AvmSchema, level: usize, out: &mut String) {
        let span = if self.span.is_empty() {
            "empty".to_string()
        } else {
            format!("utterances {}..={}", self.span.start, self.span.end - 1)
        };
        out.push_str(&format!(
            "{}{} {{{}}} {}\n",
            "  ".repeat(level),
            self.id,
            self.attribute_names(schema).join(","),
            span
        ));
        for c in &self.children {
            c.render_into(schema, level + 1, out);
        }
    }
}

/// Builds the segment tree of a dialogue. The root covers every utterance and
/// all schema attributes.
pub fn derive_structure(schema: &AvmSchema, dialogue: &Dialogue) -> Result<Segment> {
    let tags = dialogue.tag_sets(schema)?;
    let mut next_id = 1;
    Ok(build(
        &tags,
        0..tags.len(),
        schema.all_attributes(),
        &dialogue.id,
        &mut next_id,
    ))
}

fn build(
    tags: &[BTreeSet<usize>],
    span: Range<usize>,
    attributes: BTreeSet<usize>,
    dialogue: &str,
    next_id: &mut usize,
) -> Segment {
    let id = format!("S{next_id}");
    *next_id += 1;
    let mut children = Vec::new();
    let mut i = span.start;
    while i < span.end {
        let opening = &tags[i];
        if !(opening.is_subset(&attributes) && opening.len() < attributes.len()) {
            i += 1;
            continue;
        }
        let mut end = i + 1;
        while end < span.end && tags[end].is_subset(opening) {
            end += 1;
        }
        children.push(build(tags, i..end, opening.clone(), dialogue, next_id));
        i = end;
    }
    Segment {
        id,
        dialogue: dialogue.to_string(),
        attributes,
        span,
        children,
    }
}

/// All segments whose attribute set equals `attributes`, in span order.
pub fn segments_for_attributes<'a>(
    root: &'a Segment,
    attributes: &BTreeSet<usize>,
) -> Vec<&'a Segment> {
    root.iter()
        .filter(|s| &s.attributes == attributes)
        .collect()
}
