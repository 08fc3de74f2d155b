//! Reading and writing corpus and measurement files.

use std::fs;
use std::path::Path;

use crate::avm::Corpus;
use crate::error::{Error, Result};
use crate::performance::{NormalizationPool, PerformanceFunction, Unit, UnitTable};

/// Contents of an input file: an annotated corpus or a table of measured units.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Corpus(Corpus),
    Units(Vec<Unit>),
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::usage(format!("cannot read {}: {e}", path.display())))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

pub fn parse_input(text: &str) -> Result<Input> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    // pick the document type by its top-level keys so errors are specific
    let is_units = value.as_object().is_some_and(|o| o.contains_key("units"));
    Ok(if is_units {
        Input::Units(serde_json::from_value::<UnitTable>(value)?.units)
    } else {
        Input::Corpus(serde_json::from_value(value)?)
    })
}

/// Reads one file, attaching the path to any error.
pub fn load_input(path: &Path) -> Result<Input> {
    let text = read(path)?;
    parse_input(&text).map_err(|e| match e {
        Error::Json(j) => Error::invalid(format!("{}: {j}", path.display())),
        other => other,
    })
}

/// Reads and merges several files of the same kind.
pub fn load_inputs<P: AsRef<Path>>(paths: &[P]) -> Result<Input> {
    let mut iter = paths.iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::usage("no input file given"))?;
    let mut acc = load_input(first.as_ref())?;
    for p in iter {
        acc = match (acc, load_input(p.as_ref())?) {
            (Input::Corpus(a), Input::Corpus(b)) => Input::Corpus(a.merge(b)?),
            (Input::Units(mut a), Input::Units(b)) => {
                a.extend(b);
                Input::Units(a)
            }
            _ => return Err(Error::usage("cannot mix corpus files and unit tables")),
        };
    }
    Ok(acc)
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    parse(path, &read(path)?)
}

pub fn load_function(path: &Path) -> Result<PerformanceFunction> {
    let pf: PerformanceFunction = parse(path, &read(path)?)?;
    pf.check()?;
    Ok(pf)
}

pub fn load_pool(path: &Path) -> Result<NormalizationPool> {
    parse(path, &read(path)?)
}

pub fn corpus_to_json(corpus: &Corpus) -> Result<String> {
    let mut s = serde_json::to_string_pretty(corpus)?;
    s.push('\n');
    Ok(s)
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    fs::write(path, corpus_to_json(corpus)?)?;
    Ok(())
}
