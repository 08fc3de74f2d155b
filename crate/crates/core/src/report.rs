//! Number formatting and plain-text report assembly.

use std::fmt::Write;

use serde_json::Value;

/// Three decimals, halves rounded away from zero; full precision when `precise`.
pub fn fmt_num(x: f64, precise: bool) -> String {
    if precise || !x.is_finite() {
        return format!("{x}");
    }
    let r = round3(x);
    if r == 0.0 {
        "0.000".into()
    } else {
        format!("{r:.3}")
    }
}

pub fn round3(x: f64) -> f64 {
    let r = (x * 1000.0).round() / 1000.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Rounds every float in a JSON document (integers are left alone).
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round3(x)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Text report with titled sections of aligned `key: value` lines.
#[derive(Debug, Default, Clone)]
pub struct Report {
    out: String,
    pub precise: bool,
}

impl Report {
    pub fn new(precise: bool) -> Self {
        Report {
            out: String::new(),
            precise,
        }
    }

    pub fn section(&mut self, title: &str) -> &mut Self {
        if !self.out.is_empty() {
            self.out.push('\n');
        }
        let _ = writeln!(self.out, "== {title} ==");
        self
    }

    pub fn line(&mut self, text: impl AsRef<str>) -> &mut Self {
        self.out.push_str(text.as_ref());
        self.out.push('\n');
        self
    }

    pub fn kv(&mut self, key: &str, value: impl AsRef<str>) -> &mut Self {
        let _ = writeln!(self.out, "{key}: {}", value.as_ref());
        self
    }

    pub fn num(&mut self, key: &str, x: f64) -> &mut Self {
        let v = fmt_num(x, self.precise);
        self.kv(key, v)
    }

    pub fn n(&self, x: f64) -> String {
        fmt_num(x, self.precise)
    }

    pub fn block(&mut self, text: &str) -> &mut Self {
        self.out.push_str(text);
        if !text.ends_with('\n') {
            self.out.push('\n');
        }
        self
    }

    pub fn finish(self) -> String {
        self.out
    }
}

/// Left-aligned columns separated by two spaces, no trailing blanks.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let head: Vec<String> = header.iter().map(|h| h.to_string()).collect();
    for r in std::iter::once(&head).chain(rows) {
        let mut line = String::new();
        for (i, cell) in r.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(cell);
            if i + 1 < r.len() {
                line.extend(std::iter::repeat(' ').take(widths[i] - cell.chars().count()));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(fmt_num(0.77729, false), "0.777");
        assert_eq!(fmt_num(0.5547, false), "0.555");
        assert_eq!(fmt_num(-0.2755, false), "-0.276");
        assert_eq!(fmt_num(23.0, false), "23.000");
        assert_eq!(fmt_num(-0.0001, false), "0.000");
        assert_eq!(fmt_num(0.1, true), "0.1");
    }

    #[test]
    fn aligned_table() {
        let t = table(
            &["a", "long"],
            &[
                vec!["xyz".into(), "1".into()],
                vec!["q".into(), "22".into()],
            ],
        );
        assert_eq!(t, "a    long\nxyz  1\nq    22\n");
    }

    #[test]
    fn json_rounding_keeps_integers() {
        let mut v = serde_json::json!({"a": 0.123456, "b": [1, 2.00049], "c": 7});
        round_json(&mut v);
        assert_eq!(v, serde_json::json!({"a": 0.123, "b": [1, 2.0], "c": 7}));
    }
}
