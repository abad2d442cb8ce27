//! Complex file formats.
//!
//! Text format, one simplex per line, grouped under `order k` headers:
//!
//! ```text
//! # comment
//! order 0
//! a
//! b
//! order 1
//! a b
//! ```
//!
//! Feature sidecars are CSV files with header `simplex,f0,f1,...` where
//! `simplex` is the vertex labels joined by `-`. The JSON variant is
//! `{"orders": [{"order": 0, "simplices": [["a"], ["b"]], "features": [[..], ..]}]}`
//! with `features` optional and aligned with `simplices`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{build_complex, ComplexError, SimplexId, SimplicialComplex};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error("{0}: no simplices")]
    Empty(String),
}

pub(crate) fn read_to_string(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Parses the `order k` text format into per-order label tuples.
pub fn parse_complex_text(text: &str, path: &Path) -> Result<Vec<Vec<Vec<String>>>, FormatError> {
    let mut sets: Vec<Vec<Vec<String>>> = Vec::new();
    let mut current: Option<usize> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut words = line.split_whitespace();
        let first = words.next().unwrap_or_default();
        if first == "order" {
            let k: usize = words
                .next()
                .and_then(|w| w.parse().ok())
                .ok_or_else(|| parse_error(path, n + 1, "expected `order <k>`"))?;
            if words.next().is_some() {
                return Err(parse_error(path, n + 1, "trailing tokens after order header"));
            }
            if sets.len() <= k {
                sets.resize(k + 1, Vec::new());
            }
            current = Some(k);
            continue;
        }
        let k = current.ok_or_else(|| parse_error(path, n + 1, "simplex before any `order` header"))?;
        let tuple: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
        if tuple.len() != k + 1 {
            return Err(parse_error(
                path,
                n + 1,
                format!("order {k} simplex needs {} vertices, found {}", k + 1, tuple.len()),
            ));
        }
        sets[k].push(tuple);
    }
    if sets.iter().all(Vec::is_empty) {
        return Err(FormatError::Empty(path.display().to_string()));
    }
    Ok(sets)
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonComplex {
    orders: Vec<JsonOrder>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonOrder {
    order: usize,
    simplices: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Vec<Vec<f64>>>,
}

/// Loads a complex in either the text or the JSON format (chosen by a
/// `.json` extension).
pub fn load_complex(path: &Path, auto_close: bool) -> Result<SimplicialComplex, FormatError> {
    let text = read_to_string(path)?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let parsed: JsonComplex = serde_json::from_str(&text).map_err(|source| FormatError::Json {
            path: path.display().to_string(),
            source,
        })?;
        let top = parsed.orders.iter().map(|o| o.order).max().ok_or_else(|| FormatError::Empty(path.display().to_string()))?;
        let mut sets = vec![Vec::new(); top + 1];
        let mut feats: Vec<Option<Array2<f64>>> = vec![None; top + 1];
        for o in parsed.orders {
            if let Some(rows) = o.features {
                let width = rows.first().map_or(0, Vec::len);
                if rows.len() != o.simplices.len() || rows.iter().any(|r| r.len() != width) {
                    return Err(ComplexError::FeatureShapeMismatch {
                        order: o.order,
                        rows: rows.len(),
                        expected: o.simplices.len(),
                    }
                    .into());
                }
                feats[o.order] = Some(Array2::from_shape_vec((rows.len(), width), rows.concat()).expect("checked shape"));
            }
            sets[o.order].extend(o.simplices);
        }
        if sets.iter().all(Vec::is_empty) {
            return Err(FormatError::Empty(path.display().to_string()));
        }
        return Ok(build_complex(&sets, feats, auto_close)?);
    }
    let sets = parse_complex_text(&text, path)?;
    Ok(build_complex(&sets, vec![], auto_close)?)
}

/// Writes the text format. Simplices are listed in index order so that a
/// reload reproduces the same ids.
pub fn write_complex_text(c: &SimplicialComplex) -> String {
    let mut out = String::new();
    for k in 0..=c.max_order() {
        out.push_str(&format!("order {k}\n"));
        for i in 0..c.count(k) {
            out.push_str(&c.labels_of(SimplexId::new(k, i)).join(" "));
            out.push('\n');
        }
    }
    out
}

pub fn write_complex_json(c: &SimplicialComplex) -> String {
    let orders = (0..=c.max_order())
        .map(|k| {
            let feats = c.features(k).filter(|f| f.ncols() > 0).map(|f| f.rows().into_iter().map(|r| r.to_vec()).collect());
            JsonOrder {
                order: k,
                simplices: (0..c.count(k))
                    .map(|i| c.labels_of(SimplexId::new(k, i)).into_iter().map(str::to_owned).collect())
                    .collect(),
                features: feats,
            }
        })
        .collect();
    serde_json::to_string_pretty(&JsonComplex { orders }).expect("serializable")
}

/// Reads a `simplex,f0,f1,...` sidecar for one order into an `n_k x d` matrix.
/// Every simplex of the order must appear exactly once; unknown simplices and
/// undeclared columns are rejected.
pub fn load_feature_csv(c: &SimplicialComplex, order: usize, path: &Path) -> Result<Array2<f64>, FormatError> {
    let text = read_to_string(path)?;
    let table = parse_keyed_csv(&text, path, "f")?;
    keyed_rows_to_matrix(c, order, &table, path)
}

pub(crate) struct KeyedCsv {
    pub width: usize,
    pub rows: Vec<(usize, String, Vec<f64>)>,
}

/// Parses CSV whose header is `simplex,<prefix>0,<prefix>1,...` (or a single
/// `simplex,<prefix>` column when `prefix` is a full column name).
pub(crate) fn parse_keyed_csv(text: &str, path: &Path, prefix: &str) -> Result<KeyedCsv, FormatError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| FormatError::Empty(path.display().to_string()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"simplex") {
        return Err(parse_error(path, 1, "header must start with `simplex`"));
    }
    let width = cols.len() - 1;
    for (j, name) in cols.iter().skip(1).enumerate() {
        let expected = format!("{prefix}{j}");
        if *name != expected && !(width == 1 && *name == prefix) {
            return Err(parse_error(path, 1, format!("undeclared column `{name}`, expected `{expected}`")));
        }
    }
    let mut rows = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != width + 1 {
            return Err(parse_error(path, n + 1, format!("expected {} fields, found {}", width + 1, fields.len())));
        }
        let values = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| parse_error(path, n + 1, format!("not a number: `{f}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((n + 1, fields[0].to_owned(), values));
    }
    Ok(KeyedCsv { width, rows })
}

pub(crate) fn keyed_rows_to_matrix(
    c: &SimplicialComplex,
    order: usize,
    table: &KeyedCsv,
    path: &Path,
) -> Result<Array2<f64>, FormatError> {
    let index = key_index(c, order);
    let n = c.count(order);
    let mut out = Array2::zeros((n, table.width));
    let mut seen = vec![false; n];
    for (line, key, values) in &table.rows {
        let i = *index
            .get(&canonical_key(key))
            .ok_or_else(|| parse_error(path, *line, format!("unknown {order}-simplex `{key}`")))?;
        if std::mem::replace(&mut seen[i], true) {
            return Err(parse_error(path, *line, format!("duplicate row for `{key}`")));
        }
        for (j, v) in values.iter().enumerate() {
            out[[i, j]] = *v;
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(parse_error(
            path,
            table.rows.len() + 1,
            format!("missing row for {order}-simplex `{}`", c.simplex_key(SimplexId::new(order, i))),
        ));
    }
    Ok(out)
}

fn canonical_key(key: &str) -> Vec<String> {
    let mut parts: Vec<String> = key.split('-').map(|p| p.trim().to_owned()).collect();
    parts.sort();
    parts
}

fn key_index(c: &SimplicialComplex, order: usize) -> HashMap<Vec<String>, usize> {
    (0..c.count(order))
        .map(|i| {
            let mut labels: Vec<String> = c.labels_of(SimplexId::new(order, i)).into_iter().map(str::to_owned).collect();
            labels.sort();
            (labels, i)
        })
        .collect()
}

pub fn write_feature_csv(c: &SimplicialComplex, order: usize, features: &Array2<f64>) -> String {
    let mut out = String::from("simplex");
    for j in 0..features.ncols() {
        out.push_str(&format!(",f{j}"));
    }
    out.push('\n');
    for i in 0..c.count(order) {
        out.push_str(&c.simplex_key(SimplexId::new(order, i)));
        for v in features.row(i) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::tests::figure_one;

    #[test]
    fn text_round_trip() {
        let c = figure_one();
        let text = write_complex_text(&c);
        let sets = parse_complex_text(&text, Path::new("mem")).unwrap();
        let d = build_complex(&sets, vec![], false).unwrap();
        assert_eq!(d.counts(), c.counts());
        for k in 0..=2 {
            for i in 0..c.count(k) {
                let s = SimplexId::new(k, i);
                assert_eq!(c.labels_of(s), d.labels_of(s));
            }
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_complex_text("order 1\na b\na\n", Path::new("x.txt")).unwrap_err();
        assert!(err.to_string().contains("x.txt:3"), "{err}");
        let err = parse_complex_text("a\n", Path::new("x.txt")).unwrap_err();
        assert!(err.to_string().contains(":1"));
        assert!(matches!(parse_complex_text("# nothing\n", Path::new("x")), Err(FormatError::Empty(_))));
    }

    #[test]
    fn json_and_features() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = figure_one();
        c.set_features(1, Array2::from_shape_fn((8, 2), |(i, j)| (i * 2 + j) as f64)).unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, write_complex_json(&c)).unwrap();
        let d = load_complex(&p, false).unwrap();
        assert_eq!(d.counts(), vec![6, 8, 2]);
        assert_eq!(d.features(1).unwrap(), c.features(1).unwrap());

        let csv = write_feature_csv(&c, 1, c.features(1).unwrap());
        let fp = dir.path().join("f1.csv");
        fs::write(&fp, &csv).unwrap();
        assert_eq!(&load_feature_csv(&c, 1, &fp).unwrap(), c.features(1).unwrap());

        fs::write(&fp, csv.replace("simplex,f0,f1", "simplex,f0,extra")).unwrap();
        assert!(load_feature_csv(&c, 1, &fp).unwrap_err().to_string().contains("undeclared"));
    }
}
