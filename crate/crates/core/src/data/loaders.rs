//! Contact lists, co-authorship lists, value and label CSVs.
//!
//! Contact list: one interaction group per line, vertex labels separated by
//! whitespace or commas; each group becomes a simplex and faces are added.
//!
//! Co-authorship list: `author author ... : citations` per paper. Each paper
//! is a simplex; the value of a simplex is the total citation count of all
//! papers whose author set contains it.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::complex::io::{keyed_rows_to_matrix, parse_error, parse_keyed_csv, read_to_string};
use crate::complex::{build_complex, SimplexId, SimplicialComplex};

use super::DataError;

fn tokens(line: &str) -> Vec<String> {
    line.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Builds a complex from interaction groups. Repeated groups are merged.
fn complex_from_groups(groups: &[Vec<String>]) -> Result<SimplicialComplex, DataError> {
    let top = groups.iter().map(Vec::len).max().unwrap_or(0);
    let mut sets: Vec<Vec<Vec<String>>> = vec![Vec::new(); top];
    let mut seen = std::collections::HashSet::new();
    for g in groups {
        let mut key = g.clone();
        key.sort();
        if seen.insert(key) {
            sets[g.len() - 1].push(g.clone());
        }
    }
    Ok(build_complex(&sets, vec![], true)?)
}

pub fn parse_contact_list(text: &str, path: &Path) -> Result<SimplicialComplex, DataError> {
    let mut groups = Vec::new();
    for (line, content) in content_lines(text) {
        let mut g = tokens(content);
        let n = g.len();
        g.sort();
        g.dedup();
        if g.len() != n {
            return Err(parse_error(path, line, "repeated vertex in group").into());
        }
        groups.push(g);
    }
    if groups.is_empty() {
        return Err(DataError::EmptyDataset(path.display().to_string()));
    }
    complex_from_groups(&groups)
}

pub fn load_contact_list(path: &Path) -> Result<SimplicialComplex, DataError> {
    parse_contact_list(&read_to_string(path)?, path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Paper {
    pub authors: Vec<String>,
    pub citations: f64,
}

/// Per-order simplex values: each simplex gets the summed citations of the
/// papers containing it.
pub fn coauthorship_values(c: &SimplicialComplex, papers: &[Paper]) -> Vec<Vec<f64>> {
    let mut values: Vec<Vec<f64>> = c.counts().iter().map(|&n| vec![0.0; n]).collect();
    for p in papers {
        let mut ids: Vec<usize> = p
            .authors
            .iter()
            .map(|a| c.find_labels(&[a]).expect("author is a vertex").index)
            .collect();
        ids.sort_unstable();
        // Every nonempty subset of the author set.
        let n = ids.len();
        for mask in 1u64..(1u64 << n) {
            let subset: Vec<usize> = (0..n).filter(|b| mask >> b & 1 == 1).map(|b| ids[b]).collect();
            let s = c.find(&subset).expect("closure holds every face");
            values[s.order][s.index] += p.citations;
        }
    }
    values
}

/// Parses papers and returns the complex with its per-order values.
pub fn parse_coauthorship(text: &str, path: &Path) -> Result<(SimplicialComplex, Vec<Vec<f64>>), DataError> {
    let mut papers: Vec<Paper> = Vec::new();
    for (line, content) in content_lines(text) {
        let (authors, cites) = content
            .rsplit_once(':')
            .ok_or_else(|| parse_error(path, line, "expected `authors : citations`"))?;
        let mut authors = tokens(authors);
        if authors.is_empty() {
            return Err(parse_error(path, line, "paper without authors").into());
        }
        if authors.len() > 20 {
            return Err(parse_error(path, line, "more than 20 authors").into());
        }
        let n = authors.len();
        authors.sort();
        authors.dedup();
        if authors.len() != n {
            return Err(parse_error(path, line, "repeated author").into());
        }
        let citations: f64 = cites
            .trim()
            .parse()
            .map_err(|_| parse_error(path, line, format!("not a number: `{}`", cites.trim())))?;
        if !citations.is_finite() || citations < 0.0 {
            return Err(parse_error(path, line, "citations must be non-negative").into());
        }
        papers.push(Paper { authors, citations });
    }
    if papers.is_empty() {
        return Err(DataError::EmptyDataset(path.display().to_string()));
    }
    let groups: Vec<Vec<String>> = papers.iter().map(|p| p.authors.clone()).collect();
    let c = complex_from_groups(&groups)?;
    let values = coauthorship_values(&c, &papers);
    Ok((c, values))
}

pub fn load_coauthorship(path: &Path) -> Result<(SimplicialComplex, Vec<Vec<f64>>), DataError> {
    parse_coauthorship(&read_to_string(path)?, path)
}

/// Reads a `simplex,value` CSV for one order.
pub fn load_value_csv(c: &SimplicialComplex, order: usize, path: &Path) -> Result<Vec<f64>, DataError> {
    let text = read_to_string(path)?;
    let table = parse_keyed_csv(&text, path, "value")?;
    if table.width != 1 {
        return Err(parse_error(path, 1, "expected exactly one `value` column").into());
    }
    Ok(keyed_rows_to_matrix(c, order, &table, path)?.column(0).to_vec())
}

pub fn write_value_csv(c: &SimplicialComplex, order: usize, values: &[f64]) -> String {
    let mut out = String::from("simplex,value\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{},{v}\n", c.simplex_key(SimplexId::new(order, i))));
    }
    out
}

/// Parses `vertex,label` rows. Labels are mapped to dense class ids in sorted
/// order (numerically when every label is an integer). Returns the class id
/// per vertex and the label names.
pub fn parse_labels(c: &SimplicialComplex, text: &str, path: &Path) -> Result<(Vec<usize>, Vec<String>), DataError> {
    let mut lines = content_lines(text);
    let (_, header) = lines.next().ok_or_else(|| DataError::EmptyDataset(path.display().to_string()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["vertex", "label"] {
        return Err(parse_error(path, 1, format!("header must be `vertex,label`, found `{header}`")).into());
    }
    let index: HashMap<&str, usize> = c.vertex_labels().iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut raw: Vec<Option<String>> = vec![None; c.count(0)];
    for (line, content) in lines {
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(parse_error(path, line, format!("expected 2 fields, found {}", fields.len())).into());
        }
        let v = *index
            .get(fields[0])
            .ok_or_else(|| parse_error(path, line, format!("unknown vertex `{}`", fields[0])))?;
        if raw[v].replace(fields[1].to_owned()).is_some() {
            return Err(parse_error(path, line, format!("duplicate label for `{}`", fields[0])).into());
        }
    }
    if let Some(v) = raw.iter().position(Option::is_none) {
        return Err(parse_error(path, 0, format!("no label for vertex `{}`", c.vertex_labels()[v])).into());
    }
    let raw: Vec<String> = raw.into_iter().map(Option::unwrap).collect();
    let numeric = raw.iter().all(|l| l.parse::<i64>().is_ok());
    let mut names: BTreeMap<(i64, String), usize> = BTreeMap::new();
    for l in &raw {
        let key = (if numeric { l.parse().unwrap() } else { 0 }, l.clone());
        names.insert(key, 0);
    }
    for (i, v) in names.values_mut().enumerate() {
        *v = i;
    }
    let labels = raw
        .iter()
        .map(|l| names[&(if numeric { l.parse().unwrap() } else { 0 }, l.clone())])
        .collect();
    Ok((labels, names.into_keys().map(|(_, l)| l).collect()))
}

pub fn load_labels(c: &SimplicialComplex, path: &Path) -> Result<(Vec<usize>, Vec<String>), DataError> {
    parse_labels(c, &read_to_string(path)?, path)
}

pub fn write_labels_csv(c: &SimplicialComplex, labels: &[usize]) -> String {
    let mut out = String::from("vertex,label\n");
    for (v, l) in labels.iter().enumerate() {
        out.push_str(&format!("{},{l}\n", c.vertex_labels()[v]));
    }
    out
}
