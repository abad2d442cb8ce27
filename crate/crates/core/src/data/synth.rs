//! Synthetic datasets: planted-partition contact complexes, co-authorship
//! citation complexes and small random complexes.

use serde::{Deserialize, Serialize};

use super::loaders::{coauthorship_values, Paper};
use super::DataError;
use crate::complex::{build_complex, SimplicialComplex};
use crate::rng::{self, domain, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactConfig {
    pub n_vertices: usize,
    pub n_classes: usize,
    pub groups_per_class: usize,
    pub min_group: usize,
    pub max_group: usize,
    /// Probability that a group member is drawn from all vertices instead of
    /// the group's class.
    pub noise: f64,
    pub seed: u64,
}

impl Default for ContactConfig {
    fn default() -> Self {
        Self {
            n_vertices: 60,
            n_classes: 4,
            groups_per_class: 25,
            min_group: 2,
            max_group: 4,
            noise: 0.05,
            seed: 0,
        }
    }
}

fn groups_to_complex(n_vertices: usize, groups: &[Vec<usize>]) -> Result<SimplicialComplex, DataError> {
    let top = groups.iter().map(Vec::len).max().unwrap_or(1);
    let mut sets: Vec<Vec<Vec<String>>> = vec![Vec::new(); top];
    sets[0] = (0..n_vertices).map(|v| vec![format!("v{v}")]).collect();
    let mut seen = std::collections::HashSet::new();
    for g in groups {
        let mut key = g.clone();
        key.sort_unstable();
        if g.len() > 1 && seen.insert(key.clone()) {
            sets[g.len() - 1].push(key.iter().map(|v| format!("v{v}")).collect());
        }
    }
    Ok(build_complex(&sets, vec![], true)?)
}

/// Draws `size` distinct members; each comes from `pool` or, with
/// probability `noise`, from all vertices.
fn draw_group(r: &mut StreamRng, pool: &[usize], n: usize, size: usize, noise: f64) -> Vec<usize> {
    let mut g: Vec<usize> = Vec::with_capacity(size);
    let mut attempts = 0;
    while g.len() < size && attempts < 100 * size {
        attempts += 1;
        let v = if rng::uniform_unit(r) < noise { rng::uniform_index(r, n) } else { pool[rng::uniform_index(r, pool.len())] };
        if !g.contains(&v) {
            g.push(v);
        }
    }
    g
}

/// Planted-partition contact complex with one class label per vertex.
/// Vertices are named `v0, v1, ...` and keep their index as vertex id.
pub fn synth_contact(cfg: &ContactConfig) -> Result<(SimplicialComplex, Vec<usize>), DataError> {
    let ContactConfig {
        n_vertices: n,
        n_classes,
        min_group,
        max_group,
        noise,
        ..
    } = *cfg;
    if n == 0 || n_classes == 0 || n_classes > n || min_group < 2 || max_group < min_group || !(0.0..=1.0).contains(&noise) {
        return Err(DataError::Invalid(format!("invalid contact generator parameters {cfg:?}")));
    }
    let mut r = rng::stream(cfg.seed, domain::SYNTH, 0);
    let mut labels: Vec<usize> = (0..n).map(|i| i % n_classes).collect();
    for i in (1..n).rev() {
        let j = rng::uniform_index(&mut r, i + 1);
        labels.swap(i, j);
    }
    let members: Vec<Vec<usize>> = (0..n_classes).map(|c| (0..n).filter(|&v| labels[v] == c).collect()).collect();
    let mut groups = Vec::new();
    for pool in &members {
        for _ in 0..cfg.groups_per_class {
            let size = min_group + rng::uniform_index(&mut r, max_group - min_group + 1);
            groups.push(draw_group(&mut r, pool, n, size.min(n), noise));
        }
    }
    // Every vertex takes part in at least one interaction.
    let mut seen = vec![false; n];
    for &v in groups.iter().flatten() {
        seen[v] = true;
    }
    for v in 0..n {
        if !seen[v] {
            let pool = &members[labels[v]];
            let mut g = vec![v];
            if let Some(&u) = pool.iter().find(|&&u| u != v) {
                g.push(u);
            } else {
                g.push((v + 1) % n);
            }
            groups.push(g);
        }
    }
    let c = groups_to_complex(n, &groups)?;
    Ok((c, labels))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CitationConfig {
    pub n_authors: usize,
    pub n_papers: usize,
    pub max_authors: usize,
    /// Citations are `round(exp(mu + sigma * z)) + 1` with `z` standard normal.
    pub mu: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for CitationConfig {
    fn default() -> Self {
        Self {
            n_authors: 60,
            n_papers: 120,
            max_authors: 4,
            mu: 3.0,
            sigma: 1.0,
            seed: 0,
        }
    }
}

/// Random papers with log-normal citation counts, their co-authorship
/// complex and per-order simplex values.
pub fn synth_citations(cfg: &CitationConfig) -> Result<(SimplicialComplex, Vec<Vec<f64>>, Vec<Paper>), DataError> {
    if cfg.n_authors == 0 || cfg.n_papers == 0 || cfg.max_authors == 0 || cfg.max_authors > cfg.n_authors.min(20) {
        return Err(DataError::Invalid(format!("invalid citation generator parameters {cfg:?}")));
    }
    let mut r = rng::stream(cfg.seed, domain::SYNTH, 1);
    let all: Vec<usize> = (0..cfg.n_authors).collect();
    let mut papers = Vec::with_capacity(cfg.n_papers);
    for _ in 0..cfg.n_papers {
        let size = 1 + rng::uniform_index(&mut r, cfg.max_authors);
        let mut authors = draw_group(&mut r, &all, cfg.n_authors, size, 0.0);
        authors.sort_unstable();
        // Box-Muller.
        let u1 = 1.0 - rng::uniform_unit(&mut r);
        let u2 = rng::uniform_unit(&mut r);
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        let citations = (cfg.mu + cfg.sigma * z).exp().round() + 1.0;
        papers.push(Paper {
            authors: authors.iter().map(|a| format!("a{a}")).collect(),
            citations,
        });
    }
    let groups: Vec<Vec<usize>> = papers
        .iter()
        .map(|p| p.authors.iter().map(|a| a[1..].parse().expect("generated name")).collect())
        .collect();
    let mut sets: Vec<Vec<Vec<String>>> = vec![Vec::new(); cfg.max_authors];
    let mut seen = std::collections::HashSet::new();
    for g in &groups {
        if seen.insert(g.clone()) {
            sets[g.len() - 1].push(g.iter().map(|a| format!("a{a}")).collect());
        }
    }
    let c = build_complex(&sets, vec![], true)?;
    let values = coauthorship_values(&c, &papers);
    Ok((c, values, papers))
}

/// A small random complex: `n_groups` random vertex sets of size
/// `1..=max_size` over `n_vertices` vertices, closed under faces.
pub fn random_complex(n_vertices: usize, n_groups: usize, max_size: usize, seed: u64) -> SimplicialComplex {
    let mut r = rng::stream(seed, domain::SYNTH, 2);
    let all: Vec<usize> = (0..n_vertices).collect();
    let mut groups = Vec::new();
    for _ in 0..n_groups {
        let size = 1 + rng::uniform_index(&mut r, max_size.min(n_vertices));
        groups.push(draw_group(&mut r, &all, n_vertices, size, 0.0));
    }
    groups_to_complex(n_vertices, &groups).expect("generated groups are valid")
}
