//! Abstract simplicial complexes with unsigned boundary maps.
//!
//! A [`SimplicialComplex`] stores, per order `k`, the list of `k`-simplices as
//! sorted tuples of dense vertex ids, a reverse lookup from tuple to index, an
//! optional `n_k x d_k` feature matrix and the incidence matrix `B_k`
//! (`n_{k-1} x n_k`). Faces, cofaces and both adjacency relations are derived
//! from the boundary maps.

pub mod io;

use std::collections::HashMap;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::CsrPattern;

#[derive(Debug, Error, PartialEq)]
pub enum ComplexError {
    #[error("closure violation: face {face} of {order}-simplex {simplex} is missing")]
    ClosureViolation {
        order: usize,
        simplex: String,
        face: String,
    },
    #[error("duplicate {order}-simplex {simplex}")]
    DuplicateSimplex { order: usize, simplex: String },
    #[error("feature matrix for order {order} has {rows} rows but the complex has {expected} simplices")]
    FeatureShapeMismatch {
        order: usize,
        rows: usize,
        expected: usize,
    },
    #[error("malformed {order}-simplex {simplex}: {reason}")]
    MalformedSimplex {
        order: usize,
        simplex: String,
        reason: &'static str,
    },
    #[error("unknown simplex {0}")]
    UnknownSimplex(SimplexId),
    #[error("order {order} out of range (max order {max_order})")]
    OrderOutOfRange { order: usize, max_order: usize },
    #[error("complex has no vertices")]
    EmptyComplex,
}

/// Position of a simplex inside a complex: its order and its row index in
/// that order's tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SimplexId {
    pub order: usize,
    pub index: usize,
}

impl SimplexId {
    pub const fn new(order: usize, index: usize) -> Self {
        Self { order, index }
    }
}

impl fmt::Display for SimplexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.order, self.index)
    }
}

/// Face/coface incidence of one order: `S_k = [B_k^T | B_{k+1}]`.
///
/// Columns below `split_point` are faces, the rest are cofaces shifted by
/// `split_point`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectionTable {
    pub order: usize,
    pub table: CsrPattern,
    pub split_point: usize,
}

impl ConnectionTable {
    /// Decodes a column of the table into the face or coface it refers to.
    pub fn decode(&self, column: usize) -> SimplexId {
        if column < self.split_point {
            SimplexId::new(self.order - 1, column)
        } else {
            SimplexId::new(self.order + 1, column - self.split_point)
        }
    }
}

/// `sign(B_k^T B_k + B_{k+1} B_{k+1}^T)`, optionally with a zeroed diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborTable {
    pub order: usize,
    pub table: CsrPattern,
    pub include_self: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialComplex {
    vertex_labels: Vec<String>,
    /// Flat vertex tuples per order, stride `k + 1`.
    simplices: Vec<Vec<usize>>,
    lookup: Vec<HashMap<Vec<usize>, usize>>,
    features: Vec<Array2<f64>>,
    /// `boundary[k] = B_k` with shape `n_{k-1} x n_k`; `boundary[0]` is `0 x n_0`.
    boundary: Vec<CsrPattern>,
    /// `faces_of[k] = B_k^T`.
    faces_of: Vec<CsrPattern>,
}

/// Builds a validated complex from per-order lists of vertex tuples.
///
/// `simplex_sets[k]` holds the `k`-simplices. Vertices are identified by the
/// `Display` form of `V` and receive dense ids in order of first appearance,
/// scanning order 0 first. `features[k]`, when present, must have one row per
/// listed `k`-simplex or one row per `k`-simplex after closure; rows for
/// simplices synthesized by `auto_close` are zero.
pub fn build_complex<V: fmt::Display>(
    simplex_sets: &[Vec<Vec<V>>],
    features: Vec<Option<Array2<f64>>>,
    auto_close: bool,
) -> Result<SimplicialComplex, ComplexError> {
    let labelled: Vec<Vec<Vec<String>>> = simplex_sets
        .iter()
        .map(|set| set.iter().map(|s| s.iter().map(|v| v.to_string()).collect()).collect())
        .collect();
    ComplexBuilder::from_labels(&labelled, auto_close)?.finish(features)
}

struct ComplexBuilder {
    vertex_labels: Vec<String>,
    simplices: Vec<Vec<Vec<usize>>>,
    lookup: Vec<HashMap<Vec<usize>, usize>>,
    listed: Vec<usize>,
}

impl ComplexBuilder {
    fn from_labels(sets: &[Vec<Vec<String>>], auto_close: bool) -> Result<Self, ComplexError> {
        let mut vertex_index: HashMap<String, usize> = HashMap::new();
        let mut vertex_labels = Vec::new();
        let top = sets.iter().rposition(|s| !s.is_empty()).ok_or(ComplexError::EmptyComplex)?;
        let mut simplices: Vec<Vec<Vec<usize>>> = vec![Vec::new(); top + 1];
        let mut lookup: Vec<HashMap<Vec<usize>, usize>> = vec![HashMap::new(); top + 1];

        for (k, set) in sets.iter().enumerate().take(top + 1) {
            for tuple in set {
                let shown = tuple.join(" ");
                if tuple.len() != k + 1 {
                    return Err(ComplexError::MalformedSimplex {
                        order: k,
                        simplex: shown,
                        reason: "vertex count does not match order",
                    });
                }
                let mut ids: Vec<usize> = tuple
                    .iter()
                    .map(|label| {
                        *vertex_index.entry(label.clone()).or_insert_with(|| {
                            vertex_labels.push(label.clone());
                            vertex_labels.len() - 1
                        })
                    })
                    .collect();
                ids.sort_unstable();
                if ids.windows(2).any(|w| w[0] == w[1]) {
                    return Err(ComplexError::MalformedSimplex {
                        order: k,
                        simplex: shown,
                        reason: "repeated vertex",
                    });
                }
                if lookup[k].contains_key(&ids) {
                    return Err(ComplexError::DuplicateSimplex { order: k, simplex: shown });
                }
                lookup[k].insert(ids.clone(), simplices[k].len());
                simplices[k].push(ids);
            }
        }
        // Vertices that only appear inside higher simplices.
        let listed = simplices.iter().map(Vec::len).collect();
        if auto_close {
            let mut extra: Vec<usize> = Vec::new();
            for &v in simplices.iter().skip(1).flatten().flatten() {
                if !lookup[0].contains_key(&vec![v]) {
                    lookup[0].insert(vec![v], simplices[0].len() + extra.len());
                    extra.push(v);
                }
            }
            simplices[0].extend(extra.into_iter().map(|v| vec![v]));
        }
        let mut builder = Self {
            vertex_labels,
            simplices,
            lookup,
            listed,
        };
        builder.close(auto_close)?;
        Ok(builder)
    }

    fn close(&mut self, auto_close: bool) -> Result<(), ComplexError> {
        for k in (1..self.simplices.len()).rev() {
            let mut i = 0;
            while i < self.simplices[k].len() {
                let tuple = self.simplices[k][i].clone();
                for drop in 0..tuple.len() {
                    let face: Vec<usize> = tuple
                        .iter()
                        .enumerate()
                        .filter(|&(p, _)| p != drop)
                        .map(|(_, &v)| v)
                        .collect();
                    if self.lookup[k - 1].contains_key(&face) {
                        continue;
                    }
                    if !auto_close {
                        return Err(ComplexError::ClosureViolation {
                            order: k,
                            simplex: self.show(&tuple),
                            face: self.show(&face),
                        });
                    }
                    self.lookup[k - 1].insert(face.clone(), self.simplices[k - 1].len());
                    self.simplices[k - 1].push(face);
                }
                i += 1;
            }
        }
        Ok(())
    }

    fn show(&self, tuple: &[usize]) -> String {
        tuple.iter().map(|&v| self.vertex_labels[v].as_str()).collect::<Vec<_>>().join(" ")
    }

    fn finish(self, mut features: Vec<Option<Array2<f64>>>) -> Result<SimplicialComplex, ComplexError> {
        let orders = self.simplices.len();
        features.resize(orders.max(features.len()), None);
        let mut feats = Vec::with_capacity(orders);
        for (k, f) in features.into_iter().enumerate() {
            if k >= orders {
                if let Some(f) = f {
                    if f.nrows() > 0 {
                        return Err(ComplexError::FeatureShapeMismatch {
                            order: k,
                            rows: f.nrows(),
                            expected: 0,
                        });
                    }
                }
                continue;
            }
            let n = self.simplices[k].len();
            let f = match f {
                None => Array2::zeros((n, 0)),
                Some(f) if f.ncols() == 0 => Array2::zeros((n, 0)),
                Some(f) if f.nrows() == n => f,
                Some(f) if f.nrows() == self.listed[k] => {
                    let mut padded = Array2::zeros((n, f.ncols()));
                    padded.slice_mut(ndarray::s![..f.nrows(), ..]).assign(&f);
                    padded
                }
                Some(f) => {
                    return Err(ComplexError::FeatureShapeMismatch {
                        order: k,
                        rows: f.nrows(),
                        expected: n,
                    })
                }
            };
            feats.push(f);
        }

        let mut boundary = vec![CsrPattern::empty(0, self.simplices[0].len())];
        let mut faces_of = vec![CsrPattern::empty(self.simplices[0].len(), 0)];
        for k in 1..orders {
            let lower = &self.lookup[k - 1];
            let bt = CsrPattern::from_rows(
                self.simplices[k - 1].len(),
                self.simplices[k].iter().map(|tuple| {
                    (0..tuple.len())
                        .map(|drop| {
                            let face: Vec<usize> = tuple
                                .iter()
                                .enumerate()
                                .filter(|&(p, _)| p != drop)
                                .map(|(_, &v)| v)
                                .collect();
                            lower[&face]
                        })
                        .collect::<Vec<_>>()
                }),
            );
            boundary.push(bt.transpose());
            faces_of.push(bt);
        }

        Ok(SimplicialComplex {
            vertex_labels: self.vertex_labels,
            simplices: self.simplices.into_iter().map(|s| s.into_iter().flatten().collect()).collect(),
            lookup: self.lookup,
            features: feats,
            boundary,
            faces_of,
        })
    }
}

impl SimplicialComplex {
    pub fn max_order(&self) -> usize {
        self.simplices.len() - 1
    }

    /// `n_k`; zero for orders above the top.
    pub fn count(&self, order: usize) -> usize {
        self.simplices.get(order).map_or(0, |s| s.len() / (order + 1))
    }

    pub fn counts(&self) -> Vec<usize> {
        (0..=self.max_order()).map(|k| self.count(k)).collect()
    }

    pub fn total_simplices(&self) -> usize {
        self.counts().iter().sum()
    }

    pub fn vertex_labels(&self) -> &[String] {
        &self.vertex_labels
    }

    /// Sorted dense vertex ids of a simplex.
    pub fn vertices(&self, s: SimplexId) -> &[usize] {
        let stride = s.order + 1;
        &self.simplices[s.order][s.index * stride..(s.index + 1) * stride]
    }

    /// Vertex labels of a simplex in ascending vertex-id order.
    pub fn labels_of(&self, s: SimplexId) -> Vec<&str> {
        self.vertices(s).iter().map(|&v| self.vertex_labels[v].as_str()).collect()
    }

    /// Index of the simplex spanned by the given vertex ids (any order).
    pub fn find(&self, vertices: &[usize]) -> Option<SimplexId> {
        let order = vertices.len().checked_sub(1)?;
        let mut key = vertices.to_vec();
        key.sort_unstable();
        self.lookup.get(order)?.get(&key).map(|&i| SimplexId::new(order, i))
    }

    /// Looks a simplex up by vertex labels.
    pub fn find_labels<S: AsRef<str>>(&self, labels: &[S]) -> Option<SimplexId> {
        let ids: Option<Vec<usize>> = labels
            .iter()
            .map(|l| self.vertex_labels.iter().position(|v| v == l.as_ref()))
            .collect();
        self.find(&ids?)
    }

    pub fn contains(&self, s: SimplexId) -> bool {
        s.order <= self.max_order() && s.index < self.count(s.order)
    }

    pub fn check(&self, s: SimplexId) -> Result<(), ComplexError> {
        if self.contains(s) {
            Ok(())
        } else {
            Err(ComplexError::UnknownSimplex(s))
        }
    }

    fn check_order(&self, order: usize) -> Result<(), ComplexError> {
        if order <= self.max_order() {
            Ok(())
        } else {
            Err(ComplexError::OrderOutOfRange {
                order,
                max_order: self.max_order(),
            })
        }
    }

    /// `n_k x d_k` feature matrix, `d_k` possibly zero. Orders above the top
    /// yield `None`.
    pub fn features(&self, order: usize) -> Option<&Array2<f64>> {
        self.features.get(order)
    }

    pub fn feature_dim(&self, order: usize) -> usize {
        self.features.get(order).map_or(0, |f| f.ncols())
    }

    pub fn set_features(&mut self, order: usize, features: Array2<f64>) -> Result<(), ComplexError> {
        self.check_order(order)?;
        if features.nrows() != self.count(order) {
            return Err(ComplexError::FeatureShapeMismatch {
                order,
                rows: features.nrows(),
                expected: self.count(order),
            });
        }
        self.features[order] = features;
        Ok(())
    }

    /// `B_k`; for `k = 0` and `k > max_order` an empty matrix of matching shape.
    pub fn boundary(&self, order: usize) -> CsrPattern {
        match self.boundary.get(order) {
            Some(b) => b.clone(),
            None => CsrPattern::empty(self.count(order - 1), 0),
        }
    }

    /// Row `i` lists the face indices of simplex `i` (`B_k^T`).
    pub(crate) fn face_rows(&self, order: usize) -> Option<&CsrPattern> {
        self.faces_of.get(order)
    }

    /// Row `i` lists the coface indices of simplex `i` (`B_{k+1}`).
    pub(crate) fn coface_rows(&self, order: usize) -> Option<&CsrPattern> {
        self.boundary.get(order + 1)
    }

    /// Face indices of `s` (in order `k - 1`), without validation.
    #[inline]
    pub fn face_indices(&self, s: SimplexId) -> &[usize] {
        if s.order == 0 {
            &[]
        } else {
            self.faces_of[s.order].row(s.index)
        }
    }

    /// Coface indices of `s` (in order `k + 1`), without validation.
    #[inline]
    pub fn coface_indices(&self, s: SimplexId) -> &[usize] {
        match self.boundary.get(s.order + 1) {
            Some(b) => b.row(s.index),
            None => &[],
        }
    }

    pub fn faces(&self, s: SimplexId) -> Result<Vec<SimplexId>, ComplexError> {
        self.check(s)?;
        Ok(self
            .face_indices(s)
            .iter()
            .map(|&i| SimplexId::new(s.order - 1, i))
            .collect())
    }

    pub fn cofaces(&self, s: SimplexId) -> Result<Vec<SimplexId>, ComplexError> {
        self.check(s)?;
        Ok(self
            .coface_indices(s)
            .iter()
            .map(|&i| SimplexId::new(s.order + 1, i))
            .collect())
    }

    /// Simplices of the same order sharing a face with `s`.
    pub fn lower_neighbors(&self, s: SimplexId, include_self: bool) -> Result<Vec<SimplexId>, ComplexError> {
        self.check(s)?;
        let mut out: Vec<usize> = Vec::new();
        if s.order > 0 {
            let up = &self.boundary[s.order];
            for &f in self.face_indices(s) {
                out.extend_from_slice(up.row(f));
            }
        }
        Ok(finish_neighbors(out, s, include_self))
    }

    /// Simplices of the same order sharing a coface with `s`.
    pub fn upper_neighbors(&self, s: SimplexId, include_self: bool) -> Result<Vec<SimplexId>, ComplexError> {
        self.check(s)?;
        let mut out: Vec<usize> = Vec::new();
        if let Some(down) = self.faces_of.get(s.order + 1) {
            for &c in self.coface_indices(s) {
                out.extend_from_slice(down.row(c));
            }
        }
        Ok(finish_neighbors(out, s, include_self))
    }

    pub fn connection_table(&self, order: usize) -> Result<ConnectionTable, ComplexError> {
        self.check_order(order)?;
        let faces = self.faces_of[order].clone();
        let cofaces = self
            .boundary
            .get(order + 1)
            .cloned()
            .unwrap_or_else(|| CsrPattern::empty(self.count(order), 0));
        Ok(ConnectionTable {
            order,
            split_point: faces.cols(),
            table: faces.hstack(&cofaces),
        })
    }

    /// `sign(A_k)` computed from sparse boundary products.
    pub fn neighbor_table(&self, order: usize, include_self: bool) -> Result<NeighborTable, ComplexError> {
        self.check_order(order)?;
        let n = self.count(order);
        let lower = if order > 0 {
            self.faces_of[order].product(&self.boundary[order])
        } else {
            CsrPattern::empty(n, n)
        };
        let upper = match self.boundary.get(order + 1) {
            Some(b) => b.product(&self.faces_of[order + 1]),
            None => CsrPattern::empty(n, n),
        };
        let mut table = lower.union(&upper);
        if !include_self {
            table = table.without_diagonal();
        }
        Ok(NeighborTable {
            order,
            table,
            include_self,
        })
    }

    /// Checks the structural invariants: closure and `k + 1` faces per column
    /// of every `B_k`.
    pub fn validate(&self) -> Result<(), ComplexError> {
        for k in 1..=self.max_order() {
            for i in 0..self.count(k) {
                let s = SimplexId::new(k, i);
                let vs = self.vertices(s);
                for drop in 0..vs.len() {
                    let face: Vec<usize> = vs.iter().enumerate().filter(|&(p, _)| p != drop).map(|(_, &v)| v).collect();
                    if self.find(&face).is_none() {
                        return Err(ComplexError::ClosureViolation {
                            order: k,
                            simplex: self.labels_of(s).join(" "),
                            face: face.iter().map(|&v| self.vertex_labels[v].as_str()).collect::<Vec<_>>().join(" "),
                        });
                    }
                }
                debug_assert_eq!(self.face_indices(s).len(), k + 1);
            }
        }
        Ok(())
    }

    /// The same complex with simplices of each order relabelled: simplex `i`
    /// of order `k` moves to index `perms[k][i]`. Features move with their
    /// simplices. Vertex ids are permuted by `perms[0]`.
    pub fn permuted(&self, perms: &[Vec<usize>]) -> SimplicialComplex {
        assert_eq!(perms.len(), self.max_order() + 1);
        let mut sets: Vec<Vec<Vec<String>>> = Vec::new();
        let mut feats = Vec::new();
        for (k, perm) in perms.iter().enumerate() {
            let n = self.count(k);
            let mut inverse = vec![0; n];
            for (i, &p) in perm.iter().enumerate() {
                inverse[p] = i;
            }
            sets.push(
                inverse
                    .iter()
                    .map(|&old| self.labels_of(SimplexId::new(k, old)).into_iter().map(str::to_owned).collect())
                    .collect(),
            );
            let f = &self.features[k];
            feats.push(Some(Array2::from_shape_fn(f.dim(), |(r, c)| f[[inverse[r], c]])));
        }
        ComplexBuilder::from_labels(&sets, false)
            .and_then(|b| b.finish(feats))
            .expect("permutation of a valid complex is valid")
    }

    /// Human-readable vertex tuple, e.g. `1-3-4`.
    pub fn simplex_key(&self, s: SimplexId) -> String {
        self.labels_of(s).join("-")
    }
}

fn finish_neighbors(mut out: Vec<usize>, s: SimplexId, include_self: bool) -> Vec<SimplexId> {
    out.sort_unstable();
    out.dedup();
    out.into_iter()
        .filter(|&j| include_self || j != s.index)
        .map(|j| SimplexId::new(s.order, j))
        .collect()
}
