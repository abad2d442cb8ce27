//! Walk feature matrices.
//!
//! A walk of length `l` on `k`-simplices becomes an `l x D` matrix made of six
//! horizontally stacked blocks:
//!
//! | block | width     | row `i`                                                   |
//! |-------|-----------|-----------------------------------------------------------|
//! | `F→`  | `d_k`     | feature of `v_i`                                          |
//! | `F↓`  | `d_{k-1}` | feature of the face used to reach `v_i`, else zero       |
//! | `F↑`  | `d_{k+1}` | feature of the coface used to reach `v_i`, else zero     |
//! | `I`   | `s`       | column `j` is 1 iff `v_i = v_{i-(j+1)}`                   |
//! | `A↓`  | `s - 1`   | column `j` is 1 iff `v_{i-(j+2)}` is lower adjacent to `v_i` |
//! | `A↑`  | `s - 1`   | column `j` is 1 iff `v_{i-(j+2)}` is upper adjacent to `v_i` |
//!
//! so `D = d_k + d_{k-1} + d_{k+1} + 3s - 2`. Columns are look-back offsets;
//! offset 1 is dropped from the adjacency blocks because consecutive walk
//! simplices are adjacent by construction. Adjacency never counts a simplex
//! as its own neighbour.

use ndarray::{s, Array2, ArrayView2};
use thiserror::Error;

use crate::complex::{SimplexId, SimplicialComplex};
use crate::nn::Real;
use crate::walk::{Connection, Walk};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("feature lookup failed: {what} index {index} outside {rows} rows")]
    FeatureLookupFailure { what: &'static str, index: usize, rows: usize },
    #[error("window size must be at least 1")]
    ZeroWindow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkFeatureMatrix<T> {
    pub walk_index: usize,
    pub data: Array2<T>,
    /// Start columns of `F↓`, `F↑`, `I`, `A↓`, `A↑`.
    pub block_offsets: [usize; 5],
    pub window: usize,
}

impl<T: Real> WalkFeatureMatrix<T> {
    pub fn block(&self, b: usize) -> ArrayView2<'_, T> {
        let start = if b == 0 { 0 } else { self.block_offsets[b - 1] };
        let end = if b == 5 { self.data.ncols() } else { self.block_offsets[b] };
        self.data.slice(s![.., start..end])
    }
}

/// `d_k + d_{k-1} + d_{k+1} + 3s - 2`.
pub fn feature_width(d_k: usize, d_face: usize, d_coface: usize, window: usize) -> usize {
    d_k + d_face + d_coface + 3 * window - 2
}

/// Simplex, face and coface feature rows along the walk.
pub fn feature_blocks<T: Real>(
    walk: &Walk,
    feat_k: &Array2<T>,
    feat_faces: Option<&Array2<T>>,
    feat_cofaces: Option<&Array2<T>>,
) -> Result<(Array2<T>, Array2<T>, Array2<T>), FeatureError> {
    let l = walk.len();
    let d_face = feat_faces.map_or(0, |f| f.ncols());
    let d_coface = feat_cofaces.map_or(0, |f| f.ncols());
    let mut fwd = Array2::zeros((l, feat_k.ncols()));
    let mut down = Array2::zeros((l, d_face));
    let mut up = Array2::zeros((l, d_coface));
    let lookup = |m: &Array2<T>, what, index: usize| {
        if index < m.nrows() {
            Ok(m.row(index).to_owned())
        } else {
            Err(FeatureError::FeatureLookupFailure { what, index, rows: m.nrows() })
        }
    };
    for (i, &v) in walk.simplices.iter().enumerate() {
        fwd.row_mut(i).assign(&lookup(feat_k, "simplex", v)?);
        if i == 0 {
            continue;
        }
        match walk.connections[i - 1] {
            Connection::Face(f) => {
                if let Some(m) = feat_faces.filter(|m| m.ncols() > 0) {
                    down.row_mut(i).assign(&lookup(m, "face", f)?);
                }
            }
            Connection::Coface(f) => {
                if let Some(m) = feat_cofaces.filter(|m| m.ncols() > 0) {
                    up.row_mut(i).assign(&lookup(m, "coface", f)?);
                }
            }
            Connection::Stay => {}
        }
    }
    Ok((fwd, down, up))
}

/// `l x s` revisit bits.
pub fn identity_block(walk: &Walk, window: usize) -> Array2<u8> {
    let l = walk.len();
    let mut out = Array2::zeros((l, window));
    for i in 0..l {
        for j in 0..window.min(i) {
            if walk.simplices[i] == walk.simplices[i - (j + 1)] {
                out[[i, j]] = 1;
            }
        }
    }
    out
}

fn shares_any(a: &[usize], b: &[usize]) -> bool {
    let (mut x, mut y) = (0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Whether distinct simplices `a` and `b` share a face.
pub fn lower_adjacent(c: &SimplicialComplex, a: SimplexId, b: SimplexId) -> bool {
    a != b && shares_any(c.face_indices(a), c.face_indices(b))
}

/// Whether distinct simplices `a` and `b` share a coface.
pub fn upper_adjacent(c: &SimplicialComplex, a: SimplexId, b: SimplexId) -> bool {
    a != b && shares_any(c.coface_indices(a), c.coface_indices(b))
}

/// `(A↓, A↑)`, each `l x (s - 1)`.
pub fn adjacency_blocks(walk: &Walk, c: &SimplicialComplex, window: usize) -> (Array2<u8>, Array2<u8>) {
    let l = walk.len();
    let width = window.saturating_sub(1);
    let mut lower = Array2::zeros((l, width));
    let mut upper = Array2::zeros((l, width));
    for i in 0..l {
        let cur = walk.simplex(i);
        for j in 0..width {
            let offset = j + 2;
            if offset > i {
                break;
            }
            let prev = walk.simplex(i - offset);
            if lower_adjacent(c, cur, prev) {
                lower[[i, j]] = 1;
            }
            if upper_adjacent(c, cur, prev) {
                upper[[i, j]] = 1;
            }
        }
    }
    (lower, upper)
}

/// The `[I | A↓ | A↑]` bits of one walk, `l x (3s - 2)`.
pub fn structural_block(walk: &Walk, c: &SimplicialComplex, window: usize) -> Array2<u8> {
    let id = identity_block(walk, window);
    let (lo, up) = adjacency_blocks(walk, c, window);
    ndarray::concatenate(ndarray::Axis(1), &[id.view(), lo.view(), up.view()]).expect("equal row counts")
}

/// Assembles the full walk feature matrix.
pub fn build_feature_matrix<T: Real>(
    walk_index: usize,
    walk: &Walk,
    c: &SimplicialComplex,
    feat_k: &Array2<T>,
    feat_faces: Option<&Array2<T>>,
    feat_cofaces: Option<&Array2<T>>,
    window: usize,
) -> Result<WalkFeatureMatrix<T>, FeatureError> {
    if window == 0 {
        return Err(FeatureError::ZeroWindow);
    }
    let (fwd, down, up) = feature_blocks(walk, feat_k, feat_faces, feat_cofaces)?;
    let bits = structural_block(walk, c, window).mapv(|b| T::from(b).unwrap());
    let data = ndarray::concatenate(ndarray::Axis(1), &[fwd.view(), down.view(), up.view(), bits.view()])
        .expect("equal row counts");
    let o1 = fwd.ncols();
    let o2 = o1 + down.ncols();
    let o3 = o2 + up.ncols();
    let o4 = o3 + window;
    let o5 = o4 + window - 1;
    debug_assert_eq!(data.ncols(), feature_width(fwd.ncols(), down.ncols(), up.ncols(), window));
    Ok(WalkFeatureMatrix {
        walk_index,
        data,
        block_offsets: [o1, o2, o3, o4, o5],
        window,
    })
}

/// Column names for CSV dumps: `f_k_*`, `face_*`, `coface_*`, `id_1..s`,
/// `adjL_2..s`, `adjU_2..s`.
pub fn column_names(d_k: usize, d_face: usize, d_coface: usize, window: usize) -> Vec<String> {
    let mut names = Vec::new();
    names.extend((0..d_k).map(|j| format!("f_k_{j}")));
    names.extend((0..d_face).map(|j| format!("face_{j}")));
    names.extend((0..d_coface).map(|j| format!("coface_{j}")));
    names.extend((1..=window).map(|o| format!("id_{o}")));
    names.extend((2..=window).map(|o| format!("adjL_{o}")));
    names.extend((2..=window).map(|o| format!("adjU_{o}")));
    names
}

/// CSV text of one matrix with a header row.
pub fn to_csv<T: Real>(m: &WalkFeatureMatrix<T>, names: &[String]) -> String {
    let mut out = names.join(",");
    out.push('\n');
    for row in m.data.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
