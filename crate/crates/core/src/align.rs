//! Orthogonal Procrustes alignment of the domain space onto the semantic space.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::embed_store::{find_anchors, AnchorMap, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::io::{create_writer, open_reader};

#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMap {
    /// `d × s`; domain row vectors map to `row · q`.
    pub q: DMatrix<f64>,
    pub anchors: usize,
    /// ‖X·Q − Y‖_F on the fitting rows.
    pub residual: f64,
}

impl OrthogonalMap {
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        assert_eq!(row.len(), self.q.nrows());
        (0..self.q.ncols())
            .map(|j| row.iter().enumerate().map(|(i, x)| x * self.q[(i, j)]).sum())
            .collect()
    }

    /// Max-abs deviation of `QᵀQ` from the identity.
    pub fn orthogonality_error(&self) -> f64 {
        let qtq = self.q.transpose() * &self.q;
        let id = DMatrix::<f64>::identity(qtq.nrows(), qtq.ncols());
        (qtq - id).amax()
    }

    /// Plain text: a `rows cols` header, then one matrix row per line.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut w = create_writer(path)?;
        let mut body = format!("{} {}\n", self.q.nrows(), self.q.ncols());
        for i in 0..self.q.nrows() {
            let row: Vec<String> = (0..self.q.ncols()).map(|j| self.q[(i, j)].to_string()).collect();
            body.push_str(&row.join(" "));
            body.push('\n');
        }
        w.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a matrix written by [`OrthogonalMap::write_to`]; diagnostics are
    /// not stored in the file and come back as zero.
    pub fn read_from(path: &Path) -> Result<Self> {
        let mut lines = open_reader(path)?.lines();
        let mut next = |n: usize| -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::format(path.display().to_string(), n, "unexpected end of file"))?
                .map_err(|e| Error::io(path, e))
        };
        let header = next(1)?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(path.display().to_string(), 1, "header must be `rows cols`"))?;
        let [rows, cols] = dims[..] else {
            return Err(Error::format(path.display().to_string(), 1, "header must be `rows cols`"));
        };
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            let line = next(i + 2)?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::format(path.display().to_string(), i + 2, "invalid number"))?;
            if vals.len() != cols {
                return Err(Error::format(path.display().to_string(), i + 2, format!("expected {cols} values, found {}", vals.len())));
            }
            data.extend(vals);
        }
        Ok(OrthogonalMap {
            q: DMatrix::from_row_slice(rows, cols, &data),
            anchors: 0,
            residual: 0.0,
        })
    }
}

/// `Q = argmin ‖X·Q − Y‖_F` over matrices with orthonormal columns, from the
/// SVD `XᵀY = UΣVᵀ`, `Q = U·Vᵀ`.
pub fn fit_alignment(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<OrthogonalMap> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: y.nrows(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::NoAnchors);
    }
    if x.nrows() < x.ncols() {
        log::warn!(
            "only {} anchor rows for dimension {}; the alignment is rank-deficient",
            x.nrows(),
            x.ncols()
        );
    }
    let m = x.transpose() * y;
    let svd = m.svd(true, true);
    let q = svd.u.expect("u requested") * svd.v_t.expect("v_t requested");
    let residual = (x * &q - y).norm();
    Ok(OrthogonalMap {
        q,
        anchors: x.nrows(),
        residual,
    })
}

/// Anchor rows as `(X, Y)` = (domain, semantic) matrices in anchor order.
pub fn anchor_matrices(
    semantic: &EmbeddingMatrix,
    domain: &EmbeddingMatrix,
    anchors: &AnchorMap,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = anchors.len();
    let x = DMatrix::from_fn(n, domain.dim(), |r, c| domain.row(anchors.pairs[r].1)[c]);
    let y = DMatrix::from_fn(n, semantic.dim(), |r, c| semantic.row(anchors.pairs[r].0)[c]);
    (x, y)
}

/// Aligned domain vectors for the domain tokens missing from `semantic`.
pub fn mesh_baseline(
    semantic: &EmbeddingMatrix,
    domain: &EmbeddingMatrix,
    anchors: &AnchorMap,
) -> Result<(EmbeddingMatrix, OrthogonalMap)> {
    if anchors.is_empty() {
        return Err(Error::NoAnchors);
    }
    let (x, y) = anchor_matrices(semantic, domain, anchors);
    let map = fit_alignment(&x, &y)?;
    let rows = domain
        .tokens()
        .iter()
        .zip(domain.rows())
        .filter(|(tok, _)| !semantic.contains(tok))
        .map(|(tok, row)| (tok.clone(), map.apply(row)));
    let out = EmbeddingMatrix::from_rows(semantic.dim(), rows)?;
    Ok((out, map))
}

/// [`mesh_baseline`] with anchors found by exact token match.
pub fn align_baseline(semantic: &EmbeddingMatrix, domain: &EmbeddingMatrix) -> Result<(EmbeddingMatrix, OrthogonalMap)> {
    mesh_baseline(semantic, domain, &find_anchors(semantic, domain))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_when_spaces_agree() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 3.0, -2.0]);
        let m = fit_alignment(&x, &x).unwrap();
        assert!((m.q.clone() - DMatrix::identity(2, 2)).amax() < 1e-12);
        assert!(m.residual < 1e-12);
    }

    #[test]
    fn recovers_plane_rotation() {
        let (s, c) = 0.3f64.sin_cos();
        let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.2, 1.0, -1.0, 0.7]);
        let m = fit_alignment(&x, &(&x * &r)).unwrap();
        assert!((m.q - r).amax() < 1e-12);
    }

    #[test]
    fn reflections_are_allowed() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let y = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let m = fit_alignment(&x, &y).unwrap();
        assert!((m.q.determinant() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn baseline_maps_only_oov_tokens() {
        let sem = EmbeddingMatrix::from_rows(2, [("a", vec![0.0, 1.0]), ("b", vec![-1.0, 0.0])]).unwrap();
        // domain is sem rotated by +90°
        let dom = EmbeddingMatrix::from_rows(
            2,
            [("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0]), ("c", vec![2.0, 3.0])],
        )
        .unwrap();
        let (out, map) = align_baseline(&sem, &dom).unwrap();
        assert_eq!(out.tokens(), ["c"]);
        assert_eq!(out.row(0), map.apply(&[2.0, 3.0]).as_slice());
        assert!((out.row(0)[0] + 3.0).abs() < 1e-12 && (out.row(0)[1] - 2.0).abs() < 1e-12);

        let all = EmbeddingMatrix::from_rows(2, [("a", vec![1.0, 0.0])]).unwrap();
        assert!(align_baseline(&sem, &all).unwrap().0.is_empty());
    }

    #[test]
    fn map_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.txt");
        let m = OrthogonalMap {
            q: DMatrix::from_row_slice(2, 3, &[0.1, -0.25, 1.0, 3.5e-9, 0.0, -1.0]),
            anchors: 4,
            residual: 0.5,
        };
        m.write_to(&p).unwrap();
        assert_eq!(OrthogonalMap::read_from(&p).unwrap().q, m.q);
    }
}
