//! Structured tensor-product grids over boxes (0,L_1)x..x(0,L_d), d in {1,2,3}.
//!
//! Cells are closed boxes of uniform size per axis. Flat indices are
//! lexicographic with axis 0 fastest, so assembled matrices are reproducible
//! bit for bit. Unused axes (for dim < 3) are padded with one cell of unit
//! extent and never enumerated.

use crate::error::{Error, Result};

/// Which side of a cell a face sits on, along some axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    /// Outward sign: -1 for the minus side, +1 for the plus side.
    pub fn sign(self) -> f64 {
        match self {
            Side::Minus => -1.0,
            Side::Plus => 1.0,
        }
    }
}

/// A cell face, identified by the owning cell, an axis, and a side.
///
/// An interior face has two labels: `(cell, axis, Plus)` and
/// `(cell + e_axis, axis, Minus)` are the same geometric face. The canonical
/// owner is the lower cell (the `Plus` label).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FaceId {
    pub cell: [usize; 3],
    pub axis: usize,
    pub side: Side,
}

/// Uniform structured grid with per-axis counts and spacings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    counts: [usize; 3],
    lengths: [f64; 3],
    spacings: [f64; 3],
}

impl Grid {
    /// Build a grid over (0,lengths[0]) x .. x (0,lengths[dim-1]) with
    /// `counts[j]` uniform cells along axis j.
    pub fn new(dim: usize, lengths: &[f64], counts: &[usize]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if lengths.len() != dim || counts.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} lengths and counts, got {} and {}",
                lengths.len(),
                counts.len()
            )));
        }
        let mut l = [1.0f64; 3];
        let mut n = [1usize; 3];
        let mut h = [1.0f64; 3];
        for j in 0..dim {
            if !(lengths[j].is_finite() && lengths[j] > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "length along axis {j} must be positive and finite, got {}",
                    lengths[j]
                )));
            }
            if counts[j] == 0 {
                return Err(Error::InvalidGrid(format!(
                    "cell count along axis {j} must be at least 1"
                )));
            }
            l[j] = lengths[j];
            n[j] = counts[j];
            h[j] = lengths[j] / counts[j] as f64;
        }
        Ok(Grid {
            dim,
            counts: n,
            lengths: l,
            spacings: h,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    pub fn spacings(&self) -> [f64; 3] {
        self.spacings
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacings[axis]
    }

    /// Total number of cells.
    pub fn n_cells(&self) -> usize {
        self.counts[0] * self.counts[1] * self.counts[2]
    }

    /// Volume |K| of one cell (uniform over the grid).
    pub fn cell_volume(&self) -> f64 {
        self.spacings[0] * self.spacings[1] * self.spacings[2]
    }

    /// Volume of the whole domain.
    pub fn domain_volume(&self) -> f64 {
        self.lengths[0] * self.lengths[1] * self.lengths[2]
    }

    /// Flat index of a multi-index, axis 0 fastest.
    #[inline]
    pub fn flat(&self, idx: [usize; 3]) -> usize {
        debug_assert!(idx[0] < self.counts[0]);
        debug_assert!(idx[1] < self.counts[1]);
        debug_assert!(idx[2] < self.counts[2]);
        idx[0] + self.counts[0] * (idx[1] + self.counts[1] * idx[2])
    }

    /// Multi-index of a flat index (inverse of [`Grid::flat`]).
    #[inline]
    pub fn multi(&self, flat: usize) -> [usize; 3] {
        debug_assert!(flat < self.n_cells());
        let i = flat % self.counts[0];
        let rest = flat / self.counts[0];
        let j = rest % self.counts[1];
        let k = rest / self.counts[1];
        [i, j, k]
    }

    /// Neighbor of `idx` one cell over along `axis` on `side`, if inside the grid.
    #[inline]
    pub fn neighbor(&self, idx: [usize; 3], axis: usize, side: Side) -> Option<[usize; 3]> {
        let mut out = idx;
        match side {
            Side::Minus => {
                if idx[axis] == 0 {
                    return None;
                }
                out[axis] -= 1;
            }
            Side::Plus => {
                if idx[axis] + 1 >= self.counts[axis] {
                    return None;
                }
                out[axis] += 1;
            }
        }
        Some(out)
    }

    /// Midpoint of cell `idx`.
    pub fn cell_center(&self, idx: [usize; 3]) -> [f64; 3] {
        let mut x = [0.0; 3];
        for j in 0..self.dim {
            x[j] = (idx[j] as f64 + 0.5) * self.spacings[j];
        }
        x
    }

    /// Geometric center of a face.
    pub fn face_center(&self, face: &FaceId) -> [f64; 3] {
        let mut x = self.cell_center(face.cell);
        x[face.axis] = match face.side {
            Side::Minus => face.cell[face.axis] as f64 * self.spacings[face.axis],
            Side::Plus => (face.cell[face.axis] + 1) as f64 * self.spacings[face.axis],
        };
        x
    }

    /// True if the face `(idx, axis, side)` lies on the domain boundary.
    #[inline]
    pub fn is_boundary_face(&self, idx: [usize; 3], axis: usize, side: Side) -> bool {
        match side {
            Side::Minus => idx[axis] == 0,
            Side::Plus => idx[axis] + 1 == self.counts[axis],
        }
    }

    /// All faces on the boundary plane selected by `axis` and `side`,
    /// in lexicographic cell order. There are prod_{k != axis} N_k of them.
    pub fn boundary_faces(&self, axis: usize, side: Side) -> Vec<FaceId> {
        assert!(axis < self.dim, "axis {axis} out of range for dim {}", self.dim);
        let fixed = match side {
            Side::Minus => 0,
            Side::Plus => self.counts[axis] - 1,
        };
        let mut out = Vec::new();
        for flat in 0..self.n_cells() {
            let idx = self.multi(flat);
            if idx[axis] == fixed {
                out.push(FaceId {
                    cell: idx,
                    axis,
                    side,
                });
            }
        }
        out
    }

    /// Iterate all cells in flat order.
    pub fn cells(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        (0..self.n_cells()).map(move |f| self.multi(f))
    }
}

/// Canonicalize a face label: interior minus faces are relabeled as the plus
/// face of the lower neighbor; boundary faces are already canonical.
pub fn canonical_face(grid: &Grid, face: FaceId) -> FaceId {
    match face.side {
        Side::Plus => face,
        Side::Minus => match grid.neighbor(face.cell, face.axis, Side::Minus) {
            Some(lower) => FaceId {
                cell: lower,
                axis: face.axis,
                side: Side::Plus,
            },
            None => face,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_basic_grids() {
        let g = Grid::new(1, &[1.0], &[2]).unwrap();
        assert_eq!(g.spacing(0), 0.5);
        assert_eq!(g.cell_volume(), 0.5);

        let g = Grid::new(3, &[1.0, 1.0, 1.0], &[30, 30, 30]).unwrap();
        assert!((g.spacing(0) - 1.0 / 30.0).abs() < 1e-16);
        assert!((g.cell_volume() - 1.0 / 27000.0).abs() < 1e-18);

        let g = Grid::new(2, &[2.0, 1.0], &[4, 2]).unwrap();
        assert_eq!(g.spacings()[0], 0.5);
        assert_eq!(g.spacings()[1], 0.5);
        assert_eq!(g.cell_volume(), 0.25);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Grid::new(0, &[], &[]).is_err());
        assert!(Grid::new(4, &[1.0; 4], &[2; 4]).is_err());
        assert!(Grid::new(1, &[-1.0], &[2]).is_err());
        assert!(Grid::new(1, &[0.0], &[2]).is_err());
        assert!(Grid::new(1, &[1.0], &[0]).is_err());
        assert!(Grid::new(2, &[1.0], &[2, 2]).is_err());
    }

    #[test]
    fn spacing_times_count_recovers_length() {
        // h_j * N_j == L_j up to a few ulp
        for (len, n) in [(1.0, 7usize), (2.5, 13), (0.1, 30), (3.0, 64)] {
            let g = Grid::new(1, &[len], &[n]).unwrap();
            let back = g.spacing(0) * n as f64;
            assert!((back - len).abs() <= 4.0 * f64::EPSILON * len.abs());
        }
    }

    #[test]
    fn flat_index_round_trip() {
        let g = Grid::new(3, &[1.0, 2.0, 3.0], &[3, 4, 5]).unwrap();
        for f in 0..g.n_cells() {
            assert_eq!(g.flat(g.multi(f)), f);
        }
        // axis 0 fastest
        assert_eq!(g.flat([1, 0, 0]), 1);
        assert_eq!(g.flat([0, 1, 0]), 3);
        assert_eq!(g.flat([0, 0, 1]), 12);
    }

    #[test]
    fn cell_volumes_sum_to_domain_volume() {
        let g = Grid::new(3, &[1.0, 2.0, 0.7], &[11, 5, 13]).unwrap();
        let total = g.cell_volume() * g.n_cells() as f64;
        let exact = g.domain_volume();
        assert!((total - exact).abs() <= 1e-13 * exact);
    }

    #[test]
    fn boundary_face_counts() {
        // 1D, N=[3]
        let g = Grid::new(1, &[1.0], &[3]).unwrap();
        let faces = g.boundary_faces(0, Side::Minus);
        assert_eq!(faces.len(), 1);
        assert_eq!(faces[0].cell, [0, 0, 0]);

        // 2D, N=[4,2], axis 0 plus side: 2 faces at cell index 3 along axis 0
        let g = Grid::new(2, &[2.0, 1.0], &[4, 2]).unwrap();
        let faces = g.boundary_faces(0, Side::Plus);
        assert_eq!(faces.len(), 2);
        assert!(faces.iter().all(|f| f.cell[0] == 3));

        // 3D, 30^3, axis 1 minus: 30*30 faces
        let g = Grid::new(3, &[1.0; 3], &[30; 3]).unwrap();
        assert_eq!(g.boundary_faces(1, Side::Minus).len(), 900);
    }

    #[test]
    fn face_centers_and_canonicalization() {
        let g = Grid::new(1, &[1.0], &[2]).unwrap();
        let f = FaceId {
            cell: [0, 0, 0],
            axis: 0,
            side: Side::Plus,
        };
        assert_eq!(g.face_center(&f)[0], 0.5);

        let twin = FaceId {
            cell: [1, 0, 0],
            axis: 0,
            side: Side::Minus,
        };
        assert_eq!(canonical_face(&g, twin), f);
        // boundary minus face is its own canonical label
        let b = FaceId {
            cell: [0, 0, 0],
            axis: 0,
            side: Side::Minus,
        };
        assert_eq!(canonical_face(&g, b), b);
    }
}
