//! Uniform square lattice restricted to the interior of a domain.
//!
//! Lattice coordinates are integers in units of `h = leg / cells`, so every
//! fold reflection maps lattice points to lattice points exactly.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::{BlockId, Domain, Fold, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error(
        "grid spacing h={h} is incompatible with leg {leg}: leg/h = {ratio} is not a positive \
         integer, so images under reflection of a grid point in one block would not be grid points"
    )]
    Incompatible { h: f64, leg: f64, ratio: f64 },
    #[error("cells per leg must be positive, got {0}")]
    NoCells(i64),
}

/// Marker for a Dirichlet neighbor, eliminated from the unknowns.
pub const BOUNDARY: usize = usize::MAX;

/// A block incident to a grid node, with the node's reference coordinates
/// in lattice units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub block: BlockId,
    pub reference: [i64; 2],
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub domain: Domain,
    pub cells: i64,
    pub h: f64,
    /// `1/h²`, computed as `(cells/leg)²`.
    pub inv_h2: f64,
    pub points: Vec<[i64; 2]>,
    pub index: HashMap<[i64; 2], usize>,
    /// Right, left, up, down.
    pub neighbors: Vec<[usize; 4]>,
    incidence_start: Vec<usize>,
    incidences: Vec<Incidence>,
    /// Lattice bounding box `(min, max)`.
    pub bbox: ([i64; 2], [i64; 2]),
}

pub const NEIGHBOR_OFFSETS: [[i64; 2]; 4] = [[1, 0], [-1, 0], [0, 1], [0, -1]];

impl Grid {
    /// Builds the grid of spacing `h`; `leg / h` must be an integer.
    pub fn build(domain: &Domain, h: f64) -> Result<Grid, GridError> {
        let leg = domain.leg();
        let ratio = leg / h;
        let cells = ratio.round();
        if !(h > 0.0 && ratio.is_finite() && cells >= 1.0 && (ratio - cells).abs() <= 1e-9 * ratio)
        {
            return Err(GridError::Incompatible { h, leg, ratio });
        }
        Self::with_cells(domain, cells as i64)
    }

    pub fn with_cells(domain: &Domain, cells: i64) -> Result<Grid, GridError> {
        if cells < 1 {
            return Err(GridError::NoCells(cells));
        }
        let leg = domain.leg();
        let boundary: Vec<([i64; 2], [i64; 2])> = domain
            .boundary_edges()
            .into_iter()
            .map(|(p, q)| ([p[0] * cells, p[1] * cells], [q[0] * cells, q[1] * cells]))
            .collect();

        let mut incid: HashMap<[i64; 2], Vec<Incidence>> = HashMap::new();
        for b in &domain.blocks {
            for j in 0..=cells {
                for i in 0..=(cells - j) {
                    let p = b.placement.apply_lattice([i, j], cells);
                    if boundary.iter().any(|&(a, c)| on_segment(p, a, c)) {
                        continue;
                    }
                    incid.entry(p).or_default().push(Incidence {
                        block: b.id,
                        reference: [i, j],
                    });
                }
            }
        }
        let mut points: Vec<[i64; 2]> = incid.keys().copied().collect();
        points.sort_by_key(|p| (p[1], p[0]));
        let index: HashMap<[i64; 2], usize> =
            points.iter().enumerate().map(|(k, p)| (*p, k)).collect();
        let neighbors = points
            .iter()
            .map(|p| {
                NEIGHBOR_OFFSETS.map(|d| {
                    index
                        .get(&[p[0] + d[0], p[1] + d[1]])
                        .copied()
                        .unwrap_or(BOUNDARY)
                })
            })
            .collect();
        let mut incidence_start = Vec::with_capacity(points.len() + 1);
        let mut incidences = Vec::with_capacity(points.len() * 5 / 4);
        for p in &points {
            incidence_start.push(incidences.len());
            let mut list = incid.remove(p).unwrap();
            list.sort_by_key(|inc| inc.block);
            incidences.extend(list);
        }
        incidence_start.push(incidences.len());
        let (lo, hi) = domain.bounding_box();
        let inv = cells as f64 / leg;
        Ok(Grid {
            domain: domain.clone(),
            cells,
            h: leg / cells as f64,
            inv_h2: inv * inv,
            points,
            index,
            neighbors,
            incidence_start,
            incidences,
            bbox: (
                [lo[0] * cells, lo[1] * cells],
                [hi[0] * cells, hi[1] * cells],
            ),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Blocks containing node `k`, in id order. The first one is the owner
    /// under the lowest-id tie-break.
    pub fn incidences(&self, k: usize) -> &[Incidence] {
        &self.incidences[self.incidence_start[k]..self.incidence_start[k + 1]]
    }

    pub fn owner(&self, k: usize) -> BlockId {
        self.incidences(k)[0].block
    }

    pub fn coords(&self, k: usize) -> Point {
        let p = self.points[k];
        Point::new(p[0] as f64 * self.h, p[1] as f64 * self.h)
    }

    /// Reference-frame coordinates of a node in one of its blocks.
    pub fn reference_coords(&self, inc: &Incidence) -> Point {
        Point::new(
            inc.reference[0] as f64 * self.h,
            inc.reference[1] as f64 * self.h,
        )
    }

    /// Number of Dirichlet neighbors of node `k`.
    pub fn boundary_neighbors(&self, k: usize) -> usize {
        self.neighbors[k].iter().filter(|&&n| n == BOUNDARY).count()
    }

    /// Index of the node whose lattice coordinate in `block`'s reference
    /// frame is `r`, if it is an interior node.
    pub fn node_in_block(&self, block: BlockId, r: [i64; 2]) -> Option<usize> {
        let b = self.domain.block(block)?;
        self.index
            .get(&b.placement.apply_lattice(r, self.cells))
            .copied()
    }

    /// Text dump: header `nx ny h n_interior`, then `ix iy x y` per node.
    pub fn dump(&self) -> String {
        let (lo, hi) = self.bbox;
        let mut s = format!(
            "{} {} {} {}\n",
            hi[0] - lo[0] + 1,
            hi[1] - lo[1] + 1,
            self.h,
            self.len()
        );
        for (k, p) in self.points.iter().enumerate() {
            let c = self.coords(k);
            let _ = writeln!(s, "{} {} {} {}", p[0], p[1], c.x, c.y);
        }
        s
    }

    /// Pairs of nodes exchanged by reflection across `fold`.
    pub fn fold_permutation(&self, fold: &Fold) -> FoldPermutation {
        let perm = self
            .points
            .iter()
            .map(|p| {
                self.index
                    .get(&fold.line.reflect_lattice(*p, self.cells))
                    .copied()
            })
            .collect();
        FoldPermutation { fold: *fold, perm }
    }
}

fn on_segment(p: [i64; 2], a: [i64; 2], b: [i64; 2]) -> bool {
    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    cross == 0
        && p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Partial permutation of grid indices induced by a fold reflection,
/// defined on nodes whose mirror image is also an interior node.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPermutation {
    pub fold: Fold,
    pub perm: Vec<Option<usize>>,
}

impl FoldPermutation {
    pub fn get(&self, k: usize) -> Option<usize> {
        self.perm[k]
    }

    pub fn is_involution(&self) -> bool {
        self.perm
            .iter()
            .enumerate()
            .all(|(k, m)| m.is_none_or(|j| self.perm[j] == Some(k)))
    }

    pub fn defined_count(&self) -> usize {
        self.perm.iter().filter(|m| m.is_some()).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_gww_pair, FoldLine};

    #[test]
    fn square_half_spacing_has_one_point() {
        let sq = Domain::square(1.0).unwrap();
        let g = Grid::build(&sq, 0.5).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.points[0], [1, 1]);
        assert_eq!(g.neighbors[0], [BOUNDARY; 4]);
        // node on the diagonal, shared by both blocks
        assert_eq!(g.incidences(0).len(), 2);
    }

    #[test]
    fn incompatible_spacing_rejected() {
        let (a, _) = build_gww_pair(2.0).unwrap();
        let err = Grid::build(&a, 0.3).unwrap_err();
        assert!(err.to_string().contains("reflection"));
        assert!(Grid::build(&a, -1.0).is_err());
        assert!(Grid::build(&a, 0.25).is_ok());
    }

    #[test]
    fn counts_follow_pick() {
        // Pick: I = A - B/2 + 1 with A = 7n²/2 and B = 9n lattice steps
        let (a, b) = build_gww_pair(2.0).unwrap();
        for n in [1, 2, 3, 8, 17] {
            let ga = Grid::with_cells(&a, n).unwrap();
            let gb = Grid::with_cells(&b, n).unwrap();
            let interior = (7 * n * n - 9 * n + 2) / 2;
            assert_eq!(ga.len() as i64, interior);
            assert_eq!(gb.len(), ga.len());
        }
    }

    #[test]
    fn points_sorted_y_major() {
        let (a, _) = build_gww_pair(1.0).unwrap();
        let g = Grid::with_cells(&a, 6).unwrap();
        for w in g.points.windows(2) {
            assert!((w[0][1], w[0][0]) < (w[1][1], w[1][0]));
        }
    }

    #[test]
    fn fold_permutations_are_involutions() {
        let (a, _) = build_gww_pair(2.0).unwrap();
        let g = Grid::with_cells(&a, 8).unwrap();
        for f in &a.folds {
            let p = g.fold_permutation(f);
            assert!(p.is_involution());
            assert!(p.defined_count() > 0);
        }
    }

    #[test]
    fn axis_and_diagonal_mirror_examples() {
        let (a, _) = build_gww_pair(1.0).unwrap();
        let g = Grid::with_cells(&a, 4).unwrap();
        for f in &a.folds {
            let p = g.fold_permutation(f);
            for (k, m) in p.perm.iter().enumerate() {
                let Some(j) = m else { continue };
                let (x, y) = (g.points[k][0], g.points[k][1]);
                let q = g.points[*j];
                match f.line {
                    FoldLine::Vertical(c) => assert_eq!(q, [2 * 4 * c - x, y]),
                    FoldLine::Horizontal(c) => assert_eq!(q, [x, 2 * 4 * c - y]),
                    FoldLine::Diagonal(c) => assert_eq!(q, [y - 4 * c, x + 4 * c]),
                    FoldLine::AntiDiagonal(c) => assert_eq!(q, [4 * c - y, 4 * c - x]),
                }
            }
        }
    }
}
