//! Transplantation between the two domains of an isospectral pair.
//!
//! A transplanted grid function on domain B is, in every block `i` of B, a
//! signed sum of the restrictions of a function on A to blocks `j`, each read
//! at the same reference coordinates. The 7×7 integer coefficient matrix is
//! derived by solving the intertwining equation `𝒯 L_A = L_B 𝒯` exactly in
//! integer arithmetic on a coarse grid.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigen::Spectrum;
use crate::geometry::{BlockId, Domain};
use crate::grid::{Grid, GridError, BOUNDARY};
use crate::operator::SparseSymOperator;

pub type Coeffs = [[i64; 7]; 7];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransplantError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("coarse grid has {0} points; derivation is limited to {MAX_COARSE_POINTS}")]
    TooFine(usize),
    #[error(
        "no invertible {{-1, 0, 1}} coefficient matrix solves the intertwining equation \
         (null space dimension {0})"
    )]
    NoIntegerSolution(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("grids use different cell counts: {0} vs {1}")]
    CellMismatch(i64, i64),
}

pub const MAX_COARSE_POINTS: usize = 3000;

/// The map from `GWW_A` to `GWW_B` returned by [`derive_transplantation`],
/// rows and columns in block order A..G.
pub const GWW_TRANSPLANT: Coeffs = [
    [1, 0, 1, 0, 1, 0, 0],
    [0, 1, 0, 0, -1, 1, 0],
    [1, 0, 0, -1, 0, -1, 0],
    [0, 0, -1, 0, 0, 1, 1],
    [1, -1, 0, 0, 0, 0, -1],
    [0, 0, 0, 1, -1, 0, 1],
    [0, 1, -1, 1, 0, 0, 0],
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransplantMap {
    /// Rows: blocks of the target domain; columns: blocks of the source.
    pub coeffs: Coeffs,
    /// Dimension of the integer solution space the map was chosen from.
    pub solution_dim: usize,
}

impl TransplantMap {
    pub fn identity() -> TransplantMap {
        let mut coeffs = [[0; 7]; 7];
        for (i, row) in coeffs.iter_mut().enumerate() {
            row[i] = 1;
        }
        TransplantMap {
            coeffs,
            solution_dim: 1,
        }
    }

    pub fn nonzeros_per_row(&self) -> [usize; 7] {
        self.coeffs
            .map(|row| row.iter().filter(|&&c| c != 0).count())
    }

    pub fn determinant(&self) -> i128 {
        let m: Vec<Vec<i128>> = self
            .coeffs
            .iter()
            .map(|r| r.iter().map(|&c| c as i128).collect())
            .collect();
        bareiss_det(m)
    }

    /// Entries joining blocks of different parity class.
    pub fn cross_class_entries(&self, target: &Domain, source: &Domain) -> Vec<(BlockId, BlockId, i64)> {
        let mut out = Vec::new();
        for (i, row) in self.coeffs.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                let pi = target.blocks[i].parity;
                let pj = source.blocks[j].parity;
                if c != 0 && pi != pj {
                    out.push((target.blocks[i].id, source.blocks[j].id, c));
                }
            }
        }
        out
    }

    /// True when every nonzero entry is `+1` between blocks of equal parity
    /// and `-1` between blocks of opposite parity: a copy taken from the other
    /// class enters mirrored, and a Dirichlet mirror image changes sign.
    pub fn class_signs_consistent(&self, target: &Domain, source: &Domain) -> bool {
        self.coeffs.iter().enumerate().all(|(i, row)| {
            row.iter().enumerate().all(|(j, &c)| {
                let same = target.blocks[i].parity == source.blocks[j].parity;
                c == 0 || c == if same { 1 } else { -1 }
            })
        })
    }

    /// Serialized as seven whitespace-separated rows.
    pub fn to_text(&self) -> String {
        self.coeffs
            .iter()
            .map(|r| {
                r.iter()
                    .map(|c| format!("{c:>2}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Grid-level matrix for grids of equal cell count.
    pub fn promote(&self, grid_a: &Grid, grid_b: &Grid) -> Result<GridTransplant, TransplantError> {
        if grid_a.cells != grid_b.cells {
            return Err(TransplantError::CellMismatch(grid_a.cells, grid_b.cells));
        }
        let rows = (0..grid_b.len())
            .map(|k| {
                let inc = grid_b.incidences(k)[0];
                let i = inc.block.index();
                let mut row: Vec<(usize, i64)> = BlockId::ALL
                    .iter()
                    .filter(|j| self.coeffs[i][j.index()] != 0)
                    .filter_map(|&j| {
                        grid_a
                            .node_in_block(j, inc.reference)
                            .map(|a| (a, self.coeffs[i][j.index()]))
                    })
                    .collect();
                row.sort_by_key(|e| e.0);
                row
            })
            .collect();
        Ok(GridTransplant {
            n_source: grid_a.len(),
            rows,
        })
    }
}

/// Sparse integer matrix `𝒯` acting on grid vectors of the source domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTransplant {
    pub n_source: usize,
    pub rows: Vec<Vec<(usize, i64)>>,
}

impl GridTransplant {
    pub fn n_target(&self) -> usize {
        self.rows.len()
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(a, c)| c as f64 * u[a]).sum())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntertwiningReport {
    /// Largest absolute entry of `𝒯 H_A - H_B 𝒯`, each entry summed exactly.
    pub residual: f64,
    pub exact: bool,
    pub nonzero_entries: usize,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Adds `x` to a nonoverlapping expansion, keeping it exact.
fn grow_expansion(e: &mut Vec<f64>, x: f64) {
    let mut q = x;
    let mut out = Vec::with_capacity(e.len() + 1);
    for &c in e.iter() {
        let (s, err) = two_sum(q, c);
        if err != 0.0 {
            out.push(err);
        }
        q = s;
    }
    if q != 0.0 {
        out.push(q);
    }
    *e = out;
}

/// Exact sum of `c · v` terms, rounded once at the end.
fn exact_sum(terms: &[(i64, f64)]) -> f64 {
    let mut e = Vec::new();
    for &(c, v) in terms {
        let cf = c as f64;
        let p = cf * v;
        let err = cf.mul_add(v, -p);
        grow_expansion(&mut e, p);
        if err != 0.0 {
            grow_expansion(&mut e, err);
        }
    }
    e.iter().sum()
}

/// Evaluates `𝒯 H_A - H_B 𝒯` entry by entry with exact summation.
pub fn verify_intertwining(
    map: &GridTransplant,
    op_a: &SparseSymOperator,
    op_b: &SparseSymOperator,
) -> Result<IntertwiningReport, TransplantError> {
    if op_a.n() != map.n_source {
        return Err(TransplantError::Dimension(op_a.n(), map.n_source));
    }
    if op_b.n() != map.n_target() {
        return Err(TransplantError::Dimension(op_b.n(), map.n_target()));
    }
    let mut residual = 0.0f64;
    let mut nonzero = 0usize;
    let mut terms: HashMap<usize, Vec<(i64, f64)>> = HashMap::new();
    for k in 0..map.n_target() {
        terms.clear();
        for &(a, c) in &map.rows[k] {
            terms.entry(a).or_default().push((c, op_a.diagonal()[a]));
            for (m, v) in op_a.row(a) {
                terms.entry(m).or_default().push((c, v));
            }
        }
        let mut sub = |kk: usize, w: f64| {
            for &(a, c) in &map.rows[kk] {
                terms.entry(a).or_default().push((-c, w));
            }
        };
        sub(k, op_b.diagonal()[k]);
        for (kk, w) in op_b.row(k) {
            sub(kk, w);
        }
        for t in terms.values() {
            let s = exact_sum(t);
            if s != 0.0 {
                nonzero += 1;
                residual = residual.max(s.abs());
            }
        }
    }
    Ok(IntertwiningReport {
        residual,
        exact: nonzero == 0,
        nonzero_entries: nonzero,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumComparison {
    pub max_abs_diff: f64,
    pub max_rel_diff: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("spectra have different lengths: {0} vs {1}")]
pub struct LengthMismatch(pub usize, pub usize);

pub fn compare_spectra(a: &Spectrum, b: &Spectrum) -> Result<SpectrumComparison, LengthMismatch> {
    compare_values(&a.eigenvalues, &b.eigenvalues)
}

pub fn compare_values(a: &[f64], b: &[f64]) -> Result<SpectrumComparison, LengthMismatch> {
    if a.len() != b.len() {
        return Err(LengthMismatch(a.len(), b.len()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let (mut abs, mut rel) = (0.0f64, 0.0f64);
    for (x, y) in sa.iter().zip(&sb) {
        let d = (x - y).abs();
        abs = abs.max(d);
        let scale = x.abs().max(y.abs());
        if scale > 0.0 {
            rel = rel.max(d / scale);
        }
    }
    Ok(SpectrumComparison {
        max_abs_diff: abs,
        max_rel_diff: rel,
    })
}

/// Derives the coefficient matrix from the homogeneous Laplacians on the
/// grid of `cells` cells per leg.
pub fn derive_transplantation(
    domain_a: &Domain,
    domain_b: &Domain,
    cells: i64,
) -> Result<TransplantMap, TransplantError> {
    let basis = intertwiner_basis(domain_a, domain_b, cells, &[])?;
    select_map(&basis).ok_or(TransplantError::NoIntegerSolution(basis.len()))
}

/// Integer basis of all coefficient matrices satisfying the intertwining
/// equation, with the listed entries additionally forced to zero.
pub fn intertwiner_basis(
    domain_a: &Domain,
    domain_b: &Domain,
    cells: i64,
    forced_zero: &[(BlockId, BlockId)],
) -> Result<Vec<Coeffs>, TransplantError> {
    let ga = Grid::with_cells(domain_a, cells)?;
    let gb = Grid::with_cells(domain_b, cells)?;
    if ga.len() > MAX_COARSE_POINTS {
        return Err(TransplantError::TooFine(ga.len()));
    }
    // Each unknown (i, j) contributes 𝒯_ij L_A - L_B 𝒯_ij, with L = h²(-Δ_h).
    let mut equations: HashMap<(usize, usize), Vec<i128>> = HashMap::new();
    let unknowns = 49;
    let mut add = |key: (usize, usize), u: usize, c: i128| {
        equations.entry(key).or_insert_with(|| vec![0; unknowns])[u] += c;
    };
    let source_node = |k: usize, j: BlockId| -> Option<usize> {
        let inc = gb.incidences(k)[0];
        ga.node_in_block(j, inc.reference)
    };
    for k in 0..gb.len() {
        let i = gb.owner(k).index();
        for j in BlockId::ALL {
            let u = i * 7 + j.index();
            if let Some(a) = source_node(k, j) {
                add((k, a), u, 4);
                for &m in &ga.neighbors[a] {
                    if m != BOUNDARY {
                        add((k, m), u, -1);
                    }
                }
            }
        }
        let mut sub = |kk: usize, w: i128| {
            let ii = gb.owner(kk).index();
            for j in BlockId::ALL {
                if let Some(a) = source_node(kk, j) {
                    add((k, a), ii * 7 + j.index(), -w);
                }
            }
        };
        sub(k, 4);
        for &kk in &gb.neighbors[k] {
            if kk != BOUNDARY {
                sub(kk, -1);
            }
        }
    }
    let mut rows: Vec<Vec<i128>> = equations
        .into_values()
        .filter(|r| r.iter().any(|&c| c != 0))
        .collect();
    rows.sort();
    for (bi, bj) in forced_zero {
        let mut r = vec![0; unknowns];
        r[bi.index() * 7 + bj.index()] = 1;
        rows.push(r);
    }
    Ok(integer_null_space(rows, unknowns)
        .into_iter()
        .map(|v| {
            let mut c = [[0i64; 7]; 7];
            for (u, x) in v.into_iter().enumerate() {
                c[u / 7][u % 7] = x as i64;
            }
            c
        })
        .collect())
}

/// Whether some nonzero intertwiner has `T[i][j] = 0` for every pair of
/// blocks in different parity classes.
pub fn class_block_structure_attainable(
    domain_a: &Domain,
    domain_b: &Domain,
    cells: i64,
) -> Result<bool, TransplantError> {
    let cross: Vec<(BlockId, BlockId)> = domain_b
        .blocks
        .iter()
        .flat_map(|bi| {
            domain_a
                .blocks
                .iter()
                .filter(move |bj| bj.parity != bi.parity)
                .map(move |bj| (bi.id, bj.id))
        })
        .collect();
    Ok(!intertwiner_basis(domain_a, domain_b, cells, &cross)?.is_empty())
}

/// Picks the invertible {-1, 0, 1} combination of the basis with the fewest
/// nonzeros, scanning small integer coefficient vectors. The sign is fixed
/// so that the first nonzero entry is positive.
fn select_map(basis: &[Coeffs]) -> Option<TransplantMap> {
    let d = basis.len();
    if d == 0 || d > 4 {
        return None;
    }
    let r: i64 = if d <= 2 { 4 } else { 2 };
    let mut best: Option<(usize, Coeffs)> = None;
    let mut coef = vec![-r; d];
    loop {
        if coef.iter().any(|&c| c != 0) {
            let mut m = [[0i64; 7]; 7];
            for (b, &c) in basis.iter().zip(&coef) {
                for i in 0..7 {
                    for j in 0..7 {
                        m[i][j] += c * b[i][j];
                    }
                }
            }
            let g = m.iter().flatten().fold(0i64, |g, &x| gcd(g, x.abs()));
            if g > 0 {
                m.iter_mut().flatten().for_each(|x| *x /= g);
                let first = m.iter().flatten().copied().find(|&x| x != 0).unwrap();
                if first < 0 {
                    m.iter_mut().flatten().for_each(|x| *x = -*x);
                }
                let unit = m.iter().flatten().all(|x| x.abs() <= 1);
                let nnz = m.iter().flatten().filter(|&&x| x != 0).count();
                let candidate = TransplantMap {
                    coeffs: m,
                    solution_dim: d,
                };
                if unit
                    && candidate.determinant() != 0
                    && best.as_ref().is_none_or(|(n, bm)| (nnz, m) < (*n, *bm))
                {
                    best = Some((nnz, m));
                }
            }
        }
        let mut p = 0;
        loop {
            if p == d {
                return best.map(|(_, coeffs)| TransplantMap {
                    coeffs,
                    solution_dim: d,
                });
            }
            coef[p] += 1;
            if coef[p] <= r {
                break;
            }
            coef[p] = -r;
            p += 1;
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn gcd128(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd128(b, a % b)
    }
}

fn normalize(r: &mut [i128]) {
    let g = r.iter().fold(0, |g, &x| gcd128(g, x));
    if g > 1 {
        r.iter_mut().for_each(|x| *x /= g);
    }
}

/// Integer basis of `{x : R x = 0}` by fraction-free elimination.
pub fn integer_null_space(rows: Vec<Vec<i128>>, n: usize) -> Vec<Vec<i128>> {
    // echelon rows keyed by pivot column
    let mut pivots: Vec<(usize, Vec<i128>)> = Vec::new();
    for mut r in rows {
        for (pc, pr) in &pivots {
            if r[*pc] != 0 {
                let (a, b) = (pr[*pc], r[*pc]);
                let g = gcd128(a, b);
                let (fa, fb) = (a / g, b / g);
                for (x, y) in r.iter_mut().zip(pr) {
                    *x = *x * fa - *y * fb;
                }
                normalize(&mut r);
            }
        }
        if let Some(pc) = r.iter().position(|&x| x != 0) {
            // keep earlier pivot rows reduced in the new pivot column
            for (_, pr) in pivots.iter_mut() {
                if pr[pc] != 0 {
                    let (a, b) = (r[pc], pr[pc]);
                    let g = gcd128(a, b);
                    let (fa, fb) = (a / g, b / g);
                    for (x, y) in pr.iter_mut().zip(&r) {
                        *x = *x * fa - *y * fb;
                    }
                    normalize(pr);
                }
            }
            pivots.push((pc, r));
        }
    }
    let pivot_cols: Vec<usize> = pivots.iter().map(|p| p.0).collect();
    let free: Vec<usize> = (0..n).filter(|c| !pivot_cols.contains(c)).collect();
    let lcm = pivots
        .iter()
        .fold(1i128, |l, (pc, r)| l / gcd128(l, r[*pc]) * r[*pc].abs());
    free.iter()
        .map(|&f| {
            let mut x = vec![0i128; n];
            x[f] = lcm;
            for (pc, r) in &pivots {
                x[*pc] = -r[f] * (lcm / r[*pc]);
            }
            normalize(&mut x);
            x
        })
        .collect()
}

fn bareiss_det(mut m: Vec<Vec<i128>>) -> i128 {
    let n = m.len();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n {
        if m[k][k] == 0 {
            match (k + 1..n).find(|&r| m[r][k] != 0) {
                Some(r) => {
                    m.swap(k, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
            }
        }
        prev = m[k][k];
    }
    sign * m[n - 1][n - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_gww_pair;
    use crate::operator::assemble_laplacian;

    #[test]
    fn null_space_of_small_system() {
        // x0 + x1 + x2 = 0, x1 - x2 = 0  →  (-2, 1, 1)
        let ns = integer_null_space(vec![vec![1, 1, 1], vec![0, 1, -1]], 3);
        assert_eq!(ns.len(), 1);
        let v = &ns[0];
        assert_eq!(v[0] + v[1] + v[2], 0);
        assert_eq!(v[1], v[2]);
        assert_eq!(v[0].abs(), 2);
    }

    #[test]
    fn determinant() {
        let id = TransplantMap::identity();
        assert_eq!(id.determinant(), 1);
        let mut m = id.clone();
        m.coeffs[0] = m.coeffs[1];
        assert_eq!(m.determinant(), 0);
    }

    #[test]
    fn exact_sum_cancels() {
        assert_eq!(exact_sum(&[(1, 1e16), (1, 1.0), (-1, 1e16), (-1, 1.0)]), 0.0);
        // the doubles nearest 0.1, 0.2, 0.3 satisfy 0.1 + 0.2 - 0.3 = 2^-55
        assert_eq!(exact_sum(&[(1, 0.1), (1, 0.2), (-1, 0.3)]), 2f64.powi(-55));
        assert_eq!(exact_sum(&[(3, 0.1), (-1, 0.3)]), {
            let p = 3.0 * 0.1;
            (p - 0.3) + 3f64.mul_add(0.1, -p)
        });
        assert_ne!(exact_sum(&[(1, 0.1), (1, 0.2), (-1, 0.3)]), 0.0);
    }

    #[test]
    fn self_map_is_identity() {
        let (a, _) = build_gww_pair(1.0).unwrap();
        let t = derive_transplantation(&a, &a, 4).unwrap();
        assert_eq!(t.coeffs, TransplantMap::identity().coeffs);
    }

    #[test]
    fn identity_intertwines_a_with_itself() {
        let (a, _) = build_gww_pair(1.0).unwrap();
        let g = Grid::with_cells(&a, 6).unwrap();
        let l = assemble_laplacian(&g);
        let t = TransplantMap::identity().promote(&g, &g).unwrap();
        let r = verify_intertwining(&t, &l, &l).unwrap();
        assert!(r.exact);
    }

    #[test]
    fn gww_map_matches_fixture() {
        let (a, b) = build_gww_pair(1.0).unwrap();
        let t = derive_transplantation(&a, &b, 4).unwrap();
        assert_eq!(t.coeffs, GWW_TRANSPLANT);
        assert_eq!(t.solution_dim, 2);
        assert_eq!(t.nonzeros_per_row(), [3; 7]);
        assert_eq!(t.determinant().abs(), 24);
        assert!(t.class_signs_consistent(&b, &a));
        assert!(!class_block_structure_attainable(&a, &b, 4).unwrap());
    }

    #[test]
    fn compare_identical_and_mismatched() {
        let c = compare_values(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((c.max_abs_diff, c.max_rel_diff), (0.0, 0.0));
        assert!(compare_values(&[1.0], &[1.0, 2.0]).is_err());
    }
}
