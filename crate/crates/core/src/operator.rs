//! Five-point finite-difference operators with Dirichlet elimination.

use std::fmt;
use std::io::{self, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldError, FieldKind, ScalarField};
use crate::grid::{Grid, BOUNDARY};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("density must be positive at every grid node; node {node} has {value}")]
    NonPositiveDensity { node: usize, value: f64 },
    #[error("expected a {expected:?} field, got {got:?}")]
    WrongFieldKind { expected: FieldKind, got: FieldKind },
    #[error("kinetic coefficient must be positive and finite, got {0}")]
    BadKinetic(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Laplacian,
    DensitySymmetrized,
    Schrodinger,
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorKind::Laplacian => "laplacian",
            OperatorKind::DensitySymmetrized => "density_symmetrized",
            OperatorKind::Schrodinger => "schrodinger",
        })
    }
}

/// Symmetric sparse matrix stored as diagonal plus strict upper triangle in
/// row-compressed form. A transposed index over the upper entries gives
/// row-wise access to the lower triangle for the matvec.
#[derive(Debug, Clone)]
pub struct SparseSymOperator {
    pub kind: OperatorKind,
    pub h: f64,
    /// Description of the field used in assembly, if any.
    pub field: Option<String>,
    diag: Vec<f64>,
    upper_ptr: Vec<usize>,
    upper_col: Vec<usize>,
    upper_val: Vec<f64>,
    lower_ptr: Vec<usize>,
    lower_col: Vec<usize>,
    lower_src: Vec<usize>,
}

impl SparseSymOperator {
    /// Builds from the diagonal and, per row `i`, the entries `(j, v)` with `j > i`.
    pub fn from_upper(
        kind: OperatorKind,
        h: f64,
        diag: Vec<f64>,
        upper: Vec<Vec<(usize, f64)>>,
    ) -> SparseSymOperator {
        let n = diag.len();
        assert_eq!(upper.len(), n);
        let mut upper_ptr = Vec::with_capacity(n + 1);
        let mut upper_col = Vec::new();
        let mut upper_val = Vec::new();
        let mut lower_count = vec![0usize; n];
        upper_ptr.push(0);
        for (i, mut row) in upper.into_iter().enumerate() {
            row.sort_by_key(|e| e.0);
            for (j, v) in row {
                assert!(j > i && j < n, "upper entry ({i}, {j}) out of range");
                upper_col.push(j);
                upper_val.push(v);
                lower_count[j] += 1;
            }
            upper_ptr.push(upper_col.len());
        }
        let mut lower_ptr = Vec::with_capacity(n + 1);
        lower_ptr.push(0);
        for c in &lower_count {
            lower_ptr.push(lower_ptr.last().unwrap() + c);
        }
        let mut fill = lower_ptr.clone();
        let mut lower_col = vec![0; upper_col.len()];
        let mut lower_src = vec![0; upper_col.len()];
        for i in 0..n {
            for e in upper_ptr[i]..upper_ptr[i + 1] {
                let j = upper_col[e];
                lower_col[fill[j]] = i;
                lower_src[fill[j]] = e;
                fill[j] += 1;
            }
        }
        SparseSymOperator {
            kind,
            h,
            field: None,
            diag,
            upper_ptr,
            upper_col,
            upper_val,
            lower_ptr,
            lower_col,
            lower_src,
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn nnz_upper(&self) -> usize {
        self.upper_val.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Entry `(i, j)`; zero outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        let (r, c) = if i < j { (i, j) } else { (j, i) };
        let cols = &self.upper_col[self.upper_ptr[r]..self.upper_ptr[r + 1]];
        match cols.binary_search(&c) {
            Ok(p) => self.upper_val[self.upper_ptr[r] + p],
            Err(_) => 0.0,
        }
    }

    /// Off-diagonal entries of row `i`, ascending by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lower = (self.lower_ptr[i]..self.lower_ptr[i + 1])
            .map(move |e| (self.lower_col[e], self.upper_val[self.lower_src[e]]));
        let upper = (self.upper_ptr[i]..self.upper_ptr[i + 1])
            .map(move |e| (self.upper_col[e], self.upper_val[e]));
        lower.chain(upper)
    }

    /// Strict upper triangle as `(i, j, v)` triples.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |i| {
            (self.upper_ptr[i]..self.upper_ptr[i + 1])
                .map(move |e| (i, self.upper_col[e], self.upper_val[e]))
        })
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut acc = self.diag[i] * x[i];
        for (j, v) in self.row(i) {
            acc += v * x[j];
        }
        acc
    }

    /// `y = A x`, parallel over rows.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n());
        assert_eq!(y.len(), self.n());
        y.par_iter_mut()
            .enumerate()
            .with_min_len(2048)
            .for_each(|(i, yi)| *yi = self.row_dot(i, x));
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        self.matvec(x, &mut y);
        y
    }

    /// Returns `A + s I`.
    pub fn shifted(&self, s: f64) -> SparseSymOperator {
        let mut out = self.clone();
        for d in &mut out.diag {
            *d += s;
        }
        out
    }

    /// Gershgorin interval `[min_i (a_ii - r_i), max_i (a_ii + r_i)]`.
    pub fn gershgorin(&self) -> (f64, f64) {
        (0..self.n())
            .map(|i| {
                let r: f64 = self.row(i).map(|(_, v)| v.abs()).sum();
                (self.diag[i] - r, self.diag[i] + r)
            })
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
                (lo.min(a), hi.max(b))
            })
    }

    /// Maximum absolute row sum.
    pub fn norm1(&self) -> f64 {
        (0..self.n())
            .map(|i| self.diag[i].abs() + self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for (i, j, v) in self.upper_entries() {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// MatrixMarket coordinate format, symmetric (lower triangle, 1-based).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(w, "% kind={} h={}", self.kind, self.h)?;
        if let Some(f) = &self.field {
            writeln!(w, "% field={f}")?;
        }
        let n = self.n();
        writeln!(w, "{n} {n} {}", n + self.nnz_upper())?;
        for i in 0..n {
            writeln!(w, "{} {} {:e}", i + 1, i + 1, self.diag[i])?;
            for e in self.lower_ptr[i]..self.lower_ptr[i + 1] {
                writeln!(
                    w,
                    "{} {} {:e}",
                    i + 1,
                    self.lower_col[e] + 1,
                    self.upper_val[self.lower_src[e]]
                )?;
            }
        }
        Ok(())
    }
}

/// Assembles `diag_i` and `offdiag(i, j)` over the lattice-neighbor pattern.
fn assemble_stencil(
    grid: &Grid,
    kind: OperatorKind,
    diag: impl Fn(usize) -> f64 + Sync,
    offdiag: impl Fn(usize, usize) -> f64 + Sync,
) -> SparseSymOperator {
    let n = grid.len();
    let (diag, upper): (Vec<f64>, Vec<Vec<(usize, f64)>>) = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = grid.neighbors[i]
                .iter()
                .filter(|&&j| j != BOUNDARY && j > i)
                .map(|&j| (j, offdiag(i, j)))
                .collect();
            (diag(i), row)
        })
        .unzip();
    SparseSymOperator::from_upper(kind, grid.h, diag, upper)
}

/// Dirichlet Laplacian `-Δ_h`: `4/h²` on the diagonal, `-1/h²` between
/// lattice neighbors.
pub fn assemble_laplacian(grid: &Grid) -> SparseSymOperator {
    let d = 4.0 * grid.inv_h2;
    let o = -grid.inv_h2;
    assemble_stencil(grid, OperatorKind::Laplacian, |_| d, |_, _| o)
}

/// `D^{-1/2} L D^{-1/2}` with `D = diag(Σ_i)`.
pub fn assemble_density_operator(
    grid: &Grid,
    sigma: &ScalarField,
) -> Result<SparseSymOperator, OperatorError> {
    if sigma.kind() != FieldKind::Density {
        return Err(OperatorError::WrongFieldKind {
            expected: FieldKind::Density,
            got: sigma.kind(),
        });
    }
    let values = sigma.sample(grid)?;
    density_operator_from_values(grid, &values).map(|mut op| {
        op.field = Some(sigma.spec().describe());
        op
    })
}

/// Density operator from nodal density values in grid order.
pub fn density_operator_from_values(
    grid: &Grid,
    values: &[f64],
) -> Result<SparseSymOperator, OperatorError> {
    if values.len() != grid.len() {
        return Err(OperatorError::Dimension(values.len(), grid.len()));
    }
    if let Some((node, &value)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v > 0.0))
    {
        return Err(OperatorError::NonPositiveDensity { node, value });
    }
    let s: Vec<f64> = values.iter().map(|v| 1.0 / v.sqrt()).collect();
    let d = 4.0 * grid.inv_h2;
    let o = -grid.inv_h2;
    Ok(assemble_stencil(
        grid,
        OperatorKind::DensitySymmetrized,
        |i| (s[i] * s[i]) * d,
        |i, j| (s[i] * s[j]) * o,
    ))
}

/// `kinetic · L + diag(V_i)`.
pub fn assemble_schrodinger(
    grid: &Grid,
    v: &ScalarField,
    kinetic: f64,
) -> Result<SparseSymOperator, OperatorError> {
    if v.kind() != FieldKind::Potential {
        return Err(OperatorError::WrongFieldKind {
            expected: FieldKind::Potential,
            got: v.kind(),
        });
    }
    let values = v.sample(grid)?;
    schrodinger_from_values(grid, &values, kinetic).map(|mut op| {
        op.field = Some(v.spec().describe());
        op
    })
}

pub fn schrodinger_from_values(
    grid: &Grid,
    values: &[f64],
    kinetic: f64,
) -> Result<SparseSymOperator, OperatorError> {
    if !(kinetic.is_finite() && kinetic > 0.0) {
        return Err(OperatorError::BadKinetic(kinetic));
    }
    if values.len() != grid.len() {
        return Err(OperatorError::Dimension(values.len(), grid.len()));
    }
    let d = kinetic * (4.0 * grid.inv_h2);
    let o = kinetic * -grid.inv_h2;
    Ok(assemble_stencil(
        grid,
        OperatorKind::Schrodinger,
        |i| d + values[i],
        |_, _| o,
    ))
}
