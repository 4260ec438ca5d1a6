//! Lowest eigenpairs of sparse symmetric operators.
//!
//! The iterative path is a thick-restart Lanczos iteration with full
//! reorthogonalization. By default it runs on the shift-inverted operator
//! `(A - σI)⁻¹` with `σ` just below the lowest eigenvalue, factorized by a sparse
//! Cholesky decomposition; a plain mode iterates on `-A` directly.

use std::fmt::Write as _;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{MatMut, Side};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operator::SparseSymOperator;

/// Largest dimension accepted by the dense oracles.
pub const DENSE_MAX: usize = 4000;

pub const DEFAULT_SEED: u64 = 20080101;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("requested {k} eigenpairs of a {n}-dimensional operator")]
    BadCount { k: usize, n: usize },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("dense oracle refused: dimension {n} exceeds {max}")]
    TooLarge { n: usize, max: usize },
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error(
        "no convergence after {restarts} restarts; best residuals {residuals:?} for eigenvalues {eigenvalues:?}"
    )]
    NotConverged {
        restarts: usize,
        eigenvalues: Vec<f64>,
        residuals: Vec<f64>,
    },
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
}

/// `y = B x` for a symmetric `B`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for SparseSymOperator {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y)
    }
}

struct Negated<'a>(&'a SparseSymOperator);

impl LinearOperator for Negated<'_> {
    fn dim(&self) -> usize {
        self.0.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.matvec(x, y);
        for v in y.iter_mut() {
            *v = -*v;
        }
    }
}

/// `(A - σI)⁻¹` through a sparse Cholesky factorization.
pub struct ShiftInvert {
    sigma: f64,
    n: usize,
    llt: Llt<usize, f64>,
}

impl ShiftInvert {
    pub fn new(op: &SparseSymOperator, sigma: f64) -> Result<ShiftInvert, EigenError> {
        let n = op.n();
        let mut t = Vec::with_capacity(n + op.nnz_upper());
        for (i, d) in op.diagonal().iter().enumerate() {
            t.push(Triplet::new(i, i, d - sigma));
        }
        for (i, j, v) in op.upper_entries() {
            t.push(Triplet::new(i, j, v));
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t)
            .map_err(|e| EigenError::Factorization(format!("{e:?}")))?;
        let llt = a
            .sp_cholesky(Side::Upper)
            .map_err(|e| EigenError::Factorization(format!("{e:?}")))?;
        Ok(ShiftInvert { sigma, n, llt })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl LinearOperator for ShiftInvert {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        let rhs = MatMut::from_column_major_slice_mut(y, self.n, 1);
        self.llt.solve_in_place(rhs);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    /// Shift-invert, falling back to plain Lanczos if the factorization fails.
    Auto,
    ShiftInvert,
    Plain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    pub k: usize,
    pub tol: f64,
    pub seed: u64,
    pub mode: SolverMode,
    /// Restart cap; `None` means `50·k`.
    pub max_restarts: Option<usize>,
    /// Krylov basis size; `None` picks `max(2k + 1, k + 20)`.
    pub basis: Option<usize>,
    pub keep_vectors: bool,
}

impl EigenOptions {
    pub fn new(k: usize) -> EigenOptions {
        EigenOptions {
            k,
            tol: 1e-10,
            seed: DEFAULT_SEED,
            mode: SolverMode::Auto,
            max_restarts: None,
            basis: None,
            keep_vectors: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverInfo {
    pub method: String,
    pub restarts: usize,
    pub matvecs: usize,
    pub tol: f64,
    pub seed: u64,
    pub shift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Option<Vec<Vec<f64>>>,
    pub residuals: Vec<f64>,
    pub info: SolverInfo,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// CSV with columns `n,E,residual` (1-based `n`).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,E,residual\n");
        for (i, (e, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            let _ = writeln!(s, "{},{:.17e},{:.3e}", i + 1, e, r);
        }
        s
    }
}

/// `‖A v - λ v‖₂`.
pub fn residual_norm(op: &SparseSymOperator, lambda: f64, v: &[f64]) -> f64 {
    let av = op.apply(v);
    av.iter()
        .zip(v)
        .map(|(a, x)| (a - lambda * x).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Two passes of classical Gram-Schmidt against `basis`; returns the
/// accumulated coefficients.
fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) -> Vec<f64> {
    let mut coef = vec![0.0; basis.len()];
    for _ in 0..2 {
        let c: Vec<f64> = basis.iter().map(|v| dot(v, w)).collect();
        for (v, ci) in basis.iter().zip(&c) {
            axpy(-ci, v, w);
        }
        for (a, ci) in coef.iter_mut().zip(&c) {
            *a += ci;
        }
    }
    coef
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

struct RitzResult {
    theta: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    restarts: usize,
    matvecs: usize,
    converged: bool,
}

/// Thick-restart Lanczos for the `nev` largest eigenvalues of `b`.
fn lanczos_largest(
    b: &dyn LinearOperator,
    nev: usize,
    ncv: usize,
    tol: f64,
    max_restarts: usize,
    rng: &mut ChaCha8Rng,
    locked: &[Vec<f64>],
) -> RitzResult {
    let n = b.dim();
    let free = n - locked.len();
    let nev = nev.min(free);
    let ncv = ncv.min(free).max(nev);
    if nev == 0 {
        return RitzResult {
            theta: vec![],
            vectors: vec![],
            restarts: 0,
            matvecs: 0,
            converged: true,
        };
    }
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(ncv + 1);
    let mut start = random_unit(n, rng);
    orthogonalize(locked, &mut start);
    let ns = norm(&start);
    start.iter_mut().for_each(|x| *x /= ns);
    v.push(start);
    let mut t = DMatrix::<f64>::zeros(ncv, ncv);
    let mut kept = 0usize;
    let mut matvecs = 0usize;
    let mut restarts = 0usize;
    let mut w = vec![0.0; n];
    loop {
        let mut size = ncv;
        let mut beta_last = 0.0;
        for j in kept..ncv {
            b.apply(&v[j], &mut w);
            matvecs += 1;
            orthogonalize(locked, &mut w);
            let coef = orthogonalize(&v[..=j], &mut w);
            orthogonalize(locked, &mut w);
            t[(j, j)] = coef[j];
            let beta = norm(&w);
            let scale = t[(j, j)].abs().max(if j > 0 { t[(j - 1, j)].abs() } else { 0.0 });
            let next = if beta > 1e-13 * scale.max(f64::MIN_POSITIVE) {
                w.iter().map(|x| x / beta).collect::<Vec<f64>>()
            } else {
                // invariant subspace: continue with a fresh direction
                let mut r = random_unit(n, rng);
                orthogonalize(locked, &mut r);
                orthogonalize(&v[..=j], &mut r);
                let nr = norm(&r);
                if nr < 1e-8 {
                    size = j + 1;
                    beta_last = 0.0;
                    break;
                }
                r.iter_mut().for_each(|x| *x /= nr);
                if j + 1 < ncv {
                    t[(j, j + 1)] = 0.0;
                    t[(j + 1, j)] = 0.0;
                } else {
                    beta_last = 0.0;
                }
                v.truncate(j + 1);
                v.push(r);
                continue;
            };
            if j + 1 < ncv {
                t[(j, j + 1)] = beta;
                t[(j + 1, j)] = beta;
            } else {
                beta_last = beta;
            }
            v.truncate(j + 1);
            v.push(next);
        }

        let tj = t.view((0, 0), (size, size)).into_owned();
        let eig = SymmetricEigen::new(tj);
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let estimates: Vec<f64> = order
            .iter()
            .map(|&i| (beta_last * eig.eigenvectors[(size - 1, i)]).abs())
            .collect();
        let scale = theta.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let want = nev.min(size);
        let converged = (0..want).all(|i| estimates[i] <= tol * scale);
        let exhausted = size < ncv || size == free;
        if converged || exhausted || restarts >= max_restarts {
            let vectors = order[..want]
                .iter()
                .map(|&c| combine(&v[..size], eig.eigenvectors.column(c).as_slice()))
                .collect();
            return RitzResult {
                theta: theta[..want].to_vec(),
                vectors,
                restarts,
                matvecs,
                converged: converged || exhausted,
            };
        }

        restarts += 1;
        let keep = (nev + (ncv - nev) / 2).min(ncv - 1).max(nev);
        let residual = v.pop().unwrap();
        let new_v: Vec<Vec<f64>> = order[..keep]
            .iter()
            .map(|&c| combine(&v[..size], eig.eigenvectors.column(c).as_slice()))
            .collect();
        t.fill(0.0);
        for (i, &c) in order[..keep].iter().enumerate() {
            t[(i, i)] = eig.eigenvalues[c];
            let coupling = beta_last * eig.eigenvectors[(size - 1, c)];
            t[(i, keep)] = coupling;
            t[(keep, i)] = coupling;
        }
        v = new_v;
        v.push(residual);
        kept = keep;
    }
}

/// Runs [`lanczos_largest`], then searches the orthogonal complement of the
/// result for eigenvalues that the single-vector Krylov space missed, such
/// as further copies of a multiple eigenvalue.
fn lanczos_largest_checked(
    b: &dyn LinearOperator,
    nev: usize,
    ncv: usize,
    tol: f64,
    max_restarts: usize,
    rng: &mut ChaCha8Rng,
) -> RitzResult {
    let mut r = lanczos_largest(b, nev, ncv, tol, max_restarts, rng, &[]);
    while r.converged && r.vectors.len() < b.dim() {
        let probe = lanczos_largest(b, 1, ncv, tol, max_restarts, rng, &r.vectors);
        r.matvecs += probe.matvecs;
        r.restarts += probe.restarts;
        if !probe.converged {
            r.converged = false;
            break;
        }
        let smallest = *r.theta.last().unwrap();
        let candidate = probe.theta[0];
        if candidate <= smallest + 1e-10 * smallest.abs().max(candidate.abs()) {
            break;
        }
        let pos = r.theta.partition_point(|&t| t >= candidate);
        r.theta.insert(pos, candidate);
        r.vectors.insert(pos, probe.vectors.into_iter().next().unwrap());
        r.theta.pop();
        r.vectors.pop();
    }
    r
}

fn combine(basis: &[Vec<f64>], coef: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; basis[0].len()];
    for (vb, c) in basis.iter().zip(coef) {
        axpy(*c, vb, &mut y);
    }
    let ny = norm(&y);
    y.iter_mut().for_each(|x| *x /= ny);
    y
}

/// Factorizes `A - σI` for a shift just below the lowest eigenvalue.
///
/// A short Lanczos run gives an upper estimate `u ≥ λ_min`; shifts below `u`
/// are tried with a growing gap until the Cholesky factorization succeeds,
/// which certifies `σ < λ_min`. The Gershgorin bound is the last resort.
fn choose_shift(
    op: &SparseSymOperator,
    norm1: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ShiftInvert, EigenError> {
    let (lo, _) = op.gershgorin();
    let fallback = lo - 1e-2 * lo.abs().max(1.0);
    let probe = lanczos_largest(&Negated(op), 1, op.n().min(40), 0.0, 0, rng, &[]);
    let u = -probe.theta[0];
    let mut gap = 0.05 * u.abs().max(1e-6 * norm1);
    for _ in 0..12 {
        let sigma = u - gap;
        if sigma <= fallback {
            break;
        }
        if let Ok(si) = ShiftInvert::new(op, sigma) {
            return Ok(si);
        }
        gap *= 2.0;
    }
    ShiftInvert::new(op, fallback)
}

/// The `k` lowest eigenpairs with default options.
pub fn lowest_eigenpairs(
    op: &SparseSymOperator,
    k: usize,
    tol: f64,
) -> Result<Spectrum, EigenError> {
    let mut opts = EigenOptions::new(k);
    opts.tol = tol;
    lowest_eigenpairs_with(op, &opts)
}

pub fn lowest_eigenpairs_with(
    op: &SparseSymOperator,
    opts: &EigenOptions,
) -> Result<Spectrum, EigenError> {
    let n = op.n();
    let k = opts.k;
    if k == 0 || k > n {
        return Err(EigenError::BadCount { k, n });
    }
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(EigenError::BadTolerance(opts.tol));
    }
    let ncv = opts.basis.unwrap_or((2 * k + 1).max(k + 20)).min(n);
    let max_restarts = opts.max_restarts.unwrap_or(50 * k);
    let norm1 = op.norm1();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let shift_invert = match opts.mode {
        SolverMode::Plain => None,
        SolverMode::ShiftInvert => Some(choose_shift(op, norm1, &mut rng)?),
        SolverMode::Auto => choose_shift(op, norm1, &mut rng).ok(),
    };

    let mut inner_tol = (opts.tol * 1e-3).max(1e-14);
    let mut total_matvecs = 0;
    let mut total_restarts = 0;
    loop {
        let (result, lambdas): (RitzResult, Vec<f64>) = match &shift_invert {
            Some(si) => {
                let r = lanczos_largest_checked(si, k, ncv, inner_tol, max_restarts, &mut rng);
                let l = r.theta.iter().map(|t| si.sigma + 1.0 / t).collect();
                (r, l)
            }
            None => {
                let r = lanczos_largest_checked(
                    &Negated(op),
                    k,
                    ncv,
                    inner_tol,
                    max_restarts,
                    &mut rng,
                );
                let l = r.theta.iter().map(|t| -t).collect();
                (r, l)
            }
        };
        total_matvecs += result.matvecs;
        total_restarts += result.restarts;
        let mut pairs: Vec<(f64, Vec<f64>)> = lambdas.into_iter().zip(result.vectors).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let residuals: Vec<f64> = pairs
            .iter()
            .map(|(l, v)| residual_norm(op, *l, v))
            .collect();
        let certified = pairs
            .iter()
            .zip(&residuals)
            .all(|((l, _), r)| *r <= opts.tol * l.abs().max(norm1));
        if result.converged && certified {
            let (eigenvalues, vectors): (Vec<f64>, Vec<Vec<f64>>) = pairs.into_iter().unzip();
            return Ok(Spectrum {
                eigenvalues,
                eigenvectors: opts.keep_vectors.then_some(vectors),
                residuals,
                info: SolverInfo {
                    method: if shift_invert.is_some() {
                        "lanczos_shift_invert".into()
                    } else {
                        "lanczos".into()
                    },
                    restarts: total_restarts,
                    matvecs: total_matvecs,
                    tol: opts.tol,
                    seed: opts.seed,
                    shift: shift_invert.as_ref().map(|s| s.sigma),
                },
            });
        }
        if !result.converged || inner_tol <= 1e-14 {
            return Err(EigenError::NotConverged {
                restarts: total_restarts,
                eigenvalues: pairs.iter().map(|p| p.0).collect(),
                residuals,
            });
        }
        inner_tol = (inner_tol * 1e-2).max(1e-14);
    }
}

/// Full spectrum by dense symmetric diagonalization.
pub fn dense_eigen_oracle(op: &SparseSymOperator) -> Result<Spectrum, EigenError> {
    let n = op.n();
    if n > DENSE_MAX {
        return Err(EigenError::TooLarge { n, max: DENSE_MAX });
    }
    let eig = SymmetricEigen::new(op.to_dense());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    let residuals = eigenvalues
        .iter()
        .zip(&vectors)
        .map(|(l, v)| residual_norm(op, *l, v))
        .collect();
    Ok(Spectrum {
        eigenvalues,
        eigenvectors: Some(vectors),
        residuals,
        info: SolverInfo {
            method: "dense_symmetric".into(),
            restarts: 0,
            matvecs: 0,
            tol: 0.0,
            seed: 0,
            shift: None,
        },
    })
}

/// Eigenvalues of the generalized problem `L ψ = E D ψ` with `D = diag(d)`
/// and `L` positive definite. With `L = RᵀR` the reciprocals `1/E` are the
/// eigenvalues of `R⁻ᵀ D R⁻¹`, so `D^{-1/2}` never appears.
pub fn dense_generalized_oracle(
    l: &SparseSymOperator,
    d: &[f64],
) -> Result<Vec<f64>, EigenError> {
    let n = l.n();
    if n > DENSE_MAX {
        return Err(EigenError::TooLarge { n, max: DENSE_MAX });
    }
    if d.len() != n {
        return Err(EigenError::Dimension(d.len(), n));
    }
    let not_pd = || EigenError::Factorization("operator is not positive definite".into());
    let g = l.to_dense().cholesky().ok_or_else(not_pd)?.l();
    let half = g
        .solve_lower_triangular(&DMatrix::from_diagonal(&DVector::from_column_slice(d)))
        .ok_or_else(not_pd)?;
    let c = g.solve_lower_triangular(&half.transpose()).ok_or_else(not_pd)?;
    let c = (&c + c.transpose()) * 0.5;
    let mut vals: Vec<f64> = SymmetricEigen::new(c)
        .eigenvalues
        .iter()
        .map(|mu| 1.0 / mu)
        .collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// `E_n · M / (4π n)` for each eigenvalue.
pub fn weyl_ratio(spectrum: &Spectrum, mass: f64) -> Vec<f64> {
    spectrum
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, e)| e * mass / (4.0 * std::f64::consts::PI * (i + 1) as f64))
        .collect()
}
