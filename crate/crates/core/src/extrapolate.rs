//! Richardson extrapolation of grid sequences to the continuum limit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtrapolateError {
    #[error("need at least {need} entries, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("duplicate spacing h={0}")]
    DuplicateSpacing(f64),
    #[error("spacings and values must be finite and h positive; bad entry ({0}, {1})")]
    BadEntry(f64, f64),
    #[error("order must be positive, got {0}")]
    BadOrder(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSequence {
    /// `(h, value)` pairs with `h` strictly decreasing.
    pub entries: Vec<(f64, f64)>,
    pub quantity: String,
}

impl ConvergenceSequence {
    /// Sorts by decreasing `h`.
    pub fn new(
        quantity: impl Into<String>,
        mut entries: Vec<(f64, f64)>,
    ) -> Result<ConvergenceSequence, ExtrapolateError> {
        if entries.len() < 2 {
            return Err(ExtrapolateError::TooFew {
                need: 2,
                got: entries.len(),
            });
        }
        if let Some(&(h, v)) = entries
            .iter()
            .find(|(h, v)| !(h.is_finite() && *h > 0.0 && v.is_finite()))
        {
            return Err(ExtrapolateError::BadEntry(h, v));
        }
        entries.sort_by(|a, b| b.0.total_cmp(&a.0));
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(ExtrapolateError::DuplicateSpacing(w[0].0));
        }
        Ok(ConvergenceSequence {
            entries,
            quantity: quantity.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when the values move in one direction as `h` decreases.
    pub fn is_monotone(&self) -> bool {
        let d: Vec<f64> = self.entries.windows(2).map(|w| w[1].1 - w[0].1).collect();
        d.iter().all(|&x| x >= 0.0) || d.iter().all(|&x| x <= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RichardsonResult {
    pub limit: f64,
    /// Neville tableau in the variable `h^p`; row `i` has `i + 1` entries,
    /// entry `j` using the data points `i - j ..= i`.
    pub table: Vec<Vec<f64>>,
    /// `|D_j - D_{j-1}|` at the chosen entry of the last row.
    pub stability: f64,
    /// Column of the last row reported as the limit.
    pub column: usize,
    pub non_monotone: bool,
}

/// Polynomial extrapolation to `h = 0` in the variable `x = h^p`.
///
/// The limit is the entry `D_j` of the last tableau row whose difference to
/// `D_{j-1}` is smallest.
pub fn richardson(seq: &ConvergenceSequence, p: f64) -> Result<RichardsonResult, ExtrapolateError> {
    if !(p.is_finite() && p > 0.0) {
        return Err(ExtrapolateError::BadOrder(p));
    }
    let x: Vec<f64> = seq.entries.iter().map(|(h, _)| h.powf(p)).collect();
    let n = x.len();
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = vec![seq.entries[i].1];
        for j in 1..=i {
            let (xa, xb) = (x[i - j], x[i]);
            let v = (xa * row[j - 1] - xb * table[i - 1][j - 1]) / (xa - xb);
            row.push(v);
        }
        table.push(row);
    }
    let last = table.last().unwrap();
    let (column, stability) = (1..last.len())
        .map(|j| (j, (last[j] - last[j - 1]).abs()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    Ok(RichardsonResult {
        limit: last[column],
        stability,
        column,
        non_monotone: !seq.is_monotone(),
        table,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub limit: f64,
    pub coefficient: f64,
    pub rms_residual: f64,
}

/// Least-squares fit of `v(h) = L + c h^q`: for each trial `q` the best `L`
/// and `c` are linear, and `q` is found by golden-section search on [0.25, 8].
pub fn fit_power_law(seq: &ConvergenceSequence) -> Result<RateFit, ExtrapolateError> {
    if seq.len() < 3 {
        return Err(ExtrapolateError::TooFew {
            need: 3,
            got: seq.len(),
        });
    }
    // rescale h so h^q stays well conditioned
    let hmax = seq.entries[0].0;
    let fit = |q: f64| -> (f64, f64, f64) {
        let n = seq.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for &(h, v) in &seq.entries {
            let t = (h / hmax).powf(q);
            sx += t;
            sy += v;
            sxx += t * t;
            sxy += t * v;
        }
        let det = n * sxx - sx * sx;
        let c = (n * sxy - sx * sy) / det;
        let l = (sy - c * sx) / n;
        let ss: f64 = seq
            .entries
            .iter()
            .map(|&(h, v)| (v - l - c * (h / hmax).powf(q)).powi(2))
            .sum();
        (ss, l, c)
    };
    let (mut a, mut b) = (0.25f64, 8.0f64);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c1 = b - g * (b - a);
    let mut c2 = a + g * (b - a);
    let (mut f1, mut f2) = (fit(c1).0, fit(c2).0);
    for _ in 0..200 {
        if f1 < f2 {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - g * (b - a);
            f1 = fit(c1).0;
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + g * (b - a);
            f2 = fit(c2).0;
        }
        if b - a < 1e-12 {
            break;
        }
    }
    let q = 0.5 * (a + b);
    let (ss, l, c) = fit(q);
    Ok(RateFit {
        rate: q,
        limit: l,
        coefficient: c / hmax.powf(q),
        rms_residual: (ss / seq.len() as f64).sqrt(),
    })
}

/// Observed order of convergence.
pub fn convergence_rate(seq: &ConvergenceSequence) -> Result<f64, ExtrapolateError> {
    fit_power_law(seq).map(|f| f.rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(l: f64, c: f64, p: f64, hs: &[f64]) -> ConvergenceSequence {
        ConvergenceSequence::new("model", hs.iter().map(|&h| (h, l + c * h.powf(p))).collect())
            .unwrap()
    }

    #[test]
    fn one_step_annihilates_h2() {
        let s = model(3.25, 7.0, 2.0, &[0.1, 0.05, 0.025]);
        let r = richardson(&s, 2.0).unwrap();
        assert!((r.limit - 3.25).abs() <= 1e-13);
        assert!((r.table[1][1] - 3.25).abs() <= 10.0 * f64::EPSILON * 3.25);
        assert!(!r.non_monotone);
    }

    #[test]
    fn rejects_bad_sequences() {
        assert!(matches!(
            ConvergenceSequence::new("x", vec![(0.1, 1.0)]),
            Err(ExtrapolateError::TooFew { .. })
        ));
        assert!(matches!(
            ConvergenceSequence::new("x", vec![(0.1, 1.0), (0.1, 2.0)]),
            Err(ExtrapolateError::DuplicateSpacing(_))
        ));
        let two = ConvergenceSequence::new("x", vec![(0.1, 1.0), (0.05, 2.0)]).unwrap();
        assert!(matches!(
            convergence_rate(&two),
            Err(ExtrapolateError::TooFew { need: 3, .. })
        ));
    }

    #[test]
    fn entries_sorted_by_decreasing_h() {
        let s = ConvergenceSequence::new("x", vec![(0.05, 2.0), (0.1, 1.0), (0.2, 0.5)]).unwrap();
        let hs: Vec<f64> = s.entries.iter().map(|e| e.0).collect();
        assert_eq!(hs, vec![0.2, 0.1, 0.05]);
    }

    #[test]
    fn non_monotone_flagged() {
        let s = ConvergenceSequence::new("x", vec![(0.2, 1.0), (0.1, 2.0), (0.05, 1.5)]).unwrap();
        assert!(richardson(&s, 2.0).unwrap().non_monotone);
    }

    #[test]
    fn rate_of_pure_power_data() {
        let hs: Vec<f64> = (19..=30).map(|k| 1.0 / (4.0 * k as f64)).collect();
        let s = model(1.5, 4.0, 2.0, &hs);
        assert!((convergence_rate(&s).unwrap() - 2.0).abs() < 1e-4);
        let s = model(-1.0, 0.3, 1.5, &[0.2, 0.1, 0.05, 0.025]);
        assert!((convergence_rate(&s).unwrap() - 1.5).abs() < 1e-4);
    }
}
