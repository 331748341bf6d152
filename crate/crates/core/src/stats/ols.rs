//! Ordinary least squares via Householder QR.
//!
//! Columns are processed left to right; a column whose component orthogonal
//! to the columns already accepted is negligible is dropped instead of
//! producing an ill-conditioned triangular factor. Put the columns that must
//! survive (the intercept) first.

/// Relative threshold below which a column is treated as linearly dependent.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    /// One entry per input column; `None` for dropped columns.
    pub coefficients: Vec<Option<f64>>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    /// Indices of retained columns, in input order.
    pub kept: Vec<usize>,
}

impl LeastSquares {
    pub fn rank(&self) -> usize {
        self.kept.len()
    }
}

/// Solves min ‖y − Xβ‖² where `columns` holds the columns of X.
///
/// Panics if a column length differs from `y.len()`.
pub fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> LeastSquares {
    let n = y.len();
    for c in columns {
        assert_eq!(c.len(), n, "column length mismatch");
    }
    let mut work: Vec<Vec<f64>> = columns.to_vec();
    let mut qty = y.to_vec();
    let mut kept = Vec::new();
    let mut row = 0usize;

    for j in 0..work.len() {
        if row >= n {
            break;
        }
        let orig_norm = columns[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        let tail_norm = work[j][row..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if orig_norm == 0.0 || tail_norm <= RANK_TOL * orig_norm {
            continue;
        }

        // Reflector v = x + sign(x0)‖x‖e1, applied as I − 2vvᵀ/(vᵀv).
        let x0 = work[j][row];
        let alpha = if x0 >= 0.0 { -tail_norm } else { tail_norm };
        let mut v: Vec<f64> = work[j][row..].to_vec();
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|a| a * a).sum();
        if vtv > 0.0 {
            let reflect = |target: &mut [f64]| {
                let dot: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
                let scale = 2.0 * dot / vtv;
                for (t, a) in target.iter_mut().zip(&v) {
                    *t -= scale * a;
                }
            };
            for col in work.iter_mut().skip(j + 1) {
                reflect(&mut col[row..]);
            }
            reflect(&mut qty[row..]);
        }
        work[j][row] = alpha;
        for v in &mut work[j][row + 1..] {
            *v = 0.0;
        }
        kept.push(j);
        row += 1;
    }

    // Back substitution on the retained triangular factor.
    let r = kept.len();
    let mut beta = vec![0.0; r];
    for i in (0..r).rev() {
        let mut acc = qty[i];
        for (l, b) in beta.iter().enumerate().skip(i + 1) {
            acc -= work[kept[l]][i] * b;
        }
        beta[i] = acc / work[kept[i]][i];
    }

    let mut coefficients = vec![None; columns.len()];
    for (i, &j) in kept.iter().enumerate() {
        coefficients[j] = Some(beta[i]);
    }
    let residuals: Vec<f64> = (0..n)
        .map(|t| {
            let fitted: f64 = kept
                .iter()
                .zip(&beta)
                .map(|(&j, b)| columns[j][t] * b)
                .sum();
            y[t] - fitted
        })
        .collect();
    let rss = residuals.iter().map(|e| e * e).sum();

    LeastSquares {
        coefficients,
        residuals,
        rss,
        kept,
    }
}
