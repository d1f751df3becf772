//! Small numeric routines shared across the crate: Pearson correlation,
//! one-dimensional least squares, and a dense linear solver for the
//! regression baselines.

/// Pearson correlation via Welford-style single-pass co-moments.
///
/// Returns `None` when either input has zero variance (the correlation is
/// undefined, not zero) or fewer than two observations.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "pearson inputs must have equal length");
    if x.len() < 2 {
        return None;
    }
    let mut mean_x = 0.0;
    let mut mean_y = 0.0;
    let mut m2_x = 0.0;
    let mut m2_y = 0.0;
    let mut co = 0.0;
    for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
        let n = (i + 1) as f64;
        let dx = xi - mean_x;
        mean_x += dx / n;
        let dy = yi - mean_y;
        mean_y += dy / n;
        m2_x += dx * (xi - mean_x);
        m2_y += dy * (yi - mean_y);
        co += dx * (yi - mean_y);
    }
    if m2_x <= 0.0 || m2_y <= 0.0 {
        return None;
    }
    let rho = co / (m2_x * m2_y).sqrt();
    Some(rho.clamp(-1.0, 1.0))
}

/// Slope of the ordinary-least-squares line of `y` against `x`.
///
/// `None` when fewer than two points or `x` has no spread.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    if x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mean_x) * (xi - mean_x);
        sxy += (xi - mean_x) * (yi - mean_y);
    }
    if sxx <= 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Residual sum of squares of the least-squares fit of `y` on the rows of
/// `design` (row-major, `n_rows x n_cols`). Solves the normal equations with
/// partially pivoted Gaussian elimination; returns `None` when the design is
/// singular.
pub(crate) fn lstsq_rss(design: &[f64], n_cols: usize, y: &[f64]) -> Option<f64> {
    let n_rows = y.len();
    assert_eq!(design.len(), n_rows * n_cols);
    if n_rows < n_cols {
        return None;
    }

    // Normal equations: (X^T X) beta = X^T y.
    let mut xtx = vec![0.0; n_cols * n_cols];
    let mut xty = vec![0.0; n_cols];
    for r in 0..n_rows {
        let row = &design[r * n_cols..(r + 1) * n_cols];
        for i in 0..n_cols {
            xty[i] += row[i] * y[r];
            for j in i..n_cols {
                xtx[i * n_cols + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..n_cols {
        for j in 0..i {
            xtx[i * n_cols + j] = xtx[j * n_cols + i];
        }
    }

    let scale = xtx
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let tol = scale * 1e-10;

    let beta = solve_in_place(&mut xtx, &mut xty, n_cols, tol)?;

    let mut rss = 0.0;
    for r in 0..n_rows {
        let row = &design[r * n_cols..(r + 1) * n_cols];
        let fitted: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
        let resid = y[r] - fitted;
        rss += resid * resid;
    }
    Some(rss)
}

/// Gaussian elimination with partial pivoting on an `n x n` system.
/// Returns `None` when a pivot falls below `tol` (singular system).
fn solve_in_place(a: &mut [f64], b: &mut [f64], n: usize, tol: f64) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = a[col * n + col].abs();
        for r in (col + 1)..n {
            let v = a[r * n + col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val < tol {
            return None;
        }
        if pivot_row != col {
            for c in 0..n {
                a.swap(col * n + c, pivot_row * n + c);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * n + col];
        for r in (col + 1)..n {
            let factor = a[r * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= factor * a[col * n + c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for c in (col + 1)..n {
            acc -= a[col * n + c] * x[c];
        }
        x[col] = acc / a[col * n + col];
    }
    Some(x)
}
