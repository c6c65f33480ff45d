//! Small dense linear algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

/// Taylor order used after scaling; with `||A / 2^s||_1 <= 1/2` the
/// truncation error is below `0.5^19 / 19! ~ 2e-23`.
const TAYLOR_ORDER: usize = 18;

/// Matrix exponential by scaling-and-squaring with a truncated Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "expm requires a square matrix");
    let n = a.nrows();
    let norm = norm_1(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);

    // Horner form of sum_k A^k / k!.
    let identity = DMatrix::<f64>::identity(n, n);
    let mut result = identity.clone();
    for k in (1..=TAYLOR_ORDER).rev() {
        result = &identity + (&scaled * &result) / k as f64;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm_1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Operator norm induced by the Euclidean norm (largest singular value).
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Block-diagonal assembly.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let v = a * DVector::from_column_slice(x);
    v.iter().copied().collect()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    #[test]
    fn expm_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -2.0, 0.5]));
        let e = expm(&a);
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![
            1f64.exp(),
            (-2f64).exp(),
            0.5f64.exp(),
        ]));
        assert!(max_abs_diff(&e, &want) < 1e-13 * 3.0);
    }

    #[test]
    fn expm_of_rotation_generator() {
        let t: f64 = 7.3;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -t, t, 0.0]);
        let want = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        assert!(max_abs_diff(&expm(&a), &want) < 1e-13);
    }

    #[test]
    fn expm_of_nilpotent() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 1.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0]);
        // I + A + A^2/2
        let want = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 4.0, 0.0, 1.0, 3.0, 0.0, 0.0, 1.0]);
        assert!(max_abs_diff(&expm(&a), &want) < 1e-14);
    }

    #[test]
    fn expm_semigroup_property() {
        let p = DMatrix::from_row_slice(2, 2, &[0.3, -1.1, 0.7, 0.2]);
        let lhs = expm(&(&p * 1.5));
        let rhs = expm(&(&p * 0.4)) * expm(&(&p * 1.1));
        assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn spectral_norm_and_blocks() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -4.0]);
        assert!((spectral_norm(&a) - 4.0).abs() < 1e-14);
        let b = block_diag(&[a.clone(), DMatrix::from_element(1, 1, 2.0)]);
        assert_eq!(b.nrows(), 3);
        assert_eq!(b[(2, 2)], 2.0);
        assert_eq!(b[(0, 2)], 0.0);
        assert_eq!(mat_vec(&b, &[1.0, 1.0, 1.0]), vec![3.0, -4.0, 2.0]);
    }
}
