//! Small dense helpers shared by the SDP, bundle and rounding code.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

pub type Matrix = DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;

/// Frobenius inner product `<A, B>`.
pub fn inner(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn is_symmetric(m: &Matrix, tol: f64) -> Option<(usize, usize)> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let scale = 1.0 + m[(i, j)].abs().max(m[(j, i)].abs());
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return Some((i, j));
            }
        }
    }
    None
}

pub fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn min_eigenvalue(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Largest `alpha` with `X + alpha dX` positive semidefinite, given the
/// Cholesky factor of a positive definite `X`. Returns infinity when `dX`
/// does not point out of the cone.
pub fn max_psd_step(chol: &Cholesky<f64, Dyn>, dx: &Matrix) -> f64 {
    let l = chol.l();
    let n = l.nrows();
    // M = L^{-1} dX L^{-T}
    let mut left = dx.clone();
    l.solve_lower_triangular_mut(&mut left);
    let mut mt = left.transpose();
    l.solve_lower_triangular_mut(&mut mt);
    let mut m = mt;
    symmetrize(&mut m);
    let lam = if n == 0 { 0.0 } else { min_eigenvalue(&m) };
    if lam < 0.0 {
        -1.0 / lam
    } else {
        f64::INFINITY
    }
}

/// Orthonormal basis of the null space of `a` (rows are constraints),
/// computed from the eigenvectors of `a^T a` with eigenvalue below `tol`
/// relative to the largest one.
pub fn null_space(a: &Matrix, tol: f64) -> Matrix {
    let n = a.ncols();
    if a.nrows() == 0 {
        return Matrix::identity(n, n);
    }
    let ata = a.transpose() * a;
    let eig = SymmetricEigen::new(ata);
    let top = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let cut = tol * top.max(1.0);
    let cols: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] <= cut).collect();
    let mut basis = Matrix::zeros(n, cols.len());
    for (c, &k) in cols.iter().enumerate() {
        basis.set_column(c, &eig.eigenvectors.column(k));
    }
    basis
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - 1.0) / (k as f64 + 1.0);
        if s - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection_sums_to_one() {
        let mut v = vec![0.3, 2.0, -1.0, 0.5];
        project_simplex(&mut v);
        let s: f64 = v.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(v.iter().all(|&x| x >= 0.0));
        let mut w = vec![0.2, 0.3, 0.5];
        project_simplex(&mut w);
        assert!((w[0] - 0.2).abs() < 1e-12 && (w[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn psd_step_of_identity_direction() {
        let x = Matrix::identity(3, 3);
        let chol = Cholesky::new(x).unwrap();
        let dx = -Matrix::identity(3, 3) * 2.0;
        assert!((max_psd_step(&chol, &dx) - 0.5).abs() < 1e-12);
        assert!(max_psd_step(&chol, &Matrix::identity(3, 3)).is_infinite());
    }

    #[test]
    fn null_space_is_orthogonal() {
        let a = Matrix::from_row_slice(1, 3, &[1.0, -1.0, -1.0]);
        let v = null_space(&a, 1e-10);
        assert_eq!(v.ncols(), 2);
        assert!((a * &v).norm() < 1e-12);
        assert!((v.transpose() * &v - Matrix::identity(2, 2)).norm() < 1e-12);
    }
}
