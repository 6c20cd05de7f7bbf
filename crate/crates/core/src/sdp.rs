//! Primal-dual interior-point solver for
//!
//! ```text
//!   max <C, X>  s.t.  diag(X) = e,  <A_k, X> = b_k,  X psd
//! ```
//!
//! using the HKM search direction with a Mehrotra predictor-corrector. The
//! unit-diagonal constraints make the Schur complement an elementwise
//! product `X o Z^{-1}`, so one iteration costs a handful of dense `O(n^3)`
//! operations.
//!
//! Every returned bound is certified: the dual slack is shifted by its most
//! negative eigenvalue before the dual objective is reported, so the value
//! stays a valid upper bound regardless of how far the iteration got.

use nalgebra::Cholesky;

use crate::error::SdpError;
use crate::linalg::{inner, max_psd_step, min_eigenvalue, symmetrize, Matrix, Vector};

#[derive(Debug, Clone)]
pub struct SdpOptions {
    /// Relative duality gap at which the iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_iter: 100, step_fraction: 0.98 }
    }
}

impl SdpOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Extra equality `<matrix, X> = rhs`; `matrix` must be symmetric.
#[derive(Debug, Clone)]
pub struct Equality {
    pub matrix: Matrix,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// Primal matrix, rescaled to an exactly unit diagonal.
    pub x: Matrix,
    /// `<C, X>` at the returned `x`.
    pub value: f64,
    /// Certified upper bound on the optimum.
    pub dual_bound: f64,
    pub dual_diag: Vector,
    pub dual_eq: Vec<f64>,
    pub gap: f64,
    pub iterations: usize,
}

/// Solves the diagonal-constrained SDP with optional extra equalities.
pub fn solve_diag_sdp(c: &Matrix, equalities: &[Equality], opts: &SdpOptions) -> Result<SdpSolution, SdpError> {
    let n = c.nrows();
    if c.ncols() != n {
        return Err(SdpError::Input(format!("cost is {}x{}", c.nrows(), c.ncols())));
    }
    for eq in equalities {
        if eq.matrix.nrows() != n || eq.matrix.ncols() != n {
            return Err(SdpError::Input("equality matrix has the wrong shape".into()));
        }
    }
    let problem = Problem { c, basis: None, eqs: equalities };
    let mut sol = problem.solve(opts)?;
    normalize_unit_diagonal(&mut sol.x);
    sol.value = inner(c, &sol.x);
    sol.gap = sol.dual_bound - sol.value;
    Ok(sol)
}

/// Solves `max <C, U>  s.t.  diag(V U V') = e,  U psd` for a basis `V`
/// with orthonormal columns. This is the face of the unit-diagonal cone
/// left after restricting `Y = V U V'` to the range of `V`.
pub(crate) fn solve_on_face(c: &Matrix, basis: &Matrix, opts: &SdpOptions) -> Result<SdpSolution, SdpError> {
    if basis.ncols() != c.nrows() {
        return Err(SdpError::Input("basis and cost disagree".into()));
    }
    let problem = Problem { c, basis: Some(basis), eqs: &[] };
    problem.solve(opts)
}

fn normalize_unit_diagonal(x: &mut Matrix) {
    let n = x.nrows();
    let d: Vec<f64> = (0..n).map(|i| x[(i, i)].max(1e-300).sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            x[(i, j)] /= d[i] * d[j];
        }
        x[(i, i)] = 1.0;
    }
    symmetrize(x);
}

struct Problem<'a> {
    c: &'a Matrix,
    basis: Option<&'a Matrix>,
    eqs: &'a [Equality],
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        self.c.nrows()
    }

    fn n_unit(&self) -> usize {
        self.basis.map_or(self.dim(), |v| v.nrows())
    }

    fn n_cons(&self) -> usize {
        self.n_unit() + self.eqs.len()
    }

    fn rhs(&self) -> Vector {
        let mut b = Vector::from_element(self.n_cons(), 1.0);
        for (k, eq) in self.eqs.iter().enumerate() {
            b[self.n_unit() + k] = eq.rhs;
        }
        b
    }

    /// Constraint operator applied to a (possibly nonsymmetric) matrix.
    fn op(&self, m: &Matrix) -> Vector {
        let nu = self.n_unit();
        let mut out = Vector::zeros(self.n_cons());
        match self.basis {
            None => {
                for i in 0..nu {
                    out[i] = m[(i, i)];
                }
            }
            Some(v) => {
                let vm = v * m;
                for i in 0..nu {
                    out[i] = vm.row(i).dot(&v.row(i));
                }
            }
        }
        for (k, eq) in self.eqs.iter().enumerate() {
            out[nu + k] = inner(&eq.matrix, m);
        }
        out
    }

    fn adjoint(&self, y: &Vector) -> Matrix {
        let nu = self.n_unit();
        let mut out = match self.basis {
            None => Matrix::from_diagonal(&y.rows(0, nu).into_owned()),
            Some(v) => {
                let mut dv = v.clone();
                for i in 0..nu {
                    dv.row_mut(i).scale_mut(y[i]);
                }
                v.transpose() * dv
            }
        };
        for (k, eq) in self.eqs.iter().enumerate() {
            out += &eq.matrix * y[nu + k];
        }
        out
    }

    /// `M_ij = <A_i, X A_j Z^{-1}>`.
    fn schur(&self, x: &Matrix, zinv: &Matrix) -> Matrix {
        let nu = self.n_unit();
        let nc = self.n_cons();
        let mut m = Matrix::zeros(nc, nc);
        let (p, s) = match self.basis {
            None => (x.clone(), zinv.clone()),
            Some(v) => (v * x * v.transpose(), v * zinv * v.transpose()),
        };
        for i in 0..nu {
            for j in 0..nu {
                m[(i, j)] = p[(i, j)] * s[(j, i)];
            }
        }
        for (k, ek) in self.eqs.iter().enumerate() {
            let t = x * &ek.matrix * zinv;
            let d = self.op_unit_diag(&t);
            for i in 0..nu {
                m[(i, nu + k)] = d[i];
                m[(nu + k, i)] = d[i];
            }
            let ax = &ek.matrix * x;
            for (l, el) in self.eqs.iter().enumerate().skip(k) {
                let az = &el.matrix * zinv;
                let v = inner(&ax, &az.transpose());
                m[(nu + k, nu + l)] = v;
                m[(nu + l, nu + k)] = v;
            }
        }
        symmetrize(&mut m);
        m
    }

    fn op_unit_diag(&self, t: &Matrix) -> Vector {
        let nu = self.n_unit();
        match self.basis {
            None => Vector::from_iterator(nu, (0..nu).map(|i| t[(i, i)])),
            Some(v) => {
                let vt = v * t;
                Vector::from_iterator(nu, (0..nu).map(|i| vt.row(i).dot(&v.row(i))))
            }
        }
    }

    /// Dual objective with the slack shifted into the cone.
    fn certified_bound(&self, y: &Vector) -> f64 {
        let b = self.rhs();
        let z = self.adjoint(y) - self.c;
        let lam = min_eigenvalue(&z);
        let scale = 1.0 + z.amax();
        let shift = (-lam).max(0.0) + 1e-13 * scale;
        b.dot(y) + self.n_unit() as f64 * shift
    }

    fn solve(&self, opts: &SdpOptions) -> Result<SdpSolution, SdpError> {
        let r = self.dim();
        let nu = self.n_unit();
        let nc = self.n_cons();
        let b = self.rhs();
        if r == 0 {
            return Ok(SdpSolution {
                x: Matrix::zeros(0, 0),
                value: 0.0,
                dual_bound: 0.0,
                dual_diag: Vector::zeros(nu),
                dual_eq: vec![0.0; self.eqs.len()],
                gap: 0.0,
                iterations: 0,
            });
        }
        let row_max = (0..r).map(|i| self.c.row(i).abs().sum()).fold(0.0_f64, f64::max);
        let y0 = row_max + 1.0;
        let mut x = Matrix::identity(r, r);
        let mut y = Vector::zeros(nc);
        for i in 0..nu {
            y[i] = y0;
        }
        let mut z = self.adjoint(&y) - self.c;
        symmetrize(&mut z);
        let c_norm = self.c.norm();
        let mut iterations = 0;
        let mut converged = false;

        for iter in 0..opts.max_iter {
            iterations = iter;
            let rp = &b - self.op(&x);
            let mut rd = self.c + &z - self.adjoint(&y);
            symmetrize(&mut rd);
            let pobj = inner(self.c, &x);
            let dobj = b.dot(&y);
            let mu = inner(&x, &z) / r as f64;
            let rel_gap = (dobj - pobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            let p_inf = rp.norm() / (1.0 + (nc as f64).sqrt());
            let d_inf = rd.norm() / (1.0 + c_norm);
            if rel_gap <= opts.tol && p_inf <= 1e-9 && d_inf <= 1e-9 {
                converged = true;
                break;
            }

            let z_chol = match Cholesky::new(z.clone()) {
                Some(ch) => ch,
                None => break,
            };
            let x_chol = match Cholesky::new(x.clone()) {
                Some(ch) => ch,
                None => break,
            };
            let mut zinv = z_chol.inverse();
            symmetrize(&mut zinv);
            let schur = self.schur(&x, &zinv);
            let schur_chol = match Cholesky::new(schur.clone()) {
                Some(ch) => ch,
                None => {
                    // slightly regularized retry
                    let reg = 1e-12 * (1.0 + schur.amax());
                    match Cholesky::new(schur + Matrix::identity(nc, nc) * reg) {
                        Some(ch) => ch,
                        None => break,
                    }
                }
            };
            let x_rd_zinv = &x * &rd * &zinv;
            let base_rhs = self.op(&x_rd_zinv) - &b;

            let direction = |target: Option<&Matrix>| -> (Matrix, Vector, Matrix) {
                let mut rhs = base_rhs.clone();
                let tz = target.map(|t| t * &zinv);
                if let Some(tz) = &tz {
                    rhs += self.op(tz);
                }
                let dy = schur_chol.solve(&rhs);
                let mut dz = self.adjoint(&dy) - &rd;
                symmetrize(&mut dz);
                let mut dx = -(&x * &dz * &zinv) - &x;
                if let Some(tz) = tz {
                    dx += tz;
                }
                symmetrize(&mut dx);
                (dx, dy, dz)
            };

            // predictor
            let (dxa, _, dza) = direction(None);
            let ap = max_psd_step(&x_chol, &dxa).min(1.0);
            let ad = max_psd_step(&z_chol, &dza).min(1.0);
            let mu_aff = inner(&(&x + &dxa * ap), &(&z + &dza * ad)) / r as f64;
            let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

            // corrector
            let target = Matrix::identity(r, r) * (sigma * mu) - &dxa * &dza;
            let (dx, dy, dz) = direction(Some(&target));
            let ap = (opts.step_fraction * max_psd_step(&x_chol, &dx)).min(1.0);
            let ad = (opts.step_fraction * max_psd_step(&z_chol, &dz)).min(1.0);
            if !(ap.is_finite() && ad.is_finite()) || dx.iter().any(|v| !v.is_finite()) {
                break;
            }
            x += &dx * ap;
            y += &dy * ad;
            z += &dz * ad;
            symmetrize(&mut x);
            symmetrize(&mut z);
            iterations = iter + 1;
        }

        let dual_bound = self.certified_bound(&y);
        if !converged {
            return Err(SdpError::NotConverged { iterations, dual_bound });
        }
        let value = inner(self.c, &x);
        Ok(SdpSolution {
            value,
            dual_bound,
            dual_diag: y.rows(0, nu).into_owned(),
            dual_eq: y.iter().skip(nu).cloned().collect(),
            gap: dual_bound - value,
            iterations,
            x,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::laplacian;

    fn complete(n: usize) -> Matrix {
        let mut w = Matrix::from_element(n, n, 1.0);
        w.fill_diagonal(0.0);
        w
    }

    fn cycle(n: usize) -> Matrix {
        let mut w = Matrix::zeros(n, n);
        for i in 0..n {
            let j = (i + 1) % n;
            w[(i, j)] = 1.0;
            w[(j, i)] = 1.0;
        }
        w
    }

    #[test]
    fn complete_graph_closed_form() {
        for n in [3usize, 5, 7] {
            let c = laplacian(&complete(n)).unwrap() / 4.0;
            let sol = solve_diag_sdp(&c, &[], &SdpOptions::default()).unwrap();
            let expect = (n * n) as f64 / 4.0;
            assert!((sol.value - expect).abs() < 1e-5, "n={n}: {}", sol.value);
            assert!(sol.dual_bound >= expect - 1e-9);
            // candidate optimum (nI - J)/(n-1) is feasible with the same value
            let cand = (Matrix::identity(n, n) * n as f64 - Matrix::from_element(n, n, 1.0)) / (n as f64 - 1.0);
            assert!(min_eigenvalue(&cand) > -1e-12);
            assert!((inner(&c, &cand) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn five_cycle_closed_form() {
        let c = laplacian(&cycle(5)).unwrap() / 4.0;
        let sol = solve_diag_sdp(&c, &[], &SdpOptions::default()).unwrap();
        let expect = (25.0 + 5.0 * 5f64.sqrt()) / 8.0;
        assert!((sol.value - expect).abs() < 1e-5, "{}", sol.value);
        assert!(sol.dual_bound >= expect - 1e-9);
    }

    #[test]
    fn zero_cost() {
        let sol = solve_diag_sdp(&Matrix::zeros(4, 4), &[], &SdpOptions::default()).unwrap();
        assert!(sol.value.abs() < 1e-7);
        assert!(sol.dual_bound >= -1e-9);
        for i in 0..4 {
            assert_eq!(sol.x[(i, i)], 1.0);
        }
    }

    #[test]
    fn solution_invariants() {
        let c = laplacian(&cycle(7)).unwrap() / 4.0;
        let sol = solve_diag_sdp(&c, &[], &SdpOptions::default()).unwrap();
        assert!(min_eigenvalue(&sol.x) >= -1e-8);
        assert!(sol.gap <= 1e-5 * (1.0 + sol.value.abs()));
        let again = solve_diag_sdp(&c, &[], &SdpOptions::default()).unwrap();
        assert_eq!(sol.value.to_bits(), again.value.to_bits());
    }

    #[test]
    fn extra_equality_is_honored() {
        // K3 with X_01 pinned to 0.5 (strictly feasible: X = I blended)
        let c = laplacian(&complete(3)).unwrap() / 4.0;
        let mut a = Matrix::zeros(3, 3);
        a[(0, 1)] = 0.5;
        a[(1, 0)] = 0.5;
        let eq = Equality { matrix: a, rhs: 0.5 };
        let sol = solve_diag_sdp(&c, &[eq], &SdpOptions::default()).unwrap();
        assert!((sol.x[(0, 1)] - 0.5).abs() < 1e-6);
        // max 3/4 - (X01+X02+X12)/2 with X01 = 1/2: best X02 = X12 = -3/4... bounded by psd
        assert!(sol.value < 9.0 / 4.0);
        assert!(sol.dual_bound >= sol.value - 1e-9);
    }

    #[test]
    fn face_restriction_matches_direct_solve() {
        // identity basis reproduces the plain problem
        let c = laplacian(&cycle(5)).unwrap() / 4.0;
        let v = Matrix::identity(5, 5);
        let face = solve_on_face(&c, &v, &SdpOptions::default()).unwrap();
        let direct = solve_diag_sdp(&c, &[], &SdpOptions::default()).unwrap();
        assert!((face.dual_bound - direct.dual_bound).abs() < 1e-6);
    }
}
