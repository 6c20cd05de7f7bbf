//! Problem representations: constrained binary quadratic programs in 0/1
//! variables and quadratic maximization over ±1 vectors.

use crate::error::InstanceError;
use crate::linalg::{is_symmetric, Matrix, Vector};

const SYM_TOL: f64 = 1e-12;

/// Largest size accepted by [`brute_force_maxcut`].
pub const BRUTE_FORCE_MAXCUT_CAP: usize = 25;
/// Largest size accepted by [`brute_force_bqp`].
pub const BRUTE_FORCE_BQP_CAP: usize = 22;

/// Tolerance used for `Az = b` on non-integral data.
pub const FEASIBILITY_TOL: f64 = 1e-8;

fn is_integer(v: f64) -> bool {
    v.is_finite() && v.fract() == 0.0
}

/// `min z'Fz + c'z  s.t.  Az = b, z in {0,1}^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BqpInstance {
    f: Matrix,
    c: Vector,
    a: Matrix,
    b: Vector,
    integral: bool,
}

impl BqpInstance {
    pub fn new(f: Matrix, c: Vector, a: Matrix, b: Vector) -> Result<Self, InstanceError> {
        let n = f.nrows();
        if f.ncols() != n {
            return Err(InstanceError::Dimension(format!(
                "F is {}x{}",
                f.nrows(),
                f.ncols()
            )));
        }
        if c.len() != n {
            return Err(InstanceError::Dimension(format!("c has length {}, expected {n}", c.len())));
        }
        if a.ncols() != n && a.nrows() > 0 {
            return Err(InstanceError::Dimension(format!("A has {} columns, expected {n}", a.ncols())));
        }
        if a.nrows() != b.len() {
            return Err(InstanceError::Dimension(format!(
                "A has {} rows but b has length {}",
                a.nrows(),
                b.len()
            )));
        }
        if let Some((i, j)) = is_symmetric(&f, SYM_TOL) {
            return Err(InstanceError::NotSymmetric(i, j));
        }
        // normalize an empty A to the right column count
        let a = if a.nrows() == 0 { Matrix::zeros(0, n) } else { a };
        let integral = f.iter().chain(c.iter()).chain(a.iter()).chain(b.iter()).all(|&v| is_integer(v));
        Ok(Self { f, c, a, b, integral })
    }

    pub fn n(&self) -> usize {
        self.f.nrows()
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn f(&self) -> &Matrix {
        &self.f
    }

    pub fn c(&self) -> &Vector {
        &self.c
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn integral(&self) -> bool {
        self.integral
    }

    pub fn objective(&self, z: &[u8]) -> f64 {
        let n = self.n();
        let mut v = 0.0;
        for i in 0..n {
            if z[i] == 0 {
                continue;
            }
            v += self.c[i];
            for j in 0..n {
                if z[j] != 0 {
                    v += self.f[(i, j)];
                }
            }
        }
        v
    }

    /// `Az - b`.
    pub fn residual(&self, z: &[u8]) -> Vector {
        let mut r = -self.b.clone();
        for k in 0..self.m() {
            for i in 0..self.n() {
                if z[i] != 0 {
                    r[k] += self.a[(k, i)];
                }
            }
        }
        r
    }

    /// Exact comparison for integral data, [`FEASIBILITY_TOL`] otherwise.
    pub fn is_feasible(&self, z: &[u8]) -> bool {
        let r = self.residual(z);
        if self.integral {
            r.iter().all(|&v| v == 0.0)
        } else {
            r.iter().all(|&v| v.abs() <= FEASIBILITY_TOL)
        }
    }
}

/// `maximize x'Mx + offset` over `x in {-1,1}^size`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxCutProblem {
    m: Matrix,
    offset: f64,
    integral: bool,
}

impl MaxCutProblem {
    /// `integral` asserts that the objective takes integer values on every
    /// ±1 point; pruning relies on it.
    pub fn new(m: Matrix, offset: f64, integral: bool) -> Result<Self, InstanceError> {
        if m.nrows() != m.ncols() {
            return Err(InstanceError::Dimension(format!("M is {}x{}", m.nrows(), m.ncols())));
        }
        if let Some((i, j)) = is_symmetric(&m, SYM_TOL) {
            return Err(InstanceError::NotSymmetric(i, j));
        }
        Ok(Self { m, offset, integral })
    }

    pub(crate) fn new_unchecked(m: Matrix, offset: f64, integral: bool) -> Self {
        Self { m, offset, integral }
    }

    pub fn size(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn integral(&self) -> bool {
        self.integral
    }

    pub fn objective(&self, x: &[i8]) -> f64 {
        let n = self.size();
        debug_assert_eq!(x.len(), n);
        let mut v = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.m[(i, j)] * x[j] as f64;
            }
            v += x[i] as f64 * row;
        }
        v + self.offset
    }

    pub fn solution(&self, x: Vec<i8>) -> CutSolution {
        let value = self.objective(&x);
        CutSolution { x, value }
    }

    /// Largest absolute entry of `M`.
    pub fn max_abs(&self) -> f64 {
        self.m.iter().fold(0.0_f64, |a, &v| a.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutSolution {
    pub x: Vec<i8>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinarySolution {
    pub z: Vec<u8>,
    pub value: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BqpOutcome {
    Optimal(BinarySolution),
    Infeasible,
}

impl BqpOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            BqpOutcome::Optimal(s) => Some(s.value),
            BqpOutcome::Infeasible => None,
        }
    }
}

/// `L = Diag(We) - W`.
pub fn laplacian(w: &Matrix) -> Result<Matrix, InstanceError> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(InstanceError::Dimension(format!("W is {}x{}", w.nrows(), w.ncols())));
    }
    if let Some((i, j)) = is_symmetric(w, 0.0) {
        return Err(InstanceError::NotSymmetric(i, j));
    }
    if let Some(i) = (0..n).find(|&i| w[(i, i)] != 0.0) {
        return Err(InstanceError::NonzeroDiagonal(i));
    }
    let mut l = -w.clone();
    for i in 0..n {
        l[(i, i)] = w.row(i).sum();
    }
    Ok(l)
}

/// Max-Cut as `maximize x'(L/4)x`.
pub fn maxcut_from_graph(w: &Matrix) -> Result<MaxCutProblem, InstanceError> {
    let l = laplacian(w)?;
    let integral = w.iter().all(|&v| is_integer(v));
    Ok(MaxCutProblem::new_unchecked(l / 4.0, 0.0, integral))
}

/// A BQP rewritten in ±1 variables via `x = 2z - e`:
/// `z'Fz + c'z = x'F'x + c''x + constant` and `Az = b <=> Ax = 2b - Ae`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlusMinusForm {
    pub f: Matrix,
    pub c: Vector,
    pub a: Matrix,
    pub b: Vector,
    pub constant: f64,
    pub integral: bool,
}

impl PlusMinusForm {
    /// `x'F'x + c''x` without the constant.
    pub fn objective(&self, x: &[i8]) -> f64 {
        let n = self.f.nrows();
        let mut v = 0.0;
        for i in 0..n {
            let xi = x[i] as f64;
            v += self.c[i] * xi;
            for j in 0..n {
                v += self.f[(i, j)] * xi * x[j] as f64;
            }
        }
        v
    }

    /// `||Ax - b||^2` in ±1 data.
    pub fn violation(&self, x: &[i8]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.a.nrows() {
            let mut r = -self.b[k];
            for i in 0..self.a.ncols() {
                r += self.a[(k, i)] * x[i] as f64;
            }
            s += r * r;
        }
        s
    }
}

pub fn bqp_to_pm1(inst: &BqpInstance) -> PlusMinusForm {
    let n = inst.n();
    let e = Vector::from_element(n, 1.0);
    let fe = inst.f() * &e;
    let f = inst.f() / 4.0;
    let c = (&fe + inst.c()) / 2.0;
    let constant = e.dot(&fe) / 4.0 + inst.c().sum() / 2.0;
    let b = inst.b() * 2.0 - inst.a() * &e;
    PlusMinusForm {
        f,
        c,
        a: inst.a().clone(),
        b,
        constant,
        integral: inst.integral(),
    }
}

pub fn pm1_to_binary(x: &[i8]) -> Vec<u8> {
    x.iter().map(|&v| u8::from(v > 0)).collect()
}

pub fn binary_to_pm1(z: &[u8]) -> Vec<i8> {
    z.iter().map(|&v| if v != 0 { 1 } else { -1 }).collect()
}

/// Exhaustive Max-Cut oracle. The first variable is fixed to +1 by the
/// global flip symmetry, so `2^(size-1)` patterns are visited in Gray-code
/// order.
pub fn brute_force_maxcut(p: &MaxCutProblem) -> Result<CutSolution, InstanceError> {
    let n = p.size();
    if n > BRUTE_FORCE_MAXCUT_CAP {
        return Err(InstanceError::TooLarge { size: n, cap: BRUTE_FORCE_MAXCUT_CAP });
    }
    if n == 0 {
        return Ok(CutSolution { x: vec![], value: p.offset() });
    }
    let m = p.matrix();
    let mut x = vec![1i8; n];
    // field[i] = sum_{j != i} M_ij x_j
    let mut field: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| m[(i, j)]).sum())
        .collect();
    let mut value = p.objective(&x);
    let mut best = value;
    let mut best_x = x.clone();
    let count: u64 = 1u64 << (n - 1);
    for step in 1..count {
        // flip variable k+1 where k is the lowest set bit of step
        let k = step.trailing_zeros() as usize + 1;
        let xk = x[k] as f64;
        value -= 4.0 * xk * field[k];
        x[k] = -x[k];
        for i in 0..n {
            if i != k {
                field[i] -= 2.0 * xk * m[(i, k)];
            }
        }
        if value > best {
            best = value;
            best_x.copy_from_slice(&x);
        }
    }
    // report the exactly recomputed value
    let value = p.objective(&best_x);
    Ok(CutSolution { x: best_x, value })
}

/// Exhaustive BQP oracle over all `2^n` binary vectors.
pub fn brute_force_bqp(inst: &BqpInstance) -> Result<BqpOutcome, InstanceError> {
    let n = inst.n();
    if n > BRUTE_FORCE_BQP_CAP {
        return Err(InstanceError::TooLarge { size: n, cap: BRUTE_FORCE_BQP_CAP });
    }
    let f = inst.f();
    let m = inst.m();
    let mut z = vec![0u8; n];
    let mut value = 0.0;
    let mut residual: Vec<f64> = inst.b().iter().map(|&b| -b).collect();
    // row[i] = sum_j F_ij z_j
    let mut row = vec![0.0; n];
    let mut best: Option<(f64, Vec<u8>)> = None;
    let feasible = |r: &[f64]| {
        if inst.integral() {
            r.iter().all(|&v| v == 0.0)
        } else {
            r.iter().all(|&v| v.abs() <= FEASIBILITY_TOL)
        }
    };
    let total: u64 = 1u64 << n;
    for step in 0..total {
        if step > 0 {
            let k = step.trailing_zeros() as usize;
            let s = if z[k] == 0 { 1.0 } else { -1.0 };
            // (z + s e_k)'F(z + s e_k) - z'Fz = 2 s row_k + F_kk
            value += s * (2.0 * row[k] + inst.c()[k]) + f[(k, k)];
            z[k] = if z[k] == 0 { 1 } else { 0 };
            for i in 0..n {
                row[i] += s * f[(i, k)];
            }
            for (r, kk) in residual.iter_mut().zip(0..m) {
                *r += s * inst.a()[(kk, k)];
            }
        }
        if feasible(&residual) && best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, z.clone()));
        }
    }
    Ok(match best {
        None => BqpOutcome::Infeasible,
        Some((_, z)) => {
            let value = inst.objective(&z);
            BqpOutcome::Optimal(BinarySolution { z, value, feasible: true })
        }
    })
}
