//! Text formats and random instance generators.
//!
//! Graph files: a header `n m` followed by `m` lines `i j w` (1-based,
//! `i != j`, one line per unordered pair).
//!
//! BQP files:
//!
//! ```text
//! n m
//! nF            then nF lines "i j v"  (sets F_ij = F_ji = v)
//! nc            then nc lines "i v"
//! k rhs         then k lines "i v"     (repeated for each of the m rows)
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{InstanceError, ParseError};
use crate::instance::{maxcut_from_graph, BqpInstance, MaxCutProblem};
use crate::linalg::{Matrix, Vector};

/// Integers print without a fraction; anything else with 17 significant
/// digits.
pub fn format_number(v: f64) -> String {
    if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.16e}")
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { inner: text.lines().enumerate() }
    }

    /// Next non-blank line, split into fields.
    fn next_record(&mut self, what: &str) -> Result<(usize, Vec<&'a str>), ParseError> {
        for (i, line) in self.inner.by_ref() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if !fields.is_empty() {
                return Ok((i + 1, fields));
            }
        }
        Err(ParseError::Eof(what.to_string()))
    }

    fn expect_end(&mut self) -> Result<(), ParseError> {
        match self.next_record("") {
            Ok((line, _)) => Err(ParseError::Syntax { line, msg: "unexpected trailing data".into() }),
            Err(_) => Ok(()),
        }
    }
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, msg: msg.into() }
}

fn arity(line: usize, fields: &[&str], n: usize) -> Result<(), ParseError> {
    if fields.len() != n {
        return Err(syntax(line, format!("expected {n} fields, found {}", fields.len())));
    }
    Ok(())
}

fn count(line: usize, s: &str) -> Result<usize, ParseError> {
    s.parse().map_err(|_| syntax(line, format!("invalid count {s:?}")))
}

fn real(line: usize, s: &str) -> Result<f64, ParseError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(syntax(line, format!("invalid number {s:?}"))),
    }
}

/// 1-based index in `1..=n`, returned 0-based.
fn index(line: usize, s: &str, n: usize) -> Result<usize, ParseError> {
    let i: usize = s.parse().map_err(|_| syntax(line, format!("invalid index {s:?}")))?;
    if i == 0 || i > n {
        return Err(syntax(line, format!("index {i} out of range 1..={n}")));
    }
    Ok(i - 1)
}

/// Weighted adjacency matrix from a graph file.
pub fn parse_graph(text: &str) -> Result<Matrix, ParseError> {
    let mut lines = Lines::new(text);
    let (line, h) = lines.next_record("header")?;
    arity(line, &h, 2)?;
    let n = count(line, h[0])?;
    let m = count(line, h[1])?;
    let mut w = Matrix::zeros(n, n);
    let mut seen = vec![false; n * n];
    for _ in 0..m {
        let (line, f) = lines.next_record("edge")?;
        arity(line, &f, 3)?;
        let i = index(line, f[0], n)?;
        let j = index(line, f[1], n)?;
        if i == j {
            return Err(syntax(line, "self loop"));
        }
        let (a, b) = (i.min(j), i.max(j));
        if seen[a * n + b] {
            return Err(syntax(line, format!("duplicate edge {} {}", a + 1, b + 1)));
        }
        seen[a * n + b] = true;
        let v = real(line, f[2])?;
        w[(i, j)] = v;
        w[(j, i)] = v;
    }
    lines.expect_end()?;
    Ok(w)
}

pub fn parse_maxcut(text: &str) -> Result<MaxCutProblem, ParseError> {
    Ok(maxcut_from_graph(&parse_graph(text)?)?)
}

/// Writes the nonzero upper-triangular entries of `w`.
pub fn write_graph(w: &Matrix) -> String {
    let n = w.nrows();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if w[(i, j)] != 0.0 {
                edges.push((i, j, w[(i, j)]));
            }
        }
    }
    let mut out = format!("{} {}\n", n, edges.len());
    for (i, j, v) in edges {
        let _ = writeln!(out, "{} {} {}", i + 1, j + 1, format_number(v));
    }
    out
}

pub fn parse_bqp(text: &str) -> Result<BqpInstance, ParseError> {
    let mut lines = Lines::new(text);
    let (line, h) = lines.next_record("header")?;
    arity(line, &h, 2)?;
    let n = count(line, h[0])?;
    let m = count(line, h[1])?;

    let (line, r) = lines.next_record("quadratic entry count")?;
    arity(line, &r, 1)?;
    let nf = count(line, r[0])?;
    let mut f = Matrix::zeros(n, n);
    let mut seen_f: HashSet<(usize, usize)> = HashSet::new();
    for _ in 0..nf {
        let (line, r) = lines.next_record("quadratic entry")?;
        arity(line, &r, 3)?;
        let i = index(line, r[0], n)?;
        let j = index(line, r[1], n)?;
        let v = real(line, r[2])?;
        if !seen_f.insert((i, j)) {
            return Err(syntax(line, format!("repeated entry for ({}, {})", i + 1, j + 1)));
        }
        if i != j && seen_f.contains(&(j, i)) && f[(j, i)] != v {
            return Err(syntax(line, format!("conflicting entry for ({}, {})", i + 1, j + 1)));
        }
        f[(i, j)] = v;
        f[(j, i)] = v;
    }

    let (line, r) = lines.next_record("linear entry count")?;
    arity(line, &r, 1)?;
    let nc = count(line, r[0])?;
    let mut c = Vector::zeros(n);
    let mut seen = vec![false; n];
    for _ in 0..nc {
        let (line, r) = lines.next_record("linear entry")?;
        arity(line, &r, 2)?;
        let i = index(line, r[0], n)?;
        if seen[i] {
            return Err(syntax(line, format!("repeated linear entry {}", i + 1)));
        }
        seen[i] = true;
        c[i] = real(line, r[1])?;
    }

    let mut a = Matrix::zeros(m, n);
    let mut b = Vector::zeros(m);
    for k in 0..m {
        let (line, r) = lines.next_record("constraint header")?;
        arity(line, &r, 2)?;
        let len = count(line, r[0])?;
        b[k] = real(line, r[1])?;
        let mut seen = vec![false; n];
        for _ in 0..len {
            let (line, r) = lines.next_record("constraint entry")?;
            arity(line, &r, 2)?;
            let i = index(line, r[0], n)?;
            if seen[i] {
                return Err(syntax(line, format!("repeated constraint entry {}", i + 1)));
            }
            seen[i] = true;
            a[(k, i)] = real(line, r[1])?;
        }
    }
    lines.expect_end()?;
    Ok(BqpInstance::new(f, c, a, b)?)
}

pub fn write_bqp(inst: &BqpInstance) -> String {
    let n = inst.n();
    let mut out = format!("{} {}\n", n, inst.m());
    let mut fe = Vec::new();
    for i in 0..n {
        for j in i..n {
            if inst.f()[(i, j)] != 0.0 {
                fe.push((i, j, inst.f()[(i, j)]));
            }
        }
    }
    let _ = writeln!(out, "{}", fe.len());
    for (i, j, v) in fe {
        let _ = writeln!(out, "{} {} {}", i + 1, j + 1, format_number(v));
    }
    let ce: Vec<(usize, f64)> = inst.c().iter().cloned().enumerate().filter(|(_, v)| *v != 0.0).collect();
    let _ = writeln!(out, "{}", ce.len());
    for (i, v) in ce {
        let _ = writeln!(out, "{} {}", i + 1, format_number(v));
    }
    for k in 0..inst.m() {
        let row: Vec<(usize, f64)> = (0..n).map(|i| (i, inst.a()[(k, i)])).filter(|(_, v)| *v != 0.0).collect();
        let _ = writeln!(out, "{} {}", row.len(), format_number(inst.b()[k]));
        for (i, v) in row {
            let _ = writeln!(out, "{} {}", i + 1, format_number(v));
        }
    }
    out
}

/// Densest-k-subgraph as `min z'(-W/2)z  s.t.  e'z = k`.
pub fn encode_dks(w: &Matrix, k: usize) -> Result<BqpInstance, InstanceError> {
    let n = w.nrows();
    crate::instance::laplacian(w)?;
    if k > n {
        return Err(InstanceError::OutOfRange(format!("k = {k} exceeds n = {n}")));
    }
    BqpInstance::new(
        w * -0.5,
        Vector::zeros(n),
        Matrix::from_element(1, n, 1.0),
        Vector::from_element(1, k as f64),
    )
}

#[derive(Debug, Clone)]
pub struct BqpGenParams {
    pub n: usize,
    /// Probability that an entry of `F` (diagonal included) is nonzero.
    pub density_f: f64,
    pub range_f: (i64, i64),
    pub range_a: (i64, i64),
    pub range_b: (i64, i64),
    pub m: usize,
    pub seed: u64,
}

/// Random integral BQP: `F` entries with probability `density_f`, `c`
/// drawn from `range_f`, `A` from `range_a` and `b` from `range_b`, all
/// uniform over the integer ranges.
pub fn gen_random_bqp(p: &BqpGenParams) -> BqpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let n = p.n;
    let uniform = |(lo, hi): (i64, i64), rng: &mut ChaCha8Rng| rng.random_range(lo..=hi) as f64;
    let mut f = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            if rng.random::<f64>() < p.density_f {
                let v = uniform(p.range_f, &mut rng);
                f[(i, j)] = v;
                f[(j, i)] = v;
            }
        }
    }
    let c = Vector::from_fn(n, |_, _| uniform(p.range_f, &mut rng));
    let a = Matrix::from_fn(p.m, n, |_, _| uniform(p.range_a, &mut rng));
    let b = Vector::from_fn(p.m, |_, _| uniform(p.range_b, &mut rng));
    BqpInstance::new(f, c, a, b).expect("generated data is consistent")
}

/// Random graph where each pair is an edge with probability `density` and
/// a nonzero integer weight from `weights`.
pub fn gen_random_graph(n: usize, density: f64, weights: (i64, i64), seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < density {
                let v = rng.random_range(weights.0..=weights.1) as f64;
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
    }
    w
}
