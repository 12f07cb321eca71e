//! Compressed sparse row matrices and an (optionally Jacobi-preconditioned)
//! conjugate gradient solver.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: matrix is {n}x{n}, vector has length {len}")]
    DimensionMismatch { n: usize, len: usize },
    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("matrix is not positive definite: pᵀAp = {curvature:e} at iteration {iteration}")]
    Indefinite { iteration: usize, curvature: f64 },
    #[error("relative tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("triplet ({row}, {col}) outside a {n}x{n} matrix")]
    IndexOutOfRange { row: usize, col: usize, n: usize },
}

/// Coordinate-format accumulator; duplicates are summed on compression.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self { n, entries: Vec::with_capacity(cap) }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push((row, col, value));
    }

    /// Compresses to CSR. `symmetric` records a structural claim that is
    /// verified entrywise to 1e-12 relative.
    pub fn build(mut self, symmetric: bool) -> Result<SparseMatrix, LinalgError> {
        if let Some(&(row, col, _)) = self.entries.iter().find(|(r, c, _)| *r >= self.n || *c >= self.n) {
            return Err(LinalgError::IndexOutOfRange { row, col, n: self.n });
        }
        // Stable sort keeps the summation order of duplicates deterministic.
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let m = SparseMatrix { n: self.n, row_ptr, col_idx, values, symmetric: false };
        let symmetric = symmetric && m.is_symmetric(1e-12);
        Ok(SparseMatrix { symmetric, ..m })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseMatrix {
    pub fn identity(n: usize) -> Self {
        Self { n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: vec![1.0; n], symmetric: true }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let n = rows.len();
        let mut b = TripletBuilder::new(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(LinalgError::DimensionMismatch { n, len: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    b.add(i, j, v);
                }
            }
        }
        b.build(true)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Whether the matrix was verified symmetric on construction.
    pub fn is_flagged_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Entrywise `|a_ij - a_ji| ≤ tol · max|a|`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (0..self.n).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol * scale))
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.n {
            return Err(LinalgError::DimensionMismatch { n: self.n, len: x.len() });
        }
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `‖Ax - b‖₂`.
    pub fn residual_norm(&self, x: &[f64], b: &[f64]) -> Result<f64, LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::DimensionMismatch { n: self.n, len: b.len() });
        }
        let ax = self.matvec(x)?;
        Ok(ax.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
    }

    /// `xᵀAx`.
    pub fn quad_form(&self, x: &[f64]) -> Result<f64, LinalgError> {
        Ok(dot(x, &self.matvec(x)?))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
    pub jacobi: bool,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-11, max_iter: 100_000, jacobi: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// True relative residual `‖Ax - b‖ / ‖b‖` of the returned iterate.
    pub residual: f64,
}

/// Solves `Ax = b` for symmetric positive definite `A`, starting from zero.
///
/// Convergence is declared on the recursively updated residual and then
/// confirmed on the true residual; if rounding has let the two drift apart
/// the iteration restarts from the current iterate.
pub fn cg_solve(a: &SparseMatrix, b: &[f64], opts: &CgOptions) -> Result<CgSolution, LinalgError> {
    if !(opts.rel_tol > 0.0) {
        return Err(LinalgError::InvalidTolerance(opts.rel_tol));
    }
    let n = a.dim();
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch { n, len: b.len() });
    }
    let b_norm = norm2(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(CgSolution { x, iterations: 0, residual: 0.0 });
    }
    let target = opts.rel_tol * b_norm;
    let inv_diag: Option<Vec<f64>> = opts.jacobi.then(|| {
        a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect()
    });
    let precondition = |r: &[f64], z: &mut [f64]| match &inv_diag {
        Some(m) => z.iter_mut().zip(r.iter().zip(m)).for_each(|(z, (r, m))| *z = r * m),
        None => z.copy_from_slice(r),
    };

    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let mut restarts = 0;

    'outer: loop {
        precondition(&r, &mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        loop {
            if norm2(&r) <= target {
                break;
            }
            if iterations >= opts.max_iter {
                let residual = a.residual_norm(&x, b)? / b_norm;
                return Err(LinalgError::NotConverged { iterations, residual });
            }
            a.matvec_into(&p, &mut ap);
            let curvature = dot(&p, &ap);
            if !(curvature > 0.0) {
                return Err(LinalgError::Indefinite { iteration: iterations, curvature });
            }
            let alpha = rz / curvature;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }

        a.matvec_into(&x, &mut ap);
        for i in 0..n {
            r[i] = b[i] - ap[i];
        }
        let true_res = norm2(&r);
        if true_res <= target {
            return Ok(CgSolution { x, iterations, residual: true_res / b_norm });
        }
        restarts += 1;
        if restarts > 5 {
            return Err(LinalgError::NotConverged { iterations, residual: true_res / b_norm });
        }
        continue 'outer;
    }
}
