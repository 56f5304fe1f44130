//! Compressed-sparse-row matrices and preconditioned Krylov solvers.
//!
//! The density and potential updates assemble symmetric, strictly or weakly
//! diagonally dominant systems, so conjugate gradient with a Jacobi or ILU(0)
//! preconditioner is the default path; BiCGStab is kept as a fallback. All
//! kernels are sequential and deterministic for fixed inputs.

use std::io::Write;

use crate::error::{Error, Result};

/// Square sparse matrix in compressed-sparse-row format. Column indices are
/// strictly increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row entry lists. Each row must have strictly increasing
    /// column indices within bounds.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} rows for matrix of size {n}",
                rows.len()
            )));
        }
        let nnz: usize = rows.iter().map(|r| r.len()).sum();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for (i, row) in rows.into_iter().enumerate() {
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if j >= n {
                    return Err(Error::DimensionMismatch(format!(
                        "column {j} out of bounds in row {i}"
                    )));
                }
                if let Some(prev) = last {
                    if j <= prev {
                        return Err(Error::DimensionMismatch(format!(
                            "columns not strictly increasing in row {i}"
                        )));
                    }
                }
                last = Some(j);
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Assemble from raw CSR arrays. Callers must supply strictly increasing
    /// columns per row; checked in debug builds.
    pub(crate) fn from_parts(
        n: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(row_ptr.len(), n + 1);
        debug_assert_eq!(col_idx.len(), values.len());
        debug_assert_eq!(*row_ptr.last().unwrap(), col_idx.len());
        #[cfg(debug_assertions)]
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                debug_assert!(col_idx[k] < n);
                if k > row_ptr[i] {
                    debug_assert!(col_idx[k] > col_idx[k - 1]);
                }
            }
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// Entry (i, j), 0 if not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    /// y = A x
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    /// A x as a new vector.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for matrix of size {}",
                x.len(),
                self.n
            )));
        }
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max_{i,j} |A_ij - A_ji|, treating missing entries as zero.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Sum of each row (all zero for a pure-Neumann potential matrix).
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).1.iter().sum())
            .collect()
    }
}

/// Krylov method selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrylovMethod {
    Cg,
    BiCgStab,
}

/// Preconditioner selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Jacobi,
    Ilu0,
}

/// Linear solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: KrylovMethod,
    pub preconditioner: Preconditioner,
    /// Relative residual tolerance on ||b - A x|| / ||b||.
    pub tol: f64,
    /// Maximum iterations; `None` means 10 * n.
    pub max_iter: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: KrylovMethod::Cg,
            preconditioner: Preconditioner::Ilu0,
            tol: 1e-10,
            max_iter: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidScenario(format!(
                "solver tolerance must lie in (0,1), got {}",
                self.tol
            )));
        }
        if let Some(m) = self.max_iter {
            if m == 0 {
                return Err(Error::InvalidScenario(
                    "solver max_iter must be at least 1".into(),
                ));
            }
        }
        Ok(())
    }

    fn max_iter_for(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(10 * n.max(1))
    }
}

/// Iteration count and final relative residual of a solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

enum Precond {
    None,
    Jacobi(Vec<f64>),
    Ilu0(Ilu0),
}

impl Precond {
    fn build(kind: Preconditioner, a: &CsrMatrix) -> Result<Self> {
        Ok(match kind {
            Preconditioner::None => Precond::None,
            Preconditioner::Jacobi => {
                let mut inv = vec![0.0; a.n()];
                for i in 0..a.n() {
                    let d = a.get(i, i);
                    if d.abs() < 1e-300 {
                        return Err(Error::SolverBreakdown(format!(
                            "zero diagonal at row {i} in Jacobi preconditioner"
                        )));
                    }
                    inv[i] = 1.0 / d;
                }
                Precond::Jacobi(inv)
            }
            Preconditioner::Ilu0 => Precond::Ilu0(Ilu0::factor(a)?),
        })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::None => z.copy_from_slice(r),
            Precond::Jacobi(inv) => {
                for i in 0..r.len() {
                    z[i] = inv[i] * r[i];
                }
            }
            Precond::Ilu0(f) => f.solve(r, z),
        }
    }
}

/// ILU(0) factorization sharing the CSR pattern of A.
struct Ilu0 {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        let row_ptr = a.row_ptr.clone();
        let col_idx = a.col_idx.clone();
        let mut values = a.values.clone();
        let mut diag_pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                if col_idx[k] == i {
                    diag_pos[i] = k;
                }
            }
            if diag_pos[i] == usize::MAX {
                return Err(Error::SolverBreakdown(format!(
                    "missing diagonal entry in row {i}"
                )));
            }
        }
        let max_diag = (0..n)
            .map(|i| values[diag_pos[i]].abs())
            .fold(0.0f64, f64::max);
        // Floor for pivots: the pure-Neumann potential matrix is singular and
        // its exact last pivot vanishes.
        let pivot_floor = (1e-12 * max_diag).max(1e-300);
        for i in 0..n {
            let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
            for kk in lo..hi {
                let k = col_idx[kk];
                if k >= i {
                    break;
                }
                let pivot = values[diag_pos[k]];
                let factor = values[kk] / pivot;
                values[kk] = factor;
                // update remaining entries of row i against row k
                for jj in (kk + 1)..hi {
                    let j = col_idx[jj];
                    // find (k, j)
                    let (klo, khi) = (row_ptr[k], row_ptr[k + 1]);
                    if let Ok(p) = col_idx[klo..khi].binary_search(&j) {
                        values[jj] -= factor * values[klo + p];
                    }
                }
            }
            let dp = diag_pos[i];
            if values[dp].abs() < pivot_floor {
                values[dp] = if values[dp] >= 0.0 {
                    pivot_floor
                } else {
                    -pivot_floor
                };
            }
        }
        Ok(Ilu0 {
            n,
            row_ptr,
            col_idx,
            values,
            diag_pos,
        })
    }

    /// Solve L U z = r (L unit lower triangular).
    fn solve(&self, r: &[f64], z: &mut [f64]) {
        // forward
        for i in 0..self.n {
            let mut acc = r[i];
            for k in self.row_ptr[i]..self.diag_pos[i] {
                acc -= self.values[k] * z[self.col_idx[k]];
            }
            z[i] = acc;
        }
        // backward
        for i in (0..self.n).rev() {
            let mut acc = z[i];
            for k in (self.diag_pos[i] + 1)..self.row_ptr[i + 1] {
                acc -= self.values[k] * z[self.col_idx[k]];
            }
            z[i] = acc / self.values[self.diag_pos[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn subtract_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

/// Solve A x = b to the configured relative residual.
///
/// Deterministic for fixed inputs. Errors on non-convergence (carrying the
/// final residual) and on recurrence breakdown.
pub fn solve(
    a: &CsrMatrix,
    b: &[f64],
    config: &SolverConfig,
    initial_guess: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveStats)> {
    solve_with_options(a, b, config, initial_guess, false)
}

/// As [`solve`], but optionally deflating the constant vector from every
/// preconditioned residual; used for singular-but-consistent pure-Neumann
/// systems whose null space is exactly the constants.
pub(crate) fn solve_with_options(
    a: &CsrMatrix,
    b: &[f64],
    config: &SolverConfig,
    initial_guess: Option<&[f64]>,
    project_constants: bool,
) -> Result<(Vec<f64>, SolveStats)> {
    if b.len() != a.n() {
        return Err(Error::DimensionMismatch(format!(
            "rhs of length {} for matrix of size {}",
            b.len(),
            a.n()
        )));
    }
    if let Some(g) = initial_guess {
        if g.len() != a.n() {
            return Err(Error::DimensionMismatch(format!(
                "initial guess of length {} for matrix of size {}",
                g.len(),
                a.n()
            )));
        }
    }
    let norm_b = norm2(b);
    if norm_b == 0.0 {
        return Ok((
            vec![0.0; a.n()],
            SolveStats {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let precond = Precond::build(config.preconditioner, a)?;
    match config.method {
        KrylovMethod::Cg => cg(a, b, config, initial_guess, &precond, project_constants),
        KrylovMethod::BiCgStab => bicgstab(a, b, config, initial_guess, &precond, project_constants),
    }
}

fn cg(
    a: &CsrMatrix,
    b: &[f64],
    config: &SolverConfig,
    initial_guess: Option<&[f64]>,
    precond: &Precond,
    project: bool,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.n();
    let norm_b = norm2(b);
    let max_iter = config.max_iter_for(n);
    let mut x = match initial_guess {
        Some(g) => g.to_vec(),
        None => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    a.matvec_into(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if project {
        subtract_mean(&mut r);
    }
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    if project {
        subtract_mean(&mut z);
    }
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = norm2(&r) / norm_b;
    for iter in 0..max_iter {
        if res <= config.tol {
            return Ok((
                x,
                SolveStats {
                    iterations: iter,
                    residual: res,
                },
            ));
        }
        a.matvec_into(&p, &mut q);
        let pq = dot(&p, &q);
        if pq.abs() < 1e-300 {
            return Err(Error::SolverBreakdown(
                "vanishing curvature p'Ap in conjugate gradient".into(),
            ));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if project {
            subtract_mean(&mut r);
        }
        precond.apply(&r, &mut z);
        if project {
            subtract_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        if rz.abs() < 1e-300 {
            return Err(Error::SolverBreakdown(
                "vanishing r'z in conjugate gradient".into(),
            ));
        }
        let beta = rz_new / rz;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_new;
        res = norm2(&r) / norm_b;
    }
    Err(Error::SolverStagnated {
        iterations: max_iter,
        residual: res,
    })
}

fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    config: &SolverConfig,
    initial_guess: Option<&[f64]>,
    precond: &Precond,
    project: bool,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.n();
    let norm_b = norm2(b);
    let max_iter = config.max_iter_for(n);
    let mut x = match initial_guess {
        Some(g) => g.to_vec(),
        None => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    a.matvec_into(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if project {
        subtract_mean(&mut r);
    }
    let r_hat = r.clone();
    let mut rho = 1.0f64;
    let mut alpha = 1.0f64;
    let mut omega = 1.0f64;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut res = norm2(&r) / norm_b;
    for iter in 0..max_iter {
        if res <= config.tol {
            return Ok((
                x,
                SolveStats {
                    iterations: iter,
                    residual: res,
                },
            ));
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 {
            return Err(Error::SolverBreakdown(
                "vanishing rho in BiCGStab recurrence".into(),
            ));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond.apply(&p, &mut p_hat);
        if project {
            subtract_mean(&mut p_hat);
        }
        a.matvec_into(&p_hat, &mut v);
        let rv = dot(&r_hat, &v);
        if rv.abs() < 1e-300 {
            return Err(Error::SolverBreakdown(
                "vanishing r_hat'v in BiCGStab recurrence".into(),
            ));
        }
        alpha = rho_new / rv;
        // s = r - alpha v (reuse r)
        for i in 0..n {
            r[i] -= alpha * v[i];
        }
        if norm2(&r) / norm_b <= config.tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            res = norm2(&r) / norm_b;
            return Ok((
                x,
                SolveStats {
                    iterations: iter + 1,
                    residual: res,
                },
            ));
        }
        precond.apply(&r, &mut s_hat);
        if project {
            subtract_mean(&mut s_hat);
        }
        a.matvec_into(&s_hat, &mut t);
        let tt = dot(&t, &t);
        if tt.abs() < 1e-300 {
            return Err(Error::SolverBreakdown(
                "vanishing t't in BiCGStab recurrence".into(),
            ));
        }
        omega = dot(&t, &r) / tt;
        if omega.abs() < 1e-300 {
            return Err(Error::SolverBreakdown(
                "vanishing omega in BiCGStab recurrence".into(),
            ));
        }
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] -= omega * t[i];
        }
        rho = rho_new;
        res = norm2(&r) / norm_b;
    }
    Err(Error::SolverStagnated {
        iterations: max_iter,
        residual: res,
    })
}

/// Dump a matrix in MatrixMarket coordinate format (1-based indices).
pub fn write_matrix_market<W: Write>(m: &CsrMatrix, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.n(), m.n(), m.nnz())?;
    for i in 0..m.n() {
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> CsrMatrix {
        CsrMatrix::from_rows(2, vec![vec![(0, 2.0), (1, -1.0)], vec![(0, -1.0), (1, 2.0)]])
            .unwrap()
    }

    #[test]
    fn matvec_examples() {
        let id = CsrMatrix::identity(3);
        let x = vec![1.0, -2.0, 3.5];
        assert_eq!(id.matvec(&x).unwrap(), x);

        let a = two_by_two();
        assert_eq!(a.matvec(&[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);

        let zero = CsrMatrix::from_rows(2, vec![vec![], vec![]]).unwrap();
        assert_eq!(zero.matvec(&[4.0, 5.0]).unwrap(), vec![0.0, 0.0]);

        assert!(a.matvec(&[1.0]).is_err());
    }

    #[test]
    fn builder_rejects_bad_rows() {
        assert!(CsrMatrix::from_rows(2, vec![vec![(0, 1.0), (0, 2.0)], vec![]]).is_err());
        assert!(CsrMatrix::from_rows(2, vec![vec![(1, 1.0), (0, 2.0)], vec![]]).is_err());
        assert!(CsrMatrix::from_rows(2, vec![vec![(2, 1.0)], vec![]]).is_err());
        assert!(CsrMatrix::from_rows(2, vec![vec![]]).is_err());
    }

    #[test]
    fn identity_solve() {
        let a = CsrMatrix::identity(3);
        let b = vec![1.0, 2.0, 3.0];
        for method in [KrylovMethod::Cg, KrylovMethod::BiCgStab] {
            let cfg = SolverConfig {
                method,
                ..SolverConfig::default()
            };
            let (x, stats) = solve(&a, &b, &cfg, None).unwrap();
            for i in 0..3 {
                assert!((x[i] - b[i]).abs() < 1e-12);
            }
            assert!(stats.iterations <= 1);
        }
    }

    #[test]
    fn hand_solved_two_by_two() {
        // A = [[2,-1],[-1,2]], b = [2,0] has solution [4/3, 2/3]
        let a = two_by_two();
        let b = vec![2.0, 0.0];
        for pc in [
            Preconditioner::None,
            Preconditioner::Jacobi,
            Preconditioner::Ilu0,
        ] {
            for method in [KrylovMethod::Cg, KrylovMethod::BiCgStab] {
                let cfg = SolverConfig {
                    method,
                    preconditioner: pc,
                    tol: 1e-12,
                    max_iter: None,
                };
                let (x, _) = solve(&a, &b, &cfg, None).unwrap();
                assert!((x[0] - 4.0 / 3.0).abs() < 1e-10, "{method:?} {pc:?}");
                assert!((x[1] - 2.0 / 3.0).abs() < 1e-10, "{method:?} {pc:?}");
            }
        }
    }

    #[test]
    fn residual_contract_on_laplacian() {
        // 1D Dirichlet Laplacian, n = 40
        let n = 40;
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::new();
            if i > 0 {
                row.push((i - 1, -1.0));
            }
            row.push((i, 2.0));
            if i + 1 < n {
                row.push((i + 1, -1.0));
            }
            rows.push(row);
        }
        let a = CsrMatrix::from_rows(n, rows).unwrap();
        let b: Vec<f64> = (0..n).map(|i| ((i * 37 + 11) % 17) as f64 - 8.0).collect();
        for pc in [
            Preconditioner::None,
            Preconditioner::Jacobi,
            Preconditioner::Ilu0,
        ] {
            let cfg = SolverConfig {
                method: KrylovMethod::Cg,
                preconditioner: pc,
                tol: 1e-11,
                max_iter: None,
            };
            let (x, stats) = solve(&a, &b, &cfg, None).unwrap();
            let r = a.matvec(&x).unwrap();
            let num: f64 = r
                .iter()
                .zip(&b)
                .map(|(ax, bb)| (bb - ax) * (bb - ax))
                .sum::<f64>()
                .sqrt();
            let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(num / den <= 1e-10, "{pc:?}: {}", num / den);
            // ILU(0) of a tridiagonal matrix is its exact factorization
            if pc == Preconditioner::Ilu0 {
                assert!(stats.iterations <= 2, "took {}", stats.iterations);
            }
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let a = two_by_two();
        let cfg = SolverConfig {
            method: KrylovMethod::Cg,
            preconditioner: Preconditioner::None,
            tol: 1e-14,
            max_iter: Some(1),
        };
        let err = solve(&a, &[2.0, 0.0], &cfg, None).unwrap_err();
        match err {
            Error::SolverStagnated { residual, .. } => assert!(residual > 1e-14),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn warm_start_is_accepted() {
        let a = two_by_two();
        let b = vec![2.0, 0.0];
        let exact = [4.0 / 3.0, 2.0 / 3.0];
        let cfg = SolverConfig::default();
        let (x, stats) = solve(&a, &b, &cfg, Some(&exact)).unwrap();
        assert_eq!(stats.iterations, 0);
        assert!((x[0] - exact[0]).abs() < 1e-12);
    }

    #[test]
    fn matrix_market_dump() {
        let a = two_by_two();
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general"));
        assert!(text.contains("2 2 4"));
        assert!(text.contains("1 1 2.0000000000000000e0"));
    }

    #[test]
    fn asymmetry_measure() {
        let a = two_by_two();
        assert_eq!(a.max_asymmetry(), 0.0);
        let b = CsrMatrix::from_rows(2, vec![vec![(0, 1.0), (1, 3.0)], vec![(1, 1.0)]]).unwrap();
        assert_eq!(b.max_asymmetry(), 3.0);
    }
}
