//! Sparse symmetric positive definite systems, backed by faer's sparse
//! Cholesky factorization.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Par, Side};

use crate::error::{Error, Result};

/// Triplet accumulator for a square matrix. Duplicate entries are summed.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<Triplet<usize, usize, f64>>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, val: f64) {
        self.entries.push(Triplet::new(row, col, val));
    }

    /// Adds `scale * a b^T` on the rows `ra` and columns `cb`.
    pub fn add_outer(&mut self, ra: &[usize; 3], a: &[f64; 3], cb: &[usize; 3], b: &[f64; 3], scale: f64) {
        for i in 0..3 {
            for j in 0..3 {
                self.add(ra[i], cb[j], scale * a[i] * b[j]);
            }
        }
    }

    /// A builder with the same entry positions and values `f(row, col, val)`,
    /// so the assembled pattern (and its symbolic factorization) is shared.
    pub fn map_values<F: Fn(usize, usize, f64) -> f64>(&self, f: F) -> TripletBuilder {
        TripletBuilder {
            n: self.n,
            entries: self
                .entries
                .iter()
                .map(|e| Triplet::new(e.row, e.col, f(e.row, e.col, e.val)))
                .collect(),
        }
    }

    pub fn build(&self) -> Result<SparseMatrix> {
        let a = SparseColMat::try_new_from_triplets(self.n, self.n, &self.entries)
            .map_err(|e| Error::SingularSystem(format!("matrix assembly failed: {e:?}")))?;
        Ok(SparseMatrix { a })
    }
}

#[derive(Debug, Clone)]
pub struct SparseMatrix {
    a: SparseColMat<usize, f64>,
}

impl SparseMatrix {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn nnz(&self) -> usize {
        self.a.compute_nnz()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        let col_ptr = self.a.symbolic().col_ptr();
        let row_idx = self.a.symbolic().row_idx();
        let val = self.a.val();
        for j in 0..self.dim() {
            let xj = x[j];
            for k in col_ptr[j]..col_ptr[j + 1] {
                y[row_idx[k]] += val[k] * xj;
            }
        }
        y
    }

    /// Entry `(i, j)`, zero if not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let col_ptr = self.a.symbolic().col_ptr();
        let row_idx = self.a.symbolic().row_idx();
        let val = self.a.val();
        (col_ptr[j]..col_ptr[j + 1])
            .find(|&k| row_idx[k] == i)
            .map_or(0.0, |k| val[k])
    }

    /// Largest `|a_ij - a_ji|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let col_ptr = self.a.symbolic().col_ptr();
        let row_idx = self.a.symbolic().row_idx();
        let val = self.a.val();
        let mut worst = 0.0f64;
        for j in 0..self.dim() {
            for k in col_ptr[j]..col_ptr[j + 1] {
                let i = row_idx[k];
                worst = worst.max((val[k] - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let col_ptr = self.a.symbolic().col_ptr();
        let row_idx = self.a.symbolic().row_idx();
        let val = self.a.val();
        let mut rows = vec![0.0; self.dim()];
        for j in 0..self.dim() {
            for k in col_ptr[j]..col_ptr[j + 1] {
                rows[row_idx[k]] += val[k].abs();
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.a.val().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn factorize(&self) -> Result<Cholesky> {
        faer::set_global_parallelism(Par::Seq);
        let symbolic = SymbolicLlt::try_new(self.a.symbolic(), Side::Lower)
            .map_err(|e| Error::SingularSystem(format!("symbolic factorization failed: {e:?}")))?;
        self.factorize_with(&symbolic)
    }

    /// Numeric factorization reusing the symbolic analysis of a matrix with
    /// the same sparsity pattern.
    pub fn factorize_with(&self, symbolic: &SymbolicLlt<usize>) -> Result<Cholesky> {
        faer::set_global_parallelism(Par::Seq);
        let llt = Llt::try_new_with_symbolic(symbolic.clone(), self.a.as_ref(), Side::Lower)
            .map_err(|e| Error::SingularSystem(format!("matrix is not positive definite: {e:?}")))?;
        Ok(Cholesky {
            llt,
            symbolic: symbolic.clone(),
        })
    }
}

pub struct Cholesky {
    llt: Llt<usize, f64>,
    symbolic: SymbolicLlt<usize>,
}

impl Cholesky {
    pub fn symbolic(&self) -> &SymbolicLlt<usize> {
        &self.symbolic
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.llt.solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Outcome of a linear solve.
#[derive(Debug, Clone, Copy)]
pub struct LinearSolveInfo {
    /// `||A x - b|| / ||b||` (absolute when `b = 0`).
    pub relative_residual: f64,
    /// Normwise backward error `||A x - b|| / (||A|| ||x|| + ||b||)` in the
    /// maximum norm.
    pub backward_error: f64,
    pub refinement_steps: usize,
}

/// Solves `A x = b` by Cholesky with up to three steps of iterative
/// refinement until the relative residual is below `rel_tol`.
pub fn solve_refined(a: &SparseMatrix, chol: &Cholesky, b: &[f64], rel_tol: f64) -> (Vec<f64>, LinearSolveInfo) {
    let bnorm = norm2(b);
    let mut x = chol.solve(b);
    let residual = |x: &[f64]| {
        let ax = a.matvec(x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        r
    };
    let mut r = residual(&x);
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut rel = norm2(&r) / scale;
    let mut steps = 0;
    while rel > rel_tol && steps < 3 {
        let dx = chol.solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        r = residual(&x);
        let next = norm2(&r) / scale;
        steps += 1;
        if next >= rel {
            rel = next;
            break;
        }
        rel = next;
    }
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let backward_error = sup(&r) / (a.norm_inf() * sup(&x) + sup(b)).max(f64::MIN_POSITIVE);
    (
        x,
        LinearSolveInfo {
            relative_residual: rel,
            backward_error,
            refinement_steps: steps,
        },
    )
}
