//! Thin wrapper over a sparse LDLᵀ factorization restricted to SPD matrices.

use sprs::{CsMat, FillInReduction, PermOwnedI, SymmetryCheck, TriMat};
use sprs_ldl::{Ldl, LdlNumeric};

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum FactorError {
    #[error("matrix is singular at pivot {0}")]
    Singular(usize),
    #[error("matrix is not positive definite (pivot {index} = {value:e})")]
    NotPositiveDefinite { index: usize, value: f64 },
    #[error("factorization failed: {0}")]
    Other(String),
}

/// Factorized symmetric positive definite matrix.
pub(crate) struct SpdSolver {
    ldl: LdlNumeric<f64, usize>,
    n: usize,
}

impl std::fmt::Debug for SpdSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpdSolver").field("n", &self.n).finish()
    }
}

impl SpdSolver {
    /// Factorizes `mat` (full symmetric storage, CSC) under an approximate
    /// minimum degree ordering, or reverse Cuthill-McKee if that fails.
    pub fn new(mat: &CsMat<f64>) -> Result<Self, FactorError> {
        let ldl = match amd_permutation(mat) {
            Some(perm) => LdlNumeric::new_perm(mat.view(), perm, SymmetryCheck::CheckSymmetry),
            None => Ldl::new()
                .fill_in_reduction(FillInReduction::ReverseCuthillMcKee)
                .numeric(mat.view()),
        }
        .map_err(map_err)?;
        let solver = Self { ldl, n: mat.rows() };
        solver.check_pivots()?;
        Ok(solver)
    }

    /// Refactorizes a matrix with the same sparsity pattern, keeping the
    /// symbolic analysis.
    pub fn update(&mut self, mat: &CsMat<f64>) -> Result<(), FactorError> {
        self.ldl.update(mat.view()).map_err(map_err)?;
        self.check_pivots()
    }

    fn check_pivots(&self) -> Result<(), FactorError> {
        for (index, &value) in self.ldl.d().iter().enumerate() {
            if !(value > 0.0) {
                return Err(FactorError::NotPositiveDefinite { index, value });
            }
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(rhs.len(), self.n);
        self.ldl.solve(rhs)
    }

    /// Non-zeros in the factor `L`.
    #[cfg(test)]
    pub fn factor_nnz(&self) -> usize {
        self.ldl.nnz()
    }
}

fn amd_permutation(mat: &CsMat<f64>) -> Option<PermOwnedI<usize>> {
    let csc = if mat.is_csc() { mat.clone() } else { mat.to_csc() };
    let indptr = csc.indptr();
    let (perm, _, _) = amd::order(csc.cols(), indptr.raw_storage(), csc.indices(), &amd::Control::default()).ok()?;
    Some(PermOwnedI::new(perm))
}

fn map_err(e: sprs::errors::LinalgError) -> FactorError {
    match e {
        sprs::errors::LinalgError::SingularMatrix(info) => FactorError::Singular(info.index),
        other => FactorError::Other(other.to_string()),
    }
}

/// Builds a CSC matrix from triplets, summing duplicates.
pub(crate) fn csc_from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> CsMat<f64> {
    let mut t = TriMat::with_capacity((n, n), triplets.len());
    for &(i, j, v) in triplets {
        t.add_triplet(i, j, v);
    }
    t.to_csc()
}
