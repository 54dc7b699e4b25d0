//! Equality-form conic programs with sparse data.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::symspace::{BlockStructure, SymBlockMatrix, SQRT2};

/// A symmetric block matrix stored as `(svec coordinate, entry value)` pairs.
///
/// Values are plain matrix entries (no √2 scaling); coordinates are sorted
/// and unique.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseSym {
    entries: Vec<(usize, f64)>,
}

impl SparseSym {
    /// Sums duplicates, drops zeros, sorts by coordinate.
    pub fn from_entries(mut entries: Vec<(usize, f64)>) -> Self {
        entries.sort_by_key(|e| e.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (c, v) in entries {
            match out.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => out.push((c, v)),
            }
        }
        out.retain(|e| e.1 != 0.0);
        Self { entries: out }
    }

    /// Entries of `x` whose magnitude exceeds `chop`.
    pub fn from_dense(x: &SymBlockMatrix, chop: f64) -> Self {
        let s = x.structure();
        let mut entries = Vec::new();
        for (k, &n) in s.orders().iter().enumerate() {
            for j in 0..n {
                for i in 0..=j {
                    let v = x.get(k, i, j);
                    if v.abs() > chop {
                        entries.push((s.coord(k, i, j), v));
                    }
                }
            }
        }
        Self { entries }
    }

    pub fn from_svec(structure: &BlockStructure, v: &DVector<f64>, chop: f64) -> Self {
        Self::from_dense(&SymBlockMatrix::from_svec(structure, v), chop)
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Nonzeros in full (both-triangle) storage.
    pub fn nnz_full(&self, structure: &BlockStructure) -> usize {
        self.entries
            .iter()
            .map(|&(c, _)| {
                let (_, i, j) = structure.entry(c);
                if i == j {
                    1
                } else {
                    2
                }
            })
            .sum()
    }

    pub fn to_dense(&self, structure: &BlockStructure) -> SymBlockMatrix {
        let mut x = SymBlockMatrix::zeros(structure);
        for &(c, v) in &self.entries {
            let (k, i, j) = structure.entry(c);
            x.set(k, i, j, v);
        }
        x
    }

    /// Sparse svec coordinates (off-diagonal values scaled by √2).
    pub fn svec_sparse(&self, structure: &BlockStructure) -> Vec<(usize, f64)> {
        self.entries
            .iter()
            .map(|&(c, v)| {
                let (_, i, j) = structure.entry(c);
                (c, if i == j { v } else { v * SQRT2 })
            })
            .collect()
    }

    pub fn svec(&self, structure: &BlockStructure) -> DVector<f64> {
        let mut out = DVector::zeros(structure.dim());
        for (c, v) in self.svec_sparse(structure) {
            out[c] = v;
        }
        out
    }

    /// `⟨self, X⟩` for an svec vector `x`.
    pub fn dot_svec(&self, structure: &BlockStructure, x: &DVector<f64>) -> f64 {
        self.svec_sparse(structure).iter().map(|&(c, v)| v * x[c]).sum()
    }
}

/// `minimize ⟨C, X⟩ subject to ⟨A_i, X⟩ = b_i, X ⪰ 0` over a block structure.
#[derive(Clone, Debug, PartialEq)]
pub struct ConicProgram {
    pub name: String,
    pub structure: BlockStructure,
    pub cost: SparseSym,
    pub constraints: Vec<SparseSym>,
    pub b: Vec<f64>,
}

impl ConicProgram {
    pub fn new(
        name: impl Into<String>,
        structure: BlockStructure,
        cost: SparseSym,
        constraints: Vec<SparseSym>,
        b: Vec<f64>,
    ) -> Result<Self> {
        if constraints.len() != b.len() {
            return Err(Error::Domain(format!(
                "{} constraint matrices but {} right-hand sides",
                constraints.len(),
                b.len()
            )));
        }
        let dim = structure.dim();
        let in_range = |s: &SparseSym| s.entries().iter().all(|&(c, _)| c < dim);
        if !in_range(&cost) || !constraints.iter().all(in_range) {
            return Err(Error::StructureMismatch);
        }
        Ok(Self { name: name.into(), structure, cost, constraints, b })
    }

    /// Builds from dense data, dropping entries of magnitude `≤ chop`.
    pub fn from_dense(
        name: impl Into<String>,
        cost: &SymBlockMatrix,
        constraints: &[SymBlockMatrix],
        b: Vec<f64>,
        chop: f64,
    ) -> Result<Self> {
        let structure = cost.structure().clone();
        for a in constraints {
            if a.structure() != &structure {
                return Err(Error::StructureMismatch);
            }
        }
        Self::new(
            name,
            structure,
            SparseSym::from_dense(cost, chop),
            constraints.iter().map(|a| SparseSym::from_dense(a, chop)).collect(),
            b,
        )
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    /// Nonzeros of the constraint matrices in full storage.
    pub fn nnz(&self) -> usize {
        self.constraints.iter().map(|a| a.nnz_full(&self.structure)).sum()
    }

    /// Nonzeros of the cost matrix in full storage.
    pub fn nnz_cost(&self) -> usize {
        self.cost.nnz_full(&self.structure)
    }

    pub fn cost_matrix(&self) -> SymBlockMatrix {
        self.cost.to_dense(&self.structure)
    }

    pub fn constraint_matrix(&self, i: usize) -> SymBlockMatrix {
        self.constraints[i].to_dense(&self.structure)
    }

    pub fn objective(&self, x: &SymBlockMatrix) -> f64 {
        self.cost.dot_svec(&self.structure, &x.svec())
    }

    /// `max_i |⟨A_i, X⟩ − b_i| / max(1, |b_i|)`.
    pub fn primal_residual(&self, x: &SymBlockMatrix) -> f64 {
        let v = x.svec();
        self.constraints
            .iter()
            .zip(&self.b)
            .map(|(a, &b)| (a.dot_svec(&self.structure, &v) - b).abs() / b.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    /// `C − Σ y_i A_i`.
    pub fn dual_slack(&self, y: &[f64]) -> SymBlockMatrix {
        let mut s = self.cost.svec(&self.structure);
        for (a, &yi) in self.constraints.iter().zip(y) {
            for (c, v) in a.svec_sparse(&self.structure) {
                s[c] -= yi * v;
            }
        }
        SymBlockMatrix::from_svec(&self.structure, &s)
    }

    pub fn dual_objective(&self, y: &[f64]) -> f64 {
        self.b.iter().zip(y).map(|(b, y)| b * y).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_sums_duplicates_and_counts_full_storage() {
        let s = BlockStructure::new(vec![2, 1]).unwrap();
        let a = SparseSym::from_entries(vec![(1, 1.0), (0, 2.0), (1, 0.5), (3, 0.0)]);
        assert_eq!(a.entries(), &[(0, 2.0), (1, 1.5)]);
        assert_eq!(a.nnz_full(&s), 3);
        let d = a.to_dense(&s);
        assert_eq!(d.get(0, 1, 0), 1.5);
        assert_eq!(SparseSym::from_dense(&d, 0.0), a);
        assert!((a.svec(&s) - d.svec()).norm() < 1e-15);
    }

    #[test]
    fn mismatched_rhs_is_rejected() {
        let s = BlockStructure::new(vec![2]).unwrap();
        let r = ConicProgram::new("x", s, SparseSym::default(), vec![SparseSym::default()], vec![]);
        assert!(r.is_err());
    }
}
