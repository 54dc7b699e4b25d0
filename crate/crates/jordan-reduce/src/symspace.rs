//! Block symmetric matrices, isometric svec coordinates, orthonormal bases.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default relative threshold for rank and drop decisions.
pub const DEFAULT_TOL: f64 = 1e-9;

pub(crate) const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Block orders `(n_1, ..., n_r)` of a product of symmetric matrix spaces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockStructure {
    orders: Vec<usize>,
    offsets: Vec<usize>,
    dim: usize,
}

impl BlockStructure {
    pub fn new(orders: Vec<usize>) -> Result<Self> {
        if orders.contains(&0) {
            return Err(Error::Domain("block orders must be positive".into()));
        }
        let mut offsets = Vec::with_capacity(orders.len());
        let mut dim = 0;
        for &n in &orders {
            offsets.push(dim);
            dim += n * (n + 1) / 2;
        }
        Ok(Self { orders, offsets, dim })
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn num_blocks(&self) -> usize {
        self.orders.len()
    }

    /// Dimension of the ambient vector space, `Σ n_k (n_k + 1) / 2`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the full (non-symmetric) block matrix space, `Σ n_k²`.
    pub fn full_dim(&self) -> usize {
        self.orders.iter().map(|n| n * n).sum()
    }

    pub fn offset(&self, block: usize) -> usize {
        self.offsets[block]
    }

    /// svec coordinate of the (0-based) entry `(i, j)` of `block`.
    pub fn coord(&self, block: usize, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.offsets[block] + j * (j + 1) / 2 + i
    }

    /// Inverse of [`coord`](Self::coord), returning `(block, i, j)` with `i <= j`.
    pub fn entry(&self, coord: usize) -> (usize, usize, usize) {
        let block = match self.offsets.binary_search(&coord) {
            Ok(b) => {
                // several blocks cannot share an offset since orders are positive
                b
            }
            Err(b) => b - 1,
        };
        let local = coord - self.offsets[block];
        let mut j = (((8 * local + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
        while (j + 1) * (j + 2) / 2 <= local {
            j += 1;
        }
        while j * (j + 1) / 2 > local {
            j -= 1;
        }
        (block, local - j * (j + 1) / 2, j)
    }

    /// Weight of an svec coordinate: 1 on diagonals, √2 off the diagonal.
    pub fn weight(&self, coord: usize) -> f64 {
        let (_, i, j) = self.entry(coord);
        if i == j {
            1.0
        } else {
            SQRT2
        }
    }

    /// Weights of all svec coordinates, in order.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.dim);
        for &n in &self.orders {
            for j in 0..n {
                for i in 0..=j {
                    w.push(if i == j { 1.0 } else { SQRT2 });
                }
            }
        }
        w
    }

    pub(crate) fn check_same(&self, other: &BlockStructure) -> Result<()> {
        if self != other {
            return Err(Error::StructureMismatch);
        }
        Ok(())
    }
}

/// An element of `𝕊^{n_1} × ⋯ × 𝕊^{n_r}` stored as dense symmetric blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct SymBlockMatrix {
    structure: BlockStructure,
    blocks: Vec<DMatrix<f64>>,
}

impl SymBlockMatrix {
    pub fn zeros(structure: &BlockStructure) -> Self {
        let blocks = structure
            .orders
            .iter()
            .map(|&n| DMatrix::zeros(n, n))
            .collect();
        Self { structure: structure.clone(), blocks }
    }

    pub fn identity(structure: &BlockStructure) -> Self {
        let blocks = structure
            .orders
            .iter()
            .map(|&n| DMatrix::identity(n, n))
            .collect();
        Self { structure: structure.clone(), blocks }
    }

    /// Builds from square blocks, keeping the symmetric part `(X + Xᵀ)/2`.
    pub fn from_blocks(structure: &BlockStructure, blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        if blocks.len() != structure.num_blocks() {
            return Err(Error::StructureMismatch);
        }
        let mut out = Vec::with_capacity(blocks.len());
        for (b, &n) in blocks.into_iter().zip(&structure.orders) {
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::StructureMismatch);
            }
            out.push((&b + b.transpose()) * 0.5);
        }
        Ok(Self { structure: structure.clone(), blocks: out })
    }

    /// Single-block convenience constructor.
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        let s = BlockStructure::new(vec![m.nrows()]).expect("nonempty matrix");
        Self::from_blocks(&s, vec![m]).expect("square matrix")
    }

    /// `E_ij + E_ji` (or `E_ii` when `i == j`) in `block`, 0-based.
    pub fn unit(structure: &BlockStructure, block: usize, i: usize, j: usize) -> Self {
        let mut x = Self::zeros(structure);
        x.blocks[block][(i, j)] = 1.0;
        x.blocks[block][(j, i)] = 1.0;
        x
    }

    pub fn from_svec(structure: &BlockStructure, v: &DVector<f64>) -> Self {
        assert_eq!(v.len(), structure.dim());
        let mut x = Self::zeros(structure);
        for (k, &n) in structure.orders.iter().enumerate() {
            let off = structure.offsets[k];
            let blk = &mut x.blocks[k];
            for j in 0..n {
                let base = off + j * (j + 1) / 2;
                for i in 0..j {
                    let val = v[base + i] / SQRT2;
                    blk[(i, j)] = val;
                    blk[(j, i)] = val;
                }
                blk[(j, j)] = v[base + j];
            }
        }
        x
    }

    pub fn svec(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.structure.dim());
        for (k, &n) in self.structure.orders.iter().enumerate() {
            let off = self.structure.offsets[k];
            let blk = &self.blocks[k];
            for j in 0..n {
                let base = off + j * (j + 1) / 2;
                for i in 0..j {
                    v[base + i] = blk[(i, j)] * SQRT2;
                }
                v[base + j] = blk[(j, j)];
            }
        }
        v
    }

    pub fn svec_coords(&self) -> SvecCoords {
        SvecCoords { coords: self.svec(), structure: self.structure.clone() }
    }

    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &DMatrix<f64> {
        &self.blocks[k]
    }

    pub fn get(&self, block: usize, i: usize, j: usize) -> f64 {
        self.blocks[block][(i, j)]
    }

    /// Sets entries `(i, j)` and `(j, i)`.
    pub fn set(&mut self, block: usize, i: usize, j: usize, value: f64) {
        self.blocks[block][(i, j)] = value;
        self.blocks[block][(j, i)] = value;
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.dot(b))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(|b| b.amax()).fold(0.0, f64::max)
    }

    /// `½(XY + YX)` blockwise.
    pub fn jordan(&self, other: &Self) -> Self {
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| {
                let p = a * b;
                (&p + p.transpose()) * 0.5
            })
            .collect();
        Self { structure: self.structure.clone(), blocks }
    }

    pub fn square(&self) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|a| {
                let p = a * a;
                (&p + p.transpose()) * 0.5
            })
            .collect();
        Self { structure: self.structure.clone(), blocks }
    }

    /// Plain matrix product blockwise (generally not symmetric).
    pub fn matmul_blocks(&self, other: &Self) -> Vec<DMatrix<f64>> {
        self.blocks.iter().zip(&other.blocks).map(|(a, b)| a * b).collect()
    }

    /// `Q X Q` blockwise for a symmetric `Q`.
    pub fn congruence(&self, q: &Self) -> Self {
        let blocks = self
            .blocks
            .iter()
            .zip(&q.blocks)
            .map(|(x, q)| {
                let p = q * x * q;
                (&p + p.transpose()) * 0.5
            })
            .collect();
        Self { structure: self.structure.clone(), blocks }
    }

    /// Eigenvalues of all blocks, concatenated.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.extend(b.clone().symmetric_eigenvalues().iter().copied());
        }
        out
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Spectral decomposition with eigenvalues of all blocks clustered jointly.
    ///
    /// Sorted eigenvalues whose gap is at most `gap · max|λ|` share a cluster.
    /// Clusters come in increasing order.
    pub fn spectral_projections(&self, gap: f64) -> Vec<SpectralCluster> {
        let eigs: Vec<_> = self.blocks.iter().map(|b| b.clone().symmetric_eigen()).collect();
        let mut all: Vec<(f64, usize, usize)> = Vec::new();
        for (k, e) in eigs.iter().enumerate() {
            all.extend(e.eigenvalues.iter().enumerate().map(|(i, &l)| (l, k, i)));
        }
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        let scale = all.iter().fold(0.0f64, |m, e| m.max(e.0.abs()));
        let mut out: Vec<SpectralCluster> = Vec::new();
        let mut members: Vec<f64> = Vec::new();
        let close = |m: &[f64], out: &mut Vec<SpectralCluster>| {
            let last = out.last_mut().expect("open cluster");
            last.mean = m.iter().sum::<f64>() / m.len() as f64;
            last.spread = m[m.len() - 1] - m[0];
        };
        for &(l, k, i) in &all {
            if members.last().is_some_and(|&p| l - p > gap * scale) {
                close(&members, &mut out);
                members.clear();
            }
            if members.is_empty() {
                out.push(SpectralCluster { mean: 0.0, spread: 0.0, projection: SymBlockMatrix::zeros(&self.structure) });
            }
            let v = eigs[k].eigenvectors.column(i);
            out.last_mut().expect("open cluster").projection.blocks[k] += v * v.transpose();
            members.push(l);
        }
        if !members.is_empty() {
            close(&members, &mut out);
        }
        out
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            structure: self.structure.clone(),
            blocks: self.blocks.iter().map(|b| b * a).collect(),
        }
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (s, b) in self.blocks.iter_mut().zip(&x.blocks) {
            *s += b * a;
        }
    }
}

/// One eigenvalue cluster of a block matrix.
#[derive(Clone, Debug)]
pub struct SpectralCluster {
    pub mean: f64,
    /// Largest minus smallest eigenvalue in the cluster.
    pub spread: f64,
    pub projection: SymBlockMatrix,
}

impl Add for &SymBlockMatrix {
    type Output = SymBlockMatrix;
    fn add(self, rhs: Self) -> SymBlockMatrix {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &SymBlockMatrix {
    type Output = SymBlockMatrix;
    fn sub(self, rhs: Self) -> SymBlockMatrix {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &SymBlockMatrix {
    type Output = SymBlockMatrix;
    fn mul(self, rhs: f64) -> SymBlockMatrix {
        self.scale(rhs)
    }
}

impl Neg for &SymBlockMatrix {
    type Output = SymBlockMatrix;
    fn neg(self) -> SymBlockMatrix {
        self.scale(-1.0)
    }
}

/// Isometric coordinates: off-diagonal entries carry a factor √2.
#[derive(Clone, Debug, PartialEq)]
pub struct SvecCoords {
    pub coords: DVector<f64>,
    pub structure: BlockStructure,
}

impl SvecCoords {
    pub fn to_matrix(&self) -> SymBlockMatrix {
        SymBlockMatrix::from_svec(&self.structure, &self.coords)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.coords.dot(&other.coords)
    }
}

/// Trace inner product `Σ_k trace(X_k Y_k)`.
pub fn inner(x: &SymBlockMatrix, y: &SymBlockMatrix) -> Result<f64> {
    x.structure.check_same(&y.structure)?;
    Ok(x.inner(y))
}

/// Jordan product `½(XY + YX)`.
pub fn jordan_product(x: &SymBlockMatrix, y: &SymBlockMatrix) -> Result<SymBlockMatrix> {
    x.structure.check_same(&y.structure)?;
    Ok(x.jordan(y))
}

/// Orthonormal basis of the span of `vectors` (modified Gram-Schmidt, two passes).
///
/// An empty list gives the zero subspace.
pub fn orthonormalize(
    structure: &BlockStructure,
    vectors: &[SymBlockMatrix],
    tol: f64,
) -> Result<SubspaceBasis> {
    for v in vectors {
        structure.check_same(v.structure())?;
    }
    let mut basis = SubspaceBasis::empty(structure, tol);
    let cands: Vec<DVector<f64>> = vectors.iter().map(|v| v.svec()).collect();
    basis.extend(&cands);
    Ok(basis)
}

/// `Σ_B ⟨B, X⟩ B` over an orthonormal basis.
pub fn project_onto_span(basis: &SubspaceBasis, x: &SymBlockMatrix) -> Result<SymBlockMatrix> {
    basis.structure().check_same(x.structure())?;
    Ok(basis.project(x))
}

#[derive(Clone, Debug)]
enum Repr {
    Dense(Vec<DVector<f64>>),
    Classes(ClassBasis),
}

/// Disjoint 0/1 characteristic matrices, normalized on demand.
#[derive(Clone, Debug)]
struct ClassBasis {
    label: Vec<Option<u32>>,
    count: usize,
    norm2: Vec<f64>,
    weights: Vec<f64>,
}

/// An orthonormal basis of a subspace of the ambient space.
///
/// Dense bases store svec columns. Bases of partition, coordinate and 0/1
/// subspaces store class labels instead, so a coordinate subspace of
/// `𝕊^256` costs one label per entry.
#[derive(Clone, Debug)]
pub struct SubspaceBasis {
    structure: BlockStructure,
    repr: Repr,
    tol: f64,
}

impl SubspaceBasis {
    pub fn empty(structure: &BlockStructure, tol: f64) -> Self {
        Self { structure: structure.clone(), repr: Repr::Dense(Vec::new()), tol }
    }

    /// The whole ambient space, as unit svec coordinates.
    pub fn ambient(structure: &BlockStructure, tol: f64) -> Self {
        let label = (0..structure.dim()).map(|c| Some(c as u32)).collect();
        Self::from_classes(structure, label, structure.dim(), tol)
    }

    /// Span of the characteristic matrices of labelled svec coordinates.
    ///
    /// Labels must be `0..count` and every label must occur.
    pub fn from_classes(
        structure: &BlockStructure,
        label: Vec<Option<u32>>,
        count: usize,
        tol: f64,
    ) -> Self {
        assert_eq!(label.len(), structure.dim());
        let weights = structure.weights();
        let mut norm2 = vec![0.0; count];
        for (c, l) in label.iter().enumerate() {
            if let Some(p) = l {
                norm2[*p as usize] += weights[c] * weights[c];
            }
        }
        assert!(norm2.iter().all(|&n| n > 0.0), "every class must be nonempty");
        Self {
            structure: structure.clone(),
            repr: Repr::Classes(ClassBasis { label, count, norm2, weights }),
            tol,
        }
    }

    /// Wraps svec columns that are already orthonormal.
    pub fn from_orthonormal(structure: &BlockStructure, columns: Vec<DVector<f64>>, tol: f64) -> Self {
        Self { structure: structure.clone(), repr: Repr::Dense(columns), tol }
    }

    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            Repr::Dense(v) => v.len(),
            Repr::Classes(c) => c.count,
        }
    }

    pub fn is_classes(&self) -> bool {
        matches!(self.repr, Repr::Classes(_))
    }

    /// Class label of each svec coordinate, for class-based bases.
    pub fn class_labels(&self) -> Option<&[Option<u32>]> {
        match &self.repr {
            Repr::Classes(c) => Some(&c.label),
            Repr::Dense(_) => None,
        }
    }

    /// Coefficients of the orthogonal projection of `x` (svec) in this basis.
    pub fn coefficients(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.repr {
            Repr::Dense(cols) => DVector::from_iterator(cols.len(), cols.iter().map(|q| q.dot(x))),
            Repr::Classes(cb) => {
                let mut c = DVector::zeros(cb.count);
                for (k, l) in cb.label.iter().enumerate() {
                    if let Some(p) = l {
                        c[*p as usize] += cb.weights[k] * x[k];
                    }
                }
                for p in 0..cb.count {
                    c[p] /= cb.norm2[p].sqrt();
                }
                c
            }
        }
    }

    /// svec of `Σ_i c_i B_i`.
    pub fn combine(&self, c: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.structure.dim());
        match &self.repr {
            Repr::Dense(cols) => {
                for (q, &ci) in cols.iter().zip(c.iter()) {
                    if ci != 0.0 {
                        out.axpy(ci, q, 1.0);
                    }
                }
            }
            Repr::Classes(cb) => {
                for (k, l) in cb.label.iter().enumerate() {
                    if let Some(p) = l {
                        let p = *p as usize;
                        out[k] = cb.weights[k] * c[p] / cb.norm2[p].sqrt();
                    }
                }
            }
        }
        out
    }

    pub fn project_svec(&self, x: &DVector<f64>) -> DVector<f64> {
        self.combine(&self.coefficients(x))
    }

    pub fn project(&self, x: &SymBlockMatrix) -> SymBlockMatrix {
        SymBlockMatrix::from_svec(&self.structure, &self.project_svec(&x.svec()))
    }

    /// `‖x − P_S x‖` for an svec vector.
    pub fn residual_svec(&self, x: &DVector<f64>) -> f64 {
        (x - self.project_svec(x)).norm()
    }

    pub fn residual(&self, x: &SymBlockMatrix) -> f64 {
        self.residual_svec(&x.svec())
    }

    /// svec of the `i`-th orthonormal basis element.
    pub fn vector(&self, i: usize) -> DVector<f64> {
        match &self.repr {
            Repr::Dense(cols) => cols[i].clone(),
            Repr::Classes(_) => {
                let mut c = DVector::zeros(self.dim());
                c[i] = 1.0;
                self.combine(&c)
            }
        }
    }

    pub fn element(&self, i: usize) -> SymBlockMatrix {
        SymBlockMatrix::from_svec(&self.structure, &self.vector(i))
    }

    pub fn elements(&self) -> Vec<SymBlockMatrix> {
        (0..self.dim()).map(|i| self.element(i)).collect()
    }

    pub fn vectors(&self) -> Vec<DVector<f64>> {
        match &self.repr {
            Repr::Dense(cols) => cols.clone(),
            Repr::Classes(_) => (0..self.dim()).map(|i| self.vector(i)).collect(),
        }
    }

    /// `dim × k` matrix of svec columns.
    pub fn matrix(&self) -> DMatrix<f64> {
        let cols = self.vectors();
        if cols.is_empty() {
            return DMatrix::zeros(self.structure.dim(), 0);
        }
        DMatrix::from_columns(&cols)
    }

    /// Same span, stored as dense columns.
    pub fn to_dense(&self) -> SubspaceBasis {
        Self::from_orthonormal(&self.structure, self.vectors(), self.tol)
    }

    /// Largest residual of `other`'s basis vectors after projection onto `self`.
    pub fn containment_residual(&self, other: &SubspaceBasis) -> f64 {
        (0..other.dim())
            .map(|i| self.residual_svec(&other.vector(i)))
            .fold(0.0, f64::max)
    }

    /// Largest `|⟨B_i, B_j⟩ − δ_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let m = self.matrix();
        let g = m.transpose() * &m;
        let mut worst: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let d = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - d).abs());
            }
        }
        worst
    }

    /// Appends the parts of `candidates` not already in the span.
    ///
    /// Candidates are taken largest residual first; the rest are dropped once
    /// every residual falls below `tol` times the largest candidate norm. Class bases are converted to dense first.
    /// Returns the number of vectors added.
    pub fn extend(&mut self, candidates: &[DVector<f64>]) -> usize {
        self.extend_above(candidates, self.tol)
    }

    /// [`Self::extend`] with an explicit relative acceptance threshold.
    pub fn extend_above(&mut self, candidates: &[DVector<f64>], tol: f64) -> usize {
        if let Repr::Classes(_) = self.repr {
            self.repr = Repr::Dense(self.vectors());
        }
        let scale = candidates.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0;
        }
        let Repr::Dense(cols) = &mut self.repr else { unreachable!() };
        let before = cols.len();
        // block classical Gram-Schmidt, two passes
        let mut rest: Vec<DVector<f64>> = if cols.is_empty() {
            candidates.to_vec()
        } else {
            let q = DMatrix::from_columns(cols);
            let mut r = DMatrix::from_columns(candidates);
            for _ in 0..2 {
                let coef = q.tr_mul(&r);
                r.gemm(-1.0, &q, &coef, 1.0);
            }
            r.column_iter().map(|c| c.into_owned()).collect()
        };
        // column pivoting: largest residual first
        while !rest.is_empty() {
            let (k, n) = rest
                .iter()
                .enumerate()
                .map(|(k, v)| (k, v.norm()))
                .fold((0, -1.0), |best, x| if x.1 > best.1 { x } else { best });
            if n <= tol * scale {
                break;
            }
            let mut q = rest.swap_remove(k);
            for p in cols[before..].iter() {
                let a = p.dot(&q);
                q.axpy(-a, p, 1.0);
            }
            let q = q.normalize();
            rest.par_iter_mut().for_each(|v| {
                let a = q.dot(v);
                v.axpy(-a, &q, 1.0);
            });
            cols.push(q);
        }
        cols.len() - before
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(s: &BlockStructure, rng: &mut ChaCha8Rng) -> SymBlockMatrix {
        let blocks = s
            .orders()
            .iter()
            .map(|&n| DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        SymBlockMatrix::from_blocks(s, blocks).unwrap()
    }

    #[test]
    fn identity_inner_is_trace() {
        let s = BlockStructure::new(vec![3]).unwrap();
        let i = SymBlockMatrix::identity(&s);
        assert_eq!(inner(&i, &i).unwrap(), 3.0);
    }

    #[test]
    fn off_diagonal_unit_has_norm_two() {
        let s = BlockStructure::new(vec![2]).unwrap();
        let e = SymBlockMatrix::unit(&s, 0, 0, 1);
        assert_eq!(inner(&e, &e).unwrap(), 2.0);
    }

    #[test]
    fn inner_matches_svec_dot_and_trace_loop() {
        let s = BlockStructure::new(vec![3, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_sym(&s, &mut rng);
        let y = random_sym(&s, &mut rng);
        let mut oracle = 0.0;
        for k in 0..2 {
            let n = s.orders()[k];
            for i in 0..n {
                for j in 0..n {
                    oracle += x.get(k, i, j) * y.get(k, j, i);
                }
            }
        }
        let ip = inner(&x, &y).unwrap();
        assert!((ip - oracle).abs() <= 1e-12 * oracle.abs().max(1.0));
        assert!((ip - x.svec().dot(&y.svec())).abs() <= 1e-12 * x.norm() * y.norm());
    }

    #[test]
    fn structure_mismatch_is_an_error() {
        let a = SymBlockMatrix::identity(&BlockStructure::new(vec![2]).unwrap());
        let b = SymBlockMatrix::identity(&BlockStructure::new(vec![3]).unwrap());
        assert!(matches!(inner(&a, &b), Err(Error::StructureMismatch)));
        assert!(jordan_product(&a, &b).is_err());
    }

    #[test]
    fn svec_round_trip_and_entry_lookup() {
        let s = BlockStructure::new(vec![4, 1, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_sym(&s, &mut rng);
        let y = SymBlockMatrix::from_svec(&s, &x.svec());
        assert!((&x - &y).max_abs() < 1e-15);
        for c in 0..s.dim() {
            let (b, i, j) = s.entry(c);
            assert!(i <= j);
            assert_eq!(s.coord(b, i, j), c);
        }
    }

    #[test]
    fn jordan_product_examples() {
        let s = BlockStructure::new(vec![2]).unwrap();
        let e11 = SymBlockMatrix::unit(&s, 0, 0, 0);
        let e12 = SymBlockMatrix::unit(&s, 0, 0, 1);
        let p = jordan_product(&e11, &e12).unwrap();
        assert_eq!(p.block(0), &dmatrix![0.0, 0.5; 0.5, 0.0]);
        let i = SymBlockMatrix::identity(&s);
        assert_eq!(jordan_product(&i, &e12).unwrap(), e12);
    }

    #[test]
    fn polarization_identity() {
        let s = BlockStructure::new(vec![4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_sym(&s, &mut rng);
        let y = random_sym(&s, &mut rng);
        let lhs = x.jordan(&y);
        let rhs = &(&(&x + &y).square() - &x.square()) - &y.square();
        assert!((&lhs - &rhs.scale(0.5)).max_abs() < 1e-12);
    }

    #[test]
    fn spectral_projections_cluster_across_blocks() {
        let s = BlockStructure::new(vec![2, 1]).unwrap();
        let x = SymBlockMatrix::from_blocks(&s, vec![dmatrix![2.0, 0.0; 0.0, 5.0], dmatrix![2.0]]).unwrap();
        let p = x.spectral_projections(1e-6);
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].mean, 2.0);
        assert_eq!(p[0].spread, 0.0);
        assert_eq!(p[0].projection.get(0, 0, 0), 1.0);
        assert_eq!(p[0].projection.get(1, 0, 0), 1.0);
        assert_eq!(p[1].projection.get(0, 1, 1), 1.0);
        let mut sum = p[0].projection.clone();
        sum.axpy(1.0, &p[1].projection);
        assert!((&sum - &SymBlockMatrix::identity(&s)).max_abs() < 1e-12);
    }

    #[test]
    fn orthonormalize_drops_dependent() {
        let s = BlockStructure::new(vec![2]).unwrap();
        let e11 = SymBlockMatrix::unit(&s, 0, 0, 0);
        assert_eq!(orthonormalize(&s, &[e11.clone(), e11.scale(2.0)], DEFAULT_TOL).unwrap().dim(), 1);
        let e22 = SymBlockMatrix::unit(&s, 0, 1, 1);
        let e12 = SymBlockMatrix::unit(&s, 0, 0, 1);
        assert_eq!(orthonormalize(&s, &[e11, e22, e12], DEFAULT_TOL).unwrap().dim(), 3);
    }

    #[test]
    fn orthonormalize_random_saturates() {
        let s = BlockStructure::new(vec![5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<_> = (0..20).map(|_| random_sym(&s, &mut rng)).collect();
        let b = orthonormalize(&s, &xs, DEFAULT_TOL).unwrap();
        assert_eq!(b.dim(), 15);
        assert!(b.orthonormality_defect() < 1e-10);
        let stacked = DMatrix::from_columns(&xs.iter().map(|x| x.svec()).collect::<Vec<_>>());
        assert_eq!(stacked.rank(1e-9 * stacked.norm()), 15);
    }

    #[test]
    fn projection_examples() {
        let s = BlockStructure::new(vec![4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_sym(&s, &mut rng);
        let b = orthonormalize(&s, &[x.scale(1.0 / x.norm())], DEFAULT_TOL).unwrap();
        assert!((&project_onto_span(&b, &x).unwrap() - &x).max_abs() < 1e-12);

        let s2 = BlockStructure::new(vec![2]).unwrap();
        let b = orthonormalize(&s2, &[SymBlockMatrix::unit(&s2, 0, 0, 0)], DEFAULT_TOL).unwrap();
        let p = project_onto_span(&b, &SymBlockMatrix::unit(&s2, 0, 1, 1)).unwrap();
        assert_eq!(p.max_abs(), 0.0);

        let xs: Vec<_> = (0..4).map(|_| random_sym(&s, &mut rng)).collect();
        let b = orthonormalize(&s, &xs, DEFAULT_TOL).unwrap();
        let y = random_sym(&s, &mut rng);
        let py = b.project(&y);
        assert!((&b.project(&py) - &py).norm() <= 1e-12);
    }

    #[test]
    fn class_basis_matches_dense_projection() {
        let s = BlockStructure::new(vec![3, 1]).unwrap();
        let label: Vec<Option<u32>> = (0..s.dim())
            .map(|c| if c == 2 { None } else { Some((c % 3) as u32) })
            .collect();
        let b = SubspaceBasis::from_classes(&s, label, 3, DEFAULT_TOL);
        let d = b.to_dense();
        assert!(d.orthonormality_defect() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_sym(&s, &mut rng);
        assert!((&b.project(&x) - &d.project(&x)).max_abs() < 1e-14);
    }
}
