//! Minimal ideals, ranks, isomorphism classes and block maps of Jordan subalgebras.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::combinat::SymRelation;
use crate::error::{Error, Result};
use crate::rng;
use crate::symspace::{BlockStructure, SubspaceBasis, SymBlockMatrix, SQRT2};

/// Eigenvalues closer than this (relative to the spectral radius) are equal.
pub const CLUSTER_GAP: f64 = 1e-6;

/// Largest subspace dimension for which the center is computed from the associator system.
pub const EXACT_CENTER_DIM: usize = 32;

const RESAMPLES: u64 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum IsoClass {
    #[serde(rename = "REAL_SYM")]
    RealSym,
    #[serde(rename = "COMPLEX_HERM")]
    ComplexHerm,
    #[serde(rename = "QUATERNION_HERM")]
    QuaternionHerm,
    #[serde(rename = "SPIN")]
    Spin,
    #[serde(rename = "UNCLASSIFIED")]
    Unclassified,
}

impl IsoClass {
    pub fn name(self) -> &'static str {
        match self {
            Self::RealSym => "REAL_SYM",
            Self::ComplexHerm => "COMPLEX_HERM",
            Self::QuaternionHerm => "QUATERNION_HERM",
            Self::Spin => "SPIN",
            Self::Unclassified => "UNCLASSIFIED",
        }
    }
}

/// A minimal ideal with its unit (a central idempotent of the whole subalgebra).
#[derive(Clone, Debug)]
pub struct Ideal {
    pub basis: SubspaceBasis,
    pub unit: SymBlockMatrix,
    pub dim: usize,
    pub rank: usize,
    pub iso_class: IsoClass,
    pub frame: Option<Vec<SymBlockMatrix>>,
}

/// Ranks sorted in descending order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RankTuple(Vec<usize>);

impl RankTuple {
    pub fn new(mut ranks: Vec<usize>) -> Self {
        ranks.sort_unstable_by(|a, b| b.cmp(a));
        Self(ranks)
    }

    pub fn ranks(&self) -> &[usize] {
        &self.0
    }
}

/// `(5,4,2,2,1×6)`: runs of ones are compressed.
impl fmt::Display for RankTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ones = self.0.iter().filter(|&&r| r == 1).count();
        let mut parts: Vec<String> = self.0.iter().filter(|&&r| r != 1).map(|r| r.to_string()).collect();
        match ones {
            0 => {}
            1 => parts.push("1".into()),
            n => parts.push(format!("1×{n}")),
        }
        write!(f, "({})", parts.join(","))
    }
}

/// A linear map `Φ` from `𝕊^{r₁}×⋯×𝕊^{r_s}` into the ambient space, stored by
/// its columns: the svec images of the reduced svec unit vectors.
///
/// `Φ*Φ` is `multiplicity[k]·I` on reduced block `k`.
#[derive(Clone, Debug)]
pub struct BlockMap {
    pub reduced: BlockStructure,
    pub ambient: BlockStructure,
    pub columns: Vec<Vec<(usize, f64)>>,
    pub multiplicity: Vec<f64>,
}

impl BlockMap {
    /// `svec Φ(X̂)` from `svec X̂`.
    pub fn apply_svec(&self, xhat: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.ambient.dim());
        for (col, &v) in self.columns.iter().zip(xhat.iter()) {
            if v != 0.0 {
                for &(c, a) in col {
                    out[c] += a * v;
                }
            }
        }
        out
    }

    pub fn apply(&self, xhat: &SymBlockMatrix) -> SymBlockMatrix {
        SymBlockMatrix::from_svec(&self.ambient, &self.apply_svec(&xhat.svec()))
    }

    /// `svec Φ*(Y)` from `svec Y`.
    pub fn adjoint_svec(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.columns.len(),
            self.columns.iter().map(|col| col.iter().map(|&(c, a)| a * y[c]).sum::<f64>()),
        )
    }

    pub fn adjoint(&self, y: &SymBlockMatrix) -> SymBlockMatrix {
        SymBlockMatrix::from_svec(&self.reduced, &self.adjoint_svec(&y.svec()))
    }

    /// `(Φ*Φ)⁻¹` applied to reduced svec coordinates.
    pub fn gram_inverse_svec(&self, xhat: &DVector<f64>) -> DVector<f64> {
        let mut out = xhat.clone();
        for c in 0..out.len() {
            let (k, _, _) = self.reduced.entry(c);
            out[c] /= self.multiplicity[k];
        }
        out
    }

    /// `max ‖Φ(u∘v) − Φ(u)∘Φ(v)‖` over random pairs, relative to `‖Φ(u)‖‖Φ(v)‖`.
    pub fn homomorphism_residual(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = rng::stream(seed, 0x40);
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let u = random_svec(self.reduced.dim(), &mut rng);
            let v = random_svec(self.reduced.dim(), &mut rng);
            let (u, v) = (SymBlockMatrix::from_svec(&self.reduced, &u), SymBlockMatrix::from_svec(&self.reduced, &v));
            let (pu, pv) = (self.apply(&u), self.apply(&v));
            let lhs = self.apply(&u.jordan(&v));
            let rhs = pu.jordan(&pv);
            worst = worst.max((&lhs - &rhs).norm() / (pu.norm() * pv.norm()).max(f64::MIN_POSITIVE));
        }
        worst
    }
}

fn random_svec(n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

#[derive(Clone, Debug)]
pub struct IdealDecomposition {
    pub ideals: Vec<Ideal>,
    pub subspace: SubspaceBasis,
    pub phi: Option<BlockMap>,
}

impl IdealDecomposition {
    pub fn rank_tuple(&self) -> RankTuple {
        RankTuple::new(self.ideals.iter().map(|i| i.rank).collect())
    }

    pub fn dims(&self) -> Vec<usize> {
        self.ideals.iter().map(|i| i.dim).collect()
    }
}

/// `(dim, rank)` to isomorphism class; dimension-3 rank-2 algebras count as real symmetric.
pub fn classify(dim: usize, rank: usize) -> IsoClass {
    if rank == 1 {
        return if dim == 1 { IsoClass::RealSym } else { IsoClass::Unclassified };
    }
    if dim == rank * (rank + 1) / 2 {
        IsoClass::RealSym
    } else if dim == rank * rank {
        IsoClass::ComplexHerm
    } else if dim == rank * (2 * rank - 1) {
        IsoClass::QuaternionHerm
    } else if rank == 2 && dim >= 3 {
        IsoClass::Spin
    } else {
        IsoClass::Unclassified
    }
}

pub fn classify_ideal(ideal: &Ideal) -> IsoClass {
    classify(ideal.dim, ideal.rank)
}

/// Sorted-eigenvalue clusters: the start index of each cluster, or `None`
/// when some gap is neither clearly noise nor clearly separated.
fn cluster_starts(sorted: &[f64], tol: f64) -> Option<Vec<usize>> {
    let scale = sorted.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut starts = vec![0];
    for i in 1..sorted.len() {
        let gap = sorted[i] - sorted[i - 1];
        if gap > CLUSTER_GAP * scale {
            starts.push(i);
        } else if gap > 10.0 * tol * scale {
            return None;
        }
    }
    Some(starts)
}

/// Right singular vectors of `m` with singular value at most `cutoff`.
fn null_space(m: &DMatrix<f64>, cutoff: f64) -> Vec<DVector<f64>> {
    let k = m.ncols();
    let r = if m.nrows() > k { m.clone().qr().r() } else { m.clone() };
    let svd = r.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let mut out = Vec::new();
    for i in 0..k {
        let s = if i < svd.singular_values.len() { svd.singular_values[i] } else { 0.0 };
        if s <= cutoff {
            out.push(vt.row(i).transpose());
        }
    }
    out
}

/// Structure constants `L_a` (matrix of `v ↦ B_a∘v` in the basis) of a subalgebra.
fn multiplication_operators(elems: &[SymBlockMatrix], basis: &SubspaceBasis) -> Vec<DMatrix<f64>> {
    let k = elems.len();
    let mut l = vec![DMatrix::zeros(k, k); k];
    for a in 0..k {
        for b in a..k {
            let c = basis.coefficients(&elems[a].jordan(&elems[b]).svec());
            l[a].set_column(b, &c);
            l[b].set_column(a, &c);
        }
    }
    l
}

/// Center of `s` as coefficient vectors: null space of `γ ↦ (L_a L_b − L_{a∘b}) γ` over all `a, b`.
fn exact_center(s: &SubspaceBasis, elems: &[SymBlockMatrix]) -> Vec<DVector<f64>> {
    let k = elems.len();
    let l = multiplication_operators(elems, s);
    let mut m = DMatrix::zeros(k * k * k, k);
    for a in 0..k {
        for b in 0..k {
            // L_{a∘b} = Σ_c Γ_ab^c L_c
            let mut lab = DMatrix::zeros(k, k);
            for c in 0..k {
                let g = l[a][(c, b)];
                if g != 0.0 {
                    lab += &l[c] * g;
                }
            }
            let blk = &l[a] * &l[b] - lab;
            m.view_mut(((a * k + b) * k, 0), (k, k)).copy_from(&blk);
        }
    }
    let scale = l.iter().map(|x| x.norm_squared()).fold(0.0, f64::max);
    null_space(&m, 1e-8 * scale)
}

fn combine_elems(elems: &[SymBlockMatrix], c: &DVector<f64>, st: &BlockStructure) -> SymBlockMatrix {
    let mut x = SymBlockMatrix::zeros(st);
    for (e, &ci) in elems.iter().zip(c.iter()) {
        x.axpy(ci, e);
    }
    x
}

fn random_element(s: &SubspaceBasis, rng: &mut rand_chacha::ChaCha8Rng) -> SymBlockMatrix {
    let c = random_svec(s.dim(), rng);
    SymBlockMatrix::from_svec(s.structure(), &s.combine(&c))
}

/// Nonzero-eigenvalue clusters of `x` as `(block, eigenvector matrix)` lists.
struct Spectrum {
    /// Per block: eigenvectors.
    vecs: Vec<DMatrix<f64>>,
    /// Per block, per eigenvector: cluster id (`None` for the zero cluster).
    cluster: Vec<Vec<Option<usize>>>,
    count: usize,
}

fn clustered_spectrum(x: &SymBlockMatrix, tol: f64) -> Option<Spectrum> {
    let eigs: Vec<_> = x.blocks().iter().map(|b| b.clone().symmetric_eigen()).collect();
    let mut all: Vec<(f64, usize, usize)> = Vec::new();
    for (k, e) in eigs.iter().enumerate() {
        all.extend(e.eigenvalues.iter().enumerate().map(|(i, &l)| (l, k, i)));
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let values: Vec<f64> = all.iter().map(|e| e.0).collect();
    let starts = cluster_starts(&values, tol)?;
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut cluster: Vec<Vec<Option<usize>>> = eigs.iter().map(|e| vec![None; e.eigenvalues.len()]).collect();
    let mut count = 0;
    for (ci, &st) in starts.iter().enumerate() {
        let end = starts.get(ci + 1).copied().unwrap_or(all.len());
        let mean = values[st..end].iter().sum::<f64>() / (end - st) as f64;
        let zero = mean.abs() <= CLUSTER_GAP * scale;
        for &(_, k, i) in &all[st..end] {
            cluster[k][i] = (!zero).then_some(count);
        }
        if !zero {
            count += 1;
        }
    }
    Some(Spectrum { vecs: eigs.into_iter().map(|e| e.eigenvectors).collect(), cluster, count })
}

impl Spectrum {
    fn projection(&self, st: &BlockStructure, members: &[bool]) -> SymBlockMatrix {
        let blocks = self
            .vecs
            .iter()
            .zip(&self.cluster)
            .map(|(q, cl)| {
                let n = q.nrows();
                let mut p = DMatrix::zeros(n, n);
                for (i, c) in cl.iter().enumerate() {
                    if c.is_some_and(|c| members[c]) {
                        let v = q.column(i);
                        p += v * v.transpose();
                    }
                }
                p
            })
            .collect();
        SymBlockMatrix::from_blocks(st, blocks).expect("same structure")
    }
}

/// Groups of frame idempotents joined by nonzero Peirce spaces.
fn frame_groups(spec: &Spectrum, y: &SymBlockMatrix, tol: f64) -> Vec<Vec<usize>> {
    let m = spec.count;
    let mut w = DMatrix::<f64>::zeros(m, m);
    for (k, q) in spec.vecs.iter().enumerate() {
        let yr = q.transpose() * y.block(k) * q;
        let cl = &spec.cluster[k];
        for i in 0..cl.len() {
            for j in 0..cl.len() {
                if let (Some(a), Some(b)) = (cl[i], cl[j]) {
                    w[(a, b)] += yr[(i, j)] * yr[(i, j)];
                }
            }
        }
    }
    let thr = (tol.sqrt() * y.norm()).powi(2);
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for a in 0..m {
        for b in 0..a {
            if w[(a, b)] > thr {
                let (x, z) = (find(&mut parent, a), find(&mut parent, b));
                if x != z {
                    parent[x.max(z)] = x.min(z);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for a in 0..m {
        let r = find(&mut parent, a);
        groups.entry(r).or_default().push(a);
    }
    groups.into_values().collect()
}

/// `P_g S P_g` for each group `g` of clusters, computed in the eigenbasis of
/// the spectrum where the congruence is a mask.
fn ideals_from_groups(
    sp: &Spectrum,
    groups: &[Vec<usize>],
    elems: &[SymBlockMatrix],
    st: &BlockStructure,
    tol: f64,
) -> Vec<Ideal> {
    let rotated: Vec<DVector<f64>> = elems
        .iter()
        .map(|b| {
            let blocks = sp.vecs.iter().enumerate().map(|(k, q)| q.transpose() * b.block(k) * q).collect();
            SymBlockMatrix::from_blocks(st, blocks).expect("same structure").svec()
        })
        .collect();
    let mut group_of = vec![usize::MAX; sp.count];
    for (g, members) in groups.iter().enumerate() {
        members.iter().for_each(|&a| group_of[a] = g);
    }
    let coord_group: Vec<Option<usize>> = (0..st.dim())
        .map(|c| {
            let (k, i, j) = st.entry(c);
            match (sp.cluster[k][i], sp.cluster[k][j]) {
                (Some(a), Some(b)) if group_of[a] == group_of[b] => Some(group_of[a]),
                _ => None,
            }
        })
        .collect();
    let mut out = Vec::new();
    for (g, members) in groups.iter().enumerate() {
        let cands: Vec<DVector<f64>> = rotated
            .iter()
            .map(|v| DVector::from_fn(v.len(), |c, _| if coord_group[c] == Some(g) { v[c] } else { 0.0 }))
            .collect();
        let mut rb = SubspaceBasis::empty(st, tol);
        rb.extend(&cands);
        if rb.dim() == 0 {
            continue;
        }
        let back: Vec<DVector<f64>> = rb
            .elements()
            .iter()
            .map(|x| {
                let blocks = sp.vecs.iter().enumerate().map(|(k, q)| q * x.block(k) * q.transpose()).collect();
                SymBlockMatrix::from_blocks(st, blocks).expect("same structure").svec()
            })
            .collect();
        let mut mem = vec![false; sp.count];
        members.iter().for_each(|&a| mem[a] = true);
        let dim = back.len();
        out.push(Ideal {
            basis: SubspaceBasis::from_orthonormal(st, back, tol),
            unit: sp.projection(st, &mem),
            dim,
            rank: 0,
            iso_class: IsoClass::Unclassified,
            frame: None,
        });
    }
    out
}

/// Minimal ideals `P_i S P_i` for central idempotents `P_i`.
///
/// Small subspaces use the center (null space of the associator system) and
/// the eigenprojections of a generic central element. Larger ones group the
/// eigen-idempotents of a generic element by nonvanishing Peirce spaces.
/// Ranks and classes are filled in.
pub fn decompose_ideals(s: &SubspaceBasis, seed: u64, tol: f64) -> Result<IdealDecomposition> {
    let st = s.structure().clone();
    if s.dim() == 0 {
        return Ok(IdealDecomposition { ideals: vec![], subspace: s.clone(), phi: None });
    }
    let elems = s.elements();
    let center = if s.dim() <= EXACT_CENTER_DIM { Some(exact_center(s, &elems)) } else { None };
    if let Some(c) = &center {
        if c.is_empty() {
            return Err(Error::Numerical("center of the subalgebra is trivial".into()));
        }
    }
    for attempt in 0..RESAMPLES {
        let mut rng = rng::stream(seed, 0x1d0 + attempt);
        let grouped: Option<(Spectrum, Vec<Vec<usize>>)> = match &center {
            Some(c) => {
                let g = random_svec(c.len(), &mut rng);
                let coef = c.iter().zip(g.iter()).fold(DVector::zeros(s.dim()), |acc, (v, &t)| acc + v * t);
                let z = combine_elems(&elems, &coef, &st);
                clustered_spectrum(&z, tol).map(|sp| {
                    let groups = (0..sp.count).map(|a| vec![a]).collect();
                    (sp, groups)
                })
            }
            None => {
                let x = random_element(s, &mut rng);
                let y = random_element(s, &mut rng);
                clustered_spectrum(&x, tol).map(|sp| {
                    let groups = frame_groups(&sp, &y, tol);
                    (sp, groups)
                })
            }
        };
        let Some((sp, groups)) = grouped else { continue };
        let mut ideals = ideals_from_groups(&sp, &groups, &elems, &st, tol);
        if ideals.iter().map(|i| i.dim).sum::<usize>() != s.dim() {
            log::debug!("ideal dimensions do not add up; resampling");
            continue;
        }
        let mut ok = true;
        for (i, ideal) in ideals.iter_mut().enumerate() {
            match ideal_rank(ideal, seed.wrapping_add(i as u64), tol) {
                Ok(r) => {
                    ideal.rank = r;
                    ideal.iso_class = classify_ideal(ideal);
                }
                Err(_) => ok = false,
            }
        }
        if !ok {
            continue;
        }
        ideals.sort_by(|a, b| b.rank.cmp(&a.rank).then(b.dim.cmp(&a.dim)));
        return Ok(IdealDecomposition { ideals, subspace: s.clone(), phi: None });
    }
    Err(Error::Numerical("eigenvalue clusters stayed ambiguous after resampling".into()))
}

/// Orthonormal basis of the range of the unit, per block.
fn unit_range(unit: &SymBlockMatrix) -> Vec<DMatrix<f64>> {
    unit.blocks()
        .iter()
        .map(|b| {
            let e = b.clone().symmetric_eigen();
            let cols: Vec<DVector<f64>> = (0..b.nrows())
                .filter(|&i| e.eigenvalues[i] > 0.5)
                .map(|i| e.eigenvectors.column(i).into_owned())
                .collect();
            if cols.is_empty() {
                DMatrix::zeros(b.nrows(), 0)
            } else {
                DMatrix::from_columns(&cols)
            }
        })
        .collect()
}

/// Number of distinct eigenvalues of a generic element on the range of the unit,
/// cross-checked against the dimension of `span{e, x, x², …}`.
pub fn ideal_rank(ideal: &Ideal, seed: u64, tol: f64) -> Result<usize> {
    let q = unit_range(&ideal.unit);
    for attempt in 0..3 {
        let mut rng = rng::stream(seed, 0x4a + attempt);
        let x = random_element(&ideal.basis, &mut rng);
        let mut vals = Vec::new();
        for (k, qk) in q.iter().enumerate() {
            if qk.ncols() > 0 {
                let r = qk.transpose() * x.block(k) * qk;
                vals.extend(r.symmetric_eigenvalues().iter().copied());
            }
        }
        vals.sort_by(f64::total_cmp);
        let Some(starts) = cluster_starts(&vals, tol) else { continue };
        let distinct = if vals.is_empty() { 0 } else { starts.len() };
        if distinct == krylov_degree(&ideal.unit, &x) {
            return Ok(distinct);
        }
    }
    Err(Error::Numerical("rank estimates disagree".into()))
}

/// `dim span{e, x, x², …}` by Arnoldi with full reorthogonalization.
fn krylov_degree(e: &SymBlockMatrix, x: &SymBlockMatrix) -> usize {
    let st = e.structure();
    let mut q: Vec<DVector<f64>> = Vec::new();
    let en = e.norm();
    if en == 0.0 {
        return 0;
    }
    q.push(e.svec() / en);
    let xscale = x.eigenvalues().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    loop {
        let last = SymBlockMatrix::from_svec(st, q.last().expect("nonempty"));
        let blocks = x.matmul_blocks(&last);
        let mut v = SymBlockMatrix::from_blocks(st, blocks).expect("same structure").svec();
        for _ in 0..2 {
            for b in &q {
                let a = b.dot(&v);
                v.axpy(-a, b, 1.0);
            }
        }
        let n = v.norm();
        if n <= 1e-8 * xscale || q.len() >= st.dim() {
            return q.len();
        }
        q.push(v / n);
    }
}

/// `Φ` for every ideal, or `None` when some ideal is not real symmetric.
///
/// Each rank-`r` ideal gets a Jordan frame `e₁,…,e_r` and Peirce generators
/// `x_{1k}` with `x_{1k}² = e₁ + e_k`, chained as `x_{jk} = 2 x_{1j}∘x_{1k}`.
/// The resulting `Φ` is a Jordan homomorphism with `Φ*Φ = m·I`, `m` the trace
/// of a primitive idempotent.
pub fn construct_isomorphism(decomp: &IdealDecomposition, seed: u64, tol: f64) -> Result<Option<BlockMap>> {
    if decomp.ideals.iter().any(|i| i.iso_class != IsoClass::RealSym) {
        return Ok(None);
    }
    let ambient = decomp.subspace.structure().clone();
    if decomp.ideals.is_empty() {
        return Ok(None);
    }
    let reduced = BlockStructure::new(decomp.ideals.iter().map(|i| i.rank).collect())?;
    let mut columns = vec![Vec::new(); reduced.dim()];
    let mut multiplicity = Vec::new();
    for (k, ideal) in decomp.ideals.iter().enumerate() {
        let (frame, off) = ideal_frame(ideal, seed.wrapping_add(k as u64), tol)?;
        let m = frame[0].inner(&frame[0]);
        multiplicity.push(m);
        for (j, e) in frame.iter().enumerate() {
            columns[reduced.coord(k, j, j)] = sparse_svec(e);
        }
        for ((j, l), x) in off {
            columns[reduced.coord(k, j, l)] = sparse_svec(&x.scale(1.0 / SQRT2));
        }
    }
    Ok(Some(BlockMap { reduced, ambient, columns, multiplicity }))
}

fn sparse_svec(x: &SymBlockMatrix) -> Vec<(usize, f64)> {
    let chop = 1e-14 * x.max_abs();
    x.svec().iter().enumerate().filter(|(_, v)| v.abs() > chop).map(|(c, &v)| (c, v)).collect()
}

type OffDiagonal = Vec<((usize, usize), SymBlockMatrix)>;

/// Jordan frame and chained Peirce generators of a real symmetric ideal.
fn ideal_frame(ideal: &Ideal, seed: u64, tol: f64) -> Result<(Vec<SymBlockMatrix>, OffDiagonal)> {
    let st = ideal.basis.structure().clone();
    let r = ideal.rank;
    let elems = ideal.basis.elements();
    for attempt in 0..RESAMPLES {
        let mut rng = rng::stream(seed, 0xf4 + attempt);
        let x = random_element(&ideal.basis, &mut rng);
        let Some(sp) = clustered_spectrum(&x, tol) else { continue };
        if sp.count != r {
            continue;
        }
        let frame: Vec<SymBlockMatrix> = (0..r)
            .map(|a| {
                let mut mem = vec![false; r];
                mem[a] = true;
                sp.projection(&st, &mem)
            })
            .collect();
        let mut first = Vec::with_capacity(r);
        first.push(None);
        for k in 1..r {
            // V_1k = { e₁ B e_k + e_k B e₁ }
            let cands: Vec<DVector<f64>> = elems
                .iter()
                .map(|b| {
                    // from_blocks symmetrizes: (e₁ B e_k + e_k B e₁) / 2
                    let blocks = (0..st.num_blocks())
                        .map(|k2| frame[0].block(k2) * b.block(k2) * frame[k].block(k2))
                        .collect();
                    SymBlockMatrix::from_blocks(&st, blocks).expect("same structure").svec()
                })
                .collect();
            let mut v = SubspaceBasis::empty(&st, 1e-6);
            v.extend(&cands);
            if v.dim() != 1 {
                return Err(Error::Numerical(format!("Peirce space of dimension {} in a real symmetric ideal", v.dim())));
            }
            let g = v.element(0);
            let sum = &frame[0] + &frame[k];
            let c = g.square().inner(&sum) / sum.inner(&sum);
            first.push(Some(g.scale(1.0 / c.sqrt())));
        }
        let mut off: OffDiagonal = Vec::new();
        for k in 1..r {
            off.push(((0, k), first[k].clone().expect("set")));
        }
        for j in 1..r {
            for k in j + 1..r {
                let x = first[j].as_ref().expect("set").jordan(first[k].as_ref().expect("set")).scale(2.0);
                off.push(((j, k), x));
            }
        }
        return Ok((frame, off));
    }
    Err(Error::Numerical("no regular element found".into()))
}

/// Decomposition of a coordinate subspace given by a transitive relation:
/// one principal block per index class, embedded isometrically.
pub fn decompose_coordinate(r: &SymRelation, basis: &SubspaceBasis, tol: f64) -> IdealDecomposition {
    let st = r.structure().clone();
    let classes = r.index_classes();
    let reduced = BlockStructure::new(classes.iter().map(|c| c.1.len()).collect()).expect("nonempty classes");
    let mut columns = vec![Vec::new(); reduced.dim()];
    let mut ideals = Vec::new();
    for (k, (blk, idx)) in classes.iter().enumerate() {
        let d = idx.len();
        let mut label = vec![None; st.dim()];
        let mut count = 0u32;
        for (jj, &j) in idx.iter().enumerate() {
            for (ii, &i) in idx.iter().enumerate().take(jj + 1) {
                let c = st.coord(*blk, i, j);
                label[c] = Some(count);
                count += 1;
                columns[reduced.coord(k, ii, jj)] = vec![(c, 1.0)];
            }
        }
        let mut unit = SymBlockMatrix::zeros(&st);
        idx.iter().for_each(|&i| unit.set(*blk, i, i, 1.0));
        let frame = idx
            .iter()
            .map(|&i| {
                let mut e = SymBlockMatrix::zeros(&st);
                e.set(*blk, i, i, 1.0);
                e
            })
            .collect();
        ideals.push(Ideal {
            basis: SubspaceBasis::from_classes(&st, label, count as usize, tol),
            unit,
            dim: d * (d + 1) / 2,
            rank: d,
            iso_class: IsoClass::RealSym,
            frame: Some(frame),
        });
    }
    let multiplicity = vec![1.0; classes.len()];
    IdealDecomposition {
        ideals,
        subspace: basis.clone(),
        phi: Some(BlockMap { reduced, ambient: st, columns, multiplicity }),
    }
}

/// Whether `x ∈ S` lies in the cone of squares, via the multiplication operator on `S`.
pub fn cone_membership(s: &SubspaceBasis, x: &SymBlockMatrix, tol: f64) -> Result<bool> {
    if s.residual(x) > tol * x.norm().max(1.0) {
        return Err(Error::Domain("element is not in the subspace".into()));
    }
    let k = s.dim();
    if k == 0 {
        return Ok(true);
    }
    let elems = s.elements();
    let mut l = DMatrix::zeros(k, k);
    for j in 0..k {
        l.set_column(j, &s.coefficients(&x.jordan(&elems[j]).svec()));
    }
    let l = (&l + l.transpose()) * 0.5;
    Ok(l.symmetric_eigenvalues().min() >= -tol)
}

/// `Σ_{i≤l} x↓_i ≥ Σ_{i≤l} y↓_i` for every `l`, padding with zeros.
pub fn weakly_majorizes(x: &RankTuple, y: &RankTuple) -> bool {
    let n = x.0.len().max(y.0.len());
    let (mut sx, mut sy) = (0usize, 0usize);
    for i in 0..n {
        sx += x.0.get(i).copied().unwrap_or(0);
        sy += y.0.get(i).copied().unwrap_or(0);
        if sx < sy {
            return false;
        }
    }
    true
}
