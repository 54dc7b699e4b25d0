//! Affine data of a program, admissibility, and the closure producing `S_opt`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::program::ConicProgram;
use crate::rng;
pub use crate::symspace::SubspaceBasis;
use crate::symspace::{BlockStructure, SymBlockMatrix};

/// Pairwise checks are exhaustive up to this dimension, sampled beyond it.
const EXHAUSTIVE_CHECK_DIM: usize = 64;

#[derive(Clone, Debug)]
struct SpanComponent {
    members: Vec<usize>,
    coords: Vec<usize>,
    /// Orthonormal basis of the row span, in local coordinates.
    v: DMatrix<f64>,
    /// Pseudo-inverse of the local constraint matrix.
    pinv: DMatrix<f64>,
}

/// `L⊥ = span{A_i}` stored by connected components of overlapping supports.
#[derive(Clone, Debug)]
pub struct ConstraintSpan {
    structure: BlockStructure,
    rows: Vec<Vec<(usize, f64)>>,
    comps: Vec<SpanComponent>,
}

pub(crate) fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl ConstraintSpan {
    /// `rows` are sparse svec vectors.
    pub fn new(structure: &BlockStructure, rows: Vec<Vec<(usize, f64)>>, tol: f64) -> Self {
        let m = rows.len();
        let mut parent: Vec<usize> = (0..m).collect();
        let mut owner = vec![usize::MAX; structure.dim()];
        for (r, row) in rows.iter().enumerate() {
            for &(c, _) in row {
                if owner[c] == usize::MAX {
                    owner[c] = r;
                } else {
                    let a = find(&mut parent, owner[c]);
                    let b = find(&mut parent, r);
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut group_of = vec![usize::MAX; m];
        for r in 0..m {
            let root = find(&mut parent, r);
            if group_of[root] == usize::MAX {
                group_of[root] = groups.len();
                groups.push(Vec::new());
            }
            groups[group_of[root]].push(r);
        }
        let comps = groups
            .into_iter()
            .map(|members| Self::component(&rows, members, tol))
            .collect();
        Self { structure: structure.clone(), rows, comps }
    }

    fn component(rows: &[Vec<(usize, f64)>], members: Vec<usize>, tol: f64) -> SpanComponent {
        let mut coords: Vec<usize> = members.iter().flat_map(|&r| rows[r].iter().map(|e| e.0)).collect();
        coords.sort_unstable();
        coords.dedup();
        let mut m = DMatrix::zeros(members.len(), coords.len());
        for (a, &r) in members.iter().enumerate() {
            for &(c, v) in &rows[r] {
                let j = coords.binary_search(&c).unwrap();
                m[(a, j)] += v;
            }
        }
        if coords.is_empty() {
            return SpanComponent {
                members,
                coords,
                v: DMatrix::zeros(0, 0),
                pinv: DMatrix::zeros(0, m.nrows()),
            };
        }
        // work with the tall orientation: coords × members
        let mt = m.transpose();
        let svd = mt.svd(true, true);
        let smax = svd.singular_values.max();
        let u = svd.u.unwrap();
        let vt = svd.v_t.unwrap();
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > tol * smax)
            .collect();
        let mut v = DMatrix::zeros(coords.len(), keep.len());
        let mut pinv = DMatrix::zeros(coords.len(), members.len());
        for (col, &i) in keep.iter().enumerate() {
            let ui = u.column(i);
            v.set_column(col, &ui);
            let vi = vt.row(i);
            pinv += (ui * vi) / svd.singular_values[i];
        }
        SpanComponent { members, coords, v, pinv }
    }

    pub fn rank(&self) -> usize {
        self.comps.iter().map(|c| c.v.ncols()).sum()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    /// `P_{L⊥}(x)` for an svec vector.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(x.len());
        for comp in &self.comps {
            if comp.v.ncols() == 0 {
                continue;
            }
            let local = DVector::from_iterator(comp.coords.len(), comp.coords.iter().map(|&c| x[c]));
            let p = &comp.v * (comp.v.transpose() * local);
            for (k, &c) in comp.coords.iter().enumerate() {
                out[c] = p[k];
            }
        }
        out
    }

    /// Minimum-norm solution of `⟨A_i, X⟩ = b_i` and its relative residual.
    pub fn min_norm_solution(&self, b: &DVector<f64>) -> (DVector<f64>, f64) {
        let mut x = DVector::zeros(self.structure.dim());
        for comp in &self.comps {
            let local_b = DVector::from_iterator(comp.members.len(), comp.members.iter().map(|&r| b[r]));
            let sol = &comp.pinv * local_b;
            for (k, &c) in comp.coords.iter().enumerate() {
                x[c] = sol[k];
            }
        }
        let mut res2 = 0.0;
        for (r, row) in self.rows.iter().enumerate() {
            let ax: f64 = row.iter().map(|&(c, v)| v * x[c]).sum();
            res2 += (ax - b[r]).powi(2);
        }
        (x, res2.sqrt() / b.norm().max(1.0))
    }

    /// Minimum-norm `y` with `Σ y_i A_i` closest to `r`.
    pub fn multipliers(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.rows.len());
        for comp in &self.comps {
            let local = DVector::from_iterator(comp.coords.len(), comp.coords.iter().map(|&c| r[c]));
            let sol = comp.pinv.tr_mul(&local);
            for (k, &i) in comp.members.iter().enumerate() {
                y[i] = sol[k];
            }
        }
        y
    }

    /// Dense orthonormal basis of `L⊥`.
    pub fn basis(&self, tol: f64) -> SubspaceBasis {
        let mut cols = Vec::with_capacity(self.rank());
        for comp in &self.comps {
            for j in 0..comp.v.ncols() {
                let mut col = DVector::zeros(self.structure.dim());
                for (k, &c) in comp.coords.iter().enumerate() {
                    col[c] = comp.v[(k, j)];
                }
                cols.push(col);
            }
        }
        SubspaceBasis::from_orthonormal(&self.structure, cols, tol)
    }

    /// Dense `P_{L⊥}` restricted to each component's coordinates.
    pub(crate) fn local_projectors(&self) -> impl Iterator<Item = (&[usize], DMatrix<f64>)> + '_ {
        self.comps
            .iter()
            .filter(|c| c.v.ncols() > 0)
            .map(|c| (c.coords.as_slice(), &c.v * c.v.transpose()))
    }
}

/// `L⊥`, the right-hand side and the distinguished points `C_L`, `Y_{L⊥}`.
#[derive(Clone, Debug)]
pub struct AffineData {
    pub structure: BlockStructure,
    pub lperp: ConstraintSpan,
    pub b: DVector<f64>,
    pub c: SymBlockMatrix,
    pub c_l: SymBlockMatrix,
    pub y_lperp: SymBlockMatrix,
    pub tol: f64,
}

impl AffineData {
    /// `P_{L⊥}` in svec coordinates.
    pub fn project_lperp_svec(&self, x: &DVector<f64>) -> DVector<f64> {
        self.lperp.project(x)
    }

    /// `P_L(x) = x − P_{L⊥}(x)` in svec coordinates.
    pub fn project_l_svec(&self, x: &DVector<f64>) -> DVector<f64> {
        x - self.lperp.project(x)
    }

    pub fn project_l(&self, x: &SymBlockMatrix) -> SymBlockMatrix {
        SymBlockMatrix::from_svec(&self.structure, &self.project_l_svec(&x.svec()))
    }

    pub fn project_lperp(&self, x: &SymBlockMatrix) -> SymBlockMatrix {
        SymBlockMatrix::from_svec(&self.structure, &self.project_lperp_svec(&x.svec()))
    }

    pub fn lperp_basis(&self) -> SubspaceBasis {
        self.lperp.basis(self.tol)
    }
}

/// Zeroes entries of `v` at most `tol · scale` in magnitude.
fn chop(mut v: DVector<f64>, scale: f64, tol: f64) -> DVector<f64> {
    v.iter_mut().filter(|x| x.abs() <= tol * scale).for_each(|x| *x = 0.0);
    v
}

/// Builds `L⊥`, `Y_{L⊥}` and `C_L` for an equality-form program.
pub fn build_affine_data(program: &ConicProgram, tol: f64) -> Result<AffineData> {
    let s = &program.structure;
    let rows = program.constraints.iter().map(|a| a.svec_sparse(s)).collect();
    let lperp = ConstraintSpan::new(s, rows, tol);
    let b = DVector::from_column_slice(&program.b);
    let (y, res) = lperp.min_norm_solution(&b);
    if res > 1e-6 {
        return Err(Error::InfeasibleAffine { residual: res });
    }
    let c = program.cost_matrix();
    let cv = c.svec();
    let c_l = chop(&cv - lperp.project(&cv), cv.amax(), tol);
    let y = chop(y.clone(), y.amax(), tol);
    Ok(AffineData {
        structure: s.clone(),
        lperp,
        b,
        c,
        c_l: SymBlockMatrix::from_svec(s, &c_l),
        y_lperp: SymBlockMatrix::from_svec(s, &y),
        tol,
    })
}

/// Outcome of [`check_admissible`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdmissibilityReport {
    pub contains_points: bool,
    pub l_invariant: bool,
    pub square_closed: bool,
}

impl AdmissibilityReport {
    pub fn all(&self) -> bool {
        self.contains_points && self.l_invariant && self.square_closed
    }
}

/// Random unit-norm elements of `s`, drawn from a fixed stream.
fn random_elements(s: &SubspaceBasis, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = rng::stream(seed, 0x0ad);
    (0..count)
        .map(|_| {
            let c = DVector::from_fn(s.dim(), |_, _| StandardNormal.sample(&mut rng));
            let v = s.combine(&c);
            let n = v.norm();
            if n > 0.0 {
                v / n
            } else {
                v
            }
        })
        .collect()
}

/// Tests the three admissibility conditions for `s`.
///
/// Invariance and square closure are checked on all basis elements (pairs)
/// for small subspaces and on random elements otherwise.
pub fn check_admissible(s: &SubspaceBasis, aff: &AffineData, tol: f64) -> AdmissibilityReport {
    let st = &aff.structure;
    let contains_points = [&aff.y_lperp, &aff.c_l]
        .iter()
        .all(|v| s.residual(v) <= tol * v.norm().max(1.0));

    let exhaustive = s.dim() <= EXHAUSTIVE_CHECK_DIM;
    let samples: Vec<DVector<f64>> = if exhaustive {
        s.vectors()
    } else {
        random_elements(s, 4, 0x5eed)
    };
    let l_invariant = samples.iter().all(|v| {
        let pl = aff.project_l_svec(v);
        s.residual_svec(&pl) <= tol
    });

    let mats: Vec<SymBlockMatrix> = samples.iter().map(|v| SymBlockMatrix::from_svec(st, v)).collect();
    let square_closed = if exhaustive {
        let pairs: Vec<(usize, usize)> = (0..mats.len()).flat_map(|j| (0..=j).map(move |i| (i, j))).collect();
        pairs
            .par_iter()
            .all(|&(i, j)| s.residual(&mats[i].jordan(&mats[j])) <= tol)
    } else {
        mats.iter().all(|x| s.residual(&x.square()) <= tol)
    };
    AdmissibilityReport { contains_points, l_invariant, square_closed }
}

/// Dimensions after each outer iteration of the closure.
#[derive(Clone, Debug, Default)]
pub struct ClosureTrace {
    pub dims: Vec<usize>,
}

/// The optimal admissible subspace `S_opt`.
pub fn optimal_admissible_subspace(aff: &AffineData, tol: f64) -> SubspaceBasis {
    optimal_admissible_subspace_traced(aff, tol).0
}

/// Eigenvalues closer than this (relative to the spectral radius) share an
/// idempotent.
const IDEMPOTENT_GAP: f64 = 1e-3;

/// Closure candidates count as new above this relative residual.
pub const CLOSURE_ACCEPT: f64 = 1e-6;

/// Consecutive rounds adding nothing before the span counts as closed.
const QUIET_ROUNDS: usize = 2;

/// Spectral idempotents of `x`, one per nonzero eigenvalue cluster.
///
/// Any sum of spectral projections of `x` is a polynomial in `x`, so merging
/// nearby eigenvalues keeps the candidates inside the generated algebra.
fn idempotents(x: &SymBlockMatrix) -> Vec<DVector<f64>> {
    let spec = x.spectral_projections(IDEMPOTENT_GAP);
    let scale = spec.iter().fold(0.0f64, |m, p| m.max(p.mean.abs()));
    spec.into_iter()
        .filter(|p| p.mean.abs() > IDEMPOTENT_GAP * scale)
        .map(|p| p.projection.svec())
        .collect()
}

/// Coordinates the closure works in: all of svec space, or an orthonormal
/// basis of a subspace known to contain the result.
struct Frame<'a> {
    ambient: Option<&'a SubspaceBasis>,
    dim: usize,
}

impl<'a> Frame<'a> {
    fn new(structure: &BlockStructure, ambient: Option<&'a SubspaceBasis>) -> Self {
        let dim = ambient.map_or(structure.dim(), |a| a.dim());
        Self { ambient, dim }
    }

    fn to_coef(&self, v: &DVector<f64>) -> DVector<f64> {
        self.ambient.map_or_else(|| v.clone(), |a| a.coefficients(v))
    }

    fn combine_coef(&self, c: &DVector<f64>) -> DVector<f64> {
        self.ambient.map_or_else(|| c.clone(), |a| a.combine(c))
    }
}

/// Grows the span of `gens` until it is closed under squaring and, with
/// `aff` given, under `P_L`.
///
/// If the span is not closed, a generic element `x` has `x²` or `P_L x`
/// outside of it. Each round draws `x` as a random combination of the
/// generators, which stay free of the rounding picked up by the orthonormal
/// basis, and adds `x²`, the spectral idempotents of `x` (better conditioned
/// than powers) and `P_L x`. Stops after several rounds in a row add nothing.
fn close_span(
    structure: &BlockStructure,
    gens: Vec<DVector<f64>>,
    aff: Option<&AffineData>,
    ambient: Option<&SubspaceBasis>,
    tol: f64,
    trace: &mut Vec<usize>,
) -> SubspaceBasis {
    let frame = Frame::new(structure, ambient);
    let mut gens: Vec<DVector<f64>> = gens.iter().map(|g| frame.to_coef(g)).filter(|g| g.norm() > 0.0).collect();
    let coords = BlockStructure::new(vec![1; frame.dim]).expect("positive orders");
    let mut basis = SubspaceBasis::empty(&coords, tol);
    basis.extend(&gens);
    trace.push(basis.dim());
    let mut quiet = 0;
    let mut round = 0u64;
    while basis.dim() > 0 && quiet < QUIET_ROUNDS {
        let mut rng = rng::stream(0x1de, round);
        round += 1;
        let mut c = DVector::zeros(frame.dim);
        for g in &gens {
            let t: f64 = StandardNormal.sample(&mut rng);
            c.axpy(t / g.norm(), g, 1.0);
        }
        let x = SymBlockMatrix::from_svec(structure, &frame.combine_coef(&c));
        let mut cands = idempotents(&x);
        cands.push(x.jordan(&x).svec());
        if let Some(aff) = aff {
            cands.push(aff.project_l_svec(&x.svec()));
        }
        let cands: Vec<DVector<f64>> = cands.iter().map(|v| frame.to_coef(v)).collect();
        let added = basis.extend_above(&cands, CLOSURE_ACCEPT.max(tol));
        if added == 0 {
            quiet += 1;
        } else {
            quiet = 0;
            gens.extend(cands.into_iter().filter(|g| g.norm() > 0.0));
            trace.push(basis.dim());
        }
    }
    let cols = basis.vectors().iter().map(|q| frame.combine_coef(q)).collect();
    SubspaceBasis::from_orthonormal(structure, cols, tol)
}

/// [`optimal_admissible_subspace`] together with its dimension history.
///
/// The closure runs inside `S_01`, which contains `S_opt`.
pub fn optimal_admissible_subspace_traced(aff: &AffineData, tol: f64) -> (SubspaceBasis, ClosureTrace) {
    let (_, s01) = crate::combinat::optimal_zeroone_subspace(aff, 0);
    let gens = vec![aff.c_l.svec(), aff.y_lperp.svec()];
    let mut trace = ClosureTrace { dims: vec![] };
    let basis = close_span(&aff.structure, gens, Some(aff), Some(&s01), tol, &mut trace.dims);
    if basis.dim() == 0 {
        log::warn!("C_L and Y_Lperp both vanish; the optimal admissible subspace is {{0}}");
    }
    (basis, trace)
}

/// Smallest subspace of `s` containing `seeds` and closed under Jordan products.
pub fn jordan_closure(structure: &BlockStructure, seeds: &[DVector<f64>], tol: f64) -> SubspaceBasis {
    close_span(structure, seeds.to_vec(), None, None, tol, &mut vec![])
}

/// Unit element of a Jordan subalgebra: the projection onto the range of a
/// maximum-rank element.
pub fn unit_element(s: &SubspaceBasis, seed: u64, tol: f64) -> SymBlockMatrix {
    let st = s.structure();
    let mut e = SymBlockMatrix::zeros(st);
    if s.dim() == 0 {
        return e;
    }
    let mut rng = rng::stream(seed, 0x0e);
    let c = DVector::from_fn(s.dim(), |_, _| StandardNormal.sample(&mut rng));
    let z = SymBlockMatrix::from_svec(st, &s.combine(&c));
    let scale = z.max_abs();
    let mut blocks = Vec::with_capacity(st.num_blocks());
    for blk in z.blocks() {
        let eig = blk.clone().symmetric_eigen();
        let n = blk.nrows();
        let mut p = DMatrix::zeros(n, n);
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam.abs() > tol.sqrt() * scale {
                let v = eig.eigenvectors.column(k);
                p += v * v.transpose();
            }
        }
        blocks.push(p);
    }
    e = SymBlockMatrix::from_blocks(st, blocks).expect("same structure");
    e
}

/// Flattened column-major blocks of a full (non-symmetric) block matrix.
fn flatten(blocks: &[DMatrix<f64>]) -> DVector<f64> {
    let len: usize = blocks.iter().map(|b| b.len()).sum();
    let mut v = DVector::zeros(len);
    let mut off = 0;
    for b in blocks {
        v.rows_mut(off, b.len()).copy_from_slice(b.as_slice());
        off += b.len();
    }
    v
}

fn unflatten(orders: &[usize], v: &DVector<f64>) -> Vec<DMatrix<f64>> {
    let mut off = 0;
    orders
        .iter()
        .map(|&n| {
            let b = DMatrix::from_column_slice(n, n, &v.as_slice()[off..off + n * n]);
            off += n * n;
            b
        })
        .collect()
}

fn extend_plain(basis: &mut Vec<DVector<f64>>, cands: &[DVector<f64>], tol: f64) {
    let scale = cands.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for cand in cands {
        let mut v = cand.clone();
        for _ in 0..2 {
            for q in basis.iter() {
                let a = q.dot(&v);
                v.axpy(-a, q, 1.0);
            }
        }
        let n = v.norm();
        if n > tol * scale {
            basis.push(v / n);
        }
    }
}

/// Whether the data generate every block algebra `M_{n_k}` without ties.
///
/// Sufficient test: a random data combination `R₁` has simple spectrum over
/// all blocks, a second combination `R₂` connects all eigenvectors of each
/// block, and no block is empty. Then the commutant is the block scalars and
/// the algebra, which contains its unit `I`, is everything.
fn generates_everything(program: &ConicProgram, seed: u64) -> bool {
    let st = &program.structure;
    let data: Vec<&crate::program::SparseSym> = std::iter::once(&program.cost).chain(&program.constraints).collect();
    let mut rng = rng::stream(seed, 0xda7);
    let mut combo = || {
        let mut v = DVector::zeros(st.dim());
        for a in &data {
            let sv = a.svec_sparse(st);
            let norm = sv.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
            if norm > 0.0 {
                let r: f64 = StandardNormal.sample(&mut rng);
                for (c, x) in sv {
                    v[c] += r * x / norm;
                }
            }
        }
        SymBlockMatrix::from_svec(st, &v)
    };
    let (r1, r2) = (combo(), combo());
    let scale = r1.max_abs();
    if scale == 0.0 || r1.blocks().iter().any(|b| b.amax() == 0.0) {
        return false;
    }
    let eigs: Vec<_> = r1.blocks().iter().map(|b| b.clone().symmetric_eigen()).collect();
    let mut all: Vec<f64> = eigs.iter().flat_map(|e| e.eigenvalues.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    let spread = all.last().unwrap() - all[0];
    if all.windows(2).any(|w| w[1] - w[0] <= 1e-8 * spread.max(scale)) {
        return false;
    }
    let cut = 1e-8 * r2.max_abs();
    eigs.iter().zip(r2.blocks()).all(|(e, b)| {
        let q = &e.eigenvectors;
        let m = q.transpose() * b * q;
        let n = m.nrows();
        let mut parent: Vec<usize> = (0..n).collect();
        for j in 0..n {
            for i in 0..j {
                if m[(i, j)].abs() > cut {
                    let (x, y) = (find(&mut parent, i), find(&mut parent, j));
                    parent[x.max(y)] = x.min(y);
                }
            }
        }
        (0..n).all(|i| find(&mut parent, i) == 0)
    })
}

/// Symmetric part of the \*-algebra generated by `C` and the `A_i`.
///
/// The closure runs in the full block matrix space; `cap` bounds its
/// dimension (default: the full dimension, which cannot be exceeded).
pub fn star_algebra_subspace(program: &ConicProgram, tol: f64, cap: Option<usize>) -> Result<SubspaceBasis> {
    let st = &program.structure;
    if generates_everything(program, 0) {
        if let Some(cap) = cap.filter(|&c| c < st.full_dim()) {
            return Err(Error::Capacity { dim: st.full_dim(), cap });
        }
        return Ok(SubspaceBasis::ambient(st, tol));
    }
    let orders = st.orders();
    let cap = cap.unwrap_or(st.full_dim());
    let mut data = vec![flatten(program.cost_matrix().blocks())];
    for i in 0..program.m() {
        data.push(flatten(program.constraint_matrix(i).blocks()));
    }
    let mut gens = Vec::new();
    extend_plain(&mut gens, &data, tol);
    let gen_mats: Vec<Vec<DMatrix<f64>>> = gens.iter().map(|g| unflatten(orders, g)).collect();
    let mut basis = gens.clone();
    let mut done = 0;
    while done < basis.len() {
        if basis.len() > cap {
            return Err(Error::Capacity { dim: basis.len(), cap });
        }
        let x = unflatten(orders, &basis[done]);
        done += 1;
        let cands: Vec<DVector<f64>> = gen_mats
            .par_iter()
            .map(|g| {
                let p: Vec<DMatrix<f64>> = g.iter().zip(&x).map(|(a, b)| a * b).collect();
                flatten(&p)
            })
            .collect();
        extend_plain(&mut basis, &cands, tol);
        if basis.len() == st.full_dim() {
            break;
        }
    }
    if basis.len() > cap {
        return Err(Error::Capacity { dim: basis.len(), cap });
    }
    let sym: Vec<SymBlockMatrix> = basis
        .iter()
        .map(|v| SymBlockMatrix::from_blocks(st, unflatten(orders, v)).expect("same structure"))
        .collect();
    crate::symspace::orthonormalize(st, &sym, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::SparseSym;
    use crate::symspace::{orthonormalize, DEFAULT_TOL};
    use nalgebra::dmatrix;

    fn program(cost: SymBlockMatrix, cons: Vec<SymBlockMatrix>, b: Vec<f64>) -> ConicProgram {
        ConicProgram::from_dense("t", &cost, &cons, b, 0.0).unwrap()
    }

    #[test]
    fn trace_one_gives_half_identity() {
        let s = BlockStructure::new(vec![2]).unwrap();
        let p = program(SymBlockMatrix::zeros(&s), vec![SymBlockMatrix::identity(&s)], vec![1.0]);
        let aff = build_affine_data(&p, DEFAULT_TOL).unwrap();
        assert!((&aff.y_lperp - &SymBlockMatrix::identity(&s).scale(0.5)).max_abs() < 1e-14);
    }

    #[test]
    fn orthogonal_cost_is_untouched() {
        let s = BlockStructure::new(vec![2]).unwrap();
        let e11 = SymBlockMatrix::unit(&s, 0, 0, 0);
        let e12 = SymBlockMatrix::unit(&s, 0, 0, 1);
        let p = program(e12.clone(), vec![e11.clone()], vec![3.0]);
        let aff = build_affine_data(&p, DEFAULT_TOL).unwrap();
        assert!((&aff.c_l - &e12).max_abs() < 1e-14);
        assert!((&aff.y_lperp - &e11.scale(3.0)).max_abs() < 1e-14);
        assert!(aff.project_lperp(&aff.c_l).norm() < 1e-10);
    }

    #[test]
    fn inconsistent_constraints_are_rejected() {
        let s = BlockStructure::new(vec![2]).unwrap();
        let e11 = SymBlockMatrix::unit(&s, 0, 0, 0);
        let p = program(SymBlockMatrix::zeros(&s), vec![e11.clone(), e11], vec![1.0, 2.0]);
        assert!(matches!(build_affine_data(&p, DEFAULT_TOL), Err(Error::InfeasibleAffine { .. })));
    }

    #[test]
    fn k2_theta_min_norm_point() {
        let p = crate::instances::theta_sdp(&crate::instances::HammingGraphSpec::new(1, vec![1]).unwrap());
        let aff = build_affine_data(&p, DEFAULT_TOL).unwrap();
        let s = &p.structure;
        let y = &aff.y_lperp;
        assert!((y.inner(&SymBlockMatrix::identity(s)) - 1.0).abs() < 1e-10);
        assert!(y.get(0, 0, 1).abs() < 1e-10);
    }

    #[test]
    fn ambient_space_is_admissible() {
        let s = BlockStructure::new(vec![3]).unwrap();
        let p = program(
            SymBlockMatrix::from_matrix(dmatrix![1.0, 2.0, 0.0; 2.0, 0.0, 1.0; 0.0, 1.0, 3.0]),
            vec![SymBlockMatrix::identity(&s)],
            vec![1.0],
        );
        let aff = build_affine_data(&p, DEFAULT_TOL).unwrap();
        assert!(check_admissible(&SubspaceBasis::ambient(&s, DEFAULT_TOL), &aff, 1e-8).all());
    }

    #[test]
    fn off_diagonal_alone_is_not_square_closed() {
        let s = BlockStructure::new(vec![2]).unwrap();
        let e12 = SymBlockMatrix::unit(&s, 0, 0, 1);
        let p = program(e12.clone(), vec![], vec![]);
        let aff = build_affine_data(&p, DEFAULT_TOL).unwrap();
        let sb = orthonormalize(&s, &[e12], DEFAULT_TOL).unwrap();
        let r = check_admissible(&sb, &aff, 1e-8);
        assert!(r.contains_points && r.l_invariant && !r.square_closed);
    }

    #[test]
    fn star_algebra_small_cases() {
        let s = BlockStructure::new(vec![3]).unwrap();
        let p = ConicProgram::new(
            "i",
            s.clone(),
            SparseSym::from_dense(&SymBlockMatrix::identity(&s), 0.0),
            vec![],
            vec![],
        )
        .unwrap();
        assert_eq!(star_algebra_subspace(&p, DEFAULT_TOL, None).unwrap().dim(), 1);

        let s2 = BlockStructure::new(vec![2]).unwrap();
        let p = program(
            SymBlockMatrix::unit(&s2, 0, 0, 0),
            vec![SymBlockMatrix::unit(&s2, 0, 1, 1)],
            vec![1.0],
        );
        assert_eq!(star_algebra_subspace(&p, DEFAULT_TOL, None).unwrap().dim(), 2);
    }

    #[test]
    fn star_algebra_capacity_guard() {
        let s = BlockStructure::new(vec![3]).unwrap();
        let p = program(
            SymBlockMatrix::from_matrix(dmatrix![1.0, 2.0, 0.0; 2.0, 0.0, 1.0; 0.0, 1.0, 3.0]),
            vec![SymBlockMatrix::unit(&s, 0, 0, 0)],
            vec![1.0],
        );
        assert!(matches!(star_algebra_subspace(&p, DEFAULT_TOL, Some(3)), Err(Error::Capacity { .. })));
        assert_eq!(star_algebra_subspace(&p, DEFAULT_TOL, None).unwrap().dim(), 6);
    }

    #[test]
    fn four_by_four_subspace_is_admissible() {
        // primal [[x1,1,x3,x4],[1,x2,x4,-x3],[x3,x4,1,x5],[x4,-x3,x5,0]], cost x1 + x2
        let s = BlockStructure::new(vec![4]).unwrap();
        let u = |i, j| SymBlockMatrix::unit(&s, 0, i, j);
        let cons = vec![u(0, 1), u(2, 2), u(3, 3), &u(0, 2) + &u(1, 3), &u(0, 3) - &u(1, 2)];
        let p = program(&u(0, 0) + &u(1, 1), cons, vec![2.0, 1.0, 0.0, 0.0, 0.0]);
        let aff = build_affine_data(&p, DEFAULT_TOL).unwrap();
        let sb = orthonormalize(&s, &[u(0, 1), u(0, 0), u(1, 1), u(2, 2)], DEFAULT_TOL).unwrap();
        assert!(check_admissible(&sb, &aff, 1e-8).all());
    }
}
