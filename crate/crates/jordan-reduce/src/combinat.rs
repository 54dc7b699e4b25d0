//! Partition, coordinate and 0/1-basis subspaces by sampled refinement.

use std::collections::HashMap;

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::rng;
use crate::subspace::AffineData;
use crate::symspace::{BlockStructure, SubspaceBasis, SymBlockMatrix};

/// Largest sampled coefficient; keeps squared 0/1 combinations exact in `f64`.
pub const SAMPLE_MAX: u64 = 1 << 20;

/// A within-block position, 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntryIndex {
    pub block: usize,
    pub i: usize,
    pub j: usize,
}

impl EntryIndex {
    pub fn new(block: usize, i: usize, j: usize) -> Self {
        Self { block, i, j }
    }
}

/// Relabels so that classes are numbered by first occurrence.
fn canonical(labels: &[Option<u32>]) -> (Vec<Option<u32>>, usize) {
    let mut map: HashMap<u32, u32> = HashMap::new();
    let out = labels
        .iter()
        .map(|l| {
            l.map(|l| {
                let next = map.len() as u32;
                *map.entry(l).or_insert(next)
            })
        })
        .collect();
    (out, map.len())
}

fn meet_labels(a: &[Option<u32>], b: &[Option<u32>]) -> (Vec<Option<u32>>, usize) {
    let mut map: HashMap<(u32, u32), u32> = HashMap::new();
    let out = a
        .iter()
        .zip(b)
        .map(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => {
                let next = map.len() as u32;
                Some(*map.entry((*x, *y)).or_insert(next))
            }
            _ => None,
        })
        .collect();
    (out, map.len())
}

/// Matrix entries at each svec coordinate.
fn entry_values(t: &SymBlockMatrix) -> Vec<f64> {
    let s = t.structure();
    let mut v = Vec::with_capacity(s.dim());
    for (k, &n) in s.orders().iter().enumerate() {
        let b = t.block(k);
        for j in 0..n {
            for i in 0..=j {
                v.push(b[(i, j)]);
            }
        }
    }
    v
}

/// Clusters values at the coordinates where `mask` holds; gaps `≤ tol·max(1,|v|)` chain.
fn cluster_values(values: &[f64], mask: Option<&[bool]>, tol: f64) -> (Vec<Option<u32>>, usize) {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&c| mask.is_none_or(|m| m[c])).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut labels = vec![None; values.len()];
    let mut cluster = 0u32;
    let mut prev: Option<f64> = None;
    for &c in &idx {
        let v = values[c];
        if let Some(p) = prev {
            if v - p > tol * v.abs().max(1.0) {
                cluster += 1;
            }
        }
        labels[c] = Some(cluster);
        prev = Some(v);
    }
    canonical(&labels)
}

fn normalized_values(t: &SymBlockMatrix) -> Vec<f64> {
    let m = t.max_abs();
    let mut v = entry_values(t);
    if m > 0.0 {
        v.iter_mut().for_each(|x| *x /= m);
    }
    v
}

/// Entries of magnitude above `tol`; values come scaled to order one.
fn support_mask(values: &[f64], tol: f64) -> Vec<bool> {
    values.iter().map(|v| v.abs() > tol).collect()
}

/// A symmetric partition of all within-block positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionNxN {
    structure: BlockStructure,
    label: Vec<u32>,
    count: usize,
}

impl PartitionNxN {
    fn from_options(structure: &BlockStructure, labels: Vec<Option<u32>>, count: usize) -> Self {
        let label = labels.into_iter().map(|l| l.expect("total partition")).collect();
        Self { structure: structure.clone(), label, count }
    }

    /// Builds from a class id per entry; ids are renumbered canonically.
    pub fn from_fn(structure: &BlockStructure, f: impl Fn(EntryIndex) -> u32) -> Self {
        let labels: Vec<Option<u32>> = (0..structure.dim())
            .map(|c| {
                let (b, i, j) = structure.entry(c);
                Some(f(EntryIndex::new(b, i, j)))
            })
            .collect();
        let (l, n) = canonical(&labels);
        Self::from_options(structure, l, n)
    }

    /// Everything in one class.
    pub fn trivial(structure: &BlockStructure) -> Self {
        Self { structure: structure.clone(), label: vec![0; structure.dim()], count: 1 }
    }

    /// Every symmetric pair in its own class.
    pub fn discrete(structure: &BlockStructure) -> Self {
        Self::from_fn(structure, |e| structure.coord(e.block, e.i, e.j) as u32)
    }

    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    pub fn num_classes(&self) -> usize {
        self.count
    }

    pub fn class_of(&self, e: EntryIndex) -> u32 {
        self.label[self.structure.coord(e.block, e.i, e.j)]
    }

    /// Class id per svec coordinate.
    pub fn labels(&self) -> &[u32] {
        &self.label
    }

    fn options(&self) -> Vec<Option<u32>> {
        self.label.iter().map(|&l| Some(l)).collect()
    }

    /// Coarsest common refinement.
    pub fn meet(&self, other: &PartitionNxN) -> PartitionNxN {
        let (l, n) = meet_labels(&self.options(), &other.options());
        Self::from_options(&self.structure, l, n)
    }

    /// Whether every class of `self` lies inside a class of `other`.
    pub fn refines(&self, other: &PartitionNxN) -> bool {
        self.meet(other).count == self.count
    }

    pub fn characteristic_matrices(&self) -> Vec<SymBlockMatrix> {
        characteristic(&self.structure, &self.options(), self.count)
    }

    pub fn basis(&self, tol: f64) -> SubspaceBasis {
        SubspaceBasis::from_classes(&self.structure, self.options(), self.count, tol)
    }
}

/// A symmetric set of within-block positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymRelation {
    structure: BlockStructure,
    member: Vec<bool>,
}

impl SymRelation {
    pub fn empty(structure: &BlockStructure) -> Self {
        Self { structure: structure.clone(), member: vec![false; structure.dim()] }
    }

    /// Every position of every block.
    pub fn full(structure: &BlockStructure) -> Self {
        Self { structure: structure.clone(), member: vec![true; structure.dim()] }
    }

    pub fn from_entries(structure: &BlockStructure, entries: &[EntryIndex]) -> Self {
        let mut r = Self::empty(structure);
        for e in entries {
            r.member[structure.coord(e.block, e.i, e.j)] = true;
        }
        r
    }

    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    pub fn contains(&self, e: EntryIndex) -> bool {
        self.member[self.structure.coord(e.block, e.i, e.j)]
    }

    /// Membership per svec coordinate.
    pub fn mask(&self) -> &[bool] {
        &self.member
    }

    /// Number of symmetric pairs (svec coordinates) in the relation.
    pub fn len(&self) -> usize {
        self.member.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All members, both orientations, sorted.
    pub fn members(&self) -> Vec<EntryIndex> {
        let mut out = Vec::new();
        for (c, &m) in self.member.iter().enumerate() {
            if m {
                let (b, i, j) = self.structure.entry(c);
                out.push(EntryIndex::new(b, i, j));
                if i != j {
                    out.push(EntryIndex::new(b, j, i));
                }
            }
        }
        out.sort();
        out
    }

    pub fn union(&self, other: &SymRelation) -> SymRelation {
        let member = self.member.iter().zip(&other.member).map(|(a, b)| *a || *b).collect();
        Self { structure: self.structure.clone(), member }
    }

    fn union_mask(&mut self, mask: &[bool]) {
        for (m, &x) in self.member.iter_mut().zip(mask) {
            *m |= x;
        }
    }

    /// `(i,j),(j,k) ∈ R ⇒ (i,k) ∈ R` within every block.
    pub fn is_transitive(&self) -> bool {
        let s = &self.structure;
        for (b, &n) in s.orders().iter().enumerate() {
            let has = |i: usize, j: usize| self.member[s.coord(b, i, j)];
            for i in 0..n {
                for j in 0..n {
                    if !has(i, j) {
                        continue;
                    }
                    for k in 0..n {
                        if has(j, k) && !has(i, k) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Equivalence classes of `{i : (i,i) ∈ R}` per block, as `(block, indices)`.
    ///
    /// For a transitive relation these are the diagonal blocks of the
    /// coordinate subspace after a permutation.
    pub fn index_classes(&self) -> Vec<(usize, Vec<usize>)> {
        let s = &self.structure;
        let mut out = Vec::new();
        for (b, &n) in s.orders().iter().enumerate() {
            let mut seen = vec![false; n];
            for i in 0..n {
                if seen[i] || !self.member[s.coord(b, i, i)] {
                    continue;
                }
                let mut class = vec![i];
                seen[i] = true;
                let mut head = 0;
                while head < class.len() {
                    let x = class[head];
                    head += 1;
                    for y in 0..n {
                        if !seen[y] && self.member[s.coord(b, x, y)] {
                            seen[y] = true;
                            class.push(y);
                        }
                    }
                }
                class.sort_unstable();
                out.push((b, class));
            }
        }
        out
    }

    pub fn characteristic_matrices(&self) -> Vec<SymBlockMatrix> {
        let (labels, n) = self.singleton_labels();
        characteristic(&self.structure, &labels, n)
    }

    fn singleton_labels(&self) -> (Vec<Option<u32>>, usize) {
        let mut n = 0u32;
        let labels = self
            .member
            .iter()
            .map(|&m| {
                m.then(|| {
                    n += 1;
                    n - 1
                })
            })
            .collect();
        (labels, n as usize)
    }

    /// Span of `{E_ij + E_ji : (i,j) ∈ R}`.
    pub fn basis(&self, tol: f64) -> SubspaceBasis {
        let (labels, n) = self.singleton_labels();
        SubspaceBasis::from_classes(&self.structure, labels, n, tol)
    }
}

/// A partition of the members of a symmetric relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionOfRelation {
    structure: BlockStructure,
    label: Vec<Option<u32>>,
    count: usize,
}

impl PartitionOfRelation {
    pub fn relation(&self) -> SymRelation {
        SymRelation { structure: self.structure.clone(), member: self.label.iter().map(|l| l.is_some()).collect() }
    }

    pub fn num_classes(&self) -> usize {
        self.count
    }

    pub fn class_of(&self, e: EntryIndex) -> Option<u32> {
        self.label[self.structure.coord(e.block, e.i, e.j)]
    }

    pub fn labels(&self) -> &[Option<u32>] {
        &self.label
    }

    pub fn characteristic_matrices(&self) -> Vec<SymBlockMatrix> {
        characteristic(&self.structure, &self.label, self.count)
    }

    pub fn basis(&self, tol: f64) -> SubspaceBasis {
        SubspaceBasis::from_classes(&self.structure, self.label.clone(), self.count, tol)
    }
}

fn characteristic(structure: &BlockStructure, labels: &[Option<u32>], count: usize) -> Vec<SymBlockMatrix> {
    let mut out = vec![SymBlockMatrix::zeros(structure); count];
    for (c, l) in labels.iter().enumerate() {
        if let Some(p) = l {
            let (b, i, j) = structure.entry(c);
            out[*p as usize].set(b, i, j, 1.0);
        }
    }
    out
}

fn draw(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    (0..count).map(|_| rng.random_range(1..=SAMPLE_MAX) as f64).collect()
}

/// `Σ_P t_P B_P` for 0/1 classes given by labels.
fn combination(structure: &BlockStructure, labels: &[Option<u32>], t: &[f64]) -> SymBlockMatrix {
    let mut x = SymBlockMatrix::zeros(structure);
    for (c, l) in labels.iter().enumerate() {
        if let Some(p) = l {
            let (b, i, j) = structure.entry(c);
            x.set(b, i, j, t[*p as usize]);
        }
    }
    x
}

fn random_combination(basis: &[SymBlockMatrix], seed: u64) -> Option<SymBlockMatrix> {
    let first = basis.first()?;
    let mut rng = rng::stream(seed, 0xf0);
    let t = draw(&mut rng, basis.len());
    let mut x = SymBlockMatrix::zeros(first.structure());
    for (b, ti) in basis.iter().zip(t) {
        x.axpy(ti, b);
    }
    Some(x)
}

/// `(Σ_B t_B B)²` with integer `t_B` uniform in `[1, 2²⁰]`.
///
/// An empty basis gives `None`.
pub fn sample_f_square(basis: &[SymBlockMatrix], seed: u64) -> Option<SymBlockMatrix> {
    random_combination(basis, seed).map(|x| x.square())
}

/// `P_L(Σ_B t_B B)` with the same sampling as [`sample_f_square`].
pub fn sample_f_l(basis: &[SymBlockMatrix], aff: &AffineData, seed: u64) -> Option<SymBlockMatrix> {
    random_combination(basis, seed).map(|x| aff.project_l(&x))
}

/// Partition of all positions by the values of `t`.
///
/// Sorted values whose gap is at most `tol·max(1,|v|)` share a class.
pub fn entry_partition(t: &SymBlockMatrix, tol: f64) -> PartitionNxN {
    let (l, n) = cluster_values(&entry_values(t), None, tol);
    PartitionNxN::from_options(t.structure(), l, n)
}

/// Positions with `|T_ij| > tol·‖T‖_max`.
pub fn entry_support(t: &SymBlockMatrix, tol: f64) -> SymRelation {
    SymRelation { structure: t.structure().clone(), member: support_mask(&normalized_values(t), tol) }
}

/// Which polynomial matrix a refinement step evaluates.
#[derive(Clone, Copy)]
enum Poly {
    L,
    Square,
}

struct Sampler<'a> {
    aff: &'a AffineData,
    rng: ChaCha8Rng,
}

impl<'a> Sampler<'a> {
    fn new(aff: &'a AffineData, seed: u64, stream: u64) -> Self {
        Self { aff, rng: rng::stream(seed, stream) }
    }

    /// Entry values of `f(B)` at a fresh point, and the clustering tolerance to use.
    fn eval(&mut self, f: Poly, labels: &[Option<u32>], count: usize) -> (Vec<f64>, f64) {
        let t = draw(&mut self.rng, count);
        let x = combination(&self.aff.structure, labels, &t);
        match f {
            // integer entries below 2^53: exact
            Poly::Square => (entry_values(&x.square()), 0.0),
            Poly::L => {
                let scale = x.max_abs();
                let mut v = entry_values(&self.aff.project_l(&x));
                if scale > 0.0 {
                    v.iter_mut().for_each(|e| *e /= scale);
                }
                (v, self.aff.tol)
            }
        }
    }
}

/// The optimal partition subspace `S_part`.
pub fn optimal_partition_subspace(aff: &AffineData, seed: u64) -> (PartitionNxN, SubspaceBasis) {
    let s = &aff.structure;
    let tol = aff.tol;
    let (a, _) = cluster_values(&normalized_values(&aff.y_lperp), None, tol);
    let (b, _) = cluster_values(&normalized_values(&aff.c_l), None, tol);
    let (mut labels, mut count) = meet_labels(&a, &b);
    let mut sampler = Sampler::new(aff, seed, 0x9a);
    loop {
        let before = count;
        for f in [Poly::L, Poly::Square] {
            for _ in 0..2 {
                let (v, t) = sampler.eval(f, &labels, count);
                let (p, _) = cluster_values(&v, None, t);
                (labels, count) = meet_labels(&labels, &p);
            }
        }
        if count == before {
            break;
        }
    }
    let p = PartitionNxN::from_options(s, labels, count);
    let basis = p.basis(tol);
    (p, basis)
}

/// The optimal coordinate subspace `S_coord`.
pub fn optimal_coordinate_subspace(aff: &AffineData, seed: u64) -> (SymRelation, SubspaceBasis) {
    let tol = aff.tol;
    let mut r = entry_support(&aff.y_lperp, tol).union(&entry_support(&aff.c_l, tol));
    let mut sampler = Sampler::new(aff, seed, 0xc0);
    loop {
        let before = r.len();
        for f in [Poly::L, Poly::Square] {
            for _ in 0..2 {
                let (labels, n) = r.singleton_labels();
                let (v, t) = sampler.eval(f, &labels, n);
                r.union_mask(&support_mask(&v, t));
            }
        }
        if r.len() == before {
            break;
        }
    }
    let basis = r.basis(tol);
    (r, basis)
}

/// The optimal 0/1-basis subspace `S_{0/1}`.
pub fn optimal_zeroone_subspace(aff: &AffineData, seed: u64) -> (PartitionOfRelation, SubspaceBasis) {
    let s = &aff.structure;
    let tol = aff.tol;
    let y = normalized_values(&aff.y_lperp);
    let c = normalized_values(&aff.c_l);
    let mut rel: Vec<bool> = support_mask(&y, tol).iter().zip(support_mask(&c, tol)).map(|(a, b)| *a || b).collect();
    let (a, _) = cluster_values(&y, Some(&rel), tol);
    let (b, _) = cluster_values(&c, Some(&rel), tol);
    let (mut labels, mut count) = meet_labels(&a, &b);
    let mut sampler = Sampler::new(aff, seed, 0x01);
    loop {
        let before = (rel.iter().filter(|&&m| m).count(), count);
        for f in [Poly::L, Poly::Square] {
            let (v1, t) = sampler.eval(f, &labels, count);
            let (v2, _) = sampler.eval(f, &labels, count);
            for (m, (x1, x2)) in rel.iter_mut().zip(support_mask(&v1, t).into_iter().zip(support_mask(&v2, t))) {
                *m |= x1 || x2;
            }
            let fresh = count as u32;
            for (l, &m) in labels.iter_mut().zip(&rel) {
                if m && l.is_none() {
                    *l = Some(fresh);
                }
            }
            let (p1, _) = cluster_values(&v1, Some(&rel), t);
            let (p2, _) = cluster_values(&v2, Some(&rel), t);
            let (l1, _) = meet_labels(&labels, &p1);
            (labels, count) = meet_labels(&l1, &p2);
        }
        let after = (rel.iter().filter(|&&m| m).count(), count);
        if after == before {
            break;
        }
    }
    let p = PartitionOfRelation { structure: s.clone(), label: labels, count };
    let basis = p.basis(tol);
    (p, basis)
}

/// Whether `map(X) ∘ Y ∈ span Y` for all characteristic matrices `X, Y`.
pub fn is_matrix_equitable_for(
    p: &PartitionNxN,
    map: impl Fn(&SymBlockMatrix) -> SymBlockMatrix,
    tol: f64,
) -> bool {
    for x in p.characteristic_matrices() {
        let v = entry_values(&map(&x));
        let scale = v.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        let mut lo = vec![f64::INFINITY; p.count];
        let mut hi = vec![f64::NEG_INFINITY; p.count];
        for (c, &l) in p.label.iter().enumerate() {
            lo[l as usize] = lo[l as usize].min(v[c]);
            hi[l as usize] = hi[l as usize].max(v[c]);
        }
        if lo.iter().zip(&hi).any(|(a, b)| b - a > tol * scale) {
            return false;
        }
    }
    true
}

/// Whether the span of `p`'s characteristic matrices is invariant under `P_L`.
pub fn is_matrix_equitable(p: &PartitionNxN, aff: &AffineData, tol: f64) -> bool {
    is_matrix_equitable_for(p, |x| aff.project_l(x), tol)
}

/// Coarsest Jordan configuration refining `p`.
pub fn coarsest_jordan_configuration(p: &PartitionNxN, seed: u64) -> PartitionNxN {
    let s = p.structure().clone();
    let mut cur = p.meet(&entry_partition(&SymBlockMatrix::identity(&s), 0.0));
    let mut rng = rng::stream(seed, 0x1c);
    loop {
        let before = cur.count;
        for _ in 0..2 {
            let t = draw(&mut rng, cur.count);
            let x = combination(&s, &cur.options(), &t).square();
            cur = cur.meet(&entry_partition(&x, 0.0));
        }
        if cur.count == before {
            return cur;
        }
    }
}

/// Connected components of the graph on `{E_ij + E_ji}` whose edges join
/// basis elements coupled by `P_L`.
pub fn invariant_coordinate_components(aff: &AffineData, tol: f64) -> Vec<SymRelation> {
    let s = &aff.structure;
    let mut parent: Vec<usize> = (0..s.dim()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (coords, proj) in aff.lperp.local_projectors() {
        for a in 0..coords.len() {
            for b in 0..a {
                if proj[(a, b)].abs() > tol {
                    let (x, y) = (find(&mut parent, coords[a]), find(&mut parent, coords[b]));
                    if x != y {
                        parent[x.max(y)] = x.min(y);
                    }
                }
            }
        }
    }
    let mut comps: Vec<SymRelation> = Vec::new();
    let mut index: HashMap<usize, usize> = HashMap::new();
    for c in 0..s.dim() {
        let root = find(&mut parent, c);
        let k = *index.entry(root).or_insert_with(|| {
            comps.push(SymRelation::empty(s));
            comps.len() - 1
        });
        comps[k].member[c] = true;
    }
    comps
}

/// Entry values of a sampled `f_{X²}` over labelled classes (exposed for tests and tools).
pub fn sample_square_over_classes(
    structure: &BlockStructure,
    labels: &[Option<u32>],
    count: usize,
    seed: u64,
) -> SymBlockMatrix {
    let mut rng = rng::stream(seed, 0xf1);
    let t = draw(&mut rng, count);
    combination(structure, labels, &t).square()
}

/// Stacks the svec coordinates of `xs` as columns (helper for rank checks).
pub fn svec_columns(xs: &[SymBlockMatrix]) -> Vec<DVector<f64>> {
    xs.iter().map(|x| x.svec()).collect()
}
