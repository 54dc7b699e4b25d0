//! Generators for theta, cp-rank and planted-symmetry instances.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use rand::Rng;

use crate::combinat::PartitionNxN;
use crate::error::{Error, Result};
use crate::program::{ConicProgram, SparseSym};
use crate::rng;
use crate::symspace::{BlockStructure, SymBlockMatrix};

/// Graph on `q`-bit labels, adjacent iff the Hamming distance lies in `distances`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HammingGraphSpec {
    pub q: u32,
    pub distances: BTreeSet<u32>,
}

impl HammingGraphSpec {
    pub fn new(q: u32, distances: Vec<u32>) -> Result<Self> {
        if q == 0 || q > 16 {
            return Err(Error::Domain(format!("q = {q} out of range")));
        }
        if let Some(d) = distances.iter().find(|&&d| d == 0 || d > q) {
            return Err(Error::Domain(format!("distance {d} not in 1..={q}")));
        }
        Ok(Self { q, distances: distances.into_iter().collect() })
    }

    pub fn order(&self) -> usize {
        1 << self.q
    }

    /// `hamming_q_d1[_d2…]`.
    pub fn name(&self) -> String {
        let mut s = format!("hamming_{}", self.q);
        for d in &self.distances {
            s.push_str(&format!("_{d}"));
        }
        s
    }

    /// Edges `(u, v)`, `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.order();
        let mut out = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if self.distances.contains(&((u ^ v) as u32).count_ones()) {
                    out.push((u, v));
                }
            }
        }
        out
    }
}

/// `min ⟨−J, X⟩` s.t. `trace X = 1`, `X_uv = 0` on edges, `X ⪰ 0`.
pub fn theta_sdp(spec: &HammingGraphSpec) -> ConicProgram {
    let n = spec.order();
    let s = BlockStructure::new(vec![n]).expect("positive order");
    let mut cost = Vec::with_capacity(s.dim());
    for j in 0..n {
        for i in 0..=j {
            cost.push((s.coord(0, i, j), -1.0));
        }
    }
    let mut constraints = vec![SparseSym::from_entries((0..n).map(|i| (s.coord(0, i, i), 1.0)).collect())];
    let mut b = vec![1.0];
    for (u, v) in spec.edges() {
        constraints.push(SparseSym::from_entries(vec![(s.coord(0, u, v), 1.0)]));
        b.push(0.0);
    }
    ConicProgram::new(spec.name(), s, SparseSym::from_entries(cost), constraints, b).expect("well-formed")
}

/// Classes of `{a ≤ b}` over `[n²]` under `X_{ij,kl} = X_{il,kj}` with column-major `ij ↦ i + n j`.
fn cprank_classes(n: usize) -> Vec<Vec<(usize, usize)>> {
    let nn = n * n;
    let key = |a: usize, b: usize| a.min(b) * nn + a.max(b);
    let mut parent: Vec<usize> = (0..nn * nn).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let x = find(&mut parent, key(i + n * j, k + n * l));
                    let y = find(&mut parent, key(i + n * l, k + n * j));
                    if x != y {
                        parent[x.max(y)] = x.min(y);
                    }
                }
            }
        }
    }
    let mut classes: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for b in 0..nn {
        for a in 0..=b {
            let r = find(&mut parent, key(a, b));
            classes.entry(r).or_default().push((a, b));
        }
    }
    let mut out: Vec<_> = classes.into_values().collect();
    out.sort_by_key(|c| (c[0].1, c[0].0));
    out
}

/// Lower-bound SDP for the cp-rank of `w`, with the free variables `t` and `X`
/// eliminated into the constraint rows.
///
/// Blocks: the moment matrix `[[t, vec(W)ᵀ], [vec(W), X]]`, `W⊗W − X`, and
/// the slacks `W²_ij − X_{ij,ij}` as order-1 blocks. One equation per class of
/// identified `X` entries plus one for `t`.
pub fn cprank_sdp(w: &DMatrix<f64>) -> Result<ConicProgram> {
    let n = w.nrows();
    if n == 0 || w.ncols() != n {
        return Err(Error::Domain("W must be square and nonempty".into()));
    }
    if (w - w.transpose()).amax() > 0.0 {
        return Err(Error::Domain("W must be symmetric".into()));
    }
    if w.iter().any(|&v| v < 0.0) {
        return Err(Error::Domain("W must be entrywise nonnegative".into()));
    }
    let nn = n * n;
    let mut orders = vec![nn + 1, nn];
    orders.extend(std::iter::repeat_n(1, nn));
    let s = BlockStructure::new(orders)?;
    let vw: Vec<f64> = (0..nn).map(|a| w[(a % n, a / n)]).collect();
    let ww = w.kronecker(w);

    let mut cost = Vec::new();
    for a in 0..nn {
        cost.push((s.coord(0, 0, a + 1), vw[a]));
        for b in a..nn {
            cost.push((s.coord(1, a, b), ww[(a, b)]));
        }
        cost.push((s.coord(2 + a, 0, 0), vw[a] * vw[a]));
    }
    let mut constraints = vec![SparseSym::from_entries(vec![(s.coord(0, 0, 0), -1.0)])];
    let mut b = vec![-1.0];
    for class in cprank_classes(n) {
        let mut e = Vec::new();
        for &(a, c) in &class {
            e.push((s.coord(0, a + 1, c + 1), -1.0));
            e.push((s.coord(1, a, c), 1.0));
            if a == c {
                e.push((s.coord(2 + a, 0, 0), 1.0));
            }
        }
        constraints.push(SparseSym::from_entries(e));
        b.push(0.0);
    }
    ConicProgram::new(format!("cprank_{n}"), s, SparseSym::from_entries(cost), constraints, b)
}

/// The 3×3 matrix of the cp-rank tables.
pub fn cprank_z() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[4.0, 0.0, 1.0, 0.0, 4.0, 1.0, 1.0, 1.0, 3.0])
}

/// Symmetry planted into [`planted_symmetry_sdp`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlantedGroup {
    Trivial,
    Cyclic,
    Dihedral,
    /// `diag(A, A, c)` (odd `n`) or `diag(A, A)` (even `n`).
    Blockcopy,
}

impl std::str::FromStr for PlantedGroup {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trivial" => Ok(Self::Trivial),
            "cyclic" => Ok(Self::Cyclic),
            "dihedral" => Ok(Self::Dihedral),
            "blockcopy" => Ok(Self::Blockcopy),
            _ => Err(Error::Domain(format!("unknown group {s:?}"))),
        }
    }
}

impl PlantedGroup {
    pub fn name(self) -> &'static str {
        match self {
            Self::Trivial => "trivial",
            Self::Cyclic => "cyclic",
            Self::Dihedral => "dihedral",
            Self::Blockcopy => "blockcopy",
        }
    }
}

/// Permutations of `[n]` generating the group (empty for the trivial group).
pub fn group_generators(n: usize, group: PlantedGroup) -> Vec<Vec<usize>> {
    let rot: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
    let refl: Vec<usize> = (0..n).map(|i| (n - i) % n).collect();
    match group {
        PlantedGroup::Trivial | PlantedGroup::Blockcopy => vec![],
        PlantedGroup::Cyclic => vec![rot],
        PlantedGroup::Dihedral => vec![rot, refl],
    }
}

/// Orbits of the group generated by `gens` acting on symmetric positions of one order-`n` block.
pub fn orbit_partition(n: usize, gens: &[Vec<usize>]) -> PartitionNxN {
    let s = BlockStructure::new(vec![n]).expect("positive order");
    let mut parent: Vec<usize> = (0..s.dim()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for g in gens {
        for j in 0..n {
            for i in 0..=j {
                let x = find(&mut parent, s.coord(0, i, j));
                let y = find(&mut parent, s.coord(0, g[i], g[j]));
                if x != y {
                    parent[x.max(y)] = x.min(y);
                }
            }
        }
    }
    PartitionNxN::from_fn(&s, |e| find(&mut parent.clone(), s.coord(0, e.i, e.j)) as u32)
}

fn blockcopy_partition(n: usize) -> PartitionNxN {
    let s = BlockStructure::new(vec![n]).expect("positive order");
    let k = n / 2;
    // class ids: A entries by (i,j) in copy-local indices, c, zero
    PartitionNxN::from_fn(&s, |e| {
        let (bi, bj) = (e.i / k.max(1), e.j / k.max(1));
        if n % 2 == 1 && e.i == n - 1 && e.j == n - 1 {
            (k * k) as u32
        } else if bi == bj && bi < 2 {
            let (i, j) = (e.i % k, e.j % k);
            (i.min(j) * k + i.max(j)) as u32
        } else {
            (k * k + 1) as u32
        }
    })
}

/// Partition whose constant-on-class matrices contain the planted data.
pub fn planted_partition(n: usize, group: PlantedGroup) -> PartitionNxN {
    match group {
        PlantedGroup::Blockcopy => blockcopy_partition(n),
        g => orbit_partition(n, &group_generators(n, g)),
    }
}

/// Random invariant program on `𝕊ⁿ` with `X₀ = I` feasible.
///
/// Data are integer-valued and constant on the classes of [`planted_partition`]
/// (with the off-copy zero class of `blockcopy` forced to zero).
pub fn planted_symmetry_sdp(n: usize, group: PlantedGroup, seed: u64) -> Result<ConicProgram> {
    if n == 0 || n > 8 {
        return Err(Error::Domain(format!("n = {n} out of range 1..=8")));
    }
    if group == PlantedGroup::Blockcopy && n < 2 {
        return Err(Error::Domain("blockcopy needs n ≥ 2".into()));
    }
    let p = planted_partition(n, group);
    let s = p.structure().clone();
    let zero_class = (group == PlantedGroup::Blockcopy).then(|| p.class_of(crate::combinat::EntryIndex::new(0, 0, n - 1)));
    let mut rng = rng::stream(seed, 0x51);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
        let vals: Vec<f64> = (0..p.num_classes()).map(|_| rng.random_range(-3i32..=3) as f64).collect();
        let mut x = SymBlockMatrix::zeros(&s);
        for (c, &l) in p.labels().iter().enumerate() {
            if Some(l) != zero_class {
                let (b, i, j) = s.entry(c);
                x.set(b, i, j, vals[l as usize]);
            }
        }
        x
    };
    let m = (n / 2).clamp(1, 3);
    let cost = draw(&mut rng);
    let mut cons = vec![SymBlockMatrix::identity(&s)];
    for _ in 0..m {
        cons.push(draw(&mut rng));
    }
    let id = SymBlockMatrix::identity(&s);
    let b = cons.iter().map(|a| a.inner(&id)).collect();
    ConicProgram::from_dense(format!("planted_{}_{}", group.name(), n), &cost, &cons, b, 0.0)
}

/// Linear program with a planted cyclic symmetry of order 4.
///
/// Variables: three orbits of size 4 plus a fixed one (13 order-1 blocks).
/// Constraints: two orbits of size 4 plus a fixed one. `x = 1` is feasible.
#[derive(Clone, Debug)]
pub struct PlantedLp {
    pub program: ConicProgram,
    pub variable_orbits: Vec<Vec<usize>>,
    pub constraint_orbits: Vec<Vec<usize>>,
}

pub fn planted_c4_lp(seed: u64) -> PlantedLp {
    let nv = 13;
    let s = BlockStructure::new(vec![1; nv]).expect("positive orders");
    let var = |orbit: usize, r: usize| if orbit == 3 { 12 } else { 4 * orbit + r % 4 };
    let mut rng = rng::stream(seed, 0x1b);
    let coef = |rng: &mut rand_chacha::ChaCha8Rng| rng.random_range(1i32..=5) as f64;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut constraint_orbits = Vec::new();
    for _ in 0..2 {
        // base row: a coefficient per (orbit, offset), rotated by the group
        let base: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| coef(&mut rng)).collect()).collect();
        let fixed = coef(&mut rng);
        let mut orbit = Vec::new();
        for g in 0..4 {
            let mut row = vec![0.0; nv];
            for (o, bo) in base.iter().enumerate() {
                for (r, &v) in bo.iter().enumerate() {
                    row[var(o, r + g)] = v;
                }
            }
            row[12] = fixed;
            orbit.push(rows.len());
            rows.push(row);
        }
        constraint_orbits.push(orbit);
    }
    let mut row = vec![0.0; nv];
    for o in 0..4 {
        let v = coef(&mut rng);
        for r in 0..4 {
            row[var(o, r)] = v;
        }
    }
    constraint_orbits.push(vec![rows.len()]);
    rows.push(row);
    let mut cost = vec![0.0; nv];
    for o in 0..4 {
        let v = coef(&mut rng);
        for r in 0..4 {
            cost[var(o, r)] = v;
        }
    }
    let sparse = |r: &[f64]| SparseSym::from_entries(r.iter().enumerate().map(|(k, &v)| (s.coord(k, 0, 0), v)).collect());
    let b = rows.iter().map(|r| r.iter().sum()).collect();
    let program = ConicProgram::new("planted_c4_lp", s.clone(), sparse(&cost), rows.iter().map(|r| sparse(r)).collect(), b)
        .expect("well-formed");
    let variable_orbits = (0..3).map(|o| (0..4).map(|r| var(o, r)).collect()).chain([vec![12]]).collect();
    PlantedLp { program, variable_orbits, constraint_orbits }
}
