//! SDPA sparse files, free-variable elimination, generator specs and JSON
//! reduction reports.
//!
//! An SDPA file describes `max ⟨F_0, Y⟩ s.t. ⟨F_i, Y⟩ = c_i, Y ⪰ 0`; it maps to
//! a [`ConicProgram`] with `C = −F_0`, `A_i = F_i` and `b = c`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instances::{self, HammingGraphSpec};
use crate::jordan::RankTuple;
use crate::program::{ConicProgram, SparseSym};
use crate::reduce::{Reduction, VerificationReport};
use crate::symspace::BlockStructure;

/// One SDPA entry: `(matno, block, i, j, value)`, all indices 1-based except
/// `matno` (0 is the objective).
pub type SdpaEntry = (usize, usize, usize, usize, f64);

#[derive(Clone, Debug, PartialEq)]
pub struct SdpaFile {
    /// First comment line, if any, without its marker.
    pub title: Option<String>,
    pub m: usize,
    /// Negative sizes are diagonal (LP) blocks.
    pub block_sizes: Vec<i64>,
    pub b: Vec<f64>,
    /// Sorted ascending, duplicates summed, zeros dropped, `i ≤ j`.
    pub entries: Vec<SdpaEntry>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Sorts, sums duplicates and drops zeros.
fn normalize_entries(mut entries: Vec<SdpaEntry>) -> Vec<SdpaEntry> {
    entries.sort_by_key(|e| (e.0, e.1, e.2, e.3));
    let mut out: Vec<SdpaEntry> = Vec::with_capacity(entries.len());
    for e in entries {
        match out.last_mut() {
            Some(l) if (l.0, l.1, l.2, l.3) == (e.0, e.1, e.2, e.3) => l.4 += e.4,
            _ => out.push(e),
        }
    }
    out.retain(|e| e.4 != 0.0);
    out
}

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c.is_whitespace() || "{}(),".contains(c)).filter(|t| !t.is_empty())
}

/// Parses the SDPA sparse format.
///
/// Lines starting with `*` or `"` before the data are comments. The `m` and
/// block-count lines ignore anything after their first number. Entries with
/// `i > j` are swapped into the upper triangle.
pub fn parse_sdpa(text: &str) -> Result<SdpaFile> {
    let mut title = None;
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l)).peekable();
    while let Some(&(_, l)) = lines.peek() {
        let t = l.trim_start();
        if t.starts_with('*') || t.starts_with('"') {
            if title.is_none() {
                let body = t.trim_start_matches(['*', '"']).trim();
                if !body.is_empty() {
                    title = Some(body.to_string());
                }
            }
            lines.next();
        } else if t.is_empty() {
            lines.next();
        } else {
            break;
        }
    }
    let mut first_number = |what: &str| -> Result<(usize, i64)> {
        let (n, l) = lines.next().ok_or_else(|| parse_err(0, format!("missing {what}")))?;
        let tok = tokens(l).next().ok_or_else(|| parse_err(n, format!("missing {what}")))?;
        let v = tok.parse::<i64>().map_err(|_| parse_err(n, format!("bad {what} {tok:?}")))?;
        Ok((n, v))
    };
    let (ln, m) = first_number("constraint count")?;
    if m < 0 {
        return Err(parse_err(ln, "negative constraint count"));
    }
    let m = m as usize;
    let (ln, nblocks) = first_number("block count")?;
    if nblocks <= 0 {
        return Err(parse_err(ln, "block count must be positive"));
    }
    let nblocks = nblocks as usize;

    // block sizes and b may span several lines
    let mut block_sizes: Vec<i64> = Vec::with_capacity(nblocks);
    let mut b: Vec<f64> = Vec::with_capacity(m);
    let mut last_line = ln;
    while block_sizes.len() < nblocks || b.len() < m {
        let (n, l) = lines.next().ok_or_else(|| parse_err(last_line, "unexpected end of header"))?;
        last_line = n;
        for tok in tokens(l) {
            if block_sizes.len() < nblocks {
                let v = tok.parse::<i64>().map_err(|_| parse_err(n, format!("bad block size {tok:?}")))?;
                if v == 0 {
                    return Err(parse_err(n, "block size 0"));
                }
                block_sizes.push(v);
            } else if b.len() < m {
                b.push(tok.parse::<f64>().map_err(|_| parse_err(n, format!("bad number {tok:?}")))?);
            } else {
                return Err(parse_err(n, format!("unexpected token {tok:?}")));
            }
        }
    }

    let mut entries = Vec::new();
    for (n, l) in lines {
        let t = l.trim();
        if t.is_empty() || t.starts_with('*') || t.starts_with('"') {
            continue;
        }
        let toks: Vec<&str> = tokens(t).collect();
        if toks.len() != 5 {
            return Err(parse_err(n, format!("expected 5 fields, found {}", toks.len())));
        }
        let int = |k: usize| -> Result<usize> {
            toks[k].parse::<usize>().map_err(|_| parse_err(n, format!("bad index {:?}", toks[k])))
        };
        let (mat, blk, mut i, mut j) = (int(0)?, int(1)?, int(2)?, int(3)?);
        let v = toks[4].parse::<f64>().map_err(|_| parse_err(n, format!("bad value {:?}", toks[4])))?;
        if mat > m {
            return Err(parse_err(n, format!("matrix number {mat} exceeds m = {m}")));
        }
        if blk == 0 || blk > nblocks {
            return Err(parse_err(n, format!("block {blk} out of range")));
        }
        let size = block_sizes[blk - 1];
        let order = size.unsigned_abs() as usize;
        if i == 0 || j == 0 || i > order || j > order {
            return Err(parse_err(n, format!("index ({i},{j}) outside block {blk} of order {order}")));
        }
        if i > j {
            std::mem::swap(&mut i, &mut j);
        }
        if size < 0 && i != j {
            return Err(parse_err(n, format!("off-diagonal entry in diagonal block {blk}")));
        }
        entries.push((mat, blk, i, j, v));
    }
    Ok(SdpaFile { title, m, block_sizes, b, entries: normalize_entries(entries) })
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

/// Writes the SDPA sparse format; entries are written as stored.
pub fn write_sdpa(f: &SdpaFile) -> String {
    let mut s = String::new();
    if let Some(t) = &f.title {
        let _ = writeln!(s, "* {t}");
    }
    let _ = writeln!(s, "{}", f.m);
    let _ = writeln!(s, "{}", f.block_sizes.len());
    let sizes: Vec<String> = f.block_sizes.iter().map(|v| v.to_string()).collect();
    let _ = writeln!(s, "{}", sizes.join(" "));
    let bs: Vec<String> = f.b.iter().map(|&v| format_float(v)).collect();
    let _ = writeln!(s, "{}", bs.join(" "));
    for &(mat, blk, i, j, v) in &f.entries {
        let _ = writeln!(s, "{mat} {blk} {i} {j} {}", format_float(v));
    }
    s
}

/// Where each SDPA block lands in the expanded structure.
fn block_offsets(sizes: &[i64]) -> (Vec<usize>, Vec<usize>) {
    let mut orders = Vec::new();
    let mut first = Vec::with_capacity(sizes.len());
    for &s in sizes {
        first.push(orders.len());
        if s > 0 {
            orders.push(s as usize);
        } else {
            orders.extend(std::iter::repeat_n(1, s.unsigned_abs() as usize));
        }
    }
    (first, orders)
}

impl SdpaFile {
    /// Equality-form program; a diagonal block of size `k` becomes `k` blocks
    /// of order one.
    pub fn to_program(&self, name: &str) -> Result<ConicProgram> {
        let (first, orders) = block_offsets(&self.block_sizes);
        let st = BlockStructure::new(orders)?;
        let mut mats: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.m + 1];
        for &(mat, blk, i, j, v) in &self.entries {
            let size = self.block_sizes[blk - 1];
            let coord = if size > 0 {
                st.coord(first[blk - 1], i - 1, j - 1)
            } else {
                st.coord(first[blk - 1] + i - 1, 0, 0)
            };
            mats[mat].push((coord, if mat == 0 { -v } else { v }));
        }
        let mut it = mats.into_iter().map(SparseSym::from_entries);
        let cost = it.next().expect("objective");
        ConicProgram::new(self.title.clone().unwrap_or_else(|| name.to_string()), st, cost, it.collect(), self.b.clone())
    }

    /// Inverse of [`SdpaFile::to_program`]; consecutive order-one blocks merge
    /// into one diagonal block.
    pub fn from_program(p: &ConicProgram) -> Self {
        let orders = p.structure.orders();
        let mut block_sizes: Vec<i64> = Vec::new();
        // (sdpa block, row offset) for each structure block
        let mut place = Vec::with_capacity(orders.len());
        for &n in orders {
            let nb = block_sizes.len();
            match block_sizes.last_mut() {
                Some(last) if n == 1 && *last < 0 => {
                    place.push((nb, (-*last) as usize));
                    *last -= 1;
                }
                _ => {
                    block_sizes.push(if n == 1 { -1 } else { n as i64 });
                    place.push((block_sizes.len(), 0));
                }
            }
        }
        let mut entries = Vec::new();
        let mats = std::iter::once(&p.cost).chain(&p.constraints);
        for (mat, a) in mats.enumerate() {
            for &(c, v) in a.entries() {
                let (k, i, j) = p.structure.entry(c);
                let (blk, off) = place[k];
                let v = if mat == 0 { -v } else { v };
                entries.push((mat, blk, off + i + 1, off + j + 1, v));
            }
        }
        SdpaFile {
            title: Some(p.name.clone()),
            m: p.m(),
            block_sizes,
            b: p.b.clone(),
            entries: normalize_entries(entries),
        }
    }
}

/// `min ⟨C, X⟩ + fᵀu  s.t.  ⟨A_i, X⟩ + (G u)_i = b_i`, `X ⪰ 0`, `u` free.
#[derive(Clone, Debug)]
pub struct FreeVariableProgram {
    pub program: ConicProgram,
    pub free_cost: DVector<f64>,
    /// `m × p` coefficients of the free variables.
    pub free_columns: DMatrix<f64>,
}

/// Recovers the free variables of a solution of the eliminated program.
#[derive(Clone, Debug)]
pub struct FreeTransport {
    /// `G⁺`, `p × m`.
    pub pinv: DMatrix<f64>,
    /// Objective offset `wᵀb` dropped from the eliminated program.
    pub offset: f64,
}

impl FreeTransport {
    /// `u = G⁺ (b − A(X))`.
    pub fn free_values(&self, original: &ConicProgram, x: &crate::SymBlockMatrix) -> DVector<f64> {
        let v = x.svec();
        let r = DVector::from_iterator(
            original.m(),
            original.constraints.iter().zip(&original.b).map(|(a, &b)| b - a.dot_svec(&original.structure, &v)),
        );
        &self.pinv * r
    }
}

/// Reduced row echelon form of `m` with pivot threshold `tol`; zero rows dropped.
fn rref(mut m: DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (p, best) = (r..rows).map(|i| (i, m[(i, c)].abs())).fold((r, -1.0), |a, x| if x.1 > a.1 { x } else { a });
        if best <= tol {
            continue;
        }
        m.swap_rows(r, p);
        let piv = m[(r, c)];
        for k in 0..cols {
            m[(r, k)] /= piv;
        }
        for i in 0..rows {
            if i != r {
                let f = m[(i, c)];
                if f != 0.0 {
                    for k in 0..cols {
                        m[(i, k)] -= f * m[(r, k)];
                    }
                }
            }
        }
        r += 1;
    }
    m.rows(0, r).into_owned()
}

/// Eliminates free variables through an orthogonal factorization of `G`.
///
/// The kept constraints are a canonical (row echelon) basis of the left null
/// space of `G` applied to `(A, b)`; the cost absorbs `fᵀu` through
/// `C − Σ w_i A_i` with `w = (G⁺)ᵀ f`.
pub fn eliminate_free_variables(fp: &FreeVariableProgram, tol: f64) -> Result<(ConicProgram, FreeTransport)> {
    let p = &fp.program;
    let g = &fp.free_columns;
    let m = p.m();
    if g.nrows() != m || fp.free_cost.len() != g.ncols() {
        return Err(Error::StructureMismatch);
    }
    if g.ncols() == 0 {
        return Ok((p.clone(), FreeTransport { pinv: DMatrix::zeros(0, m), offset: 0.0 }));
    }
    let svd = g.clone().svd(true, true);
    let u = svd.u.clone().expect("requested");
    let u = &u;
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > tol * smax).count();
    let pinv = svd.pseudo_inverse(tol * smax).map_err(|e| Error::Numerical(e.to_string()))?;

    // cost of the free part must lie in the row space of G
    let f = &fp.free_cost;
    let w = pinv.transpose() * f;
    if (g.transpose() * &w - f).norm() > 1e-8 * f.norm().max(1.0) {
        return Err(Error::Domain("free-variable cost is outside the row space of G: unbounded".into()));
    }

    // left null space of G
    let proj = DMatrix::identity(m, m) - u.columns(0, rank) * u.columns(0, rank).transpose();
    let eig = proj.symmetric_eigen();
    let keep: Vec<usize> = (0..m).filter(|&k| eig.eigenvalues[k] > 0.5).collect();
    let perp = DMatrix::from_fn(keep.len(), m, |r, i| eig.eigenvectors[(i, keep[r])]);
    let n = rref(perp, 1e-12);

    let st = &p.structure;
    let svecs: Vec<DVector<f64>> = p.constraints.iter().map(|a| a.svec(st)).collect();
    let bvec = DVector::from_column_slice(&p.b);
    let mut constraints = Vec::with_capacity(n.nrows());
    let mut b = Vec::with_capacity(n.nrows());
    for r in 0..n.nrows() {
        let mut row = DVector::zeros(st.dim());
        for i in 0..m {
            let c = n[(r, i)];
            if c.abs() > 1e-14 {
                row.axpy(c, &svecs[i], 1.0);
            }
        }
        let rhs = n.row(r).transpose().dot(&bvec);
        if row.amax() <= tol * svecs.iter().map(|v| v.amax()).fold(0.0, f64::max) {
            if rhs.abs() > 1e-8 * bvec.amax().max(1.0) {
                return Err(Error::InfeasibleAffine { residual: rhs.abs() });
            }
            continue;
        }
        constraints.push(SparseSym::from_svec(st, &row, 1e-14 * row.amax()));
        b.push(rhs);
    }
    let mut cost = p.cost.svec(st);
    for i in 0..m {
        if w[i] != 0.0 {
            cost.axpy(-w[i], &svecs[i], 1.0);
        }
    }
    let cost = SparseSym::from_svec(st, &cost, 1e-14 * cost.amax());
    let out = ConicProgram::new(p.name.clone(), st.clone(), cost, constraints, b)?;
    Ok((out, FreeTransport { pinv, offset: w.dot(&bvec) }))
}

/// Builds an instance from a generator spec: `hamming:q:d1[,d2…]` or
/// `cprank:{Z|ZxZ|ZxZxZ}`.
pub fn generate(spec: &str) -> Result<ConicProgram> {
    let bad = || Error::Domain(format!("bad generator spec {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["hamming", q, ds] => {
            let q = q.parse().map_err(|_| bad())?;
            let ds = ds.split(',').map(|d| d.parse().map_err(|_| bad())).collect::<Result<Vec<u32>>>()?;
            Ok(instances::theta_sdp(&HammingGraphSpec::new(q, ds)?))
        }
        ["cprank", w] => {
            let z = instances::cprank_z();
            let mut m = z.clone();
            let factors = w.split('x').collect::<Vec<_>>();
            if factors.iter().any(|f| *f != "Z") || factors.len() > 3 {
                return Err(bad());
            }
            for _ in 1..factors.len() {
                m = m.kronecker(&z);
            }
            let mut p = instances::cprank_sdp(&m)?;
            p.name = format!("cprank_{w}");
            Ok(p)
        }
        _ => Err(bad()),
    }
}

/// Original data summary for reports.
#[derive(Clone, Debug, Serialize)]
pub struct ProgramSummary {
    pub m: usize,
    /// Nonzeros of the constraint matrices in full storage.
    pub nnz: usize,
    /// Block orders, descending.
    pub ranks: RankTuple,
}

impl ProgramSummary {
    pub fn of(p: &ConicProgram) -> Self {
        Self { m: p.m(), nnz: p.nnz(), ranks: RankTuple::new(p.structure.orders().to_vec()) }
    }
}

/// Machine-readable outcome of one run; serialized with sorted keys.
#[derive(Clone, Debug, Serialize)]
pub struct ReductionReport {
    pub schema: u32,
    pub instance: String,
    pub method: String,
    pub form: String,
    pub seed: u64,
    pub tol: f64,
    /// Subspace dimensions by name (`S_opt`, `S_part`, …).
    pub dims: BTreeMap<String, usize>,
    /// Ideal ranks by subspace name.
    pub rank_tuples: BTreeMap<String, Vec<usize>>,
    pub iso_classes: Vec<String>,
    pub original: ProgramSummary,
    pub reduced: ProgramSummary,
    pub nnz_before: usize,
    pub nnz_after: usize,
    pub kept_constraints: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationReport>,
    /// Per-phase seconds; only present when requested since it breaks
    /// byte-determinism.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl ReductionReport {
    pub fn new(original: &ConicProgram, red: &Reduction, seed: u64, tol: f64) -> Self {
        let key = red.method.subspace_key().to_string();
        let mut dims = BTreeMap::new();
        dims.insert(key.clone(), red.subspace.dim());
        let mut rank_tuples = BTreeMap::new();
        if let Some(rt) = red.rank_tuple() {
            rank_tuples.insert(key, rt.ranks().to_vec());
        }
        let orig = ProgramSummary::of(original);
        let reduced = ProgramSummary::of(&red.reduced.program);
        Self {
            schema: 1,
            instance: original.name.clone(),
            method: red.method.name().into(),
            form: red.reduced.form.name().into(),
            seed,
            tol,
            dims,
            rank_tuples,
            iso_classes: red.iso_classes().iter().map(|c| c.name().to_string()).collect(),
            nnz_before: orig.nnz,
            nnz_after: reduced.nnz,
            kept_constraints: red.reduced.kept_constraints.len(),
            original: orig,
            reduced,
            verification: None,
            timings: None,
        }
    }

    /// Pretty JSON with keys in sorted order and a trailing newline.
    pub fn to_json(&self) -> String {
        let v = serde_json::to_value(self).expect("serializable");
        let mut s = serde_json::to_string_pretty(&v).expect("serializable");
        s.push('\n');
        s
    }
}
