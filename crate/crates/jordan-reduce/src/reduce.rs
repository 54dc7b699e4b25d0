//! Reduced programs over an admissible subspace, and transport of solutions.
//!
//! Two forms are produced. The isomorphic form rewrites the program over the
//! product of the ideal cones through `Φ`; the restriction form keeps the
//! original cone and replaces every data matrix by its projection onto `S`.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::combinat;
use crate::error::{Error, Result};
use crate::jordan::{self, BlockMap, IdealDecomposition, IsoClass, RankTuple};
use crate::program::{ConicProgram, SparseSym};
use crate::rng;
use crate::subspace::{self, AffineData};
use crate::symspace::{BlockStructure, SubspaceBasis, SymBlockMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Isomorphic,
    Restriction,
}

impl Form {
    pub fn name(self) -> &'static str {
        match self {
            Form::Isomorphic => "isomorphic",
            Form::Restriction => "restriction",
        }
    }
}

/// Form requested by the caller; `Auto` picks isomorphic when every ideal is
/// real symmetric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FormChoice {
    Isomorphic,
    Restriction,
    #[default]
    Auto,
}

impl std::str::FromStr for FormChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "isomorphic" => Ok(Self::Isomorphic),
            "restriction" => Ok(Self::Restriction),
            "auto" => Ok(Self::Auto),
            _ => Err(Error::Domain(format!("unknown form {s:?}"))),
        }
    }
}

/// Which admissible subspace to reduce to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Default)]
pub enum Method {
    #[default]
    Optimal,
    Partition,
    Coordinate,
    ZeroOne,
    Data,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Optimal, Method::Partition, Method::Coordinate, Method::ZeroOne, Method::Data];

    pub fn name(self) -> &'static str {
        match self {
            Method::Optimal => "optimal",
            Method::Partition => "partition",
            Method::Coordinate => "coordinate",
            Method::ZeroOne => "zeroone",
            Method::Data => "data",
        }
    }

    /// Key of the subspace in reports.
    pub fn subspace_key(self) -> &'static str {
        match self {
            Method::Optimal => "S_opt",
            Method::Partition => "S_part",
            Method::Coordinate => "S_coord",
            Method::ZeroOne => "S_01",
            Method::Data => "S_data",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown method {s:?}")))
    }
}

/// A smaller program equivalent to the original one.
#[derive(Clone, Debug)]
pub struct ReducedProgram {
    pub program: ConicProgram,
    /// `Φ` for the isomorphic form; `None` means transport by inclusion.
    pub phi: Option<BlockMap>,
    pub subspace: SubspaceBasis,
    /// Indices of the original constraints that were kept.
    pub kept_constraints: Vec<usize>,
    pub form: Form,
}

/// Greedy pivoted Gram-Schmidt over `rows` in index order; returns the rows
/// whose residual exceeds `tol` times the largest row norm.
pub fn independent_rows(rows: &[DVector<f64>], tol: f64) -> Vec<usize> {
    let sparse: Vec<SparseRow> =
        rows.iter().map(|r| r.iter().enumerate().filter(|e| *e.1 != 0.0).map(|(c, &v)| (c, v)).collect()).collect();
    independent_sparse_rows(&sparse, tol)
}

/// Sparse svec row: `(coordinate, value)` pairs with distinct coordinates.
pub type SparseRow = Vec<(usize, f64)>;

/// [`independent_rows`] on sparse rows.
///
/// Rows with disjoint supports are orthogonal, so the sweep runs separately
/// on each support-connected group of rows, compressed to its coordinates.
pub fn independent_sparse_rows(rows: &[SparseRow], tol: f64) -> Vec<usize> {
    let norm = |r: &SparseRow| r.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
    let scale = rows.iter().map(norm).fold(0.0, f64::max);
    let mut parent: Vec<usize> = (0..rows.len()).collect();
    let mut owner: HashMap<usize, usize> = HashMap::new();
    for (i, row) in rows.iter().enumerate() {
        for &(c, _) in row {
            let o = *owner.entry(c).or_insert(i);
            let (x, y) = (subspace::find(&mut parent, o), subspace::find(&mut parent, i));
            parent[x.max(y)] = x.min(y);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..rows.len() {
        let root = subspace::find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    let mut kept = Vec::new();
    for members in groups.values() {
        let mut coords: Vec<usize> = members.iter().flat_map(|&i| rows[i].iter().map(|e| e.0)).collect();
        coords.sort_unstable();
        coords.dedup();
        let local: HashMap<usize, usize> = coords.iter().enumerate().map(|(l, &c)| (c, l)).collect();
        let mut q: Vec<DVector<f64>> = Vec::new();
        for &i in members {
            let mut r = DVector::zeros(coords.len());
            for &(c, v) in &rows[i] {
                r[local[&c]] = v;
            }
            for _ in 0..2 {
                for p in &q {
                    let a = p.dot(&r);
                    r.axpy(-a, p, 1.0);
                }
            }
            let n = r.norm();
            if n > tol * scale && n > 0.0 {
                q.push(r / n);
                kept.push(i);
            }
        }
    }
    kept.sort_unstable();
    kept
}

fn sparse(structure: &BlockStructure, v: &DVector<f64>, tol: f64) -> SparseSym {
    let scale = v.amax();
    SparseSym::from_svec(structure, v, tol * scale)
}

/// Same chop as [`sparse`] for a sparse svec row.
fn sparse_from_row(structure: &BlockStructure, row: &SparseRow, tol: f64) -> SparseSym {
    let chop = tol * row.iter().map(|e| e.1.abs()).fold(0.0, f64::max);
    SparseSym::from_entries(
        row.iter()
            .map(|&(c, v)| (c, v / structure.weight(c)))
            .filter(|e| e.1.abs() > chop)
            .collect(),
    )
}

/// `svec Φ*(A)` for each sparse `A`, through the transposed columns of `Φ`.
fn sparse_adjoints(phi: &BlockMap, program: &ConicProgram) -> (SparseRow, Vec<SparseRow>) {
    let st = &program.structure;
    let mut transposed: Vec<Vec<(usize, f64)>> = vec![Vec::new(); st.dim()];
    for (r, col) in phi.columns.iter().enumerate() {
        for &(c, a) in col {
            transposed[c].push((r, a));
        }
    }
    let adjoint = |a: &SparseSym| -> SparseRow {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (c, y) in a.svec_sparse(st) {
            for &(r, w) in &transposed[c] {
                *acc.entry(r).or_insert(0.0) += w * y;
            }
        }
        acc.into_iter().filter(|e| e.1 != 0.0).collect()
    };
    (adjoint(&program.cost), program.constraints.par_iter().map(adjoint).collect())
}

/// The program over the product cone `Φ(𝕊^{r_1} × … × 𝕊^{r_k})`.
///
/// Returns `None` when the decomposition carries no `Φ` (some ideal is not
/// real symmetric); callers then fall back to [`reformulate_restriction`].
pub fn reformulate_isomorphic(program: &ConicProgram, decomp: &IdealDecomposition, tol: f64) -> Option<ReducedProgram> {
    let phi = decomp.phi.as_ref()?;
    let (cost, rows) = sparse_adjoints(phi, program);
    let kept = independent_sparse_rows(&rows, tol);
    let reduced = ConicProgram {
        name: program.name.clone(),
        structure: phi.reduced.clone(),
        cost: sparse_from_row(&phi.reduced, &cost, tol),
        constraints: kept.iter().map(|&i| sparse_from_row(&phi.reduced, &rows[i], tol)).collect(),
        b: kept.iter().map(|&i| program.b[i]).collect(),
    };
    Some(ReducedProgram {
        program: reduced,
        phi: Some(phi.clone()),
        subspace: decomp.subspace.clone(),
        kept_constraints: kept,
        form: Form::Isomorphic,
    })
}

/// The program over the original cone with data replaced by `P_S` projections.
pub fn reformulate_restriction(program: &ConicProgram, s: &SubspaceBasis, tol: f64) -> ReducedProgram {
    let st = &program.structure;
    let coefs: Vec<DVector<f64>> = program.constraints.iter().map(|a| s.coefficients(&a.svec(st))).collect();
    let kept = independent_rows(&coefs, tol);
    let cost = s.project_svec(&program.cost.svec(st));
    let reduced = ConicProgram {
        name: program.name.clone(),
        structure: st.clone(),
        cost: sparse(st, &cost, tol),
        constraints: kept.iter().map(|&i| sparse(st, &s.combine(&coefs[i]), tol)).collect(),
        b: kept.iter().map(|&i| program.b[i]).collect(),
    };
    ReducedProgram {
        program: reduced,
        phi: None,
        subspace: s.clone(),
        kept_constraints: kept,
        form: Form::Restriction,
    }
}

fn check_reduced(red: &ReducedProgram, x: &SymBlockMatrix) -> Result<()> {
    if x.structure() != &red.program.structure {
        return Err(Error::StructureMismatch);
    }
    Ok(())
}

/// Primal transport `X̂ ↦ Φ(X̂)`; `P_S` for the restriction form.
pub fn lift_primal(red: &ReducedProgram, xhat: &SymBlockMatrix) -> Result<SymBlockMatrix> {
    check_reduced(red, xhat)?;
    Ok(match &red.phi {
        Some(phi) => phi.apply(xhat),
        None => red.subspace.project(xhat),
    })
}

/// Dual transport `Ŝ ↦ Φ((Φ*Φ)⁻¹ Ŝ)`; the identity for the restriction form.
pub fn lift_dual(red: &ReducedProgram, shat: &SymBlockMatrix) -> Result<SymBlockMatrix> {
    check_reduced(red, shat)?;
    Ok(match &red.phi {
        Some(phi) => SymBlockMatrix::from_svec(&phi.ambient, &phi.apply_svec(&phi.gram_inverse_svec(&shat.svec()))),
        None => shat.clone(),
    })
}

/// Multipliers `y` of the original program with `C − Σ y_i A_i = S` for a
/// lifted dual slack `S`.
pub fn dual_multipliers(aff: &AffineData, slack: &SymBlockMatrix) -> Vec<f64> {
    let r = aff.c.svec() - slack.svec();
    aff.lperp.multipliers(&r).iter().copied().collect()
}

/// Outcome of [`verify_reduction`]. Every residual is relative.
#[derive(Clone, Debug, Default, Serialize)]
pub struct VerificationReport {
    pub admissible: bool,
    pub homomorphism_residual: Option<f64>,
    pub isometry_residual: Option<f64>,
    pub samples: usize,
    /// Feasible original and reduced points actually drawn.
    pub project_points: usize,
    pub lift_points: usize,
    /// Original points mapped by `P_S`: affine residual, objective gap and
    /// cone violations.
    pub project_primal_residual: f64,
    pub project_objective_gap: f64,
    pub project_dual_residual: f64,
    pub project_dual_objective_gap: f64,
    pub project_cone_violations: usize,
    /// Reduced points mapped by the lifts.
    pub lift_primal_residual: f64,
    pub lift_objective_gap: f64,
    pub lift_dual_residual: f64,
    pub lift_dual_objective_gap: f64,
    pub lift_cone_violations: usize,
    pub passed: bool,
}

/// Tolerances used by [`verify_reduction`].
pub const PROJECT_TOL: f64 = 1e-8;
pub const LIFT_TOL: f64 = 1e-7;
/// Lifted objective values are compared at this relative tolerance.
pub const LIFT_OBJECTIVE_TOL: f64 = 1e-8;
pub const HOMOMORPHISM_TOL: f64 = 1e-7;
/// Admissibility is checked at this relative tolerance.
pub const ADMISSIBLE_TOL: f64 = 1e-8;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Points of the affine set `{⟨A_i, X⟩ = b_i}` inside the cone, drawn in a
/// ball around the first interior point of the ray `Y + t·P_L(unit)`.
/// Returns fewer than `count` points when no interior point is found.
fn affine_samples(aff: &AffineData, unit: &SymBlockMatrix, count: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<SymBlockMatrix> {
    let st = &aff.structure;
    let y = aff.y_lperp.svec();
    let u = aff.project_l_svec(&unit.svec());
    let ts: Vec<f64> = if u.norm() > 1e-8 * unit.norm() {
        let s = (y.norm() + 1.0) / u.norm();
        vec![1.0, s, 10.0 * s, 100.0 * s]
    } else {
        vec![0.0]
    };
    let center = ts.iter().find_map(|&t| {
        let x = SymBlockMatrix::from_svec(st, &(&y + &u * t));
        let lmin = x.min_eigenvalue();
        (lmin > 1e-9 * x.max_abs()).then_some((x, lmin))
    });
    let Some((x0, lmin)) = center else {
        return Vec::new();
    };
    let x0 = x0.svec();
    (0..count)
        .map(|_| {
            let g = DVector::from_fn(st.dim(), |_, _| StandardNormal.sample(rng));
            let raw = g.norm();
            let g = aff.project_l_svec(&g);
            let r: f64 = rng.random_range(0.0..0.9) * lmin;
            let gn = g.norm();
            // L = {0} up to rounding
            let x = if gn > 1e-10 * raw { &x0 + g * (r / gn) } else { x0.clone() };
            SymBlockMatrix::from_svec(st, &x)
        })
        .collect()
}

/// Dual slacks `C − Σ y_i A_i` for random `y`, shifted towards the interior
/// along `L⊥`.
fn dual_samples(aff: &AffineData, count: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<SymBlockMatrix> {
    let st = &aff.structure;
    (0..count)
        .map(|_| {
            let g = DVector::from_fn(st.dim(), |_, _| StandardNormal.sample(rng));
            let d = aff.project_lperp_svec(&g);
            let c = aff.c.svec();
            let s = &c + d * (c.norm().max(1.0) / g.norm());
            SymBlockMatrix::from_svec(st, &s)
        })
        .collect()
}

/// Residual of `s` in the dual affine set `C + L⊥`.
fn dual_residual(aff: &AffineData, s: &SymBlockMatrix) -> f64 {
    let d = s.svec() - aff.c.svec();
    aff.project_l_svec(&d).norm() / s.norm().max(aff.c.norm()).max(1.0)
}

/// Dual objective `b·y` of a slack in `C + L⊥`, computed as `⟨Y, C − S⟩`.
fn dual_value(aff: &AffineData, s: &SymBlockMatrix) -> f64 {
    aff.y_lperp.inner(&(&aff.c - s))
}

fn is_psd(x: &SymBlockMatrix, tol: f64) -> bool {
    x.min_eigenvalue() >= -tol * x.max_abs().max(1.0)
}

/// End-to-end audit of a reduction on `samples` random points in each
/// direction.
pub fn verify_reduction(program: &ConicProgram, red: &ReducedProgram, samples: usize, seed: u64) -> Result<VerificationReport> {
    let aff = subspace::build_affine_data(program, 1e-9)?;
    let s = &red.subspace;
    let mut rep = VerificationReport {
        admissible: subspace::check_admissible(s, &aff, ADMISSIBLE_TOL).all(),
        samples,
        ..Default::default()
    };
    if let Some(phi) = &red.phi {
        rep.homomorphism_residual = Some(phi.homomorphism_residual(samples.max(8), seed));
        rep.isometry_residual = Some(isometry_residual(phi));
    }
    let mut rng = rng::stream(seed, 0x7e);

    // original → P_S
    let unit = SymBlockMatrix::identity(&aff.structure);
    for x in affine_samples(&aff, &unit, samples, &mut rng) {
        rep.project_points += 1;
        let px = s.project(&x);
        rep.project_primal_residual = rep.project_primal_residual.max(program.primal_residual(&px));
        rep.project_objective_gap = rep.project_objective_gap.max(rel(program.objective(&x), program.objective(&px)));
        if !is_psd(&px, 1e-9) {
            rep.project_cone_violations += 1;
        }
    }
    for d in dual_samples(&aff, samples, &mut rng) {
        let pd = s.project(&d);
        rep.project_dual_residual = rep.project_dual_residual.max(dual_residual(&aff, &pd));
        rep.project_dual_objective_gap = rep.project_dual_objective_gap.max(rel(dual_value(&aff, &d), dual_value(&aff, &pd)));
        if is_psd(&d, 0.0) && !is_psd(&pd, 1e-9) {
            rep.project_cone_violations += 1;
        }
    }

    // reduced → lifts
    let raff = subspace::build_affine_data(&red.program, 1e-9)?;
    let runit = match &red.phi {
        Some(_) => SymBlockMatrix::identity(&red.program.structure),
        None => subspace::unit_element(s, seed, 1e-9),
    };
    for xh in affine_samples(&raff, &runit, samples, &mut rng) {
        rep.lift_points += 1;
        let x = lift_primal(red, &xh)?;
        rep.lift_primal_residual = rep.lift_primal_residual.max(program.primal_residual(&x));
        rep.lift_objective_gap = rep.lift_objective_gap.max(rel(red.program.objective(&xh), program.objective(&x)));
        if !is_psd(&x, 1e-9) {
            rep.lift_cone_violations += 1;
        }
    }
    for sh in dual_samples(&raff, samples, &mut rng) {
        let sh = match &red.phi {
            Some(_) => sh,
            None => s.project(&sh),
        };
        let lifted = lift_dual(red, &sh)?;
        rep.lift_dual_residual = rep.lift_dual_residual.max(dual_residual(&aff, &lifted));
        rep.lift_dual_objective_gap = rep.lift_dual_objective_gap.max(rel(dual_value(&raff, &sh), dual_value(&aff, &lifted)));
        if is_psd(&sh, 0.0) && !is_psd(&lifted, 1e-9) {
            rep.lift_cone_violations += 1;
        }
    }

    rep.passed = rep.admissible
        && rep.homomorphism_residual.is_none_or(|r| r <= HOMOMORPHISM_TOL)
        && rep.isometry_residual.is_none_or(|r| r <= HOMOMORPHISM_TOL)
        && rep.project_primal_residual <= PROJECT_TOL
        && rep.project_objective_gap <= PROJECT_TOL
        && rep.project_dual_residual <= PROJECT_TOL
        && rep.project_dual_objective_gap <= PROJECT_TOL
        && rep.project_cone_violations == 0
        && rep.lift_primal_residual <= LIFT_TOL
        && rep.lift_objective_gap <= LIFT_OBJECTIVE_TOL
        && rep.lift_dual_residual <= LIFT_TOL
        && rep.lift_dual_objective_gap <= LIFT_OBJECTIVE_TOL
        && rep.lift_cone_violations == 0;
    Ok(rep)
}

/// `max |⟨Φe_a, Φe_b⟩ − m_a δ_ab| / m_a` over all pairs of reduced svec units
/// sharing a coordinate.
pub fn isometry_residual(phi: &BlockMap) -> f64 {
    let mut by_coord: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for (a, col) in phi.columns.iter().enumerate() {
        for &(c, v) in col {
            by_coord.entry(c).or_default().push((a, v));
        }
    }
    let mut gram: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for list in by_coord.values() {
        for &(a, va) in list {
            for &(b, vb) in list {
                *gram.entry((a, b)).or_default() += va * vb;
            }
        }
    }
    let mut worst = 0.0f64;
    for a in 0..phi.columns.len() {
        let (k, _, _) = phi.reduced.entry(a);
        let m = phi.multiplicity[k];
        worst = worst.max((gram.get(&(a, a)).copied().unwrap_or(0.0) - m).abs() / m);
    }
    for (&(a, b), &g) in &gram {
        if a != b {
            let (k, _, _) = phi.reduced.entry(a);
            worst = worst.max(g.abs() / phi.multiplicity[k]);
        }
    }
    worst
}

/// Options for [`reduce_program`].
#[derive(Clone, Copy, Debug)]
pub struct ReduceOptions {
    pub method: Method,
    pub form: FormChoice,
    pub seed: u64,
    pub tol: f64,
    /// Largest admissible dimension for [`Method::Data`].
    pub data_cap: Option<usize>,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        Self { method: Method::Optimal, form: FormChoice::Auto, seed: 0, tol: 1e-9, data_cap: None }
    }
}

/// Everything produced by one reduction.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub method: Method,
    pub subspace: SubspaceBasis,
    pub decomposition: Option<IdealDecomposition>,
    pub reduced: ReducedProgram,
    /// `(phase, seconds)` in execution order.
    pub timings: Vec<(&'static str, f64)>,
}

impl Reduction {
    pub fn rank_tuple(&self) -> Option<RankTuple> {
        self.decomposition.as_ref().map(|d| d.rank_tuple())
    }

    pub fn iso_classes(&self) -> Vec<IsoClass> {
        self.decomposition
            .as_ref()
            .map(|d| d.ideals.iter().map(|i| i.iso_class).collect())
            .unwrap_or_default()
    }
}

/// Admissible subspace of `method` for the program, with a coordinate
/// relation when the basis is one.
pub fn method_subspace(
    program: &ConicProgram,
    aff: &AffineData,
    opts: &ReduceOptions,
) -> Result<(SubspaceBasis, Option<combinat::SymRelation>)> {
    Ok(match opts.method {
        Method::Optimal => (subspace::optimal_admissible_subspace(aff, opts.tol), None),
        Method::Partition => (combinat::optimal_partition_subspace(aff, opts.seed).1, None),
        Method::Coordinate => {
            let (r, b) = combinat::optimal_coordinate_subspace(aff, opts.seed);
            (b, Some(r))
        }
        Method::ZeroOne => (combinat::optimal_zeroone_subspace(aff, opts.seed).1, None),
        Method::Data => (subspace::star_algebra_subspace(program, opts.tol, opts.data_cap)?, None),
    })
}

/// Ideal decomposition of `s` with its isomorphism `Φ` when one exists.
///
/// Coordinate subspaces (and the whole space) use the principal-block
/// embedding; everything else goes through [`jordan::decompose_ideals`].
pub fn decompose_subspace(
    s: &SubspaceBasis,
    relation: Option<&combinat::SymRelation>,
    seed: u64,
    tol: f64,
) -> Result<IdealDecomposition> {
    let st = s.structure();
    let full;
    let relation = match relation {
        None if s.dim() == st.dim() => {
            full = combinat::SymRelation::full(st);
            Some(&full)
        }
        r => r,
    };
    let mut d = match relation {
        Some(r) => jordan::decompose_coordinate(r, s, tol),
        None => jordan::decompose_ideals(s, seed, tol)?,
    };
    if d.phi.is_none() {
        d.phi = jordan::construct_isomorphism(&d, seed, tol)?;
    }
    Ok(d)
}

/// Finds the subspace of `opts.method`, decomposes it when the isomorphic
/// form is possible, and builds the reduced program.
pub fn reduce_program(program: &ConicProgram, opts: &ReduceOptions) -> Result<Reduction> {
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &'static str, timings: &mut Vec<(&'static str, f64)>| {
        timings.push((name, clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };
    let aff = subspace::build_affine_data(program, opts.tol)?;
    lap("affine", &mut timings);
    let (s, relation) = method_subspace(program, &aff, opts)?;
    lap("subspace", &mut timings);

    let decomposition = if opts.form == FormChoice::Restriction || s.dim() == 0 {
        None
    } else {
        match decompose_subspace(&s, relation.as_ref(), opts.seed, opts.tol) {
            Ok(d) => Some(d),
            Err(e) if opts.form == FormChoice::Auto => {
                log::warn!("decomposition failed ({e}); using the restriction form");
                None
            }
            Err(e) => return Err(e),
        }
    };
    lap("decompose", &mut timings);

    let iso = decomposition.as_ref().and_then(|d| reformulate_isomorphic(program, d, opts.tol));
    if iso.is_none() && opts.form == FormChoice::Isomorphic {
        log::warn!("some ideal is not real symmetric; using the restriction form");
    }
    let reduced = iso.unwrap_or_else(|| reformulate_restriction(program, &s, opts.tol));
    lap("reformulate", &mut timings);
    Ok(Reduction { method: opts.method, subspace: s, decomposition, reduced, timings })
}
