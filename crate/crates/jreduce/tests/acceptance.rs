//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{bundled, file_instances, jreduce, random_sparse_program, write_program, GENERATED};
use jordan_reduce::combinat::{entry_partition, PartitionNxN};
use jordan_reduce::instances::{self, PlantedGroup};
use jordan_reduce::io;
use jordan_reduce::jordan::{self, weakly_majorizes, RankTuple};
use jordan_reduce::reduce::{self, Form, FormChoice, Method, ReduceOptions};
use jordan_reduce::subspace;
use jordan_reduce::{ConicProgram, SubspaceBasis, SymBlockMatrix};
use nalgebra::{dmatrix, DMatrix};
use rand::Rng;

const HAMMING_BUDGET: Duration = Duration::from_secs(60);
const CPRANK_BUDGET: Duration = Duration::from_secs(600);
const ADMISSIBLE_TOL: f64 = 1e-8;
const CONTAINMENT_TOL: f64 = 1e-8;
const PROJECT_TOL: f64 = 1e-8;
const LIFT_TOL: f64 = 1e-7;
const HOMOMORPHISM_TOL: f64 = 1e-7;
const CONE_TOL: f64 = 1e-8;
const EQUIVALENCE_SAMPLES: usize = 50;
const CONE_POINTS: usize = 200;
const MIN_RANDOM_INSTANCES: usize = 20;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn dims_of(r: &serde_json::Value, key: &str) -> Option<u64> {
    r["dims"][key].as_u64()
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().expect("tempdir")
}

fn hamming_collapse() -> Check {
    let dir = tmp();
    let mut detail = Vec::new();
    for (spec, name) in [("hamming:7:5,6", "hamming_7_5_6"), ("hamming:8:3,4", "hamming_8_3_4")] {
        let t = Instant::now();
        let run = jreduce(dir.path(), name, &["--generate", spec, "--method", "optimal"]);
        let el = t.elapsed();
        ensure(run.code == 0, format!("{name}: exit {} {}", run.code, run.stderr))?;
        let d = dims_of(&run.report, "S_opt");
        ensure(d == Some(5), format!("{name}: dim S_opt = {d:?}"))?;
        let ranks = run.report["rank_tuples"]["S_opt"].as_array().cloned().unwrap_or_default();
        ensure(ranks.len() == 5 && ranks.iter().all(|r| r == 1), format!("{name}: ranks {ranks:?}"))?;
        ensure(el <= HAMMING_BUDGET, format!("{name}: {el:?} > {HAMMING_BUDGET:?}"))?;
        detail.push(format!("{name} dim 5 ranks (1×5) in {:.2}s", el.as_secs_f64()));
    }
    Ok(detail.join("; "))
}

fn worked_example() -> Check {
    let u = dmatrix![0.,0.,1.,0.; 0.,0.,0.,1.; 1.,0.,0.,0.; 0.,1.,0.,0.];
    let v = dmatrix![0.,0.,0.,0.; 0.,0.,0.,0.; 0.,0.,0.,1.; 0.,0.,1.,0.];
    let w = dmatrix![1.,0.,0.,0.; 0.,1.,0.,0.; 0.,0.,0.,0.; 0.,0.,0.,0.];
    let x = SymBlockMatrix::from_matrix(u * 2.0 + v * 3.0 + w * 4.0).square();
    let printed = dmatrix![20.,0.,8.,6.; 0.,20.,6.,8.; 8.,6.,13.,0.; 6.,8.,0.,13.];
    ensure(x.block(0) == &printed, format!("evaluation {}", x.block(0)))?;
    let p: PartitionNxN = entry_partition(&x, 0.0);
    let mut got: Vec<DMatrix<f64>> = p.characteristic_matrices().iter().map(|m| m.block(0).clone()).collect();
    let mut want = vec![
        dmatrix![1.,0.,0.,0.; 0.,1.,0.,0.; 0.,0.,0.,0.; 0.,0.,0.,0.],
        dmatrix![0.,1.,0.,0.; 1.,0.,0.,0.; 0.,0.,0.,1.; 0.,0.,1.,0.],
        dmatrix![0.,0.,1.,0.; 0.,0.,0.,1.; 1.,0.,0.,0.; 0.,1.,0.,0.],
        dmatrix![0.,0.,0.,1.; 0.,0.,1.,0.; 0.,1.,0.,0.; 1.,0.,0.,0.],
        dmatrix![0.,0.,0.,0.; 0.,0.,0.,0.; 0.,0.,1.,0.; 0.,0.,0.,1.],
    ];
    let key = |m: &DMatrix<f64>| m.iter().map(|v| *v as u8).collect::<Vec<_>>();
    got.sort_by_key(key);
    want.sort_by_key(key);
    ensure(got == want, format!("{} classes, not the printed five", got.len()))?;
    Ok("(2U+3V+4W)² matches exactly; 5 characteristic matrices match".into())
}

fn orders(p: &ConicProgram) -> String {
    RankTuple::new(p.structure.orders().to_vec()).to_string()
}

fn cprank_table() -> Check {
    let z = io::generate("cprank:Z").map_err(|e| e.to_string())?;
    ensure(orders(&z) == "(10,9,1×9)", format!("Z ranks {}", orders(&z)))?;
    ensure(z.m() == 37, format!("Z m = {}", z.m()))?;
    ensure(z.nnz() == 172, format!("Z nnz = {}", z.nnz()))?;

    let opts = |method, form| ReduceOptions { method, form, ..Default::default() };
    let r01 = reduce::reduce_program(&z, &opts(Method::ZeroOne, FormChoice::Restriction)).map_err(|e| e.to_string())?;
    let kept = r01.reduced.kept_constraints.len();
    ensure(kept == 14, format!("S_01 restriction keeps {kept}"))?;
    let ropt = reduce::reduce_program(&z, &opts(Method::Optimal, FormChoice::Isomorphic)).map_err(|e| e.to_string())?;
    let rt = ropt.rank_tuple().map(|r| r.to_string()).unwrap_or_default();
    ensure(rt == "(5,4,2,2,2,2,1×6)", format!("Z decomposition {rt}"))?;

    let t = Instant::now();
    let dir = tmp();
    let run = jreduce(dir.path(), "zz", &["--generate", "cprank:ZxZ", "--method", "optimal"]);
    let el = t.elapsed();
    ensure(run.code == 0, format!("Z⊗Z exit {} {}", run.code, run.stderr))?;
    let orig = RankTuple::new(
        run.report["original"]["ranks"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect(),
    );
    ensure(orig.to_string() == "(82,81,1×81)", format!("Z⊗Z ranks {orig}"))?;
    let m = run.report["original"]["m"].as_u64();
    ensure(m == Some(2026), format!("Z⊗Z m = {m:?}"))?;
    let kept = run.report["kept_constraints"].as_u64();
    ensure(kept == Some(167), format!("Z⊗Z kept {kept:?}"))?;
    ensure(el <= CPRANK_BUDGET, format!("Z⊗Z took {el:?}"))?;
    Ok(format!(
        "Z: (10,9,1×9), m 37, nnz 172, S_01 keeps 14, ranks {rt}; Z⊗Z: {orig}, m 2026, keeps 167 in {:.1}s",
        el.as_secs_f64()
    ))
}

/// Subspaces of the four combinatorial and optimal methods.
struct Lattice {
    spaces: BTreeMap<&'static str, (SubspaceBasis, Option<jordan_reduce::combinat::SymRelation>)>,
}

const METHODS: [Method; 4] = [Method::Optimal, Method::ZeroOne, Method::Partition, Method::Coordinate];
/// `(smaller, larger)` along the inclusion diagram.
const INCLUSIONS: [(&str, &str); 5] =
    [("S_opt", "S_01"), ("S_01", "S_part"), ("S_01", "S_coord"), ("S_opt", "S_part"), ("S_opt", "S_coord")];

fn lattice(p: &ConicProgram) -> Result<Lattice, String> {
    let aff = subspace::build_affine_data(p, 1e-9).map_err(|e| e.to_string())?;
    let mut spaces = BTreeMap::new();
    for m in METHODS {
        let o = ReduceOptions { method: m, ..Default::default() };
        spaces.insert(m.subspace_key(), reduce::method_subspace(p, &aff, &o).map_err(|e| e.to_string())?);
    }
    Ok(Lattice { spaces })
}

fn containment(small: &SubspaceBasis, big: &SubspaceBasis) -> f64 {
    small.vectors().iter().map(|v| big.residual_svec(v)).fold(0.0, f64::max)
}

fn majorization() -> Check {
    let mut strict = 0;
    let mut names = Vec::new();
    for p in bundled() {
        let lat = lattice(&p)?;
        let mut ranks: BTreeMap<&str, RankTuple> = BTreeMap::new();
        for (a, b) in INCLUSIONS {
            let (sa, sb) = (&lat.spaces[a].0, &lat.spaces[b].0);
            let c = containment(sa, sb);
            ensure(c <= CONTAINMENT_TOL, format!("{}: {a} ⊄ {b} ({c:e})", p.name))?;
            if sa.dim() == sb.dim() {
                continue;
            }
            strict += 1;
            for k in [a, b] {
                if !ranks.contains_key(k) {
                    let (s, r) = &lat.spaces[k];
                    let d = reduce::decompose_subspace(s, r.as_ref(), 0, 1e-9).map_err(|e| format!("{}: {k}: {e}", p.name))?;
                    ranks.insert(k, d.rank_tuple());
                }
            }
            ensure(
                weakly_majorizes(&ranks[b], &ranks[a]),
                format!("{}: {b} {} does not majorize {a} {}", p.name, ranks[b], ranks[a]),
            )?;
        }
        names.push(p.name.clone());
    }
    Ok(format!("{strict} strict inclusions over {} instances, 0 violations", names.len()))
}

fn random_instances() -> Vec<ConicProgram> {
    let groups = [PlantedGroup::Cyclic, PlantedGroup::Dihedral, PlantedGroup::Blockcopy, PlantedGroup::Trivial];
    let mut out = Vec::new();
    for k in 0..20u64 {
        let n = 2 + (k as usize / 4) % 5;
        out.push(instances::planted_symmetry_sdp(n, groups[k as usize % 4], k).unwrap());
    }
    let shapes: [&[usize]; 4] = [&[3, 2, 1], &[4, 2], &[2, 2, 2], &[6]];
    for k in 0..8u64 {
        out.push(random_sparse_program(k, shapes[k as usize % 4], 3 + k as usize % 6));
    }
    out
}

fn equivalence() -> Check {
    let progs = random_instances();
    ensure(progs.len() >= MIN_RANDOM_INSTANCES, "too few instances")?;
    let mut iso = 0;
    for (k, p) in progs.iter().enumerate() {
        ensure(p.structure.orders().iter().sum::<usize>() <= 6 && p.m() <= 8, format!("{} too large", p.name))?;
        let aff = subspace::build_affine_data(p, 1e-9).map_err(|e| e.to_string())?;
        let sopt = subspace::optimal_admissible_subspace(&aff, 1e-9);
        for m in METHODS {
            let tag = format!("{} {}", p.name, m.name());
            let o = ReduceOptions { method: m, seed: k as u64, ..Default::default() };
            let r = reduce::reduce_program(p, &o).map_err(|e| format!("{tag}: {e}"))?;
            ensure(subspace::check_admissible(&r.subspace, &aff, ADMISSIBLE_TOL).all(), format!("{tag}: not admissible"))?;
            let c = containment(&sopt, &r.subspace);
            ensure(c <= CONTAINMENT_TOL, format!("{tag}: S_opt ⊄ S ({c:e})"))?;
            let v = reduce::verify_reduction(p, &r.reduced, EQUIVALENCE_SAMPLES, k as u64).map_err(|e| e.to_string())?;
            ensure(v.project_points == EQUIVALENCE_SAMPLES, format!("{tag}: {} feasible points", v.project_points))?;
            ensure(
                v.project_primal_residual <= PROJECT_TOL && v.project_objective_gap <= PROJECT_TOL && v.project_cone_violations == 0,
                format!("{tag}: projection {v:?}"),
            )?;
            if r.reduced.form == Form::Isomorphic {
                iso += 1;
                ensure(v.lift_points == EQUIVALENCE_SAMPLES, format!("{tag}: {} reduced points", v.lift_points))?;
                ensure(
                    v.lift_primal_residual <= LIFT_TOL
                        && v.lift_objective_gap <= LIFT_TOL
                        && v.lift_dual_residual <= LIFT_TOL
                        && v.lift_dual_objective_gap <= LIFT_TOL
                        && v.lift_cone_violations == 0,
                    format!("{tag}: lifts {v:?}"),
                )?;
                let h = v.homomorphism_residual.unwrap_or(f64::INFINITY);
                ensure(h <= HOMOMORPHISM_TOL, format!("{tag}: Φ residual {h:e}"))?;
            }
        }
    }
    Ok(format!("{} instances × 4 methods ({iso} isomorphic reductions), all checks hold", progs.len()))
}

fn decomposition_oracle() -> Check {
    let mut disagreements = 0;
    let mut instances_checked = 0;
    for seed in 0..5u64 {
        let p = instances::planted_symmetry_sdp(5, PlantedGroup::Blockcopy, seed).map_err(|e| e.to_string())?;
        let aff = subspace::build_affine_data(&p, 1e-9).map_err(|e| e.to_string())?;
        let s = jordan_reduce::combinat::optimal_zeroone_subspace(&aff, seed).1;
        let d = jordan::decompose_ideals(&s, seed, 1e-9).map_err(|e| e.to_string())?;
        let rt = d.rank_tuple().to_string();
        ensure(d.ideals.len() == 2 && rt == "(2,1)", format!("seed {seed}: {} ideals, ranks {rt}", d.ideals.len()))?;

        let mut rng = jordan_reduce::rng::stream(seed, 0xc0e);
        let unit = subspace::unit_element(&s, seed, 1e-9);
        let elems = s.elements();
        for _ in 0..CONE_POINTS {
            let mut x = SymBlockMatrix::zeros(&p.structure);
            for e in &elems {
                x.axpy(rng.random_range(-1.0..1.0), e);
            }
            // shift so that roughly half the points are psd
            let shift = -x.min_eigenvalue() + rng.random_range(-0.5..0.5) * x.norm();
            x.axpy(shift, &unit);
            let eig = x.min_eigenvalue() >= -CONE_TOL * x.max_abs().max(1.0);
            let cm = jordan::cone_membership(&s, &x, CONE_TOL).map_err(|e| e.to_string())?;
            if eig != cm {
                disagreements += 1;
            }
        }
        instances_checked += 1;
    }
    ensure(disagreements == 0, format!("{disagreements} cone-membership disagreements"))?;
    Ok(format!("{instances_checked} blockcopy instances: ranks (2,1), {} points, 0 disagreements", instances_checked * CONE_POINTS))
}

/// Orbits of the constraint rows under the rotation of each variable orbit.
fn constraint_orbit_oracle(p: &ConicProgram, var_orbits: &[Vec<usize>]) -> usize {
    let nv = p.structure.num_blocks();
    let mut perm: Vec<usize> = (0..nv).collect();
    for o in var_orbits {
        for (r, &v) in o.iter().enumerate() {
            perm[v] = o[(r + 1) % o.len()];
        }
    }
    let rows: Vec<Vec<f64>> = p
        .constraints
        .iter()
        .map(|a| {
            let mut r = vec![0.0; nv];
            for &(c, v) in a.entries() {
                r[p.structure.entry(c).0] = v;
            }
            r
        })
        .collect();
    let mut orbit = vec![usize::MAX; rows.len()];
    let mut count = 0;
    for i in 0..rows.len() {
        if orbit[i] != usize::MAX {
            continue;
        }
        let mut cur = rows[i].clone();
        loop {
            let Some(j) = rows.iter().position(|r| *r == cur) else { break };
            if orbit[j] != usize::MAX {
                break;
            }
            orbit[j] = count;
            let mut next = vec![0.0; nv];
            for (v, &x) in cur.iter().enumerate() {
                next[perm[v]] = x;
            }
            cur = next;
        }
        count += 1;
    }
    count
}

fn lp_orbits() -> Check {
    let lp = instances::planted_c4_lp(0);
    let orbits = constraint_orbit_oracle(&lp.program, &lp.variable_orbits);
    let dir = tmp();
    let input = write_program(dir.path(), &lp.program);
    let run = jreduce(dir.path(), "lp", &["--input", &input, "--method", "optimal"]);
    ensure(run.code == 0, format!("exit {} {}", run.code, run.stderr))?;
    let reduced = io::parse_sdpa(&run.sdpa).map_err(|e| e.to_string())?;
    ensure(
        reduced.m == orbits,
        format!("{} dual variables, {orbits} constraint orbits", reduced.m),
    )?;
    ensure(reduced.block_sizes.iter().all(|&s| s < 0), "reduced program is not an LP")?;
    Ok(format!("{} constraints reduce to {} dual variables = {orbits} orbits", lp.program.m(), reduced.m))
}

fn determinism() -> Check {
    let dir = tmp();
    let mut runs = 0;
    let mut check = |tag: &str, args: &[&str]| -> Result<(), String> {
        let a = jreduce(dir.path(), &format!("{tag}_a"), args);
        let b = jreduce(dir.path(), &format!("{tag}_b"), args);
        ensure(a.code == b.code && a.code != 1, format!("{tag}: exit codes {} {}", a.code, b.code))?;
        ensure(!a.sdpa.is_empty() && a.sdpa == b.sdpa, format!("{tag}: SDPA output differs"))?;
        ensure(!a.report_text.is_empty() && a.report_text == b.report_text, format!("{tag}: report differs"))?;
        runs += 1;
        Ok(())
    };
    for (k, g) in GENERATED.iter().enumerate() {
        let methods: &[&str] = if *g == "cprank:ZxZ" { &["optimal"] } else { &["optimal", "zeroone", "partition", "coordinate", "data"] };
        for m in methods {
            check(&format!("g{k}_{m}"), &["--generate", g, "--method", m, "--seed", "7", "--verify", "3", "--compare"])?;
        }
    }
    for p in file_instances() {
        let input = write_program(dir.path(), &p);
        for m in ["optimal", "zeroone", "partition", "coordinate", "data"] {
            check(&format!("{}_{m}", p.name), &["--input", &input, "--method", m, "--seed", "7", "--verify", "3", "--compare"])?;
        }
    }
    Ok(format!("{runs} flag sets run twice, byte-identical"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("hamming theta collapses to an LP", hamming_collapse),
        ("worked example evaluation and partition", worked_example),
        ("cp-rank table", cprank_table),
        ("majorization along inclusions", majorization),
        ("equivalence properties on random instances", equivalence),
        ("blockcopy decomposition and cone membership", decomposition_oracle),
        ("planted C4 LP dual count equals orbit count", lp_orbits),
        ("byte-deterministic outputs", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panic: {}", msg.unwrap_or_default()))
        });
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(d) => println!("[PASS] {}. {name} ({secs:.1}s): {d}", i + 1),
            Err(e) => {
                println!("[FAIL] {}. {name} ({secs:.1}s): {e}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all 8 criteria passed");
}
