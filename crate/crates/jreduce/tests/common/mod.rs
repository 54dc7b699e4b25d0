#![allow(dead_code)]

use std::path::Path;
use std::process::Command;

use jordan_reduce::instances::{self, PlantedGroup};
use jordan_reduce::io::{self, SdpaFile};
use jordan_reduce::{BlockStructure, ConicProgram, SymBlockMatrix};
use rand::Rng;

pub struct Run {
    pub code: i32,
    pub sdpa: String,
    pub report: serde_json::Value,
    pub report_text: String,
    pub stderr: String,
}

/// Runs the binary with `--output` and `--report` pointed into `dir`.
pub fn jreduce(dir: &Path, tag: &str, args: &[&str]) -> Run {
    let out = dir.join(format!("{tag}.dat-s"));
    let rep = dir.join(format!("{tag}.json"));
    let o = Command::new(env!("CARGO_BIN_EXE_jreduce"))
        .args(args)
        .arg("--output")
        .arg(&out)
        .arg("--report")
        .arg(&rep)
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn jreduce");
    let report_text = std::fs::read_to_string(&rep).unwrap_or_default();
    Run {
        code: o.status.code().unwrap_or(-1),
        sdpa: std::fs::read_to_string(&out).unwrap_or_default(),
        report: serde_json::from_str(&report_text).unwrap_or(serde_json::Value::Null),
        report_text,
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
    }
}

pub fn write_program(dir: &Path, p: &ConicProgram) -> String {
    let path = dir.join(format!("{}.dat-s", p.name));
    std::fs::write(&path, io::write_sdpa(&SdpaFile::from_program(p))).unwrap();
    path.to_str().unwrap().to_string()
}

/// Sparse integer data over `orders` with `I` feasible.
pub fn random_sparse_program(seed: u64, orders: &[usize], m: usize) -> ConicProgram {
    let st = BlockStructure::new(orders.to_vec()).unwrap();
    let mut rng = jordan_reduce::rng::stream(seed, 0xacc);
    let mut draw = |density: f64| {
        let mut x = SymBlockMatrix::zeros(&st);
        for (k, &n) in orders.iter().enumerate() {
            for j in 0..n {
                for i in 0..=j {
                    if rng.random_bool(density) {
                        x.set(k, i, j, rng.random_range(-3i32..=3) as f64);
                    }
                }
            }
        }
        x
    };
    let cost = draw(0.4);
    let mut cons = vec![SymBlockMatrix::identity(&st)];
    for _ in 1..m {
        cons.push(draw(0.25));
    }
    let id = SymBlockMatrix::identity(&st);
    let b = cons.iter().map(|a| a.inner(&id)).collect();
    ConicProgram::from_dense(format!("random_{seed}"), &cost, &cons, b, 0.0).unwrap()
}

/// Built-in generators reachable through `--generate`.
pub const GENERATED: [&str; 4] = ["hamming:7:5,6", "hamming:8:3,4", "cprank:Z", "cprank:ZxZ"];

/// Instances passed to the binary as SDPA files.
pub fn file_instances() -> Vec<ConicProgram> {
    let mut out = Vec::new();
    for g in [PlantedGroup::Cyclic, PlantedGroup::Dihedral, PlantedGroup::Blockcopy, PlantedGroup::Trivial] {
        for n in [5, 6] {
            out.push(instances::planted_symmetry_sdp(n, g, 0).unwrap());
        }
    }
    out.push(instances::planted_c4_lp(0).program);
    out
}

/// Every bundled instance as a program.
pub fn bundled() -> Vec<ConicProgram> {
    let mut out: Vec<ConicProgram> = GENERATED.iter().map(|g| io::generate(g).unwrap()).collect();
    out.extend(file_instances());
    out
}
