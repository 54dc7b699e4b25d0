//! Command-line driver: read or generate an SDP, reduce it, write the reduced
//! SDPA file and a JSON report.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;
use jordan_reduce::io::{self, ReductionReport, SdpaFile};
use jordan_reduce::reduce::{self, FormChoice, Method, ReduceOptions};
use jordan_reduce::{subspace, ConicProgram, Error};

/// Exit code for a reduction that failed `--verify`.
pub const EXIT_VERIFY: i32 = 2;
/// Exit code for I/O, parse and numerical errors.
pub const EXIT_ERROR: i32 = 1;

#[derive(Parser, Debug, Clone)]
#[command(name = "jreduce", version, about = "Reduce an SDP to its optimal admissible Jordan subalgebra")]
pub struct Cli {
    /// optimal, partition, coordinate, zeroone or data
    #[arg(long, default_value = "optimal")]
    pub method: Method,
    /// isomorphic, restriction or auto
    #[arg(long, default_value = "auto")]
    pub form: FormChoice,
    /// SDPA sparse input file
    #[arg(long, conflicts_with = "generate", required_unless_present = "generate")]
    pub input: Option<PathBuf>,
    /// Built-in instance: hamming:q:d1[,d2] or cprank:{Z|ZxZ|ZxZxZ}
    #[arg(long)]
    pub generate: Option<String>,
    /// Reduced SDPA file (stdout when absent)
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// JSON report
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Number of sampled points for the equivalence check; 0 skips it
    #[arg(long, default_value_t = 0)]
    pub verify: usize,
    /// Record per-phase seconds in the report
    #[arg(long)]
    pub timings: bool,
    /// Also record the dimensions of S_opt, S_part, S_coord and S_01
    #[arg(long)]
    pub compare: bool,
}

fn load(cli: &Cli) -> Result<ConicProgram, Error> {
    match (&cli.input, &cli.generate) {
        (_, Some(spec)) => io::generate(spec),
        (Some(path), None) => {
            let text = fs::read_to_string(path)?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("input");
            io::parse_sdpa(&text)?.to_program(stem)
        }
        (None, None) => Err(Error::Domain("one of --input or --generate is required".into())),
    }
}

fn compare_dims(program: &ConicProgram, opts: &ReduceOptions) -> Result<BTreeMap<String, usize>, Error> {
    let aff = subspace::build_affine_data(program, opts.tol)?;
    let mut dims = BTreeMap::new();
    for method in [Method::Optimal, Method::Partition, Method::Coordinate, Method::ZeroOne] {
        let o = ReduceOptions { method, ..*opts };
        let (s, _) = reduce::method_subspace(program, &aff, &o)?;
        dims.insert(method.subspace_key().to_string(), s.dim());
    }
    Ok(dims)
}

/// Runs the whole pipeline and returns `(report, exit code)`.
pub fn execute(cli: &Cli) -> Result<(ReductionReport, i32), Error> {
    let program = load(cli)?;
    log::info!("{}: m = {}, blocks {:?}", program.name, program.m(), program.structure.orders());
    let opts = ReduceOptions { method: cli.method, form: cli.form, seed: cli.seed, tol: cli.tol, ..Default::default() };
    let red = reduce::reduce_program(&program, &opts)?;
    let mut report = ReductionReport::new(&program, &red, cli.seed, cli.tol);
    let mut timings: BTreeMap<String, f64> = red.timings.iter().map(|&(k, v)| (k.to_string(), v)).collect();

    if cli.compare {
        let t = std::time::Instant::now();
        for (k, v) in compare_dims(&program, &opts)? {
            report.dims.entry(k).or_insert(v);
        }
        timings.insert("compare".into(), t.elapsed().as_secs_f64());
    }

    let mut code = 0;
    if cli.verify > 0 {
        let t = std::time::Instant::now();
        let v = reduce::verify_reduction(&program, &red.reduced, cli.verify, cli.seed)?;
        if !v.passed {
            log::error!("verification failed");
            code = EXIT_VERIFY;
        }
        report.verification = Some(v);
        timings.insert("verify".into(), t.elapsed().as_secs_f64());
    }
    if cli.timings {
        report.timings = Some(timings);
    }

    let sdpa = io::write_sdpa(&SdpaFile::from_program(&red.reduced.program));
    match &cli.output {
        Some(path) => fs::write(path, sdpa)?,
        None => std::io::stdout().lock().write_all(sdpa.as_bytes())?,
    }
    if let Some(path) = &cli.report {
        fs::write(path, report.to_json())?;
    }
    Ok((report, code))
}

/// Exit code of the pipeline: 0, [`EXIT_VERIFY`] or [`EXIT_ERROR`].
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok((_, code)) => code,
        Err(e) => {
            eprintln!("jreduce: {e}");
            EXIT_ERROR
        }
    }
}
