use jordan_reduce::instances::{self, HammingGraphSpec, PlantedGroup};
use jordan_reduce::io::{self, eliminate_free_variables, FreeVariableProgram, SdpaFile};
use jordan_reduce::{BlockStructure, ConicProgram, SymBlockMatrix};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Integer data with a few off-diagonal halves, over `orders`.
fn random_program(seed: u64, orders: &[usize], m: usize) -> ConicProgram {
    let st = BlockStructure::new(orders.to_vec()).unwrap();
    let mut rng = jordan_reduce::rng::stream(seed, 0x5d);
    let mut draw = |density: f64| {
        let mut x = SymBlockMatrix::zeros(&st);
        for (k, &n) in orders.iter().enumerate() {
            for j in 0..n {
                for i in 0..=j {
                    if rng.random_bool(density) {
                        x.set(k, i, j, rng.random_range(-6i32..=6) as f64 / 2.0);
                    }
                }
            }
        }
        x
    };
    let cost = draw(0.5);
    let cons: Vec<_> = (0..m).map(|_| draw(0.3)).collect();
    let id = SymBlockMatrix::identity(&st);
    let b = cons.iter().map(|a| a.inner(&id)).collect();
    ConicProgram::from_dense(format!("rand{seed}"), &cost, &cons, b, 0.0).unwrap()
}

fn round_trip(p: &ConicProgram) -> ConicProgram {
    let text = io::write_sdpa(&SdpaFile::from_program(p));
    io::parse_sdpa(&text).unwrap().to_program("ignored").unwrap()
}

#[test]
fn bundled_programs_round_trip_exactly() {
    let mut programs = vec![
        instances::theta_sdp(&HammingGraphSpec::new(2, vec![2]).unwrap()),
        instances::theta_sdp(&HammingGraphSpec::new(7, vec![5, 6]).unwrap()),
        instances::cprank_sdp(&instances::cprank_z()).unwrap(),
        instances::planted_c4_lp(0).program,
    ];
    for g in [PlantedGroup::Cyclic, PlantedGroup::Blockcopy] {
        programs.push(instances::planted_symmetry_sdp(5, g, 1).unwrap());
    }
    for p in &programs {
        assert_eq!(&round_trip(p), p, "{}", p.name);
    }
}

#[test]
fn lp_runs_merge_into_one_negative_block() {
    let p = random_program(3, &[1, 1, 3, 1, 1, 1], 4);
    let f = SdpaFile::from_program(&p);
    assert_eq!(f.block_sizes, vec![-2, 3, -3]);
    assert_eq!(round_trip(&p), p);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn writer_output_is_a_parse_fixed_point(
        seed in 0u64..10_000,
        orders in prop::collection::vec(1usize..4, 1..4),
        m in 1usize..5,
    ) {
        let p = random_program(seed, &orders, m);
        let text = io::write_sdpa(&SdpaFile::from_program(&p));
        let parsed = io::parse_sdpa(&text).unwrap();
        prop_assert_eq!(io::write_sdpa(&parsed), text);
        prop_assert_eq!(parsed.to_program(&p.name).unwrap(), p);
    }
}

/// Orthonormal basis of the null space of `m` (columns).
fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    let svd = m.transpose().svd(true, false);
    let u = svd.u.unwrap();
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax).count();
    let proj = DMatrix::identity(n, n) - u.columns(0, rank) * u.columns(0, rank).transpose();
    let eig = proj.symmetric_eigen();
    let keep: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > 0.5).collect();
    DMatrix::from_fn(n, keep.len(), |i, c| eig.eigenvectors[(i, keep[c])])
}

fn constraint_matrix(p: &ConicProgram) -> DMatrix<f64> {
    let st = &p.structure;
    let rows: Vec<DVector<f64>> = p.constraints.iter().map(|a| a.svec(st)).collect();
    DMatrix::from_fn(p.m(), st.dim(), |i, c| rows[i][c])
}

fn affine_residual(p: &ConicProgram, x: &SymBlockMatrix, shift: &DVector<f64>) -> f64 {
    let v = x.svec();
    let scale = DVector::from_column_slice(&p.b).amax().max(1.0);
    p.constraints
        .iter()
        .zip(&p.b)
        .enumerate()
        .map(|(i, (a, &b))| (a.dot_svec(&p.structure, &v) + shift[i] - b).abs())
        .fold(0.0, f64::max)
        / scale
}

#[test]
fn free_variable_elimination_preserves_the_cone_projection() {
    let mut rng = jordan_reduce::rng::stream(11, 0xf4);
    let base = random_program(11, &[3, 2, 1], 7);
    let (m, p, st) = (base.m(), 3, base.structure.clone());
    let g = DMatrix::from_fn(m, p, |_, _| rng.random_range(-2i32..=2) as f64);
    // make one free column a combination of the others
    let g = {
        let mut g = g;
        let c = g.column(0) + 2.0 * g.column(1);
        g.set_column(2, &c);
        g
    };
    let u_star = DVector::from_fn(p, |_, _| rng.random_range(-3i32..=3) as f64);
    let id = SymBlockMatrix::identity(&st);
    let gu = &g * &u_star;
    let b: Vec<f64> = base.constraints.iter().enumerate().map(|(i, a)| a.dot_svec(&st, &id.svec()) + gu[i]).collect();
    let program = ConicProgram::new("mixed", st.clone(), base.cost.clone(), base.constraints.clone(), b).unwrap();
    let f = g.transpose() * DVector::from_fn(m, |_, _| rng.random_range(-2i32..=2) as f64);
    let fp = FreeVariableProgram { program: program.clone(), free_cost: f.clone(), free_columns: g.clone() };
    let (reduced, transport) = eliminate_free_variables(&fp, 1e-12).unwrap();
    assert!(reduced.m() < m);

    let gauss = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| {
        DVector::from_fn(n, |_, _| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
    };
    let zero = DVector::zeros(m);

    // original -> reduced: directions in the null space of [A G]
    let full = {
        let a = constraint_matrix(&program);
        let mut full = DMatrix::zeros(m, st.dim() + p);
        full.columns_mut(0, st.dim()).copy_from(&a);
        full.columns_mut(st.dim(), p).copy_from(&g);
        full
    };
    let dirs = null_space(&full);
    for _ in 0..20 {
        let z = &dirs * gauss(&mut rng, dirs.ncols());
        let z = z.scale(0.2 / z.norm());
        let dx = SymBlockMatrix::from_svec(&st, &z.rows(0, st.dim()).into_owned());
        let mut x = id.clone();
        x.axpy(1.0, &dx);
        let u = &u_star + z.rows(st.dim(), p);
        assert!(x.min_eigenvalue() > 0.0);
        assert!(affine_residual(&program, &x, &(&g * &u)) < 1e-10);
        assert!(affine_residual(&reduced, &x, &zero) < 1e-10);
        let lhs = program.objective(&x) + f.dot(&u);
        let rhs = reduced.objective(&x) + transport.offset;
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    // reduced -> original: recover u from the transport
    let dirs = null_space(&constraint_matrix(&reduced));
    for _ in 0..20 {
        let z = &dirs * gauss(&mut rng, dirs.ncols());
        let mut x = id.clone();
        x.axpy(1.0, &SymBlockMatrix::from_svec(&st, &z.scale(0.2 / z.norm())));
        assert!(x.min_eigenvalue() > 0.0);
        assert!(affine_residual(&reduced, &x, &zero) < 1e-10);
        let u = transport.free_values(&program, &x);
        assert!(affine_residual(&program, &x, &(&g * &u)) < 1e-9);
        let lhs = program.objective(&x) + f.dot(&u);
        let rhs = reduced.objective(&x) + transport.offset;
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }
}
