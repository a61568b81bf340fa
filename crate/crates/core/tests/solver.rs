use porocrack::fem::{apply_dirichlet, mode_one_tension, Assembler, LoadSpec};
use porocrack::material::MaterialParams;
use porocrack::mesh::{generate_notched_plate, Mesh, MeshResolution, NotchedPlateGeometry};
use porocrack::solver::{
    picard_solve, picard_solve_with, residual, solve_linear, LinearSolverKind, PicardStrategy, SolverConfig,
    SolverError,
};

fn small_plate() -> (Mesh, LoadSpec) {
    let geom = NotchedPlateGeometry::default();
    let res = MeshResolution { n_coarse: [4, 4, 1], grading_ratio: 2.0, tip_refine_levels: 2 };
    let mesh = generate_notched_plate(&geom, &res).unwrap();
    let loads = mode_one_tension(&mesh, &geom, -1.0, 1.0);
    (mesh, loads)
}

fn material(beta: f64) -> MaterialParams {
    MaterialParams::new(1.0e4, 0.3, beta).unwrap()
}

#[test]
fn beta_zero_is_one_linear_solve() {
    let (mesh, loads) = small_plate();
    let config = SolverConfig::default();
    let (u, report) = picard_solve(&mesh, &material(0.0), &loads, &config).unwrap();
    assert_eq!(report.picard_iterations, 1);
    assert_eq!(report.residual_history, vec![0.0]);
    assert!(report.converged);
    let sys = Assembler::new(&mesh).assemble(&mesh, &material(0.0), None, &loads).unwrap();
    let linear = solve_linear(&apply_dirichlet(&sys, &loads, &mesh).unwrap(), &config).unwrap();
    assert_eq!(u, linear);
}

#[test]
fn converged_report_is_consistent() {
    let (mesh, loads) = small_plate();
    for beta in [-30.0, 30.0] {
        let config = SolverConfig::default();
        let (_, report) = picard_solve(&mesh, &material(beta), &loads, &config).unwrap();
        assert!(report.converged);
        assert_eq!(report.residual_history.len(), report.picard_iterations);
        assert!(report.last_residual().unwrap() <= config.tol_rel);
        assert!(report.min_coeff > 0.0);
        assert!(report.max_grad_norm > 0.0);
        assert_eq!(*report.beta_history.last().unwrap(), beta);
    }
}

#[test]
fn fixed_point_is_idempotent() {
    let (mesh, loads) = small_plate();
    let assembler = Assembler::new(&mesh);
    let config = SolverConfig { cg_tol: 1e-12, ..SolverConfig::default() };
    for beta in [-20.0, 20.0] {
        let params = material(beta);
        let (u, _) = picard_solve_with(&assembler, &mesh, &params, &loads, &config, None).unwrap();
        let sys = assembler.assemble(&mesh, &params, Some(&u.0), &loads).unwrap();
        let next = solve_linear(&apply_dirichlet(&sys, &loads, &mesh).unwrap(), &config).unwrap();
        assert!(residual(&next.0, &u.0) <= config.tol_rel, "beta {beta}: {}", residual(&next.0, &u.0));
    }
}

#[test]
fn restart_from_solution_converges_immediately() {
    let (mesh, loads) = small_plate();
    let assembler = Assembler::new(&mesh);
    let config = SolverConfig::default();
    let params = material(10.0);
    let (u, _) = picard_solve_with(&assembler, &mesh, &params, &loads, &config, None).unwrap();
    let (_, again) = picard_solve_with(&assembler, &mesh, &params, &loads, &config, Some(&u)).unwrap();
    assert!(again.picard_iterations <= 2, "{}", again.picard_iterations);
}

#[test]
fn small_beta_approaches_linear_solution() {
    let (mesh, loads) = small_plate();
    let config = SolverConfig { cg_tol: 1e-12, ..SolverConfig::default() };
    let (u0, _) = picard_solve(&mesh, &material(0.0), &loads, &config).unwrap();
    for sign in [1.0, -1.0] {
        let diffs: Vec<f64> = [0.1, 0.01, 0.001]
            .iter()
            .map(|b| residual(&picard_solve(&mesh, &material(sign * b), &loads, &config).unwrap().0 .0, &u0.0))
            .collect();
        assert!(diffs[1] < diffs[0] && diffs[2] < diffs[1], "{diffs:?}");
        // first order in β
        assert!((diffs[0] / diffs[1] - 10.0).abs() < 1.0, "{diffs:?}");
    }
}

#[test]
fn direct_and_cg_picard_agree() {
    let (mesh, loads) = small_plate();
    let cg = SolverConfig { cg_tol: 1e-12, ..SolverConfig::default() };
    let direct = SolverConfig { linear_solver: LinearSolverKind::Direct, ..SolverConfig::default() };
    let (a, ra) = picard_solve(&mesh, &material(-10.0), &loads, &cg).unwrap();
    let (b, rb) = picard_solve(&mesh, &material(-10.0), &loads, &direct).unwrap();
    assert_eq!(ra.picard_iterations, rb.picard_iterations);
    assert!(residual(&a.0, &b.0) < 1e-8);
}

#[test]
fn non_convergence_carries_partial_report() {
    let (mesh, loads) = small_plate();
    let config = SolverConfig { max_picard: 2, ..SolverConfig::default() };
    match picard_solve(&mesh, &material(-30.0), &loads, &config) {
        Err(e @ SolverError::NonConverged { .. }) => {
            let report = e.report().unwrap();
            assert_eq!(report.picard_iterations, 2);
            assert_eq!(report.residual_history.len(), 2);
            assert!(!report.converged);
        }
        other => panic!("{other:?}"),
    }
}

fn plain_outcome(mesh: &Mesh, loads: &LoadSpec, beta: f64) -> Result<(), SolverError> {
    let config = SolverConfig { strategy: PicardStrategy::Plain, max_picard: 200, ..SolverConfig::default() };
    picard_solve(mesh, &material(beta), loads, &config).map(|_| ())
}

/// Bisects for the smallest positive β at which the undamped iteration hits
/// the strain limit, then checks the error on both sides of it.
#[test]
fn strain_limit_found_by_bisection() {
    let (mesh, loads) = small_plate();
    let is_limit = |b: f64| matches!(plain_outcome(&mesh, &loads, b), Err(SolverError::StrainLimit { .. }));
    let (mut lo, mut hi) = (0.0, 1000.0);
    assert!(!is_limit(lo));
    assert!(is_limit(hi));
    for _ in 0..12 {
        let mid = 0.5 * (lo + hi);
        if is_limit(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    assert!(hi - lo < 0.5);
    println!("strain limit onset between beta {lo} and {hi}");
    match plain_outcome(&mesh, &loads, hi) {
        Err(e @ SolverError::StrainLimit { .. }) => {
            let SolverError::StrainLimit { element, point, factor, ref report } = e else { unreachable!() };
            assert!(element < mesh.element_count());
            assert!(point < 8);
            assert!(factor <= 0.0);
            assert!(report.picard_iterations >= 1);
        }
        other => panic!("{other:?}"),
    }
    assert!(!is_limit(lo));
}

#[test]
fn plain_iteration_fails_where_continuation_succeeds() {
    let geom = NotchedPlateGeometry::default();
    let mesh = generate_notched_plate(&geom, &MeshResolution::default()).unwrap();
    let loads = mode_one_tension(&mesh, &geom, -1.0, 1.0);
    let plain = plain_outcome(&mesh, &loads, -15.0);
    assert!(matches!(plain, Err(SolverError::StrainLimit { .. })), "{plain:?}");
    assert!(picard_solve(&mesh, &material(-15.0), &loads, &SolverConfig::default()).is_ok());
}

#[test]
fn invalid_config_rejected() {
    let (mesh, loads) = small_plate();
    let config = SolverConfig { tol_rel: 0.0, ..SolverConfig::default() };
    assert!(matches!(picard_solve(&mesh, &material(1.0), &loads, &config), Err(SolverError::InvalidConfig(_))));
}
