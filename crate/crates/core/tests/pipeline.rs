use decpep::experiments::{run_sweep, ExperimentConfig};
use decpep::reconstruct::DEFAULT_CLIP_TOL;
use decpep::verification::averaging::make_averaging_matrix;
use decpep::verification::instances::quadratic_instance_sampler;
use decpep::verification::simulate::{fit_gradient_spread, simulate_method, AveragingSchedule};
use decpep::{
    reconstruct, solve, ClarabelAdapter, ConsensusModel, CriterionKind, FunctionClass, InitialCondition,
    Method, MethodParams, Scenario, SpectralRange,
};
use nalgebra::DMatrix;

#[test]
fn worst_case_dominates_simulation_and_reconstructs() {
    let params = MethodParams::new(3, 0.3);
    let scenario = Scenario::new(
        Method::Diging,
        params,
        FunctionClass::SmoothStronglyConvex { mu: 0.1, l: 1.0 },
        InitialCondition::MeanSquaredDistance { d: 1.0 },
        CriterionKind::DistanceAtK,
        ConsensusModel::Spectral(SpectralRange::symmetric(0.6).unwrap()),
    );
    let built = scenario.build().unwrap();
    let sol = solve(&ClarabelAdapter::default(), &built.problem).unwrap();
    let worst = reconstruct(&sol, &built.problem, DEFAULT_CLIP_TOL).unwrap();
    assert!(worst.max_constraint_residual < 1e-6, "{}", worst.worst_constraint);
    assert!((worst.objective - sol.value).abs() < 1e-6 * sol.value.max(1.0));

    let inst = quadratic_instance_sampler(0.1, 1.0, 4, 2, 3).unwrap();
    let dev = DMatrix::from_fn(4, 2, |i, k| ((i + 2 * k) as f64).sin());
    let scale = 2.0 / dev.norm();
    let x0 = DMatrix::from_fn(4, 2, |i, k| inst.x_star[k] + scale * dev[(i, k)]);
    let (inst, x0) = fit_gradient_spread(&inst, &x0, scenario.gradient_spread.unwrap()).unwrap();
    let w = make_averaging_matrix(4, &[-0.6, 0.2, 0.6], 5).unwrap();
    let sim = simulate_method(
        &inst,
        Method::Diging,
        &params,
        &AveragingSchedule::constant(w),
        &x0,
        CriterionKind::DistanceAtK,
    )
    .unwrap();
    assert!(sim.criterion <= sol.value + 1e-6, "{} > {}", sim.criterion, sol.value);
}

#[test]
fn json_config_drives_a_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let json = format!(
        r#"{{"method": "extra", "K": 2, "lambda_grid": [0.0, 0.5], "alpha": 0.4, "record_wall_time": false, "out": {:?}}}"#,
        out
    );
    let cfg_path = dir.path().join("c.json");
    std::fs::write(&cfg_path, json).unwrap();
    let cfg = ExperimentConfig::from_json_file(&cfg_path).unwrap();
    let table = run_sweep(&cfg).unwrap();
    assert_eq!(table.failures(), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(2).unwrap().starts_with("extra,constant,0.5,0.4,"));
}
