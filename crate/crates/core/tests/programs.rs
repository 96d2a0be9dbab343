use imax_core::conic::sdpa::write_sdpa;
use imax_core::conic::{self, ConicProblem, SolverSettings};
use imax_core::generators::{self, random_mixed};
use imax_core::linalg;
use imax_core::measures;
use imax_core::oracle;
use imax_core::programs::{self, DualCertificate, MuDomain, RankCondition};
use imax_core::seesaw::{self, IterationRecord, SeesawConfig, SeesawObserver, SeesawStatus};
use imax_core::state::{BipartiteState, Tolerances};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn state(seed: u64, da: usize, db: usize) -> BipartiteState<f64> {
    random_mixed::<f64, _>(da, db, da * db, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

#[test]
fn step2_matches_closed_form() {
    let tol = Tolerances::default();
    for seed in 0..6 {
        let rho = state(seed, 2 + (seed as usize % 2), 2);
        let s2 = programs::solve_step2(&rho, &rho, &SolverSettings::default()).unwrap();
        let exact = measures::dmax_ratio(rho.matrix(), &rho.marginal_product(), tol.support_tol).unwrap();
        assert!((s2.lambda_i - exact).abs() / exact < 1e-7, "{} vs {exact}", s2.lambda_i);
    }
}

#[test]
fn bell_margin_at_lambda_four_is_epsilon_squared() {
    let phi = generators::bell::<f64>(2).unwrap();
    for eps in [0.01, 0.05, 0.1, 0.2] {
        let (s3, _) = programs::solve_step3(&phi, 4.0, eps, MuDomain::NonNegative, &SolverSettings::default()).unwrap();
        assert!((s3.mu_i - eps * eps).abs() < 1e-6, "eps={eps}: mu={}", s3.mu_i);
        assert!(s3.achieved_fidelity >= 1.0 - eps * eps - 1e-9);
    }
}

#[test]
fn step3_pair_closes_the_gap() {
    let settings = SolverSettings::default();
    for (seed, dims) in [(1, (2, 2)), (2, (3, 2))] {
        let rho = state(seed, dims.0, dims.1);
        let lambda = 1.01 * measures::dmax_ratio(rho.matrix(), &rho.marginal_product(), 1e-9).unwrap();
        for eps in [0.01, 0.1] {
            let p = programs::build_step3_primal(&rho, lambda, eps).unwrap();
            let d = programs::build_step3_dual(&rho, lambda, eps).unwrap();
            let ps = conic::solve(&p.problem, &settings);
            let ds = conic::solve(&d.problem, &settings);
            let cert = programs::certify_gap(&ps, &ds, 1e-7);
            assert!(cert.passed, "{cert:?}");
            let dual = d.extract(&ds, &rho, eps).unwrap();
            assert!(dual.verify(lambda, 1e-6).is_ok(), "{:?}", dual.verify(lambda, 1e-6));
            assert!((dual.dual_objective - ds.primal_objective).abs() < 1e-6 * (1.0 + ds.primal_objective.abs()));
        }
    }
}

#[test]
fn slater_point_block_floor_is_beta() {
    let rho = state(4, 2, 2);
    for lambda in [0.5, 1.0, 4.0] {
        let cert = DualCertificate::slater_point(&rho, lambda, 0.1, 2.0, 1.0, 1.0).unwrap();
        let min = cert.block_min_eigenvalue(lambda).unwrap();
        assert!((min - 1.0).abs() < 1e-12, "lambda={lambda}: {min}");
    }
    assert!(DualCertificate::slater_point(&rho, 1.0, 0.1, 0.5, 1.0, 1.0).is_err());
}

#[test]
fn rank_check_program_bounds_report() {
    let rho = state(8, 2, 2);
    let eps = 0.1;
    let report = programs::rank_condition(&rho, eps, &Tolerances::default()).unwrap();
    let prog = programs::build_rank_check(&rho, eps).unwrap();
    let sol = conic::solve(&prog.problem, &SolverSettings::default());
    let best = prog.best_margin(&sol).unwrap();
    // Best case over the ball is at least the center's value.
    assert!(best >= report.min_eig_rho_b - 1e-7);
    assert!(best <= report.min_eig_rho_b + report.perturbation_bound + 1e-7);
}

#[test]
fn seesaw_agrees_with_bisection() {
    let rho = state(21, 2, 2);
    let eps = 0.05;
    let res = seesaw::run_seesaw(&rho, &SeesawConfig::new(eps)).unwrap();
    assert_eq!(res.status, SeesawStatus::ConvergedCertified);
    let bis = oracle::bisection_oracle(&rho, eps, 1e-6, &SolverSettings::default()).unwrap();
    assert!((res.imax - bis.lambda_star.log2()).abs() <= 1e-4);
    let sampled = oracle::sampling_upper_bound(&rho, eps, 16, 3).unwrap();
    assert!(sampled >= res.imax - 1e-6);
}

#[test]
fn seesaw_trace_descends_and_final_pair_is_sound() {
    let tol = Tolerances::default();
    for seed in [30, 31] {
        let rho = state(seed, 3, 2);
        let eps = 0.1;
        let res = seesaw::run_seesaw(&rho, &SeesawConfig::new(eps)).unwrap();
        for w in res.trace.windows(2) {
            assert!(w[1].lambda_i <= w[0].lambda_i + 1e-8);
        }
        let slack = linalg::kron(&rho.marginal_a(), &res.final_state.marginal_b()).scale(res.lambda_min)
            - res.final_state.matrix();
        assert!(linalg::min_eigenvalue(&slack).unwrap() >= -1e-7);
        assert!(measures::sine_distance(rho.matrix(), res.final_state.matrix(), &tol).unwrap() <= eps + 1e-6);
    }
}

#[test]
fn zero_epsilon_paths_agree() {
    let rho = state(5, 2, 2);
    let closed = seesaw::run_seesaw(&rho, &SeesawConfig::new(0.0)).unwrap();
    let mut cfg = SeesawConfig::new(0.0);
    cfg.sdp_at_zero_epsilon = true;
    let sdp = seesaw::run_seesaw(&rho, &cfg).unwrap();
    assert!((closed.imax - sdp.imax).abs() < 1e-6);
    assert_eq!(closed.trace.len(), 1);
}

#[test]
fn pure_product_state_has_failing_rank_and_zero_value() {
    let s = generators::StateKind::parse("product:ket0:2:2", 0).unwrap();
    let rho = generators::generate_state(&s).unwrap();
    let res = seesaw::run_seesaw(&rho, &SeesawConfig::new(0.05)).unwrap();
    assert_eq!(res.rank_condition, RankCondition::Fails);
    assert_eq!(res.status, SeesawStatus::UpperBoundOnly);
    assert!(res.imax.abs() < 1e-6);
}

#[test]
fn invalid_configuration_is_rejected() {
    let rho = state(0, 2, 2);
    let mut cfg = SeesawConfig::new(0.1);
    cfg.max_iters = 0;
    assert!(seesaw::run_seesaw(&rho, &cfg).is_err());
    assert!(seesaw::run_seesaw(&rho, &SeesawConfig::new(1.5)).is_err());
    assert!(oracle::bisection_oracle(&rho, 0.0, 1e-6, &SolverSettings::default()).is_err());
}

#[derive(Default)]
struct Recorder {
    labels: Vec<String>,
    dumps: Vec<String>,
    records: Vec<IterationRecord>,
}

impl SeesawObserver for Recorder {
    fn on_iteration(&mut self, record: &IterationRecord) {
        self.records.push(record.clone());
    }

    fn on_problem(&mut self, label: &str, problem: &ConicProblem) {
        self.labels.push(label.to_string());
        self.dumps.push(write_sdpa(problem));
    }
}

#[test]
fn observer_sees_every_program() {
    let rho = generators::bell::<f64>(2).unwrap();
    let mut rec = Recorder::default();
    let res = seesaw::run_seesaw_observed(&rho, &SeesawConfig::new(0.05), &mut rec).unwrap();
    assert_eq!(rec.records.len(), res.trace.len());
    assert!(rec.labels.iter().any(|l| l == "iter001_step2"));
    assert!(rec.labels.iter().any(|l| l == "iter001_step3_dual"));
    let mut unique = rec.labels.clone();
    unique.dedup();
    assert_eq!(unique.len(), rec.labels.len());
    assert!(rec.dumps.iter().all(|d| d.lines().count() > 4));
}

#[test]
fn separable_werner_reaches_zero_inside_the_ball() {
    // The ball around these states contains 1/4, where the step-2 slack
    // vanishes identically.
    for (p, eps) in [(0.2904, 0.08), (0.2904, 0.1), (0.3, 0.1)] {
        let rho = generators::werner::<f64>(2, p).unwrap();
        let res = seesaw::run_seesaw(&rho, &SeesawConfig::new(eps)).unwrap();
        assert_eq!(res.status, SeesawStatus::ConvergedCertified);
        assert!(res.imax.abs() < 1e-6, "p={p} eps={eps}: {}", res.imax);
    }
}
