use super::*;
use crate::lti::{builtin_model, generate_data};
use crate::stl::parse;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn car_data(steps: usize, seed: u64) -> Trajectory {
    generate_data(&builtin_model("car").unwrap(), steps, &InputBox::uniform(1, -2.0, 2.0).unwrap(), seed, None).unwrap()
}

fn car_cfg() -> SynthesisConfig {
    SynthesisConfig::new(3, InputBox::uniform(1, -2.0, 2.0).unwrap())
}

fn init(u: [f64; 3], y: [f64; 3]) -> Trajectory {
    Trajectory::new(Signal::scalar(&u).unwrap(), Signal::scalar(&y).unwrap(), None).unwrap()
}

/// A window the car can actually produce: random state, random inputs.
fn reachable_init(rng: &mut ChaCha8Rng) -> Trajectory {
    let car = builtin_model("car").unwrap();
    let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let u: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
    car.simulate_from(&x, &Signal::scalar(&u).unwrap(), None).unwrap().0
}

#[test]
fn horizon_examples() {
    assert_eq!(compute_l(&parse("G[5,10] y1 > 0", 1).unwrap()), 10);
    assert_eq!(compute_l(&parse("y1 > 0", 1).unwrap()), 0);
    assert_eq!(compute_l(&parse("F[0,10] G[0,3] abs(y1) <= 2", 1).unwrap()), 13);
}

#[test]
fn scenario_one_is_sound() {
    let data = car_data(200, 7);
    let phi = parse("G[5,10] (abs(y1) >= 2 and abs(y1) <= 3)", 1).unwrap();
    let w = init([0.6058, 0.0, 0.0], [-0.1636, 0.0, 0.0]);
    let car = builtin_model("car").unwrap();
    for cost in [CostKind::InputNorm, CostKind::OutputNorm] {
        let cfg = SynthesisConfig { cost, ..car_cfg() };
        let res = synthesize(&data, &w, &phi, &cfg).unwrap();
        assert!(res.is_feasible() && res.optimal && res.pe_certified, "{res:?}");
        assert_eq!(res.horizon, 10);
        let plan = res.plan.as_ref().unwrap();
        assert_eq!(plan.u_opt.len(), 11);
        assert!(plan.prediction_satisfies);
        for t in 5..=10 {
            let v = plan.y_pred.sample(t)[0].abs();
            assert!((2.0..=3.0).contains(&v), "t={t}: {v}");
        }
        let cl = verify_closed_loop(&car, &res.w_ini, &plan.u_opt, None, &phi, DEFAULT_INIT_TOL).unwrap();
        assert_eq!(cl.verdict, Verdict::Satisfied);
        assert!(cl.y.max_abs_diff(&plan.y_pred) <= 1e-6);
    }
}

#[test]
fn unreachable_band_is_infeasible_in_both_paths() {
    let data = car_data(200, 7);
    let phi = parse("G[0,5] y1 > 1e6", 1).unwrap();
    let w = init([0.0; 3], [0.0; 3]);
    let res = synthesize(&data, &w, &phi, &car_cfg()).unwrap();
    assert_eq!(res.status, SynthesisStatus::Infeasible);
    assert!(res.plan.is_none());
    let car = builtin_model("car").unwrap();
    let res = model_based_synthesize(&car, &w, None, &phi, &car_cfg()).unwrap();
    assert_eq!(res.status, SynthesisStatus::Infeasible);
}

#[test]
fn zero_input_from_far_away_violates() {
    let car = builtin_model("car").unwrap();
    let phi = parse("G[5,10] (abs(y1) >= 2 and abs(y1) <= 3)", 1).unwrap();
    let w = car.simulate_from(&[50.0, 0.0, 0.0], &Signal::zeros(1, 3), None).unwrap().0;
    let cl = verify_closed_loop(&car, &w, &Signal::zeros(1, 11), None, &phi, DEFAULT_INIT_TOL).unwrap();
    assert_eq!(cl.verdict, Verdict::Violated { t_fail: 5 });
    assert!(cl.init_residual < 1e-9);
}

#[test]
fn zero_model_satisfies_easy_predicate() {
    let z = |r, c| crate::numerics::Matrix::zeros(r, c);
    let model = StateSpaceModel::new(z(1, 1), z(1, 1), z(1, 1), None, None).unwrap();
    let w = Trajectory::new(Signal::zeros(1, 1), Signal::zeros(1, 1), None).unwrap();
    let phi = parse("y1 > -1", 1).unwrap();
    let cl = verify_closed_loop(&model, &w, &Signal::zeros(1, 1), None, &phi, DEFAULT_INIT_TOL).unwrap();
    assert_eq!(cl.verdict, Verdict::Satisfied);
}

#[test]
fn inconsistent_initialization_is_rejected_by_verification() {
    let car = builtin_model("car").unwrap();
    let w = init([0.0; 3], [0.0, 1.0, 0.0]);
    let phi = parse("y1 > 0", 1).unwrap();
    assert!(matches!(
        verify_closed_loop(&car, &w, &Signal::zeros(1, 1), None, &phi, DEFAULT_INIT_TOL),
        Err(Error::InconsistentInitialization { .. })
    ));
}

#[test]
fn initialization_length_must_match() {
    let data = car_data(200, 7);
    let w = init([0.0; 3], [0.0; 3]).slice(0, 2);
    assert!(synthesize(&data, &w, &parse("y1 > 0", 1).unwrap(), &car_cfg()).is_err());
}

#[test]
fn horizon_override_extends_the_plan() {
    let data = car_data(200, 7);
    let phi = parse("F[0,3] y1 > 1", 1).unwrap();
    let w = init([0.0; 3], [0.0; 3]);
    let res = synthesize(&data, &w, &phi, &SynthesisConfig { horizon: Some(6), ..car_cfg() }).unwrap();
    assert_eq!(res.plan.unwrap().u_opt.len(), 7);
    assert!(synthesize(&data, &w, &phi, &SynthesisConfig { horizon: Some(2), ..car_cfg() }).is_err());
}

#[test]
fn short_data_warns_but_still_solves() {
    let data = car_data(15, 3);
    let phi = parse("F[0,3] y1 > 0.5", 1).unwrap();
    let w = init([0.0; 3], [0.0; 3]);
    let res = synthesize(&data, &w, &phi, &car_cfg()).unwrap();
    assert!(!res.pe_certified);
    assert!(res.warnings.iter().any(|m| m.contains("persistently exciting")));
}

fn random_band(rng: &mut ChaCha8Rng) -> StlFormula {
    let a = rng.gen_range(2..6);
    let b = a + rng.gen_range(0..4);
    let lo = rng.gen_range(-3.0..3.0_f64);
    let hi = lo + rng.gen_range(0.3..2.0);
    let src = if rng.gen_bool(0.5) {
        format!("G[{a},{b}] (y1 >= {lo} and y1 <= {hi})")
    } else {
        format!("F[{a},{b}] (y1 >= {lo} and y1 <= {hi})")
    };
    parse(&src, 1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn feasible_plans_hold_in_closed_loop(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = car_data(200, seed);
        let w = reachable_init(&mut rng);
        let phi = random_band(&mut rng);
        let res = synthesize(&data, &w, &phi, &car_cfg()).unwrap();
        if let Some(plan) = &res.plan {
            let cl = verify_closed_loop(&builtin_model("car").unwrap(), &res.w_ini, &plan.u_opt, None, &phi, DEFAULT_INIT_TOL).unwrap();
            prop_assert_eq!(cl.verdict, Verdict::Satisfied);
            prop_assert!(cl.y.max_abs_diff(&plan.y_pred) <= 1e-6);
        }
    }

    #[test]
    fn data_and_model_paths_agree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = car_data(200, seed);
        let w = reachable_init(&mut rng);
        let phi = random_band(&mut rng);
        let cfg = car_cfg();
        let dd = synthesize(&data, &w, &phi, &cfg).unwrap();
        let mb = model_based_synthesize(&builtin_model("car").unwrap(), &w, None, &phi, &cfg).unwrap();
        prop_assert_eq!(dd.status, mb.status);
        if let (Some(a), Some(b)) = (&dd.plan, &mb.plan) {
            prop_assert!((a.objective - b.objective).abs() <= 1e-4, "{} vs {}", a.objective, b.objective);
        }
    }

    #[test]
    fn more_data_keeps_feasibility(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = reachable_init(&mut rng);
        let phi = random_band(&mut rng);
        let short = synthesize(&car_data(120, seed), &w, &phi, &car_cfg()).unwrap();
        if short.is_feasible() {
            let long = synthesize(&car_data(300, seed), &w, &phi, &car_cfg()).unwrap();
            prop_assert!(long.is_feasible());
        }
    }
}
