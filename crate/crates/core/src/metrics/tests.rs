use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;

use super::*;
use crate::case::parse_case;
use crate::dataset::{initial_point_rng, sample_initial_point, INITIAL_ANGLE_RANGE};
use crate::fixtures;
use crate::inference::{output_bounds, InputMode};
use crate::nn::{MlpModel, Standardizer};
use crate::opf::{solve_opf, PrimalPoint, SolverOptions};
use crate::powerflow::build_admittance;

fn two_bus() -> NetworkCase {
    parse_case(fixtures::TWO_BUS).unwrap()
}

fn case39() -> NetworkCase {
    parse_case(fixtures::CASE39).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn gap_examples() {
    assert_eq!(optimality_gap(100.0, 100.0).unwrap(), 0.0);
    assert!(close(optimality_gap(91.44, 100.0).unwrap(), -8.56, 1e-12));
    assert!(close(optimality_gap(100.48, 100.0).unwrap(), 0.48, 1e-12));
    assert_eq!(optimality_gap(1.0, 0.0), Err(MetricError::NonPositiveReference(0.0)));
    assert!(optimality_gap(1.0, -3.0).is_err());
    assert!(optimality_gap(1.0, f64::NAN).is_err());
}

fn converged(case: &NetworkCase, load: &Load) -> crate::opf::OpfOutcome {
    let out = solve_opf(case, load, &PrimalPoint::box_center(case), &SolverOptions::default()).unwrap();
    assert!(out.converged);
    out
}

#[test]
fn optimal_point_is_fully_satisfied_and_balanced() {
    let c = case39();
    let y = build_admittance(&c).unwrap();
    let load = Load::default_for(&c);
    let out = converged(&c, &load);
    let v = out.solution.voltages();
    let s = constraint_satisfaction(&c, &y, &v, &out.solution.pg, &out.solution.qg);
    assert_eq!(s, Satisfaction { pg: 100.0, qg: 100.0, branch: 100.0 });
    let m = load_mismatch(&c, &y, &v, &out.solution.pg, &out.solution.qg, &load);
    for x in [m.p_abs, m.q_abs, m.p_signed, m.q_signed] {
        assert!(x.unwrap().abs() < 1e-4);
    }
}

#[test]
fn one_violated_bound_of_four() {
    let c = two_bus();
    let y = build_admittance(&c).unwrap();
    let v = VoltageProfile {
        vm: vec![0.9, 0.82],
        va: vec![0.0, -0.3],
    };
    let s = constraint_satisfaction(&c, &y, &v, &[1.0, 2.6], &[0.0, 0.0]);
    assert_eq!(s.pg, 75.0);
    assert_eq!(s.qg, 100.0);
    // a violation inside the tolerance still counts as satisfied
    let s = constraint_satisfaction(&c, &y, &v, &[-0.5e-6, 2.5], &[0.0, 0.5e-6]);
    assert_eq!((s.pg, s.qg), (100.0, 100.0));
    let s = constraint_satisfaction(&c, &y, &v, &[-1.0, 3.0], &[-3.0, 1.0]);
    assert_eq!((s.pg, s.qg), (50.0, 50.0));
}

#[test]
fn unrated_branches_count_as_satisfied() {
    let c = two_bus();
    assert!(c.branches.iter().all(|b| b.rate_a == 0.0));
    let y = build_admittance(&c).unwrap();
    let v = VoltageProfile {
        vm: vec![0.9, 0.3],
        va: vec![0.0, -1.5],
    };
    assert_eq!(constraint_satisfaction(&c, &y, &v, &[0.0, 0.0], &[0.0, 0.0]).branch, 100.0);
}

#[test]
fn overloaded_branches_reduce_satisfaction() {
    let c = case39();
    let y = build_admittance(&c).unwrap();
    let mut v = VoltageProfile::flat(c.n_buses());
    let zero = vec![0.0; c.n_generators()];
    assert_eq!(constraint_satisfaction(&c, &y, &v, &zero, &zero).branch, 100.0);
    // a large angle at one bus overloads the branches around it
    v.va[5] = 1.0;
    let flows = branch_flows(&v, &y);
    let rated = flows.iter().filter(|f| f.s_max > 0.0).count();
    let ok = flows.iter().filter(|f| f.s_max > 0.0 && f.within_limit(SATISFACTION_TOL)).count();
    assert!(ok < rated);
    let s = constraint_satisfaction(&c, &y, &v, &zero, &zero);
    assert!(close(s.branch, 100.0 * ok as f64 / rated as f64, 1e-12));
}

#[test]
fn scaled_load_gives_proportional_mismatch() {
    let c = case39();
    let y = build_admittance(&c).unwrap();
    let load = Load::default_for(&c);
    let out = converged(&c, &load);
    let v = out.solution.voltages();
    let mut shrunk = load.clone();
    for x in shrunk.p.iter_mut().chain(shrunk.q.iter_mut()) {
        *x /= 1.1;
    }
    // the operating point serves 1.1× the shrunk demand at every loaded bus
    let m = load_mismatch(&c, &y, &v, &out.solution.pg, &out.solution.qg, &shrunk);
    assert!(close(m.p_abs.unwrap(), 10.0, 1e-3));
    assert!(close(m.p_signed.unwrap(), 10.0, 1e-3));
    let q_abs: f64 = shrunk.q.iter().map(|q| q.abs()).sum();
    let q_net: f64 = load.q.iter().map(|q| q - q / 1.1).sum();
    assert!(close(m.q_signed.unwrap(), 100.0 * q_net / q_abs, 1e-3));
    assert!(m.q_abs.unwrap() >= m.q_signed.unwrap().abs() - 1e-9);
}

#[test]
fn zero_load_mismatch() {
    let c = two_bus();
    let y = build_admittance(&c).unwrap();
    let v = VoltageProfile::flat(2);
    let m = load_mismatch(&c, &y, &v, &[0.0, 0.0], &[0.0, 0.0], &Load::zeros(2));
    assert_eq!(
        m,
        Mismatch {
            p_abs: Some(0.0),
            q_abs: Some(0.0),
            p_signed: Some(0.0),
            q_signed: Some(0.0),
        }
    );
    assert_eq!(ratio(0.0, 0.0), Some(0.0));
    assert_eq!(ratio(1.0, 0.0), None);
    assert_eq!(ratio(1.0, 4.0), Some(25.0));
}

#[test]
fn evaluation_combines_the_parts() {
    let c = two_bus();
    let y = build_admittance(&c).unwrap();
    let load = Load::default_for(&c);
    let sol = DnnSolution {
        voltages: VoltageProfile {
            vm: vec![0.9, 0.82],
            va: vec![0.0, -0.3],
        },
        pg: vec![1.0, 2.0],
        qg: vec![0.1, 0.0],
        objective: 110.0,
        clip_events: Vec::new(),
        latency_us: None,
    };
    let m = evaluate_solution(&c, &y, &load, &sol, Some(100.0)).unwrap();
    assert!(close(m.gap.unwrap(), 10.0, 1e-12));
    assert_eq!(m.satisfaction, constraint_satisfaction(&c, &y, &sol.voltages, &sol.pg, &sol.qg));
    assert_eq!(m.mismatch, load_mismatch(&c, &y, &sol.voltages, &sol.pg, &sol.qg, &load));
    assert_eq!(evaluate_solution(&c, &y, &load, &sol, None).unwrap().gap, None);
    assert!(evaluate_solution(&c, &y, &load, &sol, Some(0.0)).is_err());
}

fn sample(gap: Option<f64>, pg: f64, p_abs: Option<f64>) -> SampleMetrics {
    SampleMetrics {
        gap,
        satisfaction: Satisfaction { pg, qg: 100.0, branch: 100.0 },
        mismatch: Mismatch {
            p_abs,
            q_abs: Some(1.0),
            p_signed: p_abs.map(|x| -x),
            q_signed: None,
        },
    }
}

#[test]
fn aggregation_skips_undefined_entries() {
    let r = EvaluationReport::aggregate(
        "t",
        &[sample(Some(1.0), 100.0, Some(2.0)), sample(None, 50.0, None), sample(Some(3.0), 75.0, Some(4.0))],
    );
    assert_eq!(r.tag, "t");
    assert_eq!(r.sample_count, 3);
    assert_eq!(r.eta_opt, Some(2.0));
    assert_eq!(r.eta_pg, 75.0);
    assert_eq!(r.eta_pd, Some(3.0));
    assert_eq!(r.eta_pd_signed, Some(-3.0));
    assert_eq!(r.eta_qd, Some(1.0));
    assert_eq!(r.eta_qd_signed, None);
    let empty = EvaluationReport::aggregate("e", &[]);
    assert_eq!((empty.eta_opt, empty.eta_pg, empty.sample_count), (None, 100.0, 0));
}

#[test]
fn speedup_examples() {
    let r = EvaluationReport::aggregate("t", &[]);
    let s = r.clone().with_timing(Some(1621.0), Some(1.4)).speedup.unwrap();
    assert_eq!(s.floor(), 1157.0);
    assert_eq!(r.clone().with_timing(Some(2.0), Some(2.0)).speedup, Some(1.0));
    let dnn_only = r.clone().with_timing(None, Some(1.4));
    assert_eq!((dnn_only.speedup, dnn_only.t_dnn_ms), (None, Some(1.4)));
    assert_eq!(r.with_timing(Some(1.0), Some(0.0)).speedup, None);
}

#[test]
fn best_index_ties_go_low() {
    assert_eq!(best_index(&[]), None);
    assert_eq!(best_index(&[3.0]), Some(0));
    assert_eq!(best_index(&[3.0, 1.0, 1.0, 2.0]), Some(1));
    assert_eq!(best_index(&[1.0, 1.0]), Some(0));
}

fn untrained39(seed: u64) -> (NetworkCase, MlpModel) {
    let c = case39();
    let d_in = InputMode::Augmented.input_dim(&c);
    let d_out = 2 * c.n_buses() - 1;
    let m = MlpModel::new(
        &[d_in, 8, d_out],
        seed,
        Standardizer::identity(d_in),
        Standardizer::identity(d_out),
        &output_bounds(&c),
    )
    .unwrap();
    (c, m)
}

#[test]
fn best_of_basic_cases() {
    let (c, m) = untrained39(4);
    let p = Predictor::new(&c, &m, InputMode::Augmented).unwrap();
    let load = Load::default_for(&c);
    assert_eq!(parallel_best_of(&p, &load, &[]).unwrap_err(), MetricError::NoInitialPoints);
    let x = sample_initial_point(&c, INITIAL_ANGLE_RANGE, &mut initial_point_rng(1, 0));
    let single = p.solve(&load, &x).unwrap();
    assert_eq!(parallel_best_of(&p, &load, core::slice::from_ref(&x)).unwrap(), (0, single.clone()));
    assert_eq!(parallel_best_of(&p, &load, &[x.clone(), x]).unwrap(), (0, single));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn best_of_is_no_worse_than_any_member(seed in any::<u64>(), k in 1usize..6) {
        let (c, m) = untrained39(seed);
        let p = Predictor::new(&c, &m, InputMode::Augmented).unwrap();
        let load = Load::default_for(&c);
        let xs: Vec<_> = (0..k as u64)
            .map(|j| sample_initial_point(&c, INITIAL_ANGLE_RANGE, &mut initial_point_rng(seed, j)))
            .collect();
        let (idx, best) = parallel_best_of(&p, &load, &xs).unwrap();
        let objs: Vec<f64> = xs.iter().map(|x| p.solve(&load, x).unwrap().objective).collect();
        prop_assert_eq!(Some(idx), best_index(&objs));
        prop_assert!(objs.iter().all(|o| best.objective <= *o));
    }

    #[test]
    fn satisfaction_stays_in_range(
        pg in proptest::collection::vec(-10.0f64..10.0, 2),
        qg in proptest::collection::vec(-10.0f64..10.0, 2),
    ) {
        let c = two_bus();
        let y = build_admittance(&c).unwrap();
        let s = constraint_satisfaction(&c, &y, &VoltageProfile::flat(2), &pg, &qg);
        for x in [s.pg, s.qg] {
            prop_assert!((0.0..=100.0).contains(&x));
            // two generators, two bounds each
            prop_assert_eq!((x / 25.0).fract(), 0.0);
        }
    }
}
