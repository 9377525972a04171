use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;

use super::*;
use crate::case::parse_case;
use crate::fixtures;
use crate::fixtures::two_bus::{PD, PG2_MAX, QG1_MAX, V1, X};
use crate::opf::{certify, solve_opf, CertificateTolerances};

fn two_bus() -> NetworkCase {
    parse_case(fixtures::TWO_BUS).unwrap()
}

fn case39() -> NetworkCase {
    parse_case(fixtures::CASE39).unwrap()
}

fn rule() -> BranchRule {
    BranchRule {
        bus: 1,
        threshold: 0.65,
        dead_band: 0.02,
        above: BranchLabel::LowCost,
    }
}

/// A bare record for mixing and splitting tests.
fn stub(load_index: usize, converged: bool, label: Option<BranchLabel>) -> SampleRecord {
    let p = PrimalPoint {
        pg: vec![load_index as f64],
        qg: vec![0.0],
        vm: vec![1.0],
        va: vec![0.0],
    };
    SampleRecord {
        load_index,
        load: Load::zeros(1),
        x0: p.clone(),
        solution: p,
        objective: 0.0,
        converged,
        iterations: 1,
        label,
    }
}

fn dataset(records: Vec<SampleRecord>) -> Dataset {
    Dataset {
        records,
        meta: DatasetMeta {
            case_name: String::from("stub"),
            seed: 0,
            mix_ratio: None,
            scalers: None,
        },
    }
}

fn count(ds: &Dataset, li: usize, label: BranchLabel) -> usize {
    ds.records
        .iter()
        .filter(|r| r.load_index == li && r.label == Some(label))
        .count()
}

#[test]
fn daily_curve_hits_its_knots_and_range() {
    let c = DemandCurve::Daily;
    assert_eq!(c.eval(0.0), 0.86);
    assert_eq!(c.eval(24.0), 0.86);
    assert_eq!(c.eval(19.2), 1.10);
    assert_eq!(c.eval(4.8), 0.80);
    // midpoint of the 12.0 → 14.4 segment
    assert!((c.eval(13.2) - 0.5 * (1.00 + 1.03)).abs() < 1e-15);
    for k in 0..=2400 {
        let v = c.eval(k as f64 * 0.01);
        assert!((0.8..=1.1).contains(&v));
    }
}

#[test]
fn thirty_second_day_has_2760_instances() {
    let c = two_bus();
    let p = synth_load_profile(&c, 2760, &DemandCurve::Daily, 30.0, 0.0, 1).unwrap();
    assert_eq!(p.len(), 2760);
    let span_h = (p.len() - 1) as f64 * p.granularity_s / 3600.0;
    assert!(span_h > 22.9 && span_h < 23.0);
}

#[test]
fn constant_curve_reproduces_default_load() {
    let c = case39();
    let p = synth_load_profile(&c, 7, &DemandCurve::Constant(1.0), 30.0, 0.0, 3).unwrap();
    let base = Load::default_for(&c);
    assert!(p.instances.iter().all(|l| *l == base));
}

#[test]
fn profile_scales_by_curve_and_bounded_noise() {
    let c = case39();
    let base = Load::default_for(&c);
    let p = synth_load_profile(&c, 50, &DemandCurve::Daily, 1800.0, 0.05, 9).unwrap();
    for (k, load) in p.instances.iter().enumerate() {
        let s = DemandCurve::Daily.eval(k as f64 * 0.5);
        for i in 0..base.len() {
            if base.p[i] != 0.0 {
                let r = load.p[i] / (base.p[i] * s);
                assert!((0.95 - 1e-12..=1.05 + 1e-12).contains(&r));
            }
        }
    }
    assert_eq!(p, synth_load_profile(&c, 50, &DemandCurve::Daily, 1800.0, 0.05, 9).unwrap());
    assert_ne!(p, synth_load_profile(&c, 50, &DemandCurve::Daily, 1800.0, 0.05, 10).unwrap());
}

#[test]
fn profile_rejects_bad_arguments() {
    let c = two_bus();
    assert_eq!(
        synth_load_profile(&c, 0, &DemandCurve::Daily, 30.0, 0.0, 1),
        Err(DatasetError::EmptyProfile)
    );
    assert!(matches!(
        synth_load_profile(&c, 3, &DemandCurve::Knots(vec![(0.0, 1.0), (24.0, -0.1)]), 30.0, 0.0, 1),
        Err(DatasetError::NonPositiveCurve { .. })
    ));
    assert!(matches!(
        synth_load_profile(&c, 3, &DemandCurve::Constant(0.0), 30.0, 0.0, 1),
        Err(DatasetError::NonPositiveCurve { .. })
    ));
    assert_eq!(
        synth_load_profile(&c, 3, &DemandCurve::Daily, 30.0, 1.0, 1),
        Err(DatasetError::BadJitter(1.0))
    );
}

#[test]
fn reactive_sweep_spans_the_range() {
    let c = two_bus();
    let p = reactive_sweep(&c, 1, -0.5, 0.4, 10).unwrap();
    assert_eq!(p.instances[0].q[1], -0.5);
    assert!((p.instances[9].q[1] - 0.4).abs() < 1e-15);
    assert!(p.instances.iter().all(|l| l.p[1] == PD));
}

#[test]
fn degenerate_boxes_are_drawn_at_their_value() {
    let c = two_bus();
    let mut rng = initial_point_rng(4, 2);
    let x0 = sample_initial_point(&c, INITIAL_ANGLE_RANGE, &mut rng);
    assert_eq!(x0.qg[1], 0.0);
    assert_eq!(x0.vm[0], 0.9);
    assert_eq!(x0.va[0], 0.0);
}

proptest! {
    #[test]
    fn initial_points_stay_in_their_boxes(seed in any::<u64>(), stream in 0u64..10_000) {
        let c = case39();
        let base = c.base_mva;
        let x0 = sample_initial_point(&c, INITIAL_ANGLE_RANGE, &mut initial_point_rng(seed, stream));
        for (k, g) in c.generators.iter().enumerate() {
            prop_assert!(x0.pg[k] >= g.p_min / base && x0.pg[k] <= g.p_max / base);
            prop_assert!(x0.qg[k] >= g.q_min / base && x0.qg[k] <= g.q_max / base);
        }
        for (i, b) in c.buses.iter().enumerate() {
            prop_assert!(x0.vm[i] >= b.v_min && x0.vm[i] <= b.v_max);
            prop_assert!(x0.va[i].abs() <= INITIAL_ANGLE_RANGE);
        }
        prop_assert_eq!(x0.va[c.slack()], 0.0);
        let replay = sample_initial_point(&c, INITIAL_ANGLE_RANGE, &mut initial_point_rng(seed, stream));
        prop_assert_eq!(x0, replay);
    }

    #[test]
    fn split_is_disjoint_and_exhaustive(n in 2usize..60, k in 1usize..4, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let ds = dataset((0..n).flat_map(|li| (0..k).map(move |_| stub(li, true, None))).collect());
        if let Ok((train, test)) = split_dataset(&ds, frac, seed) {
            prop_assert_eq!(train.len() + test.len(), ds.len());
            let a = train.load_indices();
            let b = test.load_indices();
            prop_assert!(a.is_disjoint(&b));
            prop_assert_eq!(a.len() + b.len(), n);
            for li in a {
                prop_assert_eq!(train.records.iter().filter(|r| r.load_index == li).count(), k);
            }
        }
    }

    #[test]
    fn balanced_mix_is_balanced_per_load(counts in proptest::collection::vec((1usize..6, 1usize..6, 0usize..3), 1..12)) {
        let mut records = Vec::new();
        for (li, &(lo, hi, junk)) in counts.iter().enumerate() {
            records.extend((0..lo).map(|_| stub(li, true, Some(BranchLabel::LowCost))));
            records.extend((0..hi).map(|_| stub(li, true, Some(BranchLabel::HighCost))));
            records.extend((0..junk).map(|_| stub(li, false, None)));
        }
        let mixed = mix_dataset(&dataset(records), 1, 1).unwrap();
        for (li, &(lo, hi, _)) in counts.iter().enumerate() {
            prop_assert_eq!(count(&mixed, li, BranchLabel::LowCost), lo.min(hi));
            prop_assert_eq!(count(&mixed, li, BranchLabel::HighCost), lo.min(hi));
        }
        prop_assert!(mixed.records.iter().all(|r| r.converged));
    }
}

#[test]
fn generated_records_are_load_major_and_complete() {
    let c = two_bus();
    let profile = reactive_sweep(&c, 1, -0.2, 0.2, 4).unwrap();
    let opts = SolverOptions::default();
    let r = rule();
    let job = LabelJob {
        seed: 11,
        k_init: 6,
        angle_range: INITIAL_ANGLE_RANGE,
        options: &opts,
        rule: Some(&r),
    };
    let ds = generate_dataset(&c, &profile, &job).unwrap();
    assert_eq!(ds.len(), 24);
    for (k, rec) in ds.records.iter().enumerate() {
        assert_eq!(rec.load_index, k / 6);
        assert_eq!(rec.load, profile.instances[k / 6]);
        let mut rng = initial_point_rng(11, k as u64);
        assert_eq!(rec.x0, sample_initial_point(&c, INITIAL_ANGLE_RANGE, &mut rng));
        if !rec.converged {
            assert_eq!(rec.label, None);
        }
    }
    assert_eq!(ds, generate_dataset(&c, &profile, &job).unwrap());
    // converged labels re-certify when the solve is replayed
    for rec in ds.converged() {
        let out = solve_opf(&c, &rec.load, &rec.x0, &opts).unwrap();
        assert_eq!(out.solution, rec.solution);
        assert!(certify(&c, &rec.load, &out, &CertificateTolerances::default()).unwrap().passed);
    }
}

#[test]
fn one_point_per_constant_load_differs_only_in_x0() {
    let c = two_bus();
    let profile = synth_load_profile(&c, 3, &DemandCurve::Constant(1.0), 30.0, 0.0, 0).unwrap();
    let opts = SolverOptions::default();
    let job = LabelJob {
        seed: 2,
        k_init: 1,
        angle_range: INITIAL_ANGLE_RANGE,
        options: &opts,
        rule: None,
    };
    let ds = generate_dataset(&c, &profile, &job).unwrap();
    assert_eq!(ds.len(), 3);
    assert!(ds.records.iter().all(|r| r.load == ds.records[0].load && r.label.is_none()));
    assert_ne!(ds.records[0].x0, ds.records[1].x0);
    let none = LabelJob { k_init: 0, ..job };
    assert_eq!(generate_dataset(&c, &profile, &none), Err(DatasetError::NoInitialPoints));
}

/// Midpoint between the analytic roots at the default load.
fn mid_gap_threshold() -> f64 {
    let qd = 0.1;
    let p = PD - PG2_MAX;
    let b = V1 * V1 - 2.0 * qd * X;
    let hi = (0.5 * (b + (b * b - 4.0 * X * X * (p * p + qd * qd)).sqrt())).sqrt();
    let lo = (V1 * V1 - X * (QG1_MAX + qd)).sqrt();
    0.5 * (hi + lo)
}

#[test]
fn branch_classification_follows_the_threshold() {
    let threshold = mid_gap_threshold();
    let r = BranchRule {
        threshold,
        ..rule()
    };
    let mut rec = stub(0, true, None);
    rec.solution.vm = vec![0.9, 0.82434];
    assert_eq!(classify_branch(&rec, &r), Some(BranchLabel::LowCost));
    rec.solution.vm[1] = 0.48477;
    assert_eq!(classify_branch(&rec, &r), Some(BranchLabel::HighCost));
    rec.solution.vm[1] = threshold;
    assert_eq!(classify_branch(&rec, &r), None);
    rec.solution.vm[1] = 0.82434;
    rec.converged = false;
    assert_eq!(classify_branch(&rec, &r), None);
}

#[test]
fn solver_labels_match_the_branches() {
    let c = two_bus();
    let load = Load::default_for(&c);
    let r = BranchRule {
        threshold: mid_gap_threshold(),
        ..rule()
    };
    let mut x0 = PrimalPoint::box_center(&c);
    for (vm2, va2, want) in [(0.95, -0.2, BranchLabel::LowCost), (0.4, -0.5, BranchLabel::HighCost)] {
        x0.vm[1] = vm2;
        x0.va[1] = va2;
        let out = solve_opf(&c, &load, &x0, &SolverOptions::default()).unwrap();
        let rec = SampleRecord {
            load_index: 0,
            load: load.clone(),
            x0: x0.clone(),
            solution: out.solution,
            objective: out.objective,
            converged: out.converged,
            iterations: out.iterations,
            label: None,
        };
        assert_eq!(classify_branch(&rec, &r), Some(want));
    }
}

#[test]
fn label_codes_round_trip() {
    for l in [None, Some(BranchLabel::LowCost), Some(BranchLabel::HighCost)] {
        assert_eq!(BranchLabel::from_code(BranchLabel::code(l)), Some(l));
    }
    assert_eq!(BranchLabel::from_code(3), None);
}

fn labelled(per_load: &[(usize, usize)]) -> Dataset {
    let mut records = Vec::new();
    for (li, &(lo, hi)) in per_load.iter().enumerate() {
        records.extend((0..lo).map(|_| stub(li, true, Some(BranchLabel::LowCost))));
        records.extend((0..hi).map(|_| stub(li, true, Some(BranchLabel::HighCost))));
    }
    dataset(records)
}

#[test]
fn nine_to_one_is_exact_per_load() {
    let ds = labelled(&[(20, 3), (9, 1), (30, 30)]);
    let m = mix_dataset(&ds, 9, 1).unwrap();
    assert_eq!((count(&m, 0, BranchLabel::LowCost), count(&m, 0, BranchLabel::HighCost)), (18, 2));
    assert_eq!((count(&m, 1, BranchLabel::LowCost), count(&m, 1, BranchLabel::HighCost)), (9, 1));
    assert_eq!((count(&m, 2, BranchLabel::LowCost), count(&m, 2, BranchLabel::HighCost)), (27, 3));
    assert_eq!(m.meta.mix_ratio, Some((9, 1)));
}

#[test]
fn single_branch_mix_keeps_one_side() {
    let ds = labelled(&[(4, 3), (0, 2)]);
    let m = mix_dataset(&ds, 1, 0).unwrap();
    assert_eq!(m.len(), 4);
    assert!(m.records.iter().all(|r| r.label == Some(BranchLabel::LowCost)));
}

#[test]
fn mixing_requires_both_branches() {
    let ds = labelled(&[(4, 3), (5, 0)]);
    assert_eq!(
        mix_dataset(&ds, 1, 1),
        Err(DatasetError::MissingBranch {
            load_index: 1,
            missing: BranchLabel::HighCost
        })
    );
    assert_eq!(mix_dataset(&ds, 0, 0), Err(DatasetError::EmptyRatio));
}

#[test]
fn hundred_loads_split_eighty_twenty() {
    let ds = dataset((0..100).flat_map(|li| (0..3).map(move |_| stub(li, true, None))).collect());
    let (train, test) = split_dataset(&ds, 0.8, 5).unwrap();
    assert_eq!(train.load_indices().len(), 80);
    assert_eq!(test.load_indices().len(), 20);
    assert_eq!((train.len(), test.len()), (240, 60));
    assert_eq!(split_dataset(&ds, 0.8, 5).unwrap(), (train, test));
    assert!(matches!(split_dataset(&ds, 0.001, 5), Err(DatasetError::EmptySplit { .. })));
    assert!(matches!(split_dataset(&ds, 1.0, 5), Err(DatasetError::EmptySplit { .. })));
}

#[test]
fn scalers_ignore_test_records() {
    let c = two_bus();
    let profile = reactive_sweep(&c, 1, -0.3, 0.3, 10).unwrap();
    let opts = SolverOptions::default();
    let job = LabelJob {
        seed: 3,
        k_init: 4,
        angle_range: INITIAL_ANGLE_RANGE,
        options: &opts,
        rule: None,
    };
    let ds = generate_dataset(&c, &profile, &job).unwrap();
    let (train, mut test) = split_dataset(&ds, 0.8, 1).unwrap();
    let s = fit_scalers(&train, 0, true);
    for r in test.records.iter_mut() {
        r.load.q[1] += 100.0;
    }
    assert_eq!(fit_scalers(&train, 0, true), s);
    assert_eq!(s.input.len(), 4 + 8);
    assert_eq!(s.output.len(), 3);
    // direct mean of the converged training targets
    let rows: Vec<&SampleRecord> = train.converged().collect();
    let mean_vm2 = rows.iter().map(|r| r.solution.vm[1]).sum::<f64>() / rows.len() as f64;
    assert!((s.output.mean[1] - mean_vm2).abs() < 1e-12);
}

#[test]
fn raw_rows_have_the_documented_layout() {
    let c = two_bus();
    let x0 = PrimalPoint {
        pg: vec![1.0, 2.0],
        qg: vec![3.0, 0.0],
        vm: vec![0.9, 0.8],
        va: vec![0.0, -0.4],
    };
    let load = Load::default_for(&c);
    assert_eq!(raw_input(&load, Some(&x0)), vec![0.0, PD, 0.0, 0.1, 1.0, 2.0, 3.0, 0.0, 0.9, 0.8, 0.0, -0.4]);
    assert_eq!(raw_input(&load, None).len(), 4);
    assert_eq!(raw_target(&x0, 0), vec![0.9, 0.8, -0.4]);
}
