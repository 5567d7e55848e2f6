mod common;

use cadec::decoder::{
    decode_classical, decode_constrained, decode_frame_recurrence, decode_soft, oracle_decode, oracle_maximize,
    soft_limit_penalty, Objective,
};
use cadec::synth::rng_from_seed;
use cadec::{
    decode, validate, ConstraintSet, DecodeConfig, DurationBounds, Error, Mode, TransitionPrior, TransitionTable,
};
use common::{random_constraints, random_probs, random_table};
use proptest::prelude::*;
use rand::Rng;

fn instance(seed: u64) -> (cadec::FrameProbMatrix, ConstraintSet) {
    let mut rng = rng_from_seed(seed);
    let frames = rng.random_range(1..=7);
    let classes = rng.random_range(1..=4);
    (
        random_probs(&mut rng, frames, classes),
        random_constraints(&mut rng, classes),
    )
}

fn score_or_neg_inf(res: cadec::Result<cadec::DecodeResult>) -> f64 {
    match res {
        Ok(r) => r.log_score,
        Err(Error::InfeasibleConstraints) => f64::NEG_INFINITY,
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn hard_decoding_matches_exhaustive_search(seed in any::<u64>()) {
        let (p, cs) = instance(seed);
        let cfg = DecodeConfig::hard();
        match (decode_constrained(&p, &cs, &cfg), oracle_decode(&p, &cs, &cfg)) {
            (Ok(d), Ok(o)) => {
                prop_assert_eq!(d.labels.labels(), o.labels.labels());
                prop_assert_eq!(d.log_score, o.log_score);
                prop_assert!(validate(d.labels.labels(), &cs).is_empty());
            }
            (Err(Error::InfeasibleConstraints), Err(Error::InfeasibleConstraints)) => {}
            (d, o) => prop_assert!(false, "decoder {:?} vs oracle {:?}", d, o),
        }
    }

    #[test]
    fn soft_decoding_matches_exhaustive_search(seed in any::<u64>(), lambda_idx in 0usize..4, wt in 0.0f64..2.0, wd in 0.0f64..2.0) {
        let (p, cs) = instance(seed);
        let cfg = DecodeConfig {
            mode: Mode::Soft,
            soft_penalty: [0.0, 0.5, 3.0, 50.0][lambda_idx],
            w_transition: wt,
            w_duration: wd,
            ..DecodeConfig::default()
        };
        let d = decode_soft(&p, &cs, &cfg).unwrap();
        let o = oracle_decode(&p, &cs, &cfg).unwrap();
        prop_assert_eq!(d.labels.labels(), o.labels.labels());
        prop_assert_eq!(d.log_score, o.log_score);
        prop_assert_eq!(d.feasible, validate(d.labels.labels(), &cs).is_empty());
    }

    #[test]
    fn classical_decoding_matches_exhaustive_search(seed in any::<u64>(), uniform in any::<bool>(), wt in 0.0f64..2.0) {
        let (p, cs) = instance(seed);
        let cfg = DecodeConfig { w_transition: wt, ..DecodeConfig::classical() };
        let prior = if uniform { TransitionPrior::Uniform } else { TransitionPrior::Table(cs.transitions()) };
        let d = decode_classical(&p, prior, &cfg).unwrap();
        let objective = Objective::classical(cs.num_classes(), prior, &cfg);
        let (labels, score) = oracle_maximize(&objective, &p).unwrap().unwrap();
        prop_assert_eq!(d.labels.labels(), &labels[..]);
        prop_assert_eq!(d.log_score, score);
    }

    #[test]
    fn reported_score_is_recomputable(seed in any::<u64>(), mode_idx in 0usize..3) {
        let (p, cs) = instance(seed);
        let cfg = DecodeConfig {
            mode: [Mode::Hard, Mode::Soft, Mode::Classical][mode_idx],
            record_trace: true,
            ..DecodeConfig::default()
        };
        if let Ok(r) = decode(&p, &cs, &cfg) {
            let objective = Objective::for_config(&cs, &cfg);
            prop_assert_eq!(objective.score(&p, r.labels.labels()), r.log_score);
            prop_assert!(r.log_score.is_finite());
            let trace = r.trace.unwrap();
            prop_assert_eq!(trace.len(), p.frames());
            prop_assert_eq!(*trace.last().unwrap(), r.log_score);
        }
    }

    #[test]
    fn relaxing_constraints_never_lowers_the_optimum(seed in any::<u64>(), extra in 0usize..4, slack in 0.0f64..0.5) {
        let (p, cs) = instance(seed);
        let classes = cs.num_classes();
        let cfg = DecodeConfig { w_transition: 0.0, ..DecodeConfig::hard() };
        let base = score_or_neg_inf(decode(&p, &cs, &cfg));

        let c = extra % classes;
        let mut start = cs.start_set().clone();
        start.insert(c);
        let mut end = cs.end_set().clone();
        end.insert(c);
        let mut rng = rng_from_seed(seed ^ 0x5eed);
        let more = random_table(&mut rng, classes, 0.5);
        let mut pairs: Vec<(usize, usize)> = cs.transitions().iter().map(|(a, b, _)| (a, b)).collect();
        pairs.extend(more.iter().map(|(a, b, _)| (a, b)));
        pairs.sort();
        pairs.dedup();
        let mut out_degree = vec![0usize; classes];
        for &(a, _) in &pairs {
            out_degree[a] += 1;
        }
        let table = TransitionTable::new(classes, pairs.iter().map(|&(a, b)| (a, b, 1.0 / out_degree[a] as f64))).unwrap();

        let relaxed = [
            ConstraintSet::new(classes, start, cs.end_set().clone(), cs.transitions().clone(), cs.durations().clone()).unwrap(),
            ConstraintSet::new(classes, cs.start_set().clone(), end, cs.transitions().clone(), cs.durations().clone()).unwrap(),
            cs.with_slack(slack),
            cs.with_transitions(table).unwrap(),
        ];
        for r in &relaxed {
            prop_assert!(score_or_neg_inf(decode(&p, r, &cfg)) >= base);
        }
    }

    #[test]
    fn frame_recurrence_is_sound_but_not_always_optimal(seed in any::<u64>()) {
        let (p, cs) = instance(seed);
        let cfg = DecodeConfig::hard();
        let exact = score_or_neg_inf(decode_constrained(&p, &cs, &cfg));
        match decode_frame_recurrence(&p, &cs, &cfg) {
            Ok(r) => {
                prop_assert!(validate(r.labels.labels(), &cs).is_empty());
                prop_assert!(r.log_score <= exact);
            }
            Err(Error::InfeasibleConstraints) => {}
            Err(e) => prop_assert!(false, "{}", e),
        }
    }

    #[test]
    fn frame_recurrence_is_exact_without_duration_bounds(seed in any::<u64>()) {
        let (p, cs) = instance(seed);
        let cs = ConstraintSet::new(
            cs.num_classes(),
            cs.start_set().clone(),
            cs.end_set().clone(),
            cs.transitions().clone(),
            DurationBounds::permissive(cs.num_classes()),
        )
        .unwrap();
        let cfg = DecodeConfig::hard();
        let exact = score_or_neg_inf(decode_constrained(&p, &cs, &cfg));
        let frame = score_or_neg_inf(decode_frame_recurrence(&p, &cs, &cfg));
        prop_assert!(frame == exact || (frame - exact).abs() <= 1e-9 * exact.abs());
    }

    #[test]
    fn permissive_constraints_reduce_to_classical(seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let frames = rng.random_range(1..=60);
        let classes = rng.random_range(1..=8);
        let p = random_probs(&mut rng, frames, classes);
        let cs = ConstraintSet::permissive(classes);
        let cfg = DecodeConfig::hard();
        let constrained = decode_constrained(&p, &cs, &cfg).unwrap();
        let classical = decode_classical(&p, TransitionPrior::Uniform, &cfg).unwrap();
        prop_assert!((constrained.log_score - classical.log_score).abs() <= 1e-9 * classical.log_score.abs());
    }

    #[test]
    fn large_penalty_soft_decoding_is_feasible(seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let frames = rng.random_range(2..=40);
        let classes = rng.random_range(2..=5);
        let p = random_probs(&mut rng, frames, classes);
        let cs = random_constraints(&mut rng, classes);
        if let Ok(hard) = decode_constrained(&p, &cs, &DecodeConfig::hard()) {
            let cfg = DecodeConfig::soft(soft_limit_penalty(&p, &cs, 1e-10));
            let soft = decode_soft(&p, &cs, &cfg).unwrap();
            prop_assert!(validate(soft.labels.labels(), &cs).is_empty());
            prop_assert!(soft.feasible);
            prop_assert_eq!(soft.labels.labels(), hard.labels.labels());
        }
    }
}

#[test]
fn dp_agrees_with_oracle_on_longer_sequences() {
    // T = 11 with two classes still fits the exhaustive limit
    for seed in 0..40 {
        let mut rng = rng_from_seed(1000 + seed);
        let p = random_probs(&mut rng, 11, 2);
        let cs = random_constraints(&mut rng, 2);
        let cfg = DecodeConfig::hard();
        let d = decode_constrained(&p, &cs, &cfg).map(|r| r.labels.into_labels());
        let o = oracle_decode(&p, &cs, &cfg).map(|r| r.labels.into_labels());
        match (d, o) {
            (Ok(a), Ok(b)) => assert_eq!(a, b, "seed {seed}"),
            (Err(Error::InfeasibleConstraints), Err(Error::InfeasibleConstraints)) => {}
            (a, b) => panic!("seed {seed}: {a:?} vs {b:?}"),
        }
    }
}

#[test]
fn oracle_refuses_large_instances() {
    let mut rng = rng_from_seed(0);
    let p = random_probs(&mut rng, 30, 4);
    let cs = ConstraintSet::permissive(4);
    assert!(matches!(
        oracle_decode(&p, &cs, &DecodeConfig::hard()),
        Err(Error::InstanceTooLarge { .. })
    ));
}

#[test]
fn zero_length_bound_class_is_never_entered() {
    use cadec::DurationBound;
    // class 1 fits the emissions best but has d_max = 0
    let p = cadec::FrameProbMatrix::from_rows(&[vec![0.1, 0.9], vec![0.1, 0.9], vec![0.1, 0.9]]).unwrap();
    let table = TransitionTable::new(2, [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
    let durations = DurationBounds::new(vec![
        DurationBound::PERMISSIVE,
        DurationBound {
            d_min: 0.0,
            d_max: 0.0,
            observed: true,
        },
    ])
    .unwrap();
    let cs = ConstraintSet::new(2, [0, 1].into(), [0, 1].into(), table, durations).unwrap();
    let cfg = DecodeConfig::hard();
    assert_eq!(
        decode_frame_recurrence(&p, &cs, &cfg).unwrap().labels.labels(),
        &[0, 0, 0]
    );
    assert_eq!(decode_constrained(&p, &cs, &cfg).unwrap().labels.labels(), &[0, 0, 0]);
}
