//! Invariants checked over randomly generated inputs.

use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};
use tevent_core::detection::{dlik, ClipPolicy, DifferenceDetector, LikelihoodDetector};
use tevent_core::evaluation::{
    false_alarm_decomposed, hit_trial_maxima, quiescent_detection_values, DynDetector, HitRateTrialSpec,
    IntervalState, IntervalStateProbs, SampleSource,
};
use tevent_core::rng::{stream_rng, Purpose};
use tevent_core::scenarios::{pyramid_template, ImageSource, PyramidSpec, UnivariateSource};
use tevent_core::scoring::{box_score, fit_fisher, BayesScorer, MixtureSpec, Ridge, Scorer};
use tevent_core::{Frame, RocCurve, WindowConfig};

fn random_boxes(n: usize, shift: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, Purpose::Scratch, 0);
    (0..n)
        .map(|_| {
            (0..4)
                .map(|i| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * (1.0 + 0.3 * i as f64) + if i % 2 == 0 { shift } else { 0.0 }
                })
                .collect()
        })
        .collect()
}

fn to_frames(boxes: &[Vec<f64>], a: f64, b: f64) -> Vec<Frame> {
    boxes
        .iter()
        .map(|v| Frame::square(2, v.iter().map(|x| a * x + b).collect()).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fisher_ranking_survives_affine_rescaling(a in 0.1f64..10.0, b in -5.0f64..5.0, seed in 0u64..1000) {
        let event = random_boxes(300, 1.0, seed);
        let quiet = random_boxes(300, 0.0, seed + 1);
        let probe = random_boxes(40, 0.5, seed + 2);
        let base = fit_fisher(&to_frames(&event, 1.0, 0.0), &to_frames(&quiet, 1.0, 0.0), Ridge::Fixed(0.0)).unwrap();
        let scaled = fit_fisher(&to_frames(&event, a, b), &to_frames(&quiet, a, b), Ridge::Fixed(0.0)).unwrap();
        let s0: Vec<f64> = to_frames(&probe, 1.0, 0.0).iter().map(|f| box_score(&base, f).unwrap()).collect();
        let s1: Vec<f64> = to_frames(&probe, a, b).iter().map(|f| box_score(&scaled, f).unwrap()).collect();
        let spread = s0.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..s0.len() {
            for j in 0..i {
                let d0 = s0[i] - s0[j];
                if d0.abs() > 1e-6 * spread {
                    prop_assert_eq!(d0 > 0.0, s1[i] > s1[j], "pair ({}, {})", i, j);
                }
            }
        }
    }

    #[test]
    fn decomposed_false_alarm_is_linear(
        cond in prop::array::uniform4(0.0f64..1.0),
        k in 0usize..4,
        target in 0.0f64..1.0,
        n in 25usize..60,
        u in 25usize..60,
    ) {
        let cfg = WindowConfig::new(1, 20, 1).unwrap();
        let probs = tevent_core::evaluation::interval_state_probs(n, u, &cfg).unwrap();
        let mut moved = cond;
        moved[k] = target;
        let t = target - cond[k];
        let lhs = false_alarm_decomposed(&moved, &probs).unwrap() - false_alarm_decomposed(&cond, &probs).unwrap();
        prop_assert!((lhs - t * probs.get(IntervalState::ALL[k])).abs() < 1e-12);
        let sum = IntervalState::ALL.iter().map(|&s| probs.get(s)).sum::<f64>();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        let total = false_alarm_decomposed(&cond, &probs).unwrap();
        let manual: f64 = IntervalState::ALL.iter().map(|&s| cond[s.index()] * probs.get(s)).sum();
        prop_assert!((total - manual).abs() < 1e-12);
    }

    #[test]
    fn likelihood_roc_is_invariant_to_prior(pi_a in 0.05f64..0.95, pi_b in 0.05f64..0.95, seed in 0u64..1000) {
        let cfg = WindowConfig::new(6, 6, 4).unwrap();
        let clip = ClipPolicy::new(1e-300).unwrap();
        let mut rng = stream_rng(seed, Purpose::Scratch, 0);
        let xs: Vec<f64> = (0..400)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (z * 0.8).clamp(-2.0, 2.0)
            })
            .collect();
        let stream = |pi1: f64| {
            let spec = MixtureSpec::new(0.9, 0.19f64.sqrt(), pi1).unwrap();
            let scores = BayesScorer(spec).score_stream(&xs).unwrap();
            dlik(&scores, &cfg, &clip).unwrap().into_values()
        };
        let (da, db) = (stream(pi_a), stream(pi_b));
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let shift = cfg.current as f64 * (logit(pi_b) - logit(pi_a));
        for (a, b) in da.iter().zip(&db) {
            prop_assert!((a + shift - b).abs() < 1e-8);
        }
        // Same ROC point set: quiescent = first half, event maxima = second half.
        let (qa, ea) = da.split_at(da.len() / 2);
        let (qb, eb) = db.split_at(db.len() / 2);
        let mut sorted = da.clone();
        sorted.sort_by(f64::total_cmp);
        let taus: Vec<f64> = sorted
            .windows(2)
            .filter(|w| w[1] - w[0] > 1e-6)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect();
        prop_assume!(!taus.is_empty());
        let shifted: Vec<f64> = taus.iter().map(|t| t + shift).collect();
        let ra = RocCurve::from_samples(qa, ea, &taus).unwrap();
        let rb = RocCurve::from_samples(qb, eb, &shifted).unwrap();
        for (pa, pb) in ra.points().iter().zip(rb.points()) {
            prop_assert_eq!(pa.false_alarm_rate, pb.false_alarm_rate);
            prop_assert_eq!(pa.hit_rate, pb.hit_rate);
        }
    }

    #[test]
    fn univariate_generation_is_deterministic(seed in any::<u64>(), index in 0u64..1000) {
        let source = UnivariateSource { spec: MixtureSpec::default() };
        let draw = |s: u64| {
            let mut rng = stream_rng(s, Purpose::Timeline, index);
            let mut v = source.quiescent(32, &mut rng).unwrap();
            v.extend(source.event(32, &mut rng).unwrap());
            v
        };
        prop_assert_eq!(draw(seed), draw(seed));
        prop_assert_ne!(draw(seed), draw(seed ^ 1));
    }
}

#[test]
fn image_generation_is_deterministic() {
    let template = pyramid_template(&PyramidSpec {
        size: 5,
        mean_intensity: 3.0,
        inverted: false,
    })
    .unwrap();
    let source = ImageSource::new(20, template, None).unwrap();
    let draw = |seed: u64| {
        let mut rng = stream_rng(seed, Purpose::Timeline, 0);
        let mut frames = source.quiescent(3, &mut rng).unwrap();
        frames.extend(source.event(3, &mut rng).unwrap());
        frames
    };
    assert_eq!(draw(4), draw(4));
    assert_ne!(draw(4), draw(5));
}

#[test]
fn simulations_are_reproducible_from_the_seed() {
    let spec = MixtureSpec::default();
    let source = UnivariateSource { spec };
    let cfg = WindowConfig::new(5, 5, 5).unwrap();
    let ddif = DifferenceDetector::new(BayesScorer(spec), cfg);
    let dlik = LikelihoodDetector::new(BayesScorer(spec), cfg, ClipPolicy::default()).unwrap();
    let dets: [DynDetector<'_, f64>; 2] = [&ddif, &dlik];
    let trial = HitRateTrialSpec {
        trials: 500,
        seed: 12,
        window: cfg,
    };
    assert_eq!(
        hit_trial_maxima(&trial, &source, &dets).unwrap(),
        hit_trial_maxima(&trial, &source, &dets).unwrap()
    );
    // Chunked generation: 3 chunks, the last partial.
    let a = quiescent_detection_values(&source, &dets, 9000, 12).unwrap();
    assert_eq!(a, quiescent_detection_values(&source, &dets, 9000, 12).unwrap());
    assert_eq!(a[0].len(), 9000);
    assert_ne!(a, quiescent_detection_values(&source, &dets, 9000, 13).unwrap());
}

#[test]
fn state_probabilities_reject_degenerate_inputs() {
    assert!(IntervalStateProbs::new([0.5, 0.5, 0.1, 0.0]).is_err());
    let cfg = WindowConfig::new(1, 10, 1).unwrap();
    assert!(tevent_core::evaluation::interval_state_probs(11, 20, &cfg).is_err());
}
