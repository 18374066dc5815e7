//! Runs one experiment configuration and writes its report to disk.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;
use tevent_core::detection::{
    monkey_roc, ClipPolicy, DifferenceDetector, KolmogorovDetector, LikelihoodDetector, PixelMaxDiffDetector,
    StreamDetector,
};
use tevent_core::evaluation::{
    hit_trial_maxima, independent_trial_maxima, interval_state_probs, interval_values, quiescent_detection_values,
    DecomposedFalseAlarm, DynDetector, HitRateTrialSpec, IntervalState, IntervalStateProbs, SampleSource,
};
use tevent_core::io::{write_detection_csv, write_frames_f32, write_json, write_pgm, write_roc_csv, RocDocument};
use tevent_core::rng::{stream_rng, Purpose};
use tevent_core::scenarios::{pyramid_template, train_box_classifier, ImageSource, PyramidSpec, UnivariateSource};
use tevent_core::scoring::{BayesScorer, BoxClassifier};
use tevent_core::types::{threshold_grid, ExceedanceCounter};
use tevent_core::RocCurve;

use crate::config::{Diagnostic, DiagnosticKind, DetectorKind, ExperimentConfig, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration:\n{}", list(.0))]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Core(#[from] tevent_core::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn list(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

impl RunError {
    /// Whether the configuration was rejected because of a detector/scenario mismatch.
    pub fn is_incompatibility(&self) -> bool {
        matches!(self, RunError::Invalid(d) if d.iter().any(|d| d.kind == DiagnosticKind::Incompatible))
    }
}

/// ROC curve of one requested detector.
#[derive(Debug, Clone)]
pub struct DetectorResult {
    pub detector: DetectorKind,
    pub curve: RocCurve,
    /// Number of events behind each hit rate (0 for closed-form curves).
    pub hit_trials: usize,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub results: Vec<DetectorResult>,
    /// Wall-clock seconds per stage.
    pub timings: Vec<(&'static str, f64)>,
    pub classifier: Option<BoxClassifier>,
    pub interval_probs: Option<IntervalStateProbs>,
    pub output_dir: PathBuf,
}

impl Report {
    pub fn curve(&self, detector: DetectorKind) -> Option<&RocCurve> {
        self.results.iter().find(|r| r.detector == detector).map(|r| &r.curve)
    }
}

struct Stopwatch(Vec<(&'static str, f64)>);

impl Stopwatch {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push((stage, start.elapsed().as_secs_f64()));
        out
    }
}

/// Validates `config`, runs it, and writes every output file under its output directory.
pub fn run(config: &ExperimentConfig) -> Result<Report, RunError> {
    let diagnostics = config.validate();
    if !diagnostics.is_empty() {
        return Err(RunError::Invalid(diagnostics));
    }
    let start = Instant::now();
    let mut clock = Stopwatch(Vec::new());
    let (results, classifier, interval_probs) = match config.scenario {
        Scenario::Univariate => (run_univariate(config, &mut clock)?, None, None),
        Scenario::Image1 | Scenario::Image2 => {
            let (results, clf, probs) = run_image(config, &mut clock)?;
            (results, Some(clf), probs)
        }
    };
    clock.0.push(("total", start.elapsed().as_secs_f64()));
    let report = Report {
        results,
        timings: clock.0,
        classifier,
        interval_probs,
        output_dir: config.output_dir.clone(),
    };
    write_report(config, &report)?;
    if config.export_samples {
        export_samples(config, report.classifier.as_ref())?;
    }
    Ok(report)
}

fn trial_spec(config: &ExperimentConfig) -> HitRateTrialSpec {
    HitRateTrialSpec {
        trials: config.monte_carlo.hit_trials,
        seed: config.seed,
        window: config.window,
    }
}

fn monkey_curve(config: &ExperimentConfig) -> tevent_core::Result<RocCurve> {
    let n = config.monte_carlo.roc_points;
    let alphas: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    monkey_roc(&alphas, config.window.tolerance)
}

fn grid<'a>(config: &ExperimentConfig, values: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
    let all: Vec<f64> = values.into_iter().flatten().copied().collect();
    threshold_grid(&all, config.monte_carlo.roc_points)
}

/// Detectors evaluated by simulation, in evaluation order, with the requested
/// kinds each one serves.
struct Simulated<'a, T> {
    detectors: Vec<DynDetector<'a, T>>,
    kinds: Vec<DetectorKind>,
}

impl<'a, T> Simulated<'a, T> {
    fn new() -> Self {
        Self {
            detectors: Vec::new(),
            kinds: Vec::new(),
        }
    }

    fn push(&mut self, kind: DetectorKind, detector: DynDetector<'a, T>) {
        if !self.kinds.contains(&kind) {
            self.kinds.push(kind);
            self.detectors.push(detector);
        }
    }

    fn index(&self, kind: DetectorKind) -> usize {
        self.kinds.iter().position(|k| *k == kind).expect("detector was simulated")
    }
}

fn run_univariate(config: &ExperimentConfig, clock: &mut Stopwatch) -> Result<Vec<DetectorResult>, RunError> {
    let spec = config.mixture.spec()?;
    let w = config.window;
    let source = UnivariateSource { spec };
    let dlik = LikelihoodDetector::new(BayesScorer(spec), w, ClipPolicy::new(config.clip_epsilon)?)?;
    let ddif = DifferenceDetector::new(BayesScorer(spec), w);
    let kolmogorov = KolmogorovDetector { current: w.current };

    let mut sim = Simulated::new();
    for kind in &config.detectors {
        match kind {
            DetectorKind::TargetedDlik => sim.push(*kind, &dlik),
            DetectorKind::TargetedDdif => sim.push(*kind, &ddif),
            // The resampled variant shares the false alarm stream of the plain one.
            DetectorKind::Kolmogorov | DetectorKind::IndependentKolmogorov => {
                sim.push(DetectorKind::Kolmogorov, &kolmogorov)
            }
            DetectorKind::PixelMaxdiff | DetectorKind::Monkey => {}
        }
    }
    let spec = trial_spec(config);
    let (quiet, hits) = if sim.detectors.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        let quiet = clock.time("false_alarm", || {
            quiescent_detection_values(&source, &sim.detectors, config.monte_carlo.false_alarm_steps, config.seed)
        })?;
        let hits = clock.time("hit_rate", || hit_trial_maxima(&spec, &source, &sim.detectors))?;
        (quiet, hits)
    };
    let independent = if config.detectors.contains(&DetectorKind::IndependentKolmogorov) {
        let d: DynDetector<'_, f64> = &kolmogorov;
        let mut m = clock.time("independent_hit_rate", || independent_trial_maxima(&spec, &source, &[d]))?;
        m.pop()
    } else {
        None
    };

    config
        .detectors
        .iter()
        .map(|&kind| {
            let curve = match kind {
                DetectorKind::Monkey => return Ok(closed_form(config, kind)?),
                DetectorKind::IndependentKolmogorov => {
                    let q = &quiet[sim.index(DetectorKind::Kolmogorov)];
                    let h = independent.as_deref().expect("independent maxima computed");
                    RocCurve::from_samples(q, h, &grid(config, [q.as_slice(), h]))?
                }
                _ => {
                    let i = sim.index(kind);
                    RocCurve::from_samples(&quiet[i], &hits[i], &grid(config, [&quiet[i][..], &hits[i][..]]))?
                }
            };
            Ok(DetectorResult {
                detector: kind,
                curve,
                hit_trials: config.monte_carlo.hit_trials,
            })
        })
        .collect()
}

fn closed_form(config: &ExperimentConfig, kind: DetectorKind) -> tevent_core::Result<DetectorResult> {
    Ok(DetectorResult {
        detector: kind,
        curve: monkey_curve(config)?,
        hit_trials: 0,
    })
}

fn image_source(config: &ExperimentConfig) -> tevent_core::Result<ImageSource> {
    let img = &config.image;
    let interesting = pyramid_template(&PyramidSpec {
        size: img.box_size,
        mean_intensity: img.interesting_intensity,
        inverted: false,
    })?;
    let uninteresting = if config.scenario == Scenario::Image2 {
        Some(pyramid_template(&PyramidSpec {
            size: img.box_size,
            mean_intensity: img.uninteresting_intensity,
            inverted: true,
        })?)
    } else {
        None
    };
    ImageSource::new(img.frame_size, interesting, uninteresting)
}

type ImageOutcome = (Vec<DetectorResult>, BoxClassifier, Option<IntervalStateProbs>);

fn run_image(config: &ExperimentConfig, clock: &mut Stopwatch) -> Result<ImageOutcome, RunError> {
    let w = config.window;
    let source = image_source(config)?;
    let classifier = clock.time("training", || {
        train_box_classifier(&source, &config.image.training.spec(), config.seed)
    })?;
    let targeted = DifferenceDetector::new(classifier.clone(), w);
    let pixel = PixelMaxDiffDetector { window: w };

    let mut sim = Simulated::new();
    for kind in &config.detectors {
        match kind {
            DetectorKind::TargetedDdif => sim.push(*kind, &targeted),
            DetectorKind::PixelMaxdiff => sim.push(*kind, &pixel),
            _ => {}
        }
    }
    let mut probs = None;
    let mut rates: Vec<Box<dyn Fn(f64) -> f64>> = Vec::new();
    let mut observed: Vec<Vec<f64>> = Vec::new();
    let mut hits = Vec::new();
    if !sim.detectors.is_empty() {
        let quiet = clock.time("false_alarm", || {
            quiescent_detection_values(&source, &sim.detectors, config.monte_carlo.false_alarm_steps, config.seed)
        })?;
        hits = clock.time("hit_rate", || hit_trial_maxima(&trial_spec(config), &source, &sim.detectors))?;
        if config.scenario == Scenario::Image2 {
            let (n, u) = config.timeline.resolve(&w);
            let p = interval_state_probs(n, u, &w)?;
            let per_state = clock.time("interval_states", || {
                boundary_values(config, &source, &sim.detectors)
            })?;
            for (d, q) in quiet.into_iter().enumerate() {
                let [a2, a3, a4] = per_state.each_ref().map(|s| s[d].clone());
                let fa = DecomposedFalseAlarm::new(p, [vec![q], a2, a3, a4])?;
                observed.push(fa.observed().collect());
                rates.push(Box::new(move |tau| fa.rate(tau)));
            }
            probs = Some(p);
        } else {
            for q in quiet {
                let counter = ExceedanceCounter::new(&q)?;
                observed.push(q);
                rates.push(Box::new(move |tau| counter.rate_above(tau)));
            }
        }
    }

    let results = config
        .detectors
        .iter()
        .map(|&kind| {
            if kind == DetectorKind::Monkey {
                return Ok(closed_form(config, kind)?);
            }
            let i = sim.index(kind);
            let h = ExceedanceCounter::new(&hits[i])?;
            let taus = grid(config, [&observed[i][..], &hits[i][..]]);
            let curve = RocCurve::from_rates(&taus, |tau| (rates[i](tau), h.rate_above(tau)))?;
            Ok(DetectorResult {
                detector: kind,
                curve,
                hit_trials: config.monte_carlo.hit_trials,
            })
        })
        .collect::<Result<_, RunError>>()?;
    Ok((results, classifier, probs))
}

/// Detection values for the boundary states A2, A3 and the all-object state A4,
/// as `[state][detector][position][trial]`.
fn boundary_values(
    config: &ExperimentConfig,
    source: &ImageSource,
    detectors: &[DynDetector<'_, tevent_core::Frame>],
) -> tevent_core::Result<[Vec<Vec<Vec<f64>>>; 3]> {
    let w = &config.window;
    let trials = config.monte_carlo.boundary_trials;
    // A4 gets as many intervals as a boundary state has in total.
    let a4_trials = trials * (w.span() - 1).max(1);
    let a2 = interval_values(IntervalState::A2, source, detectors, w, trials, config.seed)?;
    let a3 = interval_values(IntervalState::A3, source, detectors, w, trials, config.seed)?;
    let a4 = interval_values(IntervalState::A4, source, detectors, w, a4_trials, config.seed)?;
    Ok([a2, a3, a4])
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_report(config: &ExperimentConfig, report: &Report) -> Result<(), RunError> {
    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;
    write_json(&out.join("config.json"), config)?;
    for r in &report.results {
        let dir = out.join(r.detector.name());
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        write_roc_csv(&dir.join("roc.csv"), &r.curve)?;
        let doc = RocDocument {
            detector: r.detector.name(),
            seed: config.seed,
            config,
            points: r.curve.points(),
        };
        write_json(&dir.join("roc.json"), &doc)?;
    }
    if let Some(clf) = &report.classifier {
        let path = out.join("classifier.json");
        fs::write(&path, clf.to_json()?).map_err(io_err(&path))?;
    }
    let summary = json!({
        "name": config.name,
        "scenario": config.scenario,
        "seed": config.seed,
        "rng": "chacha8, one stream per (seed, stage, replicate)",
        "window": config.window,
        "monte_carlo": config.monte_carlo,
        "interval_state_probs": report.interval_probs.map(|p| p.p),
        "classifier": report.classifier.as_ref().map(|c| json!({"lambda": c.lambda(), "bias": c.bias()})),
        "detectors": report.results.iter().map(|r| json!({
            "detector": r.detector,
            "roc": format!("{}/roc.csv", r.detector.name()),
            "points": r.curve.points().len(),
            "hit_trials": r.hit_trials,
        })).collect::<Vec<_>>(),
        "runtime_secs": report.timings.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
    });
    write_json(&out.join("summary.json"), &summary)?;
    if config.plot_script {
        let path = out.join("plot.gp");
        fs::write(&path, gnuplot_script(config, report)).map_err(io_err(&path))?;
    }
    Ok(())
}

fn gnuplot_script(config: &ExperimentConfig, report: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# ROC curves for {}; run with: gnuplot -p plot.gp", config.name);
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set xlabel 'false alarm rate'");
    let _ = writeln!(s, "set ylabel 'hit rate'");
    let _ = writeln!(s, "set xrange [0:1]\nset yrange [0:1]\nset key bottom right");
    let plots: Vec<String> = report
        .results
        .iter()
        .map(|r| {
            let style = if r.detector == DetectorKind::Monkey { "dashtype 2" } else { "linewidth 2" };
            format!(
                "'{name}/roc.csv' skip 1 using 2:3 with lines {style} title '{name}'",
                name = r.detector.name()
            )
        })
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}

/// Sample data for inspection: a quiescent-then-event detection stream for
/// univariate runs, a quiescent and an event frame for image runs.
fn export_samples(config: &ExperimentConfig, classifier: Option<&BoxClassifier>) -> Result<(), RunError> {
    let dir = config.output_dir.join("samples");
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut rng = stream_rng(config.seed, Purpose::Scratch, 0);
    match config.scenario {
        Scenario::Univariate => {
            let spec = config.mixture.spec()?;
            let source = UnivariateSource { spec };
            let mut samples = source.quiescent(500, &mut rng)?;
            samples.extend(source.event(500, &mut rng)?);
            let dlik =
                LikelihoodDetector::new(BayesScorer(spec), config.window, ClipPolicy::new(config.clip_epsilon)?)?;
            let stream = dlik.detect(&samples, &mut rng)?;
            write_detection_csv(&dir.join("targeted-dlik.csv"), &stream)?;
        }
        Scenario::Image1 | Scenario::Image2 => {
            let source = image_source(config)?;
            let quiet = source.quiescent(1, &mut rng)?.remove(0);
            let event = source.event(1, &mut rng)?.remove(0);
            write_pgm(&dir.join("quiescent.pgm"), &quiet)?;
            write_pgm(&dir.join("event.pgm"), &event)?;
            let mut frames = vec![quiet, event];
            if source.uninteresting.is_some() {
                use tevent_core::evaluation::NuisanceSource;
                let nuisance = source.uninteresting(1, &mut rng)?.remove(0);
                write_pgm(&dir.join("uninteresting.pgm"), &nuisance)?;
                frames.push(nuisance);
            }
            let names = &["quiescent", "event", "uninteresting"][..frames.len()];
            let meta = json!({
                "seed": config.seed,
                "image": config.image,
                "frames": names,
                "classifier_lambda": classifier.map(|c| c.lambda()),
            });
            write_frames_f32(&dir, "frames", &frames, &meta)?;
        }
    }
    Ok(())
}
