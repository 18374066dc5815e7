//! Event-oriented ROC estimation.
//!
//! The false alarm rate is the fraction of quiescent time steps at which the
//! detection stream exceeds the threshold. An event is hit when the detection
//! stream exceeds the threshold at least once within the `W` steps starting at
//! its onset.
//!
//! Monte Carlo replicates draw from generators keyed by `(seed, replicate)`
//! and are reduced in replicate order, so results are reproducible whatever
//! the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::StreamDetector;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, sub_rng, Purpose, SimRng};
use crate::types::{DetectionStream, ExceedanceCounter, RocCurve, WindowConfig};

/// Draws runs of quiescent and event samples.
///
/// Samples within one run may share state (an object keeps its position for
/// the whole run); separate calls are independent.
pub trait SampleSource: Sync {
    type Sample: Send + Sync;

    fn quiescent(&self, len: usize, rng: &mut SimRng) -> Result<Vec<Self::Sample>>;

    fn event(&self, len: usize, rng: &mut SimRng) -> Result<Vec<Self::Sample>>;
}

/// A source that can also produce uninteresting events: changes in the stream
/// that should not raise an alarm.
pub trait NuisanceSource: SampleSource {
    fn uninteresting(&self, len: usize, rng: &mut SimRng) -> Result<Vec<Self::Sample>>;
}

pub type DynDetector<'a, S> = &'a dyn StreamDetector<Sample = S>;

/// Protocol parameters for hit-rate estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitRateTrialSpec {
    pub trials: usize,
    pub seed: u64,
    pub window: WindowConfig,
}

impl HitRateTrialSpec {
    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        if self.trials == 0 {
            return Err(Error::invalid("trials", "need at least one trial"));
        }
        Ok(())
    }
}

fn max_lookback<S: Sync>(detectors: &[DynDetector<'_, S>]) -> Result<usize> {
    detectors
        .iter()
        .map(|d| d.lookback())
        .max()
        .ok_or(Error::Empty("no detectors"))
}

fn concat<T>(mut a: Vec<T>, b: Vec<T>) -> Vec<T> {
    a.extend(b);
    a
}

/// Fraction of defined time steps with `d_T > tau`.
pub fn false_alarm_rate(d: &DetectionStream, tau: f64) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::Empty("detection stream has no valid index"));
    }
    let above = d.values().iter().filter(|&&v| v > tau).count();
    Ok(above as f64 / d.len() as f64)
}

const QUIESCENT_CHUNK: usize = 4096;

/// Detection values over `steps` quiescent time steps, one vector per detector.
///
/// The stream is generated in independent chunks; each chunk is warmed up with
/// enough samples that every reported value reads a full window.
pub fn quiescent_detection_values<S: SampleSource>(
    source: &S,
    detectors: &[DynDetector<'_, S::Sample>],
    steps: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let lookback = max_lookback(detectors)?;
    if steps == 0 {
        return Err(Error::invalid("steps", "need at least one quiescent step"));
    }
    let chunks = steps.div_ceil(QUIESCENT_CHUNK);
    let per_chunk: Vec<Vec<Vec<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let len = QUIESCENT_CHUNK.min(steps - chunk * QUIESCENT_CHUNK);
            let mut rng = stream_rng(seed, Purpose::QuiescentStream, chunk as u64);
            let samples = source.quiescent(len + lookback - 1, &mut rng)?;
            detectors
                .iter()
                .map(|d| {
                    let own = &samples[lookback - d.lookback()..];
                    let stream = d.detect(own, &mut rng)?;
                    debug_assert_eq!(stream.len(), len);
                    Ok(stream.into_values())
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::with_capacity(steps); detectors.len()];
    for chunk in per_chunk {
        for (acc, values) in out.iter_mut().zip(chunk) {
            acc.extend(values);
        }
    }
    Ok(out)
}

/// Single-detector convenience wrapper around [`quiescent_detection_values`].
pub fn quiescent_detection_stream<S: SampleSource>(
    source: &S,
    detector: DynDetector<'_, S::Sample>,
    steps: usize,
    seed: u64,
) -> Result<DetectionStream> {
    let values = quiescent_detection_values(source, &[detector], steps, seed)?
        .pop()
        .unwrap_or_default();
    Ok(DetectionStream::new(values, detector.lookback() - 1))
}

/// Per-trial maximum of `d_T, ..., d_{T+W-1}` for an event starting at `T`.
///
/// Each trial draws the detector's lookback of quiescent samples before the
/// onset (the largest lookback among `detectors`), then `W` event samples.
/// All detectors see the same samples.
pub fn hit_trial_maxima<S: SampleSource>(
    spec: &HitRateTrialSpec,
    source: &S,
    detectors: &[DynDetector<'_, S::Sample>],
) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let lookback = max_lookback(detectors)?;
    let w = spec.window.tolerance;
    let per_trial: Vec<Vec<f64>> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(spec.seed, Purpose::HitTrial, trial as u64);
            let pre = source.quiescent(lookback, &mut rng)?;
            let samples = concat(pre, source.event(w, &mut rng)?);
            detectors
                .iter()
                .map(|d| {
                    let own = &samples[lookback - d.lookback()..];
                    let stream = d.detect(own, &mut rng)?;
                    // Defined from lookback - 1; onset sits one step later.
                    Ok(stream.values()[1..=w].iter().copied().fold(f64::NEG_INFINITY, f64::max))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(transpose(per_trial, detectors.len()))
}

/// Like [`hit_trial_maxima`], but every one of the `W` detection values in a
/// trial is computed from freshly drawn samples, removing the autocorrelation
/// of the detection stream.
pub fn independent_trial_maxima<S: SampleSource>(
    spec: &HitRateTrialSpec,
    source: &S,
    detectors: &[DynDetector<'_, S::Sample>],
) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let lookback = max_lookback(detectors)?;
    let w = spec.window.tolerance;
    let per_trial: Vec<Vec<f64>> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let mut maxima = vec![f64::NEG_INFINITY; detectors.len()];
            for k in 0..w {
                // d_{T+k} reads k + 1 event samples (at most `lookback` of them).
                let n_event = (k + 1).min(lookback);
                let mut rng = sub_rng(spec.seed, Purpose::IndependentTrial, k as u64, trial as u64);
                let pre = source.quiescent(lookback - n_event, &mut rng)?;
                let samples = concat(pre, source.event(n_event, &mut rng)?);
                for (m, d) in maxima.iter_mut().zip(detectors) {
                    let own = &samples[lookback - d.lookback()..];
                    let stream = d.detect(own, &mut rng)?;
                    *m = m.max(*stream.values().last().expect("one value per window"));
                }
            }
            Ok(maxima)
        })
        .collect::<Result<_>>()?;
    Ok(transpose(per_trial, detectors.len()))
}

fn transpose(rows: Vec<Vec<f64>>, width: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(rows.len()); width];
    for row in rows {
        for (col, v) in out.iter_mut().zip(row) {
            col.push(v);
        }
    }
    out
}

fn exceed_fraction(values: &[f64], tau: f64) -> f64 {
    values.iter().filter(|&&v| v > tau).count() as f64 / values.len() as f64
}

/// Fraction of events detected within the tolerance window.
pub fn hit_rate_mc<S: SampleSource>(
    spec: &HitRateTrialSpec,
    source: &S,
    detector: DynDetector<'_, S::Sample>,
    tau: f64,
) -> Result<f64> {
    let maxima = hit_trial_maxima(spec, source, &[detector])?;
    Ok(exceed_fraction(&maxima[0], tau))
}

/// Hit rate with independently resampled windows; see [`independent_trial_maxima`].
pub fn hit_rate_independent<S: SampleSource>(
    spec: &HitRateTrialSpec,
    source: &S,
    detector: DynDetector<'_, S::Sample>,
    tau: f64,
) -> Result<f64> {
    let maxima = independent_trial_maxima(spec, source, &[detector])?;
    Ok(exceed_fraction(&maxima[0], tau))
}

/// ROC curve of one detector: false alarms over `quiescent_steps` quiescent
/// time steps paired with Monte Carlo hit rates, over the threshold grid `taus`.
pub fn roc<S: SampleSource>(
    source: &S,
    detector: DynDetector<'_, S::Sample>,
    spec: &HitRateTrialSpec,
    quiescent_steps: usize,
    taus: &[f64],
) -> Result<RocCurve> {
    if taus.is_empty() {
        return Err(Error::Empty("threshold grid"));
    }
    let quiet = quiescent_detection_values(source, &[detector], quiescent_steps, spec.seed)?;
    let maxima = hit_trial_maxima(spec, source, &[detector])?;
    RocCurve::from_samples(&quiet[0], &maxima[0], taus)
}

/// What the most recent `R + C` time steps contain in the nuisance scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntervalState {
    /// Noise throughout.
    A1,
    /// Uninteresting object at the start but not at the end.
    A2,
    /// Uninteresting object at the end but not at the start.
    A3,
    /// Uninteresting object throughout.
    A4,
}

impl IntervalState {
    pub const ALL: [IntervalState; 4] = [Self::A1, Self::A2, Self::A3, Self::A4];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Classifies an interval by object presence at its first and last step.
    pub fn from_endpoints(present_at_start: bool, present_at_end: bool) -> Self {
        match (present_at_start, present_at_end) {
            (false, false) => Self::A1,
            (true, false) => Self::A2,
            (false, true) => Self::A3,
            (true, true) => Self::A4,
        }
    }
}

/// `P(A1), ..., P(A4)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalStateProbs {
    pub p: [f64; 4],
}

impl IntervalStateProbs {
    pub fn new(p: [f64; 4]) -> Result<Self> {
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("p", "probabilities must lie in [0, 1]"));
        }
        if (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("p", "probabilities must sum to 1"));
        }
        if (p[1] - p[2]).abs() > 1e-12 {
            return Err(Error::invalid("p", "P(A2) and P(A3) must be equal"));
        }
        Ok(Self { p })
    }

    pub fn get(&self, state: IntervalState) -> f64 {
        self.p[state.index()]
    }
}

/// State probabilities for fixed-length alternating noise periods (`N`) and
/// uninteresting events (`U`), both longer than `R + C`.
pub fn interval_state_probs(
    noise_len: usize,
    uninteresting_len: usize,
    cfg: &WindowConfig,
) -> Result<IntervalStateProbs> {
    cfg.validate()?;
    let span = cfg.span();
    if noise_len <= span {
        return Err(Error::invalid(
            "noise_len",
            format!("noise periods ({noise_len}) must be longer than R + C = {span}"),
        ));
    }
    if uninteresting_len <= span {
        return Err(Error::invalid(
            "uninteresting_len",
            format!("uninteresting events ({uninteresting_len}) must be longer than R + C = {span}"),
        ));
    }
    let total = (noise_len + uninteresting_len) as f64;
    let a1 = (noise_len - span + 1) as f64 / total;
    let a4 = (uninteresting_len - span + 1) as f64 / total;
    let boundary = (span - 1) as f64 / total;
    IntervalStateProbs::new([a1, boundary, boundary, a4])
}

/// `P(F) = sum_i P(F | A_i) P(A_i)`.
pub fn false_alarm_decomposed(cond: &[f64; 4], probs: &IntervalStateProbs) -> Result<f64> {
    if let Some(c) = cond.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::invalid("cond_probs", format!("{c} outside [0, 1]")));
    }
    Ok(cond.iter().zip(&probs.p).map(|(c, p)| c * p).sum())
}

/// How many uninteresting samples open an interval of length `span` in
/// `state` at boundary position `position` (1-based, `1..span`), and whether
/// they sit at the start.
fn interval_layout(state: IntervalState, span: usize, position: usize) -> (usize, bool) {
    match state {
        IntervalState::A1 => (0, true),
        IntervalState::A4 => (span, true),
        // Uninteresting event ends at step `position`.
        IntervalState::A2 => (position, true),
        // Time reversal of A2: the event starts `position` steps before the end.
        IntervalState::A3 => (position, false),
    }
}

/// Number of distinct boundary positions for a state: `R + C - 1` for the
/// boundary states, one otherwise.
pub fn boundary_positions(state: IntervalState, span: usize) -> usize {
    match state {
        IntervalState::A2 | IntervalState::A3 => span - 1,
        IntervalState::A1 | IntervalState::A4 => 1,
    }
}

/// Detection values `d_T` at the end of simulated intervals in `state`.
///
/// Returns `[detector][position][trial]`, with `trials` replicates for every
/// boundary position.
pub fn interval_values<S: NuisanceSource>(
    state: IntervalState,
    source: &S,
    detectors: &[DynDetector<'_, S::Sample>],
    cfg: &WindowConfig,
    trials: usize,
    seed: u64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    cfg.validate()?;
    if trials == 0 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }
    let span = cfg.span();
    if let Some(d) = detectors.iter().find(|d| d.lookback() > span) {
        return Err(Error::invalid(
            "detectors",
            format!("{} reads {} samples, more than R + C = {span}", d.name(), d.lookback()),
        ));
    }
    let positions = boundary_positions(state, span);
    let jobs: Vec<(usize, usize)> = (0..positions)
        .flat_map(|p| (0..trials).map(move |t| (p, t)))
        .collect();
    let per_job: Vec<Vec<f64>> = jobs
        .into_par_iter()
        .map(|(p, t)| {
            let position = p + 1;
            let tag = (state.index() as u64) << 32 | position as u64;
            let mut rng = sub_rng(seed, Purpose::Boundary, tag, t as u64);
            let (n_obj, leading) = interval_layout(state, span, position);
            let obj = if n_obj > 0 {
                source.uninteresting(n_obj, &mut rng)?
            } else {
                Vec::new()
            };
            let noise = source.quiescent(span - n_obj, &mut rng)?;
            let samples = if leading { concat(obj, noise) } else { concat(noise, obj) };
            detectors
                .iter()
                .map(|d| {
                    let stream = d.detect(&samples[span - d.lookback()..], &mut rng)?;
                    Ok(*stream.values().last().expect("window fits"))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut out = vec![vec![Vec::with_capacity(trials); positions]; detectors.len()];
    for (j, row) in per_job.into_iter().enumerate() {
        let p = j / trials;
        for (d, v) in row.into_iter().enumerate() {
            out[d][p].push(v);
        }
    }
    Ok(out)
}

/// Monte Carlo estimate of `P(F | A2)` or `P(F | A3)`: the per-position alarm
/// frequencies averaged with weight `1 / (R + C - 1)` each.
pub fn cond_false_alarm_boundary<S: NuisanceSource>(
    state: IntervalState,
    source: &S,
    detector: DynDetector<'_, S::Sample>,
    tau: f64,
    cfg: &WindowConfig,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if !matches!(state, IntervalState::A2 | IntervalState::A3) {
        return Err(Error::invalid("case", "boundary estimate applies to A2 or A3 only"));
    }
    let values = interval_values(state, source, &[detector], cfg, trials, seed)?;
    Ok(average_over_positions(&values[0], tau))
}

fn average_over_positions(per_position: &[Vec<f64>], tau: f64) -> f64 {
    per_position
        .iter()
        .map(|v| exceed_fraction(v, tau))
        .sum::<f64>()
        / per_position.len() as f64
}

/// Threshold-dependent false alarm rate assembled from conditional detection
/// values and state probabilities.
#[derive(Debug, Clone)]
pub struct DecomposedFalseAlarm {
    probs: IntervalStateProbs,
    /// `[state][position]`.
    counters: Vec<Vec<ExceedanceCounter>>,
}

impl DecomposedFalseAlarm {
    /// `values[state][position]` holds detection values for that state.
    pub fn new(probs: IntervalStateProbs, values: [Vec<Vec<f64>>; 4]) -> Result<Self> {
        let counters = values
            .iter()
            .map(|positions| {
                if positions.is_empty() {
                    return Err(Error::Empty("conditional detection values"));
                }
                positions.iter().map(|v| ExceedanceCounter::new(v)).collect()
            })
            .collect::<Result<_>>()?;
        Ok(Self { probs, counters })
    }

    pub fn conditional(&self, state: IntervalState, tau: f64) -> f64 {
        let c = &self.counters[state.index()];
        c.iter().map(|k| k.rate_above(tau)).sum::<f64>() / c.len() as f64
    }

    pub fn rate(&self, tau: f64) -> f64 {
        let cond = IntervalState::ALL.map(|s| self.conditional(s, tau));
        cond.iter().zip(&self.probs.p).map(|(c, p)| c * p).sum()
    }

    pub fn probs(&self) -> &IntervalStateProbs {
        &self.probs
    }

    /// Every observed detection value, for building a threshold grid.
    pub fn observed(&self) -> impl Iterator<Item = f64> + '_ {
        self.counters
            .iter()
            .flatten()
            .flat_map(|c| c.sorted().iter().copied())
    }
}
