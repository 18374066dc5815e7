//! Domain types and window arithmetic shared by every other module.
//!
//! Time indices are zero-based everywhere. For a current time `T` the current
//! window is `[T-C+1, T]` and the reference window is `[T-C-R+1, T-C]`.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sizes of the current (`C`), reference (`R`) and tolerance (`W`) windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub current: usize,
    pub reference: usize,
    pub tolerance: usize,
}

impl WindowConfig {
    pub fn new(current: usize, reference: usize, tolerance: usize) -> Result<Self> {
        let cfg = Self {
            current,
            reference,
            tolerance,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("current", self.current),
            ("reference", self.reference),
            ("tolerance", self.tolerance),
        ] {
            if value == 0 {
                return Err(Error::invalid(name, "window sizes must be at least 1"));
            }
        }
        Ok(())
    }

    /// `R + C`, the span read by a detector that uses both windows.
    pub fn span(&self) -> usize {
        self.current + self.reference
    }
}

/// Current and reference windows ending at time `t`.
pub fn window_indices(
    t: usize,
    cfg: &WindowConfig,
) -> Result<(RangeInclusive<usize>, RangeInclusive<usize>)> {
    cfg.validate()?;
    let first_valid = cfg.span() - 1;
    if t < first_valid {
        return Err(Error::IndexOutOfRange {
            index: t,
            reason: format!(
                "both windows need T >= C + R - 1 = {first_valid} (C={}, R={})",
                cfg.current, cfg.reference
            ),
        });
    }
    let current = (t + 1 - cfg.current)..=t;
    let reference = (t + 1 - cfg.span())..=(t - cfg.current);
    Ok((current, reference))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Quiescent,
    Event,
}

impl TryFrom<u8> for Label {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            0 => Ok(Label::Quiescent),
            1 => Ok(Label::Event),
            other => Err(Error::invalid("labels", format!("label {other} is not 0 or 1"))),
        }
    }
}

impl From<Label> for u8 {
    fn from(label: Label) -> u8 {
        match label {
            Label::Quiescent => 0,
            Label::Event => 1,
        }
    }
}

/// A segment of a data stream, optionally with per-sample event labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledStream<S> {
    samples: Vec<S>,
    labels: Option<Vec<Label>>,
}

impl<S> LabeledStream<S> {
    pub fn unlabeled(samples: Vec<S>) -> Self {
        Self {
            samples,
            labels: None,
        }
    }

    pub fn labeled(samples: Vec<S>, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != samples.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} labels", samples.len()),
                got: format!("{} labels", labels.len()),
            });
        }
        Ok(Self {
            samples,
            labels: Some(labels),
        })
    }

    /// Builds a labeled stream from raw 0/1 labels.
    pub fn from_binary(samples: Vec<S>, labels: &[u8]) -> Result<Self> {
        let labels = labels
            .iter()
            .map(|&l| Label::try_from(l))
            .collect::<Result<Vec<_>>>()?;
        Self::labeled(samples, labels)
    }

    pub fn samples(&self) -> &[S] {
        &self.samples
    }

    pub fn labels(&self) -> Option<&[Label]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueRange {
    /// Scores are probabilities; log-odds are meaningful.
    UnitInterval,
    RealLine,
}

/// One classifier score per input sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreStream {
    scores: Vec<f64>,
    range: ValueRange,
}

impl ScoreStream {
    pub fn new(scores: Vec<f64>, range: ValueRange) -> Result<Self> {
        if let Some((i, s)) = scores.iter().enumerate().find(|(_, s)| !s.is_finite()) {
            return Err(Error::invalid("scores", format!("score {s} at index {i} is not finite")));
        }
        if range == ValueRange::UnitInterval {
            if let Some((i, s)) = scores
                .iter()
                .enumerate()
                .find(|(_, s)| !(0.0..=1.0).contains(*s))
            {
                return Err(Error::invalid(
                    "scores",
                    format!("score {s} at index {i} is outside [0, 1]"),
                ));
            }
        }
        Ok(Self { scores, range })
    }

    pub fn unit(scores: Vec<f64>) -> Result<Self> {
        Self::new(scores, ValueRange::UnitInterval)
    }

    pub fn real(scores: Vec<f64>) -> Result<Self> {
        Self::new(scores, ValueRange::RealLine)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn range(&self) -> ValueRange {
        self.range
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Values `d_T` for `T = valid_from, valid_from + 1, ...`.
///
/// Indices before `valid_from` are undefined rather than padded.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionStream {
    values: Vec<f64>,
    valid_from: usize,
}

impl DetectionStream {
    pub fn new(values: Vec<f64>, valid_from: usize) -> Self {
        Self { values, valid_from }
    }

    pub fn valid_from(&self) -> usize {
        self.valid_from
    }

    /// Value at absolute time `t`, if defined.
    pub fn get(&self, t: usize) -> Option<f64> {
        t.checked_sub(self.valid_from)
            .and_then(|k| self.values.get(k).copied())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `(t, d_t)` pairs over the defined range.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| (self.valid_from + k, v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    #[serde(with = "extended_f64")]
    pub tau: f64,
    pub false_alarm_rate: f64,
    pub hit_rate: f64,
}

/// Event-oriented ROC curve, sorted by threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    points: Vec<RocPoint>,
}

impl RocCurve {
    /// Checks ordering, range and monotonicity of the points.
    pub fn new(points: Vec<RocPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidRoc("no points".into()));
        }
        for p in &points {
            if p.tau.is_nan() {
                return Err(Error::InvalidRoc("threshold is NaN".into()));
            }
            for (name, r) in [("false alarm rate", p.false_alarm_rate), ("hit rate", p.hit_rate)] {
                if !(0.0..=1.0).contains(&r) {
                    return Err(Error::InvalidRoc(format!("{name} {r} outside [0, 1]")));
                }
            }
        }
        for pair in points.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.tau > b.tau {
                return Err(Error::InvalidRoc(format!(
                    "thresholds not ascending: {} then {}",
                    a.tau, b.tau
                )));
            }
            if b.false_alarm_rate > a.false_alarm_rate || b.hit_rate > a.hit_rate {
                return Err(Error::InvalidRoc(format!(
                    "rates increase between tau={} and tau={}",
                    a.tau, b.tau
                )));
            }
        }
        Ok(Self { points })
    }

    /// Empirical curve from quiescent detection values and per-event maxima.
    ///
    /// An alarm rings when a value strictly exceeds `tau`; an event counts as
    /// hit when the maximum over its tolerance window does.
    pub fn from_samples(quiescent: &[f64], event_maxima: &[f64], taus: &[f64]) -> Result<Self> {
        let f = ExceedanceCounter::new(quiescent)?;
        let h = ExceedanceCounter::new(event_maxima)?;
        Self::from_rates(taus, |tau| (f.rate_above(tau), h.rate_above(tau)))
    }

    /// Builds a curve by evaluating `rates(tau) -> (f, h)` over `taus`.
    pub fn from_rates(taus: &[f64], mut rates: impl FnMut(f64) -> (f64, f64)) -> Result<Self> {
        let mut taus = taus.to_vec();
        taus.sort_by(f64::total_cmp);
        taus.dedup();
        let points = taus
            .into_iter()
            .map(|tau| {
                let (f, h) = rates(tau);
                RocPoint {
                    tau,
                    false_alarm_rate: f,
                    hit_rate: h,
                }
            })
            .collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[RocPoint] {
        &self.points
    }

    /// Best hit rate achievable with false alarm rate at most `f`.
    pub fn hit_rate_at(&self, f: f64) -> Option<f64> {
        self.points
            .iter()
            .filter(|p| p.false_alarm_rate <= f)
            .map(|p| p.hit_rate)
            .max_by(f64::total_cmp)
    }

    /// The point used by [`RocCurve::hit_rate_at`].
    pub fn point_at(&self, f: f64) -> Option<RocPoint> {
        self.points
            .iter()
            .filter(|p| p.false_alarm_rate <= f)
            .max_by(|a, b| a.hit_rate.total_cmp(&b.hit_rate))
            .copied()
    }
}

/// Counts how many values exceed a threshold via binary search on a sorted copy.
#[derive(Debug, Clone)]
pub struct ExceedanceCounter {
    sorted: Vec<f64>,
}

impl ExceedanceCounter {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("no values to count"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("values", "NaN detection value"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn count_above(&self, tau: f64) -> usize {
        self.sorted.len() - self.sorted.partition_point(|&v| v <= tau)
    }

    pub fn rate_above(&self, tau: f64) -> f64 {
        self.count_above(tau) as f64 / self.sorted.len() as f64
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }
}

/// Threshold grid drawn from observed detection values, plus `±inf`.
///
/// With `max_points` at least the number of distinct values (plus two) the grid
/// is exact; otherwise an evenly spaced subset of the sorted distinct values.
pub fn threshold_grid(values: &[f64], max_points: usize) -> Vec<f64> {
    let mut distinct: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let inner = max_points.saturating_sub(2).max(1);
    let mut grid = Vec::with_capacity(inner.min(distinct.len()) + 2);
    grid.push(f64::NEG_INFINITY);
    if distinct.len() <= inner {
        grid.extend_from_slice(&distinct);
    } else {
        let last = distinct.len() - 1;
        let mut prev = usize::MAX;
        for k in 0..inner {
            let idx = if inner == 1 { last / 2 } else { k * last / (inner - 1) };
            if idx != prev {
                grid.push(distinct[idx]);
                prev = idx;
            }
        }
    }
    grid.push(f64::INFINITY);
    grid
}

/// Serializes `±inf` as the strings `"inf"` / `"-inf"` so JSON stays valid.
pub mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::custom(format!("unexpected threshold {other:?}"))),
            },
        }
    }
}
