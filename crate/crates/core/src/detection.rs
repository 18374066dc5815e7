//! Detection streams: map score streams (or raw frames) to a causal univariate
//! statistic `d_T` that is compared against an alarm threshold.

use std::marker::PhantomData;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::rng::SimRng;
use crate::scoring::{std_normal_cdf, Scorer};
use crate::types::{DetectionStream, RocCurve, RocPoint, ScoreStream, ValueRange, WindowConfig};

/// Scores are clipped into `[epsilon, 1 - epsilon]` before taking log-odds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipPolicy {
    pub epsilon: f64,
}

impl ClipPolicy {
    pub fn new(epsilon: f64) -> Result<Self> {
        let clip = Self { epsilon };
        clip.validate()?;
        Ok(clip)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::invalid("epsilon", "clip epsilon must lie in (0, 1/2)"));
        }
        Ok(())
    }

    pub fn log_odds(&self, s: f64) -> f64 {
        let s = s.clamp(self.epsilon, 1.0 - self.epsilon);
        (s / (1.0 - s)).ln()
    }
}

impl Default for ClipPolicy {
    fn default() -> Self {
        Self { epsilon: 1e-6 }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Difference between the mean score of the current and the reference window.
pub fn ddif(scores: &ScoreStream, cfg: &WindowConfig) -> Result<DetectionStream> {
    cfg.validate()?;
    let s = scores.scores();
    let span = cfg.span();
    if s.len() < span {
        return Err(Error::StreamTooShort {
            needed: span,
            got: s.len(),
        });
    }
    let c = cfg.current;
    let values = (span - 1..s.len())
        .map(|t| mean(&s[t + 1 - c..=t]) - mean(&s[t + 1 - span..=t - c]))
        .collect();
    Ok(DetectionStream::new(values, span - 1))
}

/// Sum of clipped score log-odds over the current window.
///
/// Never reads the reference window.
pub fn dlik(scores: &ScoreStream, cfg: &WindowConfig, clip: &ClipPolicy) -> Result<DetectionStream> {
    cfg.validate()?;
    clip.validate()?;
    if scores.range() != ValueRange::UnitInterval {
        return Err(Error::NotUnitInterval);
    }
    let c = cfg.current;
    if scores.len() < c {
        return Err(Error::StreamTooShort {
            needed: c,
            got: scores.len(),
        });
    }
    let log_odds: Vec<f64> = scores.scores().iter().map(|&s| clip.log_odds(s)).collect();
    let values = log_odds.windows(c).map(|w| w.iter().sum()).collect();
    Ok(DetectionStream::new(values, c - 1))
}

/// One-sample Kolmogorov statistic `sup_x |F_n(x) - F_0(x)|`, evaluated exactly
/// at the order statistics.
pub fn kolmogorov_stat(sample: &[f64], null_cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Empty("Kolmogorov statistic of an empty sample"));
    }
    let mut u: Vec<f64> = sample.iter().map(|&x| null_cdf(x)).collect();
    u.sort_by(f64::total_cmp);
    Ok(kolmogorov_sorted_uniform(&u))
}

/// Statistic for probability-integral-transformed values, already sorted.
fn kolmogorov_sorted_uniform(u: &[f64]) -> f64 {
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &f)| {
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Maximum over pixels of `|mean(current frames) - mean(reference frames)|`.
pub fn pixel_maxdiff(frames: &[Frame], cfg: &WindowConfig) -> Result<DetectionStream> {
    cfg.validate()?;
    let span = cfg.span();
    if frames.len() < span {
        return Err(Error::StreamTooShort {
            needed: span,
            got: frames.len(),
        });
    }
    let shape = frames[0].shape();
    if let Some(f) = frames.iter().find(|f| f.shape() != shape) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{} frames", shape.0, shape.1),
            got: format!("{}x{}", f.rows(), f.cols()),
        });
    }
    let (c, r) = (cfg.current as f64, cfg.reference as f64);
    let pixels = shape.0 * shape.1;
    let mut cur = vec![0.0; pixels];
    let mut reference = vec![0.0; pixels];
    let values = (span - 1..frames.len())
        .map(|t| {
            cur.iter_mut().for_each(|v| *v = 0.0);
            reference.iter_mut().for_each(|v| *v = 0.0);
            for f in &frames[t + 1 - cfg.current..=t] {
                cur.iter_mut().zip(f.data()).for_each(|(a, x)| *a += x);
            }
            for f in &frames[t + 1 - span..=t - cfg.current] {
                reference.iter_mut().zip(f.data()).for_each(|(a, x)| *a += x);
            }
            cur.iter()
                .zip(&reference)
                .map(|(a, b)| (a / c - b / r).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(DetectionStream::new(values, span - 1))
}

/// Closed-form ROC of a detector that alarms with probability `alpha` at each
/// step regardless of the data: `alpha -> (alpha, 1 - (1 - alpha)^W)`.
///
/// Thresholds are reported as `1 - alpha`, the cut-off on a uniform draw.
pub fn monkey_roc(alphas: &[f64], tolerance: usize) -> Result<RocCurve> {
    if tolerance == 0 {
        return Err(Error::invalid("tolerance", "W must be at least 1"));
    }
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::invalid("alpha", format!("{a} outside [0, 1]")));
    }
    let mut alphas = alphas.to_vec();
    alphas.sort_by(|a, b| b.total_cmp(a));
    let points = alphas
        .into_iter()
        .map(|a| RocPoint {
            tau: 1.0 - a,
            false_alarm_rate: a,
            hit_rate: monkey_hit_rate(a, tolerance),
        })
        .collect();
    RocCurve::new(points)
}

pub fn monkey_hit_rate(alpha: f64, tolerance: usize) -> f64 {
    1.0 - (1.0 - alpha).powi(tolerance as i32)
}

/// A detection algorithm usable by the Monte Carlo harness.
///
/// `d_T` may depend only on the `lookback()` most recent samples up to `T`.
pub trait StreamDetector: Sync {
    type Sample: Sync;

    fn name(&self) -> &str;

    fn lookback(&self) -> usize;

    /// Detection stream over `samples`, defined from index `lookback() - 1`.
    fn detect(&self, samples: &[Self::Sample], rng: &mut SimRng) -> Result<DetectionStream>;
}

/// Targeted detector: mean-difference statistic over classifier scores.
#[derive(Debug, Clone)]
pub struct DifferenceDetector<S> {
    pub scorer: S,
    pub window: WindowConfig,
    pub name: String,
}

impl<S: Scorer> DifferenceDetector<S> {
    pub fn new(scorer: S, window: WindowConfig) -> Self {
        Self {
            scorer,
            window,
            name: "targeted-ddif".into(),
        }
    }
}

impl<S: Scorer> StreamDetector for DifferenceDetector<S> {
    type Sample = S::Sample;

    fn name(&self) -> &str {
        &self.name
    }

    fn lookback(&self) -> usize {
        self.window.span()
    }

    fn detect(&self, samples: &[S::Sample], _rng: &mut SimRng) -> Result<DetectionStream> {
        ddif(&self.scorer.score_stream(samples)?, &self.window)
    }
}

/// Targeted detector: summed log-odds of probability scores over the current window.
#[derive(Debug, Clone)]
pub struct LikelihoodDetector<S> {
    pub scorer: S,
    pub window: WindowConfig,
    pub clip: ClipPolicy,
    pub name: String,
}

impl<S: Scorer> LikelihoodDetector<S> {
    pub fn new(scorer: S, window: WindowConfig, clip: ClipPolicy) -> Result<Self> {
        if scorer.range() != ValueRange::UnitInterval {
            return Err(Error::NotUnitInterval);
        }
        Ok(Self {
            scorer,
            window,
            clip,
            name: "targeted-dlik".into(),
        })
    }
}

impl<S: Scorer> StreamDetector for LikelihoodDetector<S> {
    type Sample = S::Sample;

    fn name(&self) -> &str {
        &self.name
    }

    fn lookback(&self) -> usize {
        self.window.current
    }

    fn detect(&self, samples: &[S::Sample], _rng: &mut SimRng) -> Result<DetectionStream> {
        dlik(&self.scorer.score_stream(samples)?, &self.window, &self.clip)
    }
}

/// Untargeted univariate detector: Kolmogorov statistic of the current window
/// against the standard normal quiescent distribution.
#[derive(Debug, Clone)]
pub struct KolmogorovDetector {
    pub current: usize,
}

impl StreamDetector for KolmogorovDetector {
    type Sample = f64;

    fn name(&self) -> &str {
        "kolmogorov"
    }

    fn lookback(&self) -> usize {
        self.current
    }

    fn detect(&self, samples: &[f64], _rng: &mut SimRng) -> Result<DetectionStream> {
        let c = self.current;
        if c == 0 {
            return Err(Error::invalid("current", "window must hold at least one sample"));
        }
        if samples.len() < c {
            return Err(Error::StreamTooShort {
                needed: c,
                got: samples.len(),
            });
        }
        let u: Vec<f64> = samples.iter().map(|&x| std_normal_cdf(x)).collect();
        let mut buf = vec![0.0; c];
        let values = u
            .windows(c)
            .map(|w| {
                buf.copy_from_slice(w);
                buf.sort_unstable_by(f64::total_cmp);
                kolmogorov_sorted_uniform(&buf)
            })
            .collect();
        Ok(DetectionStream::new(values, c - 1))
    }
}

/// Untargeted image detector built on [`pixel_maxdiff`].
#[derive(Debug, Clone)]
pub struct PixelMaxDiffDetector {
    pub window: WindowConfig,
}

impl StreamDetector for PixelMaxDiffDetector {
    type Sample = Frame;

    fn name(&self) -> &str {
        "pixel-maxdiff"
    }

    fn lookback(&self) -> usize {
        self.window.span()
    }

    fn detect(&self, samples: &[Frame], _rng: &mut SimRng) -> Result<DetectionStream> {
        pixel_maxdiff(samples, &self.window)
    }
}

/// Ignores the data: `d_T` is an independent uniform draw, so the threshold
/// `1 - alpha` alarms with probability `alpha`.
#[derive(Debug)]
pub struct MonkeyDetector<S> {
    _sample: PhantomData<fn() -> S>,
}

impl<S> MonkeyDetector<S> {
    pub fn new() -> Self {
        Self {
            _sample: PhantomData,
        }
    }
}

impl<S> Default for MonkeyDetector<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Sync> StreamDetector for MonkeyDetector<S> {
    type Sample = S;

    fn name(&self) -> &str {
        "monkey"
    }

    fn lookback(&self) -> usize {
        1
    }

    fn detect(&self, samples: &[S], rng: &mut SimRng) -> Result<DetectionStream> {
        let values = (0..samples.len()).map(|_| rng.random::<f64>()).collect();
        Ok(DetectionStream::new(values, 0))
    }
}
