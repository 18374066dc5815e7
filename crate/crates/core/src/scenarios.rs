//! Seeded generators for the two simulation worlds: an independent univariate
//! stream with a Gaussian-mixture event density, and a stream of noisy images
//! in which pyramid-shaped objects appear.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{IntervalState, NuisanceSource, SampleSource};
use crate::frame::Frame;
use crate::rng::{stream_rng, Purpose, SimRng};
use crate::scoring::{collect_event_boxes_with, fit_fisher, BoxClassifier, MatchStatistic, MixtureSpec, Ridge};
use crate::types::{Label, LabeledStream, WindowConfig};

/// Quiescent draws are standard normal; event draws pick `+mu` or `-mu` with
/// equal probability and add `N(0, sigma^2)` noise.
pub fn sample_univariate(label: Label, spec: &MixtureSpec, rng: &mut SimRng) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    match label {
        Label::Quiescent => z,
        Label::Event => {
            let centre = if rng.random::<bool>() { spec.mu } else { -spec.mu };
            centre + spec.sigma * z
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UnivariateSource {
    pub spec: MixtureSpec,
}

impl SampleSource for UnivariateSource {
    type Sample = f64;

    fn quiescent(&self, len: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
        Ok((0..len)
            .map(|_| sample_univariate(Label::Quiescent, &self.spec, rng))
            .collect())
    }

    fn event(&self, len: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
        Ok((0..len)
            .map(|_| sample_univariate(Label::Event, &self.spec, rng))
            .collect())
    }
}

/// Square pyramid of side `size` whose pixels average `mean_intensity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PyramidSpec {
    pub size: usize,
    pub mean_intensity: f64,
    /// Bright rim and dim centre instead of a bright centre.
    #[serde(default)]
    pub inverted: bool,
}

/// Height profile `min(r + 1, c + 1, m - r, m - c)`, optionally flipped to
/// `h_max + 1 - h`, scaled by one positive factor to the requested mean.
pub fn pyramid_template(spec: &PyramidSpec) -> Result<Frame> {
    let m = spec.size;
    if m == 0 {
        return Err(Error::invalid("size", "pyramid must be at least 1 pixel wide"));
    }
    let height = |r: usize, c: usize| (r + 1).min(c + 1).min(m - r).min(m - c) as f64;
    let peak = m.div_ceil(2) as f64;
    let mut profile = Vec::with_capacity(m * m);
    for r in 0..m {
        for c in 0..m {
            let h = height(r, c);
            profile.push(if spec.inverted { peak + 1.0 - h } else { h });
        }
    }
    let mean = profile.iter().sum::<f64>() / profile.len() as f64;
    let scale = spec.mean_intensity / mean;
    Frame::square(m, profile.into_iter().map(|h| h * scale).collect())
}

/// An object template pasted at a fixed top-left corner.
#[derive(Debug, Clone, Copy)]
pub struct Placement<'a> {
    pub template: &'a Frame,
    pub row: usize,
    pub col: usize,
}

/// `n x n` frame of i.i.d. standard normal noise, plus the object if given.
pub fn render_frame(object: Option<Placement<'_>>, n: usize, rng: &mut SimRng) -> Result<Frame> {
    if let Some(p) = object {
        let m = p.template.rows();
        if p.row + m > n || p.col + p.template.cols() > n {
            return Err(Error::OutOfBounds {
                row: p.row,
                col: p.col,
                size: m,
                rows: n,
                cols: n,
            });
        }
    }
    let data = (0..n * n).map(|_| StandardNormal.sample(&mut *rng)).collect();
    let mut frame = Frame::square(n, data)?;
    if let Some(p) = object {
        frame.add_patch(p.template, p.row, p.col)?;
    }
    Ok(frame)
}

/// Image stream with an interesting object and, optionally, an uninteresting one.
///
/// Within one event run the object stays at a single position drawn uniformly
/// over all positions where it fits.
#[derive(Debug, Clone)]
pub struct ImageSource {
    pub frame_size: usize,
    pub interesting: Frame,
    pub uninteresting: Option<Frame>,
}

impl ImageSource {
    pub fn new(frame_size: usize, interesting: Frame, uninteresting: Option<Frame>) -> Result<Self> {
        for t in std::iter::once(&interesting).chain(uninteresting.as_ref()) {
            if t.rows() > frame_size || t.cols() > frame_size {
                return Err(Error::invalid(
                    "frame_size",
                    format!("{}x{} object does not fit in {frame_size}x{frame_size} frames", t.rows(), t.cols()),
                ));
            }
        }
        Ok(Self {
            frame_size,
            interesting,
            uninteresting,
        })
    }

    fn object_run(&self, template: &Frame, len: usize, rng: &mut SimRng) -> Result<Vec<Frame>> {
        let span = self.frame_size - template.rows() + 1;
        let row = rng.random_range(0..span);
        let col = rng.random_range(0..span);
        (0..len)
            .map(|_| render_frame(Some(Placement { template, row, col }), self.frame_size, rng))
            .collect()
    }
}

impl SampleSource for ImageSource {
    type Sample = Frame;

    fn quiescent(&self, len: usize, rng: &mut SimRng) -> Result<Vec<Frame>> {
        (0..len).map(|_| render_frame(None, self.frame_size, rng)).collect()
    }

    fn event(&self, len: usize, rng: &mut SimRng) -> Result<Vec<Frame>> {
        self.object_run(&self.interesting, len, rng)
    }
}

impl NuisanceSource for ImageSource {
    fn uninteresting(&self, len: usize, rng: &mut SimRng) -> Result<Vec<Frame>> {
        let template = self
            .uninteresting
            .as_ref()
            .ok_or(Error::invalid("uninteresting", "scenario has no uninteresting object"))?;
        self.object_run(template, len, rng)
    }
}

/// Training-set sizes for the box classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSpec {
    pub event_frames: usize,
    pub quiescent_boxes: usize,
    #[serde(default)]
    pub ridge: Ridge,
    #[serde(default)]
    pub match_statistic: MatchStatistic,
}

impl Default for TrainingSpec {
    fn default() -> Self {
        Self {
            event_frames: 10,
            quiescent_boxes: 10_000,
            ridge: Ridge::Auto,
            match_statistic: MatchStatistic::InnerProduct,
        }
    }
}

/// Event boxes are found by template matching the interesting object against
/// freshly drawn event frames; quiescent boxes are pure-noise boxes, which have
/// the same distribution as boxes cut from quiescent frames.
pub fn train_box_classifier(source: &ImageSource, training: &TrainingSpec, seed: u64) -> Result<BoxClassifier> {
    if training.event_frames == 0 || training.quiescent_boxes == 0 {
        return Err(Error::invalid("training", "need event frames and quiescent boxes"));
    }
    let template = &source.interesting;
    let m = template.rows();
    let mut rng = stream_rng(seed, Purpose::Training, 0);
    let frames = (0..training.event_frames)
        .map(|_| source.event(1, &mut rng).map(|mut v| v.remove(0)))
        .collect::<Result<Vec<_>>>()?;
    let event_boxes = collect_event_boxes_with(template, &frames, training.match_statistic)?;
    let quiescent_boxes = (0..training.quiescent_boxes)
        .map(|_| render_frame(None, m, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    fit_fisher(&event_boxes, &quiescent_boxes, training.ridge)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Noise,
    Interesting,
    Uninteresting,
}

/// How segments are interleaved on a timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingPolicy {
    NoiseOnly,
    /// noise, uninteresting, noise, uninteresting, ...
    AlternateUninteresting,
    /// noise, interesting, noise, interesting, ...
    AlternateInteresting,
    /// noise, interesting, noise, uninteresting, ...
    Cycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineSpec {
    pub noise_len: usize,
    pub uninteresting_len: usize,
    pub interesting_len: usize,
    pub policy: OrderingPolicy,
    pub seed: u64,
}

impl TimelineSpec {
    pub fn validate(&self, cfg: &WindowConfig) -> Result<()> {
        cfg.validate()?;
        let span = cfg.span();
        let checks = [
            ("noise_len", self.noise_len),
            ("uninteresting_len", self.uninteresting_len),
            ("interesting_len", self.interesting_len),
        ];
        for (name, len) in checks {
            if len < span {
                return Err(Error::invalid(
                    name,
                    format!("segments must last at least R + C = {span} steps, got {len}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    /// Exclusive.
    pub end: usize,
}

/// Segment layout covering `[0, total_len)`; the last segment may be cut short.
pub fn timeline_layout(spec: &TimelineSpec, total_len: usize) -> Vec<Segment> {
    let pattern: &[SegmentKind] = match spec.policy {
        OrderingPolicy::NoiseOnly => &[SegmentKind::Noise],
        OrderingPolicy::AlternateUninteresting => &[SegmentKind::Noise, SegmentKind::Uninteresting],
        OrderingPolicy::AlternateInteresting => &[SegmentKind::Noise, SegmentKind::Interesting],
        OrderingPolicy::Cycle => &[
            SegmentKind::Noise,
            SegmentKind::Interesting,
            SegmentKind::Noise,
            SegmentKind::Uninteresting,
        ],
    };
    if spec.policy == OrderingPolicy::NoiseOnly {
        return vec![Segment {
            kind: SegmentKind::Noise,
            start: 0,
            end: total_len,
        }];
    }
    let mut segments = Vec::new();
    let mut start = 0;
    for kind in pattern.iter().cycle() {
        if start >= total_len {
            break;
        }
        let len = match kind {
            SegmentKind::Noise => spec.noise_len,
            SegmentKind::Interesting => spec.interesting_len,
            SegmentKind::Uninteresting => spec.uninteresting_len,
        };
        let end = (start + len).min(total_len);
        segments.push(Segment {
            kind: *kind,
            start,
            end,
        });
        start = end;
    }
    segments
}

/// A rendered timeline with its segment annotations.
#[derive(Debug, Clone)]
pub struct Timeline {
    pub stream: LabeledStream<Frame>,
    pub segments: Vec<Segment>,
}

impl Timeline {
    pub fn kind_at(&self, t: usize) -> Option<SegmentKind> {
        segment_kind_at(&self.segments, t)
    }

    /// State of the interval of length `span` ending at `end`, if the interval
    /// fits and contains no interesting object.
    pub fn classify_interval(&self, end: usize, span: usize) -> Option<IntervalState> {
        classify_interval(&self.segments, end, span)
    }
}

fn segment_kind_at(segments: &[Segment], t: usize) -> Option<SegmentKind> {
    let i = segments.partition_point(|s| s.end <= t);
    segments.get(i).filter(|s| s.start <= t).map(|s| s.kind)
}

/// Interval state of `[end - span + 1, end]` from segment annotations.
pub fn classify_interval(segments: &[Segment], end: usize, span: usize) -> Option<IntervalState> {
    let start = (end + 1).checked_sub(span)?;
    let first = segments.partition_point(|s| s.end <= start);
    let last = segments.partition_point(|s| s.end <= end);
    if last >= segments.len() || segments[first..=last].iter().any(|s| s.kind == SegmentKind::Interesting) {
        return None;
    }
    let present = |k: SegmentKind| k == SegmentKind::Uninteresting;
    Some(IntervalState::from_endpoints(
        present(segments[first].kind),
        present(segments[last].kind),
    ))
}

/// Renders `total_len` frames following the timeline layout. Frames are
/// labeled as events only during interesting segments.
pub fn generate_timeline(
    spec: &TimelineSpec,
    cfg: &WindowConfig,
    total_len: usize,
    source: &ImageSource,
) -> Result<Timeline> {
    spec.validate(cfg)?;
    let segments = timeline_layout(spec, total_len);
    let mut frames = Vec::with_capacity(total_len);
    let mut labels = Vec::with_capacity(total_len);
    for (i, seg) in segments.iter().enumerate() {
        let mut rng = stream_rng(spec.seed, Purpose::Timeline, i as u64);
        let len = seg.end - seg.start;
        let run = match seg.kind {
            SegmentKind::Noise => source.quiescent(len, &mut rng)?,
            SegmentKind::Interesting => source.event(len, &mut rng)?,
            SegmentKind::Uninteresting => source.uninteresting(len, &mut rng)?,
        };
        frames.extend(run);
        let label = if seg.kind == SegmentKind::Interesting {
            Label::Event
        } else {
            Label::Quiescent
        };
        labels.extend(std::iter::repeat_n(label, len));
    }
    Ok(Timeline {
        stream: LabeledStream::labeled(frames, labels)?,
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::mixture_pdf;

    fn rng(i: u64) -> SimRng {
        stream_rng(1234, Purpose::Scratch, i)
    }

    #[test]
    fn single_pixel_pyramid() {
        let t = pyramid_template(&PyramidSpec {
            size: 1,
            mean_intensity: 3.0,
            inverted: false,
        })
        .unwrap();
        assert_eq!(t.data(), &[3.0]);
    }

    #[test]
    fn pyramid_mean_and_peak() {
        for inverted in [false, true] {
            for m in [2, 5, 10] {
                let t = pyramid_template(&PyramidSpec {
                    size: m,
                    mean_intensity: 3.0,
                    inverted,
                })
                .unwrap();
                assert!((t.mean() - 3.0).abs() < 1e-12);
                let centre = t.get(m / 2, m / 2);
                let corner = t.get(0, 0);
                if m > 2 {
                    if inverted {
                        assert!(corner > centre);
                    } else {
                        assert!(centre > corner);
                    }
                }
            }
        }
    }

    #[test]
    fn pyramid_scale_factor_by_direct_summation() {
        // Rings of the 10x10 profile hold 36, 28, 20, 12, 4 pixels at heights 1..5.
        let unscaled_mean = (36.0 + 2.0 * 28.0 + 3.0 * 20.0 + 4.0 * 12.0 + 5.0 * 4.0) / 100.0;
        assert_eq!(unscaled_mean, 2.2);
        let t = pyramid_template(&PyramidSpec {
            size: 10,
            mean_intensity: 3.0,
            inverted: false,
        })
        .unwrap();
        let max = t.data().iter().copied().fold(f64::MIN, f64::max);
        assert!((max - 3.0 * 5.0 / unscaled_mean).abs() < 1e-12);
    }

    #[test]
    fn upright_and_inverted_differ() {
        let mk = |inverted| {
            pyramid_template(&PyramidSpec {
                size: 10,
                mean_intensity: 3.0,
                inverted,
            })
            .unwrap()
        };
        assert_ne!(mk(false), mk(true));
        let one = |inverted| {
            pyramid_template(&PyramidSpec {
                size: 1,
                mean_intensity: 3.0,
                inverted,
            })
            .unwrap()
        };
        assert_eq!(one(false), one(true));
    }

    #[test]
    fn event_draws_have_unit_variance() {
        let spec = MixtureSpec::default();
        let mut r = rng(0);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_univariate(Label::Event, &spec, &mut r)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 3e-3, "{mean}");
        assert!((var - 1.0).abs() < 5e-3, "{var}");
        let positive = xs.iter().filter(|&&x| x > 0.0).count() as f64 / n as f64;
        assert!((positive - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn event_histogram_matches_density() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let spec = MixtureSpec::default();
        let mut r = rng(1);
        let n = 1_000_000;
        let bins = 50;
        let (lo, hi) = (-2.5, 2.5);
        let width = (hi - lo) / bins as f64;
        // Interior bins plus two tail bins.
        let mut counts = vec![0usize; bins + 2];
        for _ in 0..n {
            let x = sample_univariate(Label::Event, &spec, &mut r);
            let k = if x < lo {
                0
            } else if x >= hi {
                bins + 1
            } else {
                (1 + ((x - lo) / width) as usize).min(bins)
            };
            counts[k] += 1;
        }
        // Expected counts by Simpson quadrature of the density over each bin.
        let integral = |a: f64, b: f64| {
            let steps = 200;
            let h = (b - a) / steps as f64;
            let mut acc = mixture_pdf(a, &spec) + mixture_pdf(b, &spec);
            for i in 1..steps {
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * mixture_pdf(a + i as f64 * h, &spec);
            }
            acc * h / 3.0
        };
        let mut probs = vec![0.0; bins + 2];
        for k in 0..bins {
            probs[k + 1] = integral(lo + k as f64 * width, lo + (k + 1) as f64 * width);
        }
        probs[0] = integral(-10.0, lo);
        probs[bins + 1] = integral(hi, 10.0);
        let chi2: f64 = counts
            .iter()
            .zip(&probs)
            .filter(|(_, &p)| p * n as f64 > 5.0)
            .map(|(&c, &p)| {
                let e = p * n as f64;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        let dof = probs.iter().filter(|&&p| p * n as f64 > 5.0).count() - 1;
        let p_value = 1.0 - ChiSquared::new(dof as f64).unwrap().cdf(chi2);
        assert!(p_value > 1e-3, "chi2 = {chi2}, dof = {dof}, p = {p_value}");
    }

    #[test]
    fn render_noise_and_object() {
        let mut r = rng(2);
        let n = 100;
        let frame = render_frame(None, n, &mut r).unwrap();
        assert!(frame.mean().abs() < 3.0 * 3.0 / n as f64);

        let template = pyramid_template(&PyramidSpec {
            size: 10,
            mean_intensity: 3.0,
            inverted: false,
        })
        .unwrap();
        let placed = Placement {
            template: &template,
            row: 45,
            col: 45,
        };
        let frame = render_frame(Some(placed), n, &mut r).unwrap();
        let footprint = frame.window(45, 45, 10, 10).unwrap().mean();
        // Noise mean over 100 pixels has standard deviation 0.1.
        assert!((footprint - 3.0).abs() < 0.5, "{footprint}");
        let outside: f64 = frame.window(0, 0, 40, 100).unwrap().mean();
        assert!(outside.abs() < 0.1);

        let bad = Placement {
            template: &template,
            row: 95,
            col: 0,
        };
        assert!(matches!(render_frame(Some(bad), n, &mut r), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn rendering_is_deterministic() {
        let a = render_frame(None, 16, &mut rng(3)).unwrap();
        let b = render_frame(None, 16, &mut rng(3)).unwrap();
        assert_eq!(a, b);
    }

    fn small_source() -> ImageSource {
        let up = pyramid_template(&PyramidSpec {
            size: 3,
            mean_intensity: 3.0,
            inverted: false,
        })
        .unwrap();
        let down = pyramid_template(&PyramidSpec {
            size: 3,
            mean_intensity: 3.0,
            inverted: true,
        })
        .unwrap();
        ImageSource::new(6, up, Some(down)).unwrap()
    }

    #[test]
    fn noise_only_timeline() {
        let cfg = WindowConfig::new(1, 2, 1).unwrap();
        let spec = TimelineSpec {
            noise_len: 5,
            uninteresting_len: 5,
            interesting_len: 5,
            policy: OrderingPolicy::NoiseOnly,
            seed: 1,
        };
        let tl = generate_timeline(&spec, &cfg, 17, &small_source()).unwrap();
        assert_eq!(tl.stream.len(), 17);
        assert!(tl.stream.labels().unwrap().iter().all(|&l| l == Label::Quiescent));
    }

    #[test]
    fn timeline_labels_follow_segments() {
        let cfg = WindowConfig::new(1, 2, 1).unwrap();
        let spec = TimelineSpec {
            noise_len: 4,
            uninteresting_len: 3,
            interesting_len: 5,
            policy: OrderingPolicy::Cycle,
            seed: 2,
        };
        let tl = generate_timeline(&spec, &cfg, 40, &small_source()).unwrap();
        let labels = tl.stream.labels().unwrap();
        for seg in &tl.segments {
            let expected = if seg.kind == SegmentKind::Interesting { Label::Event } else { Label::Quiescent };
            assert!(labels[seg.start..seg.end].iter().all(|&l| l == expected));
        }
        for t in 1..labels.len() {
            if labels[t] != labels[t - 1] {
                assert!(tl.segments.iter().any(|s| s.start == t));
            }
        }
        let too_short = TimelineSpec { noise_len: 2, ..spec };
        assert!(generate_timeline(&too_short, &cfg, 40, &small_source()).is_err());
    }

    #[test]
    fn timeline_frames_carry_objects_only_in_object_segments() {
        let cfg = WindowConfig::new(1, 2, 1).unwrap();
        let spec = TimelineSpec {
            noise_len: 4,
            uninteresting_len: 4,
            interesting_len: 4,
            policy: OrderingPolicy::AlternateUninteresting,
            seed: 3,
        };
        let tl = generate_timeline(&spec, &cfg, 16, &small_source()).unwrap();
        assert_eq!(tl.kind_at(0), Some(SegmentKind::Noise));
        assert_eq!(tl.kind_at(5), Some(SegmentKind::Uninteresting));
        assert_eq!(tl.kind_at(16), None);
        assert_eq!(tl.classify_interval(2, 3), Some(IntervalState::A1));
        assert_eq!(tl.classify_interval(5, 3), Some(IntervalState::A3));
        assert_eq!(tl.classify_interval(7, 3), Some(IntervalState::A4));
        assert_eq!(tl.classify_interval(9, 3), Some(IntervalState::A2));
        assert_eq!(tl.classify_interval(1, 3), None);
    }

    #[test]
    fn uninteresting_requires_template() {
        let src = ImageSource::new(6, small_source().interesting, None).unwrap();
        assert!(src.uninteresting(2, &mut rng(4)).is_err());
        assert!(ImageSource::new(2, small_source().interesting, None).is_err());
    }
}
