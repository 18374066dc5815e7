//! Scoring procedures: map raw samples to a univariate score stream where
//! large values indicate an event.

mod fisher;
mod mixture;
mod scan;

pub use fisher::{box_score, fit_fisher, BoxClassifier, Ridge};
pub use mixture::{
    bayes_posterior_score, log_likelihood_ratio, mixture_pdf, std_normal_cdf, std_normal_pdf,
    MixtureSpec,
};
pub use scan::{
    best_match, box_scores, collect_event_boxes, collect_event_boxes_with, correlate,
    image_score, image_score_argmax, scan_positions, MatchStatistic,
};

use crate::error::Result;
use crate::frame::Frame;
use crate::types::{ScoreStream, ValueRange};

/// A trained scoring rule for one sample type.
pub trait Scorer: Sync {
    type Sample: Sync;

    fn score(&self, sample: &Self::Sample) -> Result<f64>;

    fn range(&self) -> ValueRange;

    fn score_stream(&self, samples: &[Self::Sample]) -> Result<ScoreStream> {
        let scores = samples
            .iter()
            .map(|s| self.score(s))
            .collect::<Result<Vec<_>>>()?;
        ScoreStream::new(scores, self.range())
    }
}

/// Posterior event probability under a known quiescent/event mixture model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesScorer(pub MixtureSpec);

impl Scorer for BayesScorer {
    type Sample = f64;

    fn score(&self, x: &f64) -> Result<f64> {
        Ok(bayes_posterior_score(*x, &self.0))
    }

    fn range(&self) -> ValueRange {
        ValueRange::UnitInterval
    }
}

/// Image score: maximum box score over every box position.
impl Scorer for BoxClassifier {
    type Sample = Frame;

    fn score(&self, frame: &Frame) -> Result<f64> {
        image_score(self, frame)
    }

    fn range(&self) -> ValueRange {
        ValueRange::RealLine
    }
}
