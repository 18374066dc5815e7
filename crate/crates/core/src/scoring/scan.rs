//! Exhaustive box scans: image scores and template matching.
//!
//! Every position is visited; ties resolve to the first position in
//! row-major order.

use serde::{Deserialize, Serialize};

use super::fisher::BoxClassifier;
use crate::error::{Error, Result};
use crate::frame::Frame;

/// Number of `m x m` box positions in an `n x n` frame.
pub fn scan_positions(n: usize, m: usize) -> usize {
    if m > n {
        0
    } else {
        (n - m + 1) * (n - m + 1)
    }
}

fn check_fits(frame: &Frame, m: usize) -> Result<()> {
    if m == 0 || frame.rows() < m || frame.cols() < m {
        return Err(Error::DimensionMismatch {
            expected: format!("frame of at least {m}x{m}"),
            got: format!("{}x{}", frame.rows(), frame.cols()),
        });
    }
    Ok(())
}

/// Inner product of the `m x m` kernel with every `m x m` sub-window.
///
/// Output entry `(r, c)` sums kernel terms in row-major order, the same order
/// a plain dot product over the flattened box uses.
pub fn correlate(frame: &Frame, kernel: &[f64], m: usize) -> Result<Frame> {
    check_fits(frame, m)?;
    if kernel.len() != m * m {
        return Err(Error::DimensionMismatch {
            expected: format!("{} kernel entries", m * m),
            got: format!("{}", kernel.len()),
        });
    }
    let out_rows = frame.rows() - m + 1;
    let out_cols = frame.cols() - m + 1;
    let cols = frame.cols();
    let src = frame.data();
    let mut out = vec![0.0; out_rows * out_cols];
    for kr in 0..m {
        for kc in 0..m {
            let w = kernel[kr * m + kc];
            for r in 0..out_rows {
                let start = (r + kr) * cols + kc;
                let input = &src[start..start + out_cols];
                let acc = &mut out[r * out_cols..(r + 1) * out_cols];
                for (a, x) in acc.iter_mut().zip(input) {
                    *a += w * x;
                }
            }
        }
    }
    Frame::from_vec(out_rows, out_cols, out)
}

/// First maximum in row-major order.
fn argmax(map: &Frame) -> (f64, usize, usize) {
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (i, &v) in map.data().iter().enumerate() {
        if v > best.0 {
            best = (v, i);
        }
    }
    (best.0, best.1 / map.cols(), best.1 % map.cols())
}

fn check_box_size(clf: &BoxClassifier, frame: &Frame) -> Result<()> {
    check_fits(frame, clf.box_size())
}

/// Map of box scores, one per box position.
pub fn box_scores(clf: &BoxClassifier, frame: &Frame) -> Result<Frame> {
    check_box_size(clf, frame)?;
    let mut map = correlate(frame, clf.weights(), clf.box_size())?;
    let bias = clf.bias();
    map.data_mut().iter_mut().for_each(|v| *v += bias);
    Ok(map)
}

/// Maximum box score over all box positions.
pub fn image_score(clf: &BoxClassifier, frame: &Frame) -> Result<f64> {
    image_score_argmax(clf, frame).map(|(s, _, _)| s)
}

/// Maximum box score with the top-left corner of the winning box.
pub fn image_score_argmax(clf: &BoxClassifier, frame: &Frame) -> Result<(f64, usize, usize)> {
    check_box_size(clf, frame)?;
    let map = correlate(frame, clf.weights(), clf.box_size())?;
    let (v, r, c) = argmax(&map);
    Ok((v + clf.bias(), r, c))
}

/// How a template is compared against a candidate box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MatchStatistic {
    #[default]
    InnerProduct,
    /// Inner product divided by the L2 norm of the candidate box.
    Normalized,
}

/// Top-left corner of the sub-window that best matches `template`.
pub fn best_match(template: &Frame, frame: &Frame, stat: MatchStatistic) -> Result<(usize, usize)> {
    let m = template.rows();
    if template.cols() != m {
        return Err(Error::DimensionMismatch {
            expected: "square template".into(),
            got: format!("{}x{}", template.rows(), template.cols()),
        });
    }
    let mut map = correlate(frame, template.data(), m)?;
    if stat == MatchStatistic::Normalized {
        let squared = Frame::from_vec(
            frame.rows(),
            frame.cols(),
            frame.data().iter().map(|x| x * x).collect(),
        )?;
        let energy = correlate(&squared, &vec![1.0; m * m], m)?;
        for (v, e) in map.data_mut().iter_mut().zip(energy.data()) {
            *v = if *e > 0.0 { *v / e.sqrt() } else { 0.0 };
        }
    }
    let (_, r, c) = argmax(&map);
    Ok((r, c))
}

/// One best-matching box per event frame, by inner product with the template.
pub fn collect_event_boxes(template: &Frame, event_frames: &[Frame]) -> Result<Vec<Frame>> {
    collect_event_boxes_with(template, event_frames, MatchStatistic::InnerProduct)
}

pub fn collect_event_boxes_with(
    template: &Frame,
    event_frames: &[Frame],
    stat: MatchStatistic,
) -> Result<Vec<Frame>> {
    if event_frames.is_empty() {
        return Err(Error::Empty("collect_event_boxes needs at least one event frame"));
    }
    let m = template.rows();
    event_frames
        .iter()
        .map(|frame| {
            let (r, c) = best_match(template, frame, stat)?;
            frame.window(r, c, m, m)
        })
        .collect()
}
