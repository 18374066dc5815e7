use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;

/// Ridge term added to the pooled scatter before solving.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Ridge {
    /// `1e-3 * trace(S) / d` where `d = m^2` is the box dimension.
    #[default]
    Auto,
    Fixed(f64),
}

const AUTO_RIDGE_FACTOR: f64 = 1e-3;
const SINGULAR_RCOND: f64 = 1e-12;

/// Linear box classifier: `score(box) = weights . box + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawClassifier")]
pub struct BoxClassifier {
    box_size: usize,
    lambda: f64,
    bias: f64,
    /// Row-major, `box_size^2` entries.
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawClassifier {
    box_size: usize,
    lambda: f64,
    bias: f64,
    weights: Vec<f64>,
}

impl TryFrom<RawClassifier> for BoxClassifier {
    type Error = Error;

    fn try_from(raw: RawClassifier) -> Result<Self> {
        BoxClassifier::new(raw.box_size, raw.weights, raw.bias, raw.lambda)
    }
}

impl BoxClassifier {
    pub fn new(box_size: usize, weights: Vec<f64>, bias: f64, lambda: f64) -> Result<Self> {
        if box_size == 0 {
            return Err(Error::invalid("box_size", "must be at least 1"));
        }
        if weights.len() != box_size * box_size {
            return Err(Error::DimensionMismatch {
                expected: format!("{} weights", box_size * box_size),
                got: format!("{} weights", weights.len()),
            });
        }
        if lambda.is_nan() || lambda < 0.0 {
            return Err(Error::invalid("lambda", "ridge parameter must be non-negative"));
        }
        Ok(Self {
            box_size,
            lambda,
            bias,
            weights,
        })
    }

    pub fn box_size(&self) -> usize {
        self.box_size
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn box_score(clf: &BoxClassifier, bx: &Frame) -> Result<f64> {
    let m = clf.box_size;
    if bx.shape() != (m, m) {
        return Err(Error::DimensionMismatch {
            expected: format!("{m}x{m} box"),
            got: format!("{}x{}", bx.rows(), bx.cols()),
        });
    }
    let dot: f64 = clf
        .weights
        .iter()
        .zip(bx.data())
        .map(|(w, x)| w * x)
        .sum();
    Ok(dot + clf.bias)
}

fn box_dimension(event: &[Frame], quiescent: &[Frame]) -> Result<usize> {
    let first = event
        .first()
        .ok_or(Error::Empty("fit_fisher needs at least one event box"))?;
    if quiescent.is_empty() {
        return Err(Error::Empty("fit_fisher needs at least one quiescent box"));
    }
    let m = first.rows();
    for b in event.iter().chain(quiescent) {
        if b.shape() != (m, m) {
            return Err(Error::DimensionMismatch {
                expected: format!("{m}x{m} box"),
                got: format!("{}x{}", b.rows(), b.cols()),
            });
        }
    }
    Ok(m)
}

fn class_mean(boxes: &[Frame], d: usize) -> DVector<f64> {
    let mut mean = DVector::zeros(d);
    for b in boxes {
        mean += DVector::from_column_slice(b.data());
    }
    mean / boxes.len() as f64
}

/// Rows are the centered samples of one class.
fn centered(boxes: &[Frame], mean: &DVector<f64>) -> DMatrix<f64> {
    let d = mean.len();
    DMatrix::from_fn(boxes.len(), d, |i, j| boxes[i].data()[j] - mean[j])
}

/// Two-class Fisher discriminant on `m x m` boxes.
///
/// The direction is `(S + lambda I)^-1 (mean_event - mean_quiescent)` with `S`
/// the count-weighted pooled within-class covariance. The bias puts the
/// decision boundary halfway between the projected class means.
pub fn fit_fisher(event: &[Frame], quiescent: &[Frame], ridge: Ridge) -> Result<BoxClassifier> {
    let m = box_dimension(event, quiescent)?;
    let d = m * m;
    let mean_e = class_mean(event, d);
    let mean_q = class_mean(quiescent, d);

    let ce = centered(event, &mean_e);
    let cq = centered(quiescent, &mean_q);
    let n = (event.len() + quiescent.len()) as f64;
    let scatter = (ce.transpose() * &ce + cq.transpose() * &cq) / n;

    let lambda = match ridge {
        Ridge::Auto => AUTO_RIDGE_FACTOR * scatter.trace() / d as f64,
        Ridge::Fixed(l) if l >= 0.0 && l.is_finite() => l,
        Ridge::Fixed(l) => {
            return Err(Error::invalid("lambda", format!("{l} is not a non-negative number")))
        }
    };
    let mut system = scatter;
    for i in 0..d {
        system[(i, i)] += lambda;
    }

    let eig = SymmetricEigen::new(system);
    let largest = eig.eigenvalues.max();
    let smallest = eig.eigenvalues.min();
    if largest.is_nan() || largest <= 0.0 || smallest <= SINGULAR_RCOND * largest {
        return Err(Error::Singular(format!(
            "pooled scatter plus ridge (lambda = {lambda}) has eigenvalues in [{smallest:e}, {largest:e}]; \
             use a positive ridge"
        )));
    }
    let delta = &mean_e - &mean_q;
    let projected = eig.eigenvectors.transpose() * delta;
    let scaled = projected.component_div(&eig.eigenvalues);
    let w = &eig.eigenvectors * scaled;

    let midpoint = (&mean_e + &mean_q) * 0.5;
    let bias = -w.dot(&midpoint);
    BoxClassifier::new(m, w.iter().copied().collect(), bias, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn pixel(v: f64) -> Frame {
        Frame::filled(1, 1, v)
    }

    #[test]
    fn one_dimensional_separation() {
        let clf = fit_fisher(
            &[pixel(2.0), pixel(2.0)],
            &[pixel(0.0), pixel(0.0)],
            Ridge::Fixed(1.0),
        )
        .unwrap();
        assert!(clf.weights()[0] > 0.0);
        assert!(box_score(&clf, &pixel(2.0)).unwrap() > box_score(&clf, &pixel(0.0)).unwrap());
        // Boundary halfway between the class means.
        assert!(box_score(&clf, &pixel(1.0)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn equal_means_give_zero_direction() {
        let a = Frame::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = Frame::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let clf = fit_fisher(&[a.clone(), b.clone()], &[b.clone(), a.clone()], Ridge::Auto).unwrap();
        assert!(clf.weights().iter().all(|w| w.abs() < 1e-12));
        let s1 = box_score(&clf, &a).unwrap();
        let s2 = box_score(&clf, &Frame::filled(2, 2, 9.0)).unwrap();
        assert!((s1 - s2).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_without_ridge_is_singular() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let boxes = |n: usize, shift: f64, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Frame> {
            (0..n)
                .map(|_| {
                    let data = (0..100)
                        .map(|_| shift + Distribution::<f64>::sample(&StandardNormal, &mut *rng))
                        .collect();
                    Frame::square(10, data).unwrap()
                })
                .collect()
        };
        let e = boxes(10, 1.0, &mut rng);
        let q = boxes(20, 0.0, &mut rng);
        assert!(matches!(fit_fisher(&e, &q, Ridge::Fixed(0.0)), Err(Error::Singular(_))));
        assert!(fit_fisher(&e, &q, Ridge::Auto).is_ok());
    }

    #[test]
    fn shape_errors() {
        assert!(fit_fisher(&[], &[pixel(0.0)], Ridge::Auto).is_err());
        assert!(fit_fisher(&[pixel(0.0)], &[], Ridge::Auto).is_err());
        assert!(fit_fisher(&[pixel(0.0)], &[Frame::zeros(2, 2)], Ridge::Auto).is_err());
        let clf = BoxClassifier::new(2, vec![0.0; 4], 1.5, 0.0).unwrap();
        assert!(box_score(&clf, &Frame::zeros(3, 3)).is_err());
        assert!(BoxClassifier::new(2, vec![0.0; 3], 0.0, 0.0).is_err());
    }

    #[test]
    fn zero_weights_score_is_bias() {
        let clf = BoxClassifier::new(3, vec![0.0; 9], -0.25, 0.0).unwrap();
        assert_eq!(box_score(&clf, &Frame::filled(3, 3, 7.0)).unwrap(), -0.25);
    }

    #[test]
    fn json_schema() {
        let clf = BoxClassifier::new(2, vec![1.0, 2.0, 3.0, 4.0], 0.5, 0.01).unwrap();
        let json = clf.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["box_size"], 2);
        assert_eq!(v["weights"].as_array().unwrap().len(), 4);
        assert_eq!(BoxClassifier::from_json(&json).unwrap(), clf);
        let bad = r#"{"box_size": 2, "lambda": 0.0, "bias": 0.0, "weights": [1.0]}"#;
        assert!(BoxClassifier::from_json(bad).is_err());
    }
}
