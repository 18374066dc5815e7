//! Experiment configuration: JSON schema, presets and validation.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tevent_core::scenarios::TrainingSpec;
use tevent_core::scoring::{MatchStatistic, MixtureSpec, Ridge};
use tevent_core::WindowConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Independent samples, standard normal when quiescent, Gaussian mixture during events.
    Univariate,
    /// Noisy images with an interesting pyramid during events.
    Image1,
    /// As `image1`, with uninteresting inverted pyramids between events.
    Image2,
}

impl Scenario {
    pub fn is_image(self) -> bool {
        matches!(self, Scenario::Image1 | Scenario::Image2)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Univariate => "univariate",
            Scenario::Image1 => "image1",
            Scenario::Image2 => "image2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    TargetedDlik,
    TargetedDdif,
    Kolmogorov,
    IndependentKolmogorov,
    PixelMaxdiff,
    Monkey,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 6] = [
        DetectorKind::TargetedDlik,
        DetectorKind::TargetedDdif,
        DetectorKind::Kolmogorov,
        DetectorKind::IndependentKolmogorov,
        DetectorKind::PixelMaxdiff,
        DetectorKind::Monkey,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::TargetedDlik => "targeted-dlik",
            DetectorKind::TargetedDdif => "targeted-ddif",
            DetectorKind::Kolmogorov => "kolmogorov",
            DetectorKind::IndependentKolmogorov => "independent-kolmogorov",
            DetectorKind::PixelMaxdiff => "pixel-maxdiff",
            DetectorKind::Monkey => "monkey",
        }
    }

    pub fn supports(self, scenario: Scenario) -> bool {
        match self {
            DetectorKind::Monkey | DetectorKind::TargetedDdif => true,
            DetectorKind::TargetedDlik | DetectorKind::Kolmogorov | DetectorKind::IndependentKolmogorov => {
                scenario == Scenario::Univariate
            }
            DetectorKind::PixelMaxdiff => scenario.is_image(),
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Event density parameters: components `N(+-mu, sigma2)`, event prior `pi1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureParams {
    pub mu: f64,
    pub sigma2: f64,
    pub pi1: f64,
}

impl Default for MixtureParams {
    fn default() -> Self {
        Self {
            mu: 0.9,
            sigma2: 0.19,
            pi1: 0.5,
        }
    }
}

impl MixtureParams {
    pub fn spec(&self) -> tevent_core::Result<MixtureSpec> {
        MixtureSpec::from_variance(self.mu, self.sigma2, self.pi1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingParams {
    pub event_frames: usize,
    pub quiescent_boxes: usize,
    pub ridge: Ridge,
    pub match_statistic: MatchStatistic,
}

impl Default for TrainingParams {
    fn default() -> Self {
        let t = TrainingSpec::default();
        Self {
            event_frames: t.event_frames,
            quiescent_boxes: t.quiescent_boxes,
            ridge: t.ridge,
            match_statistic: t.match_statistic,
        }
    }
}

impl TrainingParams {
    pub fn spec(&self) -> TrainingSpec {
        TrainingSpec {
            event_frames: self.event_frames,
            quiescent_boxes: self.quiescent_boxes,
            ridge: self.ridge,
            match_statistic: self.match_statistic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageParams {
    pub frame_size: usize,
    /// Side of the pyramids and of the classifier boxes.
    pub box_size: usize,
    pub interesting_intensity: f64,
    pub uninteresting_intensity: f64,
    pub training: TrainingParams,
}

impl Default for ImageParams {
    fn default() -> Self {
        Self {
            frame_size: 100,
            box_size: 10,
            interesting_intensity: 3.0,
            uninteresting_intensity: 3.0,
            training: TrainingParams::default(),
        }
    }
}

/// Fixed lengths of noise periods (`N`) and uninteresting events (`U`).
/// Unset lengths default to `R + C + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimelineParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uninteresting_len: Option<usize>,
}

impl TimelineParams {
    pub fn resolve(&self, window: &WindowConfig) -> (usize, usize) {
        let fallback = window.current + window.reference + 1;
        (
            self.noise_len.unwrap_or(fallback),
            self.uninteresting_len.unwrap_or(fallback),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarlo {
    pub hit_trials: usize,
    pub false_alarm_steps: usize,
    /// Replicates per boundary position in the interval-state decomposition.
    pub boundary_trials: usize,
    /// Cap on the number of thresholds per ROC curve.
    pub roc_points: usize,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        Self {
            hit_trials: 100_000,
            false_alarm_steps: 1_000_000,
            boundary_trials: 500,
            roc_points: 2_000,
        }
    }
}

fn default_name() -> String {
    "custom".into()
}

fn default_clip() -> f64 {
    tevent_core::detection::ClipPolicy::default().epsilon
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub scenario: Scenario,
    pub detectors: Vec<DetectorKind>,
    pub window: WindowConfig,
    #[serde(default)]
    pub mixture: MixtureParams,
    #[serde(default)]
    pub image: ImageParams,
    #[serde(default)]
    pub timeline: TimelineParams,
    #[serde(default)]
    pub monte_carlo: MonteCarlo,
    #[serde(default = "default_clip")]
    pub clip_epsilon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Also write a gnuplot script plotting every ROC curve.
    #[serde(default)]
    pub plot_script: bool,
    /// Also write sample data: a detection stream CSV or example frames.
    #[serde(default)]
    pub export_samples: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    Invalid,
    Incompatible,
}

/// One configuration problem, tied to the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            kind: DiagnosticKind::Invalid,
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            DiagnosticKind::Invalid => "invalid",
            DiagnosticKind::Incompatible => "incompatible",
        };
        write!(f, "{tag} {}: {}", self.field, self.message)
    }
}

impl ExperimentConfig {
    /// Every violation in the configuration; empty when it is valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let w = &self.window;
        for (name, v) in [("current", w.current), ("reference", w.reference), ("tolerance", w.tolerance)] {
            if v == 0 {
                out.push(Diagnostic::invalid(format!("window.{name}"), "window sizes must be at least 1"));
            }
        }

        if self.detectors.is_empty() {
            out.push(Diagnostic::invalid("detectors", "list at least one detector"));
        }
        let mut seen = HashSet::new();
        for (i, d) in self.detectors.iter().enumerate() {
            if !seen.insert(*d) {
                out.push(Diagnostic::invalid(format!("detectors[{i}]"), format!("{d} listed twice")));
            }
            if !d.supports(self.scenario) {
                out.push(Diagnostic {
                    kind: DiagnosticKind::Incompatible,
                    field: format!("detectors[{i}]"),
                    message: format!("{d} cannot run on the {} scenario", self.scenario),
                });
            }
        }

        if self.scenario == Scenario::Univariate {
            let m = &self.mixture;
            if !m.mu.is_finite() {
                out.push(Diagnostic::invalid("mixture.mu", "must be finite"));
            }
            if !(m.sigma2 > 0.0 && m.sigma2.is_finite()) {
                out.push(Diagnostic::invalid("mixture.sigma2", "component variance must be positive"));
            }
            if !(m.pi1 > 0.0 && m.pi1 < 1.0) {
                out.push(Diagnostic::invalid("mixture.pi1", "event prior must lie in (0, 1)"));
            }
            if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 0.5) {
                out.push(Diagnostic::invalid("clip_epsilon", "must lie in (0, 1/2)"));
            }
        } else {
            self.validate_image(&mut out);
        }

        let mc = &self.monte_carlo;
        if mc.hit_trials == 0 {
            out.push(Diagnostic::invalid("monte_carlo.hit_trials", "need at least one trial"));
        }
        if mc.false_alarm_steps == 0 {
            out.push(Diagnostic::invalid("monte_carlo.false_alarm_steps", "need at least one step"));
        }
        if self.scenario == Scenario::Image2 && mc.boundary_trials == 0 {
            out.push(Diagnostic::invalid("monte_carlo.boundary_trials", "need at least one trial"));
        }
        if mc.roc_points < 3 {
            out.push(Diagnostic::invalid("monte_carlo.roc_points", "need at least 3 thresholds"));
        }
        out
    }

    fn validate_image(&self, out: &mut Vec<Diagnostic>) {
        let img = &self.image;
        if img.box_size == 0 {
            out.push(Diagnostic::invalid("image.box_size", "must be at least 1"));
        }
        if img.frame_size < img.box_size {
            out.push(Diagnostic::invalid(
                "image.frame_size",
                format!("frames of side {} cannot hold {}-pixel boxes", img.frame_size, img.box_size),
            ));
        }
        if !img.interesting_intensity.is_finite() {
            out.push(Diagnostic::invalid("image.interesting_intensity", "must be finite"));
        }
        if !img.uninteresting_intensity.is_finite() {
            out.push(Diagnostic::invalid("image.uninteresting_intensity", "must be finite"));
        }
        let t = &img.training;
        if t.event_frames == 0 {
            out.push(Diagnostic::invalid("image.training.event_frames", "need at least one event frame"));
        }
        if t.quiescent_boxes == 0 {
            out.push(Diagnostic::invalid("image.training.quiescent_boxes", "need at least one quiescent box"));
        }
        if let Ridge::Fixed(l) = t.ridge {
            if !(l >= 0.0 && l.is_finite()) {
                out.push(Diagnostic::invalid("image.training.ridge", "ridge must be finite and non-negative"));
            }
        }
        if self.scenario == Scenario::Image2 {
            let span = self.window.current + self.window.reference;
            let (n, u) = self.timeline.resolve(&self.window);
            for (name, len) in [("timeline.noise_len", n), ("timeline.uninteresting_len", u)] {
                if len <= span {
                    out.push(Diagnostic::invalid(
                        name,
                        format!(
                            "noise periods and uninteresting events must last longer than R + C = {span} steps, got {len}"
                        ),
                    ));
                }
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

pub const PRESETS: [&str; 5] = ["fig4", "fig6", "fig7-rc11", "fig7-rc24", "fig8"];

fn window(current: usize, reference: usize, tolerance: usize) -> WindowConfig {
    WindowConfig {
        current,
        reference,
        tolerance,
    }
}

fn image_preset(name: &str, scenario: Scenario, win: WindowConfig, intensity: f64, seed: u64) -> ExperimentConfig {
    let detectors = vec![DetectorKind::TargetedDdif, DetectorKind::PixelMaxdiff, DetectorKind::Monkey];
    let span = win.current + win.reference;
    ExperimentConfig {
        name: name.into(),
        scenario,
        detectors,
        window: win,
        mixture: MixtureParams::default(),
        image: ImageParams {
            interesting_intensity: intensity,
            uninteresting_intensity: intensity,
            ..ImageParams::default()
        },
        timeline: TimelineParams {
            noise_len: Some(span + 1),
            uninteresting_len: Some(span + 1),
        },
        monte_carlo: MonteCarlo {
            hit_trials: 10_000,
            false_alarm_steps: 100_000,
            boundary_trials: 500,
            roc_points: 2_000,
        },
        clip_epsilon: default_clip(),
        seed,
        output_dir: PathBuf::from("out").join(name),
        plot_script: true,
        export_samples: false,
    }
}

/// Built-in experiment by name.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let cfg = match name {
        "fig4" => ExperimentConfig {
            name: name.into(),
            scenario: Scenario::Univariate,
            detectors: vec![
                DetectorKind::TargetedDlik,
                DetectorKind::Kolmogorov,
                DetectorKind::IndependentKolmogorov,
                DetectorKind::Monkey,
            ],
            window: window(20, 20, 20),
            mixture: MixtureParams::default(),
            image: ImageParams::default(),
            timeline: TimelineParams::default(),
            monte_carlo: MonteCarlo::default(),
            // Oracle scores never approach 0 or 1 closely enough to need clipping.
            clip_epsilon: 1e-300,
            seed: 4,
            output_dir: PathBuf::from("out/fig4"),
            plot_script: true,
            export_samples: false,
        },
        "fig6" => image_preset(name, Scenario::Image1, window(1, 10, 1), 3.0, 6),
        "fig7-rc11" => image_preset(name, Scenario::Image2, window(1, 10, 1), 3.0, 7),
        "fig7-rc24" => image_preset(name, Scenario::Image2, window(1, 23, 1), 3.0, 7),
        "fig8" => image_preset(name, Scenario::Image2, window(1, 10, 1), 5.0, 8),
        _ => return None,
    };
    Some(cfg)
}

/// Why a configuration could not be assembled.
#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("unknown preset {0:?} (available: {list})", list = PRESETS.join(", "))]
    UnknownPreset(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("give a config file, a preset, or both")]
    NothingToLoad,
}

/// Recursively overlays `patch` onto `base`; objects merge, everything else replaces.
pub fn merge_json(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, p) => *slot = p,
    }
}

/// Assembles a configuration from a preset, a JSON file, or a preset with the
/// file's fields overriding it.
pub fn load(config_path: Option<&Path>, preset_name: Option<&str>) -> Result<ExperimentConfig, LoadError> {
    let mut value = match preset_name {
        Some(p) => serde_json::to_value(preset(p).ok_or_else(|| LoadError::UnknownPreset(p.into()))?)
            .expect("preset serializes"),
        None => Value::Object(Default::default()),
    };
    let label = match config_path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| LoadError::Read {
                path: path.into(),
                source,
            })?;
            let patch: Value = serde_json::from_str(&text).map_err(|source| LoadError::Parse {
                path: path.display().to_string(),
                source,
            })?;
            merge_json(&mut value, patch);
            path.display().to_string()
        }
        None if preset_name.is_none() => return Err(LoadError::NothingToLoad),
        None => format!("preset {}", preset_name.unwrap_or_default()),
    };
    serde_json::from_value(value).map_err(|source| LoadError::Parse { path: label, source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_round_trip() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            assert!(cfg.validate().is_empty(), "{name}: {:?}", cfg.validate());
            assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        }
        assert!(preset("fig5").is_none());
    }

    #[test]
    fn zero_tolerance_is_reported() {
        let mut cfg = preset("fig4").unwrap();
        cfg.window.tolerance = 0;
        let d = cfg.validate();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].field, "window.tolerance");
    }

    #[test]
    fn short_noise_periods_are_reported() {
        let mut cfg = preset("fig7-rc11").unwrap();
        cfg.timeline.noise_len = Some(11);
        let d = cfg.validate();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].field, "timeline.noise_len");
        assert!(d[0].message.contains("R + C = 11"));
    }

    #[test]
    fn all_violations_are_listed() {
        let mut cfg = preset("fig6").unwrap();
        cfg.window.current = 0;
        cfg.monte_carlo.hit_trials = 0;
        cfg.detectors.push(DetectorKind::Kolmogorov);
        cfg.image.box_size = 200;
        let d = cfg.validate();
        let fields: Vec<&str> = d.iter().map(|d| d.field.as_str()).collect();
        assert_eq!(
            fields,
            ["window.current", "detectors[3]", "image.frame_size", "monte_carlo.hit_trials"]
        );
        assert_eq!(d[1].kind, DiagnosticKind::Incompatible);
    }

    #[test]
    fn detector_scenario_pairs() {
        assert!(DetectorKind::TargetedDlik.supports(Scenario::Univariate));
        assert!(!DetectorKind::TargetedDlik.supports(Scenario::Image1));
        assert!(!DetectorKind::PixelMaxdiff.supports(Scenario::Univariate));
        assert!(!DetectorKind::Kolmogorov.supports(Scenario::Image2));
        for d in DetectorKind::ALL {
            let json = serde_json::to_string(&d).unwrap();
            assert_eq!(json, format!("\"{}\"", d.name()));
        }
    }

    #[test]
    fn merge_overrides_nested_fields() {
        let mut base = serde_json::json!({"a": {"b": 1, "c": 2}, "d": [1]});
        merge_json(&mut base, serde_json::json!({"a": {"c": 5}, "d": [2, 3]}));
        assert_eq!(base, serde_json::json!({"a": {"b": 1, "c": 5}, "d": [2, 3]}));
    }

    #[test]
    fn load_from_preset_and_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed": 99, "monte_carlo": {"hit_trials": 10}}"#).unwrap();
        let cfg = load(Some(&path), Some("fig4")).unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.monte_carlo.hit_trials, 10);
        assert_eq!(cfg.monte_carlo.false_alarm_steps, 1_000_000);
        assert!(matches!(load(Some(&path), None), Err(LoadError::Parse { .. })));
        assert!(matches!(load(None, Some("nope")), Err(LoadError::UnknownPreset(_))));
        assert!(matches!(load(None, None), Err(LoadError::NothingToLoad)));

        std::fs::write(&path, r#"{"seed": 1, "windows": {}}"#).unwrap();
        let err = load(Some(&path), Some("fig4")).unwrap_err().to_string();
        assert!(err.contains("windows"), "{err}");
    }
}
