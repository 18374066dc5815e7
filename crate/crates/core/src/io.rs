//! File exports: ROC and detection-stream CSV, JSON documents, PGM frames and
//! raw float32 frame dumps with a JSON sidecar.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::types::{DetectionStream, RocCurve, RocPoint};

/// CSV with header `tau,f,h`. Infinite thresholds print as `inf` / `-inf`.
pub fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("tau,f,h\n");
    for p in curve.points() {
        let _ = writeln!(out, "{},{},{}", p.tau, p.false_alarm_rate, p.hit_rate);
    }
    out
}

pub fn write_roc_csv(path: &Path, curve: &RocCurve) -> Result<()> {
    fs::write(path, roc_csv(curve))?;
    Ok(())
}

/// Parses the output of [`roc_csv`].
pub fn parse_roc_csv(text: &str) -> Result<RocCurve> {
    let mut lines = text.lines();
    if lines.next() != Some("tau,f,h") {
        return Err(Error::InvalidRoc("missing `tau,f,h` header".into()));
    }
    let points = lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidRoc(format!("bad number {s:?}: {e}")))
            };
            match fields.as_slice() {
                [tau, f, h] => Ok(RocPoint {
                    tau: parse(tau)?,
                    false_alarm_rate: parse(f)?,
                    hit_rate: parse(h)?,
                }),
                _ => Err(Error::InvalidRoc(format!("expected 3 columns: {line:?}"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    RocCurve::new(points)
}

/// CSV with header `t,value` over the defined range of the stream.
pub fn detection_csv(stream: &DetectionStream) -> String {
    let mut out = String::from("t,value\n");
    for (t, v) in stream.iter() {
        let _ = writeln!(out, "{t},{v}");
    }
    out
}

pub fn write_detection_csv(path: &Path, stream: &DetectionStream) -> Result<()> {
    fs::write(path, detection_csv(stream))?;
    Ok(())
}

/// ROC curve bundled with the experiment configuration that produced it.
#[derive(Debug, Serialize)]
pub struct RocDocument<'a, C: Serialize> {
    pub detector: &'a str,
    pub seed: u64,
    pub config: &'a C,
    pub points: &'a [RocPoint],
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Binary 8-bit PGM, grey levels scaled linearly from the frame's min to max.
pub fn write_pgm(path: &Path, frame: &Frame) -> Result<()> {
    let (lo, hi) = frame
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = if hi > lo { hi - lo } else { 1.0 };
    let mut bytes = format!("P5\n{} {}\n255\n", frame.cols(), frame.rows()).into_bytes();
    bytes.extend(
        frame
            .data()
            .iter()
            .map(|&v| (((v - lo) / range) * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    fs::write(path, bytes)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Sidecar<'a, M: Serialize> {
    rows: usize,
    cols: usize,
    frames: usize,
    dtype: &'static str,
    order: &'static str,
    metadata: &'a M,
}

/// Writes `<stem>.f32` (little-endian float32, row-major, frame after frame)
/// and `<stem>.json` describing shape and carrying `metadata`.
pub fn write_frames_f32<M: Serialize>(dir: &Path, stem: &str, frames: &[Frame], metadata: &M) -> Result<()> {
    let first = frames.first().ok_or(Error::Empty("no frames to write"))?;
    let shape = first.shape();
    if let Some(f) = frames.iter().find(|f| f.shape() != shape) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", shape.0, shape.1),
            got: format!("{}x{}", f.rows(), f.cols()),
        });
    }
    let mut w = BufWriter::new(fs::File::create(dir.join(format!("{stem}.f32")))?);
    for f in frames {
        for &v in f.data() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    let sidecar = Sidecar {
        rows: shape.0,
        cols: shape.1,
        frames: frames.len(),
        dtype: "float32-le",
        order: "row-major",
        metadata,
    };
    write_json(&dir.join(format!("{stem}.json")), &sidecar)
}
