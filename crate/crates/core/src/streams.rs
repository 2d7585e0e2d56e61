//! Human-view input streams: word-timed transcript, gaze records with head
//! poses, and frame references.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point3, Pose};

/// Head-pose rate of the SLAM camera; gaze is sampled once per head pose.
pub const DEFAULT_GAZE_RATE_HZ: f64 = 20.0;

/// Absorbs representation error in `Δt × rate` (e.g. 0.15 × 20) before flooring.
const FLOOR_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StreamError {
    #[error("no gaze records intersect [{start}, {end}]")]
    EmptyWindow { start: f64, end: f64 },
    #[error("interval [{start}, {end}] yields no samples at {rate_hz} Hz")]
    DegenerateInterval { start: f64, end: f64, rate_hz: f64 },
    #[error("word {word:?} (occurrence {occurrence}) not found in transcript")]
    WordNotFound { word: String, occurrence: usize },
    #[error("invalid stream: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeInterval {
    pub start: f64,
    pub end: f64,
}

impl TimeInterval {
    pub fn new(start: f64, end: f64) -> Result<Self, StreamError> {
        if !(start.is_finite() && end.is_finite()) || start > end {
            return Err(StreamError::Invalid(format!("bad interval [{start}, {end}]")));
        }
        Ok(Self { start, end })
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t <= self.end
    }

    pub fn contains_interval(&self, other: &TimeInterval) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// Widens by `padding` on both sides, then clamps to `bounds`.
    pub fn padded(&self, padding: f64, bounds: Option<TimeInterval>) -> TimeInterval {
        let mut out = TimeInterval { start: self.start - padding, end: self.end + padding };
        if let Some(b) = bounds {
            out.start = out.start.clamp(b.start, b.end);
            out.end = out.end.clamp(b.start, b.end);
        }
        out
    }
}

/// Lowercase, strip punctuation, collapse whitespace.
pub fn normalize_text(s: &str) -> String {
    let cleaned: String = s
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c.to_ascii_lowercase() } else { ' ' })
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordTiming {
    pub text: String,
    pub t_start: f64,
    pub t_end: f64,
}

impl WordTiming {
    pub fn new(text: impl Into<String>, t_start: f64, t_end: f64) -> Self {
        Self { text: text.into(), t_start, t_end }
    }

    pub fn interval(&self) -> TimeInterval {
        TimeInterval { start: self.t_start, end: self.t_end }
    }

    pub fn normalized(&self) -> String {
        normalize_text(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TranscriptRecord")]
pub struct Transcript {
    pub words: Vec<WordTiming>,
    pub raw_text: String,
}

#[derive(Deserialize)]
struct TranscriptRecord {
    words: Vec<WordTiming>,
    #[serde(default)]
    raw_text: Option<String>,
}

impl TryFrom<TranscriptRecord> for Transcript {
    type Error = StreamError;

    fn try_from(r: TranscriptRecord) -> Result<Self, StreamError> {
        match r.raw_text {
            Some(raw) => Transcript::new(r.words, raw),
            None => Transcript::from_words(r.words),
        }
    }
}

impl Transcript {
    pub fn new(words: Vec<WordTiming>, raw_text: impl Into<String>) -> Result<Self, StreamError> {
        let t = Self { words, raw_text: raw_text.into() };
        t.validate()?;
        Ok(t)
    }

    pub fn from_words(words: Vec<WordTiming>) -> Result<Self, StreamError> {
        let raw = words.iter().map(|w| w.text.as_str()).collect::<Vec<_>>().join(" ");
        Self::new(words, raw)
    }

    /// Builds a transcript from `(word, t_start, t_end)` triples.
    pub fn from_timed(words: &[(&str, f64, f64)]) -> Result<Self, StreamError> {
        Self::from_words(words.iter().map(|&(w, a, b)| WordTiming::new(w, a, b)).collect())
    }

    pub fn validate(&self) -> Result<(), StreamError> {
        for (i, w) in self.words.iter().enumerate() {
            if !(w.t_start.is_finite() && w.t_end.is_finite()) || w.t_start > w.t_end {
                return Err(StreamError::Invalid(format!(
                    "word {i} ({:?}) has bad timing [{}, {}]",
                    w.text, w.t_start, w.t_end
                )));
            }
        }
        for (i, pair) in self.words.windows(2).enumerate() {
            if pair[1].t_start < pair[0].t_end {
                return Err(StreamError::Invalid(format!(
                    "words {i} and {} overlap or are out of order",
                    i + 1
                )));
            }
        }
        let joined = normalize_text(
            &self.words.iter().map(|w| w.text.as_str()).collect::<Vec<_>>().join(" "),
        );
        if joined != normalize_text(&self.raw_text) {
            return Err(StreamError::Invalid(format!(
                "word sequence {joined:?} does not match raw text {:?}",
                self.raw_text
            )));
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// First word start to last word end.
    pub fn span(&self) -> Option<TimeInterval> {
        Some(TimeInterval { start: self.words.first()?.t_start, end: self.words.last()?.t_end })
    }

    /// Timing of the `occurrence`-th (0-based) appearance of `word`, compared after normalization.
    pub fn find(&self, word: &str, occurrence: usize) -> Option<&WordTiming> {
        let target = normalize_text(word);
        self.words.iter().filter(|w| w.normalized() == target).nth(occurrence)
    }

    /// Number of times `word` appears before index `idx`.
    pub fn occurrence_index(&self, idx: usize) -> usize {
        let target = self.words[idx].normalized();
        self.words[..idx].iter().filter(|w| w.normalized() == target).count()
    }
}

pub fn word_interval(
    transcript: &Transcript,
    word: &str,
    occurrence: usize,
) -> Result<TimeInterval, StreamError> {
    transcript
        .find(word, occurrence)
        .map(WordTiming::interval)
        .ok_or_else(|| StreamError::WordNotFound { word: word.to_string(), occurrence })
}

/// [`word_interval`] widened by `padding` seconds each side and clamped to `bounds`.
pub fn word_interval_padded(
    transcript: &Transcript,
    word: &str,
    occurrence: usize,
    padding: f64,
    bounds: Option<TimeInterval>,
) -> Result<TimeInterval, StreamError> {
    Ok(word_interval(transcript, word, occurrence)?.padded(padding, bounds))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeRecord {
    pub t: f64,
    /// Gaze point in the pupil frame at `t`.
    pub gaze_pupil: Point3,
    /// Head pose: glasses camera at `t` into the SLAM world frame.
    pub head_pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRef {
    pub t: f64,
    pub frame_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanInput {
    pub transcript: Transcript,
    pub gaze_stream: Vec<GazeRecord>,
    #[serde(default)]
    pub frames: Vec<FrameRef>,
}

impl HumanInput {
    pub fn validate(&self) -> Result<(), StreamError> {
        self.transcript.validate()?;
        ensure_ordered(self.gaze_stream.iter().map(|r| r.t), "gaze stream")?;
        ensure_ordered(self.frames.iter().map(|f| f.t), "frame refs")?;
        if self.common_interval().is_none() {
            return Err(StreamError::Invalid("streams share no common time interval".into()));
        }
        Ok(())
    }

    /// Intersection of the transcript, gaze and frame time spans.
    pub fn common_interval(&self) -> Option<TimeInterval> {
        let mut spans = vec![self.transcript.span()?, stream_span(&self.gaze_stream)?];
        if let (Some(a), Some(b)) = (self.frames.first(), self.frames.last()) {
            spans.push(TimeInterval { start: a.t, end: b.t });
        }
        let start = spans.iter().map(|s| s.start).fold(f64::NEG_INFINITY, f64::max);
        let end = spans.iter().map(|s| s.end).fold(f64::INFINITY, f64::min);
        (start <= end).then_some(TimeInterval { start, end })
    }
}

fn ensure_ordered(times: impl Iterator<Item = f64>, what: &str) -> Result<(), StreamError> {
    let mut prev = f64::NEG_INFINITY;
    for (i, t) in times.enumerate() {
        if !t.is_finite() || t < prev {
            return Err(StreamError::Invalid(format!("{what}: entry {i} at t={t} is out of order")));
        }
        prev = t;
    }
    Ok(())
}

pub fn stream_span(stream: &[GazeRecord]) -> Option<TimeInterval> {
    Some(TimeInterval { start: stream.first()?.t, end: stream.last()?.t })
}

/// Index bound `N = ⌊Δt·rate − 1⌋`, or `None` when it is negative.
pub fn sample_bound(duration: f64, rate_hz: f64) -> Option<usize> {
    let n = (duration * rate_hz - 1.0 + FLOOR_EPS).floor();
    (n >= 0.0).then_some(n as usize)
}

/// One gaze record per head-pose tick `t_a + k/rate`, `k = 0..=N`, each the
/// record nearest in time to its tick (earlier record on ties).
pub fn gaze_window(
    stream: &[GazeRecord],
    interval: TimeInterval,
    rate_hz: f64,
) -> Result<Vec<&GazeRecord>, StreamError> {
    let degenerate = || StreamError::DegenerateInterval {
        start: interval.start,
        end: interval.end,
        rate_hz,
    };
    if rate_hz.is_nan() || rate_hz <= 0.0 || interval.start > interval.end {
        return Err(degenerate());
    }
    let n = sample_bound(interval.duration(), rate_hz).ok_or_else(degenerate)?;
    if !stream.iter().any(|r| interval.contains(r.t)) {
        return Err(StreamError::EmptyWindow { start: interval.start, end: interval.end });
    }
    Ok((0..=n)
        .map(|k| &stream[nearest_index(stream, interval.start + k as f64 / rate_hz)])
        .collect())
}

fn nearest_index(stream: &[GazeRecord], t: f64) -> usize {
    let after = stream.partition_point(|r| r.t < t);
    if after == 0 {
        return 0;
    }
    if after == stream.len() {
        return stream.len() - 1;
    }
    let before = after - 1;
    // ties go to the earlier record
    if t - stream[before].t <= stream[after].t - t {
        before
    } else {
        after
    }
}
