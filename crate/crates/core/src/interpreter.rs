//! Command interpretation: transcript to referential slots (O₁).
//!
//! The rule-based grammar covers demonstratives, pronouns, locatives and noun
//! phrases. A remote agent can be used instead; its reply is gated by
//! [`validate_o1`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::agent::{Agent, AgentError, AgentRequest, INTERPRET_TEMPLATE};
use crate::lexicon::{self, is_in, is_noun, is_verb};
use crate::scene::{GENERIC_CATEGORY, POSITION_CATEGORY};
use crate::streams::{normalize_text, word_interval, StreamError, TimeInterval, Transcript, WordTiming};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetProperty {
    Object,
    Position,
}

impl TargetProperty {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Object => "object",
            Self::Position => "position",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSlot {
    pub property: TargetProperty,
    pub category: String,
    pub interval: TimeInterval,
    pub source_word: String,
    /// Which appearance of `source_word` in the transcript (0-based).
    pub occurrence: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretedCommand {
    pub slots: Vec<TargetSlot>,
    pub transcript: Transcript,
}

impl InterpretedCommand {
    /// Transcript word index of each slot's source word.
    pub fn slot_word_indices(&self) -> Vec<Option<usize>> {
        self.slots
            .iter()
            .map(|s| {
                let target = normalize_text(&s.source_word);
                self.transcript
                    .words
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| w.normalized() == target)
                    .nth(s.occurrence)
                    .map(|(i, _)| i)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpreterMode {
    #[default]
    RuleBased,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InterpreterConfig {
    pub mode: InterpreterMode,
    /// Seconds added to each side of a slot interval, clamped to the transcript span.
    pub padding_s: f64,
    pub model_id: Option<String>,
    pub temperature: Option<f64>,
}

impl Default for InterpreterConfig {
    fn default() -> Self {
        Self { mode: InterpreterMode::RuleBased, padding_s: 0.0, model_id: None, temperature: None }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterpretError {
    #[error("transcript is empty")]
    EmptyTranscript,
    #[error("command has no referential expression")]
    NoTargetFound,
    #[error("remote mode needs an agent")]
    AgentRequired,
    #[error("agent: {0}")]
    RemoteAgentError(#[from] AgentError),
    #[error("malformed agent output: {}", .0.join("; "))]
    MalformedAgentOutput(Vec<String>),
    #[error(transparent)]
    Stream(#[from] StreamError),
}

struct Token {
    text: String,
    word: usize,
}

fn tokenize(transcript: &Transcript) -> Vec<Token> {
    transcript
        .words
        .iter()
        .enumerate()
        .flat_map(|(word, w)| {
            w.normalized().split(' ').filter(|t| !t.is_empty()).map(|t| Token { text: t.to_string(), word }).collect::<Vec<_>>()
        })
        .collect()
}

const PARTICLES: &[&str] = &["up", "down"];
const ARTICLES: &[&str] = &["the", "a", "an", "my", "your", "its", "this", "that"];

/// Skips articles/possessives starting at `j`; returns the next index.
fn skip_articles(tokens: &[Token], mut j: usize) -> usize {
    while j < tokens.len() && is_in(ARTICLES, &tokens[j].text) {
        j += 1;
    }
    j
}

/// End (exclusive) of the noun run starting at `j`.
fn noun_run(tokens: &[Token], j: usize, skip: &[bool]) -> usize {
    let mut k = j;
    while k < tokens.len() && !skip[k] && is_noun(&tokens[k].text) {
        k += 1;
    }
    k
}

fn follows_verb(tokens: &[Token], i: usize) -> bool {
    let mut j = i;
    while j > 0 {
        j -= 1;
        let t = tokens[j].text.as_str();
        if is_verb(t) {
            return true;
        }
        if !is_in(PARTICLES, t) && t != "please" {
            return false;
        }
    }
    false
}

fn category_for_noun(noun: &str) -> String {
    if is_in(lexicon::GENERIC_NOUNS, noun) {
        GENERIC_CATEGORY.to_string()
    } else {
        noun.to_string()
    }
}

struct RawSlot {
    property: TargetProperty,
    category: String,
    word: usize,
}

fn parse_slots(tokens: &[Token]) -> Vec<RawSlot> {
    let mut skip = vec![false; tokens.len()];
    for (idx, _) in lexicon::quantities(&tokens.iter().map(|t| t.text.clone()).collect::<Vec<_>>()) {
        skip[idx] = true;
        if idx + 1 < skip.len() {
            skip[idx + 1] = true;
        }
    }

    let mut slots: Vec<RawSlot> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if skip[i] {
            i += 1;
            continue;
        }
        let t = tokens[i].text.as_str();

        if t == "some" || is_in(lexicon::CONTENT_WORDS, t) {
            // indefinite contents: "pour something", "some water", "some thing"
            let next = noun_run(tokens, i + 1, &skip);
            i = if t == "some" { next.max(i + 1) } else { i + 1 };
            continue;
        }

        if is_in(lexicon::DEMONSTRATIVES, t) {
            let end = noun_run(tokens, i + 1, &skip);
            if end > i + 1 {
                let head = &tokens[end - 1];
                let category = category_for_noun(&head.text);
                let word = if category == GENERIC_CATEGORY { tokens[i].word } else { head.word };
                slots.push(RawSlot { property: TargetProperty::Object, category, word });
                i = end;
            } else {
                slots.push(RawSlot { property: TargetProperty::Object, category: GENERIC_CATEGORY.into(), word: tokens[i].word });
                i += 1;
            }
            continue;
        }

        if is_in(lexicon::PRONOUNS, t) {
            // "lift it", "turn it": refers back to the held object
            if !(follows_verb(tokens, i) && !slots.is_empty()) {
                slots.push(RawSlot { property: TargetProperty::Object, category: GENERIC_CATEGORY.into(), word: tokens[i].word });
            }
            i += 1;
            continue;
        }

        if is_in(lexicon::LOCATIVES, t) {
            let mut category = POSITION_CATEGORY.to_string();
            let mut next = i + 1;
            if next < tokens.len() && is_in(lexicon::SURFACE_PREPOSITIONS, &tokens[next].text) {
                let start = skip_articles(tokens, next + 1);
                let end = noun_run(tokens, start, &skip);
                if end > start {
                    category = category_for_noun(&tokens[end - 1].text);
                    if category == GENERIC_CATEGORY {
                        category = POSITION_CATEGORY.into();
                    }
                    next = end;
                }
            }
            slots.push(RawSlot { property: TargetProperty::Position, category, word: tokens[i].word });
            i = next;
            continue;
        }

        if is_noun(t) {
            let end = noun_run(tokens, i, &skip);
            let head = &tokens[end - 1];
            slots.push(RawSlot { property: TargetProperty::Object, category: category_for_noun(&head.text), word: head.word });
            i = end;
            continue;
        }
        i += 1;
    }
    slots
}

/// Rule-based interpretation.
pub fn interpret(transcript: &Transcript, cfg: &InterpreterConfig) -> Result<InterpretedCommand, InterpretError> {
    if transcript.is_empty() {
        return Err(InterpretError::EmptyTranscript);
    }
    let tokens = tokenize(transcript);
    let raw = parse_slots(&tokens);
    if raw.is_empty() {
        return Err(InterpretError::NoTargetFound);
    }
    let span = transcript.span();
    let slots = raw
        .into_iter()
        .map(|r| {
            let word = transcript.words[r.word].normalized();
            let occurrence = transcript.occurrence_index(r.word);
            let interval = word_interval(transcript, &word, occurrence)?.padded(cfg.padding_s, span);
            Ok(TargetSlot { property: r.property, category: r.category, interval, source_word: word, occurrence })
        })
        .collect::<Result<Vec<_>, StreamError>>()?;
    Ok(InterpretedCommand { slots, transcript: transcript.clone() })
}

/// Agent request for interpreting `transcript`.
pub fn interpret_request(transcript: &Transcript, cfg: &InterpreterConfig) -> AgentRequest {
    let mut vars = BTreeMap::new();
    vars.insert("transcript".to_string(), transcript.raw_text.clone());
    vars.insert(
        "word_timings".to_string(),
        serde_json::to_string(&transcript.words).expect("word timings serialize"),
    );
    let mut req = AgentRequest::new(INTERPRET_TEMPLATE, vars);
    if let Some(m) = &cfg.model_id {
        req.model_id = m.clone();
    }
    if let Some(t) = cfg.temperature {
        req.temperature = t;
    }
    req
}

/// Recovers the transcript from an interpret request's variables.
pub fn transcript_from_request(req: &AgentRequest) -> Option<Transcript> {
    let words: Vec<WordTiming> = serde_json::from_str(req.variables.get("word_timings")?).ok()?;
    let raw = req.variables.get("transcript")?;
    Transcript::new(words, raw.clone()).ok()
}

/// Interprets through `agent`, validating and padding the reply.
pub fn interpret_with_agent(
    transcript: &Transcript,
    cfg: &InterpreterConfig,
    agent: &dyn Agent,
) -> Result<Interpretation, InterpretError> {
    if transcript.is_empty() {
        return Err(InterpretError::EmptyTranscript);
    }
    let reply = agent.complete(&interpret_request(transcript, cfg))?;
    let mut out = validate_o1(&reply.text, transcript)?;
    let span = transcript.span();
    for slot in &mut out.command.slots {
        slot.interval = slot.interval.padded(cfg.padding_s, span);
    }
    Ok(out)
}

/// Dispatches on `cfg.mode`.
pub fn interpret_configured(
    transcript: &Transcript,
    cfg: &InterpreterConfig,
    agent: Option<&dyn Agent>,
) -> Result<Interpretation, InterpretError> {
    match cfg.mode {
        InterpreterMode::RuleBased => {
            Ok(Interpretation { command: interpret(transcript, cfg)?, warnings: Vec::new() })
        }
        InterpreterMode::Remote => interpret_with_agent(transcript, cfg, agent.ok_or(InterpretError::AgentRequired)?),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interpretation {
    pub command: InterpretedCommand,
    pub warnings: Vec<String>,
}

pub fn serialize_o1(cmd: &InterpretedCommand) -> String {
    let slots: Vec<Value> = cmd
        .slots
        .iter()
        .map(|s| {
            json!({
                "label": s.property.as_str(),
                "category": s.category,
                "word": s.source_word,
                "occurrence": s.occurrence,
                "t_start": s.interval.start,
                "t_end": s.interval.end,
            })
        })
        .collect();
    json!({ "slots": slots }).to_string()
}

/// Removes a surrounding markdown code fence, if any.
pub(crate) fn strip_code_fence(raw: &str) -> &str {
    let t = raw.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let body = rest.split_once('\n').map_or("", |(_, b)| b);
        return body.trim_end().strip_suffix("```").unwrap_or(body).trim();
    }
    t
}

/// Schema gate for O₁ replies. Intervals are clamped to the transcript span
/// (with a warning); slots are returned in order of interval start.
pub fn validate_o1(raw: &str, transcript: &Transcript) -> Result<Interpretation, InterpretError> {
    let malformed = |msgs: Vec<String>| InterpretError::MalformedAgentOutput(msgs);
    let value: Value = serde_json::from_str(strip_code_fence(raw))
        .map_err(|e| malformed(vec![format!("line {} column {}: {e}", e.line(), e.column())]))?;
    let slots_v = value
        .get("slots")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed(vec!["slots: expected an array".into()]))?;
    let span = transcript.span().ok_or(InterpretError::EmptyTranscript)?;

    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let mut slots = Vec::new();
    for (i, s) in slots_v.iter().enumerate() {
        let mut err = |field: &str, msg: &str| errors.push(format!("slots[{i}].{field}: {msg}"));
        let Some(obj) = s.as_object() else {
            errors.push(format!("slots[{i}]: expected an object"));
            continue;
        };
        let property = match obj.get("label").and_then(Value::as_str).map(normalize_text).as_deref() {
            Some("object") => Some(TargetProperty::Object),
            Some("position") => Some(TargetProperty::Position),
            Some(other) => {
                err("label", &format!("expected \"object\" or \"position\", found {other:?}"));
                None
            }
            None => {
                err("label", "missing or not a string");
                None
            }
        };
        let category = match obj.get("category").and_then(Value::as_str).map(normalize_text) {
            Some(c) if !c.is_empty() => Some(c),
            Some(_) => {
                err("category", "empty");
                None
            }
            None => {
                err("category", "missing or not a string");
                None
            }
        };
        let occurrence = match obj.get("occurrence") {
            None | Some(Value::Null) => Some(0),
            Some(v) => match v.as_u64() {
                Some(n) => Some(n as usize),
                None => {
                    err("occurrence", "expected a non-negative integer");
                    None
                }
            },
        };
        let word = match obj.get("word").and_then(Value::as_str).map(normalize_text) {
            Some(w) if w.is_empty() => {
                err("word", "empty");
                None
            }
            Some(w) => match occurrence {
                Some(occ) if transcript.find(&w, occ).is_none() => {
                    err("word", &format!("{w:?} (occurrence {occ}) not in transcript"));
                    None
                }
                _ => Some(w),
            },
            None => {
                err("word", "missing or not a string");
                None
            }
        };
        let time = |k: &str| obj.get(k).and_then(Value::as_f64).filter(|v| v.is_finite());
        let (t_start, t_end) = (time("t_start"), time("t_end"));
        if t_start.is_none() {
            err("t_start", "missing or not a finite number");
        }
        if t_end.is_none() {
            err("t_end", "missing or not a finite number");
        }
        let interval = match (t_start, t_end) {
            (Some(a), Some(b)) if a > b => {
                err("t_start", &format!("{a} is after t_end {b}"));
                None
            }
            (Some(a), Some(b)) => {
                let clamped = TimeInterval { start: a.clamp(span.start, span.end), end: b.clamp(span.start, span.end) };
                if clamped.start != a || clamped.end != b {
                    warnings.push(format!(
                        "slots[{i}]: interval [{a}, {b}] clamped to [{}, {}]",
                        clamped.start, clamped.end
                    ));
                }
                Some(clamped)
            }
            _ => None,
        };
        if let (Some(property), Some(category), Some(source_word), Some(occurrence), Some(interval)) =
            (property, category, word, occurrence, interval)
        {
            slots.push(TargetSlot { property, category, interval, source_word, occurrence });
        }
    }
    if !errors.is_empty() {
        return Err(malformed(errors));
    }
    if slots.is_empty() {
        return Err(InterpretError::NoTargetFound);
    }
    if slots.windows(2).any(|p| p[1].interval.start < p[0].interval.start) {
        warnings.push("slots reordered by interval start".into());
        slots.sort_by(|a, b| a.interval.start.total_cmp(&b.interval.start));
    }
    Ok(Interpretation { command: InterpretedCommand { slots, transcript: transcript.clone() }, warnings })
}

/// Splits text into words with uniform timing: each word lasts `word_s`
/// seconds followed by a `gap_s` pause, starting at `t0`.
pub fn timed_transcript(text: &str, t0: f64, word_s: f64, gap_s: f64) -> Result<Transcript, StreamError> {
    let words = text
        .split_whitespace()
        .enumerate()
        .map(|(i, w)| {
            let start = t0 + i as f64 * (word_s + gap_s);
            WordTiming::new(w, start, start + word_s)
        })
        .collect();
    Transcript::new(words, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(text: &str) -> Transcript {
        timed_transcript(text, 0.0, 0.4, 0.1).unwrap()
    }

    fn summary(text: &str) -> Vec<(TargetProperty, String, String)> {
        interpret(&tr(text), &InterpreterConfig::default())
            .unwrap()
            .slots
            .into_iter()
            .map(|s| (s.property, s.category, s.source_word))
            .collect()
    }

    fn obj(c: &str, w: &str) -> (TargetProperty, String, String) {
        (TargetProperty::Object, c.into(), w.into())
    }

    fn pos(c: &str, w: &str) -> (TargetProperty, String, String) {
        (TargetProperty::Position, c.into(), w.into())
    }

    #[test]
    fn apple_example() {
        assert_eq!(summary("please put the apple there on the table"), vec![obj("apple", "apple"), pos("table", "there")]);
        let t = tr("Please put the apple there, on the table.");
        let cmd = interpret(&t, &InterpreterConfig::default()).unwrap();
        assert_eq!(cmd.slots[0].interval, t.words[3].interval());
        assert_eq!(cmd.slots[1].interval, t.words[4].interval());
    }

    #[test]
    fn demonstratives_and_locatives() {
        assert_eq!(summary("pick up this"), vec![obj("stuff", "this")]);
        assert_eq!(summary("put this there"), vec![obj("stuff", "this"), pos("position", "there")]);
        assert_eq!(summary("put this apple there"), vec![obj("apple", "apple"), pos("position", "there")]);
        assert_eq!(summary("grab that thing"), vec![obj("stuff", "that")]);
        assert_eq!(summary("grab the pieces"), vec![obj("stuff", "pieces")]);
    }

    #[test]
    fn anaphora_contents_and_quantities() {
        assert_eq!(
            summary("grab this and lift it up for 10 centimeters then turn it for 90 degrees"),
            vec![obj("stuff", "this")]
        );
        assert_eq!(
            summary("put the apple on the plate then pour some thing from the cup on it"),
            vec![obj("apple", "apple"), obj("plate", "plate"), obj("cup", "cup"), obj("stuff", "it")]
        );
        assert_eq!(summary("put it there"), vec![obj("stuff", "it"), pos("position", "there")]);
    }

    #[test]
    fn repeated_words_bind_left_to_right() {
        let cmd = interpret(&tr("put this on this then put this on that"), &InterpreterConfig::default()).unwrap();
        let occ: Vec<usize> = cmd.slots.iter().map(|s| s.occurrence).collect();
        assert_eq!(occ, vec![0, 1, 2, 0]);
        let starts: Vec<f64> = cmd.slots.iter().map(|s| s.interval.start).collect();
        assert!(starts.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn padding_is_clamped_to_span() {
        let t = tr("grab this");
        let cfg = InterpreterConfig { padding_s: 0.2, ..Default::default() };
        let cmd = interpret(&t, &cfg).unwrap();
        let w = &t.words[1];
        assert_eq!(cmd.slots[0].interval, TimeInterval { start: w.t_start - 0.2, end: w.t_end });
    }

    #[test]
    fn no_target() {
        assert_eq!(interpret(&tr("open up please"), &InterpreterConfig::default()), Err(InterpretError::NoTargetFound));
    }

    #[test]
    fn o1_round_trip() {
        let t = tr("please put the apple there on the table");
        let cmd = interpret(&t, &InterpreterConfig::default()).unwrap();
        let back = validate_o1(&serialize_o1(&cmd), &t).unwrap();
        assert_eq!(back.command, cmd);
        assert!(back.warnings.is_empty());
        let fenced = format!("```json\n{}\n```", serialize_o1(&cmd));
        assert_eq!(validate_o1(&fenced, &t).unwrap().command, cmd);
    }

    #[test]
    fn o1_rejects_bad_fields() {
        let t = tr("put the apple there");
        let raw = r#"{"slots":[{"label":"thing","category":"","word":"banana","t_start":"x","t_end":1}]}"#;
        let Err(InterpretError::MalformedAgentOutput(msgs)) = validate_o1(raw, &t) else { panic!() };
        let joined = msgs.join("\n");
        for field in ["slots[0].label", "slots[0].category", "slots[0].word", "slots[0].t_start"] {
            assert!(joined.contains(field), "{joined}");
        }
        assert!(matches!(validate_o1("not json", &t), Err(InterpretError::MalformedAgentOutput(_))));
        assert!(matches!(validate_o1(r#"{"slots":[]}"#, &t), Err(InterpretError::NoTargetFound)));
    }

    #[test]
    fn o1_clamps_intervals() {
        let t = tr("put the apple there");
        let raw = r#"{"slots":[{"label":"object","category":"apple","word":"apple","t_start":-1.0,"t_end":99.0}]}"#;
        let out = validate_o1(raw, &t).unwrap();
        let span = t.span().unwrap();
        assert_eq!(out.command.slots[0].interval, span);
        assert_eq!(out.warnings.len(), 1);
    }
}
