//! Deterministic planner: expands recognized command clauses into primitives.

use super::policy::{ActionParams, ActionPrimitive, Policy, Position, Provenance, Step};
use super::{PlanError, PlannerState};
use crate::geometry::Point2;
use crate::lexicon::{self, is_in, is_verb, Quantity};

const PICK: &[&str] = &["pick", "grab", "take", "get", "fetch", "hold"];
const PUT: &[&str] = &["put", "place", "set", "drop", "bring"];
const LIFT: &[&str] = &["lift", "raise"];
const LOWER: &[&str] = &["lower"];
const TURN: &[&str] = &["turn", "rotate", "twist"];
const POUR: &[&str] = &["pour"];
const SWAP: &[&str] = &["swap", "exchange", "switch"];
const MOVE: &[&str] = &["move", "go", "push"];

struct Clause {
    verb: Option<String>,
    slots: Vec<usize>,
    tokens: Vec<String>,
}

fn tokens_with_words(state: &PlannerState) -> Vec<(String, usize)> {
    state
        .transcript
        .words
        .iter()
        .enumerate()
        .flat_map(|(i, w)| w.normalized().split(' ').filter(|t| !t.is_empty()).map(|t| (t.to_string(), i)).collect::<Vec<_>>())
        .collect()
}

/// Splits at "then" and at "and" followed by a verb.
fn clauses(state: &PlannerState) -> Result<Vec<Clause>, PlanError> {
    let tokens = tokens_with_words(state);
    let slot_words: Vec<usize> = state
        .command
        .slot_word_indices()
        .into_iter()
        .enumerate()
        .map(|(i, w)| w.ok_or_else(|| PlanError::InvalidState(format!("slot {i} word not in transcript"))))
        .collect::<Result<_, _>>()?;

    let mut bounds = Vec::new();
    let mut start = 0;
    for (i, (t, _)) in tokens.iter().enumerate() {
        let split = t == "then" || (t == "and" && tokens.get(i + 1).is_some_and(|(n, _)| is_verb(n)));
        if split {
            bounds.push((start, i));
            start = i + 1;
        }
    }
    bounds.push((start, tokens.len()));

    let mut out = Vec::new();
    let mut last_verb: Option<String> = None;
    for (a, b) in bounds {
        if a >= b {
            continue;
        }
        let (w0, w1) = (tokens[a].1, tokens[b - 1].1);
        let toks: Vec<String> = tokens[a..b].iter().map(|(t, _)| t.clone()).collect();
        let slots: Vec<usize> = (0..slot_words.len()).filter(|&s| (w0..=w1).contains(&slot_words[s])).collect();
        let verb = toks.iter().find(|t| is_verb(t)).cloned().or_else(|| last_verb.clone());
        last_verb = verb.clone();
        out.push(Clause { verb, slots, tokens: toks });
    }
    Ok(out)
}

struct Held {
    slot: usize,
    origin: Point2,
}

struct Builder<'a> {
    state: &'a PlannerState,
    steps: Vec<Step>,
    held: Option<Held>,
}

fn unsupported(msg: impl Into<String>) -> PlanError {
    PlanError::UnsupportedCommand(msg.into())
}

impl<'a> Builder<'a> {
    fn px(p: Point2) -> Position {
        Position::Pixel(p)
    }

    fn target(&self, slot: usize) -> ActionParams {
        ActionParams::target(self.state.label(slot), Self::px(self.state.position(slot)))
    }

    fn push(&mut self, p: ActionPrimitive, params: ActionParams) {
        self.steps.push(Step::new(p, params));
    }

    fn pick(&mut self, slot: usize) -> Result<(), PlanError> {
        if self.held.is_some() {
            return Err(unsupported("pick while already holding an object"));
        }
        self.push(ActionPrimitive::OpenGripper, ActionParams::default());
        self.push(ActionPrimitive::Pick, self.target(slot));
        self.push(ActionPrimitive::CloseGripper, ActionParams::default());
        self.held = Some(Held { slot, origin: self.state.position(slot) });
        Ok(())
    }

    fn put_at(&mut self, params: ActionParams) -> Result<(), PlanError> {
        if self.held.take().is_none() {
            return Err(unsupported("put without a held object"));
        }
        self.push(ActionPrimitive::Put, params);
        self.push(ActionPrimitive::OpenGripper, ActionParams::default());
        Ok(())
    }

    fn put_on(&mut self, dest: usize) -> Result<(), PlanError> {
        self.put_at(self.target(dest))
    }

    /// Returns the held object to where it was picked up.
    fn put_back(&mut self) -> Result<(), PlanError> {
        let h = self.held.as_ref().ok_or_else(|| unsupported("nothing to put back"))?;
        let params = ActionParams::target(self.state.label(h.slot), Self::px(h.origin));
        self.put_at(params)
    }

    fn clause(&mut self, c: &Clause) -> Result<(), PlanError> {
        let verb = c.verb.as_deref().unwrap_or("");
        let qs = lexicon::quantities(&c.tokens);
        let distance = qs.iter().find_map(|(_, q)| match q {
            Quantity::Distance(d) => Some(*d),
            _ => None,
        });
        let angle = qs.iter().find_map(|(_, q)| match q {
            Quantity::Angle(a) => Some(*a),
            _ => None,
        });
        let slots = c.slots.as_slice();

        if is_in(PICK, verb) {
            match slots {
                [s] => self.pick(*s),
                [] if self.held.is_some() => Ok(()),
                [] => Err(unsupported(format!("nothing to {verb}"))),
                _ => Err(unsupported(format!("cannot {verb} {} objects at once", slots.len()))),
            }
        } else if is_in(LIFT, verb) || is_in(LOWER, verb) {
            if let [s] = slots {
                self.pick(*s)?;
            } else if !slots.is_empty() {
                return Err(unsupported(format!("cannot {verb} {} objects at once", slots.len())));
            }
            match distance {
                Some(d) => {
                    let d = if is_in(LOWER, verb) { -d } else { d };
                    self.push(ActionPrimitive::MoveZ, ActionParams::distance(d));
                    Ok(())
                }
                None if !slots.is_empty() => Ok(()),
                None => Err(unsupported(format!("{verb} without a distance"))),
            }
        } else if is_in(TURN, verb) {
            let a = angle.ok_or_else(|| unsupported(format!("{verb} without an angle")))?;
            self.push(ActionPrimitive::Rotate, ActionParams::angle(a));
            Ok(())
        } else if is_in(PUT, verb) {
            self.put(slots, verb)
        } else if is_in(POUR, verb) {
            match slots {
                [src, target] => {
                    self.pick(*src)?;
                    self.push(ActionPrimitive::Pour, self.target(*target));
                    self.put_back()
                }
                [target] if self.held.is_some() => {
                    self.push(ActionPrimitive::Pour, self.target(*target));
                    self.put_back()
                }
                _ => Err(unsupported("pour needs a source container and a target")),
            }
        } else if is_in(SWAP, verb) {
            match slots {
                [a, b] => self.swap(*a, *b),
                _ => Err(unsupported("swap needs exactly two objects")),
            }
        } else if is_in(MOVE, verb) {
            match (slots, distance) {
                ([], Some(d)) => {
                    let (axis, sign) = direction(&c.tokens);
                    self.push(axis, ActionParams::distance(sign * d));
                    Ok(())
                }
                ([s], None) if self.held.is_none() || c.tokens.iter().any(|t| t == "to") => {
                    self.push(ActionPrimitive::MoveTo, self.target(*s));
                    Ok(())
                }
                (s, None) if !s.is_empty() => self.put(s, verb),
                _ => Err(unsupported(format!("cannot parse {verb} clause"))),
            }
        } else if verb == "open" && slots.is_empty() {
            self.push(ActionPrimitive::OpenGripper, ActionParams::default());
            self.held = None;
            Ok(())
        } else if verb == "close" && slots.is_empty() {
            self.push(ActionPrimitive::CloseGripper, ActionParams::default());
            Ok(())
        } else if slots.is_empty() && qs.is_empty() && verb.is_empty() {
            Ok(())
        } else {
            Err(unsupported(format!("no rule for clause {:?}", c.tokens.join(" "))))
        }
    }

    /// `put A [and B ...] on D`, or `put on D` with something already held.
    fn put(&mut self, slots: &[usize], verb: &str) -> Result<(), PlanError> {
        let Some((&dest, objects)) = slots.split_last() else {
            return Err(unsupported(format!("{verb} without a destination")));
        };
        if objects.is_empty() {
            return if self.held.is_some() {
                self.put_on(dest)
            } else {
                Err(unsupported(format!("nothing to {verb}")))
            };
        }
        for &o in objects {
            self.pick(o)?;
            self.put_on(dest)?;
        }
        Ok(())
    }

    /// A to staging, B to A's spot, A from staging to B's spot.
    fn swap(&mut self, a: usize, b: usize) -> Result<(), PlanError> {
        let staging = self.state.workspace.staging;
        let (pa, pb) = (self.state.position(a), self.state.position(b));
        self.pick(a)?;
        self.put_at(ActionParams::target("staging", Self::px(staging)))?;
        self.pick(b)?;
        self.put_at(ActionParams::target(self.state.label(a), Self::px(pa)))?;
        // A now sits at the staging spot rather than at its slot position
        self.push(ActionPrimitive::OpenGripper, ActionParams::default());
        self.push(ActionPrimitive::Pick, ActionParams::target(self.state.label(a), Self::px(staging)));
        self.push(ActionPrimitive::CloseGripper, ActionParams::default());
        self.held = Some(Held { slot: a, origin: staging });
        self.put_at(ActionParams::target(self.state.label(b), Self::px(pb)))
    }
}

fn direction(tokens: &[String]) -> (ActionPrimitive, f64) {
    for t in tokens {
        match t.as_str() {
            "up" => return (ActionPrimitive::MoveZ, 1.0),
            "down" => return (ActionPrimitive::MoveZ, -1.0),
            "left" => return (ActionPrimitive::MoveY, 1.0),
            "right" => return (ActionPrimitive::MoveY, -1.0),
            "forward" | "forwards" => return (ActionPrimitive::MoveX, 1.0),
            "back" | "backward" | "backwards" => return (ActionPrimitive::MoveX, -1.0),
            _ => {}
        }
    }
    (ActionPrimitive::MoveX, 1.0)
}

/// Rule-based policy for `state`.
pub fn plan_rule_based(state: &PlannerState) -> Result<Policy, PlanError> {
    state.validate()?;
    let mut b = Builder { state, steps: Vec::new(), held: None };
    for c in clauses(state)? {
        b.clause(&c)?;
    }
    if b.steps.is_empty() {
        return Err(unsupported(format!("no actions for {:?}", state.transcript.raw_text)));
    }
    Ok(Policy { steps: b.steps, provenance: Provenance::RuleBased })
}
