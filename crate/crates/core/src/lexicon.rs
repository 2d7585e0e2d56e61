//! Closed word classes for the rule-based command grammar.

pub const VERBS: &[&str] = &[
    "put", "place", "set", "drop", "pick", "grab", "take", "get", "fetch", "lift", "raise", "lower",
    "pour", "swap", "exchange", "switch", "move", "go", "turn", "rotate", "twist", "bring", "give",
    "hand", "open", "close", "push", "hold",
];

pub const DEMONSTRATIVES: &[&str] = &["this", "that", "these", "those"];
pub const PRONOUNS: &[&str] = &["it", "them"];
pub const LOCATIVES: &[&str] = &["here", "there"];
pub const SURFACE_PREPOSITIONS: &[&str] = &["on", "in", "onto", "into", "at"];

pub const FUNCTION_WORDS: &[&str] = &[
    "the", "a", "an", "my", "your", "its", "please", "and", "then", "also", "after", "up", "down",
    "on", "in", "onto", "into", "at", "from", "to", "for", "with", "of", "off", "over", "by", "about",
    "around", "some", "can", "could", "you", "would", "will", "now", "again", "me", "i", "robot",
    "gripper", "hand", "arm", "left", "right", "forward", "forwards", "back", "backward", "backwards",
    "degree", "degrees", "deg", "so", "just", "too", "is", "be", "all", "way",
];

/// Nouns that denote "whatever I am looking at".
pub const GENERIC_NOUNS: &[&str] = &[
    "thing", "things", "stuff", "piece", "pieces", "object", "objects", "one", "item", "items",
];

/// Indefinite contents ("pour something"); never a referent.
pub const CONTENT_WORDS: &[&str] = &["something", "anything", "everything", "liquid", "contents"];

pub const NUMBER_WORDS: &[(&str, f64)] = &[
    ("zero", 0.0), ("one", 1.0), ("two", 2.0), ("three", 3.0), ("four", 4.0), ("five", 5.0),
    ("six", 6.0), ("seven", 7.0), ("eight", 8.0), ("nine", 9.0), ("ten", 10.0), ("fifteen", 15.0),
    ("twenty", 20.0), ("thirty", 30.0), ("forty", 40.0), ("fortyfive", 45.0), ("fifty", 50.0),
    ("sixty", 60.0), ("ninety", 90.0), ("hundred", 100.0),
];

/// Length units and their size in meters.
pub const LENGTH_UNITS: &[(&str, f64)] = &[
    ("m", 1.0), ("meter", 1.0), ("meters", 1.0), ("metre", 1.0), ("metres", 1.0),
    ("cm", 0.01), ("centimeter", 0.01), ("centimeters", 0.01), ("centimetre", 0.01),
    ("centimetres", 0.01), ("mm", 0.001), ("millimeter", 0.001), ("millimeters", 0.001),
    ("inch", 0.0254), ("inches", 0.0254),
];

pub const ANGLE_UNITS: &[&str] = &["degree", "degrees", "deg"];

pub fn is_in(list: &[&str], w: &str) -> bool {
    list.contains(&w)
}

pub fn is_verb(w: &str) -> bool {
    is_in(VERBS, w)
}

pub fn parse_number(w: &str) -> Option<f64> {
    if let Ok(v) = w.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    NUMBER_WORDS.iter().find(|(s, _)| *s == w).map(|(_, v)| *v)
}

pub fn length_unit(w: &str) -> Option<f64> {
    LENGTH_UNITS.iter().find(|(s, _)| *s == w).map(|(_, v)| *v)
}

/// A content word that can head a noun phrase.
pub fn is_noun(w: &str) -> bool {
    !w.is_empty()
        && !is_verb(w)
        && !is_in(DEMONSTRATIVES, w)
        && !is_in(PRONOUNS, w)
        && !is_in(LOCATIVES, w)
        && !is_in(FUNCTION_WORDS, w)
        && !is_in(CONTENT_WORDS, w)
        && length_unit(w).is_none()
        && w.parse::<f64>().is_err()
        && !(parse_number(w).is_some() && w != "one")
}

/// A scalar quantity mentioned in a command ("10 centimeters", "90 degrees").
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantity {
    /// meters
    Distance(f64),
    /// degrees
    Angle(f64),
}

/// Scans `tokens` for `<number> <unit>` pairs, returning `(index, quantity)`.
pub fn quantities(tokens: &[String]) -> Vec<(usize, Quantity)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if let Some(v) = parse_number(&tokens[i]).filter(|_| tokens[i] != "one") {
            if let Some(next) = tokens.get(i + 1) {
                if let Some(scale) = length_unit(next) {
                    out.push((i, Quantity::Distance(v * scale)));
                    i += 2;
                    continue;
                }
                if is_in(ANGLE_UNITS, next) {
                    out.push((i, Quantity::Angle(v)));
                    i += 2;
                    continue;
                }
            }
        }
        i += 1;
    }
    out
}
