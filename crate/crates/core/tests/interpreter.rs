use gazefuse::harness::metrics::TEMPLATES;
use gazefuse::interpreter::{
    interpret, serialize_o1, timed_transcript, validate_o1, InterpretError, InterpreterConfig, TargetProperty,
};
use gazefuse::lexicon;
use proptest::prelude::*;

fn words(text: &str) -> gazefuse::streams::Transcript {
    timed_transcript(text, 0.5, 0.5, 0.1).unwrap()
}

#[test]
fn template_slot_counts_match_parameter_counts() {
    for row in TEMPLATES {
        let t = words(row.instance);
        let cmd = interpret(&t, &InterpreterConfig::default()).unwrap();
        let tokens: Vec<String> = t.words.iter().map(|w| w.normalized()).collect();
        let scalars = lexicon::quantities(&tokens).len();
        assert_eq!(cmd.slots.len() + scalars, row.params as usize, "{}: {:?}", row.id, cmd.slots);
    }
}

#[test]
fn apple_there_example() {
    let t = words("please put the apple there on the table");
    let cmd = interpret(&t, &InterpreterConfig::default()).unwrap();
    let got: Vec<(TargetProperty, &str, &str)> =
        cmd.slots.iter().map(|s| (s.property, s.category.as_str(), s.source_word.as_str())).collect();
    assert_eq!(got, vec![(TargetProperty::Object, "apple", "apple"), (TargetProperty::Position, "table", "there")]);
    assert_eq!(cmd.slots[0].interval, t.find("apple", 0).unwrap().interval());
    assert_eq!(cmd.slots[1].interval, t.find("there", 0).unwrap().interval());
}

#[test]
fn deictic_and_generic_references() {
    let cmd = interpret(&words("put this on that"), &InterpreterConfig::default()).unwrap();
    assert!(cmd.slots.iter().all(|s| s.category == "stuff" && s.property == TargetProperty::Object));
    let cmd = interpret(&words("grab the pieces"), &InterpreterConfig::default()).unwrap();
    assert_eq!(cmd.slots[0].category, "stuff");
    let cmd = interpret(&words("put this there"), &InterpreterConfig::default()).unwrap();
    assert_eq!(cmd.slots[1].property, TargetProperty::Position);
    assert_eq!(cmd.slots[1].category, "position");
}

#[test]
fn repeated_words_track_occurrence() {
    let t = words("put this and this on that");
    let cmd = interpret(&t, &InterpreterConfig::default()).unwrap();
    let occ: Vec<usize> = cmd.slots.iter().map(|s| s.occurrence).collect();
    assert_eq!(occ, vec![0, 1, 0]);
    assert!(cmd.slots[0].interval.end < cmd.slots[1].interval.start);
}

#[test]
fn commands_without_targets_fail() {
    let err = interpret(&words("please move up for 10 centimeters"), &InterpreterConfig::default()).unwrap_err();
    assert!(matches!(err, InterpretError::NoTargetFound));
}

#[test]
fn malformed_o1_reports_fields() {
    let t = words("pick up the apple");
    let err = validate_o1(r#"{"slots":[{"label":"thing","category":"apple","word":"apple"}]}"#, &t).unwrap_err();
    let InterpretError::MalformedAgentOutput(msgs) = err else { panic!("wrong error") };
    assert!(msgs.iter().any(|m| m.starts_with("slots[0].label")));
    assert!(msgs.iter().any(|m| m.starts_with("slots[0].t_start")));
    assert!(validate_o1("not json", &t).is_err());
    assert!(validate_o1(r#"{"slots":[]}"#, &t).is_err());
}

#[test]
fn fenced_and_out_of_range_o1_is_repaired_with_warnings() {
    let t = words("pick up the apple");
    let raw = "```json\n{\"slots\":[{\"label\":\"object\",\"category\":\"Apple\",\"word\":\"apple\",\"t_start\":0.0,\"t_end\":99}]}\n```";
    let out = validate_o1(raw, &t).unwrap();
    let span = t.span().unwrap();
    assert_eq!(out.command.slots[0].category, "apple");
    assert_eq!(out.command.slots[0].interval.start, span.start);
    assert_eq!(out.command.slots[0].interval.end, span.end);
    assert_eq!(out.warnings.len(), 1);
}

proptest! {
    #[test]
    fn o1_round_trips(idx in 0usize..16, t0 in 0.0..5.0f64, word_s in 0.2..0.8f64, gap in 0.0..0.3f64) {
        let t = timed_transcript(TEMPLATES[idx].instance, t0, word_s, gap).unwrap();
        let cmd = interpret(&t, &InterpreterConfig::default()).unwrap();
        let back = validate_o1(&serialize_o1(&cmd), &t).unwrap();
        prop_assert!(back.warnings.is_empty());
        prop_assert_eq!(back.command, cmd);
    }

    #[test]
    fn slots_lie_inside_the_transcript(idx in 0usize..16, pad in 0.0..1.0f64) {
        let t = words(TEMPLATES[idx].instance);
        let cfg = InterpreterConfig { padding_s: pad, ..InterpreterConfig::default() };
        let span = t.span().unwrap();
        for s in interpret(&t, &cfg).unwrap().slots {
            prop_assert!(span.contains_interval(&s.interval));
            prop_assert!(s.interval.start <= s.interval.end);
        }
    }
}
