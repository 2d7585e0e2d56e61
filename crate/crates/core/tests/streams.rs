use gazefuse::geometry::{FrameId, FrameKind, Point3, Pose};
use gazefuse::streams::{gaze_window, sample_bound, GazeRecord, StreamError, TimeInterval, Transcript, WordTiming};
use proptest::prelude::*;

fn stream(rate: f64, t0: f64, n: usize) -> Vec<GazeRecord> {
    (0..n)
        .map(|i| {
            let t = t0 + i as f64 / rate;
            GazeRecord { t, gaze_pupil: Point3::new(t, 0.0, 1.0), head_pose: Pose::identity(FrameId::new(FrameKind::SlamWorld)) }
        })
        .collect()
}

proptest! {
    #[test]
    fn window_has_bound_plus_one_samples(start in 0.0..5.0f64, dur in 0.05..3.0f64, rate in 5.0..60.0f64) {
        let s = stream(rate, 0.0, (10.0 * rate) as usize);
        let iv = TimeInterval::new(start, start + dur).unwrap();
        match sample_bound(dur, rate) {
            Some(n) => {
                let w = gaze_window(&s, iv, rate).unwrap();
                prop_assert_eq!(w.len(), n + 1);
                prop_assert!((n as f64) <= dur * rate - 1.0 + 1e-9);
                prop_assert!((n as f64 + 1.0) > dur * rate - 1.0);
                // each entry is the record nearest its tick
                for (k, r) in w.iter().enumerate() {
                    let tick = start + k as f64 / rate;
                    let best = s.iter().map(|x| (x.t - tick).abs()).fold(f64::INFINITY, f64::min);
                    prop_assert!(((r.t - tick).abs() - best).abs() < 1e-12);
                }
            }
            None => {
                let is_degenerate = matches!(gaze_window(&s, iv, rate), Err(StreamError::DegenerateInterval { .. }));
                prop_assert!(is_degenerate);
            }
        }
    }
}

#[test]
fn bound_examples() {
    assert_eq!(sample_bound(0.15, 20.0), Some(2));
    assert_eq!(sample_bound(0.5, 20.0), Some(9));
    assert_eq!(sample_bound(0.04, 20.0), None);
    assert_eq!(sample_bound(0.05, 20.0), Some(0));
}

#[test]
fn ties_go_to_the_earlier_record() {
    let mut s = stream(4.0, 0.0, 2);
    s[0].t = 0.25;
    s[1].t = 0.75;
    // the only tick, 0.5, is equidistant from both records
    let w = gaze_window(&s, TimeInterval::new(0.5, 0.75).unwrap(), 4.0).unwrap();
    assert_eq!(w.len(), 1);
    assert_eq!(w[0].t, 0.25);
}

#[test]
fn window_outside_the_stream_is_empty() {
    let s = stream(20.0, 0.0, 10);
    let err = gaze_window(&s, TimeInterval::new(5.0, 6.0).unwrap(), 20.0).unwrap_err();
    assert!(matches!(err, StreamError::EmptyWindow { .. }));
}

#[test]
fn transcript_lookup_by_occurrence() {
    let t = Transcript::from_words(vec![
        WordTiming::new("put", 0.0, 0.2),
        WordTiming::new("this", 0.3, 0.5),
        WordTiming::new("on", 0.6, 0.7),
        WordTiming::new("This,", 0.8, 1.0),
    ])
    .unwrap();
    assert_eq!(t.find("this", 1).unwrap().t_start, 0.8);
    assert!(t.find("this", 2).is_none());
    assert_eq!(t.raw_text, "put this on This,");
    assert!(Transcript::from_words(vec![WordTiming::new("a", 1.0, 0.5)]).is_err());
}
