mod common;

use common::*;
use gazefuse::alignment::{align, align_with, synth_matches, AlignConfig, AlignmentError, KeypointMatch, MatchNoise, MatchSet, Scoring};
use gazefuse::geometry::Point2;
use gazefuse::scene::{BBox, Mask, View};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn boxes() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec((0..120u32, 0..70u32, 1..20u32, 1..20u32), 1..6).prop_map(|v| {
        v.into_iter()
            .map(|(x, y, w, h)| {
                let (x, y) = (f64::from(x) * 10.0, f64::from(y) * 10.0);
                (x, y, x + f64::from(w) * 10.0, y + f64::from(h) * 10.0)
            })
            .collect()
    })
}

fn matches_at(pts: &[(f64, f64)]) -> MatchSet {
    MatchSet {
        matches: pts
            .iter()
            .map(|&(x, y)| KeypointMatch { human_pt: Point2::new(1.0, 1.0), robot_pt: Point2::new(x, y), confidence: 0.5 })
            .collect(),
        source_bbox: BBox::new(0.0, 0.0, 2.0, 2.0),
    }
}

proptest! {
    #[test]
    fn align_matches_counting_oracle(
        bs in boxes(),
        pts in prop::collection::vec((0..128u32, 0..72u32), 0..40),
        min_count in 0usize..4,
    ) {
        // keypoints on the 10 px lattice land on box edges often
        let pts: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (f64::from(x) * 10.0, f64::from(y) * 10.0)).collect();
        let objs = bs.iter().enumerate().map(|(i, b)| obs(&format!("b{i}"), BBox::new(b.0, b.1, b.2, b.3), None)).collect();
        let regions: Vec<(String, Region)> =
            bs.iter().enumerate().map(|(i, b)| (format!("b{i}"), Region::Rect(b.0, b.1, b.2, b.3))).collect();
        let got = align_with(&matches_at(&pts), &scene_from(objs, View::Robot), &AlignConfig { min_count, ..Default::default() })
            .ok()
            .map(|r| r.referred.observation.id);
        prop_assert_eq!(got, align_oracle(&pts, &regions, min_count));
    }

    #[test]
    fn noiseless_synthetic_matches_find_the_target(seed in any::<u64>(), target in 0usize..4) {
        let bs = [
            BBox::new(100.0, 100.0, 200.0, 200.0),
            BBox::new(300.0, 100.0, 400.0, 200.0),
            BBox::new(100.0, 400.0, 200.0, 500.0),
            BBox::new(600.0, 300.0, 700.0, 420.0),
        ];
        let scene = scene_from(bs.iter().enumerate().map(|(i, b)| obs(&format!("r{i}"), *b, None)).collect(), View::Robot);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = synth_matches(BBox::new(0.0, 0.0, 50.0, 50.0), Some(bs[target]), &robot_k(), &MatchNoise::default(), &mut rng);
        let r = align(&m, &scene).unwrap();
        prop_assert_eq!(r.referred.observation.id, format!("r{target}"));
        prop_assert_eq!(r.counts[&format!("r{target}")], MatchNoise::default().per_object);
    }
}

#[test]
fn edge_points_count_for_both_adjacent_boxes() {
    let scene = scene_from(
        vec![obs("left", BBox::new(0.0, 0.0, 10.0, 10.0), None), obs("right", BBox::new(10.0, 0.0, 20.0, 10.0), None)],
        View::Robot,
    );
    let r = align(&matches_at(&[(10.0, 5.0), (10.0, 0.0)]), &scene).unwrap();
    assert_eq!(r.counts["left"], 2);
    assert_eq!(r.counts["right"], 2);
    assert_eq!(r.referred.observation.id, "left");
    assert_eq!(r.margin, 0);
}

#[test]
fn mask_overrides_box() {
    let mask = Mask::from_fn(1280, 720, |x, _| x < 5);
    let scene = scene_from(
        vec![obs("masked", BBox::new(0.0, 0.0, 10.0, 10.0), Some(mask)), obs("plain", BBox::new(6.0, 0.0, 16.0, 10.0), None)],
        View::Robot,
    );
    let r = align(&matches_at(&[(7.0, 5.0), (8.0, 5.0), (2.0, 5.0)]), &scene).unwrap();
    assert_eq!(r.counts["masked"], 1);
    assert_eq!(r.referred.observation.id, "plain");
}

#[test]
fn no_matches_is_no_correspondence() {
    let scene = scene_from(vec![obs("a", BBox::new(0.0, 0.0, 10.0, 10.0), None)], View::Robot);
    let err = align(&MatchSet::empty(BBox::new(0.0, 0.0, 1.0, 1.0)), &scene).unwrap_err();
    assert_eq!(err, AlignmentError::NoCorrespondence { min_count: 1, best: 0 });
    let err = align(&matches_at(&[(5.0, 5.0)]), &scene_from(vec![], View::Robot)).unwrap_err();
    assert_eq!(err, AlignmentError::EmptyScene);
}

#[test]
fn area_normalized_scoring_is_opt_in() {
    let scene = scene_from(
        vec![obs("big", BBox::new(0.0, 0.0, 100.0, 100.0), None), obs("small", BBox::new(200.0, 0.0, 210.0, 10.0), None)],
        View::Robot,
    );
    let m = matches_at(&[(10.0, 10.0), (20.0, 20.0), (205.0, 5.0)]);
    assert_eq!(align(&m, &scene).unwrap().referred.observation.id, "big");
    let cfg = AlignConfig { scoring: Scoring::AreaNormalized, ..Default::default() };
    assert_eq!(align_with(&m, &scene, &cfg).unwrap().referred.observation.id, "small");
}
