mod common;

use common::*;
use gazefuse::geometry::{reproject_gaze, GeometryError, Intrinsics, Point3, Pose, PoseRecord};
use nalgebra::Matrix3;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn k() -> Intrinsics {
    Intrinsics::new(600.0, 600.0, 704.0, 704.0, 1408, 1408).unwrap()
}

proptest! {
    #[test]
    fn inverse_composes_to_identity(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let p = random_pose(&mut rng, CAM, SLAM, 3.1, 5.0);
        let id = p.inverse().compose(&p).unwrap();
        prop_assert!((id.rotation() - Matrix3::identity()).abs().max() < 1e-9);
        prop_assert!(id.translation().abs().max() < 1e-9);
        let twice = p.inverse().inverse();
        prop_assert!((twice.rotation() - p.rotation()).abs().max() < 1e-12);
    }

    #[test]
    fn compose_is_associative_on_points(seed in any::<u64>(), x in -2.0..2.0f64, y in -2.0..2.0f64, z in -2.0..2.0f64) {
        let mut rng = StdRng::seed_from_u64(seed);
        let a = random_pose(&mut rng, CAM, SLAM, 3.0, 2.0);
        let b = random_pose(&mut rng, PUPIL, CAM, 3.0, 2.0);
        let p = Point3::new(x, y, z);
        let chained = a.compose(&b).unwrap().transform_point(&p);
        let stepwise = a.transform_point(&b.transform_point(&p));
        prop_assert!((chained.to_vector() - stepwise.to_vector()).norm() < 1e-9);
    }

    #[test]
    fn reprojection_matches_matrix_chain(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let w_ti = random_pose(&mut rng, gc(1.0), SLAM, 0.5, 1.0);
        let drift = random_pose(&mut rng, gc(1.2), gc(1.2), 0.05, 0.02);
        let w_tin = relabel(&w_ti, gc(1.2)).compose(&drift).unwrap();
        let cam_pupil = random_pose(&mut rng, PUPIL, CAM, 0.05, 0.03);
        let g = Point3::new(0.1, -0.05, 0.8);
        if let Some(want) = reproject_oracle(&g, &cam_pupil, &w_ti, &w_tin, &k()) {
            let got = reproject_gaze(&g, &cam_pupil, &w_ti, &w_tin, &k()).unwrap();
            prop_assert!(got.distance(&want) < 1e-9);
        }
    }

    #[test]
    fn static_head_cancels(seed in any::<u64>(), x in -0.3..0.3f64, y in -0.3..0.3f64, z in 0.3..3.0f64) {
        let mut rng = StdRng::seed_from_u64(seed);
        let head = random_pose(&mut rng, gc(0.0), SLAM, 3.0, 3.0);
        let later = relabel(&head, gc(0.4));
        let cam_pupil = Pose::identity(CAM);
        let cam_pupil = relabel(&cam_pupil, PUPIL);
        let g = Point3::new(x, y, z);
        let got = reproject_gaze(&g, &cam_pupil, &head, &later, &k()).unwrap();
        let direct = k().project(&g).unwrap();
        prop_assert!(got.distance(&direct) < 1e-9);
    }

    #[test]
    fn projection_is_pinhole(x in -1.0..1.0f64, y in -1.0..1.0f64, z in 0.1..5.0f64) {
        let k = k();
        let p = k.project(&Point3::new(x, y, z)).unwrap();
        prop_assert!((p.x - (600.0 * x / z + 704.0)).abs() < 1e-9);
        prop_assert!((p.y - (600.0 * y / z + 704.0)).abs() < 1e-9);
        let back = k.unproject(&p, z);
        prop_assert!((back.to_vector() - Point3::new(x, y, z).to_vector()).norm() < 1e-9);
    }
}

#[test]
fn mismatched_frames_do_not_compose() {
    let a = Pose::identity(CAM);
    let b = Pose::identity(SLAM);
    assert!(matches!(a.compose(&b), Err(GeometryError::FrameMismatch { .. }) | Err(GeometryError::InvalidFrame(_))));
}

#[test]
fn points_behind_camera_are_rejected() {
    assert!(k().project(&Point3::new(0.0, 0.0, -1.0)).is_err());
    assert!(k().project(&Point3::new(0.0, 0.0, 0.0)).is_err());
}

#[test]
fn near_orthonormal_rotations_are_repaired_on_ingest() {
    let rec: PoseRecord = serde_json::from_str(
        r#"{"from":"gp","to":"gc","rotation":[1.0000001,0,0,0,1,0,0,0,1],"translation":[0,0,0]}"#,
    )
    .unwrap();
    let pose = Pose::try_from(rec).unwrap();
    assert!((pose.rotation() - Matrix3::identity()).abs().max() < 1e-6);

    let bad: PoseRecord = serde_json::from_str(
        r#"{"from":"gp","to":"gc","rotation":[2,0,0,0,1,0,0,0,1],"translation":[0,0,0]}"#,
    )
    .unwrap();
    assert!(Pose::try_from(bad).is_err());
}
