use approx::assert_abs_diff_eq;
use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;

use shellhom::geometry::{relative_weingarten, shell_identity_residuals};
use shellhom::{build_surface, Immersion, SurfacePatch};

fn surfaces() -> Vec<SurfacePatch> {
    ["flat:Lx=1,Ly=1", "sphere:R=2,cap=30", "ellipsoid:a=1,b=1,c=2,cap=30", "cyl:R=1,arc=60,L=1"]
        .iter()
        .map(|s| build_surface(s, [4, 4]).unwrap())
        .collect()
}

fn interior(s: &SurfacePatch, a: f64, b: f64) -> [f64; 2] {
    match s.domain() {
        shellhom::geometry::Domain::Rect { u, v } => [u[0] + a * (u[1] - u[0]), v[0] + b * (v[1] - v[0])],
        shellhom::geometry::Domain::Disk { radius } => {
            let r = 0.9 * radius * a.sqrt();
            let th = std::f64::consts::TAU * b;
            [r * th.cos(), r * th.sin()]
        }
    }
}

#[test]
fn presets_have_the_expected_curvature() {
    let cap = build_surface("sphere:R=2,cap=30", [4, 4]).unwrap();
    for f in cap.node_frames().unwrap() {
        assert_abs_diff_eq!(f.gauss, 0.25, epsilon = 1e-10);
        let [k1, k2] = f.principal_curvatures();
        assert_abs_diff_eq!(k1.abs(), 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(k2.abs(), 0.5, epsilon = 1e-10);
    }
    let plate = build_surface("flat:Lx=1,Ly=1", [8, 8]).unwrap();
    for f in plate.node_frames().unwrap() {
        assert_eq!(f.gauss, 0.0);
        assert_eq!(f.shape, Matrix3::zeros());
        assert_eq!(f.normal, Vector3::z());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frames_satisfy_their_identities(which in 0usize..4, a in 0.05f64..0.95, b in 0.05f64..0.95) {
        let s = &surfaces()[which];
        let f = s.frame_at(interior(s, a, b)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let d = if i == j { 1.0 } else { 0.0 };
                prop_assert!((f.dual[i].dot(&f.tangent[j]) - d).abs() < 1e-12);
            }
            prop_assert!(f.normal.dot(&f.tangent[i]).abs() < 1e-12);
        }
        prop_assert!((f.normal.norm() - 1.0).abs() < 1e-12);
        prop_assert!((f.projection - (Matrix3::identity() - f.normal * f.normal.transpose())).amax() < 1e-12);
        prop_assert!((f.shape * f.normal).amax() < 1e-10);
        prop_assert!((f.shape - f.shape * f.projection).amax() < 1e-10);
    }

    #[test]
    fn rigid_motions_do_not_bend(
        which in 0usize..4,
        a in 0.05f64..0.95,
        b in 0.05f64..0.95,
        angles in prop::array::uniform3(-3.0f64..3.0),
        shift in prop::array::uniform3(-5.0f64..5.0),
    ) {
        let s = &surfaces()[which];
        let rot = Rotation3::from_euler_angles(angles[0], angles[1], angles[2]).into_inner();
        let moved = Immersion::identity().then_rigid(rot, Vector3::from(shift));
        let q = relative_weingarten(s, &moved, interior(s, a, b)).unwrap();
        prop_assert!(q.amax() < 1e-8, "{q}");
    }

    #[test]
    fn shell_gradient_matches_its_closed_form(a in 0.1f64..0.9, b in 0.1f64..0.9, t in -0.004f64..0.004) {
        let s = &surfaces()[1];
        let r = shell_identity_residuals(s, 0.1, interior(s, a, b), t, 1e-8).unwrap();
        prop_assert!(r.theta < 1e-6, "{r:?}");
    }
}

#[test]
fn roll_of_a_plate_has_curvature_one_over_r() {
    let plate = build_surface("flat:Lx=1,Ly=1", [4, 4]).unwrap();
    for r in [0.5, 1.0, 3.0] {
        let q = relative_weingarten(&plate, &Immersion::roll(r), [0.3, 0.6]).unwrap();
        assert_abs_diff_eq!(q[(0, 0)].abs(), 1.0 / r, epsilon = 1e-10);
        assert_abs_diff_eq!(q[(1, 1)], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(q[(0, 1)], 0.0, epsilon = 1e-10);
    }
}
