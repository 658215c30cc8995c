use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;

use shellhom::energy::{bending_energy, cell_forms_for, BendingState, CellForms};
use shellhom::{build_surface, Discretization, Immersion, Material, Regime};

fn svk_forms(surface: &shellhom::SurfacePatch) -> CellForms {
    cell_forms_for(surface, &Material::svk("1", "1").unwrap(), Regime::Zero, Discretization::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rigid_motions_cost_nothing(angles in prop::array::uniform3(-3.0f64..3.0), shift in prop::array::uniform3(-4.0f64..4.0)) {
        let s = build_surface("sphere:R=2,cap=30", [4, 4]).unwrap();
        let forms = svk_forms(&s);
        let rot = Rotation3::from_euler_angles(angles[0], angles[1], angles[2]).into_inner();
        let moved = Immersion::identity().then_rigid(rot, Vector3::from(shift));
        let e = bending_energy(&BendingState::new(&s, &moved).unwrap(), &forms).unwrap();
        prop_assert!(e.finite && e.value.abs() < 1e-10);
    }

    #[test]
    fn rolls_scale_with_inverse_square_radius(r in 0.5f64..4.0, angles in prop::array::uniform3(-3.0f64..3.0)) {
        let s = build_surface("flat:Lx=1,Ly=1", [6, 6]).unwrap();
        let forms = svk_forms(&s);
        let rot = Rotation3::from_euler_angles(angles[0], angles[1], angles[2]).into_inner();
        let roll = Immersion::roll(r).then_rigid(rot, Vector3::zeros());
        let e = bending_energy(&BendingState::new(&s, &roll).unwrap(), &forms).unwrap();
        prop_assert!((e.value - 1.0 / (9.0 * r * r)).abs() < 1e-10);
    }

    #[test]
    fn energy_is_linear_in_the_form(scale in 0.1f64..10.0) {
        let s = build_surface("flat:Lx=1,Ly=1", [4, 4]).unwrap();
        let forms = svk_forms(&s);
        let roll = Immersion::roll(1.5);
        let state = BendingState::new(&s, &roll).unwrap();
        let a = bending_energy(&state, &forms).unwrap().value;
        let b = bending_energy(&state, &forms.scaled(scale)).unwrap().value;
        prop_assert!((b - scale * a).abs() < 1e-12 * (1.0 + b.abs()));
    }
}

#[test]
fn flipping_a_sphere_cap_doubles_its_curvature() {
    // S^r = 2S has both principal values 1, so Q = (2 + 4/3)/12 = 5/18
    let s = build_surface("sphere:R=2,cap=30", [6, 6]).unwrap();
    let forms = cell_forms_for(&s, &Material::svk("1", "1").unwrap(), Regime::Zero, Discretization::default()).unwrap();
    let e = bending_energy(&BendingState::new(&s, &Immersion::reflect()).unwrap(), &forms).unwrap();
    assert!(e.finite);
    assert!((e.value - 5.0 / 18.0 * s.area().unwrap()).abs() < 1e-8, "{}", e.value);
    let plate = build_surface("flat:Lx=1,Ly=1", [4, 4]).unwrap();
    let flat = bending_energy(&BendingState::new(&plate, &Immersion::reflect()).unwrap(), &svk_forms(&plate)).unwrap();
    assert!(flat.value.abs() < 1e-14);
}

#[test]
fn stretching_is_not_an_isometry() {
    let s = build_surface("flat:Lx=1,Ly=1", [4, 4]).unwrap();
    let forms = svk_forms(&s);
    let e = bending_energy(&BendingState::new(&s, &Immersion::scale(1.01)).unwrap(), &forms).unwrap();
    assert!(!e.finite && e.value.is_infinite() && e.iso_violation > 1e-3);
}
