use proptest::prelude::*;

use shellhom::cellform::solve_cell_form;
use shellhom::energy::Displacement;
use shellhom::harness::{
    h_sequence, limit_integral, limsup_check, strain_expansion_check, strong_norm_check, EpsLaw, HarnessError,
    Profiles, QuadratureSpec, RecoveryConfig, ThreeScaleExperiment,
};
use shellhom::{build_surface, CoeffExpr, Discretization, Immersion, Material, Regime};

const TP: &str = "6.283185307179586";

fn roll_config(regime: Regime, eps: EpsLaw, profiles: Profiles) -> RecoveryConfig {
    RecoveryConfig {
        surface: build_surface("flat:Lx=1,Ly=1", [6, 6]).unwrap(),
        immersion: Immersion::roll(2.0),
        displacement: Displacement::zero(),
        regime,
        eps,
        profiles,
        hs: h_sequence(0.1, 0.5, 4),
        quadrature: QuadratureSpec::default(),
    }
}

#[test]
fn eps_laws_must_match_their_regime() {
    let hs = h_sequence(0.1, 0.5, 4);
    assert!(EpsLaw::Linear { gamma1: 1.0 }.validate(Regime::Finite(1.0), &hs).is_ok());
    assert!(EpsLaw::Power { exponent: 2.0 / 3.0 }.validate(Regime::Zero, &hs).is_ok());
    assert!(EpsLaw::LogCorrected.validate(Regime::Infinite, &hs).is_ok());
    for (law, regime) in [
        (EpsLaw::Power { exponent: 0.5 }, Regime::Zero),
        (EpsLaw::Power { exponent: 1.5 }, Regime::Zero),
        (EpsLaw::Linear { gamma1: 2.0 }, Regime::Finite(1.0)),
        (EpsLaw::Linear { gamma1: 1.0 }, Regime::Zero),
    ] {
        assert!(matches!(law.validate(regime, &hs), Err(HarnessError::InconsistentEpsLaw { .. })), "{law} {regime}");
    }
}

#[test]
fn unrelaxed_laminate_sits_above_the_relaxed_one() {
    let lam = Material::svk("1 + step(frac(y1) - 0.5)", "0").unwrap();
    let bare = roll_config(Regime::Finite(1.0), EpsLaw::Linear { gamma1: 1.0 }, Profiles::default());
    let cell = solve_cell_form([0.5, 0.5], &bare.surface, &lam, Regime::Finite(1.0), Discretization::new(8, 2, 2)).unwrap();
    // roll of radius 2 on the unit square: S^r = diag(1/2, 0)
    let relaxed = 0.25 * cell.matrix[(0, 0)];
    let unrelaxed = limit_integral(&bare, &lam).unwrap();
    assert!(unrelaxed > relaxed * (1.0 + 1e-3), "{unrelaxed} vs {relaxed}");
}

#[test]
fn gamma_zero_recovery_strain_converges() {
    let prof = [("zeta", vec![format!("0.05*sin({TP}*y2)"), "0".into()]), ("phi", vec![format!("0.02*cos({TP}*y1)")])];
    let cfg = roll_config(
        Regime::Zero,
        EpsLaw::Power { exponent: 2.0 / 3.0 },
        Profiles::from_components(prof.iter().map(|(n, v)| (*n, &v[..]))).unwrap(),
    );
    let rows = strain_expansion_check(&cfg).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].residual_over_h < w[0].residual_over_h, "{rows:?}");
    }
}

#[test]
fn non_periodic_profiles_are_rejected() {
    let zeta = ["0.1*t*y1".to_string(), "0".to_string()];
    let cfg = roll_config(
        Regime::Finite(1.0),
        EpsLaw::Linear { gamma1: 1.0 },
        Profiles::from_components([("zeta", &zeta[..])]).unwrap(),
    );
    let m = Material::svk("1", "1").unwrap();
    assert!(matches!(limsup_check(&cfg, &m), Err(HarnessError::NotPeriodic { .. })));
}

#[test]
fn strong_norm_of_a_matched_sequence_converges() {
    let f = format!("sin({TP}*y1)*(1 + t)");
    let e = ThreeScaleExperiment {
        surface: build_surface("flat:Lx=1,Ly=1", [4, 4]).unwrap(),
        sequence: CoeffExpr::parse(&f).unwrap(),
        limit: CoeffExpr::parse(&f).unwrap(),
        test: CoeffExpr::parse("1").unwrap(),
        eps: EpsLaw::Power { exponent: 2.0 / 3.0 },
        hs: vec![1e-1, 1e-2],
        quadrature: QuadratureSpec::default(),
        cross_check: false,
    };
    let rows = strong_norm_check(&e).unwrap();
    // ∫ sin² ∫ (1 + t)² = 1/2 · 13/12
    assert!((rows[0].rhs - 13.0 / 24.0).abs() < 1e-12);
    assert!(rows[1].gap < 0.02 * rows[1].rhs);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn no_profile_beats_the_homogeneous_infimum(a in -0.5f64..0.5, b in -0.5f64..0.5, c in -0.5f64..0.5) {
        let svk = Material::svk("1", "1").unwrap();
        let zeta = [format!("{a}*t*sin({TP}*y1)"), format!("{b}*cos({TP}*y2)")];
        let rho = [format!("{c}*t*t*cos({TP}*y1)")];
        let cfg = roll_config(
            Regime::Finite(1.0),
            EpsLaw::Linear { gamma1: 1.0 },
            Profiles::from_components([("zeta", &zeta[..]), ("rho", &rho[..])]).unwrap(),
        );
        // roll of radius 2: q = diag(1/2, 0), so the infimum is (1/9)(1/4)
        prop_assert!(limit_integral(&cfg, &svk).unwrap() >= 1.0 / 36.0 - 1e-12);
    }
}
