use proptest::prelude::*;

use ziegler_core::charpoly::{char_poly, char_poly_2dof_trace, LoadFamily};
use ziegler_core::critload::{self, SearchSettings};
use ziegler_core::model::{self, PendulumConfig};
use ziegler_core::optimize::{optimize_masses, Bounds, OptimizeSettings, Sense};
use ziegler_core::singular::{find_triple_root_cusp, PlaneFamily};
use ziegler_core::stability::{self, Classifier, StabilityClass, ToleranceSet};
use ziegler_core::sweep::{self, MassPlane, SweepSpec};

fn first_exit(c: &PendulumConfig) -> Option<f64> {
    critload::critical_load_numeric(c, &SearchSettings::default())
        .unwrap()
        .normalized
}

fn config(masses: Vec<f64>, stiff: Vec<f64>, l: f64) -> PendulumConfig {
    PendulumConfig::undamped(l, masses, stiff).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mass_determinant_is_product_of_masses(
        masses in prop::collection::vec(0.0f64..5.0, 2..6),
        l in 0.3f64..3.0,
    ) {
        let m = masses.len();
        let c = config(masses.clone(), vec![1.0; m], l);
        let want = l.powi(2 * m as i32) * masses.iter().product::<f64>();
        let got = model::mass_determinant(&c);
        prop_assert!((got - want).abs() <= 1e-10 * want.abs().max(1e-300) + 1e-14);
    }

    #[test]
    fn trace_formula_matches_expansion(
        m in prop::array::uniform2(0.05f64..5.0),
        k in prop::array::uniform2(0.1f64..5.0),
        l in 0.3f64..3.0,
        p in 0.0f64..20.0,
    ) {
        let c = config(m.to_vec(), k.to_vec(), l);
        let t = model::assemble(&c, p).unwrap();
        let a = char_poly(&t);
        let b = char_poly_2dof_trace(&t).unwrap();
        let scale = a.max_abs_coeff();
        for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
            prop_assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn leading_discriminant_is_degree_times_squared_mass_determinant(
        masses in prop::collection::vec(0.1f64..5.0, 2..5),
        l in 0.5f64..2.0,
        p in 0.0f64..10.0,
    ) {
        let n = masses.len();
        let c = config(masses.clone(), vec![1.0; n], l);
        let mu = LoadFamily::new(&c).unwrap().mu_poly_at(p).unwrap();
        let d1 = stability::discriminant_sequence(&mu)[0];
        let det_m = l.powi(2 * n as i32) * masses.iter().product::<f64>();
        let want = n as f64 * det_m * det_m;
        prop_assert!(((d1 - want) / want).abs() <= 1e-10);
    }

    #[test]
    fn critical_load_depends_only_on_mass_ratios(
        masses in prop::collection::vec(0.1f64..5.0, 2..4),
        t in prop::sample::select(vec![0.5, 2.0, 10.0]),
    ) {
        let n = masses.len();
        let c = config(masses.clone(), vec![1.0; n], 1.0);
        let scaled = c.with_masses(masses.iter().map(|x| t * x).collect()).unwrap();
        match (first_exit(&c), first_exit(&scaled)) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-9),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn class_is_homogeneous_in_stiffness_and_load(
        m in prop::array::uniform3(0.1f64..5.0),
        k in prop::array::uniform3(0.2f64..5.0),
        p in 0.0f64..30.0,
        t in 0.1f64..10.0,
    ) {
        let c = config(m.to_vec(), k.to_vec(), 1.0);
        let s = c.with_stiffnesses(k.iter().map(|x| t * x).collect()).unwrap();
        let tol = ToleranceSet::default();
        let a = stability::classify(&c, p, &tol).unwrap();
        let b = stability::classify(&s, t * p, &tol).unwrap();
        if a.class != StabilityClass::Boundary && b.class != StabilityClass::Boundary {
            prop_assert_eq!(a.class, b.class);
        }
    }

    #[test]
    fn closed_form_agrees_with_scan(
        m in prop::array::uniform2(0.05f64..5.0),
        k in prop::array::uniform2(0.2f64..5.0),
    ) {
        let c = config(m.to_vec(), k.to_vec(), 1.0);
        let (lo, hi) = critload::critical_loads_closed_undamped_m2(&c).unwrap();
        prop_assume!(hi < 900.0);
        let classifier = Classifier::new(&c, ToleranceSet::default()).unwrap();
        let b = critload::load_boundaries(&c, &classifier, &SearchSettings::default(), false).unwrap();
        prop_assert_eq!(b.len(), 2);
        prop_assert!((b[0].normalized - lo).abs() <= 1e-8);
        prop_assert!((b[1].normalized - hi).abs() <= 1e-8 * hi);
    }

    #[test]
    fn masses_and_stiffnesses_enter_symmetrically(
        m in prop::array::uniform2(0.1f64..5.0),
        k in prop::array::uniform2(0.1f64..5.0),
    ) {
        // the two-link onset depends on sqrt(m1/m2) and sqrt(c1/c2) alike
        let a = config(m.to_vec(), k.to_vec(), 1.0);
        let b = config(k.to_vec(), m.to_vec(), 1.0);
        let (pa, pb) = (first_exit(&a).unwrap(), first_exit(&b).unwrap());
        prop_assert!((pa - pb).abs() <= 1e-8, "{} vs {}", pa, pb);
    }

    #[test]
    fn damped_closed_form_agrees_with_scan(
        m in prop::array::uniform2(0.1f64..5.0),
        k in prop::array::uniform2(0.2f64..5.0),
        d in prop::array::uniform2(0.05f64..2.0),
    ) {
        let c = PendulumConfig::new(1.0, m.to_vec(), k.to_vec(), d.to_vec()).unwrap();
        let closed = c.normalize_load(critload::critical_load_closed_damped_m2(&c).unwrap());
        prop_assume!(closed > 0.05 && closed < 900.0);
        let numeric = first_exit(&c).unwrap();
        prop_assert!((numeric - closed).abs() <= 1e-8 * closed.max(1.0), "{} vs {}", numeric, closed);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn two_link_sweep_rows_do_not_depend_on_radius(
        k in prop::array::uniform2(0.2f64..5.0),
    ) {
        let base = config(vec![1.0, 1.0], k.to_vec(), 1.0);
        let grid = sweep::uniform_alpha_grid(16);
        let s = SearchSettings { p_max: 100.0, ..SearchSettings::default() };
        let run = |r: f64| {
            let spec = SweepSpec::new(MassPlane::new(base.clone(), (0, 1), r).unwrap(), grid.clone()).unwrap();
            sweep::sweep_azimuth(&spec, &s).unwrap()
        };
        let reference = run(1.0);
        for r in [0.5, 2.0] {
            let other = run(r);
            for (a, b) in reference.rows.iter().zip(&other.rows) {
                prop_assert_eq!(a.boundaries.len(), b.boundaries.len());
                for (x, y) in a.boundaries.iter().zip(&b.boundaries) {
                    prop_assert!((x.normalized - y.normalized).abs() <= 1e-8);
                    prop_assert_eq!(x.transition, y.transition);
                }
            }
        }
    }

    #[test]
    fn cusp_newton_tolerates_rough_guesses(
        fa in 0.8f64..1.2,
        fp in 0.8f64..1.2,
        fm in 0.8f64..1.2,
    ) {
        let base = config(vec![10.0, 1.0, 0.0], vec![1.0; 3], 1.0);
        let family = PlaneFamily::new(MassPlane::new(base, (1, 2), 1.0).unwrap()).unwrap();
        let guess = (0.0403477 * fa, 11.961144 * fp, -1.353789 * fm);
        let p = find_triple_root_cusp(&family, guess, 1e-9).unwrap();
        let reference = find_triple_root_cusp(&family, (0.04, 12.0, -1.35), 1e-9).unwrap();
        prop_assert!((p.location.alpha.unwrap() - reference.location.alpha.unwrap()).abs() <= 1e-8);
        prop_assert!((p.location.load - reference.location.load).abs() <= 1e-8 * reference.location.load);
        prop_assert!((p.mu_value.unwrap() - reference.mu_value.unwrap()).norm() <= 1e-8);
    }

    #[test]
    fn optimizer_is_scale_consistent(
        k in prop::array::uniform2(0.2f64..5.0),
        t in 0.1f64..10.0,
    ) {
        let c = config(vec![1.0, 1.0], k.to_vec(), 1.0);
        let s = OptimizeSettings { starts: 4, ..OptimizeSettings::default() };
        let a = optimize_masses(&c, &Bounds::uniform(2, 0.0, 10.0), Sense::Min, &s).unwrap();
        let b = optimize_masses(&c, &Bounds::uniform(2, 0.0, 10.0 * t), Sense::Min, &s).unwrap();
        let (ra, rb) = (&a.reports[0], &b.reports[0]);
        prop_assert!((ra.objective.unwrap() - rb.objective.unwrap()).abs() <= 1e-6);
        let angle = |x: &[f64]| x[1].atan2(x[0]);
        prop_assert!((angle(&ra.masses) - angle(&rb.masses)).abs() <= 1e-4);
        prop_assert!((angle(&ra.masses) - k[1].atan2(k[0])).abs() <= 1e-4);
    }
}

#[test]
fn massive_first_link_reduces_to_two_links() {
    // with m1 large the first link barely moves and links 2, 3 act as a
    // two-link pendulum with stiffnesses (c2, c3)
    let s = SearchSettings {
        p_max: 60.0,
        ..SearchSettings::default()
    };
    let mut worst = 0.0f64;
    for alpha in sweep::uniform_alpha_grid(10).into_iter().skip(1).take(9) {
        let (m2, m3) = (alpha.cos(), alpha.sin());
        let three = config(vec![200.0, m2, m3], vec![1.0; 3], 1.0);
        let two = config(vec![m2, m3], vec![1.0; 2], 1.0);
        let p3 = critload::critical_load_numeric(&three, &s)
            .unwrap()
            .normalized;
        let p2 = critload::critical_load_numeric(&two, &s)
            .unwrap()
            .normalized;
        let (p3, p2) = (p3.unwrap(), p2.unwrap());
        worst = worst.max(((p3 - p2) / p2).abs());
    }
    assert!(worst <= 0.05, "relative deviation {worst}");
}

#[test]
fn first_exit_sequence_has_stable_bottom_band() {
    let plane = MassPlane::new(config(vec![1.0, 1.0], vec![1.0, 2.0], 1.0), (0, 1), 1.0).unwrap();
    let spec = SweepSpec::new(plane, sweep::uniform_alpha_grid(40)).unwrap();
    let s = SearchSettings {
        p_max: 300.0,
        ..SearchSettings::default()
    };
    let out = sweep::sweep_azimuth(&spec, &s).unwrap();
    for row in &out.rows[1..out.rows.len() - 1] {
        assert!(row.bands[0].class.is_stable());
        assert!(row
            .bands
            .windows(2)
            .all(|w| w[0].to_load == Some(w[1].from_load)));
    }
}
