//! Closed-form and invariant cross-checks run as one pass/fail table.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::charpoly::LoadFamily;
use crate::critload::{self, SearchSettings};
use crate::error::Result;
use crate::model::PendulumConfig;
use crate::optimize::{self, Bounds, OptimizeSettings, Sense};
use crate::roots;
use crate::singular::{self, PlaneFamily};
use crate::stability::{self, StabilityClass, ToleranceSet};
use crate::sweep::{self, MassPlane, SweepSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} [{:>2}] {} ({:.3}s of {}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.budget_seconds,
            self.detail
        )
    }
}

type Check = fn() -> Result<(bool, String)>;

const CHECKS: [(&str, f64, Check); 10] = [
    ("Ziegler classical values", 1.0, ziegler_values),
    (
        "absolute minimum over stiffness grid",
        30.0,
        absolute_minimum,
    ),
    ("lower-boundary limit at m1 = 0", 5.0, massless_joint_limit),
    ("damped closed form", 1.0, damped_closed_form),
    ("destabilization gap", 1.0, destabilization_gap),
    ("three-link cusp", 5.0, three_link_cusp),
    ("leading discriminant identity", 1.0, discriminant_identity),
    ("oracle equivalence", 60.0, oracle_equivalence),
    ("geometry invariants", 5.0, geometry_invariants),
    ("two-link band structure", 10.0, band_structure),
];

pub fn check_count() -> usize {
    CHECKS.len()
}

/// Runs check `id` (1-based).
pub fn run_check(id: usize) -> Option<CheckOutcome> {
    let (name, budget, check) = CHECKS.get(id.checked_sub(1)?)?;
    let start = Instant::now();
    let result = check();
    let seconds = start.elapsed().as_secs_f64();
    let (ok, detail) = match result {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    let mut detail = detail;
    if seconds > *budget {
        detail.push_str("; over time budget");
    }
    Some(CheckOutcome {
        id,
        name: name.to_string(),
        passed: ok && seconds <= *budget,
        detail,
        seconds,
        budget_seconds: *budget,
    })
}

pub fn run_all() -> Vec<CheckOutcome> {
    (1..=CHECKS.len()).filter_map(run_check).collect()
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed)
}

fn ziegler_values() -> Result<(bool, String)> {
    let c = PendulumConfig::ziegler();
    let s = SearchSettings::default();
    let classifier = stability::Classifier::new(&c, s.tol)?;
    let b = critload::load_boundaries(&c, &classifier, &s, false)?;
    let (lo, hi) = critload::critical_loads_closed_undamped_m2(&c)?;
    let want = (3.5 - 2f64.sqrt(), 3.5 + 2f64.sqrt());
    let num = (
        b.first().map_or(f64::NAN, |x| x.normalized),
        b.get(1).map_or(f64::NAN, |x| x.normalized),
    );
    let err = [num.0 - want.0, num.1 - want.1, lo - want.0, hi - want.1]
        .iter()
        .fold(0.0f64, |m, e| m.max(e.abs()));
    Ok((
        err <= 1e-9,
        format!(
            "numeric ({:.12}, {:.12}), max error {err:.2e}",
            num.0, num.1
        ),
    ))
}

fn absolute_minimum() -> Result<(bool, String)> {
    let settings = OptimizeSettings::default();
    let mut worst_p = 0.0f64;
    let mut worst_angle = 0.0f64;
    for i in 0..10 {
        for j in 0..10 {
            let c1 = 0.2 + 4.8 * i as f64 / 9.0;
            let c2 = 0.2 + 4.8 * j as f64 / 9.0;
            let c = PendulumConfig::undamped(1.0, vec![1.0, 1.0], vec![c1, c2])?;
            let out = optimize::optimize_masses(
                &c,
                &Bounds::uniform(2, 0.0, 10.0),
                Sense::Min,
                &settings,
            )?;
            let Some(best) = out.reports.first() else {
                return Ok((false, format!("no minimum for c = ({c1}, {c2})")));
            };
            let p = best.objective.unwrap_or(f64::INFINITY);
            worst_p = worst_p.max((p - 2.0).abs());
            let angle = best.masses[1].atan2(best.masses[0]);
            worst_angle = worst_angle.max((angle - c2.atan2(c1)).abs());
        }
    }
    Ok((
        worst_p <= 1e-6 && worst_angle <= 1e-4,
        format!("max |p - 2| {worst_p:.2e}, max angle error {worst_angle:.2e}"),
    ))
}

fn massless_joint_limit() -> Result<(bool, String)> {
    let s = SearchSettings::default();
    let mut worst = 0.0f64;
    for ratio in [0.5, 1.0, 2.0] {
        let c = PendulumConfig::undamped(1.0, vec![0.0, 1.0], vec![ratio, 1.0])?;
        let p = critload::critical_load_numeric(&c, &s)?
            .normalized
            .unwrap_or(f64::INFINITY);
        worst = worst.max((p - (2.0 + ratio / 2.0)).abs());
    }
    Ok((worst <= 1e-6, format!("max error {worst:.2e}")))
}

fn damped_closed_form() -> Result<(bool, String)> {
    let c = PendulumConfig::new(1.0, vec![2.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0])?;
    let numeric = critload::critical_load_numeric(&c, &SearchSettings::default())?
        .normalized
        .unwrap_or(f64::NAN);
    let (d1, d2) = (1.0, 1.0);
    let specialized = (4.0 * d1 * d1 + 33.0 * d1 * d2 + 4.0 * d2 * d2)
        / (2.0 * (6.0 * d2 + d1) * (d2 + d1))
        + 0.5 * d1 * d2;
    let general = critload::critical_load_closed_damped_m2(&c)?;
    let e1 = (numeric - 55.0 / 28.0).abs();
    let e2 = (general - specialized).abs();
    Ok((
        e1 <= 1e-9 && e2 <= 1e-12,
        format!("numeric {numeric:.12}, error {e1:.2e}; general vs specialized {e2:.2e}"),
    ))
}

fn destabilization_gap() -> Result<(bool, String)> {
    let c = PendulumConfig::ziegler();
    let undamped = 3.5 - 2f64.sqrt();
    let mut ok = true;
    let mut parts = Vec::new();
    for beta in [0.1, 1.0, 10.0] {
        let limit = critload::zero_damping_limit_m2(&c, beta)?;
        let gap = undamped - limit;
        ok &= gap > 0.1;
        parts.push(format!("β={beta}: gap {gap:.6}"));
    }
    Ok((ok, parts.join(", ")))
}

fn three_link_cusp() -> Result<(bool, String)> {
    let base = PendulumConfig::undamped(1.0, vec![10.0, 1.0, 0.0], vec![1.0; 3])?;
    let family = PlaneFamily::new(MassPlane::new(base, (1, 2), 1.0)?)?;
    let p = singular::find_triple_root_cusp(&family, (0.045, 11.0, -1.2), 1e-9)?;
    let alpha = p.location.alpha.unwrap_or(f64::NAN);
    let omega = p.lambda_value.map_or(f64::NAN, |l| l.im.abs());
    let err = [
        alpha - 0.0403477,
        p.location.load - 11.961144,
        omega - 1.1635243,
    ]
    .iter()
    .fold(0.0f64, |m, e| m.max(e.abs()));
    Ok((
        err <= 1e-4 && p.jordan_order == 3,
        format!(
            "α {alpha:.7}, P {:.6}, λ ±{omega:.7}i, order {}",
            p.location.load, p.jordan_order
        ),
    ))
}

fn discriminant_identity() -> Result<(bool, String)> {
    let mut rng = rng();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..10.0)).collect();
        let c: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..10.0)).collect();
        let l = rng.random_range(0.5..2.0);
        let load = rng.random_range(0.0..20.0);
        let config = PendulumConfig::undamped(l, m.clone(), c)?;
        let mu = LoadFamily::new(&config)?.mu_poly_at(load)?;
        let d1 = stability::discriminant_sequence(&mu)[0];
        let want = 3.0 * l.powi(12) * (m[0] * m[1] * m[2]).powi(2);
        worst = worst.max(((d1 - want) / want).abs());
    }
    Ok((worst <= 1e-10, format!("max relative error {worst:.2e}")))
}

/// Sign changes in a coefficient list, zeros skipped.
fn sign_changes(coeffs: &[f64]) -> usize {
    let signs: Vec<bool> = coeffs
        .iter()
        .filter(|a| **a != 0.0)
        .map(|a| *a > 0.0)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Relative load perturbation defining the boundary band.
const BAND: f64 = 1e-9;

/// Stability verdict that does not go through the root classifier:
/// real-rootedness from the discriminant signs plus Descartes' rule for the
/// μ-polynomial, or the sign of the largest real part for damped systems.
/// `None` when a deciding quantity is at rounding level.
fn oracle_verdict(family: &LoadFamily, load: f64) -> Result<Option<bool>> {
    if family.is_damped() {
        let spec = roots::roots(&family.char_poly_at(load))?;
        let max_re = spec.max_real_part().unwrap_or(f64::NEG_INFINITY);
        return Ok((max_re.abs() > 1e-12 * spec.scale()).then_some(max_re < 0.0));
    }
    let mu = family.mu_poly_at(load)?;
    if mu.effective_degree() != mu.nominal_degree() {
        return Ok(None);
    }
    let disc = stability::normalized_discriminants(&mu);
    if disc.iter().any(|d| d.abs() <= 1e-25) || mu.coeffs().contains(&0.0) {
        return Ok(None);
    }
    let real_distinct = disc.iter().all(|&d| d > 0.0);
    Ok(Some(real_distinct && sign_changes(mu.coeffs()) == 0))
}

fn oracle_equivalence() -> Result<(bool, String)> {
    let mut rng = rng();
    let tol = ToleranceSet::default();
    let (mut compared, mut skipped, mut disagree) = (0usize, 0usize, 0usize);
    for k in 0..10_000 {
        let m = 2 + k % 3;
        let damped = k % 2 == 1;
        let masses: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..5.0)).collect();
        let stiff: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..5.0)).collect();
        let damp: Vec<f64> = if damped {
            (0..m).map(|_| rng.random_range(0.01..2.0)).collect()
        } else {
            vec![0.0; m]
        };
        let config = PendulumConfig::new(1.0, masses, stiff, damp)?;
        let load = config.denormalize_load(rng.random_range(0.0..15.0));
        let classifier = stability::Classifier::new(&config, tol)?;
        let family = classifier.family();
        let verdicts = [
            oracle_verdict(family, load * (1.0 - BAND))?,
            oracle_verdict(family, load)?,
            oracle_verdict(family, load * (1.0 + BAND))?,
        ];
        let oracle = match verdicts {
            [Some(a), Some(b), Some(c)] if a == b && b == c => Some(b),
            _ => None,
        };
        match oracle {
            None => skipped += 1,
            Some(stable) => {
                compared += 1;
                if stable != classifier.underlying_at(load)?.is_stable() {
                    disagree += 1;
                }
            }
        }
    }
    Ok((
        disagree == 0,
        format!("{compared} compared, {skipped} in band, {disagree} disagreements"),
    ))
}

fn geometry_invariants() -> Result<(bool, String)> {
    let mut rng = rng();
    let s = SearchSettings::default();
    let p_of = |c: &PendulumConfig| -> Result<f64> {
        Ok(critload::critical_load_numeric(c, &s)?
            .normalized
            .unwrap_or(f64::INFINITY))
    };
    let (mut ruled, mut cone) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let m1 = rng.random_range(0.1..5.0);
        let m2 = rng.random_range(0.1..5.0);
        let c1 = rng.random_range(0.2..5.0);
        let c2 = rng.random_range(0.2..5.0);
        let base = PendulumConfig::undamped(1.0, vec![m1, m2], vec![c1, c2])?;
        let p0 = p_of(&base)?;
        let classifier = stability::Classifier::new(&base, s.tol)?;
        let probe_load = base.denormalize_load(rng.random_range(0.0..10.0));
        let class0 = classifier.underlying_at(probe_load)?;
        for t in [0.5, 2.0, 10.0] {
            let scaled = base.with_masses(vec![t * m1, t * m2])?;
            ruled = ruled.max((p_of(&scaled)? - p0).abs());
            // stiffnesses and load scaled together: same class, same p
            let stiffer = base.with_stiffnesses(vec![t * c1, t * c2])?;
            let class_t =
                stability::Classifier::new(&stiffer, s.tol)?.underlying_at(t * probe_load)?;
            let load_t = critload::critical_load_numeric(&stiffer, &s)?
                .value
                .unwrap_or(f64::INFINITY);
            let load_0 = base.denormalize_load(p0);
            let mut e = ((load_t - t * load_0) / (t * load_0)).abs();
            if class_t != class0 {
                e = f64::INFINITY;
            }
            cone = cone.max(e);
        }
    }
    Ok((
        ruled <= 1e-9 && cone <= 1e-9,
        format!("mass scaling {ruled:.2e}, stiffness-load scaling {cone:.2e}"),
    ))
}

/// Sweep settings for the two-link band diagram: the upper branch stays
/// below 200 for every interior row of a 400-point grid.
pub fn band_sweep_settings() -> SearchSettings {
    SearchSettings {
        p_max: 200.0,
        ..SearchSettings::default()
    }
}

pub fn band_sweep_spec() -> Result<SweepSpec> {
    let base = PendulumConfig::ziegler();
    let plane = MassPlane::new(base, (0, 1), 5f64.sqrt())?;
    SweepSpec::new(plane, sweep::uniform_alpha_grid(399))
}

/// Every interior row must read stable, flutter, divergence with the
/// branches at the closed-form values.
pub fn band_structure_errors(result: &sweep::SweepResult) -> (usize, f64) {
    use StabilityClass::*;
    let mut bad_rows = 0;
    let mut worst = 0.0f64;
    let n = result.rows.len();
    for row in &result.rows[1..n - 1] {
        let classes: Vec<StabilityClass> = row.bands.iter().map(|b| b.class).collect();
        if classes != [MarginallyStable, Flutter, Divergence] {
            bad_rows += 1;
            continue;
        }
        let (m1, m2) = (row.masses[0], row.masses[1]);
        let a = (m1 / m2).sqrt();
        let lower = 2.0 + 0.5 * (a - 1.0).powi(2);
        let upper = 2.0 + 0.5 * (a + 1.0).powi(2);
        worst = worst
            .max((row.boundaries[0].normalized - lower).abs())
            .max((row.boundaries[1].normalized - upper).abs());
    }
    (bad_rows, worst)
}

fn band_structure() -> Result<(bool, String)> {
    let spec = band_sweep_spec()?;
    let s = band_sweep_settings();
    let first = sweep::sweep_azimuth(&spec, &s)?;
    let again = sweep::sweep_azimuth(&spec, &s)?;
    let stable = first.to_csv_string() == again.to_csv_string();
    let (bad_rows, worst) = band_structure_errors(&first);
    // the Ziegler point itself, through the same sweep code
    let z_alpha = 1f64.atan2(2.0);
    let z = sweep::sweep_azimuth(&SweepSpec::new(spec.plane.clone(), vec![z_alpha])?, &s)?;
    let zb = &z.rows[0].boundaries;
    let z_err = if zb.len() == 2 {
        (zb[0].normalized - (3.5 - 2f64.sqrt()))
            .abs()
            .max((zb[1].normalized - (3.5 + 2f64.sqrt())).abs())
    } else {
        f64::INFINITY
    };
    Ok((
        stable && bad_rows == 0 && worst <= 1e-8 && z_err <= 1e-9,
        format!(
            "bit-stable {stable}, {bad_rows} rows out of order, branch error {worst:.2e}, Z-point error {z_err:.2e}"
        ),
    ))
}
