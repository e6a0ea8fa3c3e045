//! Mass distributions that extremize the critical load.
//!
//! The critical load is unchanged when every mass is multiplied by the same
//! factor (the eigenvalues `μ` are only rescaled), so when all lower bounds
//! are zero the search runs over mass directions: `m - 1` hyperspherical
//! angles in `[0, π/2]`. Otherwise it runs over the free masses of the box.
//! Either way the local search is a bounded Nelder-Mead simplex started from
//! a Halton sequence.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critload::{self, SearchSettings};
use crate::error::{Error, Result};
use crate::model::PendulumConfig;
use crate::singular::{self, PlaneFamily, SingularPoint};
use crate::stability::Classifier;
use crate::sweep::{azimuth_components, MassPlane};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Sense {
    Min,
    Max,
}

/// What "the critical load" of a design means to the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Objective {
    /// First loss of stability from zero load.
    FirstExit,
    /// Upper end of the highest stable load interval, following stable
    /// tongues above unstable gaps.
    StableSupremum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExtremumKind {
    InteriorSmooth,
    BoundaryMassZero,
    SingularCusp,
    UnboundedDirection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Certificate {
    /// Central-difference gradient norm in the search coordinates.
    pub gradient_norm: Option<f64>,
    /// Masses (0-based) sitting at a zero lower bound.
    pub zero_masses: Vec<usize>,
    /// Masses sitting at a nonzero bound.
    pub active_bounds: Vec<usize>,
    /// Unit direction along which the objective grows without bound.
    pub ray: Option<Vec<f64>>,
    /// `(ε, p)` along the ray: zero masses replaced by `ε` times the mass scale.
    pub ray_values: Vec<(f64, Option<f64>)>,
    pub singular: Option<SingularPoint>,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremumReport {
    pub masses: Vec<f64>,
    /// Azimuth when the search ran in a mass plane.
    pub alpha: Option<f64>,
    /// Normalized critical load; `None` when it exceeds the search cap.
    pub objective: Option<f64>,
    pub sense: Sense,
    pub kind: ExtremumKind,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSettings {
    pub starts: usize,
    pub objective: Objective,
    pub search: SearchSettings,
    pub max_evals: usize,
    /// Simplex diameter, relative to the unit search box, at which a start stops.
    pub xtol: f64,
    /// Spread of simplex values at which a start stops.
    pub ftol: f64,
    /// Relative distance under which two extrema are the same.
    pub merge_tol: f64,
    /// Offset into the Halton sequence.
    pub seed: u64,
}

impl Default for OptimizeSettings {
    fn default() -> Self {
        OptimizeSettings {
            starts: 32,
            objective: Objective::FirstExit,
            search: SearchSettings::default(),
            max_evals: 400,
            xtol: 1e-9,
            ftol: 1e-12,
            merge_tol: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn uniform(m: usize, lo: f64, hi: f64) -> Self {
        Bounds {
            lo: vec![lo; m],
            hi: vec![hi; m],
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        let ok = self.lo.len() == m
            && self.hi.len() == m
            && self
                .lo
                .iter()
                .zip(&self.hi)
                .all(|(&l, &h)| l.is_finite() && h.is_finite() && 0.0 <= l && l <= h)
            && self.hi.iter().any(|&h| h > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "mass bounds need {m} pairs with 0 <= lo <= hi and some hi > 0"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOutcome {
    pub reports: Vec<ExtremumReport>,
    /// `(start index, message)` for starts that produced no extremum.
    pub failed_starts: Vec<(usize, String)>,
}

/// Radical-inverse Halton point `index` in `dim` dimensions.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    (0..dim)
        .map(|d| {
            let base = PRIMES[d % PRIMES.len()];
            let mut f = 1.0;
            let mut r = 0.0;
            let mut i = index;
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            r
        })
        .collect()
}

struct SimplexResult {
    x: Vec<f64>,
    f: f64,
    evaluations: usize,
}

/// Nelder-Mead on the unit box; trial points are clamped into the box.
///
/// `f(x, cap)` must be exact below `cap` and may return any value `>= cap`
/// otherwise. Every comparison the simplex makes is against a value it
/// already holds, so passing that value as the cap changes no decision.
fn nelder_mead(
    f: &dyn Fn(&[f64], f64) -> f64,
    start: &[f64],
    max_evals: usize,
    xtol: f64,
    ftol: f64,
) -> SimplexResult {
    let n = start.len();
    let clamp = |x: Vec<f64>| -> Vec<f64> { x.into_iter().map(|v| v.clamp(0.0, 1.0)).collect() };
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64], cap: f64| {
        evals.set(evals.get() + 1);
        f(x, cap)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let x0 = clamp(start.to_vec());
    simplex.push((x0.clone(), eval(&x0, f64::INFINITY)));
    for i in 0..n {
        let mut x = x0.clone();
        let step = 0.1;
        x[i] = if x[i] + step <= 1.0 {
            x[i] + step
        } else {
            x[i] - step
        };
        let fx = eval(&x, f64::INFINITY);
        simplex.push((x, fx));
    }
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = if best.is_finite() && worst.is_finite() {
            worst - best
        } else {
            f64::INFINITY
        };
        let diameter = simplex
            .iter()
            .skip(1)
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            })
            .fold(0.0f64, f64::max);
        if (spread <= ftol * (1.0 + best.abs()) && diameter <= xtol.sqrt())
            || diameter <= xtol
            || evals.get() >= max_evals
        {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|(x, _)| x[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            clamp(
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect(),
            )
        };
        let xr = along(1.0);
        let fr = eval(&xr, simplex[n].1);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe, fr);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(0.5);
                let fc = eval(&xc, fr);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = eval(&xc, simplex[n].1);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = item
                        .0
                        .iter()
                        .zip(&x_best)
                        .map(|(a, b)| b + 0.5 * (a - b))
                        .collect();
                    let fx = eval(&x, f64::INFINITY);
                    *item = (x, fx);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    SimplexResult {
        x,
        f,
        evaluations: evals.get(),
    }
}

/// Normalized critical load of one design, `None` past the search cap.
pub fn evaluate_objective(
    config: &PendulumConfig,
    objective: Objective,
    s: &SearchSettings,
) -> Result<Option<f64>> {
    let classifier = Classifier::new(config, s.tol)?;
    match objective {
        Objective::FirstExit => {
            Ok(critload::critical_load_with(config, &classifier, s)?.normalized)
        }
        Objective::StableSupremum => {
            Ok(critload::highest_stable_load(config, &classifier, s)?.map(|b| b.normalized))
        }
    }
}

/// Simplex value of one design. For MIN the load scan stops at `cap`: a
/// first exit above it is never compared exactly.
fn score_value(
    sense: Sense,
    settings: &OptimizeSettings,
    cap: f64,
    run: impl Fn(&SearchSettings) -> Result<Option<f64>>,
) -> f64 {
    let mut s = settings.search;
    let truncated = sense == Sense::Min && cap < s.p_max;
    if truncated {
        s.p_max = cap.max(2.0 * s.scan_step);
    }
    let p = match run(&s) {
        Ok(Some(p)) => p,
        Ok(None) if truncated => return f64::INFINITY,
        Ok(None) => 2.0 * settings.search.p_max,
        Err(_) => return f64::INFINITY,
    };
    match sense {
        Sense::Min => p,
        Sense::Max => -p,
    }
}

/// Point on the unit sphere's positive orthant from `m - 1` angles, with
/// exact zeros at the ends of each angle range.
fn direction_from_angles(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len() + 1);
    let mut carry = 1.0;
    for &a in angles {
        let (c, s) = azimuth_components(a);
        out.push(carry * c);
        carry *= s;
    }
    out.push(carry);
    out
}

#[cfg(test)]
fn angles_from_direction(u: &[f64]) -> Vec<f64> {
    let m = u.len();
    (0..m - 1)
        .map(|k| {
            let tail: f64 = u[k + 1..].iter().map(|x| x * x).sum::<f64>().sqrt();
            tail.atan2(u[k])
        })
        .collect()
}

/// Search coordinates in the unit box and their map to mass vectors.
enum Chart {
    /// Angles over all masses; the mass vector keeps the norm `scale`.
    Directions { m: usize, scale: f64, hi: Vec<f64> },
    /// Free masses of the box; fixed ones are held at their bound.
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
        free: Vec<usize>,
    },
}

impl Chart {
    fn dim(&self) -> usize {
        match self {
            Chart::Directions { m, .. } => m - 1,
            Chart::Box { free, .. } => free.len(),
        }
    }

    fn masses(&self, y: &[f64]) -> Option<Vec<f64>> {
        match self {
            Chart::Directions { scale, hi, .. } => {
                let angles: Vec<f64> = y
                    .iter()
                    .map(|&t| if t >= 1.0 { FRAC_PI_2 } else { t * FRAC_PI_2 })
                    .collect();
                let u = direction_from_angles(&angles);
                // largest multiple of u inside the box, capped at `scale`
                let fit = u
                    .iter()
                    .zip(hi)
                    .filter(|(&ui, _)| ui > 0.0)
                    .map(|(&ui, &h)| h / ui)
                    .fold(*scale, f64::min);
                if fit <= 0.0 {
                    return None;
                }
                Some(u.iter().map(|&ui| fit * ui).collect())
            }
            Chart::Box { lo, hi, free } => {
                let mut x = lo.clone();
                for (k, &i) in free.iter().enumerate() {
                    x[i] = if y[k] >= 1.0 {
                        hi[i]
                    } else {
                        lo[i] + (hi[i] - lo[i]) * y[k]
                    };
                }
                Some(x)
            }
        }
    }
}

fn merge_reports(mut reports: Vec<ExtremumReport>, tol: f64) -> Vec<ExtremumReport> {
    let dir = |x: &[f64]| -> Vec<f64> {
        let n = x
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            .max(f64::MIN_POSITIVE);
        x.iter().map(|v| v / n).collect()
    };
    let key = |r: &ExtremumReport| r.objective.unwrap_or(f64::INFINITY);
    reports.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        let ord = match a.sense {
            Sense::Min => ka.total_cmp(&kb),
            Sense::Max => kb.total_cmp(&ka),
        };
        ord.then_with(|| {
            a.masses
                .iter()
                .zip(&b.masses)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let mut out: Vec<ExtremumReport> = Vec::new();
    for r in reports {
        let d = dir(&r.masses);
        let same = out.iter().any(|q| {
            let dq = dir(&q.masses);
            let dist = d
                .iter()
                .zip(&dq)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let both_unbounded = r.objective.is_none() && q.objective.is_none();
            let close_values = match (r.objective, q.objective) {
                (Some(a), Some(b)) => (a - b).abs() <= tol * (1.0 + a.abs()),
                _ => both_unbounded,
            };
            // rays to infinity are told apart by which masses vanish
            let same_zero_set =
                both_unbounded && r.certificate.zero_masses == q.certificate.zero_masses;
            (dist <= tol && close_values) || same_zero_set
        });
        if !same {
            out.push(r);
        }
    }
    out
}

/// Best point and evaluation count of one start, or why it failed.
type StartRun = std::result::Result<(Vec<f64>, usize), String>;

/// Multi-start bounded Nelder-Mead over mass vectors.
pub fn optimize_masses(
    config: &PendulumConfig,
    bounds: &Bounds,
    sense: Sense,
    settings: &OptimizeSettings,
) -> Result<OptimizeOutcome> {
    config.validate()?;
    settings.search.validate()?;
    let m = config.link_count();
    bounds.validate(m)?;
    let chart = if bounds.lo.iter().all(|&l| l == 0.0) {
        Chart::Directions {
            m,
            scale: bounds.hi.iter().map(|h| h * h).sum::<f64>().sqrt() * 0.5,
            hi: bounds.hi.clone(),
        }
    } else {
        Chart::Box {
            lo: bounds.lo.clone(),
            hi: bounds.hi.clone(),
            free: (0..m).filter(|&i| bounds.lo[i] < bounds.hi[i]).collect(),
        }
    };
    let evaluate = |x: &[f64]| -> Result<Option<f64>> {
        let c = config.with_masses(x.to_vec())?;
        evaluate_objective(&c, settings.objective, &settings.search)
    };
    if chart.dim() == 0 {
        let x = chart.masses(&[]).expect("box chart always maps");
        let value = evaluate(&x)?;
        let report = ExtremumReport {
            masses: x,
            alpha: None,
            objective: value,
            sense,
            kind: ExtremumKind::InteriorSmooth,
            certificate: Certificate::default(),
        };
        let report = classify_extremum(report, config, bounds, settings)?;
        return Ok(OptimizeOutcome {
            reports: vec![report],
            failed_starts: Vec::new(),
        });
    }
    let score = |y: &[f64], cap: f64| -> f64 {
        let Some(x) = chart.masses(y) else {
            return f64::INFINITY;
        };
        let Ok(c) = config.with_masses(x) else {
            return f64::INFINITY;
        };
        score_value(sense, settings, cap, |s| {
            evaluate_objective(&c, settings.objective, s)
        })
    };
    let dim = chart.dim();
    let runs: Vec<(usize, StartRun)> = (0..settings.starts)
        .into_par_iter()
        .map(|k| {
            let start = halton(settings.seed + k as u64 + 1, dim);
            let r = nelder_mead(
                &score,
                &start,
                settings.max_evals,
                settings.xtol,
                settings.ftol,
            );
            if !r.f.is_finite() {
                return (k, Err("no admissible design reached".to_string()));
            }
            match chart.masses(&r.x) {
                Some(x) => (k, Ok((x, r.evaluations))),
                None => (k, Err("start left the admissible box".to_string())),
            }
        })
        .collect();
    let mut reports = Vec::new();
    let mut failed = Vec::new();
    for (k, run) in runs {
        match run {
            Ok((x, evaluations)) => {
                let value = match evaluate(&x) {
                    Ok(v) => v,
                    Err(e) => {
                        failed.push((k, e.to_string()));
                        continue;
                    }
                };
                let report = ExtremumReport {
                    masses: x,
                    alpha: None,
                    objective: value,
                    sense,
                    kind: ExtremumKind::InteriorSmooth,
                    certificate: Certificate {
                        evaluations,
                        ..Certificate::default()
                    },
                };
                match classify_extremum(report, config, bounds, settings) {
                    Ok(r) => reports.push(r),
                    Err(e) => failed.push((k, e.to_string())),
                }
            }
            Err(msg) => failed.push((k, msg)),
        }
    }
    Ok(OptimizeOutcome {
        reports: merge_reports(reports, settings.merge_tol),
        failed_starts: failed,
    })
}

const ZERO_MASS_TOL: f64 = 1e-9;

/// Refine the kind of a converged report: an unbounded objective gives
/// UNBOUNDED_DIRECTION (with the ray probed), a vanished mass gives
/// BOUNDARY_MASS_ZERO, otherwise INTERIOR_SMOOTH with a gradient estimate.
pub fn classify_extremum(
    mut report: ExtremumReport,
    config: &PendulumConfig,
    bounds: &Bounds,
    settings: &OptimizeSettings,
) -> Result<ExtremumReport> {
    let x = report.masses.clone();
    let scale = x
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let zero: Vec<usize> = (0..x.len())
        .filter(|&i| bounds.lo[i] == 0.0 && x[i] <= ZERO_MASS_TOL * scale)
        .collect();
    let active: Vec<usize> = (0..x.len())
        .filter(|&i| {
            bounds.lo[i] < bounds.hi[i]
                && ((bounds.lo[i] > 0.0 && x[i] <= bounds.lo[i] * (1.0 + 1e-12))
                    || x[i] >= bounds.hi[i] * (1.0 - 1e-12))
        })
        .collect();
    report.certificate.zero_masses = zero.clone();
    report.certificate.active_bounds = active;
    let eval = |x: &[f64]| -> Option<f64> {
        config
            .with_masses(x.to_vec())
            .ok()
            .and_then(|c| evaluate_objective(&c, settings.objective, &settings.search).ok())
            .flatten()
    };
    if report.objective.is_none() {
        report.kind = ExtremumKind::UnboundedDirection;
        let mut ray = vec![0.0; x.len()];
        for &i in &zero {
            ray[i] = 1.0 / (zero.len() as f64).sqrt();
        }
        report.certificate.ray = Some(ray);
        report.certificate.ray_values = [1e-1, 1e-2, 1e-3, 1e-4, 0.0]
            .iter()
            .map(|&eps| {
                let mut y = x.clone();
                for &i in &zero {
                    y[i] = eps * scale;
                }
                (eps, eval(&y))
            })
            .collect();
        return Ok(report);
    }
    if !zero.is_empty() {
        report.kind = ExtremumKind::BoundaryMassZero;
        return Ok(report);
    }
    // gradient in log-mass coordinates over the free masses
    let h = 1e-4;
    let mut g2 = 0.0;
    for i in 0..x.len() {
        if bounds.lo[i] == bounds.hi[i] {
            continue;
        }
        let mut up = x.clone();
        let mut down = x.clone();
        up[i] *= 1.0 + h;
        down[i] *= 1.0 - h;
        if let (Some(a), Some(b)) = (eval(&up), eval(&down)) {
            g2 += ((a - b) / (2.0 * h)).powi(2);
        }
    }
    report.certificate.gradient_norm = Some(g2.sqrt());
    report.kind = ExtremumKind::InteriorSmooth;
    Ok(report)
}

/// Multi-start search over the azimuth of a mass plane.
pub fn optimize_azimuth(
    plane: &MassPlane,
    sense: Sense,
    settings: &OptimizeSettings,
) -> Result<OptimizeOutcome> {
    plane.validate()?;
    settings.search.validate()?;
    let evaluate = |alpha: f64| -> Result<Option<f64>> {
        evaluate_objective(
            &plane.config_at(alpha)?,
            settings.objective,
            &settings.search,
        )
    };
    let to_alpha = |y: f64| if y >= 1.0 { FRAC_PI_2 } else { y * FRAC_PI_2 };
    let score = |y: &[f64], cap: f64| -> f64 {
        let Ok(c) = plane.config_at(to_alpha(y[0])) else {
            return f64::INFINITY;
        };
        score_value(sense, settings, cap, |s| {
            evaluate_objective(&c, settings.objective, s)
        })
    };
    let runs: Vec<(usize, SimplexResult)> = (0..settings.starts)
        .into_par_iter()
        .map(|k| {
            let start = halton(settings.seed + k as u64 + 1, 1);
            (
                k,
                nelder_mead(
                    &score,
                    &start,
                    settings.max_evals,
                    settings.xtol,
                    settings.ftol,
                ),
            )
        })
        .collect();
    let mut reports = Vec::new();
    let mut failed = Vec::new();
    for (k, r) in runs {
        if !r.f.is_finite() {
            failed.push((k, "no admissible design reached".to_string()));
            continue;
        }
        let alpha = to_alpha(r.x[0]);
        let objective = match evaluate(alpha) {
            Ok(v) => v,
            Err(e) => {
                failed.push((k, e.to_string()));
                continue;
            }
        };
        let report = ExtremumReport {
            masses: plane.masses_at(alpha),
            alpha: Some(alpha),
            objective,
            sense,
            kind: ExtremumKind::InteriorSmooth,
            certificate: Certificate {
                evaluations: r.evaluations,
                ..Certificate::default()
            },
        };
        reports.push(classify_azimuth_extremum(report, plane, settings)?);
    }
    let mut merged: Vec<ExtremumReport> = Vec::new();
    let mut sorted = reports;
    sorted.sort_by(|a, b| {
        let (ka, kb) = (
            a.objective.unwrap_or(f64::INFINITY),
            b.objective.unwrap_or(f64::INFINITY),
        );
        let ord = match sense {
            Sense::Min => ka.total_cmp(&kb),
            Sense::Max => kb.total_cmp(&ka),
        };
        ord.then(a.alpha.unwrap_or(0.0).total_cmp(&b.alpha.unwrap_or(0.0)))
    });
    for r in sorted {
        let a = r.alpha.unwrap_or(0.0);
        if !merged
            .iter()
            .any(|q| (q.alpha.unwrap_or(0.0) - a).abs() <= settings.merge_tol * (1.0 + a.abs()))
        {
            merged.push(r);
        }
    }
    Ok(OptimizeOutcome {
        reports: merged,
        failed_starts: failed,
    })
}

/// Distance in `α` and relative distance in the load within which a
/// converged extremum is attributed to a nearby cusp.
const CUSP_ALPHA_RADIUS: f64 = 0.02;
const CUSP_LOAD_RADIUS: f64 = 0.05;

/// [`classify_extremum`] for azimuth results, with an additional probe for
/// a triple-root cusp near the extremum.
pub fn classify_azimuth_extremum(
    report: ExtremumReport,
    plane: &MassPlane,
    settings: &OptimizeSettings,
) -> Result<ExtremumReport> {
    let m = plane.base.link_count();
    let mut bounds = Bounds {
        lo: plane.base.masses().to_vec(),
        hi: plane.base.masses().to_vec(),
    };
    let (i, j) = plane.plane;
    for k in [i, j] {
        bounds.lo[k] = 0.0;
        bounds.hi[k] = plane.r;
    }
    debug_assert_eq!(bounds.lo.len(), m);
    let alpha = report.alpha.unwrap_or(0.0);
    let mut report = classify_extremum(report, &plane.base, &bounds, settings)?;
    if report.kind == ExtremumKind::InteriorSmooth {
        // the mass-space gradient is not the one the search saw: use α
        let h = 1e-5;
        let eval = |a: f64| {
            plane
                .config_at(a.clamp(0.0, FRAC_PI_2))
                .ok()
                .and_then(|c| evaluate_objective(&c, settings.objective, &settings.search).ok())
                .flatten()
        };
        report.certificate.gradient_norm = match (eval(alpha + h), eval(alpha - h)) {
            (Some(a), Some(b)) => Some(((a - b) / (2.0 * h)).abs()),
            _ => None,
        };
    }
    if let (Some(p), false) = (report.objective, plane.base.is_damped()) {
        if let Some(point) = nearby_cusp(plane, alpha, plane.base.denormalize_load(p)) {
            report.kind = ExtremumKind::SingularCusp;
            report.certificate.singular = Some(point);
        }
    }
    Ok(report)
}

fn nearby_cusp(plane: &MassPlane, alpha: f64, load: f64) -> Option<SingularPoint> {
    let family = PlaneFamily::new(plane.clone()).ok()?;
    let config = plane.config_at(alpha).ok()?;
    let mu = crate::charpoly::LoadFamily::new(&config)
        .ok()?
        .mu_poly_at(load)
        .ok()?;
    let spec = crate::roots::roots(&mu).ok()?;
    spec.roots
        .iter()
        .filter(|z| z.re < 0.0)
        .filter_map(|z: &Complex64| {
            singular::find_triple_root_cusp(&family, (alpha, load, z.re), 1e-9).ok()
        })
        .find(|p| {
            p.jordan_order == 3
                && (p.location.alpha.unwrap_or(f64::NAN) - alpha).abs() <= CUSP_ALPHA_RADIUS
                && (p.location.load - load).abs() <= CUSP_LOAD_RADIUS * load.abs()
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> OptimizeSettings {
        OptimizeSettings {
            starts: 6,
            search: SearchSettings {
                p_max: 1e3,
                ..SearchSettings::default()
            },
            ..OptimizeSettings::default()
        }
    }

    #[test]
    fn halton_is_low_discrepancy_and_deterministic() {
        assert_eq!(halton(1, 2), vec![0.5, 1.0 / 3.0]);
        assert_eq!(halton(2, 2), vec![0.25, 2.0 / 3.0]);
        assert_eq!(halton(5, 1), vec![0.625]);
    }

    #[test]
    fn directions_round_trip() {
        let u = direction_from_angles(&[0.3, 1.1]);
        let n: f64 = u.iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-15);
        let back = angles_from_direction(&u);
        assert!((back[0] - 0.3).abs() < 1e-14 && (back[1] - 1.1).abs() < 1e-14);
        assert_eq!(direction_from_angles(&[FRAC_PI_2]), vec![0.0, 1.0]);
        assert_eq!(direction_from_angles(&[0.0, 0.7]), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn nelder_mead_on_a_quadratic() {
        let f = |y: &[f64], _: f64| (y[0] - 0.3).powi(2) + 2.0 * (y[1] - 0.7).powi(2);
        let r = nelder_mead(&f, &[0.9, 0.1], 2000, 1e-12, 1e-16);
        assert!((r.x[0] - 0.3).abs() < 1e-6 && (r.x[1] - 0.7).abs() < 1e-6);
        // clamped minimum on the boundary
        let g = |y: &[f64], _: f64| y[0] + (y[1] - 0.5).powi(2);
        let r = nelder_mead(&g, &[0.5, 0.9], 2000, 1e-12, 1e-16);
        assert_eq!(r.x[0], 0.0);
    }

    #[test]
    fn two_link_minimum_on_stiffness_ray() {
        let c = PendulumConfig::undamped(1.0, vec![1.0, 1.0], vec![2.0, 1.0]).unwrap();
        let out =
            optimize_masses(&c, &Bounds::uniform(2, 0.0, 10.0), Sense::Min, &quick()).unwrap();
        let best = &out.reports[0];
        assert!((best.objective.unwrap() - 2.0).abs() < 1e-6);
        let angle = best.masses[1].atan2(best.masses[0]);
        assert!((angle - 1.0f64.atan2(2.0)).abs() < 1e-4);
        assert_eq!(best.kind, ExtremumKind::InteriorSmooth);
    }

    #[test]
    fn two_link_maxima() {
        let c = PendulumConfig::ziegler();
        let out =
            optimize_masses(&c, &Bounds::uniform(2, 0.0, 10.0), Sense::Max, &quick()).unwrap();
        let kinds: Vec<_> = out.reports.iter().map(|r| r.kind).collect();
        assert_eq!(
            kinds,
            vec![
                ExtremumKind::UnboundedDirection,
                ExtremumKind::BoundaryMassZero
            ],
            "{:?}",
            out.reports
        );
        let unbounded = &out.reports[0];
        assert_eq!(unbounded.certificate.zero_masses, vec![1]);
        let vals: Vec<f64> = unbounded.certificate.ray_values[..3]
            .iter()
            .map(|(_, v)| v.unwrap())
            .collect();
        assert!(vals[0] < vals[1] && vals[1] < vals[2]);
        let boundary = &out.reports[1];
        assert_eq!(boundary.certificate.zero_masses, vec![0]);
        assert!((boundary.objective.unwrap() - 2.5).abs() < 1e-9);
    }

    #[test]
    fn fixed_box_is_evaluated_once() {
        let c = PendulumConfig::ziegler();
        let b = Bounds {
            lo: vec![2.0, 1.0],
            hi: vec![2.0, 1.0],
        };
        let out = optimize_masses(&c, &b, Sense::Max, &quick()).unwrap();
        assert_eq!(out.reports.len(), 1);
        assert!((out.reports[0].objective.unwrap() - (3.5 - 2f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn bounds_are_checked() {
        let c = PendulumConfig::ziegler();
        let b = Bounds {
            lo: vec![1.0, 0.0],
            hi: vec![0.5, 1.0],
        };
        assert!(optimize_masses(&c, &b, Sense::Min, &quick()).is_err());
    }
}
