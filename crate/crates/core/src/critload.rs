//! Critical follower loads.
//!
//! Two-link pendulums have closed forms for the undamped flutter onset and
//! flutter-to-divergence loads, for the damped flutter onset and for its
//! limit as damping vanishes along a fixed ratio. Any link count is handled
//! numerically: the load axis is scanned on a uniform grid and every flip of
//! the classification is bisected.

use serde::{Deserialize, Serialize};

use crate::charpoly::{RealPoly, DEFLATION_TOL};
use crate::error::{Error, Result};
use crate::model::PendulumConfig;
use crate::stability::{Classifier, StabilityClass, ToleranceSet};

/// Relative size below which the leading coefficient at a boundary is taken
/// to mean that an eigenvalue passed through infinity.
const INFINITY_ESCAPE_TOL: f64 = 1e-6;

const MAX_FLIPS_PER_CELL: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Transition {
    FlutterOnset,
    FlutterToDivergence,
    DivergenceOnset,
    /// Unstable below, stable above.
    Restabilization,
    DivergenceToFlutter,
    Unbounded,
}

impl Transition {
    pub fn label(self) -> &'static str {
        match self {
            Transition::FlutterOnset => "FLUTTER_ONSET",
            Transition::FlutterToDivergence => "FLUTTER_TO_DIVERGENCE",
            Transition::DivergenceOnset => "DIVERGENCE_ONSET",
            Transition::Restabilization => "RESTABILIZATION",
            Transition::DivergenceToFlutter => "DIVERGENCE_TO_FLUTTER",
            Transition::Unbounded => "UNBOUNDED",
        }
    }
}

impl std::fmt::Display for Transition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// First load at which a pendulum stable at zero load loses stability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalLoad {
    /// `P*` in force units; `None` means no transition below the search cap.
    pub value: Option<f64>,
    /// `p* = P* l / c_m`.
    pub normalized: Option<f64>,
    pub transition: Transition,
    /// `|Im λ|` of the eigenvalue that leaves the stable half plane.
    pub critical_frequency: Option<f64>,
    /// Class just above `P*`.
    pub destination: Option<StabilityClass>,
    /// Stability was lost by an eigenvalue returning from infinity.
    pub via_infinity: bool,
}

impl CriticalLoad {
    pub fn unbounded() -> Self {
        CriticalLoad {
            value: None,
            normalized: None,
            transition: Transition::Unbounded,
            critical_frequency: None,
            destination: None,
            via_infinity: false,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        self.value.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSettings {
    /// Search cap on the normalized load.
    pub p_max: f64,
    /// Normalized grid step of the coarse scan.
    pub scan_step: f64,
    /// Normalized width at which bisection stops.
    pub bisect_tol: f64,
    pub tol: ToleranceSet,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings {
            p_max: 1e3,
            scan_step: 0.01,
            bisect_tol: 1e-10,
            tol: ToleranceSet::default(),
        }
    }
}

impl SearchSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.scan_step.is_finite()
            && self.scan_step > 0.0
            && self.p_max.is_finite()
            && self.p_max > self.scan_step
            && self.bisect_tol.is_finite()
            && self.bisect_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "search settings need p_max > scan_step > 0 and bisect_tol > 0, got \
                 p_max={}, scan_step={}, bisect_tol={}",
                self.p_max, self.scan_step, self.bisect_tol
            )))
        }
    }

    fn grid_len(&self) -> usize {
        (self.p_max / self.scan_step).ceil() as usize
    }

    fn grid_point(&self, k: usize) -> f64 {
        (k as f64 * self.scan_step).min(self.p_max)
    }
}

/// One change of classification along the load axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadBoundary {
    pub load: f64,
    pub normalized: f64,
    pub from: StabilityClass,
    pub to: StabilityClass,
    pub transition: Transition,
    pub critical_frequency: Option<f64>,
    pub via_infinity: bool,
}

fn require_two_links(config: &PendulumConfig) -> Result<()> {
    config.validate()?;
    if config.link_count() == 2 {
        Ok(())
    } else {
        Err(Error::Unsupported("a two-link pendulum"))
    }
}

/// Normalized flutter onset and flutter-to-divergence loads of an undamped
/// two-link pendulum, `p = 2 + (sqrt(m1/m2) ∓ sqrt(c1/c2))² / 2`.
pub fn critical_loads_closed_undamped_m2(config: &PendulumConfig) -> Result<(f64, f64)> {
    require_two_links(config)?;
    if config.is_damped() {
        return Err(Error::Unsupported("an undamped configuration"));
    }
    let (m1, m2) = (config.masses()[0], config.masses()[1]);
    let (c1, c2) = (config.stiffnesses()[0], config.stiffnesses()[1]);
    if m2 == 0.0 {
        return Err(Error::InfiniteLoad);
    }
    let a = (m1 / m2).sqrt();
    let b = (c1 / c2).sqrt();
    Ok((2.0 + 0.5 * (a - b).powi(2), 2.0 + 0.5 * (a + b).powi(2)))
}

/// Flutter onset load `P` of a damped two-link pendulum from the
/// Routh-Hurwitz condition.
pub fn critical_load_closed_damped_m2(config: &PendulumConfig) -> Result<f64> {
    require_two_links(config)?;
    let (m1, m2) = (config.masses()[0], config.masses()[1]);
    let (c1, c2) = (config.stiffnesses()[0], config.stiffnesses()[1]);
    let (d1, d2) = (config.dampings()[0], config.dampings()[1]);
    let l = config.link_length();
    let num = 4.0 * m2 * m2 * (d2 * d2 * c1 * c1 + d1 * d1 * c2 * c2)
        + d1 * d2 * (8.0 * m2 * (m1 + 2.0 * m2) * c2 * c2 + (c1 * m2 - m1 * c2).powi(2));
    let den = 2.0 * m2 * l * (4.0 * m2 * d2 + d1 * m2 + m1 * d2) * (c1 * d2 + d1 * c2);
    if den == 0.0 || !den.is_finite() {
        return Err(Error::DegenerateDamping);
    }
    Ok(num / den + d1 * d2 / (2.0 * m2 * l.powi(3)))
}

/// Limit of the damped flutter load as `d1 = β d2` and `d2 → 0`. The
/// configuration's own dampings are ignored.
pub fn zero_damping_limit_m2(config: &PendulumConfig, beta: f64) -> Result<f64> {
    require_two_links(config)?;
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "damping ratio must be finite and non-negative, got {beta}"
        )));
    }
    let (m1, m2) = (config.masses()[0], config.masses()[1]);
    let (c1, c2) = (config.stiffnesses()[0], config.stiffnesses()[1]);
    let l = config.link_length();
    if m2 == 0.0 {
        return Err(Error::InfiniteLoad);
    }
    let num = 4.0 * m2 * m2 * (c1 * c1 + beta * beta * c2 * c2)
        + beta * (8.0 * m2 * (m1 + 2.0 * m2) * c2 * c2 + (c1 * m2 - m1 * c2).powi(2));
    let den = 2.0 * m2 * l * (4.0 * m2 + beta * m2 + m1) * (c1 + beta * c2);
    Ok(num / den)
}

fn transition_between(from: StabilityClass, to: StabilityClass, oscillatory: bool) -> Transition {
    use StabilityClass::*;
    if to.is_stable() {
        return Transition::Restabilization;
    }
    if from.is_stable() {
        return match to {
            Divergence => Transition::DivergenceOnset,
            Flutter => Transition::FlutterOnset,
            _ if oscillatory => Transition::FlutterOnset,
            _ => Transition::DivergenceOnset,
        };
    }
    match (from, to) {
        (Divergence, Flutter) | (FlutterAndDivergence, Flutter) => Transition::DivergenceToFlutter,
        (Flutter, FlutterAndDivergence) => Transition::DivergenceOnset,
        (Divergence, FlutterAndDivergence) => Transition::FlutterOnset,
        _ => Transition::FlutterToDivergence,
    }
}

fn deciding_poly(classifier: &Classifier, load: f64) -> Result<RealPoly> {
    let family = classifier.family();
    Ok(if family.is_damped() {
        family.char_poly_at(load).poly().clone()
    } else {
        family.mu_poly_at(load)?.poly().clone()
    })
}

/// Whether the leading coefficient that is present below the boundary has
/// (nearly) vanished at it.
fn escapes_to_infinity(classifier: &Classifier, below: f64, at: f64) -> Result<bool> {
    let before = deciding_poly(classifier, below)?;
    let lead = before.leading_negligible(DEFLATION_TOL);
    let now = deciding_poly(classifier, at)?;
    let scale = now.max_abs_coeff();
    Ok(lead < now.coeffs().len() && now.coeffs()[lead].abs() <= INFINITY_ESCAPE_TOL * scale)
}

fn bisect(
    classifier: &Classifier,
    mut lo: f64,
    mut hi: f64,
    lo_class: StabilityClass,
    width: f64,
) -> Result<(f64, f64)> {
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if classifier.underlying_at(mid)? == lo_class {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

fn describe_boundary(
    classifier: &Classifier,
    config: &PendulumConfig,
    reference: f64,
    lo: f64,
    hi: f64,
    from: StabilityClass,
) -> Result<LoadBoundary> {
    let load = 0.5 * (lo + hi);
    let above = classifier.classify_at(hi)?;
    let to = above.underlying;
    let via_infinity = escapes_to_infinity(classifier, reference, load)?;
    let leader = above
        .lambda_roots
        .roots
        .iter()
        .copied()
        .reduce(|a, b| if b.re > a.re { b } else { a });
    let oscillatory =
        leader.is_some_and(|z| z.im.abs() > classifier.tolerances().imaginary_tol * z.norm());
    let critical_frequency = if via_infinity {
        None
    } else {
        leader.map(|z| z.im.abs())
    };
    Ok(LoadBoundary {
        load,
        normalized: config.normalize_load(load),
        from,
        to,
        transition: transition_between(from, to, oscillatory),
        critical_frequency,
        via_infinity,
    })
}

/// Every classification change in `(0, p_max]`, in increasing load. With
/// `first_exit` the scan stops at the first loss of stability.
pub fn load_boundaries(
    config: &PendulumConfig,
    classifier: &Classifier,
    settings: &SearchSettings,
    first_exit: bool,
) -> Result<Vec<LoadBoundary>> {
    settings.validate()?;
    let width = config.denormalize_load(settings.bisect_tol);
    let mut out = Vec::new();
    let mut prev_load = 0.0;
    let mut prev = classifier.underlying_at(0.0)?;
    // the grid point just below a boundary may itself sit on it, so leading
    // coefficients are compared against the middle of the current interval
    let mut segment_start = 0.0;
    for k in 1..=settings.grid_len() {
        let load = config.denormalize_load(settings.grid_point(k));
        let class = classifier.underlying_at(load)?;
        // a single grid cell may hide several flips; resolve them left to right
        let mut cur = prev;
        let mut lo_load = prev_load;
        let mut reference = 0.5 * (segment_start + prev_load);
        let mut flips = 0;
        while class != cur && flips < MAX_FLIPS_PER_CELL {
            flips += 1;
            let (lo, hi) = bisect(classifier, lo_load, load, cur, width)?;
            let b = describe_boundary(classifier, config, reference, lo, hi, cur)?;
            let stop = first_exit && cur.is_stable() && !b.to.is_stable();
            cur = b.to;
            lo_load = hi;
            reference = hi;
            segment_start = hi;
            out.push(b);
            if stop {
                return Ok(out);
            }
        }
        prev = class;
        prev_load = load;
    }
    Ok(out)
}

/// Smallest load at which the pendulum leaves its stable class.
pub fn critical_load_numeric(config: &PendulumConfig, s: &SearchSettings) -> Result<CriticalLoad> {
    let classifier = Classifier::new(config, s.tol)?;
    critical_load_with(config, &classifier, s)
}

pub fn critical_load_with(
    config: &PendulumConfig,
    classifier: &Classifier,
    s: &SearchSettings,
) -> Result<CriticalLoad> {
    s.validate()?;
    if !classifier.underlying_at(0.0)?.is_stable() {
        return Err(Error::UnstableAtZeroLoad);
    }
    let first = load_boundaries(config, classifier, s, true)?
        .into_iter()
        .find(|b| b.from.is_stable() && !b.to.is_stable());
    Ok(match first {
        None => CriticalLoad::unbounded(),
        Some(b) => CriticalLoad {
            value: Some(b.load),
            normalized: Some(b.normalized),
            transition: b.transition,
            critical_frequency: b.critical_frequency,
            destination: Some(b.to),
            via_infinity: b.via_infinity,
        },
    })
}

/// Upper end of the highest stable load interval below the cap. Unlike the
/// first exit this follows stable tongues that reappear above an unstable
/// gap. `None` when the pendulum is still stable at the cap.
pub fn highest_stable_load(
    config: &PendulumConfig,
    classifier: &Classifier,
    s: &SearchSettings,
) -> Result<Option<LoadBoundary>> {
    s.validate()?;
    if !classifier.underlying_at(0.0)?.is_stable() {
        return Err(Error::UnstableAtZeroLoad);
    }
    let top = config.denormalize_load(s.p_max);
    if classifier.underlying_at(top)?.is_stable() {
        return Ok(None);
    }
    Ok(load_boundaries(config, classifier, s, false)?
        .into_iter()
        .rev()
        .find(|b| b.from.is_stable() && !b.to.is_stable()))
}
