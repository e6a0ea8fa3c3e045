//! Stability diagrams over an azimuth in a plane of two masses.
//!
//! Two masses `m_i = r cos α`, `m_j = r sin α` vary while everything else is
//! held at the base configuration. Each row of a sweep lists every load at
//! which the classification changes, so the rows together trace the
//! boundaries of the `(α, P)` stability diagram.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critload::{self, LoadBoundary, SearchSettings};
use crate::error::{Error, Result};
use crate::model::PendulumConfig;
use crate::stability::{Classifier, StabilityClass, ToleranceSet};

/// `(cos α, sin α)` with exact zeros at the ends of the quarter circle.
pub fn azimuth_components(alpha: f64) -> (f64, f64) {
    if alpha == 0.0 {
        (1.0, 0.0)
    } else if alpha == FRAC_PI_2 {
        (0.0, 1.0)
    } else {
        (alpha.cos(), alpha.sin())
    }
}

/// `n + 1` equally spaced angles from 0 to π/2. The k-th angle depends only
/// on the ratio `k / n`, so refining the grid reproduces the old angles bit
/// for bit.
pub fn uniform_alpha_grid(n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![0.0];
    }
    (0..=n)
        .map(|k| {
            if k == n {
                FRAC_PI_2
            } else {
                FRAC_PI_2 * (k as f64 / n as f64)
            }
        })
        .collect()
}

/// Pair of mass indices (0-based) swept along a quarter circle of radius `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassPlane {
    pub base: PendulumConfig,
    pub plane: (usize, usize),
    pub r: f64,
}

impl MassPlane {
    pub fn new(base: PendulumConfig, plane: (usize, usize), r: f64) -> Result<Self> {
        let p = MassPlane { base, plane, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        let (i, j) = self.plane;
        let m = self.base.link_count();
        if i == j || i >= m || j >= m {
            return Err(Error::InvalidConfig(format!(
                "mass plane ({i}, {j}) needs two distinct indices below {m}"
            )));
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "radius must be positive, got {}",
                self.r
            )));
        }
        Ok(())
    }

    pub fn masses_at(&self, alpha: f64) -> Vec<f64> {
        let (c, s) = azimuth_components(alpha);
        let mut masses = self.base.masses().to_vec();
        masses[self.plane.0] = self.r * c;
        masses[self.plane.1] = self.r * s;
        masses
    }

    pub fn config_at(&self, alpha: f64) -> Result<PendulumConfig> {
        self.base.with_masses(self.masses_at(alpha))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(flatten)]
    pub plane: MassPlane,
    pub alpha_grid: Vec<f64>,
    /// Stop each row at its first loss of stability.
    pub first_exit_only: bool,
}

impl SweepSpec {
    pub fn new(plane: MassPlane, alpha_grid: Vec<f64>) -> Result<Self> {
        let s = SweepSpec {
            plane,
            alpha_grid,
            first_exit_only: false,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.plane.validate()?;
        if self.alpha_grid.is_empty() {
            return Err(Error::InvalidConfig("empty azimuth grid".into()));
        }
        let in_range = self
            .alpha_grid
            .iter()
            .all(|a| (0.0..=FRAC_PI_2).contains(a));
        let increasing = self.alpha_grid.windows(2).all(|w| w[0] < w[1]);
        if in_range && increasing {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "azimuth grid must be strictly increasing within [0, pi/2]".into(),
            ))
        }
    }
}

/// Load interval carrying one stability class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub from_load: f64,
    /// `None` for the band reaching the search cap.
    pub to_load: Option<f64>,
    pub class: StabilityClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub masses: Vec<f64>,
    pub boundaries: Vec<LoadBoundary>,
    pub bands: Vec<Band>,
    pub error: Option<String>,
}

impl SweepRow {
    /// First boundary that leaves a stable band.
    pub fn first_exit(&self) -> Option<&LoadBoundary> {
        self.boundaries
            .iter()
            .find(|b| b.from.is_stable() && !b.to.is_stable())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub settings: SearchSettings,
    pub rows: Vec<SweepRow>,
}

fn bands_of(initial: StabilityClass, boundaries: &[LoadBoundary]) -> Vec<Band> {
    let mut bands = Vec::with_capacity(boundaries.len() + 1);
    let mut start = 0.0;
    let mut class = initial;
    for b in boundaries {
        bands.push(Band {
            from_load: start,
            to_load: Some(b.load),
            class,
        });
        start = b.load;
        class = b.to;
    }
    bands.push(Band {
        from_load: start,
        to_load: None,
        class,
    });
    bands
}

fn sweep_row(spec: &SweepSpec, settings: &SearchSettings, alpha: f64) -> SweepRow {
    let masses = spec.plane.masses_at(alpha);
    let computed = (|| {
        let config = spec.plane.config_at(alpha)?;
        let classifier = Classifier::new(&config, settings.tol)?;
        let initial = classifier.underlying_at(0.0)?;
        if spec.first_exit_only && !initial.is_stable() {
            return Err(Error::UnstableAtZeroLoad);
        }
        let boundaries =
            critload::load_boundaries(&config, &classifier, settings, spec.first_exit_only)?;
        Ok((initial, boundaries))
    })();
    match computed {
        Ok((initial, boundaries)) => SweepRow {
            alpha,
            masses,
            bands: bands_of(initial, &boundaries),
            boundaries,
            error: None,
        },
        Err(e) => SweepRow {
            alpha,
            masses,
            boundaries: Vec::new(),
            bands: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

/// Boundary loads for every azimuth of the grid. Rows are computed in
/// parallel and returned in grid order; failures are kept per row.
pub fn sweep_azimuth(spec: &SweepSpec, settings: &SearchSettings) -> Result<SweepResult> {
    spec.validate()?;
    settings.validate()?;
    let rows = spec
        .alpha_grid
        .par_iter()
        .map(|&alpha| sweep_row(spec, settings, alpha))
        .collect();
    Ok(SweepResult {
        spec: spec.clone(),
        settings: *settings,
        rows,
    })
}

pub const CSV_HEADER: [&str; 7] = [
    "alpha",
    "r",
    "boundary_index",
    "load_P",
    "load_p_normalized",
    "transition",
    "omega",
];

impl SweepResult {
    /// One line per boundary. Rows without boundaries get a single
    /// `UNBOUNDED` line, failed rows an `ERROR` line with empty loads.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        let r = self.spec.plane.r.to_string();
        for row in &self.rows {
            let alpha = row.alpha.to_string();
            if let Some(e) = &row.error {
                let label = format!("ERROR: {e}");
                w.write_record([alpha.as_str(), &r, "", "", "", &label, ""])?;
                continue;
            }
            if row.boundaries.is_empty() {
                w.write_record([alpha.as_str(), &r, "0", "", "", "UNBOUNDED", ""])?;
                continue;
            }
            for (k, b) in row.boundaries.iter().enumerate() {
                let omega = b
                    .critical_frequency
                    .map_or(String::new(), |w| w.to_string());
                w.write_record([
                    alpha.as_str(),
                    &r,
                    &k.to_string(),
                    &b.load.to_string(),
                    &b.normalized.to_string(),
                    b.transition.label(),
                    &omega,
                ])?;
            }
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

/// Raster of stability classes over azimuth and load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassGrid {
    pub alphas: Vec<f64>,
    pub loads: Vec<f64>,
    pub normalized_loads: Vec<f64>,
    /// `classes[a][k]` is the class at `alphas[a]` and `loads[k]`.
    pub classes: Vec<Vec<StabilityClass>>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| {
            if k + 1 == n {
                hi
            } else {
                lo + (hi - lo) * (k as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

/// Classify every node of an `alpha_steps x load_steps` grid. Loads are in
/// force units. Nodes whose configuration cannot be classified are reported
/// as BOUNDARY.
pub fn classify_grid(
    plane: &MassPlane,
    alpha_range: (f64, f64),
    alpha_steps: usize,
    load_range: (f64, f64),
    load_steps: usize,
    tol: &ToleranceSet,
) -> Result<ClassGrid> {
    plane.validate()?;
    let (a0, a1) = alpha_range;
    let (p0, p1) = load_range;
    let ok = 0.0 <= a0
        && a0 <= a1
        && a1 <= FRAC_PI_2
        && p0.is_finite()
        && p1.is_finite()
        && p0 <= p1
        && alpha_steps > 0
        && load_steps > 0;
    if !ok {
        return Err(Error::InvalidConfig("invalid grid ranges".into()));
    }
    let alphas = linspace(a0, a1, alpha_steps);
    let loads = linspace(p0, p1, load_steps);
    let classes = alphas
        .par_iter()
        .map(|&alpha| {
            let classifier = plane
                .config_at(alpha)
                .and_then(|c| Classifier::new(&c, *tol));
            loads
                .iter()
                .map(|&p| {
                    classifier
                        .as_ref()
                        .ok()
                        .and_then(|c| c.classify_at(p).ok())
                        .map_or(StabilityClass::Boundary, |r| r.class)
                })
                .collect()
        })
        .collect();
    let normalized_loads = loads
        .iter()
        .map(|&p| plane.base.normalize_load(p))
        .collect();
    Ok(ClassGrid {
        alphas,
        loads,
        normalized_loads,
        classes,
    })
}

pub const GRID_CSV_HEADER: [&str; 4] = ["alpha", "load_P", "load_p_normalized", "class"];

impl ClassGrid {
    /// One line per node, azimuth-major.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(GRID_CSV_HEADER)?;
        for (alpha, row) in self.alphas.iter().zip(&self.classes) {
            let alpha = alpha.to_string();
            for ((p, pn), class) in self.loads.iter().zip(&self.normalized_loads).zip(row) {
                w.write_record([
                    alpha.as_str(),
                    &p.to_string(),
                    &pn.to_string(),
                    class.label(),
                ])?;
            }
        }
        w.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_link_plane(r: f64) -> MassPlane {
        MassPlane::new(PendulumConfig::ziegler(), (0, 1), r).unwrap()
    }

    fn settings() -> SearchSettings {
        SearchSettings {
            p_max: 20.0,
            ..SearchSettings::default()
        }
    }

    #[test]
    fn endpoints_zero_a_mass_exactly() {
        let p = two_link_plane(1.0);
        assert_eq!(p.masses_at(0.0), vec![1.0, 0.0]);
        assert_eq!(p.masses_at(FRAC_PI_2), vec![0.0, 1.0]);
    }

    #[test]
    fn refined_grid_contains_coarse_grid() {
        let coarse = uniform_alpha_grid(7);
        let fine = uniform_alpha_grid(14);
        for (k, a) in coarse.iter().enumerate() {
            assert_eq!(*a, fine[2 * k]);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(MassPlane::new(PendulumConfig::ziegler(), (1, 1), 1.0).is_err());
        assert!(MassPlane::new(PendulumConfig::ziegler(), (0, 2), 1.0).is_err());
        assert!(MassPlane::new(PendulumConfig::ziegler(), (0, 1), 0.0).is_err());
        assert!(SweepSpec::new(two_link_plane(1.0), vec![0.2, 0.1]).is_err());
        assert!(SweepSpec::new(two_link_plane(1.0), vec![0.0, 2.0]).is_err());
    }

    #[test]
    fn ziegler_direction_row() {
        let alpha = 0.5f64.atan();
        let spec = SweepSpec::new(two_link_plane(1.0), vec![alpha]).unwrap();
        let res = sweep_azimuth(&spec, &settings()).unwrap();
        let row = &res.rows[0];
        assert_eq!(row.boundaries.len(), 2);
        assert!((row.boundaries[0].normalized - (3.5 - 2f64.sqrt())).abs() < 1e-8);
        assert!((row.boundaries[1].normalized - (3.5 + 2f64.sqrt())).abs() < 1e-8);
        let classes: Vec<_> = row.bands.iter().map(|b| b.class).collect();
        assert_eq!(
            classes,
            vec![
                StabilityClass::MarginallyStable,
                StabilityClass::Flutter,
                StabilityClass::Divergence
            ]
        );
    }

    #[test]
    fn csv_layout() {
        let spec = SweepSpec::new(two_link_plane(1.0), vec![0.0, 0.5f64.atan()]).unwrap();
        let csv = sweep_azimuth(&spec, &settings()).unwrap().to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "alpha,r,boundary_index,load_P,load_p_normalized,transition,omega"
        );
        // α = 0 leaves the free end massless: no boundary below the cap
        assert_eq!(lines[1], "0,1,0,,,UNBOUNDED,");
        assert!(lines[2].contains(",0,") && lines[2].contains("FLUTTER_ONSET"));
        assert!(lines[3].contains("FLUTTER_TO_DIVERGENCE"));
    }

    #[test]
    fn grid_zero_load_is_stable() {
        let g = classify_grid(
            &two_link_plane(1.0),
            (0.0, FRAC_PI_2),
            9,
            (0.0, 8.0),
            17,
            &ToleranceSet::default(),
        )
        .unwrap();
        assert_eq!(g.classes.len(), 9);
        assert!(g.classes.iter().all(|row| row[0].is_stable()));
    }
}
