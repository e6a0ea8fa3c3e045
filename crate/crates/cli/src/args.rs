use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use ziegler_core::critload::SearchSettings;
use ziegler_core::optimize::{Objective, OptimizeSettings, Sense};
use ziegler_core::stability::ToleranceSet;

#[derive(Debug, Parser)]
#[command(
    name = "ziegler",
    version,
    about = "Stability analysis and mass optimization for m-link pendulums under a follower load"
)]
pub struct Cli {
    /// Worker threads for sweeps, grids and multi-start searches.
    #[arg(long, global = true, env = "ZIEGLER_JOBS")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Classify one configuration at one load.
    Classify(ClassifyArgs),
    /// First loss of stability and all load boundaries of a configuration.
    CriticalLoad(CriticalLoadArgs),
    /// Boundary loads along the azimuth of a mass plane (CSV).
    Sweep(SweepArgs),
    /// Raster of stability classes over azimuth and load (CSV).
    Grid(GridArgs),
    /// Locate singular points of the stability boundary.
    Singular(SingularArgs),
    /// Multi-start search for extrema of the critical load over masses.
    Optimize(OptimizeArgs),
    /// Run the built-in cross-check suite and print a pass/fail table.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Classify(_) => "classify",
            Command::CriticalLoad(_) => "critical-load",
            Command::Sweep(_) => "sweep",
            Command::Grid(_) => "grid",
            Command::Singular(_) => "singular",
            Command::Optimize(_) => "optimize",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ConfigArgs {
    /// Pendulum configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Replace the masses of the configuration.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub masses: Option<Vec<f64>>,
    /// Replace the spring stiffnesses of the configuration.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub stiffnesses: Option<Vec<f64>>,
    /// Replace the joint dampings of the configuration.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub dampings: Option<Vec<f64>>,
}

#[derive(Debug, Args, Serialize)]
pub struct OutArgs {
    /// Output file; standard output when omitted. A run manifest is written
    /// next to it as `<out>.manifest.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct TolArgs {
    /// Relative distance from a boundary below which a state is BOUNDARY.
    #[arg(long, default_value_t = ToleranceSet::default().boundary_band)]
    pub boundary_band: f64,
    /// Relative size of an imaginary (or real) part treated as zero.
    #[arg(long, default_value_t = ToleranceSet::default().imaginary_tol)]
    pub imaginary_tol: f64,
    /// Relative radius for merging roots into a multiple root.
    #[arg(long, default_value_t = ToleranceSet::default().cluster_radius)]
    pub cluster_radius: f64,
    /// Largest relative odd-power coefficient accepted for an undamped system.
    #[arg(long, default_value_t = ToleranceSet::default().odd_coeff_tol)]
    pub odd_coeff_tol: f64,
}

impl TolArgs {
    pub fn tolerances(&self) -> ToleranceSet {
        ToleranceSet {
            boundary_band: self.boundary_band,
            imaginary_tol: self.imaginary_tol,
            cluster_radius: self.cluster_radius,
            odd_coeff_tol: self.odd_coeff_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct SearchArgs {
    /// Largest normalized load p = P l / c_m scanned.
    #[arg(long, default_value_t = SearchSettings::default().p_max)]
    pub p_max: f64,
    /// Normalized step of the coarse load scan.
    #[arg(long, default_value_t = SearchSettings::default().scan_step)]
    pub scan_step: f64,
    /// Normalized width at which bisection of a class change stops.
    #[arg(long, default_value_t = SearchSettings::default().bisect_tol)]
    pub bisect_tol: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub tol: TolArgs,
}

impl SearchArgs {
    pub fn settings(&self) -> SearchSettings {
        SearchSettings {
            p_max: self.p_max,
            scan_step: self.scan_step,
            bisect_tol: self.bisect_tol,
            tol: self.tol.tolerances(),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct PlaneArgs {
    /// The two links whose masses vary, 1-based, e.g. `2,3`.
    #[arg(long, value_parser = parse_plane)]
    pub plane: (usize, usize),
    /// Radius of the mass plane: m_i = r cos α, m_j = r sin α.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ClassifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub config: ConfigArgs,
    /// Follower load P in force units.
    #[arg(long, allow_hyphen_values = true)]
    pub load: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub tol: TolArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct CriticalLoadArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub plane: PlaneArgs,
    /// Number of equal azimuth intervals on [0, π/2]; rows = steps + 1.
    #[arg(long, default_value_t = 400)]
    pub alpha_steps: usize,
    /// Stop every row at its first loss of stability.
    #[arg(long)]
    pub first_exit_only: bool,
    /// Also write the full result, with settings, as JSON to this file.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub plane: PlaneArgs,
    /// Azimuth range in radians, within [0, π/2].
    #[arg(long, value_parser = parse_range, default_value = "0,1.5707963267948966")]
    pub alpha_range: (f64, f64),
    /// Azimuth nodes, endpoints included.
    #[arg(long, default_value_t = 100)]
    pub alpha_steps: usize,
    /// Normalized load range p = P l / c_m.
    #[arg(long, value_parser = parse_range, default_value = "0,10")]
    pub load_range: (f64, f64),
    /// Load nodes, endpoints included.
    #[arg(long, default_value_t = 100)]
    pub load_steps: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub tol: TolArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingularKindArg {
    /// Triple roots in μ over a plane (multi-start, or one solve with --guess).
    Cusp,
    /// Vertical tangents of the first-exit curve of an azimuth sweep.
    VerticalTangent,
    /// Double eigenvalues at every load boundary of the configuration.
    Boundary,
    /// Certify the minimum of the two-link lower boundary.
    Umbrella,
}

#[derive(Debug, Args, Serialize)]
pub struct SingularArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_enum, default_value_t = SingularKindArg::Cusp)]
    pub kind: SingularKindArg,
    /// The two links whose masses vary, 1-based (cusp, vertical-tangent).
    #[arg(long, value_parser = parse_plane)]
    pub plane: Option<(usize, usize)>,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Azimuth range of the cusp search.
    #[arg(long, value_parser = parse_range, default_value = "0,1.5707963267948966")]
    pub alpha_range: (f64, f64),
    /// Normalized load range of the cusp search.
    #[arg(long, value_parser = parse_range, default_value = "0,50")]
    pub load_range: (f64, f64),
    #[arg(long, default_value_t = 24)]
    pub alpha_starts: usize,
    #[arg(long, default_value_t = 24)]
    pub load_starts: usize,
    /// Single Newton solve from `alpha,P,mu` (P in force units).
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    pub guess: Option<(f64, f64, f64)>,
    /// Residual tolerance of the triple-root solve.
    #[arg(long, default_value_t = 1e-9)]
    pub newton_tol: f64,
    /// Azimuth intervals of the sweep behind vertical-tangent detection.
    #[arg(long, default_value_t = 400)]
    pub alpha_steps: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SenseArg {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveArg {
    /// First loss of stability from zero load.
    FirstExit,
    /// Top of the highest stable load interval.
    StableSupremum,
}

#[derive(Debug, Args, Serialize)]
pub struct OptimizeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_enum, default_value_t = SenseArg::Min)]
    pub sense: SenseArg,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::FirstExit)]
    pub objective: ObjectiveArg,
    /// Lower mass bound, one value per link or a single value for all.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub lower: Vec<f64>,
    /// Upper mass bound, one value per link or a single value for all.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub upper: Vec<f64>,
    /// Search the azimuth of this mass plane (1-based) instead of all masses.
    #[arg(long, value_parser = parse_plane)]
    pub plane: Option<(usize, usize)>,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long, default_value_t = OptimizeSettings::default().starts)]
    pub starts: usize,
    /// Objective evaluations per start.
    #[arg(long, default_value_t = OptimizeSettings::default().max_evals)]
    pub max_evals: usize,
    /// Simplex size at which a start stops.
    #[arg(long, default_value_t = OptimizeSettings::default().xtol)]
    pub xtol: f64,
    /// Spread of simplex values at which a start stops.
    #[arg(long, default_value_t = OptimizeSettings::default().ftol)]
    pub ftol: f64,
    /// Relative distance at which two extrema are merged.
    #[arg(long, default_value_t = OptimizeSettings::default().merge_tol)]
    pub merge_tol: f64,
    /// Offset into the low-discrepancy start sequence.
    #[arg(long, default_value_t = OptimizeSettings::default().seed)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub search: SearchArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutArgs,
}

impl OptimizeArgs {
    pub fn settings(&self) -> OptimizeSettings {
        OptimizeSettings {
            starts: self.starts,
            objective: match self.objective {
                ObjectiveArg::FirstExit => Objective::FirstExit,
                ObjectiveArg::StableSupremum => Objective::StableSupremum,
            },
            search: self.search.settings(),
            max_evals: self.max_evals,
            xtol: self.xtol,
            ftol: self.ftol,
            merge_tol: self.merge_tol,
            seed: self.seed,
        }
    }

    pub fn sense(&self) -> Sense {
        match self.sense {
            SenseArg::Min => Sense::Min,
            SenseArg::Max => Sense::Max,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Run only these checks (1-based ids).
    #[arg(long, value_delimiter = ',')]
    pub check: Vec<usize>,
    /// Write the outcomes as JSON to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_numbers(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got `{s}`"));
    }
    parts
        .iter()
        .map(|p| p.parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect()
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let v = parse_numbers(s, 2)?;
    Ok((v[0], v[1]))
}

fn parse_triple(s: &str) -> Result<(f64, f64, f64), String> {
    let v = parse_numbers(s, 3)?;
    Ok((v[0], v[1], v[2]))
}

fn parse_plane(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [i, j] = parts[..] else {
        return Err(format!("expected two link numbers like `2,3`, got `{s}`"));
    };
    let i: usize = i.parse().map_err(|e| format!("`{i}`: {e}"))?;
    let j: usize = j.parse().map_err(|e| format!("`{j}`: {e}"))?;
    if i == 0 || j == 0 {
        return Err("links are numbered from 1".into());
    }
    Ok((i, j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn plane_is_one_based() {
        assert_eq!(parse_plane("2,3"), Ok((2, 3)));
        assert!(parse_plane("0,1").is_err());
        assert!(parse_plane("1").is_err());
    }

    #[test]
    fn triple_accepts_negative_entries() {
        assert_eq!(parse_triple("0.04,12,-1.35"), Ok((0.04, 12.0, -1.35)));
        assert!(parse_triple("1,2").is_err());
    }

    #[test]
    fn help_shows_module_defaults() {
        let help = Cli::command()
            .find_subcommand_mut("critical-load")
            .unwrap()
            .render_long_help()
            .to_string();
        assert!(help.contains("--p-max"));
        assert!(help.contains("[default: 1000]"));
        assert!(help.contains("--boundary-band"));
    }
}
