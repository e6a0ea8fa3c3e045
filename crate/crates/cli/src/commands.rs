use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Map, Value};
use ziegler_core::critload;
use ziegler_core::model::PendulumConfig;
use ziegler_core::optimize::{self, Bounds};
use ziegler_core::singular::{self, CuspSearch, PlaneFamily, SingularPoint};
use ziegler_core::stability::{self, Classifier};
use ziegler_core::sweep::{self, MassPlane, SweepSpec};
use ziegler_core::verify;

use crate::args::*;
use crate::{manifest_path, CliError, CliResult, RunManifest};

/// What a subcommand produced, before anything is written.
struct Output {
    body: Vec<u8>,
    /// Secondary files, written only when requested.
    extra: Vec<(PathBuf, Vec<u8>)>,
    seed: Option<u64>,
    exit_code: i32,
}

impl Output {
    fn json<T: Serialize>(value: &T) -> CliResult<Self> {
        Ok(Output {
            body: to_json_bytes(value)?,
            extra: Vec::new(),
            seed: None,
            exit_code: 0,
        })
    }
}

fn to_json_bytes<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Numeric(format!("serializing output: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

struct Loaded {
    config: PendulumConfig,
    overrides: Map<String, Value>,
}

fn load_config(a: &ConfigArgs) -> CliResult<Loaded> {
    let text = fs::read_to_string(&a.config)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", a.config.display())))?;
    let mut config = PendulumConfig::from_json(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", a.config.display())))?;
    let mut overrides = Map::new();
    if let Some(m) = &a.masses {
        config = config.with_masses(m.clone())?;
        overrides.insert("masses".into(), json!(m));
    }
    if let Some(c) = &a.stiffnesses {
        config = config.with_stiffnesses(c.clone())?;
        overrides.insert("stiffnesses".into(), json!(c));
    }
    if let Some(d) = &a.dampings {
        config = config.with_dampings(d.clone())?;
        overrides.insert("dampings".into(), json!(d));
    }
    Ok(Loaded { config, overrides })
}

fn mass_plane(config: &PendulumConfig, plane: (usize, usize), r: f64) -> CliResult<MassPlane> {
    Ok(MassPlane::new(
        config.clone(),
        (plane.0 - 1, plane.1 - 1),
        r,
    )?)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

/// Writes the body to `out` (or standard output) and any extra files, then
/// the manifest next to the first file written.
fn emit(
    command: &Command,
    config: Option<(&Path, Map<String, Value>)>,
    out: Option<&Path>,
    output: Output,
    started: Instant,
) -> CliResult<i32> {
    let mut written = Vec::new();
    match out {
        Some(path) => {
            write_file(path, &output.body)?;
            written.push(path.to_path_buf());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(&output.body)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io(format!("writing standard output: {e}")))?;
        }
    }
    for (path, bytes) in &output.extra {
        write_file(path, bytes)?;
        written.push(path.clone());
    }
    if let Some(first) = written.first() {
        let (config_path, overrides) = match config {
            Some((p, o)) => (Some(p.to_path_buf()), o),
            None => (None, Map::new()),
        };
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand: command.name().to_string(),
            config_path,
            overrides,
            parameters: serde_json::to_value(command).unwrap_or(Value::Null),
            outputs: written.clone(),
            seed: output.seed,
            wall_time_seconds: started.elapsed().as_secs_f64(),
        };
        write_file(&manifest_path(first), &to_json_bytes(&manifest)?)?;
    }
    Ok(output.exit_code)
}

pub(crate) fn execute(command: &Command, started: Instant) -> CliResult<i32> {
    if let Command::Verify(a) = command {
        let output = verify_cmd(a)?;
        return emit(command, None, a.out.as_deref(), output, started);
    }
    let (config_args, out) = match command {
        Command::Classify(a) => (&a.config, &a.out),
        Command::CriticalLoad(a) => (&a.config, &a.out),
        Command::Sweep(a) => (&a.config, &a.out),
        Command::Grid(a) => (&a.config, &a.out),
        Command::Singular(a) => (&a.config, &a.out),
        Command::Optimize(a) => (&a.config, &a.out),
        Command::Verify(_) => unreachable!(),
    };
    let loaded = load_config(config_args)?;
    let c = &loaded.config;
    let output = match command {
        Command::Classify(a) => classify(c, a)?,
        Command::CriticalLoad(a) => critical_load(c, a)?,
        Command::Sweep(a) => sweep_cmd(c, a)?,
        Command::Grid(a) => grid(c, a)?,
        Command::Singular(a) => singular_cmd(c, a)?,
        Command::Optimize(a) => optimize_cmd(c, a)?,
        Command::Verify(_) => unreachable!(),
    };
    emit(
        command,
        Some((&config_args.config, loaded.overrides)),
        out.out.as_deref(),
        output,
        started,
    )
}

fn classify(c: &PendulumConfig, a: &ClassifyArgs) -> CliResult<Output> {
    let report = stability::classify(c, a.load, &a.tol.tolerances())?;
    Output::json(&json!({
        "config": c,
        "load": a.load,
        "normalized_load": c.normalize_load(a.load),
        "report": report,
    }))
}

fn critical_load(c: &PendulumConfig, a: &CriticalLoadArgs) -> CliResult<Output> {
    let s = a.search.settings();
    s.validate()?;
    let classifier = Classifier::new(c, s.tol)?;
    let first = critload::critical_load_with(c, &classifier, &s)?;
    let boundaries = critload::load_boundaries(c, &classifier, &s, false)?;
    let closed = if c.link_count() != 2 {
        Value::Null
    } else if c.is_damped() {
        match critload::critical_load_closed_damped_m2(c) {
            Ok(load) => json!({ "load": load, "normalized": c.normalize_load(load) }),
            Err(e) => json!({ "error": e.to_string() }),
        }
    } else {
        match critload::critical_loads_closed_undamped_m2(c) {
            Ok((lo, hi)) => json!({ "lower_normalized": lo, "upper_normalized": hi }),
            Err(e) => json!({ "error": e.to_string() }),
        }
    };
    Output::json(&json!({
        "config": c,
        "settings": s,
        "critical_load": first,
        "boundaries": boundaries,
        "closed_form": closed,
    }))
}

fn sweep_cmd(c: &PendulumConfig, a: &SweepArgs) -> CliResult<Output> {
    if a.alpha_steps == 0 {
        return Err(CliError::Config("--alpha-steps must be at least 1".into()));
    }
    let plane = mass_plane(c, a.plane.plane, a.plane.r)?;
    let mut spec = SweepSpec::new(plane, sweep::uniform_alpha_grid(a.alpha_steps))?;
    spec.first_exit_only = a.first_exit_only;
    let s = a.search.settings();
    let result = sweep::sweep_azimuth(&spec, &s)?;
    let mut body = Vec::new();
    result
        .write_csv(&mut body)
        .map_err(|e| CliError::Io(format!("formatting csv: {e}")))?;
    let mut extra = Vec::new();
    if let Some(path) = &a.json_out {
        extra.push((path.clone(), to_json_bytes(&result)?));
    }
    Ok(Output {
        body,
        extra,
        seed: None,
        exit_code: 0,
    })
}

fn grid(c: &PendulumConfig, a: &GridArgs) -> CliResult<Output> {
    let plane = mass_plane(c, a.plane.plane, a.plane.r)?;
    let loads = (
        c.denormalize_load(a.load_range.0),
        c.denormalize_load(a.load_range.1),
    );
    let g = sweep::classify_grid(
        &plane,
        a.alpha_range,
        a.alpha_steps,
        loads,
        a.load_steps,
        &a.tol.tolerances(),
    )?;
    let mut body = Vec::new();
    g.write_csv(&mut body)
        .map_err(|e| CliError::Io(format!("formatting csv: {e}")))?;
    Ok(Output {
        body,
        extra: Vec::new(),
        seed: None,
        exit_code: 0,
    })
}

fn require_plane(plane: Option<(usize, usize)>) -> CliResult<(usize, usize)> {
    plane.ok_or_else(|| CliError::Config("this search needs --plane".into()))
}

fn singular_cmd(c: &PendulumConfig, a: &SingularArgs) -> CliResult<Output> {
    let s = a.search.settings();
    let points: Vec<SingularPoint> = match a.kind {
        SingularKindArg::Cusp => {
            let plane = mass_plane(c, require_plane(a.plane)?, a.r)?;
            let family = PlaneFamily::new(plane)?;
            match a.guess {
                Some(g) => vec![singular::find_triple_root_cusp(&family, g, a.newton_tol)?],
                None => singular::find_cusps(
                    &family,
                    &CuspSearch {
                        alpha_range: a.alpha_range,
                        load_range: (
                            c.denormalize_load(a.load_range.0),
                            c.denormalize_load(a.load_range.1),
                        ),
                        alpha_starts: a.alpha_starts,
                        load_starts: a.load_starts,
                        tol: a.newton_tol,
                    },
                ),
            }
        }
        SingularKindArg::VerticalTangent => {
            if a.alpha_steps == 0 {
                return Err(CliError::Config("--alpha-steps must be at least 1".into()));
            }
            let plane = mass_plane(c, require_plane(a.plane)?, a.r)?;
            let mut spec = SweepSpec::new(plane, sweep::uniform_alpha_grid(a.alpha_steps))?;
            spec.first_exit_only = true;
            singular::find_vertical_tangent(&sweep::sweep_azimuth(&spec, &s)?)
        }
        SingularKindArg::Boundary => {
            let classifier = Classifier::new(c, s.tol)?;
            critload::load_boundaries(c, &classifier, &s, false)?
                .iter()
                .map(|b| singular::boundary_point(c, b))
                .collect::<Result<_, _>>()?
        }
        SingularKindArg::Umbrella => {
            if c.link_count() != 2 {
                return Err(CliError::Config(
                    "umbrella certification needs two links".into(),
                ));
            }
            let k = c.stiffnesses();
            vec![singular::certify_umbrella_apex_m2(
                k[0],
                k[1],
                c.link_length(),
            )?]
        }
    };
    Output::json(&points)
}

fn optimize_cmd(c: &PendulumConfig, a: &OptimizeArgs) -> CliResult<Output> {
    let settings = a.settings();
    let outcome = match a.plane {
        Some(p) => optimize::optimize_azimuth(&mass_plane(c, p, a.r)?, a.sense(), &settings)?,
        None => {
            let m = c.link_count();
            let expand = |v: &[f64], name: &str| -> CliResult<Vec<f64>> {
                match v.len() {
                    1 => Ok(vec![v[0]; m]),
                    n if n == m => Ok(v.to_vec()),
                    n => Err(CliError::Config(format!(
                        "--{name} has {n} values for {m} links"
                    ))),
                }
            };
            let bounds = Bounds {
                lo: expand(&a.lower, "lower")?,
                hi: expand(&a.upper, "upper")?,
            };
            optimize::optimize_masses(c, &bounds, a.sense(), &settings)?
        }
    };
    let mut out = Output::json(&outcome)?;
    out.seed = Some(a.seed);
    Ok(out)
}

fn verify_cmd(a: &VerifyArgs) -> CliResult<Output> {
    let ids: Vec<usize> = if a.check.is_empty() {
        (1..=verify::check_count()).collect()
    } else {
        a.check.clone()
    };
    let mut outcomes = Vec::new();
    for id in ids {
        let o = verify::run_check(id).ok_or_else(|| {
            CliError::Config(format!(
                "no check {id}; checks are numbered 1 to {}",
                verify::check_count()
            ))
        })?;
        println!("{}", o.line());
        outcomes.push(o);
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("{passed} of {} checks passed", outcomes.len());
    let body = if a.out.is_some() {
        to_json_bytes(&outcomes)?
    } else {
        Vec::new()
    };
    Ok(Output {
        body,
        extra: Vec::new(),
        seed: None,
        exit_code: if passed == outcomes.len() { 0 } else { 1 },
    })
}
