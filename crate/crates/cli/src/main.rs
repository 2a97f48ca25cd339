//! `rnorm`: R-norm calculators, fits and demonstrations from the command line.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use rnorm_core::analysis::{self, GapDemoConfig, RayClass};
use rnorm_core::fit::{solver_settings, OffsetRange, RefinementTable, SampledRefinement, DEFAULT_MAX_ITER};
use rnorm_core::{
    constants, grid_radon_2d, laplacian_lower_bound_grid, min_norm_fit, pwl_infinite_certificate, refinement_study,
    refinement_study_sampled, rnorm_grid_2d, rnorm_radial_odd_dilated, sobolev_upper_bound_2d, FitProblem,
    GridFunction2D, ProfileSpec, PwlCurvatureMeasure2D, RadialFunction, Samples,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] rnorm_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid argument: {0}")]
    Usage(String),
    #[error("solver did not converge; report written")]
    NotConverged,
}

impl CliError {
    fn code(&self) -> u8 {
        use rnorm_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(E::UnsupportedDimension(_)) => 3,
            CliError::Core(E::Io(_) | E::Csv(_) | E::Json(_)) | CliError::Io { .. } => 4,
            CliError::Core(_) => 2,
            CliError::NotConverged => 5,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "rnorm", version, about = "R-norm of functions viewed as infinite-width two-layer ReLU networks")]
struct Cli {
    /// Seed for every random draw (sample sets, power iteration start).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker count for matrix-vector products; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    threads: u64,
    /// Directory receiving report.json and CSV side files; created if missing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact R-norm of a compactly supported radial function in odd dimension.
    Radial(RadialArgs),
    /// R-norm of a function sampled on a square grid in the plane.
    Grid(GridArgs),
    /// Minimum-norm ReLU fit of scattered samples in the plane.
    Fit(FitArgs),
    /// Fourier-decay certificate for a piecewise-linear geometry.
    Diagnose(DiagnoseArgs),
    /// Self-contained demonstrations.
    Demo(DemoArgs),
}

#[derive(Args, Debug)]
struct RadialArgs {
    /// Odd input dimension d ≥ 3.
    #[arg(long)]
    d: usize,
    /// Profile: `poly:k=N` for (1 − ‖x‖²)₊^N, or `exp-bump` for exp(1 − 1/(1 − ‖x‖²)).
    #[arg(long)]
    profile: String,
    /// Dilation ε: the input is x ↦ f(x/ε).
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Grid CSV with header x,y,value on a square, uniform grid centered at the origin.
    #[arg(long)]
    input: PathBuf,
    /// Number of projection angles on [0, π).
    #[arg(long = "K", default_value_t = 256)]
    k: usize,
    /// Number of offsets per angle.
    #[arg(long = "J", default_value_t = 513)]
    j: usize,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Samples CSV with header x1,x2,y.
    #[arg(long)]
    samples: PathBuf,
    /// Number of dictionary angles on [0, 2π).
    #[arg(long = "K", default_value_t = 64)]
    k: usize,
    /// Number of dictionary offsets.
    #[arg(long = "J", default_value_t = 65)]
    j: usize,
    /// Tube half-width τ; 0 requests interpolation.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Penalize the affine part instead of leaving x ↦ vᵀx free.
    #[arg(long)]
    no_linear_unit: bool,
    /// Also refit with K doubled and the offset spacing halved this many times.
    #[arg(long)]
    levels: Option<usize>,
    /// Offset range [−B, B] of the dictionary; default covers the samples.
    #[arg(long)]
    offset_range: Option<f64>,
    /// Iteration cap of the solver.
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    /// Geometry JSON: {"segments": [{"p0": [x, y], "p1": [x, y], "coeff": c}, ...]}.
    #[arg(long)]
    geometry: PathBuf,
    /// Probe direction `x,y` (normalized); repeatable. Default: the segment normals.
    #[arg(long = "direction", allow_hyphen_values = true)]
    directions: Vec<String>,
    /// Largest frequency of the written decay curves.
    #[arg(long, default_value_t = 200.0)]
    sigma_max: f64,
    /// Number of frequencies per decay curve.
    #[arg(long, default_value_t = 400)]
    sigma_count: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DemoName {
    /// Norms of two ReLU units, their sum and difference.
    Parallelogram,
    /// Three-layer representation and decay certificate of the pyramid.
    Pyramid,
    /// Finiteness of (1 − ‖x‖²)₊^k across odd dimensions.
    BumpSweep,
    /// Fits of |x| + y with and without the free linear unit.
    Gap,
    /// Refinement of fits of the pyramid and of the smooth bump.
    Refinement,
}

#[derive(Args, Debug)]
struct DemoArgs {
    #[arg(value_enum)]
    name: DemoName,
    /// Refinement levels (refinement demo).
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Iteration cap of the solver (gap and refinement demos).
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
}

struct Outcome {
    report: Value,
    files: Vec<(String, String)>,
    converged: bool,
}

impl Outcome {
    fn new(report: Value) -> Self {
        Outcome { report, files: Vec::new(), converged: true }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rnorm: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let (command, config, d, outcome) = match &cli.cmd {
        Command::Radial(a) => ("radial", radial_config(a), a.d, cmd_radial(a)?),
        Command::Grid(a) => ("grid", grid_config(a), 2, cmd_grid(a)?),
        Command::Fit(a) => ("fit", fit_config(a), 2, cmd_fit(a, cli.seed)?),
        Command::Diagnose(a) => ("diagnose", diagnose_config(a), 2, cmd_diagnose(a)?),
        Command::Demo(a) => ("demo", demo_config(a), 2, cmd_demo(a, cli.seed)?),
    };
    let report = json!({
        "version": VERSION,
        "command": command,
        "config": {
            "seed": cli.seed,
            "threads": cli.threads,
            "command": config,
        },
        "constants": {
            "dimension": constants(d as i64)?,
            "solver": solver_settings(),
        },
        "result": outcome.report,
    });
    let text = serde_json::to_string_pretty(&report).expect("reports serialize") + "\n";
    print!("{text}");
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        write_file(&dir.join("report.json"), &text)?;
        for (name, body) in &outcome.files {
            write_file(&dir.join(name), body)?;
        }
    }
    if outcome.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io { path: path.to_path_buf(), source }
}

fn write_file(path: &Path, body: &str) -> CliResult<()> {
    fs::write(path, body).map_err(|e| io_err(path, e))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| io_err(path, e))
}

fn csv_string(write: impl FnOnce(&mut Vec<u8>) -> rnorm_core::Result<()>) -> CliResult<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

fn parse_profile(s: &str) -> CliResult<ProfileSpec> {
    if s == "exp-bump" {
        return Ok(ProfileSpec::ExpBump { radius: 1.0 });
    }
    let k = s
        .strip_prefix("poly:k=")
        .and_then(|k| k.parse::<u32>().ok())
        .ok_or_else(|| CliError::Usage(format!("profile '{s}' is neither poly:k=N nor exp-bump")))?;
    if k == 0 {
        return Err(CliError::Usage("profile power k must be at least 1".into()));
    }
    Ok(ProfileSpec::Polynomial { k, radius: 1.0 })
}

fn radial_config(a: &RadialArgs) -> Value {
    json!({"d": a.d, "profile": a.profile, "epsilon": a.epsilon})
}

fn cmd_radial(a: &RadialArgs) -> CliResult<Outcome> {
    let spec = parse_profile(&a.profile)?;
    if !(a.epsilon > 0.0 && a.epsilon.is_finite()) {
        return Err(CliError::Usage(format!("--epsilon must be positive, got {}", a.epsilon)));
    }
    if a.d < 3 || a.d % 2 == 0 {
        return Err(rnorm_core::Error::UnsupportedDimension(a.d).into());
    }
    let f = RadialFunction::from_spec(a.d, &spec)?;
    let rep = rnorm_radial_odd_dilated(&f, a.epsilon)?;
    Ok(Outcome::new(json!({"profile": spec, "report": rep})))
}

fn grid_config(a: &GridArgs) -> Value {
    json!({"input": a.input, "K": a.k, "J": a.j})
}

fn cmd_grid(a: &GridArgs) -> CliResult<Outcome> {
    let f = GridFunction2D::read_csv(open(&a.input)?)?;
    let rep = rnorm_grid_2d(&f, a.k, a.j)?;
    let upper = sobolev_upper_bound_2d(&f)?;
    let lower = laplacian_lower_bound_grid(&f)?;
    let sin = grid_radon_2d(&f, a.k, a.j)?;
    let mut out = Outcome::new(json!({
        "grid": f.spec(),
        "report": rep,
        "sobolev_upper_bound": upper,
        "laplacian_lower_bound": lower,
    }));
    out.files.push(("sinogram.csv".into(), csv_string(|w| sin.write_csv(w))?));
    Ok(out)
}

fn fit_config(a: &FitArgs) -> Value {
    json!({
        "samples": a.samples,
        "K": a.k,
        "J": a.j,
        "tol": a.tol,
        "linear_unit": !a.no_linear_unit,
        "levels": a.levels,
        "offset_range": a.offset_range,
        "max_iter": a.max_iter,
    })
}

fn atoms_csv(r: &rnorm_core::FitResult) -> String {
    let mut s = String::from("w1,w2,b,weight\n");
    for a in r.measure.atoms() {
        s.push_str(&format!("{},{},{},{}\n", a.w[0], a.w[1], a.b, a.weight));
    }
    s
}

fn refinement_csv(t: &RefinementTable) -> CliResult<String> {
    csv_string(|w| t.write_csv(w))
}

fn cmd_fit(a: &FitArgs, seed: u64) -> CliResult<Outcome> {
    let samples = Samples::read_csv(open(&a.samples)?)?;
    let mut p = FitProblem::new(samples, a.k, a.j, a.tol);
    p.use_linear_unit = !a.no_linear_unit;
    p.max_iter = a.max_iter;
    p.seed = seed;
    if let Some(b) = a.offset_range {
        p.offsets = OffsetRange::Explicit(b);
    }
    let r = min_norm_fit(&p)?;
    let mut converged = r.converged;
    let mut report = json!({"fit": r});
    let mut files = vec![("atoms.csv".to_string(), atoms_csv(&r))];
    if let Some(levels) = a.levels {
        let t = refinement_study(&p, levels)?;
        converged &= t.rows.iter().all(|r| r.converged);
        report["refinement"] = json!({"rows": t.rows, "growth": t.growth()});
        files.push(("refinement.csv".into(), refinement_csv(&t)?));
    }
    Ok(Outcome { report, files, converged })
}

fn diagnose_config(a: &DiagnoseArgs) -> Value {
    json!({
        "geometry": a.geometry,
        "directions": a.directions,
        "sigma_max": a.sigma_max,
        "sigma_count": a.sigma_count,
    })
}

fn parse_direction(s: &str) -> CliResult<[f64; 2]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("direction '{s}' is not x,y")))?;
    if parts.len() != 2 {
        return Err(CliError::Usage(format!("direction '{s}' is not x,y")));
    }
    let n = parts[0].hypot(parts[1]);
    if !(n > 0.0 && n.is_finite()) {
        return Err(CliError::Usage(format!("direction '{s}' has no length")));
    }
    Ok([parts[0] / n, parts[1] / n])
}

fn sigma_grid(max: f64, count: usize) -> CliResult<Vec<f64>> {
    if !(max > 0.0 && max.is_finite()) || count == 0 {
        return Err(CliError::Usage("--sigma-max must be positive and --sigma-count nonzero".into()));
    }
    Ok((1..=count).map(|i| max * i as f64 / count as f64).collect())
}

fn certificate_outcome(cert: &analysis::InfinityCertificate, prefix: &str) -> CliResult<(Value, Vec<(String, String)>)> {
    let mut files = Vec::new();
    let mut dirs = Vec::new();
    for (i, d) in cert.directions.iter().enumerate() {
        let name = format!("{prefix}decay_{i}.csv");
        files.push((name.clone(), csv_string(|w| d.curve.write_csv(w))?));
        dirs.push(json!({
            "w": d.w,
            "class": d.class,
            "ratios": d.ratios,
            "magnitudes": d.magnitudes,
            "envelopes": d.envelopes,
            "decay_slope": d.curve.decay_slope(d.curve.sigmas[0], f64::INFINITY),
            "curve": name,
        }));
    }
    Ok((json!({"infinite": cert.infinite, "reason": cert.reason, "directions": dirs}), files))
}

fn distinct_normals(mu: &PwlCurvatureMeasure2D) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = Vec::new();
    for n in mu.normals() {
        if !out.iter().any(|m| (m[0] - n[0]).abs() < 1e-12 && (m[1] - n[1]).abs() < 1e-12) {
            out.push(n);
        }
    }
    out
}

fn cmd_diagnose(a: &DiagnoseArgs) -> CliResult<Outcome> {
    let raw: PwlCurvatureMeasure2D =
        serde_json::from_reader(open(&a.geometry)?).map_err(rnorm_core::Error::from)?;
    let mu = PwlCurvatureMeasure2D::new(raw.segments)?;
    let normals = if a.directions.is_empty() {
        distinct_normals(&mu)
    } else {
        a.directions.iter().map(|s| parse_direction(s)).collect::<CliResult<_>>()?
    };
    let sigmas = sigma_grid(a.sigma_max, a.sigma_count)?;
    let cert = pwl_infinite_certificate(&mu, &normals, &sigmas)?;
    let (report, files) = certificate_outcome(&cert, "")?;
    Ok(Outcome { report: json!({"segments": mu.segments.len(), "certificate": report}), files, converged: true })
}

fn demo_config(a: &DemoArgs) -> Value {
    let name = a.name.to_possible_value().expect("named variant").get_name().to_string();
    match a.name {
        DemoName::Gap => json!({"name": name, "max_iter": a.max_iter}),
        DemoName::Refinement => json!({"name": name, "levels": a.levels, "max_iter": a.max_iter}),
        _ => json!({"name": name}),
    }
}

fn cmd_demo(a: &DemoArgs, seed: u64) -> CliResult<Outcome> {
    match a.name {
        DemoName::Parallelogram => {
            let unit = analysis::parallelogram_check([1.0, 0.0], [0.0, 1.0])?;
            let scaled = analysis::parallelogram_check_scaled([1.0, 0.0], [0.0, 1.0], 2.0)?;
            Ok(Outcome::new(json!({"norms": unit.norms, "violated": unit.violated, "unit": unit, "scaled": scaled})))
        }
        DemoName::Pyramid => {
            let eq = analysis::pyramid_threelayer(10_000, 2.0, seed);
            let mu = PwlCurvatureMeasure2D::pyramid();
            let sigmas = sigma_grid(200.0, 400)?;
            let axis = pwl_infinite_certificate(&mu, &[[1.0, 0.0]], &sigmas)?;
            let diag = [std::f64::consts::FRAC_1_SQRT_2; 2];
            let control = pwl_infinite_certificate(&mu.without_normals_parallel_to(diag), &[diag], &sigmas)?;
            let (axis_rep, mut files) = certificate_outcome(&axis, "axis_")?;
            let (control_rep, more) = certificate_outcome(&control, "control_")?;
            files.extend(more);
            let constant = axis.directions[0].class == RayClass::Constant;
            Ok(Outcome {
                report: json!({
                    "three_layer": eq,
                    "certificate_axis": axis_rep,
                    "control_non_parallel": control_rep,
                    "infinite_certificate_issued": constant,
                }),
                files,
                converged: true,
            })
        }
        DemoName::BumpSweep => {
            let rows = analysis::bump_finiteness_sweep(&[3, 5, 7, 9], &[1, 2, 3, 4, 5, 6, 7])?;
            let all = rows.iter().all(analysis::BumpRow::agrees);
            Ok(Outcome::new(json!({"rows": rows, "all_agree": all})))
        }
        DemoName::Gap => {
            let cfg = GapDemoConfig { max_iter: a.max_iter, seed, ..GapDemoConfig::default() };
            let rep = analysis::rbar_gap_demo(&cfg)?;
            let converged = rep.converged();
            Ok(Outcome { report: json!(rep), files: Vec::new(), converged })
        }
        DemoName::Refinement => {
            let mut cfg = SampledRefinement::new(50, 16, 1.25, 1e-3, a.levels);
            cfg.max_iter = a.max_iter;
            cfg.seed = seed;
            let pyr = refinement_study_sampled(&analysis::pyramid, &cfg)?;
            let bump = refinement_study_sampled(&analysis::smooth_bump, &cfg)?;
            let converged = pyr.rows.iter().chain(&bump.rows).all(|r| r.converged);
            Ok(Outcome {
                report: json!({
                    "schedule": cfg,
                    "pyramid": {"rows": pyr.rows, "growth": pyr.growth()},
                    "bump": {"rows": bump.rows, "growth": bump.growth()},
                }),
                files: vec![
                    ("refinement_pyramid.csv".into(), refinement_csv(&pyr)?),
                    ("refinement_bump.csv".into(), refinement_csv(&bump)?),
                ],
                converged,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles() {
        assert_eq!(parse_profile("poly:k=3").unwrap(), ProfileSpec::Polynomial { k: 3, radius: 1.0 });
        assert_eq!(parse_profile("exp-bump").unwrap(), ProfileSpec::ExpBump { radius: 1.0 });
        for bad in ["poly:k=0", "poly:k=x", "poly", "cubic"] {
            assert!(matches!(parse_profile(bad), Err(CliError::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn directions_are_normalized() {
        let w = parse_direction("3,-4").unwrap();
        assert!((w[0] - 0.6).abs() < 1e-15 && (w[1] + 0.8).abs() < 1e-15);
        assert!(parse_direction("0,0").is_err());
        assert!(parse_direction("1").is_err());
        assert!(parse_direction("a,b").is_err());
    }

    #[test]
    fn sigma_grid_is_positive_increasing() {
        let s = sigma_grid(10.0, 4).unwrap();
        assert_eq!(s, vec![2.5, 5.0, 7.5, 10.0]);
        assert!(sigma_grid(0.0, 4).is_err());
        assert!(sigma_grid(1.0, 0).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage(String::new()).code(), 2);
        assert_eq!(CliError::Core(rnorm_core::Error::UnsupportedDimension(4)).code(), 3);
        assert_eq!(CliError::NotConverged.code(), 5);
        let io = CliError::Io { path: "x".into(), source: std::io::Error::other("gone") };
        assert_eq!(io.code(), 4);
    }
}
