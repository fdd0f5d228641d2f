//! Command line front end.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::analysis::{
    default_frequency_grid, error_quadrature_config, error_report_with_gramians, h2_error_bound, h2abar_error_norm,
    h2abar_norm, pole_verdicts, ErrorReport, RegionSpec,
};
use crate::balancing::{balance_numerical, conformal_bt_with_gramians, ReductionResult, TieHandling};
use crate::benchmarks::{BenchmarkKind, BenchmarkSpec};
use crate::error::{Error, Result};
use crate::gramians::{gramians, GramianMethod, GramianPair};
use crate::io::{read_json, read_model, write_csv, write_json, ModelFile, ModelMetadata, ReductionBlock};
use crate::linalg::{c64, C64};
use crate::maps::{ConformalMap, JoukowskiMap, MobiusMap};
use crate::quadrature::QuadratureConfig;
use crate::sim::{
    output_relative_error, simulate, uniform_times, ErrorNormalization, InputSignal, SimOptions, Trajectory,
};
use crate::system::LtiSystem;

#[derive(Debug, Parser)]
#[command(name = "conformal-bt", version, about = "Balanced truncation through conformal maps")]
pub struct Cli {
    /// Worker threads for sweeps over the reduced order.
    #[arg(long, env = "CONFORMAL_BT_THREADS", default_value_t = 1, global = true)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a benchmark model file.
    Generate(GenerateArgs),
    /// Write a conformal map file.
    Map(MapArgs),
    /// Reduce a model with conformal balanced truncation.
    Reduce(ReduceArgs),
    /// Error, bound and pole-region report for a reduced model.
    Evaluate(EvaluateArgs),
    /// Simulate a model and write its output trajectory.
    Simulate(SimulateArgs),
    /// Run the benchmark experiments end to end.
    Repro(ReproArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelKind {
    Heat,
    Schrodinger,
    Wave,
}

impl From<ModelKind> for BenchmarkKind {
    fn from(k: ModelKind) -> Self {
        match k {
            ModelKind::Heat => BenchmarkKind::Heat,
            ModelKind::Schrodinger => BenchmarkKind::Schrodinger,
            ModelKind::Wave => BenchmarkKind::Wave,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MapKind {
    Identity,
    Rotation,
    Disk,
    Joukowski,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[arg(long, value_enum)]
    pub kind: MapKind,
    /// Center `c`, as `re` or `re,im`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub center: Option<C64>,
    /// Disk radius or Joukowski parameter `R`.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Joukowski scale `M`, as `re` or `re,im`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub scale: Option<C64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct QuadArgs {
    #[arg(long, default_value_t = 1e-10)]
    pub abs_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_subdivisions: usize,
}

impl QuadArgs {
    fn config(&self) -> Result<QuadratureConfig> {
        let cfg = QuadratureConfig::default()
            .with_tolerances(self.abs_tol, self.rel_tol)
            .with_max_subdivisions(self.max_subdivisions);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    /// Lyapunov for Möbius maps, quadrature otherwise.
    Auto,
    Lyapunov,
    Quadrature,
}

impl MethodArg {
    fn resolve(self, map: &ConformalMap) -> GramianMethod {
        match self {
            MethodArg::Auto if map.as_mobius().is_some() => GramianMethod::Lyapunov,
            MethodArg::Auto | MethodArg::Quadrature => GramianMethod::Quadrature,
            MethodArg::Lyapunov => GramianMethod::Lyapunov,
        }
    }
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub r: usize,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: MethodArg,
    #[arg(long)]
    pub out: PathBuf,
    /// CSV of Hankel singular values.
    #[arg(long)]
    pub hsv: PathBuf,
    /// Truncate even when `σ_r` and `σ_{r+1}` are not separated.
    #[arg(long)]
    pub allow_ties: bool,
    #[command(flatten)]
    pub quad: QuadArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub fom: PathBuf,
    #[arg(long)]
    pub rom: PathBuf,
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: MethodArg,
    #[command(flatten)]
    pub quad: QuadArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InputKind {
    Impulse,
    Step,
    /// Tabulated input read from `--samples`.
    Samples,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub input: InputKind,
    /// CSV with columns `t, u1_re, u1_im, ...`.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[arg(long)]
    pub t_final: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Output intervals; 0 records every integrator step.
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub abs_tol: f64,
}

#[derive(Debug, Args)]
pub struct ReproArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Experiments to run; all by default.
    #[arg(long, value_enum)]
    pub only: Vec<ModelKind>,
    #[arg(long, default_value_t = 200)]
    pub heat_n: usize,
    #[arg(long, default_value_t = 400)]
    pub schrodinger_n: usize,
    #[arg(long, default_value_t = 500)]
    pub wave_n: usize,
    /// Output intervals of the simulated trajectories.
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
}

/// Parses `re` or `re,im`.
pub fn parse_complex(s: &str) -> std::result::Result<C64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|e| format!("'{p}': {e}"));
    match parts.as_slice() {
        [re] => Ok(c64(num(re)?, 0.0)),
        [re, im] => Ok(c64(num(re)?, num(im)?)),
        _ => Err(format!("expected 're' or 're,im', got '{s}'")),
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(Error::InvalidArgument("thread count must be at least 1".into()));
    }
    match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Map(a) => cmd_map(&a),
        Command::Reduce(a) => cmd_reduce(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Repro(a) => cmd_repro(&a, cli.threads),
    }
}

/// Wall-clock seconds per stage. Kept apart from reports so that those stay
/// byte-identical across runs.
#[derive(Debug, Default, Serialize)]
struct Timings(BTreeMap<String, f64>);

impl Timings {
    fn run<T>(&mut self, what: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f();
        let secs = t.elapsed().as_secs_f64();
        log::info!("{what}: {secs:.3} s");
        self.0.insert(what.to_string(), secs);
        out
    }
}

#[derive(Serialize)]
struct TimedReport<'a> {
    #[serde(flatten)]
    report: &'a ErrorReport,
    timings_seconds: &'a Timings,
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let spec = BenchmarkSpec::new(a.model.into(), a.n)?;
    let sys = spec.build()?;
    write_json(&a.out, &ModelFile::from_system(&sys, spec.metadata()))
}

pub fn cmd_map(a: &MapArgs) -> Result<()> {
    let need_r = || a.radius.ok_or_else(|| Error::InvalidArgument("--radius is required".into()));
    let map: ConformalMap = match a.kind {
        MapKind::Identity => MobiusMap::identity().into(),
        MapKind::Rotation => MobiusMap::clockwise_rotation().into(),
        MapKind::Disk => {
            let c = a.center.ok_or_else(|| Error::InvalidArgument("--center is required".into()))?;
            MobiusMap::disk(c, need_r()?)?.into()
        }
        MapKind::Joukowski => {
            let m = a.scale.ok_or_else(|| Error::InvalidArgument("--scale is required".into()))?;
            JoukowskiMap::new(a.center.unwrap_or_default(), m, need_r()?)?.into()
        }
    };
    write_json(&a.out, &map)
}

fn read_map(path: &Path) -> Result<ConformalMap> {
    read_json(path)
}

fn rom_file(fom: &ModelFile, res: &ReductionResult, map: &ConformalMap) -> ModelFile {
    let mut md = ModelMetadata { benchmark: fom.metadata.benchmark.clone(), ..Default::default() };
    md.parameters.insert("full_order".into(), json!(fom.n));
    md.parameters.insert("map".into(), serde_json::to_value(map).unwrap_or_default());
    let mut file = ModelFile::from_system(&res.rom, md);
    file.reduction = Some(ReductionBlock {
        method: res.method.name().to_string(),
        r: res.r,
        hsv: res.hsv.clone(),
        vr: res.vr.clone(),
        wr: res.wr.clone(),
    });
    file
}

fn write_hsv(path: &Path, hsv: &[f64]) -> Result<()> {
    let rows: Vec<Vec<f64>> = hsv.iter().enumerate().map(|(i, s)| vec![(i + 1) as f64, *s]).collect();
    write_csv(path, &["index".to_string(), "sigma".to_string()], &rows)
}

pub fn cmd_reduce(a: &ReduceArgs) -> Result<()> {
    let (sys, file) = read_model(&a.model)?;
    let map = read_map(&a.map)?;
    let cfg = a.quad.config()?;
    let method = a.method.resolve(&map);
    let grams = Timings::default().run("gramians", || gramians(&sys, &map, method, &cfg))?;
    let ties = if a.allow_ties { TieHandling::Allow } else { TieHandling::Reject };
    let res = conformal_bt_with_gramians(&sys, &grams, a.r, ties)?;
    write_json(&a.out, &rom_file(&file, &res, &map))?;
    write_hsv(&a.hsv, &res.hsv)
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let (fom, _) = read_model(&a.fom)?;
    let (rom, _) = read_model(&a.rom)?;
    let map = read_map(&a.map)?;
    let cfg = a.quad.config()?;
    if fom.inputs() != rom.inputs() || fom.outputs() != rom.outputs() {
        return Err(Error::DimensionMismatch(format!(
            "full model is {}x{}, reduced model is {}x{}",
            fom.outputs(),
            fom.inputs(),
            rom.outputs(),
            rom.inputs()
        )));
    }
    let mut timings = Timings::default();
    let grams = timings.run("gramians", || gramians(&fom, &map, a.method.resolve(&map), &cfg))?;
    let report = timings.run("report", || error_report_with_gramians(&fom, &rom, &map, &grams, &cfg))?;
    write_json(&a.report, &TimedReport { report: &report, timings_seconds: &timings })
}

fn read_samples(path: &Path, m: usize) -> Result<InputSignal> {
    let perr = |message: String| Error::Parse { path: path.display().to_string(), message };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| perr(e.to_string()))?;
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| perr(e.to_string()))?;
        let nums: Vec<f64> = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| perr(format!("'{f}': {e}"))))
            .collect::<Result<_>>()?;
        if nums.len() != 1 + 2 * m {
            return Err(perr(format!("expected {} columns, found {}", 1 + 2 * m, nums.len())));
        }
        times.push(nums[0]);
        values.push(nums[1..].chunks(2).map(|p| c64(p[0], p[1])).collect());
    }
    InputSignal::samples(times, values)
}

fn sim_options(t_final: f64, points: usize, rel_tol: f64, abs_tol: f64) -> SimOptions {
    SimOptions {
        rel_tol,
        abs_tol,
        stops: if points > 0 { uniform_times(t_final, points) } else { Vec::new() },
        record_stops_only: points > 0,
    }
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let (sys, _) = read_model(&a.model)?;
    let input = match a.input {
        InputKind::Impulse => InputSignal::Impulse,
        InputKind::Step => InputSignal::Step,
        InputKind::Samples => {
            let path = a.samples.as_ref().ok_or_else(|| Error::InvalidArgument("--samples is required".into()))?;
            read_samples(path, sys.inputs())?
        }
    };
    let opts = sim_options(a.t_final, a.points, a.rel_tol, a.abs_tol);
    let traj = Timings::default().run("simulation", || simulate(&sys, &input, a.t_final, &opts))?;
    traj.write_csv(&a.out)
}

// Experiment definitions for `repro`.

struct Experiment {
    kind: BenchmarkKind,
    n: usize,
    map: ConformalMap,
    r: usize,
    sweep: Vec<usize>,
    input: InputSignal,
    t_final: f64,
    classical: bool,
}

/// Joukowski map for the wave model: `M` is imaginary and 5% beyond the
/// largest pole modulus, so the ellipse's major axis covers the spectrum.
fn wave_map(sys: &LtiSystem) -> Result<ConformalMap> {
    let wmax = sys.poles()?.iter().map(|p| p.im.abs()).fold(0.0, f64::max);
    Ok(JoukowskiMap::new(c64(1e-6, 0.0), c64(0.0, 1.05 * wmax), 1.0 + 1e-3)?.into())
}

fn experiment(kind: ModelKind, a: &ReproArgs, sys: &LtiSystem) -> Result<Experiment> {
    Ok(match kind {
        ModelKind::Heat => Experiment {
            kind: BenchmarkKind::Heat,
            n: a.heat_n,
            map: MobiusMap::disk(c64(-17e4, 0.0), 17e4)?.into(),
            r: 10,
            sweep: (2..=20).collect(),
            input: InputSignal::Impulse,
            t_final: 1.0,
            classical: true,
        },
        ModelKind::Schrodinger => Experiment {
            kind: BenchmarkKind::Schrodinger,
            n: a.schrodinger_n,
            map: MobiusMap::clockwise_rotation().into(),
            r: 9,
            sweep: (3..=15).collect(),
            input: InputSignal::Step,
            t_final: 1.0,
            classical: false,
        },
        ModelKind::Wave => Experiment {
            kind: BenchmarkKind::Wave,
            n: a.wave_n,
            map: wave_map(sys)?,
            r: 20,
            sweep: vec![10, 20, 30],
            input: InputSignal::Impulse,
            t_final: 2.0,
            classical: false,
        },
    })
}

#[derive(Serialize)]
struct SweepRow {
    r: usize,
    h2abar_error: f64,
    bound: f64,
    epsilon: f64,
    min_pole_margin: f64,
}

/// Runs `f` over `items` on up to `threads` workers; results keep the
/// input order.
fn par_map<T: Sync, U: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> Result<U> + Sync) -> Result<Vec<U>> {
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<_>>())).collect();
        let mut out = Vec::with_capacity(items.len());
        for h in handles {
            for r in h.join().expect("sweep worker panicked") {
                out.push(r?);
            }
        }
        Ok(out)
    })
}

fn sweep(
    fom: &LtiSystem,
    grams: &GramianPair,
    map: &ConformalMap,
    orders: &[usize],
    cfg: &QuadratureConfig,
    threads: usize,
) -> Result<Vec<SweepRow>> {
    let fom_norm = h2abar_norm(fom, map, cfg)?;
    let err_cfg = error_quadrature_config(cfg, fom_norm);
    let bal = balance_numerical(fom, grams, 0.0)?;
    let grid = default_frequency_grid();
    let region = RegionSpec::for_map(map);
    let orders: Vec<usize> = orders.iter().copied().filter(|&r| r <= bal.order()).collect();
    par_map(&orders, threads, |&r| {
        let res = conformal_bt_with_gramians(fom, grams, r, TieHandling::Allow)?;
        let err = h2abar_error_norm(fom, &res.rom, map, &err_cfg)?;
        let (bound, epsilon) = h2_error_bound(&bal, r, map, &grid)?;
        let min_pole_margin = pole_verdicts(&res.rom, &region)?.iter().map(|v| v.margin).fold(f64::INFINITY, f64::min);
        Ok(SweepRow { r, h2abar_error: err, bound, epsilon, min_pole_margin })
    })
}

fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let header: Vec<String> =
        ["r", "h2abar_error", "bound", "epsilon", "min_pole_margin"].iter().map(|s| s.to_string()).collect();
    let data: Vec<Vec<f64>> =
        rows.iter().map(|w| vec![w.r as f64, w.h2abar_error, w.bound, w.epsilon, w.min_pole_margin]).collect();
    write_csv(path, &header, &data)
}

fn write_error_curve(path: &Path, reference: &Trajectory, tests: &[(&str, &Trajectory)]) -> Result<()> {
    let mut header = vec!["t".to_string()];
    let mut cols = Vec::new();
    for (name, tr) in tests {
        header.push(format!("{name}_maxnorm"));
        header.push(format!("{name}_pointwise"));
        cols.push(output_relative_error(reference, tr, ErrorNormalization::MaxNorm)?);
        cols.push(output_relative_error(reference, tr, ErrorNormalization::Pointwise)?);
    }
    let rows: Vec<Vec<f64>> = reference
        .times
        .iter()
        .enumerate()
        .map(|(i, t)| std::iter::once(*t).chain(cols.iter().map(|c| c[i])).collect())
        .collect();
    write_csv(path, &header, &rows)
}

fn run_experiment(kind: ModelKind, a: &ReproArgs, threads: usize) -> Result<serde_json::Value> {
    let spec = BenchmarkSpec::new(
        kind.into(),
        match kind {
            ModelKind::Heat => a.heat_n,
            ModelKind::Schrodinger => a.schrodinger_n,
            ModelKind::Wave => a.wave_n,
        },
    )?;
    let fom = spec.build()?;
    let ex = experiment(kind, a, &fom)?;
    let dir = a.out_dir.join(ex.kind.name());
    let cfg = QuadratureConfig::default().with_max_subdivisions(20000);
    let method = MethodArg::Auto.resolve(&ex.map);
    log::info!("{}: n = {}, {} map, {} Gramians", ex.kind, ex.n, ex.map.name(), method);

    let fom_file = ModelFile::from_system(&fom, spec.metadata());
    write_json(&dir.join("fom.json"), &fom_file)?;
    write_json(&dir.join("map.json"), &ex.map)?;

    let mut timings = Timings::default();
    let grams = timings.run("gramians", || gramians(&fom, &ex.map, method, &cfg))?;
    let res = conformal_bt_with_gramians(&fom, &grams, ex.r, TieHandling::Reject)?;
    write_json(&dir.join("rom.json"), &rom_file(&fom_file, &res, &ex.map))?;
    write_hsv(&dir.join("hsv.csv"), &res.hsv)?;

    let report: ErrorReport =
        timings.run("report", || error_report_with_gramians(&fom, &res.rom, &ex.map, &grams, &cfg))?;
    write_json(&dir.join("report.json"), &report)?;
    let rows = timings.run("sweep", || sweep(&fom, &grams, &ex.map, &ex.sweep, &cfg, threads))?;
    write_sweep(&dir.join("sweep.csv"), &rows)?;

    let opts = sim_options(ex.t_final, a.points, 1e-8, 1e-12);
    let label = match ex.input {
        InputSignal::Step => "step",
        _ => "impulse",
    };
    let y = timings.run("full simulation", || simulate(&fom, &ex.input, ex.t_final, &opts))?;
    let yr = simulate(&res.rom, &ex.input, ex.t_final, &opts)?;
    y.write_csv(&dir.join(format!("{label}_fom.csv")))?;
    yr.write_csv(&dir.join(format!("{label}_rom.csv")))?;
    let mut summary = json!({
        "n": ex.n,
        "r": ex.r,
        "map": ex.map,
        "method": method.name(),
        "h2abar_error": report.h2abar_error,
        "bound": report.bound,
        "all_poles_inside": report.all_poles_inside(),
        "max_output_error": output_relative_error(&y, &yr, ErrorNormalization::MaxNorm)?.into_iter().fold(0.0, f64::max),
    });
    if ex.classical {
        let identity = ConformalMap::identity();
        let cg = gramians(&fom, &identity, GramianMethod::Lyapunov, &cfg)?;
        let cres = conformal_bt_with_gramians(&fom, &cg, ex.r, TieHandling::Reject)?;
        let classical_norm = h2abar_norm(&fom, &identity, &cfg)?;
        let classical_err =
            h2abar_error_norm(&fom, &cres.rom, &identity, &error_quadrature_config(&cfg, classical_norm))?;
        let yc = simulate(&cres.rom, &ex.input, ex.t_final, &opts)?;
        yc.write_csv(&dir.join(format!("{label}_classical.csv")))?;
        write_error_curve(&dir.join(format!("{label}_error.csv")), &y, &[("conformal", &yr), ("classical", &yc)])?;
        summary["classical_h2_error"] = json!(classical_err);
    } else {
        write_error_curve(&dir.join(format!("{label}_error.csv")), &y, &[("conformal", &yr)])?;
    }
    write_json(&dir.join("timings.json"), &timings)?;
    Ok(summary)
}

pub fn cmd_repro(a: &ReproArgs, threads: usize) -> Result<()> {
    let kinds =
        if a.only.is_empty() { vec![ModelKind::Heat, ModelKind::Schrodinger, ModelKind::Wave] } else { a.only.clone() };
    let mut summary = serde_json::Map::new();
    for kind in kinds {
        let name = BenchmarkKind::from(kind).name();
        let t = Instant::now();
        let s = run_experiment(kind, a, threads)?;
        log::info!("{name}: {:.3} s", t.elapsed().as_secs_f64());
        summary.insert(name.to_string(), s);
    }
    write_json(&a.out_dir.join("summary.json"), &summary)
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { crate::error::ErrorClass::Validation.exit_code() } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.class().exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_arguments() {
        assert_eq!(parse_complex("-17e4").unwrap(), c64(-17e4, 0.0));
        assert_eq!(parse_complex("1e-6, 2").unwrap(), c64(1e-6, 2.0));
        assert!(parse_complex("1,2,3").is_err());
        assert!(parse_complex("x").is_err());
    }

    #[test]
    fn auto_method() {
        assert_eq!(MethodArg::Auto.resolve(&ConformalMap::identity()), GramianMethod::Lyapunov);
        let j = JoukowskiMap::new(c64(0.0, 0.0), c64(0.0, 1.0), 1.5).unwrap();
        assert_eq!(MethodArg::Auto.resolve(&j.into()), GramianMethod::Quadrature);
    }

    #[test]
    fn ordered_parallel_map() {
        let items: Vec<usize> = (0..10).collect();
        let out = par_map(&items, 3, |&i| Ok(i * i)).unwrap();
        assert_eq!(out, items.iter().map(|i| i * i).collect::<Vec<_>>());
        assert!(par_map(&items, 3, |&i| if i == 7 { Err(Error::EmptyTrajectory) } else { Ok(i) }).is_err());
    }
}
