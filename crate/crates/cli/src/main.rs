//! `paragate` command-line front end: sweeps to CSV plus a JSON metadata mirror.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use paragate::config::{OutputFormat, RunConfig};
use paragate::error::Error as CoreError;
use paragate::reports::{
    calibrate_sweep, chi_zero_curve, rabi_check_at, spectroscopy_sweep, sweep, sweep_points, Execution, Mode,
};
use serde_json::{json, Value};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "paragate", version, about = "Floquet analysis of parametrically driven two-qubit gates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gate rate and cross-Kerr over the sweep grid.
    Analyze(Common),
    /// Two-tone spectroscopy lines over the sweep grid.
    Spectroscopy {
        #[command(flatten)]
        common: Common,
        /// Harmonic range `kmin:kmax`, overriding the config.
        #[arg(long, value_parser = parse_k_range, allow_hyphen_values = true)]
        k_range: Option<(i64, i64)>,
    },
    /// Calibrated drive frequency and minimal gap over the sweep grid.
    Calibrate(Common),
    /// Stroboscopic swap of the drive pair at one grid point.
    RabiCheck {
        #[command(flatten)]
        common: Common,
        /// Grid index of the point to check.
        #[arg(long, default_value_t = 0)]
        point: usize,
        /// Number of drive periods; one full swap by default.
        #[arg(long)]
        periods: Option<usize>,
    },
    /// Zeros of the cross-Kerr along the primary axis, per slice of the second axis.
    ChiZero(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration, TOML or JSON (by extension).
    #[arg(long)]
    config: PathBuf,
    /// Output path; `-` or absent writes to stdout unless the config names one.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    threads: Option<usize>,
    /// analytic, floquet or both (also `analytic,floquet`).
    #[arg(long, default_value = "both")]
    mode: String,
    /// Drop counter-rotating terms from the Hamiltonian.
    #[arg(long)]
    rwa_strip: bool,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn core_failure(e: CoreError) -> Failure {
    match e {
        CoreError::InvalidInput { .. } | CoreError::UnknownGate(_) | CoreError::ModeOutOfRange { .. } => {
            Failure::Config(e.to_string())
        }
        _ => Failure::Numerical(e.to_string()),
    }
}

fn parse_k_range(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once(':').ok_or("expected `kmin:kmax`")?;
    let a: i64 = a.trim().parse().map_err(|e| format!("kmin: {e}"))?;
    let b: i64 = b.trim().parse().map_err(|e| format!("kmax: {e}"))?;
    if a > b {
        return Err("kmin must not exceed kmax".into());
    }
    Ok((a, b))
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let cfg: RunConfig = if json {
        let mut de = serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(&mut de).map_err(|e| keyed(path, e.path().to_string(), e.inner()))?
    } else {
        let de = toml::Deserializer::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        serde_path_to_error::deserialize(de).map_err(|e| keyed(path, e.path().to_string(), e.inner()))?
    };
    Ok(cfg)
}

fn keyed(path: &Path, key: String, err: &dyn std::fmt::Display) -> Failure {
    let msg = err.to_string();
    let msg = msg.trim_end();
    if key == "." || key.is_empty() {
        Failure::Config(format!("{}: {msg}", path.display()))
    } else {
        Failure::Config(format!("{}: key `{key}`: {msg}", path.display()))
    }
}

fn execution(threads: Option<usize>) -> Result<Execution, Failure> {
    match threads {
        Some(0) => Err(Failure::Config("`--threads` must be at least 1".into())),
        Some(1) => Ok(Execution::Sequential),
        t => Ok(Execution::Parallel { threads: t }),
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

/// Output table plus the per-command part of the metadata.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    extra: Value,
    failed: Vec<(usize, String)>,
    /// A numerical failure that is not tied to one grid point.
    failure: Option<String>,
}

struct Run {
    command: &'static str,
    common: Common,
    cfg: RunConfig,
    mode: Mode,
}

fn axis_header(cfg: &RunConfig) -> Vec<String> {
    match &cfg.sweep {
        Some(s) => {
            let mut h = vec![s.axis.as_str().to_string()];
            if let Some(sec) = &s.second {
                h.push(sec.axis.as_str().to_string());
            }
            h
        }
        None => vec!["point".to_string()],
    }
}

fn axis_cells(cfg: &RunConfig, index: usize, primary: f64, secondary: Option<f64>) -> Vec<String> {
    match &cfg.sweep {
        Some(s) if s.second.is_some() => vec![num(primary), opt_num(secondary)],
        Some(_) => vec![num(primary)],
        None => vec![index.to_string()],
    }
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn analyze(run: &Run, exec: Execution) -> Result<Table, Failure> {
    let reports = sweep(&run.cfg, run.mode, exec).map_err(core_failure)?;
    let mut header = axis_header(&run.cfg);
    header.extend(strings(&[
        "J1",
        "J2_bessel",
        "chi1",
        "chi2",
        "J_floquet",
        "chi_floquet",
        "excluded",
        "omega_d",
        "chi_static",
        "stark_pair",
        "stark_110",
        "min_overlap",
        "divergent",
        "error",
    ]));
    let rows = reports
        .iter()
        .map(|r| {
            let mut row = axis_cells(&run.cfg, r.index, r.primary, r.secondary);
            row.extend([
                num(r.j1),
                num(r.j2_bessel),
                num(r.chi1),
                num(r.chi2),
                num(r.j_floquet),
                num(r.chi_floquet),
                r.excluded.to_string(),
                num(r.omega_d),
                num(r.chi_static),
                num(r.stark_pair),
                num(r.stark_110),
                num(r.min_overlap),
                r.divergent.to_string(),
                r.error.clone().unwrap_or_default(),
            ]);
            row
        })
        .collect();
    let failed = reports.iter().filter_map(|r| r.error.clone().map(|e| (r.index, e))).collect();
    Ok(Table { header, rows, extra: json!({}), failed, failure: None })
}

fn point_cells(cfg: &RunConfig) -> Result<Vec<(usize, Vec<String>)>, Failure> {
    let points = sweep_points(cfg).map_err(core_failure)?;
    Ok(points
        .iter()
        .map(|(i, v)| (*i, axis_cells(cfg, *i, v.first().map_or(f64::NAN, |x| x.1), v.get(1).map(|x| x.1))))
        .collect())
}

fn spectroscopy(run: &Run, exec: Execution) -> Result<Table, Failure> {
    let (lines, failed) = spectroscopy_sweep(&run.cfg, exec).map_err(core_failure)?;
    let mut header = axis_header(&run.cfg);
    header.extend(strings(&["omega_d", "alpha", "beta", "k", "delta", "weight", "excluded", "error"]));
    let cells = point_cells(&run.cfg)?;
    let mut rows = Vec::new();
    for (index, axes) in &cells {
        if let Some((_, msg)) = failed.iter().find(|(i, _)| i == index) {
            let mut row = axes.clone();
            row.extend(["NaN", "", "", "", "NaN", "NaN", "true"].map(String::from));
            row.push(msg.clone());
            rows.push(row);
            continue;
        }
        for l in lines.iter().filter(|l| l.index == *index) {
            let p = &l.point;
            let mut row = axes.clone();
            row.extend([
                num(l.omega_d),
                p.alpha.to_string(),
                p.beta.to_string(),
                p.k.to_string(),
                num(p.delta),
                num(p.weight),
                p.excluded.to_string(),
                String::new(),
            ]);
            rows.push(row);
        }
    }
    let s = &run.cfg.spectroscopy;
    let extra = json!({ "probe_mode": s.probe_mode, "k_min": s.k_min, "k_max": s.k_max });
    Ok(Table { header, rows, extra, failed, failure: None })
}

fn calibrate(run: &Run, exec: Execution) -> Result<Table, Failure> {
    let (cal, failed) = calibrate_sweep(&run.cfg, exec).map_err(core_failure)?;
    let mut header = axis_header(&run.cfg);
    header.extend(strings(&["omega_d_star", "min_gap", "J", "evaluations", "error"]));
    let mut rows = Vec::new();
    for (index, mut row) in point_cells(&run.cfg)? {
        match cal.iter().find(|c| c.index == index) {
            Some(c) => row.extend([num(c.omega_d_star), num(c.min_gap), num(c.j), c.evaluations.to_string(), String::new()]),
            None => {
                let msg = failed.iter().find(|(i, _)| *i == index).map(|f| f.1.clone()).unwrap_or_default();
                row.extend(["NaN", "NaN", "NaN", "0"].map(String::from));
                row.push(msg);
            }
        }
        rows.push(row);
    }
    Ok(Table { header, rows, extra: json!({}), failed, failure: None })
}

/// Transferred-population tolerance of the swap fit.
const RABI_TOL: f64 = 1e-2;

fn rabi(run: &Run, point: usize, periods: Option<usize>) -> Result<Table, Failure> {
    let points = sweep_points(&run.cfg).map_err(core_failure)?;
    let (_, values) = points
        .iter()
        .find(|(i, _)| *i == point)
        .ok_or_else(|| Failure::Config(format!("`--point` {point} is outside the grid of {} points", points.len())))?;
    let [l1, l2] = &run.cfg.drive.pair;
    let header = strings(&["time_ns", &format!("P_{l1}"), &format!("P_{l2}"), "fit"]);
    let check = match rabi_check_at(&run.cfg, values, periods) {
        Ok(c) => c,
        Err(e @ (CoreError::InvalidInput { .. } | CoreError::UnknownGate(_) | CoreError::ModeOutOfRange { .. })) => {
            return Err(core_failure(e))
        }
        Err(e) => {
            let extra = json!({ "point": point, "values": axis_values(values) });
            return Ok(Table { header, rows: Vec::new(), extra, failed: vec![(point, e.to_string())], failure: None });
        }
    };
    let (p1, p2) = (&check.trace.populations[l1], &check.trace.populations[l2]);
    let rows = check
        .trace
        .times
        .iter()
        .enumerate()
        .map(|(m, &t)| {
            let fit = (std::f64::consts::TAU * check.j_fit * t).sin().powi(2);
            vec![num(t), num(p1[m]), num(p2[m]), num(fit)]
        })
        .collect();
    let pass = check.max_deviation < RABI_TOL;
    let extra = json!({
        "point": point,
        "values": axis_values(values),
        "omega_d_star": check.omega_d_star,
        "j_gap": check.j_gap,
        "j_fit": check.j_fit,
        "max_deviation": check.max_deviation,
        "tolerance": RABI_TOL,
        "n_periods": check.n_periods,
        "pass": pass,
    });
    eprintln!(
        "rabi-check: omega_d* = {:.6} GHz, J(gap) = {:.6} MHz, J(fit) = {:.6} MHz, max deviation {:.2e} ({})",
        check.omega_d_star,
        1e3 * check.j_gap,
        1e3 * check.j_fit,
        check.max_deviation,
        if pass { "pass" } else { "fail" }
    );
    let failure = (!pass).then(|| format!("swap fit deviation {:.2e} exceeds {RABI_TOL}", check.max_deviation));
    Ok(Table { header, rows, extra, failed: Vec::new(), failure })
}

fn axis_values(values: &[(paragate::config::AxisName, f64)]) -> Value {
    values.iter().map(|(a, v)| (a.as_str().to_string(), json!(v))).collect::<serde_json::Map<_, _>>().into()
}

fn chi_zero(run: &Run, exec: Execution) -> Result<Table, Failure> {
    if run.cfg.sweep.is_none() {
        return Err(Failure::Config("key `sweep`: chi-zero needs a sweep section".into()));
    }
    let reports = sweep(&run.cfg, run.mode, exec).map_err(core_failure)?;
    let curve = chi_zero_curve(&run.cfg, &reports, run.mode).map_err(core_failure)?;
    let header = strings(&[
        "slice",
        "control",
        "J_at_zero",
        "chi_residual",
        "refined",
        "pole",
        "dchi_dslice",
        "sweet_spot",
    ]);
    let rows = curve
        .zeros
        .iter()
        .map(|z| {
            vec![
                num(z.slice),
                num(z.control),
                num(z.j_at_zero),
                num(z.chi_residual),
                z.refined.to_string(),
                z.pole.to_string(),
                num(z.dchi_dslice),
                z.sweet_spot.to_string(),
            ]
        })
        .collect();
    let failed = reports.iter().filter_map(|r| r.error.clone().map(|e| (r.index, e))).collect();
    let extra = json!({ "omitted": curve.omitted, "traces": curve.traces });
    Ok(Table { header, rows, extra, failed, failure: None })
}

fn csv_bytes(t: &Table) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&t.header)?;
    for r in &t.rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| Failure::Io(e.to_string()))
}

fn metadata(run: &Run, t: &Table, started: u64, elapsed: f64) -> Value {
    json!({
        "tool": "paragate",
        "version": env!("CARGO_PKG_VERSION"),
        "command": run.command,
        "mode": run.mode,
        "threads": run.common.threads,
        "rwa_strip": run.cfg.numerics.rwa_strip,
        "started_unix": started,
        "elapsed_s": elapsed,
        "rows": t.rows.len(),
        "failed": t.failed.iter().map(|(i, m)| json!({ "index": i, "error": m })).collect::<Vec<_>>(),
        "failure": t.failure,
        "config": run.cfg,
        "result": t.extra,
    })
}

fn json_rows(t: &Table) -> Value {
    t.rows
        .iter()
        .map(|r| {
            t.header
                .iter()
                .zip(r)
                .map(|(h, c)| {
                    let v = match c.parse::<f64>() {
                        Ok(x) if x.is_finite() => json!(x),
                        Ok(_) => Value::Null,
                        Err(_) => match c.as_str() {
                            "true" => json!(true),
                            "false" => json!(false),
                            _ => json!(c),
                        },
                    };
                    (h.clone(), v)
                })
                .collect::<serde_json::Map<_, _>>()
                .into()
        })
        .collect::<Vec<Value>>()
        .into()
}

fn output_path(run: &Run) -> Option<PathBuf> {
    let p = run.common.output.clone().or_else(|| run.cfg.output.path.as_ref().map(PathBuf::from))?;
    (p.as_os_str() != "-").then_some(p)
}

/// `out.csv` → `out.meta.json`.
fn mirror_path(p: &Path) -> PathBuf {
    let stem = p.file_stem().map_or_else(|| "output".into(), |s| s.to_string_lossy().into_owned());
    p.with_file_name(format!("{stem}.meta.json"))
}

fn write_outputs(run: &Run, t: &Table, meta: Value) -> Result<(), Failure> {
    let path = output_path(run);
    let body = match run.cfg.output.format {
        OutputFormat::Csv => csv_bytes(t)?,
        OutputFormat::Json => {
            let mut doc = meta.clone();
            doc["rows"] = json_rows(t);
            let mut b = serde_json::to_vec_pretty(&doc)?;
            b.push(b'\n');
            b
        }
    };
    match &path {
        Some(p) => {
            std::fs::write(p, &body).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
            if run.cfg.output.format == OutputFormat::Csv {
                let m = mirror_path(p);
                let mut b = serde_json::to_vec_pretty(&meta)?;
                b.push(b'\n');
                std::fs::write(&m, b).map_err(|e| Failure::Io(format!("{}: {e}", m.display())))?;
            }
        }
        None => std::io::stdout().lock().write_all(&body)?,
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let (command, common, k_range, rabi_args) = match cli.command {
        Command::Analyze(c) => ("analyze", c, None, None),
        Command::Spectroscopy { common, k_range } => ("spectroscopy", common, k_range, None),
        Command::Calibrate(c) => ("calibrate", c, None, None),
        Command::RabiCheck { common, point, periods } => ("rabi-check", common, None, Some((point, periods))),
        Command::ChiZero(c) => ("chi-zero", c, None, None),
    };
    let mut cfg = load_config(&common.config)?;
    let mode: Mode = common.mode.parse().map_err(|e: CoreError| Failure::Config(e.to_string()))?;
    if common.rwa_strip {
        cfg.numerics.rwa_strip = true;
    }
    if let Some((a, b)) = k_range {
        cfg.spectroscopy.k_min = a;
        cfg.spectroscopy.k_max = b;
    }
    cfg.validate().map_err(core_failure)?;
    let exec = execution(common.threads)?;
    let run = Run { command, common, cfg, mode };

    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let table = match (command, rabi_args) {
        ("analyze", _) => analyze(&run, exec)?,
        ("spectroscopy", _) => spectroscopy(&run, exec)?,
        ("calibrate", _) => calibrate(&run, exec)?,
        ("chi-zero", _) => chi_zero(&run, exec)?,
        (_, Some((point, periods))) => rabi(&run, point, periods)?,
        _ => unreachable!("every subcommand is dispatched"),
    };
    let meta = metadata(&run, &table, started, clock.elapsed().as_secs_f64());
    write_outputs(&run, &table, meta)?;

    for (i, msg) in &table.failed {
        eprintln!("point {i}: {msg}");
    }
    if let Some(f) = &table.failure {
        return Err(Failure::Numerical(f.clone()));
    }
    if !table.failed.is_empty() {
        return Err(Failure::Numerical(format!("{} grid point(s) failed", table.failed.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::FAILURE
        }
    }
}
