//! `cpca`: Cauchy PCA on CSV data, contamination simulations and influence
//! function tables.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numeric failure, 4 too many
//! failed simulation replications.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use cauchy_pca::config::{parse_float_list, parse_kappa_list, KeyValues};
use cauchy_pca::csvio::{format_float, read_matrix_path, write_matrix};
use cauchy_pca::influence::{
    classical_if, richardson_empirical_if, tight_cauchy_fit, CauchyIfModel, Estimator,
};
use cauchy_pca::linalg::{classical_first_pc, UnitDirection};
use cauchy_pca::pca::{fit_cauchy_pca, CauchyPcaConfig, InitMode};
use cauchy_pca::prep::{preprocess, CenteringMode, CenteringSpec, ScaleMode};
use cauchy_pca::sim::{run_kappa_grid, SimScenario, TableRow};
use cauchy_pca::Error;

const EXIT_INVALID: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_REPS_FAILED: u8 = 4;

#[derive(Parser)]
#[command(name = "cpca", version, about = "Cauchy-likelihood robust PCA")]
struct Cli {
    /// Worker threads for simulation replications (default: logical cores).
    #[arg(long, global = true, env = "CPCA_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit Cauchy principal directions to a CSV matrix.
    Fit(FitArgs),
    /// Run contamination experiments and print a mean-angle table.
    Simulate(SimulateArgs),
    /// Tabulate influence functions of the leading direction.
    Influence(InfluenceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Multistart,
    Classical,
    Random,
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV (rows = observations; header optional).
    input: PathBuf,
    /// Number of components.
    #[arg(short = 'k', long, default_value_t = 1)]
    components: usize,
    /// Centering: column, spatial or none.
    #[arg(long, default_value = "column")]
    center: String,
    /// Column scale: mad, mean-ad, mean-ad-about-mean or none.
    #[arg(long, default_value = "mad")]
    scale: String,
    #[arg(long, value_enum, default_value = "multistart")]
    init: InitArg,
    /// Seed for `--init random`.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Outer stopping tolerance in degrees.
    #[arg(long, default_value_t = cauchy_pca::pca::DEFAULT_OUTER_TOL_DEG)]
    tol: f64,
    #[arg(long, default_value_t = cauchy_pca::pca::DEFAULT_MAX_OUTER_ITERS)]
    max_iters: usize,
    /// Output prefix.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Flat `key = value` file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Comma-separated outlier log-norms; `none` injects no outliers.
    #[arg(long)]
    kappa: Option<String>,
    /// Comma-separated outlier angles in degrees.
    #[arg(long)]
    phi: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    contamination: Option<f64>,
    #[arg(long)]
    shift: Option<f64>,
    #[arg(long)]
    eigen_rate: Option<f64>,
    #[arg(long)]
    center: Option<String>,
    #[arg(long)]
    scale: Option<String>,
    /// Independent direction per outlier instead of one per replication.
    #[arg(long)]
    iid_outliers: bool,
    /// Report wall-clock runtimes (output is then not reproducible).
    #[arg(long)]
    timing: bool,
    /// Write the CSV here and an aligned table to stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ZMode {
    Sweep,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Classical,
    Cauchy,
}

#[derive(Args)]
struct InfluenceArgs {
    input: PathBuf,
    /// Contamination point, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    z: Option<String>,
    /// `sweep` without `--z` probes `z0 = (u + w) / sqrt 2`, w a unit vector
    /// orthogonal to the fitted direction.
    #[arg(long, value_enum)]
    z_mode: Option<ZMode>,
    #[arg(long, value_enum, default_value = "cauchy")]
    estimator: EstimatorArg,
    /// Scalings of z, comma-separated.
    #[arg(long)]
    alphas: Option<String>,
    /// Compare with the finite-epsilon refit.
    #[arg(long)]
    validate: bool,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long, default_value = "none")]
    center: String,
    #[arg(long, default_value = "none")]
    scale: String,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(EXIT_INVALID);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(EXIT_NUMERIC);
        }
    }
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Influence(a) => cmd_influence(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::TooManyFailures { .. } => EXIT_REPS_FAILED,
        e if e.is_validation() => EXIT_INVALID,
        _ => EXIT_NUMERIC,
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidInput(format!("cannot write {}: {e}", path.display()))
}

fn centering(center: &str, scale: &str) -> Result<CenteringSpec, Error> {
    Ok(CenteringSpec {
        mode: center.parse::<CenteringMode>()?,
        scale: scale.parse::<ScaleMode>()?,
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_fit(a: FitArgs) -> Result<(), Error> {
    let spec = centering(&a.center, &a.scale)?;
    if a.components == 0 {
        return Err(Error::InvalidInput(
            "--components must be at least 1".into(),
        ));
    }
    let x = read_matrix_path(&a.input)?;
    if a.components > x.ncols() {
        return Err(Error::InvalidInput(format!(
            "--components {} exceeds the {} data columns",
            a.components,
            x.ncols()
        )));
    }
    let init = match a.init {
        InitArg::Multistart => InitMode::MultiStart,
        InitArg::Classical => InitMode::ClassicalPc,
        InitArg::Random => InitMode::Random { seed: a.seed },
    };
    let cfg = CauchyPcaConfig::new(a.components)
        .with_tolerance(a.tol, a.max_iters)
        .with_init(init);
    let prepared = preprocess(&x, spec)?;
    let fit = fit_cauchy_pca(&prepared.data, &cfg)?;

    let dir_path = with_suffix(&a.out, ".directions.csv");
    let rows: Vec<Vec<f64>> = fit
        .directions
        .iter()
        .map(|d| d.as_slice().to_vec())
        .collect();
    let f = File::create(&dir_path).map_err(|e| io_err(&dir_path, e))?;
    write_matrix(BufWriter::new(f), None, &rows)?;

    let params_path = with_suffix(&a.out, ".params.csv");
    let f = File::create(&params_path).map_err(|e| io_err(&params_path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(f));
    let werr = |e: csv::Error| Error::InvalidInput(format!("cannot write params: {e}"));
    w.write_record(["mu", "sigma", "iterations", "converged"])
        .map_err(werr)?;
    for j in 0..a.components {
        w.write_record([
            format_float(fit.params[j].mu),
            format_float(fit.params[j].sigma),
            fit.iterations[j].to_string(),
            fit.converged[j].to_string(),
        ])
        .map_err(werr)?;
    }
    w.flush().map_err(|e| io_err(&params_path, e))?;

    let meta_path = with_suffix(&a.out, ".meta.json");
    let meta = serde_json::json!({
        "n": x.nrows(),
        "p": x.ncols(),
        "components": a.components,
        "center": spec.mode.to_string(),
        "scale": spec.scale.to_string(),
        "init": match a.init {
            InitArg::Multistart => "multistart",
            InitArg::Classical => "classical",
            InitArg::Random => "random",
        },
        "outer_tol_deg": a.tol,
        "max_outer_iters": a.max_iters,
        "center_vector": prepared.center.as_slice(),
        "scales": prepared.scales.as_slice(),
        "converged": fit.converged,
    });
    let text = serde_json::to_string_pretty(&meta).expect("meta is plain data");
    std::fs::write(&meta_path, text + "\n").map_err(|e| io_err(&meta_path, e))?;

    for (j, converged) in fit.converged.iter().enumerate() {
        if !converged {
            eprintln!(
                "warning: component {j} stopped after {} iterations without meeting the tolerance",
                fit.iterations[j]
            );
        }
    }
    Ok(())
}

const SIM_KEYS: &[&str] = &[
    "n",
    "p",
    "kappa",
    "phi",
    "reps",
    "seed",
    "contamination",
    "shift",
    "eigen_rate",
    "center",
    "scale",
    "iid_outliers",
];

fn cmd_simulate(a: SimulateArgs) -> Result<(), Error> {
    let kv = match &a.config {
        Some(path) => {
            let kv = KeyValues::read(path)?;
            kv.reject_unknown(SIM_KEYS)?;
            kv
        }
        None => KeyValues::default(),
    };
    let mut s = SimScenario::default();
    let pick = |flag: Option<String>, key: &str| flag.or_else(|| kv.get(key).map(str::to_string));
    s.n = a.n.or(kv.parse_value("n")?).unwrap_or(s.n);
    s.p = a.p.or(kv.parse_value("p")?).unwrap_or(s.p);
    s.reps = a.reps.or(kv.parse_value("reps")?).unwrap_or(s.reps);
    s.seed = a.seed.or(kv.parse_value("seed")?).unwrap_or(s.seed);
    s.contamination = a
        .contamination
        .or(kv.parse_value("contamination")?)
        .unwrap_or(s.contamination);
    s.shift = a.shift.or(kv.parse_value("shift")?).unwrap_or(s.shift);
    s.eigen_rate = a
        .eigen_rate
        .or(kv.parse_value("eigen_rate")?)
        .unwrap_or(s.eigen_rate);
    s.iid_outlier_directions = a.iid_outliers || kv.parse_value("iid_outliers")?.unwrap_or(false);
    if let Some(c) = pick(a.center, "center") {
        s.centering.mode = c.parse()?;
    }
    if let Some(c) = pick(a.scale, "scale") {
        s.centering.scale = c.parse()?;
    }
    let kappas = parse_kappa_list(&pick(a.kappa, "kappa").unwrap_or_else(|| "none".into()))?;
    let phis = parse_float_list(&pick(a.phi, "phi").unwrap_or_else(|| "0".into()))?;
    for &phi in &phis {
        SimScenario {
            phi_degrees: phi,
            ..s.clone()
        }
        .validate()?;
    }

    let mut rows: Vec<TableRow> = Vec::new();
    for &phi in &phis {
        let base = SimScenario {
            phi_degrees: phi,
            ..s.clone()
        };
        rows.extend(run_kappa_grid(&base, &kappas)?);
    }

    let fmt_kappa = |k: Option<f64>| k.map_or_else(|| "none".to_string(), |v| v.to_string());
    let fmt_runtime = |v: f64| {
        if a.timing {
            format_float(v)
        } else {
            "NA".to_string()
        }
    };
    let csv_lines: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.phi.to_string(),
                r.method.to_string(),
                fmt_kappa(r.kappa),
                format_float(r.mean_angle_deg),
                fmt_runtime(r.mean_runtime_s),
                r.reps_used.to_string(),
            ]
        })
        .collect();
    let header = [
        "phi",
        "method",
        "k",
        "mean_angle_deg",
        "mean_runtime_s",
        "reps_used",
    ];

    let write_csv = |w: &mut dyn Write| -> Result<(), Error> {
        let mut cw = csv::Writer::from_writer(w);
        let werr = |e: csv::Error| Error::InvalidInput(format!("cannot write table: {e}"));
        cw.write_record(header).map_err(werr)?;
        for l in &csv_lines {
            cw.write_record(l).map_err(werr)?;
        }
        cw.flush()
            .map_err(|e| Error::InvalidInput(format!("cannot write table: {e}")))?;
        Ok(())
    };

    match &a.out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
            write_csv(&mut f)?;
            f.flush().map_err(|e| io_err(path, e))?;
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            let _ = writeln!(
                out,
                "{:>6}  {:<9}  {:>5}  {:>14}  {:>14}  {:>9}",
                header[0], header[1], header[2], header[3], header[4], header[5]
            );
            for (r, l) in rows.iter().zip(&csv_lines) {
                let runtime = if a.timing {
                    format!("{:.6}", r.mean_runtime_s)
                } else {
                    "NA".into()
                };
                let _ = writeln!(
                    out,
                    "{:>6}  {:<9}  {:>5}  {:>14.4}  {:>14}  {:>9}",
                    l[0], l[1], l[2], r.mean_angle_deg, runtime, l[5]
                );
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            write_csv(&mut out)?;
        }
    }
    Ok(())
}

fn default_alphas() -> Vec<f64> {
    (0..=6).map(|e| 10f64.powi(e)).collect()
}

fn cmd_influence(a: InfluenceArgs) -> Result<(), Error> {
    let spec = centering(&a.center, &a.scale)?;
    if a.z.is_none() && a.z_mode.is_none() {
        return Err(Error::InvalidInput("give --z or --z-mode sweep".into()));
    }
    if a.validate && !(a.eps > 0.0 && a.eps <= 0.05) {
        return Err(Error::InvalidInput(format!(
            "--eps must be in (0, 0.05], got {}",
            a.eps
        )));
    }
    let z0 = a.z.as_deref().map(parse_float_list).transpose()?;
    let alphas = match &a.alphas {
        Some(s) => parse_float_list(s)?,
        None if a.z_mode.is_some() => default_alphas(),
        None => vec![1.0],
    };
    let raw = read_matrix_path(&a.input)?;
    if let Some(z) = &z0 {
        if z.len() != raw.ncols() {
            return Err(Error::InvalidInput(format!(
                "--z has {} entries, data have {} columns",
                z.len(),
                raw.ncols()
            )));
        }
    }
    let x = preprocess(&raw, spec)?.data;

    let estimator = match a.estimator {
        EstimatorArg::Classical => Estimator::Classical,
        EstimatorArg::Cauchy => Estimator::Cauchy,
    };
    let (u_hat, cauchy_model) = match estimator {
        Estimator::Classical => (classical_first_pc(&x)?.0, None),
        Estimator::Cauchy => {
            let (u, params) = tight_cauchy_fit(&x)?;
            let model = CauchyIfModel::new(&x, &u, params, Default::default())?;
            (u, Some(model))
        }
    };
    let z0 = match z0 {
        Some(z) => DVector::from_vec(z),
        None => sweep_direction(&u_hat),
    };

    let mut lines = Vec::with_capacity(alphas.len());
    for &alpha in &alphas {
        let z = &z0 * alpha;
        let (if_vec, b_norm, singular) = match &cauchy_model {
            None => {
                let model = x.covariance();
                (Some(classical_if(&z, &model)?.if_vector), None, false)
            }
            Some(model) => {
                let r = model.evaluate(&z)?;
                (r.if_vector, Some(r.b_vector.norm()), r.singular)
            }
        };
        let rel_gap = match (&if_vec, a.validate) {
            (Some(v), true) => {
                let emp = richardson_empirical_if(&z, &x, estimator, a.eps)?;
                let denom = emp.norm().max(v.norm());
                Some(if denom > 0.0 {
                    (v - &emp).norm() / denom
                } else {
                    0.0
                })
            }
            _ => None,
        };
        let na = || "NA".to_string();
        lines.push([
            format_float(alpha),
            if_vec.as_ref().map_or_else(na, |v| format_float(v.norm())),
            b_norm.map_or_else(na, format_float),
            singular.to_string(),
            rel_gap.map_or_else(na, format_float),
        ]);
    }

    let header = ["alpha", "if_norm", "b_norm", "singular", "rel_gap"];
    let emit = |w: &mut dyn Write| -> Result<(), Error> {
        let mut cw = csv::Writer::from_writer(w);
        let werr = |e: csv::Error| Error::InvalidInput(format!("cannot write table: {e}"));
        cw.write_record(header).map_err(werr)?;
        for l in &lines {
            cw.write_record(l).map_err(werr)?;
        }
        cw.flush()
            .map_err(|e| Error::InvalidInput(format!("cannot write table: {e}")))?;
        Ok(())
    };
    match &a.out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
            emit(&mut f)?;
            f.flush().map_err(|e| io_err(path, e))?;
        }
        None => emit(&mut std::io::stdout().lock())?,
    }
    Ok(())
}

/// `(u + w) / sqrt 2` with `w` the normalised residual of the coordinate
/// axis least aligned with `u`.
fn sweep_direction(u: &UnitDirection) -> DVector<f64> {
    let u = u.as_vector();
    let axis = (0..u.len())
        .min_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()))
        .unwrap_or(0);
    let mut w = DVector::zeros(u.len());
    w[axis] = 1.0;
    w -= u * u[axis];
    let norm = w.norm();
    if norm == 0.0 {
        return u.clone();
    }
    (u + w / norm) / 2f64.sqrt()
}
