use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use netfactor::io::{
    ensure_dir, load_adjacency, load_panel_csv, write_json, write_matrix_csv, write_simulation_table,
    AdjFormat, PanelData,
};
use netfactor::simulation::{ErrorStructure, Studies};
use netfactor::tuning::{cl_score, estimate_noise_variance, select_r_er, select_r_one_step, tune};
use netfactor::{
    recursive_validate, run_case, standardize, Case, Error, Grids, LaplacianSpectrum, Network,
    PenaltyKind, Result, ShrinkageOperator, SimulationConfig, SpectralPanel, ValidationConfig,
};

#[derive(Parser)]
#[command(name = "netfactor", version, about = "Network-assisted factor model estimation")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit factors and loadings with a fixed or tuned penalty.
    Estimate(EstimateArgs),
    /// Select tuning parameters with the C_L criterion.
    Tune(TuneArgs),
    /// Estimate the number of factors.
    SelectR(SelectArgs),
    /// Run the Monte Carlo study.
    Simulate(SimulateArgs),
    /// Rolling out-of-sample validation.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Pca,
    Lap,
    Proj,
}

impl From<Method> for PenaltyKind {
    fn from(m: Method) -> Self {
        match m {
            Method::Pca => PenaltyKind::None,
            Method::Lap => PenaltyKind::Laplacian,
            Method::Proj => PenaltyKind::Projection,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AdjFormatArg {
    Edges,
    Dense,
}

#[derive(Args)]
struct InputArgs {
    /// Panel CSV: rows are time points, columns are series.
    #[arg(long)]
    data: PathBuf,
    /// The panel's first row holds series labels.
    #[arg(long)]
    header: bool,
    /// Adjacency file; without it the network is empty and every penalty is inert.
    #[arg(long)]
    adj: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "edges")]
    adj_format: AdjFormatArg,
    /// Edge list node indices start at 1.
    #[arg(long)]
    one_based: bool,
    /// Standardize every column before fitting.
    #[arg(long)]
    standardize: bool,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PenaltyArgs {
    #[arg(long, value_enum, default_value = "pca")]
    method: Method,
    /// Fixed shrinkage strength.
    #[arg(long)]
    alpha: Option<f64>,
    /// Fixed projection truncation (number of unpenalized eigenvectors).
    #[arg(long)]
    m: Option<usize>,
    /// Select alpha (and m) by the C_L criterion over the default grids.
    #[arg(long)]
    auto_tune: bool,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    penalty: PenaltyArgs,
    #[arg(long, short)]
    r: usize,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long, short)]
    r: usize,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,
    /// `pca` runs plain eigenvalue-ratio selection; `lap`/`proj` go one step further.
    #[arg(long, value_enum, default_value = "pca")]
    method: Method,
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    /// Additional tune-and-reselect rounds.
    #[arg(long, default_value_t = 0)]
    extra_steps: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum StudyArg {
    Mse,
    SelectR,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum ErrorsArg {
    Banded,
    Iid,
}

#[derive(Args)]
struct SimulateArgs {
    /// Designs to run (1-4).
    #[arg(long = "case", value_delimiter = ',', default_values_t = vec![1u8, 2, 3, 4])]
    cases: Vec<u8>,
    #[arg(long = "p", value_delimiter = ',', default_values_t = vec![200usize])]
    ps: Vec<usize>,
    #[arg(long = "T", value_delimiter = ',', default_values_t = vec![50usize])]
    ts: Vec<usize>,
    #[arg(long, short, default_value_t = 3)]
    r: usize,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    #[arg(long, default_value_t = 20210)]
    seed: u64,
    #[arg(long, value_enum, default_value = "both")]
    study: StudyArg,
    #[arg(long, value_enum, default_value = "banded")]
    errors: ErrorsArg,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    penalty: PenaltyArgs,
    #[arg(long, short)]
    r: usize,
    #[arg(long, default_value_t = 52)]
    window: usize,
    /// Re-tune inside every window.
    #[arg(long)]
    retune: bool,
}

struct Loaded {
    panel: PanelData,
    spec: LaplacianSpectrum,
}

fn load_inputs(args: &InputArgs) -> Result<Loaded> {
    let mut panel = load_panel_csv(&args.data, args.header)?;
    if args.standardize {
        panel.x = standardize(&panel.x)?;
    }
    let net = match &args.adj {
        Some(path) => {
            let format = match args.adj_format {
                AdjFormatArg::Edges => AdjFormat::Edges,
                AdjFormatArg::Dense => AdjFormat::Dense,
            };
            load_adjacency(path, format, panel.p(), args.one_based)?
        }
        None => Network::empty(panel.p()),
    };
    let spec = LaplacianSpectrum::new(&net);
    Ok(Loaded { panel, spec })
}

fn resolve_operator(
    panel: &SpectralPanel<'_>,
    penalty: &PenaltyArgs,
    r: usize,
) -> Result<ShrinkageOperator> {
    let kind = PenaltyKind::from(penalty.method);
    let spec = panel.spectrum();
    match kind {
        PenaltyKind::None => Ok(ShrinkageOperator::identity(panel.p())),
        _ if penalty.auto_tune => {
            let mut grids = Grids::default_for(panel.p());
            if let Some(a) = penalty.alpha {
                grids.alphas = vec![a];
            }
            if let Some(m) = penalty.m {
                grids.ms = vec![m];
            }
            tune(panel, kind, r, &grids)?.operator(spec)
        }
        PenaltyKind::Laplacian => {
            let alpha = penalty.alpha.ok_or_else(|| {
                Error::InvalidParameter("lap needs --alpha or --auto-tune".into())
            })?;
            ShrinkageOperator::new(spec, kind, alpha, 0)
        }
        PenaltyKind::Projection => match (penalty.alpha, penalty.m) {
            (Some(alpha), Some(m)) => ShrinkageOperator::new(spec, kind, alpha, m),
            _ => Err(Error::InvalidParameter(
                "proj needs --alpha and --m, or --auto-tune".into(),
            )),
        },
    }
}

#[derive(Serialize)]
struct EstimateReport {
    method: &'static str,
    r: usize,
    alpha: f64,
    m: usize,
    sigma2_hat: f64,
    cl_score: f64,
    adjusted_error: f64,
    trace_d_inv: f64,
    eigenvalues: Vec<f64>,
    degenerate_gap: bool,
    empty_network: bool,
}

fn run_estimate(args: &EstimateArgs) -> Result<()> {
    let loaded = load_inputs(&args.input)?;
    let x = &loaded.panel.x;
    let panel = SpectralPanel::new(x, &loaded.spec)?;
    let op = resolve_operator(&panel, &args.penalty, args.r)?;
    let est = panel.fit(&op, args.r)?;
    let sigma2 = estimate_noise_variance(&panel, args.r)?;
    let cl = cl_score(x, &est, &op, sigma2, args.r)?;

    let out = ensure_dir(&args.input.out_dir)?;
    write_matrix_csv(&out.join("F.csv"), &est.scores, None)?;
    write_matrix_csv(&out.join("B.csv"), &est.loadings, None)?;
    write_matrix_csv(
        &out.join("C.csv"),
        &est.common_components(),
        loaded.panel.labels.as_deref(),
    )?;
    let report = EstimateReport {
        method: op.kind().label(),
        r: args.r,
        alpha: op.alpha(),
        m: op.m(),
        sigma2_hat: sigma2,
        cl_score: cl.score,
        adjusted_error: cl.adjusted_error,
        trace_d_inv: op.trace_inv(),
        eigenvalues: est.gram_eigvals.clone(),
        degenerate_gap: est.degenerate_gap,
        empty_network: loaded.spec.is_empty_network(),
    };
    if est.degenerate_gap {
        eprintln!("warning[degenerate_gap]: lambda_r and lambda_r+1 are numerically tied");
    }
    write_json(&out.join("report.json"), &report)
}

fn run_tune(args: &TuneArgs) -> Result<()> {
    let loaded = load_inputs(&args.input)?;
    let panel = SpectralPanel::new(&loaded.panel.x, &loaded.spec)?;
    let result = tune(&panel, args.method.into(), args.r, &Grids::default_for(panel.p()))?;
    let out = ensure_dir(&args.input.out_dir)?;
    write_json(&out.join("tuning.json"), &result)?;
    println!(
        "method={} alpha={} m={} score={:.16e} sigma2_hat={:.16e}",
        result.kind.label(),
        result.alpha_star,
        result.m_star,
        result.score,
        result.sigma2_hat
    );
    Ok(())
}

fn run_select(args: &SelectArgs) -> Result<()> {
    let loaded = load_inputs(&args.input)?;
    let panel = SpectralPanel::new(&loaded.panel.x, &loaded.spec)?;
    let out = ensure_dir(&args.input.out_dir)?;
    let r_hat = match PenaltyKind::from(args.method) {
        PenaltyKind::None => {
            let res = select_r_er(&panel, &ShrinkageOperator::identity(panel.p()), args.k_max)?;
            write_json(&out.join("select_r.json"), &res)?;
            res.r_hat
        }
        kind => {
            let grids = Grids::default_for(panel.p());
            let res = select_r_one_step(&panel, kind, args.k_max, &grids, args.extra_steps)?;
            write_json(&out.join("select_r.json"), &res)?;
            res.result.r_hat
        }
    };
    println!("r_hat={r_hat}");
    Ok(())
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let studies = match args.study {
        StudyArg::Mse => Studies { mse: true, select_r: false },
        StudyArg::SelectR => Studies { mse: false, select_r: true },
        StudyArg::Both => Studies { mse: true, select_r: true },
    };
    let mut reports = Vec::new();
    for &case in &args.cases {
        let case = Case::from_index(case)?;
        for &p in &args.ps {
            for &t in &args.ts {
                let mut cfg = SimulationConfig::new(case, p, t, args.reps, args.seed);
                cfg.r = args.r;
                cfg.sigma_e2 = args.sigma2;
                cfg.k_max = args.k_max;
                cfg.studies = studies;
                cfg.errors = match args.errors {
                    ErrorsArg::Banded => ErrorStructure::Banded,
                    ErrorsArg::Iid => ErrorStructure::Iid,
                };
                let report = run_case(&cfg)?;
                eprintln!(
                    "info: case {case} p={p} T={t} done in {:.1}s",
                    report.elapsed_secs
                );
                reports.push(report);
            }
        }
    }
    let out = ensure_dir(&args.out_dir)?;
    write_simulation_table(&out.join("table.csv"), &reports)?;
    write_json(&out.join("report.json"), &reports)
}

fn write_steps_csv(path: &Path, report: &netfactor::ValidationReport) -> Result<()> {
    let mut text = String::from("step,mse,r2,b_drift,alpha,m\n");
    for s in &report.steps {
        let drift = s.b_drift.map(netfactor::io::format_float).unwrap_or_default();
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.step,
            netfactor::io::format_float(s.mse),
            netfactor::io::format_float(s.r2),
            drift,
            netfactor::io::format_float(s.alpha),
            s.m
        ));
    }
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run_validate(args: &ValidateArgs) -> Result<()> {
    let loaded = load_inputs(&args.input)?;
    let p = loaded.panel.p();
    let kind = PenaltyKind::from(args.penalty.method);
    let fixed = kind == PenaltyKind::None
        || (kind == PenaltyKind::Laplacian && args.penalty.alpha.is_some())
        || (args.penalty.alpha.is_some() && args.penalty.m.is_some());
    if !fixed && !args.penalty.auto_tune {
        return Err(Error::InvalidParameter(format!(
            "{} needs fixed --alpha/--m or --auto-tune",
            kind.label()
        )));
    }
    let cfg = ValidationConfig {
        method: kind,
        window: args.window,
        r: args.r,
        alpha: args.penalty.alpha,
        m: args.penalty.m,
        grids: Grids::default_for(p),
        retune: args.retune,
    };
    let report = recursive_validate(&loaded.panel.x, &loaded.spec, &cfg)?;
    let out = ensure_dir(&args.input.out_dir)?;
    write_json(&out.join("validation.json"), &report)?;
    write_steps_csv(&out.join("steps.csv"), &report)?;
    println!(
        "method={} adj_error={:.4} ave_mse={:.4} var_b={:.4} ave_r2={:.4}",
        kind.label(),
        report.adj_error,
        report.ave_mse,
        report.var_b,
        report.ave_r2
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Estimate(a) => run_estimate(a),
        Command::Tune(a) => run_tune(a),
        Command::SelectR(a) => run_select(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Validate(a) => run_validate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
