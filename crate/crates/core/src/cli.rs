//! Command dispatch for the `svfm` binary.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimator::{fit_conditional, FitOptions, state_sweep, unprojected_factors};
use crate::evalkit::{
    expanding_backtest, mv_factor_portfolio, variance_explained_shares, BacktestConfig, LoadingSource, PortfolioConfig,
    WeightNormalization,
};
use crate::inference::{gc_test, pairwise_test_grid};
use crate::io::{
    align_state, load_panel_csv, load_state_csv, write_panel_csv, write_report, Cell, PanelData, RunConfig, StateSeries,
    Table,
};
use crate::simlab::{
    generate_panel, mc_estimator_study, mc_factor_count_curves, mc_power_study, mc_distribution_study, study_fit_options, CurveSpec,
    DgpConfig, DistributionSpec, LoadingModel, PowerSpec, RsqSpec, StateModel, Target,
};

#[derive(Parser, Debug)]
#[command(name = "svfm", version, about = "State-varying factor models")]
struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (defaults to $SVFM_OUTPUT_DIR, then ./svfm-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set kernel=epanechnikov`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long, global = true)]
    kernel: Option<String>,
    #[arg(long, global = true)]
    h: Option<f64>,
    #[arg(long, global = true)]
    r: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    format: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Panel CSV.
    #[arg(long)]
    data: PathBuf,
    /// Column (or row, for series-major files) holding the state.
    #[arg(long)]
    state_column: Option<String>,
    /// Separate state CSV: time label column and a value column.
    #[arg(long)]
    state_file: Option<PathBuf>,
    #[arg(long)]
    layout: Option<String>,
    #[arg(long)]
    state_transform: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit at one state value.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        state: f64,
    },
    /// Fit over a grid of states: loading curves and variance shares.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        /// `start:stop:points` or a comma-separated list.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Test for a change in the loading span between two states, or over a grid.
    Test {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        s1: Option<f64>,
        #[arg(long)]
        s2: Option<f64>,
        /// Test all pairs of this grid instead of one pair.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Monte Carlo studies and synthetic panels.
    Simulate {
        #[arg(value_enum)]
        study: Study,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        t: Option<usize>,
        /// Loading family for `panel`.
        #[arg(long, value_enum, default_value = "cubic")]
        loading: Family,
        /// Error scale for `panel`.
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
    },
    /// Expanding-window R² and mean-variance factor portfolio.
    Backtest {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        initial_train: Option<usize>,
        #[arg(long)]
        refit_every: Option<usize>,
        /// CSV with a per-period risk-free rate (time label, value).
        #[arg(long)]
        risk_free: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Study {
    /// Standardized loadings, factors and common components.
    Fig1,
    /// Null distribution of the change statistic.
    Fig3,
    #[value(name = "tableI")]
    TableI,
    #[value(name = "tableAI")]
    TableAi,
    #[value(name = "figA1")]
    FigA1,
    /// One synthetic panel with its state column.
    Panel,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    Cubic,
    Constant,
    BreakLinear,
    BreakQuadratic,
}

impl Family {
    fn model(self) -> LoadingModel {
        match self {
            Family::Cubic => LoadingModel::Cubic,
            Family::Constant => LoadingModel::Constant,
            Family::BreakLinear => LoadingModel::BreakLinear { s0: 0.3 },
            Family::BreakQuadratic => LoadingModel::BreakQuadratic { s0: 0.3 },
        }
    }
}

/// Whether the kernel was chosen anywhere on the command line or in the config file.
fn kernel_given(cli: &Cli, config_text: &str) -> bool {
    let is_kernel = |k: &str| k.trim().replace('-', "_") == "kernel";
    cli.kernel.is_some()
        || cli.sets.iter().any(|kv| kv.split_once('=').is_some_and(|(k, _)| is_kernel(k)))
        || config_text.lines().any(|l| l.split('#').next().and_then(|l| l.split_once('=')).is_some_and(|(k, _)| is_kernel(k)))
}

fn build_config(cli: &Cli) -> Result<(RunConfig, bool)> {
    let mut cfg = RunConfig::default();
    let mut text = String::new();
    if let Some(p) = &cli.config {
        text = std::fs::read_to_string(p)?;
        cfg.merge_str(&text)?;
    }
    let mut set = |k: &str, v: Option<String>| -> Result<()> {
        match v {
            Some(v) => cfg.set(k, &v),
            None => Ok(()),
        }
    };
    set("kernel", cli.kernel.clone())?;
    set("h", cli.h.map(|v| v.to_string()))?;
    set("r", cli.r.map(|v| v.to_string()))?;
    set("seed", cli.seed.map(|v| v.to_string()))?;
    set("format", cli.format.clone())?;
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    for kv in &cli.sets {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v)?;
    }
    let explicit = kernel_given(cli, &text);
    Ok((cfg, explicit))
}

fn load_data(args: &DataArgs, cfg: &mut RunConfig) -> Result<(PanelData, StateSeries)> {
    if let Some(l) = &args.layout {
        cfg.set("layout", l)?;
    }
    if let Some(t) = &args.state_transform {
        cfg.set("state_transform", t)?;
    }
    if let Some(c) = &args.state_column {
        cfg.set("state_column", c)?;
    }
    cfg.validate()?;
    let inline = if args.state_file.is_some() { None } else { cfg.state_column.as_deref() };
    let (panel, state) = load_panel_csv(&args.data, cfg.layout, inline, cfg.state_transform)?;
    let state = match (&args.state_file, state) {
        (Some(p), _) => load_state_csv(p, cfg.state_column.as_deref(), cfg.state_transform)?,
        (None, Some(s)) => s,
        (None, None) => {
            return Err(Error::Config("no state: pass --state-column or --state-file".into()));
        }
    };
    align_state(&panel, &state)?;
    Ok((panel, state))
}

fn out_path(cfg: &RunConfig, stem: &str) -> PathBuf {
    let ext = if cfg.format == crate::io::Format::Json { "json" } else { "csv" };
    cfg.output_dir.join(format!("{stem}.{ext}"))
}

fn emit(cfg: &RunConfig, stem: &str, table: &Table) -> Result<PathBuf> {
    let p = out_path(cfg, stem);
    write_report(table, cfg.format, &p)?;
    log::info!("wrote {}", p.display());
    Ok(p)
}

fn numbered(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("{prefix}{j}")).collect()
}

fn run_fit(cfg: &RunConfig, panel: &PanelData, state: &StateSeries, s: f64) -> Result<()> {
    let fit = fit_conditional(&panel.values, &state.values, s, cfg.h, cfg.r, &cfg.fit_options())?;
    emit(cfg, "loadings", &Table::from_matrix("series", &panel.series_ids, "lambda", &fit.loadings)?)?;
    let unproj = unprojected_factors(&fit, cfg.floor_rel * fit.weights.max_weight());
    let mut cols = vec!["time".to_string(), "weight".to_string()];
    cols.extend(numbered("projected", cfg.r));
    cols.extend(numbered("factor", cfg.r));
    let mut t = Table::new(cols);
    for k in 0..panel.time_ids.len() {
        let mut row = vec![Cell::Text(panel.time_ids[k].clone()), Cell::Num(fit.weights.weights[k])];
        row.extend(fit.projected_factors.row(k).iter().map(|&v| Cell::Num(v)));
        row.extend(unproj.values.row(k).iter().map(|&v| Cell::Num(v)));
        t.push(row)?;
    }
    emit(cfg, "factors", &t)?;
    let shares = fit.variance_shares();
    let mut e = Table::new(["k", "eigenvalue", "variance_share"]);
    for j in 0..cfg.r {
        e.push(vec![Cell::from(j + 1), Cell::Num(fit.eigenvalues[j]), Cell::Num(shares[j])])?;
    }
    emit(cfg, "eigenvalues", &e)?;
    let mut m = Table::new(["s", "h", "r", "kernel", "effective_size", "repeated_eigenvalue"]);
    m.push(vec![
        Cell::Num(s),
        Cell::Num(cfg.h),
        Cell::from(cfg.r),
        Cell::from(cfg.kernel.to_string()),
        Cell::Num(fit.effective_size),
        Cell::from(fit.repeated_eigenvalue.to_string()),
    ])?;
    emit(cfg, "fit_summary", &m)?;
    Ok(())
}

/// Flips each column so consecutive grid points agree in sign.
fn align_signs(prev: Option<&DMatrix<f64>>, cur: &mut DMatrix<f64>) {
    if let Some(p) = prev {
        for j in 0..cur.ncols() {
            if p.column(j).dot(&cur.column(j)) < 0.0 {
                cur.column_mut(j).neg_mut();
            }
        }
    }
}

fn run_sweep(cfg: &RunConfig, panel: &PanelData, state: &StateSeries) -> Result<()> {
    let grid = cfg.grid.values();
    let sweep = state_sweep(&panel.values, &state.values, &grid, cfg.h, cfg.r, &cfg.fit_options())?;
    let mut cols = vec!["series".to_string(), "s".to_string()];
    cols.extend(numbered("lambda", cfg.r));
    let mut curves = Table::new(cols);
    let mut prev: Option<DMatrix<f64>> = None;
    for p in &sweep {
        match &p.fit {
            Ok(f) => {
                let mut l = f.loadings.clone();
                align_signs(prev.as_ref(), &mut l);
                for (i, id) in panel.series_ids.iter().enumerate() {
                    let mut row = vec![Cell::Text(id.clone()), Cell::Num(p.s)];
                    row.extend(l.row(i).iter().map(|&v| Cell::Num(v)));
                    curves.push(row)?;
                }
                prev = Some(l);
            }
            Err(e) => log::warn!("state {}: {e}", p.s),
        }
    }
    emit(cfg, "loading_curves", &curves)?;
    let mut cols = vec!["s".to_string(), "effective_size".to_string()];
    cols.extend(numbered("share", cfg.r));
    let mut shares = Table::new(cols);
    for (c, p) in variance_explained_shares(&sweep).iter().zip(&sweep) {
        let mut row = vec![Cell::Num(c.s), Cell::Num(p.fit.as_ref().map(|f| f.effective_size).unwrap_or(f64::NAN))];
        match &c.shares {
            Some(v) => row.extend(v.iter().map(|&x| Cell::Num(x))),
            None => row.extend((0..cfg.r).map(|_| Cell::Num(f64::NAN))),
        }
        shares.push(row)?;
    }
    emit(cfg, "variance_shares", &shares)?;
    Ok(())
}

fn run_test(cfg: &RunConfig, panel: &PanelData, state: &StateSeries, pair: Option<(f64, f64)>, grid: bool) -> Result<()> {
    let sets = cfg.sparsity.sets();
    let opts = cfg.fit_options();
    if grid {
        let g = cfg.grid.values();
        let res = pairwise_test_grid(&panel.values, &state.values, &g, cfg.h, cfg.r, &opts, &sets)?;
        emit(cfg, "gc_statistic", &Table::heatmap(&g, &res.statistic)?)?;
        emit(cfg, "gc_pvalue", &Table::heatmap(&g, &res.p_value)?)?;
        let mut errs = Table::new(["s1", "s2", "kind", "message"]);
        for e in &res.errors {
            errs.push(vec![Cell::Num(g[e.row]), Cell::Num(g[e.column]), Cell::from(e.kind.clone()), Cell::from(e.message.clone())])?;
        }
        emit(cfg, "gc_errors", &errs)?;
        return Ok(());
    }
    let (s1, s2) = pair.ok_or_else(|| Error::Config("test needs --s1 and --s2, or --grid".into()))?;
    let f1 = fit_conditional(&panel.values, &state.values, s1, cfg.h, cfg.r, &opts)?;
    let f2 = fit_conditional(&panel.values, &state.values, s2, cfg.h, cfg.r, &opts)?;
    let g = gc_test(&f1, &f2, &sets)?;
    let mut t = Table::new(["s1", "s2", "rho_hat", "r", "bias", "variance", "statistic", "p_value"]);
    t.push(vec![
        Cell::Num(s1),
        Cell::Num(s2),
        Cell::Num(g.rho_hat),
        Cell::from(g.r),
        Cell::Num(g.bias),
        Cell::Num(g.variance),
        Cell::Num(g.statistic),
        Cell::Num(g.p_value),
    ])?;
    emit(cfg, "gc_test", &t)?;
    Ok(())
}

fn summary_table(studies: &[crate::simlab::DistributionStudy]) -> Result<Table> {
    let mut t = Table::new(["target", "reps", "mean", "variance", "ks", "failures"]);
    for d in studies {
        t.push(vec![
            Cell::from(d.target.clone()),
            Cell::from(d.samples.len()),
            Cell::Num(d.mean),
            Cell::Num(d.variance),
            Cell::Num(d.ks),
            Cell::from(d.failures),
        ])?;
    }
    Ok(t)
}

#[allow(clippy::too_many_arguments)]
fn run_simulate(
    cfg: &RunConfig,
    opts: &FitOptions,
    study: Study,
    reps: Option<usize>,
    n: Option<usize>,
    t: Option<usize>,
    family: Family,
    noise: f64,
) -> Result<()> {
    let reps = reps.or(cfg.reps);
    let opts = opts.clone();
    match study {
        Study::Fig1 => {
            let mut dgp = DgpConfig::cubic(n.unwrap_or(100), t.unwrap_or(500), cfg.seed);
            dgp.r = cfg.r;
            let mut spec = DistributionSpec::new(0.5, cfg.h, reps.unwrap_or(2000));
            spec.opts = opts.clone();
            spec.sets = cfg.sparsity.sets();
            let studies = mc_estimator_study(&dgp, &spec)?;
            let mut samples = Table::new(["target", "index", "value"]);
            for d in &studies {
                for (k, v) in d.samples.iter().enumerate() {
                    samples.push(vec![Cell::from(d.target.clone()), Cell::from(k), Cell::Num(*v)])?;
                }
            }
            emit(cfg, "fig1_samples", &samples)?;
            emit(cfg, "fig1_summary", &summary_table(&studies)?)?;
        }
        Study::Fig3 => {
            let mut dgp = DgpConfig::cubic(n.unwrap_or(100), t.unwrap_or(500), cfg.seed);
            dgp.loading_model = LoadingModel::Constant;
            dgp.r = cfg.r;
            let mut spec = DistributionSpec::new(0.5, cfg.h, reps.unwrap_or(2000));
            spec.opts = opts.clone();
            spec.sets = cfg.sparsity.sets();
            spec.hold_fixed = true;
            let d = mc_distribution_study(&dgp, &spec, Target::GcNull { s1: 0.4, s2: 0.6 })?;
            let mut samples = Table::new(["index", "statistic"]);
            for (k, v) in d.samples.iter().enumerate() {
                samples.push(vec![Cell::from(k), Cell::Num(*v)])?;
            }
            emit(cfg, "fig3_samples", &samples)?;
            emit(cfg, "fig3_summary", &summary_table(std::slice::from_ref(&d))?)?;
        }
        Study::TableI => {
            let mut spec = PowerSpec::standard(reps.unwrap_or(500), cfg.seed);
            spec.opts = opts.clone();
            spec.h = cfg.h;
            spec.sets = cfg.sparsity.sets();
            let table = mc_power_study(&spec)?;
            let mut cols = vec!["(N,T)".to_string()];
            for f in &table.families {
                for (a, b) in &table.pairs {
                    cols.push(format!("{} ({a},{b})", f.name()));
                }
            }
            let mut out = Table::new(cols);
            for (k, (nn, tt)) in table.sizes.iter().enumerate() {
                let mut row = vec![Cell::from(format!("({nn},{tt})"))];
                row.extend(table.acceptance.row(k).iter().map(|&v| Cell::Num(v)));
                out.push(row)?;
            }
            emit(cfg, "table_i", &out)?;
        }
        Study::TableAi => {
            let mut spec = RsqSpec::standard(reps.unwrap_or(20), cfg.seed);
            spec.opts = opts.clone();
            spec.h = cfg.h;
            spec.r = cfg.r;
            if let Some(n) = n {
                spec.n = n;
            }
            if let Some(t) = t {
                spec.t = t;
            }
            let rows = crate::simlab::mc_rsq_study(&spec)?;
            let mut out = Table::new(["model", "in_rsq_x", "in_rsq_c", "out_rsq_x", "out_rsq_c"]);
            for r in rows {
                out.push(vec![Cell::from(r.label), Cell::Num(r.in_x), Cell::Num(r.in_c), Cell::Num(r.out_x), Cell::Num(r.out_c)])?;
            }
            emit(cfg, "table_a1", &out)?;
        }
        Study::FigA1 => {
            let mut spec = CurveSpec::standard(reps.unwrap_or(20), cfg.seed);
            spec.opts = opts.clone();
            spec.h = cfg.h;
            if let Some(n) = n {
                spec.n = n;
            }
            if let Some(t) = t {
                spec.t = t;
            }
            let curves = mc_factor_count_curves(&spec)?;
            let mut out = Table::new(["seed", "k", "state_rsq_x", "state_rsq_c", "pca_rsq_x", "pca_rsq_c"]);
            for (s, c) in curves.iter().enumerate() {
                for p in c {
                    out.push(vec![
                        Cell::from(s),
                        Cell::from(p.k),
                        Cell::Num(p.state_x),
                        Cell::Num(p.state_c),
                        Cell::Num(p.pca_x),
                        Cell::Num(p.pca_c),
                    ])?;
                }
            }
            emit(cfg, "fig_a1", &out)?;
        }
        Study::Panel => {
            let mut dgp = DgpConfig::cubic(n.unwrap_or(100), t.unwrap_or(500), cfg.seed);
            dgp.r = cfg.r;
            dgp.loading_model = family.model();
            dgp.error_scale = noise;
            if matches!(family, Family::BreakLinear | Family::BreakQuadratic) {
                dgp.state_model = StateModel::Uniform01;
            }
            let sim = generate_panel(&dgp)?;
            let panel = PanelData::unlabeled(sim.x.clone());
            let state = StateSeries {
                values: sim.states.clone(),
                id: "state".into(),
                transform: crate::io::StateTransform::None,
            };
            let p = cfg.output_dir.join("panel.csv");
            std::fs::create_dir_all(&cfg.output_dir)?;
            write_panel_csv(&panel, Some(&state), crate::io::Layout::RowsAreTime, &p)?;
            log::info!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn run_backtest(
    cfg: &RunConfig,
    panel: &PanelData,
    state: &StateSeries,
    risk_free: Option<&Path>,
) -> Result<()> {
    let t = panel.time_ids.len();
    let initial = cfg.initial_train.unwrap_or(t / 2);
    let rf = match risk_free {
        Some(p) => {
            let s = load_state_csv(p, None, crate::io::StateTransform::None)?;
            if s.values.len() != t {
                return Err(Error::MisalignedState(format!("risk-free has {} periods, panel has {t}", s.values.len())));
            }
            Some(s.values)
        }
        None => None,
    };
    let sources = [
        ("state", LoadingSource::StateVarying { h: cfg.h, opts: cfg.fit_options() }),
        ("constant", LoadingSource::Constant),
    ];
    let mut summary =
        Table::new(["model", "rsq_x", "excluded_times", "sharpe", "ridge_periods", "risk_free_supplied", "failed_times"]);
    let mut returns = Table::new(["model", "time", "return"]);
    for (name, source) in sources {
        let bc = BacktestConfig { initial_train: initial, refit_every: cfg.refit_every, r: cfg.r, source };
        let bt = expanding_backtest(&panel.values, &state.values, &bc)?;
        let pcfg = PortfolioConfig {
            risk_free: rf.clone(),
            periods_per_year: cfg.periods_per_year,
            normalization: WeightNormalization::UnitGross,
        };
        let pf = mv_factor_portfolio(&panel.values, &state.values, &bc, &pcfg)?;
        for (k, r) in pf.times.iter().zip(&pf.returns) {
            returns.push(vec![Cell::from(name), Cell::from(panel.time_ids[*k].clone()), Cell::Num(*r)])?;
        }
        summary.push(vec![
            Cell::from(name),
            Cell::Num(bt.rsq.rsq_x),
            Cell::from(bt.rsq.excluded_times),
            Cell::Num(pf.sharpe),
            Cell::from(pf.ridge_periods),
            Cell::from(pf.risk_free_supplied.to_string()),
            Cell::from(pf.failed_times.len()),
        ])?;
    }
    emit(cfg, "backtest_summary", &summary)?;
    emit(cfg, "portfolio_returns", &returns)?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    let (mut cfg, kernel_explicit) = build_config(&cli)?;
    cfg.validate()?;
    match cli.command {
        Command::Fit { data, state } => {
            let (panel, st) = load_data(&data, &mut cfg)?;
            run_fit(&cfg, &panel, &st, state)
        }
        Command::Sweep { data, grid } => {
            if let Some(g) = grid {
                cfg.set("grid", &g)?;
            }
            let (panel, st) = load_data(&data, &mut cfg)?;
            run_sweep(&cfg, &panel, &st)
        }
        Command::Test { data, s1, s2, grid } => {
            let use_grid = grid.is_some();
            if let Some(g) = grid {
                cfg.set("grid", &g)?;
            }
            let pair = match (s1, s2) {
                (Some(a), Some(b)) => Some((a, b)),
                (None, None) => None,
                _ => return Err(Error::Config("--s1 and --s2 go together".into())),
            };
            let (panel, st) = load_data(&data, &mut cfg)?;
            run_test(&cfg, &panel, &st, pair, use_grid)
        }
        Command::Simulate { study, reps, n, t, loading, noise } => {
            let mut opts = cfg.fit_options();
            if !kernel_explicit {
                opts.kernel = study_fit_options().kernel;
            }
            run_simulate(&cfg, &opts, study, reps, n, t, loading, noise)
        }
        Command::Backtest { data, initial_train, refit_every, risk_free } => {
            if let Some(v) = initial_train {
                cfg.initial_train = Some(v);
            }
            if let Some(v) = refit_every {
                cfg.set("refit_every", &v.to_string())?;
            }
            cfg.validate()?;
            let (panel, st) = load_data(&data, &mut cfg)?;
            run_backtest(&cfg, &panel, &st, risk_free.as_deref())
        }
    }
}

/// Machine-readable error line written to stderr.
pub fn error_record(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() }).to_string()
}

/// Runs one command line and returns the process exit status.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            if code == 0 {
                let _ = e.print();
            } else {
                let rec = serde_json::json!({ "error": "Usage", "message": e.to_string(), "exit_code": 1 });
                eprintln!("{rec}");
            }
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_record(&e));
            e.exit_code()
        }
    }
}
