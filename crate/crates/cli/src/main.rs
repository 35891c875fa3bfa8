//! `spdc`: brightness, heralding and correlation calculations for one SPDC
//! source design described by a configuration file.

mod output;

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spdc_core::config::{bundled_config, load_run_config, parse_run_config, OutputFormat, Poling, RunConfig};
use spdc_core::filters::{correlation_shape, symmetric_grid, FilterSpec};
use spdc_core::optimizer::{optimize_focus_with, sweep, FocusBounds, OptimizeOptions, SweepAxis, SweepParam};
use spdc_core::overlap::DEFAULT_QUAD_TOL;
use spdc_core::quantities::solve_poling_period;
use spdc_core::quantum::correlation_amplitude_sq;
use spdc_core::source::{evaluate, evaluate_pairs, EvalOptions};
use spdc_core::{validation, Error, Result};

use output::{Report, Row, Value};

#[derive(Parser, Debug)]
#[command(
    name = "spdc",
    version,
    about = "Absolute pair rates, heralding efficiency and correlation times of SPDC sources"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Configuration file, or the name of a bundled design (ppktp_800_typeII).
    #[arg(long, global = true)]
    config: Option<String>,
    /// Output format; defaults to the config's `format` key, then table.
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Worker threads for sweeps, optimization and validation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Relative tolerance of the overlap quadratures.
    #[arg(long, global = true, default_value_t = DEFAULT_QUAD_TOL)]
    quad_tol: f64,
    /// Highest radial order of the mode sum used for singles.
    #[arg(long, global = true, default_value_t = spdc_core::modebasis::DEFAULT_BASIS_ORDER)]
    basis_order: usize,
    /// Solve the poling period for zero residual mismatch (kappa = 0).
    #[arg(long, global = true)]
    auto_qpm: bool,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Format {
    Table,
    Csv,
    Ndjson,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Table => OutputFormat::Table,
            Format::Csv => OutputFormat::Csv,
            Format::Ndjson => OutputFormat::Ndjson,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum, PartialEq)]
enum Objective {
    /// ζ_R|Υ(κ, ζ_R, −R_k)|², proportional to the real pair rate.
    Physical,
    /// ζ_R|Υ(κ, ζ_R, R_k)|² with Υ exactly as defined.
    Defined,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Overlap Υ, I_SFG and the classical efficiency Q_SFG (Q_SHG when degenerate).
    Sfg,
    /// Effective linewidth and coincidence rate W⁽²⁾.
    Pairs,
    /// Singles rates and heralding efficiencies of both arms.
    Singles,
    /// Signal–idler correlation f(τ) and the coincidence density W⁽²⁾(τ).
    Correlation {
        /// Half-width of the delay window in seconds (default 10/Γ_eff).
        #[arg(long)]
        span: Option<f64>,
        /// Number of delays (raised if needed to resolve the widest filter).
        #[arg(long, default_value_t = 2001)]
        points: usize,
    },
    /// Maximize brightness over (κ, ζ_R) at the configuration's R_k.
    Optimize {
        /// R_k to use when no configuration is given.
        #[arg(long, allow_hyphen_values = true)]
        r_k: Option<f64>,
        #[arg(long, value_enum, default_value_t = Objective::Physical)]
        objective: Objective,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = OptimizeOptions::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = OptimizeOptions::default().restarts)]
        restarts: usize,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_hyphen_values = true)]
        kappa_range: Option<Vec<f64>>,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        zeta_range: Option<Vec<f64>>,
        /// Print every objective evaluation instead of the summary.
        #[arg(long)]
        trace: bool,
    },
    /// Evaluate the full pipeline over one or two parameter axes.
    Sweep {
        /// Axis as `name=start:stop:count [unit]` or `name=value [unit]`;
        /// names: kappa, zeta_R, R_k, z_R, gamma_s, gamma_i, P_p.
        #[arg(long = "sweep", required = true, allow_hyphen_values = true)]
        axes: Vec<String>,
    },
    /// Run the independent oracles and print the comparison table.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let requested = cli.common.format.map(OutputFormat::from);
    match run(&cli) {
        Ok((text, format_ok)) => {
            // A closed pipe (`| head`) is not an error worth a panic.
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            if format_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            report_error(&e, requested);
            ExitCode::from(if matches!(e, Error::Config(_) | Error::Parse { .. } | Error::UnknownUnit(_)) {
                2
            } else {
                1
            })
        }
    }
}

/// One machine-readable line on stderr.
fn report_error(e: &Error, format: Option<OutputFormat>) {
    let msg = e.to_string();
    match format {
        Some(OutputFormat::Ndjson) => {
            eprintln!("{{\"error\":{{\"kind\":{},\"message\":{}}}}}", json(e.kind()), json(&msg));
        }
        _ => eprintln!("error\tkind={}\tmessage={}", e.kind(), msg.replace(['\n', '\t'], " ")),
    }
}

fn json(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn load(common: &Common) -> Result<Option<RunConfig>> {
    let Some(name) = &common.config else { return Ok(None) };
    let path = Path::new(name);
    if path.exists() {
        return load_run_config(path, common.auto_qpm).map(Some);
    }
    match bundled_config(name) {
        Some(text) => parse_run_config(text, None, common.auto_qpm).map(Some),
        None => Err(Error::Io(format!("{name}: no such file or bundled configuration"))),
    }
}

fn require(cfg: Option<RunConfig>) -> Result<RunConfig> {
    cfg.ok_or_else(|| Error::InvalidInput("this command needs --config".into()))
}

/// Returns the rendered output and whether the command succeeded in full
/// (validate reports failing oracles through the exit code).
fn run(cli: &Cli) -> Result<(String, bool)> {
    let c = &cli.common;
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("--threads {n}: {e}")))?;
    }
    let cfg = load(c)?;
    let format =
        c.format.map(OutputFormat::from).or(cfg.as_ref().and_then(|r| r.format)).unwrap_or(OutputFormat::Table);
    let opts = EvalOptions { quad_tol: c.quad_tol, basis_order: c.basis_order, ..Default::default() };

    let mut ok = true;
    let report = match &cli.command {
        Command::Sfg => cmd_sfg(&require(cfg)?, &opts)?,
        Command::Pairs => cmd_pairs(&require(cfg)?, &opts)?,
        Command::Singles => cmd_singles(&require(cfg)?, &opts)?,
        Command::Correlation { span, points } => cmd_correlation(&require(cfg)?, &opts, *span, *points)?,
        Command::Optimize { r_k, objective, tol, seed, restarts, kappa_range, zeta_range, trace } => {
            let mut bounds = FocusBounds::default();
            if let Some(k) = kappa_range {
                bounds.kappa = (k[0], k[1]);
            }
            if let Some(z) = zeta_range {
                bounds.zeta_r = (z[0], z[1]);
            }
            let oo = OptimizeOptions { tol: *tol, seed: *seed, restarts: *restarts, ..Default::default() };
            cmd_optimize(cfg.as_ref(), *r_k, *objective, bounds, &oo, *trace)?
        }
        Command::Sweep { axes } => cmd_sweep(&require(cfg)?, &opts, axes)?,
        Command::Validate => {
            let (r, pass) = cmd_validate()?;
            ok = pass;
            r
        }
    };
    Ok((report.render(format), ok))
}

fn base_report(command: &'static str, cfg: &RunConfig, opts: &EvalOptions) -> Report {
    let poling = match cfg.poling {
        Poling::Period(_) => "period".to_string(),
        Poling::AutoQpm => "auto_qpm".to_string(),
        Poling::Kappa(k) => format!("kappa {k}"),
    };
    Report::new(command).meta("config", &cfg.source.name).meta("poling", poling).meta_num("quad_tol", opts.quad_tol)
}

fn efficiency_name(cfg: &RunConfig) -> &'static str {
    if cfg.source.waves.is_degenerate() {
        "q_shg_per_W"
    } else {
        "q_sfg_per_W"
    }
}

fn cmd_sfg(cfg: &RunConfig, opts: &EvalOptions) -> Result<Report> {
    let p = evaluate_pairs(&cfg.source, opts.quad_tol)?;
    let f = p.focus;
    let row: Row = vec![
        ("kappa", f.kappa.into()),
        ("zeta_R", f.zeta_r.into()),
        ("R_k", f.r_k.into()),
        ("z_R_m", f.rayleigh_range.into()),
        ("poling_period_m", cfg.source.crystal.poling_period().into()),
        ("upsilon_re", p.upsilon.value.re.into()),
        ("upsilon_im", p.upsilon.value.im.into()),
        ("upsilon_abs_sq", p.upsilon.abs_sq.into()),
        ("i_sfg_re", p.i_sfg.value.re.into()),
        ("i_sfg_im", p.i_sfg.value.im.into()),
        ("i_sfg_abs_sq", p.i_sfg.abs_sq().into()),
        (efficiency_name(cfg), p.efficiency.into()),
    ];
    let mut r = base_report("sfg", cfg, opts);
    r.rows.push(row);
    Ok(r)
}

fn cmd_pairs(cfg: &RunConfig, opts: &EvalOptions) -> Result<Report> {
    let p = evaluate_pairs(&cfg.source, opts.quad_tol)?;
    let row: Row = vec![
        ("gamma_eff_rad_s", p.gamma_eff.into()),
        ("gamma_eff_MHz", (p.gamma_eff / (2.0 * PI * 1e6)).into()),
        ("pump_power_W", cfg.source.pump_power.into()),
        (efficiency_name(cfg), p.efficiency.into()),
        ("pair_rate_per_s", p.pair_rate.into()),
        ("pairs_per_s_mW_MHz", p.pair_brightness.into()),
        ("narrowband_warning", p.narrowband_warning.into()),
    ];
    let mut r = base_report("pairs", cfg, opts);
    r.rows.push(row);
    Ok(r)
}

fn cmd_singles(cfg: &RunConfig, opts: &EvalOptions) -> Result<Report> {
    let s = evaluate(&cfg.source, opts)?;
    let e = &s.efficiencies;
    let row: Row = vec![
        ("pair_rate_per_s", s.pair_rate.into()),
        ("singles_signal_per_s", s.singles_rate_signal.into()),
        ("singles_idler_per_s", s.singles_rate_idler.into()),
        ("eta_s", s.eta_signal.into()),
        ("eta_i", s.eta_idler.into()),
        ("gamma_eff_rad_s", s.gamma_eff.into()),
        ("gamma_eff_s_rad_s", s.gamma_eff_s.into()),
        ("gamma_eff_i_rad_s", s.gamma_eff_i.into()),
        ("i_sfg_abs_sq", e.i_sfg_sq.into()),
        ("i_dfg_sq_signal", e.i_dfg_sq_signal.into()),
        ("i_dfg_sq_idler", e.i_dfg_sq_idler.into()),
        ("mode_sum_tail_signal", s.mode_sum_tail_signal.into()),
        ("mode_sum_tail_idler", s.mode_sum_tail_idler.into()),
        ("narrowband_warning", s.narrowband_warning.into()),
    ];
    let mut r = base_report("singles", cfg, opts).meta("basis_order", opts.basis_order);
    r.rows.push(row);
    Ok(r)
}

fn cmd_correlation(cfg: &RunConfig, opts: &EvalOptions, span: Option<f64>, points: usize) -> Result<Report> {
    let src = &cfg.source;
    let p = evaluate_pairs(src, opts.quad_tol)?;
    let span = span.unwrap_or(10.0 / p.gamma_eff);
    if !(span.is_finite() && span > 0.0) {
        return Err(Error::InvalidInput(format!("--span must be positive, got {span}")));
    }
    // Keep the step below π/Γ for the widest Lorentzian.
    let g_max = [&src.filter_signal, &src.filter_idler]
        .iter()
        .filter_map(|f| match f {
            FilterSpec::Lorentzian { gamma } => Some(*gamma),
            _ => None,
        })
        .fold(0.0, f64::max);
    let needed = (2.0 * span * g_max / PI * 4.0).ceil() as usize + 1;
    let n = points.max(needed);
    if n > 2_000_000 {
        return Err(Error::InvalidInput(format!("{n} delays needed to resolve the filters; narrow --span")));
    }
    let amp = correlation_amplitude_sq(&src.waves, src.pump_power, p.efficiency)?;
    let trace = correlation_shape(&src.filter_signal, &src.filter_idler, &symmetric_grid(span, n))?
        .with_rate_prefactor(amp.density_prefactor);
    let density = trace.pair_density.clone().unwrap_or_default();
    let mut r = base_report("correlation", cfg, opts)
        .meta_num("gamma_eff_rad_s", p.gamma_eff)
        .meta_num("gamma_eff_from_grid_rad_s", trace.gamma_eff_from_grid())
        .meta("fwhm_s", trace.fwhm().map_or("none".to_string(), |w| format!("{w:e}")))
        .meta_num("amplitude_sq", amp.amplitude_sq)
        .meta_num("pair_rate_per_s", p.pair_rate);
    r.rows = trace
        .tau
        .iter()
        .zip(&trace.f)
        .zip(&density)
        .map(|((t, f), w)| {
            vec![
                ("tau_s", (*t).into()),
                ("f_re_per_s", f.re.into()),
                ("f_im_per_s", f.im.into()),
                ("f_abs_sq_per_s2", f.norm_sqr().into()),
                ("w2_per_s2", (*w).into()),
            ]
        })
        .collect();
    Ok(r)
}

fn cmd_optimize(
    cfg: Option<&RunConfig>,
    r_k: Option<f64>,
    objective: Objective,
    bounds: FocusBounds,
    oo: &OptimizeOptions,
    trace: bool,
) -> Result<Report> {
    let r_k = match (cfg, r_k) {
        (_, Some(v)) => v,
        (Some(c), None) => c.source.focus_params()?.r_k,
        (None, None) => return Err(Error::InvalidInput("optimize needs --config or --r-k".into())),
    };
    // The overlap that sets the pair rate carries −R_k.
    let arg = if objective == Objective::Physical { -r_k } else { r_k };
    let res = optimize_focus_with(arg, bounds, oo)?;
    let mut r = Report::new("optimize")
        .meta("config", cfg.map_or("none", |c| c.source.name.as_str()))
        .meta("objective", format!("{objective:?}").to_lowercase())
        .meta_num("R_k", r_k)
        .meta_num("tol", oo.tol)
        .meta("seed", oo.seed);
    if trace {
        r.rows = res
            .trace
            .iter()
            .enumerate()
            .map(|(j, (k, z, o))| {
                vec![("eval", j.into()), ("kappa", (*k).into()), ("zeta_R", (*z).into()), ("objective", (*o).into())]
            })
            .collect();
        return Ok(r);
    }
    let mut row: Row = vec![
        ("best_kappa", res.best_kappa.into()),
        ("best_zeta_R", res.best_zeta_r.into()),
        ("best_objective", res.best_objective.into()),
        ("evaluations", res.evaluations.into()),
        ("converged", res.converged.into()),
    ];
    if let Some(c) = cfg {
        let l = c.source.crystal.length();
        row.push(("z_R_m", (res.best_zeta_r * l).into()));
        row.push(("poling_period_m", solve_poling_period(&c.source.waves, l, res.best_kappa).ok().into()));
    }
    r.rows.push(row);
    Ok(r)
}

fn column_name(p: SweepParam) -> &'static str {
    match p {
        SweepParam::Kappa => "kappa",
        SweepParam::ZetaR => "zeta_R",
        SweepParam::Rk => "R_k",
        SweepParam::RayleighRange => "z_R_m",
        SweepParam::GammaS => "gamma_s_rad_s",
        SweepParam::GammaI => "gamma_i_rad_s",
        SweepParam::PumpPower => "P_p_W",
    }
}

fn cmd_sweep(cfg: &RunConfig, opts: &EvalOptions, axes: &[String]) -> Result<Report> {
    let axes = axes.iter().map(|a| SweepAxis::parse(a)).collect::<Result<Vec<_>>>()?;
    let rows = sweep(&cfg.source, &axes, opts)?;
    let mut r = base_report("sweep", cfg, opts).meta("basis_order", opts.basis_order);
    for a in &axes {
        r = r.meta(format!("axis {}", a.param), format!("{} points", a.values.len()));
    }
    r.rows = rows
        .into_iter()
        .map(|row| {
            let mut out: Row = row.point.iter().map(|(p, v)| (column_name(*p), Value::Num(*v))).collect();
            let s = row.report.as_ref();
            let e = s.map(|s| &s.efficiencies);
            out.extend([
                ("pair_rate_per_s", s.map(|s| s.pair_rate).into()),
                ("pairs_per_s_mW_MHz", s.map(|s| s.pair_brightness).into()),
                ("gamma_eff_rad_s", s.map(|s| s.gamma_eff).into()),
                ("pair_efficiency_per_W", e.and_then(|e| e.q_sfg.or(e.q_shg)).into()),
                ("singles_signal_per_s", s.and_then(|s| s.singles_rate_signal).into()),
                ("singles_idler_per_s", s.and_then(|s| s.singles_rate_idler).into()),
                ("eta_s", s.and_then(|s| s.eta_signal).into()),
                ("eta_i", s.and_then(|s| s.eta_idler).into()),
                ("error", row.error.map_or(Value::Missing, Value::Text)),
            ]);
            out
        })
        .collect();
    Ok(r)
}

fn cmd_validate() -> Result<(Report, bool)> {
    let reports = validation::run_all()?;
    let pass = reports.iter().all(|r| r.pass);
    let mut r = Report::new("validate")
        .meta("passed", format!("{}/{}", reports.iter().filter(|r| r.pass).count(), reports.len()));
    r.rows = reports
        .into_iter()
        .map(|o| {
            vec![
                ("quantity", o.quantity.into()),
                ("main_value", o.main_value.into()),
                ("oracle_value", o.oracle_value.into()),
                ("relative_diff", o.relative_diff.into()),
                ("tolerance", o.tolerance.into()),
                ("pass", o.pass.into()),
            ]
        })
        .collect();
    Ok((r, pass))
}
