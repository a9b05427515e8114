//! `xkerr`: steady states, spectra, reflectivity, stochastic simulation and
//! reduction checks for the cross-Kerr parametric system.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid configuration or
//! arguments, 3 numerical failure, 4 failed verification.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use xkerr_core::error::Error as CoreError;
use xkerr_core::exec::Exec;
use xkerr_core::grid::FrequencyGrid;
use xkerr_core::linalg::max_abs;
use xkerr_core::noise_theory::{bound_table, mc_higher_power_dc_concentration};
use xkerr_core::operator_algebra::{
    build_blocks, classical_pump_v, solve_uv_general, solve_v_closed, verify_reduction,
};
use xkerr_core::params::{NormalizedParams, ParamsFile};
use xkerr_core::spectra::{
    build_variation, intracavity_psd, linearized_reflectivity, linearized_spectrum, recover_sbb, reflectivity, sdd,
    sdd_convolved, symmetrize,
};
use xkerr_core::steady_state::{nonlinearity_measure, solve_pump, steady_state_at, SteadyState, THRESHOLD_MARGIN};
use xkerr_core::time_domain::{ensemble, estimate_psd, simulate_psd, StepConfig};

#[derive(Debug, Error)]
enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(CoreError),
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter(m) | CoreError::Grid(m) => CliError::Config(m),
            e => CliError::Numerical(e),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Verify(_) => 4,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Scheme {
    HigherOrder,
    Linearized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "xkerr", version, about = "Cross-Kerr parametric amplifier toolkit")]
struct Cli {
    /// TOML parameter file; the built-in example set when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Scheme::HigherOrder)]
    scheme: Scheme,
    /// Normalized frequency range `A B`.
    #[arg(long, global = true, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    grid_range: Option<Vec<f64>>,
    #[arg(long, global = true, default_value_t = 100_000)]
    grid_points: usize,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Defaults to csv for grids and json for single records.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
enum Command {
    /// Mean-field steady state at the configured pump power.
    SteadyState(PumpArgs),
    /// Steady state over a log-spaced pump-power range.
    Sweep(SweepArgs),
    /// Noise spectra S_DD, S_BB and symmetrized S_BB.
    Spectra(PumpArgs),
    /// Reflectivity, its symmetrized form and transmissivity.
    Reflectivity(PumpArgs),
    /// Euler–Maruyama ensemble and averaged periodogram.
    TimeSim(TimeSimArgs),
    /// Higher-power noise bounds and DC-concentration Monte Carlo.
    NoiseTheory(NoiseArgs),
    /// Exact-reduction report for the operator system.
    Verify,
}

#[derive(Debug, Args, Serialize)]
struct PumpArgs {
    /// Fix the pump photon number instead of solving for it.
    #[arg(long)]
    n_bar: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct SweepArgs {
    /// Lowest pump power in W.
    #[arg(long, default_value_t = 4e-18)]
    p_min: f64,
    /// Highest pump power in W.
    #[arg(long, default_value_t = 4e-15)]
    p_max: f64,
    #[arg(long, default_value_t = 50)]
    points: usize,
    /// Sets the parametric rate to this multiple of the Kerr rate.
    #[arg(long)]
    alpha_beta_ratio: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct TimeSimArgs {
    #[arg(long)]
    n_bar: Option<f64>,
    /// Overrides the normalized probe loss rate.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 100_000)]
    steps: usize,
    #[arg(long, default_value_t = 8)]
    seeds: usize,
    /// 0 = δd, 1 = δd†, 2 = δm.
    #[arg(long, default_value_t = 0)]
    channel: usize,
    #[arg(long, default_value_t = 10)]
    record_every: usize,
    #[arg(long, default_value_t = 0)]
    burn_in: usize,
    /// Directory for one CSV per trace.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct NoiseArgs {
    #[arg(long, default_value_t = 12)]
    max_j: u32,
    #[arg(long, default_value_t = 200_000)]
    samples: usize,
}

struct Run {
    params: ParamsFile,
    np: NormalizedParams,
    grid: FrequencyGrid,
    exec: Exec,
    config: serde_json::Value,
    format: Option<Format>,
    out: Option<PathBuf>,
    scheme: Scheme,
    seed: u64,
}

impl Run {
    fn new(cli: &Cli) -> Result<Self> {
        let mut params = match &cli.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                ParamsFile::from_toml(&text)?
            }
            None => ParamsFile::example(),
        };
        if let Command::Sweep(SweepArgs { alpha_beta_ratio: Some(r), .. }) = &cli.command {
            if !(*r >= 0.0) {
                return Err(CliError::Config(format!("alpha/beta ratio must be >= 0, got {r}")));
            }
            params.parametric_hz = r * params.kerr_hz;
        }
        let np = params.normalized()?;
        let (a, b) = match cli.grid_range.as_deref() {
            Some([a, b]) => (*a, *b),
            _ => (-4.0, 4.0),
        };
        if cli.grid_points < 2 {
            return Err(CliError::Config(format!("grid points must be >= 2, got {}", cli.grid_points)));
        }
        let grid = FrequencyGrid::linspace(a, b, cli.grid_points)?;
        let config = json!({
            "params": params,
            "grid": { "range": [a, b], "points": cli.grid_points },
            "scheme": cli.scheme,
            "seed": cli.seed,
            "run": cli.command,
        });
        Ok(Self {
            params,
            np,
            grid,
            exec: if cli.sequential { Exec::Sequential } else { Exec::Parallel },
            config,
            format: cli.format,
            out: cli.out.clone(),
            scheme: cli.scheme,
            seed: cli.seed,
        })
    }

    fn out(&self) -> Option<&Path> {
        self.out.as_deref()
    }

    fn table(&self, columns: &[&str], rows: Vec<Vec<f64>>) -> Result<()> {
        match self.format.unwrap_or(Format::Csv) {
            Format::Csv => output::csv_table(self.out(), &self.config, columns, rows)?,
            Format::Json => output::json_table(self.out(), &self.config, columns, rows)?,
        }
        Ok(())
    }

    fn record(&self, value: serde_json::Value) -> Result<()> {
        match self.format.unwrap_or(Format::Json) {
            Format::Json => output::json_record(self.out(), &self.config, value)?,
            Format::Csv => {
                let obj = value.as_object().cloned().unwrap_or_default();
                let cols: Vec<String> = obj.keys().cloned().collect();
                let row = obj.values().map(|v| v.as_f64().unwrap_or(f64::NAN)).collect();
                output::csv_table(self.out(), &self.config, &cols, vec![row])?;
            }
        }
        Ok(())
    }

    fn steady_state(&self, n_bar: Option<f64>) -> Result<SteadyState> {
        Ok(match n_bar {
            Some(n) => steady_state_at(n, &self.np)?,
            None => solve_pump(&self.np)?,
        })
    }
}

fn state_record(ss: &SteadyState, np: &NormalizedParams, p_op: f64) -> serde_json::Value {
    json!({
        "p_op_w": p_op,
        "xi": np.xi,
        "n_bar": ss.n_bar,
        "m_bar": ss.m_bar,
        "abs_d": ss.d_bar.norm(),
        "arg_d": ss.d_bar.arg(),
        "b_bar_re": ss.b_bar.re,
        "b_bar_im": ss.b_bar.im,
        "measure": nonlinearity_measure(ss).unwrap_or(f64::NAN),
        "residual": ss.residual,
        "roots_found": ss.roots_found,
    })
}

fn cmd_steady_state(run: &Run, args: &PumpArgs) -> Result<()> {
    let ss = run.steady_state(args.n_bar)?;
    if ss.multiple_roots() {
        eprintln!("warning: {} pump-number roots found; reporting the lowest", ss.roots_found);
    }
    run.record(state_record(&ss, &run.np, run.params.power_w))
}

fn cmd_sweep(run: &Run, args: &SweepArgs) -> Result<()> {
    if !(args.p_min > 0.0 && args.p_max >= args.p_min) || args.points < 1 {
        return Err(CliError::Config("sweep needs 0 < p_min <= p_max and points >= 1".into()));
    }
    let powers: Vec<f64> = (0..args.points)
        .map(|k| {
            if args.points == 1 {
                return args.p_min;
            }
            let f = k as f64 / (args.points - 1) as f64;
            args.p_min * (args.p_max / args.p_min).powf(f)
        })
        .collect();
    let system = run.params.system()?;
    let xis: Vec<f64> = powers.iter().map(|&p| system.with_power(p).xi()).collect();
    let sols = xkerr_core::steady_state::sweep(&run.np, &xis, run.exec);
    let mut failed = 0;
    let rows = powers
        .iter()
        .zip(&xis)
        .zip(&sols)
        .map(|((&p, &xi), s)| match s {
            Ok(s) => vec![p, xi, s.n_bar, s.m_bar, nonlinearity_measure(s).unwrap_or(f64::NAN)],
            Err(_) => {
                failed += 1;
                vec![p, xi, f64::NAN, f64::NAN, f64::NAN]
            }
        })
        .collect();
    if failed > 0 {
        eprintln!("warning: no below-threshold steady state at {failed} of {} powers", powers.len());
    }
    run.table(&["p_op_w", "xi", "n_bar", "m_bar", "measure"], rows)
}

fn cmd_spectra(run: &Run, args: &PumpArgs) -> Result<()> {
    let ss = run.steady_state(args.n_bar)?;
    let (s_dd, s_bb) = match run.scheme {
        Scheme::HigherOrder => {
            let s = sdd(&build_variation(&ss, &run.np), &run.grid, run.exec)?;
            let rec = recover_sbb(&s)?;
            (s, rec.sbb)
        }
        Scheme::Linearized => {
            (sdd_convolved(&ss, &run.np, &run.grid, run.exec)?, linearized_spectrum(&ss, &run.np, &run.grid, run.exec)?)
        }
    };
    let sym = symmetrize(&s_bb)?;
    let rows = (0..run.grid.n).map(|k| vec![run.grid.w(k), s_dd.values[k], s_bb.values[k], sym.values[k]]).collect();
    run.table(&["w", "s_dd", "s_bb", "s_bb_sym"], rows)
}

fn cmd_reflectivity(run: &Run, args: &PumpArgs) -> Result<()> {
    let ss = run.steady_state(args.n_bar)?;
    let r = match run.scheme {
        Scheme::HigherOrder => {
            let refl = reflectivity(&build_variation(&ss, &run.np), &run.grid, run.exec)?;
            if !refl.flagged.is_empty() {
                eprintln!("warning: reflection phase undefined at {} points (interpolated)", refl.flagged.len());
            }
            refl.r
        }
        Scheme::Linearized => linearized_reflectivity(&ss, &run.np, &run.grid, run.exec)?,
    };
    let sym = symmetrize(&r)?;
    let rows = (0..run.grid.n).map(|k| vec![run.grid.w(k), r.values[k], sym.values[k], 1.0 - r.values[k]]).collect();
    run.table(&["w", "r", "r_sym", "t"], rows)
}

fn cmd_time_sim(run: &Run, args: &TimeSimArgs) -> Result<()> {
    if args.seeds < 2 {
        return Err(CliError::Config(format!("need at least 2 seeds, got {}", args.seeds)));
    }
    let np = match args.gamma {
        Some(g) => run.np.with_gamma1(g),
        None => run.np.clone(),
    };
    let ss = match args.n_bar {
        Some(n) => steady_state_at(n, &np)?,
        None => solve_pump(&np)?,
    };
    let vs = build_variation(&ss, &np);
    let cfg = StepConfig::new(args.dt, args.steps).record_every(args.record_every).burn_in(args.burn_in);
    let seeds: Vec<u64> = (0..args.seeds as u64).map(|i| run.seed.wrapping_add(i)).collect();
    let psd = match &args.trace_dir {
        Some(dir) => {
            let traces = ensemble(&vs, &cfg, Default::default(), &seeds, run.exec)?;
            std::fs::create_dir_all(dir)?;
            for t in &traces {
                let z = t.channel(args.channel);
                let rows = z.iter().enumerate().map(|(k, v)| vec![t.tau(k), v.re, v.im]);
                let path = dir.join(format!("trace_{}.csv", t.seed));
                output::csv_table(Some(&path), &run.config, &["tau", "re", "im"], rows)?;
            }
            estimate_psd(&traces, args.channel)?
        }
        None => simulate_psd(&vs, &cfg, args.channel, &seeds, run.exec)?,
    };
    let analytic = intracavity_psd(&vs, &psd.grid, args.channel, run.exec)?;
    let rows = (0..psd.len()).map(|k| vec![psd.grid.w(k), psd.values[k], analytic.values[k]]).collect();
    run.table(&["w", "psd_estimate", "psd_analytic"], rows)
}

fn cmd_noise_theory(run: &Run, args: &NoiseArgs) -> Result<()> {
    if args.max_j < 1 {
        return Err(CliError::Config("max_j must be >= 1".into()));
    }
    let mut rows = Vec::new();
    for (j, bound) in bound_table(args.max_j) {
        let r = mc_higher_power_dc_concentration(j, args.samples, run.seed, run.exec)?;
        rows.push(vec![j as f64, bound, r.fraction, r.baseline_fraction, r.ratio]);
    }
    run.table(&["j", "psd_bound", "dc_fraction", "dc_fraction_j1", "dc_ratio"], rows)
}

fn cmd_verify(run: &Run) -> Result<()> {
    let bs = build_blocks(&run.np)?;
    let rm = solve_uv_general(&bs)?;
    let rep = verify_reduction(&bs, &rm);
    let closed = max_abs(&(solve_v_closed(&run.np)? - rm.v));
    let classical = classical_pump_v(&run.np)?;
    let tol = xkerr_core::operator_algebra::REDUCTION_TOL;
    let checks = [
        ("decoupling", rep.decoupling_residual),
        ("block_form", rep.block_residual),
        ("uv_equation_1", rep.equation_residuals.0),
        ("uv_equation_2", rep.equation_residuals.1),
        ("closed_form_v", closed),
        ("classical_pump_decoupling", classical.decoupling_residual),
        ("det_p_minus_1", rep.det_p_deviation),
        ("p_inverse", rep.inverse_residual),
    ];
    let failed: Vec<&str> = checks.iter().filter(|(_, v)| !(*v < tol * rep.scale)).map(|(k, _)| *k).collect();
    let mut residuals = serde_json::Map::new();
    for (k, v) in checks {
        residuals.insert(k.to_string(), json!(v));
    }
    let value = json!({
        "order": rep.order,
        "scale": rep.scale,
        "tolerance": tol * rep.scale,
        "residuals": residuals,
        "eigenvalue_residual": rep.eigenvalue_residual,
        "tail_residual": rep.tail_residual,
        "threshold_margin": THRESHOLD_MARGIN,
        "passed": failed.is_empty(),
        "failed": failed,
    });
    output::json_record(run.out(), &run.config, value)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(failed.join(", ")))
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let run = Run::new(cli)?;
    match &cli.command {
        Command::SteadyState(a) => cmd_steady_state(&run, a),
        Command::Sweep(a) => cmd_sweep(&run, a),
        Command::Spectra(a) => cmd_spectra(&run, a),
        Command::Reflectivity(a) => cmd_reflectivity(&run, a),
        Command::TimeSim(a) => cmd_time_sim(&run, a),
        Command::NoiseTheory(a) => cmd_noise_theory(&run, a),
        Command::Verify => cmd_verify(&run),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("xkerr: {e}");
            ExitCode::from(e.code())
        }
    }
}
