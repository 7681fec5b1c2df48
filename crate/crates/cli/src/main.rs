//! `omfilter`: evaluate, optimize and check an optomechanical filter cavity.
//!
//! Exit status: 0 success, 1 invalid input, 2 the computation itself failed
//! (singular system, infeasible design), 64 bad command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use omfilter::budget::{s_total_max, NoiseBudget};
use omfilter::config::TABLE_I;
use omfilter::constants::rad_to_hz;
use omfilter::derived::derive;
use omfilter::emit::{self, Cell, Table};
use omfilter::filter::{phase_lag, sweep_exact};
use omfilter::optimizer::{optimize, scaling_axes, scaling_fit};
use omfilter::report::consistency_report;
use omfilter::squeezing::{output_spectrum, squeezing_curve};
use omfilter::{dilution, thermal, Error, Execution, FrequencyGrid, SystemConfig};

const EXIT_VALIDATION: u8 = 1;
const EXIT_COMPUTATION: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(
    name = "omfilter",
    version,
    about = "Optomechanical filter cavity model and design optimizer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file (TOML). Defaults to the built-in reference design.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output file, written atomically. Standard output when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Replace a configuration value after loading, e.g. `epsilon_ppm=5`.
    #[arg(long = "override", global = true, value_name = "K=V", num_args = 1.., action = ArgAction::Append)]
    overrides: Vec<String>,

    /// Frequency grid in Hz, replacing the configured one.
    #[arg(long, global = true, value_name = "FMIN,FMAX,COUNT,log|lin")]
    grid: Option<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Two-sideband transfer coefficients and phase.
    Response,
    /// Decoherence budget spectrum; summary at the detuning.
    Budget,
    /// Optical-trap rigidity and back-action force noise.
    Dilution,
    /// Cantilever frequency and beam-spot heating.
    Thermal,
    /// Output squeezing for each configured end loss.
    Squeeze,
    /// Minimize the peak budget over trap power and front-mirror transmission.
    Optimize {
        /// Optimize over the configured (epsilon, L) lattice and fit a power law.
        #[arg(long)]
        scaling: bool,
    },
    /// Recompute the reference design quantities and list their deviations.
    Verify,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    Model(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

/// A table plus the summary that goes with it.
struct Output {
    table: Table,
    summary: Value,
}

fn load(cli: &Cli) -> Result<SystemConfig, Failure> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?,
        None => TABLE_I.to_string(),
    };
    Ok(SystemConfig::with_overrides(&text, &cli.overrides)?)
}

fn grid(cli: &Cli, cfg: &SystemConfig) -> Result<FrequencyGrid, Failure> {
    Ok(match &cli.grid {
        Some(spec) => FrequencyGrid::parse_hz(spec)?,
        None => cfg.frequency_grid()?,
    })
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn response(cli: &Cli, cfg: &SystemConfig, exec: Execution) -> Result<Output, Failure> {
    let d = derive(cfg)?;
    let sols = sweep_exact(&grid(cli, cfg)?, &d, exec)?;
    let mut table = Table::new(&[
        "omega_Hz",
        "re_t_upper",
        "im_t_upper",
        "re_t_lower",
        "im_t_lower",
        "abs_t_thermal",
        "abs_t_loss",
        "phase_rad",
    ]);
    for s in &sols {
        table.push([
            rad_to_hz(s.omega),
            s.t_upper.re,
            s.t_upper.im,
            s.t_lower.re,
            s.t_lower.im,
            s.t_thermal.norm(),
            s.t_loss.norm(),
            phase_lag(s.omega, &d),
        ]);
    }
    let summary = json!({
        "gamma_opt_Hz": rad_to_hz(d.gamma_opt),
        "delta_Hz": rad_to_hz(d.delta),
        "omega_m_Hz": rad_to_hz(d.omega_m),
        "control_detuning_Hz": rad_to_hz(d.big_delta),
    });
    Ok(Output { table, summary })
}

fn budget(cli: &Cli, cfg: &SystemConfig, exec: Execution) -> Result<Output, Failure> {
    let d = derive(cfg)?;
    let b = NoiseBudget::evaluate(&grid(cli, cfg)?, &d, exec);
    let mut table = Table::new(&["omega_Hz", "s_th", "s_eps", "s_lower", "s_trap", "s_total"]);
    for (w, p) in b.omega.iter().zip(&b.points) {
        table.push([rad_to_hz(*w), p.s_th, p.s_eps, p.s_lower, p.s_trap, p.s_total]);
    }
    Ok(Output {
        table,
        summary: to_value(&s_total_max(&d)),
    })
}

fn dilution_cmd(cli: &Cli, cfg: &SystemConfig, exec: Execution) -> Result<Output, Failure> {
    let d = derive(cfg)?;
    let trap = d.trap.as_ref().ok_or(Error::TrapDisabled)?;
    let omegas = grid(cli, cfg)?.omegas();
    let samples = dilution::rigidity_samples(&trap.system, &omegas, exec);
    let mut table = Table::new(&["omega_Hz", "re_K", "im_K", "S_FF"]);
    for (w, (k, s)) in omegas.iter().zip(&samples) {
        table.push([rad_to_hz(*w), k.re, k.im, *s]);
    }
    let e = &trap.expansion;
    let o = &trap.oscillator;
    let summary = json!({
        "omega_opt_Hz": rad_to_hz(e.omega_opt),
        "Gamma_Hz": rad_to_hz(e.gamma),
        "m_opt_kg": e.m_opt,
        "Q_m_eff": o.q_m_eff,
        "omega_m_eff_Hz": rad_to_hz(o.omega_m_eff),
        "delta_t_Hz": rad_to_hz(trap.system.delta_t),
        "circulating_power_W": trap.circulating_power,
        "richardson_change": e.richardson_change,
        "flags": {
            "unstable": o.unstable,
            "inertia_warning": o.inertia_warning,
            "anti_restoring": o.anti_restoring,
        },
    });
    Ok(Output { table, summary })
}

fn thermal_cmd(cfg: &SystemConfig) -> Result<Output, Failure> {
    let g = cfg
        .oscillator
        .cantilever
        .as_ref()
        .ok_or_else(|| Error::Invalid("thermal needs the cantilever geometry in [oscillator]".into()))?;
    let d = derive(cfg)?;
    let p_circ = d.trap.as_ref().map_or(0.0, |t| t.circulating_power);
    let env = &cfg.environment;
    let s = thermal::summarize(g, p_circ, env.absorption, env.temperature, env.kappa0, env.n_exp);
    let mut table = Table::new(&["f0_Hz", "mass_kg", "T0_K", "gradT_K_per_m", "P_abs_W"]);
    table.push([s.f0_hz, s.mass_kg, s.t0_k, s.grad_t_k_per_m, s.p_abs_w]);
    Ok(Output {
        table,
        summary: to_value(&s),
    })
}

fn squeeze(cli: &Cli, cfg: &SystemConfig, exec: Execution) -> Result<Output, Failure> {
    let d = derive(cfg)?;
    let r = cfg.cavity.input_squeezing_db;
    let eps = if cfg.cavity.epsilon_sweep.is_empty() {
        vec![cfg.cavity.epsilon]
    } else {
        cfg.cavity.epsilon_sweep.clone()
    };
    let curves = squeezing_curve(&grid(cli, cfg)?, r, &eps, &d, exec);
    let mut table = Table::new(&["epsilon", "omega_Hz", "s_out", "db_out"]);
    let mut at_delta = Vec::new();
    for c in &curves {
        for ((w, s), db) in c.omega.iter().zip(&c.s_out).zip(&c.db_out) {
            table.push([c.epsilon, rad_to_hz(*w), *s, *db]);
        }
        let s = output_spectrum(d.delta, r, &d.with_epsilon(c.epsilon));
        at_delta.push(json!({"epsilon": c.epsilon, "s_out": s, "db_out": -10.0 * s.log10()}));
    }
    Ok(Output {
        table,
        summary: json!({"input_squeezing_db": r, "delta_Hz": rad_to_hz(d.delta), "at_delta": at_delta}),
    })
}

fn optimize_cmd(cfg: &SystemConfig, scaling: bool, exec: Execution) -> Result<Output, Failure> {
    if scaling {
        let (eps, ls) = scaling_axes(&cfg.optimizer);
        let fit = scaling_fit(cfg, &cfg.optimizer, &eps, &ls, exec)?;
        let mut table = Table::new(&["epsilon", "L_m", "S"]);
        for s in &fit.samples {
            let value = s.objective.map_or(Cell::Text(String::new()), Cell::Num);
            table.push([Cell::Num(s.epsilon), Cell::Num(s.length), value]);
        }
        let summary = json!({
            "exponent_eps": fit.exponent_eps,
            "exponent_L": fit.exponent_l,
            "prefactor": fit.prefactor,
            "residual": fit.residual,
            "gaps": fit.gaps,
            "designs": fit.samples.iter().map(to_value).collect::<Vec<_>>(),
        });
        return Ok(Output { table, summary });
    }
    let r = optimize(cfg, &cfg.optimizer, exec)?;
    let mut table = Table::new(&["iteration", "P_trap_W", "T_f", "T_K", "objective"]);
    for s in &r.trace {
        table.push([s.iteration as f64, s.p_trap, s.t_f, s.temperature, s.objective]);
    }
    Ok(Output {
        table,
        summary: to_value(&r),
    })
}

fn verify(cfg: &SystemConfig) -> Result<Output, Failure> {
    let report = consistency_report(cfg)?;
    print_stdout(&report.to_text());
    let mut table = Table::new(&["parameter", "computed", "claimed", "rel_dev"]);
    for r in &report.rows {
        table.push([
            Cell::from(r.parameter.as_str()),
            Cell::Num(r.computed),
            Cell::Num(r.claimed),
            Cell::Num(r.rel_dev),
        ]);
    }
    Ok(Output {
        table,
        summary: Value::Null,
    })
}

/// Writes to standard output; a closed pipe is not an error.
fn print_stdout(s: &str) {
    let _ = std::io::stdout().lock().write_all(s.as_bytes());
}

fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// `budget.csv` -> `budget.summary.json`.
fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

fn emit_output(cli: &Cli, out: Output) -> Result<(), Failure> {
    let verify = matches!(cli.command, Command::Verify);
    match cli.format {
        Format::Csv => {
            let csv = out.table.to_csv();
            match &cli.out {
                Some(path) => {
                    write_atomic(path, &csv)?;
                    if !out.summary.is_null() {
                        write_atomic(&summary_path(path), &emit::to_json(&out.summary)?)?;
                    }
                }
                None if verify => {}
                None => print_stdout(&csv),
            }
        }
        Format::Json => {
            let doc = if out.summary.is_null() {
                out.table.to_json_value()
            } else {
                json!({"summary": out.summary, "rows": out.table.to_json_value()})
            };
            let text = emit::to_json(&doc)?;
            match &cli.out {
                Some(path) => write_atomic(path, &text)?,
                None if verify => {}
                None => print_stdout(&text),
            }
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load(cli)?;
    let exec = Execution::available();
    let out = match cli.command {
        Command::Response => response(cli, &cfg, exec)?,
        Command::Budget => budget(cli, &cfg, exec)?,
        Command::Dilution => dilution_cmd(cli, &cfg, exec)?,
        Command::Thermal => thermal_cmd(&cfg)?,
        Command::Squeeze => squeeze(cli, &cfg, exec)?,
        Command::Optimize { scaling } => optimize_cmd(&cfg, scaling, exec)?,
        Command::Verify => verify(&cfg)?,
    };
    emit_output(cli, out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Model(e)) => {
            eprintln!("omfilter: {e}");
            if e.is_validation() {
                ExitCode::from(EXIT_VALIDATION)
            } else if matches!(cli.command, Command::Verify) {
                // verify reports; it does not judge
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_COMPUTATION)
            }
        }
        Err(Failure::Io(msg)) => {
            eprintln!("omfilter: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
