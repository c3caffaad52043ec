//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when the verification battery fails, 2 on bad
//! arguments or any error raised while computing the requested output.

use std::ffi::OsString;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bell::{self, Axis, OptimizeOptions, Target};
use crate::error::{Error, Result};
use crate::fock::{FockCutoff, C64};
use crate::models::{ModelConfig, ModelRegistry};
use crate::oracles::BellSettings;
use crate::sim;
use crate::states::{incoherent_mixture, singlet_state};
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "phasebell", version, about = "Phase-space Bell tests with displaced photon counting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Scan the CH combination over intensity (and optionally phase)
    ScanCh(ScanArgs),
    /// Scan the CHSH-type parity combination B
    ScanB(ScanArgs),
    /// Locate the strongest violation of CH or B
    Optimize(OptimizeArgs),
    /// Run the oracle and invariant battery
    Verify(VerifyArgs),
    /// Compare B for the singlet-like state and the incoherent mixture
    Mixture(MixtureArgs),
    /// Deviation of the finite-transmission no-click element from Q(alpha)
    FiniteT(FiniteTArgs),
    /// Monte Carlo counts for the four setting pairs
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Ch,
    B,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Ch => Target::Ch,
            TargetArg::B => Target::B,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StateArg {
    Singlet,
    Mixture,
}

#[derive(Args, Debug)]
pub struct Common {
    /// Highest retained photon number per mode
    #[arg(long, default_value_t = 32)]
    pub cutoff: usize,
    /// Output file; stdout when absent
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    #[arg(long, default_value_t = 0.0)]
    pub j_min: f64,
    #[arg(long, default_value_t = 1.2)]
    pub j_max: f64,
    #[arg(long, default_value_t = 121)]
    pub steps: usize,
    /// Fixed half phase difference; overrides the phase range
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub phi_min: f64,
    #[arg(long, default_value_t = PI)]
    pub phi_max: f64,
    #[arg(long, default_value_t = 2)]
    pub phi_steps: usize,
    /// Correlation model: analytic, numeric, analytic-mixture, numeric-mixture
    #[arg(long, default_value = "analytic")]
    pub model: String,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[arg(long, value_enum)]
    pub target: TargetArg,
    #[arg(long, default_value_t = 0.0)]
    pub j_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub j_max: f64,
    #[arg(long, default_value = "analytic")]
    pub model: String,
    /// Dense-grid spacing in J
    #[arg(long, default_value_t = 1e-4)]
    pub resolution: f64,
    /// Search the phase as well instead of fixing phi = pi/2
    #[arg(long)]
    pub search_phase: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, default_value = "numeric")]
    pub model: String,
    /// Emit the report as JSON instead of a table
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct MixtureArgs {
    #[arg(long, default_value_t = 0.0)]
    pub j_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub j_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub j_step: f64,
    #[arg(long, default_value_t = 0.01)]
    pub phi_step: f64,
    /// analytic or numeric
    #[arg(long, default_value = "analytic")]
    pub model: String,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct FiniteTArgs {
    /// Comma-separated beam-splitter transmissions
    #[arg(long, value_delimiter = ',', default_values_t = [0.9, 0.99, 0.999])]
    pub t: Vec<f64>,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub alpha_re: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha_im: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, default_value_t = 64)]
    pub cutoff: usize,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = TargetArg::Ch)]
    pub mode: TargetArg,
    /// Intensity; defaults to the analytic optimum for the mode
    #[arg(long)]
    pub j: Option<f64>,
    #[arg(long, default_value_t = FRAC_PI_2)]
    pub phi: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub shots: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = StateArg::Singlet)]
    pub state: StateArg,
    #[arg(long, default_value_t = 1.0)]
    pub eta_a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta_b: f64,
    /// Worker threads; 0 uses the default pool
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub common: Common,
}

/// Parses `argv` (program name first), runs the command and returns the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::ScanCh(args) => scan_cmd(Target::Ch, args),
        Command::ScanB(args) => scan_cmd(Target::B, args),
        Command::Optimize(args) => optimize_cmd(args),
        Command::Verify(args) => verify_cmd(args),
        Command::Mixture(args) => mixture_cmd(args),
        Command::FiniteT(args) => finite_t_cmd(args),
        Command::Simulate(args) => simulate_cmd(args),
    }
}

fn model_config(cutoff: usize) -> Result<ModelConfig> {
    Ok(ModelConfig {
        cutoff: FockCutoff::new(cutoff)?,
    })
}

/// Shortest representation that parses back to the same `f64`; never more
/// than 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn csv<R: AsRef<[f64]>>(header: &[&str], rows: &[R]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let line: Vec<String> = r.as_ref().iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn ensure_finite(values: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in values {
        if !v.is_finite() {
            return Err(Error::InvalidState(format!("non-finite output value {v}")));
        }
    }
    Ok(())
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::Io(e.to_string()))
        }
    }
}

fn value_column(target: Target) -> &'static str {
    match target {
        Target::Ch => "CH",
        Target::B => "B",
    }
}

fn scan_cmd(target: Target, args: ScanArgs) -> Result<i32> {
    let registry = ModelRegistry::with_builtin();
    let model = registry.build(&args.model, &model_config(args.common.cutoff)?)?;
    let j_axis = Axis::new(args.j_min, args.j_max, args.steps)?;
    let phi_axis = match args.phi {
        Some(phi) => Axis::fixed(phi)?,
        None => Axis::new(args.phi_min, args.phi_max, args.phi_steps)?,
    };
    let rows = bell::scan(target, &j_axis, &phi_axis, model.as_ref())?;
    ensure_finite(rows.iter().map(|r| r.value))?;
    let text = match (args.format, args.phi.is_some()) {
        (Format::Json, _) => json(&rows)?,
        (Format::Csv, true) => {
            let table: Vec<[f64; 2]> = rows.iter().map(|r| [r.j, r.value]).collect();
            csv(&["J", value_column(target)], &table)
        }
        (Format::Csv, false) => {
            let table: Vec<[f64; 3]> = rows.iter().map(|r| [r.j, r.phi, r.value]).collect();
            csv(&["J", "phi", value_column(target)], &table)
        }
    };
    emit(&args.common.output, &text)?;
    Ok(EXIT_OK)
}

fn optimize_cmd(args: OptimizeArgs) -> Result<i32> {
    let registry = ModelRegistry::with_builtin();
    let model = registry.build(&args.model, &model_config(args.common.cutoff)?)?;
    let options = OptimizeOptions {
        grid_resolution: args.resolution,
        search_phase: args.search_phase,
        ..OptimizeOptions::default()
    };
    if !(args.resolution > 0.0) {
        return Err(Error::InvalidRange(format!("resolution {}", args.resolution)));
    }
    let report = bell::optimize_violation(args.target.into(), (args.j_min, args.j_max), model.as_ref(), &options)?;
    ensure_finite([report.j_star, report.phi_star, report.value_star])?;
    let text = match args.format {
        Format::Json => json(&report)?,
        Format::Csv => csv(
            &["J_star", "phi_star", "value", "evaluations"],
            &[[report.j_star, report.phi_star, report.value_star, report.evaluations as f64]],
        ),
    };
    emit(&args.common.output, &text)?;
    Ok(EXIT_OK)
}

fn verify_cmd(args: VerifyArgs) -> Result<i32> {
    let cfg = model_config(args.common.cutoff)?;
    let model = ModelRegistry::with_builtin().build(&args.model, &cfg)?;
    let report = verify::run_battery(cfg.cutoff, model.as_ref())?;
    let text = if args.json {
        json(&report)?
    } else {
        report.render_table()
    };
    emit(&args.common.output, &text)?;
    Ok(if report.all_passed() {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    })
}

fn mixture_cmd(args: MixtureArgs) -> Result<i32> {
    let (singlet_name, mixture_name) = match args.model.as_str() {
        "analytic" => ("analytic", "analytic-mixture"),
        "numeric" => ("numeric", "numeric-mixture"),
        other => {
            return Err(Error::Unknown {
                kind: "model",
                name: other.to_string(),
            })
        }
    };
    let cfg = model_config(args.common.cutoff)?;
    let registry = ModelRegistry::with_builtin();
    let singlet = registry.build(singlet_name, &cfg)?;
    let mixture = registry.build(mixture_name, &cfg)?;
    let j_axis = Axis::from_step(args.j_min, args.j_max, args.j_step)?;
    let phi_axis = Axis::from_step(0.0, PI, args.phi_step)?;
    let b_singlet = bell::scan(Target::B, &j_axis, &phi_axis, singlet.as_ref())?;
    let b_mixture = bell::scan(Target::B, &j_axis, &phi_axis, mixture.as_ref())?;
    let table: Vec<[f64; 4]> = b_singlet
        .iter()
        .zip(&b_mixture)
        .map(|(s, m)| [s.j, s.phi, s.value, m.value])
        .collect();
    ensure_finite(table.iter().flat_map(|r| r.iter().copied()))?;
    let max_mixture = b_mixture.iter().map(|r| r.value.abs()).fold(0.0, f64::max);
    let violations = b_mixture.iter().filter(|r| r.value.abs() > bell::B_BOUND).count();
    eprintln!(
        "mixture: max |B| = {max_mixture:.12}, grid points beyond the local bound: {violations}/{}",
        b_mixture.len()
    );
    let text = match args.format {
        Format::Csv => csv(&["J", "phi", "B_singlet", "B_mixture"], &table),
        Format::Json => {
            #[derive(Serialize)]
            struct Row {
                j: f64,
                phi: f64,
                b_singlet: f64,
                b_mixture: f64,
            }
            let rows: Vec<Row> = table
                .iter()
                .map(|r| Row {
                    j: r[0],
                    phi: r[1],
                    b_singlet: r[2],
                    b_mixture: r[3],
                })
                .collect();
            json(&rows)?
        }
    };
    emit(&args.common.output, &text)?;
    Ok(EXIT_OK)
}

fn finite_t_cmd(args: FiniteTArgs) -> Result<i32> {
    let alpha = C64::new(args.alpha_re, args.alpha_im);
    let cutoff = FockCutoff::new(args.cutoff)?;
    if args.t.is_empty() {
        return Err(Error::InvalidRange("empty transmission list".into()));
    }
    let devs = verify::finite_t_deviations(alpha, &args.t, cutoff)?;
    let table: Vec<[f64; 4]> = args
        .t
        .iter()
        .zip(&devs)
        .map(|(&t, &d)| {
            let gamma = alpha / (1.0 - t).sqrt();
            [t, gamma.re, gamma.im, d]
        })
        .collect();
    ensure_finite(table.iter().flat_map(|r| r.iter().copied()))?;
    let text = match args.format {
        Format::Csv => csv(&["T", "gamma_re", "gamma_im", "deviation"], &table),
        Format::Json => {
            #[derive(Serialize)]
            struct Row {
                transmission: f64,
                gamma: [f64; 2],
                deviation: f64,
            }
            let rows: Vec<Row> = table
                .iter()
                .map(|r| Row {
                    transmission: r[0],
                    gamma: [r[1], r[2]],
                    deviation: r[3],
                })
                .collect();
            json(&rows)?
        }
    };
    emit(&args.output, &text)?;
    Ok(EXIT_OK)
}

fn simulate_cmd(args: SimulateArgs) -> Result<i32> {
    let target: Target = args.mode.into();
    let cutoff = FockCutoff::new(args.common.cutoff)?;
    let j = match args.j {
        Some(j) => j,
        None => {
            bell::optimize_violation(target, (0.0, 2.0), &crate::models::AnalyticModel, &OptimizeOptions::default())?
                .j_star
        }
    };
    let settings = BellSettings::from_intensity_phase(j, args.phi)?;
    let state = match args.state {
        StateArg::Singlet => singlet_state(cutoff),
        StateArg::Mixture => incoherent_mixture(cutoff),
    };
    let efficiency = if args.eta_a == 1.0 && args.eta_b == 1.0 {
        None
    } else {
        Some((args.eta_a, args.eta_b))
    };
    let sample = || sim::sample_counts(&state, &settings, target, args.shots, args.seed, efficiency);
    let record = if args.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build()
            .map_err(|e| Error::Io(e.to_string()))?
            .install(sample)?
    } else {
        sample()?
    };
    let estimate = sim::estimate(&record)?;
    eprintln!(
        "{} estimate = {:.6} +- {:.6} ({} shots per setting)",
        value_column(target),
        estimate.value,
        estimate.std_error,
        record.shots
    );
    let text = match args.format {
        Format::Csv => {
            let mut out = String::from("setting,alpha_re,alpha_im,beta_re,beta_im,shots,n0,n1,n2,n3\n");
            for (i, ((a, b), counts)) in sim::setting_pairs(&settings).iter().zip(&record.pairs).enumerate() {
                let t = counts.tallies;
                let _ = writeln!(
                    out,
                    "{i},{},{},{},{},{},{},{},{},{}",
                    fmt_f64(a.re),
                    fmt_f64(a.im),
                    fmt_f64(b.re),
                    fmt_f64(b.im),
                    record.shots,
                    t[0],
                    t[1],
                    t[2],
                    t[3]
                );
            }
            out
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Run<'a> {
                counts: &'a sim::CountsRecord,
                estimate: &'a sim::EstimateReport,
            }
            ensure_finite([estimate.value, estimate.std_error])?;
            json(&Run {
                counts: &record,
                estimate: &estimate,
            })?
        }
    };
    emit(&args.common.output, &text)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips() {
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(1.0), "1");
        let x = 1.1086772786279784;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        assert!(fmt_f64(0.1 + 0.2).len() <= 20);
    }

    #[test]
    fn csv_layout() {
        let s = csv(&["a", "b"], &[[0.0, 1.0], [0.5, -2.0]]);
        assert_eq!(s, "a,b\n0,1\n0.5,-2\n");
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run(["phasebell", "nonsense"]), EXIT_USAGE);
        assert_eq!(run(["phasebell", "scan-ch", "--steps", "x"]), EXIT_USAGE);
        assert_eq!(run(["phasebell", "scan-ch", "--j-min", "2", "--j-max", "1"]), EXIT_USAGE);
        assert_eq!(run(["phasebell", "scan-b", "--model", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["phasebell", "optimize"]), EXIT_USAGE);
        assert_eq!(run(["phasebell", "--help"]), EXIT_OK);
    }
}
