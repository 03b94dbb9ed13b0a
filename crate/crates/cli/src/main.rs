use std::path::PathBuf;
use std::process::ExitCode;

use rkde_cli::config::{ExperimentConfig, ExperimentKind};
use rkde_cli::error::CliError;
use rkde_cli::experiments::{
    run_attention_experiment, run_density_experiment, run_equivalence_check, run_sweep,
};

const USAGE: &str = "\
rkde: contaminated-sample experiments for kernel and robust-kernel attention

USAGE:
    rkde density   --config <path> [--output <base>] [--quiet]
    rkde attention --config <path> [--output <base>] [--quiet]
    rkde equiv     --config <path> [--output <base>] [--quiet]
    rkde sweep     --config <path> --seeds <a..b> [--output <base>] [--quiet]

OPTIONS:
    --config <path>   JSON experiment configuration (required)
    --output <base>   artifact base path; overrides output_path from the
                      config; artifacts are written as <base>.json and,
                      for density runs, <base>.csv
    --seeds <a..b>    half-open seed range for sweep, e.g. 0..20
    --quiet           suppress progress lines on stderr

EXIT CODES:
    0 success, 1 usage or configuration error, 2 numerical error,
    3 equivalence check failed
";

#[derive(Debug)]
struct Args {
    command: Command,
    config: PathBuf,
    output: Option<PathBuf>,
    seeds: Option<(u64, u64)>,
    quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    Density,
    Attention,
    Equiv,
    Sweep,
}

impl Command {
    fn parse(word: &str) -> Result<Self, CliError> {
        match word {
            "density" => Ok(Command::Density),
            "attention" => Ok(Command::Attention),
            "equiv" => Ok(Command::Equiv),
            "sweep" => Ok(Command::Sweep),
            other => Err(CliError::Usage(format!("unknown command: {other}"))),
        }
    }

    fn default_base(&self, experiment: ExperimentKind) -> PathBuf {
        let name = match self {
            Command::Sweep => match experiment {
                ExperimentKind::DensityContamination => "rkde_density",
                ExperimentKind::AttentionContamination => "rkde_attention",
                ExperimentKind::EquivalenceCheck => "rkde_equiv",
            },
            Command::Density => "rkde_density",
            Command::Attention => "rkde_attention",
            Command::Equiv => "rkde_equiv",
        };
        PathBuf::from(name)
    }
}

fn parse_seed_range(text: &str) -> Result<(u64, u64), CliError> {
    let (a, b) = text
        .split_once("..")
        .ok_or_else(|| CliError::Usage(format!("--seeds expects a..b, got {text}")))?;
    let lo: u64 = a
        .parse()
        .map_err(|_| CliError::Usage(format!("--seeds expects a..b, got {text}")))?;
    let hi: u64 = b
        .parse()
        .map_err(|_| CliError::Usage(format!("--seeds expects a..b, got {text}")))?;
    if lo >= hi {
        return Err(CliError::Usage(format!(
            "--seeds range must be non-empty, got {text}"
        )));
    }
    Ok((lo, hi))
}

fn parse_args(argv: &[String]) -> Result<Args, CliError> {
    let mut words = argv.iter();
    let command = Command::parse(
        words
            .next()
            .ok_or_else(|| CliError::Usage("missing command".into()))?,
    )?;

    let mut config = None;
    let mut output = None;
    let mut seeds = None;
    let mut quiet = false;
    while let Some(flag) = words.next() {
        match flag.as_str() {
            "--config" => {
                let value = words
                    .next()
                    .ok_or_else(|| CliError::Usage("--config needs a path".into()))?;
                config = Some(PathBuf::from(value));
            }
            "--output" => {
                let value = words
                    .next()
                    .ok_or_else(|| CliError::Usage("--output needs a path".into()))?;
                output = Some(PathBuf::from(value));
            }
            "--seeds" => {
                let value = words
                    .next()
                    .ok_or_else(|| CliError::Usage("--seeds needs a range".into()))?;
                seeds = Some(parse_seed_range(value)?);
            }
            "--quiet" => quiet = true,
            other => return Err(CliError::Usage(format!("unknown flag: {other}"))),
        }
    }

    let config = config.ok_or_else(|| CliError::Usage("--config is required".into()))?;
    if command == Command::Sweep && seeds.is_none() {
        return Err(CliError::Usage("sweep requires --seeds a..b".into()));
    }
    if command != Command::Sweep && seeds.is_some() {
        return Err(CliError::Usage("--seeds is only valid with sweep".into()));
    }
    Ok(Args { command, config, output, seeds, quiet })
}

/// The single-run commands must agree with the experiment named in the
/// config; sweep accepts any experiment.
fn check_experiment(command: Command, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let expected = match command {
        Command::Density => ExperimentKind::DensityContamination,
        Command::Attention => ExperimentKind::AttentionContamination,
        Command::Equiv => ExperimentKind::EquivalenceCheck,
        Command::Sweep => return Ok(()),
    };
    if cfg.experiment != expected {
        return Err(CliError::Config(format!(
            "config declares experiment \"{}\" but the command expects \"{}\"",
            cfg.experiment.name(),
            expected.name()
        )));
    }
    Ok(())
}

fn run(args: &Args) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(&args.config)?;
    check_experiment(args.command, &cfg)?;
    let base = args
        .output
        .clone()
        .or_else(|| cfg.output_path.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| args.command.default_base(cfg.experiment));

    match args.command {
        Command::Density => {
            let record = run_density_experiment(&cfg, &base)?;
            if !args.quiet {
                eprintln!(
                    "density seed {}: ise_kde={:.6e} ise_rkde={:.6e} ({:.1} ms)",
                    record.seed, record.ise_kde, record.ise_rkde, record.wall_time_ms
                );
            }
        }
        Command::Attention => {
            let record = run_attention_experiment(&cfg, &base)?;
            if !args.quiet {
                eprintln!(
                    "attention seed {}: dev_softmax={:.6e} dev_kde={:.6e} dev_rkde={:.6e} ({:.1} ms)",
                    record.seed,
                    record.deviation_softmax,
                    record.deviation_kde,
                    record.deviation_rkde,
                    record.wall_time_ms
                );
            }
        }
        Command::Equiv => {
            let report = run_equivalence_check(&cfg, &base)?;
            // The verdict is the command's result, so it goes to stdout
            // even under --quiet.
            println!(
                "equivalence {}: softmax-kde {:.3e}, kde-rkde {:.3e} (tolerance {:.1e})",
                if report.passed { "PASS" } else { "FAIL" },
                report.max_rel_error_softmax_kde,
                report.max_rel_error_kde_rkde,
                report.tolerance
            );
            if !report.passed {
                return Err(CliError::CheckFailed(format!(
                    "max relative error {:.3e} exceeds {:.1e}",
                    report
                        .max_rel_error_softmax_kde
                        .max(report.max_rel_error_kde_rkde),
                    report.tolerance
                )));
            }
        }
        Command::Sweep => {
            let (lo, hi) = args.seeds.expect("checked during parsing");
            run_sweep(&cfg, lo..hi, &base, args.quiet)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let args = match parse_args(&argv) {
        Ok(args) => args,
        Err(err) => {
            eprintln!("error: {err}");
            eprint!("{USAGE}");
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
