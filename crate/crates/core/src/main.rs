use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use uc_benders::engine::SamplerParams;
use uc_benders::harness::{
    export_trace, gen_instance, instance_to_json, load_instance, read_text, write_text, GeneratorSpec,
};
use uc_benders::master::MasterStrategy;
use uc_benders::orchestrator::{
    run_with, InitialSchedule, Message, Mode, Observer, RunConfig, RunStatus, SamplerChoice, SolveReport,
};
use uc_benders::qubo::{write_dump, PenaltyConfig, QuboProblem};

const EXIT_USAGE: u8 = 64;
const EXIT_FAILURE: u8 = 1;

#[derive(Parser)]
#[command(name = "uc-benders", version, about = "Benders decomposition for networked-microgrid unit commitment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Sa,
    Exhaustive,
}

#[derive(Clone, Copy, ValueEnum)]
enum MasterArg {
    Exhaustive,
    Local,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitialArg {
    AllOff,
    AllOn,
    Random,
}

#[derive(clap::Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "gbda", value_parser = parse_mode)]
    mode: Mode,
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "exhaustive")]
    sampler: SamplerArg,
    #[arg(long, value_enum, default_value = "exhaustive")]
    master: MasterArg,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Schedules returned by the exhaustive sampler (all when omitted).
    #[arg(long)]
    reads: Option<usize>,
    /// Annealing sweeps per restart (100 per bit when omitted).
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, value_enum, default_value = "all-off")]
    initial: InitialArg,
    /// Record wall-clock phase timings in the trace.
    #[arg(long)]
    timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and print the outcome.
    Solve {
        #[command(flatten)]
        args: SolveArgs,
        /// Write the full report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the iteration trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write every coordinator/controller message as JSON lines.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Generate a random instance from a JSON generator spec.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Force a capacity shortfall in microgrid 0 at this hour.
        #[arg(long)]
        infeasible_at: Option<usize>,
    },
    /// Run the hybrid loop and write the QUBO built at one iteration.
    QuboDump {
        #[command(flatten)]
        args: SolveArgs,
        #[arg(long)]
        iter_snapshot: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a JSON report to the trace CSV.
    Trace {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn config(a: &SolveArgs, mode: Mode) -> RunConfig {
    RunConfig {
        mode,
        epsilon: a.epsilon,
        max_iters: a.max_iters,
        initial_u: match a.initial {
            InitialArg::AllOff => InitialSchedule::AllOff,
            InitialArg::AllOn => InitialSchedule::AllOn,
            InitialArg::Random => InitialSchedule::Random(a.seed),
        },
        penalty: PenaltyConfig::default(),
        sampler: match a.sampler {
            SamplerArg::Exhaustive => SamplerChoice::Exhaustive { reads: a.reads },
            SamplerArg::Sa => SamplerChoice::Annealing(SamplerParams {
                sweeps: a.sweeps,
                restarts: a.restarts,
                seed: a.seed,
                ..SamplerParams::default()
            }),
        },
        master: match a.master {
            MasterArg::Exhaustive => MasterStrategy::Exhaustive,
            MasterArg::Local => MasterStrategy::LocalSearch {
                restarts: a.restarts,
                seed: a.seed,
            },
        },
        dispatch_tol: 1e-9,
        record_timings: a.timings,
    }
}

fn status_code(status: RunStatus) -> u8 {
    match status {
        RunStatus::Converged => 0,
        RunStatus::MaxIters => 2,
        RunStatus::MasterInfeasible => 3,
    }
}

#[derive(Default)]
struct Recorder {
    log: Option<String>,
    snapshot: Option<usize>,
    qubo: Option<QuboProblem>,
}

impl Observer for Recorder {
    fn message(&mut self, msg: &Message) {
        if let Some(log) = &mut self.log {
            log.push_str(&serde_json::to_string(msg).expect("message serializes"));
            log.push('\n');
        }
    }

    fn qubo_built(&mut self, iter: usize, qubo: &QuboProblem) {
        if self.snapshot == Some(iter) {
            self.qubo = Some(qubo.clone());
        }
    }
}

fn summary(report: &SolveReport) -> String {
    format!(
        "status {}\ncost {}\nlower_bound {}\niterations {}\n",
        report.status,
        report.cost,
        report.lb,
        report.trace.len()
    )
}

fn execute(cmd: Command) -> Result<u8, String> {
    match cmd {
        Command::Solve { args, report, trace, log } => {
            let inst = load_instance(&args.instance).map_err(|e| e.to_string())?;
            let mut rec = Recorder {
                log: log.as_ref().map(|_| String::new()),
                ..Recorder::default()
            };
            let out = run_with(&inst, &config(&args, args.mode), &mut rec).map_err(|e| e.to_string())?;
            if let Some(path) = &report {
                let json = serde_json::to_string_pretty(&out).map_err(|e| e.to_string())? + "\n";
                write_text(path, &json).map_err(|e| e.to_string())?;
            }
            if let Some(path) = &trace {
                write_text(path, &export_trace(&out)).map_err(|e| e.to_string())?;
            }
            if let (Some(path), Some(text)) = (&log, &rec.log) {
                write_text(path, text).map_err(|e| e.to_string())?;
            }
            print!("{}", summary(&out));
            for note in &out.diagnostics {
                let _ = writeln!(std::io::stderr(), "note: {note}");
            }
            Ok(status_code(out.status))
        }
        Command::Gen {
            spec,
            out,
            seed,
            infeasible_at,
        } => {
            let text = read_text(&spec).map_err(|e| e.to_string())?;
            let mut spec: GeneratorSpec =
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", spec.display()))?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            if infeasible_at.is_some() {
                spec.infeasible_at = infeasible_at;
            }
            let inst = gen_instance(&spec).map_err(|e| e.to_string())?;
            write_text(&out, &instance_to_json(&inst)).map_err(|e| e.to_string())?;
            Ok(0)
        }
        Command::QuboDump {
            args,
            iter_snapshot,
            out,
        } => {
            let inst = load_instance(&args.instance).map_err(|e| e.to_string())?;
            let mut rec = Recorder {
                snapshot: Some(iter_snapshot),
                ..Recorder::default()
            };
            let cfg = config(&args, Mode::HqcGbda);
            let report = run_with(&inst, &cfg, &mut rec).map_err(|e| e.to_string())?;
            let qubo = rec.qubo.ok_or_else(|| {
                format!(
                    "no QUBO was built at iteration {iter_snapshot}; the run stopped after {} iterations",
                    report.trace.len()
                )
            })?;
            write_text(&out, &write_dump(&qubo)).map_err(|e| e.to_string())?;
            println!("bits {}", qubo.n());
            Ok(0)
        }
        Command::Trace { input, out } => {
            let text = read_text(&input).map_err(|e| e.to_string())?;
            let report: SolveReport =
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", input.display()))?;
            write_text(&out, &export_trace(&report)).map_err(|e| e.to_string())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            let _ = writeln!(std::io::stderr(), "error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
