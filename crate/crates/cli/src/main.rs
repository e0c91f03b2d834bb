use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qal_core::bench::{run_bench, summarize, write_csv, BenchConfig, Method};
use qal_core::classical::erm_learn;
use qal_core::engine::{EngineConfig, EngineMode, Fault, DEFAULT_QUBIT_CAP};
use qal_core::estimator::estimate_mean;
use qal_core::learner::learn;
use qal_core::problem::ProblemInstance;
use qal_core::seed::substream;
use qal_core::verify::{verify, VerifyOptions};
use qal_core::QalError;

#[derive(Parser)]
#[command(
    name = "qal",
    version,
    about = "Amplitude-estimation agnostic learning, simulated exactly"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Statevector,
    Analytic,
}

impl From<Engine> for EngineMode {
    fn from(e: Engine) -> Self {
        match e {
            Engine::Statevector => EngineMode::Statevector,
            Engine::Analytic => EngineMode::Analytic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LearnMethod {
    Quantum,
    Classical,
}

#[derive(Clone, Copy, ValueEnum)]
enum InjectFault {
    FlipV,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the risk of one hypothesis.
    Estimate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        hypothesis: String,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "analytic")]
        engine: Engine,
        #[arg(long, default_value_t = DEFAULT_QUBIT_CAP)]
        qubit_cap: usize,
    },
    /// Pick a hypothesis with the quantum learner or classical ERM.
    Learn {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "quantum")]
        method: LearnMethod,
        #[arg(long, value_enum, default_value = "analytic")]
        engine: Engine,
        #[arg(long, default_value_t = DEFAULT_QUBIT_CAP)]
        qubit_cap: usize,
    },
    /// Run a trial grid and write one CSV row per trial.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in invariant checks.
    Verify {
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = DEFAULT_QUBIT_CAP)]
        qubit_cap: usize,
        #[arg(long, value_enum)]
        inject_fault: Option<InjectFault>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn engine(mode: Engine, qubit_cap: usize) -> EngineConfig {
    EngineConfig {
        mode: mode.into(),
        qubit_cap,
        fault: Fault::None,
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable result")
    );
}

fn run(cli: Cli) -> Result<ExitCode, QalError> {
    match cli.command {
        Command::Estimate {
            instance,
            hypothesis,
            epsilon,
            delta,
            seed,
            engine: mode,
            qubit_cap,
        } => {
            let inst = ProblemInstance::load(&instance)?;
            let h = inst.hypothesis_index(&hypothesis)?;
            let result = estimate_mean(&inst, h, epsilon, delta, seed, &engine(mode, qubit_cap))?;
            print_json(&result);
        }
        Command::Learn {
            instance,
            epsilon,
            delta,
            seed,
            method,
            engine: mode,
            qubit_cap,
        } => {
            let inst = ProblemInstance::load(&instance)?;
            match method {
                LearnMethod::Quantum => print_json(&learn(
                    &inst,
                    epsilon,
                    delta,
                    seed,
                    &engine(mode, qubit_cap),
                )?),
                LearnMethod::Classical => print_json(&erm_learn(
                    &inst,
                    epsilon,
                    delta,
                    &mut substream(seed, &[]),
                )?),
            }
        }
        Command::Bench { config, out } => {
            let cfg = BenchConfig::load(&config)?;
            let (id, inst) = cfg.load_instance()?;
            let rows = run_bench(&cfg, &id, &inst)?;
            let file = File::create(&out).map_err(|source| QalError::Io {
                path: out.clone(),
                source,
            })?;
            write_csv(&rows, BufWriter::new(file))?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
            for s in summarize(&rows, inst.hypotheses().len()) {
                let slope = s
                    .slope
                    .map(|v| format!("{v:.3}"))
                    .unwrap_or_else(|| "n/a".into());
                let unit = match s.method {
                    Method::Quantum => "N*eps",
                    Method::Classical => "N*eps^2",
                };
                eprintln!(
                    "{:>9} delta={}: slope {slope}, success {:.3}, {unit}/(ln|H|+ln(1/delta)) = {:.3}",
                    s.method, s.delta, s.success_rate, s.fitted_constant
                );
            }
        }
        Command::Verify {
            quick,
            qubit_cap,
            inject_fault,
            seed,
        } => {
            let mut opts = VerifyOptions {
                quick,
                qubit_cap,
                fault: match inject_fault {
                    Some(InjectFault::FlipV) => Fault::FlipV,
                    None => Fault::None,
                },
                ..Default::default()
            };
            if let Some(seed) = seed {
                opts.seed = seed;
            }
            let report = verify(&opts);
            println!("{report}");
            if !report.passed() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
