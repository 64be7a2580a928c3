use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser};

use harmonic_gateway::audit::audit_trace;
use harmonic_gateway::server::{serve, ServeOptions};
use harmonic_gateway::trace::Trace;
use harmonic_gateway::{GatewayError, Session};

/// Run a robot team scenario.
#[derive(Debug, Parser)]
#[command(name = "harmonic", version)]
#[command(group(ArgGroup::new("mode").required(true).args(["headless", "serve", "audit"])))]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, required_unless_present = "audit")]
    scenario: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run to completion and print a JSON summary.
    #[arg(long)]
    headless: bool,
    /// Serve the WebSocket protocol on this port at `/ws`.
    #[arg(long, value_name = "PORT")]
    serve: Option<u16>,
    /// Check a trace file and print its violations.
    #[arg(long, value_name = "TRACE")]
    audit: Option<PathBuf>,
    /// Overrides the scenario tick budget.
    #[arg(long)]
    max_ticks: Option<u64>,
    /// Write the trace here when the run ends.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Tick rate multiplier when serving.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
}

fn fail(e: &GatewayError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    if let Some(path) = &cli.audit {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(&e.into()),
        };
        let trace = match Trace::parse(&text) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        };
        let violations = audit_trace(&trace);
        for v in &violations {
            println!(
                "{}",
                serde_json::to_string(v).expect("violation serializes")
            );
        }
        eprintln!("{} violation(s)", violations.len());
        return if violations.is_empty() {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(3)
        };
    }

    if !(cli.speed.is_finite() && cli.speed > 0.0) {
        eprintln!("error: --speed must be positive");
        return ExitCode::from(2);
    }
    let scenario = cli.scenario.expect("clap enforces --scenario");
    let session = match Session::load(&scenario, cli.seed, cli.max_ticks) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };

    if let Some(port) = cli.serve {
        let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
        let opts = ServeOptions {
            speed: cli.speed,
            start_paused: false,
            trace_out: cli.trace_out,
        };
        let result = rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
            log::info!("listening on ws://{}/ws", listener.local_addr()?);
            serve(listener, session.run_until_max_ticks(), opts).await
        });
        return match result {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(&e),
        };
    }

    let mut session = session;
    let outcome = session.run();
    if let Some(path) = &cli.trace_out {
        if let Err(e) = std::fs::write(path, session.trace().to_text()) {
            return fail(&e.into());
        }
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&session.summary()).expect("summary serializes")
    );
    match outcome {
        Err(e) => fail(&e),
        Ok(()) if !session.summary().faults.is_empty() => ExitCode::from(3),
        Ok(()) => ExitCode::SUCCESS,
    }
}
