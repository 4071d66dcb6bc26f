mod cmd;
mod config;
mod report;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::GlobalOpts;

#[derive(Parser, Debug)]
#[command(name = "twinpsy", version, about = "Psychometric comparison of simulated and human survey respondents")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Association networks: structure, communities and overlap.
    Semnet(cmd::semnet::SemnetArgs),
    /// Twin accuracy, correlations, error slopes and random baselines.
    Eval(cmd::eval::EvalArgs),
    /// Psychometric networks: EGA, bootstrap stability and invariance.
    Psychnet(cmd::psychnet::PsychnetArgs),
    /// Linguistic profiles and condition comparisons of a CoNLL-U corpus.
    Ling(cmd::ling::LingArgs),
    /// Dictionary-based construct similarity of document embeddings.
    Ddr(cmd::ddr::DdrArgs),
    /// Persona prompts, model calls and reply parsing.
    #[command(name = "twin-gen", subcommand)]
    TwinGen(cmd::twin_gen::TwinGenCommand),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Semnet(a) => cmd::semnet::run(g, a),
        Command::Eval(a) => cmd::eval::run(g, a),
        Command::Psychnet(a) => cmd::psychnet::run(g, a),
        Command::Ling(a) => cmd::ling::run(g, a),
        Command::Ddr(a) => cmd::ddr::run(g, a),
        Command::TwinGen(c) => cmd::twin_gen::run(g, c),
    }
}

/// Error chain on one line, skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
    }
}
