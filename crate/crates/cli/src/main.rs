use clap::Parser;
use pickands_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    let code = cli.command.into_config().and_then(|(cfg, rt)| pickands_cli::run_config(cfg, rt)).unwrap_or_else(|e| {
        eprintln!("pickands: {e}");
        e.exit_code()
    });
    std::process::exit(code);
}
