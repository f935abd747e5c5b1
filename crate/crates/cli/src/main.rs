use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use cpte_cli::{run, workers_from_env, Cli};
use serde_json::json;

fn error_record(command: &str, kind: &str, message: String, chain: Vec<String>) -> String {
    json!({ "error": { "command": command, "kind": kind, "message": message, "causes": chain } }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            eprintln!("{}", error_record("", "usage", e.kind().to_string(), vec![e.to_string()]));
            return ExitCode::from(2);
        }
    };
    if let Some(n) = workers_from_env() {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", error_record(cli.command.name(), "runtime", e.to_string(), vec![]));
            return ExitCode::FAILURE;
        }
    }
    match run(&cli) {
        Ok(summary) => {
            eprintln!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let chain = e.chain().skip(1).map(|c| c.to_string()).collect();
            eprintln!("{}", error_record(cli.command.name(), "runtime", e.to_string(), chain));
            ExitCode::FAILURE
        }
    }
}
