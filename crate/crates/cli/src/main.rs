use std::process::ExitCode;

use clap::Parser;
use riskfilt::{Error, ErrorCategory};

mod commands;

use commands::Cli;

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        ErrorCategory::Validation => 1,
        ErrorCategory::Condition => 2,
        ErrorCategory::Numeric => 3,
    }
}

fn report(category: &str, e: &Error) {
    let mut body = serde_json::json!({ "category": category, "message": e.to_string() });
    if let Error::Config { key, .. } = e {
        body["key"] = key.clone().into();
    }
    eprintln!("{body}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let body = serde_json::json!({ "category": "validation", "message": e.to_string().trim_end() });
            eprintln!("{body}");
            return ExitCode::from(1);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = match e.category() {
                ErrorCategory::Validation => "validation",
                ErrorCategory::Condition => "condition",
                ErrorCategory::Numeric => "numeric",
            };
            report(category, &e);
            ExitCode::from(exit_code(&e))
        }
    }
}
