mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use args::Cli;

/// Version tag of every JSON document written to stdout.
pub const SCHEMA: &str = "tailbreak/1";

fn category(err: &anyhow::Error) -> &'static str {
    if let Some(e) = err.downcast_ref::<tailbreak_core::Error>() {
        e.category()
    } else if err.downcast_ref::<serde_json::Error>().is_some() {
        "input_format"
    } else if err.downcast_ref::<std::io::Error>().is_some() {
        "io"
    } else {
        "validation"
    }
}

fn exit_code(category: &str) -> u8 {
    match category {
        "validation" => 2,
        "insufficient_data" => 3,
        "degenerate" => 4,
        "missing_critical_value" => 5,
        "input_format" => 6,
        "io" => 7,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match commands::run(cli.command, argv) {
        Ok(doc) => {
            println!("{}", serde_json::to_string_pretty(&doc).expect("output serializes"));
            ExitCode::SUCCESS
        }
        Err(err) => {
            let category = category(&err);
            let doc = json!({
                "schema": SCHEMA,
                "error": { "category": category, "message": format!("{err:#}") },
            });
            eprintln!("{}", serde_json::to_string_pretty(&doc).expect("error serializes"));
            ExitCode::from(exit_code(category))
        }
    }
}
