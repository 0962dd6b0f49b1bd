use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use socurv::{run, Cli, Exit};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                // --help and --version
                e.exit();
            }
            let line = serde_json::json!({
                "error": "usage",
                "message": e.to_string().lines().next().unwrap_or_default(),
                "exit": Exit::Invalid.code(),
            });
            eprintln!("{line}");
            return ExitCode::from(Exit::Invalid.code() as u8);
        }
    };
    let quiet = cli.command.common().quiet;
    match run(&cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.stdout.as_bytes());
            let _ = stdout.flush();
            if !quiet {
                for line in &out.summary {
                    eprintln!("{line}");
                }
            }
            ExitCode::from(out.exit.code() as u8)
        }
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit().code() as u8)
        }
    }
}
