use std::process::ExitCode;

use clap::Parser;

use hardy_tower_cli::{emit, run, Cli, RunConfig};

const EXIT_NUMERIC_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let config = match RunConfig::resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let (report, artifacts) = run(&config);
    match emit(&report, config.format, config.out.as_deref()) {
        Ok(Some(path)) => eprintln!("wrote {}", path.display()),
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_NUMERIC_FAILURE);
        }
    }
    if let Some(dir) = config.out.as_deref() {
        for a in &artifacts {
            let path = dir.join(&a.file_name);
            if let Err(e) = std::fs::write(&path, &a.contents) {
                eprintln!("error: writing {}: {e}", path.display());
                return ExitCode::from(EXIT_NUMERIC_FAILURE);
            }
            eprintln!("wrote {}", path.display());
        }
    }
    for r in report.failures() {
        eprintln!("FAIL {} {} = {} {}", r.quantity, r.key, r.value, r.note);
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NUMERIC_FAILURE)
    }
}
