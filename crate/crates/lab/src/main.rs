use std::process::ExitCode;

use clap::Parser;

use perc_lab::{run, Cli, ExperimentConfig, LabResult};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = cli.command.into_parts();
    let result: LabResult<_> = ExperimentConfig::from_args(kind, args).and_then(|config| run(&config));
    match result {
        Ok(report) => {
            for line in report.stdout {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("perc-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
