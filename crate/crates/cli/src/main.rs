use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let spec = match dronereach_cli::parse_args(std::env::args_os()) {
        Ok(spec) => spec,
        Err(dronereach_cli::CliError::Help(text)) => {
            println!("{text}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match dronereach_cli::run_experiment(&spec) {
        Ok(report) => {
            for (v, s) in &report.summaries {
                println!(
                    "{}: acc {:.3} succ {:.3} del {:.3} recall {:.3} precision {:.3} coverage {:.3}",
                    v.name, s.acc_rate, s.succ_rate, s.del_rate, s.recall, s.precision, s.edge_coverage
                );
            }
            for (name, e) in &report.failures {
                eprintln!("{name} failed: {e}");
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
