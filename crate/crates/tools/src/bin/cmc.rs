use std::process::ExitCode;

fn main() -> ExitCode {
    match cmc_tools::cli::run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(cmc_tools::cli::exit_code(&err))
        }
    }
}
