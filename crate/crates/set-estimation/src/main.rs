use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(set_estimation::cli::cli_dispatch(std::env::args()) as u8)
}
