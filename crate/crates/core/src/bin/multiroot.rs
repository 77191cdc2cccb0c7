use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(multiroot::cli::run(std::env::args_os()))
}
