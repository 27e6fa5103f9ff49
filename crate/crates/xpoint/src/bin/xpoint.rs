use std::process::ExitCode;

fn main() -> ExitCode {
    xpoint::cli::run(std::env::args_os())
}
