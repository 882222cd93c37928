use std::process::ExitCode;

fn main() -> ExitCode {
    aegd::cli::main_with(std::env::args_os())
}
