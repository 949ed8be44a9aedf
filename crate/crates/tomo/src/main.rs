use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ndo_tomo::cli::main_with_args(std::env::args_os().collect()))
}
