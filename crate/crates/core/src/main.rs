use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(mott_osc::cli::main_with_args(std::env::args_os()))
}
