use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(cacc_dsrc::cli::run(std::env::args_os()))
}
