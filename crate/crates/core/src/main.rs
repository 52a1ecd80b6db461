use std::process::ExitCode;

fn main() -> ExitCode {
    let status = mps_core::cli::run(std::env::args_os(), &mut std::io::stdout().lock());
    ExitCode::from(status.code())
}
