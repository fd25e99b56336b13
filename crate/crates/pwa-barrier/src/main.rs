use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(pwa_barrier::cli::run() as u8)
}
