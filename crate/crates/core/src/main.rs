use std::process::ExitCode;

fn main() -> ExitCode {
    chronoenv::cli::run()
}
