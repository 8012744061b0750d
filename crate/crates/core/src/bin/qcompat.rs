use std::process::ExitCode;

fn main() -> ExitCode {
    qcompat::cli::main()
}
