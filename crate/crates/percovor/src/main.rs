use std::process::ExitCode;

fn main() -> ExitCode {
    percovor::cli::main()
}
