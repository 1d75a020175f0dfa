use std::process::ExitCode;

fn main() -> ExitCode {
    pipeflow::cli::main()
}
