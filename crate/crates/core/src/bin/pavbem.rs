fn main() -> std::process::ExitCode {
    pavbem::cli::main_with_args(std::env::args_os())
}
