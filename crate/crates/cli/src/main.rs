fn main() -> std::process::ExitCode {
    matched_did_cli::main_with(std::env::args_os())
}
