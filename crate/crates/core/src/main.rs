fn main() -> std::process::ExitCode {
    lanewise::cli::run(std::env::args_os())
}
