fn main() -> std::process::ExitCode {
    dqi_service::cli::main()
}
