fn main() -> std::process::ExitCode {
    firecover::cli::main()
}
