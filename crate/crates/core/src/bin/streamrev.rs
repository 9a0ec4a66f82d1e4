fn main() -> std::process::ExitCode {
    streamrev::cli::main()
}
