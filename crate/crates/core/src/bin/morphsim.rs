fn main() -> std::process::ExitCode {
    morphsim::cli::main()
}
