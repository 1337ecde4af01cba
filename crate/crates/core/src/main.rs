fn main() -> std::process::ExitCode {
    adaseq::cli::main()
}
