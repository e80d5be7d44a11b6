fn main() -> std::process::ExitCode {
    rksampling::cli::main()
}
