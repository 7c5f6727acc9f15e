fn main() -> std::process::ExitCode {
    levy_passage::expcli::cli_main()
}
