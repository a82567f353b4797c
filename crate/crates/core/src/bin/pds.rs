fn main() -> std::process::ExitCode {
    pds_core::cli::main_entry()
}
