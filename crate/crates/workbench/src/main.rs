fn main() -> std::process::ExitCode {
    basinplan_workbench::cli::main_with(std::env::args_os().collect())
}
